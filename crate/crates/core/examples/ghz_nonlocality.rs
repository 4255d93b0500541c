//! Svetlichny and conditioned CHSH values of the GHZ basis states.
use diqss::nonlocality::{conditioned_s_state, decomposition_check, svetlichny, ProtocolAngles};
use diqss::qstate::{ghz_basis, DensityMatrix};

fn main() -> diqss::Result<()> {
    let angles = ProtocolAngles::default();
    println!("{:<8} {:>10} {:>10} {:>10}", "state", "S_ABC", "S|C1=+", "S|C2=+");
    for (variant, sign, ket) in ghz_basis() {
        let rho = ket.projector();
        let s_abc = svetlichny(&rho, &angles)?;
        let s1 = conditioned_s_state(&rho, &angles, 1, 1)?;
        let s2 = conditioned_s_state(&rho, &angles, 1, 2)?;
        println!("GHZ{variant}{:<4} {s_abc:>10.6} {s1:>10.6} {s2:>10.6}", if sign.value() > 0.0 { "+" } else { "-" });
    }
    let (lhs, rhs) = decomposition_check(&DensityMatrix::maximally_mixed(3)?, &angles)?;
    println!("maximally mixed: S_ABC = {lhs:.3e}, Charlie-conditioned sum = {rhs:.3e}");
    Ok(())
}
