//! Outcome distribution of a key round under white noise and loss.
use diqss::noisemodel::{outcome_table, white_noise_state};
use diqss::nonlocality::SettingTriple;

fn main() -> diqss::Result<()> {
    let rho = white_noise_state(0.95)?;
    let table = outcome_table(&rho, 0.9, SettingTriple::new(0.0, 0.0, 0.0))?;
    for (triple, p) in table.iter().filter(|(_, p)| *p > 1e-12) {
        let label: String = triple.iter().map(|o| o.symbol()).collect();
        println!("{label}  {p:.6}");
    }
    println!("total {:.12}, all-click {:.6}, <abc> {:.6}", table.total(), table.all_click(), table.correlator());
    Ok(())
}
