//! Seeded simulation checked against the closed forms.
use diqss::keyrate::ProtocolParams;
use diqss::montecarlo::compare_to_analytic;
use diqss::StrategyConfig;

fn main() -> diqss::Result<()> {
    let params = ProtocolParams::new(0.99, 0.96, StrategyConfig::advanced(0.2)?)?;
    let v = compare_to_analytic(&params, 1_000_000, 2024, 4.0)?;
    let sim = &v.simulation;
    println!(
        "sift fractions: test {:.4}, key {:.4}, discard {:.4}",
        sim.sift_fractions.test, sim.sift_fractions.key, sim.sift_fractions.discard
    );
    for m in [v.qber, v.chsh] {
        println!("{:<5} empirical {:.5} ± {:.5}, analytic {:.5}, z = {:.2}", m.quantity, m.empirical, m.std_err, m.analytic, m.z);
    }
    if let Some(r) = sim.estimated_rate {
        println!("plug-in rate {:.5}", r.rate);
    }
    println!("{}", if v.passed() { "agreement within 4 sigma" } else { "DISAGREEMENT" });
    Ok(())
}
