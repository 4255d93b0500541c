//! Efficiency, noise and fidelity thresholds for every strategy.
use diqss::thresholds::{threshold_suite, Channel, Scenario};
use diqss::StrategyConfig;

fn main() -> diqss::Result<()> {
    for s in [StrategyConfig::none(), StrategyConfig::postselect(), StrategyConfig::advanced(0.4)?] {
        println!("{}", s.label());
        for entry in threshold_suite(&Scenario::new(s, 1.0, Channel::Global(1.0))) {
            match (entry.result, entry.error) {
                (Some(r), _) => println!("  {:<8} {:.6}", entry.name, r.value),
                (None, Some(e)) => println!("  {:<8} none ({e})", entry.name),
                _ => {}
            }
        }
    }
    Ok(())
}
