//! Distance thresholds over fiber with 98% detectors and 99% coupling.
use diqss::thresholds::{global_efficiency, threshold, Channel, FiberModel, Scenario, Variable, DEFAULT_TOL};
use diqss::StrategyConfig;

fn main() -> diqss::Result<()> {
    let fiber = FiberModel::new(0.98, 0.99)?;
    println!("eta at 1 km: {:.5}", global_efficiency(&fiber.with_distance(1.0)?)?);
    for s in [
        StrategyConfig::none(),
        StrategyConfig::preprocess(0.2)?,
        StrategyConfig::postselect(),
        StrategyConfig::advanced(0.2)?,
    ] {
        let r = threshold(&Scenario::new(s, 1.0, Channel::Fiber(fiber)), Variable::Distance, None, DEFAULT_TOL)?;
        println!("{:<20} d* = {:.4} km, between users {:.4} km", s.label(), r.value, r.user_distance.unwrap_or(f64::NAN));
    }
    Ok(())
}
