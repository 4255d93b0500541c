//! Phase-flipping source with fidelity 0.96 in front of a noisy fiber.
use diqss::keyrate::SourceCoupling;
use diqss::noisemodel::composed_qber;
use diqss::thresholds::{source_limited_fidelity, threshold, Channel, FiberModel, Scenario, Variable, DEFAULT_TOL};
use diqss::StrategyConfig;

fn main() -> diqss::Result<()> {
    let fs = 0.96;
    println!("QBER from the source alone: {:.4}", composed_qber(fs, 1.0)?);
    let delta_star = threshold(
        &Scenario::new(StrategyConfig::preprocess(0.4)?, 1.0, Channel::Global(1.0)),
        Variable::Delta,
        None,
        DEFAULT_TOL,
    )?
    .value;
    let f_star = source_limited_fidelity(fs, delta_star)?;
    println!("delta* = {delta_star:.5}, channel F* = {f_star:.5}, channel noise budget = {:.5}", (1.0 - f_star) / 2.0);

    let fiber = Channel::Fiber(FiberModel::new(0.98, 0.99)?);
    for coupling in [SourceCoupling::QberOnly, SourceCoupling::Full] {
        for f in [1.0, 0.99, 0.98] {
            let s = Scenario::new(StrategyConfig::advanced(0.4)?, f, fiber).with_source(fs, coupling);
            match threshold(&s, Variable::Distance, None, DEFAULT_TOL) {
                Ok(r) => println!("{coupling:<9} F={f}: users {:.4} km apart", r.user_distance.unwrap_or(f64::NAN)),
                Err(e) => println!("{coupling:<9} F={f}: {e}"),
            }
        }
    }
    Ok(())
}
