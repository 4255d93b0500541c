//! Rate breakdown for each strategy at one operating point.
use diqss::keyrate::{key_rate, ProtocolParams};
use diqss::StrategyConfig;

fn main() -> diqss::Result<()> {
    let strategies = [
        StrategyConfig::none(),
        StrategyConfig::preprocess(0.2)?,
        StrategyConfig::postselect(),
        StrategyConfig::advanced(0.2)?,
    ];
    println!("{:<20} {:>9} {:>9} {:>9} {:>9} {:>9}", "strategy", "delta", "S", "H(A|E)", "h(delta)", "rate");
    for s in strategies {
        let r = key_rate(&ProtocolParams::new(0.99, 0.975, s)?)?;
        println!(
            "{:<20} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
            s.label(),
            r.delta,
            r.chsh,
            r.eve_bound,
            r.key_error,
            r.rate
        );
    }
    Ok(())
}
