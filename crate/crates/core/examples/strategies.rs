//! Postselection and preprocessing applied to single rounds.
use diqss::montecarlo::RoundRecord;
use diqss::noisemodel::Outcome::{Minus, NoClick, Plus};
use diqss::nonlocality::BasisTriple;
use diqss::strategies::{apply_to_record, postselect_map, preprocess_flip_distribution, StrategyConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> diqss::Result<()> {
    println!("postselect [⊥, -, ⊥] -> {:?}", postselect_map([NoClick, Minus, NoClick]));
    println!("QBER 0.05 after flipping with q = 0.2: {:.4}", preprocess_flip_distribution(0.05, 0.2)?);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = StrategyConfig::advanced(0.4)?;
    let key_round = RoundRecord::new(BasisTriple::new(1, 1, 1), [Plus, NoClick, Minus]);
    for _ in 0..5 {
        let r = apply_to_record(&key_round, &cfg, &mut rng)?;
        println!("{:?} flipped={} bits={:?} error={}", r.outcomes, r.flipped, r.key_bits, r.is_key_error());
    }
    Ok(())
}
