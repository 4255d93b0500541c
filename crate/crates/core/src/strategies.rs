//! Noise preprocessing and postselection, on tables and on sampled rounds.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::montecarlo::RoundRecord;
use crate::noisemodel::{triple_index, Outcome, OutcomeTable, OutcomeTriple};
use crate::nonlocality::SiftCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    /// Three-value outcomes, no flip.
    None,
    /// Alice flips her key bit with probability `q`.
    Preprocess,
    /// No-click mapped to `+1`.
    Postselect,
    /// Postselection followed by Alice's flip.
    Advanced,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::None,
        StrategyKind::Preprocess,
        StrategyKind::Postselect,
        StrategyKind::Advanced,
    ];

    pub fn flips(self) -> bool {
        matches!(self, StrategyKind::Preprocess | StrategyKind::Advanced)
    }

    pub fn postselects(self) -> bool {
        matches!(self, StrategyKind::Postselect | StrategyKind::Advanced)
    }

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::None => "none",
            StrategyKind::Preprocess => "preprocess",
            StrategyKind::Postselect => "postselect",
            StrategyKind::Advanced => "advanced",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "plain" => Ok(StrategyKind::None),
            "preprocess" | "preprocessing" => Ok(StrategyKind::Preprocess),
            "postselect" | "postselection" => Ok(StrategyKind::Postselect),
            "advanced" => Ok(StrategyKind::Advanced),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Strategy and flip probability. `q` is ignored unless the kind flips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub q: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self::none()
    }
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind, q: f64) -> Result<Self> {
        let cfg = Self { kind, q };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn none() -> Self {
        Self {
            kind: StrategyKind::None,
            q: 0.0,
        }
    }

    pub fn postselect() -> Self {
        Self {
            kind: StrategyKind::Postselect,
            q: 0.0,
        }
    }

    pub fn preprocess(q: f64) -> Result<Self> {
        Self::new(StrategyKind::Preprocess, q)
    }

    pub fn advanced(q: f64) -> Result<Self> {
        Self::new(StrategyKind::Advanced, q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.flips() && !(0.0..=0.5).contains(&self.q) {
            return Err(Error::Domain(format!("flip probability q must lie in [0, 0.5], got {}", self.q)));
        }
        Ok(())
    }

    /// `q` when the strategy flips, otherwise 0.
    pub fn effective_q(&self) -> f64 {
        if self.kind.flips() {
            self.q
        } else {
            0.0
        }
    }

    /// Short label, e.g. `advanced(q=0.2)`.
    pub fn label(&self) -> String {
        if self.kind.flips() {
            format!("{}(q={})", self.kind, self.q)
        } else {
            self.kind.to_string()
        }
    }
}

/// Deterministic two-value remap: every no-click becomes `+1`.
pub fn postselect_map(t: OutcomeTriple) -> OutcomeTriple {
    t.map(|o| match o {
        Outcome::NoClick => Outcome::Plus,
        other => other,
    })
}

/// Aggregates a three-value table along [`postselect_map`].
pub fn postselect_table(t: &OutcomeTable) -> OutcomeTable {
    let mut probs = [0.0; 27];
    for (triple, p) in t.iter() {
        probs[triple_index(postselect_map(triple))] += p;
    }
    OutcomeTable::from_probs(t.settings, probs)
}

/// Error probability after Alice flips with probability `q`:
/// `q (1 - p) + (1 - q) p = q + (1 - 2q) p`.
pub fn preprocess_flip_distribution(p_error: f64, q: f64) -> Result<f64> {
    check_probability("error probability", p_error)?;
    check_probability("flip probability", q)?;
    Ok(q + (1.0 - 2.0 * q) * p_error)
}

fn flip(o: Outcome) -> Outcome {
    match o {
        Outcome::Plus => Outcome::Minus,
        Outcome::Minus => Outcome::Plus,
        Outcome::NoClick => Outcome::NoClick,
    }
}

/// Flips Alice's outcome. Only key rounds may be flipped.
pub fn flip_alice(record: &RoundRecord) -> Result<RoundRecord> {
    if record.sift_case != SiftCase::Key {
        return Err(Error::ContractViolation(format!(
            "preprocessing flip requested on a {:?} round ({})",
            record.sift_case, record.bases
        )));
    }
    let mut out = *record;
    out.outcomes[0] = flip(out.outcomes[0]);
    out.flipped = !record.flipped;
    out.refresh_key_bits();
    Ok(out)
}

/// Applies `cfg` to a round's raw outcomes: postselection (if any) on every
/// round, then Alice's flip on key rounds only. One uniform draw is consumed
/// per key round whenever the strategy flips.
pub fn apply_to_record<R: Rng + ?Sized>(record: &RoundRecord, cfg: &StrategyConfig, rng: &mut R) -> Result<RoundRecord> {
    cfg.validate()?;
    let mut out = *record;
    out.outcomes = if cfg.kind.postselects() {
        postselect_map(record.raw)
    } else {
        record.raw
    };
    out.flipped = false;
    out.refresh_key_bits();
    if cfg.kind.flips() && out.sift_case == SiftCase::Key {
        let draw: f64 = rng.random();
        if draw < cfg.q {
            out = flip_alice(&out)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlocality::{BasisTriple, SettingTriple};
    use crate::noisemodel::{outcome_table, triple_from_index, white_noise_state};
    use proptest::prelude::*;
    use rand::RngCore;
    use Outcome::{Minus as M, NoClick as N, Plus as P};

    /// The remap written out row by row.
    const MAPPING_ROWS: [(OutcomeTriple, OutcomeTriple); 19] = [
        ([P, P, N], [P, P, P]),
        ([P, N, P], [P, P, P]),
        ([N, P, P], [P, P, P]),
        ([P, N, N], [P, P, P]),
        ([N, P, N], [P, P, P]),
        ([N, N, P], [P, P, P]),
        ([N, N, N], [P, P, P]),
        ([N, M, M], [P, M, M]),
        ([M, N, M], [M, P, M]),
        ([M, M, N], [M, M, P]),
        ([P, N, M], [P, P, M]),
        ([N, P, M], [P, P, M]),
        ([N, N, M], [P, P, M]),
        ([P, M, N], [P, M, P]),
        ([N, M, P], [P, M, P]),
        ([N, M, N], [P, M, P]),
        ([M, P, N], [M, P, P]),
        ([M, N, P], [M, P, P]),
        ([M, N, N], [M, P, P]),
    ];

    #[test]
    fn postselect_map_matches_table() {
        for (from, to) in MAPPING_ROWS {
            assert_eq!(postselect_map(from), to, "{from:?}");
        }
        // the rows above plus the eight click-only triples cover all 27
        let click_only = (0..27).map(triple_from_index).filter(|t| !t.contains(&N)).count();
        assert_eq!(MAPPING_ROWS.len() + click_only, 27);
    }

    #[test]
    fn postselect_table_aggregation() {
        let t = outcome_table(&white_noise_state(0.93).unwrap(), 0.8, SettingTriple::new(0.0, 0.0, 0.0)).unwrap();
        let p = postselect_table(&t);
        assert_eq!(p.get([M, M, M]), t.get([M, M, M]));
        assert!((p.get([P, M, M]) - (t.get([P, M, M]) + t.get([N, M, M]))).abs() < 1e-15);
        let ppp = [[P, P, P], [P, P, N], [P, N, P], [N, P, P], [P, N, N], [N, P, N], [N, N, P], [N, N, N]]
            .iter()
            .map(|tr| t.get(*tr))
            .sum::<f64>();
        assert!((p.get([P, P, P]) - ppp).abs() < 1e-15);
        let ppm = t.get([P, P, M]) + t.get([P, N, M]) + t.get([N, P, M]) + t.get([N, N, M]);
        assert!((p.get([P, P, M]) - ppm).abs() < 1e-15);
        assert!((p.total() - 1.0).abs() < 1e-12);
        assert!(p.iter().filter(|(tr, _)| tr.contains(&N)).all(|(_, x)| x == 0.0));
    }

    #[test]
    fn flip_distribution_values() {
        assert_eq!(preprocess_flip_distribution(0.07, 0.0).unwrap(), 0.07);
        assert_eq!(preprocess_flip_distribution(0.07, 0.5).unwrap(), 0.5);
        assert!((preprocess_flip_distribution(0.05, 0.2).unwrap() - 0.23).abs() < 1e-15);
        assert!(preprocess_flip_distribution(1.1, 0.2).is_err());
    }

    #[test]
    fn strategy_config_validation() {
        assert!(StrategyConfig::preprocess(0.6).is_err());
        assert!(StrategyConfig::advanced(-0.1).is_err());
        assert!(StrategyConfig::new(StrategyKind::Postselect, 0.9).is_ok());
        assert_eq!(StrategyConfig::new(StrategyKind::Postselect, 0.9).unwrap().effective_q(), 0.0);
        assert_eq!("advanced".parse::<StrategyKind>().unwrap(), StrategyKind::Advanced);
        assert!("bogus".parse::<StrategyKind>().is_err());
    }

    fn record(bases: BasisTriple, raw: OutcomeTriple) -> RoundRecord {
        RoundRecord::new(bases, raw)
    }

    /// Emits the same word forever.
    struct ConstRng(u64);

    impl RngCore for ConstRng {
        fn next_u32(&mut self) -> u32 {
            self.0 as u32
        }

        fn next_u64(&mut self) -> u64 {
            self.0
        }

        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(self.0 as u8);
        }
    }

    // all-zero words give a uniform draw of 0.0 (flips whenever q > 0);
    // all-one words give a draw just below 1.0 (never flips)
    fn always() -> ConstRng {
        ConstRng(0)
    }

    fn never() -> ConstRng {
        ConstRng(u64::MAX)
    }

    #[test]
    fn key_round_flip() {
        let r = record(BasisTriple::new(1, 1, 1), [P, P, P]);
        let cfg = StrategyConfig::preprocess(0.3).unwrap();
        let out = apply_to_record(&r, &cfg, &mut always()).unwrap();
        assert_eq!(out.outcomes, [M, P, P]);
        assert!(out.flipped);
        assert_eq!(out.key_bits, Some([1, 0, 0]));
        let kept = apply_to_record(&r, &cfg, &mut never()).unwrap();
        assert_eq!(kept.outcomes, [P, P, P]);
        assert_eq!(kept.key_bits, Some([0, 0, 0]));
    }

    #[test]
    fn test_rounds_never_flip() {
        let r = record(BasisTriple::new(2, 3, 1), [P, M, P]);
        for cfg in [StrategyConfig::preprocess(0.5).unwrap(), StrategyConfig::advanced(0.5).unwrap()] {
            let out = apply_to_record(&r, &cfg, &mut always()).unwrap();
            assert_eq!(out.outcomes, r.raw);
            assert!(!out.flipped);
        }
        assert!(matches!(flip_alice(&r), Err(Error::ContractViolation(_))));
        let discard = record(BasisTriple::new(2, 1, 1), [P, P, P]);
        assert!(flip_alice(&discard).is_err());
    }

    #[test]
    fn advanced_postselects_then_flips() {
        let r = record(BasisTriple::new(1, 1, 1), [N, M, M]);
        let cfg = StrategyConfig::advanced(0.2).unwrap();
        assert_eq!(apply_to_record(&r, &cfg, &mut never()).unwrap().outcomes, [P, M, M]);
        assert_eq!(apply_to_record(&r, &cfg, &mut always()).unwrap().outcomes, [M, M, M]);
        // postselection applies to test rounds too
        let t = record(BasisTriple::new(1, 2, 2), [N, N, M]);
        assert_eq!(apply_to_record(&t, &cfg, &mut always()).unwrap().outcomes, [P, P, M]);
        // plain strategy keeps the no-click
        let plain = apply_to_record(&r, &StrategyConfig::none(), &mut always()).unwrap();
        assert_eq!(plain.outcomes, [N, M, M]);
        assert_eq!(plain.key_bits, None);
    }

    proptest! {
        #[test]
        fn postselect_idempotent(idx in 0usize..27) {
            let t = triple_from_index(idx);
            let once = postselect_map(t);
            prop_assert_eq!(postselect_map(once), once);
            if !t.contains(&N) {
                prop_assert_eq!(once, t);
            }
        }

        #[test]
        fn flip_distribution_symmetric(p in 0.0..=1.0f64, q in 0.0..=0.5f64) {
            let a = preprocess_flip_distribution(p, q).unwrap();
            let b = preprocess_flip_distribution(1.0 - p, q).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn postselect_preserves_mass(probs in proptest::collection::vec(0.0..1.0f64, 27)) {
            let total: f64 = probs.iter().sum();
            let mut arr = [0.0; 27];
            for (a, p) in arr.iter_mut().zip(&probs) {
                *a = p / total.max(1e-300);
            }
            let t = OutcomeTable::from_probs(SettingTriple::new(0.0, 0.0, 0.0), arr);
            prop_assert!((postselect_table(&t).total() - t.total()).abs() < 1e-12);
        }
    }
}
