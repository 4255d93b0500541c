//! Channel model: white noise on the GHZ state, independent per-photon loss,
//! and an imperfect (phase-flipping) source.
//!
//! Ordering is source -> white-noise channel -> detection. Each party clicks
//! independently with probability `eta`; a lost photon reports `NoClick` and
//! the remaining parties measure the reduced state.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::nonlocality::{BasisTriple, ProtocolAngles, SettingTriple};
use crate::qstate::{equatorial_projector, ghz, mix, tensor, CMatrix, DensityMatrix, Sign};

/// `F` (channel fidelity), `eta` (global detection efficiency) and `F_s`
/// (source fidelity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub fidelity: f64,
    pub efficiency: f64,
    pub source_fidelity: f64,
}

impl ChannelParams {
    pub fn new(fidelity: f64, efficiency: f64) -> Result<Self> {
        let p = Self {
            fidelity,
            efficiency,
            source_fidelity: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_source_fidelity(mut self, source_fidelity: f64) -> Result<Self> {
        self.source_fidelity = source_fidelity;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("fidelity", self.fidelity)?;
        check_probability("efficiency", self.efficiency)?;
        check_probability("source fidelity", self.source_fidelity)
    }

    /// Three-qubit state reaching the detectors (before loss).
    pub fn state(&self) -> Result<DensityMatrix> {
        channel_state(self.fidelity, self.source_fidelity)
    }
}

/// Single-party detector response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
    NoClick,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::Plus, Outcome::Minus, Outcome::NoClick];

    /// `+1`, `-1`, or `0` for a no-click.
    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
            Outcome::NoClick => 0,
        }
    }

    pub fn from_value(v: i8) -> Outcome {
        match v {
            1 => Outcome::Plus,
            -1 => Outcome::Minus,
            _ => Outcome::NoClick,
        }
    }

    fn ordinal(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
            Outcome::NoClick => 2,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Outcome::Plus => '+',
            Outcome::Minus => '-',
            Outcome::NoClick => '⊥',
        }
    }
}

pub type OutcomeTriple = [Outcome; 3];

pub(crate) fn triple_index(t: OutcomeTriple) -> usize {
    t[0].ordinal() * 9 + t[1].ordinal() * 3 + t[2].ordinal()
}

pub(crate) fn triple_from_index(idx: usize) -> OutcomeTriple {
    [Outcome::ALL[idx / 9], Outcome::ALL[(idx / 3) % 3], Outcome::ALL[idx % 3]]
}

/// Joint distribution over `{+, -, ⊥}^3` for one setting triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable {
    pub settings: SettingTriple,
    probs: [f64; 27],
}

impl OutcomeTable {
    pub fn from_probs(settings: SettingTriple, probs: [f64; 27]) -> Self {
        Self { settings, probs }
    }

    pub fn get(&self, t: OutcomeTriple) -> f64 {
        self.probs[triple_index(t)]
    }

    pub fn probs(&self) -> &[f64; 27] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (OutcomeTriple, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, p)| (triple_from_index(i), *p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Probability that `party` (0 = Alice) reports no click.
    pub fn no_click_marginal(&self, party: usize) -> f64 {
        self.iter().filter(|(t, _)| t[party] == Outcome::NoClick).map(|(_, p)| p).sum()
    }

    /// `E[a b c]` with a no-click valued 0.
    pub fn correlator(&self) -> f64 {
        self.iter()
            .map(|(t, p)| f64::from(t[0].value() * t[1].value() * t[2].value()) * p)
            .sum()
    }

    /// Probability that all three parties click.
    pub fn all_click(&self) -> f64 {
        self.iter()
            .filter(|(t, _)| t.iter().all(|o| *o != Outcome::NoClick))
            .map(|(_, p)| p)
            .sum()
    }

    /// Checks nonnegativity and normalization.
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.probs.iter().find(|p| **p < -1e-12) {
            return Err(Error::Domain(format!("negative outcome probability {p}")));
        }
        let total = self.total();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("outcome table sums to {total}")));
        }
        Ok(())
    }
}

/// `rho = F |GHZ><GHZ| + (1 - F) I / 8`.
pub fn white_noise_state(fidelity: f64) -> Result<DensityMatrix> {
    channel_state(fidelity, 1.0)
}

/// Source output with only phase-flip errors:
/// `F_s |GHZ1+><GHZ1+| + (1 - F_s) |GHZ1-><GHZ1-|`.
pub fn source_state(source_fidelity: f64) -> Result<DensityMatrix> {
    check_probability("source fidelity", source_fidelity)?;
    mix(
        &[source_fidelity, 1.0 - source_fidelity],
        &[ghz(1, Sign::Plus)?.projector(), ghz(1, Sign::Minus)?.projector()],
    )
}

/// Source state passed through the white-noise channel.
pub fn channel_state(fidelity: f64, source_fidelity: f64) -> Result<DensityMatrix> {
    check_probability("fidelity", fidelity)?;
    mix(
        &[fidelity, 1.0 - fidelity],
        &[source_state(source_fidelity)?, DensityMatrix::maximally_mixed(3)?],
    )
}

/// Effective fidelity of an imperfect source followed by the channel,
/// `F_comb = F (2 F_s - 1)`, chosen so that `(1 - F_comb)/2` is the composed QBER.
pub fn compose_source(source_fidelity: f64, fidelity: f64) -> Result<f64> {
    check_probability("source fidelity", source_fidelity)?;
    check_probability("fidelity", fidelity)?;
    Ok(fidelity * (2.0 * source_fidelity - 1.0))
}

/// Key-round QBER of the composed source and channel with no loss:
/// `F_s (1-F)/2 + (1-F_s) F + (1-F_s)(1-F)/2 = 1/2 + F/2 - F_s F`.
pub fn composed_qber(source_fidelity: f64, fidelity: f64) -> Result<f64> {
    check_probability("source fidelity", source_fidelity)?;
    check_probability("fidelity", fidelity)?;
    Ok(0.5 + 0.5 * fidelity - source_fidelity * fidelity)
}

/// Born-rule distribution of the clicked parties' outcomes, placed into a
/// 27-entry table with `weight` and every other party set to `NoClick`.
fn accumulate_clicked(
    probs: &mut [f64; 27],
    weight: f64,
    clicked: &[usize],
    state: Option<&DensityMatrix>,
    settings: SettingTriple,
) -> Result<()> {
    let angles = settings.as_array();
    if clicked.is_empty() {
        probs[triple_index([Outcome::NoClick; 3])] += weight;
        return Ok(());
    }
    let state = state.ok_or_else(|| Error::Domain("clicked parties need a state".into()))?;
    if state.num_qubits() != clicked.len() {
        return Err(Error::Domain(format!(
            "state has {} qubits but {} parties clicked",
            state.num_qubits(),
            clicked.len()
        )));
    }
    for pattern in 0..(1usize << clicked.len()) {
        let mut triple = [Outcome::NoClick; 3];
        let mut proj = CMatrix::identity(1, 1);
        for (pos, &party) in clicked.iter().enumerate() {
            let sign: i8 = if (pattern >> (clicked.len() - 1 - pos)) & 1 == 0 { 1 } else { -1 };
            triple[party] = Outcome::from_value(sign);
            proj = tensor(&proj, &equatorial_projector(angles[party], sign));
        }
        let p = (state.matrix() * proj).trace().re;
        probs[triple_index(triple)] += weight * p.max(0.0);
    }
    Ok(())
}

fn loss_weight(mask: usize, efficiency: f64) -> (f64, Vec<usize>) {
    let clicked: Vec<usize> = (0..3).filter(|p| mask >> (2 - p) & 1 == 1).collect();
    let k = clicked.len() as i32;
    (efficiency.powi(k) * (1.0 - efficiency).powi(3 - k), clicked)
}

/// Outcome distribution for `rho` under independent loss at efficiency `eta`.
pub fn outcome_table(rho: &DensityMatrix, efficiency: f64, settings: SettingTriple) -> Result<OutcomeTable> {
    check_probability("efficiency", efficiency)?;
    if rho.num_qubits() != 3 {
        return Err(Error::Domain("outcome tables need a three-qubit state".into()));
    }
    if !settings.is_finite() {
        return Err(Error::Domain("measurement angles must be finite".into()));
    }
    let mut probs = [0.0; 27];
    for mask in 0..8usize {
        let (weight, clicked) = loss_weight(mask, efficiency);
        if weight == 0.0 {
            continue;
        }
        let reduced = if clicked.is_empty() {
            None
        } else {
            Some(rho.partial_trace(&clicked)?)
        };
        accumulate_clicked(&mut probs, weight, &clicked, reduced.as_ref(), settings)?;
    }
    Ok(OutcomeTable { settings, probs })
}

/// Outcome tables for all twelve basis combinations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTables {
    tables: Vec<OutcomeTable>,
}

impl ProtocolTables {
    pub fn new(rho: &DensityMatrix, efficiency: f64, angles: &ProtocolAngles) -> Result<Self> {
        let tables = BasisTriple::all()
            .map(|b| outcome_table(rho, efficiency, angles.settings(b)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tables })
    }

    pub fn get(&self, basis: BasisTriple) -> &OutcomeTable {
        &self.tables[basis.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (BasisTriple, &OutcomeTable)> {
        self.tables.iter().enumerate().map(|(i, t)| (BasisTriple::from_index(i), t))
    }

    pub fn map<F: Fn(&OutcomeTable) -> OutcomeTable>(&self, f: F) -> ProtocolTables {
        ProtocolTables {
            tables: self.tables.iter().map(f).collect(),
        }
    }
}

/// One term of the lossy mixed state: which parties hold a photon, the
/// term's probability weight, and the normalized state of those photons.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub detected: Vec<usize>,
    pub weight: f64,
    /// `None` for the vacuum branch.
    pub state: Option<DensityMatrix>,
}

/// Explicit branch form of the shared lossy state: the all-detected noisy GHZ
/// state with weight `eta^3`, `(|HH><HH| + |VV><VV|)/2` on each surviving pair
/// with weight `eta^2 (1-eta)`, `I/2` on each surviving single photon with
/// weight `eta (1-eta)^2`, and vacuum with weight `(1-eta)^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchDescription {
    pub branches: Vec<Branch>,
}

pub fn full_mixed_state_description(fidelity: f64, efficiency: f64) -> Result<BranchDescription> {
    check_probability("efficiency", efficiency)?;
    let full = white_noise_state(fidelity)?;
    let diag = |d: &[f64]| -> Result<DensityMatrix> {
        DensityMatrix::new(CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d.len(),
            d.iter().map(|x| (*x).into()),
        )))
    };
    let pair = diag(&[0.5, 0.0, 0.0, 0.5])?;
    let single = diag(&[0.5, 0.5])?;

    let mut branches = Vec::new();
    for mask in (0..8usize).rev() {
        let (weight, detected) = loss_weight(mask, efficiency);
        if weight == 0.0 {
            continue;
        }
        let state = match detected.len() {
            3 => Some(full.clone()),
            2 => Some(pair.clone()),
            1 => Some(single.clone()),
            _ => None,
        };
        branches.push(Branch { detected, weight, state });
    }
    Ok(BranchDescription { branches })
}

impl BranchDescription {
    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }

    /// Outcome table generated by measuring every branch.
    pub fn induced_table(&self, settings: SettingTriple) -> Result<OutcomeTable> {
        let mut probs = [0.0; 27];
        for b in &self.branches {
            accumulate_clicked(&mut probs, b.weight, &b.detected, b.state.as_ref(), settings)?;
        }
        Ok(OutcomeTable { settings, probs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlocality::svetlichny;
    use crate::qstate::random_density_matrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use std::f64::consts::{PI, SQRT_2};
    use Outcome::{Minus as M, NoClick as N, Plus as P};

    fn xxx() -> SettingTriple {
        SettingTriple::new(0.0, 0.0, 0.0)
    }

    #[test]
    fn white_noise_extremes() {
        let pure = white_noise_state(1.0).unwrap();
        let g = ghz(1, Sign::Plus).unwrap().projector();
        assert!((pure.matrix() - g.matrix()).norm() < 1e-15);
        let mixed = white_noise_state(0.0).unwrap();
        assert!(mixed.eigenvalues().iter().all(|e| (e - 0.125).abs() < 1e-12));
        assert!(white_noise_state(1.2).is_err());
        assert!(white_noise_state(-0.1).is_err());
    }

    #[test]
    fn white_noise_spectrum() {
        let rho = white_noise_state(0.9).unwrap();
        let ev = rho.eigenvalues();
        assert!((ev[7] - 0.9125).abs() < 1e-12);
        assert!(ev[..7].iter().all(|e| (e - 0.0125).abs() < 1e-12));
        // weight of the target projector
        let g = ghz(1, Sign::Plus).unwrap();
        let w = crate::qstate::expectation(&rho, &crate::qstate::Observable::new(g.projector().matrix().clone()).unwrap()).unwrap();
        assert!((w - (0.9 + 0.1 / 8.0)).abs() < 1e-12);
    }

    #[test]
    fn ghz_table_in_x_basis() {
        let eta: f64 = 0.83;
        let t = outcome_table(&white_noise_state(1.0).unwrap(), eta, xxx()).unwrap();
        let e3 = eta.powi(3) / 4.0;
        for tr in [[P, P, P], [P, M, M], [M, P, M], [M, M, P]] {
            assert!((t.get(tr) - e3).abs() < 1e-12);
        }
        for tr in [[P, P, M], [P, M, P], [M, P, P], [M, M, M]] {
            assert!(t.get(tr).abs() < 1e-12);
        }
        let one_lost = eta * eta * (1.0 - eta) / 4.0;
        for tr in [[P, P, N], [P, M, N], [P, N, P], [P, N, M], [M, P, N], [M, M, N], [M, N, P], [M, N, M], [N, P, P], [N, P, M], [N, M, P], [N, M, M]] {
            assert!((t.get(tr) - one_lost).abs() < 1e-12);
        }
        let two_lost = eta * (1.0 - eta).powi(2) / 2.0;
        for tr in [[P, N, N], [M, N, N], [N, P, N], [N, M, N], [N, N, P], [N, N, M]] {
            assert!((t.get(tr) - two_lost).abs() < 1e-12);
        }
        assert!((t.get([N, N, N]) - (1.0 - eta).powi(3)).abs() < 1e-12);
        t.validate().unwrap();
    }

    #[test]
    fn source_composition() {
        assert_eq!(compose_source(1.0, 0.87).unwrap(), 0.87);
        let q = composed_qber(0.96, 0.9114).unwrap();
        assert!((q - 0.080756).abs() < 1e-12);
        let f = compose_source(0.96, 1.0).unwrap();
        assert!((f - 0.92).abs() < 1e-12);
        assert!((composed_qber(0.96, 1.0).unwrap() - 0.04).abs() < 1e-12);
        for (fs, fc) in [(0.96, 0.9), (0.86, 0.97), (0.7, 0.5)] {
            let comb = compose_source(fs, fc).unwrap();
            assert!(((1.0 - comb) / 2.0 - composed_qber(fs, fc).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_flip_source_gives_composed_qber() {
        // key-round error = P(abc = -1) in X X X, no loss
        for (fs, fc) in [(0.96, 0.9114), (0.9, 1.0), (1.0, 0.8)] {
            let t = outcome_table(&channel_state(fc, fs).unwrap(), 1.0, xxx()).unwrap();
            let err: f64 = t.iter().filter(|(tr, _)| tr.iter().map(|o| o.value()).product::<i8>() == -1).map(|(_, p)| p).sum();
            assert!((err - composed_qber(fs, fc).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn branch_weights() {
        let d = full_mixed_state_description(0.7, 1.0).unwrap();
        assert_eq!(d.branches.len(), 1);
        assert_eq!(d.branches[0].state.as_ref().unwrap(), &white_noise_state(0.7).unwrap());
        let d = full_mixed_state_description(0.7, 0.0).unwrap();
        assert_eq!(d.branches.len(), 1);
        assert!(d.branches[0].state.is_none());
        assert_eq!(d.branches[0].weight, 1.0);
        let d = full_mixed_state_description(1.0, 0.9).unwrap();
        assert!((d.branches[0].weight - 0.729).abs() < 1e-12);
        assert_eq!(d.branches.len(), 8);
        assert!((d.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svetlichny_scales_with_fidelity() {
        let angles = ProtocolAngles::default();
        for f in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let s = svetlichny(&white_noise_state(f).unwrap(), &angles).unwrap();
            assert!((s - 4.0 * SQRT_2 * f).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn tables_are_normalized(seed in any::<u64>(), eta in 0.0..=1.0f64, a in -PI..PI, b in -PI..PI, c in -PI..PI) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density_matrix(&mut rng, 3).unwrap();
            let t = outcome_table(&rho, eta, SettingTriple::new(a, b, c)).unwrap();
            prop_assert!(t.validate().is_ok());
            for party in 0..3 {
                prop_assert!((t.no_click_marginal(party) - (1.0 - eta)).abs() < 1e-10);
            }
        }

        #[test]
        fn branch_form_matches_independent_loss(f in 0.0..=1.0f64, eta in 0.0..=1.0f64, a in -PI..PI, b in -PI..PI, c in -PI..PI) {
            let s = SettingTriple::new(a, b, c);
            let direct = outcome_table(&white_noise_state(f).unwrap(), eta, s).unwrap();
            let branches = full_mixed_state_description(f, eta).unwrap().induced_table(s).unwrap();
            for (x, y) in direct.probs().iter().zip(branches.probs()) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
