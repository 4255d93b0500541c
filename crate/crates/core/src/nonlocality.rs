//! CHSH and Svetlichny polynomials, analytic and from outcome tables.
//!
//! Charlie's key basis `C1 = X` collapses the GHZ pair onto `|phi±>`, which
//! saturates the plain CHSH form `S_AB`; his second basis `C2 = -Y` collapses
//! onto `(|HH> ± i|VV>)/sqrt(2)`, which saturates the remapped form `S'_AB`.
//! The Svetlichny polynomial is therefore assembled as
//! `S_ABC = <S_AB c1> + <S'_AB c2>`, and the sign rule for the conditioned CHSH
//! value follows the same pairing.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noisemodel::{Outcome, ProtocolTables};
use crate::qstate::{equatorial_projector, expectation, joint_equatorial, DensityMatrix, Observable};

/// One equatorial measurement angle per party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingTriple {
    pub alice: f64,
    pub bob: f64,
    pub charlie: f64,
}

impl SettingTriple {
    pub fn new(alice: f64, bob: f64, charlie: f64) -> Self {
        Self { alice, bob, charlie }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alice, self.bob, self.charlie]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|t| t.is_finite())
    }
}

/// Basis indices `(i, j, k)` with `i, k ∈ {1, 2}` and `j ∈ {1, 2, 3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BasisTriple {
    pub alice: u8,
    pub bob: u8,
    pub charlie: u8,
}

/// How a round is used once bases are announced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiftCase {
    /// Bob used `B2` or `B3`: nonlocality estimation.
    Test,
    /// `{A1 B1 C1}`: raw key.
    Key,
    /// Bob used `B1` with any other Alice/Charlie pair.
    Discard,
}

impl BasisTriple {
    pub const fn new(alice: u8, bob: u8, charlie: u8) -> Self {
        Self { alice, bob, charlie }
    }

    /// All twelve combinations, in index order.
    pub fn all() -> impl Iterator<Item = BasisTriple> {
        (1..=2).flat_map(|i| (1..=3).flat_map(move |j| (1..=2).map(move |k| BasisTriple::new(i, j, k))))
    }

    pub fn is_valid(&self) -> bool {
        (1..=2).contains(&self.alice) && (1..=3).contains(&self.bob) && (1..=2).contains(&self.charlie)
    }

    /// Dense index in `0..12`.
    pub fn index(&self) -> usize {
        debug_assert!(self.is_valid());
        (self.alice as usize - 1) * 6 + (self.bob as usize - 1) * 2 + (self.charlie as usize - 1)
    }

    pub fn from_index(idx: usize) -> BasisTriple {
        assert!(idx < 12, "basis index {idx} out of range");
        BasisTriple::new((idx / 6) as u8 + 1, ((idx / 2) % 3) as u8 + 1, (idx % 2) as u8 + 1)
    }

    pub fn sift_case(&self) -> SiftCase {
        match (self.alice, self.bob, self.charlie) {
            (1, 1, 1) => SiftCase::Key,
            (_, 1, _) => SiftCase::Discard,
            _ => SiftCase::Test,
        }
    }
}

impl fmt::Display for BasisTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}B{}C{}", self.alice, self.bob, self.charlie)
    }
}

/// Measurement angles for every basis of every party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolAngles {
    pub alice: [f64; 2],
    pub bob: [f64; 3],
    pub charlie: [f64; 2],
}

impl Default for ProtocolAngles {
    /// `A1 = X, A2 = Y, B1 = X, B2 = (X - Y)/sqrt(2), B3 = (X + Y)/sqrt(2), C1 = X, C2 = -Y`.
    fn default() -> Self {
        Self {
            alice: [0.0, FRAC_PI_2],
            bob: [0.0, -FRAC_PI_4, FRAC_PI_4],
            charlie: [0.0, -FRAC_PI_2],
        }
    }
}

impl ProtocolAngles {
    pub fn settings(&self, basis: BasisTriple) -> SettingTriple {
        SettingTriple::new(
            self.alice[basis.alice as usize - 1],
            self.bob[basis.bob as usize - 1],
            self.charlie[basis.charlie as usize - 1],
        )
    }

    pub fn chsh_settings(&self) -> ChshSettings {
        ChshSettings {
            a1: self.alice[0],
            a2: self.alice[1],
            b2: self.bob[1],
            b3: self.bob[2],
        }
    }
}

/// `<a b c> = Tr[rho E(theta_A) ⊗ E(theta_B) ⊗ E(theta_C)]`.
pub fn correlator(rho: &DensityMatrix, settings: SettingTriple) -> Result<f64> {
    expectation(rho, &joint_equatorial(settings.as_array()))
}

/// Signed Svetlichny terms `(basis, sign)`; the first four are `S_AB` weighted
/// by `c1`, the last four `S'_AB` weighted by `c2`.
pub const SVETLICHNY_TERMS: [(BasisTriple, f64); 8] = [
    (BasisTriple::new(1, 2, 1), 1.0),
    (BasisTriple::new(2, 2, 1), 1.0),
    (BasisTriple::new(1, 3, 1), 1.0),
    (BasisTriple::new(2, 3, 1), -1.0),
    (BasisTriple::new(2, 3, 2), 1.0),
    (BasisTriple::new(2, 2, 2), 1.0),
    (BasisTriple::new(1, 3, 2), 1.0),
    (BasisTriple::new(1, 2, 2), -1.0),
];

/// Tripartite correlators for the eight test combinations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSet {
    values: BTreeMap<BasisTriple, f64>,
}

impl CorrelatorSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, basis: BasisTriple, value: f64) -> Result<()> {
        if !(-1.0 - 1e-10..=1.0 + 1e-10).contains(&value) {
            return Err(Error::Domain(format!("correlator {basis} = {value} outside [-1, 1]")));
        }
        self.values.insert(basis, value);
        Ok(())
    }

    pub fn get(&self, basis: BasisTriple) -> Option<f64> {
        self.values.get(&basis).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (BasisTriple, f64)> + '_ {
        self.values.iter().map(|(b, v)| (*b, *v))
    }

    pub fn from_state(rho: &DensityMatrix, angles: &ProtocolAngles) -> Result<Self> {
        let mut set = Self::new();
        for (basis, _) in SVETLICHNY_TERMS {
            set.insert(basis, correlator(rho, angles.settings(basis))?)?;
        }
        Ok(set)
    }

    /// Correlators from outcome tables, with a no-click contributing 0 to the
    /// product (equivalently: the all-click conditional correlator times the
    /// three-click probability).
    pub fn from_tables(tables: &ProtocolTables) -> Result<Self> {
        let mut set = Self::new();
        for (basis, _) in SVETLICHNY_TERMS {
            set.insert(basis, tables.get(basis).correlator())?;
        }
        Ok(set)
    }
}

/// Svetlichny polynomial from precomputed correlators.
pub fn svetlichny_from(correlators: &CorrelatorSet) -> Result<f64> {
    let missing: Vec<&'static str> = SVETLICHNY_TERMS
        .iter()
        .filter(|(b, _)| correlators.get(*b).is_none())
        .map(|(b, _)| term_name(*b))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingCorrelators(missing));
    }
    Ok(SVETLICHNY_TERMS
        .iter()
        .map(|(b, sign)| sign * correlators.get(*b).expect("checked above"))
        .sum())
}

fn term_name(b: BasisTriple) -> &'static str {
    const NAMES: [&str; 12] = [
        "a1b1c1", "a1b1c2", "a1b2c1", "a1b2c2", "a1b3c1", "a1b3c2", "a2b1c1", "a2b1c2", "a2b2c1", "a2b2c2",
        "a2b3c1", "a2b3c2",
    ];
    NAMES[b.index()]
}

/// Svetlichny polynomial of a three-qubit state at the given angles.
pub fn svetlichny(rho: &DensityMatrix, angles: &ProtocolAngles) -> Result<f64> {
    svetlichny_from(&CorrelatorSet::from_state(rho, angles)?)
}

/// Alice's two and Bob's two test angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub a1: f64,
    pub a2: f64,
    pub b2: f64,
    pub b3: f64,
}

impl Default for ChshSettings {
    fn default() -> Self {
        ProtocolAngles::default().chsh_settings()
    }
}

impl ChshSettings {
    /// Bob's relabelling `b2 -> b3`, `b3 -> -b2`, as an angle substitution.
    pub fn remapped(&self) -> ChshSettings {
        ChshSettings {
            b2: self.b3,
            b3: self.b2 + PI,
            ..*self
        }
    }
}

/// The four bipartite correlators entering a CHSH polynomial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelators {
    pub a1b2: Option<f64>,
    pub a2b2: Option<f64>,
    pub a1b3: Option<f64>,
    pub a2b3: Option<f64>,
}

impl PairCorrelators {
    pub fn from_state(rho_ab: &DensityMatrix, s: &ChshSettings) -> Result<Self> {
        if rho_ab.num_qubits() != 2 {
            return Err(Error::Domain(format!(
                "CHSH needs a two-qubit state, got {} qubits",
                rho_ab.num_qubits()
            )));
        }
        let pair = |a: f64, b: f64| -> Result<f64> {
            let obs: Observable = crate::qstate::equatorial_observable(a)
                .tensor(&crate::qstate::equatorial_observable(b))?;
            expectation(rho_ab, &obs)
        };
        Ok(Self {
            a1b2: Some(pair(s.a1, s.b2)?),
            a2b2: Some(pair(s.a2, s.b2)?),
            a1b3: Some(pair(s.a1, s.b3)?),
            a2b3: Some(pair(s.a2, s.b3)?),
        })
    }

    fn require(&self) -> Result<[f64; 4]> {
        let names = ["a1b2", "a2b2", "a1b3", "a2b3"];
        let vals = [self.a1b2, self.a2b2, self.a1b3, self.a2b3];
        let missing: Vec<&'static str> = names.iter().zip(vals).filter(|(_, v)| v.is_none()).map(|(n, _)| *n).collect();
        if !missing.is_empty() {
            return Err(Error::MissingCorrelators(missing));
        }
        Ok(vals.map(|v| v.expect("checked")))
    }
}

/// `S_AB = <a1 b2> + <a2 b2> + <a1 b3> - <a2 b3>`.
pub fn chsh(c: &PairCorrelators) -> Result<f64> {
    let [a1b2, a2b2, a1b3, a2b3] = c.require()?;
    Ok(a1b2 + a2b2 + a1b3 - a2b3)
}

/// `S'_AB = <a2 b3> + <a2 b2> + <a1 b3> - <a1 b2>`.
pub fn chsh_prime(c: &PairCorrelators) -> Result<f64> {
    let [a1b2, a2b2, a1b3, a2b3] = c.require()?;
    Ok(a2b3 + a2b2 + a1b3 - a1b2)
}

pub fn chsh_state(rho_ab: &DensityMatrix, s: &ChshSettings) -> Result<f64> {
    chsh(&PairCorrelators::from_state(rho_ab, s)?)
}

pub fn chsh_prime_state(rho_ab: &DensityMatrix, s: &ChshSettings) -> Result<f64> {
    chsh_prime(&PairCorrelators::from_state(rho_ab, s)?)
}

/// CHSH form paired with Charlie's basis `k`.
fn paired_chsh(charlie_basis: u8, c: &PairCorrelators) -> Result<f64> {
    match charlie_basis {
        1 => chsh(c),
        2 => chsh_prime(c),
        k => Err(Error::Domain(format!("Charlie basis must be 1 or 2, got {k}"))),
    }
}

/// Returns `(svetlichny(rho), sum over k, c of P(c|C_k) * c * S_k(rho_AB|c))`,
/// the second computed from Charlie-collapsed two-qubit states.
pub fn decomposition_check(rho: &DensityMatrix, angles: &ProtocolAngles) -> Result<(f64, f64)> {
    let lhs = svetlichny(rho, angles)?;
    let settings = angles.chsh_settings();
    let mut rhs = 0.0;
    for k in 1..=2u8 {
        for c in [1i8, -1] {
            let proj = equatorial_projector(angles.charlie[k as usize - 1], c);
            let (p, collapsed) = rho.condition_on(2, &proj)?;
            if let Some(ab) = collapsed {
                rhs += p * f64::from(c) * paired_chsh(k, &PairCorrelators::from_state(&ab, &settings)?)?;
            }
        }
    }
    Ok((lhs, rhs))
}

/// Charlie-signed CHSH value for one of his bases and outcomes, from the exact
/// collapsed state.
pub fn conditioned_s_state(rho: &DensityMatrix, angles: &ProtocolAngles, charlie_outcome: i8, charlie_basis: u8) -> Result<f64> {
    check_branch(charlie_outcome, charlie_basis)?;
    let proj = equatorial_projector(angles.charlie[charlie_basis as usize - 1], charlie_outcome);
    let (_, collapsed) = rho.condition_on(2, &proj)?;
    let ab = collapsed.ok_or(Error::EmptyBranch {
        basis: charlie_basis,
        outcome: charlie_outcome,
    })?;
    let raw = paired_chsh(charlie_basis, &PairCorrelators::from_state(&ab, &angles.chsh_settings())?)?;
    Ok(f64::from(charlie_outcome) * raw)
}

/// Charlie-signed CHSH value from outcome tables: Alice-Bob correlators are
/// conditioned on Charlie clicking with `charlie_outcome` in basis
/// `charlie_basis`, a no-click on Alice's or Bob's side contributing 0.
pub fn conditioned_s(tables: &ProtocolTables, charlie_outcome: i8, charlie_basis: u8) -> Result<f64> {
    check_branch(charlie_outcome, charlie_basis)?;
    let target = if charlie_outcome > 0 { Outcome::Plus } else { Outcome::Minus };
    let pair = |alice: u8, bob: u8| -> Result<f64> {
        let table = tables.get(BasisTriple::new(alice, bob, charlie_basis));
        let mut joint = 0.0;
        let mut marginal = 0.0;
        for (triple, p) in table.iter() {
            if triple[2] != target {
                continue;
            }
            marginal += p;
            joint += f64::from(triple[0].value() * triple[1].value()) * p;
        }
        if marginal <= 1e-15 {
            return Err(Error::EmptyBranch {
                basis: charlie_basis,
                outcome: charlie_outcome,
            });
        }
        Ok(joint / marginal)
    };
    let c = PairCorrelators {
        a1b2: Some(pair(1, 2)?),
        a2b2: Some(pair(2, 2)?),
        a1b3: Some(pair(1, 3)?),
        a2b3: Some(pair(2, 3)?),
    };
    Ok(f64::from(charlie_outcome) * paired_chsh(charlie_basis, &c)?)
}

fn check_branch(outcome: i8, basis: u8) -> Result<()> {
    if outcome != 1 && outcome != -1 {
        return Err(Error::Domain(format!("Charlie outcome must be ±1, got {outcome}")));
    }
    if basis != 1 && basis != 2 {
        return Err(Error::Domain(format!("Charlie basis must be 1 or 2, got {basis}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisemodel::{white_noise_state, ProtocolTables};
    use crate::qstate::{ghz, mix, random_density_matrix, Ket, Sign};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use std::f64::consts::SQRT_2;

    const TWO_SQRT2: f64 = 2.0 * SQRT_2;

    fn ghz_rho() -> DensityMatrix {
        ghz(1, Sign::Plus).unwrap().projector()
    }

    fn bell(phase: Complex64) -> DensityMatrix {
        Ket::from_terms(4, &[(0, Complex64::new(1.0, 0.0)), (3, phase)]).unwrap().projector()
    }

    #[test]
    fn basis_indexing_round_trips() {
        for (n, b) in BasisTriple::all().enumerate() {
            assert_eq!(b.index(), n);
            assert_eq!(BasisTriple::from_index(n), b);
        }
        let cases: Vec<_> = BasisTriple::all().map(|b| b.sift_case()).collect();
        assert_eq!(cases.iter().filter(|c| **c == SiftCase::Test).count(), 8);
        assert_eq!(cases.iter().filter(|c| **c == SiftCase::Key).count(), 1);
        assert_eq!(cases.iter().filter(|c| **c == SiftCase::Discard).count(), 3);
        assert!(SVETLICHNY_TERMS.iter().all(|(b, _)| b.sift_case() == SiftCase::Test));
    }

    #[test]
    fn ghz_correlators() {
        let rho = ghz_rho();
        let v = correlator(&rho, SettingTriple::new(0.0, -FRAC_PI_4, 0.0)).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((correlator(&rho, SettingTriple::new(0.0, 0.0, 0.0)).unwrap() - 1.0).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(3).unwrap();
        assert!(correlator(&mixed, SettingTriple::new(0.4, 1.1, -2.0)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn chsh_on_bell_states() {
        let s = ChshSettings::default();
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        assert!((chsh_state(&bell(one), &s).unwrap() - TWO_SQRT2).abs() < 1e-9);
        assert!((chsh_state(&bell(-one), &s).unwrap() + TWO_SQRT2).abs() < 1e-9);
        assert!((chsh_prime_state(&bell(i), &s).unwrap() - TWO_SQRT2).abs() < 1e-9);
        assert!((chsh_prime_state(&bell(-i), &s).unwrap() + TWO_SQRT2).abs() < 1e-9);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(chsh_state(&mixed, &s).unwrap().abs() < 1e-15);
        assert!(chsh_prime_state(&mixed, &s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn chsh_rejects_missing_terms() {
        let c = PairCorrelators {
            a1b2: Some(0.5),
            a2b2: None,
            a1b3: Some(0.1),
            a2b3: None,
        };
        match chsh(&c) {
            Err(Error::MissingCorrelators(m)) => assert_eq!(m, vec!["a2b2", "a2b3"]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(chsh_state(&DensityMatrix::maximally_mixed(3).unwrap(), &ChshSettings::default()).is_err());
    }

    #[test]
    fn svetlichny_values() {
        let angles = ProtocolAngles::default();
        assert!((svetlichny(&ghz_rho(), &angles).unwrap() - 4.0 * SQRT_2).abs() < 1e-9);
        let half = white_noise_state(0.5).unwrap();
        assert!((svetlichny(&half, &angles).unwrap() - 2.0 * SQRT_2).abs() < 1e-10);
        assert!(svetlichny(&DensityMatrix::maximally_mixed(3).unwrap(), &angles).unwrap().abs() < 1e-15);
    }

    #[test]
    fn svetlichny_missing_correlators() {
        let mut set = CorrelatorSet::new();
        set.insert(BasisTriple::new(1, 2, 1), 0.3).unwrap();
        assert!(matches!(svetlichny_from(&set), Err(Error::MissingCorrelators(m)) if m.len() == 7));
        assert!(set.insert(BasisTriple::new(1, 2, 2), 1.5).is_err());
    }

    #[test]
    fn decomposition_on_reference_states() {
        let angles = ProtocolAngles::default();
        let (l, r) = decomposition_check(&ghz_rho(), &angles).unwrap();
        assert!((l - 4.0 * SQRT_2).abs() < 1e-9 && (r - 4.0 * SQRT_2).abs() < 1e-9);
        let (l, r) = decomposition_check(&white_noise_state(0.8).unwrap(), &angles).unwrap();
        assert!((l - r).abs() < 1e-9);
        assert!((l - 0.8 * 4.0 * SQRT_2).abs() < 1e-9);
        let (l, r) = decomposition_check(&DensityMatrix::maximally_mixed(3).unwrap(), &angles).unwrap();
        assert!(l.abs() < 1e-12 && r.abs() < 1e-12);
    }

    #[test]
    fn conditioned_s_branches_for_ghz() {
        let angles = ProtocolAngles::default();
        let tables = ProtocolTables::new(&ghz_rho(), 1.0, &angles).unwrap();
        for k in 1..=2 {
            for c in [1, -1] {
                let from_tables = conditioned_s(&tables, c, k).unwrap();
                let from_state = conditioned_s_state(&ghz_rho(), &angles, c, k).unwrap();
                assert!((from_tables - TWO_SQRT2).abs() < 1e-9, "k={k} c={c}: {from_tables}");
                assert!((from_state - TWO_SQRT2).abs() < 1e-9);
            }
        }
        let mixed = ProtocolTables::new(&DensityMatrix::maximally_mixed(3).unwrap(), 1.0, &angles).unwrap();
        assert!(conditioned_s(&mixed, -1, 2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn conditioned_s_empty_branch() {
        // Charlie's qubit in |+x>: outcome -1 in basis C1 never happens
        let plus = Ket::from_terms(8, &[(0, 1.0.into()), (1, 1.0.into())]).unwrap().projector();
        let angles = ProtocolAngles::default();
        let tables = ProtocolTables::new(&plus, 1.0, &angles).unwrap();
        assert!(matches!(conditioned_s(&tables, -1, 1), Err(Error::EmptyBranch { basis: 1, outcome: -1 })));
        assert!(matches!(
            conditioned_s_state(&plus, &angles, -1, 1),
            Err(Error::EmptyBranch { basis: 1, outcome: -1 })
        ));
        assert!(conditioned_s(&tables, 0, 1).is_err());
    }

    #[test]
    fn linearity_in_the_state() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let angles = ProtocolAngles::default();
        for _ in 0..20 {
            let r1 = random_density_matrix(&mut rng, 3).unwrap();
            let r2 = random_density_matrix(&mut rng, 3).unwrap();
            let p: f64 = rand::Rng::random(&mut rng);
            let m = mix(&[p, 1.0 - p], &[r1.clone(), r2.clone()]).unwrap();
            let lhs = svetlichny(&m, &angles).unwrap();
            let rhs = p * svetlichny(&r1, &angles).unwrap() + (1.0 - p) * svetlichny(&r2, &angles).unwrap();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn tsirelson_bound(seed in any::<u64>(), a1 in -PI..PI, a2 in -PI..PI, b2 in -PI..PI, b3 in -PI..PI) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density_matrix(&mut rng, 2).unwrap();
            let s = ChshSettings { a1, a2, b2, b3 };
            prop_assert!(chsh_state(&rho, &s).unwrap().abs() <= TWO_SQRT2 + 1e-9);
            prop_assert!(chsh_prime_state(&rho, &s).unwrap().abs() <= TWO_SQRT2 + 1e-9);
        }

        #[test]
        fn remap_identity(seed in any::<u64>(), a1 in -PI..PI, a2 in -PI..PI, b2 in -PI..PI, b3 in -PI..PI) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density_matrix(&mut rng, 2).unwrap();
            let s = ChshSettings { a1, a2, b2, b3 };
            let prime = chsh_prime_state(&rho, &s).unwrap();
            let remapped = chsh_state(&rho, &s.remapped()).unwrap();
            prop_assert!((prime - remapped).abs() < 1e-12);
        }

        #[test]
        fn decomposition_identity(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density_matrix(&mut rng, 3).unwrap();
            let (l, r) = decomposition_check(&rho, &ProtocolAngles::default()).unwrap();
            prop_assert!((l - r).abs() < 1e-9);
        }
    }
}
