//! Dense linear algebra for states of up to three qubits.
//!
//! Computational basis ordering is binary with `H = 0`, `V = 1` and the first
//! party as the most significant bit, so for three qubits the basis runs
//! `|HHH>, |HHV>, |HVH>, |HVV>, |VHH>, |VHV>, |VVH>, |VVV>` (indices 0..8).
//! Every matrix literal in this crate is written against that ordering.
//!
//! Measurement observables all live on the X-Y equator of the Bloch sphere:
//! `E(theta) = cos(theta) X + sin(theta) Y`, with +1 eigenvector
//! `(|H> + e^{i theta}|V>)/sqrt(2)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance for algebraic identities (normalization, hermiticity, trace).
pub const TOL_ALGEBRAIC: f64 = 1e-12;
/// Slack allowed on eigenvalue positivity and on unit-observable checks.
pub const TOL_SPECTRAL: f64 = 1e-10;

pub const MAX_QUBITS: usize = 3;

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn qubits_for_dim(dim: usize) -> Option<usize> {
    match dim {
        2 => Some(1),
        4 => Some(2),
        8 => Some(3),
        _ => None,
    }
}

fn max_hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Relative phase of a GHZ-basis superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Normalized pure state on one to three qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amps: DVector<Complex64>,
}

impl Ket {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if qubits_for_dim(amplitudes.len()).is_none() {
            return Err(Error::Domain(format!(
                "ket dimension must be 2, 4 or 8, got {}",
                amplitudes.len()
            )));
        }
        let amps = DVector::from_vec(amplitudes);
        let norm_sq = amps.norm_squared();
        if (norm_sq - 1.0).abs() > TOL_ALGEBRAIC {
            return Err(Error::Domain(format!("ket is not normalized: |psi|^2 = {norm_sq}")));
        }
        Ok(Self { amps })
    }

    /// Builds a ket from sparse `(basis index, amplitude)` terms and normalizes it.
    pub fn from_terms(dim: usize, terms: &[(usize, Complex64)]) -> Result<Self> {
        let mut amps = vec![ZERO; dim];
        for &(idx, amp) in terms {
            let slot = amps
                .get_mut(idx)
                .ok_or_else(|| Error::Domain(format!("basis index {idx} out of range for dimension {dim}")))?;
            *slot += amp;
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Domain("zero vector cannot be normalized".into()));
        }
        Self::new(amps.into_iter().map(|a| a / norm).collect())
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.amps.as_slice()
    }

    pub fn num_qubits(&self) -> usize {
        qubits_for_dim(self.amps.len()).expect("validated at construction")
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Ket) -> Complex64 {
        self.amps.dotc(&other.amps)
    }

    /// `|psi><psi|`.
    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix { m: &self.amps * self.amps.adjoint() }
    }
}

/// The eight three-qubit GHZ states.
///
/// | variant | superposition |
/// |---------|---------------|
/// | 1 | `(|HHH> ± |VVV>)/sqrt(2)` |
/// | 2 | `(|HHV> ± |VVH>)/sqrt(2)` |
/// | 3 | `(|HVH> ± |VHV>)/sqrt(2)` |
/// | 4 | `(|VHH> ± |HVV>)/sqrt(2)` |
///
/// `ghz(1, Sign::Plus)` is the state the protocol distributes.
pub fn ghz(variant: u8, sign: Sign) -> Result<Ket> {
    let (first, second) = match variant {
        1 => (0b000, 0b111),
        2 => (0b001, 0b110),
        3 => (0b010, 0b101),
        4 => (0b100, 0b011),
        v => return Err(Error::InvalidVariant(v)),
    };
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![ZERO; 8];
    amps[first] = Complex64::new(amp, 0.0);
    amps[second] = Complex64::new(sign.value() * amp, 0.0);
    Ket::new(amps)
}

/// All eight GHZ states ordered `1+, 1-, 2+, 2-, 3+, 3-, 4+, 4-`.
pub fn ghz_basis() -> Vec<(u8, Sign, Ket)> {
    (1..=4)
        .flat_map(|v| [Sign::Plus, Sign::Minus].map(|s| (v, s, ghz(v, s).expect("valid variant"))))
        .collect()
}

/// Hermitian, unit-trace, positive semidefinite operator on one to three qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(m)?;
        rho.validate()?;
        Ok(rho)
    }

    fn from_matrix_unchecked(m: CMatrix) -> Result<Self> {
        if !m.is_square() || qubits_for_dim(m.nrows()).is_none() {
            return Err(Error::Domain(format!(
                "density matrix must be 2x2, 4x4 or 8x8, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { m })
    }

    /// Checks hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let defect = max_hermitian_defect(&self.m);
        if defect > TOL_ALGEBRAIC {
            return Err(Error::Domain(format!("density matrix is not Hermitian (defect {defect:e})")));
        }
        let tr = self.m.trace();
        if (tr.re - 1.0).abs() > TOL_ALGEBRAIC || tr.im.abs() > TOL_ALGEBRAIC {
            return Err(Error::Domain(format!("density matrix trace is {tr}, expected 1")));
        }
        let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -TOL_SPECTRAL {
            return Err(Error::Domain(format!("density matrix has negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn maximally_mixed(num_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(Error::Domain(format!("supported qubit counts are 1..=3, got {num_qubits}")));
        }
        let dim = 1usize << num_qubits;
        Ok(Self {
            m: CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0),
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        qubits_for_dim(self.dim()).expect("validated at construction")
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        // symmetrize so round-off never feeds an asymmetric matrix to the solver
        let herm = (&self.m + self.m.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Reduced state on the qubits listed in `keep` (ascending party indices,
    /// party 0 being the most significant bit).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let n = self.num_qubits();
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&q| q >= n) || keep.is_empty() {
            return Err(Error::Domain(format!("invalid qubit selection {keep:?} for {n} qubits")));
        }
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let compose = |kept_bits: usize, traced_bits: usize| -> usize {
            let mut idx = 0usize;
            for (pos, &q) in keep.iter().enumerate() {
                let bit = (kept_bits >> (keep.len() - 1 - pos)) & 1;
                idx |= bit << (n - 1 - q);
            }
            for (pos, &q) in traced.iter().enumerate() {
                let bit = (traced_bits >> (traced.len() - 1 - pos)) & 1;
                idx |= bit << (n - 1 - q);
            }
            idx
        };
        let dk = 1usize << keep.len();
        let dt = 1usize << traced.len();
        let mut out = CMatrix::zeros(dk, dk);
        for r in 0..dk {
            for c in 0..dk {
                out[(r, c)] = (0..dt).map(|t| self.m[(compose(r, t), compose(c, t))]).sum();
            }
        }
        Ok(DensityMatrix { m: out })
    }

    /// Unnormalized post-measurement operator `(P ⊗ ...) rho (P ⊗ ...)` restricted
    /// by projecting one party and tracing it out: `Tr_party[(I ⊗ P ⊗ I) rho]`.
    /// Returns the probability of the projector and, when nonzero, the normalized
    /// conditional state of the remaining parties.
    pub fn condition_on(&self, party: usize, projector: &CMatrix) -> Result<(f64, Option<DensityMatrix>)> {
        let n = self.num_qubits();
        if n < 2 || party >= n {
            return Err(Error::Domain(format!("cannot condition party {party} of a {n}-qubit state")));
        }
        let full = embed(projector, party, n);
        let projected = &full * &self.m * &full;
        let prob = projected.trace().re;
        if prob <= TOL_SPECTRAL {
            return Ok((prob.max(0.0), None));
        }
        let keep: Vec<usize> = (0..n).filter(|&q| q != party).collect();
        let reduced = DensityMatrix { m: projected / Complex64::new(prob, 0.0) }.partial_trace(&keep)?;
        Ok((prob, Some(reduced)))
    }
}

/// Places a single-qubit operator on `party` of an `n`-qubit register.
fn embed(op: &CMatrix, party: usize, n: usize) -> CMatrix {
    (0..n).fold(CMatrix::identity(1, 1), |acc, q| {
        if q == party {
            tensor(&acc, op)
        } else {
            tensor(&acc, &CMatrix::identity(2, 2))
        }
    })
}

/// Hermitian operator on one to three qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    m: CMatrix,
}

impl Observable {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() || qubits_for_dim(m.nrows()).is_none() {
            return Err(Error::Domain(format!(
                "observable must be 2x2, 4x4 or 8x8, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let defect = max_hermitian_defect(&m);
        if defect > TOL_ALGEBRAIC {
            return Err(Error::Domain(format!("observable is not Hermitian (defect {defect:e})")));
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// True when the observable squares to the identity, i.e. has spectrum in {-1, +1}.
    pub fn is_unit(&self) -> bool {
        let sq = &self.m * &self.m;
        let id = CMatrix::identity(self.dim(), self.dim());
        (sq - id).iter().all(|z| z.norm() <= TOL_SPECTRAL)
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &Observable) -> Result<Observable> {
        Observable::new(tensor(&self.m, &other.m))
    }
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    let i = Complex64::new(0.0, 1.0);
    CMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
}

/// `E(theta) = cos(theta) X + sin(theta) Y`.
///
/// The protocol's bases are `A1 = B1 = C1 = E(0)`, `A2 = E(pi/2)`,
/// `B2 = E(-pi/4)`, `B3 = E(pi/4)` and `C2 = E(-pi/2)`.
pub fn equatorial_observable(theta: f64) -> Observable {
    let (s, c) = theta.sin_cos();
    let off = Complex64::new(c, -s);
    Observable {
        m: CMatrix::from_row_slice(2, 2, &[ZERO, off, off.conj(), ZERO]),
    }
}

/// Projector onto the `outcome` (±1) eigenspace of `E(theta)`: `(I ± E)/2`.
pub fn equatorial_projector(theta: f64, outcome: i8) -> CMatrix {
    let sign = if outcome >= 0 { 1.0 } else { -1.0 };
    (CMatrix::identity(2, 2) + equatorial_observable(theta).m * Complex64::new(sign, 0.0)) * Complex64::new(0.5, 0.0)
}

/// `E(theta_A) ⊗ E(theta_B) ⊗ E(theta_C)`.
pub fn joint_equatorial(thetas: [f64; 3]) -> Observable {
    let m = thetas
        .iter()
        .map(|&t| equatorial_observable(t).m)
        .reduce(|acc, m| tensor(&acc, &m))
        .expect("three factors");
    Observable { m }
}

/// `Tr[rho O]`.
pub fn expectation(rho: &DensityMatrix, obs: &Observable) -> Result<f64> {
    if rho.dim() != obs.dim() {
        return Err(Error::Domain(format!(
            "shape mismatch: state is {}-dimensional, observable {}-dimensional",
            rho.dim(),
            obs.dim()
        )));
    }
    let value = (rho.matrix() * obs.matrix()).trace();
    debug_assert!(value.im.abs() < TOL_SPECTRAL, "imaginary residue {}", value.im);
    Ok(value.re)
}

/// Kronecker product.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Convex combination `sum_i w_i rho_i`.
pub fn mix(weights: &[f64], states: &[DensityMatrix]) -> Result<DensityMatrix> {
    if weights.len() != states.len() || states.is_empty() {
        return Err(Error::Domain(format!(
            "mix needs one weight per state ({} weights, {} states)",
            weights.len(),
            states.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::Domain(format!("mixture weight {w} is negative")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > TOL_ALGEBRAIC {
        return Err(Error::Domain(format!("mixture weights sum to {total}, expected 1")));
    }
    let dim = states[0].dim();
    if states.iter().any(|s| s.dim() != dim) {
        return Err(Error::Domain("mixed states must share a dimension".into()));
    }
    let m = weights
        .iter()
        .zip(states)
        .fold(CMatrix::zeros(dim, dim), |acc, (&w, s)| acc + s.matrix() * Complex64::new(w, 0.0));
    DensityMatrix::new(m)
}

/// Random full-rank state `G G† / Tr(G G†)` with `G` drawn uniformly entrywise.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, num_qubits: usize) -> Result<DensityMatrix> {
    if !(1..=MAX_QUBITS).contains(&num_qubits) {
        return Err(Error::Domain(format!("supported qubit counts are 1..=3, got {num_qubits}")));
    }
    let dim = 1usize << num_qubits;
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let gg = &g * g.adjoint();
    let tr = gg.trace().re;
    let mut m = gg / Complex64::new(tr, 0.0);
    // force exact hermiticity after the division
    for r in 0..dim {
        m[(r, r)].im = 0.0;
        for c in (r + 1)..dim {
            m[(c, r)] = m[(r, c)].conj();
        }
    }
    DensityMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Index-loop trace of rho * O, independent of nalgebra's products.
    fn brute_trace(rho: &CMatrix, obs: &CMatrix) -> Complex64 {
        let n = rho.nrows();
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += rho[(i, k)] * obs[(k, i)];
            }
        }
        acc
    }

    /// Index-loop Kronecker product of three 2x2 matrices.
    fn brute_kron3(a: &CMatrix, b: &CMatrix, cc: &CMatrix) -> CMatrix {
        CMatrix::from_fn(8, 8, |r, col| {
            let (ra, rb, rc) = (r >> 2 & 1, r >> 1 & 1, r & 1);
            let (ca, cb, ccc) = (col >> 2 & 1, col >> 1 & 1, col & 1);
            a[(ra, ca)] * b[(rb, cb)] * cc[(rc, ccc)]
        })
    }

    #[test]
    fn target_ghz_amplitudes() {
        let k = ghz(1, Sign::Plus).unwrap();
        let a = k.amplitudes();
        assert!((a[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((a[7].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(a[1..7].iter().all(|z| z.norm() == 0.0));

        let m = ghz(1, Sign::Minus).unwrap();
        assert!((m.amplitudes()[7].re + FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn ghz_basis_is_orthonormal() {
        let basis = ghz_basis();
        for (i, (_, _, a)) in basis.iter().enumerate() {
            for (j, (_, _, b)) in basis.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((a.inner(b) - c(expected, 0.0)).norm() < TOL_ALGEBRAIC);
            }
        }
        let k2 = ghz(2, Sign::Plus).unwrap();
        let k3 = ghz(3, Sign::Minus).unwrap();
        assert_eq!(k2.inner(&k3), ZERO);
    }

    #[test]
    fn invalid_variant() {
        assert!(matches!(ghz(0, Sign::Plus), Err(Error::InvalidVariant(0))));
        assert!(matches!(ghz(5, Sign::Minus), Err(Error::InvalidVariant(5))));
    }

    #[test]
    fn ket_rejects_unnormalized() {
        assert!(Ket::new(vec![ONE, ONE]).is_err());
        assert!(Ket::new(vec![ONE; 3]).is_err());
    }

    #[test]
    fn equatorial_observables() {
        let x = equatorial_observable(0.0);
        assert!((x.matrix() - pauli_x()).iter().all(|z| z.norm() < 1e-15));

        let minus_y = equatorial_observable(-FRAC_PI_2);
        assert!((minus_y.matrix() + pauli_y()).iter().all(|z| z.norm() < 1e-15));
        // +1 eigenvector of -Y is (|H> - i|V>)/sqrt(2)
        let v = nalgebra::DVector::from_vec(vec![c(FRAC_1_SQRT_2, 0.0), c(0.0, -FRAC_1_SQRT_2)]);
        let ev = minus_y.matrix() * &v;
        assert!((ev - v).norm() < 1e-15);

        for theta in [-2.0, -FRAC_PI_4, 0.3, 1.7, 3.1] {
            let e = equatorial_observable(theta);
            assert!(e.is_unit());
            let plus = nalgebra::DVector::from_vec(vec![
                c(FRAC_1_SQRT_2, 0.0),
                Complex64::from_polar(FRAC_1_SQRT_2, theta),
            ]);
            assert!((e.matrix() * &plus - &plus).norm() < 1e-14);
        }
    }

    #[test]
    fn expectation_matches_brute_force() {
        let rho = ghz(1, Sign::Plus).unwrap().projector();
        let xxx = joint_equatorial([0.0, 0.0, 0.0]);
        let brute = brute_trace(rho.matrix(), &brute_kron3(&pauli_x(), &pauli_x(), &pauli_x()));
        assert!((brute.re - 1.0).abs() < 1e-12);
        assert!((expectation(&rho, &xxx).unwrap() - 1.0).abs() < 1e-12);

        let yyx = brute_kron3(&pauli_y(), &pauli_y(), &pauli_x());
        assert!((brute_trace(rho.matrix(), &yyx).re + 1.0).abs() < 1e-12);
        let obs = Observable::new(tensor(&tensor(&pauli_y(), &pauli_y()), &pauli_x())).unwrap();
        assert!((expectation(&rho, &obs).unwrap() + 1.0).abs() < 1e-12);

        let mixed = DensityMatrix::maximally_mixed(3).unwrap();
        assert!(expectation(&mixed, &xxx).unwrap().abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_observable_rejected() {
        let m = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(Observable::new(m).is_err());
    }

    #[test]
    fn expectation_shape_mismatch() {
        let rho = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(expectation(&rho, &equatorial_observable(0.0)).is_err());
    }

    #[test]
    fn mixture_of_ghz_projectors_is_identity_over_eight() {
        let states: Vec<_> = ghz_basis().into_iter().map(|(_, _, k)| k.projector()).collect();
        let rho = mix(&[0.125; 8], &states).unwrap();
        let id = DensityMatrix::maximally_mixed(3).unwrap();
        assert!((rho.matrix() - id.matrix()).iter().all(|z| z.norm() < TOL_ALGEBRAIC));

        let single = mix(&[1.0], &states[..1]).unwrap();
        assert_eq!(single.matrix(), states[0].matrix());
    }

    #[test]
    fn mix_rejects_bad_weights() {
        let s = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(mix(&[0.5, 0.4], &[s.clone(), s.clone()]).is_err());
        assert!(mix(&[1.5, -0.5], &[s.clone(), s.clone()]).is_err());
        assert!(mix(&[1.0], &[s.clone(), s]).is_err());
    }

    #[test]
    fn tensor_of_paulis_spectrum() {
        let xx = tensor(&pauli_x(), &pauli_x());
        let mut ev: Vec<f64> = SymmetricEigen::new(xx).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let expected = [-1.0, -1.0, 1.0, 1.0];
        assert!(ev.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn partial_trace_of_ghz() {
        let rho = ghz(1, Sign::Plus).unwrap().projector();
        let ab = rho.partial_trace(&[0, 1]).unwrap();
        // (|HH><HH| + |VV><VV|)/2
        for r in 0..4 {
            for col in 0..4 {
                let expected = if r == col && (r == 0 || r == 3) { 0.5 } else { 0.0 };
                assert!((ab.matrix()[(r, col)] - c(expected, 0.0)).norm() < 1e-15);
            }
        }
        let a = rho.partial_trace(&[0]).unwrap();
        assert!((a.matrix() - DensityMatrix::maximally_mixed(1).unwrap().matrix()).norm() < 1e-15);
        assert!(rho.partial_trace(&[1, 0]).is_err());
    }

    #[test]
    fn conditioning_on_charlie_collapses_to_bell_states() {
        let rho = ghz(1, Sign::Plus).unwrap().projector();
        let (p, ab) = rho.condition_on(2, &equatorial_projector(0.0, 1)).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        let phi_plus = Ket::from_terms(4, &[(0, ONE), (3, ONE)]).unwrap().projector();
        assert!((ab.unwrap().matrix() - phi_plus.matrix()).norm() < 1e-12);

        // -sigma_y outcome +1 leaves (|HH> + i|VV>)/sqrt(2)
        let (p, ab) = rho.condition_on(2, &equatorial_projector(-FRAC_PI_2, 1)).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        let psi_plus = Ket::from_terms(4, &[(0, ONE), (3, c(0.0, 1.0))]).unwrap().projector();
        assert!((ab.unwrap().matrix() - psi_plus.matrix()).norm() < 1e-12);
    }

    #[test]
    fn random_states_are_valid() {
        let mut rng = rand::rng();
        for q in 1..=3 {
            for _ in 0..20 {
                let rho = random_density_matrix(&mut rng, q).unwrap();
                rho.validate().unwrap();
            }
        }
    }
}
