//! Round-by-round protocol simulation with keyed, order-independent randomness.
//!
//! Rounds are grouped into blocks of [`BLOCK_ROUNDS`]. Block `b` draws from
//! three ChaCha8 streams `3b + purpose` of a generator seeded with the user
//! seed, so every block is reproducible on its own and the integer tallies can
//! be summed in any order. Results are bit-identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::{breakdown, chsh_value, qber, ProtocolParams, RateBreakdown, SourceCoupling, TSIRELSON};
use crate::noisemodel::{channel_state, triple_from_index, Outcome, OutcomeTriple, ProtocolTables};
use crate::nonlocality::{BasisTriple, ProtocolAngles, SiftCase, SVETLICHNY_TERMS};
use crate::qstate::DensityMatrix;
use crate::strategies::{apply_to_record, StrategyConfig};

pub const BLOCK_ROUNDS: u64 = 4096;

const STREAM_BASES: u64 = 0;
const STREAM_OUTCOMES: u64 = 1;
const STREAM_FLIPS: u64 = 2;

/// One protocol round. `raw` is what the detectors reported, `outcomes` what
/// the strategy turned it into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub bases: BasisTriple,
    pub raw: OutcomeTriple,
    pub outcomes: OutcomeTriple,
    pub sift_case: SiftCase,
    /// `(k_A, k_B, k_C)` with `+1 -> 0`, `-1 -> 1`; `None` outside key rounds
    /// or when any party failed to click.
    pub key_bits: Option<[u8; 3]>,
    /// Alice's key bit was flipped by preprocessing.
    pub flipped: bool,
}

impl RoundRecord {
    pub fn new(bases: BasisTriple, raw: OutcomeTriple) -> Self {
        let mut r = Self {
            bases,
            raw,
            outcomes: raw,
            sift_case: bases.sift_case(),
            key_bits: None,
            flipped: false,
        };
        r.refresh_key_bits();
        r
    }

    pub fn refresh_key_bits(&mut self) {
        let bit = |o: Outcome| match o {
            Outcome::Plus => Some(0u8),
            Outcome::Minus => Some(1u8),
            Outcome::NoClick => None,
        };
        let [a, b, c] = self.outcomes.map(bit);
        self.key_bits = match (self.sift_case, a, b, c) {
            (SiftCase::Key, Some(a), Some(b), Some(c)) => Some([a, b, c]),
            _ => None,
        };
    }

    /// Product of outcome values with a no-click counted as 0.
    pub fn product(&self) -> i8 {
        self.outcomes.iter().map(|o| o.value()).product()
    }

    /// A key round is in error unless all three clicked and `k_A = k_B ⊕ k_C`.
    pub fn is_key_error(&self) -> bool {
        match self.key_bits {
            Some([a, b, c]) => a != b ^ c,
            None => true,
        }
    }
}

/// Per-party basis weights and the share of key rounds announced for QBER
/// estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub alice_weights: [f64; 2],
    pub bob_weights: [f64; 3],
    pub charlie_weights: [f64; 2],
    pub qber_sample_fraction: f64,
    pub angles: ProtocolAngles,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            alice_weights: [1.0; 2],
            bob_weights: [1.0; 3],
            charlie_weights: [1.0; 2],
            qber_sample_fraction: 1.0,
            angles: ProtocolAngles::default(),
        }
    }
}

impl SimulationOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("alice", &self.alice_weights[..]),
            ("bob", &self.bob_weights[..]),
            ("charlie", &self.charlie_weights[..]),
        ] {
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config(format!("{name} basis weights must be non-negative with a positive sum")));
            }
        }
        if !(self.qber_sample_fraction > 0.0 && self.qber_sample_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "qber sample fraction must lie in (0, 1], got {}",
                self.qber_sample_fraction
            )));
        }
        Ok(())
    }

    /// Probability of each basis triple, in index order.
    pub fn basis_probabilities(&self) -> [f64; 12] {
        let norm = |w: &[f64]| -> Vec<f64> {
            let s: f64 = w.iter().sum();
            w.iter().map(|x| x / s).collect()
        };
        let (a, b, c) = (norm(&self.alice_weights), norm(&self.bob_weights), norm(&self.charlie_weights));
        let mut p = [0.0; 12];
        for basis in BasisTriple::all() {
            p[basis.index()] =
                a[basis.alice as usize - 1] * b[basis.bob as usize - 1] * c[basis.charlie as usize - 1];
        }
        p
    }
}

/// A mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiftFractions {
    pub test: f64,
    pub key: f64,
    pub discard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub n_rounds: u64,
    pub seed: u64,
    pub strategy: StrategyConfig,
    /// Alice-Bob CHSH value, `S_ABC / 2`.
    pub empirical_s: Option<Estimate>,
    pub empirical_s_abc: Option<Estimate>,
    /// `None` when no key round was announced.
    pub empirical_qber: Option<Estimate>,
    pub sift_fractions: SiftFractions,
    pub key_rounds: u64,
    pub qber_rounds: u64,
    /// Strategy bound evaluated at the empirical values (S clipped to the
    /// Tsirelson bound).
    pub estimated_rate: Option<RateBreakdown>,
    /// Test combinations without any recorded round.
    pub empty_buckets: Vec<BasisTriple>,
}

/// Integer tallies; addition is associative, so merging order does not matter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    per_basis: [BasisTally; 12],
    sift: [u64; 3],
    key_rounds: u64,
    qber_rounds: u64,
    qber_errors: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct BasisTally {
    n: u64,
    sum: i64,
    sum_sq: u64,
}

impl Tally {
    fn record(&mut self, r: &RoundRecord, announced: bool) {
        let b = &mut self.per_basis[r.bases.index()];
        let x = r.product();
        b.n += 1;
        b.sum += x as i64;
        b.sum_sq += x.unsigned_abs() as u64;
        self.sift[match r.sift_case {
            SiftCase::Test => 0,
            SiftCase::Key => 1,
            SiftCase::Discard => 2,
        }] += 1;
        if r.sift_case == SiftCase::Key {
            self.key_rounds += 1;
            if announced {
                self.qber_rounds += 1;
                self.qber_errors += r.is_key_error() as u64;
            }
        }
    }

    fn merge(mut self, o: Tally) -> Tally {
        for (a, b) in self.per_basis.iter_mut().zip(o.per_basis) {
            a.n += b.n;
            a.sum += b.sum;
            a.sum_sq += b.sum_sq;
        }
        for (a, b) in self.sift.iter_mut().zip(o.sift) {
            *a += b;
        }
        self.key_rounds += o.key_rounds;
        self.qber_rounds += o.qber_rounds;
        self.qber_errors += o.qber_errors;
        self
    }

    fn svetlichny(&self) -> Result<Estimate> {
        let empty: Vec<BasisTriple> = SVETLICHNY_TERMS
            .iter()
            .map(|(b, _)| *b)
            .filter(|b| self.per_basis[b.index()].n == 0)
            .collect();
        if !empty.is_empty() {
            return Err(Error::EmptyBuckets(empty));
        }
        let (mut value, mut var) = (0.0, 0.0);
        for (basis, sign) in SVETLICHNY_TERMS {
            let t = self.per_basis[basis.index()];
            let n = t.n as f64;
            let mean = t.sum as f64 / n;
            value += sign * mean;
            var += (t.sum_sq as f64 / n - mean * mean).max(0.0) / n;
        }
        Ok(Estimate { value, std_err: var.sqrt() })
    }

    fn qber(&self) -> Option<Estimate> {
        (self.qber_rounds > 0).then(|| {
            let n = self.qber_rounds as f64;
            let p = self.qber_errors as f64 / n;
            Estimate {
                value: p,
                std_err: (p * (1.0 - p) / n).sqrt(),
            }
        })
    }
}

/// Cumulative distribution sampled by inversion.
#[derive(Debug, Clone)]
struct Cdf {
    cum: Vec<f64>,
    last_positive: usize,
}

impl Cdf {
    fn new(weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cum = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        let last_positive = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
        Self { cum, last_positive }
    }

    fn sample(&self, u: f64) -> usize {
        self.cum
            .iter()
            .position(|c| u < *c)
            .map_or(self.last_positive, |i| i.min(self.last_positive))
    }
}

struct Sampler {
    bases: Cdf,
    outcomes: Vec<Cdf>,
    strategy: StrategyConfig,
    qber_fraction: f64,
    seed: u64,
}

impl Sampler {
    fn new(tables: &ProtocolTables, strategy: StrategyConfig, seed: u64, opts: &SimulationOptions) -> Result<Self> {
        opts.validate()?;
        strategy.validate()?;
        Ok(Self {
            bases: Cdf::new(&opts.basis_probabilities()),
            outcomes: BasisTriple::all().map(|b| Cdf::new(tables.get(b).probs())).collect(),
            strategy,
            qber_fraction: opts.qber_sample_fraction,
            seed,
        })
    }

    fn stream(&self, block: u64, purpose: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(block * 3 + purpose);
        rng
    }

    /// Runs rounds `[block * BLOCK_ROUNDS, end)` and hands each record to `sink`
    /// together with whether it was announced for QBER estimation.
    fn run_block<F: FnMut(&RoundRecord, bool)>(&self, block: u64, end: u64, mut sink: F) -> Result<()> {
        let mut bases_rng = self.stream(block, STREAM_BASES);
        let mut outcome_rng = self.stream(block, STREAM_OUTCOMES);
        let mut flip_rng = self.stream(block, STREAM_FLIPS);
        for _ in block * BLOCK_ROUNDS..end {
            let basis = BasisTriple::from_index(self.bases.sample(bases_rng.random()));
            let raw = triple_from_index(self.outcomes[basis.index()].sample(outcome_rng.random()));
            let record = apply_to_record(&RoundRecord::new(basis, raw), &self.strategy, &mut flip_rng)?;
            let announced = if record.sift_case == SiftCase::Key {
                flip_rng.random::<f64>() < self.qber_fraction
            } else {
                false
            };
            sink(&record, announced);
        }
        Ok(())
    }

    fn blocks(n_rounds: u64) -> impl Iterator<Item = (u64, u64)> {
        (0..n_rounds.div_ceil(BLOCK_ROUNDS)).map(move |b| (b, ((b + 1) * BLOCK_ROUNDS).min(n_rounds)))
    }
}

fn tables_for(rho: &DensityMatrix, efficiency: f64, opts: &SimulationOptions) -> Result<ProtocolTables> {
    ProtocolTables::new(rho, efficiency, &opts.angles)
}

/// Simulates `n_rounds` rounds on `rho` at efficiency `eta`.
pub fn simulate_state(
    rho: &DensityMatrix,
    efficiency: f64,
    strategy: StrategyConfig,
    n_rounds: u64,
    seed: u64,
    opts: &SimulationOptions,
) -> Result<SimulationReport> {
    if n_rounds == 0 {
        return Err(Error::Config("at least one round is required".into()));
    }
    let sampler = Sampler::new(&tables_for(rho, efficiency, opts)?, strategy, seed, opts)?;
    let blocks: Vec<(u64, u64)> = Sampler::blocks(n_rounds).collect();
    let tally = blocks
        .par_iter()
        .map(|&(b, end)| {
            let mut t = Tally::default();
            sampler.run_block(b, end, |r, announced| t.record(r, announced))?;
            Ok::<_, Error>(t)
        })
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
    Ok(report(&tally, n_rounds, seed, strategy))
}

fn report(tally: &Tally, n_rounds: u64, seed: u64, strategy: StrategyConfig) -> SimulationReport {
    let n = n_rounds as f64;
    let s_abc = tally.svetlichny().ok();
    let empty_buckets = SVETLICHNY_TERMS
        .iter()
        .map(|(b, _)| *b)
        .filter(|b| tally.per_basis[b.index()].n == 0)
        .collect();
    let s = s_abc.map(|e| Estimate {
        value: e.value / 2.0,
        std_err: e.std_err / 2.0,
    });
    let q = tally.qber();
    let estimated_rate = match (s, q) {
        (Some(s), Some(q)) => breakdown(&strategy, q.value, s.value.min(TSIRELSON)).ok(),
        _ => None,
    };
    SimulationReport {
        n_rounds,
        seed,
        strategy,
        empirical_s: s,
        empirical_s_abc: s_abc,
        empirical_qber: q,
        sift_fractions: SiftFractions {
            test: tally.sift[0] as f64 / n,
            key: tally.sift[1] as f64 / n,
            discard: tally.sift[2] as f64 / n,
        },
        key_rounds: tally.key_rounds,
        qber_rounds: tally.qber_rounds,
        estimated_rate,
        empty_buckets,
    }
}

/// Simulates the channel described by `params` (white noise on the
/// phase-flipped source) with default options.
pub fn simulate(params: &ProtocolParams, n_rounds: u64, seed: u64) -> Result<SimulationReport> {
    simulate_with(params, n_rounds, seed, &SimulationOptions::default())
}

pub fn simulate_with(
    params: &ProtocolParams,
    n_rounds: u64,
    seed: u64,
    opts: &SimulationOptions,
) -> Result<SimulationReport> {
    params.validate()?;
    let rho = channel_state(params.fidelity, params.source_fidelity)?;
    simulate_state(&rho, params.efficiency, params.strategy, n_rounds, seed, opts)
}

/// Individual records for the first `n_rounds` rounds; same stream as [`simulate`].
pub fn simulate_records(
    params: &ProtocolParams,
    n_rounds: u64,
    seed: u64,
    opts: &SimulationOptions,
) -> Result<Vec<RoundRecord>> {
    params.validate()?;
    let rho = channel_state(params.fidelity, params.source_fidelity)?;
    let sampler = Sampler::new(&tables_for(&rho, params.efficiency, opts)?, params.strategy, seed, opts)?;
    let mut out = Vec::with_capacity(n_rounds as usize);
    for (b, end) in Sampler::blocks(n_rounds) {
        sampler.run_block(b, end, |r, _| out.push(*r))?;
    }
    Ok(out)
}

/// Svetlichny estimate from test-round records: per-combination mean of the
/// outcome product (no-click = 0), errors summed in quadrature.
pub fn svetlichny_estimator(records: &[RoundRecord]) -> Result<Estimate> {
    let mut t = Tally::default();
    for r in records.iter().filter(|r| r.sift_case == SiftCase::Test) {
        t.record(r, false);
    }
    t.svetlichny()
}

/// Distance of one empirical quantity from its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Margin {
    pub quantity: &'static str,
    pub empirical: f64,
    pub analytic: f64,
    pub diff: f64,
    pub std_err: f64,
    /// `diff / std_err`; 0 when both vanish.
    pub z: f64,
    pub passed: bool,
}

impl Margin {
    fn new(quantity: &'static str, est: Estimate, analytic: f64, k_sigma: f64) -> Self {
        let diff = (est.value - analytic).abs();
        let z = if est.std_err > 0.0 {
            diff / est.std_err
        } else if diff <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            quantity,
            empirical: est.value,
            analytic,
            diff,
            std_err: est.std_err,
            z,
            passed: diff <= k_sigma * est.std_err + 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub k_sigma: f64,
    pub qber: Margin,
    pub chsh: Margin,
    pub simulation: SimulationReport,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.qber.passed && self.chsh.passed
    }

    /// `Err(Validation)` naming the first failing quantity.
    pub fn into_result(self) -> Result<ValidationReport> {
        for m in [self.qber, self.chsh] {
            if !m.passed {
                return Err(Error::Validation {
                    quantity: m.quantity,
                    empirical: m.empirical,
                    analytic: m.analytic,
                    diff: m.diff,
                    std_err: m.std_err,
                    k_sigma: self.k_sigma,
                });
            }
        }
        Ok(self)
    }
}

/// Simulates and measures the empirical QBER and CHSH value against the
/// closed forms. Analytic values always use full source coupling, which is
/// what the simulated phase-flip state realizes.
pub fn compare_to_analytic(params: &ProtocolParams, n_rounds: u64, seed: u64, k_sigma: f64) -> Result<ValidationReport> {
    let sim = simulate(params, n_rounds, seed)?;
    let mut analytic_params = *params;
    analytic_params.source_coupling = SourceCoupling::Full;
    let missing = |what: &str| Error::Domain(format!("{what} undefined: too few rounds ({n_rounds})"));
    let q = sim.empirical_qber.ok_or_else(|| missing("empirical QBER"))?;
    let s = sim.empirical_s.ok_or_else(|| missing("empirical CHSH value"))?;
    Ok(ValidationReport {
        k_sigma,
        qber: Margin::new("qber", q, qber(&analytic_params)?, k_sigma),
        chsh: Margin::new("S", s, chsh_value(&analytic_params)?, k_sigma),
        simulation: sim,
    })
}

/// [`compare_to_analytic`] that fails with [`Error::Validation`] on disagreement.
pub fn validate_against_analytic(
    params: &ProtocolParams,
    n_rounds: u64,
    seed: u64,
    k_sigma: f64,
) -> Result<ValidationReport> {
    compare_to_analytic(params, n_rounds, seed, k_sigma)?.into_result()
}
