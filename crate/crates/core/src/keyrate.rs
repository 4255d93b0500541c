//! Closed-form QBER, CHSH value, Eve-entropy bounds and Devetak-Winter key
//! rates for the four strategies.
//!
//! | strategy   | QBER                                   | CHSH value                 |
//! |------------|----------------------------------------|----------------------------|
//! | none       | `1 - eta^3/2 - eta^3 F/2`              | `2 sqrt2 F eta^3`          |
//! | preprocess | `q + (1-2q) delta_none`                | as none                    |
//! | postselect | `(1-F) eta^3/2 + 3 eta/2 - 3 eta^2/2`  | `2 sqrt2 F eta^3 + 2 (1-eta)^3` |
//! | advanced   | `q + (1-2q) delta_postselect`          | as postselect              |
//!
//! The rate is `H(A1|E) - h(delta)`, with `H(A1|E)` bounded by
//! `1 - h(1/2 + sqrt(S^2/4 - 1)/2)` (plus the preprocessing term `g(S, q)`
//! when Alice flips). Rates are per sifted key round and are not clamped at 0.

use std::f64::consts::SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::noisemodel::compose_source;
use crate::strategies::{preprocess_flip_distribution, StrategyConfig, StrategyKind};

/// Maximal quantum CHSH value.
pub const TSIRELSON: f64 = 2.0 * SQRT_2;
/// Local (classical) CHSH bound.
pub const LOCAL_BOUND: f64 = 2.0;
const SUPER_QUANTUM_SLACK: f64 = 1e-9;

/// How source infidelity enters the closed forms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceCoupling {
    /// `F_comb = F (2 F_s - 1)` replaces `F` in both the QBER and the CHSH
    /// value; this is what a phase-flipping source does to the shared state.
    #[default]
    Full,
    /// `F_comb` enters the QBER only, the CHSH value keeps the channel `F`.
    /// This is the reading under which the published imperfect-source
    /// distance figure is obtained.
    QberOnly,
}

impl fmt::Display for SourceCoupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            SourceCoupling::Full => "full",
            SourceCoupling::QberOnly => "qber-only",
        })
    }
}

/// Inputs to every rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub fidelity: f64,
    pub source_fidelity: f64,
    pub efficiency: f64,
    pub strategy: StrategyConfig,
    pub source_coupling: SourceCoupling,
}

impl ProtocolParams {
    pub fn new(fidelity: f64, efficiency: f64, strategy: StrategyConfig) -> Result<Self> {
        let p = Self {
            fidelity,
            source_fidelity: 1.0,
            efficiency,
            strategy,
            source_coupling: SourceCoupling::Full,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_source(mut self, source_fidelity: f64, coupling: SourceCoupling) -> Result<Self> {
        self.source_fidelity = source_fidelity;
        self.source_coupling = coupling;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("fidelity", self.fidelity)?;
        check_probability("source fidelity", self.source_fidelity)?;
        check_probability("efficiency", self.efficiency)?;
        self.strategy.validate()
    }

    /// Fidelity used by the QBER formulas.
    pub fn qber_fidelity(&self) -> f64 {
        self.fidelity * (2.0 * self.source_fidelity - 1.0)
    }

    /// Fidelity used by the CHSH formulas.
    pub fn chsh_fidelity(&self) -> f64 {
        match self.source_coupling {
            SourceCoupling::Full => self.qber_fidelity(),
            SourceCoupling::QberOnly => self.fidelity,
        }
    }
}

/// `h(x) = -x log2 x - (1-x) log2(1-x)`, with `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_probability("binary entropy argument", x)?;
    Ok(h(x))
}

fn h(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

/// QBER before any preprocessing flip, at fidelity `f`.
fn base_qber(kind: StrategyKind, fidelity: f64, eta: f64) -> f64 {
    let e3 = eta.powi(3);
    if kind.postselects() {
        0.5 * (1.0 - fidelity) * e3 + 1.5 * eta - 1.5 * eta * eta
    } else {
        1.0 - 0.5 * e3 - 0.5 * e3 * fidelity
    }
}

/// QBER of the key round for the configured strategy.
pub fn qber(params: &ProtocolParams) -> Result<f64> {
    params.validate()?;
    let f = compose_source(params.source_fidelity, params.fidelity)?;
    let base = base_qber(params.strategy.kind, f, params.efficiency).clamp(0.0, 1.0);
    if params.strategy.kind.flips() {
        preprocess_flip_distribution(base, params.strategy.q)
    } else {
        Ok(base)
    }
}

/// Theoretical CHSH value seen by Alice and Bob. Preprocessing leaves it unchanged.
pub fn chsh_value(params: &ProtocolParams) -> Result<f64> {
    params.validate()?;
    let eta = params.efficiency;
    let mut s = TSIRELSON * params.chsh_fidelity() * eta.powi(3);
    if params.strategy.kind.postselects() {
        s += 2.0 * (1.0 - eta).powi(3);
    }
    Ok(s)
}

/// Lower bound on `H(A1|E)`; `nonlocal` is false when `S <= 2`, in which case
/// `bits` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveBound {
    pub bits: f64,
    pub nonlocal: bool,
}

/// Returns `S^2/4 - 1` clipped to `[0, 1]`, or `None` in the local region.
fn radicand(s: f64) -> Result<Option<f64>> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("CHSH value must be finite, got {s}")));
    }
    if s > TSIRELSON + SUPER_QUANTUM_SLACK {
        return Err(Error::SuperQuantum(s));
    }
    if s <= LOCAL_BOUND {
        return Ok(None);
    }
    Ok(Some((s * s / 4.0 - 1.0).clamp(0.0, 1.0)))
}

/// `H(A1|E) >= 1 - h(1/2 + sqrt(S^2/4 - 1)/2)`.
pub fn eve_bound(s: f64) -> Result<EveBound> {
    Ok(match radicand(s)? {
        None => EveBound { bits: 0.0, nonlocal: false },
        Some(r) => EveBound {
            bits: 1.0 - h(0.5 + 0.5 * r.sqrt()),
            nonlocal: true,
        },
    })
}

/// `g(S, q) = 1 - h(1/2 + sqrt(S^2/4 - 1)/2)
///          + h(1/2 + sqrt((1-2q)^2 + 4q(1-q)(S^2/4 - 1))/2)`.
pub fn eve_bound_preprocessed(s: f64, q: f64) -> Result<EveBound> {
    if !(0.0..=0.5).contains(&q) {
        return Err(Error::Domain(format!("flip probability q must lie in [0, 0.5], got {q}")));
    }
    Ok(match radicand(s)? {
        None => EveBound { bits: 0.0, nonlocal: false },
        Some(r) => {
            let inner = ((1.0 - 2.0 * q).powi(2) + 4.0 * q * (1.0 - q) * r).clamp(0.0, 1.0);
            EveBound {
                bits: 1.0 - h(0.5 + 0.5 * r.sqrt()) + h(0.5 + 0.5 * inner.sqrt()),
                nonlocal: true,
            }
        }
    })
}

/// Every intermediate of one rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub strategy: StrategyKind,
    /// Alice's announced flip probability (0 when the strategy does not flip).
    pub q: f64,
    pub delta: f64,
    #[serde(rename = "S")]
    pub chsh: f64,
    /// Lower bound on `H(A1|E)` in bits.
    pub eve_bound: f64,
    /// `H(A1|B1,C1) = h(delta)` in bits.
    pub key_error: f64,
    /// `eve_bound - key_error`, bits per sifted key round.
    pub rate: f64,
    pub nonlocal: bool,
}

/// Eve term for a strategy: `g(S, q)` when flipping, the plain bound otherwise.
pub fn eve_term(strategy: &StrategyConfig, s: f64) -> Result<EveBound> {
    if strategy.kind.flips() {
        eve_bound_preprocessed(s, strategy.q)
    } else {
        eve_bound(s)
    }
}

/// Devetak-Winter lower bound for the configured strategy.
pub fn key_rate(params: &ProtocolParams) -> Result<RateBreakdown> {
    let delta = qber(params)?;
    let s = chsh_value(params)?;
    breakdown(&params.strategy, delta, s)
}

/// Assembles a breakdown from a QBER and a CHSH value (used with both closed
/// forms and empirical estimates).
pub fn breakdown(strategy: &StrategyConfig, delta: f64, s: f64) -> Result<RateBreakdown> {
    let eve = eve_term(strategy, s)?;
    let key_error = binary_entropy(delta)?;
    Ok(RateBreakdown {
        strategy: strategy.kind,
        q: strategy.effective_q(),
        delta,
        chsh: s,
        eve_bound: eve.bits,
        key_error,
        rate: eve.bits - key_error,
        nonlocal: eve.nonlocal,
    })
}

/// QBER contributed by loss alone (`F = 1`, no flip).
pub fn loss_qber(kind: StrategyKind, efficiency: f64) -> f64 {
    base_qber(kind, 1.0, efficiency)
}

/// Channel fidelity that produces pre-flip QBER `delta` at efficiency `eta`.
pub fn fidelity_for_qber(kind: StrategyKind, delta: f64, efficiency: f64) -> Result<f64> {
    let e3 = efficiency.powi(3);
    if e3 <= 0.0 {
        return Err(Error::Domain("QBER does not determine the fidelity at eta = 0".into()));
    }
    let f = if kind.postselects() {
        1.0 - 2.0 * (delta - 1.5 * efficiency * (1.0 - efficiency)) / e3
    } else {
        (2.0 - e3 - 2.0 * delta) / e3
    };
    // absorb round-off at the loss-only floor
    let f = if (-1e-12..0.0).contains(&f) {
        0.0
    } else if (1.0..1.0 + 1e-12).contains(&f) {
        1.0
    } else {
        f
    };
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::Domain(format!(
            "QBER {delta} is unreachable at eta = {efficiency} for strategy {kind} (implied F = {f})"
        )));
    }
    Ok(f)
}

/// Rate expressed through the channel QBER `delta` (perfect source), e.g.
/// `g(2 sqrt2 (2 - eta^3 - 2 delta), q) - h(q + (1-2q) delta)` for preprocessing.
pub fn key_rate_at_qber(strategy: &StrategyConfig, delta: f64, efficiency: f64) -> Result<RateBreakdown> {
    let f = fidelity_for_qber(strategy.kind, delta, efficiency)?;
    key_rate(&ProtocolParams::new(f, efficiency, *strategy)?)
}
