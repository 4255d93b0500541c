//! Fiber loss model, bisection thresholds and parameter sweeps.
//!
//! Transmissivity is `eta_t = 10^(-alpha d / 10) <= 1`, so the global
//! efficiency is `eta = eta_t eta_d eta_c`. The three users sit on an
//! equilateral triangle around the source, hence user-to-user distance
//! `sqrt(3) d`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::keyrate::{key_rate, key_rate_at_qber, loss_qber, ProtocolParams, RateBreakdown, SourceCoupling};
use crate::noisemodel::composed_qber;
use crate::strategies::StrategyConfig;

pub const DEFAULT_ALPHA: f64 = 0.2;
pub const DEFAULT_TOL: f64 = 1e-7;
/// Bisection keeps going past `tol` until the rate is this close to zero.
pub const RESIDUAL_TOL: f64 = 1e-9;
const MAX_ITERATIONS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberModel {
    pub eta_d: f64,
    pub eta_c: f64,
    /// Attenuation in dB/km.
    pub alpha: f64,
    /// Source-to-user distance in km.
    pub distance: f64,
}

impl FiberModel {
    pub fn new(eta_d: f64, eta_c: f64) -> Result<Self> {
        let m = Self {
            eta_d,
            eta_c,
            alpha: DEFAULT_ALPHA,
            distance: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_distance(mut self, distance: f64) -> Result<Self> {
        self.distance = distance;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("detector efficiency", self.eta_d)?;
        check_probability("coupling efficiency", self.eta_c)?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Domain(format!("attenuation must be positive, got {}", self.alpha)));
        }
        if !(self.distance >= 0.0 && self.distance.is_finite()) {
            return Err(Error::Domain(format!("distance must be non-negative, got {}", self.distance)));
        }
        Ok(())
    }

    pub fn transmissivity(&self) -> f64 {
        10f64.powf(-self.alpha * self.distance / 10.0)
    }
}

/// `eta = 10^(-alpha d / 10) eta_d eta_c`.
pub fn global_efficiency(m: &FiberModel) -> Result<f64> {
    m.validate()?;
    Ok(m.transmissivity() * m.eta_d * m.eta_c)
}

/// Distance between two users when each is `d` from the source.
pub fn user_distance(d: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::Domain(format!("distance must be non-negative, got {d}")));
    }
    Ok(3f64.sqrt() * d)
}

/// How the global efficiency is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Global(f64),
    Fiber(FiberModel),
}

impl Channel {
    pub fn efficiency(&self) -> Result<f64> {
        match self {
            Channel::Global(eta) => {
                check_probability("efficiency", *eta)?;
                Ok(*eta)
            }
            Channel::Fiber(m) => global_efficiency(m),
        }
    }
}

/// Everything held fixed while one variable moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub strategy: StrategyConfig,
    pub fidelity: f64,
    pub source_fidelity: f64,
    pub source_coupling: SourceCoupling,
    pub channel: Channel,
}

impl Scenario {
    pub fn new(strategy: StrategyConfig, fidelity: f64, channel: Channel) -> Self {
        Self {
            strategy,
            fidelity,
            source_fidelity: 1.0,
            source_coupling: SourceCoupling::Full,
            channel,
        }
    }

    pub fn with_source(mut self, source_fidelity: f64, coupling: SourceCoupling) -> Self {
        self.source_fidelity = source_fidelity;
        self.source_coupling = coupling;
        self
    }

    pub fn with_strategy(mut self, strategy: StrategyConfig) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn params(&self) -> Result<ProtocolParams> {
        ProtocolParams::new(self.fidelity, self.channel.efficiency()?, self.strategy)?
            .with_source(self.source_fidelity, self.source_coupling)
    }

    pub fn rate(&self) -> Result<RateBreakdown> {
        key_rate(&self.params()?)
    }

    fn fiber(&self, what: Variable) -> Result<FiberModel> {
        match self.channel {
            Channel::Fiber(m) => Ok(m),
            Channel::Global(_) => Err(Error::Config(format!(
                "{what} needs a fiber channel (detector and coupling efficiencies)"
            ))),
        }
    }

    /// Copy of the scenario with `variable` set to `x`. `Delta` has no slot in
    /// the scenario and is rejected here; see [`Scenario::rate_at`].
    pub fn with_variable(&self, variable: Variable, x: f64) -> Result<Scenario> {
        let mut s = *self;
        match variable {
            Variable::Eta => s.channel = Channel::Global(x),
            Variable::Fidelity => s.fidelity = x,
            Variable::CouplingEfficiency => {
                let mut m = self.fiber(variable)?;
                m.eta_c = x;
                s.channel = Channel::Fiber(m);
            }
            Variable::Distance => s.channel = Channel::Fiber(self.fiber(variable)?.with_distance(x)?),
            Variable::FlipProbability => {
                if !self.strategy.kind.flips() {
                    return Err(Error::Config(format!("strategy {} has no flip probability", self.strategy.kind)));
                }
                s.strategy = StrategyConfig::new(self.strategy.kind, x)?;
            }
            Variable::Delta => {
                return Err(Error::Config("the QBER is derived, not a scenario field".into()));
            }
        }
        Ok(s)
    }

    /// Rate with `variable` set to `x`. For `Delta`, `x` is the pre-flip
    /// channel QBER at the scenario's efficiency with a perfect source.
    pub fn rate_at(&self, variable: Variable, x: f64) -> Result<RateBreakdown> {
        match variable {
            Variable::Delta => key_rate_at_qber(&self.strategy, x, self.channel.efficiency()?),
            _ => self.with_variable(variable, x)?.rate(),
        }
    }

    pub fn default_bracket(&self, variable: Variable) -> Result<(f64, f64)> {
        Ok(match variable {
            Variable::Eta => (0.9, 1.0),
            Variable::Delta => (loss_qber(self.strategy.kind, self.channel.efficiency()?), 0.12),
            Variable::Fidelity => (0.8, 1.0),
            Variable::CouplingEfficiency => (0.9, 1.0),
            Variable::Distance => (0.0, 5.0),
            Variable::FlipProbability => (0.0, 0.5),
        })
    }

    fn widened_bracket(&self, variable: Variable) -> Result<(f64, f64)> {
        Ok(match variable {
            Variable::Eta | Variable::Fidelity | Variable::CouplingEfficiency => (0.5, 1.0),
            Variable::Delta => (self.default_bracket(variable)?.0, 0.5),
            Variable::Distance => (0.0, 50.0),
            Variable::FlipProbability => (0.0, 0.5),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variable {
    Eta,
    Delta,
    Fidelity,
    CouplingEfficiency,
    Distance,
    FlipProbability,
}

impl Variable {
    pub const ALL: [Variable; 6] = [
        Variable::Eta,
        Variable::Delta,
        Variable::Fidelity,
        Variable::CouplingEfficiency,
        Variable::Distance,
        Variable::FlipProbability,
    ];

    /// Column / flag name.
    pub fn name(self) -> &'static str {
        match self {
            Variable::Eta => "eta",
            Variable::Delta => "delta",
            Variable::Fidelity => "F",
            Variable::CouplingEfficiency => "eta_c",
            Variable::Distance => "d",
            Variable::FlipProbability => "q",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "eta" => Ok(Variable::Eta),
            "delta" | "qber" => Ok(Variable::Delta),
            "f" | "fidelity" => Ok(Variable::Fidelity),
            "eta_c" | "coupling" => Ok(Variable::CouplingEfficiency),
            "d" | "distance" => Ok(Variable::Distance),
            "q" => Ok(Variable::FlipProbability),
            other => Err(Error::Config(format!("unknown variable '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub variable: Variable,
    pub value: f64,
    pub bracket: (f64, f64),
    pub residual_rate: f64,
    pub iterations: u32,
    /// `sqrt(3) value` for distance thresholds.
    pub user_distance: Option<f64>,
}

/// Bisection on a sign change of `f` over `bracket`. Stops once the bracket
/// is narrower than `tol` and `|f| < 1e-9`, or when it cannot shrink further.
pub fn solve_threshold<F>(variable: Variable, f: F, bracket: (f64, f64), tol: f64) -> Result<ThresholdResult>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::Domain(format!("invalid bracket [{lo}, {hi}] or tolerance {tol}")));
    }
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    let done = |x: f64, fx: f64, iterations| {
        Ok(ThresholdResult {
            variable,
            value: x,
            bracket,
            residual_rate: fx,
            iterations,
            user_distance: (variable == Variable::Distance).then(|| 3f64.sqrt() * x),
        })
    };
    if f_lo == 0.0 {
        return done(lo, f_lo, 0);
    }
    if f_hi == 0.0 {
        return done(hi, f_hi, 0);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    let lo_negative = f_lo < 0.0;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        let converged = hi - lo < tol && f_mid.abs() < RESIDUAL_TOL;
        if converged || f_mid == 0.0 || mid <= lo || mid >= hi || iterations >= MAX_ITERATIONS {
            return done(mid, f_mid, iterations);
        }
        if (f_mid < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Threshold of `variable` over `bracket`, or over the default bracket (then
/// once over a wider one, with a warning) when `bracket` is `None`.
pub fn threshold(scenario: &Scenario, variable: Variable, bracket: Option<(f64, f64)>, tol: f64) -> Result<ThresholdResult> {
    let f = |x: f64| scenario.rate_at(variable, x).map(|r| r.rate);
    if let Some(b) = bracket {
        return solve_threshold(variable, f, b, tol);
    }
    match solve_threshold(variable, f, scenario.default_bracket(variable)?, tol) {
        Err(Error::NoSignChange { lo, hi, .. }) => {
            let wide = scenario.widened_bracket(variable)?;
            log::warn!("no sign change for {variable} in [{lo}, {hi}], retrying over [{}, {}]", wide.0, wide.1);
            solve_threshold(variable, f, wide, tol)
        }
        other => other,
    }
}

/// One named entry of a threshold suite; `error` is set when it has no solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub result: Option<ThresholdResult>,
    pub error: Option<String>,
}

/// `eta*`, `delta*` and `F*` for any scenario; `eta_c*` and `d*` as well when
/// the channel is a fiber.
pub fn threshold_suite(scenario: &Scenario) -> Vec<SuiteEntry> {
    let mut vars = vec![Variable::Eta, Variable::Delta, Variable::Fidelity];
    if matches!(scenario.channel, Channel::Fiber(_)) {
        vars.extend([Variable::CouplingEfficiency, Variable::Distance]);
    }
    vars.into_iter()
        .map(|v| {
            let r = threshold(scenario, v, None, DEFAULT_TOL);
            SuiteEntry {
                name: format!("{v}*"),
                error: r.as_ref().err().map(|e| e.to_string()),
                result: r.ok(),
            }
        })
        .collect()
}

/// Channel fidelity at which an imperfect source's composed QBER
/// `1/2 + F/2 - F_s F` reaches `delta_star`.
pub fn source_limited_fidelity(source_fidelity: f64, delta_star: f64) -> Result<f64> {
    check_probability("source fidelity", source_fidelity)?;
    check_probability("QBER threshold", delta_star)?;
    if (source_fidelity - 0.5).abs() < 1e-15 {
        return Err(Error::Domain("a source fidelity of 1/2 fixes the QBER at 1/2".into()));
    }
    let f = (0.5 - delta_star) / (source_fidelity - 0.5);
    check_probability("implied channel fidelity", f)?;
    debug_assert!((composed_qber(source_fidelity, f)? - delta_star).abs() < 1e-12);
    Ok(f)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Config(format!("a grid needs at least two points and finite ends, got {n} over [{lo}, {hi}]")));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect())
}

/// A labelled scenario; one rate column of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub scenario: Scenario,
}

impl Curve {
    pub fn new(label: impl Into<String>, scenario: Scenario) -> Self {
        Self {
            label: label.into(),
            scenario,
        }
    }

    /// One curve per strategy, labelled `r_<strategy label>`.
    pub fn per_strategy(base: &Scenario, strategies: &[StrategyConfig]) -> Vec<Curve> {
        strategies
            .iter()
            .map(|s| Curve::new(format!("r_{}", s.label()), base.with_strategy(*s)))
            .collect()
    }
}

/// Row-per-sample rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub x_name: String,
    pub columns: Vec<String>,
    pub rows: Vec<(f64, Vec<f64>)>,
}

/// Evaluates every curve at every grid point. Points are computed in
/// parallel; rows keep the grid order.
pub fn sweep(variable: Variable, grid: &[f64], curves: &[Curve]) -> Result<SweepTable> {
    let rows = grid
        .par_iter()
        .map(|&x| {
            let rates = curves
                .iter()
                .map(|c| c.scenario.rate_at(variable, x).map(|r| r.rate))
                .collect::<Result<Vec<_>>>()?;
            Ok((x, rates))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        x_name: variable.name().to_string(),
        columns: curves.iter().map(|c| c.label.clone()).collect(),
        rows,
    })
}

impl SweepTable {
    /// CSV with `# `-prefixed comment lines, a header row, and values printed
    /// in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![self.x_name.clone()];
        header.extend(self.columns.iter().cloned());
        out.write_record(&header)?;
        for (x, rates) in &self.rows {
            let mut rec = vec![x.to_string()];
            rec.extend(rates.iter().map(|r| r.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<SweepTable> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let (x_name, columns) = header
            .split_first()
            .ok_or_else(|| Error::Config("CSV has no header row".into()))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number '{s}': {e}")))
        };
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals = rec.iter().map(parse).collect::<Result<Vec<_>>>()?;
            let (x, rest) = vals
                .split_first()
                .ok_or_else(|| Error::Config("empty CSV row".into()))?;
            rows.push((*x, rest.to_vec()));
        }
        Ok(SweepTable {
            x_name: x_name.clone(),
            columns: columns.to_vec(),
            rows,
        })
    }
}
