//! `diqss` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 domain error, 4 no
//! threshold in range, 5 Monte Carlo validation failure.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::{key_rate, RateBreakdown, SourceCoupling};
use crate::montecarlo::{compare_to_analytic, simulate_with, SimulationOptions};
use crate::strategies::{StrategyConfig, StrategyKind};
use crate::thresholds::{
    linspace, sweep, threshold, threshold_suite, Channel, Curve, FiberModel, Scenario, SweepTable, Variable,
    DEFAULT_ALPHA, DEFAULT_TOL,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_NO_THRESHOLD: i32 = 4;
pub const EXIT_VALIDATION: i32 = 5;

/// Directory for `reproduce` output when `--output` is absent.
pub const OUTPUT_DIR_ENV: &str = "DIQSS_OUTPUT_DIR";

const DEFAULT_ROUNDS: u64 = 1_000_000;
const DEFAULT_STEPS: usize = 101;
const DEFAULT_K_SIGMA: f64 = 4.0;

#[derive(Debug, Parser)]
#[command(name = "diqss", version, about = "Key rates, thresholds and simulations for device-independent GHZ secret sharing")]
pub struct Cli {
    /// Flat TOML file whose keys are the long flag names; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the key rate at one parameter point.
    Rate(ModelArgs),
    /// Solve for the zero of the key rate in one variable (`--var all` for the suite).
    Threshold {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        var: Option<String>,
        #[arg(long, requires = "hi")]
        lo: Option<f64>,
        #[arg(long, requires = "lo")]
        hi: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Tabulate rates over a grid of one variable.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        var: Option<String>,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Comma-separated list such as `none,postselect,advanced:0.2`.
        #[arg(long)]
        strategies: Option<String>,
    },
    /// Run the seeded round-by-round simulation.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        rounds: Option<u64>,
        /// Compare against the closed forms; exit 5 on disagreement.
        #[arg(long)]
        validate: bool,
        #[arg(long)]
        k_sigma: Option<f64>,
        /// Share of key rounds announced for QBER estimation.
        #[arg(long)]
        qber_fraction: Option<f64>,
    },
    /// Write the rate curves of one figure (2, 3, 4, 5, 6 or 8) as CSV.
    Reproduce { figure: String },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub fidelity: Option<f64>,
    #[arg(long)]
    pub source_fidelity: Option<f64>,
    #[arg(long, value_parser = ["full", "qber-only"])]
    pub source_coupling: Option<String>,
    #[arg(long)]
    pub eta_d: Option<f64>,
    #[arg(long)]
    pub eta_c: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub distance: Option<f64>,
}

/// Every setting a command can take, as read from a config file or flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub strategy: Option<String>,
    pub q: Option<f64>,
    pub eta: Option<f64>,
    pub fidelity: Option<f64>,
    pub source_fidelity: Option<f64>,
    pub source_coupling: Option<SourceCoupling>,
    pub eta_d: Option<f64>,
    pub eta_c: Option<f64>,
    pub alpha: Option<f64>,
    pub distance: Option<f64>,
    pub var: Option<String>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub tol: Option<f64>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub steps: Option<usize>,
    pub strategies: Option<String>,
    pub rounds: Option<u64>,
    pub k_sigma: Option<f64>,
    pub qber_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

macro_rules! overlay {
    ($base:expr, $top:expr; $($f:ident),* $(,)?) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Values of `top` win over values of `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        overlay!(self, top;
            strategy, q, eta, fidelity, source_fidelity, source_coupling, eta_d, eta_c, alpha, distance,
            var, lo, hi, tol, from, to, steps, strategies, rounds, k_sigma, qber_fraction, seed, output, format)
    }

    fn from_model(m: &ModelArgs) -> Result<RunConfig> {
        let coupling = match m.source_coupling.as_deref() {
            None => None,
            Some("qber-only") => Some(SourceCoupling::QberOnly),
            Some(_) => Some(SourceCoupling::Full),
        };
        Ok(RunConfig {
            strategy: m.strategy.clone(),
            q: m.q,
            eta: m.eta,
            fidelity: m.fidelity,
            source_fidelity: m.source_fidelity,
            source_coupling: coupling,
            eta_d: m.eta_d,
            eta_c: m.eta_c,
            alpha: m.alpha,
            distance: m.distance,
            ..RunConfig::default()
        })
    }

    pub fn strategy_config(&self) -> Result<StrategyConfig> {
        let kind: StrategyKind = self.strategy.as_deref().unwrap_or("none").parse()?;
        let q = match (kind.flips(), self.q) {
            (true, None) => return Err(Error::Config(format!("strategy {kind} needs --q"))),
            (_, q) => q.unwrap_or(0.0),
        };
        StrategyConfig::new(kind, q).map_err(as_config)
    }

    fn has_fiber(&self) -> bool {
        self.eta_d.is_some() || self.eta_c.is_some() || self.distance.is_some() || self.alpha.is_some()
    }

    /// Exactly one of `eta` or the fiber parameters; `free` is the variable
    /// being solved or swept, which may stand in for a missing value.
    pub fn channel(&self, free: Option<Variable>) -> Result<Channel> {
        if self.eta.is_some() && self.has_fiber() {
            return Err(Error::Config("give either --eta or fiber parameters (--eta-d, --eta-c, --distance), not both".into()));
        }
        if let Some(eta) = self.eta {
            return Ok(Channel::Global(check_unit("eta", eta)?));
        }
        let fiber_var = matches!(free, Some(Variable::Distance | Variable::CouplingEfficiency));
        if !self.has_fiber() && !fiber_var {
            return match free {
                Some(Variable::Eta) => Ok(Channel::Global(1.0)),
                _ => Err(Error::Config("no channel: give --eta or --eta-d/--eta-c".into())),
            };
        }
        let eta_d = self
            .eta_d
            .ok_or_else(|| Error::Config("fiber channel needs --eta-d".into()))?;
        let eta_c = match (self.eta_c, free) {
            (Some(c), _) => c,
            (None, Some(Variable::CouplingEfficiency)) => 1.0,
            (None, _) => return Err(Error::Config("fiber channel needs --eta-c".into())),
        };
        let model = FiberModel::new(check_unit("eta-d", eta_d)?, check_unit("eta-c", eta_c)?)
            .and_then(|m| m.with_alpha(self.alpha.unwrap_or(DEFAULT_ALPHA)))
            .and_then(|m| m.with_distance(self.distance.unwrap_or(0.0)))
            .map_err(as_config)?;
        Ok(Channel::Fiber(model))
    }

    pub fn scenario(&self, free: Option<Variable>) -> Result<Scenario> {
        let fidelity = check_unit("fidelity", self.fidelity.unwrap_or(1.0))?;
        let source = check_unit("source-fidelity", self.source_fidelity.unwrap_or(1.0))?;
        Ok(Scenario::new(self.strategy_config()?, fidelity, self.channel(free)?)
            .with_source(source, self.source_coupling.unwrap_or_default()))
    }

    fn variable(&self) -> Result<Variable> {
        self.var
            .as_deref()
            .ok_or_else(|| Error::Config("--var is required".into()))?
            .parse()
    }
}

fn check_unit(name: &str, x: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {x}")))
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::Csv(_) => EXIT_CONFIG,
        Error::NoSignChange { .. } => EXIT_NO_THRESHOLD,
        Error::Validation { .. } => EXIT_VALIDATION,
        _ => EXIT_DOMAIN,
    }
}

/// Parses `args` (program name first), runs the command, returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let global = RunConfig {
        seed: cli.seed,
        output: cli.output.clone(),
        format: cli.format,
        ..RunConfig::default()
    };
    let flags = match &cli.command {
        Command::Rate(m) => RunConfig::from_model(m)?,
        Command::Threshold { model, var, lo, hi, tol } => RunConfig {
            var: var.clone(),
            lo: *lo,
            hi: *hi,
            tol: *tol,
            ..RunConfig::from_model(model)?
        },
        Command::Sweep { model, var, from, to, steps, strategies } => RunConfig {
            var: var.clone(),
            from: *from,
            to: *to,
            steps: *steps,
            strategies: strategies.clone(),
            ..RunConfig::from_model(model)?
        },
        Command::Simulate { model, rounds, k_sigma, qber_fraction, .. } => RunConfig {
            rounds: *rounds,
            k_sigma: *k_sigma,
            qber_fraction: *qber_fraction,
            ..RunConfig::from_model(model)?
        },
        Command::Reproduce { .. } => RunConfig::default(),
    };
    let cfg = file.overlay(flags.overlay(global));
    match &cli.command {
        Command::Rate(_) => cmd_rate(&cfg),
        Command::Threshold { .. } => cmd_threshold(&cfg),
        Command::Sweep { .. } => cmd_sweep(&cfg),
        Command::Simulate { validate, .. } => cmd_simulate(&cfg, *validate),
        Command::Reproduce { figure } => cmd_reproduce(&cfg, figure),
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.output {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Config(format!("JSON encoding failed: {e}")))
}

const RATE_FIELDS: [&str; 7] = ["strategy", "q", "delta", "S", "eve_bound", "key_error", "rate"];

fn rate_values(r: &RateBreakdown) -> [String; 7] {
    let f = |x: f64| format!("{x:.6}");
    [
        r.strategy.to_string(),
        f(r.q),
        f(r.delta),
        f(r.chsh),
        f(r.eve_bound),
        f(r.key_error),
        f(r.rate),
    ]
}

/// Rate breakdown with every number printed to six decimals.
pub fn format_rate(r: &RateBreakdown, format: Format) -> String {
    let values = rate_values(r);
    match format {
        Format::Csv => format!("{},nonlocal\n{},{}\n", RATE_FIELDS.join(","), values.join(","), r.nonlocal),
        Format::Json => {
            let mut body: Vec<String> = vec![format!("  \"strategy\": \"{}\"", values[0])];
            body.extend(RATE_FIELDS[1..].iter().zip(&values[1..]).map(|(k, v)| format!("  \"{k}\": {v}")));
            body.push(format!("  \"nonlocal\": {}", r.nonlocal));
            format!("{{\n{}\n}}\n", body.join(",\n"))
        }
    }
}

fn cmd_rate(cfg: &RunConfig) -> Result<i32> {
    let r = key_rate(&cfg.scenario(None)?.params()?)?;
    emit(cfg, &format_rate(&r, cfg.format.unwrap_or(Format::Json)))?;
    Ok(EXIT_OK)
}

/// Modelling choices a threshold or sweep result depends on.
fn assumptions(s: &Scenario, variable: Option<Variable>) -> Vec<String> {
    let mut out = Vec::new();
    if let Channel::Fiber(_) = s.channel {
        out.push("fiber transmissivity 10^(-alpha d / 10)".to_string());
    }
    if variable == Some(Variable::Distance) {
        out.push("user-to-user distance sqrt(3) d (equilateral triangle around the source)".into());
    }
    if s.source_fidelity < 1.0 {
        out.push(match s.source_coupling {
            SourceCoupling::Full => "source composed as F_comb = F (2 F_s - 1) in QBER and CHSH value".into(),
            SourceCoupling::QberOnly => {
                "source composed as F_comb = F (2 F_s - 1) in the QBER only; CHSH value uses the channel F".into()
            }
        });
    }
    if variable == Some(Variable::Delta) {
        out.push("delta is the pre-flip channel QBER with a perfect source".into());
    }
    out
}

#[derive(Serialize)]
struct ThresholdOutput<'a, T: Serialize> {
    scenario: &'a Scenario,
    assumptions: Vec<String>,
    #[serde(flatten)]
    body: T,
}

fn cmd_threshold(cfg: &RunConfig) -> Result<i32> {
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    let format = cfg.format.unwrap_or(Format::Json);
    if cfg.var.as_deref() == Some("all") {
        let scenario = cfg.scenario(None)?;
        let suite = threshold_suite(&scenario);
        let text = match format {
            Format::Json => to_json(&ThresholdOutput {
                scenario: &scenario,
                assumptions: assumptions(&scenario, Some(Variable::Distance)),
                body: serde_json::json!({ "thresholds": suite }),
            })?,
            Format::Csv => {
                let mut s = String::from("name,value,lo,hi,residual_rate,iterations,user_distance,error\n");
                for e in &suite {
                    match &e.result {
                        Some(r) => s += &format!(
                            "{},{},{},{},{},{},{},\n",
                            e.name,
                            r.value,
                            r.bracket.0,
                            r.bracket.1,
                            r.residual_rate,
                            r.iterations,
                            r.user_distance.map(|d| d.to_string()).unwrap_or_default()
                        ),
                        None => s += &format!("{},,,,,,,\"{}\"\n", e.name, e.error.clone().unwrap_or_default()),
                    }
                }
                s
            }
        };
        emit(cfg, &text)?;
        return Ok(EXIT_OK);
    }
    let variable = cfg.variable()?;
    let scenario = cfg.scenario(Some(variable))?;
    let bracket = match (cfg.lo, cfg.hi) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => return Err(Error::Config("--lo and --hi go together".into())),
    };
    let r = threshold(&scenario, variable, bracket, tol)?;
    let text = match format {
        Format::Json => to_json(&ThresholdOutput {
            scenario: &scenario,
            assumptions: assumptions(&scenario, Some(variable)),
            body: r,
        })?,
        Format::Csv => format!(
            "variable,value,lo,hi,residual_rate,iterations,user_distance\n{},{},{},{},{},{},{}\n",
            r.variable,
            r.value,
            r.bracket.0,
            r.bracket.1,
            r.residual_rate,
            r.iterations,
            r.user_distance.map(|d| d.to_string()).unwrap_or_default()
        ),
    };
    emit(cfg, &text)?;
    Ok(EXIT_OK)
}

/// Parses `none,postselect,preprocess:0.2,...`.
pub fn parse_strategies(list: &str) -> Result<Vec<StrategyConfig>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (name, q) = match item.split_once(':') {
                Some((n, q)) => (
                    n,
                    q.parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad q in '{item}': {e}")))?,
                ),
                None => (item, 0.0),
            };
            StrategyConfig::new(name.parse()?, q).map_err(as_config)
        })
        .collect()
}

fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    let variable = cfg.variable()?;
    let base = cfg.scenario(Some(variable))?;
    let strategies = match &cfg.strategies {
        Some(list) => parse_strategies(list)?,
        None => vec![base.strategy],
    };
    if strategies.is_empty() {
        return Err(Error::Config("--strategies is empty".into()));
    }
    let (lo, hi) = base.default_bracket(variable)?;
    let grid = linspace(cfg.from.unwrap_or(lo), cfg.to.unwrap_or(hi), cfg.steps.unwrap_or(DEFAULT_STEPS))?;
    let curves = Curve::per_strategy(&base, &strategies);
    let table = sweep(variable, &grid, &curves).map_err(as_config)?;
    let text = match cfg.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&table)?,
        Format::Csv => {
            let mut comments = vec![format!("sweep over {variable}")];
            comments.extend(curve_comments(&curves));
            comments.extend(assumptions(&base, Some(variable)));
            csv_string(&table, &comments)?
        }
    };
    emit(cfg, &text)?;
    Ok(EXIT_OK)
}

fn csv_string(table: &SweepTable, comments: &[String]) -> Result<String> {
    let mut buf = Vec::new();
    table.write_csv(&mut buf, comments)?;
    String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
}

fn curve_comments(curves: &[Curve]) -> Vec<String> {
    curves
        .iter()
        .map(|c| {
            let s = &c.scenario;
            let channel = match s.channel {
                Channel::Global(eta) => format!("eta={eta}"),
                Channel::Fiber(m) => format!("eta_d={} eta_c={} alpha={}", m.eta_d, m.eta_c, m.alpha),
            };
            format!(
                "{}: strategy={} q={} F={} F_s={} coupling={} {channel}",
                c.label,
                s.strategy.kind,
                s.strategy.effective_q(),
                s.fidelity,
                s.source_fidelity,
                s.source_coupling
            )
        })
        .collect()
}

fn cmd_simulate(cfg: &RunConfig, validate: bool) -> Result<i32> {
    if cfg.format == Some(Format::Csv) {
        return Err(Error::Config("simulate writes JSON only".into()));
    }
    let rounds = cfg.rounds.unwrap_or(DEFAULT_ROUNDS);
    if rounds == 0 {
        return Err(Error::Config("--rounds must be at least 1".into()));
    }
    let seed = cfg.seed.unwrap_or(0);
    let params = cfg.scenario(None)?.params()?;
    if validate {
        let report = compare_to_analytic(&params, rounds, seed, cfg.k_sigma.unwrap_or(DEFAULT_K_SIGMA))?;
        emit(cfg, &to_json(&report)?)?;
        return Ok(if report.passed() { EXIT_OK } else { EXIT_VALIDATION });
    }
    let opts = SimulationOptions {
        qber_sample_fraction: cfg.qber_fraction.unwrap_or(1.0),
        ..SimulationOptions::default()
    };
    emit(cfg, &to_json(&simulate_with(&params, rounds, seed, &opts)?)?)?;
    Ok(EXIT_OK)
}

/// Grid, curves and header comments of one reproducible figure.
#[derive(Debug, Clone)]
pub struct Figure {
    pub id: u8,
    pub variable: Variable,
    pub grid: Vec<f64>,
    pub curves: Vec<Curve>,
    pub comments: Vec<String>,
}

pub const FIGURES: [u8; 6] = [2, 3, 4, 5, 6, 8];

pub fn figure(id: u8) -> Result<Figure> {
    let perfect = |s: StrategyConfig, f: f64| Scenario::new(s, f, Channel::Global(1.0));
    let fiber = Channel::Fiber(FiberModel::new(0.98, 0.99)?);
    let q = |q: f64| StrategyConfig::advanced(q);
    let (variable, grid, curves, title) = match id {
        2 => (
            Variable::Eta,
            linspace(0.9, 1.0, 201)?,
            [1.0, 0.99, 0.97, 0.95]
                .iter()
                .map(|&f| Curve::new(format!("r(F={f})"), perfect(StrategyConfig::none(), f)))
                .collect::<Vec<_>>(),
            "rate vs global detection efficiency, no strategy",
        ),
        3 => (
            Variable::Delta,
            linspace(0.0, 0.1, 201)?,
            [0.0, 0.05, 0.2, 0.4]
                .iter()
                .map(|&qq| Ok(Curve::new(format!("r_q(q={qq})"), perfect(StrategyConfig::preprocess(qq)?, 1.0))))
                .collect::<Result<Vec<_>>>()?,
            "preprocessed rate vs channel QBER at eta=1",
        ),
        4 => (
            Variable::Eta,
            linspace(0.9, 1.0, 201)?,
            vec![
                Curve::new("r", perfect(StrategyConfig::none(), 1.0)),
                Curve::new("r_p", perfect(StrategyConfig::postselect(), 1.0)),
            ],
            "rate with and without postselection vs eta, F=1",
        ),
        5 => (
            Variable::Eta,
            linspace(0.9, 1.0, 201)?,
            [0.0, 0.05, 0.2, 0.4]
                .iter()
                .map(|&qq| Ok(Curve::new(format!("r_qp(q={qq})"), perfect(q(qq)?, 1.0))))
                .collect::<Result<Vec<_>>>()?,
            "advanced postselection rate vs eta, F=1",
        ),
        6 => (
            Variable::Distance,
            linspace(0.0, 0.7, 141)?,
            vec![
                Curve::new("r", Scenario::new(StrategyConfig::none(), 1.0, fiber)),
                Curve::new("r_q(q=0.2)", Scenario::new(StrategyConfig::preprocess(0.2)?, 1.0, fiber)),
                Curve::new("r_p", Scenario::new(StrategyConfig::postselect(), 1.0, fiber)),
                Curve::new("r_qp(q=0.2)", Scenario::new(q(0.2)?, 1.0, fiber)),
            ],
            "rate vs source-to-user distance, all strategies",
        ),
        8 => (
            Variable::Distance,
            linspace(0.0, 0.45, 91)?,
            [1.0, 0.99, 0.98]
                .iter()
                .map(|&f| {
                    Ok(Curve::new(
                        format!("r_qp(F={f})"),
                        Scenario::new(q(0.4)?, f, fiber).with_source(0.96, SourceCoupling::QberOnly),
                    ))
                })
                .collect::<Result<Vec<_>>>()?,
            "advanced postselection (q=0.4) vs distance with an imperfect source F_s=0.96",
        ),
        other => {
            return Err(Error::Config(format!(
                "unknown figure '{other}', expected one of {FIGURES:?}"
            )))
        }
    };
    let mut comments = vec![format!("figure {id}: {title}"), format!("x = {variable}")];
    comments.extend(curve_comments(&curves));
    comments.extend(assumptions(&curves[0].scenario, Some(variable)));
    Ok(Figure {
        id,
        variable,
        grid,
        curves,
        comments,
    })
}

impl Figure {
    pub fn table(&self) -> Result<SweepTable> {
        sweep(self.variable, &self.grid, &self.curves)
    }

    pub fn file_name(&self) -> String {
        format!("figure_{}.csv", self.id)
    }
}

fn cmd_reproduce(cfg: &RunConfig, id: &str) -> Result<i32> {
    let id: u8 = id
        .parse()
        .map_err(|_| Error::Config(format!("unknown figure '{id}', expected one of {FIGURES:?}")))?;
    let fig = figure(id)?;
    let text = csv_string(&fig.table()?, &fig.comments)?;
    let path = match &cfg.output {
        Some(p) => p.clone(),
        None => {
            let dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir)?;
            dir.join(fig.file_name())
        }
    };
    fs::write(&path, text)?;
    println!("{}", path.display());
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_overlay_prefers_flags() {
        let file = RunConfig::from_toml("strategy = \"advanced\"\nq = 0.2\neta = 0.97\nseed = 3\n").unwrap();
        let flags = RunConfig {
            q: Some(0.4),
            ..RunConfig::default()
        };
        let cfg = file.overlay(flags);
        assert_eq!(cfg.q, Some(0.4));
        assert_eq!(cfg.eta, Some(0.97));
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.strategy_config().unwrap(), StrategyConfig::advanced(0.4).unwrap());
    }

    #[test]
    fn config_keys_are_flag_names() {
        let cfg = RunConfig::from_toml("eta-d = 0.98\neta-c = 0.99\nsource-coupling = \"qber-only\"\nk-sigma = 3.0\n").unwrap();
        assert_eq!(cfg.eta_d, Some(0.98));
        assert_eq!(cfg.source_coupling, Some(SourceCoupling::QberOnly));
        assert!(RunConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn channel_rules() {
        let both = RunConfig {
            eta: Some(0.9),
            eta_d: Some(0.9),
            ..RunConfig::default()
        };
        assert!(matches!(both.channel(None), Err(Error::Config(_))));
        assert!(matches!(RunConfig::default().channel(None), Err(Error::Config(_))));
        assert_eq!(RunConfig::default().channel(Some(Variable::Eta)).unwrap(), Channel::Global(1.0));
        let fiber = RunConfig {
            eta_d: Some(0.98),
            eta_c: Some(0.99),
            ..RunConfig::default()
        };
        assert!(matches!(fiber.channel(None).unwrap(), Channel::Fiber(_)));
        let bad = RunConfig {
            eta: Some(1.5),
            ..RunConfig::default()
        };
        assert!(matches!(bad.channel(None), Err(Error::Config(_))));
    }

    #[test]
    fn flipping_strategy_needs_q() {
        let cfg = RunConfig {
            strategy: Some("preprocess".into()),
            ..RunConfig::default()
        };
        assert!(matches!(cfg.strategy_config(), Err(Error::Config(_))));
    }

    #[test]
    fn strategy_lists() {
        let s = parse_strategies("none, postselect,advanced:0.2").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[2], StrategyConfig::advanced(0.2).unwrap());
        assert!(parse_strategies("advanced:0.9").is_err());
        assert!(parse_strategies("advanced:x").is_err());
    }

    #[test]
    fn rate_formatting() {
        let r = key_rate(&Scenario::new(StrategyConfig::none(), 1.0, Channel::Global(1.0)).params().unwrap()).unwrap();
        let json = format_rate(&r, Format::Json);
        assert!(json.contains("\"rate\": 1.000000"));
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["S"].as_f64().unwrap(), 2.828427);
        let csv = format_rate(&r, Format::Csv);
        assert!(csv.starts_with("strategy,q,delta,S,eve_bound,key_error,rate,nonlocal\nnone,"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Domain("x".into())), EXIT_DOMAIN);
        assert_eq!(
            exit_code(&Error::NoSignChange { lo: 0.0, hi: 1.0, f_lo: 1.0, f_hi: 1.0 }),
            EXIT_NO_THRESHOLD
        );
    }

    #[test]
    fn every_figure_builds() {
        for id in FIGURES {
            let fig = figure(id).unwrap();
            let t = fig.table().unwrap();
            assert_eq!(t.rows.len(), fig.grid.len());
            assert_eq!(t.columns.len(), fig.curves.len());
        }
        assert!(figure(7).is_err());
    }
}
