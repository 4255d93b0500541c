use thiserror::Error;

use crate::nonlocality::BasisTriple;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// GHZ variant index outside 1..=4.
    #[error("GHZ variant must be in 1..=4, got {0}")]
    InvalidVariant(u8),

    /// CHSH value above the Tsirelson bound; no quantum state produces it.
    #[error("CHSH value {0} exceeds the Tsirelson bound 2*sqrt(2)")]
    SuperQuantum(f64),

    /// One or more correlators needed by a CHSH polynomial are missing.
    #[error("missing correlators: {0:?}")]
    MissingCorrelators(Vec<&'static str>),

    /// Charlie's outcome never occurs, so nothing can be conditioned on it.
    #[error("empty conditioning subset: Charlie basis C{basis}, outcome {outcome:+}")]
    EmptyBranch { basis: u8, outcome: i8 },

    /// Test-round basis combinations without any recorded rounds.
    #[error("no rounds recorded for basis combinations {0:?}")]
    EmptyBuckets(Vec<BasisTriple>),

    /// A record transform was asked to do something only valid for another sift case.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// The rate function does not change sign over the bracket.
    #[error("no threshold in range [{lo}, {hi}]: rate({lo}) = {f_lo}, rate({hi}) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    /// Monte Carlo estimate disagrees with the closed form.
    #[error("validation failed for {quantity}: empirical {empirical} vs analytic {analytic} (|diff| = {diff:.3e} > {k_sigma} x se {std_err:.3e})")]
    Validation {
        quantity: &'static str,
        empirical: f64,
        analytic: f64,
        diff: f64,
        std_err: f64,
        k_sigma: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in [0, 1], got {x}")))
    }
}
