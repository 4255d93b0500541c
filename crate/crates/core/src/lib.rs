//! Device-independent three-party quantum secret sharing over lossy, noisy
//! channels.
//!
//! The crate is layered bottom-up:
//!
//! - [`qstate`]: kets, density matrices, equatorial observables.
//! - [`nonlocality`]: CHSH and Svetlichny polynomials.
//! - [`noisemodel`]: white noise, per-photon loss, imperfect sources.
//! - [`strategies`]: postselection and noise preprocessing.
//! - [`keyrate`]: closed-form QBER, CHSH value and key rates.
//! - [`thresholds`]: fiber model, bisection thresholds, sweeps.
//! - [`montecarlo`]: seeded round-by-round simulation.
//! - [`cli`]: the `diqss` command-line front end.

pub mod cli;
pub mod error;
pub mod keyrate;
pub mod montecarlo;
pub mod noisemodel;
pub mod nonlocality;
pub mod qstate;
pub mod strategies;
pub mod thresholds;

pub use error::{Error, Result};
pub use keyrate::{key_rate, ProtocolParams, RateBreakdown, SourceCoupling};
pub use montecarlo::{simulate, SimulationReport};
pub use strategies::{StrategyConfig, StrategyKind};
pub use thresholds::{Channel, FiberModel, Scenario, ThresholdResult, Variable};
