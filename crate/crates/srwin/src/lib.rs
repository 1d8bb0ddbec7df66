//! Selective-repeat window protocols over a Bernoulli-loss channel:
//! a deterministic slot-driven simulator (SR-ARQ and block-coded SR-FEC),
//! closed-form performance models, and the shared GF(2) coding machinery.
//!
//! The crate has three layers:
//!
//! * [`analytics`] — exact and asymptotic formulas for per-window maximum
//!   transmission counts, buffer occupancy and delay, throughput under
//!   lossy feedback, and finite-blocklength coding rates.
//! * [`sim`] — the discrete-event loop tying together [`arq`]/[`fec`]
//!   endpoints over the [`channel`], with replicated, seeded measurement.
//! * [`gf2`] — bit-mask linear algebra used by the coded protocol.

pub mod analytics;
pub mod arq;
pub mod channel;
pub mod fec;
pub mod gf2;
pub mod sim;
pub mod units;

pub use sim::{run, run_once, sweep, Axis, ExperimentConfig, MetricsReport, Protocol, SimError};
