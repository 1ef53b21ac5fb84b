//! Agent-based financial market models and a stylized-facts toolkit.
//!
//! Four models share one stepping contract ([`model::Model`]) and one run
//! loop ([`model::run_model`]):
//!
//! - [`fc_minimal`]: fundamentalist/chartist switching with an optional
//!   self-organizing agent count.
//! - [`lux_marchesi`]: three populations with a tick-quantized price.
//! - [`gcmg`]: the grand-canonical minority game.
//! - [`thurner`]: leveraged funds, margin calls and numerical clearing.
//!
//! [`stylized_facts`] measures what the models produce and [`harness`] turns
//! configs into reproducible runs on disk.

pub mod fc_minimal;
pub mod gcmg;
pub mod harness;
pub mod lux_marchesi;
pub mod model;
pub mod quad;
pub mod rng;
pub mod series;
pub mod stylized_facts;
pub mod thurner;

pub use model::{run_model, run_model_partial, Model, ModelError, RunError, StepRecord, Trace};
pub use rng::RngStream;
pub use series::{compute_returns, PriceSeries, ReturnKind, ReturnSeries, SeriesError};
