//! Random stochastic chains `x(k+1) = W(k) x(k)`: models, infinite flow
//! graphs, approximation constructions, hypothesis checks and Monte Carlo
//! estimates of ergodicity classes.
//!
//! Indices are 0-based in the API and 1-based in every serialized form.

pub mod approx;
pub mod error;
pub mod flow;
pub mod models;
pub mod properties;
pub mod schedule;
pub mod simulate;
pub mod stochastic;
pub mod streams;

pub use error::{Error, Result};
pub use flow::{ErgodicityPattern, FlowMode, InfiniteFlowGraph};
pub use models::{ChainModel, SharedModel};
pub use schedule::{Rate, Schedule, SeriesClass};
pub use stochastic::{IndexSet, StochasticMatrix};
pub use streams::{derive_seed, PathStreams};
