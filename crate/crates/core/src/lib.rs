//! Jointly correlated dual-side fluid antenna channels.
//!
//! * [`channel`]: port geometry, sinc correlation, eigenbases, coupling
//!   models and channel sampling.
//! * [`permanent`]: permanents, extended permanents and their marginal
//!   expansions.
//! * [`capacity`]: Monte-Carlo capacities and the extended-permanent upper
//!   bound.
//! * [`allocator`]: projected-gradient statistical power allocation.
//! * [`experiment`]: configurable sweeps that write CSV curves, and the
//!   validation suites.

pub mod allocator;
pub mod capacity;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod numerics;
pub mod permanent;

pub use error::{Error, Result};
