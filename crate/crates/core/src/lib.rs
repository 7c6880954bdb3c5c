//! Deterministic simulation of entanglement distribution over a linear chain
//! of quantum repeaters with finite memory lifetimes.
//!
//! The crate has two halves that are meant to be checked against each other:
//!
//! * [`analytics`] — closed-form rate models for a repeater chain: the
//!   single-attempt success probability of an elementary link, the geometric
//!   attempt distribution, expected rates for the no-repeater, synchronous
//!   and independent link-generation schemes, and a Monte-Carlo estimate of
//!   the max-of-N attempt-count correction factor.
//! * [`engine`] / [`protocols`] / [`simulation`] — a discrete-event simulator
//!   that plays out the same protocols attempt by attempt on an integer
//!   picosecond clock, with seeded RNG streams so every run is reproducible.
//!
//! [`simulation::measure_rate`] runs one simulated point and
//! [`simulation::run_sweep`] evaluates a parameter grid, pairing each
//! simulated rate with the matching analytical model so the two halves can
//! be compared point by point.
//!
//! The crate is `no_std`-compatible (it needs `alloc` only); the companion
//! CLI crate carries all file formats and I/O.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod analytics;
pub mod engine;
mod math;
pub mod params;
pub mod protocols;
pub mod record;
pub mod rng;
pub mod simulation;
pub mod stats;
pub mod time;
pub mod topology;

pub use params::HardwareParams;
pub use record::{EntanglementRecord, MemoryId, Side};
pub use simulation::{
    measure_rate, run_sweep, PointResult, ProtocolKind, StopCondition, SweepSpec,
};
pub use stats::TrialStats;
pub use time::SimTime;
pub use topology::ChainTopology;
