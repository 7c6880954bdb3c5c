//! Single-point measurements and parameter sweeps.
//!
//! [`measure_rate`] plays one operating point through the event engine and
//! reports the collected [`TrialStats`].  [`run_sweep`] unrolls a grid of
//! chain lengths, repeater counts and memory lifetimes, simulates every
//! point with a seed derived from the grid position, and pairs each
//! simulated rate with the matching closed-form model so the two can be
//! compared row by row.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::analytics::{self, AnalyticsError, MuSource};
use crate::engine::{run, Engine, Event, RunError};
pub use crate::engine::{StopCondition, StopReason};
use crate::params::{HardwareParams, ParamError};
use crate::protocols::{IndependentChain, SynchronousChain};
use crate::rng::derive_seed;
use crate::stats::TrialStats;
use crate::time::SimTime;
use crate::topology::{ChainTopology, TopologyError};

/// How the elementary links are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolKind {
    /// Global rounds on a shared clock: all links emit together and the end
    /// nodes collect every link's herald before the next round starts.
    Synchronous,
    /// Every link retries on its own cadence and parks its pair in memory
    /// until the whole chain has reported in.
    Independent,
}

impl ProtocolKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProtocolKind::Synchronous => "synchronous",
            ProtocolKind::Independent => "independent",
        }
    }
}

impl core::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One simulated operating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointSpec {
    /// Hardware parameters, including this point's memory lifetime.
    pub params: HardwareParams,
    pub length_km: f64,
    pub repeaters: u32,
    pub protocol: ProtocolKind,
    /// Independent scheme only: after a failed swap, keep the surviving
    /// segments held in memory instead of discarding the whole chain.
    pub partial_discard: bool,
    pub stop: StopCondition,
    pub seed: u64,
}

/// What [`measure_rate`] returns: the raw counters plus why the run ended.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMeasurement {
    pub stats: TrialStats,
    pub stop_reason: StopReason,
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Model(#[from] AnalyticsError),
    #[error("stop condition can never trigger (no success target and no finite time budget)")]
    UnboundedStop,
    #[error("sweep axis {0} is empty")]
    EmptyAxis(&'static str),
}

impl From<RunError> for SimulationError {
    fn from(e: RunError) -> SimulationError {
        match e {
            RunError::UnboundedStop => SimulationError::UnboundedStop,
        }
    }
}

/// Simulate one point and return the collected counters.
pub fn measure_rate(spec: &PointSpec) -> Result<RateMeasurement, SimulationError> {
    measure(spec, None)
}

/// Callback invoked on every dispatched event, in fire order.
pub type EventObserver = Box<dyn FnMut(&Event)>;

/// Like [`measure_rate`] but invokes `observer` on every dispatched event in
/// fire order — the hook behind event tracing.
pub fn measure_rate_observed(
    spec: &PointSpec,
    observer: EventObserver,
) -> Result<RateMeasurement, SimulationError> {
    measure(spec, Some(observer))
}

fn measure(
    spec: &PointSpec,
    observer: Option<EventObserver>,
) -> Result<RateMeasurement, SimulationError> {
    spec.params.validate()?;
    let topo = ChainTopology::new(spec.length_km, spec.repeaters)?;
    ensure_terminates(&spec.stop)?;
    // One RNG stream per link plus one for the swapping stations.
    let mut engine = Engine::new(spec.seed, topo.num_links() + 1);
    if let Some(observer) = observer {
        engine.set_observer(observer);
    }
    let (report, stats) = match spec.protocol {
        ProtocolKind::Synchronous => {
            let mut chain = SynchronousChain::new(spec.params, topo);
            let report = run(&mut engine, &mut chain, spec.stop)?;
            (report, chain.finish(report.elapsed))
        }
        ProtocolKind::Independent => {
            let mut chain = IndependentChain::new(spec.params, topo, spec.partial_discard);
            let report = run(&mut engine, &mut chain, spec.stop)?;
            (report, chain.finish(report.elapsed))
        }
    };
    Ok(RateMeasurement {
        stats,
        stop_reason: report.reason,
    })
}

/// A time budget of [`SimTime::NEVER`] never fires, so a stop rule relying
/// on it alone would spin forever.
fn ensure_terminates(stop: &StopCondition) -> Result<(), SimulationError> {
    let time_bounded = matches!(stop.max_sim_time, Some(t) if t != SimTime::NEVER);
    if stop.max_successes.is_some() || time_bounded {
        Ok(())
    } else {
        Err(SimulationError::UnboundedStop)
    }
}

/// A full parameter grid: every combination of `lengths_km` x
/// `repeater_counts` x `tau_mem_s` is simulated under the same stop rule.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    /// Base hardware parameters; each grid point replaces the memory
    /// lifetime with its own `tau_mem_s` value.
    pub params: HardwareParams,
    pub lengths_km: Vec<f64>,
    pub repeater_counts: Vec<u32>,
    pub tau_mem_s: Vec<f64>,
    pub protocol: ProtocolKind,
    pub partial_discard: bool,
    pub stop: StopCondition,
    /// Per-point seeds are derived from this one and the point's position
    /// in the grid, so a sweep is reproducible point by point.
    pub master_seed: u64,
    /// Where the max-of-N attempt correction used by the independent-scheme
    /// model comes from.
    pub mu_source: MuSource,
}

/// One sweep row: the simulated rate next to the model value.
#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub length_km: f64,
    pub repeaters: u32,
    pub tau_mem_s: f64,
    pub protocol: ProtocolKind,
    pub rate_sim_per_s: f64,
    /// Batch-mean standard error; NaN when there are too few successes.
    pub rate_sim_stderr: f64,
    /// Closed-form rate for the same point.  Only the no-repeater model
    /// knows about the lifetime cutoff; the repeater models assume the
    /// memories outlive the protocol.
    pub rate_model_per_s: f64,
    /// `(simulated - model) / model`; zero when both rates are zero.
    pub rel_dev: f64,
    /// Mean age of the oldest constituent memory at establishment, seconds.
    pub mean_dt_s: f64,
    pub successes: u64,
    pub seed: u64,
}

/// Batches used for the standard-error column of a sweep row.
pub const STDERR_BATCHES: usize = 10;

/// Closed-form rate for one grid point.  `mu` is the max-of-N correction
/// for the independent scheme; the synchronous models ignore it.
pub fn model_rate(
    params: &HardwareParams,
    length_km: f64,
    repeaters: u32,
    protocol: ProtocolKind,
    mu: f64,
) -> f64 {
    match protocol {
        ProtocolKind::Synchronous => {
            if repeaters == 0 {
                analytics::rate_no_repeater(params, length_km)
            } else {
                analytics::rate_synchronous(params, length_km, repeaters)
            }
        }
        ProtocolKind::Independent => {
            analytics::rate_independent_with_mu(params, length_km, repeaters, mu)
        }
    }
}

fn relative_deviation(sim: f64, model: f64) -> f64 {
    if model > 0.0 {
        (sim - model) / model
    } else if sim == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `mu(n)` from `source`, memoised in `cache`: the Monte-Carlo source is
/// costly and every sweep row with the same repeater count shares a value.
pub fn mu_for(
    source: &MuSource,
    n: u32,
    cache: &mut BTreeMap<u32, f64>,
) -> Result<f64, AnalyticsError> {
    if let Some(&mu) = cache.get(&n) {
        return Ok(mu);
    }
    let mu = source.mu(n)?;
    cache.insert(n, mu);
    Ok(mu)
}

/// The grid unrolled into per-point specs, in output order: lengths
/// outermost, then repeater counts, then lifetimes.  Point `i` runs with
/// seed `derive_seed(master_seed, i)`.
pub fn sweep_points(spec: &SweepSpec) -> Result<Vec<PointSpec>, SimulationError> {
    if spec.lengths_km.is_empty() {
        return Err(SimulationError::EmptyAxis("lengths_km"));
    }
    if spec.repeater_counts.is_empty() {
        return Err(SimulationError::EmptyAxis("repeater_counts"));
    }
    if spec.tau_mem_s.is_empty() {
        return Err(SimulationError::EmptyAxis("tau_mem_s"));
    }
    ensure_terminates(&spec.stop)?;
    let mut out = Vec::with_capacity(
        spec.lengths_km.len() * spec.repeater_counts.len() * spec.tau_mem_s.len(),
    );
    for &length_km in &spec.lengths_km {
        for &repeaters in &spec.repeater_counts {
            for &tau_mem_s in &spec.tau_mem_s {
                let mut params = spec.params;
                params.tau_mem_s = tau_mem_s;
                out.push(PointSpec {
                    params,
                    length_km,
                    repeaters,
                    protocol: spec.protocol,
                    partial_discard: spec.partial_discard,
                    stop: spec.stop,
                    seed: derive_seed(spec.master_seed, out.len() as u64),
                });
            }
        }
    }
    Ok(out)
}

/// Simulate one point and pair it with the model.  `mu` must be
/// `mu(repeaters + 1)` when the point runs the independent scheme; the
/// synchronous models ignore it.
pub fn run_point(point: &PointSpec, mu: f64) -> Result<PointResult, SimulationError> {
    let measurement = measure_rate(point)?;
    let stats = &measurement.stats;
    let model = model_rate(
        &point.params,
        point.length_km,
        point.repeaters,
        point.protocol,
        mu,
    );
    let rate_sim = stats.rate_per_s();
    Ok(PointResult {
        length_km: point.length_km,
        repeaters: point.repeaters,
        tau_mem_s: point.params.tau_mem_s,
        protocol: point.protocol,
        rate_sim_per_s: rate_sim,
        rate_sim_stderr: stats.rate_stderr_per_s(STDERR_BATCHES),
        rate_model_per_s: model,
        rel_dev: relative_deviation(rate_sim, model),
        mean_dt_s: stats.mean_oldest_age_s(),
        successes: stats.successes,
        seed: point.seed,
    })
}

/// Simulate the whole grid sequentially, one row per point, in
/// [`sweep_points`] order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<PointResult>, SimulationError> {
    let points = sweep_points(spec)?;
    let mut mu_cache = BTreeMap::new();
    let mut rows = Vec::with_capacity(points.len());
    for point in &points {
        let mu = match spec.protocol {
            ProtocolKind::Independent => {
                mu_for(&spec.mu_source, point.repeaters + 1, &mut mu_cache)?
            }
            ProtocolKind::Synchronous => 1.0,
        };
        rows.push(run_point(point, mu)?);
    }
    Ok(rows)
}
