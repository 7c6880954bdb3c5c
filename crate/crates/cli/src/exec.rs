//! Sweep execution, optionally fanned out across worker threads.
//!
//! Per-point seeds and row order depend only on the grid position, so any
//! thread count produces byte-identical output; threads only change who
//! computes which row.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use repchain_core::simulation::{
    self, mu_for, run_point, sweep_points, PointResult, ProtocolKind, SimulationError, SweepSpec,
};

pub fn run_sweep_threaded(
    spec: &SweepSpec,
    threads: usize,
) -> Result<Vec<PointResult>, SimulationError> {
    if threads <= 1 {
        return simulation::run_sweep(spec);
    }
    let points = sweep_points(spec)?;
    // Resolve every mu up front: the Monte-Carlo estimate is costly and the
    // cache must not race.
    let mut mu_cache = BTreeMap::new();
    let mut mus = Vec::with_capacity(points.len());
    for point in &points {
        mus.push(match spec.protocol {
            ProtocolKind::Independent => {
                mu_for(&spec.mu_source, point.repeaters + 1, &mut mu_cache)?
            }
            ProtocolKind::Synchronous => 1.0,
        });
    }

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<PointResult, SimulationError>>>> =
        Mutex::new((0..points.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.min(points.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= points.len() {
                    break;
                }
                let row = run_point(&points[i], mus[i]);
                slots.lock().unwrap()[i] = Some(row);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every point was claimed by a worker"))
        .collect()
}
