//! Counters and samples collected while a protocol runs.

use alloc::vec::Vec;

use crate::math;
use crate::time::SimTime;

/// Everything a single simulated trial records.  All fields are integers or
/// tick values, so two runs with the same seed compare exactly equal.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrialStats {
    /// End-to-end entanglements established.
    pub successes: u64,
    /// Simulated time covered by the trial.
    pub elapsed: SimTime,
    /// Generation attempts started, per elementary link.  The total across
    /// links equals the number of photon-emission events.
    pub attempts_per_link: Vec<u64>,
    /// Protocol rounds (synchronous) or generation cycles (independent)
    /// started.
    pub rounds: u64,
    /// Establishment time of every success, in order.
    pub success_times: Vec<SimTime>,
    /// Age of the oldest constituent memory at each establishment.
    pub oldest_age_samples: Vec<SimTime>,
}

impl TrialStats {
    pub fn new(num_links: u32) -> TrialStats {
        TrialStats {
            attempts_per_link: alloc::vec![0; num_links as usize],
            ..TrialStats::default()
        }
    }

    pub fn total_attempts(&self) -> u64 {
        self.attempts_per_link.iter().sum()
    }

    /// Successes per simulated second.  Computed as `successes * 1e12 /
    /// elapsed_ticks` so that exact tick counts give exact rates.
    pub fn rate_per_s(&self) -> f64 {
        if self.elapsed == SimTime::ZERO {
            return 0.0;
        }
        self.successes as f64 * 1e12 / self.elapsed.ticks() as f64
    }

    /// Mean age of the oldest constituent memory at establishment, seconds.
    pub fn mean_oldest_age_s(&self) -> f64 {
        if self.oldest_age_samples.is_empty() {
            return f64::NAN;
        }
        let sum: f64 = self.oldest_age_samples.iter().map(|t| t.as_secs()).sum();
        sum / self.oldest_age_samples.len() as f64
    }

    /// Standard error of the rate from batch means: the success stream is
    /// cut into `batches` spans of equal success count and the spread of the
    /// per-batch rates is reported.  Returns NaN when there are fewer
    /// successes than batches.
    pub fn rate_stderr_per_s(&self, batches: usize) -> f64 {
        let n = self.success_times.len();
        if batches < 2 || n < batches {
            return f64::NAN;
        }
        let per_batch = n / batches;
        let mut rates = Vec::with_capacity(batches);
        let mut start = SimTime::ZERO;
        for b in 0..batches {
            let end = self.success_times[(b + 1) * per_batch - 1];
            let span = end - start;
            if span == SimTime::ZERO {
                return f64::NAN;
            }
            rates.push(per_batch as f64 * 1e12 / span.ticks() as f64);
            start = end;
        }
        let mean = rates.iter().sum::<f64>() / batches as f64;
        let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (batches - 1) as f64;
        math::sqrt(var / batches as f64)
    }
}
