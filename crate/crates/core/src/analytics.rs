//! Closed-form rate models for entanglement distribution over a repeater
//! chain, plus the Monte-Carlo max-of-N correction used by the independent
//! scheme.
//!
//! All models assume an infinite memory lifetime unless stated otherwise;
//! the simulator is the tool for finite-lifetime questions, and sweep output
//! pairs each simulated point with the matching model from this module.
//!
//! Two accounting notes that are deliberate, not bugs:
//!
//! * The no-repeater rate ([`rate_no_repeater`]) charges four link flight
//!   times per attempt (the coordinator kicks off every attempt), while the
//!   independent-scheme rate ([`rate_independent`]) charges three (links
//!   retry autonomously and only report completions).  At `r = 0` the two
//!   therefore differ by that prefactor; both are kept as stated.
//! * Rates diverge as the chain length goes to zero: the models contain no
//!   floor on the attempt repetition period, so `L -> 0` sends the attempt
//!   rate, and with it the entanglement rate, to infinity.  Callers probing
//!   very short chains are probing the models, not hardware.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use thiserror::Error;

use crate::math;
use crate::params::HardwareParams;
use crate::rng::{derive_seed, Geometric};

/// Success probability of a single elementary-link generation attempt over
/// `length_km` of fiber:
/// `e_b * e_m^2 * e_d^2 * exp(-gamma * length_km)`.
///
/// Both photons must be emitted (`e_m` each), survive half the link each
/// (`exp(-gamma*L/2)` twice), be detected (`e_d` each), and the two-round
/// measurement must herald success (`e_b`).
pub fn p_single(params: &HardwareParams, length_km: f64) -> f64 {
    debug_assert!(length_km >= 0.0);
    params.e_b
        * params.e_m
        * params.e_m
        * params.e_d
        * params.e_d
        * params.fiber_survival(length_km)
}

/// Probability that the first success lands on attempt `k` (`k >= 1`) when
/// each attempt succeeds with probability `p1`.
pub fn geometric_pmf(p1: f64, k: u64) -> Result<f64, AnalyticsError> {
    if !(p1 > 0.0 && p1 <= 1.0) {
        return Err(AnalyticsError::Probability(p1));
    }
    if k == 0 {
        return Err(AnalyticsError::AttemptIndex);
    }
    Ok(math::powi(1.0 - p1, (k - 1) as i32) * p1)
}

/// Mean and standard deviation of the attempt count to first success:
/// `mean = 1/p1`, `std = sqrt(1/p1^2 - 1/p1)`.
pub fn geometric_mean_std(p1: f64) -> Result<(f64, f64), AnalyticsError> {
    if !(p1 > 0.0 && p1 <= 1.0) {
        return Err(AnalyticsError::Probability(p1));
    }
    let mean = 1.0 / p1;
    Ok((mean, math::sqrt(mean * mean - mean)))
}

/// Expected entanglement rate (per second) between the ends of a single
/// elementary link of length `length_km` with no repeaters: one attempt per
/// `4 L / v`, each succeeding with [`p_single`].  Exactly zero when the
/// memory lifetime cannot cover the photon flight to the midpoint station,
/// i.e. when `L >= 2 v tau_mem`.
pub fn rate_no_repeater(params: &HardwareParams, length_km: f64) -> f64 {
    debug_assert!(length_km > 0.0);
    if length_km >= 2.0 * params.v_km_per_s * params.tau_mem_s {
        return 0.0;
    }
    params.v_km_per_s / (4.0 * length_km) * p_single(params, length_km)
}

/// Expected end-to-end rate of the synchronous scheme over `r` repeaters:
/// every round, all `r + 1` links attempt simultaneously and any failure
/// discards everything, so a round succeeds with probability
/// `e_s^r * p_single(L/(r+1))^(r+1)` and takes `3L/(v(r+1)) + L/v`.
///
/// Memory lifetime does not enter; this is the infinite-lifetime model.
pub fn rate_synchronous(params: &HardwareParams, length_km: f64, repeaters: u32) -> f64 {
    debug_assert!(length_km > 0.0);
    let n = repeaters as f64 + 1.0;
    let round_s = (3.0 / n + 1.0) * length_km / params.v_km_per_s;
    let p_round = math::powi(params.e_b, repeaters as i32 + 1)
        * math::powi(params.e_s, repeaters as i32)
        * math::powi(params.e_m * params.e_d, 2 * (repeaters as i32 + 1))
        * params.fiber_survival(length_km);
    p_round / round_s
}

/// Where the max-of-N attempt correction `mu` comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MuSource {
    /// Monte-Carlo estimate via [`estimate_mu`].
    MonteCarlo {
        p1: f64,
        repetitions: u64,
        seed: u64,
    },
    /// The `sqrt(N)` shorthand, adequate for `N <= 8`.
    SqrtApprox,
}

impl MuSource {
    /// Default Monte-Carlo configuration: `p1 = 1e-3`, a million
    /// repetitions, seed 0.
    pub const DEFAULT_MC: MuSource = MuSource::MonteCarlo {
        p1: 1e-3,
        repetitions: 1_000_000,
        seed: 0,
    };

    /// Resolve `mu(n)` for `n` parallel links.
    pub fn mu(&self, n: u32) -> Result<f64, AnalyticsError> {
        match *self {
            MuSource::MonteCarlo {
                p1,
                repetitions,
                seed,
            } => Ok(estimate_mu(n, p1, repetitions, seed)?.mean_normalized),
            MuSource::SqrtApprox => Ok(mu_sqrt_approx(n)),
        }
    }
}

/// Expected end-to-end rate of the independent scheme over `r` repeaters:
/// each link retries on its own `3 l / v` cadence, the chain waits for the
/// slowest of the `r + 1` links (the `mu` factor), and the whole generation
/// repeats `1/e_s^r` times on average because a failed swap discards
/// everything:
/// `[3 mu (r+1) / (r+1)]^-1 * (v/L) * e_b * e_s^r * e_m^2 e_d^2 *
/// exp(-gamma L / (r+1))`.
///
/// Infinite-lifetime model; `mu` is `mu(r + 1)` from `mu_source`.
pub fn rate_independent(
    params: &HardwareParams,
    length_km: f64,
    repeaters: u32,
    mu_source: MuSource,
) -> Result<f64, AnalyticsError> {
    let mu = mu_source.mu(repeaters + 1)?;
    Ok(rate_independent_with_mu(params, length_km, repeaters, mu))
}

/// [`rate_independent`] with a pre-resolved `mu(r + 1)`; useful when one
/// `mu` estimate is shared across a sweep.
pub fn rate_independent_with_mu(
    params: &HardwareParams,
    length_km: f64,
    repeaters: u32,
    mu: f64,
) -> f64 {
    debug_assert!(length_km > 0.0);
    let n = repeaters as f64 + 1.0;
    let prefactor = n / (3.0 * mu) * params.v_km_per_s / length_km;
    prefactor
        * params.e_b
        * math::powi(params.e_s, repeaters as i32)
        * params.e_m
        * params.e_m
        * params.e_d
        * params.e_d
        * params.fiber_survival(length_km / n)
}

/// Expected age of the oldest constituent memory when an end-to-end
/// entanglement completes under the independent scheme:
/// `1 / rate + (L/v) * log2(r + 1)` — the generation wait plus the swap
/// ladder.  Exposed separately from the rate so callers can reuse a cached
/// `mu`.
pub fn oldest_memory_age_s(
    params: &HardwareParams,
    length_km: f64,
    repeaters: u32,
    mu: f64,
) -> f64 {
    let rate = rate_independent_with_mu(params, length_km, repeaters, mu);
    oldest_age_from_rate_s(rate, length_km, params.v_km_per_s, repeaters)
}

/// The same age estimate from an already-known rate.
pub fn oldest_age_from_rate_s(
    rate_per_s: f64,
    length_km: f64,
    v_km_per_s: f64,
    repeaters: u32,
) -> f64 {
    1.0 / rate_per_s + length_km / v_km_per_s * math::log2(repeaters as f64 + 1.0)
}

/// Monte-Carlo estimate of the max-of-N attempt correction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuEstimate {
    pub n: u32,
    /// `E[max(k_1..k_N)] / E[k]` — the slowdown from waiting for the
    /// slowest of `N` links.
    pub mean_normalized: f64,
    /// Sample standard deviation of `max(k_i)`, normalized by `E[k]`
    /// (a spread, not a standard error).
    pub stddev_normalized: f64,
    pub repetitions: u64,
}

/// Estimate `mu(n) = E[max of n geometric draws] / (1/p1)` by Monte Carlo.
///
/// Deterministic for a given `(n, p1, repetitions, seed)`; the stream is
/// derived from the seed alone, so estimates for different `n` with the
/// same seed are independent but individually reproducible.
pub fn estimate_mu(
    n: u32,
    p1: f64,
    repetitions: u64,
    seed: u64,
) -> Result<MuEstimate, AnalyticsError> {
    if n == 0 {
        return Err(AnalyticsError::ZeroLinks);
    }
    if repetitions == 0 {
        return Err(AnalyticsError::ZeroRepetitions);
    }
    let geom = Geometric::new(p1).map_err(|e| AnalyticsError::Probability(e.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, n as u64));
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..repetitions {
        let mut max = 0u64;
        for _ in 0..n {
            max = max.max(geom.sample(&mut rng));
        }
        let m = max as f64;
        sum += m;
        sum_sq += m * m;
    }
    let mean = sum / repetitions as f64;
    let var = if repetitions > 1 {
        (sum_sq - sum * sum / repetitions as f64) / (repetitions - 1) as f64
    } else {
        0.0
    };
    let expected_k = 1.0 / p1;
    Ok(MuEstimate {
        n,
        mean_normalized: mean / expected_k,
        stddev_normalized: math::sqrt(var.max(0.0)) / expected_k,
        repetitions,
    })
}

/// `sqrt(N)` shorthand for `mu(N)`.
pub fn mu_sqrt_approx(n: u32) -> f64 {
    math::sqrt(n as f64)
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("success probability must be in (0, 1], got {0}")]
    Probability(f64),
    #[error("attempt index k starts at 1")]
    AttemptIndex,
    #[error("need at least one link")]
    ZeroLinks,
    #[error("need at least one repetition")]
    ZeroRepetitions,
}
