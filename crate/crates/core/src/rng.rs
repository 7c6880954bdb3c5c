//! Seeded randomness.
//!
//! Every source of randomness in the simulator is a ChaCha8 stream whose
//! seed is derived from a master seed and a stream index through the
//! SplitMix64 mixer, so
//!
//! * each elementary link and the protocol controller draw from their own
//!   statistically independent stream,
//! * a stream is reproducible from `(master seed, stream id)` alone, and
//! * sweep points get their seeds from `(master seed, point index)`, so
//!   adding points to a sweep never perturbs existing ones.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::time::SimTime;

/// SplitMix64 output mixer (Steele, Lea & Flood's generator finalizer).
/// Used as a 64-bit hash to derive independent seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit mix of a master seed and a stream/point index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}

/// Identifies one RNG stream inside an engine: stream `i` belongs to
/// elementary link `i`, and the stream after the last link belongs to the
/// protocol controller (swap draws and any other chain-level randomness).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamId(pub u32);

impl StreamId {
    pub fn link(link: u32) -> StreamId {
        StreamId(link)
    }

    pub fn controller(num_links: u32) -> StreamId {
        StreamId(num_links)
    }
}

/// The per-engine set of independent RNG streams.
#[derive(Clone, Debug)]
pub struct RngStreams {
    master_seed: u64,
    streams: alloc::vec::Vec<ChaCha8Rng>,
}

impl RngStreams {
    pub fn new(master_seed: u64, num_streams: u32) -> RngStreams {
        RngStreams {
            master_seed,
            streams: (0..num_streams as u64)
                .map(|i| ChaCha8Rng::seed_from_u64(derive_seed(master_seed, i)))
                .collect(),
        }
    }

    #[inline]
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    #[inline]
    pub fn stream(&mut self, id: StreamId) -> &mut ChaCha8Rng {
        &mut self.streams[id.0 as usize]
    }
}

/// Uniform draw from the half-open interval `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw from the open interval `(0, 1)`; safe to pass to `ln`.
#[inline]
pub fn uniform_open_f64(rng: &mut impl RngCore) -> f64 {
    loop {
        let u = uniform_f64(rng);
        if u > 0.0 {
            return u;
        }
    }
}

/// Bernoulli draw with success probability `p` (`p` in `[0, 1]`).
#[inline]
pub fn bernoulli(rng: &mut impl RngCore, p: f64) -> bool {
    uniform_f64(rng) < p
}

/// Geometric distribution on attempts `k = 1, 2, ...` with per-attempt
/// success probability `p`: `P(k) = (1 - p)^(k-1) * p`.
#[derive(Clone, Copy, Debug)]
pub struct Geometric {
    p: f64,
    ln_q: f64, // ln(1 - p); 0 when p == 1 (never consulted then)
}

#[derive(Debug, PartialEq, thiserror::Error)]
#[error("geometric success probability must be in (0, 1], got {0}")]
pub struct GeometricError(pub f64);

impl Geometric {
    pub fn new(p: f64) -> Result<Geometric, GeometricError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(GeometricError(p));
        }
        Ok(Geometric {
            p,
            ln_q: crate::math::ln(1.0 - p),
        })
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Sample by inverting the CDF: `k = ceil(ln(U) / ln(1 - p))` for
    /// uniform `U` in `(0, 1)`.
    #[inline]
    pub fn sample(&self, rng: &mut impl RngCore) -> u64 {
        if self.p >= 1.0 {
            return 1;
        }
        let u = uniform_open_f64(rng);
        let k = crate::math::ceil(crate::math::ln(u) / self.ln_q);
        // ln(U) can be -0.0 when U rounds to 1; clamp into the support.
        (k as u64).max(1)
    }
}

/// Time of the `MemoryExpired` check for an entanglement created at
/// `created_at` under lifetime `tau`: `NEVER` when the lifetime is infinite.
#[inline]
pub(crate) fn expiry_time(created_at: SimTime, tau: SimTime) -> SimTime {
    created_at.saturating_add(tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_from_master_and_id() {
        let mut a = RngStreams::new(42, 3);
        let mut b = RngStreams::new(42, 3);
        for id in 0..3 {
            assert_eq!(
                a.stream(StreamId(id)).next_u64(),
                b.stream(StreamId(id)).next_u64()
            );
        }
        // Different streams diverge immediately.
        let mut c = RngStreams::new(42, 2);
        let x = c.stream(StreamId(0)).next_u64();
        let y = c.stream(StreamId(1)).next_u64();
        assert_ne!(x, y);
    }

    #[test]
    fn derive_seed_differs_by_index_and_master() {
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
        assert_eq!(derive_seed(7, 5), derive_seed(7, 5));
    }

    #[test]
    fn uniform_stays_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let u = uniform_f64(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn geometric_rejects_bad_probability() {
        assert!(Geometric::new(0.0).is_err());
        assert!(Geometric::new(-0.5).is_err());
        assert!(Geometric::new(1.5).is_err());
        assert!(Geometric::new(f64::NAN).is_err());
        assert!(Geometric::new(1.0).is_ok());
    }

    #[test]
    fn geometric_mean_tracks_one_over_p() {
        // Sample mean within 3 standard errors of 1/p for a spread of p.
        for (seed, p) in [(11u64, 0.5f64), (12, 0.1), (13, 1e-3)] {
            let geom = Geometric::new(p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 100_000u64;
            let sum: f64 = (0..n).map(|_| geom.sample(&mut rng) as f64).sum();
            let mean = sum / n as f64;
            let std = (1.0 - p).sqrt() / p;
            let se = std / (n as f64).sqrt();
            assert!(
                (mean - 1.0 / p).abs() < 3.0 * se,
                "p={p}: mean {mean} vs {} (se {se})",
                1.0 / p
            );
        }
    }

    #[test]
    fn geometric_with_certain_success_always_returns_one() {
        let geom = Geometric::new(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(geom.sample(&mut rng), 1);
        }
    }
}
