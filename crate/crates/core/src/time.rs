//! Simulation clock: integer picoseconds in a 64-bit counter.
//!
//! All physical distances and durations are converted to ticks once, when a
//! scenario is set up (rounding half-to-even); afterwards the simulation does
//! only integer arithmetic, so event ordering can never depend on float
//! rounding.

use core::fmt;
use core::ops::{Add, AddAssign, Sub};

use crate::math;

/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;

/// A point on (or a span of) the simulation clock, in picoseconds.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime {
    ticks: u64,
}

impl SimTime {
    pub const ZERO: SimTime = SimTime { ticks: 0 };

    /// Sentinel for "never": used as the expiry of records whose memory
    /// lifetime is infinite.  Compares greater than every reachable clock
    /// value.
    pub const NEVER: SimTime = SimTime { ticks: u64::MAX };

    #[inline]
    pub const fn from_ticks(ticks: u64) -> SimTime {
        SimTime { ticks }
    }

    #[inline]
    pub const fn ticks(self) -> u64 {
        self.ticks
    }

    /// Convert a duration in seconds to ticks, rounding half-to-even.
    /// Negative and NaN inputs are rejected by the callers that validate
    /// configuration; `f64::INFINITY` maps to [`SimTime::NEVER`].
    pub fn from_secs(secs: f64) -> SimTime {
        if secs.is_infinite() {
            return SimTime::NEVER;
        }
        debug_assert!(secs >= 0.0, "durations must be non-negative");
        SimTime {
            ticks: math::round_ties_even(secs * PS_PER_S) as u64,
        }
    }

    /// Travel time for `distance_km` at `v_km_per_s`, rounded half-to-even.
    pub fn from_distance(distance_km: f64, v_km_per_s: f64) -> SimTime {
        SimTime::from_secs(distance_km / v_km_per_s)
    }

    #[inline]
    pub fn as_secs(self) -> f64 {
        if self == SimTime::NEVER {
            f64::INFINITY
        } else {
            self.ticks as f64 / PS_PER_S
        }
    }

    /// Saturating add that preserves the `NEVER` sentinel.
    #[inline]
    pub fn saturating_add(self, rhs: SimTime) -> SimTime {
        if self == SimTime::NEVER || rhs == SimTime::NEVER {
            SimTime::NEVER
        } else {
            SimTime {
                ticks: self.ticks.saturating_add(rhs.ticks),
            }
        }
    }

    #[inline]
    pub fn scaled(self, factor: u64) -> SimTime {
        SimTime {
            ticks: self.ticks * factor,
        }
    }
}

impl Add for SimTime {
    type Output = SimTime;
    #[inline]
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime {
            ticks: self.ticks + rhs.ticks,
        }
    }
}

impl AddAssign for SimTime {
    #[inline]
    fn add_assign(&mut self, rhs: SimTime) {
        self.ticks += rhs.ticks;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    #[inline]
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime {
            ticks: self.ticks - rhs.ticks,
        }
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == SimTime::NEVER {
            write!(f, "never")
        } else {
            write!(f, "{}ps", self.ticks)
        }
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == SimTime::NEVER {
            write!(f, "never")
        } else {
            write!(f, "{}", self.ticks)
        }
    }
}
