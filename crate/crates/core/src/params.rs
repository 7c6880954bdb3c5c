//! Hardware parameters shared by the analytical models and the simulator.

use thiserror::Error;

use crate::math;

/// Natural-log attenuation coefficient per km for a fiber loss of
/// `alpha_db_per_km`, i.e. the `gamma` in `exp(-gamma * L)` such that the
/// transmitted fraction over `L` km equals `10^(-alpha * L / 10)`.
pub fn gamma_per_km(alpha_db_per_km: f64) -> f64 {
    alpha_db_per_km * core::f64::consts::LN_10 / 10.0
}

/// Efficiencies and link-level constants of the simulated hardware.
///
/// All efficiencies are probabilities in `[0, 1]`:
/// * `e_b` — probability that a Bell-state measurement heralds success once
///   both photons have been detected (covers both measurement rounds of an
///   attempt),
/// * `e_s` — success probability of an entanglement swap at a repeater,
/// * `e_m` — probability that an excited memory emits its photon,
/// * `e_d` — single-photon detector efficiency.
///
/// `tau_mem_s` is the memory lifetime in seconds counted from the moment a
/// qubit entangles with its photon; `f64::INFINITY` disables expiry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HardwareParams {
    pub e_b: f64,
    pub e_s: f64,
    pub e_m: f64,
    pub e_d: f64,
    pub alpha_db_per_km: f64,
    pub v_km_per_s: f64,
    pub tau_mem_s: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("{name} must be a probability in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("alpha_db_per_km must be finite and >= 0, got {0}")]
    Attenuation(f64),
    #[error("v_km_per_s must be finite and > 0, got {0}")]
    Velocity(f64),
    #[error("tau_mem_s must be > 0 (possibly infinite), got {0}")]
    MemoryLifetime(f64),
}

impl HardwareParams {
    /// Validate every field; the rest of the crate assumes a validated set.
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, value) in [
            ("e_b", self.e_b),
            ("e_s", self.e_s),
            ("e_m", self.e_m),
            ("e_d", self.e_d),
        ] {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(ParamError::Probability { name, value });
            }
        }
        if !self.alpha_db_per_km.is_finite() || self.alpha_db_per_km < 0.0 {
            return Err(ParamError::Attenuation(self.alpha_db_per_km));
        }
        if !self.v_km_per_s.is_finite() || self.v_km_per_s <= 0.0 {
            return Err(ParamError::Velocity(self.v_km_per_s));
        }
        if self.tau_mem_s.is_nan() || self.tau_mem_s <= 0.0 {
            return Err(ParamError::MemoryLifetime(self.tau_mem_s));
        }
        Ok(())
    }

    #[inline]
    pub fn gamma_per_km(&self) -> f64 {
        gamma_per_km(self.alpha_db_per_km)
    }

    /// Fraction of photons surviving `distance_km` of fiber.
    #[inline]
    pub fn fiber_survival(&self, distance_km: f64) -> f64 {
        math::exp(-self.gamma_per_km() * distance_km)
    }

    #[inline]
    pub fn with_tau_mem_s(self, tau_mem_s: f64) -> HardwareParams {
        HardwareParams { tau_mem_s, ..self }
    }
}

impl Default for HardwareParams {
    /// Reference parameter set used throughout the tests: telecom-style
    /// fiber attenuation at two thirds the vacuum speed of light, moderate
    /// memory and detector efficiencies, and no memory expiry.
    fn default() -> HardwareParams {
        HardwareParams {
            e_b: 0.5,
            e_s: 0.5,
            e_m: 0.9,
            e_d: 0.8,
            alpha_db_per_km: 0.2,
            v_km_per_s: 2.0e5,
            tau_mem_s: f64::INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_matches_db_definition() {
        // alpha = 0.2 dB/km: gamma = 0.2 * ln(10) / 10
        let g = gamma_per_km(0.2);
        assert!((g - 0.04605170185988091).abs() < 1e-16);
        // Survival over 50 km must equal the dB form 10^(-alpha*L/10) = 0.1.
        let p = HardwareParams::default();
        assert!((p.fiber_survival(50.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn default_set_is_valid() {
        assert_eq!(HardwareParams::default().validate(), Ok(()));
    }

    #[test]
    fn rejects_out_of_range_fields() {
        let p = HardwareParams {
            e_m: 1.2,
            ..HardwareParams::default()
        };
        assert!(matches!(p.validate(), Err(ParamError::Probability { .. })));

        let p = HardwareParams {
            v_km_per_s: 0.0,
            ..HardwareParams::default()
        };
        assert!(matches!(p.validate(), Err(ParamError::Velocity(_))));

        let p = HardwareParams::default().with_tau_mem_s(0.0);
        assert!(matches!(p.validate(), Err(ParamError::MemoryLifetime(_))));

        let p = HardwareParams {
            alpha_db_per_km: -0.1,
            ..HardwareParams::default()
        };
        assert!(matches!(p.validate(), Err(ParamError::Attenuation(_))));
    }

    #[test]
    fn infinite_lifetime_is_accepted() {
        let p = HardwareParams::default().with_tau_mem_s(f64::INFINITY);
        assert_eq!(p.validate(), Ok(()));
    }
}
