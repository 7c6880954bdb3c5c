//! Range-wide consistency checks between the closed-form models and the
//! tick arithmetic, complementing the point checks in the unit tests.

use proptest::prelude::*;

use repchain_core::analytics::{
    mu_sqrt_approx, p_single, rate_independent_with_mu, rate_no_repeater, rate_synchronous,
};
use repchain_core::{HardwareParams, SimTime};

fn params_strategy() -> impl Strategy<Value = HardwareParams> {
    (
        0.05f64..=1.0,
        0.05f64..=1.0,
        0.05f64..=1.0,
        0.05f64..=1.0,
        0.0f64..=0.5,
        1.0e4f64..=3.0e5,
    )
        .prop_map(
            |(e_b, e_s, e_m, e_d, alpha_db_per_km, v_km_per_s)| HardwareParams {
                e_b,
                e_s,
                e_m,
                e_d,
                alpha_db_per_km,
                v_km_per_s,
                tau_mem_s: f64::INFINITY,
            },
        )
}

fn assert_close(a: f64, b: f64, rel: f64) {
    let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    assert!(
        (a - b).abs() <= rel * scale,
        "{a} and {b} differ by more than {rel} relative"
    );
}

proptest! {
    /// With unbounded memories, the zero-repeater case of the synchronous
    /// model is the direct transmission model: one link spanning the whole
    /// chain, one four-flight round.
    #[test]
    fn synchronous_without_repeaters_is_direct_transmission(
        params in params_strategy(),
        length_km in 0.5f64..=500.0,
    ) {
        assert_close(
            rate_synchronous(&params, length_km, 0),
            rate_no_repeater(&params, length_km),
            1e-12,
        );
    }

    /// Every model rate is a frequency of signal flights, so it scales
    /// linearly with the signal velocity.
    #[test]
    fn rates_scale_linearly_with_velocity(
        params in params_strategy(),
        length_km in 0.5f64..=500.0,
        repeaters in 0u32..=4,
        factor in 1.5f64..=8.0,
    ) {
        let mut faster = params;
        faster.v_km_per_s *= factor;
        let mu = mu_sqrt_approx(repeaters + 1);

        assert_close(
            rate_no_repeater(&faster, length_km),
            factor * rate_no_repeater(&params, length_km),
            1e-9,
        );
        assert_close(
            rate_synchronous(&faster, length_km, repeaters),
            factor * rate_synchronous(&params, length_km, repeaters),
            1e-9,
        );
        assert_close(
            rate_independent_with_mu(&faster, length_km, repeaters, mu),
            factor * rate_independent_with_mu(&params, length_km, repeaters, mu),
            1e-9,
        );
    }

    /// Longer chains are never faster: attenuation and flight time both
    /// grow with distance.
    #[test]
    fn rates_decrease_with_distance(
        params in params_strategy(),
        length_km in 0.5f64..=400.0,
        stretch in 1.01f64..=4.0,
        repeaters in 0u32..=4,
    ) {
        let longer = length_km * stretch;
        let mu = mu_sqrt_approx(repeaters + 1);
        prop_assert!(
            rate_no_repeater(&params, longer) <= rate_no_repeater(&params, length_km)
        );
        prop_assert!(
            rate_synchronous(&params, longer, repeaters)
                <= rate_synchronous(&params, length_km, repeaters)
        );
        prop_assert!(
            rate_independent_with_mu(&params, longer, repeaters, mu)
                <= rate_independent_with_mu(&params, length_km, repeaters, mu)
        );
    }

    /// The single-attempt probability is a product of probabilities.
    #[test]
    fn single_attempt_probability_stays_in_unit_interval(
        params in params_strategy(),
        length_km in 0.5f64..=500.0,
    ) {
        let p = p_single(&params, length_km);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    /// Attenuation agrees with its decibel definition.
    #[test]
    fn fiber_survival_matches_the_db_form(
        alpha_db_per_km in 0.0f64..=0.5,
        length_km in 0.0f64..=500.0,
    ) {
        let params = HardwareParams {
            alpha_db_per_km,
            ..HardwareParams::default()
        };
        assert_close(
            params.fiber_survival(length_km),
            10f64.powf(-alpha_db_per_km * length_km / 10.0),
            1e-12,
        );
    }

    /// Seconds round-trip exactly through ticks across the whole practical
    /// simulation horizon.  (Beyond ~4100 s one ulp of the seconds value
    /// exceeds a picosecond, so divide-then-multiply may flip the last
    /// tick; no run in this crate comes near that.)
    #[test]
    fn seconds_round_trip_through_ticks(ticks in 0u64..=2_000_000_000_000_000u64) {
        let t = SimTime::from_ticks(ticks);
        prop_assert_eq!(SimTime::from_secs(t.as_secs()), t);
    }
}

/// The direct model's hard distance cutoff: beyond the memory horizon the
/// rate is exactly zero, just short of it the rate is positive.
#[test]
fn direct_transmission_dies_at_the_memory_horizon() {
    let params = HardwareParams::default().with_tau_mem_s(1e-3);
    // 2 v tau = 400 km.
    assert!(rate_no_repeater(&params, 399.0) > 0.0);
    assert_eq!(rate_no_repeater(&params, 400.0), 0.0);
    assert_eq!(rate_no_repeater(&params, 401.0), 0.0);
}
