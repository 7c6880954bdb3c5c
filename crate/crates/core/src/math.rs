//! Thin wrappers over `libm` so the whole crate uses one float-math
//! implementation regardless of whether `std` is enabled.  `libm` is pure
//! Rust, so results are bit-identical across platforms, which the
//! reproducibility guarantees elsewhere rely on.

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

/// Round to nearest integer, ties to even (IEEE default rounding).
#[inline]
pub(crate) fn round_ties_even(x: f64) -> f64 {
    libm::rint(x)
}

#[inline]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_std_on_representative_values() {
        for &x in &[0.1, 0.5, 1.0, core::f64::consts::LN_10, 17.25] {
            assert_eq!(exp(-x), (-x).exp());
            assert_eq!(ln(x), x.ln());
            assert_eq!(sqrt(x), x.sqrt());
            assert_eq!(log2(x), x.log2());
        }
    }

    #[test]
    fn rint_ties_go_to_even() {
        assert_eq!(round_ties_even(0.5), 0.0);
        assert_eq!(round_ties_even(1.5), 2.0);
        assert_eq!(round_ties_even(2.5), 2.0);
        assert_eq!(round_ties_even(-0.5), 0.0);
        assert_eq!(round_ties_even(3.7), 4.0);
    }
}
