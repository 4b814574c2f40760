//! Scalar math for `no_std` builds, routed through `libm`.

pub use core::f64::consts::{FRAC_PI_2, PI, TAU};

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin_cos(x: f64) -> (f64, f64) {
    libm::sincos(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub fn asin(x: f64) -> f64 {
    libm::asin(x)
}

#[inline]
pub fn atanh(x: f64) -> f64 {
    libm::atanh(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// IEEE remainder: `x - n*y` with `n` the integer nearest `x/y`. Exact.
#[inline]
pub fn remainder(x: f64, y: f64) -> f64 {
    libm::remainder(x, y)
}

/// Phase fold `arcsin(sin(phi))` onto `[-pi/2, pi/2]`.
///
/// Evaluated piecewise (reduce to `[-pi, pi]`, then reflect) rather than
/// through `asin(sin(..))` so that the map is exactly idempotent on its range.
pub fn fold_phase(phi: f64) -> f64 {
    if (-FRAC_PI_2..=FRAC_PI_2).contains(&phi) {
        return phi;
    }
    let r = remainder(phi, TAU);
    let folded = if r > FRAC_PI_2 {
        PI - r
    } else if r < -FRAC_PI_2 {
        -PI - r
    } else {
        r
    };
    folded.clamp(-FRAC_PI_2, FRAC_PI_2)
}

/// Slope of [`fold_phase`]: `sign(cos phi)`, zero at the fold points.
pub fn fold_phase_slope(phi: f64) -> f64 {
    let c = cos(phi);
    if c.abs() < 1e-12 {
        0.0
    } else if c > 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_matches_arcsin_of_sin() {
        for i in -400..=400 {
            let phi = i as f64 * 0.0789;
            assert!((fold_phase(phi) - asin(sin(phi))).abs() < 1e-12, "phi={phi}");
        }
    }

    #[test]
    fn fold_known_values() {
        assert_eq!(fold_phase(0.0), 0.0);
        assert!((fold_phase(2.0) - (PI - 2.0)).abs() < 1e-15);
        assert_eq!(fold_phase(FRAC_PI_2), FRAC_PI_2);
        assert!((fold_phase(PI)).abs() < 1e-15);
    }
}
