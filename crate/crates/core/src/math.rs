// Float functions for `no_std`. `core` has no transcendental functions on f64.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub(crate) fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

#[inline]
pub(crate) fn cbrt(x: f64) -> f64 {
    libm::cbrt(x)
}

#[inline]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

/// Principal value of an angle in `(-pi, pi]`.
pub(crate) fn wrap_phase(angle: f64) -> f64 {
    use core::f64::consts::PI;
    let two_pi = 2.0 * PI;
    let mut wrapped = angle - two_pi * libm::floor((angle + PI) / two_pi);
    // floor puts us in [-pi, pi); move the left endpoint over.
    if wrapped <= -PI {
        wrapped += two_pi;
    }
    if wrapped > PI {
        wrapped -= two_pi;
    }
    wrapped
}
