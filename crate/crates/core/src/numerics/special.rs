//! Complementary error function and the standard normal distribution.
//!
//! `erfc` is the FreeBSD msun rational approximation as packaged by `libm`
//! (sub-ulp accuracy on the whole real line).

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function, `erfc(-x/√2)/2`.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}
