//! Thin wrappers over `libm`. Routing every transcendental through one
//! pure-Rust implementation keeps sampler output bit-identical across
//! platforms and under `no_std`, which the reproducibility contract of the
//! training CLI depends on.

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub(crate) fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Natural log of the gamma function, sign discarded (arguments here are
/// always positive).
pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}
