//! Numerical building blocks: special functions, root finding, optimisation,
//! quadrature and seeded random streams.

pub mod linalg;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod roots;
pub mod special;

/// Lower and upper clamp applied to every probability-scale value.
pub const U_EPS: f64 = 1e-10;

pub fn clamp_unit(u: f64) -> f64 {
    if u.is_nan() {
        return 0.5;
    }
    u.clamp(U_EPS, 1.0 - U_EPS)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with denominator `n - 1`.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Logistic map of `z` into `(lo, hi)`.
pub fn to_interval(z: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) / (1.0 + (-z).exp())
}

pub fn from_interval(x: f64, lo: f64, hi: f64) -> f64 {
    let p = ((x - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}
