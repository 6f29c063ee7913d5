//! Point and interval forecast scores.

use crate::error::{Error, Result};
use crate::Real;

fn check_lengths(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Argument(format!("{what}: length mismatch ({a} vs {b})")));
    }
    if a == 0 {
        return Err(Error::Argument(format!("{what}: empty input")));
    }
    Ok(())
}

fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable")
}

/// Mean squared error `(1/S) sum (x - xhat)^2`.
pub fn mse<T: Real>(observed: &[T], predicted: &[T]) -> Result<T> {
    check_lengths(observed.len(), predicted.len(), "mse")?;
    let sum = observed
        .iter()
        .zip(predicted)
        .fold(T::zero(), |acc, (x, p)| acc + (*x - *p) * (*x - *p));
    Ok(sum / count(observed.len()))
}

/// Interval score of one forecast at level `alpha`.
pub fn interval_score<T: Real>(observed: T, lower: T, upper: T, alpha: T) -> Result<T> {
    if lower > upper {
        return Err(Error::Argument(format!("interval lower {lower:?} exceeds upper {upper:?}")));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::Argument(format!("alpha must lie in (0,1), got {alpha:?}")));
    }
    let two = T::one() + T::one();
    let mut s = upper - lower;
    if observed < lower {
        s = s + two / alpha * (lower - observed);
    }
    if observed > upper {
        s = s + two / alpha * (observed - upper);
    }
    Ok(s)
}

/// Mean interval score over a forecast window.
pub fn mis<T: Real>(observed: &[T], lower: &[T], upper: &[T], alpha: T) -> Result<T> {
    check_lengths(observed.len(), lower.len(), "mis")?;
    check_lengths(observed.len(), upper.len(), "mis")?;
    let mut sum = T::zero();
    for i in 0..observed.len() {
        sum = sum + interval_score(observed[i], lower[i], upper[i], alpha)?;
    }
    Ok(sum / count(observed.len()))
}

/// Empirical quantile of sorted data with linear interpolation between order
/// statistics (`h = (n - 1) p`).
pub fn quantile_sorted<T: Real>(sorted: &[T], p: T) -> T {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let n = sorted.len();
    let h = p.max(T::zero()).min(T::one()) * count::<T>(n - 1);
    let lo = h.floor();
    let i = lo.to_usize().unwrap_or(0).min(n - 1);
    if i + 1 >= n {
        return sorted[n - 1];
    }
    sorted[i] + (h - lo) * (sorted[i + 1] - sorted[i])
}

/// Fraction of observations inside their interval.
pub fn coverage<T: Real>(observed: &[T], lower: &[T], upper: &[T]) -> Result<f64> {
    check_lengths(observed.len(), lower.len(), "coverage")?;
    check_lengths(observed.len(), upper.len(), "coverage")?;
    let hits = (0..observed.len())
        .filter(|&i| observed[i] >= lower[i] && observed[i] <= upper[i])
        .count();
    Ok(hits as f64 / observed.len() as f64)
}
