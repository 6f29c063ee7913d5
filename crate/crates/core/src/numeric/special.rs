//! Normal and Student-t distribution functions used throughout the crate.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;
use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::ln_gamma;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile, polished with one Halley step.
pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    let d = norm_pdf(x);
    if d <= 0.0 || !x.is_finite() {
        return x;
    }
    let e = if p < 0.5 {
        norm_cdf(x) - p
    } else {
        // work with the upper tail to keep relative precision
        (1.0 - p) - 0.5 * erfc(x / std::f64::consts::SQRT_2)
    };
    let step = e / d;
    x - step / (1.0 + 0.5 * x * step)
}

pub fn t_ln_pdf(x: f64, df: f64) -> f64 {
    ln_gamma(0.5 * (df + 1.0))
        - ln_gamma(0.5 * df)
        - 0.5 * (df * std::f64::consts::PI).ln()
        - 0.5 * (df + 1.0) * (x * x / df).ln_1p()
}

pub fn t_pdf(x: f64, df: f64) -> f64 {
    t_ln_pdf(x, df).exp()
}

/// Student-t CDF with real-valued degrees of freedom.
pub fn t_cdf(x: f64, df: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let x2 = x * x;
    if x2 < df {
        let half = 0.5 * beta_reg(0.5, 0.5 * df, x2 / (df + x2));
        if x < 0.0 {
            0.5 - half
        } else {
            0.5 + half
        }
    } else {
        let tail = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + x2));
        if x < 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }
}

/// Student-t quantile, refined by Newton steps on `t_cdf`.
pub fn t_ppf(p: f64, df: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    let mut x = match StudentsT::new(0.0, 1.0, df) {
        Ok(dist) => dist.inverse_cdf(p),
        Err(_) => norm_ppf(p),
    };
    if !x.is_finite() {
        x = norm_ppf(p);
    }
    // Newton on the tail that keeps relative precision.
    for _ in 0..4 {
        let d = t_pdf(x, df);
        if d <= 0.0 || !d.is_finite() {
            break;
        }
        let e = if p < 0.5 {
            t_cdf(x, df) - p
        } else {
            (1.0 - p) - t_cdf(-x, df)
        };
        let step = e / d;
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Unit-variance Student-t scale factor `sqrt((df - 2) / df)`.
pub fn std_t_scale(df: f64) -> f64 {
    ((df - 2.0) / df).sqrt()
}

/// Log density of the unit-variance Student-t distribution.
pub fn std_t_ln_pdf(z: f64, df: f64) -> f64 {
    let s = std_t_scale(df);
    t_ln_pdf(z / s, df) - s.ln()
}

pub fn std_t_cdf(z: f64, df: f64) -> f64 {
    t_cdf(z / std_t_scale(df), df)
}

pub fn std_t_ppf(p: f64, df: f64) -> f64 {
    t_ppf(p, df) * std_t_scale(df)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantile_known_values() {
        assert!((norm_ppf(0.975) - 1.959_963_984_540_054).abs() < 1e-13);
        assert!((norm_ppf(0.5)).abs() < 1e-15);
        for &p in &[1e-12, 1e-6, 0.01, 0.3, 0.7, 0.99, 1.0 - 1e-9] {
            let x = norm_ppf(p);
            let back = if p < 0.5 { norm_cdf(x) } else { 1.0 - norm_cdf(-x) };
            assert!(((back - p) / p.min(1.0 - p)).abs() < 1e-10, "p={p}");
        }
    }

    #[test]
    fn t_quantile_round_trip() {
        for &df in &[2.0, 2.5, 4.0, 7.3, 30.0, 150.0] {
            for &p in &[1e-8, 0.001, 0.1, 0.4, 0.5, 0.77, 0.999] {
                let x = t_ppf(p, df);
                assert!((t_cdf(x, df) - p).abs() < 1e-13 + 1e-10 * p, "df={df} p={p}");
            }
        }
    }

    #[test]
    fn t_cdf_matches_closed_form_for_two_df() {
        // F(x) = 1/2 + x / (2 sqrt(2 + x^2)) for two degrees of freedom
        for &x in &[-30.0, -2.0, -0.1, 0.0, 0.3, 1.7, 12.0] {
            let exact = 0.5 + x / (2.0 * (2.0f64 + x * x).sqrt());
            assert!((t_cdf(x, 2.0) - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn standardized_t_has_unit_variance_scale() {
        let df = 6.0;
        let z = std_t_ppf(0.9, df);
        assert!((std_t_cdf(z, df) - 0.9).abs() < 1e-13);
        assert!((std_t_scale(df) - (4.0f64 / 6.0).sqrt()).abs() < 1e-15);
    }
}
