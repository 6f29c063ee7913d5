//! Tweedie compound Poisson-gamma distribution for power `p` in (1, 2).
//!
//! The density of the positive part is evaluated with the Dunn-Smyth series;
//! the CDF uses the Poisson mixture of gamma CDFs.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::numeric::roots::brent_root;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TweedieDist {
    pub mean: f64,
    pub phi: f64,
    pub power: f64,
}

impl TweedieDist {
    pub fn new(mean: f64, phi: f64, power: f64) -> Result<Self> {
        let d = TweedieDist { mean, phi, power };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power > 1.0 && self.power < 2.0) {
            return Err(Error::Domain(format!("Tweedie power must lie in (1,2), got {}", self.power)));
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::Domain(format!("Tweedie dispersion must be > 0, got {}", self.phi)));
        }
        if !(self.mean > 0.0 && self.mean.is_finite()) {
            return Err(Error::Domain(format!("Tweedie mean must be > 0, got {}", self.mean)));
        }
        Ok(())
    }

    /// Poisson rate of the compound representation.
    pub fn poisson_rate(&self) -> f64 {
        self.mean.powf(2.0 - self.power) / (self.phi * (2.0 - self.power))
    }

    /// Shape of each gamma summand.
    pub fn gamma_shape(&self) -> f64 {
        (2.0 - self.power) / (self.power - 1.0)
    }

    /// Scale of each gamma summand.
    pub fn gamma_scale(&self) -> f64 {
        self.phi * (self.power - 1.0) * self.mean.powf(self.power - 1.0)
    }

    pub fn prob_zero(&self) -> f64 {
        (-self.poisson_rate()).exp()
    }

    pub fn variance(&self) -> f64 {
        self.phi * self.mean.powf(self.power)
    }

    /// Log of the Dunn-Smyth series `sum_j W_j` for `y > 0`.
    fn ln_series(&self, y: f64) -> f64 {
        let p = self.power;
        let phi = self.phi;
        let alpha = (2.0 - p) / (1.0 - p);
        let ln_z = -alpha * y.ln() + alpha * (p - 1.0).ln() - (1.0 - alpha) * phi.ln() - (2.0 - p).ln();
        let ln_w = |j: f64| j * ln_z - ln_gamma(j + 1.0) - ln_gamma(-j * alpha);
        let jmax = (y.powf(2.0 - p) / (phi * (2.0 - p))).max(1.0).round();
        let peak = ln_w(jmax);
        let cutoff = peak - 37.0;
        let mut total = 0.0;
        let mut j = jmax;
        loop {
            let lw = ln_w(j);
            total += (lw - peak).exp();
            if lw < cutoff || j >= jmax + 1e6 {
                break;
            }
            j += 1.0;
        }
        let mut j = jmax - 1.0;
        while j >= 1.0 {
            let lw = ln_w(j);
            total += (lw - peak).exp();
            if lw < cutoff {
                break;
            }
            j -= 1.0;
        }
        peak + total.ln()
    }

    /// Log density of the continuous part for `y > 0`, or the log of the
    /// zero atom's mass for `y == 0`.
    pub fn ln_pdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            return f64::NEG_INFINITY;
        }
        if y == 0.0 {
            return -self.poisson_rate();
        }
        let p = self.power;
        let theta = self.mean.powf(1.0 - p) / (1.0 - p);
        let kappa = self.mean.powf(2.0 - p) / (2.0 - p);
        self.ln_series(y) - y.ln() + (y * theta - kappa) / self.phi
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.ln_pdf(y).exp()
    }

    /// Poisson-index window carrying all but a negligible share of the mass.
    fn poisson_window(&self) -> (u64, u64) {
        let lambda = self.poisson_rate();
        let spread = 12.0 * lambda.sqrt() + 30.0;
        let lo = (lambda - spread).floor().max(1.0) as u64;
        let hi = (lambda + spread).ceil() as u64;
        (lo, hi)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        let lambda = self.poisson_rate();
        let mut total = (-lambda).exp();
        if y == 0.0 {
            return total;
        }
        if y.is_infinite() {
            return 1.0;
        }
        let shape = self.gamma_shape();
        let scale = self.gamma_scale();
        let (lo, hi) = self.poisson_window();
        for n in lo..=hi {
            let nf = n as f64;
            let weight = (nf * lambda.ln() - lambda - ln_gamma(nf + 1.0)).exp();
            if weight == 0.0 {
                continue;
            }
            total += weight * gamma_lr(nf * shape, y / scale);
        }
        total.min(1.0)
    }

    /// Quantile; levels inside the zero atom map to 0.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Argument(format!("quantile level must lie in (0,1), got {u}")));
        }
        if u <= self.prob_zero() {
            return Ok(0.0);
        }
        let mut hi = self.mean + 4.0 * self.variance().sqrt();
        while self.cdf(hi) < u {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Numeric("Tweedie quantile bracket overflow".into()));
            }
        }
        brent_root(|y| self.cdf(y) - u, 0.0, hi, 1e-13 * hi, 300)
    }

    /// Draw via the compound Poisson-gamma representation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let lambda = self.poisson_rate();
        let n = Poisson::new(lambda).map(|d| d.sample(rng)).unwrap_or(0.0) as u64;
        if n == 0 {
            return 0.0;
        }
        match Gamma::new(n as f64 * self.gamma_shape(), self.gamma_scale()) {
            Ok(g) => g.sample(rng),
            Err(_) => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quadrature::integrate;

    /// Poisson mixture of gamma densities, independent of the series route.
    fn mixture_pdf(d: &TweedieDist, y: f64) -> f64 {
        let lambda = d.poisson_rate();
        let k = d.gamma_shape();
        let s = d.gamma_scale();
        (1..400)
            .map(|n| {
                let a = n as f64 * k;
                let lw = n as f64 * lambda.ln() - lambda - ln_gamma(n as f64 + 1.0);
                let lg = (a - 1.0) * y.ln() - y / s - ln_gamma(a) - a * s.ln();
                (lw + lg).exp()
            })
            .sum()
    }

    #[test]
    fn series_matches_poisson_gamma_mixture() {
        for &(mean, phi, p) in &[(5.0, 1.0, 1.5), (2.0, 0.4, 1.2), (30.0, 2.0, 1.8), (0.7, 0.05, 1.6)] {
            let d = TweedieDist::new(mean, phi, p).unwrap();
            for &y in &[0.05, 0.5, 1.0, 3.3, 10.0, 40.0] {
                let a = d.pdf(y);
                let b = mixture_pdf(&d, y);
                assert!((a - b).abs() <= 1e-10 * b.max(1e-300) + 1e-300, "{d:?} y={y}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn total_mass_is_one() {
        let d = TweedieDist::new(5.0, 1.0, 1.5).unwrap();
        let cont = integrate(|y| if y <= 0.0 { 0.0 } else { d.pdf(y) }, 0.0, 200.0, 1e-12, 1e-12).unwrap();
        assert!((cont.value + d.prob_zero() - 1.0).abs() < 1e-8);
        assert!((d.cdf(200.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_agrees_with_integrated_density() {
        let d = TweedieDist::new(3.0, 0.8, 1.4).unwrap();
        for &y in &[0.2, 1.5, 4.0, 9.0] {
            let r = integrate(|s| if s <= 0.0 { 0.0 } else { d.pdf(s) }, 0.0, y, 1e-13, 1e-12).unwrap();
            assert!((d.cdf(y) - d.prob_zero() - r.value).abs() < 1e-9);
        }
    }

    #[test]
    fn atom_quantile() {
        // choose the rate so that P(X = 0) = 0.3
        let p = 1.5;
        let phi = 1.0;
        let lambda = -(0.3f64).ln();
        let mean = (lambda * phi * (2.0 - p)).powf(1.0 / (2.0 - p));
        let d = TweedieDist::new(mean, phi, p).unwrap();
        assert!((d.prob_zero() - 0.3).abs() < 1e-12);
        assert_eq!(d.quantile(0.2).unwrap(), 0.0);
        let y = d.quantile(0.6).unwrap();
        assert!(y > 0.0 && (d.cdf(y) - 0.6).abs() < 1e-10);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(TweedieDist::new(1.0, 1.0, 2.0).is_err());
        assert!(TweedieDist::new(1.0, 0.0, 1.5).is_err());
        assert!(TweedieDist::new(-1.0, 1.0, 1.5).is_err());
    }
}
