use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFunction {
    Identity,
    Log,
}

/// How the time index enters the linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    /// `(t - mean) / sd` of the training indices `1..=T`.
    #[default]
    Standardized,
    /// The raw day index `t`.
    RawIndex,
    /// No time effect; the slope is held at zero.
    None,
}

/// Linear predictor `intercept + slope * zeta_t` mapped through a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeLink {
    pub intercept: f64,
    pub slope: f64,
    pub link: LinkFunction,
    pub covariate: Covariate,
    /// Centre and scale of the standardised covariate (0 and 1 otherwise).
    pub center: f64,
    pub scale: f64,
}

impl TimeLink {
    /// Link with the covariate transform calibrated to a training window of length `n`.
    pub fn for_window(link: LinkFunction, covariate: Covariate, n: usize) -> TimeLink {
        let (center, scale) = match covariate {
            Covariate::Standardized => {
                let n = n.max(2) as f64;
                let mean = (n + 1.0) / 2.0;
                // sample sd of 1..n
                let sd = (n * (n + 1.0) / 12.0).sqrt();
                (mean, sd)
            }
            _ => (0.0, 1.0),
        };
        TimeLink {
            intercept: 0.0,
            slope: 0.0,
            link,
            covariate,
            center,
            scale,
        }
    }

    pub fn has_slope(&self) -> bool {
        self.covariate != Covariate::None
    }

    /// Covariate value for the 1-based day index `t`.
    pub fn zeta(&self, t: f64) -> f64 {
        match self.covariate {
            Covariate::Standardized => (t - self.center) / self.scale,
            Covariate::RawIndex => t,
            Covariate::None => 0.0,
        }
    }

    pub fn predictor(&self, t: f64) -> f64 {
        self.intercept + self.slope * self.zeta(t)
    }

    /// Location (identity link) or mean (log link) at day `t`.
    pub fn location(&self, t: f64) -> f64 {
        match self.link {
            LinkFunction::Identity => self.predictor(t),
            LinkFunction::Log => self.predictor(t).exp(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.intercept.is_finite() && self.slope.is_finite()) {
            return Err(Error::Domain("time link coefficients must be finite".into()));
        }
        if !(self.scale > 0.0) {
            return Err(Error::Domain("time link covariate scale must be > 0".into()));
        }
        if self.link == LinkFunction::Log {
            for t in 1..=n {
                let m = self.location(t as f64);
                if !(m > 0.0 && m.is_finite()) {
                    return Err(Error::Domain(format!("log-link mean not positive at t = {t}")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_covariate_has_zero_mean_unit_sd() {
        let l = TimeLink::for_window(LinkFunction::Identity, Covariate::Standardized, 11);
        let z: Vec<f64> = (1..=11).map(|t| l.zeta(t as f64)).collect();
        let m = z.iter().sum::<f64>() / 11.0;
        let v = z.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 10.0;
        assert!(m.abs() < 1e-14);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_link_is_positive() {
        let mut l = TimeLink::for_window(LinkFunction::Log, Covariate::RawIndex, 5);
        l.intercept = 1.0;
        l.slope = -0.1;
        assert!((l.location(2.0) - 0.8f64.exp()).abs() < 1e-14);
        assert!(l.validate(5).is_ok());
    }
}
