//! Maximum-likelihood fitting of the GAMLSS-style families and the Tweedie GLM.

use serde::{Deserialize, Serialize};

use super::gamlss::{GamlssFamily, GamlssParams};
use super::link::{Covariate, LinkFunction, TimeLink};
use super::tweedie::TweedieDist;
use super::{GamlssModel, TweedieModel, TweedieParams};
use crate::error::{Error, Result};
use crate::numeric::optimize::{minimize, OptimOptions, OptimResult};
use crate::numeric::roots::golden_section;
use crate::numeric::{mean, variance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamlssFitConfig {
    pub family: GamlssFamily,
    #[serde(default)]
    pub covariate: Covariate,
    /// Held value of `nu` (required for NET).
    #[serde(default)]
    pub fixed_nu: Option<f64>,
    /// Held value of `tau` (required for NET).
    #[serde(default)]
    pub fixed_tau: Option<f64>,
}

impl GamlssFitConfig {
    pub fn new(family: GamlssFamily) -> Self {
        let (fixed_nu, fixed_tau) = if family == GamlssFamily::Net {
            (Some(1.5), Some(2.0))
        } else {
            (None, None)
        };
        GamlssFitConfig {
            family,
            covariate: Covariate::Standardized,
            fixed_nu,
            fixed_tau,
        }
    }

    pub fn with_covariate(mut self, covariate: Covariate) -> Self {
        self.covariate = covariate;
        self
    }
}

/// Maps between the optimizer vector and the distribution parameters, in
/// standardised data units.
struct GamlssLayout {
    family: GamlssFamily,
    slope: bool,
    nu: Option<f64>,
    tau: Option<f64>,
}

impl GamlssLayout {
    fn len(&self) -> usize {
        2 + self.slope as usize + self.nu.is_none() as usize + self.tau.is_none() as usize
    }

    /// Returns `(b0, b1, sigma, nu, tau)`.
    fn unpack(&self, theta: &[f64]) -> (f64, f64, f64, f64, f64) {
        let mut it = theta.iter().copied();
        let b0 = it.next().unwrap_or(0.0);
        let b1 = if self.slope { it.next().unwrap_or(0.0) } else { 0.0 };
        let sigma = it.next().unwrap_or(0.0).exp();
        let nu = match self.nu {
            Some(v) => v,
            None => {
                let raw = it.next().unwrap_or(0.0);
                if self.family.positive_nu() {
                    raw.exp()
                } else {
                    raw
                }
            }
        };
        let tau = match self.tau {
            Some(v) => v,
            None => it.next().unwrap_or(0.0).exp(),
        };
        (b0, b1, sigma, nu, tau)
    }

    fn start(&self, y: &[f64], zeta: &[f64]) -> Vec<f64> {
        let n = y.len() as f64;
        let zm = zeta.iter().sum::<f64>() / n;
        let ym = y.iter().sum::<f64>() / n;
        let sxx: f64 = zeta.iter().map(|z| (z - zm).powi(2)).sum();
        let b1 = if self.slope && sxx > 0.0 {
            zeta.iter().zip(y).map(|(z, v)| (z - zm) * (v - ym)).sum::<f64>() / sxx
        } else {
            0.0
        };
        let resid: Vec<f64> = y.iter().zip(zeta).map(|(v, z)| v - b1 * z).collect();
        let mut sorted = resid.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let sd = variance(&resid).sqrt().max(1e-3);
        let mut theta = vec![median];
        if self.slope {
            theta.push(b1);
        }
        theta.push(sd.ln());
        if self.nu.is_none() {
            theta.push(match self.family {
                GamlssFamily::Shasho | GamlssFamily::Shasho2 => 0.0,
                GamlssFamily::Sep4 => 2f64.ln(),
                _ => 0.0,
            });
        }
        if self.tau.is_none() {
            theta.push(match self.family {
                GamlssFamily::Sst => 10f64.ln(),
                GamlssFamily::Sep4 => 2f64.ln(),
                GamlssFamily::Net => 3f64.ln(),
                _ => 0.0,
            });
        }
        theta
    }
}

fn not_converged(what: &str, r: &OptimResult) -> Error {
    Error::NotConverged {
        what: what.to_string(),
        iterations: r.diagnostics.iterations,
        grad_norm: r.diagnostics.grad_norm,
        best: r.x.clone(),
    }
}

fn check_series(series: &[f64], free: usize) -> Result<()> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("series contains missing or non-finite values".into()));
    }
    let need = 10 * free;
    if series.len() < need {
        return Err(Error::InsufficientData {
            have: series.len(),
            need,
        });
    }
    Ok(())
}

/// Fit a GAMLSS family with time-linked location by maximum likelihood.
pub fn fit_gamlss(series: &[f64], config: &GamlssFitConfig) -> Result<GamlssModel> {
    let family = config.family;
    if family == GamlssFamily::Net && (config.fixed_nu.is_none() || config.fixed_tau.is_none()) {
        return Err(Error::Config("NET requires fixed nu and tau".into()));
    }
    let layout = GamlssLayout {
        family,
        slope: config.covariate != Covariate::None,
        nu: config.fixed_nu,
        tau: config.fixed_tau,
    };
    check_series(series, layout.len())?;
    let n = series.len();
    let center = mean(series);
    let spread = variance(series).sqrt();
    if !(spread > 0.0) {
        return Err(Error::Degenerate("series has zero variance".into()));
    }
    if let (Some(nu), Some(tau)) = (config.fixed_nu, config.fixed_tau) {
        GamlssParams::new(family, 0.0, 1.0, nu, tau)?;
    }

    let link_template = TimeLink::for_window(LinkFunction::Identity, config.covariate, n);
    let zeta: Vec<f64> = (1..=n).map(|t| link_template.zeta(t as f64)).collect();
    let y: Vec<f64> = series.iter().map(|v| (v - center) / spread).collect();

    let objective = |theta: &[f64]| -> f64 {
        let (b0, b1, sigma, nu, tau) = layout.unpack(theta);
        let mut p = GamlssParams {
            family,
            mu: 0.0,
            sigma,
            nu,
            tau,
            fixed: [false; 4],
        };
        if p.validate().is_err() {
            return f64::INFINITY;
        }
        let mut total = 0.0;
        for (v, z) in y.iter().zip(&zeta) {
            p.mu = b0 + b1 * z;
            total += p.ln_pdf(*v);
        }
        if total.is_finite() {
            -total / n as f64
        } else {
            f64::INFINITY
        }
    };

    let opts = OptimOptions::default();
    let start = layout.start(&y, &zeta);
    let mut best = minimize(objective, &start, &opts);
    if !best.diagnostics.converged {
        // restart from the incumbent with a fresh simplex
        let retry = minimize(objective, &best.x, &opts);
        if retry.value <= best.value || retry.diagnostics.converged {
            best = retry;
        }
    }
    if !best.diagnostics.converged {
        return Err(not_converged(&format!("{} fit", family.name()), &best));
    }

    let (b0, b1, sigma, nu, tau) = layout.unpack(&best.x);
    let mut link = link_template;
    link.intercept = center + spread * b0;
    link.slope = spread * b1;
    let model = GamlssModel {
        family,
        sigma: sigma * spread,
        nu,
        tau,
        fixed: [false, false, config.fixed_nu.is_some(), config.fixed_tau.is_some()],
        link,
        loglik: -best.value * n as f64 - n as f64 * spread.ln(),
        n_obs: n,
        convergence: best.diagnostics.clone(),
    };
    model.params_at(1.0).validate()?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweedieFitConfig {
    #[serde(default)]
    pub covariate: Covariate,
    /// Hold the dispersion at this value.
    #[serde(default)]
    pub fixed_phi: Option<f64>,
    /// Hold the power at this value instead of profiling it.
    #[serde(default)]
    pub fixed_power: Option<f64>,
}

impl Default for TweedieFitConfig {
    fn default() -> Self {
        TweedieFitConfig {
            covariate: Covariate::Standardized,
            fixed_phi: None,
            fixed_power: None,
        }
    }
}

/// Profile-likelihood grid for the Tweedie power.
pub const TWEEDIE_POWER_GRID: [f64; 9] = [1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9];

/// Fit the log-link Tweedie GLM, profiling the power parameter.
pub fn fit_tweedie(series: &[f64], config: &TweedieFitConfig) -> Result<TweedieModel> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("series contains missing or non-finite values".into()));
    }
    if let Some(v) = series.iter().find(|v| **v < 0.0) {
        return Err(Error::Argument(format!("Tweedie support is [0, inf); found {v}")));
    }
    if series.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("all-zero series".into()));
    }
    let slope = config.covariate != Covariate::None;
    let free = 1 + slope as usize + config.fixed_phi.is_none() as usize + config.fixed_power.is_none() as usize;
    check_series(series, free)?;
    let n = series.len();
    let link_template = TimeLink::for_window(LinkFunction::Log, config.covariate, n);
    let zeta: Vec<f64> = (1..=n).map(|t| link_template.zeta(t as f64)).collect();
    let ybar = mean(series);

    let unpack = |theta: &[f64]| -> (f64, f64, f64) {
        let b0 = theta[0];
        let b1 = if slope { theta[1] } else { 0.0 };
        let phi = match config.fixed_phi {
            Some(v) => v,
            None => theta[1 + slope as usize].exp(),
        };
        (b0, b1, phi)
    };
    let nll = |theta: &[f64], power: f64| -> f64 {
        let (b0, b1, phi) = unpack(theta);
        let mut total = 0.0;
        for (y, z) in series.iter().zip(&zeta) {
            let d = TweedieDist {
                mean: (b0 + b1 * z).exp(),
                phi,
                power,
            };
            if d.validate().is_err() {
                return f64::INFINITY;
            }
            total += d.ln_pdf(*y);
        }
        if total.is_finite() {
            -total / n as f64
        } else {
            f64::INFINITY
        }
    };

    let start_for = |power: f64| -> Vec<f64> {
        let mut theta = vec![ybar.ln()];
        if slope {
            theta.push(0.0);
        }
        if config.fixed_phi.is_none() {
            let phi0 = (variance(series) / ybar.powf(power)).max(1e-6);
            theta.push(phi0.ln());
        }
        theta
    };
    let opts = OptimOptions::default();
    let inner = |power: f64, warm: Option<&[f64]>| -> OptimResult {
        let start = warm.map(|w| w.to_vec()).unwrap_or_else(|| start_for(power));
        minimize(|th| nll(th, power), &start, &opts)
    };

    let (power, best) = match config.fixed_power {
        Some(p) => {
            TweedieDist::new(1.0, 1.0, p)?;
            (p, inner(p, None))
        }
        None => {
            let mut profile: Vec<(f64, OptimResult)> =
                TWEEDIE_POWER_GRID.iter().map(|&p| (p, inner(p, None))).collect();
            profile.sort_by(|a, b| a.1.value.total_cmp(&b.1.value));
            let (p0, r0) = profile.swap_remove(0);
            let lo = (p0 - 0.1).max(1.01);
            let hi = (p0 + 0.1).min(1.99);
            let (p_star, _) = golden_section(|p| inner(p, Some(&r0.x)).value, lo, hi, 1e-3);
            let refined = inner(p_star, Some(&r0.x));
            if refined.value <= r0.value {
                (p_star, refined)
            } else {
                (p0, r0)
            }
        }
    };
    if !best.diagnostics.converged {
        return Err(not_converged("Tweedie fit", &best));
    }
    let (b0, b1, phi) = unpack(&best.x);
    let mut link = link_template;
    link.intercept = b0;
    link.slope = b1;
    let model = TweedieModel {
        params: TweedieParams {
            phi,
            power,
            phi_fixed: config.fixed_phi.is_some(),
        },
        link,
        loglik: -best.value * n as f64,
        n_obs: n,
        convergence: best.diagnostics.clone(),
    };
    model.link.validate(n)?;
    Ok(model)
}
