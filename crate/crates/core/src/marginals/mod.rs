//! Per-series marginal models: the GAMLSS-style families, the Tweedie GLM and
//! the ARIMA-GARCH wrapper, with PIT extraction and diagnostics.

pub mod fit;
pub mod gamlss;
pub mod link;
pub mod tweedie;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::optimize::Convergence;
use crate::numeric::quadrature::integrate_real_line;
use crate::numeric::rng::stream_rng;
use crate::numeric::special::norm_ppf;
use crate::numeric::clamp_unit;
use crate::tsmodels::{ArimaGarchModel, OneStep};

pub use fit::{fit_gamlss, fit_tweedie, GamlssFitConfig, TweedieFitConfig};
pub use gamlss::{GamlssFamily, GamlssParams};
pub use link::{Covariate, LinkFunction, TimeLink};
pub use tweedie::TweedieDist;

/// Version tag written into serialized model documents.
pub const MODEL_DOCUMENT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamlssModel {
    pub family: GamlssFamily,
    pub sigma: f64,
    pub nu: f64,
    pub tau: f64,
    /// Fixed mask in `[mu, sigma, nu, tau]` order.
    pub fixed: [bool; 4],
    pub link: TimeLink,
    pub loglik: f64,
    pub n_obs: usize,
    pub convergence: Convergence,
}

impl GamlssModel {
    /// Distribution at the 1-based day index `t`.
    pub fn params_at(&self, t: f64) -> GamlssParams {
        GamlssParams {
            family: self.family,
            mu: self.link.location(t),
            sigma: self.sigma,
            nu: self.nu,
            tau: self.tau,
            fixed: self.fixed,
        }
    }

    /// `E[X] - mu`, constant over time because only the location moves.
    pub fn mean_offset(&self) -> f64 {
        let p = GamlssParams {
            mu: 0.0,
            ..self.params_at(1.0)
        };
        if p.family == GamlssFamily::Net {
            return 0.0;
        }
        match integrate_real_line(|x| x * p.pdf(x), 1e-10, 1e-8) {
            Ok(r) if r.value.is_finite() => r.value,
            _ => p.quantile(0.5).unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TweedieParams {
    pub phi: f64,
    pub power: f64,
    #[serde(default)]
    pub phi_fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweedieModel {
    pub params: TweedieParams,
    /// Log-link mean `exp(b0 + b * zeta_t)`.
    pub link: TimeLink,
    pub loglik: f64,
    pub n_obs: usize,
    pub convergence: Convergence,
}

impl TweedieModel {
    pub fn dist_at(&self, t: f64) -> TweedieDist {
        TweedieDist {
            mean: self.link.location(t),
            phi: self.params.phi,
            power: self.params.power,
        }
    }
}

/// A fitted per-series model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarginalModel {
    Gamlss(GamlssModel),
    Tweedie(TweedieModel),
    ArimaGarch(ArimaGarchModel),
}

/// Predictive distribution for the day after a history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predictive {
    Gamlss(GamlssParams),
    Tweedie(TweedieDist),
    ArimaGarch(OneStep),
}

impl Predictive {
    pub fn quantile(&self, u: f64) -> Result<f64> {
        match self {
            Predictive::Gamlss(p) => p.quantile(u),
            Predictive::Tweedie(d) => d.quantile(u),
            Predictive::ArimaGarch(s) => {
                if !(u > 0.0 && u < 1.0) {
                    return Err(Error::Argument(format!("quantile level must lie in (0,1), got {u}")));
                }
                Ok(s.quantile(u))
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Predictive::Gamlss(p) => p.cdf(x),
            Predictive::Tweedie(d) => d.cdf(x),
            Predictive::ArimaGarch(s) => s.cdf(x),
        }
    }
}

impl MarginalModel {
    /// Family tag used in model documents.
    pub fn family_tag(&self) -> String {
        match self {
            MarginalModel::Gamlss(m) => m.family.name().to_string(),
            MarginalModel::Tweedie(_) => "Tweedie".to_string(),
            MarginalModel::ArimaGarch(_) => "arima-garch".to_string(),
        }
    }

    pub fn loglik(&self) -> f64 {
        match self {
            MarginalModel::Gamlss(m) => m.loglik,
            MarginalModel::Tweedie(m) => m.loglik,
            MarginalModel::ArimaGarch(m) => m.loglik.unwrap_or(f64::NAN),
        }
    }

    pub fn convergence(&self) -> Option<&Convergence> {
        match self {
            MarginalModel::Gamlss(m) => Some(&m.convergence),
            MarginalModel::Tweedie(m) => Some(&m.convergence),
            MarginalModel::ArimaGarch(m) => m.convergence.as_ref(),
        }
    }

    /// Leading observations that yield no u-data value.
    pub fn warmup(&self) -> usize {
        match self {
            MarginalModel::ArimaGarch(m) => m.order.warmup(),
            _ => 0,
        }
    }

    /// Named parameter record.
    pub fn parameters(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        match self {
            MarginalModel::Gamlss(m) => {
                out.insert("beta0".into(), m.link.intercept);
                out.insert("beta".into(), m.link.slope);
                out.insert("sigma".into(), m.sigma);
                out.insert("nu".into(), m.nu);
                out.insert("tau".into(), m.tau);
            }
            MarginalModel::Tweedie(m) => {
                out.insert("beta0".into(), m.link.intercept);
                out.insert("b".into(), m.link.slope);
                out.insert("phi".into(), m.params.phi);
                out.insert("p".into(), m.params.power);
            }
            MarginalModel::ArimaGarch(m) => out = m.param_map(),
        }
        out
    }

    /// Predictive distribution for the observation following `history`.
    pub fn predictive(&self, history: &[f64]) -> Result<Predictive> {
        let t = history.len() as f64 + 1.0;
        Ok(match self {
            MarginalModel::Gamlss(m) => Predictive::Gamlss(m.params_at(t)),
            MarginalModel::Tweedie(m) => Predictive::Tweedie(m.dist_at(t)),
            MarginalModel::ArimaGarch(m) => Predictive::ArimaGarch(m.one_step(history)?),
        })
    }

    /// Map an innovation quantile to the next observation.
    pub fn forecast(&self, history: &[f64], u: f64) -> Result<f64> {
        self.predictive(history)?.quantile(u)
    }

    /// u-data for a series: one value per observation after `warmup()`.
    ///
    /// Tweedie zeros receive uniform draws on `(0, F(0))` from the stream
    /// `(seed, stream)`.
    pub fn pit(&self, series: &[f64], seed: u64, stream: u64) -> Result<Vec<f64>> {
        match self {
            MarginalModel::Gamlss(m) => Ok(series
                .iter()
                .enumerate()
                .map(|(i, x)| clamp_unit(m.params_at(i as f64 + 1.0).cdf(*x)))
                .collect()),
            MarginalModel::Tweedie(m) => {
                let mut rng = stream_rng(seed, &[stream, 0x7eed]);
                Ok(series
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let d = m.dist_at(i as f64 + 1.0);
                        let u = if *x == 0.0 {
                            let p0 = d.prob_zero();
                            p0 * rng.random::<f64>()
                        } else {
                            d.cdf(*x)
                        };
                        clamp_unit(u)
                    })
                    .collect())
            }
            MarginalModel::ArimaGarch(m) => m.pit(series),
        }
    }

    /// In-sample fitted means aligned with `pit`.
    pub fn fitted_path(&self, series: &[f64]) -> Result<Vec<f64>> {
        match self {
            MarginalModel::Gamlss(m) => {
                let offset = m.mean_offset();
                Ok((1..=series.len()).map(|t| m.link.location(t as f64) + offset).collect())
            }
            MarginalModel::Tweedie(m) => Ok((1..=series.len()).map(|t| m.link.location(t as f64)).collect()),
            MarginalModel::ArimaGarch(m) => m.fitted_path(series),
        }
    }

    /// Serialize as a versioned model document.
    pub fn to_document(&self, seed: u64) -> ModelDocument {
        ModelDocument {
            version: MODEL_DOCUMENT_VERSION,
            family: self.family_tag(),
            parameters: self.parameters(),
            loglik: self.loglik(),
            seed,
            model: self.clone(),
        }
    }
}

/// Portable JSON record of a fitted marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub version: u32,
    pub family: String,
    pub parameters: BTreeMap<String, f64>,
    pub loglik: f64,
    pub seed: u64,
    pub model: MarginalModel,
}

impl ModelDocument {
    pub fn into_model(self) -> Result<MarginalModel> {
        if self.version != MODEL_DOCUMENT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model document version {} (expected {MODEL_DOCUMENT_VERSION})",
                self.version
            )));
        }
        Ok(self.model)
    }
}

/// Plot-ready residual diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `(theoretical, sample)` normal quantile pairs of the quantile residuals.
    pub qq: Vec<(f64, f64)>,
    pub fitted: Vec<f64>,
    pub observed: Vec<f64>,
    pub udata: Vec<f64>,
    /// 20 equal-width bins on (0,1).
    pub histogram: Vec<usize>,
}

pub const HISTOGRAM_BINS: usize = 20;

pub fn histogram(u: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for v in u {
        let k = ((v * bins as f64).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
}

/// QQ pairs of the normal quantile residuals `Phi^-1(u)` against normal
/// plotting positions `(i - 0.5) / n`.
pub fn normal_qq(u: &[f64]) -> Vec<(f64, f64)> {
    let mut z: Vec<f64> = u.iter().map(|v| norm_ppf(*v)).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    z.into_iter()
        .enumerate()
        .map(|(i, s)| (norm_ppf((i as f64 + 0.5) / n), s))
        .collect()
}

pub fn residual_pit(model: &MarginalModel, series: &[f64], seed: u64, stream: u64) -> Result<Vec<f64>> {
    model.pit(series, seed, stream)
}

pub fn residual_diagnostics(model: &MarginalModel, series: &[f64], seed: u64, stream: u64) -> Result<Diagnostics> {
    let udata = model.pit(series, seed, stream)?;
    let fitted = model.fitted_path(series)?;
    let observed = series[model.warmup()..].to_vec();
    Ok(Diagnostics {
        qq: normal_qq(&udata),
        histogram: histogram(&udata, HISTOGRAM_BINS),
        fitted,
        observed,
        udata,
    })
}

/// Per-series marginal specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum MarginalSpec {
    #[serde(rename = "SHASHo")]
    Shasho {
        #[serde(default)]
        covariate: Covariate,
    },
    #[serde(rename = "SHASHo2")]
    Shasho2 {
        #[serde(default)]
        covariate: Covariate,
    },
    #[serde(rename = "SST")]
    Sst {
        #[serde(default)]
        covariate: Covariate,
    },
    #[serde(rename = "NET")]
    Net {
        #[serde(default)]
        covariate: Covariate,
        #[serde(default = "net_default_nu")]
        nu: f64,
        #[serde(default = "net_default_tau")]
        tau: f64,
    },
    #[serde(rename = "SEP4")]
    Sep4 {
        #[serde(default)]
        covariate: Covariate,
    },
    #[serde(rename = "Tweedie")]
    Tweedie {
        #[serde(default)]
        covariate: Covariate,
        #[serde(default)]
        phi: Option<f64>,
        #[serde(default)]
        power: Option<f64>,
    },
    #[serde(rename = "arima-garch")]
    ArimaGarch {
        order: [usize; 3],
        garch: [usize; 2],
        #[serde(default)]
        fixed: BTreeMap<String, f64>,
    },
}

fn net_default_nu() -> f64 {
    1.5
}

fn net_default_tau() -> f64 {
    2.0
}

impl MarginalSpec {
    pub fn fit(&self, series: &[f64]) -> Result<MarginalModel> {
        let gamlss = |family: GamlssFamily, covariate: Covariate| -> Result<MarginalModel> {
            let cfg = GamlssFitConfig::new(family).with_covariate(covariate);
            Ok(MarginalModel::Gamlss(fit_gamlss(series, &cfg)?))
        };
        match self {
            MarginalSpec::Shasho { covariate } => gamlss(GamlssFamily::Shasho, *covariate),
            MarginalSpec::Shasho2 { covariate } => gamlss(GamlssFamily::Shasho2, *covariate),
            MarginalSpec::Sst { covariate } => gamlss(GamlssFamily::Sst, *covariate),
            MarginalSpec::Sep4 { covariate } => gamlss(GamlssFamily::Sep4, *covariate),
            MarginalSpec::Net { covariate, nu, tau } => {
                let mut cfg = GamlssFitConfig::new(GamlssFamily::Net).with_covariate(*covariate);
                cfg.fixed_nu = Some(*nu);
                cfg.fixed_tau = Some(*tau);
                Ok(MarginalModel::Gamlss(fit_gamlss(series, &cfg)?))
            }
            MarginalSpec::Tweedie { covariate, phi, power } => {
                let cfg = TweedieFitConfig {
                    covariate: *covariate,
                    fixed_phi: *phi,
                    fixed_power: *power,
                };
                Ok(MarginalModel::Tweedie(fit_tweedie(series, &cfg)?))
            }
            MarginalSpec::ArimaGarch { order, garch, fixed } => {
                let o = crate::tsmodels::ArimaGarchOrder::new(order[0], order[1], order[2], garch[0], garch[1])?;
                let cfg = crate::tsmodels::ArimaGarchFitConfig {
                    order: o,
                    fixed: fixed.clone(),
                };
                Ok(MarginalModel::ArimaGarch(crate::tsmodels::fit_arima_garch(series, &cfg)?))
            }
        }
    }

    pub fn warmup(&self) -> usize {
        match self {
            MarginalSpec::ArimaGarch { order, garch, .. } => {
                order[1] + order[0].max(order[2]).max(garch[0]).max(garch[1])
            }
            _ => 0,
        }
    }
}
