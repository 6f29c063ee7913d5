//! ARIMA(p,d,q)-GARCH(r,s) models with unit-variance Student-t innovations.
//!
//! Mean equation on the `d`-times differenced series `w`:
//! `w_t = a + sum phi_i w_{t-i} + sum theta_j eps_{t-j} + eps_t`, with
//! `eps_t = sigma_t z_t` and
//! `sigma_t^2 = omega + sum alpha_i eps_{t-i}^2 + sum beta_j sigma_{t-j}^2`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::linalg::least_squares;
use crate::numeric::optimize::{minimize, Convergence, OptimOptions, OptimResult};
use crate::numeric::rng::stream_rng;
use crate::numeric::special::{std_t_cdf, std_t_ln_pdf, std_t_ppf, std_t_scale};
use crate::numeric::{clamp_unit, variance};

/// Minimum series length after differencing.
pub const MIN_FIT_LENGTH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArimaGarchOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    /// Number of ARCH lags.
    pub r: usize,
    /// Number of GARCH lags.
    pub s: usize,
}

impl ArimaGarchOrder {
    pub fn new(p: usize, d: usize, q: usize, r: usize, s: usize) -> Result<Self> {
        let o = ArimaGarchOrder { p, d, q, r, s };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d > 2 {
            return Err(Error::Domain(format!("differencing order must be <= 2, got {}", self.d)));
        }
        if self.r < 1 {
            return Err(Error::Domain("GARCH part needs at least one ARCH lag".into()));
        }
        Ok(())
    }

    /// Largest lag appearing in either equation.
    pub fn max_lag(&self) -> usize {
        self.p.max(self.q).max(self.r).max(self.s)
    }

    /// Number of leading level observations without a residual.
    pub fn warmup(&self) -> usize {
        self.d + self.max_lag()
    }

    /// Parameter names in vector order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec!["a".to_string()];
        names.extend((1..=self.p).map(|i| format!("phi{i}")));
        names.extend((1..=self.q).map(|i| format!("theta{i}")));
        names.push("omega".into());
        names.extend((1..=self.r).map(|i| format!("alpha{i}")));
        names.extend((1..=self.s).map(|i| format!("beta{i}")));
        names.push("df".into());
        names
    }
}

/// Filter state at the end of the fitted sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ArimaGarchState {
    pub last_w: Vec<f64>,
    pub last_eps: Vec<f64>,
    pub last_sigma2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaGarchModel {
    pub order: ArimaGarchOrder,
    pub a: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub omega: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Degrees of freedom of the innovations.
    pub df: f64,
    /// Pre-sample variance for the recursion; recomputed from the data when absent.
    #[serde(default)]
    pub init_variance: Option<f64>,
    #[serde(default)]
    pub loglik: Option<f64>,
    #[serde(default)]
    pub n_obs: usize,
    #[serde(default)]
    pub convergence: Option<Convergence>,
    #[serde(default)]
    pub fixed: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub state: ArimaGarchState,
}

/// Residuals and conditional variances on the differenced scale.
#[derive(Debug, Clone)]
pub struct Filtered {
    /// Differenced series.
    pub w: Vec<f64>,
    pub mean: Vec<f64>,
    pub eps: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub init_variance: f64,
    /// First index whose residual enters the likelihood.
    pub start: usize,
}

/// Conditional one-step predictive distribution on the level scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneStep {
    /// Conditional mean of the differenced series.
    pub mean: f64,
    pub sigma: f64,
    pub df: f64,
    /// Contribution of past levels when undoing the differencing.
    pub level_offset: f64,
}

impl OneStep {
    pub fn quantile(&self, u: f64) -> f64 {
        self.mean + self.sigma * std_t_ppf(u, self.df) + self.level_offset
    }

    pub fn cdf(&self, x: f64) -> f64 {
        std_t_cdf((x - self.level_offset - self.mean) / self.sigma, self.df)
    }

    pub fn level_mean(&self) -> f64 {
        self.mean + self.level_offset
    }
}

pub fn difference(x: &[f64], d: usize) -> Vec<f64> {
    let mut w = x.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    w
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `x_{T+1} - w_{T+1}`: the part of the next level fixed by past levels.
fn integration_offset(x: &[f64], d: usize) -> f64 {
    let n = x.len();
    (1..=d)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * binomial(d, k) * x[n - k]
        })
        .sum()
}

/// Stationarity of `1 - sum phi_i z^i` by stepping down to partial autocorrelations.
pub fn ar_stationary(phi: &[f64]) -> bool {
    let mut a = phi.to_vec();
    while let Some(&k) = a.last() {
        if !(k.abs() < 1.0) {
            return false;
        }
        let n = a.len() - 1;
        let d = 1.0 - k * k;
        a = (0..n).map(|j| (a[j] + k * a[n - 1 - j]) / d).collect();
    }
    true
}

impl ArimaGarchModel {
    /// Build a model from explicit coefficients (no fit statistics).
    #[allow(clippy::too_many_arguments)]
    pub fn from_params(
        order: ArimaGarchOrder,
        a: f64,
        phi: Vec<f64>,
        theta: Vec<f64>,
        omega: f64,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        df: f64,
    ) -> Result<Self> {
        let mut m = ArimaGarchModel {
            order,
            a,
            phi,
            theta,
            omega,
            alpha,
            beta,
            df,
            init_variance: None,
            loglik: None,
            n_obs: 0,
            convergence: None,
            fixed: Vec::new(),
            warnings: Vec::new(),
            state: ArimaGarchState::default(),
        };
        m.validate()?;
        m.warnings = m.stability_warnings();
        for w in &m.warnings {
            log::warn!("{w}");
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let o = &self.order;
        o.validate()?;
        if self.phi.len() != o.p || self.theta.len() != o.q || self.alpha.len() != o.r || self.beta.len() != o.s {
            return Err(Error::Domain("coefficient vector lengths do not match the order".into()));
        }
        let all_finite = std::iter::once(self.a)
            .chain(self.phi.iter().copied())
            .chain(self.theta.iter().copied())
            .all(f64::is_finite);
        if !all_finite {
            return Err(Error::Domain("mean-equation coefficients must be finite".into()));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Domain(format!("omega must be > 0, got {}", self.omega)));
        }
        if self.alpha.iter().chain(&self.beta).any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain("ARCH/GARCH coefficients must be >= 0".into()));
        }
        if !(self.df > 2.0 && self.df.is_finite()) {
            return Err(Error::Domain(format!("innovation df must be > 2, got {}", self.df)));
        }
        Ok(())
    }

    pub fn persistence(&self) -> f64 {
        self.alpha.iter().chain(&self.beta).sum()
    }

    pub fn stability_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, phi) in self.phi.iter().enumerate() {
            if (phi.abs() - 1.0).abs() < 1e-4 {
                out.push(format!("phi{} = {phi} is within 1e-4 of a unit root", i + 1));
            }
        }
        if !ar_stationary(&self.phi) {
            out.push(format!("AR coefficients {:?} are not stationary", self.phi));
        }
        let pers = self.persistence();
        if pers >= 1.0 {
            out.push(format!("sum of ARCH and GARCH coefficients is {pers} >= 1"));
        }
        out
    }

    /// Vector of all parameters in `order.param_names()` order.
    pub fn param_vector(&self) -> Vec<f64> {
        let mut v = vec![self.a];
        v.extend(&self.phi);
        v.extend(&self.theta);
        v.push(self.omega);
        v.extend(&self.alpha);
        v.extend(&self.beta);
        v.push(self.df);
        v
    }

    pub fn param_map(&self) -> BTreeMap<String, f64> {
        self.order.param_names().into_iter().zip(self.param_vector()).collect()
    }

    fn set_from_vector(&mut self, v: &[f64]) {
        let o = self.order;
        let mut it = v.iter().copied();
        self.a = it.next().unwrap_or(0.0);
        self.phi = (0..o.p).map(|_| it.next().unwrap_or(0.0)).collect();
        self.theta = (0..o.q).map(|_| it.next().unwrap_or(0.0)).collect();
        self.omega = it.next().unwrap_or(1.0);
        self.alpha = (0..o.r).map(|_| it.next().unwrap_or(0.0)).collect();
        self.beta = (0..o.s).map(|_| it.next().unwrap_or(0.0)).collect();
        self.df = it.next().unwrap_or(30.0);
    }

    /// Run the mean and variance recursions over a level series.
    pub fn filter(&self, x: &[f64]) -> Result<Filtered> {
        let o = &self.order;
        let w = difference(x, o.d);
        let l = o.max_lag();
        if w.len() <= l {
            return Err(Error::Argument(format!(
                "history of {} levels does not cover {} lags after differencing {} times",
                x.len(),
                l,
                o.d
            )));
        }
        Ok(filter_raw(self, w, self.init_variance))
    }

    /// In-sample standardized residuals `eps_t / sigma_t`, one per level
    /// observation after the first `order.warmup()`.
    pub fn standardized_residuals(&self, x: &[f64]) -> Result<Vec<f64>> {
        let f = self.filter(x)?;
        Ok((f.start..f.w.len()).map(|t| f.eps[t] / f.sigma2[t].sqrt()).collect())
    }

    /// PIT of the standardized residuals through the innovation CDF, clamped.
    pub fn pit(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .standardized_residuals(x)?
            .into_iter()
            .map(|z| clamp_unit(std_t_cdf(z, self.df)))
            .collect())
    }

    /// In-sample conditional means on the level scale, aligned like `pit`.
    pub fn fitted_path(&self, x: &[f64]) -> Result<Vec<f64>> {
        let f = self.filter(x)?;
        let d = self.order.d;
        Ok((f.start..f.w.len())
            .map(|t| f.mean[t] + integration_offset(&x[..t + d], d))
            .collect())
    }

    /// Predictive distribution of the level following `history`.
    pub fn one_step(&self, history: &[f64]) -> Result<OneStep> {
        let f = self.filter(history)?;
        let o = &self.order;
        let n = f.w.len();
        let mut mean = self.a;
        for (i, phi) in self.phi.iter().enumerate() {
            mean += phi * f.w[n - 1 - i];
        }
        for (j, theta) in self.theta.iter().enumerate() {
            mean += theta * f.eps[n - 1 - j];
        }
        let mut s2 = self.omega;
        for (i, alpha) in self.alpha.iter().enumerate() {
            s2 += alpha * f.eps[n - 1 - i].powi(2);
        }
        for (j, beta) in self.beta.iter().enumerate() {
            s2 += beta * f.sigma2[n - 1 - j];
        }
        Ok(OneStep {
            mean,
            sigma: s2.sqrt(),
            df: self.df,
            level_offset: integration_offset(history, o.d),
        })
    }

    /// One-step forecast driven by the innovation quantile `u`.
    pub fn forecast_one_step(&self, history: &[f64], u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Argument(format!("innovation level must lie in (0,1), got {u}")));
        }
        Ok(self.one_step(history)?.quantile(u))
    }

    /// Simulate `horizon` levels after a burn-in of `burn_in` steps.
    pub fn simulate_with_burn_in(&self, horizon: usize, seed: u64, burn_in: usize) -> Vec<f64> {
        let o = self.order;
        let mut rng = stream_rng(seed, &[0x7a5e]);
        let t_dist = StudentT::new(self.df).ok();
        let scale = std_t_scale(self.df);
        let ar_sum: f64 = self.phi.iter().sum();
        let w0 = if ar_sum.abs() < 1.0 { self.a / (1.0 - ar_sum) } else { 0.0 };
        let pers = self.persistence();
        let s0 = if pers < 1.0 { self.omega / (1.0 - pers) } else { self.omega };
        let l = o.max_lag().max(1);
        let total = burn_in + horizon;
        let mut w = vec![w0; l];
        let mut eps = vec![0.0; l];
        let mut s2 = vec![s0; l];
        for t in l..l + total {
            let mut mean = self.a;
            for (i, phi) in self.phi.iter().enumerate() {
                mean += phi * w[t - 1 - i];
            }
            for (j, theta) in self.theta.iter().enumerate() {
                mean += theta * eps[t - 1 - j];
            }
            let mut v = self.omega;
            for (i, alpha) in self.alpha.iter().enumerate() {
                v += alpha * eps[t - 1 - i].powi(2);
            }
            for (j, beta) in self.beta.iter().enumerate() {
                v += beta * s2[t - 1 - j];
            }
            let z = match &t_dist {
                Some(d) => d.sample(&mut rng) * scale,
                None => std_t_ppf(rng.random_range(1e-12..1.0 - 1e-12), self.df),
            };
            let e = v.sqrt() * z;
            w.push(mean + e);
            eps.push(e);
            s2.push(v);
        }
        let path = &w[l + burn_in..];
        // integrate back to levels, starting from zero
        let mut x = path.to_vec();
        for _ in 0..o.d {
            let mut level = 0.0;
            for v in x.iter_mut() {
                level += *v;
                *v = level;
            }
        }
        x
    }

    pub fn simulate(&self, horizon: usize, seed: u64) -> Vec<f64> {
        self.simulate_with_burn_in(horizon, seed, 500)
    }
}

fn filter_raw(m: &ArimaGarchModel, w: Vec<f64>, init: Option<f64>) -> Filtered {
    let o = &m.order;
    let n = w.len();
    let l = o.max_lag();
    let mut mean = vec![0.0; n];
    let mut eps = vec![0.0; n];
    for t in o.p..n {
        let mut mu = m.a;
        for (i, phi) in m.phi.iter().enumerate() {
            mu += phi * w[t - 1 - i];
        }
        for (j, theta) in m.theta.iter().enumerate() {
            if t > j {
                mu += theta * eps[t - 1 - j];
            }
        }
        mean[t] = mu;
        eps[t] = w[t] - mu;
    }
    let init_variance = init.unwrap_or_else(|| {
        let tail = &eps[o.p..];
        tail.iter().map(|e| e * e).sum::<f64>() / tail.len().max(1) as f64
    });
    let mut sigma2 = vec![init_variance; n];
    for t in l..n {
        let mut v = m.omega;
        for (i, alpha) in m.alpha.iter().enumerate() {
            let k = t - 1 - i;
            v += alpha * if k >= o.p { eps[k] * eps[k] } else { init_variance };
        }
        for (j, beta) in m.beta.iter().enumerate() {
            v += beta * sigma2[t - 1 - j];
        }
        sigma2[t] = v;
    }
    Filtered {
        w,
        mean,
        eps,
        sigma2,
        init_variance,
        start: l,
    }
}

fn conditional_loglik(m: &ArimaGarchModel, f: &Filtered) -> f64 {
    let mut ll = 0.0;
    for t in f.start..f.w.len() {
        let v = f.sigma2[t];
        if !(v > 0.0 && v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let sd = v.sqrt();
        ll += std_t_ln_pdf(f.eps[t] / sd, m.df) - sd.ln();
    }
    ll
}

impl ArimaGarchModel {
    /// Conditional log-likelihood of a level series under these parameters.
    pub fn loglik_of(&self, x: &[f64]) -> Result<f64> {
        let f = self.filter(x)?;
        Ok(conditional_loglik(self, &f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaGarchFitConfig {
    pub order: ArimaGarchOrder,
    /// Parameters held at the given values, keyed by `ArimaGarchOrder::param_names`.
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
}

impl ArimaGarchFitConfig {
    pub fn new(order: ArimaGarchOrder) -> Self {
        ArimaGarchFitConfig {
            order,
            fixed: BTreeMap::new(),
        }
    }

    pub fn fix(mut self, name: &str, value: f64) -> Self {
        self.fixed.insert(name.to_string(), value);
        self
    }
}

/// Long-AR then ARMA regression start values (Hannan-Rissanen).
fn hannan_rissanen(w: &[f64], p: usize, q: usize) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let n = w.len();
    let fit_ar = |k: usize, series: &[f64]| -> Option<(Vec<f64>, Vec<f64>)> {
        let rows: Vec<Vec<f64>> = (k..series.len())
            .map(|t| std::iter::once(1.0).chain((1..=k).map(|i| series[t - i])).collect())
            .collect();
        let y: Vec<f64> = series[k..].to_vec();
        let b = least_squares(&rows, &y).ok()?;
        let resid = rows
            .iter()
            .zip(&y)
            .map(|(r, yi)| yi - r.iter().zip(&b).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        Some((b, resid))
    };
    if q == 0 {
        let (b, _) = fit_ar(p, w)?;
        return Some((b[0], b[1..].to_vec(), Vec::new()));
    }
    let k = (p + q + 4).min(n / 4);
    let (_, resid) = fit_ar(k, w)?;
    // resid[i] corresponds to w[k + i]
    let e = |t: usize| if t >= k { resid[t - k] } else { 0.0 };
    let start = k + q.max(p);
    if start + 10 >= n {
        return None;
    }
    let rows: Vec<Vec<f64>> = (start..n)
        .map(|t| {
            std::iter::once(1.0)
                .chain((1..=p).map(|i| w[t - i]))
                .chain((1..=q).map(|j| e(t - j)))
                .collect()
        })
        .collect();
    let b = least_squares(&rows, &w[start..]).ok()?;
    Some((b[0], b[1..=p].to_vec(), b[p + 1..].to_vec()))
}

/// Parameter layout for the optimizer; data are rescaled by `scale`.
struct Layout {
    order: ArimaGarchOrder,
    names: Vec<String>,
    fixed: Vec<Option<f64>>,
    scale: f64,
}

impl Layout {
    fn kind(&self, i: usize) -> ParamKind {
        let o = &self.order;
        let omega_at = 1 + o.p + o.q;
        if i == self.names.len() - 1 {
            ParamKind::Df
        } else if i == omega_at {
            ParamKind::Omega
        } else if i > omega_at {
            ParamKind::Positive
        } else if i == 0 {
            ParamKind::Level
        } else {
            ParamKind::Free
        }
    }

    /// Natural parameters in the rescaled data units.
    fn to_natural(&self, theta: &[f64]) -> Vec<f64> {
        let mut it = theta.iter().copied();
        (0..self.names.len())
            .map(|i| match self.fixed[i] {
                Some(v) => match self.kind(i) {
                    ParamKind::Level => v / self.scale,
                    ParamKind::Omega => v / (self.scale * self.scale),
                    _ => v,
                },
                None => {
                    let z = it.next().unwrap_or(0.0);
                    match self.kind(i) {
                        ParamKind::Omega | ParamKind::Positive => z.exp(),
                        ParamKind::Df => 2.0 + z.exp(),
                        _ => z,
                    }
                }
            })
            .collect()
    }

    fn to_internal(&self, natural: &[f64]) -> Vec<f64> {
        (0..self.names.len())
            .filter(|&i| self.fixed[i].is_none())
            .map(|i| {
                let v = natural[i];
                match self.kind(i) {
                    ParamKind::Omega | ParamKind::Positive => v.max(1e-8).ln(),
                    ParamKind::Df => (v - 2.0).max(1e-3).ln(),
                    _ => v,
                }
            })
            .collect()
    }

    /// Map rescaled natural parameters back to data units.
    fn unscale(&self, natural: &mut [f64]) {
        for i in 0..natural.len() {
            match self.kind(i) {
                ParamKind::Level => natural[i] *= self.scale,
                ParamKind::Omega => natural[i] *= self.scale * self.scale,
                _ => {}
            }
        }
    }
}

#[derive(Clone, Copy)]
enum ParamKind {
    Level,
    Free,
    Omega,
    Positive,
    Df,
}

/// Conditional maximum likelihood fit.
pub fn fit_arima_garch(series: &[f64], config: &ArimaGarchFitConfig) -> Result<ArimaGarchModel> {
    let o = config.order;
    o.validate()?;
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("series contains missing or non-finite values".into()));
    }
    let names = o.param_names();
    for key in config.fixed.keys() {
        if !names.contains(key) {
            return Err(Error::Config(format!("unknown ARIMA-GARCH parameter `{key}`")));
        }
    }
    let w_raw = difference(series, o.d);
    if w_raw.len() < MIN_FIT_LENGTH {
        return Err(Error::Argument(format!(
            "series has {} values after differencing; at least {MIN_FIT_LENGTH} required",
            w_raw.len()
        )));
    }
    let var_w = variance(&w_raw);
    if !(var_w > 0.0) {
        return Err(Error::Degenerate("differenced series has zero variance".into()));
    }
    let scale = var_w.sqrt();
    let w: Vec<f64> = w_raw.iter().map(|v| v / scale).collect();
    let layout = Layout {
        order: o,
        fixed: names.iter().map(|n| config.fixed.get(n).copied()).collect(),
        names,
        scale,
    };

    // start values in rescaled units
    let (a0, phi0, theta0) = hannan_rissanen(&w, o.p, o.q).unwrap_or((0.0, vec![0.0; o.p], vec![0.0; o.q]));
    let mut start = ArimaGarchModel {
        order: o,
        a: a0,
        phi: phi0,
        theta: theta0,
        omega: 1.0,
        alpha: vec![0.1 / o.r as f64; o.r],
        beta: vec![if o.s > 0 { 0.8 / o.s as f64 } else { 0.0 }; o.s],
        df: 8.0,
        init_variance: None,
        loglik: None,
        n_obs: 0,
        convergence: None,
        fixed: Vec::new(),
        warnings: Vec::new(),
        state: ArimaGarchState::default(),
    };
    let resid_var = {
        let f = filter_raw(&start, w.clone(), None);
        f.init_variance.max(1e-6)
    };
    start.omega = resid_var * (1.0 - start.persistence()).max(0.05);
    let mut start_natural = start.param_vector();
    for (i, fixed) in layout.fixed.iter().enumerate() {
        if let Some(v) = fixed {
            start_natural[i] = match layout.kind(i) {
                ParamKind::Level => v / scale,
                ParamKind::Omega => v / (scale * scale),
                _ => *v,
            };
        }
    }
    let x0 = layout.to_internal(&start_natural);

    let nll = |theta: &[f64]| -> f64 {
        let mut m = start.clone();
        m.set_from_vector(&layout.to_natural(theta));
        let f = filter_raw(&m, w.clone(), None);
        let ll = conditional_loglik(&m, &f);
        if ll.is_finite() {
            -ll / w.len() as f64
        } else {
            f64::INFINITY
        }
    };
    let opts = OptimOptions::default();
    let mut best: OptimResult = minimize(nll, &x0, &opts);
    if !best.diagnostics.converged {
        let retry = minimize(nll, &best.x, &opts);
        if retry.value <= best.value || retry.diagnostics.converged {
            best = retry;
        }
    }
    let mut natural = layout.to_natural(&best.x);
    layout.unscale(&mut natural);
    if !best.diagnostics.converged {
        return Err(Error::NotConverged {
            what: "ARIMA-GARCH fit".into(),
            iterations: best.diagnostics.iterations,
            grad_norm: best.diagnostics.grad_norm,
            best: natural,
        });
    }
    let mut model = start;
    model.set_from_vector(&natural);
    model.validate()?;
    let f = filter_raw(&model, w_raw, None);
    model.init_variance = Some(f.init_variance);
    model.loglik = Some(conditional_loglik(&model, &f));
    model.n_obs = series.len();
    model.convergence = Some(best.diagnostics);
    model.fixed = config.fixed.keys().cloned().collect();
    let keep = o.max_lag().max(1);
    let tail = |v: &[f64]| v[v.len().saturating_sub(keep)..].to_vec();
    model.state = ArimaGarchState {
        last_w: tail(&f.w),
        last_eps: tail(&f.eps),
        last_sigma2: tail(&f.sigma2),
    };
    model.warnings = model.stability_warnings();
    for msg in &model.warnings {
        log::warn!("{msg}");
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn ar2_stationarity_matches_triangle(p1 in -2.5f64..2.5, p2 in -1.5f64..1.5) {
            let triangle = p1 + p2 < 1.0 && p2 - p1 < 1.0 && p2.abs() < 1.0;
            prop_assume!((p1 + p2 - 1.0).abs() > 1e-9 && (p2 - p1 - 1.0).abs() > 1e-9);
            prop_assert_eq!(ar_stationary(&[p1, p2]), triangle);
        }
    }

    #[test]
    fn ar_stationarity_examples() {
        assert!(ar_stationary(&[]));
        assert!(ar_stationary(&[0.99]));
        assert!(!ar_stationary(&[1.0]));
        assert!(!ar_stationary(&[1.5807, -0.5766]));
        assert!(ar_stationary(&[1.2, -0.3]));
        // (1 - 0.5z)^3
        assert!(ar_stationary(&[1.5, -0.75, 0.125]));
        // (1 - 0.5z)^2 (1 - 1.1z)
        assert!(!ar_stationary(&[2.1, -1.35, 0.275]));
    }

    fn arma11() -> ArimaGarchModel {
        ArimaGarchModel::from_params(
            ArimaGarchOrder::new(1, 0, 1, 1, 1).unwrap(),
            0.0,
            vec![0.7],
            vec![0.2],
            0.1,
            vec![0.1],
            vec![0.8],
            6.0,
        )
        .unwrap()
    }

    #[test]
    fn simulation_is_deterministic() {
        let m = arma11();
        assert_eq!(m.simulate(200, 4), m.simulate(200, 4));
        assert_ne!(m.simulate(200, 4), m.simulate(200, 5));
    }

    #[test]
    fn median_innovation_gives_conditional_mean() {
        let m = arma11();
        let x = m.simulate(100, 1);
        let s = m.one_step(&x).unwrap();
        assert_eq!(m.forecast_one_step(&x, 0.5).unwrap(), s.level_mean());
    }

    #[test]
    fn random_walk_median_forecast_is_last_value() {
        let m = ArimaGarchModel::from_params(
            ArimaGarchOrder::new(1, 0, 0, 1, 0).unwrap(),
            0.0,
            vec![1.0],
            vec![],
            1.0,
            vec![0.0],
            vec![],
            5.0,
        )
        .unwrap();
        assert!(!m.warnings.is_empty());
        let x = [3.0, 4.5, 4.0, 7.25];
        assert_eq!(m.forecast_one_step(&x, 0.5).unwrap(), 7.25);
    }

    #[test]
    fn hand_computed_ar1_garch11_step() {
        let m = ArimaGarchModel {
            init_variance: Some(2.0),
            ..ArimaGarchModel::from_params(
                ArimaGarchOrder::new(1, 0, 0, 1, 1).unwrap(),
                0.5,
                vec![0.6],
                vec![],
                0.2,
                vec![0.3],
                vec![0.5],
                5.0,
            )
            .unwrap()
        };
        let x = [1.0, 2.0, 0.5, 1.5, 1.0];
        // residuals from t = 1 on: eps_t = x_t - 0.5 - 0.6 x_{t-1}
        let eps: Vec<f64> = (1..5).map(|t| x[t] - 0.5 - 0.6 * x[t - 1]).collect();
        // pre-sample residual and variance are both the initial variance
        let mut s2 = 0.2 + 0.3 * 2.0 + 0.5 * 2.0;
        for e in &eps[..3] {
            s2 = 0.2 + 0.3 * e * e + 0.5 * s2;
        }
        let s2_next = 0.2 + 0.3 * eps[3] * eps[3] + 0.5 * s2;
        let u = 0.8;
        let expected = 0.5 + 0.6 * 1.0 + s2_next.sqrt() * std_t_ppf(u, 5.0);
        let got = m.forecast_one_step(&x, u).unwrap();
        assert!((got - expected).abs() < 1e-13, "{got} vs {expected}");
    }

    #[test]
    fn forecast_monotone_in_u() {
        let m = arma11();
        let x = m.simulate(60, 2);
        let mut prev = f64::NEG_INFINITY;
        for i in 1..100 {
            let y = m.forecast_one_step(&x, i as f64 / 100.0).unwrap();
            assert!(y > prev);
            prev = y;
        }
    }

    #[test]
    fn differencing_inversion_is_exact() {
        let base = arma11();
        let mut m1 = base.clone();
        m1.order.d = 1;
        m1.init_variance = Some(0.9);
        let mut m0 = base;
        m0.init_variance = Some(0.9);
        let x = m1.simulate(80, 9);
        let w = difference(&x, 1);
        for &u in &[0.1, 0.5, 0.93] {
            let a = m1.forecast_one_step(&x, u).unwrap();
            let b = m0.forecast_one_step(&w, u).unwrap() + x[x.len() - 1];
            assert_eq!(a, b);
        }
    }

    #[test]
    fn short_history_rejected() {
        let m = arma11();
        assert!(matches!(m.forecast_one_step(&[1.0], 0.5), Err(Error::Argument(_))));
    }

    #[test]
    fn zero_residual_maps_to_half() {
        assert_eq!(std_t_cdf(0.0, 6.0), 0.5);
    }

    #[test]
    fn recovers_arma_garch() {
        let truth = arma11();
        let x = truth.simulate(3000, 17);
        let m = fit_arima_garch(&x, &ArimaGarchFitConfig::new(truth.order)).unwrap();
        for (name, (a, b)) in truth.order.param_names().iter().zip(m.param_vector().iter().zip(truth.param_vector())) {
            let tol = if name == "df" { 1.5 } else { 0.1 };
            assert!((a - b).abs() < tol, "{name}: {a} vs {b}");
        }
        let z = m.standardized_residuals(&x).unwrap();
        let v = variance(&z);
        assert!((v - 1.0).abs() < 0.1, "{v}");
        assert!(m.pit(&x).unwrap().iter().all(|u| *u > 0.0 && *u < 1.0));
    }

    #[test]
    fn constant_variance_fit() {
        let truth = ArimaGarchModel::from_params(
            ArimaGarchOrder::new(0, 0, 0, 1, 1).unwrap(),
            1.0,
            vec![],
            vec![],
            4.0,
            vec![0.0],
            vec![0.0],
            8.0,
        )
        .unwrap();
        let x = truth.simulate(2000, 3);
        let cfg = ArimaGarchFitConfig::new(truth.order).fix("alpha1", 0.0).fix("beta1", 0.0);
        let m = fit_arima_garch(&x, &cfg).unwrap();
        let f = m.filter(&x).unwrap();
        let rv = f.eps.iter().map(|e| e * e).sum::<f64>() / f.eps.len() as f64;
        assert!(f.sigma2[f.start..].iter().all(|s| (s - m.omega).abs() < 1e-12));
        assert!((m.omega - rv).abs() / rv < 0.05, "{} vs {rv}", m.omega);
    }
}
