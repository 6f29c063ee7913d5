//! Two-step (margins, then vine) joint fitting, one-day-ahead simulation
//! forecasts, rolling backtests and variant comparison.

pub mod metrics;
pub mod synthetic;

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{format_day, TimeSeriesFrame, DEFAULT_MIN_ROWS};
use crate::error::{Error, Result};
use crate::marginals::{residual_diagnostics, Diagnostics, MarginalModel, MarginalSpec};
use crate::numeric::clamp_unit;
use crate::numeric::rng::{label_key, open_uniform, stream_rng};
use crate::vine::{select_structure_and_fit, PseudoMatrix, RVineModel, VineConfig, VineVariant};

pub use metrics::{coverage, interval_score, mis, mse, quantile_sorted};

pub const DEFAULT_DRAWS: usize = 1000;
pub const MIN_DRAWS: usize = 100;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Marginal specification per column plus the vine configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub marginals: BTreeMap<String, MarginalSpec>,
    #[serde(default)]
    pub vine: VineConfig,
}

impl JointSpec {
    /// Every column needs a marginal and every marginal a column.
    pub fn check_columns(&self, names: &[String]) -> Result<()> {
        if let Some(n) = names.iter().find(|n| !self.marginals.contains_key(*n)) {
            return Err(Error::Config(format!("marginals.{n}: no marginal configured for column `{n}`")));
        }
        if let Some(k) = self.marginals.keys().find(|k| !names.contains(k)) {
            return Err(Error::Config(format!("marginals.{k}: no column named `{k}` in the data")));
        }
        Ok(())
    }
}

/// Fitted marginals with their u-data, before the vine step.
#[derive(Debug, Clone)]
pub struct MarginalStage {
    pub names: Vec<String>,
    pub models: Vec<MarginalModel>,
    /// Variables in name order, rows aligned after the largest warm-up.
    pub udata: PseudoMatrix,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedJointModel {
    /// Frame column order.
    pub names: Vec<String>,
    pub marginals: Vec<MarginalModel>,
    /// Vine over the u-data with variables in name order.
    pub vine: RVineModel,
    /// Training series in frame column order.
    pub history: Vec<Vec<f64>>,
    pub start_date: i64,
    pub end_date: i64,
    pub n_train: usize,
    pub seed: u64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Indices of `names` sorted by name.
fn canonical_order(names: &[String]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..names.len()).collect();
    idx.sort_by(|a, b| names[*a].cmp(&names[*b]));
    idx
}

pub fn fit_marginals(frame: &TimeSeriesFrame, spec: &JointSpec, seed: u64) -> Result<MarginalStage> {
    if !frame.is_complete() {
        return Err(Error::Argument("frame has missing cells; align it before fitting".into()));
    }
    spec.check_columns(&frame.names)?;
    let fitted: Vec<(MarginalModel, Vec<f64>)> = frame
        .names
        .par_iter()
        .zip(frame.columns.par_iter())
        .map(|(name, col)| {
            let model = spec.marginals[name].fit(col).map_err(|e| e.for_variable(name))?;
            let u = model.pit(col, seed, label_key(name)).map_err(|e| e.for_variable(name))?;
            Ok((model, u))
        })
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    for (name, (model, _)) in frame.names.iter().zip(&fitted) {
        if let MarginalModel::ArimaGarch(m) = model {
            for w in m.stability_warnings() {
                log::warn!("{name}: {w}");
                warnings.push(format!("{name}: {w}"));
            }
        }
    }
    let lag = fitted.iter().map(|(m, _)| m.warmup()).max().unwrap_or(0);
    let order = canonical_order(&frame.names);
    let udata = PseudoMatrix::new(
        order.iter().map(|&i| frame.names[i].clone()).collect(),
        order
            .iter()
            .map(|&i| fitted[i].1[lag - fitted[i].0.warmup()..].to_vec())
            .collect(),
    )?;
    Ok(MarginalStage {
        names: frame.names.clone(),
        models: fitted.into_iter().map(|(m, _)| m).collect(),
        udata,
        warnings,
    })
}

fn assemble(frame: &TimeSeriesFrame, stage: &MarginalStage, config: &VineConfig, seed: u64) -> Result<FittedJointModel> {
    let vine = select_structure_and_fit(&stage.udata, config)?;
    Ok(FittedJointModel {
        names: stage.names.clone(),
        marginals: stage.models.clone(),
        vine,
        history: frame.columns.clone(),
        start_date: frame.dates[0],
        end_date: *frame.dates.last().expect("non-empty frame"),
        n_train: frame.n_rows(),
        seed,
        warnings: stage.warnings.clone(),
    })
}

/// Fit every marginal, extract u-data and fit the vine on it.
pub fn fit_joint(frame: &TimeSeriesFrame, spec: &JointSpec, seed: u64) -> Result<FittedJointModel> {
    let stage = fit_marginals(frame, spec, seed)?;
    assemble(frame, &stage, &spec.vine, seed)
}

impl FittedJointModel {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn variant(&self) -> VineVariant {
        self.vine.variant
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.names.len();
        if self.marginals.len() != d || self.vine.dim() != d || self.history.len() != d {
            return Err(Error::Argument("marginal, vine and history dimensions differ".into()));
        }
        let mut sorted = self.names.clone();
        sorted.sort();
        if sorted != self.vine.names {
            return Err(Error::Argument("vine variables are not the name-sorted model variables".into()));
        }
        self.vine.validate()
    }

    pub fn from_json(text: &str) -> Result<FittedJointModel> {
        let m: FittedJointModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    /// Residual diagnostics of every marginal on its training series.
    pub fn diagnostics(&self) -> Result<Vec<Diagnostics>> {
        self.names
            .iter()
            .zip(&self.marginals)
            .zip(&self.history)
            .map(|((n, m), x)| residual_diagnostics(m, x, self.seed, label_key(n)).map_err(|e| e.for_variable(n)))
            .collect()
    }

    pub fn parameters(&self) -> Vec<BTreeMap<String, f64>> {
        self.marginals.iter().map(MarginalModel::parameters).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub date: i64,
    pub names: Vec<String>,
    /// Mean of the simulated values.
    pub point: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
    pub draws: usize,
    /// Marginal parameter records of the model that produced the forecast.
    pub parameters: Vec<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawOptions {
    pub draws: usize,
    pub alpha: f64,
    pub seed: u64,
    pub keep_samples: bool,
}

impl Default for DrawOptions {
    fn default() -> Self {
        DrawOptions {
            draws: DEFAULT_DRAWS,
            alpha: DEFAULT_ALPHA,
            seed: 0,
            keep_samples: false,
        }
    }
}

impl DrawOptions {
    fn check(&self) -> Result<()> {
        if self.draws < MIN_DRAWS {
            return Err(Error::Argument(format!("need at least {MIN_DRAWS} draws, got {}", self.draws)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Argument(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Forecast the day `date` following `history` (one series per variable, frame order).
///
/// Uniforms for variable `v` come from the stream `(seed, v, date)`, so
/// forecasts do not depend on the column order and variants share draws.
pub fn predict_with_history(model: &FittedJointModel, history: &[&[f64]], date: i64, opts: &DrawOptions) -> Result<ForecastResult> {
    opts.check()?;
    let d = model.dim();
    if history.len() != d {
        return Err(Error::Argument(format!("{} history series for {d} variables", history.len())));
    }
    let predictive = model
        .names
        .iter()
        .zip(&model.marginals)
        .zip(history)
        .map(|((n, m), h)| m.predictive(h).map_err(|e| e.for_variable(n)))
        .collect::<Result<Vec<_>>>()?;
    let w: Vec<Vec<f64>> = model
        .vine
        .names
        .iter()
        .map(|n| {
            let mut rng = stream_rng(opts.seed, &[label_key(n), date as u64]);
            (0..opts.draws).map(|_| open_uniform(&mut rng)).collect()
        })
        .collect();
    let u = model.vine.simulate_with_uniforms(&w);
    let position: BTreeMap<&str, usize> = model.vine.names.iter().enumerate().map(|(k, n)| (n.as_str(), k)).collect();
    let samples: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| {
            let name = &model.names[i];
            u[position[name.as_str()]]
                .iter()
                .map(|v| predictive[i].quantile(clamp_unit(*v)))
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| e.for_variable(name))
        })
        .collect::<Result<_>>()?;
    let mut point = Vec::with_capacity(d);
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    for (s, name) in samples.iter().zip(&model.names) {
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite simulated value")).for_variable(name));
        }
        point.push(s.iter().sum::<f64>() / s.len() as f64);
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&sorted, opts.alpha / 2.0));
        upper.push(quantile_sorted(&sorted, 1.0 - opts.alpha / 2.0));
    }
    Ok(ForecastResult {
        date,
        names: model.names.clone(),
        point,
        lower,
        upper,
        alpha: opts.alpha,
        draws: opts.draws,
        parameters: model.parameters(),
        samples: opts.keep_samples.then_some(samples),
    })
}

/// Forecast the day after the training window.
pub fn predict_one_day(model: &FittedJointModel, draws: usize, alpha: f64, seed: u64) -> Result<ForecastResult> {
    let history: Vec<&[f64]> = model.history.iter().map(Vec::as_slice).collect();
    let opts = DrawOptions {
        draws,
        alpha,
        seed,
        keep_samples: false,
    };
    predict_with_history(model, &history, model.end_date + 1, &opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestOptions {
    /// Last training date (days since 1970-01-01).
    pub split: i64,
    pub horizon: usize,
    pub draws: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Refit every `k` forecast days; `None` freezes the split-time model.
    #[serde(default)]
    pub refit_every: Option<usize>,
    #[serde(default)]
    pub keep_samples: bool,
}

impl BacktestOptions {
    pub fn new(split: i64, horizon: usize) -> Self {
        BacktestOptions {
            split,
            horizon,
            draws: DEFAULT_DRAWS,
            alpha: DEFAULT_ALPHA,
            seed: 0,
            refit_every: None,
            keep_samples: false,
        }
    }

    fn draw_options(&self) -> DrawOptions {
        DrawOptions {
            draws: self.draws,
            alpha: self.alpha,
            seed: self.seed,
            keep_samples: self.keep_samples,
        }
    }

    /// Training row count and forecast-day offsets at which a fit happens.
    fn plan(&self, frame: &TimeSeriesFrame) -> Result<(usize, Vec<usize>)> {
        if self.horizon == 0 {
            return Err(Error::Argument("backtest horizon must be at least 1".into()));
        }
        if self.refit_every == Some(0) {
            return Err(Error::Argument("refit_every must be at least 1".into()));
        }
        self.draw_options().check()?;
        let n_train = frame.dates.iter().take_while(|d| **d <= self.split).count();
        if n_train < DEFAULT_MIN_ROWS {
            return Err(Error::Argument(format!(
                "insufficient data: {n_train} training rows up to {} (need {DEFAULT_MIN_ROWS})",
                format_day(self.split)
            )));
        }
        if n_train + self.horizon > frame.n_rows() {
            return Err(Error::Argument(format!(
                "insufficient data: {} rows after {} for a {}-day horizon",
                frame.n_rows() - n_train,
                format_day(self.split),
                self.horizon
            )));
        }
        let fits = match self.refit_every {
            None => vec![0],
            Some(k) => (0..self.horizon).step_by(k).collect(),
        };
        Ok((n_train, fits))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Backtest {
    pub variant: VineVariant,
    pub forecasts: Vec<ForecastResult>,
    /// Observed values per forecast day, frame column order.
    pub observed: Vec<Vec<f64>>,
}

impl Backtest {
    pub fn dates(&self) -> Vec<i64> {
        self.forecasts.iter().map(|f| f.date).collect()
    }

    fn series(&self, i: usize, pick: impl Fn(&ForecastResult) -> &Vec<f64>) -> Vec<f64> {
        self.forecasts.iter().map(|f| pick(f)[i]).collect()
    }

    pub fn observed_series(&self, i: usize) -> Vec<f64> {
        self.observed.iter().map(|o| o[i]).collect()
    }

    pub fn mse(&self, i: usize) -> Result<f64> {
        mse(&self.observed_series(i), &self.series(i, |f| &f.point))
    }

    pub fn mis(&self, i: usize) -> Result<f64> {
        let alpha = self.forecasts.first().map_or(DEFAULT_ALPHA, |f| f.alpha);
        mis(&self.observed_series(i), &self.series(i, |f| &f.lower), &self.series(i, |f| &f.upper), alpha)
    }

    pub fn coverage(&self, i: usize) -> Result<f64> {
        coverage(&self.observed_series(i), &self.series(i, |f| &f.lower), &self.series(i, |f| &f.upper))
    }
}

fn run_days(frame: &TimeSeriesFrame, n_train: usize, fits: &[usize], models: &[FittedJointModel], opts: &BacktestOptions) -> Result<Backtest> {
    let draw = opts.draw_options();
    let forecasts = (0..opts.horizon)
        .into_par_iter()
        .map(|j| {
            let m = &models[fits.partition_point(|f| *f <= j) - 1];
            let row = n_train + j;
            let history: Vec<&[f64]> = frame.columns.iter().map(|c| &c[..row]).collect();
            predict_with_history(m, &history, frame.dates[row], &draw)
        })
        .collect::<Result<Vec<_>>>()?;
    let observed = (n_train..n_train + opts.horizon)
        .map(|r| frame.columns.iter().map(|c| c[r]).collect())
        .collect();
    Ok(Backtest {
        variant: models[0].variant(),
        forecasts,
        observed,
    })
}

fn stages(frame: &TimeSeriesFrame, spec: &JointSpec, n_train: usize, fits: &[usize], seed: u64) -> Result<Vec<(TimeSeriesFrame, MarginalStage)>> {
    fits.iter()
        .map(|j| {
            let train = frame.slice_rows(0..n_train + j);
            let stage = fit_marginals(&train, spec, seed)?;
            Ok((train, stage))
        })
        .collect()
}

/// Fit at the split and forecast each of the next `horizon` days from the
/// observed history, with parameters frozen unless `refit_every` is set.
pub fn rolling_backtest(frame: &TimeSeriesFrame, spec: &JointSpec, opts: &BacktestOptions) -> Result<Backtest> {
    let (n_train, fits) = opts.plan(frame)?;
    let models = stages(frame, spec, n_train, &fits, opts.seed)?
        .iter()
        .map(|(train, stage)| assemble(train, stage, &spec.vine, opts.seed))
        .collect::<Result<Vec<_>>>()?;
    run_days(frame, n_train, &fits, &models, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub variables: Vec<String>,
    pub variants: Vec<VineVariant>,
    pub dates: Vec<i64>,
    /// `[variable][variant]`.
    pub mse: Vec<Vec<f64>>,
    pub mis: Vec<Vec<f64>>,
    pub coverage: Vec<Vec<f64>>,
    /// Index of the lowest-scoring variant per variable (first on ties).
    pub best_mse: Vec<usize>,
    pub best_mis: Vec<usize>,
}

fn argmin(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in row.iter().enumerate() {
        if *v < row[best] {
            best = k;
        }
    }
    best
}

/// Tabulate scores of backtests that share dates and observations.
pub fn evaluate(names: &[String], backtests: &[Backtest]) -> Result<EvaluationReport> {
    let first = backtests.first().ok_or_else(|| Error::Argument("no backtests to evaluate".into()))?;
    for b in &backtests[1..] {
        if b.dates() != first.dates() || b.observed != first.observed {
            return Err(Error::Argument("variants differ in forecast dates or observed values".into()));
        }
    }
    let table = |f: &dyn Fn(&Backtest, usize) -> Result<f64>| -> Result<Vec<Vec<f64>>> {
        (0..names.len())
            .map(|i| backtests.iter().map(|b| f(b, i)).collect())
            .collect()
    };
    let mse = table(&|b, i| b.mse(i))?;
    let mis = table(&|b, i| b.mis(i))?;
    let coverage = table(&|b, i| b.coverage(i))?;
    Ok(EvaluationReport {
        variables: names.to_vec(),
        variants: backtests.iter().map(|b| b.variant).collect(),
        dates: first.dates(),
        best_mse: mse.iter().map(|r| argmin(r)).collect(),
        best_mis: mis.iter().map(|r| argmin(r)).collect(),
        mse,
        mis,
        coverage,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub report: EvaluationReport,
    pub backtests: Vec<Backtest>,
}

/// Backtest each vine variant with the same split, seed and marginals.
pub fn compare_variants(frame: &TimeSeriesFrame, spec: &JointSpec, opts: &BacktestOptions, variants: &[VineVariant]) -> Result<Comparison> {
    if variants.is_empty() {
        return Err(Error::Argument("no variants to compare".into()));
    }
    let (n_train, fits) = opts.plan(frame)?;
    let stages = stages(frame, spec, n_train, &fits, opts.seed)?;
    let backtests = variants
        .iter()
        .map(|v| {
            let mut config = spec.vine.clone();
            config.variant = *v;
            let models = stages
                .iter()
                .map(|(train, stage)| assemble(train, stage, &config, opts.seed))
                .collect::<Result<Vec<_>>>()?;
            run_days(frame, n_train, &fits, &models, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        report: evaluate(&frame.names, &backtests)?,
        backtests,
    })
}

fn fmt_value(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "NA".to_string()
    }
}

/// CSV `date,variable,observed,forecast,lower,upper`; `observed` may be absent.
pub fn write_forecast_csv<W: Write>(w: W, forecasts: &[ForecastResult], observed: Option<&[Vec<f64>]>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["date", "variable", "observed", "forecast", "lower", "upper"])?;
    for (j, f) in forecasts.iter().enumerate() {
        for (i, name) in f.names.iter().enumerate() {
            let obs = observed.and_then(|o| o.get(j)).map_or_else(|| "NA".to_string(), |o| fmt_value(o[i]));
            wr.write_record([
                format_day(f.date),
                name.clone(),
                obs,
                fmt_value(f.point[i]),
                fmt_value(f.lower[i]),
                fmt_value(f.upper[i]),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// CSV `variable,variant,mse,mis,best_mse,best_mis`.
pub fn write_report_csv<W: Write>(w: W, report: &EvaluationReport) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["variable", "variant", "mse", "mis", "best_mse", "best_mis"])?;
    for (i, name) in report.variables.iter().enumerate() {
        for (k, v) in report.variants.iter().enumerate() {
            wr.write_record([
                name.clone(),
                v.to_string(),
                fmt_value(report.mse[i][k]),
                fmt_value(report.mis[i][k]),
                (report.best_mse[i] == k).to_string(),
                (report.best_mis[i] == k).to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copulas::{CopulaSpec, Family, Rotation};
    use crate::marginals::Covariate;
    use crate::numeric::special::norm_ppf;
    use crate::vine::{default_names, RVineStructure};

    fn frame(n: usize, seed: u64) -> TimeSeriesFrame {
        let s = RVineStructure::dvine(3).unwrap();
        let pairs = vec![
            vec![
                CopulaSpec::new(Family::Clayton, Rotation::R0, &[3.0]).unwrap(),
                CopulaSpec::new(Family::Gumbel, Rotation::R0, &[1.8]).unwrap(),
            ],
            vec![CopulaSpec::independence()],
        ];
        let u = RVineModel::new(default_names(3), s, pairs).unwrap().simulate(n, seed).columns;
        let cols = vec![
            u[0].iter().enumerate().map(|(t, v)| 10.0 + 0.01 * t as f64 + 2.0 * norm_ppf(*v)).collect(),
            u[1].iter().map(|v| -5.0 + norm_ppf(*v)).collect(),
            u[2].iter().map(|v| 100.0 + 10.0 * norm_ppf(*v)).collect(),
        ];
        TimeSeriesFrame::new((0..n as i64).map(|d| 18_000 + d).collect(), vec!["x".into(), "b".into(), "m".into()], cols).unwrap()
    }

    fn spec(names: &[&str]) -> JointSpec {
        JointSpec {
            marginals: names
                .iter()
                .map(|n| (n.to_string(), MarginalSpec::Shasho { covariate: Covariate::Standardized }))
                .collect(),
            vine: VineConfig::default(),
        }
    }

    #[test]
    fn joint_fit_basics() {
        let f = frame(150, 1);
        let m = fit_joint(&f, &spec(&["x", "b", "m"]), 3).unwrap();
        assert_eq!(m.vine.names, vec!["b", "m", "x"]);
        assert!(m.vine.loglik.is_finite() && m.vine.loglik > 0.0);
        m.validate().unwrap();
        let back = FittedJointModel::from_json(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);

        let two = f.select(&["x".into(), "b".into()]).unwrap();
        let m2 = fit_joint(&two, &spec(&["x", "b"]), 3).unwrap();
        assert_eq!(m2.vine.structure.n_edges(), 1);
    }

    #[test]
    fn configuration_errors_name_columns() {
        let f = frame(150, 1);
        let err = fit_joint(&f, &spec(&["x", "b"]), 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)) && err.to_string().contains("`m`"), "{err}");
        let err = fit_joint(&f, &spec(&["x", "b", "m", "zz"]), 0).unwrap_err();
        assert!(err.to_string().contains("zz"), "{err}");
        let mut flat = f.clone();
        flat.columns[1] = vec![4.0; 150];
        let err = fit_joint(&flat, &spec(&["x", "b", "m"]), 0).unwrap_err();
        assert!(err.to_string().contains("variable `b`"), "{err}");
    }

    #[test]
    fn forecast_determinism_and_quantiles() {
        let f = frame(150, 2);
        let m = fit_joint(&f, &spec(&["x", "b", "m"]), 3).unwrap();
        let a = predict_one_day(&m, 500, 0.05, 9).unwrap();
        assert_eq!(a, predict_one_day(&m, 500, 0.05, 9).unwrap());
        assert_ne!(a.point, predict_one_day(&m, 500, 0.05, 10).unwrap().point);
        assert_eq!(a.date, 18_150);
        let history: Vec<&[f64]> = m.history.iter().map(Vec::as_slice).collect();
        let opts = DrawOptions { draws: 500, alpha: 0.05, seed: 9, keep_samples: true };
        let r = predict_with_history(&m, &history, a.date, &opts).unwrap();
        let samples = r.samples.as_ref().unwrap();
        for i in 0..3 {
            let mut s = samples[i].clone();
            s.sort_by(f64::total_cmp);
            // positions (n-1) * 0.025 = 12.475 and (n-1) * 0.975 = 486.525
            let lo = s[12] + 0.475 * (s[13] - s[12]);
            let hi = s[486] + 0.525 * (s[487] - s[486]);
            assert!((r.lower[i] - lo).abs() <= 1e-12 * lo.abs().max(1.0));
            assert!((r.upper[i] - hi).abs() <= 1e-12 * hi.abs().max(1.0));
            assert!(r.lower[i] <= r.upper[i]);
            assert_eq!(r.point[i], a.point[i]);
        }
        assert!(predict_one_day(&m, 50, 0.05, 0).is_err());
        assert!(predict_one_day(&m, 500, 1.0, 0).is_err());
    }

    #[test]
    fn forecasts_ignore_column_order() {
        let f = frame(150, 4);
        let names: Vec<String> = vec!["m".into(), "x".into(), "b".into()];
        let g = f.select(&names).unwrap();
        let s = spec(&["x", "b", "m"]);
        let a = predict_one_day(&fit_joint(&f, &s, 1).unwrap(), 400, 0.1, 5).unwrap();
        let b = predict_one_day(&fit_joint(&g, &s, 1).unwrap(), 400, 0.1, 5).unwrap();
        for (j, n) in names.iter().enumerate() {
            let i = f.index_of(n).unwrap();
            assert_eq!(a.point[i], b.point[j]);
            assert_eq!(a.lower[i], b.lower[j]);
        }
    }

    #[test]
    fn independence_forecast_matches_marginal_mean() {
        let truth = synthetic::covid_like().unwrap();
        let start = crate::dataio::parse_iso_date(synthetic::START_DATE).unwrap();
        let data = synthetic::generate(&truth, start, 100, 3).unwrap();
        let vine = RVineModel::independence(truth.names.clone(), truth.vine.structure.clone()).unwrap();
        let model = FittedJointModel {
            names: truth.names.clone(),
            marginals: truth.marginals.clone(),
            vine,
            history: data.columns.clone(),
            start_date: start,
            end_date: start + 99,
            n_train: 100,
            seed: 0,
            warnings: Vec::new(),
        };
        let history: Vec<&[f64]> = model.history.iter().map(Vec::as_slice).collect();
        let opts = DrawOptions { draws: 20_000, alpha: 0.05, seed: 17, keep_samples: true };
        let r = predict_with_history(&model, &history, start + 100, &opts).unwrap();
        let mut outside = 0;
        for (i, m) in model.marginals.iter().enumerate() {
            let s = &r.samples.as_ref().unwrap()[i];
            let mean = match m {
                MarginalModel::Gamlss(g) => g.link.location(101.0) + g.mean_offset(),
                MarginalModel::Tweedie(t) => t.dist_at(101.0).mean,
                MarginalModel::ArimaGarch(a) => a.one_step(history[i]).unwrap().level_mean(),
            };
            let se = (crate::numeric::variance(s) / s.len() as f64).sqrt();
            let z = (r.point[i] - mean) / se;
            assert!(z.abs() < 3.5, "{}: {} vs {mean} (se {se})", model.names[i], r.point[i]);
            if z.abs() >= 2.0 {
                outside += 1;
            }
        }
        // ten independent 2-SE checks: about 0.5 expected misses
        assert!(outside <= 2, "{outside} variables beyond 2 standard errors");
    }

    #[test]
    fn backtest_contracts() {
        let f = frame(130, 5);
        let s = spec(&["x", "b", "m"]);
        let split = f.dates[99];
        let mut opts = BacktestOptions::new(split, 1);
        opts.draws = 300;
        opts.seed = 11;
        let one = rolling_backtest(&f, &s, &opts).unwrap();
        let direct = predict_one_day(&fit_joint(&f.slice_rows(0..100), &s, 11).unwrap(), 300, 0.05, 11).unwrap();
        assert_eq!(one.forecasts[0], direct);
        assert_eq!(one.observed[0], vec![f.columns[0][100], f.columns[1][100], f.columns[2][100]]);

        opts.horizon = 12;
        let b = rolling_backtest(&f, &s, &opts).unwrap();
        assert_eq!(b.forecasts.len(), 12);
        assert!(b.dates().windows(2).all(|w| w[1] == w[0] + 1));
        assert!(b.forecasts.iter().all(|r| r.parameters == b.forecasts[0].parameters));
        assert_eq!(b.forecasts[0], one.forecasts[0]);

        opts.refit_every = Some(5);
        let r = rolling_backtest(&f, &s, &opts).unwrap();
        assert_eq!(r.forecasts[4].parameters, b.forecasts[0].parameters);
        assert_ne!(r.forecasts[5].parameters, b.forecasts[0].parameters);
        assert_eq!(r.forecasts[5].parameters, r.forecasts[9].parameters);

        opts.refit_every = None;
        opts.horizon = 31;
        assert!(matches!(rolling_backtest(&f, &s, &opts), Err(Error::Argument(_))));
        let early = BacktestOptions::new(f.dates[10], 3);
        assert!(matches!(rolling_backtest(&f, &s, &early), Err(Error::Argument(_))));
    }

    #[test]
    fn comparison_shape_and_alignment() {
        let f = frame(110, 6);
        let mut opts = BacktestOptions::new(f.dates[99], 5);
        opts.draws = 200;
        let c = compare_variants(&f, &spec(&["x", "b", "m"]), &opts, &VineVariant::ALL).unwrap();
        let r = &c.report;
        assert_eq!((r.mse.len(), r.mse[0].len()), (3, 3));
        assert_eq!((r.mis.len(), r.mis[0].len()), (3, 3));
        assert!(c.backtests.iter().all(|b| b.observed == c.backtests[0].observed && b.dates() == r.dates));
        assert_eq!(r.variants, VineVariant::ALL.to_vec());
        for i in 0..3 {
            assert!(r.mse[i][r.best_mse[i]] <= r.mse[i].iter().cloned().fold(f64::INFINITY, f64::min));
        }
        let mut buf = Vec::new();
        write_report_csv(&mut buf, r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 10);
        assert!(text.starts_with("variable,variant,mse,mis,best_mse,best_mis\n"));
        let mut buf = Vec::new();
        write_forecast_csv(&mut buf, &c.backtests[0].forecasts, Some(&c.backtests[0].observed)).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 16);
    }
}
