use std::collections::{BTreeMap, HashSet};

use serde::Serialize;
use vinecast_core::dataio::{align_and_validate_with, convert_cumulative, format_day, load_dataset, IngestSchema, TimeSeriesFrame};
use vinecast_core::forecast::{
    compare_variants, evaluate, fit_joint, predict_one_day, rolling_backtest, write_forecast_csv, write_report_csv,
    BacktestOptions, FittedJointModel, ForecastResult,
};
use vinecast_core::marginals::Diagnostics;
use vinecast_core::sentiment::{daily_scores, load_corpus, load_stopwords, term_frequencies, write_daily_csv, write_frequencies_csv, Lexicon};

use crate::config::LoadedConfig;
use crate::manifest::Recorder;
use crate::CliError;

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Validation(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> vinecast_core::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Ingest, convert cumulative columns and keep the complete aligned block.
fn load_frame(cfg: &LoadedConfig, rec: &mut Recorder) -> Result<TimeSeriesFrame, CliError> {
    let c = &cfg.config;
    let (data, schema) = (cfg.resolve(&c.data), cfg.resolve(&c.schema));
    rec.input(&c.schema, &schema)?;
    rec.input(&c.data, &data)?;
    let schema = IngestSchema::load(&schema)?;
    let raw = load_dataset(&data, &schema)?;
    let daily = convert_cumulative(&raw)?;
    let frame = align_and_validate_with(&daily, c.min_rows)?;
    if !frame.report.dropped.is_empty() {
        log::warn!("dropped {} incomplete rows", frame.report.dropped.len());
    }
    cfg.joint_spec().check_columns(&frame.names)?;
    Ok(frame)
}

fn training_frame(cfg: &LoadedConfig, frame: &TimeSeriesFrame) -> Result<TimeSeriesFrame, CliError> {
    match cfg.split_day()? {
        None => Ok(frame.clone()),
        Some(split) => {
            let n = frame.dates.iter().take_while(|d| **d <= split).count();
            if n == 0 {
                return Err(CliError::Validation(format!(
                    "config key `split`: no data on or before {}",
                    format_day(split)
                )));
            }
            Ok(frame.slice_rows(0..n))
        }
    }
}

fn report_warnings(model: &FittedJointModel) {
    for w in &model.warnings {
        log::warn!("{w}");
    }
}

/// The configured model file, or a fresh fit at the split.
fn obtain_model(cfg: &LoadedConfig, rec: &mut Recorder) -> Result<(FittedJointModel, TimeSeriesFrame), CliError> {
    let frame = load_frame(cfg, rec)?;
    let model = match &cfg.config.model {
        Some(p) => {
            let path = cfg.resolve(p);
            rec.input(p, &path)?;
            let m = FittedJointModel::from_json(&std::fs::read_to_string(&path)?)?;
            if m.names != frame.names {
                return Err(CliError::Validation(format!(
                    "config key `model`: model variables {:?} differ from data columns {:?}",
                    m.names, frame.names
                )));
            }
            m
        }
        None => fit_joint(&training_frame(cfg, &frame)?, &cfg.joint_spec(), cfg.config.seed)?,
    };
    report_warnings(&model);
    Ok((model, frame))
}

fn backtest_options(cfg: &LoadedConfig) -> Result<BacktestOptions, CliError> {
    let c = &cfg.config;
    let split = cfg
        .split_day()?
        .ok_or_else(|| CliError::Validation("config key `split`: required for backtests".into()))?;
    Ok(BacktestOptions {
        draws: c.draws,
        alpha: c.alpha,
        seed: c.seed,
        refit_every: c.refit_every,
        ..BacktestOptions::new(split, c.horizon)
    })
}

#[derive(Serialize)]
struct IngestReport {
    rows: usize,
    columns: Vec<String>,
    first_date: String,
    last_date: String,
    dropped: Vec<String>,
}

pub fn ingest(cfg: &LoadedConfig) -> Result<(), CliError> {
    let mut rec = Recorder::new(cfg.output_dir())?;
    let frame = load_frame(cfg, &mut rec)?;
    let report = IngestReport {
        rows: frame.n_rows(),
        columns: frame.names.clone(),
        first_date: format_day(frame.dates[0]),
        last_date: format_day(*frame.dates.last().expect("validated frame is non-empty")),
        dropped: frame.report.dropped.iter().map(|d| format_day(*d)).collect(),
    };
    rec.write("frame.csv", &csv_bytes(|b| frame.write_csv(b))?)?;
    rec.write("ingest_report.json", &json_bytes(&report)?)?;
    rec.finish("ingest", cfg)?;
    Ok(())
}

pub fn sentiment(cfg: &LoadedConfig) -> Result<(), CliError> {
    let s = cfg
        .config
        .sentiment
        .as_ref()
        .ok_or_else(|| CliError::Validation("config key `sentiment`: required for the sentiment command".into()))?;
    let mut rec = Recorder::new(cfg.output_dir())?;
    let corpus = cfg.resolve(&s.corpus);
    rec.input(&s.corpus, &corpus)?;
    let batches = load_corpus(&corpus, s.fill_days)?;
    for (name, lc) in &s.lexicons {
        let path = cfg.resolve(&lc.path);
        rec.input(&lc.path, &path)?;
        let lexicon = Lexicon::load(&path, lc.kind).map_err(|e| e.for_variable(name))?;
        let scores = daily_scores(&batches, &lexicon, s.aggregation).map_err(|e| e.for_variable(name))?;
        rec.write(&format!("sentiment_{name}.csv"), &csv_bytes(|b| write_daily_csv(b, &scores))?)?;
    }
    let stopwords = match &s.stopwords {
        Some(p) => {
            let path = cfg.resolve(p);
            rec.input(p, &path)?;
            load_stopwords(&path)?
        }
        None => HashSet::new(),
    };
    let table = term_frequencies(&batches, &stopwords, s.stem);
    rec.write("term_frequencies.csv", &csv_bytes(|b| write_frequencies_csv(b, &table))?)?;
    rec.finish("sentiment", cfg)?;
    Ok(())
}

#[derive(Serialize)]
struct VariableDiagnostics<'a> {
    family: String,
    loglik: f64,
    parameters: BTreeMap<String, f64>,
    #[serde(flatten)]
    residuals: &'a Diagnostics,
}

fn diagnostics_bundle(model: &FittedJointModel, diags: &[Diagnostics]) -> Result<Vec<u8>, CliError> {
    let bundle: BTreeMap<&str, VariableDiagnostics> = model
        .names
        .iter()
        .zip(&model.marginals)
        .zip(diags)
        .map(|((n, m), d)| {
            (
                n.as_str(),
                VariableDiagnostics {
                    family: m.family_tag(),
                    loglik: m.loglik(),
                    parameters: m.parameters(),
                    residuals: d,
                },
            )
        })
        .collect();
    json_bytes(&bundle)
}

fn histogram_csv(model: &FittedJointModel, diags: &[Diagnostics]) -> Vec<u8> {
    let mut out = String::from("variable,bin,count\n");
    for (n, d) in model.names.iter().zip(diags) {
        for (b, c) in d.histogram.iter().enumerate() {
            out.push_str(&format!("{n},{b},{c}\n"));
        }
    }
    out.into_bytes()
}

pub fn fit(cfg: &LoadedConfig) -> Result<(), CliError> {
    let mut rec = Recorder::new(cfg.output_dir())?;
    let frame = load_frame(cfg, &mut rec)?;
    let model = fit_joint(&training_frame(cfg, &frame)?, &cfg.joint_spec(), cfg.config.seed)?;
    report_warnings(&model);
    rec.write("model.json", &json_bytes(&model)?)?;
    rec.write("vine.txt", model.vine.render().as_bytes())?;
    rec.write("diagnostics.json", &diagnostics_bundle(&model, &model.diagnostics()?)?)?;
    rec.finish("fit", cfg)?;
    Ok(())
}

pub fn forecast(cfg: &LoadedConfig) -> Result<(), CliError> {
    let mut rec = Recorder::new(cfg.output_dir())?;
    let (model, frame) = obtain_model(cfg, &mut rec)?;
    let c = &cfg.config;
    let result: ForecastResult = predict_one_day(&model, c.draws, c.alpha, c.seed)?;
    let observed: Option<Vec<Vec<f64>>> = frame
        .row_of(result.date)
        .map(|r| vec![frame.columns.iter().map(|col| col[r]).collect()]);
    let bytes = csv_bytes(|b| write_forecast_csv(b, std::slice::from_ref(&result), observed.as_deref()))?;
    rec.write("forecast.csv", &bytes)?;
    rec.finish("forecast", cfg)?;
    Ok(())
}

pub fn backtest(cfg: &LoadedConfig) -> Result<(), CliError> {
    let mut rec = Recorder::new(cfg.output_dir())?;
    let frame = load_frame(cfg, &mut rec)?;
    let opts = backtest_options(cfg)?;
    let bt = rolling_backtest(&frame, &cfg.joint_spec(), &opts)?;
    let variant = bt.variant;
    let bytes = csv_bytes(|b| write_forecast_csv(b, &bt.forecasts, Some(&bt.observed)))?;
    rec.write(&format!("backtest_{variant}.csv"), &bytes)?;
    let report = evaluate(&frame.names, std::slice::from_ref(&bt))?;
    rec.write(&format!("backtest_{variant}_report.csv"), &csv_bytes(|b| write_report_csv(b, &report))?)?;
    rec.finish("backtest", cfg)?;
    Ok(())
}

pub fn compare(cfg: &LoadedConfig) -> Result<(), CliError> {
    let mut rec = Recorder::new(cfg.output_dir())?;
    let frame = load_frame(cfg, &mut rec)?;
    let opts = backtest_options(cfg)?;
    let cmp = compare_variants(&frame, &cfg.joint_spec(), &opts, &cfg.config.variants)?;
    for bt in &cmp.backtests {
        let bytes = csv_bytes(|b| write_forecast_csv(b, &bt.forecasts, Some(&bt.observed)))?;
        rec.write(&format!("forecasts_{}.csv", bt.variant), &bytes)?;
    }
    rec.write("report.csv", &csv_bytes(|b| write_report_csv(b, &cmp.report))?)?;
    let mut cov = String::from("variable,variant,coverage\n");
    for (i, n) in cmp.report.variables.iter().enumerate() {
        for (k, v) in cmp.report.variants.iter().enumerate() {
            cov.push_str(&format!("{n},{v},{}\n", cmp.report.coverage[i][k]));
        }
    }
    rec.write("coverage.csv", cov.as_bytes())?;
    rec.finish("compare", cfg)?;
    Ok(())
}

pub fn diagnostics(cfg: &LoadedConfig) -> Result<(), CliError> {
    let mut rec = Recorder::new(cfg.output_dir())?;
    let (model, _) = obtain_model(cfg, &mut rec)?;
    let diags = model.diagnostics()?;
    rec.write("diagnostics.json", &diagnostics_bundle(&model, &diags)?)?;
    rec.write("pit_histogram.csv", &histogram_csv(&model, &diags))?;
    rec.write("vine.txt", model.vine.render().as_bytes())?;
    rec.finish("diagnostics", cfg)?;
    Ok(())
}
