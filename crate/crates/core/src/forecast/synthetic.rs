//! Synthetic ten-variable daily panel drawn from known marginals and a known
//! vine on their innovations.

use std::collections::BTreeMap;

use crate::copulas::fit::tau_to_param;
use crate::copulas::{CopulaSpec, Family, Rotation};
use crate::dataio::{ColumnRole, ColumnSpec, IngestSchema, TimeSeriesFrame, ISO_DATE};
use crate::error::{Error, Result};
use crate::marginals::{
    Covariate, GamlssFamily, GamlssModel, LinkFunction, MarginalModel, MarginalSpec, TimeLink, TweedieModel,
    TweedieParams,
};
use crate::numeric::optimize::Convergence;
use crate::tsmodels::{ArimaGarchModel, ArimaGarchOrder};
use crate::vine::{RVineModel, RVineStructure, VineConfig};

use super::JointSpec;

pub const START_DATE: &str = "2020-04-21";
pub const N_ROWS: usize = 384;
pub const SEED: u64 = 20_210_401;
/// Last training date of the bundled backtest (38 forecast days follow).
pub const SPLIT_DATE: &str = "2021-04-01";
const BURN_IN: usize = 50;

pub const NAMES: [&str; 10] = [
    "Admissions", "Afinn", "Bing", "Cases", "Deaths", "Google", "Hospital", "ICU_Beds", "Tweets", "VirusTests",
];

/// Generating model: marginals and vine, variables in name order.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub names: Vec<String>,
    pub marginals: Vec<MarginalModel>,
    pub vine: RVineModel,
    /// Variables with a first-tree edge of |tau| >= 0.3.
    pub coupled: Vec<String>,
}

fn unfitted() -> Convergence {
    Convergence {
        iterations: 0,
        evaluations: 0,
        grad_norm: 0.0,
        converged: true,
    }
}

fn gamlss(family: GamlssFamily, mu: (f64, f64), sigma: f64, nu: f64, tau: f64) -> MarginalModel {
    let mut link = TimeLink::for_window(LinkFunction::Identity, Covariate::Standardized, N_ROWS);
    link.intercept = mu.0;
    link.slope = mu.1;
    MarginalModel::Gamlss(GamlssModel {
        family,
        sigma,
        nu,
        tau,
        fixed: [false, false, family == GamlssFamily::Net, family == GamlssFamily::Net],
        link,
        loglik: f64::NAN,
        n_obs: 0,
        convergence: unfitted(),
    })
}

#[allow(clippy::too_many_arguments)]
fn arima(order: [usize; 5], a: f64, phi: &[f64], theta: &[f64], omega: f64, alpha: &[f64], beta: &[f64], df: f64) -> Result<MarginalModel> {
    let o = ArimaGarchOrder::new(order[0], order[1], order[2], order[3], order[4])?;
    Ok(MarginalModel::ArimaGarch(ArimaGarchModel::from_params(
        o,
        a,
        phi.to_vec(),
        theta.to_vec(),
        omega,
        alpha.to_vec(),
        beta.to_vec(),
        df,
    )?))
}

fn pair(family: Family, rotation: Rotation, tau: f64) -> Result<CopulaSpec> {
    let p = tau_to_param(family, tau.abs()).ok_or_else(|| Error::Argument(format!("no tau inversion for {family:?}")))?;
    CopulaSpec::new(family, rotation, &[p])
}

pub fn covid_like() -> Result<SyntheticTruth> {
    let names: Vec<String> = NAMES.iter().map(|s| s.to_string()).collect();
    let marginals = vec![
        gamlss(GamlssFamily::Shasho2, (900.0, 150.0), 60.0, 0.3, 0.8),
        gamlss(GamlssFamily::Sst, (-20.0, 2.0), 3.0, 0.8, 6.0),
        gamlss(GamlssFamily::Net, (-6.4, 0.3), 0.5, 1.5, 2.0),
        arima([1, 0, 2, 1, 1], 2000.0, &[0.8], &[-0.2, -0.1], 25_000.0, &[0.15], &[0.75], 6.0)?,
        gamlss(GamlssFamily::Shasho, (300.0, 40.0), 30.0, 0.4, 0.9),
        {
            let mut link = TimeLink::for_window(LinkFunction::Log, Covariate::Standardized, N_ROWS);
            link.intercept = 20f64.ln();
            link.slope = -0.3;
            MarginalModel::Tweedie(TweedieModel {
                params: TweedieParams {
                    phi: 2.0,
                    power: 1.5,
                    phi_fixed: false,
                },
                link,
                loglik: f64::NAN,
                n_obs: 0,
                convergence: unfitted(),
            })
        },
        arima([1, 0, 1, 2, 1], 1500.0, &[0.85], &[0.4], 128_000.0, &[0.1, 0.1], &[0.6], 8.0)?,
        gamlss(GamlssFamily::Shasho, (1200.0, -100.0), 80.0, -0.3, 1.1),
        gamlss(GamlssFamily::Sep4, (120_000.0, 5000.0), 6000.0, 1.2, 1.8),
        arima([2, 0, 1, 1, 1], 50.0, &[1.2, -0.3], &[-0.5], 160.0, &[0.2], &[0.7], 10.0)?,
    ];
    // first tree, indices into NAMES
    let first: [((usize, usize), Family, Rotation, f64); 9] = [
        ((0, 7), Family::Gaussian, Rotation::R0, 0.65),
        ((1, 2), Family::Clayton, Rotation::R0, 0.6),
        ((1, 8), Family::Clayton, Rotation::R90, -0.2),
        ((3, 6), Family::Clayton, Rotation::R0, 0.45),
        ((4, 7), Family::Gumbel, Rotation::R0, 0.55),
        ((4, 8), Family::Clayton, Rotation::R0, 0.3),
        ((5, 8), Family::Joe, Rotation::R0, 0.35),
        ((6, 8), Family::Frank, Rotation::R0, 0.2),
        ((8, 9), Family::Gumbel, Rotation::R180, 0.25),
    ];
    let edges: Vec<(usize, usize)> = first.iter().map(|e| e.0).collect();
    let structure = RVineStructure::from_first_tree(NAMES.len(), &edges)?;
    let mut pairs = Vec::with_capacity(structure.trees.len());
    for (k, tree) in structure.trees.iter().enumerate() {
        let mut level = Vec::with_capacity(tree.len());
        for (i, e) in tree.iter().enumerate() {
            let spec = match k {
                0 => {
                    let (_, f, r, t) = first.iter().find(|x| x.0 == e.conditioned).expect("first-tree edge");
                    if *f == Family::Gaussian {
                        CopulaSpec::new(*f, *r, &[(t * std::f64::consts::FRAC_PI_2).sin()])?
                    } else {
                        pair(*f, *r, *t)?
                    }
                }
                1 if i < 2 => pair(Family::Frank, Rotation::R0, 0.1)?,
                _ => CopulaSpec::independence(),
            };
            level.push(spec);
        }
        pairs.push(level);
    }
    let vine = RVineModel::new(names.clone(), structure, pairs)?;
    let mut coupled: Vec<String> = first
        .iter()
        .filter(|e| e.3.abs() >= 0.3)
        .flat_map(|e| [names[e.0 .0].clone(), names[e.0 .1].clone()])
        .collect();
    coupled.sort();
    coupled.dedup();
    Ok(SyntheticTruth {
        names,
        marginals,
        vine,
        coupled,
    })
}

/// Marginal families matching the generating model, with a full-vine config.
pub fn joint_spec() -> JointSpec {
    let cov = Covariate::Standardized;
    let arima = |order: [usize; 3], garch: [usize; 2]| MarginalSpec::ArimaGarch {
        order,
        garch,
        fixed: BTreeMap::new(),
    };
    let specs = [
        MarginalSpec::Shasho2 { covariate: cov },
        MarginalSpec::Sst { covariate: cov },
        MarginalSpec::Net {
            covariate: cov,
            nu: 1.5,
            tau: 2.0,
        },
        arima([1, 0, 2], [1, 1]),
        MarginalSpec::Shasho { covariate: cov },
        MarginalSpec::Tweedie {
            covariate: cov,
            phi: None,
            power: None,
        },
        arima([1, 0, 1], [2, 1]),
        MarginalSpec::Shasho { covariate: cov },
        MarginalSpec::Sep4 { covariate: cov },
        arima([2, 0, 1], [1, 1]),
    ];
    JointSpec {
        marginals: NAMES.iter().map(|n| n.to_string()).zip(specs).collect(),
        vine: VineConfig::default(),
    }
}

pub fn schema() -> IngestSchema {
    IngestSchema {
        date_column: "date".into(),
        date_format: ISO_DATE.into(),
        columns: NAMES
            .iter()
            .map(|n| ColumnSpec {
                name: n.to_string(),
                role: if matches!(*n, "Afinn" | "Bing" | "Tweets") {
                    ColumnRole::TextDerived
                } else {
                    ColumnRole::Daily
                },
                divisor: 1.0,
            })
            .collect(),
    }
}

/// Draw `n_rows` consecutive days starting at day number `start`.
pub fn generate(truth: &SyntheticTruth, start: i64, n_rows: usize, seed: u64) -> Result<TimeSeriesFrame> {
    let total = n_rows + BURN_IN;
    let u = truth.vine.simulate(total, seed).columns;
    let mut columns = Vec::with_capacity(truth.names.len());
    for (k, model) in truth.marginals.iter().enumerate() {
        let col = match model {
            MarginalModel::ArimaGarch(m) => {
                let mean = m.a / (1.0 - m.phi.iter().sum::<f64>());
                let mut x: Vec<f64> = Vec::with_capacity(total);
                for t in 0..total {
                    let v = if t <= m.order.warmup() {
                        mean
                    } else {
                        model.forecast(&x, u[k][t])?
                    };
                    x.push(v);
                }
                x.split_off(BURN_IN)
            }
            _ => {
                let mut x = Vec::with_capacity(n_rows);
                for t in 0..n_rows {
                    let p = model.predictive(&x)?;
                    x.push(p.quantile(u[k][BURN_IN + t])?);
                }
                x
            }
        };
        columns.push(col);
    }
    let dates = (0..n_rows as i64).map(|i| start + i).collect();
    let mut frame = TimeSeriesFrame::new(dates, truth.names.clone(), columns)?;
    frame.roles = schema().columns.iter().map(|c| c.role).collect();
    Ok(frame)
}
