//! Maximum-likelihood estimation and information-criterion family selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::families::{gaussian_ln_pdf_xy, t_ln_pdf_xy};
use super::{CopulaSpec, Family, FitStats, PseudoSample, Rotation};
use crate::error::{Error, Result};
use crate::numeric::optimize::{minimize, OptimOptions};
use crate::numeric::roots::{brent_root, golden_section, minimize_scalar};
use crate::numeric::special::{norm_ppf, t_ppf};
use crate::numeric::{clamp_unit, from_interval, to_interval};

pub const MIN_PAIRS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum Criterion {
    #[default]
    Aic,
    Bic,
}

impl Criterion {
    pub fn value(self, stats: &FitStats, k: usize) -> f64 {
        match self {
            Criterion::Aic => stats.aic,
            Criterion::Bic => {
                let _ = k;
                stats.bic
            }
        }
    }
}

/// Degrees-of-freedom grid profiled before refinement.
const T_DF_GRID: [f64; 9] = [2.5, 3.0, 4.0, 5.0, 7.0, 10.0, 14.0, 20.0, 30.0];

fn finish(family: Family, rotation: Rotation, params: Vec<f64>, u: &[f64], v: &[f64], emp_tau: f64) -> CopulaSpec {
    let k = family.n_params() as f64;
    let n = u.len();
    let mut spec = CopulaSpec {
        family,
        rotation,
        params,
        stats: None,
    };
    let loglik = spec.loglik(u, v);
    let tau = spec.kendall_tau();
    spec.stats = Some(FitStats {
        loglik,
        aic: -2.0 * loglik + 2.0 * k,
        bic: -2.0 * loglik + k * (n as f64).ln(),
        tau,
        empirical_tau: emp_tau,
        n,
    });
    spec
}

/// Parameter implied by a Kendall's tau for the one-parameter families.
pub fn tau_to_param(family: Family, tau: f64) -> Option<f64> {
    let t = tau.clamp(-0.98, 0.98);
    let b = family.bounds();
    let clampb = |x: f64| x.clamp(b[0].0, b[0].1);
    Some(match family {
        Family::Gaussian | Family::StudentT => (std::f64::consts::FRAC_PI_2 * t).sin(),
        Family::Clayton => clampb(2.0 * t.max(1e-4) / (1.0 - t.max(1e-4))),
        Family::Gumbel => clampb(1.0 / (1.0 - t.max(0.0))),
        Family::Frank | Family::Joe => {
            let (lo, hi) = if family == Family::Frank { (-35.0, 35.0) } else { (1.0, 30.0) };
            let g = |x: f64| super::families::tau(family, &[x]) - t;
            if g(lo) >= 0.0 {
                lo
            } else if g(hi) <= 0.0 {
                hi
            } else {
                brent_root(g, lo, hi, 1e-8, 200).ok()?
            }
        }
        _ => return None,
    })
}

/// Fit one family with a fixed rotation by maximum likelihood.
pub fn fit_mle(sample: &PseudoSample, family: Family, rotation: Rotation) -> Result<CopulaSpec> {
    let emp_tau = super::tau::kendall_tau_pairs(&sample.u, &sample.v)?;
    fit_with_tau(&sample.u, &sample.v, family, rotation, emp_tau)
}

pub(crate) fn fit_with_tau(u: &[f64], v: &[f64], family: Family, rotation: Rotation, emp_tau: f64) -> Result<CopulaSpec> {
    let n = u.len();
    if n < MIN_PAIRS {
        return Err(Error::InsufficientData { have: n, need: MIN_PAIRS });
    }
    if rotation != Rotation::R0 && !family.rotatable() {
        return Err(Error::Domain(format!("{family} does not admit rotation {}", rotation.degrees())));
    }
    let u: Vec<f64> = u.iter().map(|x| clamp_unit(*x)).collect();
    let v: Vec<f64> = v.iter().map(|x| clamp_unit(*x)).collect();
    // tau of the unrotated copula that would produce the sample
    let base_tau = match rotation {
        Rotation::R90 | Rotation::R270 => -emp_tau,
        _ => emp_tau,
    };
    match family {
        Family::Independence => Ok(finish(family, rotation, vec![], &u, &v, emp_tau)),
        Family::Gaussian => {
            let x: Vec<f64> = u.iter().map(|a| norm_ppf(*a)).collect();
            let y: Vec<f64> = v.iter().map(|a| norm_ppf(*a)).collect();
            let nll = |r: f64| -> f64 { -x.iter().zip(&y).map(|(a, b)| gaussian_ln_pdf_xy(*a, *b, r)).sum::<f64>() };
            let (r, _) = minimize_scalar(nll, -0.999, 0.999, 1e-9);
            Ok(finish(family, rotation, vec![r], &u, &v, emp_tau))
        }
        Family::StudentT => fit_student_t(&u, &v, emp_tau),
        Family::Clayton | Family::Gumbel | Family::Frank | Family::Joe => {
            let (lo, hi) = family.bounds()[0];
            let nll = |th: f64| -> f64 {
                let spec = CopulaSpec {
                    family,
                    rotation,
                    params: vec![th],
                    stats: None,
                };
                let l = spec.loglik(&u, &v);
                if l.is_finite() {
                    -l
                } else {
                    f64::INFINITY
                }
            };
            let (mut th, mut f) = minimize_scalar(nll, lo, hi, 1e-9);
            if let Some(t0) = tau_to_param(family, base_tau) {
                let f0 = nll(t0);
                if f0 < f {
                    // refine around the tau-inversion start
                    let w = (hi - lo) * 0.05;
                    let (t1, f1) = minimize_scalar(nll, (t0 - w).max(lo), (t0 + w).min(hi), 1e-9);
                    if f1 < f {
                        th = t1;
                        f = f1;
                    }
                }
            }
            if !f.is_finite() {
                return Err(Error::Numeric(format!("{family} likelihood is not finite on this sample")));
            }
            Ok(finish(family, rotation, vec![th], &u, &v, emp_tau))
        }
        _ => fit_two_parameter(&u, &v, family, rotation, emp_tau),
    }
}

fn fit_student_t(u: &[f64], v: &[f64], emp_tau: f64) -> Result<CopulaSpec> {
    let profile = |nu: f64| -> (f64, f64) {
        let x: Vec<f64> = u.iter().map(|a| t_ppf(*a, nu)).collect();
        let y: Vec<f64> = v.iter().map(|a| t_ppf(*a, nu)).collect();
        let nll = |r: f64| -> f64 { -x.iter().zip(&y).map(|(a, b)| t_ln_pdf_xy(*a, *b, r, nu)).sum::<f64>() };
        minimize_scalar(nll, -0.999, 0.999, 1e-8)
    };
    let mut best = (f64::INFINITY, 0.0, 0.0, 0usize);
    for (i, nu) in T_DF_GRID.iter().enumerate() {
        let (r, f) = profile(*nu);
        if f < best.0 {
            best = (f, r, *nu, i);
        }
    }
    let i = best.3;
    let lo = if i == 0 { 2.001 } else { T_DF_GRID[i - 1] };
    let hi = if i + 1 == T_DF_GRID.len() { 30.0 } else { T_DF_GRID[i + 1] };
    let (nu, f) = golden_section(|nu| profile(nu).1, lo, hi, 1e-3);
    let (rho, nu, f) = if f < best.0 {
        (profile(nu).0, nu, f)
    } else {
        (best.1, best.2, best.0)
    };
    if !f.is_finite() {
        return Err(Error::Numeric("Student-t likelihood is not finite on this sample".into()));
    }
    Ok(finish(Family::StudentT, Rotation::R0, vec![rho, nu], u, v, emp_tau))
}

fn start_grid(family: Family) -> (Vec<f64>, Vec<f64>) {
    match family {
        Family::Bb1 => (vec![0.2, 0.8, 2.0], vec![1.1, 1.5, 2.5]),
        Family::Bb6 => (vec![1.2, 2.0, 3.0], vec![1.1, 1.5, 2.5]),
        Family::Bb7 => (vec![1.2, 2.0, 3.0], vec![0.3, 1.0, 2.0]),
        Family::Bb8 => (vec![1.5, 3.0, 5.0], vec![0.3, 0.6, 0.9]),
        _ => (vec![1.5, 2.5, 4.0], vec![0.2, 0.5, 0.8]),
    }
}

fn fit_two_parameter(u: &[f64], v: &[f64], family: Family, rotation: Rotation, emp_tau: f64) -> Result<CopulaSpec> {
    let n = u.len();
    let bounds = family.bounds();
    let natural = |z: &[f64]| -> Vec<f64> {
        z.iter()
            .zip(&bounds)
            .map(|(zi, (lo, hi))| to_interval(*zi, *lo, *hi))
            .collect()
    };
    let nll_natural = |p: &[f64]| -> f64 {
        let spec = CopulaSpec {
            family,
            rotation,
            params: p.to_vec(),
            stats: None,
        };
        let l = spec.loglik(u, v);
        if l.is_finite() {
            -l / n as f64
        } else {
            f64::INFINITY
        }
    };
    let (g1, g2) = start_grid(family);
    let mut start = vec![g1[0], g2[0]];
    let mut start_val = f64::INFINITY;
    for a in &g1 {
        for b in &g2 {
            let val = nll_natural(&[*a, *b]);
            if val < start_val {
                start_val = val;
                start = vec![*a, *b];
            }
        }
    }
    let z0: Vec<f64> = start
        .iter()
        .zip(&bounds)
        .map(|(x, (lo, hi))| from_interval(*x, *lo, *hi))
        .collect();
    let opts = OptimOptions {
        simplex_iter: 80,
        simplex_step: 0.5,
        ..OptimOptions::default()
    };
    let r = minimize(|z| nll_natural(&natural(z)), &z0, &opts);
    if !r.diagnostics.converged || !r.value.is_finite() {
        return Err(Error::NotConverged {
            what: format!("{family} copula fit"),
            iterations: r.diagnostics.iterations,
            grad_norm: r.diagnostics.grad_norm,
            best: natural(&r.x),
        });
    }
    Ok(finish(family, rotation, natural(&r.x), u, v, emp_tau))
}

/// Fit every candidate and return the one minimising the criterion; ties go
/// to fewer parameters, then catalog order.
pub fn select_family(
    sample: &PseudoSample,
    candidates: &[(Family, Rotation)],
    criterion: Criterion,
) -> Result<CopulaSpec> {
    if candidates.is_empty() {
        return Err(Error::Selection("empty candidate set".into()));
    }
    let emp_tau = super::tau::kendall_tau_pairs(&sample.u, &sample.v)?;
    select_with_tau(&sample.u, &sample.v, candidates, criterion, emp_tau)
}

pub(crate) fn select_with_tau(
    u: &[f64],
    v: &[f64],
    candidates: &[(Family, Rotation)],
    criterion: Criterion,
    emp_tau: f64,
) -> Result<CopulaSpec> {
    let fits: Vec<(usize, Result<CopulaSpec>)> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, (f, r))| (i, fit_with_tau(u, v, *f, *r, emp_tau)))
        .collect();
    let mut best: Option<(f64, usize, usize, CopulaSpec)> = None;
    let mut failures = Vec::new();
    for (i, res) in fits {
        match res {
            Ok(spec) => {
                let k = spec.n_params();
                let score = criterion.value(spec.stats.as_ref().expect("fitted spec has stats"), k);
                if !score.is_finite() {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((s, bk, bi, _)) => {
                        if (score - s).abs() <= 1e-9 * (1.0 + s.abs()) {
                            (k, i) < (*bk, *bi)
                        } else {
                            score < *s
                        }
                    }
                };
                if better {
                    best = Some((score, k, i, spec));
                }
            }
            Err(e) => failures.push(format!("{}: {e}", candidates[i].0)),
        }
    }
    best.map(|b| b.3).ok_or_else(|| Error::Selection(format!("every candidate failed ({})", failures.join("; "))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copulas::empirical_kendall_tau;

    #[test]
    fn gaussian_fit_recovers_rho() {
        let g = CopulaSpec::new(Family::Gaussian, Rotation::R0, &[0.6]).unwrap();
        let s = g.sample(5000, 1);
        let f = fit_mle(&s, Family::Gaussian, Rotation::R0).unwrap();
        assert!((0.55..=0.65).contains(&f.params[0]), "{f}");
    }

    #[test]
    fn independence_fit_is_trivial() {
        let s = CopulaSpec::independence().sample(100, 2);
        let f = fit_mle(&s, Family::Independence, Rotation::R0).unwrap();
        let st = f.stats.unwrap();
        assert_eq!((st.loglik, st.aic, st.bic), (0.0, 0.0, 0.0));
        assert!(f.params.is_empty());
    }

    #[test]
    fn rotated_clayton_prefers_rotation() {
        let c = CopulaSpec::new(Family::Clayton, Rotation::R90, &[3.0]).unwrap();
        let s = c.sample(2000, 3);
        let a = fit_mle(&s, Family::Clayton, Rotation::R90).unwrap();
        let b = fit_mle(&s, Family::Clayton, Rotation::R0).unwrap();
        assert!(a.stats.unwrap().aic < b.stats.unwrap().aic);
    }

    #[test]
    fn selection_prefers_clayton_on_clayton_data() {
        let c = CopulaSpec::new(Family::Clayton, Rotation::R0, &[3.0]).unwrap();
        let s = c.sample(3000, 4);
        let cands = [(Family::Gaussian, Rotation::R0), (Family::Clayton, Rotation::R0), (Family::Clayton, Rotation::R180)];
        let best = select_family(&s, &cands, Criterion::Aic).unwrap();
        assert_eq!(best.family, Family::Clayton);
        assert_eq!(best.rotation, Rotation::R0);
    }

    #[test]
    fn near_independence_selects_independence() {
        let g = CopulaSpec::new(Family::Gaussian, Rotation::R0, &[0.01]).unwrap();
        let s = g.sample(200, 5);
        let cands = [(Family::Independence, Rotation::R0), (Family::Gaussian, Rotation::R0)];
        let best = select_family(&s, &cands, Criterion::Aic).unwrap();
        assert_eq!(best.family, Family::Independence);
    }

    #[test]
    fn single_candidate_returned() {
        let s = CopulaSpec::new(Family::Frank, Rotation::R0, &[4.0]).unwrap().sample(300, 6);
        let best = select_family(&s, &[(Family::Joe, Rotation::R0)], Criterion::Bic).unwrap();
        assert_eq!(best.family, Family::Joe);
    }

    #[test]
    fn two_parameter_fit_recovers_tau() {
        for (f, p) in [(Family::Bb1, [0.5, 1.6]), (Family::Tawn1, [3.0, 0.6]), (Family::StudentT, [0.5, 6.0])] {
            let spec = CopulaSpec::new(f, Rotation::R0, &p).unwrap();
            let s = spec.sample(3000, 7);
            let fit = fit_mle(&s, f, Rotation::R0).unwrap();
            let t_emp = empirical_kendall_tau(&s).unwrap();
            assert!((fit.kendall_tau() - t_emp).abs() < 0.05, "{fit} vs {t_emp}");
        }
    }

    #[test]
    fn short_samples_rejected() {
        let s = CopulaSpec::independence().sample(10, 2);
        assert!(matches!(
            fit_mle(&s, Family::Gaussian, Rotation::R0),
            Err(Error::InsufficientData { .. })
        ));
    }
}
