//! Derivative-free simplex search followed by quasi-Newton refinement with
//! central finite-difference gradients.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
pub struct OptimOptions {
    /// Quasi-Newton iteration cap.
    pub max_iter: usize,
    /// Convergence threshold on the gradient infinity norm.
    pub grad_tol: f64,
    /// Relative gradient level at which a stalled line search counts as converged.
    pub stall_tol: f64,
    /// Nelder-Mead iteration cap (0 skips the simplex phase).
    pub simplex_iter: usize,
    /// Initial simplex edge length.
    pub simplex_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iter: 500,
            grad_tol: 1e-6,
            stall_tol: 1e-4,
            simplex_iter: 400,
            simplex_step: 0.2,
        }
    }
}

/// Convergence record kept with every fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub diagnostics: Convergence,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: Fn(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &OptimOptions) -> OptimResult {
    let mut obj = Counted { f, evals: 0 };
    if x0.is_empty() {
        let value = obj.eval(x0);
        return OptimResult {
            x: Vec::new(),
            value,
            diagnostics: Convergence {
                iterations: 0,
                evaluations: 1,
                grad_norm: 0.0,
                converged: true,
            },
        };
    }
    let (x, fx) = if opts.simplex_iter > 0 {
        nelder_mead(&mut obj, x0, opts.simplex_step, opts.simplex_iter)
    } else {
        let v = obj.eval(x0);
        (x0.to_vec(), v)
    };
    bfgs(&mut obj, x, fx, opts)
}

fn nelder_mead<F: Fn(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x0: &[f64],
    step: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += if x0[i].abs() > 1.0 { step * x0[i].abs() } else { step };
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| obj.eval(p)).collect();

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[n];
        if worst.is_finite() && (worst - best).abs() <= 1e-12 * (1.0 + best.abs()) {
            break;
        }

        let mut centroid = vec![0.0; n];
        for p in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-1.0);
        let fr = obj.eval(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = obj.eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(-0.5);
                let fc = obj.eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = obj.eval(&xc);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = simplex[0]
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, p)| b + 0.5 * (p - b))
                        .collect();
                    values[i] = obj.eval(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    (simplex[best].clone(), values[best])
}

/// Central finite-difference gradient.
pub fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 6e-6 * x[i].abs().max(1.0);
            let orig = xp[i];
            xp[i] = orig + h;
            let fp = f(&xp);
            xp[i] = orig - h;
            let fm = f(&xp);
            xp[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn counted_gradient<F: Fn(&[f64]) -> f64>(obj: &mut Counted<F>, x: &[f64]) -> Vec<f64> {
    obj.evals += 2 * x.len();
    let g = gradient(&obj.f, x);
    g.into_iter()
        .map(|v| if v.is_finite() { v } else { 0.0 })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn bfgs<F: Fn(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    mut x: Vec<f64>,
    mut fx: f64,
    opts: &OptimOptions,
) -> OptimResult {
    let n = x.len();
    let identity = |n: usize| {
        let mut h = vec![vec![0.0; n]; n];
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        h
    };
    let mut hinv = identity(n);
    let mut fresh = true;
    let mut g = counted_gradient(obj, &x);
    let mut gnorm = inf_norm(&g);
    let mut iterations = 0;
    let mut converged = gnorm < opts.grad_tol;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut dir: Vec<f64> = hinv.iter().map(|row| -dot(row, &g)).collect();
        if dot(&dir, &g) >= 0.0 {
            hinv = identity(n);
            fresh = true;
            dir = g.iter().map(|v| -v).collect();
        }
        let slope = dot(&dir, &g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let fnew = obj.eval(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if !fresh {
                hinv = identity(n);
                fresh = true;
                continue;
            }
            // Finite-difference resolution reached.
            converged = gnorm < opts.stall_tol * (1.0 + fx.abs());
            break;
        };
        let gn = counted_gradient(obj, &xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                let scale = sy / dot(&y, &y);
                for (i, row) in hinv.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = if i == j { scale } else { 0.0 };
                    }
                }
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = hinv.iter().map(|row| dot(row, &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    hinv[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
            fresh = false;
        }
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        gnorm = inf_norm(&g);
        converged = gnorm < opts.grad_tol;
        if !converged && improvement.abs() <= 1e-15 * (1.0 + fx.abs()) && gnorm < opts.stall_tol * (1.0 + fx.abs()) {
            converged = true;
        }
    }

    OptimResult {
        x,
        value: fx,
        diagnostics: Convergence {
            iterations,
            evaluations: obj.evals,
            grad_norm: gnorm,
            converged,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize(f, &[-1.2, 1.0], &OptimOptions::default());
        assert!(r.diagnostics.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn quadratic_gradient_tolerance() {
        let f = |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(i, v)| (i as f64 + 1.0) * (v - i as f64).powi(2))
                .sum::<f64>()
        };
        let r = minimize(f, &[5.0, -3.0, 2.0, 0.0], &OptimOptions::default());
        assert!(r.diagnostics.grad_norm < 1e-6);
        for (i, v) in r.x.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn infinite_regions_are_avoided() {
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                f64::INFINITY
            } else {
                x[0] - x[0].ln()
            }
        };
        let r = minimize(f, &[3.0], &OptimOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-5);
    }
}
