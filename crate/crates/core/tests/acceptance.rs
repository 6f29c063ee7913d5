//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p vinecast-core --test acceptance`. Failures are
//! reported but only fail the run when `ACCEPTANCE_STRICT=1`; set
//! `ACCEPTANCE_ONLY=n` to run a single criterion.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use vinecast_core::copulas::fit::tau_to_param;
use vinecast_core::copulas::{CopulaSpec, Family, Rotation};
use vinecast_core::dataio::{align_and_validate_with, convert_cumulative, load_dataset, parse_iso_date, IngestSchema, TimeSeriesFrame};
use vinecast_core::forecast::synthetic::{self, SPLIT_DATE};
use vinecast_core::forecast::{compare_variants, interval_score, mis, mse, BacktestOptions};
use vinecast_core::marginals::{GamlssFamily, GamlssParams};
use vinecast_core::sentiment::{daily_scores, load_corpus, score_binary, score_weighted, Aggregation, Lexicon, LexiconKind};
use vinecast_core::tsmodels::{fit_arima_garch, ArimaGarchFitConfig, ArimaGarchModel, ArimaGarchOrder};
use vinecast_core::vine::{default_names, select_structure_and_fit, RVineModel, RVineStructure, VineConfig, VineVariant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Kendall's tau by direct pair counting (continuous data, no ties).
fn kendall_naive(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            let p = (x[i] - x[j]) * (y[i] - y[j]);
            s += if p > 0.0 {
                1
            } else if p < 0.0 {
                -1
            } else {
                0
            };
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

// ---------------------------------------------------------------- 1

const GL_X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
const GL_W: [f64; 5] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];

/// Composite 5-point Gauss-Legendre with panels of width at most `h`.
fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64, h: f64) -> f64 {
    let n = ((b - a).abs() / h).ceil().max(1.0) as usize;
    let w = (b - a) / n as f64;
    (0..n)
        .map(|k| {
            let c = a + (k as f64 + 0.5) * w;
            GL_X.iter().zip(GL_W).map(|(x, wt)| wt * f(c + 0.5 * w * x)).sum::<f64>() * 0.5 * w
        })
        .sum()
}

/// Integral of the density over the real line after `x = mu + s sinh(t)`,
/// split at the centre and at the NET knots.
fn total_mass(p: &GamlssParams) -> f64 {
    let s = if p.family == GamlssFamily::Shasho2 { p.sigma * p.tau } else { p.sigma };
    let g = |t: f64| p.pdf(p.mu + s * t.sinh()) * s * t.cosh();
    let big = 25.0;
    let mut cuts = vec![-big, 0.0, big];
    if p.family == GamlssFamily::Net {
        for k in [p.nu, p.tau] {
            cuts.push(k.asinh());
            cuts.push(-k.asinh());
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2).map(|w| gauss_legendre(&g, w[0], w[1], 0.01)).sum()
}

fn criterion_1() -> Outcome {
    let grid: [(GamlssFamily, [(f64, f64, f64, f64); 3]); 5] = [
        (GamlssFamily::Shasho, [(0.0, 1.0, 0.0, 1.0), (2.0, 0.7, 0.8, 1.6), (-3.0, 2.5, -0.5, 0.6)]),
        (GamlssFamily::Shasho2, [(0.0, 1.0, 0.0, 1.0), (5.0, 3.0, 1.2, 0.7), (-1.0, 0.4, -0.9, 2.0)]),
        (GamlssFamily::Sst, [(0.0, 1.0, 1.0, 3.0), (1.0, 2.0, 0.6, 8.0), (-2.0, 0.5, 1.8, 2.5)]),
        (GamlssFamily::Net, [(0.0, 1.0, 1.5, 2.0), (1.0, 2.0, 2.0, 4.0), (-1.0, 0.6, 3.0, 5.0)]),
        (GamlssFamily::Sep4, [(0.0, 1.0, 2.0, 2.0), (1.0, 1.5, 1.2, 3.0), (-2.0, 0.7, 0.6, 0.9)]),
    ];
    let mut worst_mass = 0.0f64;
    let mut notes = Vec::new();
    for (fam, sets) in grid {
        for (mu, sigma, nu, tau) in sets {
            let p = GamlssParams::new(fam, mu, sigma, nu, tau).expect("grid point is valid");
            let err = (total_mass(&p) - 1.0).abs();
            if !(err < 1e-6) {
                notes.push(format!("{fam:?}({mu},{sigma},{nu},{tau}) mass error {err:.2e}"));
            }
            worst_mass = worst_mass.max(err);
        }
    }
    let (mu, sigma) = (1.5, 2.0);
    let normal = GamlssParams::new(GamlssFamily::Shasho, mu, sigma, 0.0, 1.0).unwrap();
    let worst_normal = (0..100)
        .map(|i| {
            let x = mu + sigma * (-6.0 + 12.0 * i as f64 / 99.0);
            (normal.pdf(x) - norm_pdf((x - mu) / sigma) / sigma).abs()
        })
        .fold(0.0, f64::max);
    let mut worst_gap = 0.0f64;
    for (mu, sigma, nu, tau) in grid[3].1 {
        let p = GamlssParams::new(GamlssFamily::Net, mu, sigma, nu, tau).unwrap();
        for knot in [nu, tau] {
            for sign in [-1.0, 1.0] {
                let x = mu + sign * knot * sigma;
                worst_gap = worst_gap.max((p.pdf(x - 1e-9) - p.pdf(x + 1e-9)).abs());
            }
        }
    }
    let pass = worst_mass < 1e-6 && worst_normal < 1e-12 && worst_gap < 1e-6;
    outcome(
        pass,
        format!(
            "max |mass-1| = {worst_mass:.1e} (tol 1e-6) over 15 records; SHASHo(0,1) vs normal max diff {worst_normal:.1e} (tol 1e-12); NET knot gap {worst_gap:.1e} (tol 1e-6){}",
            if notes.is_empty() { String::new() } else { format!("; {}", notes.join("; ")) }
        ),
    )
}

// ---------------------------------------------------------------- 2, 3

fn catalog() -> Vec<(Family, Vec<f64>)> {
    vec![
        (Family::Independence, vec![]),
        (Family::Gaussian, vec![0.6]),
        (Family::Gaussian, vec![-0.4]),
        (Family::StudentT, vec![0.5, 5.0]),
        (Family::Clayton, vec![2.0]),
        (Family::Gumbel, vec![1.8]),
        (Family::Frank, vec![5.0]),
        (Family::Frank, vec![-3.0]),
        (Family::Joe, vec![2.2]),
        (Family::Bb1, vec![0.6, 1.5]),
        (Family::Bb6, vec![1.5, 1.4]),
        (Family::Bb7, vec![1.6, 0.8]),
        (Family::Bb8, vec![3.0, 0.7]),
        (Family::Tawn1, vec![2.5, 0.6]),
        (Family::Tawn2, vec![2.5, 0.4]),
    ]
}

fn with_rotations(base: &[(Family, Vec<f64>)]) -> Vec<CopulaSpec> {
    let mut out = Vec::new();
    for (f, p) in base {
        let rots = if f.rotatable() { Rotation::ALL.to_vec() } else { vec![Rotation::R0] };
        for r in rots {
            out.push(CopulaSpec::new(*f, r, p).expect("catalog entry is valid"));
        }
    }
    out
}

/// Double integral of the density on normal scores, trapezoid on [-8, 8]^2.
fn copula_mass(s: &CopulaSpec) -> f64 {
    let h = 0.04;
    let n = (16.0 / h) as usize + 1;
    let xs: Vec<f64> = (0..n).map(|i| -8.0 + i as f64 * h).collect();
    let us: Vec<f64> = xs.iter().map(|x| norm_cdf(*x)).collect();
    let ws: Vec<f64> = xs.iter().map(|x| norm_pdf(*x) * h).collect();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += s.pdf(us[i], us[j]) * ws[i] * ws[j];
        }
    }
    total
}

fn criterion_2() -> Outcome {
    let specs = with_rotations(&catalog());
    let families: BTreeSet<&str> = specs.iter().map(|s| s.family.name()).collect();
    let mut worst_mass = (0.0f64, String::new());
    let mut worst_fd = (0.0f64, String::new());
    let mut worst_inv = (0.0f64, String::new());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let step = 1e-5;
    for s in &specs {
        let err = (copula_mass(s) - 1.0).abs();
        if !(err <= worst_mass.0) {
            worst_mass = (err, s.to_string());
        }
        if s.family.has_closed_cdf() {
            for i in 1..10 {
                for j in 1..10 {
                    let (u, v) = (0.1 * i as f64, 0.1 * j as f64 - 0.03);
                    let c = |a: f64, b: f64| s.cdf(a, b).expect("closed cdf");
                    let dv = (c(u, v + step) - c(u, v - step)) / (2.0 * step);
                    let du = (c(u + step, v) - c(u - step, v)) / (2.0 * step);
                    let e = (dv - s.h1(u, v)).abs().max((du - s.h2(u, v)).abs());
                    if !(e <= worst_fd.0) {
                        worst_fd = (e, s.to_string());
                    }
                }
            }
        }
        for _ in 0..1000 {
            let u: f64 = rng.random_range(0.001..0.999);
            let v: f64 = rng.random_range(0.001..0.999);
            let e1 = (s.hinv1(s.h1(u, v), v) - u).abs();
            let e2 = (s.hinv2(s.h2(u, v), u) - v).abs();
            let e = e1.max(e2);
            if !(e <= worst_inv.0) {
                worst_inv = (e, s.to_string());
            }
        }
    }
    let pass = families.len() == 13 && worst_mass.0 < 1e-4 && worst_fd.0 < 1e-6 && worst_inv.0 < 1e-8;
    outcome(
        pass,
        format!(
            "{} families, {} specs; max |mass-1| = {:.1e} [{}] (tol 1e-4); max |h - dC| = {:.1e} [{}] (tol 1e-6); max h-inverse round trip error {:.1e} [{}] (tol 1e-8)",
            families.len(),
            specs.len(),
            worst_mass.0,
            worst_mass.1,
            worst_fd.0,
            worst_fd.1,
            worst_inv.0,
            worst_inv.1
        ),
    )
}

fn debye1(x: f64) -> f64 {
    let f = |t: f64| if t.abs() < 1e-12 { 1.0 } else { t / t.exp_m1() };
    gauss_legendre(&f, 0.0, x, 0.01) / x
}

/// Closed-form tau where one exists.
fn tau_closed(f: Family, p: &[f64]) -> Option<f64> {
    use std::f64::consts::PI;
    match f {
        Family::Independence => Some(0.0),
        Family::Gaussian | Family::StudentT => Some(2.0 / PI * p[0].asin()),
        Family::Clayton => Some(p[0] / (p[0] + 2.0)),
        Family::Gumbel => Some(1.0 - 1.0 / p[0]),
        Family::Frank => Some(1.0 - 4.0 / p[0] + 4.0 * debye1(p[0]) / p[0]),
        Family::Bb1 => Some(1.0 - 2.0 / (p[1] * (p[0] + 2.0))),
        _ => None,
    }
}

fn criterion_3() -> Outcome {
    let g = CopulaSpec::new(Family::Gaussian, Rotation::R0, &[0.5]).unwrap();
    let exact = (g.kendall_tau() - 1.0 / 3.0).abs();
    let grid: Vec<(Family, Vec<f64>)> = vec![
        (Family::Independence, vec![]),
        (Family::Gaussian, vec![0.3]),
        (Family::Gaussian, vec![-0.8]),
        (Family::StudentT, vec![0.5, 4.0]),
        (Family::StudentT, vec![-0.7, 10.0]),
        (Family::Clayton, vec![0.8]),
        (Family::Clayton, vec![4.0]),
        (Family::Gumbel, vec![1.3]),
        (Family::Gumbel, vec![3.0]),
        (Family::Frank, vec![-6.0]),
        (Family::Frank, vec![2.5]),
        (Family::Joe, vec![1.5]),
        (Family::Joe, vec![4.0]),
        (Family::Bb1, vec![0.4, 1.2]),
        (Family::Bb1, vec![1.5, 2.0]),
        (Family::Bb6, vec![1.2, 1.3]),
        (Family::Bb6, vec![2.0, 2.0]),
        (Family::Bb7, vec![1.3, 0.5]),
        (Family::Bb7, vec![2.5, 2.0]),
        (Family::Bb8, vec![2.0, 0.8]),
        (Family::Bb8, vec![5.0, 0.9]),
        (Family::Tawn1, vec![2.0, 0.5]),
        (Family::Tawn1, vec![5.0, 0.8]),
        (Family::Tawn2, vec![2.0, 0.5]),
        (Family::Tawn2, vec![5.0, 0.8]),
    ];
    let mut worst = (0.0f64, String::new());
    let mut worst_closed = 0.0f64;
    let mut n_specs = 0;
    for (k, (f, p)) in grid.iter().enumerate() {
        let rots = if f.rotatable() { vec![Rotation::R0, Rotation::R90] } else { vec![Rotation::R0] };
        for r in rots {
            let s = CopulaSpec::new(*f, r, p).unwrap();
            n_specs += 1;
            if r == Rotation::R0 {
                if let Some(t) = tau_closed(*f, p) {
                    worst_closed = worst_closed.max((t - s.kendall_tau()).abs());
                }
            }
            let sample = s.sample(10_000, 300 + k as u64);
            let e = (kendall_naive(&sample.u, &sample.v) - s.kendall_tau()).abs();
            if !(e <= worst.0) {
                worst = (e, s.to_string());
            }
        }
    }
    let pass = exact < 1e-15 && worst.0 <= 0.03 && worst_closed < 1e-8;
    outcome(
        pass,
        format!(
            "Gaussian(0.5) tau - 1/3 = {exact:.1e}; closed-form vs library tau max diff {worst_closed:.1e}; n=10000 sampled tau max |err| = {:.4} [{}] over {n_specs} specs (tol 0.03)",
            worst.0, worst.1
        ),
    )
}

// ---------------------------------------------------------------- 4

fn prufer_decode(seq: &[usize], d: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; d];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(d - 1);
    for &s in seq {
        let leaf = (0..d).find(|&i| degree[i] == 1).expect("a leaf exists");
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..d).filter(|&i| degree[i] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges.sort();
    edges
}

/// Maximum total |tau| over all d^(d-2) labelled trees, with the runner-up weight.
fn brute_force_tree(tau: &[Vec<f64>]) -> (Vec<(usize, usize)>, f64, f64) {
    let d = tau.len();
    let len = d - 2;
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut second = f64::NEG_INFINITY;
    for code in 0..d.pow(len as u32) {
        let mut c = code;
        let seq: Vec<usize> = (0..len)
            .map(|_| {
                let s = c % d;
                c /= d;
                s
            })
            .collect();
        let edges = prufer_decode(&seq, d);
        let w: f64 = edges.iter().map(|(a, b)| tau[*a][*b].abs()).sum();
        if w > best.1 {
            second = best.1;
            best = (edges, w);
        } else if w > second {
            second = w;
        }
    }
    (best.0, best.1, second)
}

fn random_gaussian_vine(d: usize, rng: &mut ChaCha8Rng) -> RVineModel {
    let seq: Vec<usize> = (0..d - 2).map(|_| rng.random_range(0..d)).collect();
    let tree = prufer_decode(&seq, d);
    let structure = RVineStructure::from_first_tree(d, &tree).unwrap();
    let pairs = structure
        .trees
        .iter()
        .enumerate()
        .map(|(k, level)| {
            level
                .iter()
                .map(|_| {
                    let mag: f64 = if k == 0 { rng.random_range(0.2..0.85) } else { rng.random_range(0.0..0.3) };
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    CopulaSpec::new(Family::Gaussian, Rotation::R0, &[sign * mag]).unwrap()
                })
                .collect()
        })
        .collect();
    RVineModel::new(default_names(d), structure, pairs).unwrap()
}

fn criterion_4() -> Outcome {
    let config = VineConfig {
        families: vec![Family::Gaussian],
        ..VineConfig::default()
    };
    let mut lines = Vec::new();
    let mut all = true;
    for d in [4usize, 5] {
        let mut hits = 0;
        let mut min_margin = f64::INFINITY;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * d as u64 + seed);
            let truth = random_gaussian_vine(d, &mut rng);
            let data = truth.simulate(400, seed);
            let mut tau = vec![vec![0.0; d]; d];
            for a in 0..d {
                for b in a + 1..d {
                    let t = kendall_naive(&data.columns[a], &data.columns[b]);
                    tau[a][b] = t;
                    tau[b][a] = t;
                }
            }
            let (best, w, second) = brute_force_tree(&tau);
            min_margin = min_margin.min(w - second);
            let fitted = select_structure_and_fit(&data, &config).expect("selection succeeds");
            let mut got: Vec<(usize, usize)> = fitted.structure.trees[0]
                .iter()
                .map(|e| (e.conditioned.0.min(e.conditioned.1), e.conditioned.0.max(e.conditioned.1)))
                .collect();
            got.sort();
            if got == best {
                hits += 1;
            }
        }
        all &= hits == 10;
        lines.push(format!("d={d}: {hits}/10 seeds (smallest best-vs-runner-up margin {min_margin:.1e})"));
    }
    outcome(all, format!("{} (need 10/10 each)", lines.join("; ")))
}

// ---------------------------------------------------------------- 5

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inv3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = det3(m);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r1, r2) = ((j + 1) % 3, (j + 2) % 3);
            let (c1, c2) = ((i + 1) % 3, (i + 2) % 3);
            out[i][j] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    out
}

fn criterion_5() -> Outcome {
    let (r01, r12, r02_1) = (0.6, -0.4, 0.3);
    let structure = RVineStructure::from_first_tree(3, &[(0, 1), (1, 2)]).unwrap();
    let g = |r: f64| CopulaSpec::new(Family::Gaussian, Rotation::R0, &[r]).unwrap();
    let first: Vec<CopulaSpec> = structure.trees[0]
        .iter()
        .map(|e| if e.conditioned == (0, 1) || e.conditioned == (1, 0) { g(r01) } else { g(r12) })
        .collect();
    let vine = RVineModel::new(default_names(3), structure, vec![first, vec![g(r02_1)]]).unwrap();
    let r02 = r02_1 * ((1.0 - r01 * r01) * (1.0 - r12 * r12)).sqrt() + r01 * r12;
    let r = [[1.0, r01, r02], [r01, 1.0, r12], [r02, r12, 1.0]];
    let (ri, ln_det) = (inv3(&r), det3(&r).ln());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let u: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..0.99)).collect();
        let z: Vec<f64> = u.iter().map(|p| vinecast_core::numeric::special::norm_ppf(*p)).collect();
        let mut quad = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                quad += z[i] * (ri[i][j] - id) * z[j];
            }
        }
        let analytic = -0.5 * ln_det - 0.5 * quad;
        worst = worst.max((vine.log_density(&u) - analytic).abs());
    }
    outcome(worst < 1e-8, format!("max |vine - analytic| log-density = {worst:.1e} at 50 points (tol 1e-8)"))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let first: [((usize, usize), Family, f64); 4] = [
        ((0, 1), Family::Gaussian, 0.6),
        ((1, 2), Family::Clayton, 0.5),
        ((1, 3), Family::Gumbel, 0.55),
        ((3, 4), Family::Frank, 0.45),
    ];
    let edges: Vec<(usize, usize)> = first.iter().map(|e| e.0).collect();
    let structure = RVineStructure::from_first_tree(5, &edges).unwrap();
    let pairs: Vec<Vec<CopulaSpec>> = structure
        .trees
        .iter()
        .enumerate()
        .map(|(k, level)| {
            level
                .iter()
                .enumerate()
                .map(|(i, e)| match k {
                    0 => {
                        let (_, f, t) = first.iter().find(|x| x.0 == e.conditioned).unwrap();
                        let p = if *f == Family::Gaussian {
                            (t * std::f64::consts::FRAC_PI_2).sin()
                        } else {
                            tau_to_param(*f, *t).unwrap()
                        };
                        CopulaSpec::new(*f, Rotation::R0, &[p]).unwrap()
                    }
                    1 if i == 0 => CopulaSpec::new(Family::Gaussian, Rotation::R0, &[0.15]).unwrap(),
                    _ => CopulaSpec::independence(),
                })
                .collect()
        })
        .collect();
    let truth = RVineModel::new(default_names(5), structure, pairs).unwrap();
    let data = truth.simulate(20_000, 6);
    let fitted = select_structure_and_fit(&data, &VineConfig::default()).expect("fit succeeds");
    let mut tau_ok = 0;
    let mut fam_ok = 0;
    let mut parts = Vec::new();
    for ((a, b), fam, t) in first {
        let edge = fitted.structure.trees[0]
            .iter()
            .zip(&fitted.pairs[0])
            .find(|(e, _)| (e.conditioned.0.min(e.conditioned.1), e.conditioned.0.max(e.conditioned.1)) == (a, b));
        match edge {
            Some((_, spec)) => {
                let err = (spec.kendall_tau() - t).abs();
                tau_ok += usize::from(err <= 0.05);
                fam_ok += usize::from(spec.family == fam && spec.rotation == Rotation::R0);
                parts.push(format!("({a},{b}) {fam}->{spec} tau {:.3} vs {t}", spec.kendall_tau()));
            }
            None => parts.push(format!("({a},{b}) missing from refitted tree")),
        }
    }
    outcome(
        tau_ok == 4 && fam_ok >= 3,
        format!(
            "tau within 0.05 on {tau_ok}/4 edges, family re-selected on {fam_ok}/4 (need 4/4 and 3/4): {}",
            parts.join("; ")
        ),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let order = ArimaGarchOrder::new(1, 0, 1, 1, 1).unwrap();
    let truth = ArimaGarchModel::from_params(order, 0.5, vec![0.6], vec![0.3], 0.1, vec![0.1], vec![0.8], 6.0).unwrap();
    let mut good = 0;
    let mut worst = Vec::new();
    for seed in 0..5u64 {
        let x = truth.simulate(3000, 70 + seed);
        let m = match fit_arima_garch(&x, &ArimaGarchFitConfig::new(order)) {
            Ok(m) => m,
            Err(e) => {
                worst.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let coef_err = [
            (m.a - truth.a).abs(),
            (m.phi[0] - truth.phi[0]).abs(),
            (m.theta[0] - truth.theta[0]).abs(),
            (m.omega - truth.omega).abs(),
            (m.alpha[0] - truth.alpha[0]).abs(),
            (m.beta[0] - truth.beta[0]).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        let df_err = (m.df - truth.df).abs();
        if coef_err <= 0.1 && df_err <= 1.5 {
            good += 1;
        }
        worst.push(format!("seed {seed}: coef {coef_err:.3}, df {df_err:.2}"));
    }
    outcome(
        good >= 4,
        format!("{good}/5 seeds within tolerance (coef 0.1, df 1.5; need 4): {}", worst.join(", ")),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let cases: Vec<(&str, f64, f64)> = vec![
        ("MSE([3,4],[3,4])", mse(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0),
        ("MSE([0,0],[1,1])", mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0),
        ("MSE([1,2,3],[2,2,2])", mse(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 2.0 / 3.0),
        ("MIS([10,20], 15)", mis(&[15.0], &[10.0], &[20.0], 0.05).unwrap(), 10.0),
        ("MIS([10,20], 25)", mis(&[25.0], &[10.0], &[20.0], 0.05).unwrap(), 210.0),
        ("MIS([10,20], 5)", mis(&[5.0], &[10.0], &[20.0], 0.05).unwrap(), 210.0),
    ];
    let mut bad: Vec<String> = cases
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(n, got, want)| format!("{n} = {got}, expected {want}"))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let lo: f64 = rng.random_range(-100.0..100.0);
        let w: f64 = rng.random_range(0.0..50.0);
        let d: f64 = rng.random_range(0.0..30.0);
        let alpha: f64 = rng.random_range(0.01..0.5);
        let above = interval_score(lo + w + d, lo, lo + w, alpha).unwrap();
        let below = interval_score(lo - d, lo, lo + w, alpha).unwrap();
        let want = w + 2.0 / alpha * d;
        if (above - below).abs() > 1e-9 * want.max(1.0) || (above - want).abs() > 1e-9 * want.max(1.0) {
            bad.push(format!("breach asymmetry at lo={lo}, w={w}, d={d}"));
            break;
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} unit cases exact; breach symmetry on 1000 random intervals", cases.len())
        } else {
            bad.join("; ")
        },
    )
}

// ---------------------------------------------------------------- 9

fn bundled_frame() -> TimeSeriesFrame {
    let dir = data_dir().join("synthetic");
    let schema = IngestSchema::load(&dir.join("schema.json")).expect("bundled schema");
    let raw = load_dataset(&dir.join("synthetic.csv"), &schema).expect("bundled data");
    align_and_validate_with(&convert_cumulative(&raw).unwrap(), 30).unwrap()
}

fn criterion_9() -> Outcome {
    let frame = bundled_frame();
    let spec = synthetic::joint_spec();
    let coupled = synthetic::covid_like().unwrap().coupled;
    let split = parse_iso_date(SPLIT_DATE).unwrap();
    let variants = VineVariant::ALL;
    let full = variants.iter().position(|v| *v == VineVariant::Full).unwrap();
    let indep = variants.iter().position(|v| *v == VineVariant::Independent).unwrap();
    let (mut winning_seeds, mut hits, mut total) = (0, 0usize, 0usize);
    let mut tallies = Vec::new();
    for seed in 1..=10u64 {
        let opts = BacktestOptions {
            seed,
            ..BacktestOptions::new(split, 30)
        };
        let cmp = match compare_variants(&frame, &spec, &opts, &variants) {
            Ok(c) => c,
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        };
        let r = &cmp.report;
        let wins = coupled
            .iter()
            .filter(|n| {
                let i = r.variables.iter().position(|v| v == *n).unwrap();
                r.mse[i][full] < r.mse[i][indep]
            })
            .count();
        if 2 * wins > coupled.len() {
            winning_seeds += 1;
        }
        tallies.push(format!("{wins}/{}", coupled.len()));
        let bt = &cmp.backtests[full];
        for i in 0..frame.n_cols() {
            let cov = bt.coverage(i).unwrap();
            hits += (cov * bt.forecasts.len() as f64).round() as usize;
            total += bt.forecasts.len();
        }
    }
    let coverage = hits as f64 / total as f64;
    let pass = winning_seeds >= 7 && (0.88..=0.99).contains(&coverage);
    outcome(
        pass,
        format!(
            "full beats independence on a majority of the {} coupled variables in {winning_seeds}/10 seeds (need 7; per-seed wins {}); pooled 95% coverage {:.3} (need [0.88, 0.99])",
            coupled.len(),
            tallies.join(" "),
            coverage
        ),
    )
}

// ---------------------------------------------------------------- 10

#[derive(Deserialize)]
struct Record {
    variable: String,
    order: [usize; 5],
    a: f64,
    phi: Vec<f64>,
    theta: Vec<f64>,
    omega: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    df: f64,
}

fn criterion_10() -> Outcome {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/arima_garch_records.json")).unwrap();
    let records: Vec<Record> = serde_json::from_str(&text).expect("fixture parses");
    let frame = bundled_frame();
    let mut problems = Vec::new();
    let mut notes = Vec::new();
    for r in &records {
        let o = r.order;
        let model = ArimaGarchOrder::new(o[0], o[1], o[2], o[3], o[4]).and_then(|order| {
            ArimaGarchModel::from_params(order, r.a, r.phi.clone(), r.theta.clone(), r.omega, r.alpha.clone(), r.beta.clone(), r.df)
        });
        let model = match model {
            Ok(m) => m,
            Err(e) => {
                problems.push(format!("{} failed to load: {e}", r.variable));
                continue;
            }
        };
        let history = frame.column(&r.variable).unwrap();
        let ll = model.loglik_of(history);
        let step = model.one_step(history);
        let finite = match (&ll, &step) {
            (Ok(ll), Ok(s)) => ll.is_finite() && [0.025, 0.5, 0.975].iter().all(|u| s.quantile(*u).is_finite()),
            _ => false,
        };
        if !finite {
            problems.push(format!("{}: non-finite log-density or forecast", r.variable));
        }
        let warnings = model.stability_warnings();
        let near_unit = r.phi.iter().any(|p| (p.abs() - 1.0).abs() < 1e-4);
        if near_unit && !warnings.iter().any(|w| w.contains("unit root")) {
            problems.push(format!("{}: phi near 1 without a warning", r.variable));
        }
        if warnings.is_empty() {
            problems.push(format!("{}: no stability warning for a near-unit-root record", r.variable));
        }
        notes.push(format!("{}: {} warning(s)", r.variable, warnings.len()));
    }
    outcome(
        problems.is_empty() && records.len() == 3,
        if problems.is_empty() {
            format!("Cases, Hospital, VirusTests load with finite log-densities and one-step quantiles; {}", notes.join(", "))
        } else {
            problems.join("; ")
        },
    )
}

// ---------------------------------------------------------------- 11

fn criterion_11() -> Outcome {
    let dir = data_dir().join("sentiment");
    let bing = Lexicon::load(&dir.join("bing_sample.tsv"), LexiconKind::Binary).unwrap();
    let afinn = Lexicon::load(&dir.join("afinn_sample.tsv"), LexiconKind::Scored).unwrap();
    let batches = load_corpus(&dir.join("tweets.csv"), false).unwrap();
    let n_docs: usize = batches.iter().map(|b| b.documents.len()).sum();
    let totals = |lex: &Lexicon| -> Vec<f64> {
        daily_scores(&batches, lex, Aggregation::Sum)
            .unwrap()
            .iter()
            .map(|d| d.score.unwrap())
            .collect()
    };
    // tallied by hand from the fixture files
    let (bing_hand, afinn_hand) = (vec![1.0, -1.0, -1.0, 1.0], vec![-3.0, -7.0, -2.0, -2.0]);
    let (bing_got, afinn_got) = (totals(&bing), totals(&afinn));
    let fixture_ok = n_docs == 20 && bing_got == bing_hand && afinn_got == afinn_hand;

    let words: Vec<String> = std::fs::read_to_string(dir.join("bing_sample.tsv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split('\t').next().unwrap().to_string())
        .chain(["the", "and", "vaccine", "today"].map(String::from))
        .collect();
    let scored = bing.as_scored();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let len = rng.random_range(0..40);
        let tokens: Vec<&str> = (0..len).map(|_| words[rng.random_range(0..words.len())].as_str()).collect();
        let b = score_binary(&tokens, &bing).unwrap();
        let w = score_weighted(&tokens, &scored).unwrap();
        let polarity: i64 = tokens.iter().filter_map(|t| bing.get(t)).map(i64::from).sum();
        if b != w || b != polarity {
            mismatches += 1;
        }
    }
    outcome(
        fixture_ok && mismatches == 0,
        format!(
            "{n_docs} tweets; Bing daily {bing_got:?} (hand {bing_hand:?}), Afinn daily {afinn_got:?} (hand {afinn_hand:?}); binary vs weighted mismatches on 1000 token lists: {mismatches}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, f64, fn() -> Outcome); 11] = [
        ("distribution correctness", 10.0, criterion_1),
        ("copula catalog", 60.0, criterion_2),
        ("tau consistency", 60.0, criterion_3),
        ("structure selection oracle", 30.0, criterion_4),
        ("vine density oracle", f64::INFINITY, criterion_5),
        ("simulate-refit recovery", 300.0, criterion_6),
        ("ARIMA-GARCH recovery", 120.0, criterion_7),
        ("metric arithmetic", f64::INFINITY, criterion_8),
        ("end-to-end synthetic benchmark", 600.0, criterion_9),
        ("fixture sanity", f64::INFINITY, criterion_10),
        ("sentiment determinism", f64::INFINITY, criterion_11),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut passed = 0;
    let mut ran = 0;
    for (i, (title, limit, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|k| k != n) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let in_time = secs <= *limit;
        let pass = out.pass && in_time;
        passed += usize::from(pass);
        let budget = if limit.is_finite() { format!(", limit {limit:.0} s") } else { String::new() };
        println!(
            "{} criterion {n:>2} {title}: {} [{secs:.1} s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    println!("acceptance: {passed}/{ran} criteria passed");
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1");
    if passed == ran || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
