//! Regular-vine copulas: structure selection, sequential pair-copula fitting,
//! joint density and simulation.

mod select;
pub mod structure;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::copulas::{CopulaSpec, Criterion, Family, Rotation};
use crate::error::{Error, Result};
use crate::numeric::rng::{label_key, open_uniform, stream_rng};
use crate::numeric::clamp_unit;

pub use select::select_structure_and_fit;
pub use structure::{var_mask, RVineStructure, VineEdge};

/// Column-oriented matrix of pseudo-observations with variable names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoMatrix {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl PseudoMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<PseudoMatrix> {
        if names.len() != columns.len() {
            return Err(Error::Argument(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(Error::Argument("pseudo-observation columns differ in length".into()));
            }
        }
        Ok(PseudoMatrix { names, columns })
    }

    /// Build from observation rows; variables are named `V1..Vd`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<PseudoMatrix> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Argument("ragged pseudo-observation rows".into()));
        }
        let columns = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        PseudoMatrix::new(default_names(d), columns)
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn n_obs(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_obs()).map(|i| self.row(i)).collect()
    }
}

pub fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("V{i}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VineVariant {
    #[default]
    Full,
    Gaussian,
    Independent,
}

impl VineVariant {
    pub const ALL: [VineVariant; 3] = [VineVariant::Full, VineVariant::Gaussian, VineVariant::Independent];

    pub fn name(self) -> &'static str {
        match self {
            VineVariant::Full => "full",
            VineVariant::Gaussian => "gaussian",
            VineVariant::Independent => "independent",
        }
    }
}

impl FromStr for VineVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<VineVariant> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(VineVariant::Full),
            "gaussian" => Ok(VineVariant::Gaussian),
            "independent" | "independence" => Ok(VineVariant::Independent),
            other => Err(Error::Config(format!(
                "unknown vine variant '{other}' (expected full, gaussian or independent)"
            ))),
        }
    }
}

impl std::fmt::Display for VineVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VineConfig {
    pub variant: VineVariant,
    /// Candidate pair-copula families, before restriction by the variant.
    pub families: Vec<Family>,
    pub criterion: Criterion,
    /// Only try rotations matching the sign of each edge's empirical tau.
    pub rotations_by_sign: bool,
}

impl Default for VineConfig {
    fn default() -> Self {
        VineConfig {
            variant: VineVariant::Full,
            families: Family::ALL.to_vec(),
            criterion: Criterion::Aic,
            rotations_by_sign: true,
        }
    }
}

impl VineConfig {
    pub fn with_variant(variant: VineVariant) -> VineConfig {
        VineConfig {
            variant,
            ..VineConfig::default()
        }
    }

    /// Candidate set reduced according to the variant.
    pub fn restrict(&self) -> VineConfig {
        let families = match self.variant {
            VineVariant::Full => {
                let mut f = self.families.clone();
                f.sort_by_key(|x| x.catalog_index());
                f.dedup();
                f
            }
            VineVariant::Gaussian => vec![Family::Gaussian],
            VineVariant::Independent => vec![Family::Independence],
        };
        VineConfig {
            families,
            ..self.clone()
        }
    }

    /// (family, rotation) candidates for an edge with the given empirical tau.
    pub fn candidates(&self, tau: f64) -> Vec<(Family, Rotation)> {
        let mut out = Vec::new();
        for f in &self.families {
            let rots = if self.rotations_by_sign {
                f.rotations_for_sign(tau >= 0.0)
            } else if f.rotatable() {
                Rotation::ALL.to_vec()
            } else {
                vec![Rotation::R0]
            };
            out.extend(rots.into_iter().map(|r| (*f, r)));
        }
        out
    }
}

/// Parse a variant name and apply the corresponding restriction.
pub fn restrict(config: &VineConfig, variant: &str) -> Result<VineConfig> {
    let variant = VineVariant::from_str(variant)?;
    Ok(VineConfig {
        variant,
        ..config.clone()
    }
    .restrict())
}

/// Conditional distribution values carried by a fitted edge: the first is
/// F(first | second, conditioning), the second F(second | first, conditioning).
#[derive(Debug, Clone, Default)]
pub(crate) struct EdgeValues {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

/// Look up F(var | vars in `cond`), stored on the edge whose full set is
/// `cond` plus `var`; an empty conditioning set returns the raw column.
pub(crate) fn lookup<'a>(
    var: usize,
    cond: u64,
    cols: &'a [Vec<f64>],
    trees: &[Vec<VineEdge>],
    vals: &'a [Vec<EdgeValues>],
    index: &HashMap<u64, (usize, usize)>,
) -> &'a [f64] {
    if cond == 0 {
        return &cols[var];
    }
    let (t, i) = index[&(cond | (1u64 << var))];
    if trees[t][i].conditioned.0 == var {
        &vals[t][i].first
    } else {
        &vals[t][i].second
    }
}

pub(crate) fn edge_values(spec: &CopulaSpec, x: &[f64], y: &[f64]) -> EdgeValues {
    EdgeValues {
        first: x.iter().zip(y).map(|(a, b)| spec.h1(*a, *b)).collect(),
        second: x.iter().zip(y).map(|(a, b)| spec.h2(*a, *b)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RVineModel {
    pub names: Vec<String>,
    pub variant: VineVariant,
    pub structure: RVineStructure,
    /// R-vine matrix of the structure (1-based labels).
    pub matrix: Vec<Vec<usize>>,
    /// Pair copulas, parallel to `structure.trees`.
    pub pairs: Vec<Vec<CopulaSpec>>,
    pub loglik: f64,
    pub n_obs: usize,
}

impl RVineModel {
    /// Assemble a model from a structure and its pair copulas.
    pub fn new(names: Vec<String>, structure: RVineStructure, pairs: Vec<Vec<CopulaSpec>>) -> Result<RVineModel> {
        let matrix = structure.matrix()?;
        let m = RVineModel {
            names,
            variant: VineVariant::Full,
            structure,
            matrix,
            pairs,
            loglik: 0.0,
            n_obs: 0,
        };
        m.validate()?;
        Ok(m)
    }

    /// Every edge the independence copula.
    pub fn independence(names: Vec<String>, structure: RVineStructure) -> Result<RVineModel> {
        let pairs = structure
            .trees
            .iter()
            .map(|t| vec![CopulaSpec::independence(); t.len()])
            .collect();
        let mut m = RVineModel::new(names, structure, pairs)?;
        m.variant = VineVariant::Independent;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.structure.validate()?;
        if self.names.len() != self.structure.dim {
            return Err(Error::Argument(format!(
                "{} names for a {}-dimensional vine",
                self.names.len(),
                self.structure.dim
            )));
        }
        if self.pairs.len() != self.structure.trees.len()
            || self.pairs.iter().zip(&self.structure.trees).any(|(p, t)| p.len() != t.len())
        {
            return Err(Error::Argument("pair copulas do not match the tree sequence".into()));
        }
        for p in self.pairs.iter().flatten() {
            p.validate()?;
        }
        if RVineStructure::from_matrix(&self.matrix)?.edge_sets() != self.structure.edge_sets() {
            return Err(Error::Argument("R-vine matrix disagrees with the tree sequence".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<RVineModel> {
        let m: RVineModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.structure.dim
    }

    /// Pair copulas with their edges, tree by tree.
    pub fn edges(&self) -> impl Iterator<Item = (usize, &VineEdge, &CopulaSpec)> {
        self.structure
            .trees
            .iter()
            .zip(&self.pairs)
            .enumerate()
            .flat_map(|(t, (edges, specs))| edges.iter().zip(specs).map(move |(e, s)| (t, e, s)))
    }

    /// Evaluate every edge on the given columns; returns the edge values and
    /// the summed pair log-densities.
    pub(crate) fn propagate(&self, cols: &[Vec<f64>]) -> (Vec<Vec<EdgeValues>>, f64) {
        let cols: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|x| clamp_unit(*x)).collect()).collect();
        let index = self.structure.full_index();
        let trees = &self.structure.trees;
        let mut vals: Vec<Vec<EdgeValues>> = Vec::with_capacity(trees.len());
        let mut ll = 0.0;
        for (t, tree) in trees.iter().enumerate() {
            let mut level = Vec::with_capacity(tree.len());
            for (i, e) in tree.iter().enumerate() {
                let spec = &self.pairs[t][i];
                let cm = e.conditioning_mask();
                let x = lookup(e.conditioned.0, cm, &cols, trees, &vals, &index);
                let y = lookup(e.conditioned.1, cm, &cols, trees, &vals, &index);
                if spec.family != Family::Independence {
                    ll += spec.loglik(x, y);
                }
                level.push(edge_values(spec, x, y));
            }
            vals.push(level);
        }
        (vals, ll)
    }

    /// Joint copula log-density at one point.
    pub fn log_density(&self, u: &[f64]) -> f64 {
        assert_eq!(u.len(), self.dim(), "point dimension must match the vine");
        let cols: Vec<Vec<f64>> = u.iter().map(|x| vec![*x]).collect();
        self.propagate(&cols).1
    }

    /// Summed log-density over all rows of a pseudo-observation matrix.
    pub fn loglik_of(&self, data: &PseudoMatrix) -> f64 {
        self.propagate(&data.columns).1
    }

    /// Forward Rosenblatt transform of columns into independent uniforms.
    pub fn rosenblatt(&self, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let d = self.dim();
        let (vals, _) = self.propagate(cols);
        let index = self.structure.full_index();
        let trees = &self.structure.trees;
        let clamped: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|x| clamp_unit(*x)).collect()).collect();
        let mut w = vec![Vec::new(); d];
        for c in 0..d {
            let a = self.matrix[c][c] - 1;
            let later: Vec<usize> = (c + 1..d).map(|j| self.matrix[j][j] - 1).collect();
            w[a] = lookup(a, var_mask(&later), &clamped, trees, &vals, &index).to_vec();
        }
        w
    }

    /// Inverse Rosenblatt transform: map independent uniforms (one column per
    /// variable) to a sample from the vine.
    pub fn simulate_with_uniforms(&self, w: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let d = self.dim();
        assert_eq!(w.len(), d, "one uniform column per variable");
        let n = w[0].len();
        let m = &self.matrix;
        let trees = &self.structure.trees;
        let index = self.structure.full_index();
        let mut u: Vec<Vec<f64>> = vec![Vec::new(); d];
        let mut vals: Vec<Vec<EdgeValues>> = trees.iter().map(|t| vec![EdgeValues::default(); t.len()]).collect();
        for c in (0..d).rev() {
            let a = m[c][c] - 1;
            let mut x: Vec<f64> = w[a].iter().map(|v| clamp_unit(*v)).collect();
            if c == d - 1 {
                u[a] = x;
                continue;
            }
            // (edge location, F(a | b, D), F(b | D)) per row, top tree first
            let mut steps: Vec<((usize, usize), Vec<f64>, Vec<f64>)> = Vec::with_capacity(d - 1 - c);
            for r in c + 1..d {
                let b = m[r][c] - 1;
                let cond: Vec<usize> = (r + 1..d).map(|j| m[j][c] - 1).collect();
                let cm = var_mask(&cond);
                let (t, i) = index[&(cm | (1u64 << a) | (1u64 << b))];
                let spec = &self.pairs[t][i];
                let a_first = trees[t][i].conditioned.0 == a;
                let y = lookup(b, cm, &u, trees, &vals, &index).to_vec();
                let next: Vec<f64> = (0..n)
                    .map(|k| {
                        if a_first {
                            spec.hinv1(x[k], y[k])
                        } else {
                            spec.hinv2(x[k], y[k])
                        }
                    })
                    .collect();
                steps.push(((t, i), std::mem::replace(&mut x, next), y));
            }
            u[a] = x;
            // fill the conditional values of this column's edges
            for s in (0..steps.len()).rev() {
                let ((t, i), ref given_b, ref y) = steps[s];
                let x_a: &[f64] = if s + 1 < steps.len() { &steps[s + 1].1 } else { &u[a] };
                let spec = &self.pairs[t][i];
                let ev = if trees[t][i].conditioned.0 == a {
                    EdgeValues {
                        first: given_b.clone(),
                        second: x_a.iter().zip(y).map(|(p, q)| spec.h2(*p, *q)).collect(),
                    }
                } else {
                    EdgeValues {
                        first: y.iter().zip(x_a).map(|(p, q)| spec.h1(*p, *q)).collect(),
                        second: given_b.clone(),
                    }
                };
                vals[t][i] = ev;
            }
        }
        u
    }

    /// Draw `m` points; deterministic per seed. Returns one column per variable.
    pub fn simulate(&self, m: usize, seed: u64) -> PseudoMatrix {
        let mut rng = stream_rng(seed, &[label_key("vine-simulate")]);
        let d = self.dim();
        let mut w = vec![Vec::with_capacity(m); d];
        for _ in 0..m {
            for col in w.iter_mut() {
                col.push(open_uniform(&mut rng));
            }
        }
        PseudoMatrix {
            names: self.names.clone(),
            columns: self.simulate_with_uniforms(&w),
        }
    }

    /// Human-readable listing of every tree with family and Kendall's tau.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (t, (edges, specs)) in self.structure.trees.iter().zip(&self.pairs).enumerate() {
            let _ = writeln!(out, "Tree {}", t + 1);
            for (e, s) in edges.iter().zip(specs) {
                let _ = writeln!(out, "  {:<32} {:<28} tau = {:+.3}", e.label(&self.names), s.to_string(), s.kendall_tau());
            }
        }
        out
    }
}
