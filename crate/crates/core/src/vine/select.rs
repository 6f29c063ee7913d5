//! Dissmann's sequential maximum-spanning-tree selection.

use std::collections::HashMap;

use rayon::prelude::*;

use super::structure::{share_node, MAX_DIM};
use super::{edge_values, lookup, EdgeValues, PseudoMatrix, RVineModel, RVineStructure, VineConfig, VineEdge};
use crate::copulas::fit::{select_with_tau, MIN_PAIRS};
use crate::copulas::kendall_tau_pairs;
use crate::error::{Error, Result};

struct Candidate {
    nodes: (usize, usize),
    conditioned: (usize, usize),
    conditioning: Vec<usize>,
    tau: f64,
}

impl Candidate {
    fn edge(&self) -> VineEdge {
        VineEdge {
            conditioned: self.conditioned,
            conditioning: self.conditioning.clone(),
            nodes: self.nodes,
        }
    }
}

/// Prim's algorithm on weight `-|tau|`; ties go to the smallest conditioned
/// pair, then the smallest conditioning set.
fn prim(n_nodes: usize, cands: &[Candidate]) -> Result<Vec<usize>> {
    let mut in_tree = vec![false; n_nodes];
    in_tree[0] = true;
    let mut chosen = Vec::with_capacity(n_nodes - 1);
    for _ in 1..n_nodes {
        let mut best: Option<usize> = None;
        for (ci, c) in cands.iter().enumerate() {
            if in_tree[c.nodes.0] == in_tree[c.nodes.1] {
                continue;
            }
            best = match best {
                None => Some(ci),
                Some(bi) => {
                    let b = &cands[bi];
                    let key = |x: &Candidate| (-x.tau.abs(), x.conditioned, x.conditioning.clone());
                    let (kc, kb) = (key(c), key(b));
                    if kc.0 < kb.0 || (kc.0 == kb.0 && (kc.1, &kc.2) < (kb.1, &kb.2)) {
                        Some(ci)
                    } else {
                        Some(bi)
                    }
                }
            };
        }
        let bi = best.ok_or_else(|| Error::Numeric("candidate graph is disconnected".into()))?;
        in_tree[cands[bi].nodes.0] = true;
        in_tree[cands[bi].nodes.1] = true;
        chosen.push(bi);
    }
    Ok(chosen)
}

fn check_data(data: &PseudoMatrix) -> Result<()> {
    let d = data.dim();
    if d < 2 || d > MAX_DIM {
        return Err(Error::Argument(format!("vine dimension {d} outside 2..={MAX_DIM}")));
    }
    let n = data.n_obs();
    if n < MIN_PAIRS {
        return Err(Error::InsufficientData { have: n, need: MIN_PAIRS });
    }
    for (name, col) in data.names.iter().zip(&data.columns) {
        let wrap = |e: Error| Error::Variable {
            variable: name.clone(),
            source: Box::new(e),
        };
        if col.iter().any(|x| !(x.is_finite() && *x > 0.0 && *x < 1.0)) {
            return Err(wrap(Error::Argument("pseudo-observations must lie strictly inside (0, 1)".into())));
        }
        if col.iter().all(|x| *x == col[0]) {
            return Err(wrap(Error::Degenerate("constant pseudo-observation column".into())));
        }
    }
    Ok(())
}

/// Select an R-vine tree by tree and fit a pair copula on every edge.
pub fn select_structure_and_fit(data: &PseudoMatrix, config: &VineConfig) -> Result<RVineModel> {
    check_data(data)?;
    let config = config.restrict();
    if config.families.is_empty() {
        return Err(Error::Config("empty candidate family set".into()));
    }
    let d = data.dim();
    let cols = &data.columns;
    let mut trees: Vec<Vec<VineEdge>> = Vec::with_capacity(d - 1);
    let mut pairs = Vec::with_capacity(d - 1);
    let mut vals: Vec<Vec<EdgeValues>> = Vec::with_capacity(d - 1);
    let mut index: HashMap<u64, (usize, usize)> = HashMap::new();

    for k in 0..d - 1 {
        let mut cands = Vec::new();
        if k == 0 {
            for a in 0..d {
                for b in a + 1..d {
                    cands.push(((a, b), (a, b), Vec::new()));
                }
            }
        } else {
            let prev = &trees[k - 1];
            for p in 0..prev.len() {
                for q in p + 1..prev.len() {
                    if !share_node(&prev[p], &prev[q]) {
                        continue;
                    }
                    let (f1, f2) = (prev[p].full_mask(), prev[q].full_mask());
                    let diff = RVineStructure::conditioning_vars(f1 ^ f2);
                    let cond = RVineStructure::conditioning_vars(f1 & f2);
                    cands.push(((p, q), (diff[0], diff[1]), cond));
                }
            }
        }
        let cands: Vec<Candidate> = cands
            .into_iter()
            .map(|(nodes, (a, b), cond)| {
                let cm = super::var_mask(&cond);
                let x = lookup(a, cm, cols, &trees, &vals, &index);
                let y = lookup(b, cm, cols, &trees, &vals, &index);
                let tau = kendall_tau_pairs(x, y).map_err(|e| {
                    Error::Selection(format!(
                        "edge {}: {e}",
                        VineEdge { conditioned: (a, b), conditioning: cond.clone(), nodes }.label(&data.names)
                    ))
                })?;
                Ok(Candidate {
                    nodes,
                    conditioned: (a, b),
                    conditioning: cond,
                    tau,
                })
            })
            .collect::<Result<_>>()?;
        let n_nodes = if k == 0 { d } else { trees[k - 1].len() };
        let mut chosen: Vec<&Candidate> = prim(n_nodes, &cands)?.into_iter().map(|i| &cands[i]).collect();
        chosen.sort_by(|x, y| (x.conditioned, &x.conditioning).cmp(&(y.conditioned, &y.conditioning)));

        let fitted: Vec<Result<_>> = chosen
            .par_iter()
            .map(|c| {
                let edge = c.edge();
                let cm = edge.conditioning_mask();
                let x = lookup(c.conditioned.0, cm, cols, &trees, &vals, &index);
                let y = lookup(c.conditioned.1, cm, cols, &trees, &vals, &index);
                let spec = select_with_tau(x, y, &config.candidates(c.tau), config.criterion, c.tau)
                    .map_err(|e| Error::Selection(format!("edge {}: {e}", edge.label(&data.names))))?;
                let ev = edge_values(&spec, x, y);
                Ok((edge, spec, ev))
            })
            .collect();
        let mut level_edges = Vec::with_capacity(chosen.len());
        let mut level_specs = Vec::with_capacity(chosen.len());
        let mut level_vals = Vec::with_capacity(chosen.len());
        for (i, f) in fitted.into_iter().enumerate() {
            let (edge, spec, ev) = f?;
            index.insert(edge.full_mask(), (k, i));
            level_edges.push(edge);
            level_specs.push(spec);
            level_vals.push(ev);
        }
        trees.push(level_edges);
        pairs.push(level_specs);
        vals.push(level_vals);
    }

    let structure = RVineStructure { dim: d, trees };
    let loglik = pairs
        .iter()
        .flatten()
        .map(|s: &crate::copulas::CopulaSpec| s.stats.as_ref().map_or(0.0, |st| st.loglik))
        .sum();
    let mut model = RVineModel::new(data.names.clone(), structure, pairs)?;
    model.variant = config.variant;
    model.loglik = loglik;
    model.n_obs = data.n_obs();
    Ok(model)
}
