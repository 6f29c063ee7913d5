//! Regular-vine tree sequences and their lower-triangular matrix encoding.
//!
//! Matrix convention: a `d x d` lower-triangular array with 1-based variable
//! labels and zeros above the diagonal. Column `c` holds the diagonal variable
//! `m[c][c]`; each entry `m[r][c]` with `r > c` is the edge whose conditioned
//! pair is `{m[c][c], m[r][c]}` and whose conditioning set is
//! `{m[r+1][c], ..., m[d-1][c]}`. The last row encodes the first tree.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 64;

pub fn var_mask(vars: &[usize]) -> u64 {
    vars.iter().fold(0u64, |m, v| m | (1u64 << v))
}

fn mask_vars(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask & (1u64 << i) != 0).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VineEdge {
    /// Ordered conditioned pair; the pair copula takes arguments in this order.
    pub conditioned: (usize, usize),
    /// Sorted conditioning set.
    pub conditioning: Vec<usize>,
    /// Indices of the joined nodes in the previous tree (variables for tree 1).
    pub nodes: (usize, usize),
}

impl VineEdge {
    pub fn tree(&self) -> usize {
        self.conditioning.len()
    }

    pub fn full_mask(&self) -> u64 {
        var_mask(&self.conditioning) | (1u64 << self.conditioned.0) | (1u64 << self.conditioned.1)
    }

    pub fn conditioning_mask(&self) -> u64 {
        var_mask(&self.conditioning)
    }

    pub fn label(&self, names: &[String]) -> String {
        let name = |i: usize| names.get(i).cloned().unwrap_or_else(|| i.to_string());
        let mut s = format!("{},{}", name(self.conditioned.0), name(self.conditioned.1));
        if !self.conditioning.is_empty() {
            let c: Vec<String> = self.conditioning.iter().map(|i| name(*i)).collect();
            s.push_str(&format!(";{}", c.join(",")));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RVineStructure {
    pub dim: usize,
    pub trees: Vec<Vec<VineEdge>>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut j = i;
        while self.0[j] != r {
            let next = self.0[j];
            self.0[j] = r;
            j = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

/// Whether two edges of the same tree share a node, i.e. may be joined in the next tree.
pub(crate) fn share_node(e1: &VineEdge, e2: &VineEdge) -> bool {
    let (a, b) = e1.nodes;
    let (c, d) = e2.nodes;
    a == c || a == d || b == c || b == d
}

impl RVineStructure {
    /// Check the tree sequence: spanning trees at every level, consistent
    /// conditioned and conditioning sets, and the proximity condition.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        if d < 2 || d > MAX_DIM {
            return Err(Error::Argument(format!("vine dimension {d} outside 2..={MAX_DIM}")));
        }
        if self.trees.len() != d - 1 {
            return Err(Error::Argument(format!("expected {} trees, found {}", d - 1, self.trees.len())));
        }
        for (k, tree) in self.trees.iter().enumerate() {
            if tree.len() != d - 1 - k {
                return Err(Error::Argument(format!("tree {} has {} edges, expected {}", k + 1, tree.len(), d - 1 - k)));
            }
            let n_nodes = if k == 0 { d } else { self.trees[k - 1].len() };
            let mut uf = UnionFind::new(n_nodes);
            for e in tree {
                let (p, q) = e.nodes;
                if p >= n_nodes || q >= n_nodes || p == q {
                    return Err(Error::Argument(format!("tree {} edge {:?} has invalid nodes", k + 1, e.nodes)));
                }
                if e.conditioning.len() != k || e.conditioning.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Argument(format!("tree {} edge has malformed conditioning set", k + 1)));
                }
                let (full, cond) = if k == 0 {
                    if (p.min(q), p.max(q)) != (e.conditioned.0.min(e.conditioned.1), e.conditioned.0.max(e.conditioned.1)) {
                        return Err(Error::Argument("first-tree edge nodes differ from its conditioned pair".into()));
                    }
                    (var_mask(&[p, q]), 0u64)
                } else {
                    let prev = &self.trees[k - 1];
                    if !share_node(&prev[p], &prev[q]) {
                        return Err(Error::Argument(format!(
                            "proximity condition violated in tree {} by edge {:?}",
                            k + 1,
                            e.conditioned
                        )));
                    }
                    let (f1, f2) = (prev[p].full_mask(), prev[q].full_mask());
                    (f1 | f2, f1 & f2)
                };
                let (a, b) = e.conditioned;
                if a == b || a >= d || b >= d {
                    return Err(Error::Argument(format!("invalid conditioned pair {:?}", e.conditioned)));
                }
                if full != e.full_mask() || cond != e.conditioning_mask() || (full ^ cond).count_ones() != 2 {
                    return Err(Error::Argument(format!(
                        "tree {} edge {:?} disagrees with the nodes it joins",
                        k + 1,
                        e.conditioned
                    )));
                }
                if !uf.union(p, q) {
                    return Err(Error::Argument(format!("tree {} contains a cycle", k + 1)));
                }
            }
        }
        Ok(())
    }

    /// Map from an edge's full variable set to its (tree, index).
    pub fn full_index(&self) -> HashMap<u64, (usize, usize)> {
        let mut out = HashMap::new();
        for (t, tree) in self.trees.iter().enumerate() {
            for (i, e) in tree.iter().enumerate() {
                out.insert(e.full_mask(), (t, i));
            }
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        self.trees.iter().map(Vec::len).sum()
    }

    /// Encode the tree sequence as an R-vine matrix.
    pub fn matrix(&self) -> Result<Vec<Vec<usize>>> {
        let d = self.dim;
        let mut m = vec![vec![0usize; d]; d];
        let mut used: Vec<Vec<bool>> = self.trees.iter().map(|t| vec![false; t.len()]).collect();
        let mut placed = vec![false; d];
        for c in 0..d - 1 {
            let top = d - 2 - c;
            let remaining: Vec<usize> = (0..self.trees[top].len()).filter(|i| !used[top][*i]).collect();
            if remaining.len() != 1 {
                return Err(Error::Argument("tree sequence is not a regular vine".into()));
            }
            let a = self.trees[top][remaining[0]].conditioned.0;
            m[c][c] = a + 1;
            placed[a] = true;
            for r in c + 1..d {
                let t = d - 1 - r;
                let hits: Vec<usize> = (0..self.trees[t].len())
                    .filter(|i| {
                        let e = &self.trees[t][*i];
                        !used[t][*i] && (e.conditioned.0 == a || e.conditioned.1 == a)
                    })
                    .collect();
                if hits.len() != 1 {
                    return Err(Error::Argument("tree sequence is not a regular vine".into()));
                }
                let e = &self.trees[t][hits[0]];
                let other = if e.conditioned.0 == a { e.conditioned.1 } else { e.conditioned.0 };
                m[r][c] = other + 1;
                used[t][hits[0]] = true;
            }
        }
        let last = (0..d).find(|v| !placed[*v]).expect("one variable left");
        m[d - 1][d - 1] = last + 1;
        Ok(m)
    }

    /// Decode an R-vine matrix; decoded edges take the diagonal variable as
    /// their second argument.
    pub fn from_matrix(m: &[Vec<usize>]) -> Result<RVineStructure> {
        let d = m.len();
        if d < 2 || d > MAX_DIM || m.iter().any(|row| row.len() != d) {
            return Err(Error::Argument("R-vine matrix must be square with dimension 2..=64".into()));
        }
        let mut diag: Vec<usize> = (0..d).map(|i| m[i][i]).collect();
        diag.sort_unstable();
        if diag != (1..=d).collect::<Vec<_>>() {
            return Err(Error::Argument("R-vine matrix diagonal must be a permutation of 1..=d".into()));
        }
        let mut trees: Vec<Vec<VineEdge>> = vec![Vec::new(); d - 1];
        for c in 0..d - 1 {
            for r in c + 1..d {
                if m[r][c] == 0 || m[r][c] > d {
                    return Err(Error::Argument(format!("R-vine matrix entry ({r},{c}) out of range")));
                }
                let a = m[c][c] - 1;
                let b = m[r][c] - 1;
                let mut cond: Vec<usize> = m[r + 1..d].iter().map(|row| row[c] - 1).collect();
                cond.sort_unstable();
                trees[d - 1 - r].push(VineEdge {
                    conditioned: (b, a),
                    conditioning: cond,
                    nodes: (0, 0),
                });
            }
        }
        for t in 0..d - 1 {
            trees[t].sort_by(|x, y| (&x.conditioning, x.conditioned).cmp(&(&y.conditioning, y.conditioned)));
            if t == 0 {
                for e in trees[0].iter_mut() {
                    e.nodes = e.conditioned;
                }
                continue;
            }
            let index: HashMap<u64, usize> = trees[t - 1].iter().enumerate().map(|(i, e)| (e.full_mask(), i)).collect();
            for e in trees[t].iter_mut() {
                let cm = e.conditioning_mask();
                let p = index.get(&(cm | (1u64 << e.conditioned.0)));
                let q = index.get(&(cm | (1u64 << e.conditioned.1)));
                match (p, q) {
                    (Some(p), Some(q)) => e.nodes = (*p, *q),
                    _ => return Err(Error::Argument("R-vine matrix violates the proximity condition".into())),
                }
            }
        }
        let s = RVineStructure { dim: d, trees };
        s.validate()?;
        Ok(s)
    }

    /// Edges of one tree as (conditioned, conditioning) pairs, unordered within the pair.
    pub fn edge_sets(&self) -> Vec<Vec<((usize, usize), Vec<usize>)>> {
        self.trees
            .iter()
            .map(|tree| {
                let mut v: Vec<_> = tree
                    .iter()
                    .map(|e| {
                        let (a, b) = e.conditioned;
                        ((a.min(b), a.max(b)), e.conditioning.clone())
                    })
                    .collect();
                v.sort();
                v
            })
            .collect()
    }

    /// D-vine on `0 - 1 - ... - (d-1)`.
    pub fn dvine(d: usize) -> Result<RVineStructure> {
        let mut trees = Vec::new();
        for k in 0..d.saturating_sub(1) {
            let mut tree = Vec::new();
            for i in 0..d - 1 - k {
                tree.push(VineEdge {
                    conditioned: (i, i + k + 1),
                    conditioning: (i + 1..i + k + 1).collect(),
                    nodes: (i, i + 1),
                });
            }
            trees.push(tree);
        }
        let s = RVineStructure { dim: d, trees };
        s.validate()?;
        Ok(s)
    }

    /// C-vine with root order `0, 1, ..., d-2`.
    pub fn cvine(d: usize) -> Result<RVineStructure> {
        let mut trees = Vec::new();
        for k in 0..d.saturating_sub(1) {
            let mut tree = Vec::new();
            for j in k + 1..d {
                let nodes = if k == 0 { (0, j) } else { (0, j - k) };
                tree.push(VineEdge {
                    conditioned: (k, j),
                    conditioning: (0..k).collect(),
                    nodes,
                });
            }
            trees.push(tree);
        }
        let s = RVineStructure { dim: d, trees };
        s.validate()?;
        Ok(s)
    }

    /// R-vine with the given first tree; later trees join admissible edge
    /// pairs in lexicographic order (Kruskal with unit weights).
    pub fn from_first_tree(d: usize, edges: &[(usize, usize)]) -> Result<RVineStructure> {
        if d < 2 || d > MAX_DIM || edges.len() != d - 1 {
            return Err(Error::Argument(format!("{} first-tree edges for dimension {d}", edges.len())));
        }
        let mut first: Vec<VineEdge> = Vec::with_capacity(d - 1);
        for &(a, b) in edges {
            if a == b || a.max(b) >= d {
                return Err(Error::Argument(format!("invalid first-tree edge ({a}, {b})")));
            }
            let (a, b) = (a.min(b), a.max(b));
            first.push(VineEdge {
                conditioned: (a, b),
                conditioning: Vec::new(),
                nodes: (a, b),
            });
        }
        let mut spanning = UnionFind::new(d);
        if !first.iter().all(|e| spanning.union(e.conditioned.0, e.conditioned.1)) {
            return Err(Error::Argument("first-tree edges contain a cycle".into()));
        }
        first.sort_by_key(|e| e.conditioned);
        let mut trees = vec![first];
        for _ in 1..d - 1 {
            let prev = trees.last().expect("at least one tree");
            let mut uf = UnionFind::new(prev.len());
            let mut level = Vec::with_capacity(prev.len() - 1);
            for p in 0..prev.len() {
                for q in p + 1..prev.len() {
                    if !share_node(&prev[p], &prev[q]) || !uf.union(p, q) {
                        continue;
                    }
                    let (f1, f2) = (prev[p].full_mask(), prev[q].full_mask());
                    let diff = mask_vars(f1 ^ f2);
                    level.push(VineEdge {
                        conditioned: (diff[0], diff[1]),
                        conditioning: mask_vars(f1 & f2),
                        nodes: (p, q),
                    });
                }
            }
            level.sort_by(|x, y| (x.conditioned, &x.conditioning).cmp(&(y.conditioned, &y.conditioning)));
            trees.push(level);
        }
        let s = RVineStructure { dim: d, trees };
        s.validate()?;
        Ok(s)
    }

    pub(crate) fn conditioning_vars(mask: u64) -> Vec<usize> {
        mask_vars(mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_tree_builder() {
        let s = RVineStructure::from_first_tree(6, &[(2, 0), (2, 1), (2, 3), (3, 4), (4, 5)]).unwrap();
        assert_eq!(s.edge_sets()[0], vec![((0, 2), vec![]), ((1, 2), vec![]), ((2, 3), vec![]), ((3, 4), vec![]), ((4, 5), vec![])]);
        assert_eq!(s.n_edges(), 15);
        assert_eq!(RVineStructure::from_matrix(&s.matrix().unwrap()).unwrap().edge_sets(), s.edge_sets());
        let d = RVineStructure::from_first_tree(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(d.edge_sets(), RVineStructure::dvine(4).unwrap().edge_sets());
        assert!(RVineStructure::from_first_tree(4, &[(0, 1), (1, 2), (0, 2)]).is_err());
        assert!(RVineStructure::from_first_tree(3, &[(0, 1)]).is_err());
    }

    #[test]
    fn dvine_and_cvine_are_valid() {
        for d in 2..=7 {
            RVineStructure::dvine(d).unwrap();
            RVineStructure::cvine(d).unwrap();
        }
    }

    #[test]
    fn matrix_round_trip_preserves_edges() {
        for d in 2..=7 {
            for s in [RVineStructure::dvine(d).unwrap(), RVineStructure::cvine(d).unwrap()] {
                let m = s.matrix().unwrap();
                for (r, row) in m.iter().enumerate() {
                    for (c, x) in row.iter().enumerate() {
                        assert_eq!(*x == 0, c > r);
                    }
                }
                let back = RVineStructure::from_matrix(&m).unwrap();
                assert_eq!(back.edge_sets(), s.edge_sets());
            }
        }
    }

    #[test]
    fn known_dvine_matrix() {
        let m = RVineStructure::dvine(3).unwrap().matrix().unwrap();
        // top edge (0,2;1): diagonal 1, then column entries 3 and 2
        assert_eq!(m, vec![vec![1, 0, 0], vec![3, 2, 0], vec![2, 3, 3]]);
    }

    #[test]
    fn proximity_violation_detected() {
        // tree 1: 0-1, 2-3, 1-2 ; tree 2 joins 0-1 and 2-3 which share nothing
        let t1 = vec![
            VineEdge { conditioned: (0, 1), conditioning: vec![], nodes: (0, 1) },
            VineEdge { conditioned: (2, 3), conditioning: vec![], nodes: (2, 3) },
            VineEdge { conditioned: (1, 2), conditioning: vec![], nodes: (1, 2) },
        ];
        let bad = VineEdge { conditioned: (0, 2), conditioning: vec![1], nodes: (0, 1) };
        let ok = VineEdge { conditioned: (1, 3), conditioning: vec![2], nodes: (1, 2) };
        let t3 = vec![VineEdge { conditioned: (0, 3), conditioning: vec![1, 2], nodes: (0, 1) }];
        let s = RVineStructure { dim: 4, trees: vec![t1, vec![bad, ok], t3] };
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("proximity") || err.contains("disagrees"), "{err}");
    }

    #[test]
    fn cycle_detected() {
        let t1 = vec![
            VineEdge { conditioned: (0, 1), conditioning: vec![], nodes: (0, 1) },
            VineEdge { conditioned: (1, 2), conditioning: vec![], nodes: (1, 2) },
        ];
        let t1b = vec![
            VineEdge { conditioned: (0, 1), conditioning: vec![], nodes: (0, 1) },
            VineEdge { conditioned: (0, 1), conditioning: vec![], nodes: (0, 1) },
        ];
        let t2 = vec![VineEdge { conditioned: (0, 2), conditioning: vec![1], nodes: (0, 1) }];
        assert!(RVineStructure { dim: 3, trees: vec![t1, t2.clone()] }.validate().is_ok());
        assert!(RVineStructure { dim: 3, trees: vec![t1b, t2] }.validate().is_err());
    }
}
