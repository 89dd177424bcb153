//! Multipartite graph view of a reduced MILP.
//!
//! One vertex group per variable group (W0 = interdictions, W1.. = dual
//! variables) plus one constraint group V. Edges only join a variable vertex
//! to a constraint vertex and carry the constraint coefficient.
//!
//! Variable features: `[objective, lower, upper, is_binary, degree]`.
//! Constraint features: `[rhs, relation (-1 <=, 0 =, +1 >=), tag (dual 0,
//! budget 1, other 2), degree]`. Both are followed by `random_dim` i.i.d.
//! uniform `[0, 1)` columns drawn from the construction seed (variable groups
//! in order, then constraints, row by row).

pub mod wl;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduction::{MilpInstance, VarKind};
use crate::rng;

pub const VAR_BASE_FEATURES: usize = 5;
pub const CONSTRAINT_BASE_FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub group: usize,
    pub var: usize,
    pub constraint: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmilpGraph {
    /// Feature rows per variable group, W0 first.
    pub var_features: Vec<Array2<f64>>,
    pub constraint_features: Array2<f64>,
    pub edges: Vec<GraphEdge>,
    pub random_dim: usize,
}

impl MmilpGraph {
    pub fn group_count(&self) -> usize {
        self.var_features.len()
    }

    pub fn group_size(&self, k: usize) -> usize {
        self.var_features[k].nrows()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraint_features.nrows()
    }

    pub fn var_feature_dim(&self) -> usize {
        VAR_BASE_FEATURES + self.random_dim
    }

    pub fn constraint_feature_dim(&self) -> usize {
        CONSTRAINT_BASE_FEATURES + self.random_dim
    }

    /// Vertex counts per variable group followed by the constraint count.
    pub fn signature(&self) -> Vec<usize> {
        let mut s: Vec<usize> = (0..self.group_count()).map(|k| self.group_size(k)).collect();
        s.push(self.constraint_count());
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn build_graph(milp: &MilpInstance, random_dim: usize, seed: u64) -> Result<MmilpGraph> {
    milp.validate()?;
    let mut edges = Vec::new();
    let mut var_degree: Vec<Vec<usize>> = milp.groups.iter().map(|g| vec![0; g.vars.len()]).collect();
    let mut cons_degree = vec![0usize; milp.constraints.len()];
    for (i, c) in milp.constraints.iter().enumerate() {
        for &(r, w) in &c.coeffs {
            if w == 0.0 {
                continue;
            }
            edges.push(GraphEdge { group: r.group, var: r.index, constraint: i, weight: w });
            var_degree[r.group][r.index] += 1;
            cons_degree[i] += 1;
        }
    }

    let mut rng = rng::seeded(seed);
    let vdim = VAR_BASE_FEATURES + random_dim;
    let var_features = milp
        .groups
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let mut f = Array2::zeros((g.vars.len(), vdim));
            for (j, v) in g.vars.iter().enumerate() {
                f[[j, 0]] = v.objective;
                f[[j, 1]] = v.lower;
                f[[j, 2]] = v.upper;
                f[[j, 3]] = if v.kind == VarKind::Binary { 1.0 } else { 0.0 };
                f[[j, 4]] = var_degree[k][j] as f64;
                for q in 0..random_dim {
                    f[[j, VAR_BASE_FEATURES + q]] = rng::unit(&mut rng);
                }
            }
            f
        })
        .collect();

    let cdim = CONSTRAINT_BASE_FEATURES + random_dim;
    let mut constraint_features = Array2::zeros((milp.constraints.len(), cdim));
    for (i, c) in milp.constraints.iter().enumerate() {
        constraint_features[[i, 0]] = c.rhs;
        constraint_features[[i, 1]] = c.relation.code();
        constraint_features[[i, 2]] = c.tag.code();
        constraint_features[[i, 3]] = cons_degree[i] as f64;
        for q in 0..random_dim {
            constraint_features[[i, CONSTRAINT_BASE_FEATURES + q]] = rng::unit(&mut rng);
        }
    }

    Ok(MmilpGraph { var_features, constraint_features, edges, random_dim })
}

fn check_permutation(p: &[usize], n: usize, group: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::InvalidPermutation { group });
    }
    let mut seen = vec![false; n];
    for &v in p {
        if v >= n || seen[v] {
            return Err(Error::InvalidPermutation { group });
        }
        seen[v] = true;
    }
    Ok(())
}

fn permute_rows(a: &Array2<f64>, p: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros(a.raw_dim());
    for (old, &new) in p.iter().enumerate() {
        out.row_mut(new).assign(&a.row(old));
    }
    out
}

/// Relabels vertices: `perms[k][old] = new` for variable group `k`, and the
/// last entry permutes the constraint group. Edge order is kept.
pub fn permute_graph(g: &MmilpGraph, perms: &[Vec<usize>]) -> Result<MmilpGraph> {
    let groups = g.group_count();
    if perms.len() != groups + 1 {
        return Err(Error::DimensionMismatch { expected: groups + 1, got: perms.len() });
    }
    for k in 0..groups {
        check_permutation(&perms[k], g.group_size(k), k)?;
    }
    check_permutation(&perms[groups], g.constraint_count(), groups)?;
    Ok(MmilpGraph {
        var_features: (0..groups).map(|k| permute_rows(&g.var_features[k], &perms[k])).collect(),
        constraint_features: permute_rows(&g.constraint_features, &perms[groups]),
        edges: g
            .edges
            .iter()
            .map(|e| GraphEdge {
                group: e.group,
                var: perms[e.group][e.var],
                constraint: perms[groups][e.constraint],
                weight: e.weight,
            })
            .collect(),
        random_dim: g.random_dim,
    })
}

/// Inverse of a `perm[old] = new` permutation.
pub fn invert_permutation(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (old, &new) in p.iter().enumerate() {
        inv[new] = old;
    }
    inv
}

/// Uniformly random per-group permutations for `g`.
pub fn random_permutations(g: &MmilpGraph, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng::seeded(seed);
    g.signature()
        .into_iter()
        .map(|n| {
            let mut p: Vec<usize> = (0..n).collect();
            rng::shuffle(&mut rng, &mut p);
            p
        })
        .collect()
}
