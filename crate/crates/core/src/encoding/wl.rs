//! Color refinement on multipartite MILP graphs.
//!
//! Colors are interned integers: each distinct byte signature receives the
//! next id from a [`ColorDictionary`], so the "hash" is injective. Round-0
//! signatures are the exact feature bits of a vertex together with its group.
//! In round `l` a constraint's signature is its previous color followed, for
//! each variable group, by the sorted list of `(weight, neighbor color)`
//! pairs; variable vertices use the symmetric rule over their constraints.
//! Weights enter as decimal strings rounded to 1e-9.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MmilpGraph;
use crate::error::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct ColorDictionary {
    ids: HashMap<Vec<u8>, u32>,
}

impl ColorDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, key: Vec<u8>) -> u32 {
        let next = self.ids.len() as u32;
        *self.ids.entry(key).or_insert(next)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundColors {
    pub vars: Vec<Vec<u32>>,
    pub constraints: Vec<u32>,
}

impl RoundColors {
    fn class_count(colors: &[u32]) -> usize {
        let mut c = colors.to_vec();
        c.sort_unstable();
        c.dedup();
        c.len()
    }

    /// Number of color classes per variable group, then for constraints.
    pub fn partition_sizes(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.vars.iter().map(|v| Self::class_count(v)).collect();
        out.push(Self::class_count(&self.constraints));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorRefinement {
    /// `rounds[0]` holds the feature colors, `rounds[l]` the colors after `l`
    /// refinement steps.
    pub rounds: Vec<RoundColors>,
}

impl ColorRefinement {
    pub fn last(&self) -> &RoundColors {
        self.rounds.last().expect("at least the initial round")
    }

    /// Sorted final color multisets: one per variable group, then constraints.
    pub fn final_multisets(&self) -> Vec<Vec<u32>> {
        let last = self.last();
        last.vars
            .iter()
            .chain(std::iter::once(&last.constraints))
            .map(|c| {
                let mut c = c.clone();
                c.sort_unstable();
                c
            })
            .collect()
    }

    /// One line per round with the class counts of every group.
    pub fn report(&self) -> String {
        let mut s = String::from("round\tclasses (W0.. Wp, V)\n");
        for (l, r) in self.rounds.iter().enumerate() {
            let sizes: Vec<String> = r.partition_sizes().iter().map(|n| n.to_string()).collect();
            s.push_str(&format!("{l}\t{}\n", sizes.join(" ")));
        }
        s
    }
}

const CONSTRAINT_GROUP: u32 = u32::MAX;

fn weight_key(w: f64) -> String {
    let s = format!("{:.9}", w);
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn feature_key(round_tag: u32, group: u32, row: ndarray::ArrayView1<f64>) -> Vec<u8> {
    let mut key = Vec::with_capacity(8 + 8 * row.len());
    push_u32(&mut key, round_tag);
    push_u32(&mut key, group);
    for &v in row {
        let v = if v == 0.0 { 0.0 } else { v };
        key.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    key
}

struct Adjacency {
    // constraint -> per group -> (weight key, var)
    cons: Vec<Vec<Vec<(String, usize)>>>,
    // group -> var -> (weight key, constraint)
    vars: Vec<Vec<Vec<(String, usize)>>>,
}

fn adjacency(g: &MmilpGraph) -> Adjacency {
    let groups = g.group_count();
    let mut cons = vec![vec![Vec::new(); groups]; g.constraint_count()];
    let mut vars: Vec<Vec<Vec<(String, usize)>>> = (0..groups).map(|k| vec![Vec::new(); g.group_size(k)]).collect();
    for e in &g.edges {
        let w = weight_key(e.weight);
        cons[e.constraint][e.group].push((w.clone(), e.var));
        vars[e.group][e.var].push((w, e.constraint));
    }
    Adjacency { cons, vars }
}

fn neighbor_block(key: &mut Vec<u8>, tag: u32, nbrs: &[(String, usize)], colors: &[u32]) {
    let mut pairs: Vec<(&str, u32)> = nbrs.iter().map(|(w, j)| (w.as_str(), colors[*j])).collect();
    pairs.sort_unstable();
    push_u32(key, tag);
    push_u32(key, pairs.len() as u32);
    for (w, c) in pairs {
        push_u32(key, w.len() as u32);
        key.extend_from_slice(w.as_bytes());
        push_u32(key, c);
    }
}

/// Runs `rounds` refinement steps, interning colors in `dict`. Graphs refined
/// against the same dictionary have comparable colors.
pub fn refine_with(dict: &mut ColorDictionary, g: &MmilpGraph, rounds: usize) -> Result<ColorRefinement> {
    if rounds == 0 {
        return Err(Error::InvalidConfig("color refinement needs at least one round".into()));
    }
    let groups = g.group_count();
    let adj = adjacency(g);
    let mut current = RoundColors {
        vars: (0..groups)
            .map(|k| g.var_features[k].rows().into_iter().map(|r| dict.intern(feature_key(0, k as u32, r))).collect())
            .collect(),
        constraints: g
            .constraint_features
            .rows()
            .into_iter()
            .map(|r| dict.intern(feature_key(0, CONSTRAINT_GROUP, r)))
            .collect(),
    };
    let mut history = vec![current.clone()];
    for l in 1..=rounds as u32 {
        let constraints = (0..g.constraint_count())
            .map(|i| {
                let mut key = Vec::new();
                push_u32(&mut key, l);
                push_u32(&mut key, CONSTRAINT_GROUP);
                push_u32(&mut key, current.constraints[i]);
                for k in 0..groups {
                    neighbor_block(&mut key, k as u32, &adj.cons[i][k], &current.vars[k]);
                }
                dict.intern(key)
            })
            .collect();
        let vars = (0..groups)
            .map(|k| {
                (0..g.group_size(k))
                    .map(|j| {
                        let mut key = Vec::new();
                        push_u32(&mut key, l);
                        push_u32(&mut key, k as u32);
                        push_u32(&mut key, current.vars[k][j]);
                        neighbor_block(&mut key, CONSTRAINT_GROUP, &adj.vars[k][j], &current.constraints);
                        dict.intern(key)
                    })
                    .collect()
            })
            .collect();
        current = RoundColors { vars, constraints };
        history.push(current.clone());
    }
    Ok(ColorRefinement { rounds: history })
}

pub fn refine(g: &MmilpGraph, rounds: usize) -> Result<ColorRefinement> {
    refine_with(&mut ColorDictionary::new(), g, rounds)
}

/// True when `rounds` steps of refinement separate the two graphs: the group
/// structure differs, or some group's final color multiset differs.
pub fn distinguishable(a: &MmilpGraph, b: &MmilpGraph, rounds: usize) -> Result<bool> {
    if a.signature() != b.signature() {
        return Ok(true);
    }
    let mut dict = ColorDictionary::new();
    let ra = refine_with(&mut dict, a, rounds)?;
    let rb = refine_with(&mut dict, b, rounds)?;
    Ok(ra.final_multisets() != rb.final_multisets())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{build_graph, permute_graph, random_permutations};
    use crate::instances::{generate_spi, GenConfig, SpiInstance};
    use crate::reduction::dualize_spi;

    fn graph_of(inst: &SpiInstance, r: usize) -> MmilpGraph {
        build_graph(&dualize_spi(inst).unwrap(), r, 0).unwrap()
    }

    #[test]
    fn weight_keys_are_canonical() {
        assert_eq!(weight_key(-0.0), "0.000000000");
        assert_eq!(weight_key(-1e-12), "0.000000000");
        assert_eq!(weight_key(1.0), "1.000000000");
        assert_eq!(weight_key(-2.5), "-2.500000000");
    }

    #[test]
    fn graph_is_indistinguishable_from_itself() {
        let g = graph_of(&SpiInstance::worked_example(), 0);
        assert!(!distinguishable(&g, &g, 3).unwrap());
    }

    #[test]
    fn cost_change_separates_at_round_zero() {
        let ex = SpiInstance::worked_example();
        let mut other = ex.clone();
        other.edges[0].cost = 10.0;
        let (a, b) = (graph_of(&ex, 0), graph_of(&other, 0));
        let mut dict = ColorDictionary::new();
        let ra = refine_with(&mut dict, &a, 1).unwrap();
        let rb = refine_with(&mut dict, &b, 1).unwrap();
        let ms = |r: &RoundColors| {
            let mut c = r.constraints.clone();
            c.sort_unstable();
            c
        };
        assert_ne!(ms(&ra.rounds[0]), ms(&rb.rounds[0]));
        assert!(distinguishable(&a, &b, 1).unwrap());
    }

    #[test]
    fn zero_rounds_rejected() {
        let g = graph_of(&SpiInstance::worked_example(), 0);
        assert!(refine(&g, 0).is_err());
    }

    #[test]
    fn partitions_only_refine() {
        let inst = generate_spi(&GenConfig { node_count: 6, budget: 2.0, seed: 4, ..Default::default() }).unwrap();
        let g = graph_of(&inst, 0);
        let r = refine(&g, 5).unwrap();
        for w in r.rounds.windows(2) {
            let (prev, next) = (&w[0], &w[1]);
            let check = |p: &[u32], n: &[u32]| {
                for i in 0..p.len() {
                    for j in 0..p.len() {
                        if n[i] == n[j] {
                            assert_eq!(p[i], p[j]);
                        }
                    }
                }
            };
            check(&prev.constraints, &next.constraints);
            for k in 0..prev.vars.len() {
                check(&prev.vars[k], &next.vars[k]);
            }
        }
    }

    #[test]
    fn permuted_graph_is_indistinguishable() {
        let inst = generate_spi(&GenConfig { node_count: 5, budget: 1.0, seed: 8, ..Default::default() }).unwrap();
        let g = graph_of(&inst, 0);
        for s in 0..5 {
            let p = permute_graph(&g, &random_permutations(&g, s)).unwrap();
            assert!(!distinguishable(&g, &p, 3).unwrap());
        }
    }

    #[test]
    fn complete_digraph_colors_follow_edge_types() {
        use crate::instances::DelayPolicy;
        let cfg = GenConfig {
            node_count: 5,
            cost_range: (3.0, 3.0),
            delay: DelayPolicy::Constant(3.0),
            budget: 1.0,
            ..Default::default()
        };
        let inst = generate_spi(&cfg).unwrap();
        let r = refine(&graph_of(&inst, 0), 4).unwrap();
        for round in &r.rounds[..2] {
            assert!(round.vars[0].iter().all(|&c| c == round.vars[0][0]));
        }
        // Past round 1 the source and sink split edges by endpoint type.
        let kind = |v: usize| if v == inst.source { 0 } else if v == inst.sink { 1 } else { 2 };
        for round in &r.rounds {
            for (a, ea) in inst.edges.iter().enumerate() {
                for (b, eb) in inst.edges.iter().enumerate() {
                    if (kind(ea.tail), kind(ea.head)) == (kind(eb.tail), kind(eb.head)) {
                        assert_eq!(round.vars[0][a], round.vars[0][b]);
                    }
                }
            }
        }
        assert!(r.last().partition_sizes()[0] > 1);
    }

    #[test]
    fn report_lists_every_round() {
        let g = graph_of(&SpiInstance::worked_example(), 0);
        let text = refine(&g, 2).unwrap().report();
        assert_eq!(text.lines().count(), 4);
    }
}
