//! Property suites that can be run on demand: WL invariance, strong duality,
//! gradient correctness and oracle/MILP agreement.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::encoding::wl::{distinguishable, refine, ColorRefinement};
use crate::encoding::{build_graph, permute_graph, random_permutations};
use crate::error::Result;
use crate::gnn::{gradient_check, train::fit_scalers, Activation, GnnConfig, GnnModel};
use crate::inner::shortest_path;
use crate::instances::{generate, generate_spi, GenConfig, Instance, ProblemKind, SpiInstance};
use crate::milp::{solve_lp, LpStatus};
use crate::oracle::cross_check;
use crate::reduction::{dualize_spi, fix_interdiction};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    /// First few failure descriptions.
    pub failures: Vec<String>,
    pub detail: String,
}

const MAX_LISTED_FAILURES: usize = 10;

struct Collector {
    checked: usize,
    failed: usize,
    failures: Vec<String>,
}

impl Collector {
    fn new() -> Self {
        Collector { checked: 0, failed: 0, failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failed += 1;
            if self.failures.len() < MAX_LISTED_FAILURES {
                self.failures.push(what());
            }
        }
    }

    fn finish(self, name: &str, detail: String) -> SuiteReport {
        SuiteReport {
            name: name.into(),
            passed: self.failed == 0,
            checked: self.checked,
            failures: self.failures,
            detail: format!("{} of {} checks failed; {detail}", self.failed, self.checked),
        }
    }
}

/// Each round's coloring is a refinement of the previous one.
pub fn partitions_monotone(r: &ColorRefinement) -> bool {
    r.rounds.windows(2).all(|w| {
        let pairs = w[0].vars.iter().zip(&w[1].vars).chain(std::iter::once((&w[0].constraints, &w[1].constraints)));
        pairs.into_iter().all(|(prev, next)| {
            let mut seen: HashMap<u32, u32> = HashMap::new();
            prev.iter().zip(next).all(|(&p, &n)| *seen.entry(n).or_insert(p) == p)
        })
    })
}

/// Copy of `inst` with one edge's cost raised by `bump`.
pub fn perturb_cost(inst: &SpiInstance, edge: usize, bump: f64) -> SpiInstance {
    let mut out = inst.clone();
    out.edges[edge].cost += bump;
    out
}

fn small_spi(seed: u64, max_n: usize) -> Result<SpiInstance> {
    let mut r = rng::seeded(seed);
    let n = 4 + rng::below(&mut r, max_n - 3);
    let budget = 1 + rng::below(&mut r, 2);
    generate_spi(&GenConfig { node_count: n, budget: budget as f64, seed, ..GenConfig::default() })
}

/// Permuted copies are never separated, cost-perturbed copies always are,
/// and refinement partitions only ever split.
pub fn wl_suite(graphs: usize, permutations: usize, rounds: usize, seed: u64) -> Result<SuiteReport> {
    let mut c = Collector::new();
    for gi in 0..graphs {
        let gseed = rng::keyed_hash(seed, &format!("wl-graph-{gi}"));
        let inst = small_spi(gseed, 7)?;
        let g = build_graph(&dualize_spi(&inst)?, 0, gseed)?;
        let colors = refine(&g, rounds)?;
        c.check(partitions_monotone(&colors), || format!("graph {gi}: a refinement round merged classes"));
        for pi in 0..permutations {
            let perms = random_permutations(&g, rng::keyed_hash(gseed, &format!("perm-{pi}")));
            let pg = permute_graph(&g, &perms)?;
            c.check(!distinguishable(&g, &pg, rounds)?, || format!("graph {gi}: permutation {pi} was separated"));
        }
        let edge = rng::below(&mut rng::seeded(gseed), inst.edges.len());
        let other = build_graph(&dualize_spi(&perturb_cost(&inst, edge, 0.5))?, 0, gseed)?;
        c.check(distinguishable(&g, &other, rounds)?, || format!("graph {gi}: perturbing edge {edge} was not separated"));
    }
    Ok(c.finish("wl", format!("{graphs} graphs x {permutations} permutations, {rounds} rounds")))
}

/// For fixed interdictions the LP optimum of the dual equals the shortest
/// path length.
pub fn duality_suite(instances: usize, decisions: usize, seed: u64) -> Result<SuiteReport> {
    let mut c = Collector::new();
    let mut worst: f64 = 0.0;
    for ii in 0..instances {
        let iseed = rng::keyed_hash(seed, &format!("duality-{ii}"));
        let inst = small_spi(iseed, 10)?;
        let milp = dualize_spi(&inst)?;
        let mut r = rng::seeded(iseed);
        for di in 0..decisions {
            let mut x = vec![false; inst.edges.len()];
            for _ in 0..inst.budget {
                x[rng::below(&mut r, inst.edges.len())] = true;
            }
            let lp = solve_lp(&fix_interdiction(&milp, &x)?, false)?;
            let path = shortest_path(&inst, &x)?.length_or_inf();
            let ok = lp.status == LpStatus::Optimal && lp.value.is_some_and(|v| (v - path).abs() <= 1e-6);
            if let Some(v) = lp.value {
                worst = worst.max((v - path).abs());
            }
            c.check(ok, || format!("instance {ii} decision {di}: LP {:?} {:?}, path {path}", lp.status, lp.value));
        }
    }
    Ok(c.finish("duality", format!("max |LP - path| = {worst:.3e}")))
}

/// Architectures covering both activations, shared and separate messages,
/// hidden layers, deeper stacks and random features.
pub fn gradcheck_configs(seed: u64) -> Vec<GnnConfig> {
    let base = GnnConfig {
        layers: 2,
        embed_dim: 8,
        encoder_hidden: vec![],
        message_hidden: vec![],
        update_hidden: vec![],
        var_groups: 3,
        random_dim: 0,
        activation: Activation::Tanh,
        separate_messages: false,
        seed,
    };
    vec![
        base.clone(),
        GnnConfig { activation: Activation::Softplus, seed: seed + 1, ..base.clone() },
        GnnConfig { separate_messages: true, seed: seed + 2, ..base.clone() },
        GnnConfig { encoder_hidden: vec![6], message_hidden: vec![5], update_hidden: vec![4], seed: seed + 3, ..base.clone() },
        GnnConfig { layers: 3, embed_dim: 6, random_dim: 2, activation: Activation::Softplus, seed: seed + 4, ..base },
    ]
}

/// Central-difference check of backprop on the given models, alternating
/// shortest-path and max-flow graphs. `checked` counts parameter slots.
pub fn gradcheck_models(models: &[GnnModel], samples_per_model: usize, h: f64, tol: f64, seed: u64) -> Result<SuiteReport> {
    let mut c = Collector::new();
    let mut worst: f64 = 0.0;
    for (mi, model) in models.iter().enumerate() {
        let kind = if mi % 2 == 0 || model.config.var_groups < 3 { ProblemKind::Spi } else { ProblemKind::Mfi };
        let gseed = rng::keyed_hash(seed, &format!("gradcheck-{mi}"));
        let inst = generate(kind, &GenConfig { node_count: 5, budget: 2.0, seed: gseed, ..GenConfig::default() })?;
        let g = build_graph(&crate::reduction::reduce(&inst)?, model.config.random_dim, gseed)?;
        let mut m = model.clone();
        if m.adam.is_none() {
            fit_scalers(&mut m, &[&g]);
        }
        let label: Vec<bool> = (0..g.group_size(0)).map(|j| rng::keyed_hash(gseed, &j.to_string()) % 3 == 0).collect();
        let report = gradient_check(&m, &g, &label, samples_per_model, h, gseed)?;
        worst = worst.max(report.max_rel_error);
        c.checked += report.checked;
        if !(report.max_rel_error < tol) {
            c.failed += 1;
            c.failures.push(format!("model {mi}: max relative error {:.3e} at slot {:?}", report.max_rel_error, report.worst_index));
        }
    }
    Ok(c.finish("gradcheck", format!("max relative error {worst:.3e}")))
}

pub fn gradcheck_suite(samples_per_model: usize, seed: u64) -> Result<SuiteReport> {
    let models = gradcheck_configs(seed).into_iter().map(GnnModel::new).collect::<Result<Vec<_>>>()?;
    gradcheck_models(&models, samples_per_model, 1e-5, 1e-4, seed)
}

/// Branch-and-bound on the reduced MILP matches enumeration.
pub fn oracle_vs_milp_suite(spi: usize, mfi: usize, seed: u64) -> Result<SuiteReport> {
    let mut c = Collector::new();
    for (kind, count) in [(ProblemKind::Spi, spi), (ProblemKind::Mfi, mfi)] {
        for i in 0..count {
            let iseed = rng::keyed_hash(seed, &format!("{kind}-{i}"));
            let inst = random_small(kind, iseed)?;
            let report = cross_check(&inst)?;
            c.check(report.passed, || format!("{kind} {i}: {}", report.failures.join("; ")));
        }
    }
    Ok(c.finish("oracle-vs-milp", format!("{spi} shortest-path and {mfi} max-flow instances")))
}

/// Shortest-path instances with at most 7 nodes and budget at most 2, or
/// max-flow instances with at most 6 nodes and budget at most 2.
pub fn random_small(kind: ProblemKind, seed: u64) -> Result<Instance> {
    let mut r = rng::seeded(seed);
    // Max-flow removal costs in [0.5, 1.5) keep one to three edges affordable.
    let (max_n, budget, cost_range) = match kind {
        ProblemKind::Spi => (7, (1 + rng::below(&mut r, 2)) as f64, (1.0, 10.0)),
        ProblemKind::Mfi => (6, rng::uniform(&mut r, 0.5, 2.0), (0.5, 1.5)),
    };
    let n = 3 + rng::below(&mut r, max_n - 2);
    let cfg = GenConfig {
        node_count: n,
        density: rng::uniform(&mut r, 0.5, 1.0),
        cost_range,
        capacity_range: (1.0, 10.0),
        budget,
        seed,
        ..GenConfig::default()
    };
    generate(kind, &cfg)
}
