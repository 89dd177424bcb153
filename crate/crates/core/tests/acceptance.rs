//! Acceptance suite: one PASS/FAIL line per criterion. Reference values come
//! from oracles written here (Bellman-Ford, cut enumeration, direct finite
//! differences), not from the library under test.

use std::time::Instant;

use interdict_core::diagnostics::{gradcheck_configs, partitions_monotone, perturb_cost, random_small};
use interdict_core::encoding::wl::{distinguishable, refine};
use interdict_core::encoding::{build_graph, permute_graph, random_permutations, GraphEdge, MmilpGraph};
use interdict_core::eval::{
    anytime_compare, evaluate, predict_and_search, EvalItem, ModelStrategy, PnsConfig, RandomTopK,
};
use interdict_core::gnn::{loss, train, Activation, GnnConfig, GnnModel, Prediction, TrainConfig};
use interdict_core::instances::{generate_spi, GenConfig, Instance, MfiInstance, ProblemKind, SpiInstance};
use interdict_core::milp::{solve_lp, solve_milp, LpStatus, MilpStatus, SolverConfig};
use interdict_core::reduction::{dualize_spi, fix_interdiction, reduce, VarKind};
use interdict_core::rng::{self, keyed_hash};
use ndarray::Array2;

const TOL: f64 = 1e-6;

// ---------------------------------------------------------------- oracles

fn bellman_ford(inst: &SpiInstance, x: &[bool]) -> f64 {
    let mut dist = vec![f64::INFINITY; inst.node_count];
    dist[inst.source] = 0.0;
    for _ in 0..inst.node_count {
        let mut changed = false;
        for (e, &xe) in inst.edges.iter().zip(x) {
            let w = e.cost + if xe { e.delay } else { 0.0 };
            if dist[e.tail] + w < dist[e.head] {
                dist[e.head] = dist[e.tail] + w;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist[inst.sink]
}

/// Max flow as the minimum s-t cut over all vertex subsets.
fn min_cut(inst: &MfiInstance, x: &[bool]) -> f64 {
    let n = inst.node_count;
    let others: Vec<usize> = (0..n).filter(|&v| v != inst.source && v != inst.sink).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << others.len()) {
        let mut side = vec![false; n];
        side[inst.source] = true;
        for (b, &v) in others.iter().enumerate() {
            side[v] = mask >> b & 1 == 1;
        }
        let cut: f64 = inst
            .edges
            .iter()
            .zip(x)
            .filter(|(e, &xe)| !xe && side[e.tail] && !side[e.head])
            .map(|(e, _)| e.capacity)
            .sum();
        best = best.min(cut);
    }
    best
}

fn subsets_up_to(m: usize, k: usize, f: &mut dyn FnMut(&[bool])) {
    fn rec(start: usize, left: usize, x: &mut Vec<bool>, f: &mut dyn FnMut(&[bool])) {
        f(x);
        if left == 0 {
            return;
        }
        for i in start..x.len() {
            x[i] = true;
            rec(i + 1, left - 1, x, f);
            x[i] = false;
        }
    }
    rec(0, k, &mut vec![false; m], f);
}

/// Best leader value and every optimal decision.
fn reference_optimum(inst: &Instance) -> (f64, Vec<Vec<bool>>) {
    let mut best: Option<f64> = None;
    let mut optima: Vec<Vec<bool>> = Vec::new();
    let mut offer = |x: &[bool], v: f64, maximize: bool| {
        let better = match best {
            None => true,
            Some(b) => {
                if maximize {
                    v > b + 1e-9
                } else {
                    v < b - 1e-9
                }
            }
        };
        if better {
            best = Some(v);
            optima = vec![x.to_vec()];
        } else if (v - best.unwrap()).abs() <= 1e-9 {
            optima.push(x.to_vec());
        }
    };
    match inst {
        Instance::Spi(s) => subsets_up_to(s.edges.len(), s.budget, &mut |x| offer(x, bellman_ford(s, x), true)),
        Instance::Mfi(m) => {
            let cheapest = m.edges.iter().map(|e| e.removal_cost).fold(f64::INFINITY, f64::min);
            let k = if cheapest > 0.0 { (m.budget / cheapest).floor() as usize } else { m.edges.len() };
            subsets_up_to(m.edges.len(), k.min(m.edges.len()), &mut |x| {
                let spent: f64 = m.edges.iter().zip(x).filter(|(_, &b)| b).map(|(e, _)| e.removal_cost).sum();
                if spent <= m.budget + 1e-9 {
                    offer(x, min_cut(m, x), false);
                }
            })
        }
    }
    (best.unwrap(), optima)
}

// --------------------------------------------------------------- harness

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(results: &mut Vec<bool>, number: usize, title: &str, started: Instant, o: Outcome) {
    println!(
        "{} criterion {number} ({title}): {} [{:.1}s]",
        if o.passed { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
    results.push(o.passed);
}

fn spi(n: usize, budget: usize, seed: u64) -> SpiInstance {
    generate_spi(&GenConfig { node_count: n, budget: budget as f64, seed, ..GenConfig::default() }).unwrap()
}

// ------------------------------------------------------------- criteria

fn oracle_vs_milp() -> Outcome {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut worst: f64 = 0.0;
    for (kind, count) in [(ProblemKind::Spi, 100), (ProblemKind::Mfi, 50)] {
        for i in 0..count {
            let inst = random_small(kind, keyed_hash(11, &format!("{kind}-{i}"))).unwrap();
            let (reference, _) = reference_optimum(&inst);
            let sol = solve_milp(&reduce(&inst).unwrap(), &SolverConfig::default()).unwrap();
            let ok = sol.status == MilpStatus::Optimal && sol.value.is_some_and(|v| (v - reference).abs() <= TOL);
            if let Some(v) = sol.value {
                worst = worst.max((v - reference).abs());
            }
            if !ok {
                mismatches.push(format!("{kind} {i}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        passed: mismatches.is_empty() && secs < 300.0,
        detail: format!(
            "150 instances, {} mismatches {:?}, max |diff| {worst:.2e}, {secs:.1}s of 300s",
            mismatches.len(),
            mismatches.iter().take(5).collect::<Vec<_>>()
        ),
    }
}

fn strong_duality() -> Outcome {
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for i in 0..500u64 {
        let mut r = rng::seeded(keyed_hash(12, &i.to_string()));
        let n = 2 + rng::below(&mut r, 9);
        let inst = spi(n, 1 + rng::below(&mut r, 3), keyed_hash(13, &i.to_string()));
        let milp = dualize_spi(&inst).unwrap();
        for _ in 0..5 {
            // A budget-feasible decision: up to `budget` distinct edges.
            let mut order: Vec<usize> = (0..inst.edges.len()).collect();
            rng::shuffle(&mut r, &mut order);
            let k = rng::below(&mut r, inst.budget + 1).min(order.len());
            let mut x = vec![false; inst.edges.len()];
            for &e in &order[..k] {
                x[e] = true;
            }
            let lp = solve_lp(&fix_interdiction(&milp, &x).unwrap(), false).unwrap();
            let reference = bellman_ford(&inst, &x);
            match (lp.status, lp.value) {
                (LpStatus::Optimal, Some(v)) => {
                    worst = worst.max((v - reference).abs());
                    if (v - reference).abs() > TOL {
                        failures += 1;
                    }
                }
                _ => failures += 1,
            }
        }
    }
    Outcome { passed: failures == 0, detail: format!("2500 LPs, {failures} failures, max |LP - path| {worst:.2e}") }
}

fn worked_example() -> Outcome {
    let inst = SpiInstance::worked_example();
    let milp = dualize_spi(&inst).unwrap();
    let binary = milp.flat_vars().filter(|v| v.kind == VarKind::Binary).count();
    let continuous = milp.flat_vars().filter(|v| v.kind == VarKind::Continuous).count();
    let rows = milp.constraints.len();
    let (value, optima) = reference_optimum(&Instance::Spi(inst.clone()));
    let chosen: Vec<Vec<(usize, usize)>> = optima
        .iter()
        .map(|x| inst.edges.iter().zip(x).filter(|(_, &b)| b).map(|(e, _)| (e.tail, e.head)).collect())
        .collect();
    let sol = solve_milp(&milp, &SolverConfig::default()).unwrap();
    let edges = build_graph(&milp, 0, 0).unwrap().edges.len();
    let expected_optima = vec![vec![(0, 3)], vec![(3, 6)]];
    let mut sorted = chosen.clone();
    sorted.sort();
    let passed = rows == 13
        && binary == 12
        && continuous == 7
        && value == 8.0
        && sorted == expected_optima
        && sol.value.is_some_and(|v| (v - 8.0).abs() <= TOL)
        && edges == 48;
    Outcome {
        passed,
        detail: format!(
            "{rows} constraints, {binary} binary, {continuous} continuous, optimum {value} at {chosen:?}, MILP {:?}, {edges} graph edges",
            sol.value
        ),
    }
}

fn wl_suite() -> Outcome {
    let (mut perm_fail, mut perturb_fail, mut mono_fail) = (0, 0, 0);
    for gi in 0..20u64 {
        let mut r = rng::seeded(keyed_hash(14, &gi.to_string()));
        let inst = spi(4 + rng::below(&mut r, 4), 1 + rng::below(&mut r, 2), keyed_hash(15, &gi.to_string()));
        let g = build_graph(&dualize_spi(&inst).unwrap(), 0, gi).unwrap();
        if !partitions_monotone(&refine(&g, 4).unwrap()) {
            mono_fail += 1;
        }
        for pi in 0..50u64 {
            let pg = permute_graph(&g, &random_permutations(&g, keyed_hash(gi, &pi.to_string()))).unwrap();
            if distinguishable(&g, &pg, 3).unwrap() {
                perm_fail += 1;
            }
        }
        let edge = rng::below(&mut r, inst.edges.len());
        let other = build_graph(&dualize_spi(&perturb_cost(&inst, edge, 0.25)).unwrap(), 0, gi).unwrap();
        if !distinguishable(&g, &other, 3).unwrap() {
            perturb_fail += 1;
        }
    }
    Outcome {
        passed: perm_fail + perturb_fail + mono_fail == 0,
        detail: format!(
            "1000 permuted pairs with {perm_fail} separated, 20 perturbed pairs with {perturb_fail} not separated, {mono_fail} non-monotone refinements"
        ),
    }
}

fn gradient_check() -> Outcome {
    let h = 1e-5;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    let configs = gradcheck_configs(21);
    for (ci, cfg) in configs.iter().enumerate() {
        let mut model = GnnModel::new(cfg.clone()).unwrap();
        let inst = if ci % 2 == 0 {
            Instance::Spi(spi(5, 2, 30 + ci as u64))
        } else {
            random_small(ProblemKind::Mfi, 40 + ci as u64).unwrap()
        };
        let g = build_graph(&reduce(&inst).unwrap(), cfg.random_dim, ci as u64).unwrap();
        train::fit_scalers(&mut model, &[&g]);
        let label: Vec<bool> = (0..g.group_size(0)).map(|j| (j * 7 + ci) % 5 == 0).collect();
        let (_, grad) = model.backward(&g, &label).unwrap();
        let analytic = grad.flatten();
        let base = model.params.flatten();
        let mut r = rng::seeded(50 + ci as u64);
        let mut probe = model.clone();
        for _ in 0..220 {
            let i = rng::below(&mut r, base.len());
            let mut eval = |v: f64| {
                let mut flat = base.clone();
                flat[i] = v;
                probe.params.set_flat(&flat).unwrap();
                loss(&probe.forward(&g).unwrap(), &label).unwrap()
            };
            let numeric = (eval(base[i] + h) - eval(base[i] - h)) / (2.0 * h);
            let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    Outcome {
        passed: checked >= 1000 && configs.len() >= 5 && worst < 1e-4,
        detail: format!("{checked} parameters over {} configs, max relative error {worst:.2e}", configs.len()),
    }
}

fn equivariance() -> Outcome {
    let mut worst: f64 = 0.0;
    for gi in 0..20u64 {
        let cfg = GnnConfig {
            layers: 2,
            embed_dim: 12,
            encoder_hidden: vec![12],
            message_hidden: vec![12],
            update_hidden: vec![12],
            var_groups: 3,
            random_dim: 2,
            activation: Activation::Tanh,
            separate_messages: gi % 2 == 1,
            seed: gi,
        };
        let model = GnnModel::new(cfg).unwrap();
        let inst = if gi % 3 == 2 {
            random_small(ProblemKind::Mfi, 60 + gi).unwrap()
        } else {
            Instance::Spi(spi(5 + (gi % 4) as usize, 2, 70 + gi))
        };
        let g = build_graph(&reduce(&inst).unwrap(), 2, gi).unwrap();
        let base = model.forward(&g).unwrap().probabilities;
        for pi in 0..10u64 {
            let perms = random_permutations(&g, keyed_hash(80 + gi, &pi.to_string()));
            let out = model.forward(&permute_graph(&g, &perms).unwrap()).unwrap().probabilities;
            for (old, &new) in perms[0].iter().enumerate() {
                worst = worst.max((base[old] - out[new]).abs());
            }
        }
    }
    Outcome { passed: worst < 1e-6, detail: format!("200 permuted graphs, max deviation {worst:.2e}") }
}

/// Two W0 vertices per constraint arranged as cycles of the given lengths;
/// every vertex carries the same features.
fn cycle_graph(lengths: &[usize]) -> MmilpGraph {
    let total: usize = lengths.iter().sum();
    let mut edges = Vec::new();
    let mut offset = 0;
    for &len in lengths {
        for i in 0..len {
            let c = offset + i;
            edges.push(GraphEdge { group: 0, var: offset + i, constraint: c, weight: 1.0 });
            edges.push(GraphEdge { group: 0, var: offset + (i + 1) % len, constraint: c, weight: 1.0 });
        }
        offset += len;
    }
    let var = Array2::from_shape_fn((total, 5), |(_, k)| [0.0, 0.0, 1.0, 1.0, 2.0][k]);
    let cons = Array2::from_shape_fn((total, 4), |(_, k)| [1.0, -1.0, 2.0, 2.0][k]);
    MmilpGraph { var_features: vec![var], constraint_features: cons, edges, random_dim: 0 }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn separation() -> Outcome {
    let models: Vec<GnnModel> = (0..8u64)
        .map(|s| {
            GnnModel::new(GnnConfig {
                layers: 2,
                embed_dim: 8,
                encoder_hidden: vec![8],
                message_hidden: vec![8],
                update_hidden: vec![8],
                var_groups: 2,
                random_dim: 0,
                activation: Activation::Tanh,
                separate_messages: false,
                seed: 90 + s,
            })
            .unwrap()
        })
        .collect();
    let mut not_separated = 0;
    let mut not_wl = 0;
    for pi in 0..50u64 {
        let inst = spi(4 + (pi % 4) as usize, 1 + (pi % 2) as usize, 100 + pi);
        let edge = (pi as usize * 7) % inst.edges.len();
        let a = build_graph(&dualize_spi(&inst).unwrap(), 0, 0).unwrap();
        let b = build_graph(&dualize_spi(&perturb_cost(&inst, edge, 0.5)).unwrap(), 0, 0).unwrap();
        if !distinguishable(&a, &b, 3).unwrap() {
            not_wl += 1;
            continue;
        }
        let separated = models.iter().any(|m| {
            let pa = sorted(m.forward(&a).unwrap().probabilities);
            let pb = sorted(m.forward(&b).unwrap().probabilities);
            pa.iter().zip(&pb).any(|(x, y)| (x - y).abs() > 1e-6)
        });
        if !separated {
            not_separated += 1;
        }
    }
    let mut pairs: Vec<(MmilpGraph, MmilpGraph)> = Vec::new();
    for k in 3..9 {
        pairs.push((cycle_graph(&[2 * k]), cycle_graph(&[k, k])));
    }
    for pi in 0..14u64 {
        let inst = spi(4 + (pi % 3) as usize, 1, 200 + pi);
        let g = build_graph(&dualize_spi(&inst).unwrap(), 0, 0).unwrap();
        let pg = permute_graph(&g, &random_permutations(&g, pi)).unwrap();
        pairs.push((g, pg));
    }
    let mut indist_wrong = 0;
    let mut unequal = 0;
    for (a, b) in &pairs {
        if distinguishable(a, b, 3).unwrap() {
            indist_wrong += 1;
        }
        for m in &models {
            let pa = sorted(m.forward(a).unwrap().probabilities);
            let pb = sorted(m.forward(b).unwrap().probabilities);
            if pa.iter().zip(&pb).any(|(x, y)| (x - y).abs() > 1e-9) {
                unequal += 1;
            }
        }
    }
    Outcome {
        passed: not_separated == 0 && not_wl == 0 && indist_wrong == 0 && unequal == 0 && pairs.len() == 20,
        detail: format!(
            "50 separable pairs: {not_wl} not WL-separable, {not_separated} not separated by any of 8 models; {} indistinguishable pairs: {indist_wrong} WL-separated, {unequal} model outputs differ",
            pairs.len()
        ),
    }
}

fn learner_config(seed: u64) -> GnnConfig {
    GnnConfig {
        layers: 2,
        embed_dim: 16,
        encoder_hidden: vec![16],
        message_hidden: vec![16],
        update_hidden: vec![16],
        var_groups: 2,
        random_dim: 0,
        activation: Activation::Tanh,
        separate_messages: false,
        seed,
    }
}

fn labeled_spi(count: u64, n: usize, budget: usize, seed: u64) -> Vec<EvalItem> {
    (0..count)
        .map(|i| {
            let id = format!("spi-{seed}-{i:04}");
            let inst = Instance::Spi(spi(n, budget, keyed_hash(seed, &id)));
            let (value, optima) = reference_optimum(&inst);
            let label = optima.into_iter().min().unwrap();
            EvalItem { id, instance: inst, optimal_value: value, label: Some(label) }
        })
        .collect()
}

fn samples(items: &[EvalItem]) -> Vec<train::Sample> {
    items
        .iter()
        .map(|it| (build_graph(&reduce(&it.instance).unwrap(), 0, 0).unwrap(), it.label.clone().unwrap()))
        .collect()
}

fn learning_trend() -> (Outcome, GnnModel) {
    let items = labeled_spi(250, 10, 2, 300);
    let (train_items, test_items) = items.split_at(200);
    let tc = TrainConfig { epochs: 40, batch_size: 16, learning_rate: 1e-3, seed: 3, ..TrainConfig::default() };
    let (model, history) = train(GnnModel::new(learner_config(5)).unwrap(), &samples(train_items), &[], &tc).unwrap();
    let trained = evaluate(test_items, &ModelStrategy { model: &model, graph_seed: 0 }).unwrap();
    let random = evaluate(test_items, &RandomTopK { seed: 8 }).unwrap();

    let memo_items = labeled_spi(10, 6, 1, 301);
    let memo_cfg = TrainConfig { epochs: 500, batch_size: 10, learning_rate: 1e-2, seed: 4, ..TrainConfig::default() };
    let (_, memo) = train(GnnModel::new(learner_config(6)).unwrap(), &samples(&memo_items), &[], &memo_cfg).unwrap();
    let memo_loss = memo.last_train_loss().unwrap();
    let outcome = Outcome {
        passed: trained.ratio_mean > random.ratio_mean && memo_loss < 0.1,
        detail: format!(
            "held-out ratio model {:.4} ± {:.4} vs random {:.4} ± {:.4} (final train loss {:.4}); memorization loss {memo_loss:.4}",
            trained.ratio_mean,
            trained.ratio_std,
            random.ratio_mean,
            random.ratio_std,
            history.last_train_loss().unwrap()
        ),
    };
    (outcome, model)
}

fn predict_and_search_checks(model: &GnnModel) -> Outcome {
    let items = labeled_spi(50, 7, 2, 400);
    let solver = SolverConfig::default();
    let (mut oracle_fail, mut wide_fail) = (0, 0);
    for it in &items {
        let milp = reduce(&it.instance).unwrap();
        let label = it.label.clone().unwrap();
        let w0 = label.len();
        let k1 = label.iter().filter(|&&b| b).count();
        let p = Prediction { probabilities: label.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect() };
        let sol = predict_and_search(&p, &milp, &PnsConfig { k0: w0 - k1, k1, delta: 0 }, &solver).unwrap();
        if !sol.value.is_some_and(|v| (v - it.optimal_value).abs() <= TOL) {
            oracle_fail += 1;
        }
        let scores: Vec<f64> = (0..w0).map(|j| rng::unit(&mut rng::seeded(keyed_hash(9, &format!("{}{j}", it.id))))).collect();
        let cfg = PnsConfig { k0: w0 / 2, k1: 2, delta: w0 / 2 + 2 };
        let wide = predict_and_search(&Prediction { probabilities: scores }, &milp, &cfg, &solver).unwrap();
        let plain = solve_milp(&milp, &solver).unwrap();
        let same = matches!((wide.value, plain.value), (Some(a), Some(b)) if (a - b).abs() <= TOL);
        if !same {
            wide_fail += 1;
        }
    }

    let medium = labeled_spi(50, 12, 2, 500);
    let mut no_worse = 0;
    for it in &medium {
        let milp = reduce(&it.instance).unwrap();
        let strategy = ModelStrategy { model, graph_seed: 0 };
        let p = Prediction { probabilities: strategy.probabilities(&it.id, &it.instance).unwrap() };
        let w0 = p.probabilities.len();
        let cfg = PnsConfig { k0: w0 / 2, k1: 2, delta: 1 };
        if anytime_compare(&milp, &p, &cfg, 20_000).unwrap().guided_first_no_worse() {
            no_worse += 1;
        }
    }
    Outcome {
        passed: oracle_fail == 0 && wide_fail == 0 && no_worse * 100 >= 60 * medium.len(),
        detail: format!(
            "oracle labels with zero radius: {oracle_fail}/50 miss the optimum; wide radius: {wide_fail}/50 differ from the plain solve; first incumbent no worse on {no_worse}/{}",
            medium.len()
        ),
    }
}

fn main() {
    // Respect `cargo test -- <filter>` style invocations that target other tests.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let mut results = Vec::new();
    let t = Instant::now();
    report(&mut results, 1, "oracle and MILP agree", t, oracle_vs_milp());
    let t = Instant::now();
    report(&mut results, 2, "strong duality", t, strong_duality());
    let t = Instant::now();
    report(&mut results, 3, "worked example", t, worked_example());
    let t = Instant::now();
    report(&mut results, 4, "WL refinement", t, wl_suite());
    let t = Instant::now();
    report(&mut results, 5, "gradient check", t, gradient_check());
    let t = Instant::now();
    report(&mut results, 6, "equivariance", t, equivariance());
    let t = Instant::now();
    report(&mut results, 7, "separation power", t, separation());
    let t = Instant::now();
    let (outcome, model) = learning_trend();
    report(&mut results, 8, "learning trend", t, outcome);
    let t = Instant::now();
    report(&mut results, 9, "predict-and-search", t, predict_and_search_checks(&model));
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
