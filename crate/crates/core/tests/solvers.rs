//! Inner solvers, oracle and MILP checked against references written here.

use interdict_core::inner::{max_flow, shortest_path};
use interdict_core::instances::{generate_mfi, generate_spi, GenConfig, Instance, MfiInstance, SpiInstance};
use interdict_core::milp::{solve_milp, MilpStatus, SolverConfig};
use interdict_core::oracle::{brute_force, budget_feasible, evaluate_decision};
use interdict_core::reduction::reduce;
use interdict_core::rng;

/// Length of the shortest simple s-t path, by enumerating every simple path.
fn enumerate_paths(inst: &SpiInstance, x: &[bool]) -> f64 {
    fn dfs(inst: &SpiInstance, x: &[bool], v: usize, seen: &mut Vec<bool>, len: f64, best: &mut f64) {
        if v == inst.sink {
            *best = best.min(len);
            return;
        }
        for (e, &xe) in inst.edges.iter().zip(x) {
            if e.tail == v && !seen[e.head] {
                seen[e.head] = true;
                dfs(inst, x, e.head, seen, len + e.cost + if xe { e.delay } else { 0.0 }, best);
                seen[e.head] = false;
            }
        }
    }
    let mut seen = vec![false; inst.node_count];
    seen[inst.source] = true;
    let mut best = f64::INFINITY;
    dfs(inst, x, inst.source, &mut seen, 0.0, &mut best);
    best
}

fn min_cut(inst: &MfiInstance, x: &[bool]) -> f64 {
    let n = inst.node_count;
    let mut best = f64::INFINITY;
    for mask in 0u64..(1 << n) {
        if mask >> inst.source & 1 == 0 || mask >> inst.sink & 1 == 1 {
            continue;
        }
        let cut: f64 = inst
            .edges
            .iter()
            .zip(x)
            .filter(|(e, &xe)| !xe && mask >> e.tail & 1 == 1 && mask >> e.head & 1 == 0)
            .map(|(e, _)| e.capacity)
            .sum();
        best = best.min(cut);
    }
    best
}

fn random_mask(r: &mut rng::Rng, m: usize, p: f64) -> Vec<bool> {
    (0..m).map(|_| rng::unit(r) < p).collect()
}

#[test]
fn dijkstra_matches_path_enumeration() {
    for seed in 0..60 {
        let n = 2 + (seed % 5) as usize;
        let density = 0.5 + 0.1 * (seed % 5) as f64;
        let Ok(inst) = generate_spi(&GenConfig { node_count: n, density, budget: 1.0, seed, ..GenConfig::default() }) else {
            continue;
        };
        let mut r = rng::seeded(seed);
        for _ in 0..4 {
            let x = random_mask(&mut r, inst.edges.len(), 0.4);
            let got = shortest_path(&inst, &x).unwrap();
            let want = enumerate_paths(&inst, &x);
            assert!((got.length_or_inf() - want).abs() < 1e-9, "seed {seed}: {got:?} vs {want}");
            if !want.is_finite() {
                assert!(got.path.is_empty());
                continue;
            }
            // The reported node sequence is a real s-t walk with the reported length.
            assert_eq!(got.path.first(), Some(&inst.source));
            assert_eq!(got.path.last(), Some(&inst.sink));
            let len: f64 = got
                .path
                .windows(2)
                .map(|w| {
                    let k = inst.edges.iter().position(|e| e.tail == w[0] && e.head == w[1]).expect("path uses an edge");
                    inst.edges[k].cost + if x[k] { inst.edges[k].delay } else { 0.0 }
                })
                .sum();
            assert!((len - want).abs() < 1e-9, "seed {seed}: path length {len} vs {want}");
        }
    }
}

#[test]
fn edmonds_karp_matches_min_cut() {
    for seed in 0..60 {
        let n = 2 + (seed % 6) as usize;
        let cfg = GenConfig { node_count: n, density: 0.7, budget: 3.0, seed, ..GenConfig::default() };
        let Ok(inst) = generate_mfi(&cfg) else { continue };
        let mut r = rng::seeded(seed + 1000);
        for _ in 0..4 {
            let x = random_mask(&mut r, inst.edges.len(), 0.3);
            let got = max_flow(&inst, &x).unwrap();
            let want = min_cut(&inst, &x);
            assert!((got.value - want).abs() < 1e-9, "seed {seed}: {} vs {want}", got.value);
            for (k, e) in inst.edges.iter().enumerate() {
                let f = got.edge_flow[k];
                assert!(f >= -1e-12 && f <= e.capacity + 1e-9);
                if x[k] {
                    assert_eq!(f, 0.0);
                }
            }
        }
    }
}

#[test]
fn milp_decisions_are_feasible_and_optimal() {
    for seed in 0..20 {
        let inst = if seed % 2 == 0 {
            Instance::Spi(generate_spi(&GenConfig { node_count: 5, budget: 2.0, seed, ..GenConfig::default() }).unwrap())
        } else {
            let cfg = GenConfig { node_count: 5, cost_range: (0.5, 1.5), budget: 2.0, seed, ..GenConfig::default() };
            Instance::Mfi(generate_mfi(&cfg).unwrap())
        };
        let milp = reduce(&inst).unwrap();
        let sol = solve_milp(&milp, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        let x = sol.interdiction(&milp).unwrap();
        assert!(budget_feasible(&inst, &x));
        let follower = match &inst {
            Instance::Spi(s) => enumerate_paths(s, &x),
            Instance::Mfi(m) => min_cut(m, &x),
        };
        assert!((follower - sol.value.unwrap()).abs() < 1e-6);
        let oracle = brute_force(&inst).unwrap();
        assert!((oracle.value - follower).abs() < 1e-6);
        assert!(oracle.all_optima.contains(&oracle.best_x));
        assert!((evaluate_decision(&inst, &oracle.best_x).unwrap() - oracle.value).abs() < 1e-12);
    }
}

#[test]
fn instance_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut inst = Instance::Spi(SpiInstance::worked_example());
    inst.set_id("example");
    let path = dir.path().join("one.json");
    std::fs::write(&path, inst.to_json().unwrap()).unwrap();
    let back = Instance::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, inst);
    assert_eq!(back.id(), Some("example"));
}
