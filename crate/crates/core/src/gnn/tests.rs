use std::collections::BTreeMap;

use super::*;
use crate::encoding::{build_graph, permute_graph, random_permutations};
use crate::instances::{generate_mfi, generate_spi, GenConfig, SpiInstance};
use crate::reduction::{build_mfi_milp, dualize_spi};

fn small_config(seed: u64) -> GnnConfig {
    GnnConfig {
        layers: 2,
        embed_dim: 8,
        encoder_hidden: vec![],
        message_hidden: vec![],
        update_hidden: vec![],
        var_groups: 2,
        random_dim: 0,
        activation: Activation::Tanh,
        separate_messages: false,
        seed,
    }
}

fn spi_graph(n: usize, seed: u64, r: usize) -> MmilpGraph {
    let cfg = GenConfig { node_count: n, budget: 2.0, seed, ..GenConfig::default() };
    let inst = generate_spi(&cfg).unwrap();
    build_graph(&dualize_spi(&inst).unwrap(), r, seed).unwrap()
}

fn worked_graph() -> MmilpGraph {
    build_graph(&dualize_spi(&SpiInstance::worked_example()).unwrap(), 0, 0).unwrap()
}

#[test]
fn parameter_count_matches_hand_count() {
    // encoders 2*(5*8+8) + (4*8+8) = 136
    // per layer: messages 2*(17*8+8) = 288, updates 3*(16*8+8) = 408
    // readout 8+1
    let cfg = small_config(0);
    assert_eq!(cfg.param_count(), 136 + 2 * (288 + 408) + 9);
    let model = GnnModel::new(cfg.clone()).unwrap();
    assert_eq!(model.params.param_count(), 1537);
    for c in [GnnConfig::default(), GnnConfig { separate_messages: true, random_dim: 3, ..GnnConfig::default() }] {
        assert_eq!(GnnModel::new(c.clone()).unwrap().params.param_count(), c.param_count());
    }
}

#[test]
fn init_is_seeded() {
    let a = GnnModel::new(small_config(1)).unwrap();
    let b = GnnModel::new(small_config(1)).unwrap();
    let c = GnnModel::new(small_config(2)).unwrap();
    assert_eq!(a.params, b.params);
    assert_ne!(a.params, c.params);
}

#[test]
fn zero_layers_rejected() {
    let cfg = GnnConfig { layers: 0, ..small_config(0) };
    assert!(GnnModel::new(cfg).is_err());
    let cfg = GnnConfig { embed_dim: 0, ..small_config(0) };
    assert!(cfg.validate().is_err());
}

#[test]
fn output_is_probability_per_edge() {
    let g = worked_graph();
    let model = GnnModel::new(small_config(3)).unwrap();
    let p = model.forward(&g).unwrap();
    assert_eq!(p.probabilities.len(), 12);
    assert!(p.probabilities.iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn dimension_mismatch_rejected() {
    let g = spi_graph(5, 1, 2);
    let model = GnnModel::new(small_config(0)).unwrap();
    assert!(model.forward(&g).is_err());
    let mfi = generate_mfi(&GenConfig { node_count: 5, seed: 1, ..GenConfig::default() }).unwrap();
    let g3 = build_graph(&build_mfi_milp(&mfi).unwrap(), 0, 0).unwrap();
    assert!(model.forward(&g3).is_err());
}

#[test]
fn loss_closed_forms() {
    let half = Prediction { probabilities: vec![0.5; 4] };
    let l = loss(&half, &[true, false, true, false]).unwrap();
    assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    let exact = Prediction { probabilities: vec![1.0, 0.0] };
    assert!(loss(&exact, &[true, false]).unwrap() < 1e-6);
    let wrong = Prediction { probabilities: vec![0.0] };
    assert!((loss(&wrong, &[true]).unwrap() + PROB_CLAMP.ln()).abs() < 1e-9);
    assert!(loss(&half, &[true]).is_err());
}

#[test]
fn worked_example_loss_is_finite_positive() {
    let g = worked_graph();
    let model = GnnModel::new(small_config(4)).unwrap();
    let mut label = vec![false; 12];
    label[8] = true;
    let l = loss(&model.forward(&g).unwrap(), &label).unwrap();
    assert!(l.is_finite() && l > 0.0);
}

#[test]
fn gradients_match_finite_differences() {
    let configs = [
        small_config(5),
        GnnConfig { activation: Activation::Softplus, ..small_config(6) },
        GnnConfig { separate_messages: true, ..small_config(7) },
        GnnConfig { encoder_hidden: vec![4], message_hidden: vec![5], update_hidden: vec![3], ..small_config(8) },
        GnnConfig { random_dim: 2, layers: 3, embed_dim: 4, ..small_config(9) },
    ];
    for (i, cfg) in configs.iter().enumerate() {
        let g = spi_graph(5, 10 + i as u64, cfg.random_dim);
        let mut model = GnnModel::new(cfg.clone()).unwrap();
        train::fit_scalers(&mut model, &[&g]);
        let label: Vec<bool> = (0..g.group_size(0)).map(|j| j % 3 == 0).collect();
        let report = gradient_check(&model, &g, &label, 60, 1e-5, i as u64).unwrap();
        assert!(report.max_rel_error < 1e-4, "config {i}: {report:?}");
    }
}

#[test]
fn absent_group_has_zero_gradient() {
    let cfg = GnnConfig { var_groups: 3, ..small_config(11) };
    let model = GnnModel::new(cfg).unwrap();
    let g = worked_graph();
    let (_, grad) = model.backward(&g, &[false; 12]).unwrap();
    for (name, t) in grad.named_tensors() {
        if name.contains(".w2") {
            assert!(t.iter().all(|&v| v == 0.0), "{name}");
        }
    }
    let total: f64 = grad.flatten().iter().map(|v| v.abs()).sum();
    assert!(total > 0.0);
}

#[test]
fn permutation_equivariance() {
    let model = GnnModel::new(GnnConfig { random_dim: 2, ..small_config(12) }).unwrap();
    for seed in 0..5 {
        let g = spi_graph(6, seed, 2);
        let base = model.forward(&g).unwrap().probabilities;
        let perms = random_permutations(&g, seed + 100);
        let pg = permute_graph(&g, &perms).unwrap();
        let out = model.forward(&pg).unwrap().probabilities;
        for (old, &new) in perms[0].iter().enumerate() {
            assert!((base[old] - out[new]).abs() < 1e-9);
        }
    }
}

#[test]
fn symmetric_vertices_get_equal_outputs() {
    // Two parallel source-sink routes with identical data: edges 0/2 and 1/3
    // are interchangeable.
    let inst = SpiInstance {
        id: None,
        node_count: 4,
        source: 0,
        sink: 3,
        edges: vec![
            crate::instances::SpiEdge { tail: 0, head: 1, cost: 2.0, delay: 1.0 },
            crate::instances::SpiEdge { tail: 1, head: 3, cost: 2.0, delay: 1.0 },
            crate::instances::SpiEdge { tail: 0, head: 2, cost: 2.0, delay: 1.0 },
            crate::instances::SpiEdge { tail: 2, head: 3, cost: 2.0, delay: 1.0 },
        ],
        budget: 1,
    };
    let g = build_graph(&dualize_spi(&inst).unwrap(), 0, 0).unwrap();
    for seed in 0..4 {
        let p = GnnModel::new(small_config(seed)).unwrap().forward(&g).unwrap().probabilities;
        assert!((p[0] - p[2]).abs() < 1e-12);
        assert!((p[1] - p[3]).abs() < 1e-12);
    }
}

fn tiny_dataset(count: usize) -> Vec<train::Sample> {
    (0..count as u64)
        .map(|s| {
            let g = spi_graph(5, 200 + s, 0);
            let n = g.group_size(0);
            let label = (0..n).map(|j| (j + s as usize) % 4 == 0).collect();
            (g, label)
        })
        .collect()
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let data = tiny_dataset(3);
    let model = GnnModel::new(small_config(13)).unwrap();
    let before = model.params.clone();
    let cfg = TrainConfig { epochs: 2, learning_rate: 0.0, batch_size: 2, ..TrainConfig::default() };
    let (after, history) = train(model, &data, &[], &cfg).unwrap();
    assert_eq!(before, after.params);
    assert_eq!(history.epochs.len(), 2);
}

#[test]
fn seeded_training_is_reproducible() {
    let data = tiny_dataset(4);
    let cfg = TrainConfig { epochs: 3, learning_rate: 1e-3, batch_size: 3, ..TrainConfig::default() };
    let run = || train(GnnModel::new(small_config(14)).unwrap(), &data, &data[..1], &cfg).unwrap();
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(ha, hb);
    assert_eq!(a.params, b.params);
    assert!(ha.epochs.iter().all(|e| e.val_loss.is_some()));
    let mut csv = Vec::new();
    ha.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
}

#[test]
fn training_reduces_loss() {
    let data = tiny_dataset(4);
    let model = GnnModel::new(small_config(15)).unwrap();
    let cfg = TrainConfig { epochs: 60, learning_rate: 1e-2, batch_size: 4, ..TrainConfig::default() };
    let (_, h) = train(model, &data, &[], &cfg).unwrap();
    assert!(h.epochs.last().unwrap().train_loss < h.epochs[0].train_loss);
}

#[test]
fn checkpoint_round_trips_exactly() {
    let data = tiny_dataset(2);
    let cfg = TrainConfig { epochs: 2, learning_rate: 1e-3, ..TrainConfig::default() };
    let (model, _) = train(GnnModel::new(small_config(16)).unwrap(), &data, &[], &cfg).unwrap();
    let mut meta = BTreeMap::new();
    meta.insert("epochs".to_string(), "2".to_string());
    let text = checkpoint::to_json(&model, &meta).unwrap();
    let (back, meta_back) = checkpoint::from_json(&text).unwrap();
    assert_eq!(back, model);
    assert_eq!(meta_back, meta);
    assert_eq!(checkpoint::to_json(&back, &meta).unwrap(), text);
    let bad = text.replacen("\"format_version\":1", "\"format_version\":9", 1);
    assert!(matches!(checkpoint::from_json(&bad), Err(crate::Error::FormatVersion(9))));
}

