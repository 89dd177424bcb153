use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use interdict_core::diagnostics::{self, SuiteReport};
use interdict_core::encoding::{build_graph, wl};
use interdict_core::eval::{
    anytime_compare, evaluate, EvalItem, ModelStrategy, OracleStrategy, PnsConfig, RandomTopK, Strategy,
};
use interdict_core::gnn::{checkpoint, train, Activation, GnnConfig, GnnModel, TrainConfig};
use interdict_core::instances::{generate, DelayPolicy, GenConfig, Instance, ProblemKind};
use interdict_core::milp::{solve_milp, SolverConfig};
use interdict_core::oracle::{brute_force, label_instance, LabelRecord};
use interdict_core::reduction::reduce;
use interdict_core::rng::keyed_hash;
use rayon::prelude::*;
use serde::Serialize;

use crate::io::{self, in_split, read_instances, read_labels, Split};
use crate::{
    ActivationArg, Cli, Command, CompareArgs, DiagnoseArgs, EvaluateArgs, GenerateArgs, InspectArgs, KindArg,
    LabelArgs, LabelMethod, Outcome, SolveArgs, StrategyArg, Suite, TrainArgs, WlArgs,
};

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Generate(a) => generate_cmd(a, cli.seed),
        Command::Label(a) => label_cmd(a),
        Command::Train(a) => train_cmd(a, cli.seed),
        Command::Evaluate(a) => evaluate_cmd(a, cli.seed),
        Command::Compare(a) => compare_cmd(a, cli.seed),
        Command::Diagnose(a) => diagnose_cmd(a, cli.seed),
        Command::Milp(a) => {
            let (_, inst) = pick(a)?;
            println!("{}", reduce(&inst)?.to_json()?);
            Ok(Outcome::Success)
        }
        Command::Graph(a) => {
            let (id, inst) = pick(&a.inspect)?;
            let g = build_graph(&reduce(&inst)?, a.random_dim, keyed_hash(cli.seed, &id))?;
            println!("{}", g.to_json()?);
            Ok(Outcome::Success)
        }
        Command::Wl(a) => wl_cmd(a, cli.seed),
        Command::Solve(a) => solve_cmd(a),
    }
}

fn pick(a: &InspectArgs) -> Result<(String, Instance)> {
    let all = read_instances(&a.instances)?;
    let n = all.len();
    all.into_iter().nth(a.index).ok_or_else(|| anyhow!("index {} out of range ({n} instances)", a.index))
}

fn generate_cmd(a: &GenerateArgs, seed: u64) -> Result<Outcome> {
    let kind = match a.kind {
        KindArg::Spi => ProblemKind::Spi,
        KindArg::Mfi => ProblemKind::Mfi,
    };
    let base = GenConfig {
        node_count: a.nodes,
        density: a.density,
        cost_range: (a.cost_lo, a.cost_hi),
        capacity_range: (a.capacity_lo, a.capacity_hi),
        delay: a.delay.map_or(DelayPolicy::EqualToCost, DelayPolicy::Constant),
        budget: a.budget,
        seed,
    };
    base.validate()?;
    let mut out = Vec::with_capacity(a.count);
    for i in 0..a.count {
        let id = format!("{kind}-{i:05}");
        let mut inst = generate(kind, &GenConfig { seed: keyed_hash(seed, &id), ..base.clone() })?;
        inst.set_id(id);
        out.push(inst);
    }
    io::write_jsonl(&a.out, &out)?;
    let edges: usize = out.iter().map(Instance::edge_count).sum();
    println!("wrote {} {kind} instances ({} edges in total) to {}", out.len(), edges, a.out.display());
    Ok(Outcome::Success)
}

fn label_cmd(a: &LabelArgs) -> Result<Outcome> {
    let instances = read_instances(&a.instances)?;
    let use_milp = a.method == LabelMethod::Milp;
    let labels: Vec<LabelRecord> = instances
        .par_iter()
        .map(|(id, inst)| label_instance(id, inst, use_milp).with_context(|| format!("labeling {id}")))
        .collect::<Result<_>>()?;
    io::write_jsonl(&a.out, &labels)?;
    println!("wrote {} labels to {}", labels.len(), a.out.display());
    Ok(Outcome::Success)
}

/// Instances in `split` paired with their labels.
fn labeled(instances: &Path, labels: &Path, seed: u64, split: Split) -> Result<Vec<EvalItem>> {
    let labels = read_labels(labels)?;
    read_instances(instances)?
        .into_iter()
        .filter(|(id, _)| in_split(id, seed, split))
        .map(|(id, instance)| {
            let l = labels.get(&id).ok_or_else(|| anyhow!("no label for instance {id}"))?;
            let label = l.label();
            if label.len() != instance.edge_count() {
                bail!("label for {id} has {} entries, instance has {} edges", label.len(), instance.edge_count());
            }
            Ok(EvalItem { id, instance, optimal_value: l.optimal_value, label: Some(label) })
        })
        .collect()
}

fn samples(items: &[EvalItem], random_dim: usize, seed: u64) -> Result<Vec<train::Sample>> {
    items
        .iter()
        .map(|it| {
            let g = build_graph(&reduce(&it.instance)?, random_dim, keyed_hash(seed, &it.id))?;
            Ok((g, it.label.clone().expect("labeled items")))
        })
        .collect()
}

fn train_cmd(a: &TrainArgs, seed: u64) -> Result<Outcome> {
    let cfg = GnnConfig {
        layers: a.layers,
        embed_dim: a.embed_dim,
        encoder_hidden: a.hidden.clone(),
        message_hidden: a.hidden.clone(),
        update_hidden: a.hidden.clone(),
        var_groups: 3,
        random_dim: a.random_dim,
        activation: match a.activation {
            ActivationArg::Tanh => Activation::Tanh,
            ActivationArg::Softplus => Activation::Softplus,
        },
        separate_messages: a.separate_messages,
        seed,
    };
    let model = GnnModel::new(cfg)?;
    let tc = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        seed,
        ..TrainConfig::default()
    };
    tc.validate()?;
    let train_split = if a.all { Split::All } else { Split::Train };
    let train_items = labeled(&a.instances, &a.labels, seed, train_split)?;
    let val_items = if a.all { Vec::new() } else { labeled(&a.instances, &a.labels, seed, Split::Val)? };
    if train_items.is_empty() {
        bail!("the training split is empty");
    }
    let train_set = samples(&train_items, a.random_dim, seed)?;
    let val_set = samples(&val_items, a.random_dim, seed)?;
    let (model, history) = train::train(model, &train_set, &val_set, &tc)?;
    for e in &history.epochs {
        match e.val_loss {
            Some(v) => println!("epoch {:>4}  train {:.6}  val {:.6}", e.epoch, e.train_loss, v),
            None => println!("epoch {:>4}  train {:.6}", e.epoch, e.train_loss),
        }
    }
    let mut meta = BTreeMap::new();
    meta.insert("instances".into(), a.instances.display().to_string());
    meta.insert("split_seed".into(), seed.to_string());
    meta.insert("train_count".into(), train_set.len().to_string());
    meta.insert("val_count".into(), val_set.len().to_string());
    meta.insert("epochs".into(), a.epochs.to_string());
    meta.insert("learning_rate".into(), a.lr.to_string());
    meta.insert("batch_size".into(), a.batch_size.to_string());
    if let Some(l) = history.last_train_loss() {
        meta.insert("final_train_loss".into(), l.to_string());
    }
    checkpoint::save(&model, &meta, &a.out)?;
    if let Some(path) = &a.history {
        history.save_csv(path)?;
    }
    println!("wrote checkpoint to {}", a.out.display());
    Ok(Outcome::Success)
}

fn load_model(path: &Path) -> Result<GnnModel> {
    Ok(checkpoint::load(path).with_context(|| format!("cannot load checkpoint {}", path.display()))?.0)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs, seed: u64) -> Result<Outcome> {
    let model = match &a.checkpoint {
        Some(p) => Some(load_model(p)?),
        None if a.strategy.contains(&StrategyArg::Model) => bail!("the model strategy needs --checkpoint"),
        None => None,
    };
    let items = labeled(&a.instances, &a.labels, seed, a.split)?;
    io::ensure_dir(&a.out_dir)?;
    for s in &a.strategy {
        let (name, strategy): (&str, Box<dyn Strategy + '_>) = match s {
            StrategyArg::Model => {
                ("model", Box::new(ModelStrategy { model: model.as_ref().expect("checked above"), graph_seed: seed }))
            }
            StrategyArg::Random => ("random", Box::new(RandomTopK { seed })),
            StrategyArg::Oracle => ("oracle", Box::new(OracleStrategy)),
        };
        let report = evaluate(&items, strategy.as_ref())?;
        write_json(&a.out_dir.join(format!("{name}.json")), &report)?;
        report.write_csv(BufWriter::new(File::create(a.out_dir.join(format!("{name}.csv")))?))?;
        println!("{}", report.summary());
    }
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct CompareRow {
    id: String,
    plain_status: String,
    guided_status: String,
    plain_value: Option<f64>,
    guided_value: Option<f64>,
    plain_first: Option<f64>,
    guided_first: Option<f64>,
    guided_first_no_worse: bool,
}

fn compare_cmd(a: &CompareArgs, seed: u64) -> Result<Outcome> {
    let model = load_model(&a.checkpoint)?;
    let instances: Vec<(String, Instance)> =
        read_instances(&a.instances)?.into_iter().filter(|(id, _)| in_split(id, seed, a.split)).collect();
    io::ensure_dir(&a.out_dir)?;
    let pns = PnsConfig { k0: a.k0, k1: a.k1, delta: a.delta };
    let strategy = ModelStrategy { model: &model, graph_seed: seed };
    let mut rows = Vec::with_capacity(instances.len());
    // Sequential on purpose: the two solves of a pair are timed under the same load.
    for (id, inst) in &instances {
        let milp = reduce(inst)?;
        let pred = interdict_core::gnn::Prediction { probabilities: strategy.probabilities(id, inst)? };
        let cmp = anytime_compare(&milp, &pred, &pns, a.time_limit_ms)?;
        cmp.write_csv(BufWriter::new(File::create(a.out_dir.join(format!("{id}.csv")))?))?;
        rows.push(CompareRow {
            id: id.clone(),
            plain_status: format!("{:?}", cmp.plain.status),
            guided_status: format!("{:?}", cmp.guided.status),
            plain_value: cmp.plain.value,
            guided_value: cmp.guided.value,
            plain_first: cmp.plain.incumbent_log.first().map(|e| e.value),
            guided_first: cmp.guided.incumbent_log.first().map(|e| e.value),
            guided_first_no_worse: cmp.guided_first_no_worse(),
        });
    }
    let wins = rows.iter().filter(|r| r.guided_first_no_worse).count();
    write_json(&a.out_dir.join("summary.json"), &rows)?;
    println!("predict-and-search first incumbent no worse on {wins} of {} instances", rows.len());
    Ok(Outcome::Success)
}

fn scaled(n: usize, scale: f64) -> usize {
    ((n as f64 * scale).round() as usize).max(1)
}

fn diagnose_cmd(a: &DiagnoseArgs, seed: u64) -> Result<Outcome> {
    let mut suites: Vec<Suite> = Vec::new();
    for s in &a.suite {
        match s {
            Suite::All => suites.extend([Suite::Wl, Suite::Duality, Suite::Gradcheck, Suite::OracleVsMilp]),
            other => suites.push(*other),
        }
    }
    suites.dedup();
    let mut reports: Vec<SuiteReport> = Vec::new();
    for s in suites {
        let report = match s {
            Suite::Wl => diagnostics::wl_suite(scaled(20, a.scale), scaled(50, a.scale), 3, seed)?,
            Suite::Duality => diagnostics::duality_suite(scaled(100, a.scale), 5, seed)?,
            Suite::Gradcheck => match &a.checkpoint {
                None => diagnostics::gradcheck_suite(scaled(200, a.scale), seed)?,
                Some(path) => match checkpoint::load(path) {
                    Ok((model, _)) => diagnostics::gradcheck_models(&[model], scaled(200, a.scale), 1e-5, 1e-4, seed)?,
                    Err(e) => SuiteReport {
                        name: "gradcheck".into(),
                        passed: false,
                        checked: 0,
                        failures: vec![format!("cannot load {}: {e}", path.display())],
                        detail: "checkpoint unreadable".into(),
                    },
                },
            },
            Suite::OracleVsMilp => diagnostics::oracle_vs_milp_suite(scaled(20, a.scale), scaled(10, a.scale), seed)?,
            Suite::All => unreachable!("expanded above"),
        };
        println!("{} {}: {}", if report.passed { "PASS" } else { "FAIL" }, report.name, report.detail);
        for f in &report.failures {
            println!("    {f}");
        }
        reports.push(report);
    }
    if let Some(path) = &a.report {
        write_json(path, &reports)?;
    }
    Ok(if reports.iter().all(|r| r.passed) { Outcome::Success } else { Outcome::ChecksFailed })
}

fn wl_cmd(a: &WlArgs, seed: u64) -> Result<Outcome> {
    let all = read_instances(&a.inspect.instances)?;
    let get = |i: usize| all.get(i).ok_or_else(|| anyhow!("index {i} out of range ({} instances)", all.len()));
    let (id, inst) = get(a.inspect.index)?;
    let g = build_graph(&reduce(inst)?, 0, keyed_hash(seed, id))?;
    print!("{}", wl::refine(&g, a.rounds)?.report());
    if let Some(j) = a.other {
        let (oid, other) = get(j)?;
        let h = build_graph(&reduce(other)?, 0, keyed_hash(seed, oid))?;
        let sep = wl::distinguishable(&g, &h, a.rounds)?;
        println!("{id} vs {oid}: {}", if sep { "distinguishable" } else { "indistinguishable" });
    }
    Ok(Outcome::Success)
}

fn solve_cmd(a: &SolveArgs) -> Result<Outcome> {
    let (id, inst) = pick(&a.inspect)?;
    let milp = reduce(&inst)?;
    let cfg = SolverConfig { node_limit: a.node_limit, time_limit_ms: a.time_limit_ms, ..SolverConfig::default() };
    let sol = solve_milp(&milp, &cfg)?;
    println!(
        "{id}: status {:?}, value {:?}, bound {:?}, {} nodes, {:.1} ms",
        sol.status, sol.value, sol.best_bound, sol.node_count, sol.wall_time_ms
    );
    if let Some(x) = sol.interdiction(&milp) {
        let chosen: Vec<usize> = x.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        println!("interdicted edges: {chosen:?}");
    }
    if let Some(path) = &a.incumbents {
        sol.write_incumbent_csv(BufWriter::new(File::create(path)?))?;
    }
    match brute_force(&inst) {
        Ok(o) => println!("oracle value {} over {} decisions", o.value, o.evaluated_count),
        Err(e) => println!("oracle skipped: {e}"),
    }
    Ok(Outcome::Success)
}
