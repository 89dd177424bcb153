//! Interdiction instances, seeded generators and the JSON instance schema.
//!
//! Instance JSON (format_version 1):
//!
//! ```text
//! {"kind":"spi"|"mfi","nodes":N,"source":s,"sink":t,
//!  "edges":[[tail,head,p1,p2],...],"budget":b,"format_version":1,"id":"optional"}
//! ```
//!
//! For `spi` the edge payload is `(cost, delay)` and the budget is an integer
//! cardinality; for `mfi` it is `(capacity, removal_cost)` and the budget is a
//! real-valued removal allowance. Generated edges are ordered
//! lexicographically by `(tail, head)`; the source is node 0 and the sink is
//! node `nodes - 1`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const FORMAT_VERSION: u32 = 1;
const MAX_GENERATION_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiEdge {
    pub tail: usize,
    pub head: usize,
    pub cost: f64,
    pub delay: f64,
}

/// Shortest-path interdiction: the leader picks at most `budget` edges, each
/// interdicted edge gets its length increased from `cost` to `cost + delay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct SpiInstance {
    pub id: Option<String>,
    pub node_count: usize,
    pub source: usize,
    pub sink: usize,
    pub edges: Vec<SpiEdge>,
    pub budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfiEdge {
    pub tail: usize,
    pub head: usize,
    pub capacity: f64,
    pub removal_cost: f64,
}

/// Max-flow interdiction: the leader removes edges with total removal cost at
/// most `budget`, the follower then sends a maximum flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct MfiInstance {
    pub id: Option<String>,
    pub node_count: usize,
    pub source: usize,
    pub sink: usize,
    pub edges: Vec<MfiEdge>,
    pub budget: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Spi,
    Mfi,
}

impl ProblemKind {
    /// Spi is max-min (leader maximizes), Mfi is min-max.
    pub fn leader_maximizes(self) -> bool {
        matches!(self, ProblemKind::Spi)
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProblemKind::Spi => "spi",
            ProblemKind::Mfi => "mfi",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub enum Instance {
    Spi(SpiInstance),
    Mfi(MfiInstance),
}

impl Instance {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Instance::Spi(_) => ProblemKind::Spi,
            Instance::Mfi(_) => ProblemKind::Mfi,
        }
    }

    pub fn edge_count(&self) -> usize {
        match self {
            Instance::Spi(i) => i.edges.len(),
            Instance::Mfi(i) => i.edges.len(),
        }
    }

    pub fn id(&self) -> Option<&str> {
        match self {
            Instance::Spi(i) => i.id.as_deref(),
            Instance::Mfi(i) => i.id.as_deref(),
        }
    }

    pub fn set_id(&mut self, id: impl Into<String>) {
        let id = Some(id.into());
        match self {
            Instance::Spi(i) => i.id = id,
            Instance::Mfi(i) => i.id = id,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Instance::Spi(i) => i.validate(),
            Instance::Mfi(i) => i.validate(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl From<SpiInstance> for Instance {
    fn from(i: SpiInstance) -> Self {
        Instance::Spi(i)
    }
}

impl From<MfiInstance> for Instance {
    fn from(i: MfiInstance) -> Self {
        Instance::Mfi(i)
    }
}

fn check_graph(
    node_count: usize,
    source: usize,
    sink: usize,
    arcs: impl Iterator<Item = (usize, usize)> + Clone,
) -> Result<()> {
    if node_count < 2 {
        return Err(Error::InvalidInstance("node_count must be at least 2".into()));
    }
    if source >= node_count || sink >= node_count {
        return Err(Error::InvalidInstance("source or sink out of range".into()));
    }
    if source == sink {
        return Err(Error::InvalidInstance("source equals sink".into()));
    }
    for (k, (t, h)) in arcs.clone().enumerate() {
        if t >= node_count || h >= node_count {
            return Err(Error::InvalidInstance(format!("edge {k} endpoint out of range")));
        }
        if t == h {
            return Err(Error::InvalidInstance(format!("edge {k} is a self-loop")));
        }
    }
    if !reachable(node_count, arcs, source, sink) {
        return Err(Error::InvalidInstance("sink not reachable from source".into()));
    }
    Ok(())
}

fn check_nonneg(what: &str, k: usize, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidInstance(format!("edge {k} has invalid {what} {v}")));
    }
    Ok(())
}

/// Breadth-first reachability over an arc list.
pub fn reachable(
    node_count: usize,
    arcs: impl Iterator<Item = (usize, usize)>,
    source: usize,
    sink: usize,
) -> bool {
    let mut adj = vec![Vec::new(); node_count];
    for (t, h) in arcs {
        adj[t].push(h);
    }
    let mut seen = vec![false; node_count];
    let mut queue = VecDeque::from([source]);
    seen[source] = true;
    while let Some(u) = queue.pop_front() {
        if u == sink {
            return true;
        }
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    false
}

impl SpiInstance {
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + Clone + '_ {
        self.edges.iter().map(|e| (e.tail, e.head))
    }

    pub fn validate(&self) -> Result<()> {
        for (k, e) in self.edges.iter().enumerate() {
            check_nonneg("cost", k, e.cost)?;
            check_nonneg("delay", k, e.delay)?;
        }
        check_graph(self.node_count, self.source, self.sink, self.arcs())
    }

    /// The 7-node, 12-edge worked example: source 0, sink 6, one interdiction,
    /// unit delay on every edge.
    pub fn worked_example() -> Self {
        let raw = [
            (0, 1, 9.0),
            (0, 4, 3.0),
            (0, 3, 3.0),
            (1, 2, 4.0),
            (1, 3, 1.0),
            (4, 3, 2.0),
            (4, 5, 3.0),
            (3, 2, 8.0),
            (3, 6, 4.0),
            (3, 5, 6.0),
            (2, 6, 5.0),
            (5, 6, 4.0),
        ];
        SpiInstance {
            id: Some("worked-example".into()),
            node_count: 7,
            source: 0,
            sink: 6,
            edges: raw
                .iter()
                .map(|&(tail, head, cost)| SpiEdge { tail, head, cost, delay: 1.0 })
                .collect(),
            budget: 1,
        }
    }
}

impl MfiInstance {
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + Clone + '_ {
        self.edges.iter().map(|e| (e.tail, e.head))
    }

    pub fn validate(&self) -> Result<()> {
        for (k, e) in self.edges.iter().enumerate() {
            check_nonneg("capacity", k, e.capacity)?;
            check_nonneg("removal cost", k, e.removal_cost)?;
        }
        if !self.budget.is_finite() || self.budget < 0.0 {
            return Err(Error::InvalidInstance(format!("invalid budget {}", self.budget)));
        }
        check_graph(self.node_count, self.source, self.sink, self.arcs())
    }
}

/// How interdiction delays are assigned to generated shortest-path edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "value")]
pub enum DelayPolicy {
    /// `d = c`: an interdicted edge doubles in length.
    EqualToCost,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub node_count: usize,
    /// Probability that an ordered pair `(i, j)`, `i != j`, becomes an edge.
    pub density: f64,
    pub cost_range: (f64, f64),
    pub capacity_range: (f64, f64),
    pub delay: DelayPolicy,
    /// Cardinality budget for spi (must be integral), removal budget for mfi.
    pub budget: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            node_count: 20,
            density: 1.0,
            cost_range: (1.0, 10.0),
            capacity_range: (10.0, 60.0),
            delay: DelayPolicy::EqualToCost,
            budget: 15.0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.node_count < 2 {
            return bad(format!("node_count {} < 2", self.node_count));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density {} outside (0, 1]", self.density));
        }
        for (name, (lo, hi)) in [("cost_range", self.cost_range), ("capacity_range", self.capacity_range)] {
            if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
                return bad(format!("{name} ({lo}, {hi}) must satisfy 0 <= lo <= hi"));
            }
        }
        if let DelayPolicy::Constant(d) = self.delay {
            if !d.is_finite() || d < 0.0 {
                return bad(format!("constant delay {d} must be nonnegative"));
            }
        }
        if !self.budget.is_finite() || self.budget < 0.0 {
            return bad(format!("budget {} must be nonnegative", self.budget));
        }
        Ok(())
    }

    fn pairs(&self, rng: &mut rng::Rng) -> Vec<(usize, usize)> {
        let n = self.node_count;
        let mut out = Vec::with_capacity(n * (n - 1));
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if self.density >= 1.0 || rng::unit(rng) < self.density {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Seeded shortest-path interdiction instance: edges are drawn in
/// `(tail, head)` order, each followed by its cost draw.
pub fn generate_spi(cfg: &GenConfig) -> Result<SpiInstance> {
    cfg.validate()?;
    if cfg.budget.fract() != 0.0 {
        return Err(Error::InvalidConfig(format!("spi budget {} must be integral", cfg.budget)));
    }
    let n = cfg.node_count;
    let mut rng = rng::seeded(cfg.seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let pairs = cfg.pairs(&mut rng);
        if !reachable(n, pairs.iter().copied(), 0, n - 1) {
            continue;
        }
        let edges = pairs
            .into_iter()
            .map(|(tail, head)| {
                let cost = rng::uniform(&mut rng, cfg.cost_range.0, cfg.cost_range.1);
                let delay = match cfg.delay {
                    DelayPolicy::EqualToCost => cost,
                    DelayPolicy::Constant(d) => d,
                };
                SpiEdge { tail, head, cost, delay }
            })
            .collect();
        return Ok(SpiInstance {
            id: None,
            node_count: n,
            source: 0,
            sink: n - 1,
            edges,
            budget: cfg.budget as usize,
        });
    }
    Err(Error::GenerationFailed { attempts: MAX_GENERATION_ATTEMPTS })
}

/// Seeded max-flow interdiction instance: per edge, capacity then removal cost.
pub fn generate_mfi(cfg: &GenConfig) -> Result<MfiInstance> {
    cfg.validate()?;
    let n = cfg.node_count;
    let mut rng = rng::seeded(cfg.seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let pairs = cfg.pairs(&mut rng);
        if !reachable(n, pairs.iter().copied(), 0, n - 1) {
            continue;
        }
        let edges = pairs
            .into_iter()
            .map(|(tail, head)| {
                let capacity = rng::uniform(&mut rng, cfg.capacity_range.0, cfg.capacity_range.1);
                let removal_cost = rng::uniform(&mut rng, cfg.cost_range.0, cfg.cost_range.1);
                MfiEdge { tail, head, capacity, removal_cost }
            })
            .collect();
        return Ok(MfiInstance {
            id: None,
            node_count: n,
            source: 0,
            sink: n - 1,
            edges,
            budget: cfg.budget,
        });
    }
    Err(Error::GenerationFailed { attempts: MAX_GENERATION_ATTEMPTS })
}

pub fn generate(kind: ProblemKind, cfg: &GenConfig) -> Result<Instance> {
    Ok(match kind {
        ProblemKind::Spi => generate_spi(cfg)?.into(),
        ProblemKind::Mfi => generate_mfi(cfg)?.into(),
    })
}

// On-disk representation shared by both instance kinds.
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    kind: ProblemKind,
    nodes: usize,
    source: usize,
    sink: usize,
    edges: Vec<(usize, usize, f64, f64)>,
    budget: serde_json::Number,
    format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
}

impl From<Instance> for InstanceFile {
    fn from(inst: Instance) -> Self {
        match inst {
            Instance::Spi(i) => InstanceFile {
                kind: ProblemKind::Spi,
                nodes: i.node_count,
                source: i.source,
                sink: i.sink,
                edges: i.edges.iter().map(|e| (e.tail, e.head, e.cost, e.delay)).collect(),
                budget: serde_json::Number::from(i.budget as u64),
                format_version: FORMAT_VERSION,
                id: i.id,
            },
            Instance::Mfi(i) => InstanceFile {
                kind: ProblemKind::Mfi,
                nodes: i.node_count,
                source: i.source,
                sink: i.sink,
                edges: i
                    .edges
                    .iter()
                    .map(|e| (e.tail, e.head, e.capacity, e.removal_cost))
                    .collect(),
                budget: serde_json::Number::from_f64(i.budget).unwrap_or_else(|| 0.into()),
                format_version: FORMAT_VERSION,
                id: i.id,
            },
        }
    }
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        if f.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion(f.format_version));
        }
        let inst = match f.kind {
            ProblemKind::Spi => {
                let budget = f
                    .budget
                    .as_u64()
                    .or_else(|| f.budget.as_f64().filter(|b| b.fract() == 0.0 && *b >= 0.0).map(|b| b as u64))
                    .ok_or_else(|| Error::InvalidInstance("spi budget must be a nonnegative integer".into()))?;
                Instance::Spi(SpiInstance {
                    id: f.id,
                    node_count: f.nodes,
                    source: f.source,
                    sink: f.sink,
                    edges: f
                        .edges
                        .into_iter()
                        .map(|(tail, head, cost, delay)| SpiEdge { tail, head, cost, delay })
                        .collect(),
                    budget: budget as usize,
                })
            }
            ProblemKind::Mfi => Instance::Mfi(MfiInstance {
                id: f.id,
                node_count: f.nodes,
                source: f.source,
                sink: f.sink,
                edges: f
                    .edges
                    .into_iter()
                    .map(|(tail, head, capacity, removal_cost)| MfiEdge { tail, head, capacity, removal_cost })
                    .collect(),
                budget: f.budget.as_f64().unwrap_or(f64::NAN),
            }),
        };
        inst.validate()?;
        Ok(inst)
    }
}

impl From<SpiInstance> for InstanceFile {
    fn from(i: SpiInstance) -> Self {
        Instance::Spi(i).into()
    }
}

impl From<MfiInstance> for InstanceFile {
    fn from(i: MfiInstance) -> Self {
        Instance::Mfi(i).into()
    }
}

impl TryFrom<InstanceFile> for SpiInstance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        match Instance::try_from(f)? {
            Instance::Spi(i) => Ok(i),
            Instance::Mfi(_) => Err(Error::InvalidInstance("expected kind \"spi\"".into())),
        }
    }
}

impl TryFrom<InstanceFile> for MfiInstance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        match Instance::try_from(f)? {
            Instance::Mfi(i) => Ok(i),
            Instance::Spi(_) => Err(Error::InvalidInstance("expected kind \"mfi\"".into())),
        }
    }
}
