//! Single-level MILP models of interdiction problems.
//!
//! Shortest-path interdiction is reduced by dualizing the follower's
//! shortest-path LP for a fixed leader decision and releasing the decision
//! again, giving one maximization over `(x, pi)`. Max-flow interdiction is
//! already single level through its min-cut formulation and is written down
//! directly.
//!
//! Variables are kept in explicit groups: group 0 holds the interdiction
//! decisions in instance edge order, groups 1.. hold the remaining (dual)
//! variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{Instance, MfiInstance, ProblemKind, SpiInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    pub objective: f64,
}

impl Variable {
    pub fn binary(name: impl Into<String>, objective: f64) -> Self {
        Variable { name: name.into(), lower: 0.0, upper: 1.0, kind: VarKind::Binary, objective }
    }

    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> Self {
        Variable { name: name.into(), lower, upper, kind: VarKind::Continuous, objective }
    }

    pub fn is_integer(&self) -> bool {
        self.kind == VarKind::Binary
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarGroup {
    pub id: usize,
    pub vars: Vec<Variable>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarRef {
    pub group: usize,
    pub index: usize,
}

impl VarRef {
    pub fn new(group: usize, index: usize) -> Self {
        VarRef { group, index }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Relation {
    /// -1 / 0 / +1 for <= / = / >=.
    pub fn code(self) -> f64 {
        match self {
            Relation::Le => -1.0,
            Relation::Eq => 0.0,
            Relation::Ge => 1.0,
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs + tol,
            Relation::Eq => (lhs - rhs).abs() <= tol,
            Relation::Ge => lhs >= rhs - tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintTag {
    Dual,
    Budget,
    Other,
}

impl ConstraintTag {
    pub fn code(self) -> f64 {
        match self {
            ConstraintTag::Dual => 0.0,
            ConstraintTag::Budget => 1.0,
            ConstraintTag::Other => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<(VarRef, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub tag: ConstraintTag,
}

/// Where a MILP came from; `edges[k]` is the arc behind W0 variable `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ProblemKind,
    pub instance_id: Option<String>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpInstance {
    pub sense: Sense,
    pub groups: Vec<VarGroup>,
    pub constraints: Vec<Constraint>,
    pub provenance: Provenance,
}

impl MilpInstance {
    pub fn var(&self, r: VarRef) -> &Variable {
        &self.groups[r.group].vars[r.index]
    }

    pub fn var_count(&self) -> usize {
        self.groups.iter().map(|g| g.vars.len()).sum()
    }

    pub fn interdiction_count(&self) -> usize {
        self.groups[0].vars.len()
    }

    /// Offset of each group in the flat variable order (group 0 first).
    pub fn group_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.groups
            .iter()
            .map(|g| {
                let o = acc;
                acc += g.vars.len();
                o
            })
            .collect()
    }

    pub fn flat_index(&self, r: VarRef) -> usize {
        self.groups[..r.group].iter().map(|g| g.vars.len()).sum::<usize>() + r.index
    }

    pub fn flat_vars(&self) -> impl Iterator<Item = &Variable> {
        self.groups.iter().flat_map(|g| g.vars.iter())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMilp(m));
        if self.groups.is_empty() || self.groups[0].id != 0 {
            return bad("group 0 must come first".into());
        }
        for (pos, g) in self.groups.iter().enumerate() {
            if g.id != pos {
                return bad(format!("group at position {pos} has id {}", g.id));
            }
            if g.vars.is_empty() {
                return bad(format!("group {pos} is empty"));
            }
            for v in &g.vars {
                if !(v.lower.is_finite() && v.upper.is_finite()) || v.lower > v.upper {
                    return bad(format!("variable {} has invalid bounds [{}, {}]", v.name, v.lower, v.upper));
                }
            }
        }
        if self.groups[0].vars.iter().any(|v| v.kind != VarKind::Binary) {
            return bad("interdiction variables must be binary".into());
        }
        if self.groups[0].vars.len() != self.provenance.edges.len() {
            return bad("group 0 does not match the edge list".into());
        }
        for (k, c) in self.constraints.iter().enumerate() {
            for (r, _) in &c.coeffs {
                if r.group >= self.groups.len() || r.index >= self.groups[r.group].vars.len() {
                    return bad(format!("constraint {k} references missing variable {r:?}"));
                }
            }
        }
        if !self.constraints.iter().any(|c| c.tag == ConstraintTag::Budget) {
            return bad("no budget constraint".into());
        }
        Ok(())
    }

    /// Objective value of a flat assignment.
    pub fn objective_value(&self, flat: &[f64]) -> f64 {
        self.flat_vars().zip(flat).map(|(v, x)| v.objective * x).sum()
    }

    /// Largest constraint or bound violation of a flat assignment.
    pub fn max_violation(&self, flat: &[f64]) -> f64 {
        let offsets = self.group_offsets();
        let mut worst: f64 = 0.0;
        for (v, &x) in self.flat_vars().zip(flat) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|(r, a)| a * flat[offsets[r.group] + r.index]).sum();
            let viol = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MilpExport { format_version: 1, milp: self })?)
    }
}

#[derive(Serialize)]
struct MilpExport<'a> {
    format_version: u32,
    #[serde(flatten)]
    milp: &'a MilpInstance,
}

/// Dual bound on the node potentials: no potential difference can exceed the
/// total length of all edges at full interdiction.
fn potential_bound(inst: &SpiInstance) -> f64 {
    inst.edges.iter().map(|e| e.cost + e.delay).sum()
}

/// Dualize-and-combine for shortest-path interdiction:
///
/// ```text
/// max  pi_s - pi_t
/// s.t. pi_i - pi_j - d_ij x_ij <= c_ij   for every edge (i, j)
///      sum x_ij <= budget
///      x binary, pi continuous in [-B, B], pi_t = 0
/// ```
pub fn dualize_spi(inst: &SpiInstance) -> Result<MilpInstance> {
    inst.validate()?;
    let bound = potential_bound(inst);
    let x_vars = inst
        .edges
        .iter()
        .map(|e| Variable::binary(format!("x_{}_{}", e.tail, e.head), 0.0))
        .collect();
    let pi_vars = (0..inst.node_count)
        .map(|i| {
            let obj = if i == inst.source { 1.0 } else if i == inst.sink { -1.0 } else { 0.0 };
            let (lo, hi) = if i == inst.sink { (0.0, 0.0) } else { (-bound, bound) };
            Variable::continuous(format!("pi_{i}"), lo, hi, obj)
        })
        .collect();

    let mut constraints: Vec<Constraint> = inst
        .edges
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let mut coeffs = vec![(VarRef::new(1, e.tail), 1.0), (VarRef::new(1, e.head), -1.0)];
            if e.delay != 0.0 {
                coeffs.push((VarRef::new(0, k), -e.delay));
            }
            Constraint { coeffs, relation: Relation::Le, rhs: e.cost, tag: ConstraintTag::Dual }
        })
        .collect();
    constraints.push(Constraint {
        coeffs: (0..inst.edges.len()).map(|k| (VarRef::new(0, k), 1.0)).collect(),
        relation: Relation::Le,
        rhs: inst.budget as f64,
        tag: ConstraintTag::Budget,
    });

    Ok(MilpInstance {
        sense: Sense::Max,
        groups: vec![VarGroup { id: 0, vars: x_vars }, VarGroup { id: 1, vars: pi_vars }],
        constraints,
        provenance: Provenance {
            kind: ProblemKind::Spi,
            instance_id: inst.id.clone(),
            edges: inst.arcs().collect(),
        },
    })
}

/// Min-cut model of max-flow interdiction:
///
/// ```text
/// min  sum u_ij beta_ij
/// s.t. alpha_i - alpha_j + beta_ij + gamma_ij >= 0   for every edge (i, j)
///      alpha_t - alpha_s >= 1
///      sum r_ij gamma_ij <= R
///      alpha, beta, gamma binary
/// ```
///
/// Groups: 0 = gamma (interdiction), 1 = alpha (nodes), 2 = beta (edges).
pub fn build_mfi_milp(inst: &MfiInstance) -> Result<MilpInstance> {
    inst.validate()?;
    let gamma = inst
        .edges
        .iter()
        .map(|e| Variable::binary(format!("gamma_{}_{}", e.tail, e.head), 0.0))
        .collect();
    let alpha = (0..inst.node_count).map(|i| Variable::binary(format!("alpha_{i}"), 0.0)).collect();
    let beta = inst
        .edges
        .iter()
        .map(|e| Variable::binary(format!("beta_{}_{}", e.tail, e.head), e.capacity))
        .collect();

    let mut constraints: Vec<Constraint> = inst
        .edges
        .iter()
        .enumerate()
        .map(|(k, e)| Constraint {
            coeffs: vec![
                (VarRef::new(1, e.tail), 1.0),
                (VarRef::new(1, e.head), -1.0),
                (VarRef::new(2, k), 1.0),
                (VarRef::new(0, k), 1.0),
            ],
            relation: Relation::Ge,
            rhs: 0.0,
            tag: ConstraintTag::Dual,
        })
        .collect();
    constraints.push(Constraint {
        coeffs: vec![(VarRef::new(1, inst.sink), 1.0), (VarRef::new(1, inst.source), -1.0)],
        relation: Relation::Ge,
        rhs: 1.0,
        tag: ConstraintTag::Other,
    });
    constraints.push(Constraint {
        coeffs: inst
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.removal_cost != 0.0)
            .map(|(k, e)| (VarRef::new(0, k), e.removal_cost))
            .collect(),
        relation: Relation::Le,
        rhs: inst.budget,
        tag: ConstraintTag::Budget,
    });

    Ok(MilpInstance {
        sense: Sense::Min,
        groups: vec![
            VarGroup { id: 0, vars: gamma },
            VarGroup { id: 1, vars: alpha },
            VarGroup { id: 2, vars: beta },
        ],
        constraints,
        provenance: Provenance {
            kind: ProblemKind::Mfi,
            instance_id: inst.id.clone(),
            edges: inst.arcs().collect(),
        },
    })
}

pub fn reduce(inst: &Instance) -> Result<MilpInstance> {
    match inst {
        Instance::Spi(i) => dualize_spi(i),
        Instance::Mfi(i) => build_mfi_milp(i),
    }
}

/// Copy of `milp` with every interdiction variable fixed to `x`.
pub fn fix_interdiction(milp: &MilpInstance, x: &[bool]) -> Result<MilpInstance> {
    let n = milp.interdiction_count();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let mut out = milp.clone();
    for (v, &on) in out.groups[0].vars.iter_mut().zip(x) {
        let val = if on { 1.0 } else { 0.0 };
        v.lower = val;
        v.upper = val;
    }
    Ok(out)
}
