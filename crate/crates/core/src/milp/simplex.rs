//! Dense two-phase primal simplex over bound-shifted variables.
//!
//! Every column `x_j` is shifted to `x_j - l_j in [0, u_j - l_j]`. Nonbasic
//! columns sit at either bound (bounded-variable simplex), so finite upper
//! bounds never become explicit rows. Phase 1 minimizes the sum of artificial
//! columns; phase 2 minimizes the real objective with artificials capped at 0.
//! Entering columns use Dantzig's rule with lowest-index ties until
//! `10 * (rows + cols)` iterations, then Bland's rule.

use crate::reduction::Relation;

pub(crate) const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FIXED_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Flat minimization problem: `min c^T x  s.t. rows, lower <= x <= upper`.
#[derive(Debug, Clone)]
pub(crate) struct LpProblem {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Outcome {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
    Numerical(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    m: usize,
    ncol: usize,
    // m rows of ncol coefficients followed by the B^-1 b entry.
    a: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    upper: Vec<f64>,
    enterable: Vec<bool>,
    d: Vec<f64>,
    iterations: usize,
    bland_after: usize,
    max_iterations: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    Stalled,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.ncol + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.a[i * (self.ncol + 1) + self.ncol]
    }

    fn price(&mut self, cost: &[f64]) {
        let w = self.ncol + 1;
        self.d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.a[i * w..i * w + self.ncol];
                for (dj, aij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * aij;
                }
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = 0.0;
        }
    }

    fn refresh_beta(&mut self) {
        for i in 0..self.m {
            let mut v = self.rhs(i);
            for j in 0..self.ncol {
                if self.state[j] == State::Upper {
                    v -= self.at(i, j) * self.upper[j];
                }
            }
            self.beta[i] = v;
        }
    }

    fn choose_entering(&self) -> Option<usize> {
        let bland = self.iterations >= self.bland_after;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncol {
            if !self.enterable[j] || self.upper[j] <= FIXED_TOL {
                continue;
            }
            let score = match self.state[j] {
                State::Lower if self.d[j] < -COST_TOL => -self.d[j],
                State::Upper if self.d[j] > COST_TOL => self.d[j],
                _ => continue,
            };
            if bland {
                return Some(j);
            }
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    fn run(&mut self) -> PhaseEnd {
        let w = self.ncol + 1;
        loop {
            if self.iterations >= self.max_iterations {
                return PhaseEnd::Stalled;
            }
            let Some(j) = self.choose_entering() else {
                return PhaseEnd::Optimal;
            };
            self.iterations += 1;
            let dir = if self.state[j] == State::Lower { 1.0 } else { -1.0 };

            // Ratio test: (step, row, leaves_at_upper).
            let mut best: Option<(f64, usize, bool)> = None;
            for i in 0..self.m {
                let rate = self.at(i, j) * dir;
                let (t, to_upper) = if rate > PIVOT_TOL {
                    (self.beta[i].max(0.0) / rate, false)
                } else if rate < -PIVOT_TOL && self.upper[self.basis[i]].is_finite() {
                    ((self.upper[self.basis[i]] - self.beta[i]).max(0.0) / -rate, true)
                } else {
                    continue;
                };
                let better = match best {
                    None => true,
                    Some((bt, bi, _)) => {
                        t < bt - 1e-12 || (t <= bt + 1e-12 && self.basis[i] < self.basis[bi])
                    }
                };
                if better {
                    best = Some((t, i, to_upper));
                }
            }

            let flip = self.upper[j].is_finite() && best.is_none_or(|(t, _, _)| self.upper[j] <= t);
            if flip {
                let step = self.upper[j] * dir;
                for i in 0..self.m {
                    self.beta[i] -= self.at(i, j) * step;
                }
                self.state[j] = if self.state[j] == State::Lower { State::Upper } else { State::Lower };
                continue;
            }
            let Some((theta, r, to_upper)) = best else {
                return PhaseEnd::Unbounded;
            };

            let entering_value = if self.state[j] == State::Lower { 0.0 } else { self.upper[j] } + dir * theta;
            for i in 0..self.m {
                self.beta[i] -= self.at(i, j) * dir * theta;
            }
            let leaving = self.basis[r];
            self.state[leaving] = if to_upper { State::Upper } else { State::Lower };
            self.beta[r] = entering_value;
            self.basis[r] = j;
            self.state[j] = State::Basic;

            let piv = self.at(r, j);
            let inv = 1.0 / piv;
            for v in &mut self.a[r * w..(r + 1) * w] {
                *v *= inv;
            }
            let (before, rest) = self.a.split_at_mut(r * w);
            let (prow, after) = rest.split_at_mut(w);
            for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
                let f = row[j];
                if f != 0.0 {
                    for (v, p) in row.iter_mut().zip(prow.iter()) {
                        *v -= f * p;
                    }
                    row[j] = 0.0;
                }
            }
            let f = self.d[j];
            if f != 0.0 {
                for (dv, p) in self.d.iter_mut().zip(prow.iter()) {
                    *dv -= f * p;
                }
                self.d[j] = 0.0;
            }
        }
    }

    fn column_values(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = (0..self.ncol)
            .map(|j| match self.state[j] {
                State::Upper => self.upper[j],
                _ => 0.0,
            })
            .collect();
        for i in 0..self.m {
            vals[self.basis[i]] = self.beta[i];
        }
        vals
    }
}

pub(crate) fn feasibility_tol(rhs: f64) -> f64 {
    1e-7 * (1.0 + rhs.abs())
}

/// Solves `problem` with the given bounds in place of its own.
pub(crate) fn solve(problem: &LpProblem, lower: &[f64], upper: &[f64]) -> Outcome {
    let n = problem.objective.len();
    if lower.iter().zip(upper).any(|(l, u)| l > &(u + FIXED_TOL)) {
        return Outcome::Infeasible;
    }

    // Active structural columns (not fixed).
    let mut col_of = vec![usize::MAX; n];
    let mut structural = Vec::new();
    for j in 0..n {
        if upper[j] - lower[j] > FIXED_TOL {
            col_of[j] = structural.len();
            structural.push(j);
        }
    }
    let ns = structural.len();

    // Shifted rows; rows without active columns are checked directly.
    struct Shifted {
        coeffs: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    }
    let mut rows = Vec::with_capacity(problem.rows.len());
    for row in &problem.rows {
        let mut rhs = row.rhs;
        let mut coeffs = Vec::with_capacity(row.coeffs.len());
        for &(j, a) in &row.coeffs {
            rhs -= a * lower[j];
            if col_of[j] != usize::MAX && a != 0.0 {
                coeffs.push((col_of[j], a));
            }
        }
        if coeffs.is_empty() {
            if !row.relation.holds(0.0, rhs, feasibility_tol(row.rhs)) {
                return Outcome::Infeasible;
            }
            continue;
        }
        rows.push(Shifted { coeffs, relation: row.relation, rhs });
    }
    let m = rows.len();

    // Column layout: structurals, one slack per inequality, artificials.
    let slack_count = rows.iter().filter(|r| r.relation != Relation::Eq).count();
    let mut needs_art = Vec::with_capacity(m);
    for r in &rows {
        let flip = r.rhs < 0.0;
        let slack_sign = match r.relation {
            Relation::Le => 1.0,
            Relation::Ge => -1.0,
            Relation::Eq => 0.0,
        } * if flip { -1.0 } else { 1.0 };
        needs_art.push(slack_sign <= 0.0);
    }
    let art_count = needs_art.iter().filter(|&&b| b).count();
    let ncol = ns + slack_count + art_count;
    let w = ncol + 1;

    let mut t = Tableau {
        m,
        ncol,
        a: vec![0.0; m * w],
        beta: vec![0.0; m],
        basis: vec![0; m],
        state: vec![State::Lower; ncol],
        upper: vec![f64::INFINITY; ncol],
        enterable: vec![true; ncol],
        d: Vec::new(),
        iterations: 0,
        bland_after: 10 * (m + ncol),
        max_iterations: 50 * (m + ncol) + 10_000,
    };
    for (k, &j) in structural.iter().enumerate() {
        t.upper[k] = upper[j] - lower[j];
    }
    let mut phase1_cost = vec![0.0; ncol];
    let mut next_slack = ns;
    let mut next_art = ns + slack_count;
    for (i, r) in rows.iter().enumerate() {
        let sign = if r.rhs < 0.0 { -1.0 } else { 1.0 };
        for &(k, a) in &r.coeffs {
            t.a[i * w + k] += sign * a;
        }
        t.a[i * w + ncol] = sign * r.rhs;
        if r.relation != Relation::Eq {
            let s = if r.relation == Relation::Le { 1.0 } else { -1.0 };
            t.a[i * w + next_slack] = sign * s;
            if !needs_art[i] {
                t.basis[i] = next_slack;
            }
            next_slack += 1;
        }
        if needs_art[i] {
            t.a[i * w + next_art] = 1.0;
            t.basis[i] = next_art;
            phase1_cost[next_art] = 1.0;
            next_art += 1;
        }
        t.beta[i] = sign * r.rhs;
    }
    for i in 0..m {
        let b = t.basis[i];
        t.state[b] = State::Basic;
    }

    let rhs_scale = rows.iter().fold(0.0f64, |acc, r| acc.max(r.rhs.abs()));
    if art_count > 0 {
        t.price(&phase1_cost);
        match t.run() {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => return Outcome::Numerical("phase 1 reported unbounded".into()),
            PhaseEnd::Stalled => return Outcome::Numerical("iteration limit in phase 1".into()),
        }
        t.refresh_beta();
        let infeas: f64 = (0..m)
            .filter(|&i| t.basis[i] >= ns + slack_count)
            .map(|i| t.beta[i].max(0.0))
            .sum();
        if infeas > feasibility_tol(rhs_scale) {
            return Outcome::Infeasible;
        }
        for j in ns + slack_count..ncol {
            t.upper[j] = 0.0;
            t.enterable[j] = false;
        }
    }

    let mut cost = vec![0.0; ncol];
    for (k, &j) in structural.iter().enumerate() {
        cost[k] = problem.objective[j];
    }
    t.price(&cost);
    match t.run() {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => return Outcome::Unbounded,
        PhaseEnd::Stalled => return Outcome::Numerical("iteration limit in phase 2".into()),
    }
    t.refresh_beta();

    let cols = t.column_values();
    let mut x: Vec<f64> = lower.to_vec();
    for (k, &j) in structural.iter().enumerate() {
        x[j] = lower[j] + cols[k].clamp(0.0, t.upper[k]);
    }
    for (j, xj) in x.iter_mut().enumerate() {
        if col_of[j] == usize::MAX {
            *xj = lower[j];
        }
    }

    for row in &problem.rows {
        let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
        if !row.relation.holds(lhs, row.rhs, feasibility_tol(row.rhs.max(rhs_scale))) {
            return Outcome::Numerical(format!("row violated after solve: lhs {lhs}, rhs {}", row.rhs));
        }
    }
    let value = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Outcome::Optimal { value, x }
}
