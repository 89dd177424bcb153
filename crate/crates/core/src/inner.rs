//! Exact follower solvers for a fixed leader decision.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{MfiInstance, SpiInstance};

/// Comparison tolerance for real-valued lengths and capacities.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    /// `None` when the sink cannot be reached.
    pub length: Option<f64>,
    /// Node sequence from source to sink; empty iff unreachable.
    pub path: Vec<usize>,
}

impl PathResult {
    pub fn length_or_inf(&self) -> f64 {
        self.length.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub value: f64,
    /// Flow on each instance edge, in edge order. Removed edges carry 0.
    pub edge_flow: Vec<f64>,
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Dijkstra on edge lengths `c + d * x`. Ties between equally distant nodes
/// are broken by the smaller node id, both for the settle order and for the
/// predecessor, so returned paths are deterministic.
pub fn shortest_path(inst: &SpiInstance, interdicted: &[bool]) -> Result<PathResult> {
    check_len(inst.edges.len(), interdicted.len())?;
    let n = inst.node_count;
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (e, &x) in inst.edges.iter().zip(interdicted) {
        let w = if x { e.cost + e.delay } else { e.cost };
        adj[e.tail].push((e.head, w));
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut done = vec![false; n];
    dist[inst.source] = 0.0;
    loop {
        let mut u = usize::MAX;
        for v in 0..n {
            if !done[v] && dist[v].is_finite() && (u == usize::MAX || dist[v] < dist[u] - EPS) {
                u = v;
            }
        }
        if u == usize::MAX || u == inst.sink {
            break;
        }
        done[u] = true;
        for &(v, w) in &adj[u] {
            if done[v] {
                continue;
            }
            let cand = dist[u] + w;
            if cand < dist[v] - EPS {
                dist[v] = cand;
                pred[v] = u;
            } else if (cand - dist[v]).abs() <= EPS && u < pred[v] {
                dist[v] = dist[v].min(cand);
                pred[v] = u;
            }
        }
    }

    if !dist[inst.sink].is_finite() {
        return Ok(PathResult { length: None, path: Vec::new() });
    }
    let mut path = vec![inst.sink];
    let mut v = inst.sink;
    while v != inst.source {
        v = pred[v];
        path.push(v);
    }
    path.reverse();
    Ok(PathResult { length: Some(dist[inst.sink]), path })
}

/// Edmonds-Karp maximum flow on the subgraph without the removed edges.
pub fn max_flow(inst: &MfiInstance, removed: &[bool]) -> Result<FlowResult> {
    check_len(inst.edges.len(), removed.len())?;
    let n = inst.node_count;
    // Arc 2k is edge k, arc 2k+1 its residual reverse.
    let mut head = Vec::with_capacity(2 * inst.edges.len());
    let mut residual = Vec::with_capacity(2 * inst.edges.len());
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, (e, &gone)) in inst.edges.iter().zip(removed).enumerate() {
        let cap = if gone { 0.0 } else { e.capacity };
        head.push(e.head);
        residual.push(cap);
        head.push(e.tail);
        residual.push(0.0);
        adj[e.tail].push(2 * k);
        adj[e.head].push(2 * k + 1);
    }

    let (s, t) = (inst.source, inst.sink);
    let mut value = 0.0;
    let mut parent_arc = vec![usize::MAX; n];
    loop {
        parent_arc.iter_mut().for_each(|p| *p = usize::MAX);
        let mut seen = vec![false; n];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        'bfs: while let Some(u) = queue.pop_front() {
            for &a in &adj[u] {
                let v = head[a];
                if !seen[v] && residual[a] > EPS {
                    seen[v] = true;
                    parent_arc[v] = a;
                    if v == t {
                        break 'bfs;
                    }
                    queue.push_back(v);
                }
            }
        }
        if !seen[t] {
            break;
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = t;
        while v != s {
            let a = parent_arc[v];
            bottleneck = bottleneck.min(residual[a]);
            v = head[a ^ 1];
        }
        let mut v = t;
        while v != s {
            let a = parent_arc[v];
            residual[a] -= bottleneck;
            residual[a ^ 1] += bottleneck;
            v = head[a ^ 1];
        }
        value += bottleneck;
    }

    let edge_flow = (0..inst.edges.len()).map(|k| residual[2 * k + 1]).collect();
    Ok(FlowResult { value, edge_flow })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::instances::{MfiEdge, SpiEdge};

    pub(crate) fn diamond() -> MfiInstance {
        let e = |tail, head, capacity| MfiEdge { tail, head, capacity, removal_cost: 1.0 };
        MfiInstance {
            id: None,
            node_count: 4,
            source: 0,
            sink: 3,
            edges: vec![e(0, 1, 3.0), e(1, 3, 2.0), e(0, 2, 1.0), e(2, 3, 4.0)],
            budget: 0.0,
        }
    }

    fn one_edge_spi(cost: f64) -> SpiInstance {
        SpiInstance {
            id: None,
            node_count: 2,
            source: 0,
            sink: 1,
            edges: vec![SpiEdge { tail: 0, head: 1, cost, delay: 2.0 }],
            budget: 1,
        }
    }

    #[test]
    fn worked_example_paths() {
        let ex = SpiInstance::worked_example();
        let r = shortest_path(&ex, &[false; 12]).unwrap();
        assert_eq!(r.length, Some(7.0));
        assert_eq!(r.path, vec![0, 3, 6]);

        let mut x = [false; 12];
        x[8] = true; // (3,6)
        assert_eq!(shortest_path(&ex, &x).unwrap().length, Some(8.0));
    }

    #[test]
    fn single_edge_path() {
        let inst = one_edge_spi(4.5);
        assert_eq!(shortest_path(&inst, &[false]).unwrap().length, Some(4.5));
        assert_eq!(shortest_path(&inst, &[true]).unwrap().length, Some(6.5));
    }

    #[test]
    fn unreachable_is_sentinel() {
        let mut inst = one_edge_spi(1.0);
        inst.edges[0] = SpiEdge { tail: 1, head: 0, cost: 1.0, delay: 0.0 };
        let r = shortest_path(&inst, &[false]).unwrap();
        assert_eq!(r.length, None);
        assert!(r.path.is_empty());
        assert!(r.length_or_inf().is_infinite());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(shortest_path(&one_edge_spi(1.0), &[]).is_err());
        assert!(max_flow(&diamond(), &[false]).is_err());
    }

    #[test]
    fn diamond_flow() {
        let d = diamond();
        let r = max_flow(&d, &[false; 4]).unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.edge_flow, vec![2.0, 2.0, 1.0, 1.0]);
        assert_eq!(max_flow(&d, &[true; 4]).unwrap().value, 0.0);
        assert_eq!(max_flow(&d, &[false, true, false, false]).unwrap().value, 1.0);
    }

    #[test]
    fn tie_break_prefers_lower_predecessor() {
        // 0->1->3 and 0->2->3 both length 2.
        let e = |tail, head| SpiEdge { tail, head, cost: 1.0, delay: 0.0 };
        let inst = SpiInstance {
            id: None,
            node_count: 4,
            source: 0,
            sink: 3,
            edges: vec![e(0, 2), e(2, 3), e(0, 1), e(1, 3)],
            budget: 0,
        };
        assert_eq!(shortest_path(&inst, &[false; 4]).unwrap().path, vec![0, 1, 3]);
    }
}
