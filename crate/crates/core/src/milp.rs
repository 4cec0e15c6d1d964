//! Best-first branch and bound over binary variables, bounding with the conic
//! relaxation of each node.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{solve_cone, Cone, ConeProgram, SolveStatus, SolverSolution, ToleranceSet, VarId};

/// Cone program with a subset of variables restricted to {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedBinaryProgram {
    pub base: ConeProgram,
    pub binaries: Vec<VarId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Search {
    BestFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BnBConfig {
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub integrality_tol: f64,
    pub node_limit: usize,
    pub search: Search,
    /// Emit one debug log line per node and keep the records on the result.
    pub node_log: bool,
    pub solver: ToleranceSet,
}

impl Default for BnBConfig {
    fn default() -> Self {
        Self {
            abs_gap: 1e-6,
            rel_gap: 1e-6,
            integrality_tol: 1e-6,
            node_limit: 10_000,
            search: Search::BestFirst,
            node_log: false,
            solver: ToleranceSet::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: usize,
    pub bound: f64,
    pub depth: usize,
    pub decision: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    /// Solution of the base program with every binary fixed at its rounded value.
    pub solution: SolverSolution,
    pub objective: f64,
    pub proven_optimal: bool,
    /// Set when the incumbent was returned because the acceptance predicate held.
    pub accepted: bool,
    pub nodes_explored: usize,
    /// Largest relaxation bound among nodes still open when the search stopped.
    pub best_bound: f64,
    pub node_log: Vec<NodeRecord>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MilpError {
    #[error("no integer-feasible assignment exists")]
    Infeasible,
    #[error("node limit {0} reached before any incumbent was found")]
    NodeLimit(usize),
    #[error("variable {0} is declared binary but its bounds are not within [0, 1]")]
    BinaryBounds(VarId),
    #[error("variable {0} is declared binary but appears in a cone")]
    BinaryInCone(VarId),
    #[error("relaxation is unbounded")]
    Unbounded,
    #[error("relaxation solve failed with status {0:?}")]
    Solver(SolveStatus),
}

impl MixedBinaryProgram {
    pub fn new(base: ConeProgram, binaries: Vec<VarId>) -> Self {
        Self { base, binaries }
    }

    pub fn check(&self) -> Result<(), MilpError> {
        for &b in &self.binaries {
            if b >= self.base.n_vars() || self.base.lower[b] < 0.0 || self.base.upper[b] > 1.0 {
                return Err(MilpError::BinaryBounds(b));
            }
            let in_cone = self.base.cones.iter().any(|c| match c {
                Cone::Soc { head, tail } => *head == b || tail.contains(&b),
                Cone::Rotated { x, y, tail } => *x == b || *y == b || tail.contains(&b),
            });
            if in_cone {
                return Err(MilpError::BinaryInCone(b));
            }
        }
        Ok(())
    }
}

struct Node {
    bound: f64,
    seq: usize,
    depth: usize,
    fixings: Vec<(VarId, f64)>,
    relaxation: SolverSolution,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: larger bound first, then earlier insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Solves `prog` to proven optimality (within the configured gaps).
pub fn solve_milp(prog: &MixedBinaryProgram, cfg: &BnBConfig) -> Result<Incumbent, MilpError> {
    solve_until(prog, cfg, |_| false)
}

/// Branch and bound that stops at the first incumbent satisfying `accept`.
///
/// When the tree is exhausted without an accepted incumbent the proven
/// optimum is returned with `accepted = false`.
pub fn solve_until<F>(prog: &MixedBinaryProgram, cfg: &BnBConfig, mut accept: F) -> Result<Incumbent, MilpError>
where
    F: FnMut(&Incumbent) -> bool,
{
    prog.check()?;
    let mut search = Searcher { prog, cfg, nodes: 0, log: Vec::new(), seq: 0 };
    let mut heap = BinaryHeap::new();
    match search.make_node(Vec::new(), 0, "root".into())? {
        Some(root) => heap.push(root),
        None => return Err(MilpError::Infeasible),
    }
    let mut incumbent: Option<Incumbent> = None;

    while let Some(node) = heap.pop() {
        if let Some(inc) = &incumbent {
            if node.bound <= inc.objective + cfg.abs_gap.max(cfg.rel_gap * inc.objective.abs()) {
                // Best-first: every remaining node is dominated as well.
                heap.clear();
                break;
            }
        }
        if search.nodes >= cfg.node_limit {
            heap.push(node);
            break;
        }

        let x = &node.relaxation.primal;
        let fractional = prog
            .binaries
            .iter()
            .copied()
            .filter(|&b| (x[b] - x[b].round()).abs() > cfg.integrality_tol)
            .min_by(|&a, &b| {
                let fa = (x[a] - 0.5).abs();
                let fb = (x[b] - 0.5).abs();
                fa.total_cmp(&fb).then(a.cmp(&b))
            });

        // Rounding the relaxation gives an integer point; a feasibility
        // re-solve confirms it before it becomes an incumbent.
        if let Some(candidate) = search.round_and_fix(x)? {
            let improves = incumbent.as_ref().is_none_or(|inc| candidate.objective > inc.objective);
            if improves {
                let bound = heap.peek().map_or(node.bound, |n: &Node| n.bound.max(node.bound));
                let mut cand = candidate;
                cand.best_bound = bound;
                cand.nodes_explored = search.nodes;
                if accept(&cand) {
                    cand.accepted = true;
                    cand.node_log = std::mem::take(&mut search.log);
                    return Ok(cand);
                }
                incumbent = Some(cand);
            }
        }

        let Some(var) = fractional else { continue };
        for value in [0.0, 1.0] {
            let mut fixings = node.fixings.clone();
            fixings.push((var, value));
            let decision = format!("{} = {value}", prog.base.names.get(var).map_or_else(|| format!("x{var}"), |n| n.clone()));
            if let Some(child) = search.make_node(fixings, node.depth + 1, decision)? {
                heap.push(child);
            }
        }
    }

    let Some(mut inc) = incumbent else {
        return if heap.is_empty() { Err(MilpError::Infeasible) } else { Err(MilpError::NodeLimit(cfg.node_limit)) };
    };
    inc.proven_optimal = heap.is_empty();
    inc.best_bound = heap.peek().map_or(inc.objective, |n| n.bound.max(inc.objective));
    inc.nodes_explored = search.nodes;
    inc.node_log = search.log;
    Ok(inc)
}

struct Searcher<'a> {
    prog: &'a MixedBinaryProgram,
    cfg: &'a BnBConfig,
    nodes: usize,
    log: Vec<NodeRecord>,
    seq: usize,
}

impl Searcher<'_> {
    fn fixed_program(&self, fixings: &[(VarId, f64)]) -> ConeProgram {
        let mut p = self.prog.base.clone();
        for &(v, val) in fixings {
            p.fix(v, val);
        }
        p
    }

    fn make_node(&mut self, fixings: Vec<(VarId, f64)>, depth: usize, decision: String) -> Result<Option<Node>, MilpError> {
        let p = self.fixed_program(&fixings);
        let sol = solve_cone(&p, &self.cfg.solver);
        self.nodes += 1;
        let id = self.nodes;
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => {
                self.record(id, f64::NEG_INFINITY, depth, format!("{decision} (infeasible)"));
                return Ok(None);
            }
            SolveStatus::Unbounded => return Err(MilpError::Unbounded),
            status if depth == 0 => return Err(MilpError::Solver(status)),
            status => {
                log::warn!("node {id} relaxation ended with {status:?}; node discarded");
                return Ok(None);
            }
        }
        self.record(id, sol.objective, depth, decision);
        self.seq += 1;
        Ok(Some(Node { bound: sol.objective, seq: self.seq, depth, fixings, relaxation: sol }))
    }

    fn record(&mut self, id: usize, bound: f64, depth: usize, decision: String) {
        if self.cfg.node_log {
            log::debug!(target: "tdcoord::milp::nodes", "node {id} depth {depth} bound {bound} {decision}");
            self.log.push(NodeRecord { id, bound, depth, decision });
        }
    }

    fn round_and_fix(&mut self, x: &[f64]) -> Result<Option<Incumbent>, MilpError> {
        let fixings: Vec<(VarId, f64)> = self.prog.binaries.iter().map(|&b| (b, x[b].round().clamp(0.0, 1.0))).collect();
        let p = self.fixed_program(&fixings);
        let sol = solve_cone(&p, &self.cfg.solver);
        if !sol.is_optimal() {
            return Ok(None);
        }
        Ok(Some(Incumbent {
            objective: sol.objective,
            solution: sol,
            proven_optimal: false,
            accepted: false,
            nodes_explored: self.nodes,
            best_bound: f64::NAN,
            node_log: Vec::new(),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// max 5a + 7b + 3c, a + b <= 1, a, b, c binary.
    fn knapsack() -> MixedBinaryProgram {
        let mut p = ConeProgram::new();
        let a = p.add_var("a", 0.0, 1.0, 5.0);
        let b = p.add_var("b", 0.0, 1.0, 7.0);
        let c = p.add_var("c", 0.0, 1.0, 3.0);
        let s = p.add_var("slack", 0.0, f64::INFINITY, 0.0);
        p.add_row("conflict", vec![(a, 1.0), (b, 1.0), (s, 1.0)], 1.0);
        MixedBinaryProgram::new(p, vec![a, b, c])
    }

    #[test]
    fn profit_selection_optimum() {
        let inc = solve_milp(&knapsack(), &BnBConfig::default()).unwrap();
        assert!(inc.proven_optimal);
        assert!((inc.objective - 10.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_binary_with_wide_bounds() {
        let mut prog = knapsack();
        prog.base.upper[0] = 2.0;
        assert_eq!(solve_milp(&prog, &BnBConfig::default()), Err(MilpError::BinaryBounds(0)));
    }

    #[test]
    fn infeasible_binary_program() {
        let mut p = ConeProgram::new();
        let a = p.add_var("a", 0.0, 1.0, 1.0);
        p.add_row("half", vec![(a, 2.0)], 1.0);
        let prog = MixedBinaryProgram::new(p, vec![a]);
        assert_eq!(solve_milp(&prog, &BnBConfig::default()), Err(MilpError::Infeasible));
    }
}
