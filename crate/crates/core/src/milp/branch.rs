//! Branch-and-bound over binaries and SOS1 sets.
//!
//! Best-bound node selection with depth-first plunging: after branching, the
//! child whose relaxation looks more promising is processed immediately and
//! the sibling goes on the heap. Children are re-optimized with the dual
//! simplex from the parent's basis; a cold primal solve is the fallback.
//! Complementarity-style SOS1 sets are enforced purely by branching (a
//! violated set is split into two zero-fixed halves), never by big-M rows.

use std::collections::BinaryHeap;
use std::time::Instant;

use super::model::{MilpModel, ObjSense, VarKind};
use super::simplex::{BasisSnapshot, LpStatus, Simplex};

const INT_TOL: f64 = 1e-6;
const SOS_TOL: f64 = 1e-6;

/// Outcome classes of a MILP solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// A limit stopped the search; the best incumbent (if any) is returned.
    LimitReached,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolverStats {
    pub nodes: u64,
    pub simplex_iterations: u64,
}

/// Incumbent of a MILP solve plus the duals of its leaf relaxation.
#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    /// Bound proved by the search (equals `objective` when optimal).
    pub best_bound: f64,
    /// Row duals of the LP relaxation at the incumbent's fixing.
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub stats: SolverStats,
}

#[derive(Clone, Debug)]
pub struct MilpConfig {
    pub node_limit: u64,
    pub time_limit_secs: f64,
    /// Relative optimality gap at which the incumbent is declared optimal.
    pub gap_rel: f64,
    pub gap_abs: f64,
    /// Stop as soon as this many incumbents were found (None = prove optimum).
    pub stop_after_incumbents: Option<u32>,
    /// Candidate solution checked for feasibility and used as the initial
    /// incumbent if it passes.
    pub warm_start: Option<Vec<f64>>,
    pub max_lp_iterations: usize,
}

impl Default for MilpConfig {
    fn default() -> Self {
        MilpConfig {
            node_limit: 200_000,
            time_limit_secs: 600.0,
            gap_rel: 1e-6,
            gap_abs: 1e-9,
            stop_after_incumbents: None,
            warm_start: None,
            max_lp_iterations: 200_000,
        }
    }
}

struct Node {
    id: u64,
    /// Bound in internal minimize sense. Deferred siblings carry their
    /// parent's relaxation value, which is still admissible.
    bound: f64,
    /// (column, lower, upper) overrides accumulated from the root.
    fixings: Vec<(usize, f64, f64)>,
    basis: BasisSnapshot,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Node {}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap: order reversed so the smallest bound pops first,
        // then the oldest node (deterministic).
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| other.id.cmp(&self.id))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

enum BranchPick {
    Integral,
    Binary(usize, f64),
    Sos(usize),
}

pub struct BranchAndBound<'a> {
    model: &'a MilpModel,
    cfg: MilpConfig,
    simplex: Simplex,
    root_lower: Vec<f64>,
    root_upper: Vec<f64>,
    sign: f64,
    /// (internal objective, values, binary+SOS fixings of the leaf).
    incumbent: Option<(f64, Vec<f64>, Vec<(usize, f64, f64)>)>,
    incumbents_found: u32,
    nodes: u64,
    next_id: u64,
    start: Instant,
}

impl<'a> BranchAndBound<'a> {
    pub fn new(model: &'a MilpModel, cfg: MilpConfig) -> Self {
        BranchAndBound {
            simplex: Simplex::new(model),
            sign: match model.sense {
                ObjSense::Minimize => 1.0,
                ObjSense::Maximize => -1.0,
            },
            root_lower: model.vars.iter().map(|v| v.lower).collect(),
            root_upper: model.vars.iter().map(|v| v.upper).collect(),
            model,
            cfg,
            incumbent: None,
            incumbents_found: 0,
            nodes: 0,
            next_id: 0,
            start: Instant::now(),
        }
    }

    pub fn solve(mut self) -> MilpSolution {
        if let Some(ws) = self.cfg.warm_start.take() {
            self.try_warm_start(&ws);
        }
        self.apply_bounds(&[]);
        self.simplex.reset_basis();
        self.nodes += 1;
        match self.simplex.primal_solve(self.cfg.max_lp_iterations) {
            LpStatus::Infeasible => {
                // A feasible warm start refutes root infeasibility; trust it.
                if self.incumbent.is_some() {
                    return self.finish(MilpStatus::LimitReached, f64::NEG_INFINITY);
                }
                return self.finish(MilpStatus::Infeasible, f64::INFINITY);
            }
            LpStatus::Unbounded => return self.finish(MilpStatus::Unbounded, f64::NEG_INFINITY),
            LpStatus::IterationLimit => {
                return self.finish(MilpStatus::LimitReached, f64::NEG_INFINITY)
            }
            LpStatus::Optimal => {}
        }
        let root_res = self.simplex.result(LpStatus::Optimal);
        let root = Node {
            id: self.fresh_id(),
            bound: self.sign * root_res.objective,
            fixings: Vec::new(),
            basis: self.simplex.snapshot(),
        };

        let mut heap: BinaryHeap<Node> = BinaryHeap::new();
        let mut current: Option<(Node, Vec<f64>)> = Some((root, root_res.values));
        let mut limit_hit = false;

        loop {
            if self.limits_exceeded() {
                limit_hit = true;
                break;
            }
            let (node, values) = match current.take() {
                Some(nv) => nv,
                None => match heap.pop() {
                    None => break,
                    Some(node) => {
                        if self.pruned(node.bound) {
                            continue;
                        }
                        self.nodes += 1;
                        match self.resolve(&node, false) {
                            Some(res) => {
                                let bound = self.sign * res.objective;
                                if self.pruned(bound) {
                                    continue;
                                }
                                let node = Node {
                                    bound,
                                    basis: self.simplex.snapshot(),
                                    ..node
                                };
                                (node, res.values)
                            }
                            None => continue,
                        }
                    }
                },
            };

            match self.pick_branch(&values) {
                BranchPick::Integral => {
                    self.accept_incumbent(node.bound, &values, &node.fixings);
                    if self.done_after_incumbent() {
                        limit_hit = true;
                        break;
                    }
                }
                BranchPick::Binary(col, x) => {
                    let up_first = x >= 0.5;
                    let kids = [up_first, !up_first].map(|up| {
                        let mut fix = node.fixings.clone();
                        let v = if up { 1.0 } else { 0.0 };
                        fix.push((col, v, v));
                        fix
                    });
                    current = self.expand(&node, kids.into_iter().collect(), &mut heap);
                }
                BranchPick::Sos(set_idx) => {
                    let members = &self.model.sos1[set_idx].members;
                    let split = members.len() / 2;
                    let head: Vec<usize> = members[..split].iter().map(|v| v.0).collect();
                    let tail: Vec<usize> = members[split..].iter().map(|v| v.0).collect();
                    let mass = |zeroed: &[usize]| zeroed.iter().map(|&c| values[c].abs()).sum::<f64>();
                    // Dive into the child that zeroes less current mass.
                    let (first, second) = if mass(&tail) <= mass(&head) {
                        (tail, head)
                    } else {
                        (head, tail)
                    };
                    let kids = [first, second].map(|zeroed| {
                        let mut fix = node.fixings.clone();
                        for c in zeroed {
                            fix.push((c, 0.0, 0.0));
                        }
                        fix
                    });
                    current = self.expand(&node, kids.into_iter().collect(), &mut heap);
                }
            }
            if current.is_none() && heap.is_empty() {
                break;
            }
        }

        let mut open_bound = f64::INFINITY;
        if limit_hit {
            for n in heap.iter() {
                open_bound = open_bound.min(n.bound);
            }
            if let Some((n, _)) = &current {
                open_bound = open_bound.min(n.bound);
            }
        }
        let status = if self.incumbent.is_some() {
            if limit_hit && open_bound < self.incumbent_cutoff() {
                MilpStatus::LimitReached
            } else {
                MilpStatus::Optimal
            }
        } else if limit_hit {
            MilpStatus::LimitReached
        } else {
            MilpStatus::Infeasible
        };
        self.finish(status, open_bound)
    }

    fn incumbent_cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((inc, _, _)) => inc - self.cfg.gap_abs.max(self.cfg.gap_rel * inc.abs()),
            None => f64::NEG_INFINITY,
        }
    }

    fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn limits_exceeded(&self) -> bool {
        self.nodes >= self.cfg.node_limit
            || self.start.elapsed().as_secs_f64() > self.cfg.time_limit_secs
    }

    fn done_after_incumbent(&self) -> bool {
        matches!(self.cfg.stop_after_incumbents, Some(k) if self.incumbents_found >= k)
    }

    /// Fathoming test against the incumbent, in internal minimize sense.
    fn pruned(&self, bound: f64) -> bool {
        self.incumbent.is_some() && bound >= self.incumbent_cutoff()
    }

    fn apply_bounds(&mut self, fixings: &[(usize, f64, f64)]) {
        for j in 0..self.root_lower.len() {
            self.simplex
                .set_col_bounds(j, self.root_lower[j], self.root_upper[j]);
        }
        for &(j, lo, hi) in fixings {
            self.simplex.set_col_bounds(j, lo, hi);
        }
    }

    /// Re-optimize under the node's bounds with the dual simplex, starting
    /// from the node's stored basis (or the simplex's current state when the
    /// caller knows it already matches); cold primal solve as fallback.
    /// `None` = infeasible or numeric failure.
    fn resolve(&mut self, node: &Node, in_place: bool) -> Option<super::simplex::LpResult> {
        self.apply_bounds(&node.fixings);
        if !in_place {
            self.simplex.restore(&node.basis);
        }
        let status = match self.simplex.dual_solve(self.cfg.max_lp_iterations) {
            LpStatus::Optimal => LpStatus::Optimal,
            LpStatus::Infeasible => return None,
            _ => {
                self.simplex.reset_basis();
                self.simplex.primal_solve(self.cfg.max_lp_iterations)
            }
        };
        match status {
            LpStatus::Optimal => Some(self.simplex.result(LpStatus::Optimal)),
            _ => None,
        }
    }

    /// Solve the preferred child immediately (its restore is cheap because
    /// the simplex still holds the parent basis) and defer the sibling to
    /// the heap with the parent's bound; it is re-solved only if it is ever
    /// popped, and pruning often disposes of it first.
    fn expand(
        &mut self,
        parent: &Node,
        kids: Vec<Vec<(usize, f64, f64)>>,
        heap: &mut BinaryHeap<Node>,
    ) -> Option<(Node, Vec<f64>)> {
        let mut dive: Option<(Node, Vec<f64>)> = None;
        for fixings in kids {
            if self.limits_exceeded() {
                break;
            }
            if dive.is_some() {
                heap.push(Node {
                    id: self.fresh_id(),
                    bound: parent.bound,
                    fixings,
                    basis: parent.basis.clone(),
                });
                continue;
            }
            self.nodes += 1;
            let probe = Node {
                id: 0,
                bound: parent.bound,
                fixings,
                basis: parent.basis.clone(),
            };
            let Some(res) = self.resolve(&probe, false) else {
                continue;
            };
            let bound = self.sign * res.objective;
            if self.pruned(bound) {
                continue;
            }
            let node = Node {
                id: self.fresh_id(),
                bound,
                fixings: probe.fixings,
                basis: self.simplex.snapshot(),
            };
            dive = Some((node, res.values));
        }
        dive
    }

    fn pick_branch(&self, values: &[f64]) -> BranchPick {
        // Most fractional binary first (distance to 0.5, lowest index ties).
        let mut best: Option<(usize, f64, f64)> = None;
        for (j, v) in self.model.vars.iter().enumerate() {
            if v.kind != VarKind::Binary {
                continue;
            }
            let x = values[j];
            if (x - x.round()).abs() > INT_TOL {
                let score = (x - 0.5).abs();
                if best.map_or(true, |(_, s, _)| score < s - 1e-15) {
                    best = Some((j, score, x));
                }
            }
        }
        if let Some((col, _, x)) = best {
            return BranchPick::Binary(col, x);
        }
        // Then the most violated SOS1 set (second largest magnitude).
        let mut best_set: Option<(usize, f64)> = None;
        for (si, set) in self.model.sos1.iter().enumerate() {
            let mut top1 = 0.0_f64;
            let mut top2 = 0.0_f64;
            for v in &set.members {
                let a = values[v.0].abs();
                if a > top1 {
                    top2 = top1;
                    top1 = a;
                } else if a > top2 {
                    top2 = a;
                }
            }
            if top2 > SOS_TOL && best_set.map_or(true, |(_, s)| top2 > s + 1e-15) {
                best_set = Some((si, top2));
            }
        }
        match best_set {
            Some((si, _)) => BranchPick::Sos(si),
            None => BranchPick::Integral,
        }
    }

    fn accept_incumbent(&mut self, obj: f64, values: &[f64], fixings: &[(usize, f64, f64)]) {
        let better = match &self.incumbent {
            Some((inc, _, _)) => obj < *inc,
            None => true,
        };
        if better {
            self.incumbent = Some((obj, values.to_vec(), fixings.to_vec()));
            self.incumbents_found += 1;
        }
    }

    fn try_warm_start(&mut self, ws: &[f64]) {
        if ws.len() != self.model.vars.len() || self.model.max_violation(ws) > 1e-6 {
            return;
        }
        for v in self.model.binary_vars() {
            if (ws[v.0] - ws[v.0].round()).abs() > INT_TOL {
                return;
            }
        }
        for set in &self.model.sos1 {
            let nz = set
                .members
                .iter()
                .filter(|v| ws[v.0].abs() > SOS_TOL)
                .count();
            if nz > 1 {
                return;
            }
        }
        let obj = self.sign * self.model.objective_value(ws);
        let fixings: Vec<(usize, f64, f64)> = self
            .model
            .binary_vars()
            .map(|v| (v.0, ws[v.0].round(), ws[v.0].round()))
            .collect();
        self.incumbent = Some((obj, ws.to_vec(), fixings));
        self.incumbents_found += 1;
    }

    fn finish(mut self, status: MilpStatus, open_bound: f64) -> MilpSolution {
        let stats = SolverStats {
            nodes: self.nodes,
            simplex_iterations: self.simplex.iterations as u64,
        };
        match self.incumbent.take() {
            Some((obj, values, fixings)) => {
                self.apply_bounds(&fixings);
                self.simplex.reset_basis();
                let st = self.simplex.primal_solve(self.cfg.max_lp_iterations);
                let lp = self.simplex.result(st);
                let best_bound = match status {
                    MilpStatus::Optimal => self.sign * obj,
                    _ => self.sign * open_bound.min(obj),
                };
                MilpSolution {
                    status,
                    values,
                    objective: self.sign * obj,
                    best_bound,
                    row_duals: if st == LpStatus::Optimal {
                        lp.row_duals
                    } else {
                        vec![0.0; self.model.rows.len()]
                    },
                    reduced_costs: if st == LpStatus::Optimal {
                        lp.reduced_costs
                    } else {
                        vec![0.0; self.model.vars.len()]
                    },
                    stats,
                }
            }
            None => MilpSolution {
                status,
                values: vec![0.0; self.model.vars.len()],
                objective: f64::NAN,
                best_bound: self.sign * open_bound,
                row_duals: vec![0.0; self.model.rows.len()],
                reduced_costs: vec![0.0; self.model.vars.len()],
                stats,
            },
        }
    }
}
