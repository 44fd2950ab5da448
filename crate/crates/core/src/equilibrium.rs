//! Iterative best-response search for pure equilibria.
//!
//! Bids start at the maximum candidates (minimum for down-regulation),
//! aggregators are swept in roster order, each solving its bilevel problem
//! with rivals fixed, and the loop stops when a full sweep changes no
//! strategy. A repeated profile without convergence is reported as cycling
//! rather than plain iteration exhaustion.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::clearing::{clear_all, system_cost, SystemCost};
use crate::error::EquilibriumError;
use crate::milp::{solve_milp, MilpConfig, MilpStatus};
use crate::model::{MarketCase, Scheme, StrategyProfile};
use crate::mpec::{build_mpec, extract_strategy, warm_start_from_clearing};
use crate::oracle::{enumerate_best_response, evaluate_profit, BR_CAP};

/// How a best response is computed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Responder {
    /// Solve the aggregator's single-level MILP.
    Mpec,
    /// Exhaustive enumeration through the clearing cascade.
    Oracle,
}

#[derive(Clone, Debug)]
pub struct EngineConfig {
    /// Maximum sweeps (the paper's K).
    pub max_iterations: usize,
    pub responder: Responder,
    /// Profit improvements at or below this keep the incumbent strategy.
    pub profit_eps: f64,
    /// Solver limits for the per-aggregator MILPs.
    pub milp: MilpConfig,
    /// Enumeration cap for the oracle responder.
    pub oracle_cap: u128,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_iterations: 50,
            responder: Responder::Mpec,
            profit_eps: 1e-4,
            milp: MilpConfig::default(),
            oracle_cap: BR_CAP,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceEntry {
    pub sweep: usize,
    pub aggregator: String,
    pub old: StrategyProfile,
    pub new: StrategyProfile,
    pub old_profit: f64,
    pub new_profit: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    IterationLimit,
    Cycling,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub scheme: Scheme,
    pub profile: StrategyProfile,
    pub converged: bool,
    pub termination: Termination,
    /// Sweeps used.
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    pub costs: SystemCost,
    pub nash_certified: bool,
}

/// One best response with rivals fixed at `profile`; returns the
/// aggregator's slice and the profit the responder attained.
pub fn best_response(
    case: &MarketCase,
    scheme: Scheme,
    aggregator: usize,
    profile: &StrategyProfile,
    cfg: &EngineConfig,
) -> Result<(StrategyProfile, f64), EquilibriumError> {
    match cfg.responder {
        Responder::Oracle => enumerate_best_response(case, scheme, aggregator, profile, cfg.oracle_cap),
        Responder::Mpec => {
            let instance = build_mpec(case, scheme, aggregator, profile)?;
            let mut milp = cfg.milp.clone();
            // The incumbent profile makes a feasible start whose objective
            // prunes most of the tree immediately.
            if milp.warm_start.is_none() {
                if let Ok(ws) = warm_start_from_clearing(case, &instance, profile) {
                    milp.warm_start = Some(ws);
                }
            }
            let sol = solve_milp(&instance.model, &milp)?;
            if sol.status != MilpStatus::Optimal {
                return Err(EquilibriumError::Mpec(
                    crate::error::MilpError::IterationLimit,
                ));
            }
            let own = extract_strategy(&instance, &sol)?;
            Ok((own, sol.objective))
        }
    }
}

/// Best-response iteration from the maximum-profit initialization.
pub fn find_equilibrium(
    case: &MarketCase,
    scheme: Scheme,
    cfg: &EngineConfig,
) -> Result<EquilibriumReport, EquilibriumError> {
    let mut profile = StrategyProfile::init(case, scheme);
    let mut trace = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    seen.insert(profile_key(&profile));
    let mut termination = Termination::IterationLimit;
    let mut sweeps_used = cfg.max_iterations;

    for sweep in 1..=cfg.max_iterations {
        let mut changed = false;
        for agg in 0..case.aggregators.len() {
            let (br, br_profit) =
                best_response(case, scheme, agg, &profile, cfg).map_err(|e| {
                    EquilibriumError::BestResponse {
                        aggregator: case.aggregators[agg].id.clone(),
                        iteration: sweep,
                        source: Box::new(e),
                    }
                })?;
            let current = profile.slice(case, agg);
            if br == current {
                continue;
            }
            // Ties keep the incumbent: the stopping rule compares
            // strategies, and alternative optima would cycle forever.
            let current_profit = evaluate_profit(case, scheme, agg, &profile);
            if br_profit <= current_profit + cfg.profit_eps {
                continue;
            }
            let mut next = profile.clone();
            next.adopt(case, agg, &br);
            trace.push(TraceEntry {
                sweep,
                aggregator: case.aggregators[agg].id.clone(),
                old: current,
                new: br.clone(),
                old_profit: current_profit,
                new_profit: br_profit,
            });
            profile = next;
            changed = true;
        }
        if !changed {
            termination = Termination::Converged;
            sweeps_used = sweep;
            break;
        }
        let key = profile_key(&profile);
        if !seen.insert(key) {
            termination = Termination::Cycling;
            sweeps_used = sweep;
            break;
        }
    }

    let (_, per_scenario) = clear_all(case, scheme, &profile)?;
    let costs = system_cost(&per_scenario, &case.scenarios.probabilities);
    Ok(EquilibriumReport {
        scheme,
        profile,
        converged: termination == Termination::Converged,
        termination,
        iterations: sweeps_used,
        trace,
        costs,
        nash_certified: false,
    })
}

/// Equilibrium check: re-solve each aggregator's best response against the
/// profile; no one may improve by more than the tolerance.
pub fn is_nash(
    case: &MarketCase,
    scheme: Scheme,
    profile: &StrategyProfile,
    cfg: &EngineConfig,
) -> Result<(bool, Vec<(String, f64)>), EquilibriumError> {
    let mut improvements = Vec::new();
    let mut nash = true;
    for agg in 0..case.aggregators.len() {
        let (_, br_profit) = best_response(case, scheme, agg, profile, cfg)?;
        let current = evaluate_profit(case, scheme, agg, profile);
        let improvement = br_profit - current;
        if improvement > cfg.profit_eps {
            nash = false;
        }
        improvements.push((case.aggregators[agg].id.clone(), improvement));
    }
    Ok((nash, improvements))
}

/// Run the equilibrium check and stamp the report.
pub fn certify(
    case: &MarketCase,
    report: &mut EquilibriumReport,
    cfg: &EngineConfig,
) -> Result<bool, EquilibriumError> {
    let (ok, _) = is_nash(case, report.scheme, &report.profile, cfg)?;
    report.nash_certified = ok;
    Ok(ok)
}

fn profile_key(profile: &StrategyProfile) -> String {
    serde_json::to_string(profile).expect("profiles serialize")
}
