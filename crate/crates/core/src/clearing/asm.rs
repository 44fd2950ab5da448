//! Ancillary-services market clearings.
//!
//! One LP builder covers the four variants: the common market (scheme A),
//! the per-network distribution markets (schemes B and C share the shape),
//! the transmission market of scheme B (transmission resources only) and
//! the transmission market of scheme C (all resources, with residual offer
//! quantities carried over from the distribution clearings).

use serde::{Deserialize, Serialize};

use super::dam::{DamResult, LEX_WEIGHT};
use crate::error::ClearingError;
use crate::milp::{solve_lp, MilpModel, ObjSense, RowSense, VarId};
use crate::model::{BidSlot, MarketCase, ResourceRef, Scheme, StrategyProfile, Subsystem};

/// Which market instance an [`AsmResult`] belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AsmScope {
    /// Whole-system market of scheme A.
    Common,
    /// Local market of one distribution network (schemes B and C).
    Dist(usize),
    /// Transmission market of scheme B.
    TransB,
    /// Transmission market of scheme C (with distribution residuals).
    TransC,
}

impl AsmScope {
    pub fn label(&self) -> String {
        match self {
            AsmScope::Common => "ASM".to_string(),
            AsmScope::Dist(k) => format!("ASM-D{}", k + 1),
            AsmScope::TransB | AsmScope::TransC => "ASM-T".to_string(),
        }
    }
}

/// Resolved bid prices for one market instance (full-size vectors; entries
/// of non-participating resources are unused).
#[derive(Clone, Debug)]
pub struct AsmBids {
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    pub curtail: Vec<f64>,
}

/// Bid slots used by the given scheme/scope combination.
pub fn scope_slots(scheme: Scheme, scope: AsmScope) -> (BidSlot, BidSlot, BidSlot) {
    match (scheme, scope) {
        (Scheme::A, AsmScope::Common) | (Scheme::B, AsmScope::Dist(_) | AsmScope::TransB) => {
            (BidSlot::AsmUp, BidSlot::AsmDown, BidSlot::AsmCurtail)
        }
        (Scheme::C, AsmScope::Dist(_)) => (BidSlot::DistUp, BidSlot::DistDown, BidSlot::DistCurtail),
        (Scheme::C, AsmScope::TransC) => {
            (BidSlot::TransUp, BidSlot::TransDown, BidSlot::TransCurtail)
        }
        (s, sc) => unreachable!("scope {sc:?} is not part of scheme {s}"),
    }
}

/// Resolve the prices a market instance sees from a full strategy profile.
pub fn asm_prices(
    case: &MarketCase,
    scheme: Scheme,
    profile: &StrategyProfile,
    scope: AsmScope,
) -> Result<AsmBids, ClearingError> {
    let (up_slot, down_slot, curt_slot) = scope_slots(scheme, scope);
    let mut bids = AsmBids {
        up: vec![f64::NAN; case.units.len()],
        down: vec![f64::NAN; case.units.len()],
        curtail: vec![f64::NAN; case.loads.len()],
    };
    for u in 0..case.units.len() {
        if participates_unit(case, scope, u) {
            let res = ResourceRef::Unit(u);
            bids.up[u] = profile.price(case, res, up_slot).ok_or_else(|| {
                ClearingError::MissingBid(format!("{} {:?}", case.units[u].id, up_slot))
            })?;
            bids.down[u] = profile.price(case, res, down_slot).ok_or_else(|| {
                ClearingError::MissingBid(format!("{} {:?}", case.units[u].id, down_slot))
            })?;
        }
    }
    for l in 0..case.loads.len() {
        if case.loads[l].is_flexible() && participates_load(case, scope, l) {
            bids.curtail[l] = profile
                .price(case, ResourceRef::Load(l), curt_slot)
                .ok_or_else(|| {
                    ClearingError::MissingBid(format!("load {} {:?}", case.loads[l].node, curt_slot))
                })?;
        }
    }
    Ok(bids)
}

fn in_scope(scope: AsmScope, sub: Subsystem) -> bool {
    match scope {
        AsmScope::Common | AsmScope::TransC => true,
        AsmScope::Dist(k) => sub == Subsystem::Distribution(k),
        AsmScope::TransB => sub == Subsystem::Transmission,
    }
}

fn participates_unit(case: &MarketCase, scope: AsmScope, u: usize) -> bool {
    in_scope(scope, case.unit_subsystem(u))
}

fn participates_load(case: &MarketCase, scope: AsmScope, l: usize) -> bool {
    case.loads[l].is_flexible() && in_scope(scope, case.load_subsystem(l))
}

fn participates_renewable(case: &MarketCase, scope: AsmScope, r: usize) -> bool {
    in_scope(scope, case.renewable_subsystem(r))
}

/// Lines whose transit constraint belongs to this market instance.
fn scope_lines(case: &MarketCase, scope: AsmScope) -> Vec<usize> {
    case.network
        .lines
        .iter()
        .enumerate()
        .filter(|(_, line)| match scope {
            AsmScope::Common => true,
            AsmScope::Dist(k) => line.subsystem == Subsystem::Distribution(k),
            AsmScope::TransB | AsmScope::TransC => line.subsystem == Subsystem::Transmission,
        })
        .map(|(i, _)| i)
        .collect()
}

/// Result of clearing one ancillary-services market instance in one
/// scenario. Quantity and dual vectors are full-size (case order); entries
/// of non-participating resources stay zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsmResult {
    pub scope: AsmScope,
    pub scenario: usize,
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    pub curtail: Vec<f64>,
    pub renewable_curtail: Vec<f64>,
    /// Balance dual (alpha).
    pub balance_dual: f64,
    /// Upper-bound duals: up-regulation (beta), down-regulation (phi),
    /// curtailment (gamma), renewable curtailment (chi).
    pub up_duals: Vec<f64>,
    pub down_duals: Vec<f64>,
    pub curtail_duals: Vec<f64>,
    pub renewable_duals: Vec<f64>,
    /// Transit duals (mu), full line vector.
    pub flow_duals: Vec<f64>,
    /// Regulation cost at declared prices.
    pub objective: f64,
}

/// Common market of scheme A: all resources, all lines, total imbalance.
pub fn clear_asm_common(
    case: &MarketCase,
    dam: &DamResult,
    bids: &AsmBids,
    scenario: usize,
) -> Result<AsmResult, ClearingError> {
    clear_asm(case, dam, bids, scenario, AsmScope::Common, None)
}

/// Local market of distribution network `k` (identical shape in B and C).
pub fn clear_asm_distribution(
    case: &MarketCase,
    dam: &DamResult,
    bids: &AsmBids,
    scenario: usize,
    k: usize,
) -> Result<AsmResult, ClearingError> {
    clear_asm(case, dam, bids, scenario, AsmScope::Dist(k), None)
}

/// Transmission market of scheme B: only transmission resources regulate;
/// distribution nodes enter the transit expressions at their day-ahead
/// dispatch plus realized deviations (their boundary exchange is preserved
/// by the local markets, so local re-dispatch is transit-neutral).
pub fn clear_asm_transmission_b(
    case: &MarketCase,
    dam: &DamResult,
    bids: &AsmBids,
    scenario: usize,
) -> Result<AsmResult, ClearingError> {
    clear_asm(case, dam, bids, scenario, AsmScope::TransB, None)
}

/// Transmission market of scheme C: every resource may regulate, but
/// distribution resources only offer what the local clearings left over.
pub fn clear_asm_transmission_c(
    case: &MarketCase,
    dam: &DamResult,
    dist_results: &[AsmResult],
    bids: &AsmBids,
    scenario: usize,
) -> Result<AsmResult, ClearingError> {
    assert_eq!(
        dist_results.len(),
        case.dist_count(),
        "one distribution result per network"
    );
    clear_asm(case, dam, bids, scenario, AsmScope::TransC, Some(dist_results))
}

fn clear_asm(
    case: &MarketCase,
    dam: &DamResult,
    bids: &AsmBids,
    scenario: usize,
    scope: AsmScope,
    dist: Option<&[AsmResult]>,
) -> Result<AsmResult, ClearingError> {
    let s = scenario;
    let imb = case.imbalances_by_index(s);
    let target = match scope {
        AsmScope::Common => imb.total,
        AsmScope::Dist(k) => imb.distribution[k],
        AsmScope::TransB | AsmScope::TransC => imb.transmission,
    };

    // Residual quantities already committed in the local markets (scheme C).
    let d_up = |u: usize| dist.map_or(0.0, |d| sum_over(d, |r| r.up[u]));
    let d_down = |u: usize| dist.map_or(0.0, |d| sum_over(d, |r| r.down[u]));
    let d_curt = |l: usize| dist.map_or(0.0, |d| sum_over(d, |r| r.curtail[l]));
    let d_wcurt = |r_: usize| dist.map_or(0.0, |d| sum_over(d, |r| r.renewable_curtail[r_]));

    let mut model = MilpModel::new(format!("asm-{}", scope.label()), ObjSense::Minimize);
    let mut rank = 0usize;
    let mut pert = move || {
        rank += 1;
        LEX_WEIGHT * rank as f64
    };

    let mut up_var = vec![None; case.units.len()];
    let mut down_var = vec![None; case.units.len()];
    let mut curt_var = vec![None; case.loads.len()];
    let mut wcurt_var = vec![None; case.renewables.len()];

    for (u, unit) in case.units.iter().enumerate() {
        if !participates_unit(case, scope, u) {
            continue;
        }
        let g = dam.quantities[u];
        let sub = case.unit_subsystem(u);
        let (up_cap, down_cap) = if scope == AsmScope::TransC && sub != Subsystem::Transmission {
            (
                (unit.capacity - g - d_up(u) + d_down(u)).max(0.0),
                (g + d_up(u) - d_down(u)).max(0.0),
            )
        } else {
            ((unit.capacity - g).max(0.0), g.max(0.0))
        };
        up_var[u] = Some(model.add_var(
            format!("up.{}", unit.id),
            0.0,
            up_cap,
            bids.up[u] + pert(),
        ));
        down_var[u] = Some(model.add_var(
            format!("down.{}", unit.id),
            0.0,
            down_cap,
            -bids.down[u] + pert(),
        ));
    }
    for (l, load) in case.loads.iter().enumerate() {
        if !participates_load(case, scope, l) {
            continue;
        }
        let cap = if scope == AsmScope::TransC && case.load_subsystem(l) != Subsystem::Transmission
        {
            (load.curtailable(s) - d_curt(l)).max(0.0)
        } else {
            load.curtailable(s)
        };
        curt_var[l] = Some(model.add_var(
            format!("curt.{}", load.node),
            0.0,
            cap,
            bids.curtail[l] + pert(),
        ));
    }
    for (r, ren) in case.renewables.iter().enumerate() {
        if !participates_renewable(case, scope, r) {
            continue;
        }
        let cap = if scope == AsmScope::TransC && case.renewable_subsystem(r) != Subsystem::Transmission
        {
            (ren.realized[s] - d_wcurt(r)).max(0.0)
        } else {
            ren.realized[s]
        };
        // Renewable curtailment is free in the objective.
        wcurt_var[r] = Some(model.add_var(format!("wcurt.{}", ren.id), 0.0, cap, pert()));
    }

    // Balance: up + curtailment - down - renewable curtailment = imbalance.
    let mut bal: Vec<(VarId, f64)> = Vec::new();
    for v in up_var.iter().flatten() {
        bal.push((*v, 1.0));
    }
    for v in curt_var.iter().flatten() {
        bal.push((*v, 1.0));
    }
    for v in down_var.iter().flatten() {
        bal.push((*v, -1.0));
    }
    for v in wcurt_var.iter().flatten() {
        bal.push((*v, -1.0));
    }
    let balance_row = model.add_row("balance", bal, RowSense::Eq, target);

    // Transit rows: variable part <= limit - constant injections part.
    let lines = scope_lines(case, scope);
    let mut flow_rows = Vec::with_capacity(lines.len());
    for &li in &lines {
        let row = &case.network.ptdf[li];
        let mut coeffs: Vec<(VarId, f64)> = Vec::new();
        let mut constant = 0.0;
        for (n, node) in case.network.nodes.iter().enumerate() {
            let h = row[n];
            if h == 0.0 {
                continue;
            }
            // Scope of the flow expression: distribution markets only see
            // their own nodes; both transmission markets see every node.
            if matches!(scope, AsmScope::Dist(k) if node.subsystem != Subsystem::Distribution(k)) {
                continue;
            }
            constant += h * nodal_constant(case, dam, s, scope, dist, n);
            for (u, unit) in case.units.iter().enumerate() {
                if unit.node == node.id {
                    if let Some(v) = up_var[u] {
                        coeffs.push((v, h));
                    }
                    if let Some(v) = down_var[u] {
                        coeffs.push((v, -h));
                    }
                }
            }
            for (l, load) in case.loads.iter().enumerate() {
                if load.node == node.id {
                    if let Some(v) = curt_var[l] {
                        coeffs.push((v, h));
                    }
                }
            }
            for (r, ren) in case.renewables.iter().enumerate() {
                if ren.node == node.id {
                    if let Some(v) = wcurt_var[r] {
                        coeffs.push((v, -h));
                    }
                }
            }
        }
        let line = &case.network.lines[li];
        flow_rows.push((
            li,
            model.add_row(
                format!("flow.{}", line.id),
                coeffs,
                RowSense::Le,
                line.limit - constant,
            ),
        ));
    }

    let res = solve_lp(&model).map_err(|e| match e {
        crate::error::MilpError::Infeasible => ClearingError::AsmInfeasible {
            market: scope.label(),
            scenario: case.scenarios.ids[s].clone(),
        },
        other => ClearingError::Solver(other),
    })?;

    let take = |v: &Option<VarId>| v.map(|id| res.values[id.0].max(0.0)).unwrap_or(0.0);
    let bound_dual = |v: &Option<VarId>| v.map(|id| (-res.reduced_costs[id.0]).max(0.0)).unwrap_or(0.0);

    let up: Vec<f64> = up_var.iter().map(take).collect();
    let down: Vec<f64> = down_var.iter().map(take).collect();
    let curtail: Vec<f64> = curt_var.iter().map(take).collect();
    let renewable_curtail: Vec<f64> = wcurt_var.iter().map(take).collect();
    let mut flow_duals = vec![0.0; case.network.lines.len()];
    for (li, row) in &flow_rows {
        flow_duals[*li] = (-res.row_duals[row.0]).max(0.0);
    }
    let objective = (0..case.units.len())
        .map(|u| {
            if up_var[u].is_some() {
                bids.up[u] * up[u] - bids.down[u] * down[u]
            } else {
                0.0
            }
        })
        .sum::<f64>()
        + (0..case.loads.len())
            .map(|l| if curt_var[l].is_some() { bids.curtail[l] * curtail[l] } else { 0.0 })
            .sum::<f64>();

    Ok(AsmResult {
        scope,
        scenario: s,
        up,
        down,
        curtail,
        renewable_curtail,
        balance_dual: res.row_duals[balance_row.0],
        up_duals: up_var.iter().map(bound_dual).collect(),
        down_duals: down_var.iter().map(bound_dual).collect(),
        curtail_duals: curt_var.iter().map(bound_dual).collect(),
        renewable_duals: wcurt_var.iter().map(bound_dual).collect(),
        flow_duals,
        objective,
    })
}

/// Constant nodal injection a market instance sees at node `n`: day-ahead
/// dispatch plus realized renewables minus realized load, with the local
/// re-dispatch folded in for the scheme-C transmission market.
fn nodal_constant(
    case: &MarketCase,
    dam: &DamResult,
    s: usize,
    scope: AsmScope,
    dist: Option<&[AsmResult]>,
    n: usize,
) -> f64 {
    let node = &case.network.nodes[n];
    let mut inj = 0.0;
    for (u, unit) in case.units.iter().enumerate() {
        if unit.node == node.id {
            inj += dam.quantities[u];
            if scope == AsmScope::TransC {
                if let Some(d) = dist {
                    inj += sum_over(d, |r| r.up[u]) - sum_over(d, |r| r.down[u]);
                }
            }
        }
    }
    for (r, ren) in case.renewables.iter().enumerate() {
        if ren.node == node.id {
            inj += ren.realized[s];
            if scope == AsmScope::TransC {
                if let Some(d) = dist {
                    inj -= sum_over(d, |x| x.renewable_curtail[r]);
                }
            }
        }
    }
    for (l, load) in case.loads.iter().enumerate() {
        if load.node == node.id {
            inj -= load.realized[s];
            if scope == AsmScope::TransC {
                if let Some(d) = dist {
                    inj += sum_over(d, |x| x.curtail[l]);
                }
            }
        }
    }
    inj
}

fn sum_over(results: &[AsmResult], f: impl Fn(&AsmResult) -> f64) -> f64 {
    results.iter().map(f).sum()
}
