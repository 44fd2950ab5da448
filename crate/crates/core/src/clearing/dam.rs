//! Day-ahead market: single-bus pay-as-clear energy auction.

use serde::{Deserialize, Serialize};

use crate::error::ClearingError;
use crate::milp::{solve_lp, MilpModel, ObjSense, RowSense};
use crate::model::{BidSlot, MarketCase, ResourceRef, StrategyProfile};

/// Deterministic tie-break weight: among alternative optima, dispatch is
/// steered toward lower unit indexes.
pub const LEX_WEIGHT: f64 = 1e-9;

/// Cleared day-ahead market.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DamResult {
    /// Accepted quantity per unit, case order (MWh).
    pub quantities: Vec<f64>,
    /// Clearing price: the highest accepted bid, which is the smallest
    /// dual-feasible value of the balance constraint's dual.
    pub price: f64,
    /// Capacity duals per unit (EUR/MWh, non-negative).
    pub capacity_duals: Vec<f64>,
    /// Social-benefit cost at declared prices.
    pub objective: f64,
    /// Bids the market was cleared with.
    pub bids: Vec<f64>,
}

/// Day-ahead bid vector of a full strategy profile.
pub fn dam_bids(case: &MarketCase, profile: &StrategyProfile) -> Result<Vec<f64>, ClearingError> {
    (0..case.units.len())
        .map(|u| {
            profile
                .price(case, ResourceRef::Unit(u), BidSlot::Dam)
                .ok_or_else(|| ClearingError::MissingBid(format!("{} day-ahead", case.units[u].id)))
        })
        .collect()
}

/// Clear the day-ahead market at the given bid prices.
pub fn clear_dam(case: &MarketCase, bids: &[f64]) -> Result<DamResult, ClearingError> {
    assert_eq!(bids.len(), case.units.len(), "one bid per unit");
    let net_load = case.net_load();
    let offered: f64 = case.units.iter().map(|u| u.capacity).sum();
    if offered < net_load - 1e-9 || net_load < -1e-9 {
        return Err(ClearingError::DamInfeasible { offered, net_load });
    }

    let mut model = MilpModel::new("dam", ObjSense::Minimize);
    let gvars: Vec<_> = case
        .units
        .iter()
        .zip(bids)
        .enumerate()
        .map(|(u, (unit, b))| {
            model.add_var(
                format!("g.{}", unit.id),
                0.0,
                unit.capacity,
                b + LEX_WEIGHT * (u + 1) as f64,
            )
        })
        .collect();
    model.add_row(
        "balance",
        gvars.iter().map(|&g| (g, 1.0)).collect(),
        RowSense::Eq,
        net_load,
    );
    let res = solve_lp(&model)?;

    let quantities: Vec<f64> = gvars.iter().map(|g| res.values[g.0].max(0.0)).collect();
    // Pay-as-clear price: last accepted bid. With zero demand no bid is
    // accepted and the cheapest offer prices the market.
    let price = quantities
        .iter()
        .zip(bids)
        .filter(|(g, _)| **g > 1e-7)
        .map(|(_, b)| *b)
        .fold(f64::NEG_INFINITY, f64::max);
    let price = if price.is_finite() {
        price
    } else {
        bids.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let capacity_duals: Vec<f64> = case
        .units
        .iter()
        .zip(&quantities)
        .zip(bids)
        .map(|((unit, g), b)| {
            if *g >= unit.capacity - 1e-7 {
                (price - b).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let objective: f64 = quantities.iter().zip(bids).map(|(g, b)| g * b).sum();
    Ok(DamResult {
        quantities,
        price,
        capacity_duals,
        objective,
        bids: bids.to_vec(),
    })
}
