//! Exact linearizations for the bilinear profit terms: binary-times-
//! continuous products via McCormick bounding rows, and the day-ahead price
//! discretization over the candidate grid.

use std::collections::BTreeMap;

use crate::error::MilpError;
use crate::milp::{MilpModel, RowSense, VarId};
use crate::model::MarketCase;

/// Auxiliary variable representing `selector * quantity` for a binary
/// selector and a continuous quantity with known upper bound:
/// `q + M(x-1) <= XG <= q` and `0 <= XG <= M x`.
/// When `x = 1` the left pair pins `XG = q`; when `x = 0` the right pair
/// pins `XG = 0`.
pub fn mccormick_product(
    model: &mut MilpModel,
    selector: VarId,
    quantity: VarId,
    bound: f64,
    name: &str,
) -> Result<VarId, MilpError> {
    if !bound.is_finite() {
        return Err(MilpError::Malformed(format!(
            "product {name} needs a finite quantity bound"
        )));
    }
    let xg = model.add_var(format!("xg.{name}"), 0.0, bound, 0.0);
    model.add_row(
        format!("mc.lo.{name}"),
        vec![(quantity, 1.0), (selector, bound), (xg, -1.0)],
        RowSense::Le,
        bound,
    );
    model.add_row(
        format!("mc.hi.{name}"),
        vec![(xg, 1.0), (quantity, -1.0)],
        RowSense::Le,
        0.0,
    );
    model.add_row(
        format!("mc.sel.{name}"),
        vec![(xg, 1.0), (selector, -bound)],
        RowSense::Le,
        0.0,
    );
    Ok(xg)
}

/// Replace `price * quantity` by a linear expression when the price is a
/// one-of-ladder selection: returns the terms `sum_a B_a * XG_a`.
///
/// Two envelope rows bound the group by the ladder extremes
/// (`min B * q <= sum B_a XG_a <= max B * q`); they are implied at every
/// point with an integral selection and exactly one selector active, but
/// they tighten the LP relaxation substantially, which the search bound
/// depends on.
pub fn linearize_price_times_quantity(
    model: &mut MilpModel,
    prices: &[f64],
    selectors: &[VarId],
    quantity: VarId,
    bound: f64,
    tag: &str,
) -> Result<Vec<(VarId, f64)>, MilpError> {
    assert_eq!(prices.len(), selectors.len());
    let mut terms = Vec::with_capacity(prices.len());
    for (a, (&price, &x)) in prices.iter().zip(selectors).enumerate() {
        let xg = mccormick_product(model, x, quantity, bound, &format!("{tag}.{a}"))?;
        terms.push((xg, price));
    }
    add_price_envelope(model, &terms, quantity, tag);
    Ok(terms)
}

/// Envelope rows for a completed product group (see above); also used for
/// the clearing-price grid products.
pub(crate) fn add_price_envelope(
    model: &mut MilpModel,
    terms: &[(VarId, f64)],
    quantity: VarId,
    tag: &str,
) {
    let lo = terms.iter().map(|(_, b)| *b).fold(f64::INFINITY, f64::min);
    let hi = terms.iter().map(|(_, b)| *b).fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return;
    }
    let mut upper: Vec<(VarId, f64)> = terms.to_vec();
    upper.push((quantity, -hi));
    model.add_row(format!("env.hi.{tag}"), upper, RowSense::Le, 0.0);
    let mut lower: Vec<(VarId, f64)> = terms.to_vec();
    lower.push((quantity, -lo));
    model.add_row(format!("env.lo.{tag}"), lower, RowSense::Ge, 0.0);
}

/// Price discretization block: binaries `y` over every unit's day-ahead
/// candidate grid, exactly one selected, linked to the balance dual so that
/// the clearing price equals the selected candidate.
pub struct LambdaBlock {
    /// `(unit, candidate) -> y` selection binaries.
    pub y: BTreeMap<(usize, usize), VarId>,
    /// The grid value of each selector.
    pub grid: BTreeMap<(usize, usize), f64>,
}

pub fn discretize_lambda(
    model: &mut MilpModel,
    case: &MarketCase,
    lambda: VarId,
) -> LambdaBlock {
    let mut y = BTreeMap::new();
    let mut grid = BTreeMap::new();
    let mut pick_row: Vec<(VarId, f64)> = Vec::new();
    let mut link_row: Vec<(VarId, f64)> = vec![(lambda, 1.0)];
    for u in 0..case.units.len() {
        let ladder = case.ladder(
            crate::model::ResourceRef::Unit(u),
            crate::model::MarketRole::DamSale,
        );
        for (a, &price) in ladder.iter().enumerate() {
            let v = model.add_binary(format!("y.{}.{a}", case.units[u].id), 0.0);
            pick_row.push((v, 1.0));
            link_row.push((v, -price));
            y.insert((u, a), v);
            grid.insert((u, a), price);
        }
    }
    model.add_row("lambda.pick", pick_row, RowSense::Eq, 1.0);
    model.add_row("lambda.link", link_row, RowSense::Eq, 0.0);
    LambdaBlock { y, grid }
}
