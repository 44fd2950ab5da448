//! Scheme-level evaluation: full clearing cascades, system costs and
//! aggregator profits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::asm::{
    asm_prices, clear_asm_common, clear_asm_distribution, clear_asm_transmission_b,
    clear_asm_transmission_c, AsmResult, AsmScope,
};
use super::dam::{clear_dam, dam_bids, DamResult};
use crate::error::ClearingError;
use crate::model::{MarketCase, ResourceRef, Scheme, StrategyProfile};

/// All market results of one scenario, in clearing order: scheme A holds the
/// single common market; schemes B and C hold the K distribution markets
/// followed by the transmission market.
pub type ScenarioMarkets = Vec<AsmResult>;

/// Clear every ancillary-services market of one scenario.
pub fn clear_scenario(
    case: &MarketCase,
    scheme: Scheme,
    dam: &DamResult,
    profile: &StrategyProfile,
    scenario: usize,
) -> Result<ScenarioMarkets, ClearingError> {
    match scheme {
        Scheme::A => {
            let bids = asm_prices(case, scheme, profile, AsmScope::Common)?;
            Ok(vec![clear_asm_common(case, dam, &bids, scenario)?])
        }
        Scheme::B => {
            let mut out = Vec::with_capacity(case.dist_count() + 1);
            for k in 0..case.dist_count() {
                let bids = asm_prices(case, scheme, profile, AsmScope::Dist(k))?;
                out.push(clear_asm_distribution(case, dam, &bids, scenario, k)?);
            }
            let bids = asm_prices(case, scheme, profile, AsmScope::TransB)?;
            out.push(clear_asm_transmission_b(case, dam, &bids, scenario)?);
            Ok(out)
        }
        Scheme::C => {
            let mut out = Vec::with_capacity(case.dist_count() + 1);
            for k in 0..case.dist_count() {
                let bids = asm_prices(case, scheme, profile, AsmScope::Dist(k))?;
                out.push(clear_asm_distribution(case, dam, &bids, scenario, k)?);
            }
            let bids = asm_prices(case, scheme, profile, AsmScope::TransC)?;
            let trans = clear_asm_transmission_c(case, dam, &out, &bids, scenario)?;
            out.push(trans);
            Ok(out)
        }
    }
}

/// Clear the day-ahead market and every scenario's service markets.
/// Scenarios are independent and run in parallel.
pub fn clear_all(
    case: &MarketCase,
    scheme: Scheme,
    profile: &StrategyProfile,
) -> Result<(DamResult, Vec<ScenarioMarkets>), ClearingError> {
    let dam = clear_dam(case, &dam_bids(case, profile)?)?;
    let per_scenario: Result<Vec<_>, _> = (0..case.scenarios.len())
        .into_par_iter()
        .map(|s| clear_scenario(case, scheme, &dam, profile, s))
        .collect();
    Ok((dam, per_scenario?))
}

/// Total flexibility-provision cost per scenario and in expectation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemCost {
    pub per_scenario: Vec<f64>,
    pub expected: f64,
}

/// Sum of the scheme's market objectives per scenario, probability-weighted
/// in expectation.
pub fn system_cost(per_scenario: &[ScenarioMarkets], probabilities: &[f64]) -> SystemCost {
    let costs: Vec<f64> = per_scenario
        .iter()
        .map(|markets| markets.iter().map(|m| m.objective).sum())
        .collect();
    let expected = costs
        .iter()
        .zip(probabilities)
        .map(|(c, p)| c * p)
        .sum();
    SystemCost {
        per_scenario: costs,
        expected,
    }
}

/// Expected profit of one aggregator under the scheme's settlement:
/// pay-as-clear day-ahead energy, pay-as-bid regulation, curtailed load
/// buying back at its curtailment bid while foregoing energy at the
/// day-ahead price.
pub fn aggregator_profit(
    case: &MarketCase,
    scheme: Scheme,
    aggregator: usize,
    dam: &DamResult,
    per_scenario: &[ScenarioMarkets],
    profile: &StrategyProfile,
) -> Result<f64, ClearingError> {
    let resources = case.aggregator_resources(aggregator);
    let mut profit = 0.0;
    for res in &resources {
        if let ResourceRef::Unit(u) = res {
            profit += (dam.price - case.units[*u].cost) * dam.quantities[*u];
        }
    }
    for (s, markets) in per_scenario.iter().enumerate() {
        let sigma = case.scenarios.probabilities[s];
        for market in markets {
            let bids = asm_prices(case, scheme, profile, market.scope)?;
            for res in &resources {
                match *res {
                    ResourceRef::Unit(u) => {
                        if market.up[u] != 0.0 || market.down[u] != 0.0 {
                            let unit = &case.units[u];
                            profit += sigma
                                * ((bids.up[u] - unit.cost_up) * market.up[u]
                                    + (unit.cost_down - bids.down[u]) * market.down[u]);
                        }
                    }
                    ResourceRef::Load(l) => {
                        if market.curtail[l] != 0.0 {
                            profit += sigma * (bids.curtail[l] - dam.price) * market.curtail[l];
                        }
                    }
                }
            }
        }
    }
    Ok(profit)
}
