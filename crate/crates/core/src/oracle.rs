//! Brute-force verification: enumerate discrete strategy spaces, evaluate
//! profits through the direct clearing cascade (never through the bilevel
//! machinery) and certify best responses and equilibria on small instances.

use rayon::prelude::*;

use crate::clearing::{aggregator_profit, clear_all};
use crate::error::EquilibriumError;
use crate::model::{slots_for, MarketCase, ProfileKey, Scheme, StrategyProfile};

/// Profit ties within this margin keep the earlier (lexicographically
/// smaller) strategy.
pub const TIE_EPS: f64 = 1e-9;

/// Default cap on enumerated best-response strategies.
pub const BR_CAP: u128 = 1_000_000;
/// Default cap on enumerated joint profiles.
pub const NASH_CAP: u128 = 100_000;

/// The Cartesian product of one aggregator's candidate indices under a
/// scheme, in deterministic (resource-major, slot-minor) order.
#[derive(Clone, Debug)]
pub struct StrategySpace {
    pub keys: Vec<ProfileKey>,
    pub sizes: Vec<usize>,
}

impl StrategySpace {
    pub fn new(case: &MarketCase, scheme: Scheme, aggregator: usize) -> Self {
        let mut keys = Vec::new();
        let mut sizes = Vec::new();
        for res in case.aggregator_resources(aggregator) {
            for slot in slots_for(case, scheme, res) {
                keys.push(ProfileKey { resource: res, slot });
                sizes.push(case.ladder(res, slot.role()).len());
            }
        }
        StrategySpace { keys, sizes }
    }

    pub fn count(&self) -> u128 {
        self.sizes.iter().map(|&s| s as u128).product()
    }

    /// Decode the `i`-th strategy (lexicographic order, first key slowest).
    pub fn decode(&self, mut i: u128) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for k in (0..self.sizes.len()).rev() {
            let s = self.sizes[k] as u128;
            out[k] = (i % s) as usize;
            i /= s;
        }
        out
    }

    pub fn apply(&self, profile: &mut StrategyProfile, choice: &[usize]) {
        for (key, &c) in self.keys.iter().zip(choice) {
            profile.set(key.resource, key.slot, c);
        }
    }
}

/// Best response of one aggregator by exhaustive enumeration: every strategy
/// is evaluated by running the scheme's full clearing cascade; infeasible
/// clearings count as minus infinity. Ties break toward the
/// lexicographically smallest candidate tuple.
pub fn enumerate_best_response(
    case: &MarketCase,
    scheme: Scheme,
    aggregator: usize,
    rivals: &StrategyProfile,
    cap: u128,
) -> Result<(StrategyProfile, f64), EquilibriumError> {
    let space = StrategySpace::new(case, scheme, aggregator);
    let total = space.count();
    if total > cap {
        return Err(EquilibriumError::SpaceTooLarge { size: total, cap });
    }
    let profits: Vec<f64> = (0..total as u64)
        .into_par_iter()
        .map(|i| {
            let mut profile = rivals.clone();
            space.apply(&mut profile, &space.decode(i as u128));
            evaluate_profit(case, scheme, aggregator, &profile)
        })
        .collect();
    // Deterministic ordered reduce.
    let mut best = 0usize;
    let mut visited = 0u128;
    for (i, p) in profits.iter().enumerate() {
        visited += 1;
        if *p > profits[best] + TIE_EPS {
            best = i;
        }
    }
    debug_assert_eq!(visited, total, "enumeration must visit the whole space");
    let mut out = rivals.clone();
    space.apply(&mut out, &space.decode(best as u128));
    Ok((out.slice(case, aggregator), profits[best]))
}

/// Profit of a full profile for one aggregator; minus infinity when any
/// market fails to clear under it.
pub fn evaluate_profit(
    case: &MarketCase,
    scheme: Scheme,
    aggregator: usize,
    profile: &StrategyProfile,
) -> f64 {
    match clear_all(case, scheme, profile) {
        Ok((dam, per_scenario)) => {
            aggregator_profit(case, scheme, aggregator, &dam, &per_scenario, profile)
                .unwrap_or(f64::NEG_INFINITY)
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// All pure equilibria of the joint discrete game by total enumeration:
/// a profile survives if no aggregator can improve by more than `eps` by
/// deviating unilaterally.
pub fn enumerate_nash(
    case: &MarketCase,
    scheme: Scheme,
    eps: f64,
    cap: u128,
) -> Result<Vec<StrategyProfile>, EquilibriumError> {
    let spaces: Vec<StrategySpace> = (0..case.aggregators.len())
        .map(|a| StrategySpace::new(case, scheme, a))
        .collect();
    let joint: u128 = spaces.iter().map(|s| s.count().max(1)).product();
    if joint > cap {
        return Err(EquilibriumError::SpaceTooLarge { size: joint, cap });
    }
    let sizes: Vec<u128> = spaces.iter().map(|s| s.count().max(1)).collect();
    let candidates: Vec<Option<StrategyProfile>> = (0..joint as u64)
        .into_par_iter()
        .map(|mut code| {
            let mut profile = StrategyProfile::default();
            for (space, size) in spaces.iter().zip(&sizes) {
                let local = (code as u128) % size;
                code = (code as u128 / size) as u64;
                space.apply(&mut profile, &space.decode(local));
            }
            let mut payoff = Vec::with_capacity(spaces.len());
            for a in 0..spaces.len() {
                payoff.push(evaluate_profit(case, scheme, a, &profile));
            }
            if payoff.iter().any(|p| !p.is_finite()) {
                return None;
            }
            for (a, space) in spaces.iter().enumerate() {
                for i in 0..space.count() {
                    let mut deviation = profile.clone();
                    space.apply(&mut deviation, &space.decode(i));
                    if evaluate_profit(case, scheme, a, &deviation) > payoff[a] + eps {
                        return None;
                    }
                }
            }
            Some(profile)
        })
        .collect();
    Ok(candidates.into_iter().flatten().collect())
}
