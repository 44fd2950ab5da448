//! Single-level MILP construction for each aggregator's bidding problem:
//! follower KKT systems embedded as constraints, complementarity as SOS1
//! pairs, bid selection by binaries and exact linearization of every
//! bilinear profit term.

mod build;
mod linearize;

pub use build::{
    build_mpec, extract_strategy, fix_selection, warm_start_from_clearing, BlockVars,
    MpecInstance, SymbolMap,
};
pub use linearize::{discretize_lambda, linearize_price_times_quantity, mccormick_product, LambdaBlock};

use crate::clearing::AsmScope;
use crate::model::{BidSlot, MarketCase, Scheme, Subsystem};

/// Bid slots used by a scheme/scope pair (shared with the clearing layer).
pub(crate) fn scope_slots_pub(scheme: Scheme, scope: AsmScope) -> (BidSlot, BidSlot, BidSlot) {
    crate::clearing::scope_slots(scheme, scope)
}

pub(crate) fn scope_lines_pub(case: &MarketCase, scope: AsmScope) -> Vec<usize> {
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
