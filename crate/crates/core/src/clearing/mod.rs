//! Direct LP formulations and solutions of the follower problems: the
//! day-ahead market and every ancillary-services market variant.

mod asm;
mod dam;
mod metrics;

pub use asm::{
    asm_prices, clear_asm_common, clear_asm_distribution, clear_asm_transmission_b,
    clear_asm_transmission_c, scope_slots, AsmBids, AsmResult, AsmScope,
};
pub use dam::{clear_dam, dam_bids, DamResult};
pub use metrics::{
    aggregator_profit, clear_all, clear_scenario, system_cost, ScenarioMarkets, SystemCost,
};
