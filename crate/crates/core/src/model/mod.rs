//! Market domain types and deterministic derived quantities.

mod case;
mod profile;
mod types;
mod validate;

pub use case::{Imbalances, MarketCase};
pub use profile::{slots_for, BidSlot, ProfileKey, ResourceRef, Scheme, StrategyProfile};
pub use types::{
    Aggregator, BidLadder, Line, LoadPoint, MarketRole, Network, NetworkNode, ProgrammableUnit,
    RenewableUnit, ScenarioSet, Subsystem,
};
pub use validate::{validate_case, ValidationReport};
