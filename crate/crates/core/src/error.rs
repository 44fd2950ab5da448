//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("model is malformed: {0}")]
    Malformed(String),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("iteration limit exhausted before optimality")]
    IterationLimit,
    #[error("MPS parse error at line {line}: {message}")]
    MpsParse { line: usize, message: String },
}

/// Errors raised while clearing a market.
#[derive(Debug, Error)]
pub enum ClearingError {
    #[error("day-ahead market infeasible: offered capacity {offered} below net load {net_load}")]
    DamInfeasible { offered: f64, net_load: f64 },
    #[error("ancillary services market infeasible in {market} for scenario {scenario}")]
    AsmInfeasible { market: String, scenario: String },
    #[error("unknown scenario id '{0}'")]
    UnknownScenario(String),
    #[error("missing bid price for {0}")]
    MissingBid(String),
    #[error("solver failure: {0}")]
    Solver(#[from] MilpError),
}

/// Errors raised by the best-response and equilibrium machinery.
#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("best response failed for aggregator {aggregator} (iteration {iteration}): {source}")]
    BestResponse {
        aggregator: String,
        iteration: usize,
        #[source]
        source: Box<EquilibriumError>,
    },
    #[error("clearing failed: {0}")]
    Clearing(#[from] ClearingError),
    #[error("MPEC solve failed: {0}")]
    Mpec(#[from] MilpError),
    #[error("no candidate selected for {0} (selection row violated)")]
    NoSelection(String),
    #[error("strategy space too large: {size} exceeds cap {cap}")]
    SpaceTooLarge { size: u128, cap: u128 },
}

/// Errors raised by case-level operations.
#[derive(Debug, Error)]
pub enum CaseError {
    #[error("unknown scenario id '{0}'")]
    UnknownScenario(String),
}

/// Errors raised by case/result serialization.
#[derive(Debug, Error)]
pub enum CaseIoError {
    #[error("cannot access '{0}': {1}")]
    Io(String, #[source] std::io::Error),
    #[error("JSON error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported case schema version {found} (supported: {supported})")]
    Schema { found: u32, supported: u32 },
    #[error("case validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("result assembly failed: {0}")]
    Build(String),
}
