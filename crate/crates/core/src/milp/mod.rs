//! Model container, built-in LP/MILP solvers and MPS interchange.
//!
//! Complementarity conditions are represented as SOS1 sets and enforced by
//! branching; the solver never introduces big-M rows for them.

mod branch;
mod model;
mod mps;
mod simplex;

pub use branch::{BranchAndBound, MilpConfig, MilpSolution, MilpStatus, SolverStats};
pub use model::{MilpModel, ObjSense, RowDef, RowId, RowSense, Sos1Set, VarDef, VarId, VarKind};
pub use mps::{export_mps, import_mps};
pub use simplex::{LpResult, LpStatus, Simplex};

use crate::error::MilpError;

/// Solve the LP relaxation of `model` (integrality and SOS1 dropped).
pub fn solve_lp(model: &MilpModel) -> Result<LpResult, MilpError> {
    model.well_formed().map_err(MilpError::Malformed)?;
    let mut s = Simplex::new(model);
    let status = s.primal_solve(500_000);
    match status {
        LpStatus::Optimal => Ok(s.result(status)),
        LpStatus::Infeasible => Err(MilpError::Infeasible),
        LpStatus::Unbounded => Err(MilpError::Unbounded),
        LpStatus::IterationLimit => Err(MilpError::IterationLimit),
    }
}

/// Solve `model` by branch-and-bound.
pub fn solve_milp(model: &MilpModel, config: &MilpConfig) -> Result<MilpSolution, MilpError> {
    model.well_formed().map_err(MilpError::Malformed)?;
    let sol = BranchAndBound::new(model, config.clone()).solve();
    match sol.status {
        MilpStatus::Infeasible => Err(MilpError::Infeasible),
        MilpStatus::Unbounded => Err(MilpError::Unbounded),
        _ => Ok(sol),
    }
}
