//! Solver-agnostic container for mixed-integer linear programs.
//!
//! A [`MilpModel`] stores variables with bounds, sparse linear constraints,
//! a linear objective and SOS1 sets. It is consumed by the built-in simplex
//! and branch-and-bound solvers and by the MPS writer.

use serde::{Deserialize, Serialize};

/// Index of a variable (column) in a [`MilpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

/// Index of a constraint (row) in a [`MilpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowId(pub usize);

/// Variable domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    /// Integral with bounds clamped to `[0, 1]`.
    Binary,
}

/// Relation between a row's linear expression and its right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

/// Objective direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarDef {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    /// Objective coefficient.
    pub obj: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RowDef {
    pub name: String,
    /// Sparse coefficients, at most one entry per variable.
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// Ordered set of variables of which at most one may be nonzero.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sos1Set {
    pub name: String,
    pub members: Vec<VarId>,
}

/// A mixed-integer linear program with SOS1 side constraints.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MilpModel {
    pub name: String,
    pub sense: ObjSense,
    pub vars: Vec<VarDef>,
    pub rows: Vec<RowDef>,
    pub sos1: Vec<Sos1Set>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>, sense: ObjSense) -> Self {
        MilpModel {
            name: name.into(),
            sense,
            vars: Vec::new(),
            rows: Vec::new(),
            sos1: Vec::new(),
        }
    }

    /// Add a continuous variable; infinite bounds are allowed.
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, obj: f64) -> VarId {
        debug_assert!(lower <= upper, "variable with empty domain");
        let id = VarId(self.vars.len());
        self.vars.push(VarDef {
            name: name.into(),
            lower,
            upper,
            kind: VarKind::Continuous,
            obj,
        });
        id
    }

    /// Add a binary variable with bounds `[0, 1]`.
    pub fn add_binary(&mut self, name: impl Into<String>, obj: f64) -> VarId {
        let id = VarId(self.vars.len());
        self.vars.push(VarDef {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            kind: VarKind::Binary,
            obj,
        });
        id
    }

    /// Add a linear constraint. Coefficients on the same variable are merged.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> RowId {
        let merged = merge_terms(coeffs, self.vars.len());
        let id = RowId(self.rows.len());
        self.rows.push(RowDef {
            name: name.into(),
            coeffs: merged,
            sense,
            rhs,
        });
        id
    }

    /// Register an SOS1 set over previously declared variables.
    pub fn add_sos1(&mut self, name: impl Into<String>, members: Vec<VarId>) {
        debug_assert!(members.iter().all(|v| v.0 < self.vars.len()));
        self.sos1.push(Sos1Set {
            name: name.into(),
            members,
        });
    }

    /// Add a term to the objective of an existing variable.
    pub fn add_obj(&mut self, var: VarId, coeff: f64) {
        self.vars[var.0].obj += coeff;
    }

    /// Tighten the bounds of `var`; panics if the result is empty beyond 1e-9.
    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        assert!(
            lower <= upper + 1e-9,
            "empty bounds for {}: [{lower}, {upper}]",
            self.vars[var.0].name
        );
        self.vars[var.0].lower = lower;
        self.vars[var.0].upper = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn binary_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| VarId(j))
    }

    /// Objective value of an assignment, in the model's own sense.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(values)
            .map(|(v, x)| v.obj * x)
            .sum()
    }

    /// Structural errors that make the model unsolvable (dangling ids,
    /// inverted bounds, binaries outside `[0,1]`).
    pub fn well_formed(&self) -> Result<(), String> {
        for (j, v) in self.vars.iter().enumerate() {
            if v.lower > v.upper {
                return Err(format!("variable {} ({}) has empty domain", j, v.name));
            }
            if v.kind == VarKind::Binary && (v.lower < -1e-12 || v.upper > 1.0 + 1e-12) {
                return Err(format!("binary {} has bounds outside [0,1]", v.name));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            for (v, _) in &r.coeffs {
                if v.0 >= self.vars.len() {
                    return Err(format!("row {} ({}) references unknown variable", i, r.name));
                }
            }
        }
        for s in &self.sos1 {
            for v in &s.members {
                if v.0 >= self.vars.len() {
                    return Err(format!("SOS1 set {} references unknown variable", s.name));
                }
            }
        }
        Ok(())
    }

    /// Residual of each row at `values` (positive = violated amount).
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for r in &self.rows {
            let lhs: f64 = r.coeffs.iter().map(|(v, c)| c * values[v.0]).sum();
            let viol = match r.sense {
                RowSense::Le => lhs - r.rhs,
                RowSense::Ge => r.rhs - lhs,
                RowSense::Eq => (lhs - r.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (v, x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        worst
    }
}

fn merge_terms(coeffs: Vec<(VarId, f64)>, nvars: usize) -> Vec<(VarId, f64)> {
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(coeffs.len());
    let mut seen: Vec<i32> = Vec::new();
    // Avoid the scratch table for short rows.
    if coeffs.len() <= 8 {
        for (v, c) in coeffs {
            debug_assert!(v.0 < nvars, "row references undeclared variable");
            if c == 0.0 {
                continue;
            }
            if let Some(e) = out.iter_mut().find(|(w, _)| *w == v) {
                e.1 += c;
            } else {
                out.push((v, c));
            }
        }
        return out;
    }
    seen.resize(nvars, -1);
    for (v, c) in coeffs {
        debug_assert!(v.0 < nvars, "row references undeclared variable");
        if c == 0.0 {
            continue;
        }
        if seen[v.0] >= 0 {
            out[seen[v.0] as usize].1 += c;
        } else {
            seen[v.0] = out.len() as i32;
            out.push((v, c));
        }
    }
    out
}
