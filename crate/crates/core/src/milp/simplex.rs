//! Bounded-variable revised simplex with an explicit dense basis inverse.
//!
//! Every row gets a logical column, so the working system is
//! `A x + I w = b` with bounds on both structural and logical columns:
//! `<=` rows get `w in [0, inf)`, `>=` rows `w in (-inf, 0]`, `=` rows
//! `w in [0, 0]`. Phase one minimizes the total bound infeasibility of the
//! basic variables (no artificial columns, no big-M); phase two is Dantzig
//! pricing with a Bland fallback after a degeneracy streak. A dual simplex
//! entry point re-optimizes after bound changes, which is what the
//! branch-and-bound layer uses for warm starts.

use super::model::{MilpModel, ObjSense, RowSense};

const REFACTOR_EVERY: usize = 100;
const FEAS_TOL: f64 = 1e-7;
const COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const DEGEN_STREAK: usize = 200;

/// Where a nonbasic column currently sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable parked at zero.
    FreeZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Primal/dual optimal point of one LP solve.
#[derive(Clone, Debug)]
pub struct LpResult {
    pub status: LpStatus,
    /// Structural variable values (model order).
    pub values: Vec<f64>,
    /// Objective in the model's own sense.
    pub objective: f64,
    /// Row duals: derivative of the model-sense objective w.r.t. the rhs.
    pub row_duals: Vec<f64>,
    /// Reduced costs of structural variables, in the model's own sense.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

/// Basis snapshot used by branch-and-bound to warm start children.
#[derive(Clone, Debug)]
pub struct BasisSnapshot {
    basis: Vec<usize>,
    status: Vec<ColStatus>,
}

/// Sparse columns of the structural part of the constraint matrix.
struct Columns {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
}

impl Columns {
    fn column(&self, j: usize) -> ColumnRef<'_> {
        if j < self.n {
            ColumnRef::Structural(&self.cols[j])
        } else {
            ColumnRef::Logical(j - self.n)
        }
    }
}

enum ColumnRef<'a> {
    Structural(&'a [(usize, f64)]),
    Logical(usize),
}

/// Re-usable simplex state over a fixed constraint matrix. Bounds and costs
/// may change between solves; the sparsity pattern may not.
pub struct Simplex {
    cols: Columns,
    /// Minimization costs over all columns (logicals are zero).
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    /// Flips the sign of reported objective/duals for Maximize models.
    sign: f64,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    status: Vec<ColStatus>,
    /// Dense basis inverse, column-major `m x m`.
    binv: Vec<f64>,
    /// Basic variable values, aligned with `basis`.
    xb: Vec<f64>,
    /// Position of column in basis, usize::MAX if nonbasic.
    basis_pos: Vec<usize>,
    pivots_since_refactor: usize,
    pub iterations: usize,
}

impl Simplex {
    /// Build a solver for the LP relaxation of `model` (integrality dropped).
    pub fn new(model: &MilpModel) -> Self {
        let m = model.rows.len();
        let n = model.vars.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut rhs = vec![0.0; m];
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for v in &model.vars {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        for (i, row) in model.rows.iter().enumerate() {
            rhs[i] = row.rhs;
            for &(v, c) in &row.coeffs {
                if c != 0.0 {
                    cols[v.0].push((i, c));
                }
            }
            let (lo, hi) = match row.sense {
                RowSense::Le => (0.0, f64::INFINITY),
                RowSense::Eq => (0.0, 0.0),
                RowSense::Ge => (f64::NEG_INFINITY, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
        }
        // Logical bound slots were appended in row order after the loop over
        // vars; reorder so columns 0..n are structural, n..n+m logical.
        let (var_lo, row_lo): (Vec<f64>, Vec<f64>) = {
            let mut vl = Vec::with_capacity(n);
            let mut rl = Vec::with_capacity(m);
            for (k, x) in lower.into_iter().enumerate() {
                if k < n {
                    vl.push(x)
                } else {
                    rl.push(x)
                }
            }
            (vl, rl)
        };
        let (var_hi, row_hi): (Vec<f64>, Vec<f64>) = {
            let mut vh = Vec::with_capacity(n);
            let mut rh = Vec::with_capacity(m);
            for (k, x) in upper.into_iter().enumerate() {
                if k < n {
                    vh.push(x)
                } else {
                    rh.push(x)
                }
            }
            (vh, rh)
        };
        let mut lower = var_lo;
        lower.extend(row_lo);
        let mut upper = var_hi;
        upper.extend(row_hi);

        let sign = match model.sense {
            ObjSense::Minimize => 1.0,
            ObjSense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; n + m];
        for (j, v) in model.vars.iter().enumerate() {
            cost[j] = sign * v.obj;
        }

        let mut s = Simplex {
            cols: Columns { m, n, cols },
            cost,
            lower,
            upper,
            rhs,
            sign,
            basis: Vec::new(),
            in_basis: vec![false; n + m],
            status: vec![ColStatus::AtLower; n + m],
            binv: Vec::new(),
            xb: vec![0.0; m],
            basis_pos: vec![usize::MAX; n + m],
            pivots_since_refactor: 0,
            iterations: 0,
        };
        s.reset_basis();
        s
    }

    /// All-logical starting basis with structurals at their preferred bound.
    pub fn reset_basis(&mut self) {
        let (m, n) = (self.cols.m, self.cols.n);
        self.basis = (n..n + m).collect();
        self.in_basis = vec![false; n + m];
        self.basis_pos = vec![usize::MAX; n + m];
        for (pos, &j) in self.basis.iter().enumerate() {
            self.in_basis[j] = true;
            self.basis_pos[j] = pos;
        }
        for j in 0..n + m {
            if self.in_basis[j] {
                self.status[j] = ColStatus::Basic;
            } else {
                self.status[j] = self.preferred_bound(j);
            }
        }
        self.binv = identity(m);
        self.pivots_since_refactor = 0;
        self.recompute_xb();
    }

    fn preferred_bound(&self, j: usize) -> ColStatus {
        if self.lower[j].is_finite() {
            ColStatus::AtLower
        } else if self.upper[j].is_finite() {
            ColStatus::AtUpper
        } else {
            ColStatus::FreeZero
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            ColStatus::AtLower => self.lower[j],
            ColStatus::AtUpper => self.upper[j],
            ColStatus::FreeZero => 0.0,
            ColStatus::Basic => unreachable!("basic column treated as nonbasic"),
        }
    }

    /// Update bounds of a structural column (used by branch-and-bound).
    /// Nonbasic columns are snapped onto the new bounds.
    pub fn set_col_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
        if self.status[j] != ColStatus::Basic {
            self.status[j] = match self.status[j] {
                ColStatus::AtLower if lo.is_finite() => ColStatus::AtLower,
                ColStatus::AtUpper if hi.is_finite() => ColStatus::AtUpper,
                _ => self.preferred_bound(j),
            };
        }
    }

    pub fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot {
            basis: self.basis.clone(),
            status: self.status.clone(),
        }
    }

    pub fn restore(&mut self, snap: &BasisSnapshot) {
        let same_basis = self.basis == snap.basis;
        self.basis = snap.basis.clone();
        self.status = snap.status.clone();
        self.in_basis = vec![false; self.cols.n + self.cols.m];
        self.basis_pos = vec![usize::MAX; self.cols.n + self.cols.m];
        for (pos, &j) in self.basis.iter().enumerate() {
            self.in_basis[j] = true;
            self.basis_pos[j] = pos;
        }
        // Nonbasic statuses may point at bounds that have since moved to
        // infinity; repair them.
        for j in 0..self.status.len() {
            if self.status[j] == ColStatus::Basic {
                continue;
            }
            let ok = match self.status[j] {
                ColStatus::AtLower => self.lower[j].is_finite(),
                ColStatus::AtUpper => self.upper[j].is_finite(),
                _ => true,
            };
            if !ok {
                self.status[j] = self.preferred_bound(j);
            }
        }
        if same_basis {
            // The inverse only depends on the basis columns; bound changes
            // just move the nonbasic values.
            self.recompute_xb();
        } else {
            self.refactor();
        }
    }

    // ---------------------------------------------------------------- algebra

    fn recompute_xb(&mut self) {
        let m = self.cols.m;
        // r = b - sum of nonbasic columns at their bound values
        let mut r = self.rhs.clone();
        for j in 0..self.cols.n + m {
            if self.in_basis[j] {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                match self.cols.column(j) {
                    ColumnRef::Structural(col) => {
                        for &(i, c) in col {
                            r[i] -= c * v;
                        }
                    }
                    ColumnRef::Logical(i) => r[i] -= v,
                }
            }
        }
        // xb = Binv * r
        let mut xb = vec![0.0; m];
        for k in 0..m {
            let rk = r[k];
            if rk != 0.0 {
                let colk = &self.binv[k * m..(k + 1) * m];
                for i in 0..m {
                    xb[i] += colk[i] * rk;
                }
            }
        }
        self.xb = xb;
    }

    /// alpha = Binv * A_j
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.cols.m;
        let mut alpha = vec![0.0; m];
        match self.cols.column(j) {
            ColumnRef::Structural(col) => {
                for &(k, c) in col {
                    let colk = &self.binv[k * m..(k + 1) * m];
                    for i in 0..m {
                        alpha[i] += colk[i] * c;
                    }
                }
            }
            ColumnRef::Logical(k) => {
                let colk = &self.binv[k * m..(k + 1) * m];
                alpha.copy_from_slice(colk);
            }
        }
        alpha
    }

    /// y^T = c^T Binv for an arbitrary basic cost vector `cb`.
    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.cols.m;
        let mut y = vec![0.0; m];
        for k in 0..m {
            let colk = &self.binv[k * m..(k + 1) * m];
            let mut acc = 0.0;
            for i in 0..m {
                acc += cb[i] * colk[i];
            }
            y[k] = acc;
        }
        y
    }

    fn dot_col(&self, y: &[f64], j: usize) -> f64 {
        match self.cols.column(j) {
            ColumnRef::Structural(col) => col.iter().map(|&(i, c)| y[i] * c).sum(),
            ColumnRef::Logical(i) => y[i],
        }
    }

    /// Replace basis slot `r` with column `q`; `alpha` = Binv A_q.
    /// The caller must fix the leaving column's status afterwards and then
    /// call [`Simplex::maybe_refactor`].
    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.cols.m;
        let leaving = self.basis[r];
        self.in_basis[leaving] = false;
        self.basis_pos[leaving] = usize::MAX;
        self.basis[r] = q;
        self.in_basis[q] = true;
        self.basis_pos[q] = r;
        self.status[q] = ColStatus::Basic;

        let piv = alpha[r];
        for k in 0..m {
            let idx = k * m + r;
            let v = self.binv[idx];
            if v == 0.0 {
                continue;
            }
            let nv = v / piv;
            let colk = &mut self.binv[k * m..(k + 1) * m];
            for i in 0..m {
                if i != r {
                    colk[i] -= alpha[i] * nv;
                }
            }
            colk[r] = nv;
        }
        self.pivots_since_refactor += 1;
    }

    /// Returns true when a refactorization actually happened.
    fn maybe_refactor(&mut self) -> bool {
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor();
            true
        } else {
            false
        }
    }

    /// Rebuild the basis inverse from scratch by Gauss-Jordan with partial
    /// pivoting. Falls back to resetting the basis if singular.
    fn refactor(&mut self) {
        let m = self.cols.m;
        // Dense basis matrix, column-major.
        let mut bmat = vec![0.0; m * m];
        for (pos, &j) in self.basis.iter().enumerate() {
            match self.cols.column(j) {
                ColumnRef::Structural(col) => {
                    for &(i, c) in col {
                        bmat[pos * m + i] = c;
                    }
                }
                ColumnRef::Logical(i) => bmat[pos * m + i] = 1.0,
            }
        }
        match invert(&mut bmat, m) {
            Some(inv) => {
                self.binv = inv;
                self.pivots_since_refactor = 0;
                self.recompute_xb();
            }
            None => {
                // Singular basis (numerical breakdown): restart from logicals.
                self.reset_basis();
            }
        }
    }

    // ----------------------------------------------------------- primal phase

    fn infeasibility(&self) -> f64 {
        let mut f = 0.0;
        for (pos, &j) in self.basis.iter().enumerate() {
            let x = self.xb[pos];
            if x < self.lower[j] - FEAS_TOL {
                f += self.lower[j] - x;
            } else if x > self.upper[j] + FEAS_TOL {
                f += x - self.upper[j];
            }
        }
        f
    }

    /// Phase-one cost of basic columns: -1 below lower, +1 above upper.
    fn phase1_costs(&self) -> Vec<f64> {
        self.basis
            .iter()
            .enumerate()
            .map(|(pos, &j)| {
                let x = self.xb[pos];
                if x < self.lower[j] - FEAS_TOL {
                    -1.0
                } else if x > self.upper[j] + FEAS_TOL {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Run primal simplex (phase 1 then phase 2) from the current basis.
    pub fn primal_solve(&mut self, max_iter: usize) -> LpStatus {
        match self.phase1(max_iter) {
            LpStatus::Optimal => {}
            other => return other,
        }
        self.phase2(max_iter)
    }

    fn phase1(&mut self, max_iter: usize) -> LpStatus {
        let mut degen = 0usize;
        loop {
            if self.infeasibility() <= FEAS_TOL {
                return LpStatus::Optimal;
            }
            if self.iterations >= max_iter {
                return LpStatus::IterationLimit;
            }
            let sigma = self.phase1_costs();
            let y = self.btran(&sigma);
            // Pricing: nonbasic column whose movement reduces infeasibility.
            let mut best: Option<(usize, f64, f64)> = None; // (col, |d|, dir)
            let bland = degen > DEGEN_STREAK;
            for j in 0..self.cols.n + self.cols.m {
                if self.in_basis[j] || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = -self.dot_col(&y, j);
                let (gain, dir) = match self.status[j] {
                    ColStatus::AtLower => (-d, 1.0),
                    ColStatus::AtUpper => (d, -1.0),
                    ColStatus::FreeZero => {
                        if d < 0.0 {
                            (-d, 1.0)
                        } else {
                            (d, -1.0)
                        }
                    }
                    ColStatus::Basic => unreachable!(),
                };
                if gain > COST_TOL {
                    if bland {
                        best = Some((j, gain, dir));
                        break;
                    }
                    if best.map_or(true, |(_, g, _)| gain > g) {
                        best = Some((j, gain, dir));
                    }
                }
            }
            let Some((q, _, dir)) = best else {
                return LpStatus::Infeasible;
            };
            let alpha = self.ftran(q);
            let step = self.phase1_ratio(q, dir, &alpha);
            match step {
                Step::BoundFlip(t) => {
                    self.apply_flip(q, dir, t, &alpha);
                    degen = 0;
                }
                Step::Pivot(r, t) => {
                    if t <= FEAS_TOL {
                        degen += 1;
                    } else {
                        degen = 0;
                    }
                    self.apply_pivot(q, dir, t, r, &alpha);
                }
                Step::Unbounded => {
                    // Infeasibility strictly decreases along an unbounded ray,
                    // which cannot happen since it is bounded below by zero;
                    // numerically treat as stalled -> infeasible.
                    return LpStatus::Infeasible;
                }
            }
            self.iterations += 1;
        }
    }

    fn phase2(&mut self, max_iter: usize) -> LpStatus {
        let mut degen = 0usize;
        loop {
            if self.iterations >= max_iter {
                return LpStatus::IterationLimit;
            }
            let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
            let y = self.btran(&cb);
            let bland = degen > DEGEN_STREAK;
            let mut best: Option<(usize, f64, f64)> = None;
            for j in 0..self.cols.n + self.cols.m {
                if self.in_basis[j] || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = self.cost[j] - self.dot_col(&y, j);
                let (gain, dir) = match self.status[j] {
                    ColStatus::AtLower => (-d, 1.0),
                    ColStatus::AtUpper => (d, -1.0),
                    ColStatus::FreeZero => {
                        if d < 0.0 {
                            (-d, 1.0)
                        } else {
                            (d, -1.0)
                        }
                    }
                    ColStatus::Basic => unreachable!(),
                };
                if gain > COST_TOL {
                    if bland {
                        best = Some((j, gain, dir));
                        break;
                    }
                    if best.map_or(true, |(_, g, _)| gain > g) {
                        best = Some((j, gain, dir));
                    }
                }
            }
            let Some((q, _, dir)) = best else {
                return LpStatus::Optimal;
            };
            let alpha = self.ftran(q);
            match self.phase2_ratio(q, dir, &alpha) {
                Step::BoundFlip(t) => {
                    self.apply_flip(q, dir, t, &alpha);
                    degen = 0;
                }
                Step::Pivot(r, t) => {
                    if t <= FEAS_TOL {
                        degen += 1;
                    } else {
                        degen = 0;
                    }
                    self.apply_pivot(q, dir, t, r, &alpha);
                }
                Step::Unbounded => return LpStatus::Unbounded,
            }
            self.iterations += 1;
        }
    }

    fn phase1_ratio(&self, q: usize, dir: f64, alpha: &[f64]) -> Step {
        let mut t_max = self.own_bound_range(q);
        let mut leave: Option<usize> = None;
        for (pos, &j) in self.basis.iter().enumerate() {
            let rate = -dir * alpha[pos];
            if rate.abs() <= PIVOT_TOL {
                continue;
            }
            let x = self.xb[pos];
            let (lo, hi) = (self.lower[j], self.upper[j]);
            let t = if x < lo - FEAS_TOL {
                // Infeasible below: blocked only when rising back to lo.
                if rate > 0.0 {
                    (lo - x) / rate
                } else {
                    continue;
                }
            } else if x > hi + FEAS_TOL {
                if rate < 0.0 {
                    (hi - x) / rate
                } else {
                    continue;
                }
            } else if rate > 0.0 {
                if hi.is_finite() {
                    (hi - x) / rate
                } else {
                    continue;
                }
            } else if lo.is_finite() {
                (lo - x) / rate
            } else {
                continue;
            };
            let t = t.max(0.0);
            if better_block(t, t_max, pos, leave, alpha) {
                t_max = t;
                leave = Some(pos);
            }
        }
        finish_step(t_max, leave)
    }

    fn phase2_ratio(&self, q: usize, dir: f64, alpha: &[f64]) -> Step {
        let mut t_max = self.own_bound_range(q);
        let mut leave: Option<usize> = None;
        for (pos, &j) in self.basis.iter().enumerate() {
            let rate = -dir * alpha[pos];
            if rate.abs() <= PIVOT_TOL {
                continue;
            }
            let x = self.xb[pos];
            let (lo, hi) = (self.lower[j], self.upper[j]);
            let t = if rate > 0.0 {
                if hi.is_finite() {
                    ((hi - x) / rate).max(0.0)
                } else {
                    continue;
                }
            } else if lo.is_finite() {
                ((lo - x) / rate).max(0.0)
            } else {
                continue;
            };
            if better_block(t, t_max, pos, leave, alpha) {
                t_max = t;
                leave = Some(pos);
            }
        }
        finish_step(t_max, leave)
    }

    fn own_bound_range(&self, q: usize) -> f64 {
        match self.status[q] {
            ColStatus::AtLower | ColStatus::AtUpper => self.upper[q] - self.lower[q],
            ColStatus::FreeZero => f64::INFINITY,
            ColStatus::Basic => unreachable!(),
        }
    }

    fn apply_flip(&mut self, q: usize, dir: f64, t: f64, alpha: &[f64]) {
        for pos in 0..self.cols.m {
            self.xb[pos] += -dir * alpha[pos] * t;
        }
        self.status[q] = match self.status[q] {
            ColStatus::AtLower => ColStatus::AtUpper,
            ColStatus::AtUpper => ColStatus::AtLower,
            s => s,
        };
    }

    fn apply_pivot(&mut self, q: usize, dir: f64, t: f64, r: usize, alpha: &[f64]) {
        let entering_value = match self.status[q] {
            ColStatus::AtLower => self.lower[q] + dir * t,
            ColStatus::AtUpper => self.upper[q] + dir * t,
            ColStatus::FreeZero => dir * t,
            ColStatus::Basic => unreachable!(),
        };
        for pos in 0..self.cols.m {
            self.xb[pos] += -dir * alpha[pos] * t;
        }
        let leaving = self.basis[r];
        let xl = self.xb[r];
        // Classify the leaving variable onto the nearer bound.
        let st = if (xl - self.lower[leaving]).abs() <= (xl - self.upper[leaving]).abs() {
            ColStatus::AtLower
        } else {
            ColStatus::AtUpper
        };
        self.pivot(r, q, alpha);
        self.status[leaving] = if self.lower[leaving].is_finite() || self.upper[leaving].is_finite()
        {
            match st {
                ColStatus::AtLower if self.lower[leaving].is_finite() => ColStatus::AtLower,
                ColStatus::AtUpper if self.upper[leaving].is_finite() => ColStatus::AtUpper,
                _ => self.preferred_bound(leaving),
            }
        } else {
            ColStatus::FreeZero
        };
        self.xb[self.basis_pos[q]] = entering_value;
        // Incremental xb updates drift slowly; the periodic refactor
        // (which recomputes xb) keeps it in check.
        if self.maybe_refactor() {
            self.recompute_xb();
        }
    }

    // ------------------------------------------------------------ dual phase

    /// Dual simplex from a dual-feasible basis, used after bound tightening.
    /// Requires that reduced costs were optimal for the same costs before the
    /// bound change.
    pub fn dual_solve(&mut self, max_iter: usize) -> LpStatus {
        self.recompute_xb();
        let m = self.cols.m;
        let mut degen = 0usize;
        loop {
            if self.iterations >= max_iter {
                return LpStatus::IterationLimit;
            }
            // Leaving: most infeasible basic.
            let mut worst = FEAS_TOL;
            let mut r_opt: Option<(usize, bool)> = None; // (slot, below)
            for pos in 0..m {
                let j = self.basis[pos];
                let x = self.xb[pos];
                if self.lower[j] - x > worst {
                    worst = self.lower[j] - x;
                    r_opt = Some((pos, true));
                } else if x - self.upper[j] > worst {
                    worst = x - self.upper[j];
                    r_opt = Some((pos, false));
                }
            }
            let Some((r, below)) = r_opt else {
                return LpStatus::Optimal;
            };
            // Row r of Binv.
            let mut beta = vec![0.0; m];
            for k in 0..m {
                beta[k] = self.binv[k * m + r];
            }
            let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
            let y = self.btran(&cb);
            // Entering: dual ratio test.
            let bland = degen > DEGEN_STREAK;
            let mut best: Option<(usize, f64, f64)> = None; // (col, ratio, alpha_rj)
            for j in 0..self.cols.n + m {
                if self.in_basis[j] || self.lower[j] == self.upper[j] {
                    continue;
                }
                let arj = self.dot_col(&beta, j);
                if arj.abs() <= PIVOT_TOL {
                    continue;
                }
                // Leaving below its lower bound must increase: x_q direction
                // must have alpha_rj < 0 when entering rises from lower, etc.
                let eligible = match (self.status[j], below) {
                    (ColStatus::AtLower, true) => arj < 0.0,
                    (ColStatus::AtLower, false) => arj > 0.0,
                    (ColStatus::AtUpper, true) => arj > 0.0,
                    (ColStatus::AtUpper, false) => arj < 0.0,
                    (ColStatus::FreeZero, _) => true,
                    (ColStatus::Basic, _) => false,
                };
                if !eligible {
                    continue;
                }
                let d = self.cost[j] - self.dot_col(&y, j);
                let ratio = (d / arj).abs();
                if bland {
                    best = Some((j, ratio, arj));
                    break;
                }
                if best.map_or(true, |(bj, br, _)| {
                    ratio < br - 1e-12 || (ratio < br + 1e-12 && j < bj)
                }) {
                    best = Some((j, ratio, arj));
                }
            }
            let Some((q, _, _)) = best else {
                return LpStatus::Infeasible;
            };
            let alpha = self.ftran(q);
            // Move leaving to its violated bound; entering picks up the slack.
            let target = if below {
                self.lower[self.basis[r]]
            } else {
                self.upper[self.basis[r]]
            };
            let delta = self.xb[r] - target;
            let step = delta / alpha[r];
            if step.abs() <= FEAS_TOL {
                degen += 1;
            } else {
                degen = 0;
            }
            let leaving = self.basis[r];
            let entering_value = self.nonbasic_value_or_zero(q) + step;
            for pos in 0..m {
                if pos != r {
                    self.xb[pos] -= alpha[pos] * step;
                }
            }
            self.pivot(r, q, &alpha);
            self.status[leaving] = if below {
                if self.lower[leaving].is_finite() {
                    ColStatus::AtLower
                } else {
                    ColStatus::FreeZero
                }
            } else if self.upper[leaving].is_finite() {
                ColStatus::AtUpper
            } else {
                ColStatus::FreeZero
            };
            self.xb[self.basis_pos[q]] = entering_value;
            if self.maybe_refactor() {
                self.recompute_xb();
            }
            self.iterations += 1;
        }
    }

    fn nonbasic_value_or_zero(&self, j: usize) -> f64 {
        match self.status[j] {
            ColStatus::AtLower => self.lower[j],
            ColStatus::AtUpper => self.upper[j],
            _ => 0.0,
        }
    }

    // ------------------------------------------------------------- reporting

    /// Current values of all columns (structural then logical).
    fn all_values(&self) -> Vec<f64> {
        let total = self.cols.n + self.cols.m;
        let mut x = vec![0.0; total];
        for j in 0..total {
            if !self.in_basis[j] {
                x[j] = self.nonbasic_value(j);
            }
        }
        for (pos, &j) in self.basis.iter().enumerate() {
            x[j] = self.xb[pos];
        }
        x
    }

    /// Assemble the result in the original model's sense.
    pub fn result(&mut self, status: LpStatus) -> LpResult {
        // One refinement pass on the final basis.
        if status == LpStatus::Optimal {
            self.refactor();
        }
        let x = self.all_values();
        let values: Vec<f64> = x[..self.cols.n].to_vec();
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        let y = self.btran(&cb);
        let mut duals = vec![0.0; self.cols.m];
        for i in 0..self.cols.m {
            duals[i] = self.sign * y[i];
        }
        let mut reduced = vec![0.0; self.cols.n];
        for (j, red) in reduced.iter_mut().enumerate() {
            *red = self.sign * (self.cost[j] - self.dot_col(&y, j));
        }
        let objective: f64 = self.sign
            * self
                .cost
                .iter()
                .take(self.cols.n)
                .zip(&values)
                .map(|(c, v)| c * v)
                .sum::<f64>();
        LpResult {
            status,
            values,
            objective,
            row_duals: duals,
            reduced_costs: reduced,
            iterations: self.iterations,
        }
    }

    /// Worst bound violation over basic variables (diagnostics).
    pub fn primal_infeasibility(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (pos, &j) in self.basis.iter().enumerate() {
            let x = self.xb[pos];
            worst = worst.max(self.lower[j] - x).max(x - self.upper[j]);
        }
        worst
    }
}

enum Step {
    /// Entering variable travels to its opposite bound.
    BoundFlip(f64),
    /// Basic variable in slot `.0` leaves after step `.1`.
    Pivot(usize, f64),
    Unbounded,
}

fn finish_step(t_max: f64, leave: Option<usize>) -> Step {
    match leave {
        Some(r) => Step::Pivot(r, t_max.max(0.0)),
        None if t_max.is_finite() => Step::BoundFlip(t_max),
        None => Step::Unbounded,
    }
}

/// Blocking-variable choice: strictly smaller step wins; among ties (within
/// PIVOT_TOL) prefer the larger |pivot| for stability, then the lower slot.
fn better_block(t: f64, t_max: f64, pos: usize, leave: Option<usize>, alpha: &[f64]) -> bool {
    if t < t_max - PIVOT_TOL {
        return true;
    }
    if t > t_max + PIVOT_TOL {
        return false;
    }
    match leave {
        None => true,
        Some(cur) => {
            let (a_new, a_cur) = (alpha[pos].abs(), alpha[cur].abs());
            a_new > a_cur * (1.0 + 1e-12) || (a_new >= a_cur * (1.0 - 1e-12) && pos < cur)
        }
    }
}

fn identity(m: usize) -> Vec<f64> {
    let mut e = vec![0.0; m * m];
    for i in 0..m {
        e[i * m + i] = 1.0;
    }
    e
}

/// Invert a dense column-major matrix by Gauss-Jordan with partial pivoting.
fn invert(a: &mut [f64], m: usize) -> Option<Vec<f64>> {
    let mut inv = identity(m);
    for col in 0..m {
        // Partial pivot on column `col`.
        let mut piv_row = col;
        let mut piv_val = a[col * m + col].abs();
        for r in col + 1..m {
            let v = a[col * m + r].abs();
            if v > piv_val {
                piv_val = v;
                piv_row = r;
            }
        }
        if piv_val < 1e-12 {
            return None;
        }
        if piv_row != col {
            for k in 0..m {
                a.swap(k * m + col, k * m + piv_row);
                inv.swap(k * m + col, k * m + piv_row);
            }
        }
        let piv = a[col * m + col];
        for k in 0..m {
            a[k * m + col] /= piv;
            inv[k * m + col] /= piv;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = a[col * m + r];
            if f == 0.0 {
                continue;
            }
            for k in 0..m {
                let ac = a[k * m + col];
                if ac != 0.0 {
                    a[k * m + r] -= f * ac;
                }
                let ic = inv[k * m + col];
                if ic != 0.0 {
                    inv[k * m + r] -= f * ic;
                }
            }
        }
    }
    Some(inv)
}
