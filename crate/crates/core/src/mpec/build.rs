//! Per-aggregator single-level MILP construction.
//!
//! The aggregator's bilevel bidding problem becomes one MILP: bid selection
//! binaries on top, the day-ahead KKT system and one KKT block per scenario
//! and service market below, complementarity encoded as SOS1 pairs over
//! (variable, slack) and the bilinear profit terms replaced by exact
//! McCormick linearizations.

use std::collections::BTreeMap;

use super::linearize::{discretize_lambda, linearize_price_times_quantity, LambdaBlock};
use crate::error::{ClearingError, EquilibriumError};
use crate::milp::{MilpModel, MilpSolution, ObjSense, RowSense, VarId};
use crate::model::{
    slots_for, BidSlot, MarketCase, MarketRole, ProfileKey, ResourceRef, Scheme, StrategyProfile,
    Subsystem,
};
use crate::clearing::{asm_prices, AsmScope};

/// Variables of one follower KKT block (one market instance in one
/// scenario). Vectors are indexed like the case lists; `None` marks
/// non-participants.
#[derive(Clone, Debug)]
pub struct BlockVars {
    pub scope: AsmScope,
    pub scenario: usize,
    pub up: Vec<Option<VarId>>,
    pub down: Vec<Option<VarId>>,
    pub curt: Vec<Option<VarId>>,
    pub wcurt: Vec<Option<VarId>>,
    pub alpha: VarId,
    pub mu: Vec<Option<VarId>>,
    pub beta: Vec<Option<VarId>>,
    pub phi: Vec<Option<VarId>>,
    pub gamma: Vec<Option<VarId>>,
    pub chi: Vec<Option<VarId>>,
}

/// Map from model variables to their roles.
#[derive(Clone, Debug, Default)]
pub struct SymbolMap {
    /// Bid-selection binaries of the aggregator under optimization.
    pub sel: BTreeMap<(ProfileKey, usize), VarId>,
    pub dam_g: Vec<VarId>,
    pub dam_nu: Vec<VarId>,
    pub lambda: Option<VarId>,
    /// Price-discretization binaries, `(unit, candidate) -> y`.
    pub y: BTreeMap<(usize, usize), VarId>,
    /// KKT blocks in deterministic order: scenario-major, markets in
    /// clearing order (distribution networks first, transmission last).
    pub blocks: Vec<BlockVars>,
}

/// A built single-level model for one aggregator.
#[derive(Clone, Debug)]
pub struct MpecInstance {
    pub model: MilpModel,
    pub symbols: SymbolMap,
    pub aggregator: usize,
    pub scheme: Scheme,
}

/// Either the aggregator's own selection (a ladder expansion) or a fixed
/// rival price.
enum PriceTerm {
    Own(Vec<(VarId, f64)>),
    Rival(f64),
}

struct Builder<'a> {
    case: &'a MarketCase,
    scheme: Scheme,
    rivals: &'a StrategyProfile,
    own: Vec<ResourceRef>,
    model: MilpModel,
    sym: SymbolMap,
    lam: Option<LambdaBlock>,
}

/// Build the aggregator's MPEC for the scheme, with every rival resource's
/// prices fixed from `rivals`.
pub fn build_mpec(
    case: &MarketCase,
    scheme: Scheme,
    aggregator: usize,
    rivals: &StrategyProfile,
) -> Result<MpecInstance, ClearingError> {
    let mut b = Builder {
        case,
        scheme,
        rivals,
        own: case.aggregator_resources(aggregator),
        model: MilpModel::new(
            format!("mpec-{}-{}", scheme, case.aggregators[aggregator].id),
            ObjSense::Maximize,
        ),
        sym: SymbolMap::default(),
        lam: None,
    };
    b.check_rival_prices()?;
    b.selection_binaries();
    b.dam_block();
    for s in 0..case.scenarios.len() {
        match scheme {
            Scheme::A => {
                let block = b.asm_block(AsmScope::Common, s, &[])?;
                b.sym.blocks.push(block);
            }
            Scheme::B => {
                for k in 0..case.dist_count() {
                    let block = b.asm_block(AsmScope::Dist(k), s, &[])?;
                    b.sym.blocks.push(block);
                }
                let block = b.asm_block(AsmScope::TransB, s, &[])?;
                b.sym.blocks.push(block);
            }
            Scheme::C => {
                let start = b.sym.blocks.len();
                for k in 0..case.dist_count() {
                    let block = b.asm_block(AsmScope::Dist(k), s, &[])?;
                    b.sym.blocks.push(block);
                }
                let dist_blocks: Vec<BlockVars> = b.sym.blocks[start..].to_vec();
                let block = b.asm_block(AsmScope::TransC, s, &dist_blocks)?;
                b.sym.blocks.push(block);
            }
        }
    }
    b.objective()?;
    Ok(MpecInstance {
        model: b.model,
        symbols: b.sym,
        aggregator,
        scheme,
    })
}

impl<'a> Builder<'a> {
    fn is_own(&self, res: ResourceRef) -> bool {
        self.own.contains(&res)
    }

    fn check_rival_prices(&self) -> Result<(), ClearingError> {
        for res in self.case.strategic_resources() {
            if self.is_own(res) {
                continue;
            }
            for slot in slots_for(self.case, self.scheme, res) {
                if self.rivals.price(self.case, res, slot).is_none() {
                    return Err(ClearingError::MissingBid(format!(
                        "rival {} {:?}",
                        self.case.resource_id(res),
                        slot
                    )));
                }
            }
        }
        Ok(())
    }

    fn selection_binaries(&mut self) {
        for res in self.own.clone() {
            for slot in slots_for(self.case, self.scheme, res) {
                let ladder = self.case.ladder(res, slot.role()).to_vec();
                let rid = self.case.resource_id(res).to_string();
                let mut row = Vec::with_capacity(ladder.len());
                for a in 0..ladder.len() {
                    let v = self
                        .model
                        .add_binary(format!("x.{rid}.{slot:?}.{a}"), 0.0);
                    self.sym.sel.insert((ProfileKey { resource: res, slot }, a), v);
                    row.push((v, 1.0));
                }
                self.model
                    .add_row(format!("pick.{rid}.{slot:?}"), row, RowSense::Eq, 1.0);
            }
        }
    }

    /// Declared price of a resource in a slot: the aggregator's own become
    /// ladder expansions, rivals enter as constants.
    fn price_term(&self, res: ResourceRef, slot: BidSlot) -> PriceTerm {
        if self.is_own(res) {
            let ladder = self.case.ladder(res, slot.role());
            let terms = (0..ladder.len())
                .map(|a| {
                    (
                        self.sym.sel[&(ProfileKey { resource: res, slot }, a)],
                        ladder[a],
                    )
                })
                .collect();
            PriceTerm::Own(terms)
        } else {
            PriceTerm::Rival(
                self.rivals
                    .price(self.case, res, slot)
                    .expect("rival prices were checked up front"),
            )
        }
    }

    /// Largest candidate price over every day-ahead ladder: a valid bound on
    /// the clearing price and hence on every capacity dual (a positive dual
    /// forces full dispatch, whose stationarity pins it to `lambda - bid`).
    fn lambda_bound(&self) -> f64 {
        let mut hi = 0.0_f64;
        for u in 0..self.case.units.len() {
            for &p in self.case.ladder(ResourceRef::Unit(u), MarketRole::DamSale) {
                hi = hi.max(p);
            }
        }
        hi
    }

    fn dam_block(&mut self) {
        let case = self.case;
        let nu_hi = self.lambda_bound();
        let lambda = self.model.add_var("lambda", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        self.sym.lambda = Some(lambda);
        let mut balance: Vec<(VarId, f64)> = Vec::new();
        for (u, unit) in case.units.iter().enumerate() {
            let g = self
                .model
                .add_var(format!("g.{}", unit.id), 0.0, f64::INFINITY, 0.0);
            let nu = self.model.add_var(format!("nu.{}", unit.id), 0.0, nu_hi, 0.0);
            // Capacity complementarity nu _|_ (G - g).
            let slack = self
                .model
                .add_var(format!("s.cap.{}", unit.id), 0.0, f64::INFINITY, 0.0);
            self.model.add_row(
                format!("cap.{}", unit.id),
                vec![(g, 1.0), (slack, 1.0)],
                RowSense::Eq,
                unit.capacity,
            );
            self.model.add_sos1(format!("cc.cap.{}", unit.id), vec![nu, slack]);
            // Stationarity g _|_ (nu - lambda + price).
            let r = self
                .model
                .add_var(format!("r.dam.{}", unit.id), 0.0, f64::INFINITY, 0.0);
            let mut row = vec![(nu, 1.0), (lambda, -1.0), (r, -1.0)];
            let mut rhs = 0.0;
            match self.price_term(ResourceRef::Unit(u), BidSlot::Dam) {
                PriceTerm::Own(terms) => row.extend(terms),
                PriceTerm::Rival(b) => rhs = -b,
            }
            self.model
                .add_row(format!("st.dam.{}", unit.id), row, RowSense::Eq, rhs);
            self.model.add_sos1(format!("cc.dam.{}", unit.id), vec![g, r]);
            balance.push((g, 1.0));
            self.sym.dam_g.push(g);
            self.sym.dam_nu.push(nu);
        }
        self.model
            .add_row("dam.balance", balance, RowSense::Eq, case.net_load());
        let lam = discretize_lambda(&mut self.model, case, lambda);
        self.sym.y = lam.y.clone();
        self.lam = Some(lam);
    }

    /// One follower KKT block. `dist_blocks` carries the same scenario's
    /// distribution blocks when building the scheme-C transmission market.
    fn asm_block(
        &mut self,
        scope: AsmScope,
        s: usize,
        dist_blocks: &[BlockVars],
    ) -> Result<BlockVars, ClearingError> {
        let case = self.case;
        let sid = format!("{}.s{}", scope.label(), s + 1);
        let n_units = case.units.len();
        let n_loads = case.loads.len();
        let n_rens = case.renewables.len();
        let (up_slot, down_slot, curt_slot) = super::scope_slots_pub(self.scheme, scope);

        let alpha = self
            .model
            .add_var(format!("alpha.{sid}"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
        let mut blk = BlockVars {
            scope,
            scenario: s,
            up: vec![None; n_units],
            down: vec![None; n_units],
            curt: vec![None; n_loads],
            wcurt: vec![None; n_rens],
            alpha,
            mu: vec![None; case.network.lines.len()],
            beta: vec![None; n_units],
            phi: vec![None; n_units],
            gamma: vec![None; n_loads],
            chi: vec![None; n_rens],
        };

        let unit_in = |u: usize| match scope {
            AsmScope::Common | AsmScope::TransC => true,
            AsmScope::Dist(k) => case.unit_subsystem(u) == Subsystem::Distribution(k),
            AsmScope::TransB => case.unit_subsystem(u) == Subsystem::Transmission,
        };
        let load_in = |l: usize| {
            case.loads[l].is_flexible()
                && match scope {
                    AsmScope::Common | AsmScope::TransC => true,
                    AsmScope::Dist(k) => case.load_subsystem(l) == Subsystem::Distribution(k),
                    AsmScope::TransB => case.load_subsystem(l) == Subsystem::Transmission,
                }
        };
        let ren_in = |r: usize| match scope {
            AsmScope::Common | AsmScope::TransC => true,
            AsmScope::Dist(k) => case.renewable_subsystem(r) == Subsystem::Distribution(k),
            AsmScope::TransB => case.renewable_subsystem(r) == Subsystem::Transmission,
        };
        // Distribution variables feeding scheme-C residual capacities.
        let in_dist = |sub: Subsystem| scope == AsmScope::TransC && sub != Subsystem::Transmission;

        // Primal variables, duals and bound complementarities.
        for (u, unit) in case.units.iter().enumerate() {
            if !unit_in(u) {
                continue;
            }
            let uid = &unit.id;
            let up = self
                .model
                .add_var(format!("up.{uid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let down = self
                .model
                .add_var(format!("down.{uid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let beta = self
                .model
                .add_var(format!("beta.{uid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let phi = self
                .model
                .add_var(format!("phi.{uid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let g = self.sym.dam_g[u];
            // Offer caps: headroom for up, commitment for down, with local
            // re-dispatch folded in for the scheme-C transmission market.
            let s_up = self
                .model
                .add_var(format!("s.up.{uid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let s_dn = self
                .model
                .add_var(format!("s.down.{uid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let mut up_row = vec![(up, 1.0), (g, 1.0), (s_up, 1.0)];
            let mut dn_row = vec![(down, 1.0), (g, -1.0), (s_dn, 1.0)];
            if in_dist(case.unit_subsystem(u)) {
                let dblk = dist_block_for(dist_blocks, case.unit_subsystem(u));
                let du = dblk.up[u].expect("distribution unit in its block");
                let dd = dblk.down[u].expect("distribution unit in its block");
                up_row.push((du, 1.0));
                up_row.push((dd, -1.0));
                dn_row.push((du, -1.0));
                dn_row.push((dd, 1.0));
            }
            self.model
                .add_row(format!("capup.{uid}.{sid}"), up_row, RowSense::Eq, unit.capacity);
            self.model
                .add_row(format!("capdn.{uid}.{sid}"), dn_row, RowSense::Eq, 0.0);
            self.model
                .add_sos1(format!("cc.capup.{uid}.{sid}"), vec![beta, s_up]);
            self.model
                .add_sos1(format!("cc.capdn.{uid}.{sid}"), vec![phi, s_dn]);
            blk.up[u] = Some(up);
            blk.down[u] = Some(down);
            blk.beta[u] = Some(beta);
            blk.phi[u] = Some(phi);
        }
        for (l, load) in case.loads.iter().enumerate() {
            if !load_in(l) {
                continue;
            }
            let nid = &load.node;
            let d = self
                .model
                .add_var(format!("curt.{nid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let gamma = self
                .model
                .add_var(format!("gamma.{nid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let s_c = self
                .model
                .add_var(format!("s.curt.{nid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let mut row = vec![(d, 1.0), (s_c, 1.0)];
            if in_dist(case.load_subsystem(l)) {
                let dblk = dist_block_for(dist_blocks, case.load_subsystem(l));
                row.push((dblk.curt[l].expect("flexible load in its block"), 1.0));
            }
            self.model.add_row(
                format!("capc.{nid}.{sid}"),
                row,
                RowSense::Eq,
                load.curtailable(s),
            );
            self.model
                .add_sos1(format!("cc.capc.{nid}.{sid}"), vec![gamma, s_c]);
            blk.curt[l] = Some(d);
            blk.gamma[l] = Some(gamma);
        }
        for (r, ren) in case.renewables.iter().enumerate() {
            if !ren_in(r) {
                continue;
            }
            let rid = &ren.id;
            let w = self
                .model
                .add_var(format!("wcurt.{rid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let chi = self
                .model
                .add_var(format!("chi.{rid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let s_w = self
                .model
                .add_var(format!("s.wcurt.{rid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let mut row = vec![(w, 1.0), (s_w, 1.0)];
            if in_dist(case.renewable_subsystem(r)) {
                let dblk = dist_block_for(dist_blocks, case.renewable_subsystem(r));
                row.push((dblk.wcurt[r].expect("renewable in its block"), 1.0));
            }
            self.model
                .add_row(format!("capw.{rid}.{sid}"), row, RowSense::Eq, ren.realized[s]);
            self.model
                .add_sos1(format!("cc.capw.{rid}.{sid}"), vec![chi, s_w]);
            blk.wcurt[r] = Some(w);
            blk.chi[r] = Some(chi);
        }

        // Transit complementarities with their flow expressions.
        let lines = super::scope_lines_pub(case, scope);
        for li in lines {
            let (coeffs, constant) = self.flow_expression(scope, s, li, &blk, dist_blocks);
            let line = &case.network.lines[li];
            let mu = self
                .model
                .add_var(format!("mu.{}.{sid}", line.id), 0.0, f64::INFINITY, 0.0);
            let s_f = self
                .model
                .add_var(format!("s.flow.{}.{sid}", line.id), 0.0, f64::INFINITY, 0.0);
            let mut row = coeffs;
            row.push((s_f, 1.0));
            self.model.add_row(
                format!("flow.{}.{sid}", line.id),
                row,
                RowSense::Eq,
                line.limit - constant,
            );
            self.model
                .add_sos1(format!("cc.flow.{}.{sid}", line.id), vec![mu, s_f]);
            blk.mu[li] = Some(mu);
        }

        // Stationarity complementarities.
        for (u, unit) in case.units.iter().enumerate() {
            let (Some(up), Some(down), Some(beta), Some(phi)) =
                (blk.up[u], blk.down[u], blk.beta[u], blk.phi[u])
            else {
                continue;
            };
            let uid = &unit.id;
            let node = case.node_index(&unit.node).expect("unit node");
            let mu_terms = self.mu_column(&blk, node);
            // up: beta - alpha + sum_l H mu + price >= 0.
            let r_up = self
                .model
                .add_var(format!("r.up.{uid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let mut row = vec![(beta, 1.0), (alpha, -1.0), (r_up, -1.0)];
            row.extend(mu_terms.clone());
            let mut rhs = 0.0;
            match self.price_term(ResourceRef::Unit(u), up_slot) {
                PriceTerm::Own(terms) => row.extend(terms),
                PriceTerm::Rival(b) => rhs = -b,
            }
            self.model
                .add_row(format!("st.up.{uid}.{sid}"), row, RowSense::Eq, rhs);
            self.model.add_sos1(format!("cc.up.{uid}.{sid}"), vec![up, r_up]);
            // down: phi + alpha - sum_l H mu - price >= 0.
            let r_dn = self
                .model
                .add_var(format!("r.down.{uid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let mut row = vec![(phi, 1.0), (alpha, 1.0), (r_dn, -1.0)];
            row.extend(mu_terms.iter().map(|(v, c)| (*v, -c)));
            let mut rhs = 0.0;
            match self.price_term(ResourceRef::Unit(u), down_slot) {
                PriceTerm::Own(terms) => {
                    row.extend(terms.into_iter().map(|(v, c)| (v, -c)));
                }
                PriceTerm::Rival(b) => rhs = b,
            }
            self.model
                .add_row(format!("st.down.{uid}.{sid}"), row, RowSense::Eq, rhs);
            self.model
                .add_sos1(format!("cc.down.{uid}.{sid}"), vec![down, r_dn]);
        }
        for (l, load) in case.loads.iter().enumerate() {
            let (Some(d), Some(gamma)) = (blk.curt[l], blk.gamma[l]) else {
                continue;
            };
            let nid = &load.node;
            let node = case.node_index(nid).expect("load node");
            let r_c = self
                .model
                .add_var(format!("r.curt.{nid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let mut row = vec![(gamma, 1.0), (alpha, -1.0), (r_c, -1.0)];
            row.extend(self.mu_column(&blk, node));
            let mut rhs = 0.0;
            match self.price_term(ResourceRef::Load(l), curt_slot) {
                PriceTerm::Own(terms) => row.extend(terms),
                PriceTerm::Rival(b) => rhs = -b,
            }
            self.model
                .add_row(format!("st.curt.{nid}.{sid}"), row, RowSense::Eq, rhs);
            self.model.add_sos1(format!("cc.curt.{nid}.{sid}"), vec![d, r_c]);
        }
        for (r, ren) in case.renewables.iter().enumerate() {
            let (Some(w), Some(chi)) = (blk.wcurt[r], blk.chi[r]) else {
                continue;
            };
            let rid = &ren.id;
            let node = case.node_index(&ren.node).expect("renewable node");
            let r_w = self
                .model
                .add_var(format!("r.wcurt.{rid}.{sid}"), 0.0, f64::INFINITY, 0.0);
            let mut row = vec![(chi, 1.0), (alpha, 1.0), (r_w, -1.0)];
            row.extend(self.mu_column(&blk, node).into_iter().map(|(v, c)| (v, -c)));
            self.model
                .add_row(format!("st.wcurt.{rid}.{sid}"), row, RowSense::Eq, 0.0);
            self.model.add_sos1(format!("cc.wcurt.{rid}.{sid}"), vec![w, r_w]);
        }

        // Balance.
        let imb = case.imbalances_by_index(s);
        let target = match scope {
            AsmScope::Common => imb.total,
            AsmScope::Dist(k) => imb.distribution[k],
            AsmScope::TransB | AsmScope::TransC => imb.transmission,
        };
        let mut bal: Vec<(VarId, f64)> = Vec::new();
        for v in blk.up.iter().flatten() {
            bal.push((*v, 1.0));
        }
        for v in blk.curt.iter().flatten() {
            bal.push((*v, 1.0));
        }
        for v in blk.down.iter().flatten() {
            bal.push((*v, -1.0));
        }
        for v in blk.wcurt.iter().flatten() {
            bal.push((*v, -1.0));
        }
        self.model
            .add_row(format!("bal.{sid}"), bal, RowSense::Eq, target);
        Ok(blk)
    }

    /// Terms `sum_l H_{l, node} mu_l` over the block's lines.
    fn mu_column(&self, blk: &BlockVars, node: usize) -> Vec<(VarId, f64)> {
        let mut terms = Vec::new();
        for (li, mu) in blk.mu.iter().enumerate() {
            if let Some(mu) = mu {
                let h = self.case.network.ptdf[li][node];
                if h != 0.0 {
                    terms.push((*mu, h));
                }
            }
        }
        terms
    }

    /// Variable coefficients and constant part of the transit expression of
    /// line `li` inside this block.
    fn flow_expression(
        &self,
        scope: AsmScope,
        s: usize,
        li: usize,
        blk: &BlockVars,
        dist_blocks: &[BlockVars],
    ) -> (Vec<(VarId, f64)>, f64) {
        let case = self.case;
        let row = &case.network.ptdf[li];
        let mut coeffs: Vec<(VarId, f64)> = Vec::new();
        let mut constant = 0.0;
        for (n, node) in case.network.nodes.iter().enumerate() {
            let h = row[n];
            if h == 0.0 {
                continue;
            }
            if matches!(scope, AsmScope::Dist(k) if node.subsystem != Subsystem::Distribution(k)) {
                continue;
            }
            for (u, unit) in case.units.iter().enumerate() {
                if unit.node != node.id {
                    continue;
                }
                coeffs.push((self.sym.dam_g[u], h));
                if let Some(v) = blk.up[u] {
                    coeffs.push((v, h));
                }
                if let Some(v) = blk.down[u] {
                    coeffs.push((v, -h));
                }
                if scope == AsmScope::TransC && node.subsystem != Subsystem::Transmission {
                    let dblk = dist_block_for(dist_blocks, node.subsystem);
                    if let Some(v) = dblk.up[u] {
                        coeffs.push((v, h));
                    }
                    if let Some(v) = dblk.down[u] {
                        coeffs.push((v, -h));
                    }
                }
            }
            for (r, ren) in case.renewables.iter().enumerate() {
                if ren.node != node.id {
                    continue;
                }
                constant += h * ren.realized[s];
                if let Some(v) = blk.wcurt[r] {
                    coeffs.push((v, -h));
                }
                if scope == AsmScope::TransC && node.subsystem != Subsystem::Transmission {
                    let dblk = dist_block_for(dist_blocks, node.subsystem);
                    if let Some(v) = dblk.wcurt[r] {
                        coeffs.push((v, -h));
                    }
                }
            }
            for (l, load) in case.loads.iter().enumerate() {
                if load.node != node.id {
                    continue;
                }
                constant -= h * load.realized[s];
                if let Some(v) = blk.curt[l] {
                    coeffs.push((v, h));
                }
                if scope == AsmScope::TransC && node.subsystem != Subsystem::Transmission {
                    let dblk = dist_block_for(dist_blocks, node.subsystem);
                    if let Some(v) = dblk.curt[l] {
                        coeffs.push((v, h));
                    }
                }
            }
        }
        (coeffs, constant)
    }

    /// Profit objective after linearization.
    fn objective(&mut self) -> Result<(), ClearingError> {
        let case = self.case;
        let lam = self.lam.as_ref().expect("lambda block built");
        // Day-ahead term per own unit:
        // (lambda - C) g  =  sum_a B_a XG_a + G nu - C g.
        let grid_lo = lam
            .grid
            .values()
            .fold(f64::INFINITY, |acc, b| acc.min(*b));
        let grid_hi = lam
            .grid
            .values()
            .fold(f64::NEG_INFINITY, |acc, b| acc.max(*b));
        let mut dam_duality: Vec<(VarId, f64)> = Vec::new();
        for res in self.own.clone() {
            let ResourceRef::Unit(u) = res else { continue };
            let unit = case.units[u].clone();
            let ladder = case.ladder(res, MarketRole::DamSale).to_vec();
            let xs: Vec<VarId> = (0..ladder.len())
                .map(|a| self.sym.sel[&(ProfileKey { resource: res, slot: BidSlot::Dam }, a)])
                .collect();
            let terms = linearize_price_times_quantity(
                &mut self.model,
                &ladder,
                &xs,
                self.sym.dam_g[u],
                unit.capacity,
                &format!("dam.{}", unit.id),
            )
            .map_err(ClearingError::Solver)?;
            // The substituted revenue equals lambda*g at every KKT point,
            // which the grid brackets; these two rows carry that bound into
            // the relaxation (otherwise nu floats to its cap).
            let mut rev: Vec<(VarId, f64)> = terms.clone();
            rev.push((self.sym.dam_nu[u], unit.capacity));
            let mut rev_hi = rev.clone();
            rev_hi.push((self.sym.dam_g[u], -grid_hi));
            self.model.add_row(
                format!("rev.hi.dam.{}", unit.id),
                rev_hi,
                RowSense::Le,
                0.0,
            );
            let mut rev_lo = rev;
            rev_lo.push((self.sym.dam_g[u], -grid_lo));
            self.model.add_row(
                format!("rev.lo.dam.{}", unit.id),
                rev_lo,
                RowSense::Ge,
                0.0,
            );
            for (xg, price) in &terms {
                self.model.add_obj(*xg, *price);
            }
            self.model.add_obj(self.sym.dam_nu[u], unit.capacity);
            self.model.add_obj(self.sym.dam_g[u], -unit.cost);
            dam_duality.extend(terms);
        }
        // Strong duality of the day-ahead LP, linear because the bilinear
        // bid-times-quantity terms are already linearized:
        //   sum_u b_u g_u = netload * lambda - sum_u G_u nu_u.
        for u in 0..case.units.len() {
            if self.is_own(ResourceRef::Unit(u)) {
                continue; // own terms were pushed above as XG entries
            }
            let b = self
                .rivals
                .price(case, ResourceRef::Unit(u), BidSlot::Dam)
                .expect("rival prices were checked up front");
            dam_duality.push((self.sym.dam_g[u], b));
        }
        for u in 0..case.units.len() {
            dam_duality.push((self.sym.dam_nu[u], case.units[u].capacity));
        }
        dam_duality.push((self.sym.lambda.expect("lambda built"), -case.net_load()));
        self.model
            .add_row("dam.duality", dam_duality, RowSense::Eq, 0.0);
        // Service-market terms, probability weighted.
        for bi in 0..self.sym.blocks.len() {
            let blk = self.sym.blocks[bi].clone();
            let sigma = case.scenarios.probabilities[blk.scenario];
            let (up_slot, down_slot, curt_slot) = super::scope_slots_pub(self.scheme, blk.scope);
            for res in self.own.clone() {
                match res {
                    ResourceRef::Unit(u) => {
                        let (Some(up), Some(down)) = (blk.up[u], blk.down[u]) else {
                            continue;
                        };
                        let unit = case.units[u].clone();
                        let tag = format!("{}.{}.s{}", unit.id, blk.scope.label(), blk.scenario);
                        let up_ladder = case.ladder(res, up_slot.role()).to_vec();
                        let xs: Vec<VarId> = (0..up_ladder.len())
                            .map(|a| self.sym.sel[&(ProfileKey { resource: res, slot: up_slot }, a)])
                            .collect();
                        let terms = linearize_price_times_quantity(
                            &mut self.model,
                            &up_ladder,
                            &xs,
                            up,
                            unit.capacity,
                            &format!("up.{tag}"),
                        )
                        .map_err(ClearingError::Solver)?;
                        for (xg, price) in terms {
                            self.model.add_obj(xg, sigma * price);
                        }
                        self.model.add_obj(up, -sigma * unit.cost_up);
                        let down_ladder = case.ladder(res, down_slot.role()).to_vec();
                        let xs: Vec<VarId> = (0..down_ladder.len())
                            .map(|a| {
                                self.sym.sel[&(ProfileKey { resource: res, slot: down_slot }, a)]
                            })
                            .collect();
                        let terms = linearize_price_times_quantity(
                            &mut self.model,
                            &down_ladder,
                            &xs,
                            down,
                            unit.capacity,
                            &format!("down.{tag}"),
                        )
                        .map_err(ClearingError::Solver)?;
                        for (xg, price) in terms {
                            self.model.add_obj(xg, -sigma * price);
                        }
                        self.model.add_obj(down, sigma * unit.cost_down);
                    }
                    ResourceRef::Load(l) => {
                        let Some(d) = blk.curt[l] else { continue };
                        let load = case.loads[l].clone();
                        let bound = load.curtailable_fraction
                            * load
                                .realized
                                .iter()
                                .fold(0.0_f64, |acc, x| acc.max(*x));
                        let tag = format!("{}.{}.s{}", load.node, blk.scope.label(), blk.scenario);
                        let ladder = case.ladder(res, curt_slot.role()).to_vec();
                        let xs: Vec<VarId> = (0..ladder.len())
                            .map(|a| self.sym.sel[&(ProfileKey { resource: res, slot: curt_slot }, a)])
                            .collect();
                        let terms = linearize_price_times_quantity(
                            &mut self.model,
                            &ladder,
                            &xs,
                            d,
                            bound,
                            &format!("curt.{tag}"),
                        )
                        .map_err(ClearingError::Solver)?;
                        for (xg, price) in terms {
                            self.model.add_obj(xg, sigma * price);
                        }
                        // minus lambda * d via the price grid.
                        let mut yd_terms: Vec<(VarId, f64)> = Vec::new();
                        for ((u, a), y) in &lam.y {
                            let price = lam.grid[&(*u, *a)];
                            let yd = super::linearize::mccormick_product(
                                &mut self.model,
                                *y,
                                d,
                                bound,
                                &format!("lam.{tag}.{}.{a}", case.units[*u].id),
                            )
                            .map_err(ClearingError::Solver)?;
                            self.model.add_obj(yd, -sigma * price);
                            yd_terms.push((yd, price));
                        }
                        super::linearize::add_price_envelope(
                            &mut self.model,
                            &yd_terms,
                            d,
                            &format!("lam.{tag}"),
                        );
                    }
                }
            }
        }
        Ok(())
    }
}

fn dist_block_for(dist_blocks: &[BlockVars], sub: Subsystem) -> &BlockVars {
    let Subsystem::Distribution(k) = sub else {
        panic!("distribution subsystem expected");
    };
    dist_blocks
        .iter()
        .find(|b| b.scope == AsmScope::Dist(k))
        .expect("distribution block built before the transmission block")
}

/// Read the aggregator's chosen candidates out of a solved instance.
pub fn extract_strategy(
    instance: &MpecInstance,
    solution: &MilpSolution,
) -> Result<StrategyProfile, EquilibriumError> {
    let mut profile = StrategyProfile::default();
    let mut groups: BTreeMap<ProfileKey, Vec<(usize, VarId)>> = BTreeMap::new();
    for ((key, a), v) in &instance.symbols.sel {
        groups.entry(*key).or_default().push((*a, *v));
    }
    for (key, members) in groups {
        let chosen: Vec<usize> = members
            .iter()
            .filter(|(_, v)| solution.values[v.0] > 0.5)
            .map(|(a, _)| *a)
            .collect();
        match chosen.as_slice() {
            [a] => profile.set(key.resource, key.slot, *a),
            _ => {
                return Err(EquilibriumError::NoSelection(format!(
                    "{key:?}: {} candidates selected",
                    chosen.len()
                )))
            }
        }
    }
    Ok(profile)
}

/// Pin the selection binaries to a given own-strategy (used by equivalence
/// tests and by warm starts).
pub fn fix_selection(instance: &mut MpecInstance, own: &StrategyProfile) {
    for ((key, a), v) in &instance.symbols.sel {
        let chosen = own.get(key.resource, key.slot).expect("own slot selected");
        let val = if chosen == *a { 1.0 } else { 0.0 };
        instance.model.set_bounds(*v, val, val);
    }
}

/// Construct a feasible point of the instance from direct clearings at the
/// full profile (own strategy merged over rivals). Used as a warm start.
pub fn warm_start_from_clearing(
    case: &MarketCase,
    instance: &MpecInstance,
    full_profile: &StrategyProfile,
) -> Result<Vec<f64>, ClearingError> {
    use crate::clearing::clear_all;
    let scheme = instance.scheme;
    let (dam, per_scenario) = clear_all(case, scheme, full_profile)?;
    let sym = &instance.symbols;
    let mut v = vec![0.0; instance.model.num_vars()];

    for ((key, a), var) in &sym.sel {
        let chosen = full_profile
            .get(key.resource, key.slot)
            .ok_or_else(|| ClearingError::MissingBid(format!("{key:?}")))?;
        v[var.0] = if chosen == *a { 1.0 } else { 0.0 };
    }
    let lambda = sym.lambda.expect("lambda built");
    v[lambda.0] = dam.price;
    // One grid selector matching the clearing price (first hit wins).
    let mut found = false;
    for ((u, a), y) in &sym.y {
        let price = case.ladder(ResourceRef::Unit(*u), MarketRole::DamSale)[*a];
        if !found && (price - dam.price).abs() < 1e-9 {
            v[y.0] = 1.0;
            found = true;
        } else {
            v[y.0] = 0.0;
        }
    }
    if !found {
        return Err(ClearingError::MissingBid(format!(
            "clearing price {} not on the candidate grid",
            dam.price
        )));
    }
    let dam_price = |u: usize| -> f64 {
        full_profile
            .price(case, ResourceRef::Unit(u), BidSlot::Dam)
            .expect("every unit bids day-ahead")
    };
    for u in 0..case.units.len() {
        v[sym.dam_g[u].0] = dam.quantities[u];
        v[sym.dam_nu[u].0] = dam.capacity_duals[u];
    }
    set_named(&instance.model, &mut v, |name| {
        name.strip_prefix("s.cap.")
            .and_then(|uid| case.unit_index(uid))
            .map(|u| case.units[u].capacity - dam.quantities[u])
    });
    set_named(&instance.model, &mut v, |name| {
        name.strip_prefix("r.dam.")
            .and_then(|uid| case.unit_index(uid))
            .map(|u| dam.capacity_duals[u] - dam.price + dam_price(u))
    });

    let names = NameIndex::new(&instance.model);
    for blk in &sym.blocks {
        let markets = &per_scenario[blk.scenario];
        let res = markets
            .iter()
            .find(|m| m.scope == blk.scope)
            .expect("clearing produced this market");
        let bids = asm_prices(case, scheme, full_profile, blk.scope)?;
        fill_block(case, instance, &names, blk, res, &bids, &dam, markets, &mut v);
    }
    fill_mccormick(instance, &names, &mut v);
    Ok(v)
}

/// Name-to-index lookup tables for variables and rows.
struct NameIndex {
    vars: std::collections::HashMap<String, usize>,
    rows: std::collections::HashMap<String, usize>,
}

impl NameIndex {
    fn new(model: &MilpModel) -> Self {
        NameIndex {
            vars: model
                .vars
                .iter()
                .enumerate()
                .map(|(j, v)| (v.name.clone(), j))
                .collect(),
            rows: model
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| (r.name.clone(), i))
                .collect(),
        }
    }
}

/// Assign every variable of one block from its clearing result.
#[allow(clippy::too_many_arguments)]
fn fill_block(
    case: &MarketCase,
    instance: &MpecInstance,
    names: &NameIndex,
    blk: &BlockVars,
    res: &crate::clearing::AsmResult,
    bids: &crate::clearing::AsmBids,
    dam: &crate::clearing::DamResult,
    markets: &[crate::clearing::AsmResult],
    v: &mut [f64],
) {
    let s = blk.scenario;
    let dist_up = |u: usize| -> f64 {
        if blk.scope == AsmScope::TransC {
            markets
                .iter()
                .filter(|m| matches!(m.scope, AsmScope::Dist(_)))
                .map(|m| m.up[u])
                .sum()
        } else {
            0.0
        }
    };
    let dist_down = |u: usize| -> f64 {
        if blk.scope == AsmScope::TransC {
            markets
                .iter()
                .filter(|m| matches!(m.scope, AsmScope::Dist(_)))
                .map(|m| m.down[u])
                .sum()
        } else {
            0.0
        }
    };
    let dist_curt = |l: usize| -> f64 {
        if blk.scope == AsmScope::TransC {
            markets
                .iter()
                .filter(|m| matches!(m.scope, AsmScope::Dist(_)))
                .map(|m| m.curtail[l])
                .sum()
        } else {
            0.0
        }
    };
    let dist_wcurt = |r: usize| -> f64 {
        if blk.scope == AsmScope::TransC {
            markets
                .iter()
                .filter(|m| matches!(m.scope, AsmScope::Dist(_)))
                .map(|m| m.renewable_curtail[r])
                .sum()
        } else {
            0.0
        }
    };
    v[blk.alpha.0] = res.balance_dual;
    for u in 0..case.units.len() {
        if let Some(var) = blk.up[u] {
            v[var.0] = res.up[u];
            v[blk.beta[u].unwrap().0] = res.up_duals[u];
        }
        if let Some(var) = blk.down[u] {
            v[var.0] = res.down[u];
            v[blk.phi[u].unwrap().0] = res.down_duals[u];
        }
    }
    for l in 0..case.loads.len() {
        if let Some(var) = blk.curt[l] {
            v[var.0] = res.curtail[l];
            v[blk.gamma[l].unwrap().0] = res.curtail_duals[l];
        }
    }
    for r in 0..case.renewables.len() {
        if let Some(var) = blk.wcurt[r] {
            v[var.0] = res.renewable_curtail[r];
            v[blk.chi[r].unwrap().0] = res.renewable_duals[r];
        }
    }
    for (li, mu) in blk.mu.iter().enumerate() {
        if let Some(mu) = mu {
            v[mu.0] = res.flow_duals[li];
        }
    }
    // Slack variables close their defining equalities; stationarity slacks
    // close the KKT rows. Both are recovered from the row definitions so the
    // point satisfies them exactly.
    let sid = format!("{}.s{}", blk.scope.label(), s + 1);
    for u in 0..case.units.len() {
        let uid = &case.units[u].id;
        if blk.up[u].is_none() {
            continue;
        }
        let node = case.node_index(&case.units[u].node).unwrap();
        let mu_dot = dot_mu(case, blk, res, node);
        set_var(names, v, &format!("s.up.{uid}.{sid}"), {
            case.units[u].capacity - dam.quantities[u] - dist_up(u) + dist_down(u) - res.up[u]
        });
        set_var(names, v, &format!("s.down.{uid}.{sid}"), {
            dam.quantities[u] + dist_up(u) - dist_down(u) - res.down[u]
        });
        set_var(
            names,
            v,
            &format!("r.up.{uid}.{sid}"),
            res.up_duals[u] - res.balance_dual + mu_dot + bids.up[u],
        );
        set_var(
            names,
            v,
            &format!("r.down.{uid}.{sid}"),
            res.down_duals[u] + res.balance_dual - mu_dot - bids.down[u],
        );
    }
    for l in 0..case.loads.len() {
        if blk.curt[l].is_none() {
            continue;
        }
        let nid = &case.loads[l].node;
        let node = case.node_index(nid).unwrap();
        let mu_dot = dot_mu(case, blk, res, node);
        set_var(names, v, &format!("s.curt.{nid}.{sid}"), {
            case.loads[l].curtailable(s) - dist_curt(l) - res.curtail[l]
        });
        set_var(
            names,
            v,
            &format!("r.curt.{nid}.{sid}"),
            res.curtail_duals[l] - res.balance_dual + mu_dot + bids.curtail[l],
        );
    }
    for r in 0..case.renewables.len() {
        if blk.wcurt[r].is_none() {
            continue;
        }
        let rid = &case.renewables[r].id;
        let node = case.node_index(&case.renewables[r].node).unwrap();
        let mu_dot = dot_mu(case, blk, res, node);
        set_var(names, v, &format!("s.wcurt.{rid}.{sid}"), {
            case.renewables[r].realized[s] - dist_wcurt(r) - res.renewable_curtail[r]
        });
        set_var(
            names,
            v,
            &format!("r.wcurt.{rid}.{sid}"),
            res.renewable_duals[r] + res.balance_dual - mu_dot,
        );
    }
    // Flow slacks close their rows exactly.
    for (li, mu) in blk.mu.iter().enumerate() {
        if mu.is_none() {
            continue;
        }
        let line = &case.network.lines[li];
        let slack = names.vars.get(&format!("s.flow.{}.{sid}", line.id));
        let row = names.rows.get(&format!("flow.{}.{sid}", line.id));
        if let (Some(&j), Some(&ri)) = (slack, row) {
            let row = &instance.model.rows[ri];
            let mut acc = 0.0;
            for (vid, c) in &row.coeffs {
                if vid.0 != j {
                    acc += c * v[vid.0];
                }
            }
            v[j] = (row.rhs - acc).max(0.0);
        }
    }
}

/// Fill every McCormick auxiliary `xg.*` as the product of its two factors,
/// recovered from the bounding rows (`mc.hi` pairs the auxiliary with the
/// quantity, `mc.sel` with the selector).
fn fill_mccormick(instance: &MpecInstance, names: &NameIndex, v: &mut [f64]) {
    for row in &instance.model.rows {
        if let Some(name) = row.name.strip_prefix("mc.hi.") {
            let mut xg = None;
            let mut q = None;
            for (vid, c) in &row.coeffs {
                if *c > 0.0 {
                    xg = Some(*vid);
                } else {
                    q = Some(*vid);
                }
            }
            let (Some(xg), Some(q)) = (xg, q) else { continue };
            let Some(&ri) = names.rows.get(&format!("mc.sel.{name}")) else {
                continue;
            };
            let sel = instance.model.rows[ri]
                .coeffs
                .iter()
                .find(|(vid, _)| *vid != xg)
                .map(|(vid, _)| *vid);
            let Some(sel) = sel else { continue };
            v[xg.0] = v[sel.0] * v[q.0];
        }
    }
}

fn set_var(names: &NameIndex, v: &mut [f64], name: &str, value: f64) {
    if let Some(&j) = names.vars.get(name) {
        v[j] = value.max(0.0);
    }
}

fn set_named(model: &MilpModel, v: &mut [f64], f: impl Fn(&str) -> Option<f64>) {
    for (j, var) in model.vars.iter().enumerate() {
        if let Some(val) = f(&var.name) {
            v[j] = val.max(0.0);
        }
    }
}

fn dot_mu(
    case: &MarketCase,
    blk: &BlockVars,
    res: &crate::clearing::AsmResult,
    node: usize,
) -> f64 {
    let mut acc = 0.0;
    for (li, mu) in blk.mu.iter().enumerate() {
        if mu.is_some() {
            acc += case.network.ptdf[li][node] * res.flow_duals[li];
        }
    }
    acc
}
