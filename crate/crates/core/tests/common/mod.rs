//! Shared helpers for integration tests: compact builders for toy market
//! cases and random-instance generators used by the oracle cross-checks.

#![allow(dead_code)]

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use tsodso::model::{
    Aggregator, BidLadder, Line, LoadPoint, MarketCase, MarketRole, Network, NetworkNode,
    ProgrammableUnit, RenewableUnit, ScenarioSet, Subsystem,
};

pub struct UnitSpec {
    pub id: &'static str,
    pub node: &'static str,
    pub owner: &'static str,
    pub capacity: f64,
    pub cost: f64,
}

pub fn unit(id: &'static str, node: &'static str, owner: &'static str, capacity: f64, cost: f64) -> UnitSpec {
    UnitSpec { id, node, owner, capacity, cost }
}

pub struct LoadSpec {
    pub node: &'static str,
    pub forecast: f64,
    pub realized: Vec<f64>,
    pub flexible_fraction: f64,
    pub owner: Option<&'static str>,
}

pub struct RenewableSpec {
    pub id: &'static str,
    pub node: &'static str,
    pub forecast: f64,
    pub realized: Vec<f64>,
}

/// Compact builder for small cases. Defaults: one scenario with probability
/// one, no lines, every ladder a single candidate derived from costs.
pub struct CaseBuilder {
    pub nodes: Vec<(String, Subsystem)>,
    pub lines: Vec<(String, Subsystem, String, String, f64)>,
    pub ptdf: Vec<Vec<f64>>,
    pub units: Vec<ProgrammableUnit>,
    pub renewables: Vec<RenewableUnit>,
    pub loads: Vec<LoadPoint>,
    pub ladders: Vec<BidLadder>,
    pub scenario_probs: Vec<f64>,
    pub aggregators: Vec<(String, Vec<String>, Vec<String>)>,
}

impl CaseBuilder {
    pub fn new() -> Self {
        CaseBuilder {
            nodes: Vec::new(),
            lines: Vec::new(),
            ptdf: Vec::new(),
            units: Vec::new(),
            renewables: Vec::new(),
            loads: Vec::new(),
            ladders: Vec::new(),
            scenario_probs: vec![1.0],
            aggregators: Vec::new(),
        }
    }

    pub fn node(mut self, id: &str, sub: Subsystem) -> Self {
        self.nodes.push((id.to_string(), sub));
        self
    }

    pub fn line(mut self, id: &str, sub: Subsystem, from: &str, to: &str, limit: f64, row: Vec<f64>) -> Self {
        self.lines.push((id.to_string(), sub, from.to_string(), to.to_string(), limit));
        self.ptdf.push(row);
        self
    }

    pub fn scenarios(mut self, probs: &[f64]) -> Self {
        self.scenario_probs = probs.to_vec();
        self
    }

    pub fn unit(mut self, id: &str, node: &str, owner: &str, capacity: f64, cost: f64) -> Self {
        self.units.push(ProgrammableUnit {
            id: id.to_string(),
            node: node.to_string(),
            owner: owner.to_string(),
            capacity,
            cost,
            cost_up: cost * 1.5,
            cost_down: cost * 0.5,
        });
        self
    }

    pub fn renewable(mut self, id: &str, node: &str, forecast: f64, realized: &[f64]) -> Self {
        self.renewables.push(RenewableUnit {
            id: id.to_string(),
            node: node.to_string(),
            forecast,
            realized: realized.to_vec(),
        });
        self
    }

    pub fn load(mut self, node: &str, forecast: f64, realized: &[f64]) -> Self {
        self.loads.push(LoadPoint {
            node: node.to_string(),
            forecast,
            realized: realized.to_vec(),
            curtailable_fraction: 0.0,
            owner: None,
        });
        self
    }

    pub fn flexible_load(
        mut self,
        node: &str,
        owner: &str,
        fraction: f64,
        forecast: f64,
        realized: &[f64],
    ) -> Self {
        self.loads.push(LoadPoint {
            node: node.to_string(),
            forecast,
            realized: realized.to_vec(),
            curtailable_fraction: fraction,
            owner: Some(owner.to_string()),
        });
        self
    }

    pub fn ladder(mut self, resource: &str, role: MarketRole, prices: &[f64]) -> Self {
        self.ladders.push(BidLadder {
            resource: resource.to_string(),
            role,
            prices: prices.to_vec(),
        });
        self
    }

    pub fn aggregator(mut self, id: &str, units: &[&str], loads: &[&str]) -> Self {
        self.aggregators.push((
            id.to_string(),
            units.iter().map(|s| s.to_string()).collect(),
            loads.iter().map(|s| s.to_string()).collect(),
        ));
        self
    }

    /// Fill in single-candidate ladders derived from costs for any strategic
    /// resource that has none declared, then assemble the case.
    pub fn build(mut self) -> MarketCase {
        let has = |ladders: &[BidLadder], res: &str, role: MarketRole| {
            ladders.iter().any(|l| l.resource == res && l.role == role)
        };
        for u in &self.units {
            for (role, price) in [
                (MarketRole::DamSale, u.cost * 1.1),
                (MarketRole::UpRegulation, u.cost_up * 1.1),
                (MarketRole::DownRegulation, u.cost_down * 0.9),
            ] {
                if !has(&self.ladders, &u.id, role) {
                    self.ladders.push(BidLadder {
                        resource: u.id.clone(),
                        role,
                        prices: vec![price],
                    });
                }
            }
        }
        for l in &self.loads {
            if l.curtailable_fraction > 0.0
                && !has(&self.ladders, &l.node, MarketRole::LoadCurtailment)
            {
                self.ladders.push(BidLadder {
                    resource: l.node.clone(),
                    role: MarketRole::LoadCurtailment,
                    prices: vec![150.0],
                });
            }
        }
        let network = Network {
            nodes: self
                .nodes
                .iter()
                .map(|(id, sub)| NetworkNode {
                    id: id.clone(),
                    subsystem: *sub,
                })
                .collect(),
            lines: self
                .lines
                .iter()
                .map(|(id, sub, from, to, limit)| Line {
                    id: id.clone(),
                    subsystem: *sub,
                    from: from.clone(),
                    to: to.clone(),
                    limit: *limit,
                })
                .collect(),
            ptdf: self.ptdf.clone(),
        };
        let n = self.scenario_probs.len();
        let scenarios = ScenarioSet {
            ids: (1..=n).map(|i| format!("s{i}")).collect(),
            probabilities: self.scenario_probs.clone(),
        };
        let aggregators = self
            .aggregators
            .iter()
            .map(|(id, units, loads)| Aggregator {
                id: id.clone(),
                units: units.clone(),
                loads: loads.clone(),
            })
            .collect();
        MarketCase::new(
            network,
            self.units,
            self.renewables,
            self.loads,
            self.ladders,
            scenarios,
            aggregators,
        )
    }
}

/// Single transmission bus holding everything.
pub fn single_bus() -> CaseBuilder {
    CaseBuilder::new().node("t1", Subsystem::Transmission)
}

/// Deterministic RNG for reproducible randomized tests.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random well-posed case: two transmission buses with dedicated load buses,
/// plus `kd` single-node distribution networks. Every subsystem carries
/// enough renewables and curtailable load to absorb its own imbalance under
/// any dispatch, so clearings stay feasible; continuous random costs keep
/// optima unique almost surely.
pub struct RandomCaseParams {
    pub kd: usize,
    pub units_t: usize,
    pub units_d: usize,
    pub flex_loads_t: usize,
    pub scenarios: usize,
    /// Transmission line pairs (forward and mirrored rows).
    pub lines: usize,
    pub candidates: usize,
    /// Also give each distribution network a line pair.
    pub d_lines: bool,
    /// Force the first two scenarios onto opposite imbalance signs with
    /// larger magnitudes (so up- and down-regulation both bind somewhere).
    pub balanced_signs: bool,
}

impl Default for RandomCaseParams {
    fn default() -> Self {
        RandomCaseParams {
            kd: 1,
            units_t: 2,
            units_d: 1,
            flex_loads_t: 1,
            scenarios: 2,
            lines: 0,
            candidates: 2,
            d_lines: false,
            balanced_signs: false,
        }
    }
}

pub fn random_case(rng: &mut ChaCha8Rng, p: &RandomCaseParams) -> MarketCase {
    let mut b = CaseBuilder::new()
        .node("t1", Subsystem::Transmission)
        .node("t2", Subsystem::Transmission);
    // Dedicated bus per flexible transmission load.
    for i in 0..p.flex_loads_t {
        b = b.node(&format!("tl{i}"), Subsystem::Transmission);
    }
    for k in 0..p.kd {
        b = b.node(&format!("d{}", k + 1), Subsystem::Distribution(k));
    }
    let n_scen = p.scenarios;
    let probs = {
        let raw: Vec<f64> = (0..n_scen).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|x| x / total).collect::<Vec<_>>()
    };
    b = b.scenarios(&probs);

    // Aggregators A1/A2 split everything between them.
    b = b.aggregator("A1", &[], &[]).aggregator("A2", &[], &[]);

    let mut t_cap = 0.0;
    for i in 0..p.units_t {
        let id = format!("g{i}");
        let cap = rng.random_range(30.0..80.0);
        t_cap += cap;
        let cost = rng.random_range(40.0..90.0);
        let node = if i % 2 == 0 { "t1" } else { "t2" };
        let owner = if i % 2 == 0 { "A1" } else { "A2" };
        b.units.push(ProgrammableUnit {
            id,
            node: node.into(),
            owner: owner.into(),
            capacity: cap,
            cost,
            cost_up: cost * 1.5,
            cost_down: cost * 0.5,
        });
    }
    for k in 0..p.kd {
        for i in 0..p.units_d {
            let id = format!("gd{}{}", k + 1, i);
            let cap = rng.random_range(8.0..20.0);
            let cost = rng.random_range(40.0..90.0);
            let owner = if (k + i) % 2 == 0 { "A2" } else { "A1" };
            b.units.push(ProgrammableUnit {
                id,
                node: format!("d{}", k + 1),
                owner: owner.into(),
                capacity: cap,
                cost,
                cost_up: cost * 1.5,
                cost_down: cost * 0.5,
            });
        }
    }

    // Transmission loads: flexible ones on their own buses, the fixed
    // remainder on t2. Deviations stay within +-8%.
    let t_load = t_cap * rng.random_range(0.5..0.75);
    let share = t_load / (p.flex_loads_t as f64 + 1.0);
    let scen_factor = |s: usize, rng: &mut ChaCha8Rng| -> f64 {
        if p.balanced_signs {
            match s {
                0 => rng.random_range(1.08..1.16),
                1 => rng.random_range(0.84..0.92),
                _ => rng.random_range(0.92..1.08),
            }
        } else {
            rng.random_range(0.92..1.08)
        }
    };
    for i in 0..p.flex_loads_t {
        let owner = if i % 2 == 0 { "A2" } else { "A1" };
        let realized: Vec<f64> = (0..n_scen)
            .map(|s| share * scen_factor(s, rng))
            .collect();
        b.loads.push(LoadPoint {
            node: format!("tl{i}"),
            forecast: share,
            realized,
            curtailable_fraction: rng.random_range(0.5..0.9),
            owner: Some(owner.into()),
        });
    }
    {
        let realized: Vec<f64> = (0..n_scen)
            .map(|s| share * scen_factor(s, rng))
            .collect();
        b.loads.push(LoadPoint {
            node: "t2".into(),
            forecast: share,
            realized,
            curtailable_fraction: 0.0,
            owner: None,
        });
    }
    let d_load_each = 6.0;
    for k in 0..p.kd {
        let node = format!("d{}", k + 1);
        let realized: Vec<f64> = (0..n_scen)
            .map(|s| {
                if p.balanced_signs {
                    d_load_each * scen_factor(s, rng) * rng.random_range(0.98..1.02)
                } else {
                    d_load_each * rng.random_range(0.85..1.15)
                }
            })
            .collect();
        b.loads.push(LoadPoint {
            node,
            forecast: d_load_each,
            realized,
            curtailable_fraction: 1.0,
            owner: Some(if k % 2 == 0 { "A1".into() } else { "A2".into() }),
        });
    }

    // Renewables sized to absorb any negative subsystem imbalance
    // (realizations equal forecasts; imbalance enters via loads).
    let wt = 0.1 * t_load + 2.0;
    b = b.renewable("w1", "t1", wt, &vec![wt; n_scen]);
    for k in 0..p.kd {
        b = b.renewable(
            &format!("wd{}", k + 1),
            &format!("d{}", k + 1),
            2.0,
            &vec![2.0; n_scen],
        );
    }

    // Transmission lines: random sensitivities over all transmission buses,
    // one common column per distribution network. Limits leave the
    // unconstrained dispatch room but occasionally bind.
    let nodes_total = 2 + p.flex_loads_t + p.kd;
    for li in 0..p.lines {
        let mut row = vec![0.0; nodes_total];
        row[0] = rng.random_range(0.2..0.6);
        row[1] = -rng.random_range(0.2..0.6);
        for i in 0..p.flex_loads_t {
            row[2 + i] = rng.random_range(-0.5..0.5);
        }
        for k in 0..p.kd {
            row[2 + p.flex_loads_t + k] = rng.random_range(-0.4..0.4);
        }
        // Worst-case |flow| is bounded by total capacity plus loads.
        let mag = 0.6 * (t_cap + t_load);
        let limit = mag * rng.random_range(0.35..0.8);
        let id = format!("lt{li}");
        let mirrored: Vec<f64> = row.iter().map(|x| -x).collect();
        b = b.line(&id, Subsystem::Transmission, "t1", "t2", limit, row);
        b = b.line(&format!("{id}m"), Subsystem::Transmission, "t2", "t1", limit, mirrored);
    }
    if p.d_lines {
        for k in 0..p.kd {
            let mut row = vec![0.0; nodes_total];
            row[2 + p.flex_loads_t + k] = 1.0;
            let mirrored: Vec<f64> = row.iter().map(|x| -x).collect();
            let node = format!("d{}", k + 1);
            let id = format!("ld{}", k + 1);
            b = b.line(&id, Subsystem::Distribution(k), &node, &node, rng.random_range(16.0..30.0), row);
            b = b.line(&format!("{id}m"), Subsystem::Distribution(k), &node, &node, 35.0, mirrored);
        }
    }

    // Ladders with continuous random candidates; up-regulation prices always
    // exceed down-regulation prices by construction.
    for u in &b.units {
        let mut mk = |base: f64, lo: f64, hi: f64| -> Vec<f64> {
            let mut ps: Vec<f64> = (0..p.candidates)
                .map(|_| base * rng.random_range(lo..hi))
                .collect();
            ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ps
        };
        b.ladders.push(BidLadder {
            resource: u.id.clone(),
            role: MarketRole::DamSale,
            prices: mk(u.cost, 1.02, 1.6),
        });
        b.ladders.push(BidLadder {
            resource: u.id.clone(),
            role: MarketRole::UpRegulation,
            prices: mk(u.cost_up, 1.02, 1.6),
        });
        b.ladders.push(BidLadder {
            resource: u.id.clone(),
            role: MarketRole::DownRegulation,
            prices: mk(u.cost_down, 0.4, 0.95),
        });
    }
    let flex: Vec<String> = b
        .loads
        .iter()
        .filter(|l| l.curtailable_fraction > 0.0)
        .map(|l| l.node.clone())
        .collect();
    for node in &flex {
        let mut ps: Vec<f64> = (0..p.candidates)
            .map(|_| rng.random_range(95.0..260.0))
            .collect();
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        b.ladders.push(BidLadder {
            resource: node.clone(),
            role: MarketRole::LoadCurtailment,
            prices: ps,
        });
    }

    // Roster assembly from ownership fields.
    let owned_units: Vec<(String, String)> = b
        .units
        .iter()
        .map(|u| (u.id.clone(), u.owner.clone()))
        .collect();
    for (id, owner) in owned_units {
        let agg = b
            .aggregators
            .iter_mut()
            .find(|(a, _, _)| *a == owner)
            .unwrap();
        agg.1.push(id);
    }
    let owned_loads: Vec<(String, String)> = b
        .loads
        .iter()
        .filter(|l| l.curtailable_fraction > 0.0)
        .map(|l| (l.node.clone(), l.owner.clone().unwrap()))
        .collect();
    for (node, owner) in owned_loads {
        let agg = b
            .aggregators
            .iter_mut()
            .find(|(a, _, _)| *a == owner)
            .unwrap();
        agg.2.push(node);
    }
    b.build()
}

/// Resample until every market of every scheme clears for the
/// initialization profile and a handful of random profiles.
pub fn feasible_random_case(
    rng: &mut ChaCha8Rng,
    p: &RandomCaseParams,
    schemes: &[tsodso::model::Scheme],
) -> MarketCase {
    use tsodso::clearing::clear_all;
    use tsodso::model::{slots_for, StrategyProfile};
    'outer: for _ in 0..200 {
        let case = random_case(rng, p);
        if !tsodso::model::validate_case(&case).is_valid() {
            continue;
        }
        for &scheme in schemes {
            // The initialization profile plus a few random ones must clear.
            let mut profiles = vec![StrategyProfile::init(&case, scheme)];
            for _ in 0..3 {
                let mut prof = StrategyProfile::init(&case, scheme);
                for res in case.strategic_resources() {
                    for slot in slots_for(&case, scheme, res) {
                        let n = case.ladder(res, slot.role()).len();
                        prof.set(res, slot, rng.random_range(0..n));
                    }
                }
                profiles.push(prof);
            }
            for prof in &profiles {
                if clear_all(&case, scheme, prof).is_err() {
                    continue 'outer;
                }
            }
        }
        return case;
    }
    panic!("no feasible random case found in 200 attempts");
}
