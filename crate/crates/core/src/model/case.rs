//! The immutable market description and its derived quantities.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::profile::ResourceRef;
use super::types::{
    Aggregator, BidLadder, LoadPoint, MarketRole, Network, ProgrammableUnit, RenewableUnit,
    ScenarioSet, Subsystem,
};
use crate::error::CaseError;

/// Immutable description of one market instance: networks, resources,
/// scenarios, candidate prices and aggregator ownership. Shareable across
/// threads; all derived quantities are pure functions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarketCase {
    pub network: Network,
    pub units: Vec<ProgrammableUnit>,
    pub renewables: Vec<RenewableUnit>,
    pub loads: Vec<LoadPoint>,
    pub ladders: Vec<BidLadder>,
    pub scenarios: ScenarioSet,
    pub aggregators: Vec<Aggregator>,
    #[serde(skip)]
    index: CaseIndex,
}

#[derive(Clone, Debug, Default)]
struct CaseIndex {
    node_of: HashMap<String, usize>,
    unit_of: HashMap<String, usize>,
    /// (resource id, role) -> ladder position.
    ladder_of: HashMap<(String, MarketRole), usize>,
    /// Load index by node id (flexible or not).
    load_of: HashMap<String, usize>,
}

impl MarketCase {
    pub fn new(
        network: Network,
        units: Vec<ProgrammableUnit>,
        renewables: Vec<RenewableUnit>,
        loads: Vec<LoadPoint>,
        ladders: Vec<BidLadder>,
        scenarios: ScenarioSet,
        aggregators: Vec<Aggregator>,
    ) -> Self {
        let mut case = MarketCase {
            network,
            units,
            renewables,
            loads,
            ladders,
            scenarios,
            aggregators,
            index: CaseIndex::default(),
        };
        case.rebuild_index();
        case
    }

    /// Rebuild the lookup tables (needed after deserialization).
    pub fn rebuild_index(&mut self) {
        let mut idx = CaseIndex::default();
        for (i, n) in self.network.nodes.iter().enumerate() {
            idx.node_of.insert(n.id.clone(), i);
        }
        for (i, u) in self.units.iter().enumerate() {
            idx.unit_of.insert(u.id.clone(), i);
        }
        for (i, l) in self.loads.iter().enumerate() {
            idx.load_of.insert(l.node.clone(), i);
        }
        for (i, l) in self.ladders.iter().enumerate() {
            idx.ladder_of.insert((l.resource.clone(), l.role), i);
        }
        self.index = idx;
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.node_of.get(id).copied()
    }

    pub fn unit_index(&self, id: &str) -> Option<usize> {
        self.index.unit_of.get(id).copied()
    }

    pub fn load_index(&self, node_id: &str) -> Option<usize> {
        self.index.load_of.get(node_id).copied()
    }

    pub fn unit_subsystem(&self, u: usize) -> Subsystem {
        let n = self.node_index(&self.units[u].node).expect("unit node");
        self.network.nodes[n].subsystem
    }

    pub fn load_subsystem(&self, l: usize) -> Subsystem {
        let n = self.node_index(&self.loads[l].node).expect("load node");
        self.network.nodes[n].subsystem
    }

    pub fn renewable_subsystem(&self, r: usize) -> Subsystem {
        let n = self.node_index(&self.renewables[r].node).expect("renewable node");
        self.network.nodes[n].subsystem
    }

    pub fn dist_count(&self) -> usize {
        self.network.dist_count()
    }

    /// Candidate prices of one resource/role; panics on unknown pairs, which
    /// `validate_case` rules out for valid cases.
    pub fn ladder(&self, res: ResourceRef, role: MarketRole) -> &[f64] {
        let id = self.resource_id(res);
        let i = self.index.ladder_of[&(id.to_string(), role)];
        &self.ladders[i].prices
    }

    pub fn ladder_opt(&self, res: ResourceRef, role: MarketRole) -> Option<&[f64]> {
        let id = self.resource_id(res);
        self.index
            .ladder_of
            .get(&(id.to_string(), role))
            .map(|&i| self.ladders[i].prices.as_slice())
    }

    pub fn resource_id(&self, res: ResourceRef) -> &str {
        match res {
            ResourceRef::Unit(u) => &self.units[u].id,
            ResourceRef::Load(l) => &self.loads[l].node,
        }
    }

    /// All strategic resources in deterministic order: units first, then
    /// flexible loads.
    pub fn strategic_resources(&self) -> Vec<ResourceRef> {
        let mut out: Vec<ResourceRef> = (0..self.units.len()).map(ResourceRef::Unit).collect();
        out.extend(
            self.loads
                .iter()
                .enumerate()
                .filter(|(_, l)| l.is_flexible())
                .map(|(i, _)| ResourceRef::Load(i)),
        );
        out
    }

    pub fn aggregator_index(&self, id: &str) -> Option<usize> {
        self.aggregators.iter().position(|a| a.id == id)
    }

    pub fn aggregator_resources(&self, a: usize) -> Vec<ResourceRef> {
        let agg = &self.aggregators[a];
        let mut out = Vec::new();
        for uid in &agg.units {
            if let Some(u) = self.unit_index(uid) {
                out.push(ResourceRef::Unit(u));
            }
        }
        for nid in &agg.loads {
            if let Some(l) = self.load_index(nid) {
                out.push(ResourceRef::Load(l));
            }
        }
        out
    }

    /// Owner aggregator of a resource, if any.
    pub fn owner_of(&self, res: ResourceRef) -> Option<usize> {
        for (a, _) in self.aggregators.iter().enumerate() {
            if self.aggregator_resources(a).contains(&res) {
                return Some(a);
            }
        }
        None
    }

    // ------------------------------------------------------------ quantities

    /// Day-ahead net load: total forecast load minus total renewable forecast.
    pub fn net_load(&self) -> f64 {
        let d: f64 = self.loads.iter().map(|l| l.forecast).sum();
        let w: f64 = self.renewables.iter().map(|r| r.forecast).sum();
        d - w
    }

    /// Per-subsystem and total real-time imbalances for one scenario.
    pub fn compute_imbalances(&self, scenario: &str) -> Result<Imbalances, CaseError> {
        let s = self
            .scenarios
            .index(scenario)
            .ok_or_else(|| CaseError::UnknownScenario(scenario.to_string()))?;
        Ok(self.imbalances_by_index(s))
    }

    /// As [`MarketCase::compute_imbalances`] with a pre-resolved index.
    /// The total is assembled from the subsystem sums so the decomposition
    /// identity holds exactly.
    pub fn imbalances_by_index(&self, s: usize) -> Imbalances {
        let k = self.dist_count();
        let mut trans = 0.0;
        let mut dist = vec![0.0; k];
        let mut add = |sub: Subsystem, v: f64| match sub {
            Subsystem::Transmission => trans += v,
            Subsystem::Distribution(i) => dist[i] += v,
        };
        for (l, load) in self.loads.iter().enumerate() {
            add(self.load_subsystem(l), load.realized[s] - load.forecast);
        }
        for (r, ren) in self.renewables.iter().enumerate() {
            add(self.renewable_subsystem(r), ren.forecast - ren.realized[s]);
        }
        let total = trans + dist.iter().sum::<f64>();
        Imbalances {
            total,
            transmission: trans,
            distribution: dist,
        }
    }

    /// Line flows for a full nodal injection vector (model node order).
    pub fn ptdf_flows(&self, injections: &[f64]) -> Vec<f64> {
        self.network
            .ptdf
            .iter()
            .map(|row| row.iter().zip(injections).map(|(h, p)| h * p).sum())
            .collect()
    }
}

/// Real-time imbalance of one scenario, split by subsystem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Imbalances {
    pub total: f64,
    pub transmission: f64,
    pub distribution: Vec<f64>,
}
