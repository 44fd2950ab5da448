//! Strategy profiles: the declared candidate index of every strategic
//! resource in every market where it bids.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::case::MarketCase;
use super::types::{MarketRole, Subsystem};

/// TSO-DSO coordination scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Common ancillary-services market over the whole system.
    A,
    /// Fully separated transmission and distribution markets.
    B,
    /// Distribution markets cleared first, residuals offered to transmission.
    C,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::A => write!(f, "A"),
            Scheme::B => write!(f, "B"),
            Scheme::C => write!(f, "C"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Scheme::A),
            "B" | "b" => Ok(Scheme::B),
            "C" | "c" => Ok(Scheme::C),
            other => Err(format!("unknown scheme '{other}' (expected A, B or C)")),
        }
    }
}

/// A strategic resource: index into the case's unit or load list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ResourceRef {
    Unit(usize),
    Load(usize),
}

/// One bid position of a resource. Schemes A and B use the `Asm*` slots;
/// scheme C uses the `Dist*`/`Trans*` families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BidSlot {
    Dam,
    AsmUp,
    AsmDown,
    AsmCurtail,
    DistUp,
    DistDown,
    DistCurtail,
    TransUp,
    TransDown,
    TransCurtail,
}

impl BidSlot {
    /// The ladder that provides this slot's candidate prices.
    pub fn role(self) -> MarketRole {
        match self {
            BidSlot::Dam => MarketRole::DamSale,
            BidSlot::AsmUp | BidSlot::DistUp | BidSlot::TransUp => MarketRole::UpRegulation,
            BidSlot::AsmDown | BidSlot::DistDown | BidSlot::TransDown => MarketRole::DownRegulation,
            BidSlot::AsmCurtail | BidSlot::DistCurtail | BidSlot::TransCurtail => {
                MarketRole::LoadCurtailment
            }
        }
    }

    /// Initialization rule: up-regulation starts at the minimum candidate,
    /// everything else at the maximum.
    pub fn init_at_max(self) -> bool {
        !matches!(self, BidSlot::AsmDown | BidSlot::DistDown | BidSlot::TransDown)
    }
}

/// Slots a resource bids in under the given scheme.
pub fn slots_for(case: &MarketCase, scheme: Scheme, res: ResourceRef) -> Vec<BidSlot> {
    match (scheme, res) {
        (Scheme::A | Scheme::B, ResourceRef::Unit(_)) => {
            vec![BidSlot::Dam, BidSlot::AsmUp, BidSlot::AsmDown]
        }
        (Scheme::A | Scheme::B, ResourceRef::Load(_)) => vec![BidSlot::AsmCurtail],
        (Scheme::C, ResourceRef::Unit(u)) => {
            if case.unit_subsystem(u) == Subsystem::Transmission {
                vec![BidSlot::Dam, BidSlot::TransUp, BidSlot::TransDown]
            } else {
                vec![
                    BidSlot::Dam,
                    BidSlot::DistUp,
                    BidSlot::DistDown,
                    BidSlot::TransUp,
                    BidSlot::TransDown,
                ]
            }
        }
        (Scheme::C, ResourceRef::Load(n)) => {
            if case.load_subsystem(n) == Subsystem::Transmission {
                vec![BidSlot::TransCurtail]
            } else {
                vec![BidSlot::DistCurtail, BidSlot::TransCurtail]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProfileKey {
    pub resource: ResourceRef,
    pub slot: BidSlot,
}

/// Selected candidate index per (resource, slot).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyProfile {
    #[serde(with = "choices_serde")]
    pub choices: BTreeMap<ProfileKey, usize>,
}

/// JSON object keys must be strings; store the choices as an entry list.
mod choices_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        resource: ResourceRef,
        slot: BidSlot,
        candidate: usize,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<ProfileKey, usize>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = map
            .iter()
            .map(|(k, v)| Entry {
                resource: k.resource,
                slot: k.slot,
                candidate: *v,
            })
            .collect();
        entries.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> Result<BTreeMap<ProfileKey, usize>, D::Error> {
        let entries = Vec::<Entry>::deserialize(de)?;
        Ok(entries
            .into_iter()
            .map(|e| {
                (
                    ProfileKey {
                        resource: e.resource,
                        slot: e.slot,
                    },
                    e.candidate,
                )
            })
            .collect())
    }
}

impl StrategyProfile {
    /// Algorithm initialization: maximum candidate for day-ahead,
    /// up-regulation and curtailment bids, minimum for down-regulation.
    pub fn init(case: &MarketCase, scheme: Scheme) -> Self {
        let mut choices = BTreeMap::new();
        for res in case.strategic_resources() {
            for slot in slots_for(case, scheme, res) {
                let ladder = case.ladder(res, slot.role());
                let idx = if slot.init_at_max() {
                    argmax(ladder)
                } else {
                    argmin(ladder)
                };
                choices.insert(ProfileKey { resource: res, slot }, idx);
            }
        }
        StrategyProfile { choices }
    }

    pub fn get(&self, resource: ResourceRef, slot: BidSlot) -> Option<usize> {
        self.choices.get(&ProfileKey { resource, slot }).copied()
    }

    pub fn set(&mut self, resource: ResourceRef, slot: BidSlot, candidate: usize) {
        self.choices.insert(ProfileKey { resource, slot }, candidate);
    }

    /// Declared price for one position.
    pub fn price(&self, case: &MarketCase, resource: ResourceRef, slot: BidSlot) -> Option<f64> {
        let idx = self.get(resource, slot)?;
        Some(case.ladder(resource, slot.role())[idx])
    }

    /// Replace this profile's entries for `aggregator`'s resources with those
    /// from `other` (used to merge a best response into the incumbent).
    pub fn adopt(&mut self, case: &MarketCase, aggregator: usize, other: &StrategyProfile) {
        for res in case.aggregator_resources(aggregator) {
            for (key, v) in &other.choices {
                if key.resource == res {
                    self.choices.insert(*key, *v);
                }
            }
        }
    }

    /// The sub-profile covering exactly one aggregator's resources.
    pub fn slice(&self, case: &MarketCase, aggregator: usize) -> StrategyProfile {
        let resources = case.aggregator_resources(aggregator);
        StrategyProfile {
            choices: self
                .choices
                .iter()
                .filter(|(k, _)| resources.contains(&k.resource))
                .map(|(k, v)| (*k, *v))
                .collect(),
        }
    }

    /// Every selected index must point into the matching ladder.
    pub fn validate(&self, case: &MarketCase) -> Result<(), String> {
        for (key, &idx) in &self.choices {
            let ladder = case.ladder(key.resource, key.slot.role());
            if idx >= ladder.len() {
                return Err(format!(
                    "candidate {} out of range for {:?}",
                    idx, key
                ));
            }
        }
        Ok(())
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x < xs[best] {
            best = i;
        }
    }
    best
}
