//! Domain data: networks, resources, scenarios, bid ladders, aggregators.

use serde::{Deserialize, Serialize};

/// A node either belongs to the single transmission system or to one of the
/// `K` distribution systems (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    #[serde(rename = "T")]
    Transmission,
    #[serde(rename = "D")]
    Distribution(usize),
}

impl std::fmt::Display for Subsystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Subsystem::Transmission => write!(f, "T"),
            Subsystem::Distribution(k) => write!(f, "D{}", k + 1),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkNode {
    pub id: String,
    pub subsystem: Subsystem,
}

/// Directed transit constraint: the PTDF row of this line against all nodes,
/// with a one-sided limit `flow <= limit`. Bidirectional limits are expressed
/// as two lines with mirrored rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub subsystem: Subsystem,
    pub from: String,
    pub to: String,
    /// Transit limit in MW, strictly positive.
    pub limit: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Network {
    pub nodes: Vec<NetworkNode>,
    pub lines: Vec<Line>,
    /// Row per line, column per node: MW-per-MW flow sensitivity.
    pub ptdf: Vec<Vec<f64>>,
}

impl Network {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Number of distribution systems.
    pub fn dist_count(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n.subsystem {
                Subsystem::Distribution(k) => Some(k + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProgrammableUnit {
    pub id: String,
    pub node: String,
    pub owner: String,
    /// Capacity in MW.
    pub capacity: f64,
    /// Generation cost in EUR/MWh.
    pub cost: f64,
    /// Up-regulation cost in EUR/MWh.
    pub cost_up: f64,
    /// Down-regulation cost in EUR/MWh.
    pub cost_down: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RenewableUnit {
    pub id: String,
    pub node: String,
    /// Day-ahead forecast in MWh.
    pub forecast: f64,
    /// Realized output per scenario in MWh.
    pub realized: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LoadPoint {
    pub node: String,
    /// Day-ahead forecast in MWh.
    pub forecast: f64,
    /// Realized load per scenario in MWh.
    pub realized: Vec<f64>,
    /// Curtailable fraction in [0, 1]; flexible iff positive.
    pub curtailable_fraction: f64,
    /// Owning aggregator, meaningful only when flexible.
    #[serde(default)]
    pub owner: Option<String>,
}

impl LoadPoint {
    pub fn is_flexible(&self) -> bool {
        self.curtailable_fraction > 0.0
    }

    /// Maximum curtailment in scenario `s` (delta_n * realized load).
    pub fn curtailable(&self, s: usize) -> f64 {
        self.curtailable_fraction * self.realized[s]
    }
}

/// Market product a bid ladder belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarketRole {
    DamSale,
    UpRegulation,
    DownRegulation,
    LoadCurtailment,
}

/// Discrete candidate prices one resource may declare for one market role.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BidLadder {
    /// Unit id for generator roles, load node id for curtailment.
    pub resource: String,
    pub role: MarketRole,
    /// Candidate prices in EUR/MWh, non-empty, positive, duplicate-free.
    pub prices: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub ids: Vec<String>,
    /// sigma_s, non-negative, summing to one within 1e-9.
    pub probabilities: Vec<f64>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|s| s == id)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Aggregator {
    pub id: String,
    /// Unit ids under this aggregator's control.
    pub units: Vec<String>,
    /// Flexible load node ids under this aggregator's control.
    pub loads: Vec<String>,
}
