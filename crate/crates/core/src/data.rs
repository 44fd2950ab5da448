//! Bundled benchmark dataset: a 12-node transmission system with three
//! 14-node distribution systems, ten programmable units, twenty-one
//! renewables, fourteen flexible loads, nine aggregators and seven
//! imbalance scenarios.
//!
//! Resource data (capacities, costs, candidate prices, flexible-load
//! forecasts, imbalance allocation) is transcribed from the published
//! benchmark tables. Electrical data (PTDF, transit limits), the placement
//! of non-flexible load and renewables inside the networks, per-scenario
//! nodal realizations, uniform scenario probabilities and the distribution
//! curtailable fractions are calibrated; the case file flags them so.

use std::collections::BTreeMap;

use crate::model::{
    Aggregator, BidLadder, Line, LoadPoint, MarketCase, MarketRole, Network, NetworkNode,
    ProgrammableUnit, RenewableUnit, ScenarioSet, Subsystem,
};

/// Provenance flag for a bundled datum.
pub const PAPER: &str = "paper";
/// Calibrated to make the bundled case well-posed; not from the tables.
pub const CALIBRATED: &str = "calibrated";

const T_NODES: [&str; 12] = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "12"];
/// Transmission branches (equal reactances assumed for the flow model).
const T_LINES: [(&str, &str); 13] = [
    ("9", "1"),
    ("10", "2"),
    ("11", "3"),
    ("1", "2"),
    ("2", "5"),
    ("5", "4"),
    ("4", "3"),
    ("1", "7"),
    ("3", "8"),
    ("7", "8"),
    ("1", "6"),
    ("4", "6"),
    ("12", "6"),
];
/// Distribution feeder edges as offsets from the network's base node number
/// (base = 13, 27, 41; node 13+o). Radial, rooted at offset 0.
const D_EDGES: [(usize, usize); 13] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (2, 8),
    (3, 4),
    (4, 5),
    (5, 6),
    (6, 7),
    (8, 9),
    (8, 10),
    (10, 11),
    (11, 12),
    (11, 13),
];
/// Boundary transmission node of each distribution network.
const D_BOUNDARY: [&str; 3] = ["4", "5", "6"];

/// Transit limits per directed transmission line id. Calibrated so the
/// day-ahead dispatch overloads the lines from node 1 to node 6 and from
/// node 2 to node 5, and nothing else, across all scenarios.
fn t_limit(from: &str, to: &str) -> f64 {
    match (from, to) {
        ("1", "6") | ("6", "1") => 330.0,
        ("2", "5") | ("5", "2") => 170.0,
        _ => 800.0,
    }
}

/// Distribution feeders are never congested in the bundled case.
const D_LIMIT: f64 = 400.0;

struct UnitSpec {
    id: &'static str,
    node: &'static str,
    owner: &'static str,
    capacity: f64,
    cost: f64,
}

const UNITS: [UnitSpec; 10] = [
    UnitSpec { id: "U1", node: "10", owner: "A1", capacity: 500.0, cost: 88.0 },
    UnitSpec { id: "U2", node: "11", owner: "A1", capacity: 200.0, cost: 72.0 },
    UnitSpec { id: "U3", node: "12", owner: "A2", capacity: 300.0, cost: 91.0 },
    UnitSpec { id: "U4", node: "9", owner: "A2", capacity: 500.0, cost: 71.0 },
    UnitSpec { id: "U5", node: "13", owner: "A5", capacity: 10.0, cost: 85.0 },
    UnitSpec { id: "U6", node: "14", owner: "A4", capacity: 5.0, cost: 80.0 },
    UnitSpec { id: "U7", node: "27", owner: "A7", capacity: 5.0, cost: 75.0 },
    UnitSpec { id: "U8", node: "28", owner: "A6", capacity: 15.0, cost: 86.0 },
    UnitSpec { id: "U9", node: "41", owner: "A9", capacity: 20.0, cost: 82.0 },
    UnitSpec { id: "U10", node: "42", owner: "A8", capacity: 5.0, cost: 73.0 },
];

/// Candidate day-ahead prices exactly as printed, including the two entries
/// (U9 and U10, second column) that do not follow the +20% rule.
const DAM_LADDERS: [(&str, [f64; 3]); 10] = [
    ("U1", [96.80, 105.60, 114.40]),
    ("U2", [79.20, 86.40, 93.60]),
    ("U3", [100.10, 109.20, 118.30]),
    ("U4", [78.10, 85.20, 92.30]),
    ("U5", [93.50, 102.00, 110.50]),
    ("U6", [88.00, 96.00, 104.00]),
    ("U7", [82.50, 90.00, 97.50]),
    ("U8", [94.60, 103.20, 111.80]),
    ("U9", [90.20, 82.00, 106.60]),
    ("U10", [80.30, 73.00, 94.90]),
];

const UP_LADDERS: [(&str, [f64; 3]); 10] = [
    ("U1", [145.20, 171.60, 198.00]),
    ("U2", [118.80, 140.40, 162.00]),
    ("U3", [150.15, 177.45, 204.75]),
    ("U4", [117.15, 138.45, 159.75]),
    ("U5", [140.25, 165.75, 191.25]),
    ("U6", [132.00, 156.00, 180.00]),
    ("U7", [123.75, 146.25, 168.75]),
    ("U8", [141.90, 167.70, 193.50]),
    ("U9", [135.30, 159.90, 184.50]),
    ("U10", [120.45, 142.35, 164.25]),
];

const DOWN_LADDERS: [(&str, [f64; 3]); 10] = [
    ("U1", [39.60, 30.80, 22.00]),
    ("U2", [32.40, 25.20, 18.00]),
    ("U3", [40.95, 31.85, 22.75]),
    ("U4", [31.95, 24.85, 17.75]),
    ("U5", [38.25, 29.75, 21.25]),
    ("U6", [36.00, 28.00, 20.00]),
    ("U7", [33.75, 26.25, 18.75]),
    ("U8", [38.70, 30.10, 21.50]),
    ("U9", [36.90, 28.70, 20.50]),
    ("U10", [32.85, 25.55, 18.25]),
];

/// Flexible loads: (node, owner, forecast MWh, curtailment candidates).
const FLEX_LOADS: [(&str, &str, f64, [f64; 3]); 14] = [
    ("2", "A3", 192.2, [95.00, 142.50, 228.00]),
    ("3", "A3", 219.2, [98.79, 148.18, 237.09]),
    ("4", "A1", 219.9, [93.53, 140.30, 224.48]),
    ("5", "A3", 69.5, [95.74, 143.61, 229.77]),
    ("6", "A2", 293.4, [94.22, 141.34, 226.14]),
    ("13", "A4", 12.86, [97.47, 146.21, 233.94]),
    ("14", "A5", 12.98, [99.00, 148.50, 237.60]),
    ("15", "A4", 3.35, [96.35, 144.53, 231.25]),
    ("27", "A6", 12.86, [92.60, 138.90, 222.24]),
    ("28", "A7", 12.98, [94.05, 141.08, 225.72]),
    ("29", "A6", 3.35, [91.54, 137.31, 219.69]),
    ("41", "A8", 12.86, [97.57, 146.36, 234.18]),
    ("42", "A9", 12.98, [99.10, 148.65, 237.84]),
    ("43", "A8", 3.35, [100.01, 150.02, 240.02]),
];

/// Non-flexible load placement (calibrated residual of the system totals).
const FIXED_LOADS_T: [(&str, f64); 3] = [("9", 42.23), ("7", 60.0), ("8", 60.0)];
const FIXED_LOADS_D_OFFSETS: [(usize, f64); 7] = [
    (4, 4.50),
    (5, 4.50),
    (6, 4.50),
    (7, 4.50),
    (9, 4.00),
    (12, 4.00),
    (13, 4.00),
];

/// Renewables: transmission trio plus six units per distribution network.
const RENEWABLES_T: [(&str, &str, f64); 3] = [("R1", "1", 65.0), ("R2", "7", 85.0), ("R3", "8", 95.0)];
/// (node offset, forecast) per distribution network, totals 20 / 19 / 31.
const RENEWABLES_D: [[f64; 6]; 3] = [
    [5.0, 4.0, 3.0, 4.0, 2.0, 2.0],
    [5.0, 4.0, 3.0, 3.0, 2.0, 2.0],
    [8.0, 6.0, 5.0, 5.0, 4.0, 3.0],
];
const RENEWABLE_D_OFFSETS: [usize; 6] = [2, 3, 4, 8, 10, 11];

/// Imbalance allocation per scenario (total; T; D1; D2; D3).
const IMBALANCES: [[f64; 5]; 7] = [
    [129.0, 99.0, 9.0, 6.0, 15.0],
    [86.0, 66.0, 6.0, 4.0, 10.0],
    [43.0, 33.0, 3.0, 2.0, 5.0],
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [-43.0, -33.0, -3.0, -2.0, -5.0],
    [-86.0, -66.0, -6.0, -4.0, -10.0],
    [-129.0, -99.0, -9.0, -6.0, -15.0],
];

/// Curtailable fraction of flexible loads: the published 20% in transmission;
/// distribution loads are calibrated to fully curtailable so that every
/// distribution market can absorb its allocated imbalance locally.
fn delta_for(sub: Subsystem) -> f64 {
    match sub {
        Subsystem::Transmission => 0.2,
        Subsystem::Distribution(_) => 1.0,
    }
}

fn d_base(k: usize) -> usize {
    13 + 14 * k
}

/// Build the bundled case.
pub fn cigre_case() -> MarketCase {
    let network = build_network();
    let scenarios = ScenarioSet {
        ids: (1..=7).map(|i| format!("s{i}")).collect(),
        probabilities: vec![1.0 / 7.0; 7],
    };

    // Loads with per-scenario realizations: each subsystem's loads scale
    // proportionally so the subsystem sum of deviations hits its allocation.
    let mut loads: Vec<LoadPoint> = Vec::new();
    let mut node_sub: BTreeMap<String, Subsystem> = BTreeMap::new();
    for n in &network.nodes {
        node_sub.insert(n.id.clone(), n.subsystem);
    }
    let mut forecast_by_sub: BTreeMap<String, f64> = BTreeMap::new();
    let mut push_load = |node: &str, owner: Option<&str>, forecast: f64, flex: bool| {
        loads.push(LoadPoint {
            node: node.to_string(),
            forecast,
            realized: Vec::new(),
            curtailable_fraction: if flex { delta_for(node_sub[node]) } else { 0.0 },
            owner: owner.map(str::to_string),
        });
    };
    for (node, owner, forecast, _) in &FLEX_LOADS {
        push_load(node, Some(owner), *forecast, true);
    }
    for (node, forecast) in &FIXED_LOADS_T {
        push_load(node, None, *forecast, false);
    }
    for k in 0..3 {
        for (off, forecast) in &FIXED_LOADS_D_OFFSETS {
            let node = (d_base(k) + off).to_string();
            push_load(&node, None, *forecast, false);
        }
    }
    for l in &loads {
        *forecast_by_sub
            .entry(node_sub[&l.node].to_string())
            .or_default() += l.forecast;
    }
    for l in &mut loads {
        let sub = node_sub[&l.node];
        let sub_total = forecast_by_sub[&sub.to_string()];
        let col = match sub {
            Subsystem::Transmission => 1,
            Subsystem::Distribution(k) => 2 + k,
        };
        l.realized = IMBALANCES
            .iter()
            .map(|row| l.forecast * (1.0 + row[col] / sub_total))
            .collect();
    }

    // Renewables realize exactly at forecast in every scenario.
    let mut renewables: Vec<RenewableUnit> = Vec::new();
    for (id, node, w) in &RENEWABLES_T {
        renewables.push(RenewableUnit {
            id: id.to_string(),
            node: node.to_string(),
            forecast: *w,
            realized: vec![*w; 7],
        });
    }
    let mut rid = 4;
    for (k, outputs) in RENEWABLES_D.iter().enumerate() {
        for (j, w) in outputs.iter().enumerate() {
            renewables.push(RenewableUnit {
                id: format!("R{rid}"),
                node: (d_base(k) + RENEWABLE_D_OFFSETS[j]).to_string(),
                forecast: *w,
                realized: vec![*w; 7],
            });
            rid += 1;
        }
    }

    let units: Vec<ProgrammableUnit> = UNITS
        .iter()
        .map(|u| ProgrammableUnit {
            id: u.id.to_string(),
            node: u.node.to_string(),
            owner: u.owner.to_string(),
            capacity: u.capacity,
            cost: u.cost,
            cost_up: u.cost * 1.5,
            cost_down: u.cost * 0.5,
        })
        .collect();

    let mut ladders: Vec<BidLadder> = Vec::new();
    for (id, prices) in &DAM_LADDERS {
        ladders.push(ladder(id, MarketRole::DamSale, prices));
    }
    for (id, prices) in &UP_LADDERS {
        ladders.push(ladder(id, MarketRole::UpRegulation, prices));
    }
    for (id, prices) in &DOWN_LADDERS {
        ladders.push(ladder(id, MarketRole::DownRegulation, prices));
    }
    for (node, _, _, prices) in &FLEX_LOADS {
        ladders.push(ladder(node, MarketRole::LoadCurtailment, prices));
    }

    let aggregators = vec![
        agg("A1", &["U1", "U2"], &["4"]),
        agg("A2", &["U3", "U4"], &["6"]),
        agg("A3", &[], &["2", "3", "5"]),
        agg("A4", &["U6"], &["13", "15"]),
        agg("A5", &["U5"], &["14"]),
        agg("A6", &["U8"], &["27", "29"]),
        agg("A7", &["U7"], &["28"]),
        agg("A8", &["U10"], &["41", "43"]),
        agg("A9", &["U9"], &["42"]),
    ];

    MarketCase::new(network, units, renewables, loads, ladders, scenarios, aggregators)
}

/// Ladder price variant applying the uniform mark-up rules to the unit
/// ladders (+10/+20/+30% of cost for day-ahead, +10/+30/+50% of the
/// up-regulation cost, -10/-30/-50% of the down-regulation cost), which
/// repairs the two printed day-ahead entries that break the pattern.
/// Load curtailment ladders are left untouched.
pub fn apply_corrected_ladders(case: &mut MarketCase) {
    for i in 0..case.ladders.len() {
        let resource = case.ladders[i].resource.clone();
        let Some(u) = case.unit_index(&resource) else {
            continue;
        };
        let unit = &case.units[u];
        case.ladders[i].prices = match case.ladders[i].role {
            MarketRole::DamSale => vec![unit.cost * 1.1, unit.cost * 1.2, unit.cost * 1.3],
            MarketRole::UpRegulation => {
                vec![unit.cost_up * 1.1, unit.cost_up * 1.3, unit.cost_up * 1.5]
            }
            MarketRole::DownRegulation => {
                vec![unit.cost_down * 0.9, unit.cost_down * 0.7, unit.cost_down * 0.5]
            }
            MarketRole::LoadCurtailment => continue,
        };
    }
    case.rebuild_index();
}

/// Section-level provenance flags for the bundled case file.
pub fn cigre_provenance() -> BTreeMap<String, String> {
    let mut p = BTreeMap::new();
    let paper = [
        "units",
        "ladders",
        "loads.flexible.forecast",
        "scenarios.imbalance_allocation",
        "renewables.subsystem_totals",
        "network.topology",
    ];
    let calibrated = [
        "network.ptdf",
        "network.limits",
        "loads.non_flexible",
        "loads.realizations",
        "loads.curtailable_fraction.distribution",
        "renewables.nodal_split",
        "scenarios.probabilities",
    ];
    for k in paper {
        p.insert(k.to_string(), PAPER.to_string());
    }
    for k in calibrated {
        p.insert(k.to_string(), CALIBRATED.to_string());
    }
    p
}

fn ladder(resource: &str, role: MarketRole, prices: &[f64]) -> BidLadder {
    BidLadder {
        resource: resource.to_string(),
        role,
        prices: prices.to_vec(),
    }
}

fn agg(id: &str, units: &[&str], loads: &[&str]) -> Aggregator {
    Aggregator {
        id: id.to_string(),
        units: units.iter().map(|s| s.to_string()).collect(),
        loads: loads.iter().map(|s| s.to_string()).collect(),
    }
}

fn build_network() -> Network {
    let mut nodes: Vec<NetworkNode> = T_NODES
        .iter()
        .map(|id| NetworkNode {
            id: id.to_string(),
            subsystem: Subsystem::Transmission,
        })
        .collect();
    for k in 0..3 {
        for o in 0..14 {
            nodes.push(NetworkNode {
                id: (d_base(k) + o).to_string(),
                subsystem: Subsystem::Distribution(k),
            });
        }
    }
    let node_pos: BTreeMap<&str, usize> = T_NODES.iter().enumerate().map(|(i, &n)| (n, i)).collect();

    // Transmission PTDF by DC load flow with unit susceptances, slack node 1.
    let nt = T_NODES.len();
    let mut bbus = vec![0.0; nt * nt];
    for (f, t) in &T_LINES {
        let (i, j) = (node_pos[f], node_pos[t]);
        bbus[i * nt + i] += 1.0;
        bbus[j * nt + j] += 1.0;
        bbus[i * nt + j] -= 1.0;
        bbus[j * nt + i] -= 1.0;
    }
    // Reduced inverse: theta = X p with slack row/col zero.
    let slack = 0usize;
    let red = nt - 1;
    let mut bred = vec![0.0; red * red];
    for i in 0..red {
        for j in 0..red {
            bred[i * red + j] = bbus[(i + 1) * nt + (j + 1)];
        }
    }
    let xinv = invert_dense(&bred, red).expect("transmission graph is connected");
    let x = |i: usize, j: usize| -> f64 {
        if i == slack || j == slack {
            0.0
        } else {
            xinv[(i - 1) * red + (j - 1)]
        }
    };

    let total_nodes = nodes.len();
    let mut lines: Vec<Line> = Vec::new();
    let mut ptdf: Vec<Vec<f64>> = Vec::new();
    // Distribution nodes inject through their boundary transmission node.
    let t_col_of = |node: &NetworkNode, node_pos: &BTreeMap<&str, usize>| -> usize {
        match node.subsystem {
            Subsystem::Transmission => node_pos[node.id.as_str()],
            Subsystem::Distribution(k) => node_pos[D_BOUNDARY[k]],
        }
    };

    for (f, t) in &T_LINES {
        let (i, j) = (node_pos[f], node_pos[t]);
        let mut row = vec![0.0; total_nodes];
        for (c, node) in nodes.iter().enumerate() {
            let n = t_col_of(node, &node_pos);
            row[c] = x(i, n) - x(j, n);
        }
        push_directed_pair(
            &mut lines,
            &mut ptdf,
            Subsystem::Transmission,
            f,
            t,
            t_limit(f, t),
            row,
        );
    }

    // Distribution feeders: tree flows, parent -> child carries the subtree's
    // net withdrawal; injections outside the subtree do not cross the edge.
    for k in 0..3 {
        let base = d_base(k);
        // children adjacency by offset
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); 14];
        for (p, c) in &D_EDGES {
            children[*p].push(*c);
        }
        for (p, c) in &D_EDGES {
            let mut subtree = vec![false; 14];
            collect_subtree(*c, &children, &mut subtree);
            let mut row = vec![0.0; total_nodes];
            for (off, inside) in subtree.iter().enumerate() {
                if *inside {
                    let id = (base + off).to_string();
                    let idx = nodes.iter().position(|n| n.id == id).unwrap();
                    row[idx] = -1.0;
                }
            }
            let from = (base + p).to_string();
            let to = (base + c).to_string();
            push_directed_pair(
                &mut lines,
                &mut ptdf,
                Subsystem::Distribution(k),
                &from,
                &to,
                D_LIMIT,
                row,
            );
        }
    }

    Network { nodes, lines, ptdf }
}

fn push_directed_pair(
    lines: &mut Vec<Line>,
    ptdf: &mut Vec<Vec<f64>>,
    subsystem: Subsystem,
    from: &str,
    to: &str,
    limit: f64,
    row: Vec<f64>,
) {
    let mirrored: Vec<f64> = row.iter().map(|h| -h).collect();
    lines.push(Line {
        id: format!("{subsystem}:{from}-{to}"),
        subsystem,
        from: from.to_string(),
        to: to.to_string(),
        limit,
    });
    ptdf.push(row);
    lines.push(Line {
        id: format!("{subsystem}:{to}-{from}"),
        subsystem,
        from: to.to_string(),
        to: from.to_string(),
        limit,
    });
    ptdf.push(mirrored);
}

fn collect_subtree(root: usize, children: &[Vec<usize>], mark: &mut [bool]) {
    mark[root] = true;
    for &c in &children[root] {
        collect_subtree(c, children, mark);
    }
}

fn invert_dense(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col].abs() < 1e-12 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
                inv.swap(col * n + c, piv * n + c);
            }
        }
        let p = m[col * n + col];
        for c in 0..n {
            m[col * n + c] /= p;
            inv[col * n + c] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                m[r * n + c] -= f * m[col * n + c];
                inv[r * n + c] -= f * inv[col * n + c];
            }
        }
    }
    Some(inv)
}
