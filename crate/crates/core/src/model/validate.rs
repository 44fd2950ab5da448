//! Case validation: structural errors are fatal, economic oddities advisory.

use super::case::MarketCase;
use super::types::Subsystem;

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub fatals: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.fatals.is_empty()
    }
}

/// Check every invariant of the case; never fails, reports everything found.
pub fn validate_case(case: &MarketCase) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let fatal = |rep: &mut ValidationReport, m: String| rep.fatals.push(m);
    let warn = |rep: &mut ValidationReport, m: String| rep.warnings.push(m);

    // Network shape.
    let n_nodes = case.network.nodes.len();
    let n_lines = case.network.lines.len();
    if case.network.ptdf.len() != n_lines {
        fatal(
            &mut rep,
            format!(
                "ptdf has {} rows but there are {} lines",
                case.network.ptdf.len(),
                n_lines
            ),
        );
    }
    for (i, row) in case.network.ptdf.iter().enumerate() {
        if row.len() != n_nodes {
            fatal(
                &mut rep,
                format!("ptdf row {} has {} columns, expected {}", i, row.len(), n_nodes),
            );
        }
    }
    {
        let mut seen = std::collections::HashSet::new();
        for n in &case.network.nodes {
            if !seen.insert(&n.id) {
                fatal(&mut rep, format!("duplicate node id '{}'", n.id));
            }
        }
    }
    for line in &case.network.lines {
        if line.limit <= 0.0 {
            fatal(&mut rep, format!("line '{}' has non-positive limit", line.id));
        }
        let from = case.node_index(&line.from);
        let to = case.node_index(&line.to);
        match (from, to) {
            (Some(f), Some(t)) => {
                let fs = case.network.nodes[f].subsystem;
                let ts = case.network.nodes[t].subsystem;
                if fs != ts || fs != line.subsystem {
                    fatal(
                        &mut rep,
                        format!("line '{}' endpoints cross subsystems", line.id),
                    );
                }
            }
            _ => fatal(&mut rep, format!("line '{}' references unknown node", line.id)),
        }
    }

    // Resources.
    let n_scen = case.scenarios.len();
    for u in &case.units {
        if case.node_index(&u.node).is_none() {
            fatal(&mut rep, format!("unit '{}' placed at unknown node '{}'", u.id, u.node));
        }
        if u.capacity <= 0.0 {
            fatal(&mut rep, format!("unit '{}' has non-positive capacity", u.id));
        }
        if !(u.cost_up >= u.cost && u.cost >= u.cost_down && u.cost_down >= 0.0) {
            warn(
                &mut rep,
                format!(
                    "unit '{}' violates cost ordering up({}) >= base({}) >= down({}) >= 0",
                    u.id, u.cost_up, u.cost, u.cost_down
                ),
            );
        }
        if case.aggregator_index(&u.owner).is_none() {
            fatal(&mut rep, format!("unit '{}' owned by unknown aggregator '{}'", u.id, u.owner));
        }
    }
    for r in &case.renewables {
        if case.node_index(&r.node).is_none() {
            fatal(&mut rep, format!("renewable '{}' at unknown node '{}'", r.id, r.node));
        }
        if r.forecast < 0.0 || r.realized.iter().any(|w| *w < 0.0) {
            fatal(&mut rep, format!("renewable '{}' has negative output", r.id));
        }
        if r.realized.len() != n_scen {
            fatal(
                &mut rep,
                format!("renewable '{}' has {} realizations, expected {}", r.id, r.realized.len(), n_scen),
            );
        }
    }
    {
        let mut seen = std::collections::HashSet::new();
        for l in &case.loads {
            if !seen.insert(&l.node) {
                fatal(&mut rep, format!("more than one load at node '{}'", l.node));
            }
        }
    }
    for l in &case.loads {
        if case.node_index(&l.node).is_none() {
            fatal(&mut rep, format!("load at unknown node '{}'", l.node));
        }
        if !(0.0..=1.0).contains(&l.curtailable_fraction) {
            fatal(
                &mut rep,
                format!("load '{}' curtailable fraction outside [0,1]", l.node),
            );
        }
        if l.forecast < 0.0 || l.realized.iter().any(|d| *d < 0.0) {
            fatal(&mut rep, format!("load '{}' has negative demand", l.node));
        }
        if l.realized.len() != n_scen {
            fatal(
                &mut rep,
                format!("load '{}' has {} realizations, expected {}", l.node, l.realized.len(), n_scen),
            );
        }
        if l.is_flexible() {
            match &l.owner {
                Some(o) if case.aggregator_index(o).is_some() => {}
                Some(o) => fatal(
                    &mut rep,
                    format!("flexible load '{}' owned by unknown aggregator '{}'", l.node, o),
                ),
                None => fatal(&mut rep, format!("flexible load '{}' has no owner", l.node)),
            }
        }
    }

    // Scenario probabilities.
    if case.scenarios.probabilities.len() != n_scen {
        fatal(&mut rep, "scenario ids and probabilities differ in length".to_string());
    }
    if case.scenarios.probabilities.iter().any(|p| *p < 0.0) {
        fatal(&mut rep, "negative scenario probability".to_string());
    }
    let psum: f64 = case.scenarios.probabilities.iter().sum();
    if (psum - 1.0).abs() > 1e-9 {
        fatal(
            &mut rep,
            format!("probabilities not normalized: sum = {psum}"),
        );
    }

    // Ladders.
    for ladder in &case.ladders {
        let known = case.unit_index(&ladder.resource).is_some()
            || case
                .load_index(&ladder.resource)
                .map(|l| case.loads[l].is_flexible())
                .unwrap_or(false);
        if !known {
            fatal(
                &mut rep,
                format!(
                    "ladder for {:?} references unknown resource '{}'",
                    ladder.role, ladder.resource
                ),
            );
        }
        if ladder.prices.is_empty() {
            fatal(&mut rep, format!("empty ladder for '{}'", ladder.resource));
        }
        if ladder.prices.iter().any(|p| *p <= 0.0) {
            fatal(
                &mut rep,
                format!("non-positive candidate price for '{}'", ladder.resource),
            );
        }
        for (i, p) in ladder.prices.iter().enumerate() {
            if ladder.prices[..i].iter().any(|q| q == p) {
                fatal(
                    &mut rep,
                    format!("duplicate candidate price {} for '{}'", p, ladder.resource),
                );
            }
        }
    }
    // Every strategic resource needs its ladders.
    for u in 0..case.units.len() {
        for role in [
            super::types::MarketRole::DamSale,
            super::types::MarketRole::UpRegulation,
            super::types::MarketRole::DownRegulation,
        ] {
            if case.ladder_opt(super::profile::ResourceRef::Unit(u), role).is_none() {
                fatal(
                    &mut rep,
                    format!("unit '{}' is missing its {:?} ladder", case.units[u].id, role),
                );
            }
        }
    }
    for (l, load) in case.loads.iter().enumerate() {
        if load.is_flexible()
            && case
                .ladder_opt(
                    super::profile::ResourceRef::Load(l),
                    super::types::MarketRole::LoadCurtailment,
                )
                .is_none()
        {
            fatal(
                &mut rep,
                format!("flexible load '{}' is missing its curtailment ladder", load.node),
            );
        }
    }

    // Ownership partitions.
    {
        let mut unit_owner: std::collections::HashMap<&str, &str> = Default::default();
        for a in &case.aggregators {
            for uid in &a.units {
                if case.unit_index(uid).is_none() {
                    fatal(&mut rep, format!("aggregator '{}' lists unknown unit '{}'", a.id, uid));
                } else if let Some(prev) = unit_owner.insert(uid, &a.id) {
                    fatal(
                        &mut rep,
                        format!("unit '{}' owned by both '{}' and '{}'", uid, prev, a.id),
                    );
                }
            }
            for nid in &a.loads {
                match case.load_index(nid) {
                    Some(l) if case.loads[l].is_flexible() => {}
                    _ => fatal(
                        &mut rep,
                        format!("aggregator '{}' lists unknown flexible load '{}'", a.id, nid),
                    ),
                }
            }
        }
        for u in &case.units {
            let listed = case
                .aggregators
                .iter()
                .any(|a| a.units.iter().any(|x| x == &u.id));
            if !listed {
                fatal(&mut rep, format!("unit '{}' not listed by any aggregator", u.id));
            } else if !case
                .aggregators
                .iter()
                .find(|a| a.id == u.owner)
                .map(|a| a.units.iter().any(|x| x == &u.id))
                .unwrap_or(false)
            {
                fatal(
                    &mut rep,
                    format!("unit '{}' owner field disagrees with aggregator roster", u.id),
                );
            }
        }
        for load in case.loads.iter().filter(|l| l.is_flexible()) {
            let owners: Vec<&str> = case
                .aggregators
                .iter()
                .filter(|a| a.loads.iter().any(|x| x == &load.node))
                .map(|a| a.id.as_str())
                .collect();
            if owners.len() != 1 {
                fatal(
                    &mut rep,
                    format!(
                        "flexible load '{}' must be owned by exactly one aggregator, found {}",
                        load.node,
                        owners.len()
                    ),
                );
            }
        }
    }

    // Subsystem indices must be contiguous starting at D1.
    let k = case.dist_count();
    for n in &case.network.nodes {
        if let Subsystem::Distribution(i) = n.subsystem {
            if i >= k {
                fatal(&mut rep, format!("node '{}' has out-of-range subsystem", n.id));
            }
        }
    }

    rep
}
