//! Result serialization: equilibrium price tables, per-scenario dispatch,
//! cost tables and a hashed manifest. Output is deterministic: fixed column
//! orders, fixed float formatting, LF line endings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clearing::{clear_all, DamResult, ScenarioMarkets};
use crate::equilibrium::EquilibriumReport;
use crate::error::CaseIoError;
use crate::model::{slots_for, MarketCase, ResourceRef, Scheme, StrategyProfile};

/// Everything a scheme run produces, ready for serialization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultBundle {
    pub scheme: Scheme,
    pub report: EquilibriumReport,
    pub dam: Option<DamResult>,
    pub per_scenario: Vec<ScenarioMarkets>,
    /// Scenario ids, aligned with `per_scenario`.
    pub scenario_ids: Vec<String>,
}

impl ResultBundle {
    /// Re-clear the markets at the report's final profile.
    pub fn build(case: &MarketCase, report: EquilibriumReport) -> Result<Self, CaseIoError> {
        let (dam, per_scenario) = clear_all(case, report.scheme, &report.profile)
            .map_err(|e| CaseIoError::Build(e.to_string()))?;
        Ok(ResultBundle {
            scheme: report.scheme,
            report,
            dam: Some(dam),
            per_scenario,
            scenario_ids: case.scenarios.ids.clone(),
        })
    }

    /// A bundle with a report only (no market tables).
    pub fn report_only(report: EquilibriumReport) -> Self {
        ResultBundle {
            scheme: report.scheme,
            report,
            dam: None,
            per_scenario: Vec::new(),
            scenario_ids: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

fn fmt(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Equilibrium bid prices, wide format (empty cells where a slot does not
/// exist under the scheme).
pub fn equilibrium_prices_csv(case: &MarketCase, scheme: Scheme, profile: &StrategyProfile) -> String {
    use crate::model::BidSlot::*;
    let slots = [
        Dam, AsmUp, AsmDown, AsmCurtail, DistUp, DistDown, DistCurtail, TransUp, TransDown,
        TransCurtail,
    ];
    let header = [
        "resource",
        "dam",
        "asm_up",
        "asm_down",
        "asm_curtail",
        "dist_up",
        "dist_down",
        "dist_curtail",
        "trans_up",
        "trans_down",
        "trans_curtail",
    ];
    let mut out = header.join(",");
    out.push('\n');
    for res in case.strategic_resources() {
        let label = match res {
            ResourceRef::Unit(u) => case.units[u].id.clone(),
            ResourceRef::Load(l) => format!("N{}", case.loads[l].node),
        };
        let active = slots_for(case, scheme, res);
        let mut cells = vec![label];
        for slot in slots {
            if active.contains(&slot) {
                match profile.price(case, res, slot) {
                    Some(p) => cells.push(fmt(p)),
                    None => cells.push(String::new()),
                }
            } else {
                cells.push(String::new());
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Dispatch of one scenario across its markets.
pub fn dispatch_csv(case: &MarketCase, markets: &ScenarioMarkets) -> String {
    let mut out = String::from("market,resource,up,down,curtail,renewable_curtail\n");
    for m in markets {
        let label = m.scope.label();
        for (u, unit) in case.units.iter().enumerate() {
            if m.up[u] != 0.0 || m.down[u] != 0.0 {
                out.push_str(&format!(
                    "{label},{},{},{},,\n",
                    unit.id,
                    fmt(m.up[u]),
                    fmt(m.down[u])
                ));
            }
        }
        for (l, load) in case.loads.iter().enumerate() {
            if m.curtail[l] != 0.0 {
                out.push_str(&format!("{label},N{},,,{},\n", load.node, fmt(m.curtail[l])));
            }
        }
        for (r, ren) in case.renewables.iter().enumerate() {
            if m.renewable_curtail[r] != 0.0 {
                out.push_str(&format!(
                    "{label},{},,,,{}\n",
                    ren.id,
                    fmt(m.renewable_curtail[r])
                ));
            }
        }
    }
    out
}

pub fn costs_csv(scenario_ids: &[String], costs: &crate::clearing::SystemCost) -> String {
    let mut out = String::from("scenario,cost\n");
    for (id, c) in scenario_ids.iter().zip(&costs.per_scenario) {
        out.push_str(&format!("{id},{}\n", fmt(*c)));
    }
    out.push_str(&format!("expected,{}\n", fmt(costs.expected)));
    out
}

/// Write the bundle under `dir` with stable file names; returns the
/// manifest (also written as `manifest.json`).
pub fn write_results(
    case: &MarketCase,
    bundle: &ResultBundle,
    dir: impl AsRef<Path>,
) -> Result<Manifest, CaseIoError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| CaseIoError::Io(dir.display().to_string(), e))?;
    let mut files: BTreeMap<String, String> = BTreeMap::new();

    let report = serde_json::to_string_pretty(&bundle.report).map_err(CaseIoError::Parse)?;
    files.insert("report.json".to_string(), report + "\n");
    if !bundle.per_scenario.is_empty() {
        files.insert(
            "equilibrium_prices.csv".to_string(),
            equilibrium_prices_csv(case, bundle.scheme, &bundle.report.profile),
        );
        for (s, markets) in bundle.per_scenario.iter().enumerate() {
            files.insert(format!("dispatch_s{}.csv", s + 1), dispatch_csv(case, markets));
        }
        files.insert(
            "costs.csv".to_string(),
            costs_csv(&bundle.scenario_ids, &bundle.report.costs),
        );
    }

    let mut manifest = Manifest { files: Vec::new() };
    for (name, content) in &files {
        let path = dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| CaseIoError::Io(path.display().to_string(), e))?;
        manifest.files.push(ManifestEntry {
            name: name.clone(),
            bytes: content.len(),
            sha256: hex_digest(content.as_bytes()),
        });
    }
    let manifest_text =
        serde_json::to_string_pretty(&manifest).map_err(CaseIoError::Parse)? + "\n";
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest_text)
        .map_err(|e| CaseIoError::Io(path.display().to_string(), e))?;
    Ok(manifest)
}

fn hex_digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    hash.iter().map(|b| format!("{b:02x}")).collect()
}
