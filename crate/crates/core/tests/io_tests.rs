//! Case-file round-trips, result serialization and determinism.

mod common;

use tsodso::data::{cigre_case, cigre_provenance};
use tsodso::equilibrium::{find_equilibrium, EngineConfig, Responder};
use tsodso::io::{
    case_to_json, load_case, parse_case, read_provenance, write_case, write_results, ResultBundle,
};
use tsodso::model::Scheme;

#[test]
fn bundled_case_loads_with_expected_inventory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cigre.json");
    write_case(&cigre_case(), cigre_provenance(), &path).unwrap();
    let case = load_case(&path).unwrap();
    assert_eq!(case.units.len(), 10);
    assert_eq!(
        case.loads.iter().filter(|l| l.is_flexible()).count(),
        14,
        "fourteen flexible loads"
    );
    assert_eq!(case.scenarios.len(), 7);
    assert_eq!(case.aggregators.len(), 9);
    assert_eq!(case.renewables.len(), 21);
}

#[test]
fn case_round_trip_is_value_identical() {
    let case = cigre_case();
    let json = case_to_json(&case, cigre_provenance()).unwrap();
    let back = parse_case(&json).unwrap();
    let json2 = case_to_json(&back, cigre_provenance()).unwrap();
    assert_eq!(json, json2, "round-trip must be byte-stable");
}

#[test]
fn provenance_preserved_through_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cigre.json");
    write_case(&cigre_case(), cigre_provenance(), &path).unwrap();
    let flags = read_provenance(&path).unwrap();
    assert_eq!(flags.get("units").map(String::as_str), Some("paper"));
    assert_eq!(
        flags.get("network.ptdf").map(String::as_str),
        Some("calibrated")
    );
}

#[test]
fn unnormalized_probabilities_rejected_with_diagnostic() {
    let mut case = cigre_case();
    case.scenarios.probabilities[0] = 0.0;
    let json = case_to_json(&case, Default::default()).unwrap();
    let err = parse_case(&json).unwrap_err();
    assert!(format!("{err}").contains("probabilities not normalized"));
}

#[test]
fn dangling_ladder_rejected() {
    let mut case = cigre_case();
    case.ladders[0].resource = "GHOST".into();
    case.rebuild_index();
    let json = case_to_json(&case, Default::default()).unwrap();
    let err = parse_case(&json).unwrap_err();
    assert!(format!("{err}").contains("unknown resource") || format!("{err}").contains("missing its"));
}

#[test]
fn schema_version_mismatch_rejected() {
    let case = cigre_case();
    let json = case_to_json(&case, Default::default()).unwrap();
    let bumped = json.replacen("\"version\": 1", "\"version\": 99", 1);
    let err = parse_case(&bumped).unwrap_err();
    assert!(format!("{err}").contains("unsupported case schema version 99"));
}

fn tiny_case() -> tsodso::model::MarketCase {
    common::single_bus()
        .unit("g1", "t1", "A1", 100.0, 40.0)
        .ladder("g1", tsodso::model::MarketRole::DamSale, &[50.0, 55.0])
        .ladder("g1", tsodso::model::MarketRole::UpRegulation, &[66.0])
        .ladder("g1", tsodso::model::MarketRole::DownRegulation, &[20.0])
        .load("t1", 60.0, &[64.0])
        .aggregator("A1", &["g1"], &[])
        .build()
}

#[test]
fn result_bundle_files_and_manifest_are_deterministic() {
    let case = tiny_case();
    let cfg = EngineConfig {
        responder: Responder::Oracle,
        ..Default::default()
    };
    let report = find_equilibrium(&case, Scheme::A, &cfg).unwrap();
    let bundle = ResultBundle::build(&case, report).unwrap();

    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let m1 = write_results(&case, &bundle, d1.path()).unwrap();
    let m2 = write_results(&case, &bundle, d2.path()).unwrap();
    let names: Vec<&str> = m1.files.iter().map(|f| f.name.as_str()).collect();
    assert!(names.contains(&"report.json"));
    assert!(names.contains(&"equilibrium_prices.csv"));
    assert!(names.contains(&"costs.csv"));
    assert!(names.contains(&"dispatch_s1.csv"));
    for (a, b) in m1.files.iter().zip(&m2.files) {
        assert_eq!(a.sha256, b.sha256, "rerun must hash identically ({})", a.name);
    }
    // The costs table ends with the expected row.
    let costs = std::fs::read_to_string(d1.path().join("costs.csv")).unwrap();
    assert!(costs.lines().last().unwrap().starts_with("expected,"));
}

#[test]
fn empty_bundle_writes_report_only() {
    let case = tiny_case();
    let cfg = EngineConfig {
        responder: Responder::Oracle,
        ..Default::default()
    };
    let report = find_equilibrium(&case, Scheme::A, &cfg).unwrap();
    let bundle = ResultBundle::report_only(report);
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_results(&case, &bundle, dir.path()).unwrap();
    assert_eq!(manifest.files.len(), 1);
    assert_eq!(manifest.files[0].name, "report.json");
}

#[test]
fn published_costs_fed_through_cost_table() {
    // Feeding the published scheme-A scenario costs reproduces the expected
    // value in the final row.
    let costs = tsodso::clearing::SystemCost {
        per_scenario: vec![23137.87, 16934.08, 10822.99, 5003.63, -445.83, -3371.33, -5057.00],
        expected: 47024.41 / 7.0,
    };
    let ids: Vec<String> = (1..=7).map(|i| format!("s{i}")).collect();
    let table = tsodso::io::costs_csv(&ids, &costs);
    let last = table.lines().last().unwrap();
    let value: f64 = last.strip_prefix("expected,").unwrap().parse().unwrap();
    assert!((value - 6717.77).abs() < 0.01);
}
