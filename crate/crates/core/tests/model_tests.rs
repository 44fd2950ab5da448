//! Domain-type and derived-quantity checks, including the bundled-case
//! sanity values.

mod common;

use common::{rng, single_bus, CaseBuilder};
use rand::Rng;
use tsodso::data::cigre_case;
use tsodso::model::{validate_case, BidSlot, ResourceRef, Scheme, StrategyProfile, Subsystem};

#[test]
fn bundled_case_imbalances_match_allocation_table() {
    let case = cigre_case();
    let imb = case.compute_imbalances("s1").unwrap();
    assert!((imb.total - 129.0).abs() < 1e-9);
    assert!((imb.transmission - 99.0).abs() < 1e-9);
    assert!((imb.distribution[0] - 9.0).abs() < 1e-9);
    assert!((imb.distribution[1] - 6.0).abs() < 1e-9);
    assert!((imb.distribution[2] - 15.0).abs() < 1e-9);
    let imb7 = case.compute_imbalances("s7").unwrap();
    assert!((imb7.total + 129.0).abs() < 1e-9);
    assert!(case.compute_imbalances("nope").is_err());
}

#[test]
fn imbalance_zero_when_realized_equals_forecast() {
    let case = cigre_case();
    let imb = case.compute_imbalances("s4").unwrap();
    assert!(imb.total.abs() < 1e-9);
    assert!(imb.transmission.abs() < 1e-9);
    assert!(imb.distribution.iter().all(|d| d.abs() < 1e-9));
}

#[test]
fn imbalance_two_node_toy_by_hand() {
    // Loads deviate +5 and -2, renewable under-produces by 1: total 4.
    let case = single_bus()
        .node("t2", Subsystem::Transmission)
        .unit("g1", "t1", "A1", 50.0, 50.0)
        .load("t1", 10.0, &[15.0])
        .load("t2", 10.0, &[8.0])
        .renewable("w1", "t1", 3.0, &[2.0])
        .aggregator("A1", &["g1"], &[])
        .build();
    let imb = case.compute_imbalances("s1").unwrap();
    assert!((imb.total - 4.0).abs() < 1e-12);
}

#[test]
fn imbalance_decomposition_identity_all_scenarios() {
    let case = cigre_case();
    for s in &case.scenarios.ids {
        let imb = case.compute_imbalances(s).unwrap();
        let recomposed = imb.transmission + imb.distribution.iter().sum::<f64>();
        assert_eq!(imb.total, recomposed, "identity must hold exactly");
    }
}

#[test]
fn ptdf_flows_zero_and_hand_case() {
    let case = cigre_case();
    let zeros = vec![0.0; case.network.nodes.len()];
    assert!(case.ptdf_flows(&zeros).iter().all(|f| f.abs() < 1e-12));

    let toy = single_bus()
        .node("t2", Subsystem::Transmission)
        .line("l1", Subsystem::Transmission, "t1", "t2", 99.0, vec![1.0, 0.0])
        .unit("g1", "t1", "A1", 50.0, 50.0)
        .load("t2", 10.0, &[10.0])
        .aggregator("A1", &["g1"], &[])
        .build();
    let flows = toy.ptdf_flows(&[10.0, -10.0]);
    assert!((flows[0] - 10.0).abs() < 1e-12);
}

#[test]
fn ptdf_superposition_on_random_injections() {
    let case = cigre_case();
    let mut r = rng(5);
    let n = case.network.nodes.len();
    for _ in 0..10 {
        let a: Vec<f64> = (0..n).map(|_| r.random_range(-50.0..50.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random_range(-50.0..50.0)).collect();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let fa = case.ptdf_flows(&a);
        let fb = case.ptdf_flows(&b);
        let fsum = case.ptdf_flows(&sum);
        for ((x, y), z) in fa.iter().zip(&fb).zip(&fsum) {
            assert!((x + y - z).abs() < 1e-9, "linearity violated");
        }
    }
}

#[test]
fn net_load_values() {
    let case = cigre_case();
    assert!((case.net_load() - 1019.0).abs() < 1e-9, "bundled net load");

    let no_renewables = single_bus()
        .unit("g1", "t1", "A1", 50.0, 50.0)
        .load("t1", 30.0, &[30.0])
        .aggregator("A1", &["g1"], &[])
        .build();
    assert!((no_renewables.net_load() - 30.0).abs() < 1e-12);

    let toy = single_bus()
        .node("t2", Subsystem::Transmission)
        .unit("g1", "t1", "A1", 50.0, 50.0)
        .load("t1", 10.0, &[10.0])
        .load("t2", 20.0, &[20.0])
        .renewable("w1", "t1", 5.0, &[5.0])
        .aggregator("A1", &["g1"], &[])
        .build();
    assert!((toy.net_load() - 25.0).abs() < 1e-12);
}

#[test]
fn bundled_case_flexible_load_sums() {
    let case = cigre_case();
    let mut t = 0.0;
    let mut d = vec![0.0; case.dist_count()];
    for (l, load) in case.loads.iter().enumerate() {
        if load.is_flexible() {
            match case.load_subsystem(l) {
                Subsystem::Transmission => t += load.forecast,
                Subsystem::Distribution(k) => d[k] += load.forecast,
            }
        }
    }
    assert!((t - 994.2).abs() < 1e-9);
    for dk in d {
        assert!((dk - 29.19).abs() < 1e-9);
    }
}

#[test]
fn validate_bundled_case_clean() {
    let case = cigre_case();
    let rep = validate_case(&case);
    assert!(rep.is_valid(), "fatals: {:?}", rep.fatals);
    // The two printed ladder anomalies break the monotone mark-up pattern but
    // are valid data; no warnings expected either.
    assert!(rep.warnings.is_empty(), "warnings: {:?}", rep.warnings);
}

#[test]
fn validate_rejects_bad_probabilities_and_dangling_ladder() {
    let mut case = cigre_case();
    case.scenarios.probabilities[0] = 0.0; // sums to 6/7
    let rep = validate_case(&case);
    assert!(rep.fatals.iter().any(|f| f.contains("probabilities not normalized")));

    let mut case2 = cigre_case();
    case2.ladders[0].resource = "UNKNOWN".to_string();
    case2.rebuild_index();
    let rep2 = validate_case(&case2);
    assert!(rep2
        .fatals
        .iter()
        .any(|f| f.contains("unknown resource") || f.contains("missing its")));
}

#[test]
fn corrected_ladders_follow_markup_rules() {
    let mut case = cigre_case();
    tsodso::data::apply_corrected_ladders(&mut case);
    let u9 = case.unit_index("U9").unwrap();
    let dam = case.ladder(ResourceRef::Unit(u9), tsodso::model::MarketRole::DamSale);
    assert!((dam[1] - 98.40).abs() < 1e-9, "repaired +20% entry");
    let u10 = case.unit_index("U10").unwrap();
    let dam10 = case.ladder(ResourceRef::Unit(u10), tsodso::model::MarketRole::DamSale);
    assert!((dam10[1] - 87.60).abs() < 1e-9);
    assert!(validate_case(&case).is_valid());
}

#[test]
fn strategy_profile_init_rule() {
    let case = cigre_case();
    let profile = StrategyProfile::init(&case, Scheme::A);
    let u1 = ResourceRef::Unit(case.unit_index("U1").unwrap());
    // Day-ahead and up-regulation at the maximum candidate, down-regulation
    // at the minimum.
    assert_eq!(profile.price(&case, u1, BidSlot::Dam).unwrap(), 114.40);
    assert_eq!(profile.price(&case, u1, BidSlot::AsmUp).unwrap(), 198.00);
    assert_eq!(profile.price(&case, u1, BidSlot::AsmDown).unwrap(), 22.00);
    let n5 = ResourceRef::Load(case.load_index("5").unwrap());
    assert_eq!(profile.price(&case, n5, BidSlot::AsmCurtail).unwrap(), 229.77);
    profile.validate(&case).unwrap();

    // Scheme C initializes both market families identically.
    let pc = StrategyProfile::init(&case, Scheme::C);
    let u5 = ResourceRef::Unit(case.unit_index("U5").unwrap());
    assert_eq!(
        pc.price(&case, u5, BidSlot::DistUp),
        pc.price(&case, u5, BidSlot::TransUp)
    );
    assert_eq!(pc.price(&case, u5, BidSlot::DistDown).unwrap(), 21.25);
    // The verbatim U9 ladder has its maximum at the third candidate.
    let u9 = ResourceRef::Unit(case.unit_index("U9").unwrap());
    assert_eq!(pc.get(u9, BidSlot::Dam).unwrap(), 2);
}

#[test]
fn case_is_shareable_across_threads() {
    let case = std::sync::Arc::new(cigre_case());
    let handles: Vec<_> = (0..4)
        .map(|i| {
            let c = case.clone();
            std::thread::spawn(move || {
                let s = format!("s{}", i + 1);
                c.compute_imbalances(&s).unwrap().total
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
}

#[test]
fn builder_cases_validate() {
    let case = CaseBuilder::new()
        .node("t1", Subsystem::Transmission)
        .node("d1", Subsystem::Distribution(0))
        .unit("g1", "t1", "A1", 50.0, 50.0)
        .unit("g2", "d1", "A1", 10.0, 60.0)
        .flexible_load("d1", "A1", 0.5, 8.0, &[9.0])
        .load("t1", 40.0, &[41.0])
        .aggregator("A1", &["g1", "g2"], &["d1"])
        .build();
    let rep = validate_case(&case);
    assert!(rep.is_valid(), "{:?}", rep.fatals);
}
