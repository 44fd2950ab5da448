//! Bilevel-to-MILP construction checks: exact linearization blocks, KKT
//! equivalence against the direct clearings, and objective fidelity.

mod common;

use common::{rng, single_bus, CaseBuilder};
use rand::Rng;
use tsodso::clearing::{aggregator_profit, clear_all, clear_dam, AsmScope};
use tsodso::milp::{
    solve_lp, solve_milp, MilpConfig, MilpModel, MilpStatus, ObjSense, RowSense,
};
use tsodso::model::{BidSlot, MarketRole, ResourceRef, Scheme, StrategyProfile, Subsystem};
use tsodso::mpec::{
    build_mpec, discretize_lambda, extract_strategy, fix_selection, mccormick_product,
    warm_start_from_clearing,
};

#[test]
fn mccormick_pins_product_at_binary_extremes() {
    // Maximize XG subject to the envelope: with x fixed 0 the auxiliary is
    // forced to 0; with x fixed 1 it equals the quantity.
    for (xval, qval) in [(0.0, 7.5), (1.0, 7.5), (1.0, 0.0)] {
        let mut m = MilpModel::new("mc", ObjSense::Maximize);
        let x = m.add_binary("x", 0.0);
        m.set_bounds(x, xval, xval);
        let q = m.add_var("q", 0.0, 10.0, 0.0);
        m.set_bounds(q, qval, qval);
        let xg = mccormick_product(&mut m, x, q, 10.0, "t").unwrap();
        m.add_obj(xg, 1.0);
        let hi = solve_lp(&m).unwrap();
        assert!((hi.values[xg.0] - xval * qval).abs() < 1e-9, "upper envelope");
        // And minimizing pins the same value: the envelope is exact.
        let mut m2 = m.clone();
        m2.vars[xg.0].obj = -1.0;
        let lo = solve_lp(&m2).unwrap();
        assert!((lo.values[xg.0] - xval * qval).abs() < 1e-9, "lower envelope");
    }
}

#[test]
fn mccormick_exact_on_grid_enumeration() {
    // Enumerate binary values and a grid of quantities on a toy model; the
    // auxiliary must equal the product everywhere (error 0 within 1e-9).
    for xval in [0.0, 1.0] {
        for step in 0..=10 {
            let qval = 12.0 * step as f64 / 10.0;
            let mut m = MilpModel::new("mc", ObjSense::Minimize);
            let x = m.add_binary("x", 0.0);
            m.set_bounds(x, xval, xval);
            let q = m.add_var("q", 0.0, 12.0, 0.0);
            m.set_bounds(q, qval, qval);
            let xg = mccormick_product(&mut m, x, q, 12.0, "t").unwrap();
            m.add_obj(xg, 1.0);
            let lo = solve_lp(&m).unwrap().values[xg.0];
            let mut m2 = m.clone();
            m2.vars[xg.0].obj = -1.0;
            let hi = solve_lp(&m2).unwrap().values[xg.0];
            assert!((lo - xval * qval).abs() < 1e-9);
            assert!((hi - xval * qval).abs() < 1e-9);
        }
    }
}

#[test]
fn mccormick_rejects_unbounded_quantity() {
    let mut m = MilpModel::new("mc", ObjSense::Minimize);
    let x = m.add_binary("x", 0.0);
    let q = m.add_var("q", 0.0, f64::INFINITY, 0.0);
    assert!(mccormick_product(&mut m, x, q, f64::INFINITY, "t").is_err());
}

#[test]
fn lambda_discretization_single_candidate_forced() {
    let case = single_bus()
        .unit("g1", "t1", "A1", 100.0, 40.0)
        .ladder("g1", MarketRole::DamSale, &[50.0])
        .ladder("g1", MarketRole::UpRegulation, &[66.0])
        .ladder("g1", MarketRole::DownRegulation, &[20.0])
        .load("t1", 60.0, &[60.0])
        .aggregator("A1", &["g1"], &[])
        .build();
    let mut m = MilpModel::new("lam", ObjSense::Maximize);
    let lambda = m.add_var("lambda", f64::NEG_INFINITY, f64::INFINITY, 1.0);
    let block = discretize_lambda(&mut m, &case, lambda);
    assert_eq!(block.y.len(), 1);
    let sol = solve_milp(&m, &MilpConfig::default()).unwrap();
    assert!((sol.values[lambda.0] - 50.0).abs() < 1e-9, "grid forces 50");
}

/// Monopoly toy: single aggregator, one candidate per ladder. The MPEC
/// optimum must equal the direct clearing profit of that only profile.
#[test]
fn monopoly_single_profile_matches_direct_profit() {
    let case = single_bus()
        .unit("g1", "t1", "A1", 100.0, 40.0)
        .ladder("g1", MarketRole::DamSale, &[50.0])
        .ladder("g1", MarketRole::UpRegulation, &[66.0])
        .ladder("g1", MarketRole::DownRegulation, &[20.0])
        .load("t1", 60.0, &[64.0])
        .aggregator("A1", &["g1"], &[])
        .build();
    let rivals = StrategyProfile::default();
    let instance = build_mpec(&case, Scheme::A, 0, &rivals).unwrap();
    let sol = solve_milp(&instance.model, &MilpConfig::default()).unwrap();
    assert_eq!(sol.status, MilpStatus::Optimal);

    let profile = StrategyProfile::init(&case, Scheme::A);
    let (dam, per_scenario) = clear_all(&case, Scheme::A, &profile).unwrap();
    let profit = aggregator_profit(&case, Scheme::A, 0, &dam, &per_scenario, &profile).unwrap();
    assert!(
        (sol.objective - profit).abs() < 1e-6,
        "mpec {} vs direct {}",
        sol.objective,
        profit
    );
    // Strategy extraction returns the only candidate everywhere.
    let extracted = extract_strategy(&instance, &sol).unwrap();
    assert_eq!(extracted.get(ResourceRef::Unit(0), BidSlot::Dam), Some(0));
}

#[test]
fn zero_capacity_entries_have_fixed_dispatch() {
    // A unit the day-ahead market cannot use (capacity bound at epsilon and
    // cost high) keeps its dispatch at zero through the KKT system.
    let case = single_bus()
        .unit("g1", "t1", "A1", 100.0, 40.0)
        .unit("tiny", "t1", "A1", 1e-6, 80.0)
        .load("t1", 60.0, &[60.0])
        .aggregator("A1", &["g1", "tiny"], &[])
        .build();
    let rivals = StrategyProfile::default();
    let instance = build_mpec(&case, Scheme::A, 0, &rivals).unwrap();
    let sol = solve_milp(&instance.model, &MilpConfig::default()).unwrap();
    let tiny = instance.symbols.dam_g[1];
    assert!(sol.values[tiny.0].abs() < 1e-6);
}

/// Fixing all bid-selection binaries makes the MPEC reproduce each direct
/// clearing LP objective: the embedded KKT systems admit only follower
/// optima.
#[test]
fn kkt_equivalence_fixed_binaries_all_schemes() {
    let mut r = rng(31);
    for trial in 0..6 {
        let params = common::RandomCaseParams {
            kd: 2,
            units_t: 2,
            units_d: 1,
            flex_loads_t: 1,
            scenarios: 2,
            lines: 1,
            candidates: 2,
            d_lines: trial % 2 == 0,
            balanced_signs: false,
        };
        let case = common::feasible_random_case(&mut r, &params, &[Scheme::A, Scheme::B, Scheme::C]);
        for scheme in [Scheme::A, Scheme::B, Scheme::C] {
            // Random full profile; aggregator 0 under optimization.
            let mut profile = StrategyProfile::init(&case, scheme);
            for res in case.strategic_resources() {
                for slot in tsodso::model::slots_for(&case, scheme, res) {
                    let n = case.ladder(res, slot.role()).len();
                    profile.set(res, slot, r.random_range(0..n));
                }
            }
            if clear_all(&case, scheme, &profile).is_err() {
                continue;
            }
            let mut instance = build_mpec(&case, scheme, 0, &profile).unwrap();
            fix_selection(&mut instance, &profile.slice(&case, 0));
            let ws = warm_start_from_clearing(&case, &instance, &profile).unwrap();
            let cfg = MilpConfig {
                warm_start: Some(ws),
                ..Default::default()
            };
            let sol = solve_milp(&instance.model, &cfg).unwrap_or_else(|e| {
                panic!("trial {trial} scheme {scheme}: {e}");
            });
            assert_eq!(sol.status, MilpStatus::Optimal, "trial {trial} scheme {scheme}");

            // Compare embedded follower objectives against direct clearings.
            let (dam, per_scenario) = clear_all(&case, scheme, &profile).unwrap();
            let sym = &instance.symbols;
            let dam_embedded: f64 = (0..case.units.len())
                .map(|u| {
                    let b = profile.price(&case, ResourceRef::Unit(u), BidSlot::Dam).unwrap();
                    b * sol.values[sym.dam_g[u].0]
                })
                .sum();
            assert!(
                (dam_embedded - dam.objective).abs() < 1e-6,
                "trial {trial} scheme {scheme}: embedded day-ahead {} vs direct {}",
                dam_embedded,
                dam.objective
            );
            for blk in &sym.blocks {
                let direct = per_scenario[blk.scenario]
                    .iter()
                    .find(|m| m.scope == blk.scope)
                    .unwrap();
                let bids =
                    tsodso::clearing::asm_prices(&case, scheme, &profile, blk.scope).unwrap();
                let mut embedded = 0.0;
                for u in 0..case.units.len() {
                    if let Some(v) = blk.up[u] {
                        embedded += bids.up[u] * sol.values[v.0];
                    }
                    if let Some(v) = blk.down[u] {
                        embedded -= bids.down[u] * sol.values[v.0];
                    }
                }
                for l in 0..case.loads.len() {
                    if let Some(v) = blk.curt[l] {
                        embedded += bids.curtail[l] * sol.values[v.0];
                    }
                }
                assert!(
                    (embedded - direct.objective).abs() < 1e-6,
                    "trial {trial} scheme {scheme} {:?} s{}: embedded {} vs direct {}",
                    blk.scope,
                    blk.scenario,
                    embedded,
                    direct.objective
                );
            }
        }
    }
}

/// The MPEC's linearized objective value must equal the profit of the
/// extracted strategy evaluated through the direct clearing cascade.
#[test]
fn objective_fidelity_on_random_small_cases() {
    let mut r = rng(77);
    for trial in 0..5 {
        let params = common::RandomCaseParams {
            kd: 1,
            units_t: 2,
            units_d: 1,
            flex_loads_t: 1,
            scenarios: 2,
            lines: if trial % 2 == 0 { 1 } else { 0 },
            candidates: 2,
            d_lines: false,
            balanced_signs: false,
        };
        let case = common::feasible_random_case(&mut r, &params, &[Scheme::A]);
        let rivals = StrategyProfile::init(&case, Scheme::A);
        for agg in 0..case.aggregators.len() {
            let instance = build_mpec(&case, Scheme::A, agg, &rivals).unwrap();
            let ws = warm_start_from_clearing(&case, &instance, &rivals).unwrap();
            let cfg = MilpConfig {
                warm_start: Some(ws),
                ..Default::default()
            };
            let sol = match solve_milp(&instance.model, &cfg) {
                Ok(s) if s.status == MilpStatus::Optimal => s,
                other => panic!("trial {trial} agg {agg}: {other:?}"),
            };
            let own = extract_strategy(&instance, &sol).unwrap();
            let mut full = rivals.clone();
            full.adopt(&case, agg, &own);
            let (dam, per_scenario) = clear_all(&case, Scheme::A, &full).unwrap();
            let direct =
                aggregator_profit(&case, Scheme::A, agg, &dam, &per_scenario, &full).unwrap();
            // The two routes agree when the clearing's deterministic
            // tie-break lands on the same follower optimum the optimistic
            // MPEC picked; random continuous costs make ties negligible.
            assert!(
                (sol.objective - direct).abs() < 1e-4,
                "trial {trial} agg {agg}: mpec {} vs cascade {}",
                sol.objective,
                direct
            );
            // Best-response dominance: no enumerated strategy beats it.
            assert!(
                sol.objective >= direct - 1e-4,
                "mpec optimum must dominate its own extracted strategy"
            );
        }
    }
}

/// A two-bus toy with one congested line: complementarity pins the flow dual
/// and the embedded clearing matches the direct one (sanity for transit
/// handling inside the KKT blocks).
#[test]
fn congested_line_kkt_matches_direct() {
    let case = CaseBuilder::new()
        .node("t1", Subsystem::Transmission)
        .node("t2", Subsystem::Transmission)
        .line("l", Subsystem::Transmission, "t1", "t2", 52.0, vec![1.0, 0.0])
        .line("lm", Subsystem::Transmission, "t2", "t1", 52.0, vec![-1.0, 0.0])
        .unit("g1", "t1", "A1", 100.0, 40.0)
        .flexible_load("t2", "A1", 0.5, 60.0, &[70.0])
        .ladder("g1", MarketRole::DamSale, &[44.0])
        .ladder("g1", MarketRole::UpRegulation, &[66.0])
        .ladder("g1", MarketRole::DownRegulation, &[20.0])
        .ladder("t2", MarketRole::LoadCurtailment, &[150.0])
        .aggregator("A1", &["g1"], &["t2"])
        .build();
    let rivals = StrategyProfile::default();
    let instance = build_mpec(&case, Scheme::A, 0, &rivals).unwrap();
    let sol = solve_milp(&instance.model, &MilpConfig::default()).unwrap();
    assert_eq!(sol.status, MilpStatus::Optimal);
    let profile = StrategyProfile::init(&case, Scheme::A);
    let (dam, per) = clear_all(&case, Scheme::A, &profile).unwrap();
    let profit = aggregator_profit(&case, Scheme::A, 0, &dam, &per, &profile).unwrap();
    assert!(
        (sol.objective - profit).abs() < 1e-6,
        "mpec {} vs direct {}",
        sol.objective,
        profit
    );
    // The congested forward line carries exactly its limit in the embedded
    // solution: dispatch 60 down-regulated by 8.
    let blk = &instance.symbols.blocks[0];
    let down = blk.down[0].unwrap();
    assert!((sol.values[down.0] - 8.0).abs() < 1e-6);
}

#[test]
fn missing_rival_price_is_reported() {
    let mut r = rng(3);
    let case = common::random_case(&mut r, &common::RandomCaseParams::default());
    let empty = StrategyProfile::default();
    let err = build_mpec(&case, Scheme::A, 0, &empty).unwrap_err();
    assert!(format!("{err}").contains("missing bid price"));
}
