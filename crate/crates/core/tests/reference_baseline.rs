mod common;

use common::{enumerate_binaries, rng};
use rand::Rng;
use tdcoord::baseline::{build_monolithic, savings, solve_monolithic, uncoordinated_cost, SystemCosts};
use tdcoord::coordinator::{dual_value, run, SlrConfig};
use tdcoord::dso::{solve_dso, DsoMultiplierView};
use tdcoord::grid::{illustrative_case, random_case, validate, CoordCase, RandomCaseSpec};
use tdcoord::milp::BnBConfig;
use tdcoord::tso::{power_base, solve_tso_fixed, PricingMode};

fn bnb() -> BnBConfig {
    BnBConfig::default()
}

#[test]
fn random_cases_are_valid() {
    for seed in 0..30 {
        let case = random_case(&RandomCaseSpec::default(), seed);
        let report = validate(&case);
        assert!(report.is_clean(), "seed {seed}: {:?}", report.findings);
    }
}

#[test]
fn monolithic_matches_commitment_enumeration() {
    let spec = RandomCaseSpec { max_buses: 4, max_generators: 8, max_dsos: 3, max_feeder_buses: 3 };
    for seed in 0..20 {
        let case = random_case(&spec, 1000 + seed);
        let built = build_monolithic(&case, PricingMode::Welfare).unwrap();
        assert!(built.milp.binaries.len() <= 8);
        let oracle = enumerate_binaries(&built.milp.base, &built.milp.binaries).expect("random cases are feasible");
        let r = solve_monolithic(&case, PricingMode::Welfare, &bnb()).unwrap();
        assert!((r.welfare - oracle).abs() <= 1e-5 * oracle.abs().max(1.0), "seed {seed}: {} vs {oracle}", r.welfare);
    }
}

#[test]
fn two_generator_toy_matches_four_patterns() {
    let mut case = illustrative_case();
    case.distribution_systems.clear();
    case.interfaces.clear();
    case.transmission.lines.clear();
    case.transmission.buses.truncate(1);
    case.transmission.buses[0].active_load = 50.0;
    for g in &mut case.transmission.generators {
        g.bus = "1".into();
        g.p_max = 40.0;
    }
    let built = build_monolithic(&case, PricingMode::Welfare).unwrap();
    assert_eq!(built.milp.binaries.len(), 2);
    let oracle = enumerate_binaries(&built.milp.base, &built.milp.binaries).unwrap();
    let r = solve_monolithic(&case, PricingMode::Welfare, &bnb()).unwrap();
    assert!((r.welfare - oracle).abs() < 1e-6 * oracle.abs());
    // 40 MW at 6 plus 10 MW at 16.
    let expected = 50.0 * 50.0 - 40.0 * 6.0 - 10.0 * 16.0;
    assert!((r.welfare - expected).abs() < 1e-4, "{}", r.welfare);
}

#[test]
fn decoupled_case_equals_independent_solves() {
    let mut case = illustrative_case();
    for l in &mut case.interfaces {
        l.exchange_limit = 0.0;
    }
    // Transmission generation alone must cover its load.
    for g in &mut case.transmission.generators {
        g.p_max = 200.0;
    }
    let r = solve_monolithic(&case, PricingMode::Welfare, &bnb()).unwrap();
    let alone = uncoordinated_cost(&case, &bnb()).unwrap();
    assert!((r.welfare - alone.costs.welfare).abs() < 1e-6 * (1.0 + r.welfare.abs()), "{} vs {}", r.welfare, alone.costs.welfare);
    for d in &r.dsos {
        assert!(d.buy.abs() < 1e-6 && d.sell.abs() < 1e-6);
    }
}

#[test]
fn coupling_equalities_hold_at_the_reference() {
    let case = illustrative_case();
    let r = solve_monolithic(&case, PricingMode::Welfare, &bnb()).unwrap();
    for (j, d) in r.dsos.iter().enumerate() {
        assert!((d.buy - r.tso.tso_buy[j]).abs() < 1e-6);
        assert!((d.sell - r.tso.tso_sell[j]).abs() < 1e-6);
    }
}

/// Interior committed generators are marginal: their offer equals the LMP of
/// their bus. Only host buses carry an extracted LMP.
#[test]
fn lmps_equal_offers_of_interior_generators() {
    for seed in 0..10 {
        let case = random_case(&RandomCaseSpec::default(), 2000 + seed);
        let r = solve_monolithic(&case, PricingMode::Welfare, &bnb()).unwrap();
        let hosts = case.host_indices().unwrap();
        for (i, g) in case.transmission.generators.iter().enumerate() {
            let p = r.tso.gen_p[i];
            if !r.tso.commit[i] || p < g.p_min + 1e-4 || p > g.p_max - 1e-4 {
                continue;
            }
            let b = case.transmission.bus_index(&g.bus).unwrap();
            if let Some(j) = hosts.iter().position(|&h| h == b) {
                assert!((r.lmps[j] - g.offer_price).abs() < 1e-5, "seed {seed} {}: lmp {} offer {}", g.id, r.lmps[j], g.offer_price);
            }
        }
    }
}

#[test]
fn dual_values_bound_the_monolithic_welfare() {
    let case = illustrative_case();
    let opt = solve_monolithic(&case, PricingMode::Welfare, &bnb()).unwrap().welfare;
    let mut r = rng(11);
    for _ in 0..5 {
        let lambda: Vec<f64> = (0..2).map(|_| r.random_range(0.0..40.0)).collect();
        let psi_b: Vec<f64> = (0..2).map(|_| r.random_range(-10.0..10.0)).collect();
        let psi_s: Vec<f64> = (0..2).map(|_| r.random_range(-10.0..10.0)).collect();
        let q = dual_value(&case, &lambda, &psi_b, &psi_s, PricingMode::Welfare, &bnb()).unwrap();
        assert!(q >= opt - 1e-6, "dual {q} below optimum {opt} at {lambda:?}");
    }
}

#[test]
fn optimal_multipliers_close_the_gap() {
    let case = illustrative_case();
    let opt = solve_monolithic(&case, PricingMode::Welfare, &bnb()).unwrap();
    let q = dual_value(&case, &opt.lmps, &[0.0, 0.0], &[0.0, 0.0], PricingMode::Welfare, &bnb()).unwrap();
    assert!((q - opt.welfare) / opt.welfare.abs() < 1e-4, "{q} vs {}", opt.welfare);
}

#[test]
fn monolithic_bounds_restored_coordination() {
    let case = illustrative_case();
    let opt = solve_monolithic(&case, PricingMode::Welfare, &bnb()).unwrap();
    let trace = run(&case, &SlrConfig::default(), &bnb()).unwrap();
    let w = trace.final_estimate.welfare.expect("restoration succeeds");
    assert!(opt.welfare >= w - 1e-6 * (1.0 + w.abs()), "{} < {w}", opt.welfare);
}

#[test]
fn uncoordinated_illustrative_transmission_is_short() {
    // Transmission capacity is 90 MW against 300 MW of load.
    let case = illustrative_case();
    assert!(uncoordinated_cost(&case, &bnb()).is_err());
    let base = power_base(&case);
    let ds = &case.distribution_systems[0];
    let mut link = case.link_for(&ds.id).unwrap().clone();
    link.exchange_limit = 0.0;
    let d = solve_dso(ds, &link, base, &DsoMultiplierView::default(), false, &bnb().solver).unwrap();
    assert!((d.gen_p[0] - 10.0).abs() < 1e-5, "{:?}", d.gen_p);
}

fn self_sufficient() -> CoordCase {
    let mut case = illustrative_case();
    for g in &mut case.transmission.generators {
        g.p_max = 400.0;
    }
    case
}

#[test]
fn coordination_never_loses_to_isolation() {
    let case = self_sufficient();
    let opt = solve_monolithic(&case, PricingMode::Welfare, &bnb()).unwrap();
    let alone = uncoordinated_cost(&case, &bnb()).unwrap();
    assert!(opt.welfare >= alone.costs.welfare - 1e-6 * (1.0 + alone.costs.welfare.abs()));
    let coord = SystemCosts::coordinated(&case, &opt.tso, &opt.dsos, &opt.lmps, opt.welfare);
    let s = savings(2, &coord, &alone.costs, 0.0);
    assert!(s.tso_savings_pct.is_finite() && s.dso_savings_pct.is_finite());
}

#[test]
fn identical_inputs_save_nothing() {
    let case = self_sufficient();
    let alone = uncoordinated_cost(&case, &bnb()).unwrap();
    let s = savings(2, &alone.costs, &alone.costs, 1.5);
    assert_eq!((s.tso_savings_pct, s.dso_savings_pct, s.cpu_seconds), (0.0, 0.0, 1.5));
}

#[test]
fn zero_load_costs_nothing() {
    let mut case = self_sufficient();
    for b in &mut case.transmission.buses {
        b.active_load = 0.0;
    }
    for ds in &mut case.distribution_systems {
        for b in &mut ds.buses {
            b.active_load = 0.0;
        }
        for g in &mut ds.generators {
            g.p_min = 0.0;
        }
    }
    for g in &mut case.transmission.generators {
        g.p_min = 0.0;
    }
    let alone = uncoordinated_cost(&case, &bnb()).unwrap();
    assert!(alone.costs.tso.abs() < 1e-6 && alone.costs.dso.abs() < 1e-6, "{:?}", alone.costs);
    let t = solve_tso_fixed(&case, &[0.0, 0.0], &[0.0, 0.0], PricingMode::Welfare, &bnb()).unwrap();
    assert!(t.gen_p.iter().all(|p| p.abs() < 1e-6));
}
