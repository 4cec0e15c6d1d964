use tdcoord::conic::solve_cone;
use tdcoord::grid::{illustrative_case, CoordCase, TransmissionBus};
use tdcoord::milp::{solve_milp, BnBConfig};
use tdcoord::tso::{
    build_tso, extract_tso, solve_tso_fixed, solve_tso_surrogate, surrogate_value, tso_objective, PricingMode, TsoError, TsoMode, TsoMultiplierView,
    TsoSolution,
};

fn bnb() -> BnBConfig {
    BnBConfig::default()
}

fn view(lambda: f64, psi: f64, penalty: f64, sell: f64) -> TsoMultiplierView {
    TsoMultiplierView {
        lambda: vec![lambda; 2],
        psi_buy: vec![psi; 2],
        psi_sell: vec![psi; 2],
        penalty,
        dso_buy_now: vec![0.0; 2],
        dso_sell_now: vec![sell; 2],
        prev: TsoSolution { tso_buy: vec![0.0; 2], tso_sell: vec![sell; 2], gen_p: vec![0.0; 2], flow: vec![0.0], angle: vec![0.0; 2], ..TsoSolution::default() },
    }
}

/// The known coordinated optimum seen from the transmission side.
fn known_optimum() -> TsoSolution {
    TsoSolution {
        commit: vec![true, true],
        gen_p: vec![65.0, 15.0],
        flow: vec![75.0],
        angle: vec![0.0, -0.0075],
        tso_buy: vec![0.0, 0.0],
        tso_sell: vec![110.0, 110.0],
        ..TsoSolution::default()
    }
}

fn solve_relaxed(case: &CoordCase, v: &TsoMultiplierView) -> (f64, TsoSolution) {
    let built = build_tso(case, TsoMode::Relaxed, Some(v), PricingMode::Welfare).unwrap();
    let inc = solve_milp(&built.milp, &bnb()).unwrap();
    (inc.objective, extract_tso(case, &built.vars, &inc.solution, PricingMode::Welfare))
}

#[test]
fn zero_multipliers_reduce_to_the_transmission_objective() {
    let case = illustrative_case();
    let v = view(0.0, 0.0, 0.0, 110.0);
    let (obj, sol) = solve_relaxed(&case, &v);
    let o_t = tso_objective(&case, &sol, PricingMode::Welfare);
    assert!((obj - o_t).abs() < 1e-6 * (1.0 + o_t.abs()), "{obj} vs {o_t}");
    assert!((surrogate_value(&case, &sol, &v, PricingMode::Welfare) - o_t).abs() < 1e-9);
    // Nothing pays for transmission generation without a price.
    assert!(sol.gen_p.iter().all(|p| p.abs() < 1e-6), "{:?}", sol.gen_p);
}

#[test]
fn surrogate_value_prices_a_five_mw_imbalance() {
    let case = illustrative_case();
    let mut v = view(3.0, 0.0, 0.0, 110.0);
    let mut sol = known_optimum();
    v.dso_sell_now[0] = 115.0;
    sol.tso_sell[0] = 115.0;
    let o_t = tso_objective(&case, &sol, PricingMode::Welfare);
    let value = surrogate_value(&case, &sol, &v, PricingMode::Welfare);
    assert!((value - (o_t + 15.0)).abs() < 1e-9, "{value} vs {}", o_t + 15.0);
}

#[test]
fn zero_residuals_annihilate_any_multipliers() {
    let case = illustrative_case();
    let sol = known_optimum();
    let o_t = tso_objective(&case, &sol, PricingMode::Welfare);
    for (l, p, c) in [(16.0, 0.0, 0.0), (-7.0, 3.0, 5.0), (40.0, -2.5, 1e4)] {
        let v = view(l, p, c, 110.0);
        assert!((surrogate_value(&case, &sol, &v, PricingMode::Welfare) - o_t).abs() < 1e-9);
    }
}

#[test]
fn optimal_previous_point_leaves_the_condition_unmet() {
    // Without a penalty the relaxed objective does not depend on `prev`.
    let case = illustrative_case();
    let mut v = view(10.0, 0.0, 0.0, 110.0);
    let (_, best) = solve_relaxed(&case, &v);
    v.prev = best.clone();
    let sol = solve_tso_surrogate(&case, &v, PricingMode::Welfare, &bnb()).unwrap();
    assert!(sol.surrogate_condition_unmet);
    let (a, b) = (surrogate_value(&case, &sol, &v, PricingMode::Welfare), surrogate_value(&case, &best, &v, PricingMode::Welfare));
    assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()));
}

#[test]
fn accepted_incumbent_strictly_improves() {
    let case = illustrative_case();
    let v = view(10.0, 0.0, 1.0, 110.0);
    let prev_value = surrogate_value(&case, &v.prev, &v, PricingMode::Welfare);
    let sol = solve_tso_surrogate(&case, &v, PricingMode::Welfare, &bnb()).unwrap();
    assert!(!sol.surrogate_condition_unmet);
    assert!(sol.surrogate_value > prev_value + 1e-9 * (1.0 + prev_value.abs()), "{} vs {prev_value}", sol.surrogate_value);
    let (_, best) = solve_relaxed(&case, &v);
    assert!(sol.surrogate_value <= surrogate_value(&case, &best, &v, PricingMode::Welfare) + 1e-6);
}

#[test]
fn grossly_violated_previous_point_is_beaten_at_once() {
    let case = illustrative_case();
    let mut v = view(10.0, 0.0, 1.0, 110.0);
    v.prev.flow = vec![-500.0];
    let sol = solve_tso_surrogate(&case, &v, PricingMode::Welfare, &bnb()).unwrap();
    assert!(!sol.surrogate_condition_unmet);
}

#[test]
fn another_slack_bus_gives_the_same_flows() {
    let case = illustrative_case();
    let a = solve_tso_fixed(&case, &[0.0, 0.0], &[110.0, 110.0], PricingMode::Welfare, &bnb()).unwrap();
    let mut swapped = case.clone();
    swapped.transmission.buses.swap(0, 1);
    let b = solve_tso_fixed(&swapped, &[0.0, 0.0], &[110.0, 110.0], PricingMode::Welfare, &bnb()).unwrap();
    assert_eq!(a.angle[0], 0.0);
    assert_eq!(b.angle[0], 0.0);
    assert!((a.flow[0] - b.flow[0]).abs() < 1e-6);
    // Bus "1" is second in the swapped case; the angle difference is kept.
    assert!(((a.angle[0] - a.angle[1]) - (b.angle[1] - b.angle[0])).abs() < 1e-9);
}

#[test]
fn all_committed_program_has_no_integrality_gap() {
    let case = illustrative_case();
    let mut built = build_tso(&case, TsoMode::Strict, None, PricingMode::Welfare).unwrap();
    built.fix_exchanges(&[0.0, 0.0], &[110.0, 110.0]);
    for &x in &built.vars.commit {
        built.milp.base.fix(x, 1.0);
    }
    let milp = solve_milp(&built.milp, &bnb()).unwrap();
    let cone = solve_cone(&built.milp.base, &bnb().solver);
    assert!((milp.objective - cone.objective).abs() < 1e-8 * (1.0 + cone.objective.abs()));
}

#[test]
fn disconnected_transmission_is_rejected() {
    let mut case = illustrative_case();
    case.transmission.buses.push(TransmissionBus { id: "3".into(), active_load: 0.0, load_bid_price: 0.0, hosts_dso: None });
    assert!(matches!(build_tso(&case, TsoMode::Strict, None, PricingMode::Welfare), Err(TsoError::Disconnected(b)) if b == "3"));
}

#[test]
fn view_shape_is_checked() {
    let case = illustrative_case();
    let mut v = view(1.0, 0.0, 0.0, 0.0);
    v.lambda.pop();
    assert!(matches!(build_tso(&case, TsoMode::Relaxed, Some(&v), PricingMode::Welfare), Err(TsoError::ViewShape { .. })));
}

#[test]
fn literal_pricing_charges_transfers() {
    let case = illustrative_case();
    let sol = known_optimum();
    let w = tso_objective(&case, &sol, PricingMode::Welfare);
    let l = tso_objective(&case, &sol, PricingMode::Literal);
    // Offer price of each DSO defaults to its only generator's cost.
    assert!((w - l - (110.0 * 6.0 + 110.0 * 4.0)).abs() < 1e-9, "{w} {l}");
}
