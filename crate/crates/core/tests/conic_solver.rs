mod common;

use common::{primal_violation, rng, RandomBallSocp, RandomLp};
use proptest::prelude::*;
use tdcoord::conic::{extract_row_multiplier, solve_cone, ConeProgram, SolveStatus, ToleranceSet};

fn tol() -> ToleranceSet {
    ToleranceSet::default()
}

#[test]
fn five_variable_lp_matches_vertex_enumeration() {
    let mut r = rng(7);
    let lp = RandomLp::generate(&mut r, 5, 3);
    let sol = solve_cone(&lp.program(), &tol());
    assert_eq!(sol.status, SolveStatus::Optimal);
    let best = lp.vertex_optimum().expect("feasible by construction");
    assert!((sol.objective - best).abs() <= 1e-6 * (1.0 + best.abs()), "{} vs {best}", sol.objective);
}

#[test]
fn multiplier_is_scaled_to_currency_per_mw() {
    let mut p = ConeProgram::new();
    let g = p.add_var("g", 0.0, 5.0, -16.0 * 100.0);
    p.add_row("balance", vec![(g, 1.0)], 1.0);
    let sol = solve_cone(&p, &tol());
    let m = extract_row_multiplier(&p, &sol, "balance", 100.0).unwrap();
    assert!((m + 16.0).abs() < 1e-6);
    assert!(extract_row_multiplier(&p, &sol, "nope", 100.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn lp_matches_vertex_enumeration(seed in any::<u64>(), n in 2usize..=6, m in 1usize..=3) {
        let m = m.min(n - 1);
        let lp = RandomLp::generate(&mut rng(seed), n, m);
        let prog = lp.program();
        let sol = solve_cone(&prog, &tol());
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        let best = lp.vertex_optimum().unwrap();
        prop_assert!((sol.objective - best).abs() <= 1e-6 * (1.0 + best.abs()), "{} vs {}", sol.objective, best);
        prop_assert!(primal_violation(&prog, &sol.primal) <= 1e-7);
        let gap = (sol.objective - sol.dual_objective).abs() / (1.0 + sol.objective.abs());
        prop_assert!(gap <= 1e-8);
    }

    #[test]
    fn ball_socp_matches_closed_form(seed in any::<u64>(), n in 2usize..=6, m in 0usize..=2) {
        let m = m.min(n - 1);
        let inst = RandomBallSocp::generate(&mut rng(seed), n, m);
        let prog = inst.program();
        let sol = solve_cone(&prog, &tol());
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        let expected = inst.closed_form();
        prop_assert!((sol.objective - expected).abs() <= 1e-6 * (1.0 + expected.abs()), "{} vs {}", sol.objective, expected);
        prop_assert!(primal_violation(&prog, &sol.primal) <= 1e-7);
        prop_assert!(sol.residuals.primal_infeasibility <= 1e-7);
        prop_assert!(sol.residuals.dual_infeasibility <= 1e-7);
        prop_assert!(sol.residuals.relative_gap <= 1e-7);
    }

    #[test]
    fn multipliers_match_finite_differences(seed in any::<u64>(), n in 3usize..=6) {
        let lp = RandomLp::generate(&mut rng(seed), n, 2);
        let prog = lp.program();
        let sol = solve_cone(&prog, &tol());
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        let eps = 1e-5;
        for i in 0..prog.rows.len() {
            let mut up = prog.clone();
            up.rows[i].rhs += eps;
            let mut down = prog.clone();
            down.rows[i].rhs -= eps;
            let (su, sd) = (solve_cone(&up, &tol()), solve_cone(&down, &tol()));
            prop_assert!(su.is_optimal() && sd.is_optimal());
            let fd = (su.objective - sd.objective) / (2.0 * eps);
            let m = sol.eq_multipliers[i];
            prop_assert!((fd - m).abs() <= 1e-4f64.max(1e-3 * m.abs()), "row {}: fd {} vs {}", i, fd, m);
        }
    }
}
