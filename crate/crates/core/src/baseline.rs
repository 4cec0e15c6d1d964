//! Reference paths: the monolithic coordinated model solved as one
//! mixed-binary cone program, and uncoordinated operation for savings
//! comparisons.

use serde::Serialize;
use thiserror::Error;

use crate::coordinator::{run_method, ConvergenceTrace, CoordError, Method, SlrConfig};
use crate::conic::{extract_row_multiplier, solve_cone, ConeProgram, SolveStatus};
use crate::dso::{build_dso_into, dso_welfare, extract_dso, solve_dso, DsoError, DsoMultiplierView, DsoSolution, DsoVars};
use crate::grid::{CoordCase, GridError};
use crate::milp::{solve_milp, BnBConfig, MilpError, MixedBinaryProgram};
use crate::tso::{balance_label, build_tso_into, extract_tso, power_base, solve_tso_fixed, tso_objective, PricingMode, TsoError, TsoMode, TsoSolution, TsoVars};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Dso(#[from] DsoError),
    #[error(transparent)]
    Tso(#[from] TsoError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error("re-solve with fixed commitments failed: {0:?}")]
    Resolve(SolveStatus),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceSolution {
    pub tso: TsoSolution,
    pub dsos: Vec<DsoSolution>,
    /// LMP at each distribution system's host bus (currency/MW), DSO order.
    pub lmps: Vec<f64>,
    pub welfare: f64,
    pub pricing_mode: PricingMode,
    pub nodes_explored: usize,
}

/// The coordinated model with its variable maps.
#[derive(Debug, Clone, PartialEq)]
pub struct MonolithicProgram {
    pub milp: MixedBinaryProgram,
    pub tso: TsoVars,
    pub dsos: Vec<DsoVars>,
}

pub fn dso_prefix(j: usize) -> String {
    format!("D{j}.")
}

pub const TSO_PREFIX: &str = "T.";

/// Builds the transmission model and every distribution model in one
/// program with hard exchange couplings.
pub fn build_monolithic(case: &CoordCase, pricing: PricingMode) -> Result<MonolithicProgram, BaselineError> {
    let base = power_base(case);
    let mut prog = ConeProgram::new();
    let tso = build_tso_into(&mut prog, TSO_PREFIX, case, TsoMode::Strict, None, pricing)?;
    let mut dsos = Vec::new();
    for (j, ds) in case.distribution_systems.iter().enumerate() {
        let link = case.link_for(&ds.id).ok_or_else(|| GridError::MissingInterface(ds.id.clone()))?;
        let vars = build_dso_into(&mut prog, &dso_prefix(j), ds, link, base, &DsoMultiplierView::default(), false)?;
        prog.add_row(format!("couple_buy[{}]", ds.id), vec![(vars.buy, 1.0), (tso.buy[j], -1.0)], 0.0);
        prog.add_row(format!("couple_sell[{}]", ds.id), vec![(vars.sell, 1.0), (tso.sell[j], -1.0)], 0.0);
        dsos.push(vars);
    }
    let milp = MixedBinaryProgram::new(prog, tso.commit.clone());
    Ok(MonolithicProgram { milp, tso, dsos })
}

/// Solves the coordinated model to proven optimality and prices it with the
/// balance multipliers of the cone program at the optimal commitment.
pub fn solve_monolithic(case: &CoordCase, pricing: PricingMode, cfg: &BnBConfig) -> Result<ReferenceSolution, BaselineError> {
    let built = build_monolithic(case, pricing)?;
    let inc = solve_milp(&built.milp, cfg)?;
    let mut fixed = built.milp.base.clone();
    for &b in &built.milp.binaries {
        fixed.fix(b, inc.solution.primal[b].round());
    }
    let sol = solve_cone(&fixed, &cfg.solver);
    if !sol.is_optimal() {
        return Err(BaselineError::Resolve(sol.status));
    }
    let base = power_base(case);
    let mut lmps = Vec::new();
    for &h in &built.tso.hosts {
        let label = balance_label(TSO_PREFIX, &case.transmission.buses[h].id);
        // The balance multiplier is d(welfare)/d(load), the negated price.
        let y = extract_row_multiplier(&fixed, &sol, &label, base.base_mva).map_err(|_| BaselineError::Resolve(sol.status))?;
        lmps.push(-y);
    }
    let mut tso = extract_tso(case, &built.tso, &sol, pricing);
    let mut dsos = Vec::new();
    for (j, ds) in case.distribution_systems.iter().enumerate() {
        let mut d = extract_dso(ds, &built.dsos[j], base, &sol, lmps[j]);
        let common = d.sell.min(d.buy).max(0.0);
        d.net_exchanges();
        tso.tso_sell[j] -= common;
        tso.tso_buy[j] -= common;
        d.objective = dso_welfare(ds, base, &d, lmps[j]);
        dsos.push(d);
    }
    tso.objective = tso_objective(case, &tso, pricing);
    Ok(ReferenceSolution { tso, dsos, lmps, welfare: sol.objective, pricing_mode: pricing, nodes_explored: inc.nodes_explored })
}

/// Classical Lagrangian relaxation of the coupled balances and exchange
/// couplings: no penalty, every subproblem solved to optimality, stepsize
/// `s0 / sqrt(k)`. The trace has the same shape as the coordinator's.
pub fn run_subgradient(case: &CoordCase, cfg: &SlrConfig, bnb: &BnBConfig) -> Result<ConvergenceTrace, CoordError> {
    run_method(case, cfg, bnb, Method::Subgradient)
}

/// Operating costs of each side of the market (currency).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemCosts {
    /// Transmission generation cost plus payments for DSO exports.
    pub tso: f64,
    /// Distribution generation cost less exchange revenue, summed over DSOs.
    pub dso: f64,
    pub welfare: f64,
}

impl SystemCosts {
    /// Costs of a coordinated point with exchanges settled at `lmps`.
    pub fn coordinated(case: &CoordCase, tso: &TsoSolution, dsos: &[DsoSolution], lmps: &[f64], welfare: f64) -> Self {
        let gen_t: f64 = case.transmission.generators.iter().zip(&tso.gen_p).map(|(g, p)| g.offer_price * p).sum();
        let mut settlement = 0.0;
        let mut gen_d = 0.0;
        for ((ds, d), lam) in case.distribution_systems.iter().zip(dsos).zip(lmps) {
            settlement += lam * (d.sell - d.buy);
            gen_d += ds.generators.iter().zip(&d.gen_p).map(|(g, p)| g.incremental_cost * p).sum::<f64>();
        }
        Self { tso: gen_t + settlement, dso: gen_d - settlement, welfare }
    }
}

/// Each subsystem operated alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncoordinatedOutcome {
    pub tso: TsoSolution,
    pub dsos: Vec<DsoSolution>,
    /// Transmission welfare followed by every DSO's welfare.
    pub tso_welfare: f64,
    pub dso_welfare: Vec<f64>,
    pub costs: SystemCosts,
}

/// Solves every DSO with its exchanges forced to zero and the TSO without
/// any exchange variables.
pub fn uncoordinated_cost(case: &CoordCase, cfg: &BnBConfig) -> Result<UncoordinatedOutcome, BaselineError> {
    let base = power_base(case);
    let mut solved = Vec::new();
    for ds in &case.distribution_systems {
        let mut link = case.link_for(&ds.id).ok_or_else(|| GridError::MissingInterface(ds.id.clone()))?.clone();
        link.exchange_limit = 0.0;
        solved.push(solve_dso(ds, &link, base, &DsoMultiplierView::default(), false, &cfg.solver)?);
    }
    let mut alone = case.clone();
    alone.distribution_systems.clear();
    alone.interfaces.clear();
    let tso = solve_tso_fixed(&alone, &[], &[], PricingMode::Welfare, cfg)?;
    let dso_welfare: Vec<f64> = solved.iter().map(|d| d.objective).collect();
    let gen_t: f64 = case.transmission.generators.iter().zip(&tso.gen_p).map(|(g, p)| g.offer_price * p).sum();
    let gen_d: f64 = case
        .distribution_systems
        .iter()
        .zip(&solved)
        .map(|(ds, d)| ds.generators.iter().zip(&d.gen_p).map(|(g, p)| g.incremental_cost * p).sum::<f64>())
        .sum();
    let welfare = tso.objective + dso_welfare.iter().sum::<f64>();
    Ok(UncoordinatedOutcome {
        tso_welfare: tso.objective,
        tso,
        dsos: solved,
        dso_welfare,
        costs: SystemCosts { tso: gen_t, dso: gen_d, welfare },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SavingsReport {
    pub n_dsos: usize,
    pub tso_savings_pct: f64,
    pub dso_savings_pct: f64,
    pub cpu_seconds: f64,
}

fn pct(before: f64, after: f64) -> f64 {
    if before.abs() < 1e-12 {
        0.0
    } else {
        100.0 * (before - after) / before.abs()
    }
}

/// Relative cost reductions of coordinated over uncoordinated operation.
pub fn savings(n_dsos: usize, coordinated: &SystemCosts, uncoordinated: &SystemCosts, cpu_seconds: f64) -> SavingsReport {
    if coordinated.welfare < uncoordinated.welfare - 1e-6 * (1.0 + uncoordinated.welfare.abs()) {
        log::warn!("coordinated welfare {} is below uncoordinated welfare {}", coordinated.welfare, uncoordinated.welfare);
    }
    SavingsReport {
        n_dsos,
        tso_savings_pct: pct(uncoordinated.tso, coordinated.tso),
        dso_savings_pct: pct(uncoordinated.dso, coordinated.dso),
        cpu_seconds,
    }
}
