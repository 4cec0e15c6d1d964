//! Surrogate Lagrangian coordination of the transmission and distribution
//! subproblems, and the classical subgradient loop sharing its trace format.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use web_time::Instant;

use crate::dso::{dso_welfare, solve_dso, DsoError, DsoMultiplierView, DsoSolution};
use crate::grid::{CoordCase, DistributionSystem, GridError};
use crate::milp::{solve_milp, BnBConfig};
use crate::tso::{
    active_links, build_tso, extract_tso, local_injection, power_base, solve_tso_fixed, solve_tso_surrogate, surrogate_value, tso_objective,
    PricingMode, TsoError, TsoMode, TsoMultiplierView, TsoSolution,
};

/// Direction norms below this are treated as zero in the stepsize rule.
const ZERO_NORM: f64 = 1e-12;

/// Consecutive unmet surrogate tests that end a run.
const UNMET_STALL: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlrConfig {
    pub s0: f64,
    pub c0: f64,
    pub beta: f64,
    pub big_m: f64,
    pub r_exp: f64,
    pub c_max: f64,
    pub max_iters: usize,
    /// MW.
    pub tol_direction_norm: f64,
    /// Currency/MW; a run stops when no multiplier moves by more than this.
    /// Zero disables the test.
    pub tol_multiplier_delta: f64,
    /// Seconds; zero disables the limit.
    pub wall_clock_limit: f64,
    /// Iterations between duality-gap estimates; zero disables them.
    pub gap_every: usize,
    pub pricing: PricingMode,
    /// Initial LMP per distribution system; empty uses the mean generator cost.
    pub lambda0: Vec<f64>,
    /// Worker threads for the distribution solves; zero uses the default pool.
    pub threads: usize,
}

impl Default for SlrConfig {
    fn default() -> Self {
        Self {
            s0: 0.1,
            c0: 1.0,
            beta: 1.02,
            big_m: 20.0,
            r_exp: 0.05,
            c_max: 1e4,
            max_iters: 2000,
            tol_direction_norm: 0.1,
            tol_multiplier_delta: 0.0,
            wall_clock_limit: 0.0,
            gap_every: 10,
            pricing: PricingMode::Welfare,
            lambda0: Vec::new(),
            threads: 0,
        }
    }
}

impl SlrConfig {
    pub fn check(&self) -> Result<(), CoordError> {
        if !(self.s0 > 0.0) {
            return Err(CoordError::Config("s0 must be positive".into()));
        }
        self.check_common()
    }

    /// The subgradient baseline also accepts `s0 = 0`, which freezes the
    /// multipliers.
    fn check_for(&self, method: Method) -> Result<(), CoordError> {
        match method {
            Method::Surrogate => self.check(),
            Method::Subgradient if self.s0 >= 0.0 => self.check_common(),
            Method::Subgradient => Err(CoordError::Config("s0 must be non-negative".into())),
        }
    }

    fn check_common(&self) -> Result<(), CoordError> {
        let bad = |msg: &str| Err(CoordError::Config(msg.to_string()));
        if !(self.c0 >= 0.0) {
            return bad("c0 must be non-negative");
        }
        if !(self.beta > 1.0) {
            return bad("beta must exceed 1");
        }
        if !(self.big_m > 1.0) {
            return bad("big_m must exceed 1");
        }
        if !(self.r_exp > 0.0) {
            return bad("r_exp must be positive");
        }
        if !(self.c_max >= self.c0) {
            return bad("c_max must be at least c0");
        }
        if !(self.tol_direction_norm >= 0.0) || !(self.tol_multiplier_delta >= 0.0) || !(self.wall_clock_limit >= 0.0) {
            return bad("tolerances and limits must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CoordError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("iteration {k}: {source}")]
    Dso { k: usize, source: DsoError },
    #[error("iteration {k}: {source}")]
    Tso { k: usize, source: TsoError },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlrState {
    pub k: usize,
    pub lambda: Vec<f64>,
    pub psi_buy: Vec<f64>,
    pub psi_sell: Vec<f64>,
    pub stepsize: f64,
    pub penalty: f64,
    pub dso_solutions: Vec<DsoSolution>,
    pub tso_solution: TsoSolution,
    pub direction_norm: f64,
}

/// One row of a convergence trace. Multipliers, stepsize and penalty are the
/// values used during iteration `k`; residuals are those of its solutions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub surrogate_dual: f64,
    pub direction_norm: f64,
    pub lambda: Vec<f64>,
    pub psi_buy: Vec<f64>,
    pub psi_sell: Vec<f64>,
    /// Root-bus balance residual per distribution system (MW).
    pub violations: Vec<f64>,
    /// `p_buy(DSO) - p_buy(TSO)` per distribution system (MW).
    pub coupling_buy: Vec<f64>,
    /// `p_sell(DSO) - p_sell(TSO)` per distribution system (MW).
    pub coupling_sell: Vec<f64>,
    pub gap: Option<f64>,
    pub elapsed: f64,
    pub stepsize: f64,
    pub penalty: f64,
    pub surrogate_unmet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    DirectionTol,
    MultiplierTol,
    MaxIters,
    WallClock,
    SurrogateUnmetStall,
}

/// Coupling-feasible point restored from an iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimalEstimate {
    pub iteration: usize,
    pub tso: TsoSolution,
    pub dsos: Vec<DsoSolution>,
    /// Multipliers of the iterate the point was restored from.
    pub lambda: Vec<f64>,
    /// Welfare of the restored point; `None` when restoration failed.
    pub welfare: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
    pub terminal_status: TerminalStatus,
    pub final_estimate: PrimalEstimate,
    /// Host transmission bus of each distribution system.
    pub coupled_buses: Vec<String>,
    pub dso_ids: Vec<String>,
    pub config: SlrConfig,
}

/// Step-sizing parameter `1 - 1 / (M k^(1 - 1/k^r))`.
pub fn alpha_step(k: usize, big_m: f64, r: f64) -> Result<f64, CoordError> {
    if k < 1 {
        return Err(CoordError::Config("alpha_step needs k >= 1".into()));
    }
    let k = k as f64;
    Ok(1.0 - 1.0 / (big_m * k.powf(1.0 - 1.0 / k.powf(r))))
}

/// Mean offer or incremental cost over every generator in the case.
pub fn mean_generator_cost(case: &CoordCase) -> f64 {
    let mut costs: Vec<f64> = case.transmission.generators.iter().map(|g| g.offer_price).collect();
    for ds in &case.distribution_systems {
        costs.extend(ds.generators.iter().map(|g| g.incremental_cost));
    }
    if costs.is_empty() {
        0.0
    } else {
        costs.iter().sum::<f64>() / costs.len() as f64
    }
}

/// Root-bus balance residual `h` per distribution system (MW), using the
/// transmission generation and flows with the DSO-side exchanges. Inactive
/// interfaces report zero.
pub fn violation_at_root(tso: &TsoSolution, dsos: &[DsoSolution], case: &CoordCase) -> Result<Vec<f64>, GridError> {
    let hosts = case.host_indices()?;
    let active = active_links(case)?;
    let unit = case.power_unit();
    Ok(hosts
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            if !active[j] {
                return 0.0;
            }
            local_injection(case, tso, b) + dsos[j].sell - dsos[j].buy - case.transmission.buses[b].active_load * unit
        })
        .collect())
}

/// Relaxed-constraint residuals: root balances of active interfaces, then
/// buy couplings, then sell couplings (MW).
pub fn surrogate_direction(tso: &TsoSolution, dsos: &[DsoSolution], case: &CoordCase) -> Result<Vec<f64>, GridError> {
    let active = active_links(case)?;
    let h = violation_at_root(tso, dsos, case)?;
    let idx: Vec<usize> = (0..active.len()).filter(|&j| active[j]).collect();
    let mut out: Vec<f64> = idx.iter().map(|&j| h[j]).collect();
    out.extend(idx.iter().map(|&j| dsos[j].buy - tso.tso_buy[j]));
    out.extend(idx.iter().map(|&j| dsos[j].sell - tso.tso_sell[j]));
    Ok(out)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc + x * x).sqrt()
}

/// Unpenalized Lagrangian of the coordinated problem at the given point and
/// multipliers (currency). With every subproblem solved to optimality this
/// is the dual function value.
pub fn lagrangian(
    case: &CoordCase,
    tso: &TsoSolution,
    dsos: &[DsoSolution],
    lambda: &[f64],
    psi_buy: &[f64],
    psi_sell: &[f64],
    pricing: PricingMode,
) -> Result<f64, GridError> {
    let base = power_base(case);
    let active = active_links(case)?;
    let h = violation_at_root(tso, dsos, case)?;
    let mut value = tso_objective(case, tso, pricing);
    for (j, ds) in case.distribution_systems.iter().enumerate() {
        value += dso_welfare(ds, base, &dsos[j], 0.0);
        if active[j] {
            value += lambda[j] * h[j] + psi_buy[j] * (dsos[j].buy - tso.tso_buy[j]) + psi_sell[j] * (dsos[j].sell - tso.tso_sell[j]);
        }
    }
    Ok(value)
}

/// Dual function of the unpenalized relaxation: every subproblem solved to
/// optimality at the given multipliers, then the Lagrangian evaluated there.
pub fn dual_value(
    case: &CoordCase,
    lambda: &[f64],
    psi_buy: &[f64],
    psi_sell: &[f64],
    pricing: PricingMode,
    bnb: &BnBConfig,
) -> Result<f64, CoordError> {
    let n = case.distribution_systems.len();
    if lambda.len() != n || psi_buy.len() != n || psi_sell.len() != n {
        return Err(CoordError::Config(format!("multiplier vectors must have {n} entries")));
    }
    let views: Vec<DsoMultiplierView> =
        (0..n).map(|j| DsoMultiplierView { lambda_root: lambda[j], psi_buy: psi_buy[j], psi_sell: psi_sell[j], ..DsoMultiplierView::default() }).collect();
    let dsos = solve_dsos(case, &views, true, bnb, 0, 0)?;
    let view = TsoMultiplierView {
        lambda: lambda.to_vec(),
        psi_buy: psi_buy.to_vec(),
        psi_sell: psi_sell.to_vec(),
        penalty: 0.0,
        dso_buy_now: dsos.iter().map(|d| d.buy).collect(),
        dso_sell_now: dsos.iter().map(|d| d.sell).collect(),
        prev: seed_tso(case, &dsos),
    };
    let tso = solve_tso_exact(case, &view, pricing, bnb).map_err(|source| CoordError::Tso { k: 0, source })?;
    Ok(lagrangian(case, &tso, &dsos, lambda, psi_buy, psi_sell, pricing)?)
}

/// Welfare of a coordinated point (currency).
pub fn primal_welfare(case: &CoordCase, tso: &TsoSolution, dsos: &[DsoSolution], pricing: PricingMode) -> f64 {
    let base = power_base(case);
    tso_objective(case, tso, pricing) + case.distribution_systems.iter().zip(dsos).map(|(ds, d)| dso_welfare(ds, base, d, 0.0)).sum::<f64>()
}

/// Fixes the transmission-side exchanges to the DSO-side values (clipped to
/// the interface limits) and re-solves the transmission problem strictly.
pub fn restore_primal(case: &CoordCase, dsos: &[DsoSolution], pricing: PricingMode, bnb: &BnBConfig) -> Option<(TsoSolution, Vec<DsoSolution>, f64)> {
    let mut fixed = dsos.to_vec();
    for (j, ds) in case.distribution_systems.iter().enumerate() {
        let lim = case.link_for(&ds.id).map_or(0.0, |l| l.exchange_limit * case.power_unit());
        fixed[j].buy = fixed[j].buy.clamp(0.0, lim);
        fixed[j].sell = fixed[j].sell.clamp(0.0, lim);
    }
    let buy: Vec<f64> = fixed.iter().map(|d| d.buy).collect();
    let sell: Vec<f64> = fixed.iter().map(|d| d.sell).collect();
    let tso = solve_tso_fixed(case, &buy, &sell, pricing, bnb).ok()?;
    let welfare = primal_welfare(case, &tso, &fixed, pricing);
    Some((tso, fixed, welfare))
}

/// Relative gap between the iterate's Lagrangian value and the welfare of
/// its restored primal point; `None` when restoration fails.
pub fn estimate_gap(state: &SlrState, case: &CoordCase, pricing: PricingMode, bnb: &BnBConfig) -> Option<f64> {
    let (_, _, welfare) = restore_primal(case, &state.dso_solutions, pricing, bnb)?;
    let dual = lagrangian(case, &state.tso_solution, &state.dso_solutions, &state.lambda, &state.psi_buy, &state.psi_sell, pricing).ok()?;
    Some((dual - welfare) / (1.0 + welfare.abs()))
}

/// Initial multipliers, seed exchanges and parameters.
pub fn initialize(case: &CoordCase, cfg: &SlrConfig, bnb: &BnBConfig) -> Result<SlrState, CoordError> {
    initialize_for(case, cfg, bnb, Method::Surrogate)
}

fn initialize_for(case: &CoordCase, cfg: &SlrConfig, bnb: &BnBConfig, method: Method) -> Result<SlrState, CoordError> {
    cfg.check_for(method)?;
    let n = case.distribution_systems.len();
    let lambda = if cfg.lambda0.is_empty() {
        vec![mean_generator_cost(case); n]
    } else if cfg.lambda0.len() == n {
        cfg.lambda0.clone()
    } else {
        return Err(CoordError::Config(format!("lambda0 has {} entries for {n} distribution systems", cfg.lambda0.len())));
    };
    let views: Vec<DsoMultiplierView> = lambda.iter().map(|&l| DsoMultiplierView::priced(l)).collect();
    let dsos = solve_dsos(case, &views, false, bnb, cfg.threads, 0)?;
    let tso = seed_tso(case, &dsos);
    let dir = surrogate_direction(&tso, &dsos, case)?;
    Ok(SlrState {
        k: 0,
        psi_buy: vec![0.0; n],
        psi_sell: vec![0.0; n],
        lambda,
        stepsize: cfg.s0,
        penalty: cfg.c0,
        dso_solutions: dsos,
        tso_solution: tso,
        direction_norm: norm(&dir),
    })
}

/// Transmission point with nothing dispatched and exchanges mirrored from
/// the DSO side; the reference for the first surrogate test.
fn seed_tso(case: &CoordCase, dsos: &[DsoSolution]) -> TsoSolution {
    let t = &case.transmission;
    TsoSolution {
        commit: vec![false; t.generators.len()],
        gen_p: vec![0.0; t.generators.len()],
        flow: vec![0.0; t.lines.len()],
        angle: vec![0.0; t.buses.len()],
        tso_buy: dsos.iter().map(|d| d.buy).collect(),
        tso_sell: dsos.iter().map(|d| d.sell).collect(),
        ..TsoSolution::default()
    }
}

fn solve_dsos(
    case: &CoordCase,
    views: &[DsoMultiplierView],
    augmented: bool,
    bnb: &BnBConfig,
    threads: usize,
    k: usize,
) -> Result<Vec<DsoSolution>, CoordError> {
    let base = power_base(case);
    let solve_one = |(ds, view): (&DistributionSystem, &DsoMultiplierView)| {
        let link = case.link_for(&ds.id).ok_or_else(|| CoordError::Grid(GridError::MissingInterface(ds.id.clone())))?;
        solve_dso(ds, link, base, view, augmented, &bnb.solver).map_err(|source| CoordError::Dso { k, source })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let work = || case.distribution_systems.par_iter().zip(views.par_iter()).map(solve_one).collect::<Result<Vec<_>, _>>();
        if threads == 0 {
            work()
        } else {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| CoordError::Config(e.to_string()))?;
            pool.install(work)
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        case.distribution_systems.iter().zip(views).map(solve_one).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Augmented subproblems, surrogate-optimality acceptance, adaptive stepsize.
    Surrogate,
    /// Plain Lagrangian subproblems solved to optimality, stepsize `s0 / sqrt(k)`.
    Subgradient,
}

/// Runs the surrogate Lagrangian coordination loop.
pub fn run(case: &CoordCase, cfg: &SlrConfig, bnb: &BnBConfig) -> Result<ConvergenceTrace, CoordError> {
    run_method(case, cfg, bnb, Method::Surrogate)
}

pub fn run_method(case: &CoordCase, cfg: &SlrConfig, bnb: &BnBConfig, method: Method) -> Result<ConvergenceTrace, CoordError> {
    let start = Instant::now();
    let mut state = initialize_for(case, cfg, bnb, method)?;
    if method == Method::Subgradient {
        state.penalty = 0.0;
    }
    let active = active_links(case)?;
    let hosts = case.host_indices()?;
    let n = case.distribution_systems.len();
    let pricing = cfg.pricing;
    let mut records = vec![record(case, &state, pricing, None, start, false)?];
    let mut best: Option<PrimalEstimate> = None;

    let no_coupling = !active.iter().any(|&a| a);
    let mut status = TerminalStatus::MaxIters;
    let mut prev_norm = state.direction_norm;
    let mut unmet_run = 0;

    if no_coupling {
        status = TerminalStatus::DirectionTol;
    } else {
        for k in 1..=cfg.max_iters {
            state.k = k;
            let c = state.penalty;
            let views: Vec<DsoMultiplierView> = (0..n)
                .map(|j| DsoMultiplierView {
                    lambda_root: state.lambda[j],
                    psi_buy: state.psi_buy[j],
                    psi_sell: state.psi_sell[j],
                    penalty: c,
                    tso_buy_prev: state.tso_solution.tso_buy[j],
                    tso_sell_prev: state.tso_solution.tso_sell[j],
                    dso_buy_prev: state.dso_solutions[j].buy,
                    dso_sell_prev: state.dso_solutions[j].sell,
                })
                .collect();
            let dsos = solve_dsos(case, &views, true, bnb, cfg.threads, k)?;
            let view = TsoMultiplierView {
                lambda: state.lambda.clone(),
                psi_buy: state.psi_buy.clone(),
                psi_sell: state.psi_sell.clone(),
                penalty: c,
                dso_buy_now: dsos.iter().map(|d| d.buy).collect(),
                dso_sell_now: dsos.iter().map(|d| d.sell).collect(),
                prev: std::mem::take(&mut state.tso_solution),
            };
            let tso = match method {
                Method::Surrogate => solve_tso_surrogate(case, &view, pricing, bnb).map_err(|source| CoordError::Tso { k, source })?,
                Method::Subgradient => solve_tso_exact(case, &view, pricing, bnb).map_err(|source| CoordError::Tso { k, source })?,
            };
            let unmet = tso.surrogate_condition_unmet;
            unmet_run = if unmet { unmet_run + 1 } else { 0 };
            state.dso_solutions = dsos;
            state.tso_solution = tso;

            let dir = surrogate_direction(&state.tso_solution, &state.dso_solutions, case)?;
            let norm_k = norm(&dir);
            state.direction_norm = norm_k;
            match method {
                Method::Surrogate => {
                    if k > 1 && norm_k >= ZERO_NORM {
                        state.stepsize *= alpha_step(k - 1, cfg.big_m, cfg.r_exp)? * prev_norm / norm_k;
                    }
                    if unmet {
                        state.stepsize *= 0.5;
                    }
                }
                Method::Subgradient => state.stepsize = cfg.s0 / (k as f64).sqrt(),
            }
            prev_norm = norm_k;

            let gap = if cfg.gap_every > 0 && k % cfg.gap_every == 0 {
                let restored = restore_primal(case, &state.dso_solutions, pricing, bnb);
                let dual = lagrangian(case, &state.tso_solution, &state.dso_solutions, &state.lambda, &state.psi_buy, &state.psi_sell, pricing)?;
                restored.map(|(tso, dsos, welfare)| {
                    if best.as_ref().is_none_or(|b| b.welfare.is_none_or(|w| welfare > w)) {
                        best = Some(PrimalEstimate { iteration: k, tso, dsos, lambda: state.lambda.clone(), welfare: Some(welfare) });
                    }
                    (dual - welfare) / (1.0 + welfare.abs())
                })
            } else {
                None
            };
            records.push(record(case, &state, pricing, gap, start, unmet)?);

            if norm_k <= cfg.tol_direction_norm {
                status = TerminalStatus::DirectionTol;
                break;
            }
            if unmet_run >= UNMET_STALL {
                status = TerminalStatus::SurrogateUnmetStall;
                break;
            }
            if cfg.wall_clock_limit > 0.0 && start.elapsed().as_secs_f64() >= cfg.wall_clock_limit {
                status = TerminalStatus::WallClock;
                break;
            }

            // Dual descent on the maximization Lagrangian.
            let s = state.stepsize;
            let h = violation_at_root(&state.tso_solution, &state.dso_solutions, case)?;
            let mut max_delta: f64 = 0.0;
            for j in (0..n).filter(|&j| active[j]) {
                let rb = state.dso_solutions[j].buy - state.tso_solution.tso_buy[j];
                let rs = state.dso_solutions[j].sell - state.tso_solution.tso_sell[j];
                state.lambda[j] -= s * h[j];
                state.psi_buy[j] -= s * rb;
                state.psi_sell[j] -= s * rs;
                max_delta = max_delta.max((s * h[j]).abs()).max((s * rb).abs()).max((s * rs).abs());
            }
            if method == Method::Surrogate {
                state.penalty = (state.penalty * cfg.beta).min(cfg.c_max);
            }
            if cfg.tol_multiplier_delta > 0.0 && max_delta < cfg.tol_multiplier_delta {
                status = TerminalStatus::MultiplierTol;
                break;
            }
        }
    }

    let last = records.last().expect("initialization record");
    let final_estimate = match restore_primal(case, &state.dso_solutions, pricing, bnb) {
        Some((tso, dsos, welfare)) if best.as_ref().is_none_or(|b| b.welfare.is_none_or(|w| welfare >= w)) => {
            PrimalEstimate { iteration: last.k, tso, dsos, lambda: last.lambda.clone(), welfare: Some(welfare) }
        }
        _ => best.unwrap_or_else(|| PrimalEstimate {
            iteration: last.k,
            tso: state.tso_solution.clone(),
            dsos: state.dso_solutions.clone(),
            lambda: last.lambda.clone(),
            welfare: None,
        }),
    };
    Ok(ConvergenceTrace {
        records,
        terminal_status: status,
        final_estimate,
        coupled_buses: hosts.iter().map(|&b| case.transmission.buses[b].id.clone()).collect(),
        dso_ids: case.distribution_systems.iter().map(|d| d.id.clone()).collect(),
        config: cfg.clone(),
    })
}

/// Relaxed transmission problem solved to proven optimality.
fn solve_tso_exact(case: &CoordCase, view: &TsoMultiplierView, pricing: PricingMode, bnb: &BnBConfig) -> Result<TsoSolution, TsoError> {
    let built = build_tso(case, TsoMode::Relaxed, Some(view), pricing)?;
    let inc = solve_milp(&built.milp, bnb)?;
    let mut out = extract_tso(case, &built.vars, &inc.solution, pricing);
    out.surrogate_value = surrogate_value(case, &out, view, pricing);
    Ok(out)
}

fn record(case: &CoordCase, state: &SlrState, pricing: PricingMode, gap: Option<f64>, start: Instant, unmet: bool) -> Result<IterationRecord, GridError> {
    let tso = &state.tso_solution;
    let dsos = &state.dso_solutions;
    Ok(IterationRecord {
        k: state.k,
        surrogate_dual: lagrangian(case, tso, dsos, &state.lambda, &state.psi_buy, &state.psi_sell, pricing)?,
        direction_norm: state.direction_norm,
        lambda: state.lambda.clone(),
        psi_buy: state.psi_buy.clone(),
        psi_sell: state.psi_sell.clone(),
        violations: violation_at_root(tso, dsos, case)?,
        coupling_buy: dsos.iter().zip(&tso.tso_buy).map(|(d, t)| d.buy - t).collect(),
        coupling_sell: dsos.iter().zip(&tso.tso_sell).map(|(d, t)| d.sell - t).collect(),
        gap,
        elapsed: start.elapsed().as_secs_f64(),
        stepsize: state.stepsize,
        penalty: state.penalty,
        surrogate_unmet: unmet,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_at_one_is_one_minus_inverse_m() {
        assert_eq!(alpha_step(1, 2.0, 0.3).unwrap(), 0.5);
        assert!(alpha_step(0, 2.0, 0.3).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SlrConfig { s0: 0.0, ..SlrConfig::default() };
        assert!(matches!(cfg.check(), Err(CoordError::Config(_))));
    }
}
