//! Distribution-system welfare problem: branch-flow model with the conic
//! relaxation of the current equation, optionally augmented with the
//! coordination penalty terms.

use serde::Serialize;
use thiserror::Error;

use crate::conic::{solve_cone, Cone, ConeProgram, SolveStatus, SolverSolution, ToleranceSet, VarId};
use crate::grid::{DistributionSystem, GridError, InterfaceLink, Topology};

/// Smallest previous-violation magnitude used in a penalty coefficient (pu).
pub const PENALTY_FLOOR: f64 = 1e-6;

/// Marginal weight (currency/MW) of the absolute-value penalty
/// `(c/2) |prev| |current|`. Residuals enter in per unit, so `c` is in
/// currency per squared per-unit power.
pub fn penalty_weight(c: f64, prev_mw: f64, base_mva: f64) -> f64 {
    0.5 * c * (prev_mw / base_mva).abs().max(PENALTY_FLOOR) / base_mva
}

/// Branch residual above which the relaxation is reported as not tight (pu²).
pub const TIGHTNESS_FLAG: f64 = 1e-4;

/// Unit system of the quantities stored in a case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBase {
    pub base_mva: f64,
    /// Stored quantities are already per unit.
    pub per_unit: bool,
}

impl PowerBase {
    /// Factor converting a stored power quantity to per unit.
    pub fn to_pu(&self) -> f64 {
        if self.per_unit {
            1.0
        } else {
            1.0 / self.base_mva
        }
    }
}

/// Prices and previous exchanges seen by one DSO. Prices in currency/MW,
/// exchanges in MW, penalty in currency/pu² (see [`penalty_weight`]).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DsoMultiplierView {
    pub lambda_root: f64,
    pub psi_buy: f64,
    pub psi_sell: f64,
    pub penalty: f64,
    pub tso_buy_prev: f64,
    pub tso_sell_prev: f64,
    pub dso_buy_prev: f64,
    pub dso_sell_prev: f64,
}

impl DsoMultiplierView {
    pub fn priced(lambda: f64) -> Self {
        Self { lambda_root: lambda, ..Self::default() }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DsoError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("interface link belongs to {found}, not {expected}")]
    WrongInterface { expected: String, found: String },
    #[error("distribution system {dso}: solver status {status:?}")]
    Solver { dso: String, status: SolveStatus },
}

/// Variable indices of one DSO inside a (possibly larger) cone program.
#[derive(Debug, Clone, PartialEq)]
pub struct DsoVars {
    pub gen_p: Vec<VarId>,
    pub gen_q: Vec<VarId>,
    pub flow_p: Vec<VarId>,
    pub flow_q: Vec<VarId>,
    pub current_sq: Vec<VarId>,
    pub volt_sq: Vec<VarId>,
    pub sell: VarId,
    pub buy: VarId,
    pub topology: Topology,
    /// Per-unit to MW factor.
    pub base_mva: f64,
}

/// A built DSO program with its variable map.
#[derive(Debug, Clone, PartialEq)]
pub struct DsoProgram {
    pub program: ConeProgram,
    pub vars: DsoVars,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DsoSolution {
    pub dso: String,
    pub gen_p: Vec<f64>,
    pub gen_q: Vec<f64>,
    pub flow_p: Vec<f64>,
    pub flow_q: Vec<f64>,
    pub current_sq: Vec<f64>,
    pub volt_sq: Vec<f64>,
    pub sell: f64,
    pub buy: f64,
    /// Welfare `o^D` at this solution, priced at the view's root LMP.
    pub objective: f64,
    /// Objective of the solved program, penalty terms included.
    pub augmented_objective: f64,
    pub soc_residuals: Vec<SocResidual>,
    #[serde(skip)]
    sending: Vec<usize>,
    #[serde(skip)]
    lossless: Vec<bool>,
    #[serde(skip)]
    base_mva: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SocResidual {
    pub branch: usize,
    /// `v_s * a - (f_p^2 + f_q^2)` in pu².
    pub residual: f64,
    pub not_tight: bool,
}

fn name(prefix: &str, kind: &str, id: &str) -> String {
    format!("{prefix}{kind}[{id}]")
}

/// Appends the DSO constraints and objective terms to `prog`.
///
/// All labels are prefixed with `prefix` so several systems can share one
/// program.
pub fn build_dso_into(
    prog: &mut ConeProgram,
    prefix: &str,
    ds: &DistributionSystem,
    link: &InterfaceLink,
    base: PowerBase,
    view: &DsoMultiplierView,
    augmented: bool,
) -> Result<DsoVars, DsoError> {
    if link.distribution_system != ds.id {
        return Err(DsoError::WrongInterface { expected: ds.id.clone(), found: link.distribution_system.clone() });
    }
    let topo = ds.topology()?;
    let pu = base.to_pu();
    let mw = base.base_mva;
    let inf = f64::INFINITY;

    prog.offset += ds.tariff * ds.total_active_load() * pu * mw;

    let gen_p: Vec<VarId> = ds
        .generators
        .iter()
        .map(|g| prog.add_var(name(prefix, "gp", &g.id), g.p_min * pu, g.p_max * pu, -g.incremental_cost * mw))
        .collect();
    let gen_q: Vec<VarId> = ds.generators.iter().map(|g| prog.add_var(name(prefix, "gq", &g.id), g.q_min * pu, g.q_max * pu, 0.0)).collect();
    let volt_sq: Vec<VarId> = ds.buses.iter().map(|b| prog.add_var(name(prefix, "v", &b.id), b.v_sq_min, b.v_sq_max, 0.0)).collect();
    let mut flow_p = Vec::new();
    let mut flow_q = Vec::new();
    let mut current_sq = Vec::new();
    for br in &ds.branches {
        flow_p.push(prog.add_var(name(prefix, "fp", &br.id), -inf, inf, 0.0));
        flow_q.push(prog.add_var(name(prefix, "fq", &br.id), -inf, inf, 0.0));
        let a_hi = if br.is_lossless() { 0.0 } else { inf };
        current_sq.push(prog.add_var(name(prefix, "a", &br.id), 0.0, a_hi, 0.0));
    }
    let limit = link.exchange_limit * pu;
    let sell = prog.add_var(name(prefix, "sell", &ds.id), 0.0, limit, view.lambda_root * mw);
    let buy = prog.add_var(name(prefix, "buy", &ds.id), 0.0, limit, -view.lambda_root * mw);

    for (l, br) in ds.branches.iter().enumerate() {
        let (s, r) = (topo.sending[l], topo.receiving[l]);
        let (fp, fq, a) = (flow_p[l], flow_q[l], current_sq[l]);
        let (rr, xx) = (br.resistance, br.reactance);
        let s_max = br.apparent_limit * pu;
        // Voltage drop along the branch.
        prog.add_row(
            name(prefix, "vdrop", &br.id),
            vec![(volt_sq[s], 1.0), (volt_sq[r], -1.0), (fp, -2.0 * rr), (fq, -2.0 * xx), (a, rr * rr + xx * xx)],
            0.0,
        );
        let head = prog.add_var(name(prefix, "smax", &br.id), s_max, s_max, 0.0);
        prog.add_cone(Cone::Soc { head, tail: vec![fp, fq] });
        if br.is_lossless() {
            continue;
        }
        // f_p^2 + f_q^2 <= a v_s  as  ||(f_p, f_q)||^2 <= 2 a (v_s / 2).
        let half_v = prog.add_var(name(prefix, "halfv", &br.id), 0.0, inf, 0.0);
        prog.add_row(name(prefix, "halfv", &br.id), vec![(half_v, 1.0), (volt_sq[s], -0.5)], 0.0);
        prog.add_cone(Cone::Rotated { x: a, y: half_v, tail: vec![fp, fq] });
        // Receiving-end apparent power.
        let ep = prog.add_var(name(prefix, "ep", &br.id), -inf, inf, 0.0);
        let eq = prog.add_var(name(prefix, "eq", &br.id), -inf, inf, 0.0);
        prog.add_row(name(prefix, "ep", &br.id), vec![(ep, 1.0), (fp, -1.0), (a, rr)], 0.0);
        prog.add_row(name(prefix, "eq", &br.id), vec![(eq, 1.0), (fq, -1.0), (a, xx)], 0.0);
        let head = prog.add_var(name(prefix, "smax_r", &br.id), s_max, s_max, 0.0);
        prog.add_cone(Cone::Soc { head, tail: vec![ep, eq] });
    }

    // Nodal balances: outflow - receiving-end inflow - generation + load (+ shunt) = 0.
    for (b, bus) in ds.buses.iter().enumerate() {
        let mut p_terms = Vec::new();
        let mut q_terms = Vec::new();
        if let Some(l) = topo.out_branch[b] {
            let br = &ds.branches[l];
            p_terms.push((flow_p[l], 1.0));
            q_terms.push((flow_q[l], 1.0));
            if br.conductance != 0.0 {
                p_terms.push((volt_sq[b], br.conductance));
            }
            if br.susceptance != 0.0 {
                q_terms.push((volt_sq[b], -br.susceptance));
            }
        }
        for (l, br) in ds.branches.iter().enumerate() {
            if topo.receiving[l] == b {
                p_terms.push((flow_p[l], -1.0));
                q_terms.push((flow_q[l], -1.0));
                if !br.is_lossless() {
                    p_terms.push((current_sq[l], br.resistance));
                    q_terms.push((current_sq[l], br.reactance));
                }
            }
        }
        for (i, &gb) in topo.gen_bus.iter().enumerate() {
            if gb == b {
                p_terms.push((gen_p[i], -1.0));
                q_terms.push((gen_q[i], -1.0));
            }
        }
        if b == topo.root {
            // Export leaves the feeder at the root; import enters it.
            p_terms.push((sell, 1.0));
            p_terms.push((buy, -1.0));
        }
        let p_label = if b == topo.root { "root_p" } else { "bal_p" };
        let q_label = if b == topo.root { "root_q" } else { "bal_q" };
        add_balance(prog, name(prefix, p_label, &bus.id), p_terms, -bus.active_load * pu);
        add_balance(prog, name(prefix, q_label, &bus.id), q_terms, -bus.reactive_load * pu);
    }

    if augmented {
        let terms = [
            (buy, view.psi_buy, view.tso_buy_prev, view.dso_buy_prev - view.tso_buy_prev, "buy"),
            (sell, view.psi_sell, view.tso_sell_prev, view.dso_sell_prev - view.tso_sell_prev, "sell"),
        ];
        for (var, psi, tso_prev, prev_violation, tag) in terms {
            // psi (p - p_prev) - (c/2) |prev violation| |p - p_prev|
            prog.objective[var] += psi * mw;
            prog.offset -= psi * tso_prev;
            if view.penalty > 0.0 {
                let coef = penalty_weight(view.penalty, prev_violation, mw) * mw;
                add_abs_penalty(prog, &name(prefix, tag, "dev"), var, tso_prev / mw, coef);
            }
        }
    }

    Ok(DsoVars { gen_p, gen_q, flow_p, flow_q, current_sq, volt_sq, sell, buy, topology: topo, base_mva: mw })
}

/// Adds `-coef * |x - target|` to the objective.
pub(crate) fn add_abs_penalty(prog: &mut ConeProgram, label: &str, x: VarId, target: f64, coef: f64) {
    // x - target = up - down with both parts nonnegative; at the optimum at
    // most one is positive, so their sum is the absolute deviation.
    let up = prog.add_var(format!("{label}.up"), 0.0, f64::INFINITY, -coef);
    let down = prog.add_var(format!("{label}.down"), 0.0, f64::INFINITY, -coef);
    prog.add_row(format!("{label}.e"), vec![(x, 1.0), (up, -1.0), (down, 1.0)], target);
}

fn add_balance(prog: &mut ConeProgram, label: String, terms: Vec<(VarId, f64)>, rhs: f64) {
    if terms.is_empty() {
        // A bus with nothing attached must carry no load.
        debug_assert!(rhs == 0.0, "isolated bus {label} with load");
        return;
    }
    prog.add_row(label, terms, rhs);
}

pub fn build_dso(
    ds: &DistributionSystem,
    link: &InterfaceLink,
    base: PowerBase,
    view: &DsoMultiplierView,
    augmented: bool,
) -> Result<DsoProgram, DsoError> {
    let mut program = ConeProgram::new();
    let vars = build_dso_into(&mut program, "", ds, link, base, view, augmented)?;
    Ok(DsoProgram { program, vars })
}

/// Reads a DSO solution out of a solved program containing `vars`.
pub fn extract_dso(ds: &DistributionSystem, vars: &DsoVars, base: PowerBase, sol: &SolverSolution, lambda: f64) -> DsoSolution {
    let x = &sol.primal;
    let mw = vars.base_mva;
    let pick = |ids: &[VarId], k: f64| -> Vec<f64> { ids.iter().map(|&j| x[j] * k).collect() };
    let mut out = DsoSolution {
        dso: ds.id.clone(),
        gen_p: pick(&vars.gen_p, mw),
        gen_q: pick(&vars.gen_q, mw),
        flow_p: pick(&vars.flow_p, mw),
        flow_q: pick(&vars.flow_q, mw),
        current_sq: pick(&vars.current_sq, 1.0),
        volt_sq: pick(&vars.volt_sq, 1.0),
        sell: x[vars.sell] * mw,
        buy: x[vars.buy] * mw,
        objective: 0.0,
        augmented_objective: sol.objective,
        soc_residuals: Vec::new(),
        sending: vars.topology.sending.clone(),
        lossless: ds.branches.iter().map(|b| b.is_lossless()).collect(),
        base_mva: mw,
    };
    out.objective = dso_welfare(ds, base, &out, lambda);
    out.soc_residuals = check_soc_tightness(&out);
    out
}

/// Welfare `o^D` of a solution priced at `lambda` (currency).
pub fn dso_welfare(ds: &DistributionSystem, base: PowerBase, sol: &DsoSolution, lambda: f64) -> f64 {
    let load_mw = ds.total_active_load() * base.to_pu() * base.base_mva;
    let gen_cost: f64 = ds.generators.iter().zip(&sol.gen_p).map(|(g, p)| g.incremental_cost * p).sum();
    load_mw * ds.tariff - gen_cost + lambda * (sol.sell - sol.buy)
}

pub fn solve_dso(
    ds: &DistributionSystem,
    link: &InterfaceLink,
    base: PowerBase,
    view: &DsoMultiplierView,
    augmented: bool,
    tol: &ToleranceSet,
) -> Result<DsoSolution, DsoError> {
    let built = build_dso(ds, link, base, view, augmented)?;
    let sol = solve_cone(&built.program, tol);
    if !sol.is_optimal() {
        return Err(DsoError::Solver { dso: ds.id.clone(), status: sol.status });
    }
    let mut out = extract_dso(ds, &built.vars, base, &sol, view.lambda_root);
    if !augmented {
        out.net_exchanges();
    }
    Ok(out)
}

/// Per-branch gap `v_s * a - (f_p^2 + f_q^2)`; lossless branches report zero.
pub fn check_soc_tightness(sol: &DsoSolution) -> Vec<SocResidual> {
    let pu = 1.0 / sol.base_mva;
    (0..sol.flow_p.len())
        .map(|l| {
            if sol.lossless.get(l).copied().unwrap_or(false) {
                return SocResidual { branch: l, residual: 0.0, not_tight: false };
            }
            let (fp, fq) = (sol.flow_p[l] * pu, sol.flow_q[l] * pu);
            let residual = sol.volt_sq[sol.sending[l]] * sol.current_sq[l] - (fp * fp + fq * fq);
            SocResidual { branch: l, residual, not_tight: residual > TIGHTNESS_FLAG }
        })
        .collect()
}

impl DsoSolution {
    /// Overrides the squared current of one branch (for constructing
    /// deliberately relaxed points in diagnostics).
    pub fn with_current_sq(mut self, branch: usize, value: f64) -> Self {
        self.current_sq[branch] = value;
        self
    }

    /// Removes simultaneous buying and selling. Without penalty terms only
    /// `sell - buy` enters the balance and the objective, so the optimum is a
    /// whole segment and the solver may return any point on it.
    pub fn net_exchanges(&mut self) {
        let common = self.sell.min(self.buy).max(0.0);
        self.sell -= common;
        self.buy -= common;
    }

    pub fn net_export(&self) -> f64 {
        self.sell - self.buy
    }
}
