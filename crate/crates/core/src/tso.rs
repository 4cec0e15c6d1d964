//! Transmission unit-commitment problem with DC power flow, in strict form
//! (all balances hard) or with the coupled-bus balances and exchange
//! couplings moved into an augmented Lagrangian.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{ConeProgram, SolverSolution, VarId};
use crate::dso::{add_abs_penalty, penalty_weight, PowerBase};
use crate::grid::{CoordCase, GridError};
use crate::milp::{solve_milp, solve_until, BnBConfig, MilpError, MixedBinaryProgram};

/// Relative margin of the strict surrogate-improvement test.
pub const SURROGATE_MARGIN: f64 = 1e-9;

/// Whether the exchange transfer terms `C_buy p_buy - C_sell p_sell` enter
/// the transmission objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PricingMode {
    /// Transfer payments excluded; the objective is the social welfare.
    #[default]
    Welfare,
    /// Transfer terms included as written in the TSO objective.
    Literal,
}

/// Prices and DSO-side exchanges seen by the TSO at one iteration. Entries
/// are per distribution system, in case order. Prices in currency/MW,
/// exchanges in MW, penalty in currency/pu².
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TsoMultiplierView {
    pub lambda: Vec<f64>,
    pub psi_buy: Vec<f64>,
    pub psi_sell: Vec<f64>,
    pub penalty: f64,
    pub dso_buy_now: Vec<f64>,
    pub dso_sell_now: Vec<f64>,
    pub prev: TsoSolution,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TsoSolution {
    pub commit: Vec<bool>,
    pub gen_p: Vec<f64>,
    pub flow: Vec<f64>,
    pub angle: Vec<f64>,
    /// Exchanges seen from the transmission side, per distribution system.
    pub tso_buy: Vec<f64>,
    pub tso_sell: Vec<f64>,
    /// Transmission objective `o^T` in the pricing mode used to build it.
    pub objective: f64,
    /// Augmented Lagrangian value at this point (relaxed mode only).
    pub surrogate_value: f64,
    /// Coupled-bus balance residual using the transmission-side exchanges (MW).
    pub balance_violation: Vec<f64>,
    /// Set when no incumbent met the surrogate-improvement test and the
    /// proven optimum was returned instead.
    pub surrogate_condition_unmet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsoMode {
    /// Every balance is a hard constraint.
    Strict,
    /// Coupled-bus balances and exchange couplings are priced and penalized.
    Relaxed,
}

#[derive(Debug, Error, PartialEq)]
pub enum TsoError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("relaxed mode needs a multiplier view")]
    MissingView,
    #[error("multiplier view has {found} entries, the case has {expected} distribution systems")]
    ViewShape { expected: usize, found: usize },
    #[error("transmission bus {0} is not connected to the slack bus")]
    Disconnected(String),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// Variable indices of the transmission part of a program.
#[derive(Debug, Clone, PartialEq)]
pub struct TsoVars {
    pub commit: Vec<VarId>,
    pub gen_p: Vec<VarId>,
    pub angle: Vec<VarId>,
    pub flow: Vec<VarId>,
    pub buy: Vec<VarId>,
    pub sell: Vec<VarId>,
    /// Transmission bus index of each distribution system.
    pub hosts: Vec<usize>,
    /// Whether each distribution system's interface can carry power.
    pub active: Vec<bool>,
    pub base_mva: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsoProgram {
    pub milp: MixedBinaryProgram,
    pub vars: TsoVars,
}

/// Label of the hard balance row of a transmission bus.
pub fn balance_label(prefix: &str, bus: &str) -> String {
    format!("{prefix}bal[{bus}]")
}

pub fn power_base(case: &CoordCase) -> PowerBase {
    PowerBase { base_mva: case.base_mva, per_unit: case.per_unit }
}

/// Checks that every transmission bus is reachable from the slack bus.
fn check_connected(case: &CoordCase) -> Result<(), TsoError> {
    let t = &case.transmission;
    let n = t.buses.len();
    if n == 0 {
        return Ok(());
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(b) = stack.pop() {
        for l in &t.lines {
            let (Some(o), Some(r)) = (t.bus_index(&l.from_bus), t.bus_index(&l.to_bus)) else {
                return Err(GridError::Reference(format!("line {}", l.id)).into());
            };
            for (u, v) in [(o, r), (r, o)] {
                if u == b && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(b) => Err(TsoError::Disconnected(t.buses[b].id.clone())),
        None => Ok(()),
    }
}

/// Activity flag of every distribution system's interface, in case order.
pub fn active_links(case: &CoordCase) -> Result<Vec<bool>, GridError> {
    case.distribution_systems
        .iter()
        .map(|d| case.link_for(&d.id).map(|l| l.is_active()).ok_or_else(|| GridError::MissingInterface(d.id.clone())))
        .collect()
}

/// Appends the transmission constraints and objective to `prog`. Returns the
/// variable map and the binary variables.
///
/// In strict mode the coupled-bus balances use the transmission-side
/// exchange variables; coupling them to DSO quantities is left to the caller.
pub fn build_tso_into(
    prog: &mut ConeProgram,
    prefix: &str,
    case: &CoordCase,
    mode: TsoMode,
    view: Option<&TsoMultiplierView>,
    pricing: PricingMode,
) -> Result<TsoVars, TsoError> {
    check_connected(case)?;
    let n_dso = case.distribution_systems.len();
    let view = match (mode, view) {
        (TsoMode::Relaxed, None) => return Err(TsoError::MissingView),
        (TsoMode::Relaxed, Some(v)) => {
            for len in [v.lambda.len(), v.psi_buy.len(), v.psi_sell.len(), v.dso_buy_now.len(), v.dso_sell_now.len()] {
                if len != n_dso {
                    return Err(TsoError::ViewShape { expected: n_dso, found: len });
                }
            }
            Some(v)
        }
        (TsoMode::Strict, _) => None,
    };
    let base = power_base(case);
    let pu = base.to_pu();
    let mw = base.base_mva;
    let inf = f64::INFINITY;
    let t = &case.transmission;
    let hosts = case.host_indices()?;
    let active = active_links(case)?;

    prog.offset += t.buses.iter().map(|b| b.load_bid_price * b.active_load * pu * mw).sum::<f64>();

    let mut commit = Vec::new();
    let mut gen_p = Vec::new();
    let mut gen_bus = Vec::new();
    for g in &t.generators {
        let bus = t.bus_index(&g.bus).ok_or_else(|| GridError::Reference(format!("generator {} -> bus {}", g.id, g.bus)))?;
        gen_bus.push(bus);
        let x = prog.add_var(format!("{prefix}x[{}]", g.id), 0.0, 1.0, 0.0);
        let p = prog.add_var(format!("{prefix}g[{}]", g.id), 0.0, g.p_max * pu, -g.offer_price * mw);
        // p_min x <= g <= p_max x
        let hi = prog.add_var(format!("{prefix}ghi[{}]", g.id), 0.0, inf, 0.0);
        prog.add_row(format!("{prefix}ghi[{}]", g.id), vec![(p, 1.0), (x, -g.p_max * pu), (hi, 1.0)], 0.0);
        let lo = prog.add_var(format!("{prefix}glo[{}]", g.id), 0.0, inf, 0.0);
        prog.add_row(format!("{prefix}glo[{}]", g.id), vec![(p, 1.0), (x, -g.p_min * pu), (lo, -1.0)], 0.0);
        commit.push(x);
        gen_p.push(p);
    }

    let angle: Vec<VarId> = t
        .buses
        .iter()
        .enumerate()
        .map(|(b, bus)| {
            let (lo, hi) = if b == 0 { (0.0, 0.0) } else { (-inf, inf) };
            prog.add_var(format!("{prefix}theta[{}]", bus.id), lo, hi, 0.0)
        })
        .collect();
    let mut flow = Vec::new();
    let mut ends = Vec::new();
    for l in &t.lines {
        let o = t.bus_index(&l.from_bus).ok_or_else(|| GridError::Reference(format!("line {}", l.id)))?;
        let r = t.bus_index(&l.to_bus).ok_or_else(|| GridError::Reference(format!("line {}", l.id)))?;
        let lim = l.flow_limit * pu;
        let f = prog.add_var(format!("{prefix}f[{}]", l.id), -lim, lim, 0.0);
        prog.add_row(format!("{prefix}dc[{}]", l.id), vec![(f, l.reactance), (angle[o], -1.0), (angle[r], 1.0)], 0.0);
        flow.push(f);
        ends.push((o, r));
    }

    let mut buy = Vec::new();
    let mut sell = Vec::new();
    for (j, ds) in case.distribution_systems.iter().enumerate() {
        let link = case.link_for(&ds.id).ok_or_else(|| GridError::MissingInterface(ds.id.clone()))?;
        let lim = link.exchange_limit * pu;
        let (mut c_buy, mut c_sell) = (0.0, 0.0);
        if pricing == PricingMode::Literal {
            c_buy = ds.effective_bid_price() * mw;
            c_sell = -ds.effective_offer_price() * mw;
        }
        buy.push(prog.add_var(format!("{prefix}tbuy[{}]", ds.id), 0.0, lim, c_buy));
        sell.push(prog.add_var(format!("{prefix}tsell[{}]", ds.id), 0.0, lim, c_sell));
        debug_assert_eq!(buy.len(), j + 1);
    }

    for (b, bus) in t.buses.iter().enumerate() {
        let mut terms = Vec::new();
        for (i, &gb) in gen_bus.iter().enumerate() {
            if gb == b {
                terms.push((gen_p[i], 1.0));
            }
        }
        for (l, &(o, r)) in ends.iter().enumerate() {
            if r == b {
                terms.push((flow[l], 1.0));
            }
            if o == b {
                terms.push((flow[l], -1.0));
            }
        }
        let load = bus.active_load * pu;
        let Some(j) = hosts.iter().position(|&h| h == b).filter(|&j| active[j]) else {
            if terms.is_empty() {
                if load != 0.0 {
                    return Err(TsoError::Disconnected(bus.id.clone()));
                }
                continue;
            }
            prog.add_row(balance_label(prefix, &bus.id), terms, load);
            continue;
        };
        match view {
            None => {
                terms.push((sell[j], 1.0));
                terms.push((buy[j], -1.0));
                prog.add_row(balance_label(prefix, &bus.id), terms, load);
            }
            Some(v) => {
                // lambda * h with h = local injection + DSO net export - load.
                let lam = v.lambda[j];
                for &(var, coef) in &terms {
                    prog.objective[var] += lam * coef * mw;
                }
                let dso_net = v.dso_sell_now[j] - v.dso_buy_now[j];
                prog.offset += lam * (dso_net - load * mw);
                if v.penalty > 0.0 {
                    let prev_h = local_injection(case, &v.prev, b) + dso_net - load * mw;
                    let inj = prog.add_var(format!("{prefix}inj[{}]", bus.id), -inf, inf, 0.0);
                    terms.push((inj, -1.0));
                    prog.add_row(format!("{prefix}inj[{}]", bus.id), terms, 0.0);
                    let target = load - dso_net / mw;
                    add_abs_penalty(prog, &format!("{prefix}hpen[{}]", bus.id), inj, target, penalty_weight(v.penalty, prev_h, mw) * mw);
                }
            }
        }
    }

    if let Some(v) = view {
        for j in (0..n_dso).filter(|&j| active[j]) {
            let pairs = [
                (buy[j], v.psi_buy[j], v.dso_buy_now[j], v.prev.tso_buy.get(j).copied().unwrap_or(0.0), "buy"),
                (sell[j], v.psi_sell[j], v.dso_sell_now[j], v.prev.tso_sell.get(j).copied().unwrap_or(0.0), "sell"),
            ];
            for (var, psi, dso_now, tso_prev, tag) in pairs {
                // psi (p_dso - p_tso) - w |p_dso - p_tso|
                prog.objective[var] -= psi * mw;
                prog.offset += psi * dso_now;
                if v.penalty > 0.0 {
                    let w = penalty_weight(v.penalty, dso_now - tso_prev, mw) * mw;
                    let id = &case.distribution_systems[j].id;
                    add_abs_penalty(prog, &format!("{prefix}{tag}pen[{id}]"), var, dso_now / mw, w);
                }
            }
        }
    }

    Ok(TsoVars { commit, gen_p, angle, flow, buy, sell, hosts, active, base_mva: mw })
}

pub fn build_tso(case: &CoordCase, mode: TsoMode, view: Option<&TsoMultiplierView>, pricing: PricingMode) -> Result<TsoProgram, TsoError> {
    let mut prog = ConeProgram::new();
    let vars = build_tso_into(&mut prog, "", case, mode, view, pricing)?;
    let milp = MixedBinaryProgram::new(prog, vars.commit.clone());
    Ok(TsoProgram { milp, vars })
}

impl TsoProgram {
    /// Pins the transmission-side exchanges (MW) of every distribution system.
    pub fn fix_exchanges(&mut self, buy: &[f64], sell: &[f64]) {
        let mw = self.vars.base_mva;
        for (j, (&b, &s)) in buy.iter().zip(sell).enumerate() {
            self.milp.base.fix(self.vars.buy[j], b / mw);
            self.milp.base.fix(self.vars.sell[j], s / mw);
        }
    }
}

/// Generation plus net line inflow at transmission bus `b` (MW).
pub fn local_injection(case: &CoordCase, sol: &TsoSolution, b: usize) -> f64 {
    let t = &case.transmission;
    let mut total = 0.0;
    for (i, g) in t.generators.iter().enumerate() {
        if t.bus_index(&g.bus) == Some(b) {
            total += sol.gen_p.get(i).copied().unwrap_or(0.0);
        }
    }
    for (l, line) in t.lines.iter().enumerate() {
        let f = sol.flow.get(l).copied().unwrap_or(0.0);
        if t.bus_index(&line.to_bus) == Some(b) {
            total += f;
        }
        if t.bus_index(&line.from_bus) == Some(b) {
            total -= f;
        }
    }
    total
}

/// Transmission objective `o^T` (currency) of a solution.
pub fn tso_objective(case: &CoordCase, sol: &TsoSolution, pricing: PricingMode) -> f64 {
    let unit = case.power_unit();
    let t = &case.transmission;
    let mut obj: f64 = t.buses.iter().map(|b| b.load_bid_price * b.active_load * unit).sum();
    obj -= t.generators.iter().zip(&sol.gen_p).map(|(g, p)| g.offer_price * p).sum::<f64>();
    if pricing == PricingMode::Literal {
        for (j, ds) in case.distribution_systems.iter().enumerate() {
            obj += ds.effective_bid_price() * sol.tso_buy[j] - ds.effective_offer_price() * sol.tso_sell[j];
        }
    }
    obj
}

/// Reads a transmission solution out of a solved program containing `vars`.
pub fn extract_tso(case: &CoordCase, vars: &TsoVars, sol: &SolverSolution, pricing: PricingMode) -> TsoSolution {
    let x = &sol.primal;
    let mw = vars.base_mva;
    let pick = |ids: &[VarId], k: f64| -> Vec<f64> { ids.iter().map(|&j| x[j] * k).collect() };
    let mut out = TsoSolution {
        commit: vars.commit.iter().map(|&j| x[j] > 0.5).collect(),
        gen_p: pick(&vars.gen_p, mw),
        flow: pick(&vars.flow, mw),
        angle: pick(&vars.angle, 1.0),
        tso_buy: pick(&vars.buy, mw),
        tso_sell: pick(&vars.sell, mw),
        ..TsoSolution::default()
    };
    out.objective = tso_objective(case, &out, pricing);
    let unit = case.power_unit();
    out.balance_violation = vars
        .hosts
        .iter()
        .enumerate()
        .map(|(j, &b)| local_injection(case, &out, b) + out.tso_sell[j] - out.tso_buy[j] - case.transmission.buses[b].active_load * unit)
        .collect();
    out
}

/// Augmented Lagrangian value `L~` of a transmission point at the view's
/// multipliers and penalty weights.
pub fn surrogate_value(case: &CoordCase, sol: &TsoSolution, view: &TsoMultiplierView, pricing: PricingMode) -> f64 {
    let unit = case.power_unit();
    let mw = case.base_mva;
    let hosts = case.host_indices().unwrap_or_default();
    let active = active_links(case).unwrap_or_default();
    let mut value = tso_objective(case, sol, pricing);
    for (j, &b) in hosts.iter().enumerate().filter(|&(j, _)| active[j]) {
        let load = case.transmission.buses[b].active_load * unit;
        let dso_net = view.dso_sell_now[j] - view.dso_buy_now[j];
        let h = local_injection(case, sol, b) + dso_net - load;
        let prev_h = local_injection(case, &view.prev, b) + dso_net - load;
        value += view.lambda[j] * h;
        if view.penalty > 0.0 {
            value -= penalty_weight(view.penalty, prev_h, mw) * h.abs();
        }
        let pairs = [
            (view.psi_buy[j], view.dso_buy_now[j], sol.tso_buy[j], view.prev.tso_buy.get(j).copied().unwrap_or(0.0)),
            (view.psi_sell[j], view.dso_sell_now[j], sol.tso_sell[j], view.prev.tso_sell.get(j).copied().unwrap_or(0.0)),
        ];
        for (psi, dso_now, tso, tso_prev) in pairs {
            let r = dso_now - tso;
            value += psi * r;
            if view.penalty > 0.0 {
                value -= penalty_weight(view.penalty, dso_now - tso_prev, mw) * r.abs();
            }
        }
    }
    value
}

/// Strict transmission solve with every exchange fixed (MW per DSO).
pub fn solve_tso_fixed(case: &CoordCase, buy: &[f64], sell: &[f64], pricing: PricingMode, cfg: &BnBConfig) -> Result<TsoSolution, TsoError> {
    let mut built = build_tso(case, TsoMode::Strict, None, pricing)?;
    built.fix_exchanges(buy, sell);
    let inc = solve_milp(&built.milp, cfg)?;
    Ok(extract_tso(case, &built.vars, &inc.solution, pricing))
}

/// Relaxed transmission solve that stops at the first incumbent strictly
/// improving on `view.prev` re-evaluated at the current multipliers.
pub fn solve_tso_surrogate(case: &CoordCase, view: &TsoMultiplierView, pricing: PricingMode, cfg: &BnBConfig) -> Result<TsoSolution, TsoError> {
    let built = build_tso(case, TsoMode::Relaxed, Some(view), pricing)?;
    let prev_value = surrogate_value(case, &view.prev, view, pricing);
    let threshold = prev_value + SURROGATE_MARGIN * (1.0 + prev_value.abs());
    let inc = solve_until(&built.milp, cfg, |cand| {
        let sol = extract_tso(case, &built.vars, &cand.solution, pricing);
        surrogate_value(case, &sol, view, pricing) >= threshold
    })?;
    let mut out = extract_tso(case, &built.vars, &inc.solution, pricing);
    out.surrogate_value = surrogate_value(case, &out, view, pricing);
    out.surrogate_condition_unmet = !inc.accepted;
    Ok(out)
}
