//! Primal-dual interior-point solver for linear programs with second-order
//! cone constraints.
//!
//! Programs are stated in a user-facing canonical form ([`ConeProgram`]):
//! a linear objective to **maximize**, sparse linear equalities, per-variable
//! bounds and cone memberships over variable indices. Internally the program
//! is presolved (fixed variables and empty rows removed), equilibrated and
//! solved in the homogeneous self-dual embedding with Nesterov-Todd scaling
//! and a Mehrotra predictor-corrector step.
//!
//! Equality multipliers follow the convention
//! `multiplier = d(optimal objective) / d(right-hand side)`.

mod cones;
mod ipm;
mod presolve;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ipm::solve_cone;

/// Index of a variable in a [`ConeProgram`].
pub type VarId = usize;

/// Index of an equality row in a [`ConeProgram`].
pub type RowId = usize;

/// One sparse linear equality `sum(coeff * x[var]) = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqRow {
    pub coeffs: Vec<(VarId, f64)>,
    pub rhs: f64,
    pub label: String,
}

/// Cone membership over variable indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    /// `||x[tail]||_2 <= x[head]`.
    Soc { head: VarId, tail: Vec<VarId> },
    /// Rotated cone `||x[tail]||_2^2 <= 2 * x[x] * x[y]`, with `x, y >= 0`.
    ///
    /// Reformulated internally into a standard cone through the linear map
    /// `(x + y, x - y, sqrt(2) * tail)`.
    Rotated { x: VarId, y: VarId, tail: Vec<VarId> },
}

impl Cone {
    fn indices(&self) -> Vec<VarId> {
        match self {
            Cone::Soc { head, tail } => std::iter::once(*head).chain(tail.iter().copied()).collect(),
            Cone::Rotated { x, y, tail } => [*x, *y].into_iter().chain(tail.iter().copied()).collect(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProgramError {
    #[error("variable index {index} out of range in {context} (n_vars = {n_vars})")]
    IndexOutOfRange { index: usize, n_vars: usize, context: String },
    #[error("equality row `{0}` has no nonzero coefficient")]
    EmptyRow(String),
    #[error("variable {0} is the head of more than one cone")]
    DuplicateHead(VarId),
    #[error("variable {index} has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { index: VarId, lower: f64, upper: f64 },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
}

/// Linear cone program in maximization form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConeProgram {
    pub objective: Vec<f64>,
    pub offset: f64,
    pub rows: Vec<EqRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cones: Vec<Cone>,
    pub names: Vec<String>,
}

impl ConeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, label: impl Into<String>, coeffs: Vec<(VarId, f64)>, rhs: f64) -> RowId {
        self.rows.push(EqRow { coeffs, rhs, label: label.into() });
        self.rows.len() - 1
    }

    pub fn add_cone(&mut self, cone: Cone) {
        self.cones.push(cone);
    }

    pub fn row_by_label(&self, label: &str) -> Option<RowId> {
        self.rows.iter().position(|r| r.label == label)
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name)
    }

    /// Fixes a variable by collapsing its bounds.
    pub fn fix(&mut self, var: VarId, value: f64) {
        self.lower[var] = value;
        self.upper[var] = value;
    }

    pub fn eval_objective(&self, x: &[f64]) -> f64 {
        self.offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Checks the structural invariants of the program.
    pub fn check(&self) -> Result<(), ProgramError> {
        let n = self.n_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(ProgramError::IndexOutOfRange { index: self.lower.len().max(self.upper.len()), n_vars: n, context: "bounds".into() });
        }
        if self.objective.iter().any(|c| !c.is_finite()) || !self.offset.is_finite() {
            return Err(ProgramError::NonFinite("objective".into()));
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() {
                return Err(ProgramError::NonFinite(format!("bounds of variable {j}")));
            }
            if lo > hi {
                return Err(ProgramError::InvertedBounds { index: j, lower: lo, upper: hi });
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() || row.coeffs.iter().any(|(_, c)| !c.is_finite()) {
                return Err(ProgramError::NonFinite(format!("row `{}`", row.label)));
            }
            if let Some(&(index, _)) = row.coeffs.iter().find(|(i, _)| *i >= n) {
                return Err(ProgramError::IndexOutOfRange { index, n_vars: n, context: format!("row `{}`", row.label) });
            }
            if row.coeffs.iter().all(|(_, c)| *c == 0.0) {
                return Err(ProgramError::EmptyRow(row.label.clone()));
            }
        }
        let mut heads = std::collections::HashSet::new();
        for cone in &self.cones {
            if let Some(&index) = cone.indices().iter().find(|&&i| i >= n) {
                return Err(ProgramError::IndexOutOfRange { index, n_vars: n, context: "cone".into() });
            }
            if let Cone::Soc { head, .. } = cone {
                if !heads.insert(*head) {
                    return Err(ProgramError::DuplicateHead(*head));
                }
            }
        }
        Ok(())
    }

    /// Human-readable dump of the program for debugging.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let name = |j: usize| self.names.get(j).cloned().unwrap_or_else(|| format!("x{j}"));
        let _ = writeln!(out, "maximize {:+} ", self.offset);
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = writeln!(out, "  {c:+} {}", name(j));
            }
        }
        let _ = writeln!(out, "subject to");
        for row in &self.rows {
            let terms: Vec<String> = row.coeffs.iter().map(|(j, c)| format!("{c:+} {}", name(*j))).collect();
            let _ = writeln!(out, "  [{}] {} = {}", row.label, terms.join(" "), row.rhs);
        }
        let _ = writeln!(out, "bounds");
        for j in 0..self.n_vars() {
            let _ = writeln!(out, "  {} <= {} <= {}", self.lower[j], name(j), self.upper[j]);
        }
        if !self.cones.is_empty() {
            let _ = writeln!(out, "cones");
            for cone in &self.cones {
                match cone {
                    Cone::Soc { head, tail } => {
                        let t: Vec<String> = tail.iter().map(|&j| name(j)).collect();
                        let _ = writeln!(out, "  ||({})|| <= {}", t.join(", "), name(*head));
                    }
                    Cone::Rotated { x, y, tail } => {
                        let t: Vec<String> = tail.iter().map(|&j| name(j)).collect();
                        let _ = writeln!(out, "  ||({})||^2 <= 2 {} {}", t.join(", "), name(*x), name(*y));
                    }
                }
            }
        }
        out
    }
}

/// Termination tolerances and limits of [`solve_cone`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSet {
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
    pub max_iters: usize,
    pub regularization: f64,
    pub ruiz_passes: usize,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        Self {
            primal_infeasibility: 1e-8,
            dual_infeasibility: 1e-8,
            relative_gap: 1e-8,
            max_iters: 200,
            regularization: 1e-9,
            ruiz_passes: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSolution {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
    /// Objective value of the maximization program (offset included).
    pub objective: f64,
    /// Dual objective of the maximization program (offset included).
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl SolverSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn row_multiplier(&self, row: RowId) -> Option<f64> {
        self.eq_multipliers.get(row).copied()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MultiplierError {
    #[error("no equality row labelled `{0}`")]
    UnknownRow(String),
    #[error("solution status is {0:?}, multipliers are not meaningful")]
    NotOptimal(SolveStatus),
}

/// Multiplier of the equality row `label`, converted from per-unit
/// (currency per base-MVA) back to currency/MW.
pub fn extract_row_multiplier(
    prog: &ConeProgram,
    sol: &SolverSolution,
    label: &str,
    base_mva: f64,
) -> Result<f64, MultiplierError> {
    if !sol.is_optimal() {
        return Err(MultiplierError::NotOptimal(sol.status));
    }
    let row = prog.row_by_label(label).ok_or_else(|| MultiplierError::UnknownRow(label.to_string()))?;
    let y = sol.row_multiplier(row).ok_or_else(|| MultiplierError::UnknownRow(label.to_string()))?;
    Ok(y / base_mva)
}
