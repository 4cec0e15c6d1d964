//! Reduction of a [`ConeProgram`] to the internal standard form
//!
//! ```text
//! minimize c'x  subject to  A x = b,  G x + s = h,  s in K
//! ```
//!
//! Fixed variables are substituted out and rows left empty are dropped.
//! Equilibration (Ruiz) is applied on top of the reduced form.

use super::cones::{norm, ConeSet};
use super::{Cone, ConeProgram};

pub(crate) type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub(crate) struct StdForm {
    pub n: usize,
    pub c: Vec<f64>,
    pub a: Vec<SparseRow>,
    pub b: Vec<f64>,
    pub g: Vec<SparseRow>,
    pub h: Vec<f64>,
    pub cones: ConeSet,
}

impl StdForm {
    pub fn a_mul(&self, x: &[f64], out: &mut [f64]) {
        mul_rows(&self.a, x, out);
    }

    pub fn g_mul(&self, x: &[f64], out: &mut [f64]) {
        mul_rows(&self.g, x, out);
    }

    /// `out += A' y`.
    pub fn a_t_mul_add(&self, y: &[f64], out: &mut [f64]) {
        mul_rows_t_add(&self.a, y, out);
    }

    /// `out += G' z`.
    pub fn g_t_mul_add(&self, z: &[f64], out: &mut [f64]) {
        mul_rows_t_add(&self.g, z, out);
    }
}

fn mul_rows(rows: &[SparseRow], x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(rows) {
        *o = row.iter().map(|&(j, v)| v * x[j]).sum();
    }
}

fn mul_rows_t_add(rows: &[SparseRow], y: &[f64], out: &mut [f64]) {
    for (row, &yi) in rows.iter().zip(y) {
        if yi != 0.0 {
            for &(j, v) in row {
                out[j] += v * yi;
            }
        }
    }
}

/// Book-keeping needed to map a reduced solution back to the original program.
#[derive(Debug, Clone)]
pub(crate) struct Postsolve {
    pub var_map: Vec<Option<usize>>,
    pub fixed: Vec<f64>,
    pub row_map: Vec<Option<usize>>,
    /// Objective (maximization) contribution of the fixed variables plus the offset.
    pub const_objective: f64,
}

#[derive(Debug)]
pub(crate) enum Presolved {
    Reduced(StdForm, Postsolve),
    Infeasible(Postsolve),
}

const EMPTY_ROW_TOL: f64 = 1e-9;

pub(crate) fn presolve(prog: &ConeProgram) -> Presolved {
    let n_orig = prog.n_vars();
    let mut var_map = vec![None; n_orig];
    let mut fixed = vec![0.0; n_orig];
    let mut n = 0;
    for j in 0..n_orig {
        if prog.lower[j] == prog.upper[j] {
            fixed[j] = prog.lower[j];
        } else {
            var_map[j] = Some(n);
            n += 1;
        }
    }
    let mut c = vec![0.0; n];
    let mut const_objective = prog.offset;
    for j in 0..n_orig {
        match var_map[j] {
            Some(k) => c[k] = -prog.objective[j],
            None => const_objective += prog.objective[j] * fixed[j],
        }
    }

    let mut infeasible = false;
    let mut row_map = vec![None; prog.rows.len()];
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, row) in prog.rows.iter().enumerate() {
        let mut rhs = row.rhs;
        let mut dense: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len());
        for &(j, v) in &row.coeffs {
            match var_map[j] {
                Some(k) => dense.push((k, v)),
                None => rhs -= v * fixed[j],
            }
        }
        let merged = merge(dense);
        if merged.is_empty() {
            if rhs.abs() > EMPTY_ROW_TOL * (1.0 + row.rhs.abs()) {
                infeasible = true;
            }
            continue;
        }
        row_map[i] = Some(a.len());
        a.push(merged);
        b.push(rhs);
    }

    // Orthant rows: variable bounds.
    let mut g: Vec<SparseRow> = Vec::new();
    let mut h = Vec::new();
    for j in 0..n_orig {
        if let Some(k) = var_map[j] {
            if prog.lower[j].is_finite() {
                g.push(vec![(k, -1.0)]);
                h.push(-prog.lower[j]);
            }
            if prog.upper[j].is_finite() {
                g.push(vec![(k, 1.0)]);
                h.push(prog.upper[j]);
            }
        }
    }

    // Cone rows: s_i = h_i - g_i x with s_i an affine image of the variables.
    let affine = |terms: &[(usize, f64)]| -> (SparseRow, f64) {
        let mut row = Vec::new();
        let mut constant = 0.0;
        for &(j, v) in terms {
            match var_map[j] {
                Some(k) => row.push((k, -v)),
                None => constant += v * fixed[j],
            }
        }
        (merge(row), constant)
    };
    let mut soc_dims = Vec::new();
    let mut soc_rows: Vec<(SparseRow, f64)> = Vec::new();
    let mut extra_orthant: Vec<(SparseRow, f64)> = Vec::new();
    for cone in &prog.cones {
        let components: Vec<Vec<(usize, f64)>> = match cone {
            Cone::Soc { head, tail } => std::iter::once(vec![(*head, 1.0)]).chain(tail.iter().map(|&t| vec![(t, 1.0)])).collect(),
            Cone::Rotated { x, y, tail } => {
                let r2 = std::f64::consts::SQRT_2;
                [vec![(*x, 1.0), (*y, 1.0)], vec![(*x, 1.0), (*y, -1.0)]]
                    .into_iter()
                    .chain(tail.iter().map(|&t| vec![(t, r2)]))
                    .collect()
            }
        };
        let rows: Vec<(SparseRow, f64)> = components.iter().map(|c| affine(c)).collect();
        if rows.iter().all(|(r, _)| r.is_empty()) {
            let head = rows[0].1;
            let tail: Vec<f64> = rows[1..].iter().map(|(_, v)| *v).collect();
            if head - norm(&tail) < -EMPTY_ROW_TOL * (1.0 + head.abs()) {
                infeasible = true;
            }
            continue;
        }
        if rows.len() == 1 {
            extra_orthant.push(rows.into_iter().next().unwrap());
            continue;
        }
        soc_dims.push(rows.len());
        soc_rows.extend(rows);
    }
    for (row, constant) in extra_orthant {
        g.push(row);
        h.push(constant);
    }
    let n_nonneg = g.len();
    for (row, constant) in soc_rows {
        g.push(row);
        h.push(constant);
    }

    let post = Postsolve { var_map, fixed, row_map, const_objective };
    if infeasible {
        return Presolved::Infeasible(post);
    }
    let cones = ConeSet::new(n_nonneg, &soc_dims);
    Presolved::Reduced(StdForm { n, c, a, b, g, h, cones }, post)
}

fn merge(mut row: Vec<(usize, f64)>) -> SparseRow {
    row.sort_by_key(|&(j, _)| j);
    let mut out: SparseRow = Vec::with_capacity(row.len());
    for (j, v) in row {
        match out.last_mut() {
            Some((k, acc)) if *k == j => *acc += v,
            _ => out.push((j, v)),
        }
    }
    out.retain(|&(_, v)| v != 0.0);
    out
}

/// Diagonal equilibration `A~ = E_a A D`, `G~ = E_g G D`, `c~ = sigma D c`.
#[derive(Debug, Clone)]
pub(crate) struct Equilibration {
    pub col: Vec<f64>,
    pub row_a: Vec<f64>,
    pub row_g: Vec<f64>,
    pub cost: f64,
}

pub(crate) fn equilibrate(form: &mut StdForm, passes: usize) -> Equilibration {
    let n = form.n;
    let mut col = vec![1.0; n];
    let mut row_a = vec![1.0; form.a.len()];
    let mut row_g = vec![1.0; form.g.len()];
    for _ in 0..passes {
        let mut col_max = vec![0.0_f64; n];
        for row in form.a.iter().chain(form.g.iter()) {
            for &(j, v) in row {
                col_max[j] = col_max[j].max(v.abs());
            }
        }
        let dcol: Vec<f64> = col_max.iter().map(|&m| if m > 0.0 { 1.0 / m.sqrt() } else { 1.0 }).collect();
        let row_scale = |row: &SparseRow| -> f64 {
            let m = row.iter().map(|&(j, v)| (v * dcol[j]).abs()).fold(0.0, f64::max);
            if m > 0.0 {
                1.0 / m.sqrt()
            } else {
                1.0
            }
        };
        let da: Vec<f64> = form.a.iter().map(row_scale).collect();
        let mut dg: Vec<f64> = form.g.iter().map(row_scale).collect();
        // One common factor per cone block keeps the cone invariant.
        for &(st, d) in &form.cones.socs {
            let common = dg[st..st + d].iter().copied().fold(f64::INFINITY, f64::min);
            for v in &mut dg[st..st + d] {
                *v = common;
            }
        }
        for (i, row) in form.a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut() {
                *v *= da[i] * dcol[*j];
            }
            form.b[i] *= da[i];
            row_a[i] *= da[i];
        }
        for (i, row) in form.g.iter_mut().enumerate() {
            for (j, v) in row.iter_mut() {
                *v *= dg[i] * dcol[*j];
            }
            form.h[i] *= dg[i];
            row_g[i] *= dg[i];
        }
        for j in 0..n {
            form.c[j] *= dcol[j];
            col[j] *= dcol[j];
        }
    }
    let cmax = form.c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cost = if cmax > 0.0 { (1.0 / cmax).clamp(1e-6, 1e6) } else { 1.0 };
    for v in &mut form.c {
        *v *= cost;
    }
    Equilibration { col, row_a, row_g, cost }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_variables_are_substituted() {
        let mut p = ConeProgram::new();
        let x = p.add_var("x", 2.0, 2.0, 3.0);
        let y = p.add_var("y", 0.0, 10.0, 1.0);
        p.add_row("r", vec![(x, 1.0), (y, 1.0)], 5.0);
        p.add_row("only_fixed", vec![(x, 1.0)], 2.0);
        match presolve(&p) {
            Presolved::Reduced(form, post) => {
                assert_eq!(form.n, 1);
                assert_eq!(form.b, vec![3.0]);
                assert_eq!(post.row_map, vec![Some(0), None]);
                assert_eq!(post.const_objective, 6.0);
            }
            Presolved::Infeasible(_) => panic!("unexpected infeasibility"),
        }
    }

    #[test]
    fn inconsistent_empty_row_is_infeasible() {
        let mut p = ConeProgram::new();
        let x = p.add_var("x", 1.0, 1.0, 0.0);
        p.add_row("r", vec![(x, 1.0)], 3.0);
        assert!(matches!(presolve(&p), Presolved::Infeasible(_)));
    }

    #[test]
    fn equilibration_keeps_cone_blocks_uniform() {
        let mut p = ConeProgram::new();
        let t = p.add_var("t", f64::NEG_INFINITY, f64::INFINITY, -1.0);
        let u = p.add_var("u", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        let v = p.add_var("v", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        p.add_row("u", vec![(u, 1000.0)], 3.0);
        p.add_row("v", vec![(v, 0.001)], 4.0);
        p.add_cone(Cone::Soc { head: t, tail: vec![u, v] });
        let Presolved::Reduced(mut form, _) = presolve(&p) else { panic!() };
        let eq = equilibrate(&mut form, 3);
        let (st, d) = form.cones.socs[0];
        let first = eq.row_g[st];
        assert!(eq.row_g[st..st + d].iter().all(|&v| v == first));
    }
}
