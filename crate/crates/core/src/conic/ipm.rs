//! Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
//! a Mehrotra predictor-corrector step.

use nalgebra::{DMatrix, DVector};

use super::cones::{dot, ConeSet, Scaling};
use super::presolve::{equilibrate, presolve, Equilibration, Postsolve, Presolved, StdForm};
use super::{ConeProgram, Residuals, SolveStatus, SolverSolution, ToleranceSet};

const STEP_FRACTION: f64 = 0.99;
const REFINE_STEPS: usize = 5;
/// A stalled run returns its best iterate as optimal when every residual is
/// within this factor of its tolerance.
const INACCURATE_FACTOR: f64 = 1e3;
/// Iterations without a new best iterate before giving up.
const STALL_ITERS: usize = 8;

/// Solves `prog` to the tolerances in `tol`.
pub fn solve_cone(prog: &ConeProgram, tol: &ToleranceSet) -> SolverSolution {
    if let Err(err) = prog.check() {
        log::warn!("malformed cone program: {err}");
        return failed(prog, SolveStatus::NumericalFailure);
    }
    let (form, post) = match presolve(prog) {
        Presolved::Reduced(form, post) => (form, post),
        Presolved::Infeasible(post) => {
            let x = expand_primal(&post, &[]);
            return SolverSolution {
                status: SolveStatus::Infeasible,
                objective: prog.eval_objective(&x),
                primal: x,
                eq_multipliers: vec![0.0; prog.rows.len()],
                dual_objective: f64::NAN,
                residuals: Residuals::default(),
                iterations: 0,
            };
        }
    };
    if form.n == 0 {
        let x = expand_primal(&post, &[]);
        return SolverSolution {
            status: SolveStatus::Optimal,
            objective: prog.eval_objective(&x),
            dual_objective: prog.eval_objective(&x),
            primal: x,
            eq_multipliers: vec![0.0; prog.rows.len()],
            residuals: Residuals::default(),
            iterations: 0,
        };
    }
    let original = form.clone();
    let mut scaled = form;
    let eq = equilibrate(&mut scaled, tol.ruiz_passes);
    let outcome = Ipm::new(&scaled, &original, &eq, &post, tol).run();
    let x = expand_primal(&post, &outcome.x);
    let mut y = vec![0.0; prog.rows.len()];
    for (i, m) in post.row_map.iter().enumerate() {
        if let Some(k) = m {
            y[i] = outcome.y[*k];
        }
    }
    SolverSolution {
        status: outcome.status,
        objective: prog.eval_objective(&x),
        dual_objective: outcome.dual_objective,
        primal: x,
        eq_multipliers: y,
        residuals: outcome.residuals,
        iterations: outcome.iterations,
    }
}

fn failed(prog: &ConeProgram, status: SolveStatus) -> SolverSolution {
    SolverSolution {
        status,
        primal: vec![f64::NAN; prog.n_vars()],
        eq_multipliers: vec![f64::NAN; prog.rows.len()],
        objective: f64::NAN,
        dual_objective: f64::NAN,
        residuals: Residuals::default(),
        iterations: 0,
    }
}

fn expand_primal(post: &Postsolve, reduced: &[f64]) -> Vec<f64> {
    post.var_map
        .iter()
        .zip(&post.fixed)
        .map(|(m, &f)| match m {
            Some(k) => reduced.get(*k).copied().unwrap_or(f64::NAN),
            None => f,
        })
        .collect()
}

struct Outcome {
    status: SolveStatus,
    x: Vec<f64>,
    y: Vec<f64>,
    dual_objective: f64,
    residuals: Residuals,
    iterations: usize,
}

/// Unscaled iterate in the units of the presolved program.
struct Unscaled {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
}

struct Ipm<'a> {
    f: &'a StdForm,
    orig: &'a StdForm,
    eq: &'a Equilibration,
    post: &'a Postsolve,
    tol: &'a ToleranceSet,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Kkt {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

type Step = (Vec<f64>, Vec<f64>, Vec<f64>);

impl<'a> Ipm<'a> {
    fn new(f: &'a StdForm, orig: &'a StdForm, eq: &'a Equilibration, post: &'a Postsolve, tol: &'a ToleranceSet) -> Self {
        let m = f.g.len();
        Self {
            f,
            orig,
            eq,
            post,
            tol,
            x: vec![0.0; f.n],
            y: vec![0.0; f.a.len()],
            z: vec![1.0; m],
            s: vec![1.0; m],
            tau: 1.0,
            kappa: 1.0,
        }
    }

    fn cones(&self) -> &ConeSet {
        &self.f.cones
    }

    /// Assembles and factors the reduced KKT matrix
    /// `[[G' W^-2 G + d I, A'], [A, -d I]]`.
    fn factor(&self, scaling: Option<&Scaling>, reg: f64) -> Kkt {
        let (n, p) = (self.f.n, self.f.a.len());
        let mut mat = DMatrix::<f64>::zeros(n + p, n + p);
        let cones = self.cones();
        for i in 0..cones.n_nonneg {
            let w2inv = match scaling {
                Some(sc) => 1.0 / (sc.orthant[i] * sc.orthant[i]),
                None => 1.0,
            };
            let row = &self.f.g[i];
            for &(j1, v1) in row {
                for &(j2, v2) in row {
                    mat[(j1, j2)] += w2inv * v1 * v2;
                }
            }
        }
        for (k, &(st, d)) in cones.socs.iter().enumerate() {
            let w2inv: Vec<f64> = match scaling {
                Some(sc) => {
                    let wi = &sc.socs[k].w_inv;
                    let mut out = vec![0.0; d * d];
                    for a in 0..d {
                        for b in 0..d {
                            out[a * d + b] = (0..d).map(|c| wi[a * d + c] * wi[c * d + b]).sum();
                        }
                    }
                    out
                }
                None => (0..d * d).map(|ab| if ab / d == ab % d { 1.0 } else { 0.0 }).collect(),
            };
            for a in 0..d {
                for b in 0..d {
                    let wab = w2inv[a * d + b];
                    if wab == 0.0 {
                        continue;
                    }
                    for &(j1, v1) in &self.f.g[st + a] {
                        for &(j2, v2) in &self.f.g[st + b] {
                            mat[(j1, j2)] += wab * v1 * v2;
                        }
                    }
                }
            }
        }
        for (i, row) in self.f.a.iter().enumerate() {
            for &(j, v) in row {
                mat[(n + i, j)] += v;
                mat[(j, n + i)] += v;
            }
        }
        for j in 0..n {
            mat[(j, j)] += reg;
        }
        for i in 0..p {
            mat[(n + i, n + i)] -= reg;
        }
        Kkt { lu: mat.lu() }
    }

    fn apply_w2inv(&self, scaling: Option<&Scaling>, v: &[f64]) -> Vec<f64> {
        match scaling {
            Some(sc) => {
                let mut t = vec![0.0; v.len()];
                sc.apply_w_inv(self.cones(), v, &mut t);
                let mut out = vec![0.0; v.len()];
                sc.apply_w_inv(self.cones(), &t, &mut out);
                out
            }
            None => v.to_vec(),
        }
    }

    fn apply_w2(&self, scaling: Option<&Scaling>, v: &[f64]) -> Vec<f64> {
        match scaling {
            Some(sc) => {
                let mut t = vec![0.0; v.len()];
                sc.apply_w(self.cones(), v, &mut t);
                let mut out = vec![0.0; v.len()];
                sc.apply_w(self.cones(), &t, &mut out);
                out
            }
            None => v.to_vec(),
        }
    }

    fn solve_reduced(&self, kkt: &Kkt, scaling: Option<&Scaling>, rx: &[f64], ry: &[f64], rz: &[f64]) -> Option<Step> {
        let (n, p) = (self.f.n, self.f.a.len());
        let w2rz = self.apply_w2inv(scaling, rz);
        let mut top = rx.to_vec();
        self.f.g_t_mul_add(&w2rz, &mut top);
        let rhs = DVector::from_iterator(n + p, top.into_iter().chain(ry.iter().copied()));
        let sol = kkt.lu.solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let dx: Vec<f64> = sol.rows(0, n).iter().copied().collect();
        let dy: Vec<f64> = sol.rows(n, p).iter().copied().collect();
        let mut gdx = vec![0.0; self.f.g.len()];
        self.f.g_mul(&dx, &mut gdx);
        let diff: Vec<f64> = gdx.iter().zip(rz).map(|(a, b)| a - b).collect();
        let dz = self.apply_w2inv(scaling, &diff);
        Some((dx, dy, dz))
    }

    /// Solves `[[0, A', G'], [A, 0, 0], [G, 0, -W^2]] (dx, dy, dz) = (rx, ry, rz)`
    /// with iterative refinement on the unregularized system.
    fn solve(&self, kkt: &Kkt, scaling: Option<&Scaling>, rx: &[f64], ry: &[f64], rz: &[f64]) -> Option<Step> {
        let (mut dx, mut dy, mut dz) = self.solve_reduced(kkt, scaling, rx, ry, rz)?;
        let scale = 1.0 + inf_norm(rx).max(inf_norm(ry)).max(inf_norm(rz));
        let mut prev_err = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            let mut e1 = rx.to_vec();
            let neg_dy: Vec<f64> = dy.iter().map(|v| -v).collect();
            let neg_dz: Vec<f64> = dz.iter().map(|v| -v).collect();
            self.f.a_t_mul_add(&neg_dy, &mut e1);
            self.f.g_t_mul_add(&neg_dz, &mut e1);
            let mut adx = vec![0.0; ry.len()];
            self.f.a_mul(&dx, &mut adx);
            let e2: Vec<f64> = ry.iter().zip(&adx).map(|(r, a)| r - a).collect();
            let mut gdx = vec![0.0; rz.len()];
            self.f.g_mul(&dx, &mut gdx);
            let w2dz = self.apply_w2(scaling, &dz);
            let e3: Vec<f64> = (0..rz.len()).map(|i| rz[i] - gdx[i] + w2dz[i]).collect();
            let err = inf_norm(&e1).max(inf_norm(&e2)).max(inf_norm(&e3));
            if err <= 1e-14 * scale || err >= prev_err {
                break;
            }
            prev_err = err;
            let (cx, cy, cz) = self.solve_reduced(kkt, scaling, &e1, &e2, &e3)?;
            dx.iter_mut().zip(&cx).for_each(|(a, b)| *a += b);
            dy.iter_mut().zip(&cy).for_each(|(a, b)| *a += b);
            dz.iter_mut().zip(&cz).for_each(|(a, b)| *a += b);
        }
        Some((dx, dy, dz))
    }

    fn initialize(&mut self) -> bool {
        let kkt = self.factor(None, self.tol.regularization.max(1e-8));
        let n = self.f.n;
        let Some((x, _, z)) = self.solve(&kkt, None, &vec![0.0; n], &self.f.b, &self.f.h) else {
            return false;
        };
        let mut s: Vec<f64> = z.iter().map(|v| -v).collect();
        self.cones().push_interior(&mut s);
        let negc: Vec<f64> = self.f.c.iter().map(|v| -v).collect();
        let Some((_, y, mut z)) = self.solve(&kkt, None, &negc, &vec![0.0; self.f.a.len()], &vec![0.0; self.f.g.len()]) else {
            return false;
        };
        self.cones().push_interior(&mut z);
        self.x = x;
        self.y = y;
        self.s = s;
        self.z = z;
        self.tau = 1.0;
        self.kappa = 1.0;
        true
    }

    fn unscaled(&self, divide_tau: bool) -> Unscaled {
        let t = if divide_tau { self.tau } else { 1.0 };
        let eq = self.eq;
        Unscaled {
            x: self.x.iter().zip(&eq.col).map(|(v, d)| v * d / t).collect(),
            y: self.y.iter().zip(&eq.row_a).map(|(v, e)| v * e / (eq.cost * t)).collect(),
            z: self.z.iter().zip(&eq.row_g).map(|(v, e)| v * e / (eq.cost * t)).collect(),
            s: self.s.iter().zip(&eq.row_g).map(|(v, e)| v / (e * t)).collect(),
        }
    }

    /// Residuals of the unscaled iterate; objectives are reported in the
    /// maximization sense with the constant part included.
    fn measure(&self, u: &Unscaled) -> (Residuals, f64, f64) {
        let o = self.orig;
        let mut ax = vec![0.0; o.a.len()];
        o.a_mul(&u.x, &mut ax);
        let mut gx = vec![0.0; o.g.len()];
        o.g_mul(&u.x, &mut gx);
        let pres_a = ax.iter().zip(&o.b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / (1.0 + inf_norm(&o.b));
        let pres_g = gx.iter().zip(&u.s).zip(&o.h).map(|((g, s), h)| (g + s - h).abs()).fold(0.0, f64::max) / (1.0 + inf_norm(&o.h));
        let mut dr = o.c.clone();
        o.a_t_mul_add(&u.y, &mut dr);
        o.g_t_mul_add(&u.z, &mut dr);
        let dres = inf_norm(&dr) / (1.0 + inf_norm(&o.c));
        let primal = -dot(&o.c, &u.x) + self.post.const_objective;
        let dual = dot(&o.b, &u.y) + dot(&o.h, &u.z) + self.post.const_objective;
        let gap = (primal - dual).abs() / (1.0 + primal.abs());
        (Residuals { primal_infeasibility: pres_a.max(pres_g), dual_infeasibility: dres, relative_gap: gap }, primal, dual)
    }

    fn infeasibility(&self) -> Option<SolveStatus> {
        let u = self.unscaled(false);
        let o = self.orig;
        let hz_by = dot(&o.h, &u.z) + dot(&o.b, &u.y);
        if hz_by < 0.0 && self.tau < self.kappa {
            let mut r = vec![0.0; o.n];
            o.a_t_mul_add(&u.y, &mut r);
            o.g_t_mul_add(&u.z, &mut r);
            if inf_norm(&r) / (-hz_by) < self.tol.primal_infeasibility {
                return Some(SolveStatus::Infeasible);
            }
        }
        let cx = dot(&o.c, &u.x);
        if cx < 0.0 && self.tau < self.kappa {
            let mut ax = vec![0.0; o.a.len()];
            o.a_mul(&u.x, &mut ax);
            let mut gx = vec![0.0; o.g.len()];
            o.g_mul(&u.x, &mut gx);
            let r = inf_norm(&ax).max(gx.iter().zip(&u.s).map(|(g, s)| (g + s).abs()).fold(0.0, f64::max));
            if r / (-cx) < self.tol.dual_infeasibility {
                return Some(SolveStatus::Unbounded);
            }
        }
        None
    }

    fn outcome(&self, status: SolveStatus, iterations: usize) -> Outcome {
        let u = self.unscaled(true);
        let (residuals, _, dual) = self.measure(&u);
        Outcome { status, x: u.x, y: u.y, dual_objective: dual, residuals, iterations }
    }

    fn run(mut self) -> Outcome {
        if !self.initialize() {
            return self.outcome(SolveStatus::NumericalFailure, 0);
        }
        let f = self.f;
        let (n, p, m) = (f.n, f.a.len(), f.g.len());
        let nu = self.cones().degree() as f64;
        let mut reg = self.tol.regularization;
        let mut best: Option<Snapshot> = None;
        for iter in 0..self.tol.max_iters {
            // Residuals of the embedding in the scaled space.
            let mut rx: Vec<f64> = f.c.iter().map(|c| c * self.tau).collect();
            f.a_t_mul_add(&self.y, &mut rx);
            f.g_t_mul_add(&self.z, &mut rx);
            let mut ry = vec![0.0; p];
            f.a_mul(&self.x, &mut ry);
            for (r, b) in ry.iter_mut().zip(&f.b) {
                *r -= b * self.tau;
            }
            let mut rz = vec![0.0; m];
            f.g_mul(&self.x, &mut rz);
            for i in 0..m {
                rz[i] += self.s[i] - f.h[i] * self.tau;
            }
            let rtau = self.kappa + dot(&f.c, &self.x) + dot(&f.b, &self.y) + dot(&f.h, &self.z);

            let u = self.unscaled(true);
            let (res, _, _) = self.measure(&u);
            log::trace!(
                "iter {iter}: pres {:.2e} dres {:.2e} gap {:.2e} tau {:.3e} kappa {:.3e}",
                res.primal_infeasibility,
                res.dual_infeasibility,
                res.relative_gap,
                self.tau,
                self.kappa
            );
            if res.primal_infeasibility <= self.tol.primal_infeasibility
                && res.dual_infeasibility <= self.tol.dual_infeasibility
                && res.relative_gap <= self.tol.relative_gap
            {
                return self.outcome(SolveStatus::Optimal, iter);
            }
            if let Some(status) = self.infeasibility() {
                return self.outcome(status, iter);
            }
            let score = self.score(&res);
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(self.snapshot(score, iter));
            } else if best.as_ref().is_some_and(|b| b.score <= INACCURATE_FACTOR && iter - b.iter >= STALL_ITERS) {
                return self.finish(SolveStatus::NumericalFailure, iter, best);
            }

            let Some(scaling) = Scaling::compute(self.cones(), &self.s, &self.z) else {
                return self.finish(SolveStatus::NumericalFailure, iter, best);
            };
            let lambda = scaling.lambda.clone();
            let kkt = self.factor(Some(&scaling), reg);
            let negc: Vec<f64> = f.c.iter().map(|v| -v).collect();
            let Some((x1, y1, z1)) = self.solve(&kkt, Some(&scaling), &negc, &f.b, &f.h) else {
                reg *= 100.0;
                if reg > 1e-3 {
                    return self.finish(SolveStatus::NumericalFailure, iter, best);
                }
                continue;
            };
            let denom = dot(&f.c, &x1) + dot(&f.b, &y1) + dot(&f.h, &z1) - self.kappa / self.tau;

            let cones = self.cones().clone();
            let direction = |sigma: f64, ds: &[f64], dkappa: f64| -> Option<Direction> {
                let mut lds = vec![0.0; m];
                cones.division(&lambda, ds, &mut lds);
                let mut wlds = vec![0.0; m];
                scaling.apply_w(&cones, &lds, &mut wlds);
                let r1: Vec<f64> = rx.iter().map(|v| -(1.0 - sigma) * v).collect();
                let r2: Vec<f64> = ry.iter().map(|v| -(1.0 - sigma) * v).collect();
                let r3: Vec<f64> = rz.iter().zip(&wlds).map(|(v, w)| -(1.0 - sigma) * v - w).collect();
                let r4 = -(1.0 - sigma) * rtau;
                let (x2, y2, z2) = self.solve(&kkt, Some(&scaling), &r1, &r2, &r3)?;
                let dtau = (r4 - dkappa / self.tau - (dot(&f.c, &x2) + dot(&f.b, &y2) + dot(&f.h, &z2))) / denom;
                let dx: Vec<f64> = x2.iter().zip(&x1).map(|(a, b)| a + dtau * b).collect();
                let dy: Vec<f64> = y2.iter().zip(&y1).map(|(a, b)| a + dtau * b).collect();
                let dz: Vec<f64> = z2.iter().zip(&z1).map(|(a, b)| a + dtau * b).collect();
                let mut wdz = vec![0.0; m];
                scaling.apply_w(&cones, &dz, &mut wdz);
                let mut w2dz = vec![0.0; m];
                scaling.apply_w(&cones, &wdz, &mut w2dz);
                let ds: Vec<f64> = wlds.iter().zip(&w2dz).map(|(a, b)| a - b).collect();
                let dkap = (dkappa - self.kappa * dtau) / self.tau;
                if !(dtau.is_finite() && dkap.is_finite()) {
                    return None;
                }
                Some(Direction { dx, dy, dz, ds, dtau, dkappa: dkap })
            };

            // Predictor.
            let mut ds_aff = vec![0.0; m];
            cones.product(&lambda, &lambda, &mut ds_aff);
            ds_aff.iter_mut().for_each(|v| *v = -*v);
            let Some(aff) = direction(0.0, &ds_aff, -self.tau * self.kappa) else {
                return self.finish(SolveStatus::NumericalFailure, iter, best);
            };
            let alpha_aff = self.max_step(&aff).min(1.0);
            let mu = (dot(&self.s, &self.z) + self.tau * self.kappa) / (nu + 1.0);
            let sigma = (1.0 - alpha_aff).powi(3);

            // Corrector.
            let mut winv_ds = vec![0.0; m];
            scaling.apply_w_inv(&cones, &aff.ds, &mut winv_ds);
            let mut w_dz = vec![0.0; m];
            scaling.apply_w(&cones, &aff.dz, &mut w_dz);
            let mut cross = vec![0.0; m];
            cones.product(&winv_ds, &w_dz, &mut cross);
            let mut ds = vec![0.0; m];
            cones.product(&lambda, &lambda, &mut ds);
            for i in 0..m {
                ds[i] = -ds[i] - cross[i];
            }
            for i in 0..cones.n_nonneg {
                ds[i] += sigma * mu;
            }
            for &(st, _) in &cones.socs {
                ds[st] += sigma * mu;
            }
            let dkappa = -self.tau * self.kappa - aff.dtau * aff.dkappa + sigma * mu;
            let Some(dir) = direction(sigma, &ds, dkappa) else {
                return self.finish(SolveStatus::NumericalFailure, iter, best);
            };
            let mut alpha = (STEP_FRACTION * self.max_step(&dir)).min(1.0);
            // Roundoff can put a cone element on the boundary even for a step
            // inside the computed maximum; back off until the scaling exists.
            loop {
                if alpha < 1e-12 {
                    return self.finish(SolveStatus::NumericalFailure, iter, best);
                }
                let s_new: Vec<f64> = self.s.iter().zip(&dir.ds).map(|(v, d)| v + alpha * d).collect();
                let z_new: Vec<f64> = self.z.iter().zip(&dir.dz).map(|(v, d)| v + alpha * d).collect();
                if Scaling::compute(&cones, &s_new, &z_new).is_some() {
                    break;
                }
                alpha *= 0.5;
            }
            for j in 0..n {
                self.x[j] += alpha * dir.dx[j];
            }
            for i in 0..p {
                self.y[i] += alpha * dir.dy[i];
            }
            for i in 0..m {
                self.z[i] += alpha * dir.dz[i];
                self.s[i] += alpha * dir.ds[i];
            }
            self.tau += alpha * dir.dtau;
            self.kappa += alpha * dir.dkappa;
        }
        let max_iters = self.tol.max_iters;
        self.finish(SolveStatus::IterationLimit, max_iters, best)
    }

    /// Ratio of the worst residual to its tolerance.
    fn score(&self, res: &Residuals) -> f64 {
        (res.primal_infeasibility / self.tol.primal_infeasibility)
            .max(res.dual_infeasibility / self.tol.dual_infeasibility)
            .max(res.relative_gap / self.tol.relative_gap)
    }

    fn snapshot(&self, score: f64, iter: usize) -> Snapshot {
        Snapshot { score, iter, x: self.x.clone(), y: self.y.clone(), z: self.z.clone(), s: self.s.clone(), tau: self.tau, kappa: self.kappa }
    }

    /// Ends a run that did not meet the tolerances, falling back to the best
    /// iterate seen when it is close enough.
    fn finish(mut self, status: SolveStatus, iter: usize, best: Option<Snapshot>) -> Outcome {
        match best {
            Some(b) if b.score <= INACCURATE_FACTOR => {
                log::debug!("interior point stalled ({status:?}); using iterate {} with residual ratio {:.1}", b.iter, b.score);
                self.x = b.x;
                self.y = b.y;
                self.z = b.z;
                self.s = b.s;
                self.tau = b.tau;
                self.kappa = b.kappa;
                self.outcome(SolveStatus::Optimal, iter)
            }
            _ => self.outcome(status, iter),
        }
    }

    fn max_step(&self, d: &Direction) -> f64 {
        let cones = self.cones();
        let mut a = cones.max_step(&self.s, &d.ds).min(cones.max_step(&self.z, &d.dz));
        if d.dtau < 0.0 {
            a = a.min(-self.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            a = a.min(-self.kappa / d.dkappa);
        }
        a
    }
}

struct Snapshot {
    score: f64,
    iter: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    ds: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::super::Cone;
    use super::*;

    fn tol() -> ToleranceSet {
        ToleranceSet::default()
    }

    #[test]
    fn bounded_scalar_maximization() {
        let mut p = ConeProgram::new();
        let x = p.add_var("x", 1.0, 10.0, -1.0);
        let sol = solve_cone(&p, &tol());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal[x] - 1.0).abs() < 1e-7);
        assert!((sol.objective + 1.0).abs() < 1e-7);
    }

    #[test]
    fn euclidean_norm_cone() {
        let mut p = ConeProgram::new();
        let t = p.add_var("t", f64::NEG_INFINITY, f64::INFINITY, -1.0);
        let u1 = p.add_var("u1", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        let u2 = p.add_var("u2", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        p.add_row("u1", vec![(u1, 1.0)], 3.0);
        p.add_row("u2", vec![(u2, 1.0)], 4.0);
        p.add_cone(Cone::Soc { head: t, tail: vec![u1, u2] });
        let sol = solve_cone(&p, &tol());
        assert_eq!(sol.status, SolveStatus::Optimal, "{sol:?}");
        assert!((sol.primal[t] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn rotated_cone_bounds_product() {
        // maximize u subject to u^2 <= 2 x y, x = 2, y = 4  ->  u = 4
        let mut p = ConeProgram::new();
        let x = p.add_var("x", 2.0, 2.0, 0.0);
        let y = p.add_var("y", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        let u = p.add_var("u", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        p.add_row("y", vec![(y, 1.0)], 4.0);
        p.add_cone(Cone::Rotated { x, y, tail: vec![u] });
        let sol = solve_cone(&p, &tol());
        assert_eq!(sol.status, SolveStatus::Optimal, "{sol:?}");
        assert!((sol.primal[u] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn detects_primal_infeasibility() {
        let mut p = ConeProgram::new();
        let x = p.add_var("x", 0.0, 1.0, 1.0);
        let y = p.add_var("y", 0.0, 1.0, 1.0);
        p.add_row("sum", vec![(x, 1.0), (y, 1.0)], 3.0);
        let sol = solve_cone(&p, &tol());
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn detects_unboundedness() {
        let mut p = ConeProgram::new();
        let x = p.add_var("x", 0.0, f64::INFINITY, 1.0);
        let y = p.add_var("y", 0.0, f64::INFINITY, 0.0);
        p.add_row("diff", vec![(x, 1.0), (y, -1.0)], 1.0);
        let sol = solve_cone(&p, &tol());
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn marginal_cost_multiplier() {
        // maximize -16 g subject to g = 2 (balance): d obj / d rhs = -16
        let mut p = ConeProgram::new();
        let g = p.add_var("g", 0.0, 10.0, -16.0);
        let row = p.add_row("bal", vec![(g, 1.0)], 2.0);
        let sol = solve_cone(&p, &tol());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.eq_multipliers[row] + 16.0).abs() < 1e-6, "{:?}", sol.eq_multipliers);
    }
}
