//! Independent oracles and random instance generators shared by the
//! integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdcoord::conic::{Cone, ConeProgram};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Box-bounded LP `max c'x, A x = b, l <= x <= u` with a guaranteed interior point.
pub struct RandomLp {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RandomLp {
    pub fn generate(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Self {
        let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..0.0)).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(1.0..6.0)).collect();
        let x0: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| l + (u - l) * rng.random_range(0.2..0.8)).collect();
        let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let b = a.iter().map(|row| row.iter().zip(&x0).map(|(p, q)| p * q).sum()).collect();
        let c = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        Self { c, a, b, lower, upper }
    }

    pub fn program(&self) -> ConeProgram {
        let mut p = ConeProgram::new();
        for j in 0..self.c.len() {
            p.add_var(format!("x{j}"), self.lower[j], self.upper[j], self.c[j]);
        }
        for (i, row) in self.a.iter().enumerate() {
            p.add_row(format!("r{i}"), row.iter().copied().enumerate().collect(), self.b[i]);
        }
        p
    }

    /// Optimum by enumerating every basic solution: all but `m` variables at
    /// one of their bounds, the rest solved from `A x = b`.
    pub fn vertex_optimum(&self) -> Option<f64> {
        let n = self.c.len();
        let m = self.a.len();
        let mut best: Option<f64> = None;
        for basis in combinations(n, m) {
            let nonbasic: Vec<usize> = (0..n).filter(|j| !basis.contains(j)).collect();
            for mask in 0..(1u32 << nonbasic.len()) {
                let mut x = vec![0.0; n];
                for (k, &j) in nonbasic.iter().enumerate() {
                    x[j] = if mask & (1 << k) != 0 { self.upper[j] } else { self.lower[j] };
                }
                let bmat = DMatrix::from_fn(m, m, |i, k| self.a[i][basis[k]]);
                let rhs = DVector::from_fn(m, |i, _| {
                    self.b[i] - nonbasic.iter().map(|&j| self.a[i][j] * x[j]).sum::<f64>()
                });
                let Some(sol) = bmat.lu().solve(&rhs) else { continue };
                for (k, &j) in basis.iter().enumerate() {
                    x[j] = sol[k];
                }
                let feasible = (0..n).all(|j| x[j] >= self.lower[j] - 1e-9 && x[j] <= self.upper[j] + 1e-9);
                if feasible {
                    let v: f64 = self.c.iter().zip(&x).map(|(c, x)| c * x).sum();
                    best = Some(best.map_or(v, |b: f64| b.max(v)));
                }
            }
        }
        best
    }
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            rec(j + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `max c'u, A u = b, ||u|| <= t, t <= radius`: the feasible set is a ball in
/// the affine subspace, so the optimum has a closed form.
pub struct RandomBallSocp {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub radius: f64,
}

impl RandomBallSocp {
    pub fn generate(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Self {
        let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let u0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = a.iter().map(|row| row.iter().zip(&u0).map(|(p, q)| p * q).sum()).collect();
        let norm0 = u0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let radius = norm0 + rng.random_range(0.5..3.0);
        let c = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        Self { c, a, b, radius }
    }

    pub fn program(&self) -> ConeProgram {
        let n = self.c.len();
        let mut p = ConeProgram::new();
        let u: Vec<usize> = (0..n).map(|j| p.add_var(format!("u{j}"), f64::NEG_INFINITY, f64::INFINITY, self.c[j])).collect();
        let t = p.add_var("t", f64::NEG_INFINITY, self.radius, 0.0);
        for (i, row) in self.a.iter().enumerate() {
            p.add_row(format!("r{i}"), row.iter().copied().enumerate().collect(), self.b[i]);
        }
        p.add_cone(Cone::Soc { head: t, tail: u });
        p
    }

    pub fn closed_form(&self) -> f64 {
        let n = self.c.len();
        let m = self.a.len();
        let a = DMatrix::from_fn(m, n, |i, j| self.a[i][j]);
        let b = DVector::from_column_slice(&self.b);
        // Minimum-norm particular solution and the projector onto the null space.
        let full = DMatrix::<f64>::identity(n, n);
        let (up, proj) = if m == 0 {
            (DVector::zeros(n), full)
        } else {
            let svd = a.svd(true, true);
            let up = svd.solve(&b, 1e-12).expect("svd solve");
            let v_t = svd.v_t.expect("v_t");
            (up, &full - v_t.transpose() * &v_t)
        };
        let c = DVector::from_column_slice(&self.c);
        let cn = &proj * &c;
        let rho2 = self.radius * self.radius - up.norm_squared();
        c.dot(&up) + rho2.max(0.0).sqrt() * cn.norm()
    }
}

/// Maximum violation of equalities, bounds and cones at `x`.
pub fn primal_violation(p: &ConeProgram, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for row in &p.rows {
        let lhs: f64 = row.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
        worst = worst.max((lhs - row.rhs).abs());
    }
    for j in 0..p.n_vars() {
        worst = worst.max(p.lower[j] - x[j]).max(x[j] - p.upper[j]);
    }
    for cone in &p.cones {
        let gap = match cone {
            Cone::Soc { head, tail } => x[*head] - tail.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt(),
            Cone::Rotated { x: a, y, tail } => {
                let s = x[*a] + x[*y];
                let d = x[*a] - x[*y];
                let t2: f64 = tail.iter().map(|&j| 2.0 * x[j] * x[j]).sum();
                s - (d * d + t2).sqrt()
            }
        };
        worst = worst.max(-gap);
    }
    worst
}

/// Best objective over every 0/1 assignment of `binaries`, each pattern
/// solved as a plain cone program. `None` when no pattern is feasible.
pub fn enumerate_binaries(base: &ConeProgram, binaries: &[usize]) -> Option<f64> {
    assert!(binaries.len() <= 16, "enumeration is exponential");
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << binaries.len()) {
        let mut p = base.clone();
        for (i, &b) in binaries.iter().enumerate() {
            p.fix(b, ((mask >> i) & 1) as f64);
        }
        let sol = tdcoord::conic::solve_cone(&p, &tdcoord::conic::ToleranceSet::default());
        if sol.is_optimal() {
            best = Some(best.map_or(sol.objective, |v: f64| v.max(sol.objective)));
        }
    }
    best
}
