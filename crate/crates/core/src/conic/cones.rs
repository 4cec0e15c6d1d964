//! Cone arithmetic for the product of a nonnegative orthant and second-order
//! cones: Jordan products, step-to-boundary and Nesterov-Todd scaling.

/// Layout of the stacked slack vector: `n_nonneg` orthant entries first, then
/// each second-order cone as `(start, dim)`.
#[derive(Debug, Clone, Default)]
pub(crate) struct ConeSet {
    pub n_nonneg: usize,
    pub socs: Vec<(usize, usize)>,
    pub dim: usize,
}

impl ConeSet {
    pub fn new(n_nonneg: usize, soc_dims: &[usize]) -> Self {
        let mut socs = Vec::with_capacity(soc_dims.len());
        let mut start = n_nonneg;
        for &d in soc_dims {
            socs.push((start, d));
            start += d;
        }
        Self { n_nonneg, socs, dim: start }
    }

    pub fn degree(&self) -> usize {
        self.n_nonneg + self.socs.len()
    }

    /// Smallest "eigenvalue" of `s`: positive iff `s` is interior.
    pub fn min_margin(&self, s: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for &v in &s[..self.n_nonneg] {
            m = m.min(v);
        }
        for &(st, d) in &self.socs {
            m = m.min(s[st] - norm(&s[st + 1..st + d]));
        }
        m
    }

    /// `s + alpha * e` with `e` the cone identity.
    pub fn shift(&self, s: &mut [f64], alpha: f64) {
        for v in &mut s[..self.n_nonneg] {
            *v += alpha;
        }
        for &(st, _) in &self.socs {
            s[st] += alpha;
        }
    }

    /// Pushes `s` into the interior so that its smallest margin is at least 1.
    pub fn push_interior(&self, s: &mut [f64]) {
        let m = self.min_margin(s);
        if m < 1.0 {
            self.shift(s, 1.0 - m);
        }
    }

    /// Largest `alpha` with `s + alpha * ds` in the cone (may be infinite).
    pub fn max_step(&self, s: &[f64], ds: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..self.n_nonneg {
            if ds[i] < 0.0 {
                alpha = alpha.min(-s[i] / ds[i]);
            }
        }
        for &(st, d) in &self.socs {
            alpha = alpha.min(soc_max_step(&s[st..st + d], &ds[st..st + d]));
        }
        alpha
    }

    /// Jordan product `u o v`.
    pub fn product(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.n_nonneg {
            out[i] = u[i] * v[i];
        }
        for &(st, d) in &self.socs {
            let (u0, u1) = (u[st], &u[st + 1..st + d]);
            let (v0, v1) = (v[st], &v[st + 1..st + d]);
            out[st] = u0 * v0 + dot(u1, v1);
            for k in 1..d {
                out[st + k] = u0 * v[st + k] + v0 * u[st + k];
            }
        }
    }

    /// Solves `u o x = d` for `x`.
    pub fn division(&self, u: &[f64], d: &[f64], out: &mut [f64]) {
        for i in 0..self.n_nonneg {
            out[i] = d[i] / u[i];
        }
        for &(st, dim) in &self.socs {
            let u0 = u[st];
            let u1 = &u[st + 1..st + dim];
            let d0 = d[st];
            let d1 = &d[st + 1..st + dim];
            let rho = (u0 - norm(u1)) * (u0 + norm(u1));
            let x0 = (u0 * d0 - dot(u1, d1)) / rho;
            out[st] = x0;
            for k in 1..dim {
                out[st + k] = (d[st + k] - x0 * u[st + k]) / u0;
            }
        }
    }
}

/// NT scaling of one second-order cone block.
#[derive(Debug, Clone)]
pub(crate) struct SocScaling {
    pub w: Vec<f64>, // dense dim x dim, row-major, symmetric
    pub w_inv: Vec<f64>,
}

/// Nesterov-Todd scaling `W` with `W z = W^{-1} s = lambda`.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    pub orthant: Vec<f64>,
    pub socs: Vec<SocScaling>,
    pub lambda: Vec<f64>,
}

impl Scaling {
    pub fn compute(cones: &ConeSet, s: &[f64], z: &[f64]) -> Option<Scaling> {
        let mut orthant = Vec::with_capacity(cones.n_nonneg);
        let mut lambda = vec![0.0; cones.dim];
        for i in 0..cones.n_nonneg {
            if s[i] <= 0.0 || z[i] <= 0.0 {
                return None;
            }
            orthant.push((s[i] / z[i]).sqrt());
            lambda[i] = (s[i] * z[i]).sqrt();
        }
        let mut socs = Vec::with_capacity(cones.socs.len());
        for &(st, d) in &cones.socs {
            let sb = &s[st..st + d];
            let zb = &z[st..st + d];
            let s_det = (sb[0] - norm(&sb[1..])) * (sb[0] + norm(&sb[1..]));
            let z_det = (zb[0] - norm(&zb[1..])) * (zb[0] + norm(&zb[1..]));
            if !(s_det > 0.0 && z_det > 0.0 && sb[0] > 0.0 && zb[0] > 0.0) {
                return None;
            }
            let s_scale = s_det.sqrt();
            let z_scale = z_det.sqrt();
            let s_bar: Vec<f64> = sb.iter().map(|v| v / s_scale).collect();
            let z_bar: Vec<f64> = zb.iter().map(|v| v / z_scale).collect();
            let gamma = ((1.0 + dot(&s_bar, &z_bar)) / 2.0).sqrt();
            let mut w_bar = vec![0.0; d];
            w_bar[0] = (s_bar[0] + z_bar[0]) / (2.0 * gamma);
            for k in 1..d {
                w_bar[k] = (s_bar[k] - z_bar[k]) / (2.0 * gamma);
            }
            let eta = (s_det / z_det).powf(0.25);
            // W = eta [[w0, w1'], [w1, I + w1 w1' / (1 + w0)]]; W^{-1} flips the sign of w1.
            let mut w = vec![0.0; d * d];
            let mut w_inv = vec![0.0; d * d];
            let w0 = w_bar[0];
            for i in 0..d {
                for j in 0..d {
                    let (v, sign) = match (i, j) {
                        (0, 0) => (w0, 1.0),
                        (0, _) => (w_bar[j], -1.0),
                        (_, 0) => (w_bar[i], -1.0),
                        _ => (if i == j { 1.0 } else { 0.0 } + w_bar[i] * w_bar[j] / (1.0 + w0), 1.0),
                    };
                    w[i * d + j] = eta * v;
                    w_inv[i * d + j] = sign * v / eta;
                }
            }
            for i in 0..d {
                lambda[st + i] = (0..d).map(|j| w[i * d + j] * zb[j]).sum();
            }
            socs.push(SocScaling { w, w_inv });
        }
        Some(Scaling { orthant, socs, lambda })
    }

    /// `out = W v`.
    pub fn apply_w(&self, cones: &ConeSet, v: &[f64], out: &mut [f64]) {
        for i in 0..cones.n_nonneg {
            out[i] = self.orthant[i] * v[i];
        }
        for (k, &(st, d)) in cones.socs.iter().enumerate() {
            let w = &self.socs[k].w;
            for i in 0..d {
                out[st + i] = (0..d).map(|j| w[i * d + j] * v[st + j]).sum();
            }
        }
    }

    /// `out = W^{-1} v`.
    pub fn apply_w_inv(&self, cones: &ConeSet, v: &[f64], out: &mut [f64]) {
        for i in 0..cones.n_nonneg {
            out[i] = v[i] / self.orthant[i];
        }
        for (k, &(st, d)) in cones.socs.iter().enumerate() {
            let w = &self.socs[k].w_inv;
            for i in 0..d {
                out[st + i] = (0..d).map(|j| w[i * d + j] * v[st + j]).sum();
            }
        }
    }
}

fn soc_max_step(s: &[f64], ds: &[f64]) -> f64 {
    let (s0, s1) = (s[0], &s[1..]);
    let (d0, d1) = (ds[0], &ds[1..]);
    let a = d0 * d0 - dot(d1, d1);
    let b = s0 * d0 - dot(s1, d1);
    let c = (s0 - norm(s1)).max(0.0) * (s0 + norm(s1));
    let mut alpha = if d0 < 0.0 { -s0 / d0 } else { f64::INFINITY };
    if c <= 0.0 {
        return 0.0;
    }
    // f(t) = a t^2 + 2 b t + c must stay nonnegative.
    if a == 0.0 {
        if b < 0.0 {
            alpha = alpha.min(-c / (2.0 * b));
        }
        return alpha;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return alpha;
    }
    let sq = disc.sqrt();
    let q = -(b + b.signum() * sq);
    let mut roots = [f64::INFINITY, f64::INFINITY];
    if q != 0.0 {
        roots = [q / a, c / q];
    } else {
        roots[0] = (-b + sq) / a;
        roots[1] = (-b - sq) / a;
    }
    for r in roots {
        if r > 0.0 {
            alpha = alpha.min(r);
        }
    }
    alpha
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soc_step_hits_boundary() {
        let cones = ConeSet::new(0, &[3]);
        let s = [2.0, 0.0, 0.0];
        let ds = [0.0, 1.0, 0.0];
        let a = cones.max_step(&s, &ds);
        assert!((a - 2.0).abs() < 1e-12);
        let ds = [-1.0, 0.0, 0.0];
        assert!((cones.max_step(&s, &ds) - 2.0).abs() < 1e-12);
        let ds = [1.0, 0.5, 0.0];
        assert!(cones.max_step(&s, &ds).is_infinite());
    }

    #[test]
    fn division_inverts_product() {
        let cones = ConeSet::new(2, &[3]);
        let u = [1.5, 2.0, 3.0, 0.5, -1.0];
        let x = [0.3, -0.7, 0.2, 1.1, 0.4];
        let mut d = [0.0; 5];
        cones.product(&u, &x, &mut d);
        let mut back = [0.0; 5];
        cones.division(&u, &d, &mut back);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn nt_scaling_maps_z_and_s_to_the_same_point() {
        let cones = ConeSet::new(1, &[3]);
        let s = [2.0, 3.0, 1.0, -0.5];
        let z = [0.5, 1.5, -0.2, 0.7];
        let sc = Scaling::compute(&cones, &s, &z).unwrap();
        let mut wz = [0.0; 4];
        sc.apply_w(&cones, &z, &mut wz);
        let mut winv_s = [0.0; 4];
        sc.apply_w_inv(&cones, &s, &mut winv_s);
        for i in 0..4 {
            assert!((wz[i] - winv_s[i]).abs() < 1e-12, "{wz:?} vs {winv_s:?}");
            assert!((wz[i] - sc.lambda[i]).abs() < 1e-12);
        }
    }
}
