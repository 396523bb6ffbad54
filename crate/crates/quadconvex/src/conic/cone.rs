//! Cone kernels for the interior-point solver: scaled vectorization of
//! symmetric matrices, Nesterov-Todd scalings, Jordan-algebra products and
//! boundary step lengths for the PSD and second-order cones.
//!
//! Conventions. A PSD block of side `d` is stored as `svec`: column-major
//! lower triangle with off-diagonal entries scaled by sqrt(2), so that
//! `svec(U).svec(V) = trace(UV)`. A second-order cone block of length `k`
//! is `(u0, u1)` with `u0 >= ||u1||`; its Jordan determinant is
//! `u0^2 - ||u1||^2`.

use nalgebra::{DMatrix, DVector};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// One cone block of the product cone, in variable order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeSpec {
    /// Positive semidefinite matrices of side `dim` (svec length dim*(dim+1)/2).
    Psd { dim: usize },
    /// Second-order cone of vector length `dim` (>= 2).
    Soc { dim: usize },
}

impl ConeSpec {
    /// Length of the block inside the stacked variable vector.
    pub fn vec_len(&self) -> usize {
        match *self {
            ConeSpec::Psd { dim } => dim * (dim + 1) / 2,
            ConeSpec::Soc { dim } => dim,
        }
    }

    /// Jordan-algebra rank: on the central path `<x, s>` equals `mu` times
    /// the total rank (a PSD block counts its side, a SOC block counts 1).
    pub fn rank(&self) -> f64 {
        match *self {
            ConeSpec::Psd { dim } => dim as f64,
            ConeSpec::Soc { .. } => 1.0,
        }
    }
}

/// svec length for a matrix side.
pub fn svec_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Packs a symmetric matrix into svec form.
pub fn svec(mat: &DMatrix<f64>) -> DVector<f64> {
    let d = mat.nrows();
    let mut out = DVector::zeros(svec_len(d));
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            out[k] = if i == j { mat[(i, j)] } else { SQRT2 * mat[(i, j)] };
            k += 1;
        }
    }
    out
}

/// Unpacks svec form into a symmetric matrix.
pub fn smat(v: &[f64], d: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(d, d);
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            if i == j {
                out[(i, j)] = v[k];
            } else {
                let val = v[k] / SQRT2;
                out[(i, j)] = val;
                out[(j, i)] = val;
            }
            k += 1;
        }
    }
    out
}

/// Writes `svec(mat)` into a slice.
pub fn svec_into(mat: &DMatrix<f64>, out: &mut [f64]) {
    let d = mat.nrows();
    let mut k = 0;
    for j in 0..d {
        for i in j..d {
            out[k] = if i == j { mat[(i, j)] } else { SQRT2 * mat[(i, j)] };
            k += 1;
        }
    }
}

/// Unit element of a cone block, written into `out`.
pub fn unit_element(cone: &ConeSpec, out: &mut [f64]) {
    out.fill(0.0);
    match *cone {
        ConeSpec::Psd { dim } => {
            let mut k = 0;
            for j in 0..dim {
                out[k] = 1.0;
                k += dim - j;
            }
        }
        ConeSpec::Soc { .. } => out[0] = 1.0,
    }
}

/// Margin to the cone boundary: smallest eigenvalue for PSD blocks,
/// `u0 - ||u1||` for SOC blocks. Positive iff strictly interior.
pub fn cone_margin(cone: &ConeSpec, v: &[f64]) -> f64 {
    match *cone {
        ConeSpec::Psd { dim } => {
            let m = smat(v, dim);
            m.symmetric_eigen().eigenvalues.min()
        }
        ConeSpec::Soc { .. } => {
            let u1: f64 = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
            v[0] - u1
        }
    }
}

fn soc_det(v: &[f64]) -> f64 {
    let u1sq: f64 = v[1..].iter().map(|x| x * x).sum();
    v[0] * v[0] - u1sq
}

/// Nesterov-Todd scaling state of one cone block, computed from a strictly
/// interior primal/dual pair. The defining property is
/// `W^{-T} x = W s = lambda`.
#[derive(Debug, Clone)]
pub enum Scaling {
    Psd {
        /// Congruence factor: `W u = svec(R' U R)`.
        r: DMatrix<f64>,
        rinv: DMatrix<f64>,
        /// `T = R R'`, the quadratic representation used by `W'W`.
        t: DMatrix<f64>,
        /// Scaled point, diagonal: the singular values of `L_s' L_x`.
        lambda: DVector<f64>,
    },
    Soc {
        /// NT scaling point `w` with `P(w) s = x`.
        w: DVector<f64>,
        /// Jordan square root of `w`.
        wsqrt: DVector<f64>,
        /// `det(w)`.
        eta2: f64,
        lambda: DVector<f64>,
    },
}

/// Applies the quadratic representation `P(u) v = 2 u (u.v) - det(u) J v`
/// of a SOC element.
fn soc_quad_rep(u: &[f64], det_u: f64, v: &[f64], out: &mut [f64]) {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    out[0] = 2.0 * u[0] * dot - det_u * v[0];
    for i in 1..v.len() {
        out[i] = 2.0 * u[i] * dot + det_u * v[i];
    }
}

pub fn compute_scaling(cone: &ConeSpec, x: &[f64], s: &[f64]) -> Option<Scaling> {
    match *cone {
        ConeSpec::Psd { dim } => {
            let xm = smat(x, dim);
            let sm = smat(s, dim);
            let lx = xm.cholesky()?.l();
            let ls = sm.cholesky()?.l();
            let prod = ls.transpose() * &lx;
            let svd = prod.svd(true, true);
            let u = svd.u.as_ref()?;
            let vt = svd.v_t.as_ref()?;
            let sig = &svd.singular_values;
            if sig.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
                return None;
            }
            let _ = u;
            // R = L_x V Sigma^{-1/2}; R^{-1} = Sigma^{1/2} V' L_x^{-1}
            let v = vt.transpose();
            let mut r = &lx * v;
            for (j, col) in (0..dim).map(|j| (j, sig[j].sqrt())) {
                let inv = 1.0 / col;
                r.column_mut(j).scale_mut(inv);
            }
            let lx_inv = lx
                .clone()
                .solve_lower_triangular(&DMatrix::identity(dim, dim))?;
            let mut rinv = vt * lx_inv;
            for j in 0..dim {
                let f = sig[j].sqrt();
                rinv.row_mut(j).scale_mut(f);
            }
            let t = &r * r.transpose();
            Some(Scaling::Psd {
                r,
                rinv,
                t,
                lambda: DVector::from_fn(dim, |i, _| sig[i]),
            })
        }
        ConeSpec::Soc { dim } => {
            let det_x = soc_det(x);
            let det_s = soc_det(s);
            if det_x <= 0.0 || det_s <= 0.0 || x[0] <= 0.0 || s[0] <= 0.0 {
                return None;
            }
            let sx = det_x.sqrt();
            let ss = det_s.sqrt();
            let a: Vec<f64> = x.iter().map(|v| v / sx).collect();
            let b: Vec<f64> = s.iter().map(|v| v / ss).collect();
            let dot: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
            let gamma = ((1.0 + dot) / 2.0).sqrt();
            if !(gamma > 0.0) {
                return None;
            }
            let eta2 = (det_x / det_s).sqrt();
            let eta = eta2.sqrt();
            // w_bar = (a + J b) / (2 gamma), w = eta * w_bar
            let mut w = DVector::zeros(dim);
            w[0] = eta * (a[0] + b[0]) / (2.0 * gamma);
            for i in 1..dim {
                w[i] = eta * (a[i] - b[i]) / (2.0 * gamma);
            }
            // Jordan square root: u0 = sqrt((w0 + sqrt(det w))/2), u1 = w1/(2 u0)
            let u0 = ((w[0] + eta) / 2.0).sqrt();
            if !(u0 > 0.0) {
                return None;
            }
            let mut wsqrt = DVector::zeros(dim);
            wsqrt[0] = u0;
            for i in 1..dim {
                wsqrt[i] = w[i] / (2.0 * u0);
            }
            let mut lambda = DVector::zeros(dim);
            soc_quad_rep(wsqrt.as_slice(), eta, s, lambda.as_mut_slice());
            Some(Scaling::Soc {
                w,
                wsqrt,
                eta2,
                lambda,
            })
        }
    }
}

impl Scaling {
    /// Scaled point `lambda` as a block vector.
    pub fn lambda_vec(&self, out: &mut [f64]) {
        match self {
            Scaling::Psd { lambda, .. } => {
                let dim = lambda.len();
                out.fill(0.0);
                let mut k = 0;
                for j in 0..dim {
                    out[k] = lambda[j];
                    k += dim - j;
                }
            }
            Scaling::Soc { lambda, .. } => out.copy_from_slice(lambda.as_slice()),
        }
    }

    /// `W v`.
    pub fn apply_w(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Psd { r, .. } => {
                let dim = r.nrows();
                let m = smat(v, dim);
                svec_into(&(r.transpose() * m * r), out);
            }
            Scaling::Soc { wsqrt, eta2, .. } => {
                soc_quad_rep(wsqrt.as_slice(), eta2.sqrt(), v, out);
            }
        }
    }

    /// `W' v`.
    pub fn apply_wt(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Psd { r, .. } => {
                let dim = r.nrows();
                let m = smat(v, dim);
                svec_into(&(r * m * r.transpose()), out);
            }
            // P(w^{1/2}) is symmetric.
            Scaling::Soc { .. } => self.apply_w(v, out),
        }
    }

    /// `W^{-T} v`.
    pub fn apply_winv_t(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Psd { rinv, .. } => {
                let dim = rinv.nrows();
                let m = smat(v, dim);
                svec_into(&(rinv * m * rinv.transpose()), out);
            }
            Scaling::Soc { wsqrt, eta2, .. } => {
                // w^{-1/2} = J w^{1/2} / det(w^{1/2}); det(w^{1/2}) = sqrt(det w)
                let eta = eta2.sqrt();
                let dim = wsqrt.len();
                let mut winv = vec![0.0; dim];
                winv[0] = wsqrt[0] / eta;
                for i in 1..dim {
                    winv[i] = -wsqrt[i] / eta;
                }
                soc_quad_rep(&winv, 1.0 / eta, v, out);
            }
        }
    }

    /// `W'W v` (the full quadratic scaling used by the Schur complement).
    pub fn apply_h(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Psd { t, .. } => {
                let dim = t.nrows();
                let m = smat(v, dim);
                svec_into(&(t * m * t), out);
            }
            Scaling::Soc { w, eta2, .. } => {
                // P(w) v = 2 w (w.v) - det(w) J v
                soc_quad_rep(w.as_slice(), *eta2, v, out);
            }
        }
    }

    /// Congruence of one equality-constraint matrix by `T` for the PSD
    /// block: returns `svec(T F T)`.
    pub fn psd_congruence(&self, f: &DMatrix<f64>, out: &mut [f64]) {
        match self {
            Scaling::Psd { t, .. } => svec_into(&(t * f * t), out),
            Scaling::Soc { .. } => unreachable!("psd_congruence on a SOC block"),
        }
    }
}

/// Jordan product of two block vectors in the scaled space.
pub fn jordan_product(cone: &ConeSpec, u: &[f64], v: &[f64], out: &mut [f64]) {
    match *cone {
        ConeSpec::Psd { dim } => {
            let um = smat(u, dim);
            let vm = smat(v, dim);
            let prod = (&um * &vm + &vm * &um) * 0.5;
            svec_into(&prod, out);
        }
        ConeSpec::Soc { .. } => {
            let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            out[0] = dot;
            for i in 1..u.len() {
                out[i] = u[0] * v[i] + v[0] * u[i];
            }
        }
    }
}

/// Solves `lambda o u = v` for `u`, where `lambda` is the scaled point of
/// the block (diagonal for PSD blocks).
pub fn jordan_div_lambda(scaling: &Scaling, v: &[f64], out: &mut [f64]) -> bool {
    match scaling {
        Scaling::Psd { lambda, .. } => {
            let dim = lambda.len();
            let vm = smat(v, dim);
            let mut um = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    let denom = lambda[i] + lambda[j];
                    if denom <= 0.0 {
                        return false;
                    }
                    um[(i, j)] = 2.0 * vm[(i, j)] / denom;
                }
            }
            svec_into(&um, out);
            true
        }
        Scaling::Soc { lambda, .. } => {
            let det = soc_det(lambda.as_slice());
            if det <= 0.0 || lambda[0] <= 0.0 {
                return false;
            }
            let l1v: f64 = lambda.as_slice()[1..]
                .iter()
                .zip(&v[1..])
                .map(|(a, b)| a * b)
                .sum();
            let u0 = (lambda[0] * v[0] - l1v) / det;
            out[0] = u0;
            for i in 1..v.len() {
                out[i] = (v[i] - u0 * lambda[i]) / lambda[0];
            }
            true
        }
    }
}

/// `lambda o lambda` for a block.
pub fn lambda_squared(scaling: &Scaling, out: &mut [f64]) {
    match scaling {
        Scaling::Psd { lambda, .. } => {
            let dim = lambda.len();
            out.fill(0.0);
            let mut k = 0;
            for j in 0..dim {
                out[k] = lambda[j] * lambda[j];
                k += dim - j;
            }
        }
        Scaling::Soc { lambda, .. } => {
            let dot: f64 = lambda.iter().map(|a| a * a).sum();
            out[0] = dot;
            for i in 1..lambda.len() {
                out[i] = 2.0 * lambda[0] * lambda[i];
            }
        }
    }
}

/// Largest step `alpha` with `lambda + alpha * dir` still in the cone
/// (both the primal and the dual step reduce to this scaled form).
/// Returns `f64::INFINITY` when the ray never leaves the cone.
pub fn max_step(scaling: &Scaling, dir: &[f64]) -> f64 {
    match scaling {
        Scaling::Psd { lambda, .. } => {
            let dim = lambda.len();
            let dm = smat(dir, dim);
            // eigenvalues of Lambda^{-1/2} D Lambda^{-1/2}
            let mut m = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    m[(i, j)] = dm[(i, j)] / (lambda[i] * lambda[j]).sqrt();
                }
            }
            let emin = m.symmetric_eigen().eigenvalues.min();
            if emin >= 0.0 {
                f64::INFINITY
            } else {
                1.0 / (-emin)
            }
        }
        Scaling::Soc { lambda, .. } => {
            let l = lambda.as_slice();
            let det_l = soc_det(l);
            let beta = l[0] * dir[0] - l[1..].iter().zip(&dir[1..]).map(|(a, b)| a * b).sum::<f64>();
            let delta = soc_det(dir);
            // first positive root of det_l + 2 beta t + delta t^2 = 0
            let mut alpha = f64::INFINITY;
            if delta.abs() < 1e-300 {
                if beta < 0.0 {
                    alpha = det_l / (-2.0 * beta);
                }
            } else {
                let disc = beta * beta - delta * det_l;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    for root in [(-beta - sq) / delta, (-beta + sq) / delta] {
                        if root > 0.0 {
                            alpha = alpha.min(root);
                        }
                    }
                } else if delta < 0.0 {
                    // concave parabola with no real roots cannot stay positive
                    alpha = 0.0;
                }
            }
            // guard the linear coordinate as well
            if dir[0] < 0.0 {
                alpha = alpha.min(l[0] / (-dir[0]));
            }
            alpha
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
        let g = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        &g * g.transpose() + DMatrix::identity(d, d) * 0.5
    }

    fn random_soc_interior(rng: &mut impl Rng, k: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n1: f64 = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        v[0] = n1 + rng.gen_range(0.1..1.0);
        v
    }

    #[test]
    fn svec_roundtrip_preserves_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let d = rng.gen_range(1..=6);
            let a = random_spd(&mut rng, d);
            let b = random_spd(&mut rng, d);
            let va = svec(&a);
            let vb = svec(&b);
            assert!((va.dot(&vb) - (&a * &b).trace()).abs() < 1e-10);
            assert!((smat(va.as_slice(), d) - &a).abs().max() < 1e-12);
        }
    }

    #[test]
    fn nt_identities_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let d = rng.gen_range(1..=5);
            let cone = ConeSpec::Psd { dim: d };
            let x = svec(&random_spd(&mut rng, d));
            let s = svec(&random_spd(&mut rng, d));
            let sc = compute_scaling(&cone, x.as_slice(), s.as_slice()).unwrap();
            let len = cone.vec_len();
            let mut lam = vec![0.0; len];
            sc.lambda_vec(&mut lam);
            let mut ws = vec![0.0; len];
            sc.apply_w(s.as_slice(), &mut ws);
            let mut wix = vec![0.0; len];
            sc.apply_winv_t(x.as_slice(), &mut wix);
            for i in 0..len {
                assert!((ws[i] - lam[i]).abs() < 1e-8, "W s != lambda");
                assert!((wix[i] - lam[i]).abs() < 1e-8, "W^-T x != lambda");
            }
            // H s = x
            let mut hs = vec![0.0; len];
            sc.apply_h(s.as_slice(), &mut hs);
            for i in 0..len {
                assert!((hs[i] - x[i]).abs() < 1e-8 * (1.0 + x[i].abs()));
            }
        }
    }

    #[test]
    fn nt_identities_soc() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..50 {
            let k = rng.gen_range(2..=7);
            let cone = ConeSpec::Soc { dim: k };
            let x = random_soc_interior(&mut rng, k);
            let s = random_soc_interior(&mut rng, k);
            let sc = compute_scaling(&cone, &x, &s).unwrap();
            let mut lam = vec![0.0; k];
            sc.lambda_vec(&mut lam);
            let mut ws = vec![0.0; k];
            sc.apply_w(&s, &mut ws);
            let mut wix = vec![0.0; k];
            sc.apply_winv_t(&x, &mut wix);
            for i in 0..k {
                assert!((ws[i] - lam[i]).abs() < 1e-8, "W s != lambda at {i}");
                assert!((wix[i] - lam[i]).abs() < 1e-8, "W^-T x != lambda at {i}");
            }
            let mut hs = vec![0.0; k];
            sc.apply_h(&s, &mut hs);
            for i in 0..k {
                assert!((hs[i] - x[i]).abs() < 1e-8 * (1.0 + x[i].abs()));
            }
        }
    }

    #[test]
    fn jordan_division_inverts_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let d = rng.gen_range(1..=4);
            let cone = ConeSpec::Psd { dim: d };
            let x = svec(&random_spd(&mut rng, d));
            let s = svec(&random_spd(&mut rng, d));
            let sc = compute_scaling(&cone, x.as_slice(), s.as_slice()).unwrap();
            let len = cone.vec_len();
            let mut lam = vec![0.0; len];
            sc.lambda_vec(&mut lam);
            let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut u = vec![0.0; len];
            assert!(jordan_div_lambda(&sc, &v, &mut u));
            let mut back = vec![0.0; len];
            jordan_product(&cone, &lam, &u, &mut back);
            for i in 0..len {
                assert!((back[i] - v[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn max_step_hits_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..40 {
            let k = rng.gen_range(2..=5);
            let cone = ConeSpec::Soc { dim: k };
            let x = random_soc_interior(&mut rng, k);
            let s = random_soc_interior(&mut rng, k);
            let sc = compute_scaling(&cone, &x, &s).unwrap();
            let mut lam = vec![0.0; k];
            sc.lambda_vec(&mut lam);
            let dir: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let alpha = max_step(&sc, &dir);
            if alpha.is_finite() {
                let at = |t: f64| {
                    let v: Vec<f64> = lam.iter().zip(&dir).map(|(l, d)| l + t * d).collect();
                    cone_margin(&cone, &v)
                };
                assert!(at(alpha * 0.999) >= -1e-9);
                assert!(at(alpha * 1.01) <= 1e-9);
            }
        }
    }
}
