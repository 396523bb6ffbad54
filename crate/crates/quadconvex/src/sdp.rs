//! The Kronecker-lifted convex relaxation of the exact Lipschitz constant.
//!
//! For a map with quadratic parts `A_1..A_m` and `S = sum A_i'A_i`, the
//! squared constant is bounded by the optimum of
//!
//! ```text
//!   maximize   (1/m) s1 + sqrt((m-1)/m) s2
//!   subject to s1^2 <= C1.Z,  s2^2 <= C2.Z,
//!              trace(Z) = 1,  vec(I)'Z vec(I) = 1,  ||Z vec(I)|| <= 1,
//!              Z psd,
//! ```
//!
//! where `C1 = S (x) S` and `C2 = sum_{i,j} (A_i'A_j) (x) (A_i'A_j) - C1/m`
//! act on the lifted variable `Z` of side `d = n^2` (the relaxation of
//! `(y (x) y)(y (x) y)'`). The square roots are handled with epigraph
//! variables in rotated quadratic cones, which an orthogonal change of
//! variables turns into plain second-order cones, so the whole problem is
//! solved by the embedded PSD x SOC interior-point solver in [`crate::conic`].

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::conic::{self, ConeSpec, ConicProblem, Residuals, SolverOptions};
use crate::error::{Error, Result};
use crate::quadmap::QuadraticMap;
use crate::spectral::{kron, sym_eig_extremes, vectorize};

/// Side limit for the dense lifted variable (d = n^2).
pub const MAX_LIFTED_DIM: usize = 400;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Assembled relaxation data.
#[derive(Debug, Clone)]
pub struct RelaxationProblem {
    /// Lifted dimension n^2.
    pub d: usize,
    /// Component count; fixes the objective weights `1/m`, `sqrt((m-1)/m)`.
    pub m: usize,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    /// `vec(I)`: unit entries at the diagonal positions under column stacking.
    pub e: DVector<f64>,
}

/// Result of a relaxation solve.
#[derive(Debug, Clone)]
pub struct RelaxationSolution {
    pub z: DMatrix<f64>,
    pub s1: f64,
    pub s2: f64,
    /// `(1/m) s1 + sqrt((m-1)/m) s2`, an upper bound on the squared
    /// Lipschitz constant.
    pub objective: f64,
    /// `sqrt(objective)`.
    pub l_tilde: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub converged: bool,
}

/// Violations of the five relaxation constraints by a returned `Z`.
#[derive(Debug, Clone, Copy)]
pub struct ConstraintViolations {
    pub trace_dev: f64,
    pub quad_form_dev: f64,
    pub soc_excess: f64,
    pub psd_deficit: f64,
    pub c2_deficit: f64,
}

impl ConstraintViolations {
    pub fn max(&self) -> f64 {
        self.trace_dev
            .max(self.quad_form_dev)
            .max(self.soc_excess)
            .max(self.psd_deficit)
            .max(self.c2_deficit)
    }
}

impl RelaxationSolution {
    pub fn constraint_violations(&self, prob: &RelaxationProblem) -> ConstraintViolations {
        let ze = &self.z * &prob.e;
        let (zmin, _) = sym_eig_extremes(&self.z).expect("solution Z is finite and symmetric");
        ConstraintViolations {
            trace_dev: (self.z.trace() - 1.0).abs(),
            quad_form_dev: (prob.e.dot(&ze) - 1.0).abs(),
            soc_excess: (ze.norm() - 1.0).max(0.0),
            psd_deficit: (-zmin).max(0.0),
            c2_deficit: (-self.z.dot(&prob.c2)).max(0.0),
        }
    }
}

fn objective_weights(m: usize) -> (f64, f64) {
    let mf = m as f64;
    (1.0 / mf, ((mf - 1.0) / mf).sqrt())
}

/// Assembles `C1`, `C2` and `vec(I)` for a map.
pub fn build_relaxation(map: &QuadraticMap) -> Result<RelaxationProblem> {
    let n = map.n();
    let m = map.m();
    let d = n * n;
    if d > MAX_LIFTED_DIM {
        return Err(Error::Capacity(format!(
            "lifted dimension n^2 = {d} exceeds the dense limit {MAX_LIFTED_DIM}"
        )));
    }
    let quads = map.quad_parts();
    let mut s = DMatrix::zeros(n, n);
    for a in quads {
        s += a.transpose() * a;
    }
    let c1 = kron(&s, &s);
    let mut c2 = DMatrix::zeros(d, d);
    for ai in quads {
        for aj in quads {
            let k = ai.transpose() * aj;
            c2 += kron(&k, &k);
        }
    }
    c2 -= &c1 / m as f64;
    // exact by construction up to rounding; enforce symmetry bit-for-bit
    let c1 = (&c1 + c1.transpose()) * 0.5;
    let c2 = (&c2 + c2.transpose()) * 0.5;
    let e = vectorize(&DMatrix::identity(n, n));
    Ok(RelaxationProblem { d, m, c1, c2, e })
}

/// A strictly feasible interior point `alpha I + beta vec(I)vec(I)'` of the
/// lifted constraints (exists for n >= 2); used for the trivial zero-map
/// solution and documented as the reference start when diagnosing solves.
pub fn interior_feasible_z(d: usize, e: &DVector<f64>) -> DMatrix<f64> {
    let n = (d as f64).sqrt().round() as usize;
    if n <= 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    let nf = n as f64;
    let alpha = 1.0 / (nf * (nf + 1.0));
    let beta = 1.0 / (nf * (nf + 1.0));
    DMatrix::identity(d, d) * alpha + e * e.transpose() * beta
}

/// Solves the relaxation to the requested tolerance (max of equality
/// residual, cone violation and relative duality gap on the returned
/// solution). `tol` must lie in `[1e-9, 1e-2]`.
pub fn solve_relaxation(prob: &RelaxationProblem, tol: f64) -> Result<RelaxationSolution> {
    if !(1e-9..=1e-2).contains(&tol) {
        return Err(Error::Validation(format!(
            "solver tolerance {tol:.1e} outside [1e-9, 1e-2]"
        )));
    }
    let d = prob.d;
    let m = prob.m;
    let (w1, w2) = objective_weights(m);

    // Scale invariance: dividing all A_i by rho divides C's by rho^4 and the
    // objective by rho^2. Normalize so lambda_max(C1) = 1.
    let (_, c1_max) = sym_eig_extremes(&prob.c1)?;
    if c1_max <= 0.0 {
        // all quadratic parts vanish: the image bound is zero
        return Ok(RelaxationSolution {
            z: interior_feasible_z(d, &prob.e),
            s1: 0.0,
            s2: 0.0,
            objective: 0.0,
            l_tilde: 0.0,
            residuals: Residuals::default(),
            iterations: 0,
            converged: true,
        });
    }
    let rho2 = c1_max.sqrt(); // = lambda_max(S), scales like A^2
    if d == 1 {
        // Z = [1] is the only feasible point.
        let c1v = prob.c1[(0, 0)];
        let c2v = prob.c2[(0, 0)].max(0.0);
        let s1 = c1v.max(0.0).sqrt();
        let s2 = c2v.sqrt();
        let objective = w1 * s1 + w2 * s2;
        return Ok(RelaxationSolution {
            z: DMatrix::from_element(1, 1, 1.0),
            s1,
            s2,
            objective,
            l_tilde: objective.sqrt(),
            residuals: Residuals::default(),
            iterations: 0,
            converged: true,
        });
    }

    let c1s = &prob.c1 / (rho2 * rho2);
    let c2s = &prob.c2 / (rho2 * rho2);
    let use_cone2 = m >= 2 && c2s.amax() > 0.0;

    let dvec = conic::svec_len(d);
    let mut cones = vec![ConeSpec::Psd { dim: d }, ConeSpec::Soc { dim: 3 }];
    if use_cone2 {
        cones.push(ConeSpec::Soc { dim: 3 });
    }
    cones.push(ConeSpec::Soc { dim: d + 1 });
    let off_q1 = dvec;
    let off_q2 = off_q1 + 3;
    let off_soc = if use_cone2 { off_q2 + 3 } else { off_q2 };
    let total = off_soc + d + 1;
    let neq = 2 + 2 + if use_cone2 { 2 } else { 0 } + 1 + d;

    let mut a = DMatrix::zeros(neq, total);
    let mut b = DVector::zeros(neq);
    let svec_c1 = conic::svec(&c1s);
    let svec_c2 = conic::svec(&c2s);
    let eye = DMatrix::identity(d, d);
    let svec_i = conic::svec(&eye);
    let ee = &prob.e * prob.e.transpose();
    let svec_ee = conic::svec(&ee);

    let mut row = 0;
    // trace(Z) = 1
    for k in 0..dvec {
        a[(row, k)] = svec_i[k];
    }
    b[row] = 1.0;
    row += 1;
    // e'Z e = 1
    for k in 0..dvec {
        a[(row, k)] = svec_ee[k];
    }
    b[row] = 1.0;
    row += 1;
    // C1.Z - (p1 + q1)/sqrt2 = 0 ; (p1 - q1)/sqrt2 = 1/2
    for k in 0..dvec {
        a[(row, k)] = svec_c1[k];
    }
    a[(row, off_q1)] = -1.0 / SQRT2;
    a[(row, off_q1 + 1)] = -1.0 / SQRT2;
    row += 1;
    a[(row, off_q1)] = 1.0 / SQRT2;
    a[(row, off_q1 + 1)] = -1.0 / SQRT2;
    b[row] = 0.5;
    row += 1;
    if use_cone2 {
        for k in 0..dvec {
            a[(row, k)] = svec_c2[k];
        }
        a[(row, off_q2)] = -1.0 / SQRT2;
        a[(row, off_q2 + 1)] = -1.0 / SQRT2;
        row += 1;
        a[(row, off_q2)] = 1.0 / SQRT2;
        a[(row, off_q2 + 1)] = -1.0 / SQRT2;
        b[row] = 0.5;
        row += 1;
    }
    // t = 1
    a[(row, off_soc)] = 1.0;
    b[row] = 1.0;
    row += 1;
    // w_i - (Z e)_i = 0, with (Z e)_i = <(ehat_i e' + e ehat_i')/2, Z>
    for i in 0..d {
        let mut g = DMatrix::zeros(d, d);
        for j in 0..d {
            g[(i, j)] += prob.e[j] * 0.5;
            g[(j, i)] += prob.e[j] * 0.5;
        }
        let sg = conic::svec(&g);
        for k in 0..dvec {
            a[(row, k)] = -sg[k];
        }
        a[(row, off_soc + 1 + i)] = 1.0;
        row += 1;
    }
    debug_assert_eq!(row, neq);

    let mut objective = DVector::zeros(total);
    objective[off_q1 + 2] = -w1;
    if use_cone2 {
        objective[off_q2 + 2] = -w2;
    }

    let problem = ConicProblem {
        objective,
        eq_matrix: a,
        eq_rhs: b,
        cones,
    };
    // Solve tighter than requested: the contract is on the residuals of the
    // returned solution, not on the solver's internal relative measures.
    let opts = SolverOptions {
        tol: tol / 4.0,
        max_iter: 500,
        step_fraction: 0.99,
    };

    let finish = |sol: conic::Solution, converged: bool| -> RelaxationSolution {
        let z = conic::smat(&sol.x.as_slice()[..dvec], d);
        let z = (&z + z.transpose()) * 0.5;
        let s1 = sol.x[off_q1 + 2] * rho2;
        let s2 = if use_cone2 { sol.x[off_q2 + 2] * rho2 } else { 0.0 };
        let objective = w1 * s1 + w2 * s2;
        RelaxationSolution {
            z,
            s1,
            s2,
            objective,
            l_tilde: objective.max(0.0).sqrt(),
            residuals: sol.residuals,
            iterations: sol.iterations,
            converged,
        }
    };

    match conic::solve(&problem, &opts) {
        Ok(sol) => {
            let out = finish(sol, true);
            let viol = out.constraint_violations(prob);
            let worst = viol.max().max(out.residuals.gap);
            if worst > tol {
                return Err(Error::NonConvergence {
                    iterations: out.iterations,
                    best_residual: worst,
                    best: Box::new(out),
                });
            }
            Ok(out)
        }
        Err(conic::ConicError::IterationLimit { best_residual, best }) => {
            Err(Error::NonConvergence {
                iterations: best.iterations,
                best_residual,
                best: Box::new(finish(*best, false)),
            })
        }
        Err(conic::ConicError::Breakdown {
            iteration,
            reason,
            best,
        }) => match best {
            Some(sol) => {
                // A late breakdown can still deliver the contract; keep the
                // iterate if it already meets tol.
                let out = finish(*sol, false);
                let viol = out.constraint_violations(prob);
                let worst = viol.max().max(out.residuals.gap);
                if worst <= tol {
                    let mut out = out;
                    out.converged = true;
                    Ok(out)
                } else {
                    Err(Error::NonConvergence {
                        iterations: iteration,
                        best_residual: worst,
                        best: Box::new(out),
                    })
                }
            }
            None => Err(Error::Numerical(format!(
                "conic solve broke down at iteration {iteration}: {reason}"
            ))),
        },
        Err(e) => Err(Error::Numerical(e.to_string())),
    }
}

/// Convenience: build and solve for a map.
pub fn l_tilde(map: &QuadraticMap, tol: f64) -> Result<RelaxationSolution> {
    solve_relaxation(&build_relaxation(map)?, tol)
}

/// The relaxation objective evaluated at the rank-one point `Z = zz'`,
/// `z = y (x) y`, for a unit direction `y`:
///
/// ```text
///   B(zz') = (1/m) y'Sy + sqrt((m-1)/m) sqrt( sum_ij (y'A_i'A_j y)^2 - (y'Sy)^2/m )
/// ```
///
/// Every such value is dominated by the solved objective, which the
/// property suite checks on random directions.
pub fn rank_one_value(map: &QuadraticMap, y: &DVector<f64>) -> Result<f64> {
    if y.len() != map.n() {
        return Err(Error::Dimension(format!(
            "direction has length {}, expected {}",
            y.len(),
            map.n()
        )));
    }
    if (y.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!(
            "direction must be unit (||y|| = {})",
            y.norm()
        )));
    }
    let m = map.m();
    let (w1, w2) = objective_weights(m);
    let cols: Vec<DVector<f64>> = map.quad_parts().iter().map(|a| a * y).collect();
    let mut trace = 0.0;
    let mut sum_sq = 0.0;
    for i in 0..m {
        for j in 0..m {
            let g = cols[i].dot(&cols[j]);
            sum_sq += g * g;
            if i == j {
                trace += g;
            }
        }
    }
    let mut radicand = sum_sq - trace * trace / m as f64;
    let clamp = 1e-12 * sum_sq.max(1.0);
    if radicand < -clamp {
        return Err(Error::Numerical(format!(
            "rank-one radicand {radicand:.3e} negative beyond rounding"
        )));
    }
    radicand = radicand.max(0.0);
    Ok(w1 * trace + w2 * radicand.sqrt())
}

/// Writes the assembled problem in the documented plain-text conic dump
/// format (header, then dense row-major blocks) for cross-checks against
/// external solvers.
pub fn dump_problem(prob: &RelaxationProblem, out: &mut impl Write) -> std::io::Result<()> {
    let (w1, w2) = objective_weights(prob.m);
    writeln!(out, "quadconvex-conic-dump v1")?;
    writeln!(out, "d {}", prob.d)?;
    writeln!(out, "m {}", prob.m)?;
    writeln!(
        out,
        "cones psd:{} rsoc:3 rsoc:3 soc:{}",
        prob.d,
        prob.d + 1
    )?;
    writeln!(out, "weights {:.17e} {:.17e}", w1, w2)?;
    for (name, mat) in [("C1", &prob.c1), ("C2", &prob.c2)] {
        writeln!(out, "matrix {name} {} {}", mat.nrows(), mat.ncols())?;
        for i in 0..mat.nrows() {
            let row: Vec<String> = (0..mat.ncols()).map(|j| format!("{:.17e}", mat[(i, j)])).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
    }
    writeln!(out, "vector e {}", prob.e.len())?;
    let ev: Vec<String> = prob.e.iter().map(|v| format!("{:.17e}", v)).collect();
    writeln!(out, "{}", ev.join(" "))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadmap::QuadraticMap;

    fn polyak() -> QuadraticMap {
        QuadraticMap::parse_problem(
            r#"{"n":2,"m":2,"A":[[[0,1],[1,0]],[[0,1],[1,0]]],"a":[[-1,0],[0,1]]}"#,
        )
        .unwrap()
    }

    fn e1() -> QuadraticMap {
        QuadraticMap::parse_problem(
            r#"{"n":3,"m":2,
                "A":[[[2,0,6],[0,0,6],[6,6,2]],[[6,5,2],[5,4,0],[2,0,0]]],
                "a":[[-1,0,0],[0,1,0]]}"#,
        )
        .unwrap()
    }

    fn e2() -> QuadraticMap {
        QuadraticMap::parse_problem(
            r#"{"n":3,"m":2,
                "A":[[[0,5,3],[5,0,6],[3,6,4]],[[0,4,2],[4,0,4],[2,4,4]]],
                "a":[[-1,0,0],[0,1,0]]}"#,
        )
        .unwrap()
    }

    #[test]
    fn build_polyak_c1_is_scaled_identity() {
        let prob = build_relaxation(&polyak()).unwrap();
        assert_eq!(prob.d, 4);
        assert!((&prob.c1 - DMatrix::identity(4, 4) * 4.0).abs().max() < 1e-12);
    }

    #[test]
    fn build_e1_vec_i_positions() {
        let prob = build_relaxation(&e1()).unwrap();
        assert_eq!(prob.d, 9);
        let ones: Vec<usize> = prob
            .e
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(ones, vec![0, 4, 8]);
        assert_eq!(prob.e.iter().filter(|&&v| v != 0.0).count(), 3);
    }

    #[test]
    fn build_m1_c2_vanishes() {
        let map = QuadraticMap::parse_problem(r#"{"n":2,"m":1,"A":[[[2,0],[0,1]]],"a":[[0,0]]}"#)
            .unwrap();
        let prob = build_relaxation(&map).unwrap();
        assert!(prob.c2.amax() < 1e-12);
    }

    #[test]
    fn capacity_guard() {
        // n = 21 would lift to 441 > 400
        let n = 21;
        let quad = vec![DMatrix::identity(n, n)];
        let lin = vec![DVector::zeros(n)];
        let map = QuadraticMap::from_parts(quad, lin, false).unwrap();
        assert!(matches!(build_relaxation(&map), Err(Error::Capacity(_))));
    }

    #[test]
    fn solve_e1_matches_reported_value() {
        let sol = l_tilde(&e1(), 1e-6).unwrap();
        assert!(
            (sol.l_tilde - 12.6747).abs() < 5e-3,
            "L_tilde(E1) = {}",
            sol.l_tilde
        );
        let viol = sol.constraint_violations(&build_relaxation(&e1()).unwrap());
        assert!(viol.max() <= 1e-6, "violations {viol:?}");
    }

    #[test]
    fn solve_e2_matches_reported_value() {
        let sol = l_tilde(&e2(), 1e-6).unwrap();
        assert!(
            (sol.l_tilde - 13.8009).abs() < 5e-3,
            "L_tilde(E2) = {}",
            sol.l_tilde
        );
    }

    #[test]
    fn solve_polyak_reaches_sqrt2() {
        let sol = l_tilde(&polyak(), 1e-6).unwrap();
        assert!((sol.l_tilde - std::f64::consts::SQRT_2).abs() < 1e-4);
    }

    #[test]
    fn solve_m1_diagonal() {
        let map = QuadraticMap::parse_problem(r#"{"n":2,"m":1,"A":[[[2,0],[0,1]]],"a":[[0,0]]}"#)
            .unwrap();
        let sol = l_tilde(&map, 1e-6).unwrap();
        assert!((sol.l_tilde - 2.0).abs() < 1e-4, "L_tilde = {}", sol.l_tilde);
        assert_eq!(sol.s2, 0.0);
    }

    #[test]
    fn zero_map_is_trivial() {
        let map = QuadraticMap::parse_problem(r#"{"n":2,"m":1,"A":[[[0,0],[0,0]]],"a":[[1,0]]}"#)
            .unwrap();
        let sol = l_tilde(&map, 1e-6).unwrap();
        assert_eq!(sol.l_tilde, 0.0);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn rank_one_polyak_closed_form() {
        let map = polyak();
        for y in [
            DVector::from_column_slice(&[1.0, 0.0]),
            DVector::from_column_slice(&[0.6, 0.8]),
            DVector::from_column_slice(&[-(0.5f64.sqrt()), 0.5f64.sqrt()]),
        ] {
            let b = rank_one_value(&map, &y).unwrap();
            assert!((b - 2.0).abs() < 1e-12, "B = {b}");
        }
    }

    #[test]
    fn rank_one_m1_is_quadratic_form() {
        let map = QuadraticMap::parse_problem(r#"{"n":2,"m":1,"A":[[[2,0],[0,1]]],"a":[[0,0]]}"#)
            .unwrap();
        let y = DVector::from_column_slice(&[0.6, 0.8]);
        let b = rank_one_value(&map, &y).unwrap();
        // y'A'Ay = (1.2)^2 + (0.8)^2
        assert!((b - (1.44 + 0.64)).abs() < 1e-12);
    }

    #[test]
    fn rank_one_rejects_non_unit() {
        assert!(rank_one_value(&polyak(), &DVector::from_column_slice(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn scaling_homogeneity() {
        let map = e1();
        let base = l_tilde(&map, 1e-7).unwrap().l_tilde;
        for lam in [0.5, 2.0] {
            let scaled = l_tilde(&map.scaled(lam), 1e-7).unwrap().l_tilde;
            assert!(
                (scaled - lam * base).abs() < 1e-3 * (1.0 + lam * base),
                "lambda {lam}: {scaled} vs {}",
                lam * base
            );
        }
    }

    #[test]
    fn determinism_bitwise() {
        let a = l_tilde(&e1(), 1e-6).unwrap();
        let b = l_tilde(&e1(), 1e-6).unwrap();
        assert_eq!(a.l_tilde.to_bits(), b.l_tilde.to_bits());
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.z.as_slice(), b.z.as_slice());
    }

    #[test]
    fn dump_roundtrips_header() {
        let prob = build_relaxation(&polyak()).unwrap();
        let mut buf = Vec::new();
        dump_problem(&prob, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "quadconvex-conic-dump v1");
        assert_eq!(lines.next().unwrap(), "d 4");
        assert_eq!(lines.next().unwrap(), "m 2");
        assert!(text.contains("matrix C1 4 4"));
        assert!(text.contains("vector e 4"));
        // first C1 row is (4, 0, 0, 0)
        let c1_row = text
            .lines()
            .skip_while(|l| !l.starts_with("matrix C1"))
            .nth(1)
            .unwrap();
        let vals: Vec<f64> = c1_row.split_whitespace().map(|t| t.parse().unwrap()).collect();
        assert_eq!(vals, vec![4.0, 0.0, 0.0, 0.0]);
    }
}
