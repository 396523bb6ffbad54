//! Primal-dual path-following solver for conic programs
//!
//! ```text
//!     minimize    c'x
//!     subject to  A x = b,   x in K,
//! ```
//!
//! with `K` a product of PSD and second-order cones. The dual is
//! `maximize b'y subject to A'y + s = c, s in K`.
//!
//! Search directions use Nesterov-Todd scaling with a Mehrotra
//! predictor-corrector step; each direction costs one Cholesky factorization
//! of the Schur complement `A (W'W) A'`. The implementation is dense
//! throughout and fully deterministic: no randomized pivoting, fixed block
//! order, fixed initialization (a least-norm primal/dual guess shifted into
//! the cone interior along the unit element).

use nalgebra::{DMatrix, DVector};

use super::cone::{
    compute_scaling, cone_margin, jordan_div_lambda, jordan_product, lambda_squared, max_step,
    smat, unit_element, ConeSpec, Scaling,
};

#[derive(Debug, Clone)]
pub struct ConicProblem {
    /// Objective coefficients (minimization).
    pub objective: DVector<f64>,
    /// Equality constraint matrix, one row per constraint. PSD-block columns
    /// hold svec coefficients so a row dotted with `x` is `<F, X> + ...`.
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub cones: Vec<ConeSpec>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Convergence target for the max of primal residual, dual residual and
    /// relative duality gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 500,
            step_fraction: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Residuals {
    /// `||Ax - b||_inf / (1 + ||b||_inf)`
    pub primal: f64,
    /// `||A'y + s - c||_inf / (1 + ||c||_inf)`
    pub dual: f64,
    /// `|c'x - b'y| / (1 + |c'x| + |b'y|)`
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DVector<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ConicError {
    #[error("malformed conic problem: {0}")]
    Malformed(String),
    #[error("iteration limit reached (best residual {best_residual:.3e})")]
    IterationLimit { best_residual: f64, best: Box<Solution> },
    #[error("numerical breakdown at iteration {iteration}: {reason}")]
    Breakdown {
        iteration: usize,
        reason: String,
        best: Option<Box<Solution>>,
    },
}

struct Blocks {
    cones: Vec<ConeSpec>,
    offsets: Vec<usize>,
    total_len: usize,
    total_rank: f64,
}

impl Blocks {
    fn new(cones: &[ConeSpec]) -> Self {
        let mut offsets = Vec::with_capacity(cones.len());
        let mut off = 0;
        let mut rank = 0.0;
        for c in cones {
            offsets.push(off);
            off += c.vec_len();
            rank += c.rank();
        }
        Blocks {
            cones: cones.to_vec(),
            offsets,
            total_len: off,
            total_rank: rank,
        }
    }

    fn slice<'a>(&self, v: &'a DVector<f64>, i: usize) -> &'a [f64] {
        &v.as_slice()[self.offsets[i]..self.offsets[i] + self.cones[i].vec_len()]
    }

    fn slice_mut<'a>(&self, v: &'a mut DVector<f64>, i: usize) -> &'a mut [f64] {
        &mut v.as_mut_slice()[self.offsets[i]..self.offsets[i] + self.cones[i].vec_len()]
    }

    fn unit(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.total_len);
        for i in 0..self.cones.len() {
            unit_element(&self.cones[i], self.slice_mut(&mut e, i));
        }
        e
    }

    fn min_margin(&self, v: &DVector<f64>) -> f64 {
        (0..self.cones.len())
            .map(|i| cone_margin(&self.cones[i], self.slice(v, i)))
            .fold(f64::INFINITY, f64::min)
    }
}

fn apply_blockwise(
    blocks: &Blocks,
    scalings: &[Scaling],
    v: &DVector<f64>,
    f: impl Fn(&Scaling, &[f64], &mut [f64]),
) -> DVector<f64> {
    let mut out = DVector::zeros(blocks.total_len);
    for i in 0..blocks.cones.len() {
        let len = blocks.cones[i].vec_len();
        let src = blocks.slice(v, i).to_vec();
        let dst = &mut out.as_mut_slice()[blocks.offsets[i]..blocks.offsets[i] + len];
        f(&scalings[i], &src, dst);
    }
    out
}

pub fn solve(problem: &ConicProblem, opts: &SolverOptions) -> Result<Solution, ConicError> {
    let blocks = Blocks::new(&problem.cones);
    let n = blocks.total_len;
    let neq = problem.eq_rhs.len();
    if problem.objective.len() != n {
        return Err(ConicError::Malformed(format!(
            "objective has length {}, cones give {}",
            problem.objective.len(),
            n
        )));
    }
    if problem.eq_matrix.nrows() != neq || problem.eq_matrix.ncols() != n {
        return Err(ConicError::Malformed(format!(
            "equality matrix is {}x{}, expected {}x{}",
            problem.eq_matrix.nrows(),
            problem.eq_matrix.ncols(),
            neq,
            n
        )));
    }
    if problem.objective.iter().any(|v| !v.is_finite())
        || problem.eq_matrix.iter().any(|v| !v.is_finite())
        || problem.eq_rhs.iter().any(|v| !v.is_finite())
    {
        return Err(ConicError::Malformed("non-finite problem data".into()));
    }
    if blocks.cones.iter().any(|c| c.vec_len() == 0) {
        return Err(ConicError::Malformed("zero-dimensional cone block".into()));
    }

    let a = &problem.eq_matrix;
    let b = &problem.eq_rhs;
    let c = &problem.objective;
    let e = blocks.unit();

    // Pre-extract per-row PSD block matrices: the Schur complement needs
    // T F_r T for every row r.
    let psd_rows: Vec<Vec<DMatrix<f64>>> = (0..blocks.cones.len())
        .map(|i| match blocks.cones[i] {
            ConeSpec::Psd { dim } => (0..neq)
                .map(|r| {
                    let row = a.row(r);
                    let slice: Vec<f64> = (0..blocks.cones[i].vec_len())
                        .map(|k| row[blocks.offsets[i] + k])
                        .collect();
                    smat(&slice, dim)
                })
                .collect(),
            ConeSpec::Soc { .. } => Vec::new(),
        })
        .collect();

    // Least-norm starting point, shifted into the interior.
    let aat = a * a.transpose() + DMatrix::identity(neq, neq) * 1e-12;
    let aat_chol = aat
        .clone()
        .cholesky()
        .ok_or_else(|| ConicError::Malformed("equality rows are numerically dependent".into()))?;
    let mut x = a.transpose() * aat_chol.solve(b);
    let mx = blocks.min_margin(&x);
    if mx < 1e-6 * (1.0 + x.amax()) {
        x += &e * (1.0 + mx.abs());
    }
    let mut y = aat_chol.solve(&(a * c));
    let mut s = c - a.transpose() * &y;
    let ms = blocks.min_margin(&s);
    if ms < 1e-6 * (1.0 + s.amax()) {
        s += &e * (1.0 + ms.abs());
    }

    let bnorm = 1.0 + b.amax();
    let cnorm = 1.0 + c.amax();
    let mut best: Option<(f64, Solution)> = None;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter;
        let rp = b - a * &x;
        let rd = c - a.transpose() * &y - &s;
        let gap = x.dot(&s);
        let mu = gap / blocks.total_rank;
        let pobj = c.dot(&x);
        let dobj = b.dot(&y);
        let res = Residuals {
            primal: rp.amax() / bnorm,
            dual: rd.amax() / cnorm,
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        };
        let score = res.max();
        let snapshot = |converged: bool| Solution {
            x: x.clone(),
            y: y.clone(),
            s: s.clone(),
            primal_objective: pobj,
            dual_objective: dobj,
            residuals: res,
            iterations: iter,
            converged,
        };
        if best.as_ref().map_or(true, |(bs, _)| score < *bs) {
            best = Some((score, snapshot(false)));
        }
        if score <= opts.tol {
            return Ok(snapshot(true));
        }

        // Nesterov-Todd scalings for every block.
        let mut scalings = Vec::with_capacity(blocks.cones.len());
        for i in 0..blocks.cones.len() {
            match compute_scaling(&blocks.cones[i], blocks.slice(&x, i), blocks.slice(&s, i)) {
                Some(sc) => scalings.push(sc),
                None => {
                    return Err(ConicError::Breakdown {
                        iteration: iter,
                        reason: "iterate left the cone interior (scaling failed)".into(),
                        best: best.map(|(_, sol)| Box::new(sol)),
                    })
                }
            }
        }
        let mut lambda = DVector::zeros(n);
        for i in 0..blocks.cones.len() {
            scalings[i].lambda_vec(blocks.slice_mut(&mut lambda, i));
        }

        // Schur complement M = A (W'W) A'.
        let mut hat = DMatrix::zeros(n, neq);
        for i in 0..blocks.cones.len() {
            match blocks.cones[i] {
                ConeSpec::Psd { dim } => {
                    let len = blocks.cones[i].vec_len();
                    let mut buf = vec![0.0; len];
                    for r in 0..neq {
                        let f = &psd_rows[i][r];
                        if f.amax() == 0.0 {
                            continue;
                        }
                        scalings[i].psd_congruence(f, &mut buf);
                        for k in 0..len {
                            hat[(blocks.offsets[i] + k, r)] = buf[k];
                        }
                    }
                    let _ = dim;
                }
                ConeSpec::Soc { dim } => {
                    let len = dim;
                    let mut src = vec![0.0; len];
                    let mut buf = vec![0.0; len];
                    for r in 0..neq {
                        let mut nonzero = false;
                        for k in 0..len {
                            src[k] = a[(r, blocks.offsets[i] + k)];
                            nonzero |= src[k] != 0.0;
                        }
                        if !nonzero {
                            continue;
                        }
                        scalings[i].apply_h(&src, &mut buf);
                        for k in 0..len {
                            hat[(blocks.offsets[i] + k, r)] = buf[k];
                        }
                    }
                }
            }
        }
        let mut schur = a * &hat;
        // symmetrize and regularize lightly; rounding alone breaks symmetry
        schur = (&schur + schur.transpose()) * 0.5;
        let reg = 1e-13 * (1.0 + schur.diagonal().amax());
        for i in 0..neq {
            schur[(i, i)] += reg;
        }
        let schur_chol = match schur.clone().cholesky() {
            Some(ch) => ch,
            None => {
                let mut boosted = schur;
                let big = 1e-8 * (1.0 + boosted.diagonal().amax());
                for i in 0..neq {
                    boosted[(i, i)] += big;
                }
                match boosted.cholesky() {
                    Some(ch) => ch,
                    None => {
                        return Err(ConicError::Breakdown {
                            iteration: iter,
                            reason: "Schur complement lost positive definiteness".into(),
                            best: best.map(|(_, sol)| Box::new(sol)),
                        })
                    }
                }
            }
        };

        // Generic KKT solve for rhs (rp, rd, d3):
        //   A dx = rp,  A'dy + ds = rd,  W^{-T}dx + W ds = d3
        let solve_kkt = |rp_v: &DVector<f64>, rd_v: &DVector<f64>, d3: &DVector<f64>| {
            let wt_d3 = apply_blockwise(&blocks, &scalings, d3, |sc, v, o| sc.apply_wt(v, o));
            let h_rd = apply_blockwise(&blocks, &scalings, rd_v, |sc, v, o| sc.apply_h(v, o));
            let rhs = rp_v - a * &wt_d3 + a * &h_rd;
            let dy = schur_chol.solve(&rhs);
            let ds = rd_v - a.transpose() * &dy;
            let h_ds = apply_blockwise(&blocks, &scalings, &ds, |sc, v, o| sc.apply_h(v, o));
            let dx = &wt_d3 - h_ds;
            (dx, dy, ds)
        };

        // Predictor (affine) direction: lambda \ (-lambda o lambda) = -lambda.
        let d3_aff = -&lambda;
        let (dx_a, _dy_a, ds_a) = solve_kkt(&rp, &rd, &d3_aff);
        let dxs_a = apply_blockwise(&blocks, &scalings, &dx_a, |sc, v, o| sc.apply_winv_t(v, o));
        let dss_a = apply_blockwise(&blocks, &scalings, &ds_a, |sc, v, o| sc.apply_w(v, o));
        let mut alpha_aff = f64::INFINITY;
        for i in 0..blocks.cones.len() {
            alpha_aff = alpha_aff
                .min(max_step(&scalings[i], blocks.slice(&dxs_a, i)))
                .min(max_step(&scalings[i], blocks.slice(&dss_a, i)));
        }
        let alpha_aff = alpha_aff.min(1.0);
        let gap_aff = (&x + &dx_a * alpha_aff).dot(&(&s + &ds_a * alpha_aff));
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

        // Combined direction with Mehrotra correction.
        let mut rhs3 = DVector::zeros(n);
        for i in 0..blocks.cones.len() {
            let len = blocks.cones[i].vec_len();
            let mut lam_sq = vec![0.0; len];
            lambda_squared(&scalings[i], &mut lam_sq);
            let mut cross = vec![0.0; len];
            jordan_product(
                &blocks.cones[i],
                blocks.slice(&dxs_a, i),
                blocks.slice(&dss_a, i),
                &mut cross,
            );
            let mut unit = vec![0.0; len];
            unit_element(&blocks.cones[i], &mut unit);
            let dst = blocks.slice_mut(&mut rhs3, i);
            for k in 0..len {
                dst[k] = sigma * mu * unit[k] - lam_sq[k] - cross[k];
            }
        }
        let mut d3 = DVector::zeros(n);
        for i in 0..blocks.cones.len() {
            let src = blocks.slice(&rhs3, i).to_vec();
            if !jordan_div_lambda(&scalings[i], &src, blocks.slice_mut(&mut d3, i)) {
                return Err(ConicError::Breakdown {
                    iteration: iter,
                    reason: "scaled point became singular".into(),
                    best: best.map(|(_, sol)| Box::new(sol)),
                });
            }
        }
        let (mut dx, mut dy, mut ds) = solve_kkt(&rp, &rd, &d3);
        let step_for = |dx: &DVector<f64>, ds: &DVector<f64>| {
            let dxs = apply_blockwise(&blocks, &scalings, dx, |sc, v, o| sc.apply_winv_t(v, o));
            let dss = apply_blockwise(&blocks, &scalings, ds, |sc, v, o| sc.apply_w(v, o));
            let mut alpha = f64::INFINITY;
            for i in 0..blocks.cones.len() {
                alpha = alpha
                    .min(max_step(&scalings[i], blocks.slice(&dxs, i)))
                    .min(max_step(&scalings[i], blocks.slice(&dss, i)));
            }
            (opts.step_fraction * alpha).min(1.0)
        };
        let mut alpha = step_for(&dx, &ds);
        if alpha <= 1e-10 {
            // endgame rescue: a pure centering step (no corrector) with the
            // same factorization often unsticks a collapsed combined step
            let mut rhs_c = DVector::zeros(n);
            for i in 0..blocks.cones.len() {
                let len = blocks.cones[i].vec_len();
                let mut lam_sq = vec![0.0; len];
                lambda_squared(&scalings[i], &mut lam_sq);
                let mut unit = vec![0.0; len];
                unit_element(&blocks.cones[i], &mut unit);
                let dst = blocks.slice_mut(&mut rhs_c, i);
                for k in 0..len {
                    dst[k] = mu * unit[k] - lam_sq[k];
                }
            }
            let mut d3_c = DVector::zeros(n);
            let mut ok = true;
            for i in 0..blocks.cones.len() {
                let src = blocks.slice(&rhs_c, i).to_vec();
                ok &= jordan_div_lambda(&scalings[i], &src, blocks.slice_mut(&mut d3_c, i));
            }
            if ok {
                let (cx, cy, cs) = solve_kkt(&rp, &rd, &d3_c);
                let ca = step_for(&cx, &cs);
                if ca > alpha {
                    dx = cx;
                    dy = cy;
                    ds = cs;
                    alpha = ca;
                }
            }
        }
        if !(alpha > 1e-13) {
            return Err(ConicError::Breakdown {
                iteration: iter,
                reason: format!("step length collapsed ({alpha:.2e})"),
                best: best.map(|(_, sol)| Box::new(sol)),
            });
        }
        x += &dx * alpha;
        y += &dy * alpha;
        s += &ds * alpha;
    }

    let (score, sol) = best.expect("at least one iterate recorded");
    let _ = iterations;
    Err(ConicError::IterationLimit {
        best_residual: score,
        best: Box::new(sol),
    })
}
