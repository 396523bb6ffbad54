//! Dense symmetric-eigenvalue and singular-value kernels, plus the two
//! eigenvalue-inclusion bounds (Gershgorin row discs and the single
//! trace-centered disc) that back the cheap Lipschitz estimates.
//!
//! Everything here is dense double precision. The lifted relaxation keeps
//! matrix sides at or below a few hundred, so no sparse or iterative paths
//! are provided.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Accepted asymmetry for inputs declared symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Relative threshold below which a slightly negative PSD quantity is
/// treated as rounding noise and clamped to zero.
pub const PSD_CLAMP_TOL: f64 = 1e-12;

/// Inclusion interval for all eigenvalues of a (symmetric) matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenInterval {
    pub lower: f64,
    pub upper: f64,
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Smallest and largest eigenvalue of a real symmetric matrix, via dense
/// tridiagonalization + QR. Input asymmetry beyond [`SYMMETRY_TOL`] is
/// rejected; within tolerance the matrix is symmetrized before solving.
pub fn sym_eig_extremes(s: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_finite(s, "matrix")?;
    if !s.is_square() {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let asym = (s - s.transpose()).abs().max();
    if asym > SYMMETRY_TOL {
        return Err(Error::Numerical(format!(
            "matrix is asymmetric (max |S - S'| = {asym:.3e} > {SYMMETRY_TOL:.0e})"
        )));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// All eigenvalues of a real symmetric matrix, ascending.
pub fn sym_eigvals(s: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_finite(s, "matrix")?;
    let sym = (s + s.transpose()) * 0.5;
    let mut vals: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(vals)
}

/// Largest singular value. Computed by SVD, independently of the
/// Gram-matrix route used by [`sigma_min`]; the two are cross-checked in
/// the property suite.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    check_finite(m, "matrix")?;
    if m.amax() == 0.0 {
        return Ok(0.0);
    }
    let sv = m.clone().singular_values();
    Ok(sv.max())
}

/// Smallest singular value, computed as the square root of the smallest
/// eigenvalue of the Gram matrix (`M'M` when rows >= cols, `MM'` otherwise),
/// clamped at zero when the eigensolver returns rounding-level negatives.
pub fn sigma_min(m: &DMatrix<f64>) -> Result<f64> {
    check_finite(m, "matrix")?;
    let gram = if m.nrows() >= m.ncols() {
        m.transpose() * m
    } else {
        m * m.transpose()
    };
    let (lo, hi) = sym_eig_extremes(&gram)?;
    let clamp = PSD_CLAMP_TOL * hi.abs().max(1.0);
    if lo < -clamp {
        return Err(Error::Numerical(format!(
            "Gram matrix has eigenvalue {lo:.3e} below the PSD clamp threshold"
        )));
    }
    Ok(lo.max(0.0).sqrt())
}

/// One-sided Gershgorin bound `max_i (B_ii + sum_{j != i} |B_ij|)`, an upper
/// bound on every real eigenvalue of `B`.
pub fn gershgorin_upper(b: &DMatrix<f64>) -> Result<f64> {
    check_finite(b, "matrix")?;
    if !b.is_square() {
        return Err(Error::Dimension("Gershgorin bound needs a square matrix".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for i in 0..b.nrows() {
        let mut radius = 0.0;
        for j in 0..b.ncols() {
            if j != i {
                radius += b[(i, j)].abs();
            }
        }
        best = best.max(b[(i, i)] + radius);
    }
    Ok(best)
}

/// Diagnostic variant: the full disc list as `(center, radius)` pairs.
pub fn gershgorin_discs(b: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    check_finite(b, "matrix")?;
    if !b.is_square() {
        return Err(Error::Dimension("Gershgorin discs need a square matrix".into()));
    }
    Ok((0..b.nrows())
        .map(|i| {
            let radius: f64 = (0..b.ncols()).filter(|&j| j != i).map(|j| b[(i, j)].abs()).sum();
            (b[(i, i)], radius)
        })
        .collect())
}

/// The single inclusion disc centered at `trace(B)/m` with radius
/// `sqrt((m-1)/m (trace(B'B) - trace(B)^2/m))`, restricted to the real axis.
/// The radicand is nonnegative up to rounding for any real input; values
/// below the clamp threshold signal inconsistent (non-real) data.
pub fn trace_disc_bound(b: &DMatrix<f64>) -> Result<EigenInterval> {
    check_finite(b, "matrix")?;
    if !b.is_square() {
        return Err(Error::Dimension("trace disc needs a square matrix".into()));
    }
    let m = b.nrows() as f64;
    let tr = b.trace();
    let tr_gram = (b.transpose() * b).trace();
    let center = tr / m;
    let mut radicand = (m - 1.0) / m * (tr_gram - tr * tr / m);
    let clamp = PSD_CLAMP_TOL * tr_gram.abs().max(1.0);
    if radicand < -clamp {
        return Err(Error::Numerical(format!(
            "trace-disc radicand {radicand:.3e} is negative beyond rounding"
        )));
    }
    radicand = radicand.max(0.0);
    let radius = radicand.sqrt();
    Ok(EigenInterval {
        lower: center - radius,
        upper: center + radius,
    })
}

/// Kronecker product `P (x) Q`.
pub fn kron(p: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    p.kronecker(q)
}

/// Column-stacking vectorization.
pub fn vectorize(p: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(p.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                let v = rng.gen_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    #[test]
    fn eig_extremes_examples() {
        let (lo, hi) = sym_eig_extremes(&DMatrix::identity(3, 3)).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);

        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&[-2.0, 5.0]));
        let (lo, hi) = sym_eig_extremes(&d).unwrap();
        assert!((lo + 2.0).abs() < 1e-12 && (hi - 5.0).abs() < 1e-12);

        let m = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let (lo, hi) = sym_eig_extremes(&m).unwrap();
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 3.0).abs() < 1e-10);
    }

    #[test]
    fn eig_rejects_asymmetric_and_nonfinite() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(sym_eig_extremes(&m).is_err());
        let m = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(sym_eig_extremes(&m).is_err());
    }

    #[test]
    fn spectral_norm_examples() {
        assert_eq!(spectral_norm(&DMatrix::zeros(3, 2)).unwrap(), 0.0);
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&[3.0, -4.0]));
        assert!((spectral_norm(&d).unwrap() - 4.0).abs() < 1e-12);
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((spectral_norm(&swap).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigma_min_examples() {
        let a = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!((sigma_min(&a).unwrap() - 1.0).abs() < 1e-10);

        let zero_col = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        assert!(sigma_min(&zero_col).unwrap() < 1e-12);

        assert!((sigma_min(&DMatrix::identity(4, 4)).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gershgorin_examples() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        assert_eq!(gershgorin_upper(&m).unwrap(), 3.0);

        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, -3.0, 2.5]));
        assert_eq!(gershgorin_upper(&d).unwrap(), 2.5);

        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(gershgorin_upper(&swap).unwrap(), 1.0);

        let discs = gershgorin_discs(&swap).unwrap();
        assert_eq!(discs, vec![(0.0, 1.0), (0.0, 1.0)]);
    }

    #[test]
    fn trace_disc_examples() {
        let id = trace_disc_bound(&DMatrix::identity(4, 4)).unwrap();
        assert!((id.lower - 1.0).abs() < 1e-12 && (id.upper - 1.0).abs() < 1e-12);

        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&[0.0, 2.0]));
        let iv = trace_disc_bound(&d).unwrap();
        assert!((iv.lower - 0.0).abs() < 1e-12 && (iv.upper - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trace_disc_improves_trace_bound_on_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let d = rng.gen_range(1..=6);
            let g = random_symmetric(&mut rng, d);
            let psd = &g * g.transpose();
            let iv = trace_disc_bound(&psd).unwrap();
            assert!(iv.upper <= psd.trace() + 1e-9);
        }
    }

    #[test]
    fn inclusion_bounds_hold_on_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let d = rng.gen_range(1..=6);
            let b = random_symmetric(&mut rng, d);
            let upper = gershgorin_upper(&b).unwrap();
            let iv = trace_disc_bound(&b).unwrap();
            for lam in sym_eigvals(&b).unwrap() {
                assert!(lam <= upper + 1e-10);
                assert!(lam >= iv.lower - 1e-10 && lam <= iv.upper + 1e-10);
            }
        }
    }

    #[test]
    fn weyl_singular_value_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = rng.gen_range(1..=5);
            let q = rng.gen_range(1..=5);
            let m = DMatrix::from_fn(p, q, |_, _| rng.gen_range(-1.0..1.0));
            let n = DMatrix::from_fn(p, q, |_, _| rng.gen_range(-1.0..1.0));
            let lhs = sigma_min(&(&m + &n)).unwrap();
            let rhs = sigma_min(&m).unwrap() - spectral_norm(&n).unwrap();
            assert!(lhs >= rhs - 1e-9);
        }
    }

    #[test]
    fn spectral_norm_squared_matches_gram_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let p = rng.gen_range(1..=6);
            let q = rng.gen_range(1..=6);
            let m = DMatrix::from_fn(p, q, |_, _| rng.gen_range(-2.0..2.0));
            let sn = spectral_norm(&m).unwrap();
            let (_, hi) = sym_eig_extremes(&(m.transpose() * &m)).unwrap();
            let scale = hi.abs().max(1e-30);
            assert!((sn * sn - hi).abs() <= 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn kron_and_vectorize_examples() {
        let i2 = DMatrix::identity(2, 2);
        assert_eq!(kron(&i2, &i2), DMatrix::identity(4, 4));

        let p = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let v = vectorize(&p);
        assert_eq!(v.as_slice(), &[1.0, 3.0, 2.0, 4.0]);

        // Eigenvalues of kron(diag(a), diag(b)) are all pairwise products.
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, -1.0]));
        let b = DMatrix::from_diagonal(&DVector::from_column_slice(&[3.0, 5.0]));
        let mut got = sym_eigvals(&kron(&a, &b)).unwrap();
        let mut want = vec![6.0, 10.0, -3.0, -5.0];
        want.sort_by(|x, y| x.partial_cmp(y).unwrap());
        got.iter_mut().for_each(|v| *v = (*v * 1e12).round() / 1e12);
        assert_eq!(got, want);
    }
}
