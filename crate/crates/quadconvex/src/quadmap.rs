//! Problem model: quadratic transformations f: R^n -> R^m with components
//! f_i(x) = 1/2 x' A_i x + a_i' x, together with the domain balls whose
//! images the rest of the crate certifies or refutes.
//!
//! Construction validates symmetry, shapes and finiteness once; afterwards a
//! [`QuadraticMap`] is immutable and every operation on it is a pure function.

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Max-entry asymmetry accepted in a quadratic part after construction.
pub const ASYMMETRY_TOL: f64 = 1e-12;

/// A quadratic transformation given by symmetric quadratic parts `A_1..A_m`
/// and linear parts `a_1..a_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticMap {
    n: usize,
    m: usize,
    quad: Vec<DMatrix<f64>>,
    lin: Vec<DVector<f64>>,
    /// The n x m matrix `[a_1 ... a_m]` whose smallest singular value is the
    /// regularity constant of the convexity radius.
    lin_matrix: DMatrix<f64>,
}

/// A closed ball `{ x : ||x - center|| <= radius }` in the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSpec {
    center: DVector<f64>,
    radius: f64,
}

impl BallSpec {
    pub fn new(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Validation(format!(
                "ball radius must be a positive finite number, got {radius}"
            )));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("ball center has non-finite entries".into()));
        }
        Ok(BallSpec { center, radius })
    }

    /// Origin-centered ball of the given radius.
    pub fn centered(n: usize, radius: f64) -> Result<Self> {
        Self::new(DVector::zeros(n), radius)
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        (x - &self.center).norm() <= self.radius + 1e-12
    }
}

/// On-disk problem schema.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    n: usize,
    m: usize,
    #[serde(rename = "A")]
    quad: Vec<Vec<Vec<f64>>>,
    a: Vec<Vec<f64>>,
    #[serde(default)]
    symmetrize: bool,
    /// Free-form label, ignored by the model.
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
}

impl QuadraticMap {
    /// Builds a map from quadratic and linear parts.
    ///
    /// With `symmetrize` set, each `A_i` is replaced by `(A_i + A_i')/2`
    /// (which leaves `x' A_i x` unchanged); otherwise asymmetry beyond
    /// [`ASYMMETRY_TOL`] is rejected.
    pub fn from_parts(
        quad: Vec<DMatrix<f64>>,
        lin: Vec<DVector<f64>>,
        symmetrize: bool,
    ) -> Result<Self> {
        if quad.is_empty() {
            return Err(Error::Validation("a map needs at least one component".into()));
        }
        if quad.len() != lin.len() {
            return Err(Error::Validation(format!(
                "{} quadratic parts but {} linear parts",
                quad.len(),
                lin.len()
            )));
        }
        let m = quad.len();
        let n = quad[0].nrows();
        if n == 0 {
            return Err(Error::Validation("domain dimension must be positive".into()));
        }
        let mut quad = quad;
        for (i, ai) in quad.iter_mut().enumerate() {
            if ai.nrows() != n || ai.ncols() != n {
                return Err(Error::Dimension(format!(
                    "A[{i}] is {}x{}, expected {n}x{n}",
                    ai.nrows(),
                    ai.ncols()
                )));
            }
            if ai.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("A[{i}] has non-finite entries")));
            }
            let asym = (&*ai - ai.transpose()).abs().max();
            if asym > ASYMMETRY_TOL {
                if symmetrize {
                    let sym = (&*ai + ai.transpose()) * 0.5;
                    *ai = sym;
                } else {
                    return Err(Error::Validation(format!(
                        "A[{i}] is asymmetric (max |A - A'| = {asym:.3e} > {ASYMMETRY_TOL:.0e}); \
                         pass symmetrize to accept"
                    )));
                }
            }
        }
        for (i, v) in lin.iter().enumerate() {
            if v.len() != n {
                return Err(Error::Dimension(format!(
                    "a[{i}] has length {}, expected {n}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("a[{i}] has non-finite entries")));
            }
        }
        let mut lin_matrix = DMatrix::zeros(n, m);
        for (j, v) in lin.iter().enumerate() {
            lin_matrix.set_column(j, v);
        }
        Ok(QuadraticMap {
            n,
            m,
            quad,
            lin,
            lin_matrix,
        })
    }

    /// Parses a problem instance from its JSON text form.
    pub fn parse_problem(text: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text)
            .map_err(|e| Error::parse("problem", e.to_string()))?;
        if file.n == 0 {
            return Err(Error::parse("n", "must be a positive integer"));
        }
        if file.m == 0 {
            return Err(Error::parse("m", "must be a positive integer"));
        }
        if file.quad.len() != file.m {
            return Err(Error::parse(
                "A",
                format!("expected {} matrices, got {}", file.m, file.quad.len()),
            ));
        }
        if file.a.len() != file.m {
            return Err(Error::parse(
                "a",
                format!("expected {} vectors, got {}", file.m, file.a.len()),
            ));
        }
        let mut quad = Vec::with_capacity(file.m);
        for (i, rows) in file.quad.iter().enumerate() {
            if rows.len() != file.n {
                return Err(Error::parse(
                    format!("A[{i}]"),
                    format!("expected {} rows, got {}", file.n, rows.len()),
                ));
            }
            let mut mat = DMatrix::zeros(file.n, file.n);
            for (r, row) in rows.iter().enumerate() {
                if row.len() != file.n {
                    return Err(Error::parse(
                        format!("A[{i}][{r}]"),
                        format!("expected {} entries, got {}", file.n, row.len()),
                    ));
                }
                for (c, &v) in row.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::parse(
                            format!("A[{i}][{r}][{c}]"),
                            "non-finite entry",
                        ));
                    }
                    mat[(r, c)] = v;
                }
            }
            quad.push(mat);
        }
        let mut lin = Vec::with_capacity(file.m);
        for (i, entries) in file.a.iter().enumerate() {
            if entries.len() != file.n {
                return Err(Error::parse(
                    format!("a[{i}]"),
                    format!("expected {} entries, got {}", file.n, entries.len()),
                ));
            }
            if entries.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(format!("a[{i}]"), "non-finite entry"));
            }
            lin.push(DVector::from_column_slice(entries));
        }
        Self::from_parts(quad, lin, file.symmetrize)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn quad_parts(&self) -> &[DMatrix<f64>] {
        &self.quad
    }

    pub fn linear_parts(&self) -> &[DVector<f64>] {
        &self.lin
    }

    /// The matrix `[a_1 ... a_m]`.
    pub fn linear_matrix(&self) -> &DMatrix<f64> {
        &self.lin_matrix
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!(
                "point has length {}, map domain is {}-dimensional",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Evaluates the map, component i being `1/2 x' A_i x + a_i' x`.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(x)?;
        let mut out = DVector::zeros(self.m);
        for i in 0..self.m {
            out[i] = 0.5 * (x.transpose() * &self.quad[i] * x)[(0, 0)] + self.lin[i].dot(x);
        }
        Ok(out)
    }

    /// The n x m Jacobian-transpose layout used throughout: column i is the
    /// gradient `A_i x + a_i` of component i.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let mut out = DMatrix::zeros(self.n, self.m);
        for i in 0..self.m {
            out.set_column(i, &(&self.quad[i] * x + &self.lin[i]));
        }
        Ok(out)
    }

    /// Allocation-free evaluation into a caller buffer; the sampling and
    /// refinement hot loops run through here.
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.m);
        for i in 0..self.m {
            let a = &self.quad[i];
            let mut quad = 0.0;
            for c in 0..self.n {
                let xc = x[c];
                if xc == 0.0 {
                    continue;
                }
                let col = a.column(c);
                let mut acc = 0.0;
                for r in 0..self.n {
                    acc += col[r] * x[r];
                }
                quad += xc * acc;
            }
            let mut lin = 0.0;
            let av = &self.lin[i];
            for r in 0..self.n {
                lin += av[r] * x[r];
            }
            out[i] = 0.5 * quad + lin;
        }
    }

    /// Gradient of `||f(x) - target||^2` written into `grad`; returns the
    /// residual norm squared.
    pub fn midpoint_gradient_into(
        &self,
        x: &[f64],
        target: &[f64],
        fx: &mut [f64],
        grad: &mut [f64],
    ) -> f64 {
        self.evaluate_into(x, fx);
        let mut h = 0.0;
        grad.fill(0.0);
        for i in 0..self.m {
            let r = fx[i] - target[i];
            h += r * r;
            let a = &self.quad[i];
            let av = &self.lin[i];
            for c in 0..self.n {
                let col = a.column(c);
                let mut g = av[c];
                for rr in 0..self.n {
                    g += col[rr] * x[rr];
                }
                grad[c] += 2.0 * r * g;
            }
        }
        h
    }

    /// The map `g` with the same quadratic parts and linear parts
    /// `A_i a + a_i`, so that the image of an origin-centered ball under `g`
    /// is the image of the ball centered at `a` under `self`, translated by
    /// `-f(a)`. The dropped constants are available from
    /// [`QuadraticMap::recenter_with_constants`].
    pub fn recenter(&self, a: &DVector<f64>) -> Result<Self> {
        Ok(self.recenter_with_constants(a)?.0)
    }

    /// Recentered map together with the constant terms `f_i(a)` that the
    /// translation discards.
    pub fn recenter_with_constants(&self, a: &DVector<f64>) -> Result<(Self, DVector<f64>)> {
        self.check_point(a)?;
        let lin: Vec<DVector<f64>> = (0..self.m)
            .map(|i| &self.quad[i] * a + &self.lin[i])
            .collect();
        let constants = self.evaluate(a)?;
        let map = Self::from_parts(self.quad.clone(), lin, false)?;
        Ok((map, constants))
    }

    /// The homogeneous part (all linear terms zero).
    pub fn homogeneous_part(&self) -> Self {
        Self::from_parts(
            self.quad.clone(),
            (0..self.m).map(|_| DVector::zeros(self.n)).collect(),
            false,
        )
        .expect("parts of a valid map stay valid")
    }

    /// Scales every `A_i` and `a_i` by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_parts(
            self.quad.iter().map(|a| a * factor).collect(),
            self.lin.iter().map(|v| v * factor).collect(),
            false,
        )
        .expect("scaling a valid map stays valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn polyak() -> QuadraticMap {
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

    #[test]
    fn parse_polyak_example() {
        let map = polyak();
        assert_eq!((map.n(), map.m()), (2, 2));
        // f1(x) = x1 x2 - x1, f2(x) = x1 x2 + x2
        let f = map.evaluate(&DVector::from_column_slice(&[2.0, 3.0])).unwrap();
        assert!((f[0] - (6.0 - 2.0)).abs() < 1e-15);
        assert!((f[1] - (6.0 + 3.0)).abs() < 1e-15);
    }

    #[test]
    fn parse_zero_map() {
        let map = QuadraticMap::parse_problem(r#"{"n":1,"m":1,"A":[[[0]]],"a":[[0]]}"#).unwrap();
        let f = map.evaluate(&DVector::from_column_slice(&[3.0])).unwrap();
        assert_eq!(f[0], 0.0);
    }

    #[test]
    fn parse_rejects_bad_row_length() {
        let err = QuadraticMap::parse_problem(
            r#"{"n":2,"m":1,"A":[[[0,1],[1]]],"a":[[0,0]]}"#,
        )
        .unwrap_err();
        match err {
            Error::Parse { field, .. } => assert_eq!(field, "A[0][1]"),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn parse_rejects_unknown_field() {
        assert!(QuadraticMap::parse_problem(
            r#"{"n":1,"m":1,"A":[[[0]]],"a":[[0]],"extra":1}"#
        )
        .is_err());
    }

    #[test]
    fn asymmetry_needs_explicit_flag() {
        let text = r#"{"n":2,"m":1,"A":[[[0,1],[0,0]]],"a":[[0,0]]}"#;
        assert!(matches!(
            QuadraticMap::parse_problem(text),
            Err(Error::Validation(_))
        ));
        let text = r#"{"n":2,"m":1,"A":[[[0,1],[0,0]]],"a":[[0,0]],"symmetrize":true}"#;
        let map = QuadraticMap::parse_problem(text).unwrap();
        assert_eq!(map.quad_parts()[0][(0, 1)], 0.5);
        assert_eq!(map.quad_parts()[0][(1, 0)], 0.5);
    }

    #[test]
    fn evaluate_examples() {
        let map = polyak();
        let f0 = map.evaluate(&DVector::zeros(2)).unwrap();
        assert_eq!((f0[0], f0[1]), (0.0, 0.0));
        let f1 = map.evaluate(&DVector::from_column_slice(&[1.0, 1.0])).unwrap();
        assert!((f1[0] - 0.0).abs() < 1e-15 && (f1[1] - 2.0).abs() < 1e-15);

        let f = e1().evaluate(&DVector::from_column_slice(&[1.0, 0.0, 0.0])).unwrap();
        assert!((f[0] - 0.0).abs() < 1e-15 && (f[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn evaluate_dimension_mismatch() {
        assert!(matches!(
            polyak().evaluate(&DVector::zeros(3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn jacobian_examples() {
        let map = polyak();
        let j0 = map.jacobian(&DVector::zeros(2)).unwrap();
        assert_eq!(j0, *map.linear_matrix());
        assert_eq!(j0[(0, 0)], -1.0);
        assert_eq!(j0[(1, 1)], 1.0);

        let j = map.jacobian(&DVector::from_column_slice(&[1.0, 1.0])).unwrap();
        assert_eq!(j.column(0).as_slice(), &[0.0, 1.0]);
        assert_eq!(j.column(1).as_slice(), &[1.0, 2.0]);

        let zero = QuadraticMap::parse_problem(
            r#"{"n":2,"m":2,"A":[[[0,0],[0,0]],[[0,0],[0,0]]],"a":[[0,0],[0,0]]}"#,
        )
        .unwrap();
        let jz = zero.jacobian(&DVector::from_column_slice(&[4.0, -7.0])).unwrap();
        assert!(jz.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recenter_examples() {
        let map = polyak();
        let same = map.recenter(&DVector::zeros(2)).unwrap();
        assert_eq!(same, map);

        let moved = map.recenter(&DVector::from_column_slice(&[1.0, 0.0])).unwrap();
        assert_eq!(moved.linear_parts()[0].as_slice(), &[-1.0, 1.0]);
        assert_eq!(moved.linear_parts()[1].as_slice(), &[0.0, 2.0]);

        let lin_only = QuadraticMap::parse_problem(
            r#"{"n":2,"m":1,"A":[[[0,0],[0,0]]],"a":[[3,4]]}"#,
        )
        .unwrap();
        let rec = lin_only.recenter(&DVector::from_column_slice(&[5.0, -2.0])).unwrap();
        assert_eq!(rec.linear_parts()[0].as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn recenter_identity_holds() {
        // evaluate(recenter(map, a), y) = evaluate(map, a + y) - evaluate(map, a)
        let map = e1();
        let mut rng = 0x1234_5678_u64;
        let mut next = move || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 33) as f64 / (1u64 << 31) as f64) * 2.0 - 1.0
        };
        for _ in 0..50 {
            let a = DVector::from_fn(3, |_, _| next());
            let y = DVector::from_fn(3, |_, _| next());
            let lhs = map.recenter(&a).unwrap().evaluate(&y).unwrap();
            let rhs = map.evaluate(&(&a + &y)).unwrap() - map.evaluate(&a).unwrap();
            let scale = rhs.norm().max(1.0);
            assert!((lhs - rhs).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn jacobian_difference_depends_only_on_x_minus_z() {
        let map = e1();
        let homog = map.homogeneous_part();
        let mut state = 0xdead_beef_u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) * 2.0 - 1.0
        };
        for _ in 0..50 {
            let x = DVector::from_fn(3, |_, _| next());
            let z = DVector::from_fn(3, |_, _| next());
            let diff = map.jacobian(&x).unwrap() - map.jacobian(&z).unwrap();
            let expected = homog.jacobian(&(&x - &z)).unwrap();
            assert!((diff - expected).abs().max() <= 1e-12);
        }
    }

    #[test]
    fn evaluate_respects_symmetrization() {
        // value of x'Ax is invariant under A -> (A + A')/2
        let text = r#"{"n":2,"m":1,"A":[[[1,3],[-1,2]]],"a":[[0.5,-0.25]],"symmetrize":true}"#;
        let map = QuadraticMap::parse_problem(text).unwrap();
        let orig = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, -1.0, 2.0]);
        let a = DVector::from_column_slice(&[0.5, -0.25]);
        let mut state = 0x5eed_u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) * 2.0 - 1.0
        };
        for _ in 0..20 {
            let x = DVector::from_fn(2, |_, _| next());
            let direct = 0.5 * (x.transpose() * &orig * &x)[(0, 0)] + a.dot(&x);
            let got = map.evaluate(&x).unwrap()[0];
            assert!((got - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn ball_spec_validation() {
        assert!(BallSpec::centered(2, 0.5).is_ok());
        assert!(BallSpec::centered(2, 0.0).is_err());
        assert!(BallSpec::centered(2, -1.0).is_err());
        assert!(BallSpec::new(DVector::from_column_slice(&[f64::NAN]), 1.0).is_err());
    }
}
