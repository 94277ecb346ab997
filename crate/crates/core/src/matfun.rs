//! Spectral calculus on real symmetric matrices.
//!
//! Everything above this layer (trace objectives, the relative-entropy
//! objective, the barrier) expresses its derivatives through the
//! eigendecomposition `X = U diag(λ) Uᵀ` and divided differences of a scalar
//! generator evaluated at the eigenvalues.
//!
//! Vectorization is column-major throughout: `vec(A)` stacks the columns of
//! `A`, so `vec(A X Bᵀ) = (B ⊗ A) vec(X)`. This coincides with the storage
//! order of [`nalgebra::DMatrix`].

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative gap below which two eigenvalues are treated as coincident.
pub const CONFLUENCE_RTOL: f64 = 1e-9;

/// Dense real symmetric matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps a square matrix, replacing it by `(M + Mᵀ)/2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::shape(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidMatrix("order must be positive".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::shape(format!("expected {n} rows of length {n}")));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Rebuilds a matrix from its column-major vectorization.
    pub fn from_vec(n: usize, v: &DVector<f64>) -> Result<Self> {
        if v.len() != n * n {
            return Err(Error::shape(format!(
                "vec of length {} does not match order {n}",
                v.len()
            )));
        }
        Self::new(DMatrix::from_column_slice(n, n, v.as_slice()))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Frobenius inner product `Tr(AB)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn norm_fro(&self) -> f64 {
        self.0.norm()
    }

    pub fn to_vec(&self) -> DVector<f64> {
        vec(&self.0)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.order();
        (0..n).map(|i| (0..n).map(|j| self.0[(i, j)]).collect()).collect()
    }

    pub fn scale(&self, a: f64) -> Self {
        SymMatrix(&self.0 * a)
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &SymMatrix) -> Self {
        SymMatrix(&self.0 + &other.0 * a)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(spectral_decompose(self)?.min())
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(spectral_decompose(self)?.max())
    }

    /// True when a Cholesky factorization exists.
    pub fn is_positive_definite(&self) -> bool {
        self.0.clone().cholesky().is_some()
    }

    /// `Bᵀ self B` for a rectangular `B`.
    pub fn congruence(&self, b: &DMatrix<f64>) -> Result<SymMatrix> {
        if b.nrows() != self.order() {
            return Err(Error::shape(format!(
                "congruence factor has {} rows, matrix order {}",
                b.nrows(),
                self.order()
            )));
        }
        Ok(SymMatrix::symmetrized(b.transpose() * &self.0 * b))
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        SymMatrix(-&self.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

/// Largest entrywise `|M_ij - M_ji|`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigenvector/eigenvalue factorization, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    pub u: DMatrix<f64>,
    pub lambda: DVector<f64>,
}

impl SpectralDecomp {
    pub fn order(&self) -> usize {
        self.lambda.len()
    }

    pub fn min(&self) -> f64 {
        self.lambda[self.order() - 1]
    }

    pub fn max(&self) -> f64 {
        self.lambda[0]
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.from_eigenbasis_diag(self.lambda.as_slice())
    }

    /// `U diag(d) Uᵀ`.
    pub fn from_eigenbasis_diag(&self, d: &[f64]) -> SymMatrix {
        let mut scaled = self.u.clone();
        for (j, dj) in d.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*dj);
        }
        SymMatrix::symmetrized(scaled * self.u.transpose())
    }

    /// `Uᵀ M U`.
    pub fn to_eigenbasis(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.u.transpose() * m * &self.u
    }

    /// `U M Uᵀ`.
    pub fn from_eigenbasis(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.u * m * self.u.transpose()
    }

    fn require_positive(&self, what: &str) -> Result<()> {
        let lmin = self.min();
        if lmin > 0.0 {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{what} requires a positive definite argument, λ_min = {lmin:.3e}"
            )))
        }
    }
}

pub fn spectral_decompose(x: &SymMatrix) -> Result<SpectralDecomp> {
    let m = x.matrix();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::DecompositionFailure(format!("no convergence for order {n}")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut u = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SpectralDecomp { u, lambda })
}

/// Scalar generators `g` on `(0, ∞)`, each matrix anti-monotone and convex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Generator {
    /// `-ln t`
    NegLog,
    /// `1/t`
    Inverse,
    /// `-√t`
    NegSqrt,
    /// `-t^α`, `0 < α < 1`
    NegPower(f64),
}

impl Generator {
    pub fn neg_power(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Generator::NegPower(alpha))
        } else {
            Err(Error::domain(format!("power exponent must lie in (0,1), got {alpha}")))
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Generator::NegLog => -t.ln(),
            Generator::Inverse => 1.0 / t,
            Generator::NegSqrt => -t.sqrt(),
            Generator::NegPower(a) => -t.powf(a),
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        match *self {
            Generator::NegLog => -1.0 / t,
            Generator::Inverse => -1.0 / (t * t),
            Generator::NegSqrt => -0.5 / t.sqrt(),
            Generator::NegPower(a) => -a * t.powf(a - 1.0),
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        match *self {
            Generator::NegLog => 1.0 / (t * t),
            Generator::Inverse => 2.0 / (t * t * t),
            Generator::NegSqrt => 0.25 / (t * t.sqrt()),
            Generator::NegPower(a) => -a * (a - 1.0) * t.powf(a - 2.0),
        }
    }

    fn check_domain(t: f64) -> Result<()> {
        if t > 0.0 && t.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(format!("generator argument must be positive, got {t:.3e}")))
        }
    }

    /// First divided difference, positive arguments assumed.
    pub(crate) fn dd1_unchecked(&self, a: f64, b: f64) -> f64 {
        if confluent(a, b) {
            return self.d1(0.5 * (a + b));
        }
        match *self {
            Generator::Inverse => -1.0 / (a * b),
            Generator::NegSqrt => -1.0 / (a.sqrt() + b.sqrt()),
            Generator::NegLog => -((a - b) / b).ln_1p() / (a - b),
            Generator::NegPower(p) => -b.powf(p) * (p * ((a - b) / b).ln_1p()).exp_m1() / (a - b),
        }
    }

    /// Second divided difference, positive arguments assumed.
    pub(crate) fn dd2_unchecked(&self, a: f64, b: f64, c: f64) -> f64 {
        let mut v = [a, b, c];
        v.sort_by(f64::total_cmp);
        let [x, y, z] = v;
        if confluent(x, z) {
            return 0.5 * self.d2((x + y + z) / 3.0);
        }
        match *self {
            Generator::Inverse => 1.0 / (x * y * z),
            Generator::NegSqrt => {
                let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
                1.0 / ((sx + sy) * (sx + sz) * (sy + sz))
            }
            _ => (self.dd1_unchecked(y, z) - self.dd1_unchecked(x, y)) / (z - x),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::NegLog => write!(f, "neg-log"),
            Generator::Inverse => write!(f, "inverse"),
            Generator::NegSqrt => write!(f, "neg-sqrt"),
            Generator::NegPower(a) => write!(f, "neg-power:{a}"),
        }
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neg-log" | "neglog" => Ok(Generator::NegLog),
            "inverse" => Ok(Generator::Inverse),
            "neg-sqrt" | "negsqrt" => Ok(Generator::NegSqrt),
            _ => {
                let alpha = s
                    .strip_prefix("neg-power:")
                    .and_then(|a| a.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse {
                        location: "generator".into(),
                        message: format!("unknown generator `{s}`"),
                    })?;
                Generator::neg_power(alpha)
            }
        }
    }
}

pub(crate) fn confluent(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONFLUENCE_RTOL * a.abs().max(b.abs()).max(1.0)
}

/// Matrix of first divided differences `g^[1](λ_i, λ_j)`.
pub fn divided_diff_1(g: Generator, lambda: &[f64]) -> Result<DMatrix<f64>> {
    for &l in lambda {
        Generator::check_domain(l)?;
    }
    let n = lambda.len();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = g.dd1_unchecked(lambda[i], lambda[j]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Second divided difference `g^[2](a, b, c)`, symmetric in its arguments.
pub fn divided_diff_2(g: Generator, a: f64, b: f64, c: f64) -> Result<f64> {
    Generator::check_domain(a)?;
    Generator::check_domain(b)?;
    Generator::check_domain(c)?;
    Ok(g.dd2_unchecked(a, b, c))
}

/// `g(X) = U diag(g(λ)) Uᵀ`.
pub fn apply_matrix_function(g: Generator, x: &SymMatrix) -> Result<SymMatrix> {
    let d = spectral_decompose(x)?;
    d.require_positive("matrix function")?;
    let vals: Vec<f64> = d.lambda.iter().map(|&l| g.value(l)).collect();
    Ok(d.from_eigenbasis_diag(&vals))
}

/// Natural logarithm of a positive definite matrix.
pub fn matrix_log(x: &SymMatrix) -> Result<SymMatrix> {
    let d = spectral_decompose(x)?;
    d.require_positive("matrix logarithm")?;
    let vals: Vec<f64> = d.lambda.iter().map(|l| l.ln()).collect();
    Ok(d.from_eigenbasis_diag(&vals))
}

/// Principal square root of a positive semidefinite matrix.
pub fn matrix_sqrt(x: &SymMatrix) -> Result<SymMatrix> {
    let d = spectral_decompose(x)?;
    if d.min() < -1e-12 * d.max().abs().max(1.0) {
        return Err(Error::domain(format!(
            "square root requires a PSD argument, λ_min = {:.3e}",
            d.min()
        )));
    }
    let vals: Vec<f64> = d.lambda.iter().map(|l| l.max(0.0).sqrt()).collect();
    Ok(d.from_eigenbasis_diag(&vals))
}

/// Elementwise (Schur/Hadamard) product.
pub fn schur_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "schur product of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.component_mul(b))
}

/// Column-stacking vectorization.
pub fn vec(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::shape(format!(
            "cannot reshape length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Position of entry `(i, j)` of an order-`n` matrix inside `vec`.
#[inline]
pub fn vec_index(n: usize, i: usize, j: usize) -> usize {
    i + n * j
}

/// Dimension of the space of symmetric matrices of order `n`.
#[inline]
pub fn sym_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Upper-triangle index pairs `(r, s)`, `r <= s`, in the order used by [`svec`].
pub fn sym_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(sym_dim(n));
    for s in 0..n {
        for r in 0..=s {
            out.push((r, s));
        }
    }
    out
}

/// Coordinates in the orthonormal basis `{E_rr, (E_rs + E_sr)/√2}`.
pub fn svec(x: &SymMatrix) -> DVector<f64> {
    let n = x.order();
    let m = x.matrix();
    DVector::from_iterator(
        sym_dim(n),
        sym_pairs(n).into_iter().map(|(r, s)| {
            if r == s {
                m[(r, r)]
            } else {
                std::f64::consts::SQRT_2 * m[(r, s)]
            }
        }),
    )
}

pub fn smat(n: usize, v: &DVector<f64>) -> Result<SymMatrix> {
    if v.len() != sym_dim(n) {
        return Err(Error::shape(format!("svec length {} for order {n}", v.len())));
    }
    let mut m = DMatrix::zeros(n, n);
    for (a, (r, s)) in sym_pairs(n).into_iter().enumerate() {
        if r == s {
            m[(r, r)] = v[a];
        } else {
            let w = v[a] / std::f64::consts::SQRT_2;
            m[(r, s)] = w;
            m[(s, r)] = w;
        }
    }
    SymMatrix::new(m)
}

/// Restricts an `n²×n²` operator to symmetric matrices in [`svec`] coordinates.
pub fn reduce_operator(h: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let pairs = sym_pairs(n);
    let d = pairs.len();
    let h_sqrt = std::f64::consts::FRAC_1_SQRT_2;
    let support = |(r, s): (usize, usize)| -> ([(usize, f64); 2], usize) {
        if r == s {
            ([(vec_index(n, r, r), 1.0), (0, 0.0)], 1)
        } else {
            ([(vec_index(n, r, s), h_sqrt), (vec_index(n, s, r), h_sqrt)], 2)
        }
    };
    let mut out = DMatrix::zeros(d, d);
    for (b, &pb) in pairs.iter().enumerate() {
        let (cb, nb) = support(pb);
        for (a, &pa) in pairs.iter().enumerate() {
            let (ca, na) = support(pa);
            let mut acc = 0.0;
            for &(i, wi) in &ca[..na] {
                for &(j, wj) in &cb[..nb] {
                    acc += wi * wj * h[(i, j)];
                }
            }
            out[(a, b)] = acc;
        }
    }
    out
}

/// Materializes a linear operator on symmetric matrices as the `n²×n²`
/// matrix `P H P`, where `P` is the orthogonal projector onto vectorized
/// symmetric matrices.
///
/// `action` is evaluated once per upper-triangle basis element.
pub fn assemble_operator<F>(n: usize, mut action: F) -> Result<DMatrix<f64>>
where
    F: FnMut(&DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    let nn = n * n;
    let mut out = DMatrix::zeros(nn, nn);
    let mut basis = DMatrix::zeros(n, n);
    for (r, s) in sym_pairs(n) {
        if r == s {
            basis[(r, r)] = 1.0;
        } else {
            basis[(r, s)] = 0.5;
            basis[(s, r)] = 0.5;
        }
        let img = action(&basis)?;
        basis[(r, s)] = 0.0;
        basis[(s, r)] = 0.0;
        let col_a = vec_index(n, r, s);
        let col_b = vec_index(n, s, r);
        for j in 0..n {
            for i in 0..n {
                let v = 0.5 * (img[(i, j)] + img[(j, i)]);
                out[(vec_index(n, i, j), col_a)] = v;
                if col_b != col_a {
                    out[(vec_index(n, i, j), col_b)] = v;
                }
            }
        }
    }
    Ok(out)
}

/// `P H P` for an arbitrary `n²×n²` matrix.
pub fn project_symmetric(h: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let nn = n * n;
    let t = |k: usize| (k % n) * n + k / n;
    DMatrix::from_fn(nn, nn, |a, b| {
        0.25 * (h[(a, b)] + h[(t(a), b)] + h[(a, t(b))] + h[(t(a), t(b))])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::new(&g + g.transpose()).unwrap()
    }

    fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::new(&g * g.transpose() + DMatrix::identity(n, n) * 0.1).unwrap()
    }

    fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        g.qr().q()
    }

    const ALL: [Generator; 4] = [
        Generator::NegLog,
        Generator::Inverse,
        Generator::NegSqrt,
        Generator::NegPower(0.3),
    ];

    #[test]
    fn symmetrizes_on_construction() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 3.0]);
        let s = SymMatrix::new(m).unwrap();
        assert_eq!(s.matrix()[(0, 1)], 3.0);
        assert_eq!(s.matrix()[(1, 0)], 3.0);
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]);
        assert!(matches!(SymMatrix::new(m), Err(Error::InvalidMatrix(_))));
        assert!(matches!(
            SymMatrix::new(DMatrix::zeros(2, 3)),
            Err(Error::ShapeError(_))
        ));
    }

    #[test]
    fn decomposes_identity_and_diagonal() {
        let d = spectral_decompose(&SymMatrix::identity(3)).unwrap();
        assert_eq!(d.lambda.as_slice(), &[1.0, 1.0, 1.0]);
        let d = spectral_decompose(&SymMatrix::from_diagonal(&[1.0, 2.0])).unwrap();
        assert_relative_eq!(d.lambda[0], 2.0, epsilon = 1e-15);
        assert_relative_eq!(d.lambda[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(d.u[(1, 0)].abs(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(d.u[(0, 1)].abs(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn reconstruction_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = random_sym(&mut rng, 6);
            let d = spectral_decompose(&x).unwrap();
            let orth = (&d.u * d.u.transpose() - DMatrix::<f64>::identity(6, 6)).norm();
            assert!(orth <= 1e-10 * 6.0);
            let err = (d.reconstruct().matrix() - x.matrix()).norm();
            assert!(err <= 1e-10 * (1.0 + x.norm_fro()));
            assert!(d.lambda.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn first_divided_difference_examples() {
        let m = divided_diff_1(Generator::NegLog, &[1.0, 1.0]).unwrap();
        assert_relative_eq!(m[(0, 1)], -1.0, epsilon = 1e-15);
        let e = std::f64::consts::E;
        let m = divided_diff_1(Generator::NegLog, &[e, 1.0]).unwrap();
        assert_relative_eq!(m[(0, 1)], -1.0 / (e - 1.0), epsilon = 1e-14);
        assert_relative_eq!(m[(0, 1)], -0.581977, epsilon = 1e-6);
        let m = divided_diff_1(Generator::Inverse, &[2.0, 1.0]).unwrap();
        assert_relative_eq!(m[(0, 1)], -0.5, epsilon = 1e-15);
        assert_relative_eq!(m[(0, 0)], -0.25, epsilon = 1e-15);
        assert!(matches!(
            divided_diff_1(Generator::NegLog, &[1.0, 0.0]),
            Err(Error::DomainViolation(_))
        ));
    }

    #[test]
    fn first_divided_difference_matches_plain_quotient() {
        for g in ALL {
            for &(a, b) in &[(0.3, 2.0), (5.0, 1.0), (1.0, 1.1)] {
                let direct = (g.value(a) - g.value(b)) / (a - b);
                assert_relative_eq!(g.dd1_unchecked(a, b), direct, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn second_divided_difference_examples() {
        assert_relative_eq!(
            divided_diff_2(Generator::NegLog, 1.0, 1.0, 1.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let h1 = |a: f64, b: f64| (-(a.ln()) + b.ln()) / (a - b);
        let nested = (h1(1.0, 2.0) - h1(1.0, 4.0)) / (2.0 - 4.0);
        for (a, b, c) in [(1.0, 2.0, 4.0), (4.0, 1.0, 2.0), (2.0, 4.0, 1.0)] {
            assert_relative_eq!(
                divided_diff_2(Generator::NegLog, a, b, c).unwrap(),
                nested,
                max_relative = 1e-14
            );
        }
        assert_relative_eq!(
            divided_diff_2(Generator::Inverse, 1.0, 1.0, 2.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert!(divided_diff_2(Generator::Inverse, 1.0, -1.0, 2.0).is_err());
    }

    #[test]
    fn second_divided_difference_closed_forms_match_nested_quotient() {
        for g in [Generator::Inverse, Generator::NegSqrt] {
            let (a, b, c) = (0.7, 1.9, 3.2);
            let nested = (g.dd1_unchecked(a, b) - g.dd1_unchecked(a, c)) / (b - c);
            assert_relative_eq!(g.dd2_unchecked(a, b, c), nested, max_relative = 1e-12);
        }
    }

    #[test]
    fn divided_differences_continuous_across_confluence() {
        for g in ALL {
            for &base in &[0.01f64, 0.5, 3.0, 40.0] {
                let tol = CONFLUENCE_RTOL * base.max(1.0);
                let inside = g.dd1_unchecked(base + 0.999 * tol, base);
                let outside = g.dd1_unchecked(base + 1.001 * tol, base);
                assert!((inside - outside).abs() <= 1e-6 * inside.abs().max(1.0));
                let inside = g.dd2_unchecked(base, base + 0.999 * tol, base + 0.5 * tol);
                let outside = g.dd2_unchecked(base, base + 1.001 * tol, base + 0.5 * tol);
                assert!((inside - outside).abs() <= 1e-5 * inside.abs().max(1.0));
            }
        }
    }

    #[test]
    fn generators_are_convex_and_anti_monotone_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in ALL {
            for _ in 0..50 {
                let t: f64 = rng.random_range(1e-3..50.0);
                assert!(g.d2(t) >= 0.0);
            }
            for _ in 0..50 {
                let b = random_pd(&mut rng, 2);
                let gap = random_pd(&mut rng, 2);
                let a = &b + &gap;
                let diff = &apply_matrix_function(g, &b).unwrap() - &apply_matrix_function(g, &a).unwrap();
                assert!(diff.min_eigenvalue().unwrap() >= -1e-10);
            }
        }
    }

    #[test]
    fn matrix_function_examples() {
        let z = apply_matrix_function(Generator::NegLog, &SymMatrix::identity(3)).unwrap();
        assert!(z.norm_fro() < 1e-15);
        let inv = apply_matrix_function(Generator::Inverse, &SymMatrix::from_diagonal(&[2.0, 4.0])).unwrap();
        assert_relative_eq!(inv.matrix()[(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(inv.matrix()[(1, 1)], 0.25, epsilon = 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_pd(&mut rng, 5);
        let r = apply_matrix_function(Generator::NegSqrt, &x).unwrap();
        let sq = r.matrix() * r.matrix();
        assert!((sq - x.matrix()).norm() <= 1e-9 * x.norm_fro());
        assert!(apply_matrix_function(Generator::NegLog, &SymMatrix::from_diagonal(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn functional_calculus_commutes_with_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for g in ALL {
            let x = random_pd(&mut rng, 4);
            let q = random_orthogonal(&mut rng, 4);
            let rotated = SymMatrix::new(&q * x.matrix() * q.transpose()).unwrap();
            let lhs = apply_matrix_function(g, &rotated).unwrap();
            let rhs = &q * apply_matrix_function(g, &x).unwrap().matrix() * q.transpose();
            assert!((lhs.matrix() - &rhs).norm() <= 1e-9 * rhs.norm());
        }
    }

    #[test]
    fn schur_vec_kron_utilities() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(vec(&a).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let d = schur_product(&a, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]));
        assert!(schur_product(&a, &DMatrix::zeros(2, 3)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut r = || DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let (a, x, b) = (r(), r(), r());
        let lhs = vec(&(&a * &x * b.transpose()));
        let rhs = kron(&b, &a) * vec(&x);
        assert!((lhs - rhs).norm() <= 1e-12);
    }

    #[test]
    fn svec_is_an_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_sym(&mut rng, 4);
        let y = random_sym(&mut rng, 4);
        assert_relative_eq!(svec(&x).dot(&svec(&y)), x.inner(&y), max_relative = 1e-13);
        let back = smat(4, &svec(&x)).unwrap();
        assert!((back.matrix() - x.matrix()).norm() < 1e-14);
    }

    #[test]
    fn assembled_operator_matches_explicit_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 3;
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        // X ↦ A X Aᵀ
        let explicit = project_symmetric(&kron(&a, &a), n);
        let assembled = assemble_operator(n, |x| Ok(&a * x * a.transpose())).unwrap();
        assert!((explicit - assembled).norm() < 1e-13);
    }

    #[test]
    fn generator_names_round_trip() {
        for g in ALL {
            assert_eq!(g.to_string().parse::<Generator>().unwrap(), g);
        }
        assert!("neg-power:1.5".parse::<Generator>().is_err());
        assert!("cosh".parse::<Generator>().is_err());
    }
}
