//! Linear maps between spaces of symmetric matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matfun::{kron, vec_index, SymMatrix};

/// `X ↦ Σ_j K_j X K_jᵀ` with every `K_j` of shape `k×n`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausMap {
    factors: Vec<DMatrix<f64>>,
    input: usize,
    output: usize,
}

impl KrausMap {
    pub fn new(factors: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::shape("Kraus map needs at least one factor"))?;
        let (k, n) = first.shape();
        if k == 0 || n == 0 {
            return Err(Error::shape("Kraus factor with a zero dimension"));
        }
        if let Some(bad) = factors.iter().position(|f| f.shape() != (k, n)) {
            return Err(Error::shape(format!(
                "Kraus factor {bad} has shape {:?}, expected {:?}",
                factors[bad].shape(),
                (k, n)
            )));
        }
        if factors.iter().flat_map(|f| f.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite Kraus entry".into()));
        }
        Ok(Self {
            factors,
            input: n,
            output: k,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            factors: vec![DMatrix::identity(n, n)],
            input: n,
            output: n,
        }
    }

    /// Pinching `X ↦ Σ_k Z_k X Z_k`; the projectors must be symmetric,
    /// idempotent and sum to the identity.
    pub fn pinching(projectors: Vec<DMatrix<f64>>) -> Result<Self> {
        let map = Self::new(projectors)?;
        let n = map.input;
        if map.output != n {
            return Err(Error::shape("pinching projectors must be square"));
        }
        let mut total = DMatrix::<f64>::zeros(n, n);
        for (i, z) in map.factors.iter().enumerate() {
            let sym_err = (z - z.transpose()).norm();
            let idem_err = (z * z - z).norm();
            if sym_err > 1e-10 || idem_err > 1e-10 {
                return Err(Error::Validation(format!(
                    "pinching factor {i} is not an orthogonal projector \
                     (asymmetry {sym_err:.2e}, idempotency error {idem_err:.2e})"
                )));
            }
            total += z;
        }
        let sum_err = (total - DMatrix::<f64>::identity(n, n)).norm();
        if sum_err > 1e-10 {
            return Err(Error::Validation(format!(
                "pinching projectors do not sum to the identity (error {sum_err:.2e})"
            )));
        }
        Ok(map)
    }

    /// Coordinate pinching onto the diagonal.
    pub fn diagonal_pinching(n: usize) -> Self {
        let factors = (0..n)
            .map(|i| {
                let mut z = DMatrix::zeros(n, n);
                z[(i, i)] = 1.0;
                z
            })
            .collect();
        Self {
            factors,
            input: n,
            output: n,
        }
    }

    /// `X ↦ Σ_k Σ_j Z_k K_j X K_jᵀ Z_k`, the pinching applied after `self`.
    pub fn then_pinch(&self, pinch: &KrausMap) -> Result<Self> {
        if pinch.input != self.output {
            return Err(Error::shape(format!(
                "pinching of order {} after map with output order {}",
                pinch.input, self.output
            )));
        }
        let factors = pinch
            .factors
            .iter()
            .flat_map(|z| self.factors.iter().map(move |k| z * k))
            .collect();
        Self::new(factors)
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn input_order(&self) -> usize {
        self.input
    }

    pub fn output_order(&self) -> usize {
        self.output
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    fn check_input(&self, order: usize) -> Result<()> {
        if order == self.input {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "map expects order {}, got {order}",
                self.input
            )))
        }
    }

    pub(crate) fn apply_raw(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.output, self.output);
        for k in &self.factors {
            out += k * x * k.transpose();
        }
        out
    }

    pub(crate) fn adjoint_raw(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.input, self.input);
        for k in &self.factors {
            out += k.transpose() * y * k;
        }
        out
    }

    pub fn apply(&self, x: &SymMatrix) -> Result<SymMatrix> {
        self.check_input(x.order())?;
        Ok(SymMatrix::symmetrized(self.apply_raw(x.matrix())))
    }

    pub fn adjoint_apply(&self, y: &SymMatrix) -> Result<SymMatrix> {
        if y.order() != self.output {
            return Err(Error::shape(format!(
                "adjoint expects order {}, got {}",
                self.output,
                y.order()
            )));
        }
        Ok(SymMatrix::symmetrized(self.adjoint_raw(y.matrix())))
    }

    /// `Σ_j K_j ⊗ K_j`, so that `vec(L(X)) = M vec(X)`.
    pub fn vectorized_matrix(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.output * self.output, self.input * self.input);
        for k in &self.factors {
            out += kron(k, k);
        }
        out
    }

    /// Adjoint map `Y ↦ Σ_j K_jᵀ Y K_j` as a Kraus map.
    pub fn adjoint(&self) -> KrausMap {
        KrausMap {
            factors: self.factors.iter().map(|k| k.transpose()).collect(),
            input: self.output,
            output: self.input,
        }
    }

    /// Largest eigenvalue of `Σ_j K_jᵀ K_j`; at most one for trace
    /// non-increasing maps.
    pub fn trace_gain(&self) -> Result<f64> {
        let gram = SymMatrix::symmetrized(self.adjoint_raw(&DMatrix::identity(self.output, self.output)));
        gram.max_eigenvalue()
    }
}

/// Block transposition on `ℝ^{n1} ⊗ ℝ^{n2}`: each `n2×n2` block of an
/// `n1×n1` block matrix is transposed in place.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartialTranspose {
    n1: usize,
    n2: usize,
}

impl PartialTranspose {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::shape("partial transpose subsystem dimension must be positive"));
        }
        Ok(Self { n1, n2 })
    }

    /// Partial transpose for order `n`, checked against the factorization.
    pub fn for_order(n: usize, n1: usize, n2: usize) -> Result<Self> {
        if n1 * n2 != n {
            return Err(Error::shape(format!(
                "subsystems {n1}x{n2} do not factor order {n}"
            )));
        }
        Self::new(n1, n2)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn order(&self) -> usize {
        self.n1 * self.n2
    }

    pub(crate) fn apply_raw(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let b = self.n2;
        DMatrix::from_fn(self.order(), self.order(), |r, c| {
            let (a, i) = (r / b, r % b);
            let (bb, j) = (c / b, c % b);
            x[(a * b + j, bb * b + i)]
        })
    }

    pub fn apply(&self, x: &SymMatrix) -> Result<SymMatrix> {
        if x.order() != self.order() {
            return Err(Error::shape(format!(
                "partial transpose expects order {}, got {}",
                self.order(),
                x.order()
            )));
        }
        Ok(SymMatrix::symmetrized(self.apply_raw(x.matrix())))
    }

    /// Permutation matrix acting on `vec`.
    pub fn vectorized_matrix(&self) -> DMatrix<f64> {
        let n = self.order();
        let b = self.n2;
        let mut out = DMatrix::zeros(n * n, n * n);
        for c in 0..n {
            for r in 0..n {
                let (a, i) = (r / b, r % b);
                let (bb, j) = (c / b, c % b);
                out[(vec_index(n, r, c), vec_index(n, a * b + j, bb * b + i))] = 1.0;
            }
        }
        out
    }
}

/// Any map usable as a pre-composition or barrier map.
#[derive(Clone, Debug, PartialEq)]
pub enum LinearMap {
    Identity(usize),
    Kraus(KrausMap),
    PartialTranspose(PartialTranspose),
}

impl LinearMap {
    pub fn input_order(&self) -> usize {
        match self {
            LinearMap::Identity(n) => *n,
            LinearMap::Kraus(k) => k.input_order(),
            LinearMap::PartialTranspose(p) => p.order(),
        }
    }

    pub fn output_order(&self) -> usize {
        match self {
            LinearMap::Identity(n) => *n,
            LinearMap::Kraus(k) => k.output_order(),
            LinearMap::PartialTranspose(p) => p.order(),
        }
    }

    pub(crate) fn apply_raw(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            LinearMap::Identity(_) => x.clone(),
            LinearMap::Kraus(k) => k.apply_raw(x),
            LinearMap::PartialTranspose(p) => p.apply_raw(x),
        }
    }

    pub(crate) fn adjoint_raw(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            LinearMap::Identity(_) => y.clone(),
            LinearMap::Kraus(k) => k.adjoint_raw(y),
            // permutation that is its own inverse, hence self-adjoint
            LinearMap::PartialTranspose(p) => p.apply_raw(y),
        }
    }

    pub fn apply(&self, x: &SymMatrix) -> Result<SymMatrix> {
        if x.order() != self.input_order() {
            return Err(Error::shape(format!(
                "map expects order {}, got {}",
                self.input_order(),
                x.order()
            )));
        }
        Ok(SymMatrix::symmetrized(self.apply_raw(x.matrix())))
    }

    pub fn adjoint_apply(&self, y: &SymMatrix) -> Result<SymMatrix> {
        if y.order() != self.output_order() {
            return Err(Error::shape(format!(
                "adjoint expects order {}, got {}",
                self.output_order(),
                y.order()
            )));
        }
        Ok(SymMatrix::symmetrized(self.adjoint_raw(y.matrix())))
    }

    pub fn vectorized_matrix(&self) -> DMatrix<f64> {
        match self {
            LinearMap::Identity(n) => DMatrix::identity(n * n, n * n),
            LinearMap::Kraus(k) => k.vectorized_matrix(),
            LinearMap::PartialTranspose(p) => p.vectorized_matrix(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matfun::vec;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn rand_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        SymMatrix::new(rand_mat(rng, n, n)).unwrap()
    }

    fn rand_psd(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        let g = rand_mat(rng, n, n);
        SymMatrix::new(&g * g.transpose()).unwrap()
    }

    fn rand_kraus(rng: &mut ChaCha8Rng, k: usize, n: usize, r: usize) -> KrausMap {
        KrausMap::new((0..r).map(|_| rand_mat(rng, k, n)).collect()).unwrap()
    }

    #[test]
    fn identity_factor_is_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = rand_sym(&mut rng, 3);
        let id = KrausMap::identity(3);
        assert_eq!(id.apply(&x).unwrap(), x);
        assert_eq!(id.adjoint_apply(&x).unwrap(), x);
        assert_eq!(id.vectorized_matrix(), DMatrix::<f64>::identity(9, 9));
    }

    #[test]
    fn coordinate_pinching_keeps_diagonal() {
        let x = SymMatrix::from_rows(&[vec![2.0, 0.7], vec![0.7, 5.0]]).unwrap();
        let p = KrausMap::diagonal_pinching(2);
        assert_eq!(p.apply(&x).unwrap(), SymMatrix::from_diagonal(&[2.0, 5.0]));
        assert_eq!(p.adjoint_apply(&x).unwrap(), p.apply(&x).unwrap());
        let explicit = KrausMap::pinching(p.factors().to_vec()).unwrap();
        assert_eq!(explicit, p);
    }

    #[test]
    fn pinching_constructor_rejects_non_projectors() {
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 0.0]);
        assert!(KrausMap::pinching(vec![z]).is_err());
        let half = DMatrix::from_diagonal_element(2, 2, 1.0);
        assert!(KrausMap::pinching(vec![half.clone(), half]).is_err());
    }

    #[test]
    fn kraus_maps_preserve_symmetry_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let l = rand_kraus(&mut rng, 5, 3, 2);
            let x = rand_psd(&mut rng, 3);
            let raw = l.apply_raw(x.matrix());
            assert!(crate::matfun::max_asymmetry(&raw) <= 1e-12);
            assert!(l.apply(&x).unwrap().min_eigenvalue().unwrap() >= -1e-10);
        }
    }

    #[test]
    fn adjoint_pairing_and_vectorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = rand_kraus(&mut rng, 4, 3, 3);
        let x = rand_sym(&mut rng, 3);
        let y = rand_sym(&mut rng, 4);
        let lhs = l.apply(&x).unwrap().inner(&y);
        let rhs = x.inner(&l.adjoint_apply(&y).unwrap());
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);

        let m = l.vectorized_matrix();
        let err = (vec(l.apply(&x).unwrap().matrix()) - &m * x.to_vec()).norm();
        assert!(err <= 1e-11);
        let adj = l.adjoint().vectorized_matrix();
        assert!((adj - m.transpose()).norm() <= 1e-12);
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = rand_kraus(&mut rng, 4, 4, 2);
        let (x, y) = (rand_sym(&mut rng, 4), rand_sym(&mut rng, 4));
        let (a, b) = (0.7, -1.3);
        let lhs = l.apply(&x.scale(a).add_scaled(b, &y)).unwrap();
        let rhs = l.apply(&x).unwrap().scale(a).add_scaled(b, &l.apply(&y).unwrap());
        assert!((lhs.matrix() - rhs.matrix()).norm() <= 1e-12);
    }

    #[test]
    fn trace_non_increasing_when_gain_at_most_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let raw = rand_kraus(&mut rng, 6, 3, 2);
        let gain = raw.trace_gain().unwrap();
        let scaled = KrausMap::new(raw.factors().iter().map(|k| k / gain.sqrt()).collect()).unwrap();
        assert!(scaled.trace_gain().unwrap() <= 1.0 + 1e-10);
        for _ in 0..10 {
            let x = rand_psd(&mut rng, 3);
            assert!(scaled.apply(&x).unwrap().trace() <= x.trace() + 1e-10);
        }
    }

    #[test]
    fn partial_transpose_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let one = PartialTranspose::new(1, 1).unwrap();
        let x1 = SymMatrix::from_rows(&[vec![3.0]]).unwrap();
        assert_eq!(one.apply(&x1).unwrap(), x1);

        let pt = PartialTranspose::new(2, 2).unwrap();
        let a = rand_sym(&mut rng, 2);
        let b = rand_mat(&mut rng, 2, 2);
        // (A ⊗ B)^Γ = A ⊗ Bᵀ, checked on the raw (non-symmetric) action
        let ab = kron(a.matrix(), &b);
        let expected = kron(a.matrix(), &b.transpose());
        assert!((pt.apply_raw(&ab) - expected).norm() < 1e-15);

        let x = rand_sym(&mut rng, 4);
        let once = pt.apply(&x).unwrap();
        assert_eq!(pt.apply(&once).unwrap(), x);
        assert_relative_eq!(once.trace(), x.trace(), epsilon = 1e-13);
        let err = (vec(once.matrix()) - pt.vectorized_matrix() * x.to_vec()).norm();
        assert!(err < 1e-14);
        assert!(PartialTranspose::for_order(6, 2, 2).is_err());
    }

    #[test]
    fn shape_errors() {
        let l = KrausMap::identity(3);
        assert!(l.apply(&SymMatrix::identity(2)).is_err());
        assert!(KrausMap::new(vec![DMatrix::zeros(2, 3), DMatrix::zeros(3, 2)]).is_err());
        assert!(KrausMap::new(vec![]).is_err());
    }
}
