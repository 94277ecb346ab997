//! Trace objectives `φ_C(X) = Tr(C g(X))`, the log-det barrier, and their
//! sums, with gradients and Hessians in vectorized form.
//!
//! With `X = U Λ Uᵀ` and `C̃ = Uᵀ C U`:
//!
//! * `∇φ_C(X) = U (C̃ ∘ g^[1](Λ)) Uᵀ`
//! * `H = (U ⊗ U) S (U ⊗ U)ᵀ` where the middle factor `S` is sparse with
//!   entries (column-major `vec` indexing, `(p,q)` the matrix position)
//!
//!   `S[(p,q),(r,s)] = δ_qr C̃_sp Γ_pqs + δ_sp C̃_qr Γ_rpq`,  `Γ_ijk = g^[2](λ_i, λ_j, λ_k)`.
//!
//! Each row of `S` has at most `2n - 1` nonzeros. Hessians are returned as
//! `P H P`, `P` the projector onto vectorized symmetric matrices, which is
//! the exact Hessian of `X ↦ φ((X + Xᵀ)/2)` on all of `ℝ^{n×n}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linmap::LinearMap;
use crate::matfun::{
    assemble_operator, divided_diff_1, kron, spectral_decompose, vec, vec_index, Generator,
    SpectralDecomp, SymMatrix,
};

/// Value, gradient and (optionally) Hessian of a function of one symmetric matrix.
#[derive(Clone, Debug)]
pub struct DerivativeBundle {
    pub value: f64,
    /// `vec` of the gradient matrix, length `n²`.
    pub gradient: DVector<f64>,
    /// `n² × n²` Hessian.
    pub hessian: Option<DMatrix<f64>>,
}

impl DerivativeBundle {
    pub fn zero(n: usize, with_hessian: bool) -> Self {
        Self {
            value: 0.0,
            gradient: DVector::zeros(n * n),
            hessian: with_hessian.then(|| DMatrix::zeros(n * n, n * n)),
        }
    }

    pub fn order(&self) -> usize {
        (self.gradient.len() as f64).sqrt().round() as usize
    }

    pub fn gradient_matrix(&self) -> SymMatrix {
        let n = self.order();
        SymMatrix::symmetrized(DMatrix::from_column_slice(n, n, self.gradient.as_slice()))
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, a: f64, other: &DerivativeBundle) {
        self.value += a * other.value;
        self.gradient.axpy(a, &other.gradient, 1.0);
        if let (Some(h), Some(o)) = (self.hessian.as_mut(), other.hessian.as_ref()) {
            h.zip_apply(o, |x, y| *x += a * y);
        }
    }

    /// `⟨H ξ, ξ⟩`, or `None` without a Hessian.
    pub fn hessian_form(&self, xi: &SymMatrix) -> Option<f64> {
        let v = xi.to_vec();
        self.hessian.as_ref().map(|h| v.dot(&(h * &v)))
    }
}

/// `Tr(C g(X))`, optionally pre-composed with a linear map: `Tr(C g(L(X)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceObjective {
    weight: SymMatrix,
    generator: Generator,
    map: Option<LinearMap>,
}

impl TraceObjective {
    pub fn new(weight: SymMatrix, generator: Generator, map: Option<LinearMap>) -> Result<Self> {
        if let Some(l) = &map {
            if l.output_order() != weight.order() {
                return Err(Error::shape(format!(
                    "weight order {} does not match map output order {}",
                    weight.order(),
                    l.output_order()
                )));
            }
        }
        let lmin = weight.min_eigenvalue()?;
        if lmin < -1e-10 {
            return Err(Error::Validation(format!(
                "objective weight must be PSD, λ_min = {lmin:.3e}"
            )));
        }
        Ok(Self {
            weight,
            generator,
            map,
        })
    }

    pub fn weight(&self) -> &SymMatrix {
        &self.weight
    }

    pub fn generator(&self) -> Generator {
        self.generator
    }

    pub fn map(&self) -> Option<&LinearMap> {
        self.map.as_ref()
    }

    pub fn input_order(&self) -> usize {
        self.map
            .as_ref()
            .map_or(self.weight.order(), |l| l.input_order())
    }

    fn argument(&self, x: &SymMatrix) -> Result<SymMatrix> {
        if x.order() != self.input_order() {
            return Err(Error::shape(format!(
                "objective expects order {}, got {}",
                self.input_order(),
                x.order()
            )));
        }
        match &self.map {
            Some(l) => l.apply(x),
            None => Ok(x.clone()),
        }
    }

    pub fn value(&self, x: &SymMatrix) -> Result<f64> {
        Ok(phi_eval(self, x, false)?.value)
    }
}

/// Third-order tensor `Γ_ijk = g^[2](λ_i, λ_j, λ_k)`, stored at `i + n(j + n k)`.
pub fn gamma_tensor(g: Generator, lambda: &[f64]) -> Vec<f64> {
    let n = lambda.len();
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        for j in 0..=k {
            for i in 0..=j {
                let v = g.dd2_unchecked(lambda[i], lambda[j], lambda[k]);
                for (a, b, c) in [
                    (i, j, k),
                    (i, k, j),
                    (j, i, k),
                    (j, k, i),
                    (k, i, j),
                    (k, j, i),
                ] {
                    out[a + n * (b + n * c)] = v;
                }
            }
        }
    }
    out
}

/// The sparse middle factor `S` in compressed-row form.
#[derive(Clone, Debug)]
pub struct SparseMiddle {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMiddle {
    /// Builds `S` from the rotated weight `C̃` and the tensor from [`gamma_tensor`].
    pub fn new(c_tilde: &DMatrix<f64>, gamma: &[f64]) -> Self {
        let n = c_tilde.nrows();
        let gm = |i: usize, j: usize, k: usize| gamma[i + n * (j + n * k)];
        let nn = n * n;
        let mut row_ptr = Vec::with_capacity(nn + 1);
        let mut cols = Vec::with_capacity(nn * (2 * n).saturating_sub(1));
        let mut vals = Vec::with_capacity(cols.capacity());
        row_ptr.push(0);
        for q in 0..n {
            for p in 0..n {
                let start = cols.len();
                for s in 0..n {
                    cols.push(vec_index(n, q, s));
                    vals.push(c_tilde[(s, p)] * gm(p, q, s));
                }
                for r in 0..n {
                    let v = c_tilde[(q, r)] * gm(r, p, q);
                    if r == q {
                        // column (q, p) already emitted by the first term with s = p
                        vals[start + p] += v;
                    } else {
                        cols.push(vec_index(n, r, p));
                        vals.push(v);
                    }
                }
                row_ptr.push(cols.len());
            }
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n * self.n)
            .map(|row| {
                (self.row_ptr[row]..self.row_ptr[row + 1])
                    .map(|e| self.vals[e] * v[self.cols[e]])
                    .sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let nn = self.n * self.n;
        let mut out = DMatrix::zeros(nn, nn);
        for row in 0..nn {
            for e in self.row_ptr[row]..self.row_ptr[row + 1] {
                out[(row, self.cols[e])] += self.vals[e];
            }
        }
        out
    }
}

/// Hessian operator of `Y ↦ Tr(C g(Y))` at a fixed decomposition of `Y`.
#[derive(Clone, Debug)]
pub(crate) struct TraceHessian {
    decomp: SpectralDecomp,
    middle: SparseMiddle,
}

impl TraceHessian {
    pub(crate) fn new(weight: &DMatrix<f64>, g: Generator, decomp: SpectralDecomp) -> Self {
        let c_tilde = decomp.to_eigenbasis(weight);
        let gamma = gamma_tensor(g, decomp.lambda.as_slice());
        let middle = SparseMiddle::new(&c_tilde, &gamma);
        Self { decomp, middle }
    }

    /// `U mat(S vec(Uᵀ ξ U)) Uᵀ`.
    pub(crate) fn apply(&self, xi: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.decomp.order();
        let rotated = self.decomp.to_eigenbasis(xi);
        let w = self.middle.apply(rotated.as_slice());
        self.decomp
            .from_eigenbasis(&DMatrix::from_column_slice(n, n, &w))
    }
}

/// Value, gradient and Hessian of a trace objective at `x`.
pub fn phi_eval(obj: &TraceObjective, x: &SymMatrix, want_hessian: bool) -> Result<DerivativeBundle> {
    let y = obj.argument(x)?;
    let d = spectral_decompose(&y)?;
    if d.min() <= 0.0 {
        let what = if obj.map.is_some() { "map output" } else { "argument" };
        return Err(Error::domain(format!(
            "trace objective {what} not positive definite, λ_min = {:.3e}",
            d.min()
        )));
    }
    let g = obj.generator;
    let lambda = d.lambda.as_slice();
    let c_tilde = d.to_eigenbasis(obj.weight.matrix());
    let value: f64 = lambda
        .iter()
        .enumerate()
        .map(|(i, &l)| c_tilde[(i, i)] * g.value(l))
        .sum();
    let g1 = divided_diff_1(g, lambda)?;
    let grad_y = d.from_eigenbasis(&c_tilde.component_mul(&g1));
    let n = x.order();
    let grad_x = match &obj.map {
        Some(l) => l.adjoint_raw(&grad_y),
        None => grad_y,
    };
    let gradient = vec(&SymMatrix::symmetrized(grad_x).into_matrix());

    let hessian = if want_hessian {
        let th = TraceHessian::new(obj.weight.matrix(), g, d);
        let h = match &obj.map {
            Some(l) => assemble_operator(n, |xi| Ok(l.adjoint_raw(&th.apply(&l.apply_raw(xi)))))?,
            None => assemble_operator(n, |xi| Ok(th.apply(xi)))?,
        };
        Some(h)
    } else {
        None
    };
    Ok(DerivativeBundle {
        value,
        gradient,
        hessian,
    })
}

/// `B(X) = -ln det X` with `∇B = -X⁻¹` and `H_B = X⁻¹ ⊗ X⁻¹`.
pub fn barrier_eval(x: &SymMatrix, want_hessian: bool) -> Result<DerivativeBundle> {
    let chol = x.matrix().clone().cholesky().ok_or_else(|| {
        Error::domain("log-det barrier argument is not positive definite")
    })?;
    let value = -2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let inv = SymMatrix::symmetrized(chol.inverse()).into_matrix();
    let gradient = -vec(&inv);
    let hessian = want_hessian.then(|| kron(&inv, &inv));
    Ok(DerivativeBundle {
        value,
        gradient,
        hessian,
    })
}

/// `-ln det L(X)` with gradient `-Lᵀ(L(X)⁻¹)` and Hessian `Lᵀ P(L(X)⁻¹) L`.
pub fn barrier_through_map(map: &LinearMap, x: &SymMatrix, want_hessian: bool) -> Result<DerivativeBundle> {
    let y = map.apply(x)?;
    let chol = y
        .matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::domain("barrier map output is not positive definite"))?;
    let value = -2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let inv = SymMatrix::symmetrized(chol.inverse()).into_matrix();
    let gradient = -vec(&SymMatrix::symmetrized(map.adjoint_raw(&inv)).into_matrix());
    let hessian = if want_hessian {
        Some(assemble_operator(x.order(), |xi| {
            Ok(map.adjoint_raw(&(&inv * map.apply_raw(xi) * &inv)))
        })?)
    } else {
        None
    };
    Ok(DerivativeBundle {
        value,
        gradient,
        hessian,
    })
}

/// `β Σ_t φ_t(X) - ln det X - Σ_j ln det L_j(X)`.
pub fn composite_eval(
    beta: f64,
    terms: &[TraceObjective],
    barrier_maps: &[LinearMap],
    x: &SymMatrix,
    want_hessian: bool,
) -> Result<DerivativeBundle> {
    if beta < 0.0 {
        return Err(Error::domain(format!("β must be nonnegative, got {beta}")));
    }
    let mut out = barrier_eval(x, want_hessian).map_err(|e| e.context("barrier on X"))?;
    if beta > 0.0 {
        for (i, t) in terms.iter().enumerate() {
            let b = phi_eval(t, x, want_hessian).map_err(|e| e.context(&format!("objective term {i}")))?;
            out.add_scaled(beta, &b);
        }
    }
    for (j, l) in barrier_maps.iter().enumerate() {
        let b = barrier_through_map(l, x, want_hessian)
            .map_err(|e| e.context(&format!("barrier map {j}")))?;
        out.add_scaled(1.0, &b);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmap::{KrausMap, PartialTranspose};
    use crate::oracle::{fd_gradient, fd_hessian_action};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_pd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> SymMatrix {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::new(&g * g.transpose() / n as f64 + DMatrix::identity(n, n) * shift).unwrap()
    }

    fn rand_dir(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let s = SymMatrix::new(g).unwrap();
        s.scale(1.0 / s.norm_fro())
    }

    fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-12)
    }

    #[test]
    fn zero_weight_gives_zero_bundle() {
        let obj = TraceObjective::new(SymMatrix::zeros(3), Generator::Inverse, None).unwrap();
        let b = phi_eval(&obj, &SymMatrix::identity(3), true).unwrap();
        assert_eq!(b.value, 0.0);
        assert_eq!(b.gradient.norm(), 0.0);
        assert_eq!(b.hessian.unwrap().norm(), 0.0);
    }

    #[test]
    fn trace_inverse_at_identity() {
        let obj = TraceObjective::new(SymMatrix::identity(2), Generator::Inverse, None).unwrap();
        let x = SymMatrix::identity(2);
        let b = phi_eval(&obj, &x, true).unwrap();
        assert_relative_eq!(b.value, 2.0);
        assert!((b.gradient.clone() + SymMatrix::identity(2).to_vec()).norm() < 1e-15);
        // d²/dt² Tr((I + tξ)⁻¹) at 0 is 2 Tr(ξ²)
        let xi = SymMatrix::from_rows(&[vec![0.3, -0.4], vec![-0.4, 1.1]]).unwrap();
        assert_relative_eq!(b.hessian_form(&xi).unwrap(), 2.0 * xi.inner(&xi), max_relative = 1e-13);
        let f = |t: f64| obj.value(&x.add_scaled(t, &xi)).unwrap();
        let h = 1e-4;
        let fd = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        assert_relative_eq!(fd, 2.0 * xi.inner(&xi), max_relative = 1e-6);
    }

    #[test]
    fn neg_log_with_weight_at_evaluation_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = rand_pd(&mut rng, 4, 0.5);
        let obj = TraceObjective::new(x.clone(), Generator::NegLog, None).unwrap();
        let b = phi_eval(&obj, &x, false).unwrap();
        // ∇ Tr(C(-ln X)) = -X⁻¹ C-twisted; with C = X the pairing with I is -n
        assert_relative_eq!(b.gradient.dot(&SymMatrix::identity(4).to_vec()), -4.0, max_relative = 1e-12);
        let fd = fd_gradient(&|y: &SymMatrix| obj.value(y), &x, 1e-5).unwrap();
        assert!(rel(&b.gradient, &fd) < 1e-6);
    }

    #[test]
    fn barrier_examples() {
        let b = barrier_eval(&SymMatrix::identity(3), true).unwrap();
        assert_eq!(b.value, 0.0);
        assert!((b.hessian.unwrap() - DMatrix::<f64>::identity(9, 9)).norm() < 1e-15);
        let b = barrier_eval(&SymMatrix::from_diagonal(&[2.0, 1.0]), false).unwrap();
        assert_relative_eq!(b.value, -(2.0f64).ln(), epsilon = 1e-15);
        assert!((b.gradient.clone() - DVector::from_column_slice(&[-0.5, 0.0, 0.0, -1.0])).norm() < 1e-15);
        assert!(barrier_eval(&SymMatrix::from_diagonal(&[1.0, -1.0]), false).is_err());
    }

    #[test]
    fn barrier_hessian_action_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = rand_pd(&mut rng, 4, 0.3);
        let dir = rand_dir(&mut rng, 4);
        let b = barrier_eval(&x, true).unwrap();
        let grad = |y: &SymMatrix| barrier_eval(y, false).map(|b| b.gradient);
        let fd = fd_hessian_action(&grad, &x, &dir, 1e-5).unwrap();
        let an = b.hessian.unwrap() * dir.to_vec();
        assert!(rel(&an, &fd) < 1e-6);
    }

    #[test]
    fn gradients_and_hessians_match_fd_for_all_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for g in [
            Generator::NegLog,
            Generator::Inverse,
            Generator::NegSqrt,
            Generator::NegPower(0.4),
        ] {
            for &n in &[3usize, 5] {
                let x = rand_pd(&mut rng, n, 0.4);
                let c = rand_pd(&mut rng, n, 0.0);
                let obj = TraceObjective::new(c, g, None).unwrap();
                let b = phi_eval(&obj, &x, true).unwrap();
                let fd = fd_gradient(&|y: &SymMatrix| obj.value(y), &x, 1e-5).unwrap();
                assert!(rel(&b.gradient, &fd) < 1e-6, "{g} gradient");
                let dir = rand_dir(&mut rng, n);
                let grad = |y: &SymMatrix| phi_eval(&obj, y, false).map(|b| b.gradient);
                let fdh = fd_hessian_action(&grad, &x, &dir, 1e-5).unwrap();
                let an = b.hessian.as_ref().unwrap() * dir.to_vec();
                assert!(rel(&an, &fdh) < 1e-5, "{g} hessian");
            }
        }
    }

    #[test]
    fn sparse_middle_has_expected_fill() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_pd(&mut rng, 5, 0.2);
        let d = spectral_decompose(&x).unwrap();
        let th = TraceHessian::new(&DMatrix::identity(5, 5), Generator::NegLog, d);
        assert_eq!(th.middle.nnz(), 25 * 9);
        let dense = th.middle.to_dense();
        assert!((&dense - dense.transpose()).norm() < 1e-14);
    }

    #[test]
    fn composite_is_componentwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let x = rand_pd(&mut rng, 3, 0.5);
        let obj = TraceObjective::new(rand_pd(&mut rng, 3, 0.1), Generator::Inverse, None).unwrap();
        let pure = composite_eval(0.0, std::slice::from_ref(&obj), &[], &x, true).unwrap();
        let bar = barrier_eval(&x, true).unwrap();
        assert_relative_eq!(pure.value, bar.value);
        let beta = 2.5;
        let comp = composite_eval(beta, std::slice::from_ref(&obj), &[], &x, true).unwrap();
        let phi = phi_eval(&obj, &x, true).unwrap();
        assert_relative_eq!(comp.value, beta * phi.value + bar.value, max_relative = 1e-14);
        let expect = phi.hessian.unwrap() * beta + bar.hessian.unwrap();
        assert!((comp.hessian.unwrap() - expect).norm() < 1e-10);
    }

    #[test]
    fn ree_composite_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 4;
        let x = rand_pd(&mut rng, n, 1.0);
        let c = rand_pd(&mut rng, n, 0.1);
        let obj = TraceObjective::new(c, Generator::NegLog, None).unwrap();
        let maps = [LinearMap::PartialTranspose(PartialTranspose::new(2, 2).unwrap())];
        let beta = 3.0;
        let b = composite_eval(beta, std::slice::from_ref(&obj), &maps, &x, true).unwrap();
        let f = |y: &SymMatrix| composite_eval(beta, std::slice::from_ref(&obj), &maps, y, false).map(|b| b.value);
        let fd = fd_gradient(&f, &x, 1e-5).unwrap();
        assert!(rel(&b.gradient, &fd) < 1e-6);
        let grad = |y: &SymMatrix| composite_eval(beta, std::slice::from_ref(&obj), &maps, y, false).map(|b| b.gradient);
        let dir = rand_dir(&mut rng, n);
        let fdh = fd_hessian_action(&grad, &x, &dir, 1e-5).unwrap();
        assert!(rel(&(b.hessian.unwrap() * dir.to_vec()), &fdh) < 1e-5);
    }

    #[test]
    fn map_composed_objective_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let (n, k) = (3, 5);
        let factors = (0..2)
            .map(|_| DMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let l = LinearMap::Kraus(KrausMap::new(factors).unwrap());
        let x = rand_pd(&mut rng, n, 0.5);
        let obj = TraceObjective::new(rand_pd(&mut rng, k, 0.1), Generator::NegSqrt, Some(l)).unwrap();
        let b = phi_eval(&obj, &x, true).unwrap();
        let fd = fd_gradient(&|y: &SymMatrix| obj.value(y), &x, 1e-5).unwrap();
        assert!(rel(&b.gradient, &fd) < 1e-6);
        let grad = |y: &SymMatrix| phi_eval(&obj, y, false).map(|b| b.gradient);
        let dir = rand_dir(&mut rng, n);
        let fdh = fd_hessian_action(&grad, &x, &dir, 1e-5).unwrap();
        assert!(rel(&(b.hessian.unwrap() * dir.to_vec()), &fdh) < 1e-5);
    }

    #[test]
    fn hessian_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for g in [Generator::NegLog, Generator::Inverse, Generator::NegSqrt, Generator::NegPower(0.7)] {
            let x = rand_pd(&mut rng, 4, 0.05);
            let obj = TraceObjective::new(rand_pd(&mut rng, 4, 0.0), g, None).unwrap();
            let h = phi_eval(&obj, &x, true).unwrap().hessian.unwrap();
            let scale = h.norm();
            assert!((&h - h.transpose()).norm() <= 1e-9 * scale);
            let sym = SymMatrix::new(h).unwrap();
            assert!(sym.min_eigenvalue().unwrap() >= -1e-7 * scale);
        }
    }

    #[test]
    fn domain_violations_name_the_term() {
        let obj = TraceObjective::new(SymMatrix::identity(2), Generator::NegLog, None).unwrap();
        let x = SymMatrix::from_diagonal(&[1.0, -0.5]);
        assert!(matches!(phi_eval(&obj, &x, false), Err(Error::DomainViolation(_))));
        let maps = [LinearMap::PartialTranspose(PartialTranspose::new(1, 2).unwrap())];
        let x = SymMatrix::from_diagonal(&[1.0, 0.5]);
        // transposing a 1x1-block structure is a full transpose and keeps PD
        assert!(composite_eval(1.0, std::slice::from_ref(&obj), &maps, &x, false).is_ok());
        let bad = SymMatrix::from_diagonal(&[1.0, -0.5]);
        let msg = composite_eval(1.0, &[obj], &[], &bad, false).unwrap_err().to_string();
        assert!(msg.contains("barrier on X"), "{msg}");
        assert!(TraceObjective::new(SymMatrix::from_diagonal(&[1.0, -1.0]), Generator::NegLog, None).is_err());
    }
}
