//! Newton directions under affine trace constraints.
//!
//! Both problem structures reduce to a Schur complement in the multipliers.
//! Inequality rows `⟨A_i, X⟩ ≤ b_i` carry a slack `x_i = b_i - ⟨A_i, X⟩`
//! with barrier `-ln x_i`; equality rows carry none. For the step
//! `(p₁, p₂)` and multipliers `λ`:
//!
//! ```text
//! Σ_j λ_j ⟨A_i, H⁻¹A_j⟩ + λ_i x_i² = ⟨A_i, H⁻¹∇F⟩ - x_i
//! p₁ = H⁻¹(-∇F + Σ_j λ_j A_j),   p₂_i = x_i + λ_i x_i²
//! ```
//!
//! where the `x_i` terms vanish on equality rows. All solves run in `svec`
//! coordinates, where the Hessian restricted to symmetric matrices is
//! positive definite. The decrement is evaluated as the Hessian norm of the
//! step, which equals `-⟨∇F, p⟩` at the KKT solution.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::matfun::{reduce_operator, smat, svec, SymMatrix};
use crate::objectives::DerivativeBundle;

/// Schur systems with a condition estimate above this are rejected.
pub const MAX_SCHUR_CONDITION: f64 = 1e15;

#[derive(Clone, Debug, PartialEq)]
pub struct AffineConstraints {
    mats: Vec<SymMatrix>,
    rhs: DVector<f64>,
    n_ineq: usize,
}

impl AffineConstraints {
    /// The first `n_ineq` rows are inequalities, the rest equalities.
    pub fn new(mats: Vec<SymMatrix>, rhs: Vec<f64>, n_ineq: usize) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::ConstraintError("at least one constraint row is required".into()));
        }
        if mats.len() != rhs.len() {
            return Err(Error::ConstraintError(format!(
                "{} matrices but {} right-hand sides",
                mats.len(),
                rhs.len()
            )));
        }
        if n_ineq > mats.len() {
            return Err(Error::ConstraintError(format!(
                "n_ineq = {n_ineq} exceeds the {} rows",
                mats.len()
            )));
        }
        let n = mats[0].order();
        if let Some(i) = mats.iter().position(|a| a.order() != n) {
            return Err(Error::ConstraintError(format!(
                "row {i} has order {}, expected {n}",
                mats[i].order()
            )));
        }
        if rhs.iter().any(|b| !b.is_finite()) {
            return Err(Error::ConstraintError("non-finite right-hand side".into()));
        }
        let cons = Self {
            mats,
            rhs: DVector::from_vec(rhs),
            n_ineq,
        };
        let cond = cons.equality_gram_condition();
        if !(cond < 1e12) {
            return Err(Error::ConstraintError(format!(
                "equality rows are linearly dependent (Gram condition {cond:.3e})"
            )));
        }
        Ok(cons)
    }

    /// Single equality `Tr X = 1`.
    pub fn trace_normalization(n: usize) -> Self {
        Self {
            mats: vec![SymMatrix::identity(n)],
            rhs: DVector::from_element(1, 1.0),
            n_ineq: 0,
        }
    }

    pub fn order(&self) -> usize {
        self.mats[0].order()
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn n_ineq(&self) -> usize {
        self.n_ineq
    }

    pub fn mats(&self) -> &[SymMatrix] {
        &self.mats
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    /// `⟨A_i, X⟩` for every row.
    pub fn apply(&self, x: &SymMatrix) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.mats.iter().map(|a| a.inner(x)))
    }

    /// `b_i - ⟨A_i, X⟩` on inequality rows.
    pub fn slacks(&self, x: &SymMatrix) -> DVector<f64> {
        let ax = self.apply(x);
        DVector::from_iterator(self.n_ineq, (0..self.n_ineq).map(|i| self.rhs[i] - ax[i]))
    }

    /// Largest `|⟨A_i, X⟩ - b_i|` over equality rows.
    pub fn equality_residual(&self, x: &SymMatrix) -> f64 {
        let ax = self.apply(x);
        (self.n_ineq..self.len())
            .map(|i| (ax[i] - self.rhs[i]).abs())
            .fold(0.0, f64::max)
    }

    /// Largest violation `⟨A_i, X⟩ - b_i` over inequality rows (negative when strict).
    pub fn inequality_violation(&self, x: &SymMatrix) -> f64 {
        let s = self.slacks(x);
        s.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Condition number of the Gram matrix of the equality rows (1 if none).
    pub fn equality_gram_condition(&self) -> f64 {
        let rows: Vec<DVector<f64>> = self.mats[self.n_ineq..].iter().map(svec).collect();
        if rows.is_empty() {
            return 1.0;
        }
        let k = rows.len();
        let gram = DMatrix::from_fn(k, k, |i, j| rows[i].dot(&rows[j]));
        let ev = gram.symmetric_eigenvalues();
        let max = ev.max();
        let min = ev.min();
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonStep {
    pub direction_x: SymMatrix,
    /// One entry per inequality row; empty for equality-only systems.
    pub direction_slack: DVector<f64>,
    pub multipliers: DVector<f64>,
    pub decrement: f64,
    /// `λ_max / λ_min` of the Schur matrix.
    pub condition: f64,
    /// Whether the Hessian needed the diagonal shift to factor.
    pub regularized: bool,
}

impl NewtonStep {
    /// Largest `|⟨A_i, p₁⟩ + p₂_i|` over all rows.
    pub fn tangency_residual(&self, cons: &AffineConstraints) -> f64 {
        let ap = cons.apply(&self.direction_x);
        (0..cons.len())
            .map(|i| {
                let s = if i < cons.n_ineq() {
                    self.direction_slack[i]
                } else {
                    0.0
                };
                (ap[i] + s).abs()
            })
            .fold(0.0, f64::max)
    }
}

struct Factored {
    chol: Cholesky<f64, Dyn>,
    regularized: bool,
}

/// Cholesky of the `svec` Hessian, retried once with the diagonal shifted by
/// `1e-12` times its mean.
fn factor_hessian(reduced: DMatrix<f64>) -> Result<Factored> {
    if let Some(chol) = reduced.clone().cholesky() {
        return Ok(Factored {
            chol,
            regularized: false,
        });
    }
    let shift = 1e-12 * reduced.trace() / reduced.nrows() as f64;
    let mut shifted = reduced;
    for i in 0..shifted.nrows() {
        shifted[(i, i)] += shift.max(f64::MIN_POSITIVE);
    }
    match shifted.cholesky() {
        Some(chol) => Ok(Factored {
            chol,
            regularized: true,
        }),
        None => Err(Error::SingularKkt {
            condition: f64::INFINITY,
            context: "Hessian not positive definite on symmetric matrices after regularization"
                .into(),
        }),
    }
}

/// `ξ ↦ S ξ S` in `svec` coordinates (a symmetric matrix).
fn svec_congruence(s: &SymMatrix) -> Result<DMatrix<f64>> {
    let n = s.order();
    let d = n * (n + 1) / 2;
    let mut m = DMatrix::zeros(d, d);
    let mut e = DVector::zeros(d);
    for k in 0..d {
        e[k] = 1.0;
        let col = svec(&smat(n, &e)?.congruence(s.matrix())?);
        m.set_column(k, &col);
        e[k] = 0.0;
    }
    Ok((&m + m.transpose()) * 0.5)
}

fn validate(bundle: &DerivativeBundle, cons: &AffineConstraints) -> Result<()> {
    if bundle.order() != cons.order() {
        return Err(Error::shape(format!(
            "bundle order {} vs constraint order {}",
            bundle.order(),
            cons.order()
        )));
    }
    Ok(())
}

/// Shared Schur solve on inequality slacks `slack[i] = x_i`.
///
/// With `scale = S` the system is solved for `p̃ = S⁻¹ p S⁻¹`, i.e. with
/// every operator conjugated by `ξ ↦ S ξ S`. For `S = X^{1/2}` the log-det
/// block becomes the identity, which removes its `1/λ_min²` growth from the
/// conditioning; step and decrement are unchanged in exact arithmetic.
fn schur_step(
    bundle: &DerivativeBundle,
    cons: &AffineConstraints,
    slack: &DVector<f64>,
    scale: Option<&SymMatrix>,
) -> Result<NewtonStep> {
    let n = cons.order();
    let nrows = cons.len();
    let m = cons.n_ineq();
    let h = bundle
        .hessian
        .as_ref()
        .ok_or_else(|| Error::NumericalFailure("Newton step requires a Hessian".into()))?;
    let plain = reduce_operator(h, n);
    let rows: Vec<DVector<f64>> = cons.mats().iter().map(svec).collect();
    let mut reduced = plain.clone();
    let mut g = svec(&bundle.gradient_matrix());
    let mut a_cols = rows.clone();
    let conj = scale.map(svec_congruence).transpose()?;
    if let Some(c) = &conj {
        reduced = c * reduced * c;
        reduced = (&reduced + reduced.transpose()) * 0.5;
        g = c * g;
        for a in a_cols.iter_mut() {
            *a = c * &*a;
        }
    }
    let fac = factor_hessian(reduced)?;
    let d = g.len();

    // one factorization, N + 1 right-hand sides
    let mut rhs = DMatrix::zeros(d, nrows + 1);
    for (j, a) in a_cols.iter().enumerate() {
        rhs.set_column(j, a);
    }
    rhs.set_column(nrows, &g);
    let z = fac.chol.solve(&rhs);

    let mut schur = DMatrix::zeros(nrows, nrows);
    let mut b = DVector::zeros(nrows);
    for i in 0..nrows {
        for j in 0..nrows {
            schur[(i, j)] = a_cols[i].dot(&z.column(j));
        }
        b[i] = a_cols[i].dot(&z.column(nrows));
        if i < m {
            schur[(i, i)] += slack[i] * slack[i];
            b[i] -= slack[i];
        }
    }
    let schur = (&schur + schur.transpose()) * 0.5;
    let ev = schur.symmetric_eigenvalues();
    let (emax, emin) = (ev.max(), ev.min());
    let condition = if emin > 0.0 { emax / emin } else { f64::INFINITY };
    let chol = match schur.clone().cholesky() {
        Some(c) if condition <= MAX_SCHUR_CONDITION => c,
        _ => {
            return Err(Error::SingularKkt {
                condition,
                context: format!("Schur complement of {nrows} constraint rows"),
            })
        }
    };
    let mut lambda = chol.solve(&b);
    let resid = &b - &schur * &lambda;
    lambda += chol.solve(&resid);

    // reduced gradient w = ∇F - Σ λ_j A_j; solving from w keeps p accurate when ∇F ∈ span{A_j}
    let mut w = g.clone();
    for j in 0..nrows {
        w.axpy(-lambda[j], &a_cols[j], 1.0);
    }
    let p = -fac.chol.solve(&w);
    let mut p = match &conj {
        Some(c) => c * p,
        None => p,
    };

    // restore exact tangency: the multipliers grow like β, so a tangency
    // error of rounding size in p would otherwise dominate ⟨∇F, p⟩
    let eq = &rows[m..];
    if !eq.is_empty() {
        let gram = DMatrix::from_fn(eq.len(), eq.len(), |i, j| eq[i].dot(&eq[j]));
        let r = DVector::from_iterator(eq.len(), eq.iter().map(|a| a.dot(&p)));
        let c = gram
            .cholesky()
            .ok_or_else(|| Error::ConstraintError("dependent equality rows".into()))?
            .solve(&r);
        for (a, cj) in eq.iter().zip(c.iter()) {
            p.axpy(-cj, a, 1.0);
        }
    }
    // equals x_i + λ_i x_i² at the exact solution
    let direction_slack = DVector::from_iterator(m, (0..m).map(|i| -rows[i].dot(&p)));

    // -⟨∇F, p⟩ equals this nonnegative form at the KKT solution, without the cancellation
    let mut dec2 = p.dot(&(&plain * &p));
    for i in 0..m {
        dec2 += (direction_slack[i] / slack[i]).powi(2);
    }
    if !dec2.is_finite() {
        return Err(Error::NumericalFailure(format!("non-finite Newton decrement {dec2}")));
    }
    let dec2 = dec2.max(0.0);
    Ok(NewtonStep {
        direction_x: smat(n, &p)?,
        direction_slack,
        multipliers: lambda,
        decrement: dec2.sqrt(),
        condition,
        regularized: fac.regularized,
    })
}

/// Newton step for mixed inequality/equality rows with slack barriers.
///
/// `bundle` covers the `X` block of `F_β` only; the slack barrier `-Σ ln x_i`
/// is not scaled by `β`, so `beta` serves as a sanity check on the caller.
pub fn newton_step_type1(
    bundle: &DerivativeBundle,
    slacks: &DVector<f64>,
    beta: f64,
    cons: &AffineConstraints,
) -> Result<NewtonStep> {
    newton_step_type1_scaled(bundle, slacks, beta, cons, None)
}

/// As [`newton_step_type1`], solved in coordinates conjugated by `scale`.
pub fn newton_step_type1_scaled(
    bundle: &DerivativeBundle,
    slacks: &DVector<f64>,
    beta: f64,
    cons: &AffineConstraints,
    scale: Option<&SymMatrix>,
) -> Result<NewtonStep> {
    validate(bundle, cons)?;
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::domain(format!("β must be finite and nonnegative, got {beta}")));
    }
    if slacks.len() != cons.n_ineq() {
        return Err(Error::shape(format!(
            "{} slacks for {} inequality rows",
            slacks.len(),
            cons.n_ineq()
        )));
    }
    if let Some(i) = slacks.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::domain(format!("slack {i} is not positive: {}", slacks[i])));
    }
    schur_step(bundle, cons, slacks, checked_scale(scale, cons)?)
}

/// Newton step for equality rows only; map barriers live inside `bundle`.
pub fn newton_step_type2(bundle: &DerivativeBundle, cons: &AffineConstraints) -> Result<NewtonStep> {
    newton_step_type2_scaled(bundle, cons, None)
}

/// As [`newton_step_type2`], solved in coordinates conjugated by `scale`.
pub fn newton_step_type2_scaled(
    bundle: &DerivativeBundle,
    cons: &AffineConstraints,
    scale: Option<&SymMatrix>,
) -> Result<NewtonStep> {
    validate(bundle, cons)?;
    if cons.n_ineq() != 0 {
        return Err(Error::ConstraintError(format!(
            "equality-only step given {} inequality rows",
            cons.n_ineq()
        )));
    }
    schur_step(bundle, cons, &DVector::zeros(0), checked_scale(scale, cons)?)
}

fn checked_scale<'s>(scale: Option<&'s SymMatrix>, cons: &AffineConstraints) -> Result<Option<&'s SymMatrix>> {
    match scale {
        Some(s) if s.order() != cons.order() => Err(Error::shape(format!(
            "scaling of order {} for constraints of order {}",
            s.order(),
            cons.order()
        ))),
        Some(s) if !s.is_positive_definite() => Err(Error::domain("scaling matrix is not positive definite")),
        other => Ok(other),
    }
}

/// `⟨p, H p⟩ + Σ p₂_i² / x_i²`, the squared decrement as a quadratic form.
pub fn decrement_quadratic_form(bundle: &DerivativeBundle, slacks: &DVector<f64>, step: &NewtonStep) -> f64 {
    let mut q = bundle.hessian_form(&step.direction_x).unwrap_or(f64::NAN);
    for i in 0..step.direction_slack.len() {
        q += (step.direction_slack[i] / slacks[i]).powi(2);
    }
    q
}
