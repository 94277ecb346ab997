//! Independent checks for the analytic machinery: finite differences,
//! dense entrywise Hessians, a slow reference minimizer and the audit
//! behind `qipsolve check`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matfun::{
    divided_diff_1, divided_diff_2, kron, project_symmetric, smat, spectral_decompose, svec,
    sym_pairs, Generator, SpectralDecomp, SymMatrix,
};
use crate::objectives::{phi_eval, TraceObjective};
use crate::pathfollow::max_step_to_boundary;
use crate::linmap::LinearMap;
use crate::probio::{Objective, ProblemSpec};
use crate::qre::QreObjective;

/// Largest order accepted by the dense references.
pub const DENSE_MAX_ORDER: usize = 8;
/// Largest order accepted by [`reference_minimize`].
pub const REFERENCE_MAX_ORDER: usize = 3;

/// Default gradient probe `1e-5 (1 + ‖X‖_F)`.
pub fn default_step(x: &SymMatrix) -> f64 {
    1e-5 * (1.0 + x.norm_fro())
}

/// `‖a - b‖ / max(‖b‖, floor)`.
pub fn relative_error(a: &DVector<f64>, b: &DVector<f64>, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}

fn probe<T>(what: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::DomainViolation(m) => Error::DomainViolation(format!("{what} left the domain: {m}")),
        other => other,
    })
}

/// Central differences over the `n(n+1)/2` symmetric coordinates, returned
/// as the `vec` of a symmetric gradient.
pub fn fd_gradient<F>(f: &F, x: &SymMatrix, h: f64) -> Result<DVector<f64>>
where
    F: Fn(&SymMatrix) -> Result<f64>,
{
    let n = x.order();
    let mut grad = DMatrix::zeros(n, n);
    for (r, s) in sym_pairs(n) {
        let mut e = DMatrix::zeros(n, n);
        e[(r, s)] = 1.0;
        e[(s, r)] = 1.0;
        let e = SymMatrix::new(e)?;
        let fp = probe("gradient probe", f(&x.add_scaled(h, &e)))?;
        let fm = probe("gradient probe", f(&x.add_scaled(-h, &e)))?;
        let d = (fp - fm) / (2.0 * h);
        if r == s {
            grad[(r, r)] = d;
        } else {
            // the probe moves two entries, so it sees twice the gradient entry
            grad[(r, s)] = 0.5 * d;
            grad[(s, r)] = 0.5 * d;
        }
    }
    Ok(DVector::from_column_slice(grad.as_slice()))
}

/// `(∇f(X + hξ) - ∇f(X - hξ)) / 2h`.
pub fn fd_hessian_action<G>(grad: &G, x: &SymMatrix, dir: &SymMatrix, h: f64) -> Result<DVector<f64>>
where
    G: Fn(&SymMatrix) -> Result<DVector<f64>>,
{
    let gp = probe("Hessian probe", grad(&x.add_scaled(h, dir)))?;
    let gm = probe("Hessian probe", grad(&x.add_scaled(-h, dir)))?;
    Ok((gp - gm) / (2.0 * h))
}

/// One draw of the compatibility inequality `|D³φ| ≤ 3 D²φ √(D²B)`.
#[derive(Clone, Copy, Debug)]
pub struct CompatibilitySample {
    pub d3: f64,
    pub d2: f64,
    pub d2_barrier: f64,
}

impl CompatibilitySample {
    pub fn bound(&self) -> f64 {
        3.0 * self.d2 * self.d2_barrier.sqrt()
    }

    /// Holds with slack `1e-4 · max(1, bound)`.
    pub fn holds(&self) -> bool {
        self.d3.abs() <= self.bound() + 1e-4 * self.bound().max(1.0)
    }
}

/// Estimates `D³φ(X)[ξ,ξ,ξ]` by central differences of the analytic
/// second derivative, probe `1e-4 · min(1, λ_min(X)/‖ξ‖₂)`.
pub fn compatibility_sample(obj: &TraceObjective, x: &SymMatrix, xi: &SymMatrix) -> Result<CompatibilitySample> {
    let d = spectral_decompose(x)?;
    let xi_norm = spectral_decompose(xi)?.lambda.amax().max(f64::MIN_POSITIVE);
    let h = 1e-4 * (d.min() / xi_norm).min(1.0);
    let form = |y: &SymMatrix| -> Result<f64> {
        let b = phi_eval(obj, y, true)?;
        Ok(b.hessian_form(xi).unwrap_or(f64::NAN))
    };
    let d2 = form(x)?;
    let d3 = (probe("third-derivative probe", form(&x.add_scaled(h, xi)))?
        - probe("third-derivative probe", form(&x.add_scaled(-h, xi)))?)
        / (2.0 * h);
    let inv: Vec<f64> = d.lambda.iter().map(|l| 1.0 / l).collect();
    let xinv = d.from_eigenbasis_diag(&inv);
    let t = xinv.matrix() * xi.matrix();
    let d2_barrier = (&t * &t).trace();
    Ok(CompatibilitySample { d3, d2, d2_barrier })
}

fn size_guard(n: usize, what: &str) -> Result<()> {
    if n > DENSE_MAX_ORDER {
        Err(Error::SizeGuard(format!(
            "dense {what} reference limited to order {DENSE_MAX_ORDER}, got {n}"
        )))
    } else {
        Ok(())
    }
}

/// The middle factor built entrywise from divided differences, no sparsity used.
pub fn dense_middle_factor(c_tilde: &DMatrix<f64>, g: Generator, lambda: &[f64]) -> Result<DMatrix<f64>> {
    let n = lambda.len();
    let idx = |i: usize, j: usize| i + n * j;
    let mut s = DMatrix::zeros(n * n, n * n);
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for t in 0..n {
                    let mut v = 0.0;
                    if q == r {
                        v += c_tilde[(t, p)] * divided_diff_2(g, lambda[p], lambda[q], lambda[t])?;
                    }
                    if t == p {
                        v += c_tilde[(q, r)] * divided_diff_2(g, lambda[r], lambda[p], lambda[q])?;
                    }
                    s[(idx(p, q), idx(r, t))] = v;
                }
            }
        }
    }
    Ok(s)
}

fn positive(d: SpectralDecomp, what: &str) -> Result<SpectralDecomp> {
    if d.min() <= 0.0 {
        Err(Error::domain(format!("{what} not positive definite")))
    } else {
        Ok(d)
    }
}

/// Dense `(U⊗U) S (U⊗U)ᵀ`, projected onto symmetric matrices and pulled
/// back through the objective's map if it has one.
pub fn dense_hessian_reference(obj: &TraceObjective, x: &SymMatrix) -> Result<DMatrix<f64>> {
    let n = x.order();
    size_guard(n, "Hessian")?;
    size_guard(obj.weight().order(), "Hessian")?;
    let y = match obj.map() {
        Some(l) => l.apply(x)?,
        None => x.clone(),
    };
    let k = y.order();
    let d = positive(spectral_decompose(&y)?, "argument")?;
    let c_tilde = d.to_eigenbasis(obj.weight().matrix());
    let s = dense_middle_factor(&c_tilde, obj.generator(), d.lambda.as_slice())?;
    let uu = kron(&d.u, &d.u);
    let h = project_symmetric(&(&uu * s * uu.transpose()), k);
    Ok(match obj.map() {
        Some(l) => {
            let lm = l.vectorized_matrix();
            project_symmetric(&(lm.transpose() * h * lm), n)
        }
        None => h,
    })
}

/// Dense Kronecker-form Hessian of the relative entropy.
pub fn dense_qre_hessian_reference(obj: &QreObjective, x: &SymMatrix) -> Result<DMatrix<f64>> {
    let n = x.order();
    size_guard(n, "relative entropy Hessian")?;
    size_guard(obj.output_order(), "relative entropy Hessian")?;
    let (y1, y2) = obj.images(x)?;
    let d1 = positive(spectral_decompose(&y1)?, "Y1")?;
    let d2 = positive(spectral_decompose(&y2)?, "Y2")?;
    let dlog = |d: &SpectralDecomp| -> Result<DMatrix<f64>> {
        let h = -divided_diff_1(Generator::NegLog, d.lambda.as_slice())?;
        let oo = kron(&d.u, &d.u);
        Ok(&oo * DMatrix::from_diagonal(&DVector::from_column_slice(h.as_slice())) * oo.transpose())
    };
    let a1 = dlog(&d1)?;
    let a2 = dlog(&d2)?;
    let c_tilde = d2.to_eigenbasis(y1.matrix());
    let s = dense_middle_factor(&c_tilde, Generator::NegLog, d2.lambda.as_slice())?;
    let oo2 = kron(&d2.u, &d2.u);
    let curv = &oo2 * s * oo2.transpose();
    let l1 = obj.l1().vectorized_matrix();
    let l2 = obj.l2().vectorized_matrix();
    let h = l1.transpose() * &a1 * &l1 - l1.transpose() * &a2 * &l2 - l2.transpose() * &a2 * &l1
        + l2.transpose() * curv * &l2;
    Ok(project_symmetric(&h, n))
}

/// Dense reference for the whole objective of a problem, where available.
pub fn dense_objective_hessian(spec: &ProblemSpec, x: &SymMatrix) -> Result<DMatrix<f64>> {
    match &spec.objective {
        Objective::TypeI { term, .. } => dense_hessian_reference(term, x),
        Objective::TypeII { terms, .. } => {
            let n = x.order();
            let mut h = DMatrix::zeros(n * n, n * n);
            for t in terms {
                h += dense_hessian_reference(t, x)?;
            }
            Ok(h)
        }
        Objective::Qkd { qre, .. } => dense_qre_hessian_reference(qre, x),
    }
}

/// Orthonormal projector onto the `svec` tangent space of the equality rows.
fn tangent_projector(spec: &ProblemSpec) -> Result<DMatrix<f64>> {
    let cons = &spec.constraints;
    let rows: Vec<DVector<f64>> = cons.mats()[cons.n_ineq()..].iter().map(svec).collect();
    let d = crate::matfun::sym_dim(spec.order());
    let mut p = DMatrix::identity(d, d);
    if rows.is_empty() {
        return Ok(p);
    }
    let a = DMatrix::from_columns(&rows);
    let gram = a.transpose() * &a;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::ConstraintError("dependent equality rows".into()))?;
    p -= &a * chol.solve(&a.transpose());
    Ok(p)
}

/// Largest step along `p` that keeps `x` (and every barrier map image, and
/// every inequality slack) strictly feasible.
fn problem_max_step(spec: &ProblemSpec, x: &SymMatrix, p: &SymMatrix) -> Result<f64> {
    let mut amax = max_step_to_boundary(x, p)?;
    for map in spec.barrier_maps() {
        amax = amax.min(max_step_to_boundary(&map.apply(x)?, &map.apply(p)?)?);
    }
    let cons = &spec.constraints;
    let s = cons.slacks(x);
    let ap = cons.apply(p);
    for i in 0..cons.n_ineq() {
        if ap[i] > 0.0 {
            amax = amax.min(s[i] / ap[i]);
        }
    }
    Ok(amax)
}

/// Euclidean projection onto the closed feasible set: the affine rows, the
/// PSD cone and, for partial-transpose barrier maps, `{X : X^Γ ⪰ 0}`.
/// Dykstra's alternating projections, finished on the affine set.
struct FeasibleProjection<'a> {
    spec: &'a ProblemSpec,
    rows: Vec<DVector<f64>>,
    gram: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl<'a> FeasibleProjection<'a> {
    fn new(spec: &'a ProblemSpec) -> Result<Self> {
        let rows: Vec<DVector<f64>> = spec.constraints.mats().iter().map(svec).collect();
        let gram = DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i].dot(&rows[j]));
        let gram = Some(
            gram.cholesky()
                .ok_or_else(|| Error::ConstraintError("dependent equality rows".into()))?,
        );
        Ok(Self { spec, rows, gram })
    }

    fn affine(&self, y: &SymMatrix) -> Result<SymMatrix> {
        let Some(gram) = &self.gram else { return Ok(y.clone()) };
        let v = svec(y);
        let r = DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().zip(self.spec.constraints.rhs().iter()).map(|(a, b)| a.dot(&v) - b),
        );
        let c = gram.solve(&r);
        let mut out = v;
        for (a, cj) in self.rows.iter().zip(c.iter()) {
            out.axpy(-cj, a, 1.0);
        }
        smat(y.order(), &out)
    }

    fn psd(y: &SymMatrix) -> Result<SymMatrix> {
        let d = spectral_decompose(y)?;
        let clipped: Vec<f64> = d.lambda.iter().map(|l| l.max(0.0)).collect();
        Ok(d.from_eigenbasis_diag(&clipped))
    }

    fn project(&self, y: &SymMatrix) -> Result<SymMatrix> {
        let transposes: Vec<&crate::linmap::PartialTranspose> = self
            .spec
            .barrier_maps()
            .iter()
            .filter_map(|m| match m {
                LinearMap::PartialTranspose(pt) => Some(pt),
                _ => None,
            })
            .collect();
        let sets = 2 + transposes.len();
        let n = y.order();
        let mut x = y.clone();
        let mut corr = vec![SymMatrix::zeros(n); sets];
        for _ in 0..20_000 {
            let before = x.clone();
            for (i, c) in corr.iter_mut().enumerate() {
                let z = &x + c;
                let p = match i {
                    0 => self.affine(&z)?,
                    1 => Self::psd(&z)?,
                    // Γ is an involutive isometry, so the projection is Γ∘P₊∘Γ
                    _ => {
                        let pt = transposes[i - 2];
                        pt.apply(&Self::psd(&pt.apply(&z)?)?)?
                    }
                };
                *c = &z - &p;
                x = p;
            }
            if (&x - &before).norm_fro() <= 1e-15 * (1.0 + x.norm_fro()) {
                break;
            }
        }
        self.affine(&x)
    }
}

/// Projected gradient on the closed feasible set with Barzilai-Borwein
/// steps, a nonmonotone Armijo test (memory 10) and a backoff when a trial
/// point leaves the objective's domain. Stops when the gradient mapping
/// `‖X - P(X - ∇f)‖` drops below `1e-9 (1 + |f|)`, which also certifies
/// optima on the boundary. Tiny equality-constrained problems only.
pub fn reference_minimize(spec: &ProblemSpec) -> Result<(f64, SymMatrix)> {
    const MAX_ITERS: usize = 50_000;
    const MEMORY: usize = 10;
    let n = spec.order();
    if n > REFERENCE_MAX_ORDER {
        return Err(Error::SizeGuard(format!(
            "reference minimizer limited to order {REFERENCE_MAX_ORDER}, got {n}"
        )));
    }
    if spec.constraints.n_ineq() != 0 {
        return Err(Error::Validation("reference minimizer takes equality rows only".into()));
    }
    let proj = FeasibleProjection::new(spec)?;
    let eval = |y: &SymMatrix| -> Result<(f64, SymMatrix)> {
        let b = spec.objective_bundle(y, false)?;
        if !b.value.is_finite() {
            return Err(Error::domain("non-finite objective"));
        }
        Ok((b.value, b.gradient_matrix()))
    };
    let mut x = spec.start_point()?.clone();
    let (mut f, mut g) = eval(&x)?;
    let mut recent = std::collections::VecDeque::from([f]);
    let mut step = 1.0 / g.norm_fro().max(1e-12);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        residual = (&x - &proj.project(&x.add_scaled(-1.0, &g))?).norm_fro();
        if residual <= 1e-9 * (1.0 + f.abs()) {
            return Ok((f, x));
        }
        let reference = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut t = step;
        let mut accepted = None;
        for _ in 0..80 {
            let trial = proj.project(&x.add_scaled(-t, &g))?;
            if let Ok((ft, gt)) = eval(&trial) {
                let slope = g.inner(&(&trial - &x));
                // rounding allowance once decreases fall below resolution
                if ft <= reference + 1e-4 * slope + 4.0 * f64::EPSILON * f.abs().max(1.0) {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            return Err(Error::OracleInconclusive(format!(
                "no acceptable step, gradient mapping norm {residual:.3e}"
            )));
        };
        let s = &xn - &x;
        let yv = &gn - &g;
        let sy = s.inner(&yv);
        step = if sy > 0.0 { (s.inner(&s) / sy).clamp(1e-12, 1e12) } else { 2.0 * t };
        x = xn;
        f = fnew;
        g = gn;
        recent.push_back(f);
        if recent.len() > MEMORY {
            recent.pop_front();
        }
    }
    Err(Error::OracleInconclusive(format!(
        "iteration cap reached, gradient mapping norm {residual:.3e}"
    )))
}

/// Random strictly feasible points near the declared start, moving only
/// within the equality tangent space.
pub fn random_feasible_points(spec: &ProblemSpec, count: usize, seed: u64) -> Result<Vec<SymMatrix>> {
    let x0 = spec.start_point()?;
    let n = spec.order();
    let proj = tangent_projector(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let raw = DVector::from_fn(proj.nrows(), |_, _| rng.random_range(-1.0..1.0));
        let dir = smat(n, &(&proj * raw))?;
        let amax = problem_max_step(spec, x0, &dir)?;
        let t = rng.random_range(0.1..0.5) * amax.min(1.0 / dir.norm_fro().max(1e-12));
        out.push(x0.add_scaled(t, &dir));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct AuditCheck {
    pub name: &'static str,
    pub point: usize,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
    /// Smallest Hessian eigenvalue seen over all points.
    pub min_hessian_eigenvalue: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub const GRADIENT_TOL: f64 = 1e-6;
pub const HESSIAN_ACTION_TOL: f64 = 1e-5;
pub const SYMMETRY_TOL: f64 = 1e-9;
pub const TWO_PATH_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-6;
/// Normalization floor for gradients and Hessians, so that an objective
/// that vanishes identically is judged on absolute rounding error.
pub const SCALE_FLOOR: f64 = 1e-4;

/// Derivative and invariant audit of a problem's objective at `points`
/// random feasible points. `corrupt` perturbs the analytic Hessian, as a
/// negative control.
pub fn audit(spec: &ProblemSpec, points: usize, seed: u64, corrupt: bool) -> Result<AuditReport> {
    let xs = random_feasible_points(spec, points, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut report = AuditReport {
        checks: Vec::new(),
        min_hessian_eigenvalue: f64::INFINITY,
    };
    let n = spec.order();
    for (i, x) in xs.iter().enumerate() {
        let mut bundle = spec.objective_bundle(x, true)?;
        let mut h = bundle.hessian.take().expect("hessian requested");
        if corrupt {
            let e = DMatrix::from_fn(n * n, n * n, |_, _| rng.random_range(-1.0..1.0));
            h += project_symmetric(&(&e + e.transpose()), n) * (1e-3 * h.norm().max(1.0));
        }
        let step = default_step(x);
        let fd = fd_gradient(&|y: &SymMatrix| spec.objective_value(y), x, step)?;
        let gerr = relative_error(&bundle.gradient, &fd, SCALE_FLOOR);
        let dir = {
            let r = SymMatrix::new(DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)))?;
            r.scale(1.0 / r.norm_fro())
        };
        let grad = |y: &SymMatrix| spec.objective_bundle(y, false).map(|b| b.gradient);
        let fdh = fd_hessian_action(&grad, x, &dir, step)?;
        let herr = relative_error(&(&h * dir.to_vec()), &fdh, 1e-5);
        let hnorm = h.norm().max(SCALE_FLOOR);
        let asym = (&h - h.transpose()).norm() / hnorm;
        let hs = SymMatrix::new(h.clone())?;
        let spectrum = spectral_decompose(&hs)?;
        let lmin = spectrum.min();
        let spec_norm = spectrum.lambda.amax().max(SCALE_FLOOR);
        report.min_hessian_eigenvalue = report.min_hessian_eigenvalue.min(lmin);
        let mut push = |name, value: f64, tolerance: f64| {
            report.checks.push(AuditCheck {
                name,
                point: i,
                value,
                tolerance,
                passed: value <= tolerance,
            })
        };
        push("gradient-fd", gerr, GRADIENT_TOL);
        push("hessian-action-fd", herr, HESSIAN_ACTION_TOL);
        push("hessian-symmetry", asym, SYMMETRY_TOL);
        // reported as -λ_min/‖H‖₂ so that smaller is better
        push("hessian-psd", -lmin / spec_norm, PSD_TOL);
        match dense_objective_hessian(spec, x) {
            Ok(dense) => {
                let err = (&h - &dense).norm() / dense.norm().max(SCALE_FLOOR);
                push("hessian-two-path", err, TWO_PATH_TOL);
            }
            Err(Error::SizeGuard(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::barrier_eval;
    use crate::probio::build_named;
    use approx::assert_relative_eq;

    #[test]
    fn fd_of_trace_is_identity() {
        let x = SymMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let g = fd_gradient(&|y: &SymMatrix| Ok(y.trace()), &x, 1e-5).unwrap();
        assert!((g - SymMatrix::identity(3).to_vec()).norm() < 1e-10);
    }

    #[test]
    fn fd_of_log_det_matches_inverse() {
        let x = SymMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let fd = fd_gradient(&|y: &SymMatrix| barrier_eval(y, false).map(|b| b.value), &x, 1e-5).unwrap();
        let an = barrier_eval(&x, false).unwrap().gradient;
        assert!(relative_error(&an, &fd, 0.0) <= 1e-6);
    }

    #[test]
    fn fd_reports_domain_exit() {
        let x = SymMatrix::from_diagonal(&[1e-7, 1.0]);
        let r = fd_gradient(&|y: &SymMatrix| barrier_eval(y, false).map(|b| b.value), &x, 1e-5);
        assert!(matches!(r, Err(Error::DomainViolation(_))));
    }

    #[test]
    fn dense_reference_zero_weight_and_size_guard() {
        let obj = TraceObjective::new(SymMatrix::zeros(3), Generator::NegLog, None).unwrap();
        let h = dense_hessian_reference(&obj, &SymMatrix::identity(3)).unwrap();
        assert_eq!(h.norm(), 0.0);
        let obj = TraceObjective::new(SymMatrix::identity(9), Generator::NegLog, None).unwrap();
        assert!(matches!(
            dense_hessian_reference(&obj, &SymMatrix::identity(9)),
            Err(Error::SizeGuard(_))
        ));
    }

    #[test]
    fn diagonal_case_selects_delta_entries() {
        // with X = diag(λ), C = diag(c): S[(p,q),(r,s)] only for q = r or s = p
        let lambda = [0.5, 1.0, 2.0];
        let c = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 2.0, 3.0]));
        let g = Generator::Inverse;
        let s = dense_middle_factor(&c, g, &lambda).unwrap();
        let n = 3;
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for t in 0..n {
                        let mut want = 0.0;
                        if q == r && t == p {
                            want += c[(p, p)] * divided_diff_2(g, lambda[p], lambda[q], lambda[p]).unwrap();
                            want += c[(q, q)] * divided_diff_2(g, lambda[q], lambda[p], lambda[q]).unwrap();
                        }
                        assert_relative_eq!(s[(p + n * q, r + n * t)], want, epsilon = 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn dense_and_production_hessians_agree() {
        let x = SymMatrix::from_rows(&[vec![0.5, 0.1, 0.0], vec![0.1, 0.3, 0.05], vec![0.0, 0.05, 0.2]]).unwrap();
        let c = SymMatrix::from_rows(&[vec![1.0, 0.2, 0.1], vec![0.2, 0.8, 0.0], vec![0.1, 0.0, 0.6]]).unwrap();
        for g in [Generator::NegLog, Generator::Inverse, Generator::NegSqrt, Generator::NegPower(0.3)] {
            let obj = TraceObjective::new(c.clone(), g, None).unwrap();
            let prod = phi_eval(&obj, &x, true).unwrap().hessian.unwrap();
            let dense = dense_hessian_reference(&obj, &x).unwrap();
            assert!((&prod - &dense).norm() <= 1e-10 * dense.norm(), "{g}");
        }
    }

    #[test]
    fn reference_minimizer_finds_trace_inverse_optimum() {
        let p = build_named("trace-inverse-n2").unwrap();
        let (f, x) = reference_minimize(&p).unwrap();
        assert_relative_eq!(f, 4.0, max_relative = 1e-5);
        assert!((x.matrix() - DMatrix::identity(2, 2) * 0.5).norm() < 1e-4);
    }

    #[test]
    fn reference_minimizer_finds_ree_optimum() {
        let p = build_named("ree-1x2").unwrap();
        let (f, _) = reference_minimize(&p).unwrap();
        assert!(f.abs() < 1e-4, "{f}");
    }

    #[test]
    fn audit_passes_on_canonical_and_fails_when_corrupted() {
        let p = build_named("fidelity-n3").unwrap();
        let r = audit(&p, 3, 1, false).unwrap();
        assert!(r.passed(), "{:?}", r.checks);
        let bad = audit(&p, 3, 1, true).unwrap();
        assert!(!bad.passed());
        assert!(bad.checks.iter().any(|c| c.name == "hessian-action-fd" && !c.passed));
    }

    #[test]
    fn compatibility_holds_with_equality_in_the_scalar_case() {
        let obj = TraceObjective::new(SymMatrix::identity(1), Generator::Inverse, None).unwrap();
        let s = compatibility_sample(&obj, &SymMatrix::identity(1).scale(0.7), &SymMatrix::identity(1)).unwrap();
        assert_relative_eq!(s.d3.abs(), s.bound(), max_relative = 1e-6);
        assert!(s.holds());
    }
}
