//! Quantum relative entropy of two linear images of `X`,
//!
//! `f(X) = Tr(Y1 ln Y1) - Tr(Y1 ln Y2)`,  `Y1 = L1(X) + εI`, `Y2 = L2(X) + εI`.
//!
//! The second term is a trace objective with weight `Y1` and generator `-ln`
//! evaluated at `Y2`, so its curvature in `Y2` reuses the sparse middle factor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linmap::KrausMap;
use crate::matfun::{
    assemble_operator, divided_diff_1, spectral_decompose, vec, Generator, SpectralDecomp,
    SymMatrix,
};
use crate::objectives::{barrier_eval, DerivativeBundle, TraceHessian};

#[derive(Clone, Debug, PartialEq)]
pub struct QreObjective {
    l1: KrausMap,
    l2: KrausMap,
    perturbation: f64,
}

impl QreObjective {
    pub fn new(l1: KrausMap, l2: KrausMap, perturbation: f64) -> Result<Self> {
        if l1.input_order() != l2.input_order() || l1.output_order() != l2.output_order() {
            return Err(Error::shape(format!(
                "L1 is {}→{}, L2 is {}→{}",
                l1.input_order(),
                l1.output_order(),
                l2.input_order(),
                l2.output_order()
            )));
        }
        if !(perturbation.is_finite() && perturbation >= 0.0) {
            return Err(Error::Validation(format!(
                "perturbation must be finite and nonnegative, got {perturbation}"
            )));
        }
        Ok(Self {
            l1,
            l2,
            perturbation,
        })
    }

    pub fn l1(&self) -> &KrausMap {
        &self.l1
    }

    pub fn l2(&self) -> &KrausMap {
        &self.l2
    }

    pub fn perturbation(&self) -> f64 {
        self.perturbation
    }

    pub fn input_order(&self) -> usize {
        self.l1.input_order()
    }

    pub fn output_order(&self) -> usize {
        self.l1.output_order()
    }

    /// `(Y1, Y2)` at `x`.
    pub fn images(&self, x: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
        let k = self.output_order();
        let shift = SymMatrix::identity(k).scale(self.perturbation);
        let y1 = &self.l1.apply(x)? + &shift;
        let y2 = &self.l2.apply(x)? + &shift;
        Ok((y1, y2))
    }

    pub fn value(&self, x: &SymMatrix) -> Result<f64> {
        Ok(qre_eval(self, x, false)?.value)
    }

    /// `f(X) - Tr(Y1 - Y2)`, nonnegative by Klein's inequality.
    pub fn klein_gap(&self, x: &SymMatrix) -> Result<f64> {
        let (y1, y2) = self.images(x)?;
        Ok(self.value(x)? - (y1.trace() - y2.trace()))
    }
}

/// `f(X)` for a pinched second map, where data processing makes it nonnegative.
///
/// Callers compare the result against a small negative tolerance.
pub fn qre_nonnegativity_check(obj: &QreObjective, x: &SymMatrix) -> Result<f64> {
    obj.value(x)
}

struct QreState {
    d1: SpectralDecomp,
    d2: SpectralDecomp,
    h1_y1: DMatrix<f64>,
    h1_y2: DMatrix<f64>,
    y1: SymMatrix,
    value: f64,
    gradient: DVector<f64>,
}

fn positive_decomp(y: &SymMatrix, what: &str) -> Result<SpectralDecomp> {
    let d = spectral_decompose(y)?;
    if d.min() <= 0.0 {
        return Err(Error::domain(format!(
            "{what} not positive definite, λ_min = {:.3e}",
            d.min()
        )));
    }
    Ok(d)
}

/// First divided differences of `ln`.
fn log_dd1(lambda: &[f64]) -> Result<DMatrix<f64>> {
    Ok(-divided_diff_1(Generator::NegLog, lambda)?)
}

/// Fréchet derivative of the matrix logarithm, `O (h ∘ Oᵀ Z O) Oᵀ`.
fn dlog(d: &SpectralDecomp, h: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    d.from_eigenbasis(&d.to_eigenbasis(z).component_mul(h))
}

fn state(obj: &QreObjective, x: &SymMatrix) -> Result<QreState> {
    if x.order() != obj.input_order() {
        return Err(Error::shape(format!(
            "relative entropy expects order {}, got {}",
            obj.input_order(),
            x.order()
        )));
    }
    let (y1, y2) = obj.images(x)?;
    let d1 = positive_decomp(&y1, "Y1")?;
    let d2 = positive_decomp(&y2, "Y2")?;
    let ln1: Vec<f64> = d1.lambda.iter().map(|v| v.ln()).collect();
    let ln2: Vec<f64> = d2.lambda.iter().map(|v| v.ln()).collect();
    let log_y1 = d1.from_eigenbasis_diag(&ln1);
    let log_y2 = d2.from_eigenbasis_diag(&ln2);
    let value: f64 = d1.lambda.iter().zip(&ln1).map(|(l, g)| l * g).sum::<f64>()
        - y1.inner(&log_y2);

    let h1_y1 = log_dd1(d1.lambda.as_slice())?;
    let h1_y2 = log_dd1(d2.lambda.as_slice())?;
    let k = obj.output_order();
    let shifted = (&log_y1 - &log_y2).into_matrix() + DMatrix::identity(k, k);
    let cross = dlog(&d2, &h1_y2, y1.matrix());
    let grad = obj.l1.adjoint_raw(&shifted) - obj.l2.adjoint_raw(&cross);
    let gradient = vec(&SymMatrix::symmetrized(grad).into_matrix());
    Ok(QreState {
        d1,
        d2,
        h1_y1,
        h1_y2,
        y1,
        value,
        gradient,
    })
}

fn hessian_from_state(obj: &QreObjective, st: QreState) -> Result<DMatrix<f64>> {
    let n = obj.input_order();
    let QreState {
        d1,
        d2,
        h1_y1,
        h1_y2,
        y1,
        ..
    } = st;
    let curv = TraceHessian::new(y1.matrix(), Generator::NegLog, d2.clone());
    assemble_operator(n, |xi| {
        let a = obj.l1.apply_raw(xi);
        let b = obj.l2.apply_raw(xi);
        let t1 = dlog(&d1, &h1_y1, &a) - dlog(&d2, &h1_y2, &b);
        let t2 = curv.apply(&b) - dlog(&d2, &h1_y2, &a);
        Ok(obj.l1.adjoint_raw(&t1) + obj.l2.adjoint_raw(&t2))
    })
}

/// Assembled Hessian before the final symmetrization.
pub fn qre_hessian_raw(obj: &QreObjective, x: &SymMatrix) -> Result<DMatrix<f64>> {
    let st = state(obj, x)?;
    hessian_from_state(obj, st)
}

pub fn qre_eval(obj: &QreObjective, x: &SymMatrix, want_hessian: bool) -> Result<DerivativeBundle> {
    let st = state(obj, x)?;
    let value = st.value;
    let gradient = st.gradient.clone();
    let hessian = if want_hessian {
        let h = hessian_from_state(obj, st)?;
        Some((&h + h.transpose()) * 0.5)
    } else {
        None
    };
    Ok(DerivativeBundle {
        value,
        gradient,
        hessian,
    })
}

/// `β f(X) - ln det X`.
pub fn qkd_composite_eval(
    beta: f64,
    obj: &QreObjective,
    x: &SymMatrix,
    want_hessian: bool,
) -> Result<DerivativeBundle> {
    let mut out = barrier_eval(x, want_hessian).map_err(|e| e.context("barrier on X"))?;
    if beta > 0.0 {
        let q = qre_eval(obj, x, want_hessian).map_err(|e| e.context("relative entropy"))?;
        out.add_scaled(beta, &q);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{fd_gradient, fd_hessian_action};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_pd(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let m = &g * g.transpose() + DMatrix::identity(n, n) * 0.3;
        let t = m.trace();
        SymMatrix::new(m / t).unwrap()
    }

    fn rand_kraus(rng: &mut ChaCha8Rng, r: usize, k: usize, n: usize) -> KrausMap {
        KrausMap::new(
            (0..r)
                .map(|_| DMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-12)
    }

    #[test]
    fn vanishes_when_maps_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = rand_kraus(&mut rng, 2, 4, 3);
        let obj = QreObjective::new(l.clone(), l, 1e-12).unwrap();
        let x = rand_pd(&mut rng, 3);
        assert!(obj.value(&x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn diagonal_example() {
        let x = SymMatrix::from_diagonal(&[0.3, 0.7]);
        let swap = KrausMap::new(vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])]).unwrap();
        let obj = QreObjective::new(KrausMap::identity(2), swap, 0.0).unwrap();
        let expect = 0.3 * (0.3f64 / 0.7).ln() + 0.7 * (0.7f64 / 0.3).ln();
        assert_relative_eq!(obj.value(&x).unwrap(), expect, max_relative = 1e-13);
    }

    #[test]
    fn klein_gap_nonnegative_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let obj = QreObjective::new(
                rand_kraus(&mut rng, 2, 4, 3),
                rand_kraus(&mut rng, 3, 4, 3),
                1e-12,
            )
            .unwrap();
            let x = rand_pd(&mut rng, 3);
            assert!(obj.klein_gap(&x).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let obj = QreObjective::new(
            rand_kraus(&mut rng, 2, 4, 3),
            rand_kraus(&mut rng, 2, 4, 3),
            1e-12,
        )
        .unwrap();
        let x = rand_pd(&mut rng, 3);
        let b = qre_eval(&obj, &x, true).unwrap();
        let fd = fd_gradient(&|y: &SymMatrix| obj.value(y), &x, 1e-6).unwrap();
        assert!(rel(&b.gradient, &fd) < 1e-6);
        let g = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let dir = SymMatrix::new(g).unwrap();
        let grad = |y: &SymMatrix| qre_eval(&obj, y, false).map(|b| b.gradient);
        let fdh = fd_hessian_action(&grad, &x, &dir, 1e-6).unwrap();
        assert!(rel(&(b.hessian.unwrap() * dir.to_vec()), &fdh) < 1e-5);
    }

    #[test]
    fn raw_hessian_is_nearly_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let obj = QreObjective::new(
            rand_kraus(&mut rng, 2, 6, 4),
            rand_kraus(&mut rng, 3, 6, 4),
            1e-12,
        )
        .unwrap();
        let x = rand_pd(&mut rng, 4);
        let h = qre_hessian_raw(&obj, &x).unwrap();
        assert!((&h - h.transpose()).norm() <= 1e-8 * h.norm());
    }

    #[test]
    fn rejects_mismatched_maps_and_bad_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(QreObjective::new(rand_kraus(&mut rng, 1, 3, 2), rand_kraus(&mut rng, 1, 4, 2), 0.0).is_err());
        let obj = QreObjective::new(KrausMap::identity(2), KrausMap::identity(2), 0.0).unwrap();
        let bad = SymMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(qre_eval(&obj, &bad, false), Err(Error::DomainViolation(_))));
    }
}
