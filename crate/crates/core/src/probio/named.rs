//! Canonical instances with known optima.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{generate_random, random_density, Dims, Objective, ProblemKind, ProblemSpec};
use crate::error::{Error, Result};
use crate::kkt::AffineConstraints;
use crate::linmap::{KrausMap, LinearMap, PartialTranspose};
use crate::matfun::{apply_matrix_function, kron, matrix_sqrt, Generator, SymMatrix};
use crate::objectives::TraceObjective;
use crate::qre::QreObjective;

/// Recognized name patterns, for help text.
pub const NAMED_PATTERNS: &[&str] = &[
    "trace-inverse-n{N}",
    "ree-{n1}x{n2}",
    "fidelity-n{N}",
    "qkd-toy",
    "qkd-n{N}",
];

fn order_suffix(name: &str, prefix: &str) -> Option<usize> {
    name.strip_prefix(prefix)?.parse().ok().filter(|&n| n > 0)
}

fn maximally_mixed(n: usize) -> SymMatrix {
    SymMatrix::identity(n).scale(1.0 / n as f64)
}

/// Builds a named instance.
///
/// * `trace-inverse-n{N}`: `Tr(X⁻¹)` on `Tr X = 1`, optimum `N²` at `I/N`.
/// * `ree-{n1}x{n2}`: `Tr(C ln C) - Tr(C ln X)` over PPT states with the
///   PPT weight `C = 0.7 ρ_A ⊗ ρ_B + 0.3 I/n`, optimum 0 at `X = C`.
/// * `fidelity-n{N}`: `-Tr((Y^{1/2} X Y^{1/2})^{1/2})` on `Tr X = 1`,
///   optimum `-√(Tr Y) = -1` at `X = Y`.
/// * `qkd-toy`: relative entropy between `X` and itself, identically 0.
/// * `qkd-n{N}`: seeded random QKD instance with `k = 2N`, two rows, rank 2.
pub fn build_named(name: &str) -> Result<ProblemSpec> {
    if let Some(n) = order_suffix(name, "trace-inverse-n") {
        let total = (n * (n + 1) / 2) as f64;
        let start: Vec<f64> = (1..=n).map(|i| i as f64 / total).collect();
        return Ok(ProblemSpec {
            name: name.into(),
            seed: None,
            dims: Dims {
                n,
                big_n: 1,
                ..Dims::default()
            },
            objective: Objective::TypeI {
                term: TraceObjective::new(SymMatrix::identity(n), Generator::Inverse, None)?,
                offset: 0.0,
            },
            constraints: AffineConstraints::trace_normalization(n),
            start: Some(SymMatrix::from_diagonal(&start)),
        });
    }
    if let Some(rest) = name.strip_prefix("ree-") {
        let (a, b) = rest.split_once('x').ok_or_else(|| Error::NotFound(name.into()))?;
        let (n1, n2): (usize, usize) = match (a.parse(), b.parse()) {
            (Ok(x), Ok(y)) if x > 0 && y > 0 => (x, y),
            _ => return Err(Error::NotFound(name.into())),
        };
        let n = n1 * n2;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho_a = random_density(&mut rng, n1);
        let rho_b = random_density(&mut rng, n2);
        let c = SymMatrix::new(kron(rho_a.matrix(), rho_b.matrix()) * 0.7)?
            .add_scaled(0.3, &maximally_mixed(n));
        let offset = -apply_matrix_function(Generator::NegLog, &c)?.inner(&c);
        return Ok(ProblemSpec {
            name: name.into(),
            seed: Some(1),
            dims: Dims {
                n,
                k: n,
                m: 1,
                big_n: 1,
                ..Dims::default()
            },
            objective: Objective::TypeII {
                map: LinearMap::PartialTranspose(PartialTranspose::new(n1, n2)?),
                terms: vec![TraceObjective::new(c, Generator::NegLog, None)?],
                offset,
            },
            constraints: AffineConstraints::trace_normalization(n),
            start: Some(maximally_mixed(n)),
        });
    }
    if let Some(n) = order_suffix(name, "fidelity-n") {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = random_density(&mut rng, n);
        let map = LinearMap::Kraus(KrausMap::new(vec![matrix_sqrt(&y)?.into_matrix()])?);
        return Ok(ProblemSpec {
            name: name.into(),
            seed: Some(1),
            dims: Dims {
                n,
                k: n,
                m: 1,
                big_n: 1,
                r1: 1,
                r2: 0,
            },
            objective: Objective::TypeII {
                terms: vec![TraceObjective::new(
                    SymMatrix::identity(n),
                    Generator::NegSqrt,
                    Some(map.clone()),
                )?],
                map,
                offset: 0.0,
            },
            constraints: AffineConstraints::trace_normalization(n),
            start: Some(maximally_mixed(n)),
        });
    }
    if name == "qkd-toy" {
        return Ok(ProblemSpec {
            name: name.into(),
            seed: None,
            dims: Dims {
                n: 2,
                k: 2,
                m: 1,
                big_n: 1,
                r1: 1,
                r2: 1,
            },
            objective: Objective::Qkd {
                qre: QreObjective::new(KrausMap::identity(2), KrausMap::identity(2), 1e-12)?,
                barrier: true,
            },
            constraints: AffineConstraints::trace_normalization(2),
            start: Some(SymMatrix::from_diagonal(&[0.3, 0.7])),
        });
    }
    if let Some(n) = order_suffix(name, "qkd-n") {
        let dims = Dims {
            n,
            k: 2 * n,
            m: 2,
            big_n: 2,
            r1: 2,
            r2: 2,
        };
        let mut spec = generate_random(ProblemKind::Qkd, dims, 1)?;
        spec.name = name.into();
        return Ok(spec);
    }
    Err(Error::NotFound(name.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn all_patterns_build_and_validate() {
        for name in [
            "trace-inverse-n1",
            "trace-inverse-n4",
            "ree-2x2",
            "ree-2x3",
            "fidelity-n3",
            "qkd-toy",
            "qkd-n3",
        ] {
            build_named(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn unknown_names() {
        for name in ["", "trace-inverse-n0", "ree-2", "ree-ax2", "qkd", "fidelity-nx"] {
            assert!(matches!(build_named(name), Err(Error::NotFound(_))), "{name}");
        }
    }

    #[test]
    fn known_optima_evaluate_correctly() {
        let p = build_named("trace-inverse-n4").unwrap();
        assert_relative_eq!(p.objective_value(&maximally_mixed(4)).unwrap(), 16.0, max_relative = 1e-14);

        let p = build_named("ree-2x2").unwrap();
        let Objective::TypeII { terms, .. } = &p.objective else { unreachable!() };
        let c = terms[0].weight().clone();
        assert_relative_eq!(c.trace(), 1.0, epsilon = 1e-14);
        p.check_strictly_feasible(&c).unwrap();
        assert!(p.objective_value(&c).unwrap().abs() < 1e-14);

        let p = build_named("fidelity-n3").unwrap();
        let Objective::TypeII { map: LinearMap::Kraus(k), .. } = &p.objective else { unreachable!() };
        let y = SymMatrix::new(&k.factors()[0] * &k.factors()[0]).unwrap();
        assert_relative_eq!(p.objective_value(&y).unwrap(), -1.0, max_relative = 1e-12);

        let p = build_named("qkd-toy").unwrap();
        assert!(p.objective_value(p.start.as_ref().unwrap()).unwrap().abs() < 1e-15);
    }
}
