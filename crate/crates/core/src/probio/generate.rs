//! Seeded random instances with strictly feasible starts.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::{interior_density, Dims, Objective, ProblemKind, ProblemSpec};
use crate::error::{Error, Result};
use crate::kkt::AffineConstraints;
use crate::linmap::{KrausMap, LinearMap, PartialTranspose};
use crate::matfun::{apply_matrix_function, matrix_sqrt, Generator, SymMatrix};
use crate::objectives::TraceObjective;
use crate::qre::QreObjective;

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    SymMatrix::symmetrized(gaussian(rng, n, n))
}

/// `G Gᵀ / Tr(G Gᵀ)` with Gaussian `G`.
pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let g = gaussian(rng, n, n);
    let w = &g * g.transpose();
    let t = w.trace();
    SymMatrix::symmetrized(w / t)
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    gaussian(rng, n, n).qr().q()
}

/// Kraus map with Gaussian factors scaled so that `λ_max(Σ KᵀK) = 1`.
fn random_kraus(rng: &mut ChaCha8Rng, rank: usize, k: usize, n: usize) -> Result<KrausMap> {
    let map = KrausMap::new((0..rank).map(|_| gaussian(rng, k, n)).collect())?;
    normalize_gain(map)
}

fn normalize_gain(map: KrausMap) -> Result<KrausMap> {
    let c = 1.0 / map.trace_gain()?.sqrt();
    KrausMap::new(map.factors().iter().map(|f| f * c).collect())
}

/// Pinching onto `s` blocks of a random orthonormal basis of `ℝ^k`.
fn random_pinching(rng: &mut ChaCha8Rng, k: usize, s: usize) -> Result<KrausMap> {
    if s == 0 || s > k {
        return Err(Error::shape(format!("cannot split order {k} into {s} blocks")));
    }
    let q = random_orthogonal(rng, k);
    let mut projectors = Vec::with_capacity(s);
    let mut col = 0;
    for b in 0..s {
        let width = k / s + usize::from(b < k % s);
        let v = q.columns(col, width);
        projectors.push(v * v.transpose());
        col += width;
    }
    KrausMap::pinching(projectors)
}

/// `m` rows: `m - 1` random symmetric rows then `Tr X = 1`, with
/// `b_i = ⟨A_i, X₀⟩` plus a margin on the first `n_ineq` rows.
fn rows_through(
    rng: &mut ChaCha8Rng,
    x0: &SymMatrix,
    rows: usize,
    n_ineq: usize,
) -> Result<AffineConstraints> {
    let n = x0.order();
    let margin = Uniform::new(0.1, 1.0).map_err(|e| Error::Validation(e.to_string()))?;
    let mut mats = Vec::with_capacity(rows);
    let mut rhs = Vec::with_capacity(rows);
    for i in 0..rows {
        let a = if i + 1 == rows {
            SymMatrix::identity(n)
        } else {
            random_symmetric(rng, n)
        };
        let ax = a.inner(x0);
        let b = if i < n_ineq {
            ax + margin.sample(rng) * ax.abs().max(1e-2)
        } else {
            ax
        };
        mats.push(a);
        rhs.push(b);
    }
    AffineConstraints::new(mats, rhs, n_ineq)
}

/// Largest divisor of `n` not above `√n`.
fn split_order(n: usize) -> (usize, usize) {
    let mut n1 = (n as f64).sqrt().floor() as usize;
    while n1 > 1 && !n.is_multiple_of(n1) {
        n1 -= 1;
    }
    let n1 = n1.max(1);
    (n1, n / n1)
}

pub fn generate_random(kind: ProblemKind, dims: Dims, seed: u64) -> Result<ProblemSpec> {
    generate_random_with(kind, dims, seed, None)
}

/// As [`generate_random`], choosing the scalar generator for type I/II.
///
/// Zero dimensions take defaults: type I `N = n`, `m = N - 1` capped at
/// `n/2`; type II and QKD `m = 1`; QKD `k = 2n`, `r1 = r2 = 2`.
pub fn generate_random_with(
    kind: ProblemKind,
    dims: Dims,
    seed: u64,
    generator: Option<Generator>,
) -> Result<ProblemSpec> {
    let n = dims.n;
    if n == 0 {
        return Err(Error::shape("n must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = match kind {
        ProblemKind::TypeI => {
            let big_n = if dims.big_n == 0 { n } else { dims.big_n };
            let m = if dims.big_n == 0 && dims.m == 0 { n / 2 } else { dims.m };
            if big_n < m + 1 {
                return Err(Error::shape(format!(
                    "type I needs N ≥ m + 1 to hold the trace row, got N = {big_n}, m = {m}"
                )));
            }
            let g = generator.unwrap_or(Generator::Inverse);
            let c = random_density(&mut rng, n);
            let x0 = interior_density(&gaussian(&mut rng, n, n));
            let constraints = rows_through(&mut rng, &x0, big_n, m)?;
            ProblemSpec {
                name: format!("type1-n{n}-m{m}-N{big_n}-s{seed}"),
                seed: Some(seed),
                dims: Dims {
                    n,
                    k: 0,
                    m,
                    big_n,
                    r1: 0,
                    r2: 0,
                },
                objective: Objective::TypeI {
                    term: TraceObjective::new(c, g, None)?,
                    offset: 0.0,
                },
                constraints,
                start: Some(x0),
            }
        }
        ProblemKind::TypeII => {
            let rows = dims.m.max(1);
            let g = generator.unwrap_or(Generator::NegLog);
            let (map, terms, offset, x0, k, r1) = match g {
                Generator::NegLog => {
                    let (n1, n2) = split_order(n);
                    let map = LinearMap::PartialTranspose(PartialTranspose::new(n1, n2)?);
                    let c = random_density(&mut rng, n);
                    let offset = -apply_matrix_function(Generator::NegLog, &c)?.inner(&c);
                    let mut x0 = interior_density(&gaussian(&mut rng, n, n));
                    let mixed = SymMatrix::identity(n).scale(1.0 / n as f64);
                    while map.apply(&x0)?.min_eigenvalue()? < 0.1 / n as f64 {
                        x0 = (&x0 + &mixed).scale(0.5);
                    }
                    let term = TraceObjective::new(c, g, None)?;
                    (map, vec![term], offset, x0, n, 0)
                }
                Generator::NegSqrt => {
                    let y = random_density(&mut rng, n);
                    let root = matrix_sqrt(&y)?.into_matrix();
                    let map = LinearMap::Kraus(KrausMap::new(vec![root])?);
                    let term = TraceObjective::new(SymMatrix::identity(n), g, Some(map.clone()))?;
                    let x0 = interior_density(&gaussian(&mut rng, n, n));
                    (map, vec![term], 0.0, x0, n, 1)
                }
                _ => {
                    let k = if dims.k == 0 { n } else { dims.k };
                    let r1 = if dims.r1 == 0 { 2 } else { dims.r1 };
                    if r1 * n < k {
                        return Err(Error::shape(format!(
                            "a rank-{r1} map from order {n} cannot have a definite image of order {k}"
                        )));
                    }
                    let map = LinearMap::Kraus(random_kraus(&mut rng, r1, k, n)?);
                    let c = random_density(&mut rng, k);
                    let term = TraceObjective::new(c, g, Some(map.clone()))?;
                    let x0 = interior_density(&gaussian(&mut rng, n, n));
                    (map, vec![term], 0.0, x0, k, r1)
                }
            };
            let constraints = rows_through(&mut rng, &x0, rows, 0)?;
            ProblemSpec {
                name: format!("type2-{g}-n{n}-s{seed}"),
                seed: Some(seed),
                dims: Dims {
                    n,
                    k,
                    m: rows,
                    big_n: rows,
                    r1,
                    r2: 0,
                },
                objective: Objective::TypeII { map, terms, offset },
                constraints,
                start: Some(x0),
            }
        }
        ProblemKind::Qkd => {
            let k = if dims.k == 0 { 2 * n } else { dims.k };
            let rows = dims.m.max(1);
            let r1 = if dims.r1 == 0 { 2 } else { dims.r1 };
            let r2 = if dims.r2 == 0 { 2 } else { dims.r2 };
            let l1 = random_kraus(&mut rng, r1, k, n)?;
            let l2 = if r2 % r1 == 0 && r2 / r1 >= 2 {
                let pinch = random_pinching(&mut rng, k, r2 / r1)?;
                l1.then_pinch(&pinch)?
            } else {
                random_kraus(&mut rng, r2, k, n)?
            };
            let x0 = interior_density(&gaussian(&mut rng, n, n));
            let constraints = rows_through(&mut rng, &x0, rows, 0)?;
            ProblemSpec {
                name: format!("qkd-n{n}-k{k}-m{rows}-r{r1}x{r2}-s{seed}"),
                seed: Some(seed),
                dims: Dims {
                    n,
                    k,
                    m: rows,
                    big_n: rows,
                    r1,
                    r2,
                },
                objective: Objective::Qkd {
                    qre: QreObjective::new(l1, l2, 1e-12)?,
                    barrier: true,
                },
                constraints,
                start: Some(x0),
            }
        }
    };
    spec.validate()?;
    Ok(spec)
}
