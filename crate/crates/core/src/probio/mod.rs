//! Problem definitions, validation, files and instance builders.

mod file;
mod generate;
mod named;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kkt::AffineConstraints;
use crate::linmap::LinearMap;
use crate::matfun::SymMatrix;
use crate::objectives::{phi_eval, DerivativeBundle, TraceObjective};
use crate::qre::{qre_eval, QreObjective};

pub use file::{from_json_str, load, save, to_json_string};
pub use generate::{generate_random, generate_random_with, random_density};
pub use named::{build_named, NAMED_PATTERNS};

/// Smallest eigenvalue (and slack) accepted for a strictly feasible point.
pub const CONE_MARGIN: f64 = 1e-8;
/// Largest accepted equality residual, relative to `max(1, |b_i|)`.
pub const AFFINE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemKind {
    /// Trace objective with mixed inequality/equality rows.
    #[serde(rename = "type1")]
    TypeI,
    /// Trace objectives through a linear map that also carries a barrier.
    #[serde(rename = "type2")]
    TypeII,
    #[serde(rename = "qkd")]
    Qkd,
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProblemKind::TypeI => "type1",
            ProblemKind::TypeII => "type2",
            ProblemKind::Qkd => "qkd",
        })
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "type1" | "typeI" | "I" => Ok(ProblemKind::TypeI),
            "type2" | "typeII" | "II" => Ok(ProblemKind::TypeII),
            "qkd" => Ok(ProblemKind::Qkd),
            other => Err(Error::Validation(format!("unknown problem kind `{other}`"))),
        }
    }
}

/// Size metadata. `m` is the number of inequality rows for type I and the
/// number of (equality) rows otherwise; `big_n` is the total row count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    #[serde(default)]
    pub k: usize,
    #[serde(default)]
    pub m: usize,
    #[serde(rename = "N", default)]
    pub big_n: usize,
    #[serde(default)]
    pub r1: usize,
    #[serde(default)]
    pub r2: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    /// `offset + Tr(C g(X))`.
    TypeI { term: TraceObjective, offset: f64 },
    /// `offset + Σ_t Tr(C_t g_t(·))`, each term on `X` or on `map(X)`;
    /// barriers on `X` and `map(X)`.
    TypeII {
        map: LinearMap,
        terms: Vec<TraceObjective>,
        offset: f64,
    },
    Qkd { qre: QreObjective, barrier: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub seed: Option<u64>,
    pub dims: Dims,
    pub objective: Objective,
    pub constraints: AffineConstraints,
    pub start: Option<SymMatrix>,
}

impl ProblemSpec {
    pub fn kind(&self) -> ProblemKind {
        match self.objective {
            Objective::TypeI { .. } => ProblemKind::TypeI,
            Objective::TypeII { .. } => ProblemKind::TypeII,
            Objective::Qkd { .. } => ProblemKind::Qkd,
        }
    }

    pub fn order(&self) -> usize {
        self.constraints.order()
    }

    /// `n + m` (type I), `n + k` (type II), `n` (QKD).
    pub fn barrier_parameter(&self) -> f64 {
        let n = self.order();
        (match &self.objective {
            Objective::TypeI { .. } => n + self.constraints.n_ineq(),
            Objective::TypeII { map, .. } => n + map.output_order(),
            Objective::Qkd { .. } => n,
        }) as f64
    }

    /// Maps whose outputs carry a log-det barrier besides `X` itself.
    pub fn barrier_maps(&self) -> &[LinearMap] {
        match &self.objective {
            Objective::TypeII { map, .. } => std::slice::from_ref(map),
            _ => &[],
        }
    }

    /// False only for QKD problems with the barrier switched off.
    pub fn uses_barrier(&self) -> bool {
        !matches!(self.objective, Objective::Qkd { barrier: false, .. })
    }

    /// Value, gradient and Hessian of the objective `f` alone.
    pub fn objective_bundle(&self, x: &SymMatrix, want_hessian: bool) -> Result<DerivativeBundle> {
        match &self.objective {
            Objective::TypeI { term, offset } => {
                let mut b = phi_eval(term, x, want_hessian)?;
                b.value += offset;
                Ok(b)
            }
            Objective::TypeII { terms, offset, .. } => {
                let mut out = DerivativeBundle::zero(x.order(), want_hessian);
                out.value = *offset;
                for (i, t) in terms.iter().enumerate() {
                    let b = phi_eval(t, x, want_hessian)
                        .map_err(|e| e.context(&format!("objective term {i}")))?;
                    out.add_scaled(1.0, &b);
                }
                Ok(out)
            }
            Objective::Qkd { qre, .. } => qre_eval(qre, x, want_hessian),
        }
    }

    pub fn objective_value(&self, x: &SymMatrix) -> Result<f64> {
        Ok(self.objective_bundle(x, false)?.value)
    }

    /// Checks strict feasibility of `x`, naming the first violated condition.
    pub fn check_strictly_feasible(&self, x: &SymMatrix) -> Result<()> {
        let n = self.order();
        if x.order() != n {
            return Err(Error::Validation(format!("point has order {}, problem has {n}", x.order())));
        }
        let lmin = x.min_eigenvalue()?;
        if lmin < CONE_MARGIN {
            return Err(Error::Validation(format!(
                "X is not strictly positive definite: λ_min = {lmin:.3e}"
            )));
        }
        let ax = self.constraints.apply(x);
        let b = self.constraints.rhs();
        for i in 0..self.constraints.len() {
            if i < self.constraints.n_ineq() {
                let slack = b[i] - ax[i];
                if slack < CONE_MARGIN {
                    return Err(Error::Validation(format!(
                        "inequality constraint {i} not strict: slack = {slack:.3e}"
                    )));
                }
            } else {
                let r = (ax[i] - b[i]).abs();
                if r > AFFINE_TOL * b[i].abs().max(1.0) {
                    return Err(Error::Validation(format!(
                        "equality constraint {i} violated: residual = {r:.3e}"
                    )));
                }
            }
        }
        for (j, map) in self.barrier_maps().iter().enumerate() {
            let y = map.apply(x)?;
            let l = y.min_eigenvalue()?;
            if l < CONE_MARGIN {
                return Err(Error::Validation(format!(
                    "barrier map {j} image is not strictly positive definite: λ_min = {l:.3e}"
                )));
            }
        }
        self.objective_value(x)
            .map_err(|e| Error::Validation(format!("objective not defined at point: {e}")))?;
        Ok(())
    }

    /// Structural checks plus strict feasibility of the declared start.
    pub fn validate(&self) -> Result<()> {
        let n = self.order();
        if self.dims.n != n {
            return Err(Error::Validation(format!(
                "dims.n = {} but constraints have order {n}",
                self.dims.n
            )));
        }
        if self.dims.big_n != self.constraints.len() {
            return Err(Error::Validation(format!(
                "dims.N = {} but {} constraint rows",
                self.dims.big_n,
                self.constraints.len()
            )));
        }
        match &self.objective {
            Objective::TypeI { term, offset } => {
                if term.map().is_some() {
                    return Err(Error::Validation("type I objectives act on X directly".into()));
                }
                if term.input_order() != n || !offset.is_finite() {
                    return Err(Error::Validation("type I objective does not match order".into()));
                }
                if self.dims.m != self.constraints.n_ineq() {
                    return Err(Error::Validation(format!(
                        "dims.m = {} but {} inequality rows",
                        self.dims.m,
                        self.constraints.n_ineq()
                    )));
                }
            }
            Objective::TypeII { map, terms, offset } => {
                if self.constraints.n_ineq() != 0 {
                    return Err(Error::Validation("type II problems take equality rows only".into()));
                }
                if map.input_order() != n || self.dims.k != map.output_order() {
                    return Err(Error::Validation(format!(
                        "map is {}→{}, dims say {n}→{}",
                        map.input_order(),
                        map.output_order(),
                        self.dims.k
                    )));
                }
                if terms.is_empty() || !offset.is_finite() {
                    return Err(Error::Validation("type II objective needs at least one term".into()));
                }
                for (i, t) in terms.iter().enumerate() {
                    if t.input_order() != n {
                        return Err(Error::Validation(format!("term {i} has the wrong order")));
                    }
                    if let Some(tm) = t.map() {
                        if tm != map {
                            return Err(Error::Validation(format!(
                                "term {i} uses a map other than the problem map"
                            )));
                        }
                    }
                }
            }
            Objective::Qkd { qre, .. } => {
                if self.constraints.n_ineq() != 0 {
                    return Err(Error::Validation("QKD problems take equality rows only".into()));
                }
                if qre.input_order() != n || qre.output_order() != self.dims.k {
                    return Err(Error::Validation(format!(
                        "Kraus maps are {}→{}, dims say {n}→{}",
                        qre.input_order(),
                        qre.output_order(),
                        self.dims.k
                    )));
                }
                if qre.perturbation() <= 0.0 {
                    return Err(Error::Validation("QKD perturbation must be positive".into()));
                }
            }
        }
        if let Some(x0) = &self.start {
            self.check_strictly_feasible(x0)
                .map_err(|e| Error::Validation(format!("declared start: {}", strip_prefix(&e))))?;
        }
        Ok(())
    }

    /// The declared start, or an error.
    pub fn start_point(&self) -> Result<&SymMatrix> {
        self.start
            .as_ref()
            .ok_or_else(|| Error::InfeasibleStart("problem declares no starting point".into()))
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Validation(m) => m.clone(),
        other => other.to_string(),
    }
}

/// `(W + I) / Tr(W + I)` with `W = G Gᵀ / n`.
pub(crate) fn interior_density(g: &DMatrix<f64>) -> SymMatrix {
    let n = g.nrows();
    let w = g * g.transpose() / n as f64 + DMatrix::identity(n, n);
    let t = w.trace();
    SymMatrix::symmetrized(w / t)
}
