//! JSON problem files.
//!
//! Matrices are arrays of rows. Kraus factors are `k×n` row arrays. The
//! objective object depends on `kind`:
//!
//! * `type1`: `{"generator", "offset"}`, weight in the top-level `C`
//! * `type2`: `{"offset", "map", "terms": [{"generator", "on", "weight"}]}`
//! * `qkd`: `{"perturbation", "barrier"}`, maps in `kraus.L1` / `kraus.L2`

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Dims, Objective, ProblemKind, ProblemSpec};
use crate::error::{Error, Result};
use crate::kkt::AffineConstraints;
use crate::linmap::{KrausMap, LinearMap, PartialTranspose};
use crate::matfun::{max_asymmetry, Generator, SymMatrix};
use crate::objectives::TraceObjective;
use crate::qre::QreObjective;

/// Accepted asymmetry, relative to the largest entry.
const SYMMETRY_TOL: f64 = 1e-12;

type Rows = Vec<Vec<f64>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSpec {
    kind: ProblemKind,
    #[serde(default)]
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    dims: Dims,
    objective: FileObjective,
    constraints: FileConstraints,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kraus: Option<FileKraus>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    c: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start: Option<Rows>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileObjective {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    map: Option<FileMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    terms: Option<Vec<FileTerm>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    perturbation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    barrier: Option<bool>,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum TermTarget {
    X,
    Map,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTerm {
    generator: String,
    on: TermTarget,
    /// Identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<Rows>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum FileMap {
    Identity(usize),
    PartialTranspose([usize; 2]),
    Kraus(Vec<Rows>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConstraints {
    #[serde(rename = "A")]
    a: Vec<Rows>,
    b: Vec<f64>,
    #[serde(default)]
    n_ineq: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileKraus {
    #[serde(rename = "L1")]
    l1: Vec<Rows>,
    #[serde(rename = "L2")]
    l2: Vec<Rows>,
}

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        location: location.into(),
        message: message.into(),
    }
}

fn dense(rows: &Rows, at: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 {
        return Err(parse_err(at, "empty matrix"));
    }
    if let Some(i) = rows.iter().position(|row| row.len() != c) {
        return Err(parse_err(format!("{at}[{i}]"), format!("row length {} != {c}", rows[i].len())));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn symmetric(rows: &Rows, at: &str) -> Result<SymMatrix> {
    let m = dense(rows, at)?;
    if !m.is_square() {
        return Err(parse_err(at, format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("{at}: non-finite entry")));
    }
    let scale = m.amax().max(1.0);
    let asym = max_asymmetry(&m);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Validation(format!("{at} is not symmetric (asymmetry {asym:.3e})")));
    }
    SymMatrix::new(m).map_err(|e| e.context(at))
}

fn kraus(list: &[Rows], at: &str) -> Result<KrausMap> {
    let factors = list
        .iter()
        .enumerate()
        .map(|(j, f)| dense(f, &format!("{at}[{j}]")))
        .collect::<Result<Vec<_>>>()?;
    KrausMap::new(factors).map_err(|e| Error::Validation(format!("{at}: {e}")))
}

fn generator(s: &str, at: &str) -> Result<Generator> {
    s.parse::<Generator>()
        .map_err(|e| parse_err(at, e.to_string()))
}

fn rows_of(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn file_map(map: &LinearMap) -> FileMap {
    match map {
        LinearMap::Identity(n) => FileMap::Identity(*n),
        LinearMap::PartialTranspose(p) => {
            let (a, b) = p.dims();
            FileMap::PartialTranspose([a, b])
        }
        LinearMap::Kraus(k) => FileMap::Kraus(k.factors().iter().map(rows_of).collect()),
    }
}

fn linear_map(fm: &FileMap) -> Result<LinearMap> {
    Ok(match fm {
        FileMap::Identity(n) => LinearMap::Identity(*n),
        FileMap::PartialTranspose([a, b]) => LinearMap::PartialTranspose(
            PartialTranspose::new(*a, *b).map_err(|e| parse_err("objective.map", e.to_string()))?,
        ),
        FileMap::Kraus(list) => LinearMap::Kraus(kraus(list, "objective.map.kraus")?),
    })
}

fn to_file(spec: &ProblemSpec) -> FileSpec {
    let cons = &spec.constraints;
    let constraints = FileConstraints {
        a: cons.mats().iter().map(|a| a.rows()).collect(),
        b: cons.rhs().iter().copied().collect(),
        n_ineq: cons.n_ineq(),
    };
    let mut objective = FileObjective::default();
    let mut c = None;
    let mut kraus_maps = None;
    match &spec.objective {
        Objective::TypeI { term, offset } => {
            objective.generator = Some(term.generator().to_string());
            objective.offset = Some(*offset);
            c = Some(term.weight().rows());
        }
        Objective::TypeII { map, terms, offset } => {
            objective.offset = Some(*offset);
            objective.map = Some(file_map(map));
            objective.terms = Some(
                terms
                    .iter()
                    .map(|t| FileTerm {
                        generator: t.generator().to_string(),
                        on: if t.map().is_some() { TermTarget::Map } else { TermTarget::X },
                        weight: Some(t.weight().rows()),
                    })
                    .collect(),
            );
        }
        Objective::Qkd { qre, barrier } => {
            objective.perturbation = Some(qre.perturbation());
            objective.barrier = Some(*barrier);
            kraus_maps = Some(FileKraus {
                l1: qre.l1().factors().iter().map(rows_of).collect(),
                l2: qre.l2().factors().iter().map(rows_of).collect(),
            });
        }
    }
    FileSpec {
        kind: spec.kind(),
        name: spec.name.clone(),
        seed: spec.seed,
        dims: spec.dims,
        objective,
        constraints,
        kraus: kraus_maps,
        c,
        start: spec.start.as_ref().map(|s| s.rows()),
    }
}

fn from_file(f: FileSpec) -> Result<ProblemSpec> {
    let mats = f
        .constraints
        .a
        .iter()
        .enumerate()
        .map(|(i, a)| symmetric(a, &format!("constraints.A[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let constraints = AffineConstraints::new(mats, f.constraints.b.clone(), f.constraints.n_ineq)
        .map_err(|e| Error::Validation(format!("constraints: {e}")))?;
    let n = constraints.order();
    let obj = &f.objective;
    let objective = match f.kind {
        ProblemKind::TypeI => {
            let g = generator(
                obj.generator.as_deref().ok_or_else(|| parse_err("objective.generator", "missing"))?,
                "objective.generator",
            )?;
            let c = match &f.c {
                Some(rows) => symmetric(rows, "C")?,
                None => SymMatrix::identity(n),
            };
            let term = TraceObjective::new(c, g, None).map_err(|e| Error::Validation(format!("C: {e}")))?;
            Objective::TypeI {
                term,
                offset: obj.offset.unwrap_or(0.0),
            }
        }
        ProblemKind::TypeII => {
            let map = linear_map(obj.map.as_ref().ok_or_else(|| parse_err("objective.map", "missing"))?)?;
            let terms = obj
                .terms
                .as_ref()
                .ok_or_else(|| parse_err("objective.terms", "missing"))?
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let at = format!("objective.terms[{i}]");
                    let g = generator(&t.generator, &format!("{at}.generator"))?;
                    let (order, m) = match t.on {
                        TermTarget::X => (n, None),
                        TermTarget::Map => (map.output_order(), Some(map.clone())),
                    };
                    let w = match &t.weight {
                        Some(rows) => symmetric(rows, &format!("{at}.weight"))?,
                        None => SymMatrix::identity(order),
                    };
                    TraceObjective::new(w, g, m).map_err(|e| Error::Validation(format!("{at}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Objective::TypeII {
                map,
                terms,
                offset: obj.offset.unwrap_or(0.0),
            }
        }
        ProblemKind::Qkd => {
            let kr = f.kraus.as_ref().ok_or_else(|| parse_err("kraus", "missing"))?;
            let l1 = kraus(&kr.l1, "kraus.L1")?;
            let l2 = kraus(&kr.l2, "kraus.L2")?;
            let qre = QreObjective::new(l1, l2, obj.perturbation.unwrap_or(1e-12))
                .map_err(|e| Error::Validation(format!("kraus: {e}")))?;
            Objective::Qkd {
                qre,
                barrier: obj.barrier.unwrap_or(true),
            }
        }
    };
    let start = f.start.as_ref().map(|r| symmetric(r, "start")).transpose()?;
    let spec = ProblemSpec {
        name: f.name,
        seed: f.seed,
        dims: f.dims,
        objective,
        constraints,
        start,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn to_json_string(spec: &ProblemSpec) -> Result<String> {
    serde_json::to_string_pretty(&to_file(spec))
        .map_err(|e| Error::NumericalFailure(format!("serialization failed: {e}")))
}

/// Parses and validates a problem document.
pub fn from_json_str(text: &str) -> Result<ProblemSpec> {
    let f: FileSpec = serde_json::from_str(text)
        .map_err(|e| parse_err(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    from_file(f)
}

pub fn load(path: impl AsRef<Path>) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(path.as_ref())?;
    from_json_str(&text)
}

pub fn save(spec: &ProblemSpec, path: impl AsRef<Path>) -> Result<()> {
    let mut text = to_json_string(spec)?;
    text.push('\n');
    std::fs::write(path.as_ref(), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probio::{build_named, generate_random, Dims};

    #[test]
    fn round_trip_is_exact() {
        for name in ["trace-inverse-n3", "ree-2x2", "fidelity-n3", "qkd-toy"] {
            let p = build_named(name).unwrap();
            let q = from_json_str(&to_json_string(&p).unwrap()).unwrap();
            assert_eq!(p, q, "{name}");
        }
        let dims = Dims {
            n: 3,
            k: 6,
            m: 2,
            big_n: 2,
            r1: 2,
            r2: 2,
        };
        let p = generate_random(ProblemKind::Qkd, dims, 5).unwrap();
        let q = from_json_str(&to_json_string(&p).unwrap()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn syntax_errors_carry_a_location() {
        match from_json_str("{\"kind\": \"type1\",\n  \"dims\": }") {
            Err(Error::Parse { location, .. }) => assert!(location.starts_with("line 2"), "{location}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn asymmetric_constraint_is_a_validation_error() {
        let p = build_named("trace-inverse-n2").unwrap();
        let text = to_json_string(&p).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["constraints"]["A"][0][0][1] = serde_json::json!(0.25);
        let err = from_json_str(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("constraints.A[0]")), "{err}");
    }

    #[test]
    fn infeasible_start_is_a_validation_error() {
        let p = build_named("trace-inverse-n2").unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&to_json_string(&p).unwrap()).unwrap();
        v["start"] = serde_json::json!([[0.9, 0.0], [0.0, 0.9]]);
        let err = from_json_str(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("equality constraint 0")), "{err}");
    }
}
