//! Long-step path following on `F_β = β f + B`.
//!
//! Each outer iteration multiplies `β` by `1 + θ` and re-centers with damped
//! Newton steps until the decrement drops below `1/(3κ)`. The run stops
//! once `β ≥ 4r/ε`. A damped-Newton phase at `β₀` supplies the initial
//! centered point, and an optional polish continues Newton at the final `β`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kkt::{newton_step_type1_scaled, newton_step_type2_scaled, NewtonStep};
use crate::matfun::{matrix_sqrt, spectral_decompose, SymMatrix};
use crate::objectives::{barrier_eval, barrier_through_map, DerivativeBundle};
use crate::probio::{ProblemKind, ProblemSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub beta0: f64,
    /// `β_{i+1} = (1 + θ) β_i`.
    pub theta: f64,
    pub epsilon: f64,
    pub kappa: f64,
    /// Overrides the barrier parameter of the problem.
    pub barrier_param: Option<f64>,
    pub max_outer: usize,
    pub max_inner: usize,
    pub shrink: f64,
    pub boundary_fraction: f64,
    pub max_backtracks: usize,
    /// After the last outer iteration, keep stepping until `δ ≤ polish_tol`.
    pub polish_tol: Option<f64>,
    pub max_polish: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta0: 1.0,
            theta: 1.0,
            epsilon: 1e-8,
            kappa: 2.0,
            barrier_param: None,
            max_outer: 200,
            max_inner: 200,
            shrink: 0.5,
            boundary_fraction: 0.99,
            max_backtracks: 60,
            polish_tol: Some(1e-9),
            max_polish: 8,
        }
    }
}

impl SolverConfig {
    /// `δ* = 1/(3κ)`.
    pub fn centering_threshold(&self) -> f64 {
        1.0 / (3.0 * self.kappa)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Validation(format!("{what} must be finite and positive, got {v}")))
            }
        };
        positive(self.beta0, "beta0")?;
        positive(self.theta, "theta")?;
        positive(self.epsilon, "epsilon")?;
        positive(self.kappa, "kappa")?;
        if let Some(r) = self.barrier_param {
            positive(r, "barrier parameter")?;
        }
        if let Some(t) = self.polish_tol {
            positive(t, "polish tolerance")?;
        }
        for (v, what) in [(self.shrink, "shrink"), (self.boundary_fraction, "boundary fraction")] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Validation(format!("{what} must lie in (0, 1), got {v}")));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 || self.max_backtracks == 0 {
            return Err(Error::Validation("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

/// Caps on Newton steps: per outer iteration and for the whole run.
///
/// `22/3 + 22θ(5κ√r/2 + θκ²r/(θ+1))` per outer iteration, times
/// `ln(4r/(εβ₀)) / ln(1+θ)` outer iterations.
pub fn iteration_bound(config: &SolverConfig, r: f64) -> (f64, f64) {
    let (t, k) = (config.theta, config.kappa);
    let per_outer = 22.0 / 3.0 + 22.0 * t * (2.5 * k * r.sqrt() + t * k * k * r / (t + 1.0));
    let outer = ((4.0 * r / (config.epsilon * config.beta0)).ln() / t.ln_1p()).max(0.0);
    (per_outer, outer * per_outer)
}

/// Bound on `|f(x) - f(x(β))|` at a point with decrement `δ`, or infinity
/// outside the region where it applies.
pub fn gap_certificate(delta: f64, kappa: f64, r: f64, beta: f64) -> f64 {
    let kd = kappa * delta;
    if 2.25 * kd >= 1.0 {
        return f64::INFINITY;
    }
    delta / (1.0 - 2.25 * kd) * (1.0 + kappa * delta * delta) / (1.0 - kd) * r.sqrt() / beta
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    IterCap,
    NumericalFailure,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::IterCap => "iteration cap",
            Termination::NumericalFailure => "numerical failure",
        })
    }
}

/// One accepted Newton step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub outer: usize,
    pub beta: f64,
    /// Decrement at the point the step started from.
    pub delta: f64,
    pub alpha: f64,
    /// Objective after the step.
    pub f: f64,
    pub feas_residual: f64,
}

/// Every decrement evaluation, including the ones that passed the gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecrementRecord {
    /// Accepted steps before this evaluation.
    pub after_step: usize,
    pub outer: usize,
    pub beta: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub per_outer_cap: f64,
    pub total_cap: f64,
    pub max_inner_observed: usize,
    pub total_observed: usize,
    pub within_per_outer: bool,
    pub within_total: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub name: String,
    pub kind: ProblemKind,
    pub f_min: f64,
    pub f_start: f64,
    pub x_star: Vec<Vec<f64>>,
    pub outer_iters: usize,
    pub inner_iters_per_outer: Vec<usize>,
    pub total_newton: usize,
    pub final_beta: f64,
    pub final_delta: f64,
    pub barrier_param: f64,
    /// Gap certificate at each centered handoff.
    pub certificates: Vec<f64>,
    pub decrement_trace: Vec<DecrementRecord>,
    pub steps: Vec<StepRecord>,
    pub bound_check: BoundCheck,
    /// Largest Schur condition estimate seen.
    pub max_condition: f64,
    pub regularized_steps: usize,
    /// Set when the barrier was disabled, outside the theory.
    pub heuristic: bool,
    pub termination: Termination,
    pub message: Option<String>,
    pub wall_time: f64,
}

impl SolveReport {
    pub fn x_star_matrix(&self) -> Result<SymMatrix> {
        SymMatrix::from_rows(&self.x_star)
    }

    /// JSON with the timing field zeroed, for determinism checks.
    pub fn to_json_without_timing(&self) -> String {
        let mut r = self.clone();
        r.wall_time = 0.0;
        serde_json::to_string(&r).unwrap_or_default()
    }
}

/// Largest `α` with `X + αP ≻ 0`, infinite if `P` never reaches the boundary.
pub fn max_step_to_boundary(x: &SymMatrix, p: &SymMatrix) -> Result<f64> {
    let chol = x
        .matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::domain("step origin is not positive definite"))?;
    let l = chol.l();
    let linv_p = l
        .solve_lower_triangular(p.matrix())
        .ok_or_else(|| Error::NumericalFailure("singular Cholesky factor".into()))?;
    let m = l
        .solve_lower_triangular(&linv_p.transpose())
        .ok_or_else(|| Error::NumericalFailure("singular Cholesky factor".into()))?;
    let mu = spectral_decompose(&SymMatrix::new(m)?)?.min();
    Ok(if mu < 0.0 { -1.0 / mu } else { f64::INFINITY })
}

/// Backtracking from `min(1, fraction·α_max)` until `merit` strictly decreases.
///
/// Returns the accepted `α` and the merit value there.
pub fn line_search<F>(alpha_max: f64, f0: f64, mut merit: F, config: &SolverConfig) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut alpha = (config.boundary_fraction * alpha_max).min(1.0);
    if !(alpha > 0.0) {
        return Err(Error::LineSearchFailure(format!("no room to move, α_max = {alpha_max:.3e}")));
    }
    let mut last = String::from("no decrease");
    for _ in 0..config.max_backtracks {
        match merit(alpha) {
            Ok(v) if v < f0 => return Ok((alpha, v)),
            Ok(v) => last = format!("no decrease (F = {v:.15e} vs {f0:.15e})"),
            Err(Error::DomainViolation(m)) => last = format!("left the domain: {m}"),
            Err(e) => return Err(e),
        }
        alpha *= config.shrink;
    }
    Err(Error::LineSearchFailure(format!(
        "{} backtracks exhausted at α = {alpha:.3e}: {last}",
        config.max_backtracks
    )))
}

/// `F_β` for a problem: objective, log-det barriers and slack barriers.
struct Model<'a> {
    spec: &'a ProblemSpec,
}

impl Model<'_> {
    /// The `X` block of `F_β` with `f` itself alongside.
    fn eval(&self, beta: f64, x: &SymMatrix, want_hessian: bool) -> Result<(DerivativeBundle, f64)> {
        let f = self.spec.objective_bundle(x, want_hessian)?;
        let mut out = if self.spec.uses_barrier() {
            barrier_eval(x, want_hessian).map_err(|e| e.context("barrier on X"))?
        } else {
            DerivativeBundle::zero(x.order(), want_hessian)
        };
        out.add_scaled(beta, &f);
        for (j, map) in self.spec.barrier_maps().iter().enumerate() {
            let b = barrier_through_map(map, x, want_hessian)
                .map_err(|e| e.context(&format!("barrier map {j}")))?;
            out.add_scaled(1.0, &b);
        }
        Ok((out, f.value))
    }

    fn slack_barrier(&self, x: &SymMatrix) -> Result<f64> {
        let s = self.spec.constraints.slacks(x);
        if let Some(i) = s.iter().position(|&v| v <= 0.0) {
            return Err(Error::domain(format!("slack {i} is not positive")));
        }
        Ok(-s.iter().map(|v| v.ln()).sum::<f64>())
    }

    fn merit(&self, beta: f64, x: &SymMatrix) -> Result<(f64, f64)> {
        let (b, f) = self.eval(beta, x, false)?;
        Ok((b.value + self.slack_barrier(x)?, f))
    }

    /// Solved in `X^{1/2}`-scaled coordinates, see [`newton_step_type2_scaled`].
    fn newton(&self, beta: f64, x: &SymMatrix) -> Result<NewtonStep> {
        let (b, _) = self.eval(beta, x, true)?;
        let root = matrix_sqrt(x)?;
        let cons = &self.spec.constraints;
        if cons.n_ineq() > 0 {
            newton_step_type1_scaled(&b, &cons.slacks(x), beta, cons, Some(&root))
        } else {
            newton_step_type2_scaled(&b, cons, Some(&root))
        }
    }

    fn max_step(&self, x: &SymMatrix, step: &NewtonStep) -> Result<f64> {
        let p = &step.direction_x;
        let mut amax = max_step_to_boundary(x, p)?;
        for map in self.spec.barrier_maps() {
            amax = amax.min(max_step_to_boundary(&map.apply(x)?, &map.apply(p)?)?);
        }
        let s = self.spec.constraints.slacks(x);
        for (i, &d) in step.direction_slack.iter().enumerate() {
            if d < 0.0 {
                amax = amax.min(s[i] / -d);
            }
        }
        Ok(amax)
    }

    fn feas_residual(&self, x: &SymMatrix) -> f64 {
        let cons = &self.spec.constraints;
        let ineq = if cons.n_ineq() > 0 {
            cons.inequality_violation(x).max(0.0)
        } else {
            0.0
        };
        cons.equality_residual(x).max(ineq)
    }
}

struct Run<'a, 'cb> {
    model: Model<'a>,
    config: &'a SolverConfig,
    x: SymMatrix,
    f: f64,
    steps: Vec<StepRecord>,
    decrements: Vec<DecrementRecord>,
    max_condition: f64,
    regularized: usize,
    progress: &'cb mut dyn FnMut(&StepRecord),
}

enum Gate {
    /// Regular centering; failing to reach the gate is an error.
    Center,
    /// Extra steps after convergence; failures simply stop.
    Polish,
}

impl Run<'_, '_> {
    /// Whether the step after `δ` would land below the resolution of `δ`
    /// itself, estimated from evaluations at `X (1 ± 1e-15)`. At large `β`
    /// rounding in `β ∇f` sets a floor that can exceed the quadratic
    /// prediction `8 δ²`, and polishing further only chases noise.
    fn below_resolution(&self, beta: f64, delta: f64) -> bool {
        let mut noise: f64 = 0.0;
        for s in [1e-15, -1e-15] {
            match self.model.newton(beta, &self.x.scale(1.0 + s)) {
                Ok(st) => noise = noise.max((st.decrement - delta).abs()),
                Err(_) => return true,
            }
        }
        8.0 * delta * delta < 4.0 * noise
    }

    /// Newton steps at fixed `β` until `δ ≤ gate`; returns (steps, final δ).
    ///
    /// Inside the quadratic region `δ ≤ δ*` the full Newton step is taken
    /// (cut back only to stay interior): there the merit decrease is of order
    /// `δ²` and drops below the rounding of `F_β` at large `β`, so a decrease
    /// test would reject good steps. Polishing stops once `δ` stops shrinking or reaches
    /// its resolution.
    fn center(&mut self, beta: f64, outer: usize, gate: f64, cap: usize, kind: Gate) -> Result<(usize, f64)> {
        let mut taken = 0;
        let mut previous = f64::INFINITY;
        loop {
            let step = match self.model.newton(beta, &self.x) {
                Ok(s) => s,
                Err(_) if matches!(kind, Gate::Polish) => return Ok((taken, f64::NAN)),
                Err(e) => return Err(e),
            };
            self.max_condition = self.max_condition.max(step.condition);
            self.regularized += usize::from(step.regularized);
            let delta = step.decrement;
            let rec = DecrementRecord {
                after_step: self.steps.len(),
                outer,
                beta,
                delta,
            };
            // the same point is re-evaluated when polishing starts
            if self.decrements.last().map(|l| (l.after_step, l.outer)) != Some((rec.after_step, outer)) {
                self.decrements.push(rec);
            }
            if delta <= gate {
                return Ok((taken, delta));
            }
            if matches!(kind, Gate::Polish) && (!(delta < previous) || self.below_resolution(beta, delta)) {
                return Ok((taken, delta));
            }
            previous = delta;
            if taken >= cap {
                return match kind {
                    Gate::Polish => Ok((taken, delta)),
                    Gate::Center => Err(Error::IterCap(format!(
                        "centering at β = {beta:.3e} took {cap} steps, δ = {delta:.3e}"
                    ))),
                };
            }
            let amax = self.model.max_step(&self.x, &step)?;
            let x = &self.x;
            let p = &step.direction_x;
            let model = &self.model;
            let full = (self.config.boundary_fraction * amax).min(1.0);
            let quadratic = delta <= self.config.centering_threshold()
                && full > 0.0
                && model.merit(beta, &x.add_scaled(full, p)).is_ok();
            let searched = if quadratic {
                Ok((full, f64::NAN))
            } else {
                let (f0, _) = model.merit(beta, x)?;
                line_search(amax, f0, |a| model.merit(beta, &x.add_scaled(a, p)).map(|v| v.0), self.config)
            };
            let alpha = match searched {
                Ok((a, _)) => a,
                Err(e) => {
                    return match kind {
                        Gate::Polish => Ok((taken, delta)),
                        Gate::Center => Err(e.context(&format!("β = {beta:.3e}, δ = {delta:.3e}"))),
                    }
                }
            };
            self.x = self.x.add_scaled(alpha, p);
            self.f = self.model.spec.objective_value(&self.x)?;
            taken += 1;
            let rec = StepRecord {
                step: self.steps.len() + 1,
                outer,
                beta,
                delta,
                alpha,
                f: self.f,
                feas_residual: self.model.feas_residual(&self.x),
            };
            (self.progress)(&rec);
            self.steps.push(rec);
        }
    }
}

pub fn solve(spec: &ProblemSpec, start: &SymMatrix, config: &SolverConfig) -> Result<SolveReport> {
    solve_with_progress(spec, start, config, &mut |_| {})
}

/// As [`solve`], calling `progress` after every accepted Newton step.
///
/// Errors are returned only for invalid configurations and infeasible
/// starts; iteration caps and numerical failures yield a report with the
/// corresponding termination.
pub fn solve_with_progress(
    spec: &ProblemSpec,
    start: &SymMatrix,
    config: &SolverConfig,
    progress: &mut dyn FnMut(&StepRecord),
) -> Result<SolveReport> {
    config.validate()?;
    spec.check_strictly_feasible(start).map_err(|e| match e {
        Error::Validation(m) => Error::InfeasibleStart(m),
        other => Error::InfeasibleStart(other.to_string()),
    })?;
    let clock = Instant::now();
    let r = config.barrier_param.unwrap_or_else(|| spec.barrier_parameter());
    let (per_outer_cap, total_cap) = iteration_bound(config, r);
    let gate = config.centering_threshold();
    let stop_beta = 4.0 * r / config.epsilon;
    let f_start = spec.objective_value(start)?;

    let mut run = Run {
        model: Model { spec },
        config,
        x: start.clone(),
        f: f_start,
        steps: Vec::new(),
        decrements: Vec::new(),
        max_condition: 0.0,
        regularized: 0,
        progress,
    };
    let mut certificates = Vec::new();
    let mut beta = config.beta0;
    let mut final_delta = f64::NAN;
    let mut outer = 0usize;
    let outcome: Result<()> = (|| {
        loop {
            let (_, delta) = run.center(beta, outer, gate, config.max_inner, Gate::Center)?;
            final_delta = delta;
            certificates.push(gap_certificate(delta, config.kappa, r, beta));
            if beta >= stop_beta {
                break;
            }
            if outer + 1 >= config.max_outer {
                return Err(Error::IterCap(format!(
                    "{} outer iterations, β = {beta:.3e} < {stop_beta:.3e}",
                    config.max_outer
                )));
            }
            outer += 1;
            beta = (1.0 + config.theta).powi(outer as i32) * config.beta0;
        }
        if let Some(tol) = config.polish_tol {
            let (_, delta) = run.center(beta, outer, tol, config.max_polish, Gate::Polish)?;
            if delta.is_finite() {
                final_delta = delta;
                if let Some(c) = certificates.last_mut() {
                    *c = gap_certificate(delta, config.kappa, r, beta);
                }
            }
        }
        Ok(())
    })();

    let (termination, message) = match outcome {
        Ok(()) => (Termination::Converged, None),
        Err(e @ Error::IterCap(_)) => (Termination::IterCap, Some(e.to_string())),
        Err(e) => (Termination::NumericalFailure, Some(e.to_string())),
    };
    // counted from the records so a failed centering keeps its partial count;
    // polish steps carry the last outer index
    let mut inner = vec![0usize; outer + 1];
    for rec in &run.steps {
        inner[rec.outer] += 1;
    }
    let total_newton: usize = inner.iter().sum();
    let max_inner_observed = inner.iter().copied().max().unwrap_or(0);
    let f_min = spec.objective_value(&run.x).unwrap_or(run.f);
    Ok(SolveReport {
        name: spec.name.clone(),
        kind: spec.kind(),
        f_min,
        f_start,
        x_star: run.x.rows(),
        outer_iters: inner.len(),
        inner_iters_per_outer: inner,
        total_newton,
        final_beta: beta,
        final_delta,
        barrier_param: r,
        certificates,
        decrement_trace: run.decrements,
        steps: run.steps,
        bound_check: BoundCheck {
            per_outer_cap,
            total_cap,
            max_inner_observed,
            total_observed: total_newton,
            within_per_outer: max_inner_observed as f64 <= per_outer_cap,
            within_total: total_newton as f64 <= total_cap,
        },
        max_condition: run.max_condition,
        regularized_steps: run.regularized,
        heuristic: !spec.uses_barrier(),
        termination,
        message,
        wall_time: clock.elapsed().as_secs_f64(),
    })
}
