//! Iteration engines: fixed-step (Riemannian) gradient descent, backtracking
//! line-search in stabilized and standard variants, and the proximal point
//! method on Hadamard manifolds.
//!
//! The stabilized line-search starts each iteration's backtracking from the
//! previously accepted step size instead of the initial one, which makes the
//! accepted sequence non-increasing; every accepted value is alpha_bar tau^i
//! with i the cumulative shrink count, computed as such so trajectories can
//! be audited exactly.

use crate::costs::CostModel;
use crate::error::{Error, Result};
use crate::geometry::{ManifoldSpec, Point, RetractionKind, Tangent};
use serde::{Deserialize, Serialize};

/// Parameters of the Armijo backtracking loop.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LineSearchConfig {
    /// Initial step size (the largest candidate ever tried).
    pub alpha_bar: f64,
    /// Geometric decay factor applied on each rejection.
    pub tau: f64,
    /// Sufficient-decrease tolerance.
    pub r: f64,
    /// Shrink cap per iteration; converts pathological costs into an error
    /// instead of a hang.
    #[serde(default = "default_max_shrinks")]
    pub max_shrinks_per_step: u32,
}

fn default_max_shrinks() -> u32 {
    200
}

impl LineSearchConfig {
    pub fn new(alpha_bar: f64, tau: f64, r: f64) -> Result<Self> {
        let cfg = LineSearchConfig {
            alpha_bar,
            tau,
            r,
            max_shrinks_per_step: default_max_shrinks(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::config(format!(
                "line-search invariant τ ∈ (0,1) violated (got τ = {})",
                self.tau
            )));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::config(format!(
                "line-search invariant r ∈ (0,1) violated (got r = {})",
                self.r
            )));
        }
        if !(self.alpha_bar > 0.0) {
            return Err(Error::config(format!(
                "line-search invariant ᾱ > 0 violated (got ᾱ = {})",
                self.alpha_bar
            )));
        }
        if self.max_shrinks_per_step == 0 {
            return Err(Error::config(
                "max_shrinks_per_step must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Termination rule for all runs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StopRule {
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Ambient-norm bound beyond which a trajectory counts as escaped.
    #[serde(default = "default_escape_radius")]
    pub escape_radius: f64,
}

fn default_escape_radius() -> f64 {
    1e6
}

impl StopRule {
    pub fn new(grad_tol: f64, max_iters: usize) -> Result<Self> {
        let rule = StopRule {
            grad_tol,
            max_iters,
            escape_radius: default_escape_radius(),
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::config(format!(
                "stop-rule invariant grad_tol > 0 violated (got {})",
                self.grad_tol
            )));
        }
        if self.max_iters < 1 {
            return Err(Error::config(
                "stop-rule invariant max_iters ≥ 1 violated".to_string(),
            ));
        }
        if !(self.escape_radius > 0.0) {
            return Err(Error::config(format!(
                "stop-rule invariant escape_radius > 0 violated (got {})",
                self.escape_radius
            )));
        }
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradTol,
    MaxIters,
    Escaped,
}

/// Ordered record of a run: iterates, accepted step sizes, gradient norms,
/// and per-iteration shrink counts. Always |points| = |steps| + 1 =
/// |grad_norms|.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<Point>,
    pub steps: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub shrink_counts: Vec<u32>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn final_point(&self) -> &Point {
        self.points
            .last()
            .expect("trajectory has at least one point")
    }

    pub fn iterations(&self) -> usize {
        self.steps.len()
    }
}

enum StepOutcome {
    Continue,
    Stop(Termination),
}

struct Recorder {
    points: Vec<Point>,
    steps: Vec<f64>,
    grad_norms: Vec<f64>,
    shrink_counts: Vec<u32>,
}

impl Recorder {
    fn new(x0: Point) -> Self {
        Recorder {
            points: vec![x0],
            steps: Vec::new(),
            grad_norms: Vec::new(),
            shrink_counts: Vec::new(),
        }
    }

    fn current(&self) -> &Point {
        self.points.last().expect("non-empty")
    }

    /// Returns Stop when the current iterate terminates the run.
    fn observe(&mut self, gn: f64, stop: &StopRule) -> StepOutcome {
        self.grad_norms.push(gn);
        if gn <= stop.grad_tol {
            return StepOutcome::Stop(Termination::GradTol);
        }
        if self.current().coords.norm() > stop.escape_radius {
            return StepOutcome::Stop(Termination::Escaped);
        }
        if self.steps.len() >= stop.max_iters {
            return StepOutcome::Stop(Termination::MaxIters);
        }
        StepOutcome::Continue
    }

    fn accept(&mut self, y: Point, alpha: f64, shrinks: u32) {
        self.points.push(y);
        self.steps.push(alpha);
        self.shrink_counts.push(shrinks);
    }

    fn finish(self, termination: Termination) -> Trajectory {
        Trajectory {
            points: self.points,
            steps: self.steps,
            grad_norms: self.grad_norms,
            shrink_counts: self.shrink_counts,
            termination,
        }
    }
}

/// Gradient descent with a constant step size: x_{t+1} = R_x(-alpha grad f).
pub fn fixed_step_run(
    cost: &CostModel,
    m: &ManifoldSpec,
    retraction: RetractionKind,
    x0: &Point,
    alpha: f64,
    stop: &StopRule,
) -> Result<Trajectory> {
    if !(alpha > 0.0) {
        return Err(Error::config(format!(
            "fixed-step invariant α > 0 violated (got {alpha})"
        )));
    }
    stop.validate()?;
    let mut rec = Recorder::new(x0.clone());
    loop {
        let x = rec.current().clone();
        let g = cost.grad(m, &x);
        let gn = m.norm(&x, &g);
        if let StepOutcome::Stop(term) = rec.observe(gn, stop) {
            return Ok(rec.finish(term));
        }
        let t = rec.steps.len();
        let step = Tangent::new(x.clone(), &g.vec * (-alpha));
        let y = m
            .retract(retraction, &x, &step)
            .map_err(|e| Error::domain(format!("retraction failed at iterate {t}: {e}")))?;
        rec.accept(y, alpha, 0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArmijoVariant {
    /// Each line-search starts from the previously accepted step size.
    Stabilized,
    /// Each line-search restarts from alpha_bar.
    Standard,
}

fn armijo_run(
    cost: &CostModel,
    m: &ManifoldSpec,
    retraction: RetractionKind,
    x0: &Point,
    cfg: &LineSearchConfig,
    stop: &StopRule,
    variant: ArmijoVariant,
) -> Result<Trajectory> {
    cfg.validate()?;
    stop.validate()?;
    let mut rec = Recorder::new(x0.clone());
    // Cumulative shrink exponent: the candidate step is alpha_bar * tau^i.
    let mut exponent: u32 = 0;
    loop {
        let x = rec.current().clone();
        let g = cost.grad(m, &x);
        let gsq = m.inner(&x, &g, &g);
        let gn = gsq.max(0.0).sqrt();
        if let StepOutcome::Stop(term) = rec.observe(gn, stop) {
            return Ok(rec.finish(term));
        }
        let t = rec.steps.len();
        if variant == ArmijoVariant::Standard {
            exponent = 0;
        }
        let f0 = cost.value(m, &x);
        let mut shrinks: u32 = 0;
        loop {
            let alpha = cfg.alpha_bar * cfg.tau.powi(exponent as i32);
            let step = Tangent::new(x.clone(), &g.vec * (-alpha));
            let y = m
                .retract(retraction, &x, &step)
                .map_err(|e| Error::domain(format!("retraction failed at iterate {t}: {e}")))?;
            let f1 = cost.value(m, &y);
            // Algorithm's while-condition: shrink strictly below sufficient
            // decrease, so exact ties accept the candidate.
            if f0 - f1 < cfg.r * alpha * gsq {
                shrinks += 1;
                exponent += 1;
                if shrinks > cfg.max_shrinks_per_step {
                    return Err(Error::LineSearchFailure {
                        iter: t,
                        alpha,
                        shrinks,
                    });
                }
                continue;
            }
            rec.accept(y, alpha, shrinks);
            break;
        }
    }
}

/// Gradient descent with the stabilized Armijo backtracking line-search:
/// each iteration's search starts at the previously accepted step size, so
/// accepted steps are non-increasing.
pub fn stabilized_armijo_run(
    cost: &CostModel,
    m: &ManifoldSpec,
    retraction: RetractionKind,
    x0: &Point,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<Trajectory> {
    armijo_run(
        cost,
        m,
        retraction,
        x0,
        cfg,
        stop,
        ArmijoVariant::Stabilized,
    )
}

/// Standard Armijo backtracking: candidates restart at alpha_bar every
/// iteration; accepted steps need not be monotone.
pub fn standard_armijo_run(
    cost: &CostModel,
    m: &ManifoldSpec,
    retraction: RetractionKind,
    x0: &Point,
    cfg: &LineSearchConfig,
    stop: &StopRule,
) -> Result<Trajectory> {
    armijo_run(cost, m, retraction, x0, cfg, stop, ArmijoVariant::Standard)
}

/// One proximal step: minimize q(z) = f(z) + dist(x, z)^2 / (2 alpha) by
/// Riemannian gradient descent with fixed step 1/(L + 1/alpha), stopping when
/// the first-order residual |alpha grad f(z) - Log_z(x)| drops to inner_tol.
///
/// Returns the minimizer and the number of inner iterations.
pub fn proximal_step(
    cost: &CostModel,
    m: &ManifoldSpec,
    x: &Point,
    alpha: f64,
    inner_tol: f64,
    outer_iter: usize,
) -> Result<(Point, usize)> {
    let l = cost.lipschitz.ok_or_else(|| {
        Error::config("proximal point requires a cost with a Lipschitz constant".to_string())
    })?;
    let inner_step = 1.0 / (l + 1.0 / alpha);
    let max_inner = 200_000;
    let mut z = x.clone();
    for k in 0..max_inner {
        let gf = cost.grad(m, &z);
        let back = m.log_map(&z, x)?;
        let residual_vec = &gf.vec * alpha - &back.vec;
        let residual = m.norm_raw(&z, &residual_vec);
        if residual <= inner_tol {
            return Ok((z, k));
        }
        // grad q(z) = grad f(z) - Log_z(x) / alpha = residual_vec / alpha
        let step = Tangent::new(z.clone(), &residual_vec * (-inner_step / alpha));
        z = m.exp(&z, &step)?;
    }
    let gf = cost.grad(m, &z);
    let back = m.log_map(&z, x)?;
    let residual = m.norm_raw(&z, &(&gf.vec * alpha - &back.vec));
    Err(Error::InnerSolverFailure {
        iter: outer_iter,
        residual,
        inner_iters: max_inner,
    })
}

/// Proximal point method x_{k+1} = argmin_z f(z) + dist(x_k, z)^2 / (2 alpha)
/// on Hadamard manifolds with 0 < alpha < 1/L, where the inner objective is
/// strongly geodesically convex.
pub fn proximal_point_run(
    cost: &CostModel,
    m: &ManifoldSpec,
    x0: &Point,
    alpha: f64,
    stop: &StopRule,
    inner_tol: f64,
) -> Result<Trajectory> {
    if !m.is_hadamard() {
        return Err(Error::config(
            "proximal point method requires a Hadamard manifold".to_string(),
        ));
    }
    let l = cost.lipschitz.ok_or_else(|| {
        Error::config("proximal point requires a cost with a Lipschitz constant".to_string())
    })?;
    if !(alpha > 0.0 && alpha < 1.0 / l) {
        return Err(Error::config(format!(
            "proximal step size must satisfy 0 < α < 1/L (got α = {alpha}, 1/L = {})",
            1.0 / l
        )));
    }
    stop.validate()?;
    let mut rec = Recorder::new(x0.clone());
    loop {
        let x = rec.current().clone();
        let g = cost.grad(m, &x);
        let gn = m.norm(&x, &g);
        if let StepOutcome::Stop(term) = rec.observe(gn, stop) {
            return Ok(rec.finish(term));
        }
        let t = rec.steps.len();
        let (y, _) = proximal_step(cost, m, &x, alpha, inner_tol, t)?;
        rec.accept(y, alpha, 0);
    }
}
