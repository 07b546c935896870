//! Monte Carlo saddle-avoidance harness: sample initializations, run the
//! configured algorithm, classify limits, audit step stabilization, and
//! aggregate reports.
//!
//! Runs are deterministic given the plan: run i draws from a ChaCha8 stream
//! derived from (seed, i), so scheduling and worker counts cannot change any
//! result. Per-run failures are recorded, never abort the batch.

use crate::costs::{self, classify_critical_point, CostModel, CostSpec, CriticalClass};
use crate::error::{Error, Result};
use crate::geometry::{ManifoldKind, ManifoldSpec, Point, RetractionKind};
use crate::optimizers::{
    fixed_step_run, proximal_point_run, stabilized_armijo_run, standard_armijo_run,
    LineSearchConfig, StopRule, Termination, Trajectory,
};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How initial points are drawn.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    /// Ambient Gaussian with scale sigma, projected / normalized / lifted
    /// onto the manifold.
    GaussianAmbientProjected { sigma: f64 },
    /// Uniform on the sphere (blockwise on products of spheres).
    UniformSphere,
    /// Uniform on the Euclidean annulus r_lo <= |x| <= r_hi.
    UniformAnnulus { r_lo: f64, r_hi: f64 },
    /// Explicit list, cycled by run index.
    ListedPoints { points: Vec<Vec<f64>> },
}

/// Which algorithm a plan runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    FixedStep {
        retraction: RetractionKind,
        alpha: f64,
    },
    StabilizedArmijo {
        retraction: RetractionKind,
        #[serde(flatten)]
        config: LineSearchConfig,
    },
    StandardArmijo {
        retraction: RetractionKind,
        #[serde(flatten)]
        config: LineSearchConfig,
    },
    ProximalPoint {
        alpha: f64,
        #[serde(default = "default_inner_tol")]
        inner_tol: f64,
    },
}

fn default_inner_tol() -> f64 {
    1e-10
}

impl AlgorithmSpec {
    fn is_line_search(&self) -> bool {
        matches!(
            self,
            AlgorithmSpec::StabilizedArmijo { .. } | AlgorithmSpec::StandardArmijo { .. }
        )
    }

    fn validate(&self) -> Result<()> {
        match self {
            AlgorithmSpec::FixedStep { alpha, .. } => {
                if !(*alpha > 0.0) {
                    return Err(Error::config(format!(
                        "fixed-step invariant α > 0 violated (got {alpha})"
                    )));
                }
            }
            AlgorithmSpec::StabilizedArmijo { config, .. }
            | AlgorithmSpec::StandardArmijo { config, .. } => config.validate()?,
            AlgorithmSpec::ProximalPoint { alpha, inner_tol } => {
                if !(*alpha > 0.0) || !(*inner_tol > 0.0) {
                    return Err(Error::config(
                        "proximal point needs positive α and inner_tol".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Classification tolerances and the convergence-window proxy.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyTolerances {
    /// Gradient tolerance; when absent, the scale-aware default
    /// 1e-8 (1 + |f(x)|) applies.
    #[serde(default)]
    pub tol_g: Option<f64>,
    #[serde(default = "default_tol_lambda")]
    pub tol_lambda: f64,
    /// Number of trailing iterates that must cluster for a max-iters run to
    /// count as converged.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_conv_tol")]
    pub conv_tol: f64,
}

fn default_tol_lambda() -> f64 {
    costs::DEFAULT_TOL_LAMBDA
}

fn default_window() -> usize {
    20
}

fn default_conv_tol() -> f64 {
    1e-7
}

impl Default for ClassifyTolerances {
    fn default() -> Self {
        ClassifyTolerances {
            tol_g: None,
            tol_lambda: default_tol_lambda(),
            window: default_window(),
            conv_tol: default_conv_tol(),
        }
    }
}

/// A complete, reproducible experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub cost: CostSpec,
    pub manifold: ManifoldKind,
    pub algorithm: AlgorithmSpec,
    pub sampler: SamplerSpec,
    pub num_runs: usize,
    pub seed: u64,
    pub stop: StopRule,
    #[serde(default)]
    pub classify: ClassifyTolerances,
}

impl ExperimentPlan {
    /// Validate everything before any computation starts.
    pub fn validate(&self) -> Result<(CostModel, ManifoldSpec)> {
        if self.num_runs < 1 {
            return Err(Error::config(
                "plan invariant num_runs ≥ 1 violated".to_string(),
            ));
        }
        let m = ManifoldSpec::from_kind(self.manifold.clone());
        let cost = self.cost.build()?;
        cost.compatible_with(&m)?;
        self.algorithm.validate()?;
        self.stop.validate()?;
        self.validate_sampler(&m)?;
        Ok((cost, m))
    }

    fn validate_sampler(&self, m: &ManifoldSpec) -> Result<()> {
        match &self.sampler {
            SamplerSpec::GaussianAmbientProjected { sigma } => {
                if !(*sigma > 0.0) {
                    return Err(Error::config("sampler sigma must be positive".to_string()));
                }
                Ok(())
            }
            SamplerSpec::UniformSphere => match m.kind {
                ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => Ok(()),
                _ => Err(Error::config(
                    "uniform_sphere sampler requires a sphere-like manifold".to_string(),
                )),
            },
            SamplerSpec::UniformAnnulus { r_lo, r_hi } => {
                if !matches!(m.kind, ManifoldKind::Euclidean { .. }) {
                    return Err(Error::config(
                        "uniform_annulus sampler is Euclidean-only".to_string(),
                    ));
                }
                if !(*r_lo >= 0.0 && r_hi > r_lo) {
                    return Err(Error::config(format!(
                        "annulus needs 0 ≤ r_lo < r_hi (got {r_lo}, {r_hi})"
                    )));
                }
                Ok(())
            }
            SamplerSpec::ListedPoints { points } => {
                if points.is_empty() {
                    return Err(Error::config("listed_points must be non-empty".to_string()));
                }
                for (i, coords) in points.iter().enumerate() {
                    m.check_point(&Point::from_slice(coords))
                        .map_err(|e| Error::config(format!("listed point {i} invalid: {e}")))?;
                }
                Ok(())
            }
        }
    }
}

/// Outcome classification of a single run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    ConvergedToStrictSaddle,
    ConvergedToOther,
    Escaped,
    Undecided,
}

/// Classification of a trajectory's limit, with the evidence attached.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub classification: Classification,
    /// Present exactly when the classification is one of the Converged variants.
    pub limit_point: Option<Point>,
    pub iterations: usize,
    pub final_step: Option<f64>,
    /// First index after which the accepted step never changes; set for
    /// line-search runs.
    pub stabilization_index: Option<usize>,
}

/// Aggregated batch report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AvoidanceReport {
    pub num_runs: usize,
    pub seed: u64,
    pub counts: ClassCounts,
    pub run_errors: usize,
    pub fraction_to_strict_saddle: f64,
    /// Wilson 95% confidence interval for the strict-saddle fraction.
    pub wilson95: (f64, f64),
    pub per_run: Vec<PerRunSummary>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct ClassCounts {
    pub converged_to_strict_saddle: usize,
    pub converged_to_other: usize,
    pub escaped: usize,
    pub undecided: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.converged_to_strict_saddle + self.converged_to_other + self.escaped + self.undecided
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PerRunSummary {
    pub run: usize,
    /// ChaCha stream index used for this run's randomness.
    pub stream: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Full batch result: the serializable report plus the in-memory outcomes.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub report: AvoidanceReport,
    pub outcomes: Vec<std::result::Result<RunOutcome, String>>,
}

/// Wilson 95% score interval for k successes out of n.
pub fn wilson95(k: usize, n: usize) -> (f64, f64) {
    assert!(n > 0 && k <= n);
    let z = 1.959963984540054_f64;
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Draw an initial point for the given run stream.
fn sample_point(
    sampler: &SamplerSpec,
    m: &ManifoldSpec,
    rng: &mut ChaCha8Rng,
    run_index: usize,
) -> Result<Point> {
    let gaussian = |rng: &mut ChaCha8Rng, len: usize, sigma: f64| -> DVector<f64> {
        DVector::from_fn(len, |_, _| {
            let g: f64 = rng.sample(rand_distr::StandardNormal);
            sigma * g
        })
    };
    match sampler {
        SamplerSpec::GaussianAmbientProjected { sigma } => match &m.kind {
            ManifoldKind::Euclidean { n } => Ok(Point::new(gaussian(rng, *n, *sigma))),
            ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => {
                project_blockwise(m, gaussian(rng, m.ambient_dim, *sigma))
            }
            ManifoldKind::Stiefel { n, p } => {
                for _ in 0..8 {
                    let raw = gaussian(rng, n * p, *sigma);
                    if let Ok(pt) = m.metric_project(&raw) {
                        return Ok(pt);
                    }
                }
                Err(Error::domain(
                    "failed to project a Gaussian matrix onto the Stiefel manifold".to_string(),
                ))
            }
            ManifoldKind::Hyperbolic { n } => {
                let spatial = gaussian(rng, *n, *sigma);
                let mut coords = DVector::zeros(n + 1);
                coords[0] = (1.0 + spatial.norm_squared()).sqrt();
                coords.rows_mut(1, *n).copy_from(&spatial);
                Ok(Point::new(coords))
            }
        },
        SamplerSpec::UniformSphere => project_blockwise(m, gaussian(rng, m.ambient_dim, 1.0)),
        SamplerSpec::UniformAnnulus { r_lo, r_hi } => {
            let n = m.ambient_dim;
            let mut dir = gaussian(rng, n, 1.0);
            let mut norm = dir.norm();
            while norm < 1e-12 {
                dir = gaussian(rng, n, 1.0);
                norm = dir.norm();
            }
            dir /= norm;
            let u: f64 = rng.gen();
            let nf = n as f64;
            let radius = (r_lo.powf(nf) + u * (r_hi.powf(nf) - r_lo.powf(nf))).powf(1.0 / nf);
            Ok(Point::new(dir * radius))
        }
        SamplerSpec::ListedPoints { points } => {
            Ok(Point::from_slice(&points[run_index % points.len()]))
        }
    }
}

/// Normalize each sphere block of a raw ambient Gaussian.
fn project_blockwise(m: &ManifoldSpec, mut raw: DVector<f64>) -> Result<Point> {
    let blocks: Vec<(usize, usize)> = match &m.kind {
        ManifoldKind::Sphere { d } => vec![(0, d + 1)],
        ManifoldKind::ProductSpheres { ds } => {
            let mut out = Vec::new();
            let mut off = 0;
            for &d in ds {
                out.push((off, d + 1));
                off += d + 1;
            }
            out
        }
        _ => unreachable!("blockwise projection on non-sphere kind"),
    };
    for (off, len) in blocks {
        let mut norm = raw.rows(off, len).norm();
        if norm < 1e-12 {
            raw[off] = 1.0;
            norm = raw.rows(off, len).norm();
        }
        let scaled = raw.rows(off, len).into_owned() / norm;
        raw.rows_mut(off, len).copy_from(&scaled);
    }
    Ok(Point::new(raw))
}

/// Dispatch a single run of the configured algorithm.
pub fn run_algorithm_on(
    alg: &AlgorithmSpec,
    cost: &CostModel,
    m: &ManifoldSpec,
    x0: &Point,
    stop: &StopRule,
) -> Result<Trajectory> {
    match alg {
        AlgorithmSpec::FixedStep { retraction, alpha } => {
            fixed_step_run(cost, m, *retraction, x0, *alpha, stop)
        }
        AlgorithmSpec::StabilizedArmijo { retraction, config } => {
            stabilized_armijo_run(cost, m, *retraction, x0, config, stop)
        }
        AlgorithmSpec::StandardArmijo { retraction, config } => {
            standard_armijo_run(cost, m, *retraction, x0, config, stop)
        }
        AlgorithmSpec::ProximalPoint { alpha, inner_tol } => {
            proximal_point_run(cost, m, x0, *alpha, stop, *inner_tol)
        }
    }
}

/// Reproduce run `i` of a plan exactly as the batch would execute it.
pub fn single_trajectory(
    plan: &ExperimentPlan,
    cost: &CostModel,
    m: &ManifoldSpec,
    i: usize,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(i as u64);
    let x0 = sample_point(&plan.sampler, m, &mut rng, i)?;
    run_algorithm_on(&plan.algorithm, cost, m, &x0, &plan.stop)
}

/// Classify the limit of a finished trajectory.
///
/// Escaped runs keep their termination label; max-iteration runs without a
/// clustered tail stay Undecided; everything else takes the final iterate as
/// limit proxy and labels it through `classify_critical_point`.
pub fn classify_limit(
    traj: &Trajectory,
    cost: &CostModel,
    m: &ManifoldSpec,
    tols: &ClassifyTolerances,
) -> RunOutcome {
    let iterations = traj.iterations();
    let final_step = traj.steps.last().copied();
    match traj.termination {
        Termination::Escaped => RunOutcome {
            classification: Classification::Escaped,
            limit_point: None,
            iterations,
            final_step,
            stabilization_index: None,
        },
        Termination::MaxIters if !window_converged(traj, m, tols) => RunOutcome {
            classification: Classification::Undecided,
            limit_point: None,
            iterations,
            final_step,
            stabilization_index: None,
        },
        _ => {
            let x = traj.final_point();
            let tol_g = tols
                .tol_g
                .unwrap_or_else(|| costs::default_tol_g(cost, m, x));
            let class = classify_critical_point(cost, m, x, tol_g, tols.tol_lambda);
            let classification = match class {
                CriticalClass::StrictSaddle => Classification::ConvergedToStrictSaddle,
                _ => Classification::ConvergedToOther,
            };
            RunOutcome {
                classification,
                limit_point: Some(x.clone()),
                iterations,
                final_step,
                stabilization_index: None,
            }
        }
    }
}

fn window_converged(traj: &Trajectory, m: &ManifoldSpec, tols: &ClassifyTolerances) -> bool {
    let n = traj.points.len();
    let w = tols.window.min(n);
    if w < 2 {
        return true;
    }
    let tail = &traj.points[n - w..];
    for i in 0..w {
        for j in i + 1..w {
            match m.distance(&tail[i], &tail[j]) {
                Ok(d) if d <= tols.conv_tol => {}
                _ => return false,
            }
        }
    }
    true
}

/// Result of auditing a step sequence for stabilization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilizationAudit {
    /// Whether the recorded sequence is eventually constant.
    pub stabilized: bool,
    /// First index after which the step never changes.
    pub index: Option<usize>,
    pub final_alpha: Option<f64>,
}

/// Find the first index K such that steps[K..] is constant.
pub fn step_stabilization_audit(traj: &Trajectory) -> StabilizationAudit {
    let steps = &traj.steps;
    if steps.is_empty() {
        return StabilizationAudit {
            stabilized: true,
            index: Some(0),
            final_alpha: None,
        };
    }
    let last = *steps.last().expect("non-empty");
    let mut k = steps.len() - 1;
    while k > 0 && steps[k - 1] == last {
        k -= 1;
    }
    StabilizationAudit {
        stabilized: true,
        index: Some(k),
        final_alpha: Some(last),
    }
}

/// Run the whole plan. Deterministic given the seed: run i derives its
/// randomness from ChaCha8 stream i; results are reduced in run order.
pub fn monte_carlo_avoidance(plan: &ExperimentPlan) -> Result<BatchResult> {
    let (cost, m) = plan.validate()?;
    let outcomes: Vec<std::result::Result<RunOutcome, String>> = (0..plan.num_runs)
        .into_par_iter()
        .map(|i| {
            let traj = single_trajectory(plan, &cost, &m, i).map_err(|e| e.to_string())?;
            let mut outcome = classify_limit(&traj, &cost, &m, &plan.classify);
            if plan.algorithm.is_line_search() {
                let audit = step_stabilization_audit(&traj);
                outcome.stabilization_index = audit.index;
            }
            Ok(outcome)
        })
        .collect();

    let mut counts = ClassCounts::default();
    let mut run_errors = 0usize;
    let mut per_run = Vec::with_capacity(plan.num_runs);
    for (i, res) in outcomes.iter().enumerate() {
        match res {
            Ok(out) => {
                match out.classification {
                    Classification::ConvergedToStrictSaddle => {
                        counts.converged_to_strict_saddle += 1
                    }
                    Classification::ConvergedToOther => counts.converged_to_other += 1,
                    Classification::Escaped => counts.escaped += 1,
                    Classification::Undecided => counts.undecided += 1,
                }
                per_run.push(PerRunSummary {
                    run: i,
                    stream: i as u64,
                    classification: Some(out.classification),
                    error: None,
                });
            }
            Err(e) => {
                run_errors += 1;
                per_run.push(PerRunSummary {
                    run: i,
                    stream: i as u64,
                    classification: None,
                    error: Some(e.clone()),
                });
            }
        }
    }
    let k = counts.converged_to_strict_saddle;
    let report = AvoidanceReport {
        num_runs: plan.num_runs,
        seed: plan.seed,
        counts,
        run_errors,
        fraction_to_strict_saddle: k as f64 / plan.num_runs as f64,
        wilson95: wilson95(k, plan.num_runs),
        per_run,
    };
    Ok(BatchResult { report, outcomes })
}
