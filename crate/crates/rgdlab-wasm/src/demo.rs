//! JSON-in / JSON-out demo operations, independent of wasm so they can be
//! tested on the host.

use nalgebra::DVector;
use rgdlab::analysis::{
    determinant_curve, singular_alpha_scan, step_size_bound, BoundRegime, MapKind,
};
use rgdlab::costs::{classify_critical_point, default_tol_g, CostSpec};
use rgdlab::experiments::{classify_limit, ClassifyTolerances};
use rgdlab::geometry::{ManifoldSpec, Point, RetractionKind};
use rgdlab::optimizers::{
    fixed_step_run, stabilized_armijo_run, standard_armijo_run, LineSearchConfig, StopRule,
    Trajectory,
};
use serde::{Deserialize, Serialize};

#[derive(Deserialize)]
struct PlaneRequest {
    x0: [f64; 2],
    /// "fixed", "stabilized" or "standard".
    #[serde(default = "default_algorithm")]
    algorithm: String,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_tau")]
    tau: f64,
    #[serde(default = "default_r")]
    r: f64,
    #[serde(default = "default_iters")]
    max_iters: usize,
    /// Step-size range for the determinant curve at x0.
    #[serde(default = "default_alpha_max")]
    scan_alpha_max: f64,
}

fn default_algorithm() -> String {
    "fixed".to_string()
}
fn default_alpha() -> f64 {
    1.0
}
fn default_tau() -> f64 {
    0.5
}
fn default_r() -> f64 {
    0.5
}
fn default_iters() -> usize {
    400
}
fn default_alpha_max() -> f64 {
    2.0
}

#[derive(Serialize)]
struct PlaneResponse {
    points: Vec<[f64; 2]>,
    steps: Vec<f64>,
    grad_norms: Vec<f64>,
    termination: String,
    classification: String,
    value_at_limit: f64,
    scan_alphas: Vec<f64>,
    det_curve: Vec<[f64; 2]>,
    singular_alphas: Vec<f64>,
}

fn run_with(
    cost: &rgdlab::costs::CostModel,
    m: &ManifoldSpec,
    retraction: RetractionKind,
    x0: &Point,
    req_algorithm: &str,
    alpha: f64,
    tau: f64,
    r: f64,
    max_iters: usize,
) -> Result<Trajectory, String> {
    let stop = StopRule {
        grad_tol: 1e-9,
        max_iters,
        escape_radius: 1e6,
    };
    let traj = match req_algorithm {
        "fixed" => fixed_step_run(cost, m, retraction, x0, alpha, &stop),
        "stabilized" => {
            let cfg = LineSearchConfig::new(alpha, tau, r).map_err(|e| e.to_string())?;
            stabilized_armijo_run(cost, m, retraction, x0, &cfg, &stop)
        }
        "standard" => {
            let cfg = LineSearchConfig::new(alpha, tau, r).map_err(|e| e.to_string())?;
            standard_armijo_run(cost, m, retraction, x0, &cfg, &stop)
        }
        other => return Err(format!("unknown algorithm '{other}'")),
    };
    traj.map_err(|e| e.to_string())
}

/// Descent on the interpolated counterexample cost in the plane, plus the
/// determinant curve of alpha -> det D g_alpha(x0).
pub fn run_plane(config: &str) -> Result<String, String> {
    let req: PlaneRequest = serde_json::from_str(config).map_err(|e| e.to_string())?;
    let m = ManifoldSpec::euclidean(2);
    let cost = CostSpec::Interp2d.build().map_err(|e| e.to_string())?;
    let x0 = Point::from_slice(&req.x0);
    let traj = run_with(
        &cost,
        &m,
        RetractionKind::Exponential,
        &x0,
        &req.algorithm,
        req.alpha,
        req.tau,
        req.r,
        req.max_iters,
    )?;
    let outcome = classify_limit(&traj, &cost, &m, &ClassifyTolerances::default());

    let map = MapKind::FixedStep {
        retraction: RetractionKind::Exponential,
    };
    let grid: Vec<f64> = (1..=160)
        .map(|i| req.scan_alpha_max * i as f64 / 160.0)
        .collect();
    let dets = determinant_curve(&cost, &m, map, &x0, &grid);
    let scan = singular_alpha_scan(&cost, &m, map, &x0, req.scan_alpha_max, 256)
        .map_err(|e| e.to_string())?;

    let limit = traj.final_point().clone();
    let response = PlaneResponse {
        points: traj
            .points
            .iter()
            .map(|p| [p.coords[0], p.coords[1]])
            .collect(),
        steps: traj.steps.clone(),
        grad_norms: traj.grad_norms.clone(),
        termination: format!("{:?}", traj.termination),
        classification: format!("{:?}", outcome.classification),
        value_at_limit: cost.value(&m, &limit),
        scan_alphas: grid.clone(),
        det_curve: grid
            .iter()
            .zip(dets.iter())
            .map(|(&a, &d)| [a, d])
            .collect(),
        singular_alphas: scan.alphas,
    };
    serde_json::to_string(&response).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
struct SphereRequest {
    /// Start point; normalized onto the sphere.
    x0: [f64; 3],
    #[serde(default = "default_sphere_alpha")]
    alpha: f64,
    /// "exponential" or "projection".
    #[serde(default = "default_retraction")]
    retraction: String,
    #[serde(default = "default_algorithm")]
    algorithm: String,
    #[serde(default = "default_tau")]
    tau: f64,
    #[serde(default = "default_r")]
    r: f64,
    #[serde(default = "default_iters")]
    max_iters: usize,
}

fn default_sphere_alpha() -> f64 {
    0.225
}
fn default_retraction() -> String {
    "projection".to_string()
}

#[derive(Serialize)]
struct SphereResponse {
    points: Vec<[f64; 3]>,
    steps: Vec<f64>,
    grad_norms: Vec<f64>,
    termination: String,
    classification: String,
    limit: [f64; 3],
    limit_label: String,
}

/// Descent for the Rayleigh quotient of diag(1, 2, 3) on the unit sphere.
pub fn run_sphere(config: &str) -> Result<String, String> {
    let req: SphereRequest = serde_json::from_str(config).map_err(|e| e.to_string())?;
    let m = ManifoldSpec::sphere(2);
    let cost = CostSpec::Rayleigh {
        matrix: vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 3.0],
        ],
    }
    .build()
    .map_err(|e| e.to_string())?;
    let raw = DVector::from_column_slice(&req.x0);
    if raw.norm() < 1e-9 {
        return Err("start point must be nonzero".to_string());
    }
    let x0 = m.metric_project(&raw).map_err(|e| e.to_string())?;
    let retraction = match req.retraction.as_str() {
        "exponential" => RetractionKind::Exponential,
        "projection" => RetractionKind::Projection,
        other => return Err(format!("unknown retraction '{other}'")),
    };
    let traj = run_with(
        &cost,
        &m,
        retraction,
        &x0,
        &req.algorithm,
        req.alpha,
        req.tau,
        req.r,
        req.max_iters,
    )?;
    let outcome = classify_limit(&traj, &cost, &m, &ClassifyTolerances::default());
    let limit = traj.final_point().clone();
    let label = classify_critical_point(&cost, &m, &limit, default_tol_g(&cost, &m, &limit), 1e-6);
    let response = SphereResponse {
        points: traj
            .points
            .iter()
            .map(|p| [p.coords[0], p.coords[1], p.coords[2]])
            .collect(),
        steps: traj.steps.clone(),
        grad_norms: traj.grad_norms.clone(),
        termination: format!("{:?}", traj.termination),
        classification: format!("{:?}", outcome.classification),
        limit: [limit.coords[0], limit.coords[1], limit.coords[2]],
        limit_label: format!("{label:?}"),
    };
    serde_json::to_string(&response).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
struct BoundsRequest {
    #[serde(default = "default_l")]
    l: f64,
    #[serde(default = "default_g")]
    g: f64,
    #[serde(default = "default_j")]
    j: f64,
    /// K_max sweep endpoints (log-spaced).
    #[serde(default = "default_k_lo")]
    k_lo: f64,
    #[serde(default = "default_k_hi")]
    k_hi: f64,
    #[serde(default = "default_samples")]
    samples: usize,
}

fn default_l() -> f64 {
    1.0
}
fn default_g() -> f64 {
    1.0
}
fn default_j() -> f64 {
    std::f64::consts::PI
}
fn default_k_lo() -> f64 {
    1e-4
}
fn default_k_hi() -> f64 {
    1e2
}
fn default_samples() -> usize {
    200
}

#[derive(Serialize)]
struct BoundsResponse {
    /// (K_max, alpha_max) pairs for the positive-curvature formula.
    curve: Vec<[f64; 2]>,
    hadamard: f64,
    /// alpha_max on St(n, p) for p = 1..8.
    stiefel: Vec<[f64; 2]>,
}

/// Guaranteed step-size intervals across a curvature sweep.
pub fn bounds_curve(config: &str) -> Result<String, String> {
    let req: BoundsRequest = serde_json::from_str(config).map_err(|e| e.to_string())?;
    if !(req.k_lo > 0.0 && req.k_hi > req.k_lo && req.samples >= 2) {
        return Err("need 0 < k_lo < k_hi and at least 2 samples".to_string());
    }
    let mut curve = Vec::with_capacity(req.samples);
    let ratio = (req.k_hi / req.k_lo).ln();
    for i in 0..req.samples {
        let k = req.k_lo * (ratio * i as f64 / (req.samples - 1) as f64).exp();
        let b = step_size_bound(BoundRegime::PositiveCurvature {
            l: req.l,
            g: req.g,
            j: req.j,
            k_max: k,
        })
        .map_err(|e| e.to_string())?;
        curve.push([k, b.alpha_max]);
    }
    let hadamard = step_size_bound(BoundRegime::Hadamard { l: req.l })
        .map_err(|e| e.to_string())?
        .alpha_max;
    let stiefel = (1..=8)
        .map(|p| {
            step_size_bound(BoundRegime::Stiefel { l: req.l, p })
                .map(|b| [p as f64, b.alpha_max])
                .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let response = BoundsResponse {
        curve,
        hadamard,
        stiefel,
    };
    serde_json::to_string(&response).map_err(|e| e.to_string())
}
