//! Iteration-map differentials (finite-difference and closed forms),
//! singular step-size scans, spectral instability checks, and the
//! step-size bound formulas.
//!
//! A differential Dg(x) maps the tangent space at x to the tangent space at
//! g(x). Its matrix is expressed in the canonical `tangent_frame(x)` at the
//! source and the parallel transport of that frame (along the connecting
//! geodesic) at the target, which keeps the determinant continuous in both
//! x and the step size.

use crate::costs::{self, CostModel};
use crate::error::{Error, Result};
use crate::geometry::{Frame, ManifoldKind, ManifoldSpec, Point, RetractionKind, Tangent};
use crate::optimizers::proximal_step;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Which iteration map is analyzed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum MapKind {
    FixedStep { retraction: RetractionKind },
    ProximalPoint,
}

/// Inner-solver tolerance used when differentiating the proximal map.
const PROX_INNER_TOL: f64 = 1e-12;

/// How a differential was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffMethod {
    FiniteDifference,
    ClosedFormEuclidean,
    ClosedFormJacobi,
    ClosedFormCritical,
}

/// Matrix of Dg(x) together with the frames it is expressed in.
#[derive(Debug, Clone)]
pub struct DifferentialMatrix {
    pub source_frame: Frame,
    pub target_frame: Frame,
    pub entries: DMatrix<f64>,
    pub method: DiffMethod,
}

/// Evaluate the iteration map g_alpha at x.
pub fn apply_map(
    cost: &CostModel,
    m: &ManifoldSpec,
    map_kind: MapKind,
    x: &Point,
    alpha: f64,
) -> Result<Point> {
    match map_kind {
        MapKind::FixedStep { retraction } => {
            let g = cost.grad(m, x);
            let step = Tangent::new(x.clone(), &g.vec * (-alpha));
            m.retract(retraction, x, &step)
        }
        MapKind::ProximalPoint => {
            let (y, _) = proximal_step(cost, m, x, alpha, PROX_INNER_TOL, 0)?;
            Ok(y)
        }
    }
}

/// Differential of the iteration map at `x`.
pub fn iteration_map_differential(
    cost: &CostModel,
    m: &ManifoldSpec,
    map_kind: MapKind,
    x: &Point,
    alpha: f64,
    method: DiffMethod,
) -> Result<DifferentialMatrix> {
    match method {
        DiffMethod::FiniteDifference => fd_differential(cost, m, map_kind, x, alpha),
        DiffMethod::ClosedFormEuclidean => {
            if !matches!(m.kind, ManifoldKind::Euclidean { .. }) {
                return Err(Error::config(
                    "ClosedFormEuclidean requires a Euclidean manifold".to_string(),
                ));
            }
            if !matches!(map_kind, MapKind::FixedStep { .. }) {
                return Err(Error::config(
                    "ClosedFormEuclidean applies to the fixed-step map only".to_string(),
                ));
            }
            if !cost.has_hess_action(m) {
                return Err(Error::config(
                    "ClosedFormEuclidean requires an available Hessian".to_string(),
                ));
            }
            let h = costs::hessian_matrix(cost, m, x);
            let entries = DMatrix::identity(m.dim, m.dim) - &h * alpha;
            let source = m.tangent_frame(x);
            let gx = apply_map(cost, m, map_kind, x, alpha)?;
            let target = Frame {
                base: gx,
                basis: source.basis.clone(),
            };
            Ok(DifferentialMatrix {
                source_frame: source,
                target_frame: target,
                entries,
                method,
            })
        }
        DiffMethod::ClosedFormJacobi => {
            match m.kind {
                ManifoldKind::Euclidean { .. }
                | ManifoldKind::Sphere { .. }
                | ManifoldKind::ProductSpheres { .. }
                | ManifoldKind::Hyperbolic { .. } => {}
                _ => {
                    return Err(Error::config(
                        "ClosedFormJacobi requires a constant-curvature manifold".to_string(),
                    ))
                }
            }
            if !matches!(
                map_kind,
                MapKind::FixedStep {
                    retraction: RetractionKind::Exponential
                }
            ) {
                return Err(Error::config(
                    "ClosedFormJacobi applies to the exponential-retraction map".to_string(),
                ));
            }
            let g = cost.grad(m, x);
            let r = alpha * m.norm(x, &g);
            if r >= m.injectivity_radius {
                return Err(Error::config(format!(
                    "ClosedFormJacobi requires α |grad f(x)| < inj (got {r})"
                )));
            }
            let v = Tangent::new(x.clone(), &g.vec * (-alpha));
            let y = m.exp(x, &v)?;
            let (j0, _) = m.jacobi_endpoints(x, &v)?;
            let hess_h = m.hess_half_sq_dist(x, &y)?;
            let hess_f = costs::hessian_matrix(cost, m, x);
            let entries = j0 * (hess_h - hess_f * alpha);
            let source = m.tangent_frame(x);
            let target = m.transport_frame(&source, &y)?;
            Ok(DifferentialMatrix {
                source_frame: source,
                target_frame: target,
                entries,
                method,
            })
        }
        DiffMethod::ClosedFormCritical => {
            let gn = m.norm(x, &cost.grad(m, x));
            let tol = costs::default_tol_g(cost, m, x);
            if gn > tol {
                return Err(Error::config(format!(
                    "ClosedFormCritical requires a critical point (|grad| = {gn:e})"
                )));
            }
            let h = costs::hessian_matrix(cost, m, x);
            let eye = DMatrix::identity(m.dim, m.dim);
            let entries = match map_kind {
                MapKind::FixedStep { .. } => &eye - &h * alpha,
                MapKind::ProximalPoint => (&eye + &h * alpha).try_inverse().ok_or_else(|| {
                    Error::domain("I + α Hess f is singular at this point".to_string())
                })?,
            };
            let source = m.tangent_frame(x);
            let target = Frame {
                base: x.clone(),
                basis: source.basis.clone(),
            };
            Ok(DifferentialMatrix {
                source_frame: source,
                target_frame: target,
                entries,
                method,
            })
        }
    }
}

/// Central-difference differential with geodesic perturbations of size
/// 1e-5 (1 + |x|) and target coordinates read through the logarithm at g(x).
fn fd_differential(
    cost: &CostModel,
    m: &ManifoldSpec,
    map_kind: MapKind,
    x: &Point,
    alpha: f64,
) -> Result<DifferentialMatrix> {
    let source = m.tangent_frame(x);
    let gx = apply_map(cost, m, map_kind, x, alpha)?;
    let target = m.transport_frame(&source, &gx)?;
    let h = 1e-5 * (1.0 + x.coords.norm());
    let dim = m.dim;
    let mut entries = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let dir = source.column(j);
        let xp = m.exp(x, &Tangent::new(x.clone(), &dir * h))?;
        let xm = m.exp(x, &Tangent::new(x.clone(), &dir * (-h)))?;
        let gp = apply_map(cost, m, map_kind, &xp, alpha)?;
        let gm = apply_map(cost, m, map_kind, &xm, alpha)?;
        let lp = m.log_map(&gx, &gp)?;
        let lm = m.log_map(&gx, &gm)?;
        let diff = (&lp.vec - &lm.vec) / (2.0 * h);
        let col = target.coords_of(m, &diff);
        entries.set_column(j, &col);
    }
    Ok(DifferentialMatrix {
        source_frame: source,
        target_frame: target,
        entries,
        method: DiffMethod::FiniteDifference,
    })
}

/// Pick the best admissible differential method for scans.
fn best_method(cost: &CostModel, m: &ManifoldSpec, map_kind: MapKind) -> DiffMethod {
    match (&m.kind, map_kind) {
        (ManifoldKind::Euclidean { .. }, MapKind::FixedStep { .. }) if cost.has_hess_action(m) => {
            DiffMethod::ClosedFormEuclidean
        }
        (
            ManifoldKind::Sphere { .. }
            | ManifoldKind::ProductSpheres { .. }
            | ManifoldKind::Hyperbolic { .. },
            MapKind::FixedStep {
                retraction: RetractionKind::Exponential,
            },
        ) => DiffMethod::ClosedFormJacobi,
        _ => DiffMethod::FiniteDifference,
    }
}

// ----------------------------------------------------------------------
// Singular step-size scan
// ----------------------------------------------------------------------

/// Step sizes at which the differential of the iteration map at a fixed
/// point x is singular.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularSet {
    /// Ambient coordinates of the scanned point.
    pub x: Vec<f64>,
    /// Singular step sizes, strictly increasing, within the scan range.
    pub alphas: Vec<f64>,
    /// Scanned interval (0, alpha_max].
    pub scan_range: (f64, f64),
    pub method: ScanMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMethod {
    /// Exact roots 1/lambda of det(I - alpha H) on Euclidean space.
    EuclideanEigen,
    /// Grid + bisection on the frame-continuous determinant.
    DeterminantScan,
}

/// Relative singularity threshold: sigma_min <= 1e-6 sigma_max.
pub const SINGULAR_TOL: f64 = 1e-6;

/// Determinant of the iteration-map differential as a function of alpha,
/// for plotting and scanning. Entries where the differential cannot be
/// computed come back as NaN.
pub fn determinant_curve(
    cost: &CostModel,
    m: &ManifoldSpec,
    map_kind: MapKind,
    x: &Point,
    alphas: &[f64],
) -> Vec<f64> {
    let method = best_method(cost, m, map_kind);
    alphas
        .iter()
        .map(|&a| {
            iteration_map_differential(cost, m, map_kind, x, a, method)
                .map(|d| d.entries.determinant())
                .unwrap_or(f64::NAN)
        })
        .collect()
}

/// Scan (0, alpha_max] for singular step sizes of alpha -> D g_alpha(x).
///
/// On Euclidean space with an available Hessian the set is computed exactly
/// as {1/lambda : lambda positive eigenvalue of Hess f(x)}. Elsewhere the
/// frame-continuous determinant is sampled on a uniform grid, sign changes
/// are bisected to 1e-10, and each candidate is kept only if the smallest
/// singular value is below `SINGULAR_TOL` times the largest.
pub fn singular_alpha_scan(
    cost: &CostModel,
    m: &ManifoldSpec,
    map_kind: MapKind,
    x: &Point,
    alpha_max: f64,
    grid_size: usize,
) -> Result<SingularSet> {
    if !(alpha_max > 0.0) {
        return Err(Error::config("alpha_max must be positive".to_string()));
    }
    if grid_size < 2 {
        return Err(Error::config("grid_size must be at least 2".to_string()));
    }
    let method = best_method(cost, m, map_kind);
    if method == DiffMethod::ClosedFormEuclidean {
        let h = costs::hessian_matrix(cost, m, x);
        let mut alphas: Vec<f64> = h
            .symmetric_eigenvalues()
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| 1.0 / l)
            .filter(|&a| a <= alpha_max)
            .collect();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
        return Ok(SingularSet {
            x: x.coords.as_slice().to_vec(),
            alphas,
            scan_range: (0.0, alpha_max),
            method: ScanMethod::EuclideanEigen,
        });
    }

    let det_at = |a: f64| -> Option<f64> {
        iteration_map_differential(cost, m, map_kind, x, a, method)
            .ok()
            .map(|d| d.entries.determinant())
            .filter(|d| d.is_finite())
    };
    let grid: Vec<f64> = (1..=grid_size)
        .map(|j| alpha_max * j as f64 / grid_size as f64)
        .collect();
    let dets: Vec<Option<f64>> = grid.iter().map(|&a| det_at(a)).collect();

    let mut alphas = Vec::new();
    for w in 0..grid_size - 1 {
        let (Some(d0), Some(d1)) = (dets[w], dets[w + 1]) else {
            continue;
        };
        if d0 == 0.0 || d0 * d1 >= 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (grid[w], grid[w + 1]);
        let mut dlo = d0;
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            match det_at(mid) {
                Some(dm) if dm * dlo > 0.0 => {
                    lo = mid;
                    dlo = dm;
                }
                Some(_) => hi = mid,
                None => break,
            }
        }
        let root = 0.5 * (lo + hi);
        if let Ok(d) = iteration_map_differential(cost, m, map_kind, x, root, method) {
            let svd = d.entries.clone().svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if smin <= SINGULAR_TOL * smax.max(1e-300) {
                alphas.push(root);
            }
        }
    }
    alphas.sort_by(f64::total_cmp);
    alphas.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    Ok(SingularSet {
        x: x.coords.as_slice().to_vec(),
        alphas,
        scan_range: (0.0, alpha_max),
        method: ScanMethod::DeterminantScan,
    })
}

// ----------------------------------------------------------------------
// Step-size bounds
// ----------------------------------------------------------------------

/// Geometric regime for the saddle-avoidance step-size bounds, with the
/// constants each formula needs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum BoundRegime {
    /// Complete, simply connected, non-positive curvature: alpha < 1/L.
    Hadamard { l: f64 },
    /// Curvature upper bound K_max, injectivity radius at least J, gradient
    /// norm bounded by G.
    PositiveCurvature { l: f64, g: f64, j: f64, k_max: f64 },
    /// Pinched positive curvature K_min <= K <= K_max.
    Pinched { l: f64, k_min: f64, k_max: f64 },
    /// Stiefel manifold St(n, p) with the Euclidean metric.
    Stiefel { l: f64, p: usize },
    /// Product of spheres with the projection retraction: alpha < 1/L.
    ProductSpheres { l: f64 },
}

/// A computed step-size interval (0, alpha_max) together with the constants
/// that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepSizeBound {
    pub regime: String,
    pub alpha_max: f64,
    pub l: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
}

/// arccot on the branch (0, inf) -> (0, pi/2).
fn arccot(t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::config(format!(
            "arccot restricted to positive arguments (got {t})"
        )));
    }
    Ok((1.0 / t).atan())
}

fn require_positive(value: f64, name: &str) -> Result<()> {
    if !(value > 0.0) {
        return Err(Error::config(format!(
            "{name} must be positive (got {value})"
        )));
    }
    Ok(())
}

/// Largest step size with a saddle-avoidance guarantee in the given regime.
pub fn step_size_bound(regime: BoundRegime) -> Result<StepSizeBound> {
    match regime {
        BoundRegime::Hadamard { l } => {
            require_positive(l, "L")?;
            Ok(StepSizeBound {
                regime: "hadamard".to_string(),
                alpha_max: 1.0 / l,
                l,
                g: None,
                j: None,
                k_min: None,
                k_max: None,
                p: None,
            })
        }
        BoundRegime::PositiveCurvature { l, g, j, k_max } => {
            require_positive(l, "L")?;
            require_positive(g, "G")?;
            require_positive(j, "J")?;
            require_positive(k_max, "K_max")?;
            let t = l / (g * k_max.sqrt());
            let alpha_max = (j * l / g).min(t * arccot(t)?) / l;
            Ok(StepSizeBound {
                regime: "positive_curvature".to_string(),
                alpha_max,
                l,
                g: Some(g),
                j: Some(j),
                k_min: None,
                k_max: Some(k_max),
                p: None,
            })
        }
        BoundRegime::Pinched { l, k_min, k_max } => {
            require_positive(l, "L")?;
            require_positive(k_min, "K_min")?;
            require_positive(k_max, "K_max")?;
            if k_min > k_max {
                return Err(Error::config(format!(
                    "pinched regime needs K_min <= K_max (got {k_min} > {k_max})"
                )));
            }
            let t = (k_min / k_max).sqrt() / std::f64::consts::PI;
            let alpha_max = t * arccot(t)? / l;
            Ok(StepSizeBound {
                regime: "pinched".to_string(),
                alpha_max,
                l,
                g: None,
                j: None,
                k_min: Some(k_min),
                k_max: Some(k_max),
                p: None,
            })
        }
        BoundRegime::Stiefel { l, p } => {
            require_positive(l, "L")?;
            if p < 1 {
                return Err(Error::config("p must be at least 1".to_string()));
            }
            let t = 1.0 / (std::f64::consts::PI * (p as f64).sqrt());
            let alpha_max = t * arccot(t)? / l;
            Ok(StepSizeBound {
                regime: "stiefel".to_string(),
                alpha_max,
                l,
                g: None,
                j: None,
                k_min: None,
                k_max: None,
                p: Some(p),
            })
        }
        BoundRegime::ProductSpheres { l } => {
            require_positive(l, "L")?;
            Ok(StepSizeBound {
                regime: "product_spheres".to_string(),
                alpha_max: 1.0 / l,
                l,
                g: None,
                j: None,
                k_min: None,
                k_max: None,
                p: None,
            })
        }
    }
}

// ----------------------------------------------------------------------
// Spectra and the Jacobi/Hessian consistency check
// ----------------------------------------------------------------------

/// Eigenvalue magnitudes of Dg(x*) at a critical point, sorted ascending.
/// For the fixed-step maps these are |1 - alpha lambda_i(Hess f)|; for the
/// proximal map 1 / |1 + alpha lambda_i|.
pub fn unstable_spectrum(
    cost: &CostModel,
    m: &ManifoldSpec,
    map_kind: MapKind,
    x_star: &Point,
    alpha: f64,
) -> Result<Vec<f64>> {
    let gn = m.norm(x_star, &cost.grad(m, x_star));
    let tol = costs::default_tol_g(cost, m, x_star);
    if gn > tol {
        return Err(Error::precondition(format!(
            "unstable_spectrum requires a critical point (|grad| = {gn:e} > {tol:e})"
        )));
    }
    let h = costs::hessian_matrix(cost, m, x_star);
    let mut mags: Vec<f64> = h
        .symmetric_eigenvalues()
        .iter()
        .map(|&lambda| match map_kind {
            MapKind::FixedStep { .. } => (1.0 - alpha * lambda).abs(),
            MapKind::ProximalPoint => 1.0 / (1.0 + alpha * lambda).abs(),
        })
        .collect();
    mags.sort_by(f64::total_cmp);
    Ok(mags)
}

/// Maximum entrywise deviation between the Jacobi closed form
/// J0(1)^{-1} J1(1) and a finite-difference Hessian of
/// z -> dist(z, Exp_x(v))^2 / 2, in matching canonical frames.
pub fn hess_dist_consistency(m: &ManifoldSpec, x: &Point, v: &Tangent) -> Result<f64> {
    let y = m.exp(x, v)?;
    let (j0, j1) = m.jacobi_endpoints(x, v)?;
    let closed = j0
        .lu()
        .solve(&j1)
        .ok_or_else(|| Error::domain("J0(1) is singular (conjugate point)".to_string()))?;
    let fd = fd_hessian_of(m, x, 1e-4, |z| {
        0.5 * m
            .distance(z, &y)
            .map(|d| d * d)
            .expect("distance within injectivity radius")
    });
    Ok((closed - fd).abs().max())
}

/// Finite-difference Hessian (in `tangent_frame(x)` coordinates) of an
/// arbitrary scalar function through the exponential chart.
pub fn fd_hessian_of(
    m: &ManifoldSpec,
    x: &Point,
    h: f64,
    f: impl Fn(&Point) -> f64,
) -> DMatrix<f64> {
    let frame = m.tangent_frame(x);
    let dim = m.dim;
    let eval = |c: &DVector<f64>| -> f64 {
        let v = Tangent::new(x.clone(), frame.vector_from(c));
        f(&m.exp(x, &v).expect("exponential step in FD Hessian"))
    };
    let f0 = eval(&DVector::zeros(dim));
    let mut out = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            let mut c = DVector::zeros(dim);
            if i == j {
                c[i] = h;
                let fp = eval(&c);
                c[i] = -h;
                let fm = eval(&c);
                out[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
            } else {
                c[i] = h;
                c[j] = h;
                let fpp = eval(&c);
                c[j] = -h;
                let fpm = eval(&c);
                c[i] = -h;
                c[j] = h;
                let fmp = eval(&c);
                c[j] = -h;
                let fmm = eval(&c);
                let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
    }
    out
}
