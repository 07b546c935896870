//! Catalog of cost functions with analytic gradients and Hessian actions,
//! including fixtures with known strict saddles, plus critical-point
//! classification.
//!
//! Every cost evaluates through a [`ManifoldSpec`]; gradients are Riemannian
//! (tangent to the manifold) and Hessian actions, where present, are
//! self-adjoint in the Riemannian metric.

use crate::error::{Error, Result};
use crate::geometry::{ManifoldKind, ManifoldSpec, Point, Tangent};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Label attached to cataloged critical points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalLabel {
    StrictSaddle,
    Minimizer,
    Degenerate,
}

/// Output of [`classify_critical_point`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalClass {
    NotCritical,
    StrictSaddle,
    MinimizerCandidate,
    Degenerate,
}

/// Parameter record for the builtin costs; this is also the config-file
/// schema for the `cost` field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    /// f(x) = x^T A x / 2 on Euclidean space.
    Quadratic { matrix: Vec<Vec<f64>> },
    /// f(x) = x^3 on the real line.
    Cubic1d,
    /// Smooth interpolation between (x1^2 - x2^2)/2 inside the unit disk and
    /// |x|^2 / 2 outside radius 2; the origin is a strict saddle.
    Interp2d,
    /// f(x) = x^T A x on a sphere (or Stiefel frame, f = tr(X^T A X)).
    Rayleigh { matrix: Vec<Vec<f64>> },
    /// f(x) = <Log_p(x), D Log_p(x)> / 2 with D given in the canonical
    /// tangent frame at p. Hadamard kinds only.
    NormalCoordQuadratic {
        base: Vec<f64>,
        matrix: Vec<Vec<f64>>,
    },
    /// Sum of per-factor Rayleigh quotients on a product of spheres.
    ProductSphereRayleigh { matrices: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone)]
enum CostKind {
    Quadratic { a: DMatrix<f64> },
    Cubic1d,
    Interp2d,
    Rayleigh { a: DMatrix<f64> },
    NormalCoordQuadratic { base: Point, d: DMatrix<f64> },
    ProductSphereRayleigh { blocks: Vec<DMatrix<f64>> },
}

/// A cost function together with metadata: gradient-Lipschitz constant and
/// gradient-norm bound where known, and a catalog of known critical points.
#[derive(Debug, Clone)]
pub struct CostModel {
    pub name: String,
    kind: CostKind,
    pub lipschitz: Option<f64>,
    pub grad_bound: Option<f64>,
    pub critical_points: Vec<(Point, CriticalLabel)>,
}

/// Construct a builtin cost from its name and a JSON parameter record.
pub fn builtin_cost(name: &str, params: &serde_json::Value) -> Result<CostModel> {
    let mut obj = match params {
        serde_json::Value::Null => serde_json::Map::new(),
        serde_json::Value::Object(map) => map.clone(),
        _ => {
            return Err(Error::config(
                "cost parameters must be a JSON object".to_string(),
            ))
        }
    };
    obj.insert(
        "name".to_string(),
        serde_json::Value::String(name.to_string()),
    );
    let spec: CostSpec = serde_json::from_value(serde_json::Value::Object(obj))
        .map_err(|e| Error::config(format!("unknown cost or malformed parameters: {e}")))?;
    spec.build()
}

fn parse_symmetric(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::config(format!("{what} must be a square matrix")));
    }
    let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    if (&a - a.transpose()).abs().max() > 1e-10 {
        return Err(Error::config(format!("{what} must be symmetric")));
    }
    Ok(a)
}

fn spectrum(a: &DMatrix<f64>) -> Vec<f64> {
    let mut eig: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig
}

fn label_from_eigs(eigs: &[f64], tol: f64) -> CriticalLabel {
    let lmin = eigs.first().copied().unwrap_or(0.0);
    if lmin < -tol {
        CriticalLabel::StrictSaddle
    } else if lmin > tol {
        CriticalLabel::Minimizer
    } else {
        CriticalLabel::Degenerate
    }
}

impl CostSpec {
    pub fn build(&self) -> Result<CostModel> {
        match self {
            CostSpec::Quadratic { matrix } => {
                let a = parse_symmetric(matrix, "quadratic matrix")?;
                let eigs = spectrum(&a);
                let l = eigs.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
                let origin = Point::new(DVector::zeros(a.nrows()));
                let label = label_from_eigs(&eigs, 1e-12);
                Ok(CostModel {
                    name: "quadratic".to_string(),
                    kind: CostKind::Quadratic { a },
                    lipschitz: Some(l),
                    grad_bound: None,
                    critical_points: vec![(origin, label)],
                })
            }
            CostSpec::Cubic1d => Ok(CostModel {
                name: "cubic1d".to_string(),
                kind: CostKind::Cubic1d,
                lipschitz: None,
                grad_bound: None,
                critical_points: vec![(Point::from_slice(&[0.0]), CriticalLabel::Degenerate)],
            }),
            CostSpec::Interp2d => Ok(CostModel {
                name: "interp2d".to_string(),
                kind: CostKind::Interp2d,
                // Estimated once by dense sampling of the analytic Hessian's
                // spectral norm (the maximum sits near (0, 1.85)).
                lipschitz: Some(41.64),
                grad_bound: None,
                critical_points: vec![(
                    Point::from_slice(&[0.0, 0.0]),
                    CriticalLabel::StrictSaddle,
                )],
            }),
            CostSpec::Rayleigh { matrix } => {
                let a = parse_symmetric(matrix, "rayleigh matrix")?;
                let eigs = spectrum(&a);
                let spread = eigs[eigs.len() - 1] - eigs[0];
                let se = a.clone().symmetric_eigen();
                let mut catalog = Vec::new();
                let n = a.nrows();
                for i in 0..n {
                    let li = se.eigenvalues[i];
                    let mut gaps: Vec<f64> = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| 2.0 * (se.eigenvalues[j] - li))
                        .collect();
                    gaps.sort_by(f64::total_cmp);
                    let label = label_from_eigs(&gaps, 1e-12);
                    let v = se.eigenvectors.column(i).into_owned();
                    catalog.push((Point::new(v.clone()), label));
                    catalog.push((Point::new(-v), label));
                }
                Ok(CostModel {
                    name: "rayleigh".to_string(),
                    kind: CostKind::Rayleigh { a },
                    lipschitz: Some(2.0 * spread),
                    grad_bound: Some(spread),
                    critical_points: catalog,
                })
            }
            CostSpec::NormalCoordQuadratic { base, matrix } => {
                let d = parse_symmetric(matrix, "normal-coordinate matrix")?;
                let p = Point::from_slice(base);
                let eigs = spectrum(&d);
                let label = label_from_eigs(&eigs, 1e-12);
                Ok(CostModel {
                    name: "normal_coord_quadratic".to_string(),
                    kind: CostKind::NormalCoordQuadratic { base: p.clone(), d },
                    lipschitz: None,
                    grad_bound: None,
                    critical_points: vec![(p, label)],
                })
            }
            CostSpec::ProductSphereRayleigh { matrices } => {
                if matrices.is_empty() {
                    return Err(Error::config(
                        "product_sphere_rayleigh needs at least one block".to_string(),
                    ));
                }
                let blocks = matrices
                    .iter()
                    .map(|m| parse_symmetric(m, "product rayleigh block"))
                    .collect::<Result<Vec<_>>>()?;
                let l = blocks
                    .iter()
                    .map(|b| {
                        let e = spectrum(b);
                        2.0 * (e[e.len() - 1] - e[0])
                    })
                    .fold(0.0_f64, f64::max);
                Ok(CostModel {
                    name: "product_sphere_rayleigh".to_string(),
                    kind: CostKind::ProductSphereRayleigh { blocks },
                    lipschitz: Some(l),
                    grad_bound: None,
                    critical_points: Vec::new(),
                })
            }
        }
    }
}

impl CostModel {
    /// Check that this cost can be evaluated on the given manifold.
    pub fn compatible_with(&self, m: &ManifoldSpec) -> Result<()> {
        let ok = match (&self.kind, &m.kind) {
            (CostKind::Quadratic { a }, ManifoldKind::Euclidean { n }) => a.nrows() == *n,
            (CostKind::Cubic1d, ManifoldKind::Euclidean { n }) => *n == 1,
            (CostKind::Interp2d, ManifoldKind::Euclidean { n }) => *n == 2,
            (CostKind::Rayleigh { a }, ManifoldKind::Sphere { d }) => a.nrows() == d + 1,
            (CostKind::Rayleigh { a }, ManifoldKind::Stiefel { n, .. }) => a.nrows() == *n,
            (CostKind::NormalCoordQuadratic { base, d }, _) => {
                m.is_hadamard()
                    && base.coords.len() == m.ambient_dim
                    && d.nrows() == m.dim
                    && m.check_point(base).is_ok()
            }
            (CostKind::ProductSphereRayleigh { blocks }, ManifoldKind::ProductSpheres { ds }) => {
                blocks.len() == ds.len()
                    && blocks
                        .iter()
                        .zip(ds.iter())
                        .all(|(b, d)| b.nrows() == d + 1)
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "cost '{}' is not defined on manifold {:?}",
                self.name, m.kind
            )))
        }
    }

    pub fn value(&self, m: &ManifoldSpec, x: &Point) -> f64 {
        match &self.kind {
            CostKind::Quadratic { a } => 0.5 * x.coords.dot(&(a * &x.coords)),
            CostKind::Cubic1d => x.coords[0].powi(3),
            CostKind::Interp2d => {
                let (x1, x2) = (x.coords[0], x.coords[1]);
                let nsq = x1 * x1 + x2 * x2;
                let (q, _, _) = transition(4.0 - nsq);
                0.5 * nsq - q * x2 * x2
            }
            CostKind::Rayleigh { a } => {
                let xm = reshape_for(m, &x.coords);
                (xm.transpose() * a * &xm).trace()
            }
            CostKind::NormalCoordQuadratic { base, d } => {
                let v = m
                    .log_map(base, x)
                    .expect("normal_coord_quadratic: log map failed on Hadamard manifold");
                let frame = m.tangent_frame(base);
                let c = frame.coords_of(m, &v.vec);
                0.5 * c.dot(&(d * &c))
            }
            CostKind::ProductSphereRayleigh { blocks } => {
                let mut total = 0.0;
                let mut off = 0;
                for b in blocks {
                    let len = b.nrows();
                    let xb = x.coords.rows(off, len).into_owned();
                    total += xb.dot(&(b * &xb));
                    off += len;
                }
                total
            }
        }
    }

    /// Riemannian gradient at `x`.
    pub fn grad(&self, m: &ManifoldSpec, x: &Point) -> Tangent {
        let vec = match &self.kind {
            CostKind::Quadratic { a } => a * &x.coords,
            CostKind::Cubic1d => DVector::from_column_slice(&[3.0 * x.coords[0] * x.coords[0]]),
            CostKind::Interp2d => {
                let (x1, x2) = (x.coords[0], x.coords[1]);
                let (q, qp, _) = transition(4.0 - x1 * x1 - x2 * x2);
                DVector::from_column_slice(&[
                    x1 + 2.0 * qp * x1 * x2 * x2,
                    x2 + 2.0 * qp * x2 * x2 * x2 - 2.0 * q * x2,
                ])
            }
            CostKind::Rayleigh { a } => {
                let xm = reshape_for(m, &x.coords);
                let egrad = flatten(&(a * &xm * 2.0));
                m.project_tangent(x, &egrad)
            }
            CostKind::NormalCoordQuadratic { base, d } => {
                if matches!(m.kind, ManifoldKind::Euclidean { .. }) {
                    d * (&x.coords - &base.coords)
                } else {
                    normal_coord_grad(m, base, d, x)
                }
            }
            CostKind::ProductSphereRayleigh { blocks } => {
                let mut egrad = DVector::zeros(m.ambient_dim);
                let mut off = 0;
                for b in blocks {
                    let len = b.nrows();
                    let xb = x.coords.rows(off, len).into_owned();
                    egrad.rows_mut(off, len).copy_from(&(b * &xb * 2.0));
                    off += len;
                }
                m.project_tangent(x, &egrad)
            }
        };
        Tangent::new(x.clone(), vec)
    }

    pub fn has_hess_action(&self, m: &ManifoldSpec) -> bool {
        !matches!(
            (&self.kind, &m.kind),
            (
                CostKind::NormalCoordQuadratic { .. },
                ManifoldKind::Hyperbolic { .. }
            )
        )
    }

    /// Riemannian Hessian applied to a tangent vector, where available.
    pub fn hess_action(&self, m: &ManifoldSpec, x: &Point, u: &Tangent) -> Option<Tangent> {
        let vec = match &self.kind {
            CostKind::Quadratic { a } => a * &u.vec,
            CostKind::Cubic1d => DVector::from_column_slice(&[6.0 * x.coords[0] * u.vec[0]]),
            CostKind::Interp2d => {
                let h = interp2d_hessian(x.coords[0], x.coords[1]);
                h * &u.vec
            }
            CostKind::Rayleigh { a } => match &m.kind {
                ManifoldKind::Sphere { .. } => {
                    let quad = x.coords.dot(&(a * &x.coords));
                    let proj = m.project_tangent(x, &(a * &u.vec * 2.0));
                    proj - &u.vec * (2.0 * quad)
                }
                ManifoldKind::Stiefel { .. } => {
                    let xm = reshape_for(m, &x.coords);
                    let um = reshape_for(m, &u.vec);
                    let xax = xm.transpose() * a * &xm;
                    let sym = (&xax + xax.transpose()) * 0.5;
                    let raw = a * &um * 2.0 - &um * sym * 2.0;
                    m.project_tangent(x, &flatten(&raw))
                }
                _ => return None,
            },
            CostKind::NormalCoordQuadratic { d, .. } => {
                if matches!(m.kind, ManifoldKind::Euclidean { .. }) {
                    d * &u.vec
                } else {
                    return None;
                }
            }
            CostKind::ProductSphereRayleigh { blocks } => {
                let mut out = DVector::zeros(m.ambient_dim);
                let mut off = 0;
                for b in blocks {
                    let len = b.nrows();
                    let xb = x.coords.rows(off, len).into_owned();
                    let ub = u.vec.rows(off, len).into_owned();
                    let quad = xb.dot(&(b * &xb));
                    let au = b * &ub * 2.0;
                    let proj = &au - &xb * xb.dot(&au);
                    let res = proj - &ub * (2.0 * quad);
                    out.rows_mut(off, len).copy_from(&res);
                    off += len;
                }
                out
            }
        };
        Some(Tangent::new(x.clone(), vec))
    }
}

/// Gradient of the curved normal-coordinate quadratic: with v = Log_p(x) and
/// J0 the Jacobi endpoint matrix along the geodesic from p to x, the gradient
/// coordinates in the transported frame are J0^{-T} D v.
fn normal_coord_grad(m: &ManifoldSpec, base: &Point, d: &DMatrix<f64>, x: &Point) -> DVector<f64> {
    let v = m
        .log_map(base, x)
        .expect("normal_coord_quadratic: log map failed on Hadamard manifold");
    let frame_p = m.tangent_frame(base);
    let vc = frame_p.coords_of(m, &v.vec);
    if vc.norm() == 0.0 {
        return DVector::zeros(m.ambient_dim);
    }
    let (j0, _) = m
        .jacobi_endpoints(base, &v)
        .expect("normal_coord_quadratic: Jacobi endpoints failed");
    let rhs = d * &vc;
    let coords = j0
        .transpose()
        .lu()
        .solve(&rhs)
        .expect("J0 is invertible on Hadamard manifolds");
    let frame_x = m
        .transport_frame(&frame_p, x)
        .expect("frame transport on Hadamard manifold");
    frame_x.vector_from(&coords)
}

fn reshape_for(m: &ManifoldSpec, coords: &DVector<f64>) -> DMatrix<f64> {
    match &m.kind {
        ManifoldKind::Stiefel { n, p } => DMatrix::from_column_slice(*n, *p, coords.as_slice()),
        _ => DMatrix::from_column_slice(coords.len(), 1, coords.as_slice()),
    }
}

fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

// ----------------------------------------------------------------------
// The interp2d transition function and Hessian
// ----------------------------------------------------------------------

/// (q, q', q'') for q(t) = u(t) / (u(t) + u(3-t)) with u(t) = exp(-3/t).
/// q is 0 below 0 and 1 above 3, with all derivatives vanishing there, so
/// the interpolated cost is exactly quadratic outside the transition annulus.
pub(crate) fn transition(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 3.0 {
        return (1.0, 0.0, 0.0);
    }
    let (a, ap, app) = u_all(t);
    let (b, bq, bqq) = u_all(3.0 - t);
    let bp = -bq;
    let bpp = bqq;
    let den = a + b;
    let dp = ap + bp;
    let dpp = app + bpp;
    let q = a / den;
    let n = ap * den - a * dp;
    let qp = n / (den * den);
    let qpp = (app * den - a * dpp) / (den * den) - 2.0 * dp * n / (den * den * den);
    (q, qp, qpp)
}

fn u_all(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let u = (-3.0 / t).exp();
    if u == 0.0 {
        // exp(-3/t) flushes to zero below t ~ 4e-3, and so do its derivatives.
        return (0.0, 0.0, 0.0);
    }
    let t2 = t * t;
    (u, u * 3.0 / t2, u * (9.0 - 6.0 * t) / (t2 * t2))
}

pub(crate) fn interp2d_hessian(x1: f64, x2: f64) -> DMatrix<f64> {
    let (q, qp, qpp) = transition(4.0 - x1 * x1 - x2 * x2);
    let h11 = 1.0 + 2.0 * qp * x2 * x2 - 4.0 * qpp * x1 * x1 * x2 * x2;
    let h12 = 4.0 * x1 * x2 * (qp - qpp * x2 * x2);
    let h22 = 1.0 + 10.0 * qp * x2 * x2 - 4.0 * qpp * x2.powi(4) - 2.0 * q;
    DMatrix::from_row_slice(2, 2, &[h11, h12, h12, h22])
}

// ----------------------------------------------------------------------
// Hessian matrices and classification
// ----------------------------------------------------------------------

/// Riemannian Hessian of the cost at `x` as a dim x dim symmetric matrix in
/// `tangent_frame(x)` coordinates. Uses the analytic Hessian action when the
/// cost provides one, otherwise central finite differences of the pullback
/// f(Exp_x(.)), whose Euclidean Hessian at 0 is the Riemannian Hessian.
pub fn hessian_matrix(cost: &CostModel, m: &ManifoldSpec, x: &Point) -> DMatrix<f64> {
    if !cost.has_hess_action(m) {
        return fd_hessian_matrix(cost, m, x, 1e-4);
    }
    let frame = m.tangent_frame(x);
    let dim = m.dim;
    let mut h = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let u = Tangent::new(x.clone(), frame.column(j));
        let hu = cost
            .hess_action(m, x, &u)
            .expect("hess_action advertised but missing");
        for i in 0..dim {
            h[(i, j)] = m.inner_raw(x, &frame.column(i), &hu.vec);
        }
    }
    (&h + h.transpose()) * 0.5
}

/// Finite-difference Riemannian Hessian in `tangent_frame(x)` coordinates.
pub fn fd_hessian_matrix(cost: &CostModel, m: &ManifoldSpec, x: &Point, h: f64) -> DMatrix<f64> {
    let frame = m.tangent_frame(x);
    let dim = m.dim;
    let eval = |c: &DVector<f64>| -> f64 {
        let v = Tangent::new(x.clone(), frame.vector_from(c));
        let y = m.exp(x, &v).expect("exponential in FD Hessian");
        cost.value(m, &y)
    };
    let f0 = eval(&DVector::zeros(dim));
    let mut hm = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..=i {
            let mut c = DVector::zeros(dim);
            if i == j {
                c[i] = h;
                let fp = eval(&c);
                c[i] = -h;
                let fm = eval(&c);
                hm[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
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
                hm[(i, j)] = v;
                hm[(j, i)] = v;
            }
        }
    }
    hm
}

/// Riemannian gradient by central finite differences of the value function.
/// Oracle for the analytic gradients.
pub fn fd_gradient(cost: &CostModel, m: &ManifoldSpec, x: &Point, h: f64) -> Tangent {
    let frame = m.tangent_frame(x);
    let dim = m.dim;
    let mut coords = DVector::zeros(dim);
    for i in 0..dim {
        let step = Tangent::new(x.clone(), frame.column(i) * h);
        let neg = Tangent::new(x.clone(), frame.column(i) * (-h));
        let fp = cost.value(m, &m.exp(x, &step).expect("fd gradient step"));
        let fm = cost.value(m, &m.exp(x, &neg).expect("fd gradient step"));
        coords[i] = (fp - fm) / (2.0 * h);
    }
    Tangent::new(x.clone(), frame.vector_from(&coords))
}

/// Scale-aware default gradient tolerance for classification.
pub fn default_tol_g(cost: &CostModel, m: &ManifoldSpec, x: &Point) -> f64 {
    1e-8 * (1.0 + cost.value(m, x).abs())
}

pub const DEFAULT_TOL_LAMBDA: f64 = 1e-6;

/// Classify a point as non-critical, strict saddle, minimizer candidate, or
/// degenerate from the gradient norm and the smallest Hessian eigenvalue.
pub fn classify_critical_point(
    cost: &CostModel,
    m: &ManifoldSpec,
    x: &Point,
    tol_g: f64,
    tol_lambda: f64,
) -> CriticalClass {
    let gn = m.norm(x, &cost.grad(m, x));
    if gn > tol_g {
        return CriticalClass::NotCritical;
    }
    let h = hessian_matrix(cost, m, x);
    let lmin = h
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if lmin < -tol_lambda {
        CriticalClass::StrictSaddle
    } else if lmin > tol_lambda {
        CriticalClass::MinimizerCandidate
    } else {
        CriticalClass::Degenerate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(values: &[f64]) -> Vec<Vec<f64>> {
        let n = values.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { values[i] } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    fn rayleigh123() -> CostModel {
        CostSpec::Rayleigh {
            matrix: diag(&[1.0, 2.0, 3.0]),
        }
        .build()
        .unwrap()
    }

    #[test]
    fn transition_midpoint_is_half() {
        let (q, _, _) = transition(1.5);
        assert_relative_eq!(q, 0.5, epsilon = 1e-15);
        assert_eq!(transition(-1.0), (0.0, 0.0, 0.0));
        assert_eq!(transition(3.5), (1.0, 0.0, 0.0));
    }

    #[test]
    fn interp2d_outside_is_exactly_quadratic() {
        let m = ManifoldSpec::euclidean(2);
        let cost = CostSpec::Interp2d.build().unwrap();
        let x = Point::from_slice(&[3.0, 0.0]);
        assert_eq!(cost.value(&m, &x), 4.5);
        let g = cost.grad(&m, &x);
        assert_eq!(g.vec[0], 3.0);
        assert_eq!(g.vec[1], 0.0);
    }

    #[test]
    fn interp2d_inside_is_the_saddle_quadratic() {
        let m = ManifoldSpec::euclidean(2);
        let cost = CostSpec::Interp2d.build().unwrap();
        let x = Point::from_slice(&[0.3, -0.4]);
        assert_relative_eq!(cost.value(&m, &x), (0.09 - 0.16) / 2.0, epsilon = 1e-15);
        let h = interp2d_hessian(0.0, 0.0);
        assert_eq!(h[(0, 0)], 1.0);
        assert_eq!(h[(1, 1)], -1.0);
    }

    #[test]
    fn rayleigh_gradient_formula_and_saddle_spectrum() {
        let m = ManifoldSpec::sphere(2);
        let cost = rayleigh123();
        let mut x = DVector::from_column_slice(&[0.4, -1.0, 0.8]);
        x /= x.norm();
        let x = Point::new(x);
        let g = cost.grad(&m, &x);
        let a = DMatrix::from_row_slice(3, 3, &[1., 0., 0., 0., 2., 0., 0., 0., 3.]);
        let expected = {
            let ax = &a * &x.coords;
            (&ax - &x.coords * x.coords.dot(&ax)) * 2.0
        };
        assert!((g.vec - expected).norm() < 1e-14);

        let e3 = Point::from_slice(&[0.0, 0.0, 1.0]);
        assert_eq!(cost.grad(&m, &e3).vec.norm(), 0.0);
        let h = hessian_matrix(&cost, &m, &e3);
        let mut eig: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert_relative_eq!(eig[0], -4.0, epsilon = 1e-12);
        assert_relative_eq!(eig[1], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn classification_examples() {
        let s2 = ManifoldSpec::sphere(2);
        let cost = rayleigh123();
        let e3 = Point::from_slice(&[0.0, 0.0, 1.0]);
        assert_eq!(
            classify_critical_point(&cost, &s2, &e3, 1e-8, 1e-6),
            CriticalClass::StrictSaddle
        );
        let e1 = Point::from_slice(&[1.0, 0.0, 0.0]);
        assert_eq!(
            classify_critical_point(&cost, &s2, &e1, 1e-8, 1e-6),
            CriticalClass::MinimizerCandidate
        );

        let line = ManifoldSpec::euclidean(1);
        let cubic = CostSpec::Cubic1d.build().unwrap();
        let zero = Point::from_slice(&[0.0]);
        assert_eq!(
            classify_critical_point(&cubic, &line, &zero, 1e-8, 1e-6),
            CriticalClass::Degenerate
        );
        let off = Point::from_slice(&[0.5]);
        assert_eq!(
            classify_critical_point(&cubic, &line, &off, 1e-8, 1e-6),
            CriticalClass::NotCritical
        );

        let e2 = ManifoldSpec::euclidean(2);
        let quad = CostSpec::Quadratic {
            matrix: diag(&[2.0, 0.5]),
        }
        .build()
        .unwrap();
        let origin = Point::from_slice(&[0.0, 0.0]);
        assert_eq!(
            classify_critical_point(&quad, &e2, &origin, 1e-8, 1e-6),
            CriticalClass::MinimizerCandidate
        );
    }

    #[test]
    fn builtin_cost_dispatches_and_rejects() {
        let c = builtin_cost("interp2d", &serde_json::Value::Null).unwrap();
        assert_eq!(c.name, "interp2d");
        let params = serde_json::json!({"matrix": [[1.0, 0.0], [0.0, -1.0]]});
        let c = builtin_cost("quadratic", &params).unwrap();
        assert_eq!(c.critical_points.len(), 1);
        assert_eq!(c.critical_points[0].1, CriticalLabel::StrictSaddle);
        assert!(builtin_cost("nope", &serde_json::Value::Null).is_err());
        let bad = serde_json::json!({"matrix": [[1.0, 0.5], [0.0, 1.0]]});
        assert!(builtin_cost("quadratic", &bad).is_err());
    }

    #[test]
    fn normal_coord_quadratic_euclidean_matches_offset_quadratic() {
        let m = ManifoldSpec::euclidean(2);
        let cost = CostSpec::NormalCoordQuadratic {
            base: vec![1.0, -1.0],
            matrix: vec![vec![2.0, 0.0], vec![0.0, -3.0]],
        }
        .build()
        .unwrap();
        let x = Point::from_slice(&[1.5, 0.0]);
        assert_relative_eq!(
            cost.value(&m, &x),
            0.5 * (2.0 * 0.25 - 3.0 * 1.0),
            epsilon = 1e-14
        );
        let g = cost.grad(&m, &x);
        assert_relative_eq!(g.vec[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(g.vec[1], -3.0, epsilon = 1e-14);
    }

    #[test]
    fn lipschitz_bound_holds_on_samples() {
        let m = ManifoldSpec::sphere(2);
        let cost = rayleigh123();
        let l = cost.lipschitz.unwrap();
        assert_relative_eq!(l, 4.0, epsilon = 1e-12);
        let mut worst: f64 = 0.0;
        for k in 0..50 {
            let mut x = DVector::from_fn(3, |i, _| ((k * 3 + i) as f64 * 0.77).sin() + 0.1);
            x /= x.norm();
            let x = Point::new(x);
            let frame = m.tangent_frame(&x);
            let u = Tangent::new(x.clone(), frame.column(0) * 0.6 + frame.column(1) * 0.8);
            let hu = cost.hess_action(&m, &x, &u).unwrap();
            worst = worst.max(m.norm(&x, &hu) / m.norm(&x, &u));
        }
        assert!(worst <= l + 1e-8, "sampled Hessian norm {worst} exceeds L");
    }
}
