//! Concrete Riemannian manifolds: points, tangent vectors, retractions,
//! logarithms, parallel transport, orthonormal frames, and the
//! constant-curvature Jacobi-field closed forms.
//!
//! All operations are pure functions of their inputs. Points and tangents
//! are plain ambient coordinate vectors; the [`ManifoldSpec`] passed to each
//! operation decides how they are interpreted (Stiefel points are n x p
//! matrices flattened column-major).

mod stiefel;

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

pub const POINT_TOL: f64 = 1e-10;
pub const FRAME_TOL: f64 = 1e-9;

/// Which concrete manifold a spec describes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldKind {
    /// Flat R^n.
    Euclidean { n: usize },
    /// Unit sphere S^d embedded in R^{d+1}.
    Sphere { d: usize },
    /// Product S^{d_1} x ... x S^{d_N}, one block of ambient coordinates per factor.
    ProductSpheres { ds: Vec<usize> },
    /// Stiefel manifold St(n, p) of orthonormal p-frames, Euclidean metric.
    Stiefel { n: usize, p: usize },
    /// Hyperbolic space H^n in the hyperboloid model, ambient R^{n+1}
    /// with the Minkowski form <x,y> = -x_0 y_0 + sum_i x_i y_i.
    Hyperbolic { n: usize },
}

/// The geometric model: dimensions, curvature data, injectivity radius.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub dim: usize,
    pub ambient_dim: usize,
    pub k_min: f64,
    pub k_max: f64,
    /// Infinite on Hadamard kinds, pi on spheres and Stiefel.
    pub injectivity_radius: f64,
}

/// Retraction selector for the iteration maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetractionKind {
    /// Follow the geodesic: R_x(v) = Exp_x(v).
    Exponential,
    /// Metric projection: nearest manifold point to x + v.
    Projection,
}

/// A point on a manifold, stored as ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: DVector<f64>,
}

impl Point {
    pub fn new(coords: DVector<f64>) -> Self {
        Point { coords }
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Point {
            coords: DVector::from_column_slice(coords),
        }
    }
}

/// A tangent vector attached to its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub base: Point,
    pub vec: DVector<f64>,
}

impl Tangent {
    pub fn new(base: Point, vec: DVector<f64>) -> Self {
        Tangent { base, vec }
    }

    pub fn zero(base: &Point) -> Self {
        let n = base.coords.len();
        Tangent {
            base: base.clone(),
            vec: DVector::zeros(n),
        }
    }
}

/// An orthonormal basis of the tangent space at `base`.
/// Columns of `basis` are the frame vectors in ambient coordinates.
#[derive(Debug, Clone)]
pub struct Frame {
    pub base: Point,
    pub basis: DMatrix<f64>,
}

impl Frame {
    /// Coordinates of the tangent vector `v` (ambient) in this frame.
    pub fn coords_of(&self, m: &ManifoldSpec, v: &DVector<f64>) -> DVector<f64> {
        let dim = self.basis.ncols();
        DVector::from_fn(dim, |i, _| {
            m.inner_raw(&self.base, &self.basis.column(i).into_owned(), v)
        })
    }

    /// Ambient vector with the given frame coordinates.
    pub fn vector_from(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.basis * coords
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.basis.column(i).into_owned()
    }
}

impl ManifoldSpec {
    pub fn euclidean(n: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        ManifoldSpec {
            kind: ManifoldKind::Euclidean { n },
            dim: n,
            ambient_dim: n,
            k_min: 0.0,
            k_max: 0.0,
            injectivity_radius: f64::INFINITY,
        }
    }

    pub fn sphere(d: usize) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        ManifoldSpec {
            kind: ManifoldKind::Sphere { d },
            dim: d,
            ambient_dim: d + 1,
            k_min: 1.0,
            k_max: 1.0,
            injectivity_radius: std::f64::consts::PI,
        }
    }

    pub fn product_spheres(ds: Vec<usize>) -> Self {
        assert!(!ds.is_empty() && ds.iter().all(|&d| d >= 1));
        let dim: usize = ds.iter().sum();
        let ambient: usize = ds.iter().map(|d| d + 1).sum();
        // Mixed planes across factors are flat, so K_min drops to 0 for N >= 2.
        let k_min = if ds.len() == 1 { 1.0 } else { 0.0 };
        ManifoldSpec {
            kind: ManifoldKind::ProductSpheres { ds },
            dim,
            ambient_dim: ambient,
            k_min,
            k_max: 1.0,
            injectivity_radius: std::f64::consts::PI,
        }
    }

    pub fn stiefel(n: usize, p: usize) -> Self {
        assert!(p >= 1 && p <= n, "need 1 <= p <= n");
        ManifoldSpec {
            kind: ManifoldKind::Stiefel { n, p },
            dim: n * p - p * (p + 1) / 2,
            ambient_dim: n * p,
            k_min: 0.0,
            k_max: 1.0,
            injectivity_radius: std::f64::consts::PI,
        }
    }

    pub fn hyperbolic(n: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        ManifoldSpec {
            kind: ManifoldKind::Hyperbolic { n },
            dim: n,
            ambient_dim: n + 1,
            k_min: -1.0,
            k_max: -1.0,
            injectivity_radius: f64::INFINITY,
        }
    }

    pub fn from_kind(kind: ManifoldKind) -> Self {
        match kind {
            ManifoldKind::Euclidean { n } => Self::euclidean(n),
            ManifoldKind::Sphere { d } => Self::sphere(d),
            ManifoldKind::ProductSpheres { ds } => Self::product_spheres(ds),
            ManifoldKind::Stiefel { n, p } => Self::stiefel(n, p),
            ManifoldKind::Hyperbolic { n } => Self::hyperbolic(n),
        }
    }

    /// Complete, simply connected, non-positive curvature.
    pub fn is_hadamard(&self) -> bool {
        self.k_max <= 0.0 && self.injectivity_radius.is_infinite()
    }

    /// Sphere factor layout: (offset, block length) per factor, where block
    /// length is d_b + 1 ambient coordinates.
    fn sphere_blocks(&self) -> Vec<(usize, usize)> {
        match &self.kind {
            ManifoldKind::Sphere { d } => vec![(0, d + 1)],
            ManifoldKind::ProductSpheres { ds } => {
                let mut out = Vec::with_capacity(ds.len());
                let mut off = 0;
                for &d in ds {
                    out.push((off, d + 1));
                    off += d + 1;
                }
                out
            }
            _ => unreachable!("sphere_blocks on non-sphere kind"),
        }
    }

    // ------------------------------------------------------------------
    // Metric
    // ------------------------------------------------------------------

    /// Riemannian inner product of two ambient vectors at `x`.
    pub fn inner(&self, x: &Point, u: &Tangent, v: &Tangent) -> f64 {
        self.inner_raw(x, &u.vec, &v.vec)
    }

    pub fn inner_raw(&self, _x: &Point, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        match &self.kind {
            ManifoldKind::Hyperbolic { .. } => minkowski(u, v),
            _ => u.dot(v),
        }
    }

    pub fn norm(&self, x: &Point, u: &Tangent) -> f64 {
        self.norm_raw(x, &u.vec)
    }

    pub fn norm_raw(&self, x: &Point, u: &DVector<f64>) -> f64 {
        self.inner_raw(x, u, u).max(0.0).sqrt()
    }

    // ------------------------------------------------------------------
    // Invariant checks
    // ------------------------------------------------------------------

    pub fn check_point(&self, x: &Point) -> Result<()> {
        if x.coords.len() != self.ambient_dim {
            return Err(Error::precondition(format!(
                "point has ambient dimension {}, expected {}",
                x.coords.len(),
                self.ambient_dim
            )));
        }
        match &self.kind {
            ManifoldKind::Euclidean { .. } => Ok(()),
            ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => {
                for (off, len) in self.sphere_blocks() {
                    let block = x.coords.rows(off, len);
                    if (block.norm() - 1.0).abs() > POINT_TOL {
                        return Err(Error::domain(format!(
                            "sphere block at offset {off} has norm {} (expected 1)",
                            block.norm()
                        )));
                    }
                }
                Ok(())
            }
            ManifoldKind::Stiefel { n, p } => stiefel::check_point(*n, *p, &x.coords),
            ManifoldKind::Hyperbolic { .. } => {
                let q = minkowski(&x.coords, &x.coords);
                if (q + 1.0).abs() > POINT_TOL {
                    return Err(Error::domain(format!(
                        "hyperboloid point has Minkowski square {q} (expected -1)"
                    )));
                }
                if x.coords[0] <= 0.0 {
                    return Err(Error::domain(
                        "hyperboloid point has non-positive first coordinate".to_string(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn check_tangent(&self, t: &Tangent) -> Result<()> {
        self.check_point(&t.base)?;
        if t.vec.len() != self.ambient_dim {
            return Err(Error::precondition(
                "tangent vector has wrong ambient dimension".to_string(),
            ));
        }
        match &self.kind {
            ManifoldKind::Euclidean { .. } => Ok(()),
            ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => {
                for (off, len) in self.sphere_blocks() {
                    let xb = t.base.coords.rows(off, len);
                    let vb = t.vec.rows(off, len);
                    if xb.dot(&vb).abs() > POINT_TOL {
                        return Err(Error::domain(format!(
                            "tangent block at offset {off} is not orthogonal to its base"
                        )));
                    }
                }
                Ok(())
            }
            ManifoldKind::Stiefel { n, p } => {
                stiefel::check_tangent(*n, *p, &t.base.coords, &t.vec)
            }
            ManifoldKind::Hyperbolic { .. } => {
                let q = minkowski(&t.base.coords, &t.vec);
                if q.abs() > POINT_TOL {
                    return Err(Error::domain(format!(
                        "hyperboloid tangent has Minkowski product {q} with its base"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Orthogonal projection of an ambient vector onto the tangent space at `x`.
    pub fn project_tangent(&self, x: &Point, w: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            ManifoldKind::Euclidean { .. } => w.clone(),
            ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => {
                let mut out = w.clone();
                for (off, len) in self.sphere_blocks() {
                    let xb = x.coords.rows(off, len).into_owned();
                    let wb = w.rows(off, len).into_owned();
                    let proj = &wb - &xb * xb.dot(&wb);
                    out.rows_mut(off, len).copy_from(&proj);
                }
                out
            }
            ManifoldKind::Stiefel { n, p } => stiefel::project_tangent(*n, *p, &x.coords, w),
            ManifoldKind::Hyperbolic { .. } => {
                // <x,x> = -1, so P(w) = w + <x,w> x is Minkowski-orthogonal to x.
                w + &x.coords * minkowski(&x.coords, w)
            }
        }
    }

    // ------------------------------------------------------------------
    // Retractions, logarithm, distance
    // ------------------------------------------------------------------

    /// Move away from `x` along tangent `v` using the selected retraction.
    pub fn retract(&self, kind: RetractionKind, x: &Point, v: &Tangent) -> Result<Point> {
        if v.vec.iter().all(|&c| c == 0.0) {
            // Retraction axiom R_x(0) = x, bit-exact.
            return match kind {
                RetractionKind::Projection
                    if matches!(self.kind, ManifoldKind::Hyperbolic { .. }) =>
                {
                    self.project_retract(x, v)
                }
                _ => Ok(x.clone()),
            };
        }
        match kind {
            RetractionKind::Exponential => self.exp(x, v),
            RetractionKind::Projection => self.project_retract(x, v),
        }
    }

    /// Exponential-map retraction (geodesics).
    pub fn exp(&self, x: &Point, v: &Tangent) -> Result<Point> {
        match &self.kind {
            ManifoldKind::Euclidean { .. } => Ok(Point::new(&x.coords + &v.vec)),
            ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => {
                let mut out = x.coords.clone();
                for (off, len) in self.sphere_blocks() {
                    let xb = x.coords.rows(off, len).into_owned();
                    let vb = v.vec.rows(off, len).into_owned();
                    let yb = sphere_exp(&xb, &vb);
                    out.rows_mut(off, len).copy_from(&yb);
                }
                Ok(Point::new(out))
            }
            ManifoldKind::Stiefel { n, p } => {
                stiefel::exp(*n, *p, &x.coords, &v.vec).map(Point::new)
            }
            ManifoldKind::Hyperbolic { .. } => {
                let r = self.norm_raw(x, &v.vec);
                if r == 0.0 {
                    return Ok(x.clone());
                }
                let mut y = &x.coords * r.cosh() + &v.vec * (r.sinh() / r);
                relift_hyperboloid(&mut y);
                Ok(Point::new(y))
            }
        }
    }

    /// Metric projection retraction: nearest manifold point to x + v.
    fn project_retract(&self, x: &Point, v: &Tangent) -> Result<Point> {
        if matches!(self.kind, ManifoldKind::Hyperbolic { .. }) {
            return Err(Error::config(
                "projection retraction is not defined on the hyperboloid model".to_string(),
            ));
        }
        self.metric_project(&(&x.coords + &v.vec))
    }

    /// Nearest manifold point to an arbitrary ambient vector (normalization
    /// on spheres, polar factor on Stiefel). Undefined for the hyperboloid,
    /// which does not sit in a Euclidean ambient space.
    pub fn metric_project(&self, ambient: &DVector<f64>) -> Result<Point> {
        match &self.kind {
            ManifoldKind::Euclidean { .. } => Ok(Point::new(ambient.clone())),
            ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => {
                let mut out = ambient.clone();
                for (off, len) in self.sphere_blocks() {
                    let block = ambient.rows(off, len).into_owned();
                    let norm = block.norm();
                    if norm < 1e-14 {
                        return Err(Error::domain(
                            "metric projection input has no nearest point (zero block)".to_string(),
                        ));
                    }
                    out.rows_mut(off, len).copy_from(&(block / norm));
                }
                Ok(Point::new(out))
            }
            ManifoldKind::Stiefel { n, p } => {
                stiefel::polar_project(*n, *p, ambient).map(Point::new)
            }
            ManifoldKind::Hyperbolic { .. } => Err(Error::config(
                "metric projection is not defined on the hyperboloid model".to_string(),
            )),
        }
    }

    /// Riemannian logarithm: the tangent vector at `x` whose exponential is `y`.
    pub fn log_map(&self, x: &Point, y: &Point) -> Result<Tangent> {
        let vec = match &self.kind {
            ManifoldKind::Euclidean { .. } => &y.coords - &x.coords,
            ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => {
                let mut out = DVector::zeros(self.ambient_dim);
                for (off, len) in self.sphere_blocks() {
                    let xb = x.coords.rows(off, len).into_owned();
                    let yb = y.coords.rows(off, len).into_owned();
                    let vb = sphere_log(&xb, &yb)?;
                    out.rows_mut(off, len).copy_from(&vb);
                }
                out
            }
            ManifoldKind::Stiefel { n, p } => stiefel::log_shooting(self, *n, *p, x, y)?,
            ManifoldKind::Hyperbolic { .. } => {
                let c = -minkowski(&x.coords, &y.coords);
                let w = &y.coords - &x.coords * c;
                let d = hyperbolic_distance(&x.coords, &y.coords);
                if d == 0.0 {
                    DVector::zeros(self.ambient_dim)
                } else {
                    // |w|_L = sinh(d)
                    let wn = minkowski(&w, &w).max(0.0).sqrt();
                    if wn == 0.0 {
                        return Err(Error::domain(
                            "hyperbolic log: degenerate direction".to_string(),
                        ));
                    }
                    &w * (d / wn)
                }
            }
        };
        Ok(Tangent::new(x.clone(), vec))
    }

    /// Geodesic distance.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        match &self.kind {
            ManifoldKind::Euclidean { .. } => Ok((&y.coords - &x.coords).norm()),
            ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => {
                let mut sq = 0.0;
                for (off, len) in self.sphere_blocks() {
                    let xb = x.coords.rows(off, len).into_owned();
                    let yb = y.coords.rows(off, len).into_owned();
                    let theta = sphere_angle(&xb, &yb);
                    sq += theta * theta;
                }
                Ok(sq.sqrt())
            }
            ManifoldKind::Stiefel { .. } => {
                let v = self.log_map(x, y)?;
                Ok(self.norm(x, &v))
            }
            ManifoldKind::Hyperbolic { .. } => Ok(hyperbolic_distance(&x.coords, &y.coords)),
        }
    }

    // ------------------------------------------------------------------
    // Parallel transport
    // ------------------------------------------------------------------

    /// Transport `u` along the geodesic s -> Exp_x(s v_dir) from s = 0 to s = t.
    pub fn parallel_transport(
        &self,
        x: &Point,
        v_dir: &Tangent,
        t: f64,
        u: &Tangent,
    ) -> Result<Tangent> {
        let dest = self.exp(x, &Tangent::new(x.clone(), &v_dir.vec * t))?;
        let vec = match &self.kind {
            ManifoldKind::Euclidean { .. } => u.vec.clone(),
            ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => {
                let mut out = u.vec.clone();
                for (off, len) in self.sphere_blocks() {
                    let xb = x.coords.rows(off, len).into_owned();
                    let vb = v_dir.vec.rows(off, len).into_owned();
                    let ub = u.vec.rows(off, len).into_owned();
                    let speed = vb.norm();
                    if speed > 0.0 {
                        let unit = &vb / speed;
                        let d = t * speed;
                        let a = unit.dot(&ub);
                        let moved = &ub + (&xb * (-d.sin()) + &unit * (d.cos() - 1.0)) * a;
                        out.rows_mut(off, len).copy_from(&moved);
                    }
                }
                out
            }
            ManifoldKind::Stiefel { n, p } => {
                stiefel::transport_ode(self, *n, *p, x, &v_dir.vec, t, &u.vec, &dest)?
            }
            ManifoldKind::Hyperbolic { .. } => {
                let speed = self.norm_raw(x, &v_dir.vec);
                if speed == 0.0 {
                    u.vec.clone()
                } else {
                    let unit = &v_dir.vec / speed;
                    let d = t * speed;
                    let a = minkowski(&unit, &u.vec);
                    &u.vec + (&x.coords * d.sinh() + &unit * (d.cosh() - 1.0)) * a
                }
            }
        };
        // Drop numerical drift out of the destination tangent space.
        let vec = self.project_tangent(&dest, &vec);
        Ok(Tangent::new(dest, vec))
    }

    /// Transport a whole frame from its base to `y` along the connecting geodesic.
    pub fn transport_frame(&self, frame: &Frame, y: &Point) -> Result<Frame> {
        let v = self.log_map(&frame.base, y)?;
        let dim = frame.basis.ncols();
        let mut basis = DMatrix::zeros(self.ambient_dim, dim);
        for i in 0..dim {
            let u = Tangent::new(frame.base.clone(), frame.column(i));
            let moved = self.parallel_transport(&frame.base, &v, 1.0, &u)?;
            basis.set_column(i, &moved.vec);
        }
        Ok(Frame {
            base: y.clone(),
            basis,
        })
    }

    // ------------------------------------------------------------------
    // Frames
    // ------------------------------------------------------------------

    /// Deterministic orthonormal tangent frame at `x`: Gram-Schmidt over the
    /// ambient basis vectors projected to the tangent space, in fixed index
    /// order, skipping near-zero residuals.
    pub fn tangent_frame(&self, x: &Point) -> Frame {
        let candidates: Vec<DVector<f64>> = (0..self.ambient_dim)
            .map(|i| {
                let mut e = DVector::zeros(self.ambient_dim);
                e[i] = 1.0;
                e
            })
            .collect();
        let basis = self.gram_schmidt(x, &candidates, None);
        assert_eq!(
            basis.ncols(),
            self.dim,
            "tangent frame construction produced wrong dimension"
        );
        Frame {
            base: x.clone(),
            basis,
        }
    }

    /// Orthonormal frame whose first vector is `first / |first|`, completed by
    /// Gram-Schmidt over projected ambient basis vectors.
    fn adapted_frame(&self, x: &Point, first: &DVector<f64>) -> Frame {
        let mut candidates = Vec::with_capacity(self.ambient_dim + 1);
        candidates.push(first.clone());
        for i in 0..self.ambient_dim {
            let mut e = DVector::zeros(self.ambient_dim);
            e[i] = 1.0;
            candidates.push(e);
        }
        let basis = self.gram_schmidt(x, &candidates, None);
        assert_eq!(basis.ncols(), self.dim);
        Frame {
            base: x.clone(),
            basis,
        }
    }

    /// Gram-Schmidt in the Riemannian metric at `x`, restricted to
    /// `block`'s coordinates when given (used for product manifolds).
    fn gram_schmidt(
        &self,
        x: &Point,
        candidates: &[DVector<f64>],
        block: Option<(usize, usize)>,
    ) -> DMatrix<f64> {
        let target_dim = match block {
            Some(_) => usize::MAX, // caller truncates
            None => self.dim,
        };
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for cand in candidates {
            if cols.len() >= target_dim {
                break;
            }
            let mut v = self.project_tangent(x, cand);
            if let Some((off, len)) = block {
                // Zero everything outside the block.
                let kept = v.rows(off, len).into_owned();
                v = DVector::zeros(self.ambient_dim);
                v.rows_mut(off, len).copy_from(&kept);
            }
            for c in &cols {
                let a = self.inner_raw(x, c, &v);
                v -= c * a;
            }
            let n = self.norm_raw(x, &v);
            if n < 1e-8 {
                continue;
            }
            cols.push(v / n);
        }
        let mut out = DMatrix::zeros(self.ambient_dim, cols.len());
        for (i, c) in cols.iter().enumerate() {
            out.set_column(i, c);
        }
        out
    }

    // ------------------------------------------------------------------
    // Jacobi endpoints and the Hessian of the half-squared distance
    // ------------------------------------------------------------------

    /// Endpoint matrices (J0(1), J1(1)) of the normalized Jacobi fields along
    /// the geodesic t -> Exp_x(t v), expressed in the coordinates of
    /// `tangent_frame(x)` (source) and its parallel transport (target).
    ///
    /// Only constant-curvature kinds are supported; products of spheres are
    /// handled blockwise. The matrices are built diagonal in a frame adapted
    /// to v and conjugated back to the canonical frame, so J0(0) = 0 and
    /// D_t J0(0) = I hold by construction of the closed form.
    pub fn jacobi_endpoints(&self, x: &Point, v: &Tangent) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (frame, d0, d1) = self.adapted_jacobi_diagonals(x, &v.vec)?;
        let q = self.frame_change(x, &frame);
        let j0 = q.transpose() * DMatrix::from_diagonal(&d0) * &q;
        let j1 = q.transpose() * DMatrix::from_diagonal(&d1) * &q;
        Ok((j0, j1))
    }

    /// Hessian at `x` of z -> dist(z, y)^2 / 2, in `tangent_frame(x)` coordinates.
    pub fn hess_half_sq_dist(&self, x: &Point, y: &Point) -> Result<DMatrix<f64>> {
        let v = self.log_map(x, y)?;
        let (frame, eig) = self.adapted_hess_diagonal(x, &v.vec)?;
        let q = self.frame_change(x, &frame);
        Ok(q.transpose() * DMatrix::from_diagonal(&eig) * &q)
    }

    /// Change-of-basis matrix Q with Q[i][j] = <adapted_i, canonical_j>,
    /// so an operator diagonal in the adapted frame becomes Q^T D Q in
    /// canonical coordinates.
    fn frame_change(&self, x: &Point, adapted: &Frame) -> DMatrix<f64> {
        let canon = self.tangent_frame(x);
        let dim = self.dim;
        DMatrix::from_fn(dim, dim, |i, j| {
            self.inner_raw(
                x,
                &adapted.basis.column(i).into_owned(),
                &canon.basis.column(j).into_owned(),
            )
        })
    }

    /// Adapted frame plus the diagonals of J0(1) and J1(1) in that frame.
    fn adapted_jacobi_diagonals(
        &self,
        x: &Point,
        v: &DVector<f64>,
    ) -> Result<(Frame, DVector<f64>, DVector<f64>)> {
        match &self.kind {
            ManifoldKind::Euclidean { .. } => {
                let frame = self.tangent_frame(x);
                let ones = DVector::from_element(self.dim, 1.0);
                Ok((frame, ones.clone(), ones))
            }
            ManifoldKind::Hyperbolic { .. } => {
                let r = self.norm_raw(x, v);
                let frame = if r > 0.0 {
                    self.adapted_frame(x, v)
                } else {
                    self.tangent_frame(x)
                };
                let (o0, o1) = jacobi_entries(-1.0, r);
                let mut d0 = DVector::from_element(self.dim, o0);
                let mut d1 = DVector::from_element(self.dim, o1);
                if r > 0.0 {
                    d0[0] = 1.0;
                    d1[0] = 1.0;
                }
                Ok((frame, d0, d1))
            }
            ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => self
                .blockwise_adapted(x, v, |r| {
                    if r >= std::f64::consts::PI {
                        return Err(Error::domain(format!(
                            "conjugate point: geodesic block length {r} >= pi"
                        )));
                    }
                    Ok(jacobi_entries(1.0, r))
                }),
            ManifoldKind::Stiefel { .. } => Err(Error::config(
                "Jacobi closed forms require a constant-curvature manifold".to_string(),
            )),
        }
    }

    /// Adapted frame plus the eigenvalues of Hess(dist(., y)^2 / 2) at x,
    /// where v = Log_x(y).
    fn adapted_hess_diagonal(&self, x: &Point, v: &DVector<f64>) -> Result<(Frame, DVector<f64>)> {
        match &self.kind {
            ManifoldKind::Euclidean { .. } => {
                Ok((self.tangent_frame(x), DVector::from_element(self.dim, 1.0)))
            }
            ManifoldKind::Hyperbolic { .. } => {
                let r = self.norm_raw(x, v);
                let frame = if r > 0.0 {
                    self.adapted_frame(x, v)
                } else {
                    self.tangent_frame(x)
                };
                let mut d = DVector::from_element(self.dim, hess_dist_entry(-1.0, r));
                if r > 0.0 {
                    d[0] = 1.0;
                }
                Ok((frame, d))
            }
            ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => {
                let (frame, d, _) = self.blockwise_adapted(x, v, |r| {
                    if r >= std::f64::consts::PI {
                        return Err(Error::domain(format!(
                            "cut locus: geodesic block length {r} >= pi"
                        )));
                    }
                    Ok((hess_dist_entry(1.0, r), 0.0))
                })?;
                Ok((frame, d))
            }
            ManifoldKind::Stiefel { .. } => Err(Error::config(
                "distance Hessian closed form requires a constant-curvature manifold".to_string(),
            )),
        }
    }

    /// Shared machinery for sphere-like kinds: per block, build an adapted
    /// sub-frame (first vector along the block of v) and fill per-direction
    /// entries from `entry(r_block)`, with the parallel direction pinned to 1.
    fn blockwise_adapted(
        &self,
        x: &Point,
        v: &DVector<f64>,
        entry: impl Fn(f64) -> Result<(f64, f64)>,
    ) -> Result<(Frame, DVector<f64>, DVector<f64>)> {
        let blocks = self.sphere_blocks();
        let mut cols: Vec<DVector<f64>> = Vec::new();
        let mut d0 = Vec::new();
        let mut d1 = Vec::new();
        for (off, len) in blocks {
            let vb = v.rows(off, len).into_owned();
            let r = vb.norm();
            let (o0, o1) = entry(r)?;
            let mut candidates = Vec::new();
            if r > 0.0 {
                let mut lift = DVector::zeros(self.ambient_dim);
                lift.rows_mut(off, len).copy_from(&vb);
                candidates.push(lift);
            }
            for i in 0..len {
                let mut e = DVector::zeros(self.ambient_dim);
                e[off + i] = 1.0;
                candidates.push(e);
            }
            let sub = self.gram_schmidt(x, &candidates, Some((off, len)));
            let block_dim = len - 1;
            assert!(sub.ncols() >= block_dim);
            for i in 0..block_dim {
                cols.push(sub.column(i).into_owned());
                if i == 0 && r > 0.0 {
                    d0.push(1.0);
                    d1.push(1.0);
                } else {
                    d0.push(o0);
                    d1.push(o1);
                }
            }
        }
        let mut basis = DMatrix::zeros(self.ambient_dim, cols.len());
        for (i, c) in cols.iter().enumerate() {
            basis.set_column(i, c);
        }
        assert_eq!(basis.ncols(), self.dim);
        Ok((
            Frame {
                base: x.clone(),
                basis,
            },
            DVector::from_vec(d0),
            DVector::from_vec(d1),
        ))
    }
}

// ----------------------------------------------------------------------
// Scalar closed forms
// ----------------------------------------------------------------------

/// Orthogonal-direction entries (J0(1), J1(1)) for curvature K and
/// geodesic length r, in the t-in-[0,1] normalization (J0(0) = 0,
/// D_t J0(0) = I).
fn jacobi_entries(k: f64, r: f64) -> (f64, f64) {
    if r == 0.0 {
        return (1.0, 1.0);
    }
    if k > 0.0 {
        let s = k.sqrt() * r;
        (s.sin() / s, s.cos())
    } else if k < 0.0 {
        let s = (-k).sqrt() * r;
        (s.sinh() / s, s.cosh())
    } else {
        (1.0, 1.0)
    }
}

/// Orthogonal-direction eigenvalue of Hess(dist(., y)^2 / 2) at distance r:
/// the ratio J1(1) / J0(1).
fn hess_dist_entry(k: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    if k > 0.0 {
        let s = k.sqrt() * r;
        s * s.cos() / s.sin()
    } else if k < 0.0 {
        let s = (-k).sqrt() * r;
        s * s.cosh() / s.sinh()
    } else {
        1.0
    }
}

// ----------------------------------------------------------------------
// Single-sphere and hyperboloid helpers
// ----------------------------------------------------------------------

fn sphere_exp(x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let r = v.norm();
    if r == 0.0 {
        return x.clone();
    }
    let mut y = x * r.cos() + v * (r.sin() / r);
    let n = y.norm();
    y /= n;
    y
}

/// Angle between unit vectors, accurate near 0 and near pi.
fn sphere_angle(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let c = x.dot(y);
    let w = y - x * c;
    w.norm().atan2(c)
}

fn sphere_log(x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let c = x.dot(y);
    let w = y - x * c;
    let s = w.norm();
    let theta = s.atan2(c);
    if theta == 0.0 {
        return Ok(DVector::zeros(x.len()));
    }
    if s < 1e-14 {
        if c < 0.0 {
            return Err(Error::domain(
                "log map at the cut locus: points are antipodal".to_string(),
            ));
        }
        // Coincident up to rounding: theta ~ s, so the ratio is benign.
        return Ok(DVector::zeros(x.len()));
    }
    Ok(w * (theta / s))
}

pub(crate) fn minkowski(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let mut s = -u[0] * v[0];
    for i in 1..u.len() {
        s += u[i] * v[i];
    }
    s
}

fn hyperbolic_distance(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    // acosh(-<x,y>) computed through the difference vector, which keeps
    // full accuracy for nearby points: -<x,y> = 1 + <y-x, y-x>/2.
    let d = y - x;
    let s = (0.5 * minkowski(&d, &d)).max(0.0);
    (s + (s * (s + 2.0)).sqrt()).ln_1p()
}

fn relift_hyperboloid(y: &mut DVector<f64>) {
    let spatial: f64 = (1..y.len()).map(|i| y[i] * y[i]).sum();
    y[0] = (1.0 + spatial).sqrt();
}

#[cfg(test)]
mod tests;
