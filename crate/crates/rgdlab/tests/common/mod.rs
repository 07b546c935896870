//! Independent numerical oracles for the integration tests: direct RK4
//! integration of the geodesic, parallel-transport, and Jacobi equations.
//! These deliberately avoid the library's closed forms so the two routes
//! check each other.

// Each test target compiles this module separately and uses a subset.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rgdlab::geometry::{ManifoldKind, ManifoldSpec, Point};

pub fn minkowski(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let mut s = -u[0] * v[0];
    for i in 1..u.len() {
        s += u[i] * v[i];
    }
    s
}

fn sphere_blocks(m: &ManifoldSpec) -> Vec<(usize, usize)> {
    match &m.kind {
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
        _ => panic!("not a sphere-like manifold"),
    }
}

/// Geodesic acceleration in ambient coordinates for each embedded model.
fn acceleration(m: &ManifoldSpec, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    match &m.kind {
        ManifoldKind::Euclidean { n } => DVector::zeros(*n),
        ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => {
            let mut a = DVector::zeros(x.len());
            for (off, len) in sphere_blocks(m) {
                let xb = x.rows(off, len).into_owned();
                let vb = v.rows(off, len).into_owned();
                let ab = -&xb * vb.norm_squared();
                a.rows_mut(off, len).copy_from(&ab);
            }
            a
        }
        ManifoldKind::Hyperbolic { .. } => x * minkowski(v, v),
        ManifoldKind::Stiefel { n, p } => {
            // Xdd = -X (Xd^T Xd) for the embedded metric.
            let xm = DMatrix::from_column_slice(*n, *p, x.as_slice());
            let vm = DMatrix::from_column_slice(*n, *p, v.as_slice());
            let a = -&xm * (vm.transpose() * &vm);
            DVector::from_column_slice(a.as_slice())
        }
    }
}

/// Integrate the geodesic equation from (x0, v0) over t in [0, 1] with RK4.
/// Returns (x(1), x'(1)).
pub fn rk4_geodesic(
    m: &ManifoldSpec,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    steps: usize,
) -> (DVector<f64>, DVector<f64>) {
    let h = 1.0 / steps as f64;
    let mut x = x0.clone();
    let mut v = v0.clone();
    for _ in 0..steps {
        let k1x = v.clone();
        let k1v = acceleration(m, &x, &v);
        let k2x = &v + &k1v * (0.5 * h);
        let k2v = acceleration(m, &(&x + &k1x * (0.5 * h)), &(&v + &k1v * (0.5 * h)));
        let k3x = &v + &k2v * (0.5 * h);
        let k3v = acceleration(m, &(&x + &k2x * (0.5 * h)), &(&v + &k2v * (0.5 * h)));
        let k4x = &v + &k3v * h;
        let k4v = acceleration(m, &(&x + &k3x * h), &(&v + &k3v * h));
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
    }
    (x, v)
}

/// Tangent projector for the embedded models.
fn project(m: &ManifoldSpec, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    match &m.kind {
        ManifoldKind::Euclidean { .. } => w.clone(),
        ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => {
            let mut out = w.clone();
            for (off, len) in sphere_blocks(m) {
                let xb = x.rows(off, len).into_owned();
                let wb = w.rows(off, len).into_owned();
                let pb = &wb - &xb * xb.dot(&wb);
                out.rows_mut(off, len).copy_from(&pb);
            }
            out
        }
        ManifoldKind::Hyperbolic { .. } => w + x * minkowski(x, w),
        ManifoldKind::Stiefel { n, p } => {
            let xm = DMatrix::from_column_slice(*n, *p, x.as_slice());
            let wm = DMatrix::from_column_slice(*n, *p, w.as_slice());
            let s = (xm.transpose() * &wm + wm.transpose() * &xm) * 0.5;
            let pm = &wm - &xm * s;
            DVector::from_column_slice(pm.as_slice())
        }
    }
}

/// Parallel-transport u0 along the geodesic with initial data (x0, v0) to
/// t = 1 by integrating W' = (I - P)(P' W) together with the geodesic.
pub fn rk4_transport(
    m: &ManifoldSpec,
    x0: &DVector<f64>,
    v0: &DVector<f64>,
    u0: &DVector<f64>,
    steps: usize,
) -> DVector<f64> {
    let h = 1.0 / steps as f64;
    let mut x = x0.clone();
    let mut v = v0.clone();
    let mut w = u0.clone();
    let dp = |x: &DVector<f64>, xd: &DVector<f64>, w: &DVector<f64>| -> DVector<f64> {
        // d/dt P(x(t)) w by central differences through the projector.
        let eps = 1e-6;
        (project(m, &(x + xd * eps), w) - project(m, &(x - xd * eps), w)) / (2.0 * eps)
    };
    for _ in 0..steps {
        let f = |x: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>| {
            let pw = dp(x, v, w);
            &pw - project(m, x, &pw)
        };
        let k1x = v.clone();
        let k1v = acceleration(m, &x, &v);
        let k1w = f(&x, &v, &w);
        let x2 = &x + &k1x * (0.5 * h);
        let v2 = &v + &k1v * (0.5 * h);
        let k2x = v2.clone();
        let k2v = acceleration(m, &x2, &v2);
        let k2w = f(&x2, &v2, &(&w + &k1w * (0.5 * h)));
        let x3 = &x + &k2x * (0.5 * h);
        let v3 = &v + &k2v * (0.5 * h);
        let k3x = v3.clone();
        let k3v = acceleration(m, &x3, &v3);
        let k3w = f(&x3, &v3, &(&w + &k2w * (0.5 * h)));
        let x4 = &x + &k3x * h;
        let v4 = &v + &k3v * h;
        let k4x = v4.clone();
        let k4v = acceleration(m, &x4, &v4);
        let k4w = f(&x4, &v4, &(&w + &k3w * h));
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        w += (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * (h / 6.0);
    }
    w
}

/// Solve the scalar Jacobi equation j'' = -k r^2 j on [0, 1].
pub fn rk4_jacobi(k: f64, r: f64, j0: f64, dj0: f64, steps: usize) -> f64 {
    let h = 1.0 / steps as f64;
    let (mut j, mut dj) = (j0, dj0);
    let acc = |j: f64| -k * r * r * j;
    for _ in 0..steps {
        let k1j = dj;
        let k1d = acc(j);
        let k2j = dj + 0.5 * h * k1d;
        let k2d = acc(j + 0.5 * h * k1j);
        let k3j = dj + 0.5 * h * k2d;
        let k3d = acc(j + 0.5 * h * k2j);
        let k4j = dj + h * k3d;
        let k4d = acc(j + h * k3j);
        j += h / 6.0 * (k1j + 2.0 * k2j + 2.0 * k3j + k4j);
        dj += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
    }
    j
}

/// Deterministic pseudo-random point on the manifold, seeded by `seed`.
pub fn seeded_point(m: &ManifoldSpec, seed: u64) -> Point {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let raw = DVector::from_fn(m.ambient_dim, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    match &m.kind {
        ManifoldKind::Euclidean { .. } => Point::new(raw),
        ManifoldKind::Sphere { .. } | ManifoldKind::ProductSpheres { .. } => {
            let mut out = raw;
            for (off, len) in sphere_blocks(m) {
                let n = out.rows(off, len).norm();
                let scaled = out.rows(off, len).into_owned() / n;
                out.rows_mut(off, len).copy_from(&scaled);
            }
            Point::new(out)
        }
        ManifoldKind::Hyperbolic { n } => {
            let mut coords = DVector::zeros(n + 1);
            let spatial = raw.rows(0, *n).into_owned() * 0.6;
            coords[0] = (1.0 + spatial.norm_squared()).sqrt();
            coords.rows_mut(1, *n).copy_from(&spatial);
            Point::new(coords)
        }
        ManifoldKind::Stiefel { n, p } => {
            let raw = DMatrix::from_fn(*n, *p, |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            let svd = raw.svd(true, true);
            let q = svd.u.unwrap() * svd.v_t.unwrap();
            Point::new(DVector::from_column_slice(q.as_slice()))
        }
    }
}

/// Deterministic pseudo-random tangent vector at x with the given norm.
pub fn seeded_tangent(
    m: &ManifoldSpec,
    x: &Point,
    seed: u64,
    norm: f64,
) -> rgdlab::geometry::Tangent {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let raw = DVector::from_fn(m.ambient_dim, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    let mut v = m.project_tangent(x, &raw);
    let n = m.norm_raw(x, &v);
    assert!(n > 1e-12, "degenerate tangent sample");
    v *= norm / n;
    rgdlab::geometry::Tangent::new(x.clone(), v)
}
