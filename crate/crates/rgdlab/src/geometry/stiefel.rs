//! Stiefel manifold St(n, p) with the Euclidean (embedded) metric.
//!
//! Points are n x p matrices with orthonormal columns, flattened
//! column-major into ambient vectors. The exponential retraction uses the
//! 2p x 2p matrix-exponential geodesic formula for the embedded metric;
//! the projection retraction takes the polar factor of X + V. There is no
//! closed-form logarithm or parallel transport for this metric, so the
//! logarithm is computed by Gauss-Newton shooting and transport by
//! integrating the transport equation along the geodesic.

use super::{ManifoldSpec, Point};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

pub fn to_matrix(n: usize, p: usize, coords: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, p, coords.as_slice())
}

pub fn to_vector(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn check_point(n: usize, p: usize, coords: &DVector<f64>) -> Result<()> {
    let x = to_matrix(n, p, coords);
    let gram = x.transpose() * &x;
    let eye = DMatrix::identity(p, p);
    let dev = (&gram - &eye).abs().max();
    if dev > super::POINT_TOL {
        return Err(Error::domain(format!(
            "Stiefel point violates X^T X = I by {dev:e}"
        )));
    }
    Ok(())
}

pub fn check_tangent(n: usize, p: usize, base: &DVector<f64>, vec: &DVector<f64>) -> Result<()> {
    let x = to_matrix(n, p, base);
    let v = to_matrix(n, p, vec);
    let s = x.transpose() * &v + v.transpose() * &x;
    let dev = s.abs().max();
    if dev > super::POINT_TOL {
        return Err(Error::domain(format!(
            "Stiefel tangent violates X^T V + V^T X = 0 by {dev:e}"
        )));
    }
    Ok(())
}

pub fn project_tangent(n: usize, p: usize, base: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let x = to_matrix(n, p, base);
    let wm = to_matrix(n, p, w);
    let proj = &wm - &x * sym(&(x.transpose() * &wm));
    to_vector(&proj)
}

/// Geodesic for the embedded metric: with A = X^T V (skew) and S = V^T V,
///
///   X(t) = [X V] expm(t [[A, -S], [I, A]]) [I; 0] expm(-t A).
///
/// The result is passed through a polar correction to keep long runs on the
/// manifold to machine precision.
pub fn exp(n: usize, p: usize, base: &DVector<f64>, vec: &DVector<f64>) -> Result<DVector<f64>> {
    let x = to_matrix(n, p, base);
    let v = to_matrix(n, p, vec);
    let a = x.transpose() * &v;
    let s = v.transpose() * &v;

    let mut block = DMatrix::zeros(2 * p, 2 * p);
    block.view_mut((0, 0), (p, p)).copy_from(&a);
    block.view_mut((0, p), (p, p)).copy_from(&(-&s));
    block
        .view_mut((p, 0), (p, p))
        .copy_from(&DMatrix::identity(p, p));
    block.view_mut((p, p), (p, p)).copy_from(&a);

    let big = block.exp();
    let small = (-a).exp();

    let mut xv = DMatrix::zeros(n, 2 * p);
    xv.view_mut((0, 0), (n, p)).copy_from(&x);
    xv.view_mut((0, p), (n, p)).copy_from(&v);

    let top = big.view((0, 0), (2 * p, p)).into_owned();
    let y = xv * top * small;
    let y = polar(&y)?;
    Ok(to_vector(&y))
}

pub fn polar_project(n: usize, p: usize, ambient: &DVector<f64>) -> Result<DVector<f64>> {
    let y = polar(&to_matrix(n, p, ambient))?;
    Ok(to_vector(&y))
}

/// Polar factor via SVD. Errors when the input is (numerically) rank deficient,
/// in which case the nearest orthonormal frame is not unique.
fn polar(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-12 * smax.max(1.0) {
        return Err(Error::domain(
            "polar projection of a rank-deficient matrix".to_string(),
        ));
    }
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    Ok(u * vt)
}

/// Riemannian logarithm by shooting: Gauss-Newton on
/// phi(c) = |Exp_X(F c) - Y|^2 / 2 over tangent-frame coordinates c.
pub fn log_shooting(
    m: &ManifoldSpec,
    n: usize,
    p: usize,
    x: &Point,
    y: &Point,
) -> Result<DVector<f64>> {
    let frame = m.tangent_frame(x);
    let dim = m.dim;
    let chord = project_tangent(n, p, &x.coords, &(&y.coords - &x.coords));
    let mut c = frame.coords_of(m, &chord);

    let scale = (&y.coords - &x.coords).norm().max(1e-3);
    let fd_h = 1e-6 * scale.max(1.0);
    for _ in 0..60 {
        let v = frame.vector_from(&c);
        let reached = exp(n, p, &x.coords, &v)?;
        let res = &reached - &y.coords;
        if res.norm() <= 1e-12 * scale {
            return Ok(v);
        }
        // Jacobian of Exp w.r.t. frame coordinates, central differences.
        let mut jac = DMatrix::zeros(m.ambient_dim, dim);
        for j in 0..dim {
            let mut cp = c.clone();
            cp[j] += fd_h;
            let mut cm = c.clone();
            cm[j] -= fd_h;
            let fp = exp(n, p, &x.coords, &frame.vector_from(&cp))?;
            let fm = exp(n, p, &x.coords, &frame.vector_from(&cm))?;
            jac.set_column(j, &((fp - fm) / (2.0 * fd_h)));
        }
        let jt = jac.transpose();
        let gram = &jt * &jac;
        let rhs = &jt * &res;
        let delta = gram.lu().solve(&rhs).ok_or_else(|| {
            Error::domain("Stiefel logarithm: singular shooting system".to_string())
        })?;
        c -= delta;
    }
    Err(Error::domain(
        "Stiefel logarithm shooting did not converge".to_string(),
    ))
}

/// Parallel transport along the geodesic s -> Exp_x(s t v_dir), s in [0, 1],
/// by RK4 integration of W' = (I - P)(P' W) where P is the tangent projector
/// along the curve.
pub fn transport_ode(
    _m: &ManifoldSpec,
    n: usize,
    p: usize,
    x: &Point,
    v_dir: &DVector<f64>,
    t: f64,
    u: &DVector<f64>,
    dest: &Point,
) -> Result<DVector<f64>> {
    let total = v_dir * t;
    let speed = total.norm();
    if speed == 0.0 {
        return Ok(u.clone());
    }
    let steps = 400usize.max((200.0 * speed) as usize);
    let h = 1.0 / steps as f64;
    let curve = |s: f64| exp(n, p, &x.coords, &(&total * s));
    let vel_h = 1e-6;

    let deriv = |s: f64, w: &DVector<f64>| -> Result<DVector<f64>> {
        let xs = curve(s)?;
        let xdot = (curve((s + vel_h).min(1.0))? - curve((s - vel_h).max(0.0))?)
            / ((s + vel_h).min(1.0) - (s - vel_h).max(0.0));
        let xm = to_matrix(n, p, &xs);
        let xd = to_matrix(n, p, &xdot);
        let wm = to_matrix(n, p, w);
        // P'(W) with P(W) = W - X sym(X^T W)
        let pdot = -(&xd * sym(&(xm.transpose() * &wm)) + &xm * sym(&(xd.transpose() * &wm)));
        let pdot = to_vector(&pdot);
        let tangential = project_tangent(n, p, &xs, &pdot);
        Ok(pdot - tangential)
    };

    let mut w = u.clone();
    for k in 0..steps {
        let s = k as f64 * h;
        let k1 = deriv(s, &w)?;
        let k2 = deriv(s + 0.5 * h, &(&w + &k1 * (0.5 * h)))?;
        let k3 = deriv(s + 0.5 * h, &(&w + &k2 * (0.5 * h)))?;
        let k4 = deriv(s + h, &(&w + &k3 * h))?;
        w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(project_tangent(n, p, &dest.coords, &w))
}
