use super::*;
use approx::assert_relative_eq;
use std::f64::consts::PI;

fn s2() -> ManifoldSpec {
    ManifoldSpec::sphere(2)
}

fn h2() -> ManifoldSpec {
    ManifoldSpec::hyperbolic(2)
}

fn pt(coords: &[f64]) -> Point {
    Point::from_slice(coords)
}

fn tan(base: &Point, vec: &[f64]) -> Tangent {
    Tangent::new(base.clone(), DVector::from_column_slice(vec))
}

/// Lift spatial coordinates onto the hyperboloid.
fn hyp_point(spatial: &[f64]) -> Point {
    let sq: f64 = spatial.iter().map(|z| z * z).sum();
    let mut coords = vec![(1.0 + sq).sqrt()];
    coords.extend_from_slice(spatial);
    pt(&coords)
}

#[test]
fn sphere_exponential_quarter_turn() {
    let m = s2();
    let x = pt(&[1.0, 0.0, 0.0]);
    let v = tan(&x, &[0.0, PI / 2.0, 0.0]);
    let y = m.retract(RetractionKind::Exponential, &x, &v).unwrap();
    assert_relative_eq!(y.coords[0], 0.0, epsilon = 1e-12);
    assert_relative_eq!(y.coords[1], 1.0, epsilon = 1e-12);
    assert_relative_eq!(y.coords[2], 0.0, epsilon = 1e-12);
}

#[test]
fn sphere_projection_retraction() {
    let m = s2();
    let x = pt(&[1.0, 0.0, 0.0]);
    let v = tan(&x, &[0.0, 1.0, 0.0]);
    let y = m.retract(RetractionKind::Projection, &x, &v).unwrap();
    let s = 1.0 / 2.0_f64.sqrt();
    assert_relative_eq!(y.coords[0], s, epsilon = 1e-12);
    assert_relative_eq!(y.coords[1], s, epsilon = 1e-12);
}

#[test]
fn zero_tangent_retracts_to_base() {
    for m in [
        ManifoldSpec::euclidean(3),
        s2(),
        h2(),
        ManifoldSpec::stiefel(4, 2),
        ManifoldSpec::product_spheres(vec![2, 1]),
    ] {
        let x = sample_point(&m);
        let v = Tangent::zero(&x);
        for kind in [RetractionKind::Exponential, RetractionKind::Projection] {
            if matches!(m.kind, ManifoldKind::Hyperbolic { .. })
                && kind == RetractionKind::Projection
            {
                continue;
            }
            let y = m.retract(kind, &x, &v).unwrap();
            assert!((y.coords - &x.coords).norm() < 1e-12);
        }
    }
}

/// A fixed, manifold-appropriate test point.
fn sample_point(m: &ManifoldSpec) -> Point {
    match &m.kind {
        ManifoldKind::Euclidean { n } => Point::new(DVector::from_fn(*n, |i, _| i as f64 - 0.3)),
        ManifoldKind::Sphere { d } => {
            let mut v = DVector::from_fn(d + 1, |i, _| (i as f64 + 1.0).sin() + 0.2);
            v /= v.norm();
            Point::new(v)
        }
        ManifoldKind::ProductSpheres { ds } => {
            let mut coords = Vec::new();
            for (b, &d) in ds.iter().enumerate() {
                let mut v = DVector::from_fn(d + 1, |i, _| ((b + i) as f64 + 0.7).cos() + 0.1);
                v /= v.norm();
                coords.extend_from_slice(v.as_slice());
            }
            pt(&coords)
        }
        ManifoldKind::Stiefel { n, p } => {
            let raw = DMatrix::from_fn(*n, *p, |i, j| ((i * 3 + j * 7) as f64 * 0.639).sin());
            let svd = raw.svd(true, true);
            let q = svd.u.unwrap() * svd.v_t.unwrap();
            Point::new(DVector::from_column_slice(q.as_slice()))
        }
        ManifoldKind::Hyperbolic { n } => {
            let spatial: Vec<f64> = (0..*n).map(|i| 0.4 * (i as f64 + 1.0).sin()).collect();
            hyp_point(&spatial)
        }
    }
}

#[test]
fn sphere_log_inverts_exp() {
    let m = s2();
    let x = pt(&[1.0, 0.0, 0.0]);
    let y = pt(&[0.0, 1.0, 0.0]);
    let v = m.log_map(&x, &y).unwrap();
    assert_relative_eq!(v.vec[1], PI / 2.0, epsilon = 1e-12);
    assert_relative_eq!(v.vec[0], 0.0, epsilon = 1e-12);
    let back = m.exp(&x, &v).unwrap();
    assert!((back.coords - y.coords).norm() < 1e-12);
}

#[test]
fn log_of_same_point_is_zero() {
    for m in [ManifoldSpec::euclidean(2), s2(), h2()] {
        let x = sample_point(&m);
        let v = m.log_map(&x, &x).unwrap();
        assert_eq!(v.vec.norm(), 0.0);
    }
}

#[test]
fn antipodal_log_is_domain_error() {
    let m = s2();
    let x = pt(&[1.0, 0.0, 0.0]);
    let y = pt(&[-1.0, 0.0, 0.0]);
    assert!(matches!(m.log_map(&x, &y), Err(Error::Domain(_))));
}

#[test]
fn hyperbolic_exp_log_round_trip() {
    let m = h2();
    let x = hyp_point(&[0.3, -0.8]);
    let y = hyp_point(&[-1.1, 0.4]);
    let v = m.log_map(&x, &y).unwrap();
    let back = m.exp(&x, &v).unwrap();
    assert!((back.coords - &y.coords).norm() < 1e-8);
    let d = m.distance(&x, &y).unwrap();
    assert_relative_eq!(m.norm(&x, &v), d, epsilon = 1e-10);
}

#[test]
fn distances() {
    let e = ManifoldSpec::euclidean(3);
    let x = pt(&[1.0, 2.0, 3.0]);
    let y = pt(&[0.0, 2.0, 7.0]);
    assert_relative_eq!(
        e.distance(&x, &y).unwrap(),
        (17.0_f64).sqrt(),
        epsilon = 1e-14
    );

    let m = s2();
    let a = pt(&[1.0, 0.0, 0.0]);
    let b = pt(&[0.0, 1.0, 0.0]);
    assert_relative_eq!(m.distance(&a, &b).unwrap(), PI / 2.0, epsilon = 1e-14);
    assert_eq!(m.distance(&a, &a).unwrap(), 0.0);
    // Symmetry.
    assert_eq!(m.distance(&a, &b).unwrap(), m.distance(&b, &a).unwrap());
}

#[test]
fn sphere_transport_orthogonal_direction_is_constant() {
    let m = s2();
    let x = pt(&[1.0, 0.0, 0.0]);
    let v = tan(&x, &[0.0, PI / 2.0, 0.0]);
    let u = tan(&x, &[0.0, 0.0, 1.0]);
    let moved = m.parallel_transport(&x, &v, 1.0, &u).unwrap();
    assert!((moved.vec - DVector::from_column_slice(&[0.0, 0.0, 1.0])).norm() < 1e-12);
}

#[test]
fn transport_is_isometric() {
    for m in [s2(), h2(), ManifoldSpec::product_spheres(vec![2, 2])] {
        let x = sample_point(&m);
        let frame = m.tangent_frame(&x);
        let dir = Tangent::new(x.clone(), frame.column(0) * 0.9 - frame.column(1) * 0.4);
        let u = Tangent::new(x.clone(), frame.column(1) * 1.3 + frame.column(0) * 0.2);
        let w = Tangent::new(x.clone(), frame.column(0) * 0.5);
        let before = m.inner(&x, &u, &w);
        let mu = m.parallel_transport(&x, &dir, 1.0, &u).unwrap();
        let mw = m.parallel_transport(&x, &dir, 1.0, &w).unwrap();
        let after = m.inner(&mu.base, &mu, &mw);
        assert_relative_eq!(before, after, epsilon = 1e-9);
    }
}

#[test]
fn euclidean_frame_is_standard_basis() {
    let m = ManifoldSpec::euclidean(3);
    let x = pt(&[5.0, -1.0, 2.0]);
    let f = m.tangent_frame(&x);
    assert_eq!(f.basis, DMatrix::identity(3, 3));
}

#[test]
fn sphere_frame_spans_orthogonal_complement() {
    let m = s2();
    let x = pt(&[1.0, 0.0, 0.0]);
    let f = m.tangent_frame(&x);
    assert_eq!(f.basis.ncols(), 2);
    for i in 0..2 {
        assert!(f.column(i)[0].abs() < 1e-14);
    }
}

#[test]
fn frames_are_orthonormal_and_deterministic() {
    for m in [
        s2(),
        h2(),
        ManifoldSpec::stiefel(4, 2),
        ManifoldSpec::product_spheres(vec![1, 2]),
    ] {
        let x = sample_point(&m);
        let f = m.tangent_frame(&x);
        assert_eq!(f.basis.ncols(), m.dim);
        for i in 0..m.dim {
            for j in 0..m.dim {
                let g = m.inner_raw(&x, &f.column(i), &f.column(j));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < FRAME_TOL, "gram deviation at ({i},{j})");
            }
        }
        let f2 = m.tangent_frame(&x);
        assert_eq!(f.basis, f2.basis, "frame must be bit-identical");
    }
}

#[test]
fn jacobi_endpoints_euclidean_is_identity_pair() {
    let m = ManifoldSpec::euclidean(3);
    let x = sample_point(&m);
    let v = tan(&x, &[0.7, -0.2, 0.5]);
    let (j0, j1) = m.jacobi_endpoints(&x, &v).unwrap();
    assert!((j0 - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    assert!((j1 - DMatrix::identity(3, 3)).abs().max() < 1e-12);
}

#[test]
fn jacobi_endpoints_sphere_quarter_turn() {
    let m = s2();
    let x = pt(&[1.0, 0.0, 0.0]);
    let v = tan(&x, &[0.0, PI / 2.0, 0.0]);
    let (j0, j1) = m.jacobi_endpoints(&x, &v).unwrap();
    // Eigenvalues: parallel direction 1, orthogonal sin(pi/2)/(pi/2) and cos(pi/2).
    let e0 = j0.symmetric_eigenvalues();
    let e1 = j1.symmetric_eigenvalues();
    let mut s0: Vec<f64> = e0.iter().copied().collect();
    s0.sort_by(f64::total_cmp);
    assert_relative_eq!(s0[0], 2.0 / PI, epsilon = 1e-12);
    assert_relative_eq!(s0[1], 1.0, epsilon = 1e-12);
    let mut s1: Vec<f64> = e1.iter().copied().collect();
    s1.sort_by(f64::total_cmp);
    assert_relative_eq!(s1[0], 0.0, epsilon = 1e-12);
    assert_relative_eq!(s1[1], 1.0, epsilon = 1e-12);
}

#[test]
fn jacobi_endpoints_hyperbolic_unit_length() {
    let m = h2();
    let x = hyp_point(&[0.0, 0.0]);
    let f = m.tangent_frame(&x);
    let v = Tangent::new(x.clone(), f.column(0));
    let (j0, j1) = m.jacobi_endpoints(&x, &v).unwrap();
    let mut s0: Vec<f64> = j0.symmetric_eigenvalues().iter().copied().collect();
    s0.sort_by(f64::total_cmp);
    assert_relative_eq!(s0[1], 1.0_f64.sinh(), epsilon = 1e-12);
    assert_relative_eq!(s0[0], 1.0, epsilon = 1e-12);
    let mut s1: Vec<f64> = j1.symmetric_eigenvalues().iter().copied().collect();
    s1.sort_by(f64::total_cmp);
    assert_relative_eq!(s1[1], 1.0_f64.cosh(), epsilon = 1e-12);
}

#[test]
fn jacobi_conjugate_point_rejected() {
    let m = s2();
    let x = pt(&[1.0, 0.0, 0.0]);
    let v = tan(&x, &[0.0, PI, 0.0]);
    assert!(matches!(m.jacobi_endpoints(&x, &v), Err(Error::Domain(_))));
}

#[test]
fn hess_half_sq_dist_euclidean_identity() {
    let m = ManifoldSpec::euclidean(2);
    let x = pt(&[0.4, 1.0]);
    let y = pt(&[-2.0, 0.5]);
    let h = m.hess_half_sq_dist(&x, &y).unwrap();
    assert!((h - DMatrix::identity(2, 2)).abs().max() < 1e-12);
}

#[test]
fn hess_half_sq_dist_sphere_unit_distance() {
    let m = s2();
    let x = pt(&[1.0, 0.0, 0.0]);
    let v = tan(&x, &[0.0, 1.0, 0.0]);
    let y = m.exp(&x, &v).unwrap();
    let h = m.hess_half_sq_dist(&x, &y).unwrap();
    let mut eig: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    // Orthogonal eigenvalue r cot r at r = 1, parallel eigenvalue 1.
    assert_relative_eq!(eig[0], 1.0 / 1.0_f64.tan(), epsilon = 1e-12);
    assert_relative_eq!(eig[1], 1.0, epsilon = 1e-12);
}

#[test]
fn hess_half_sq_dist_hyperbolic_at_least_identity() {
    let m = h2();
    let x = hyp_point(&[0.2, -0.1]);
    let f = m.tangent_frame(&x);
    let v = Tangent::new(x.clone(), f.column(0) * 0.6 + f.column(1) * 0.8);
    let y = m.exp(&x, &v).unwrap();
    let h = m.hess_half_sq_dist(&x, &y).unwrap();
    let eig = h.symmetric_eigenvalues();
    let coth1 = 1.0 / 1.0_f64.tanh();
    let mut s: Vec<f64> = eig.iter().copied().collect();
    s.sort_by(f64::total_cmp);
    assert_relative_eq!(s[1], coth1, epsilon = 1e-12);
    for &e in &s {
        assert!(e >= 1.0 - 1e-6, "Hadamard distance Hessian below identity");
    }
}

#[test]
fn point_invariants_detect_violations() {
    let m = s2();
    assert!(m.check_point(&pt(&[1.0, 0.0, 0.0])).is_ok());
    assert!(m.check_point(&pt(&[1.0, 0.1, 0.0])).is_err());

    let h = h2();
    assert!(h.check_point(&hyp_point(&[0.3, 0.4])).is_ok());
    assert!(h.check_point(&pt(&[1.0, 0.3, 0.4])).is_err());

    let st = ManifoldSpec::stiefel(3, 2);
    let x = sample_point(&st);
    assert!(st.check_point(&x).is_ok());
}

#[test]
fn stiefel_exp_matches_sphere_for_one_column() {
    let st = ManifoldSpec::stiefel(3, 1);
    let sp = s2();
    let x = pt(&[1.0, 0.0, 0.0]);
    let v = tan(&x, &[0.0, 0.7, -0.4]);
    let a = st.exp(&x, &v).unwrap();
    let b = sp.exp(&x, &v).unwrap();
    assert!((a.coords - b.coords).norm() < 1e-12);
}

#[test]
fn stiefel_exp_stays_on_manifold_and_log_inverts() {
    let m = ManifoldSpec::stiefel(4, 2);
    let x = sample_point(&m);
    let f = m.tangent_frame(&x);
    let v = Tangent::new(
        x.clone(),
        f.column(0) * 0.5 - f.column(2) * 0.3 + f.column(4) * 0.2,
    );
    let y = m.exp(&x, &v).unwrap();
    m.check_point(&y).unwrap();
    let back = m.log_map(&x, &y).unwrap();
    assert!(
        (back.vec - &v.vec).norm() < 1e-8,
        "shooting log should invert exp"
    );
    let d = m.distance(&x, &y).unwrap();
    assert_relative_eq!(d, m.norm(&x, &v), epsilon = 1e-8);
}

#[test]
fn stiefel_transport_preserves_inner_products() {
    let m = ManifoldSpec::stiefel(4, 2);
    let x = sample_point(&m);
    let f = m.tangent_frame(&x);
    let dir = Tangent::new(x.clone(), f.column(1) * 0.8 + f.column(3) * 0.4);
    let u = Tangent::new(x.clone(), f.column(0) * 1.1 - f.column(4) * 0.6);
    let w = Tangent::new(x.clone(), f.column(2) * 0.9);
    let before = m.inner(&x, &u, &w);
    let mu = m.parallel_transport(&x, &dir, 1.0, &u).unwrap();
    let mw = m.parallel_transport(&x, &dir, 1.0, &w).unwrap();
    assert_relative_eq!(before, m.inner(&mu.base, &mu, &mw), epsilon = 1e-9);
    m.check_tangent(&mu).unwrap();
}

#[test]
fn product_sphere_blocks_move_independently() {
    let m = ManifoldSpec::product_spheres(vec![1, 1]);
    let x = pt(&[1.0, 0.0, 1.0, 0.0]);
    let v = tan(&x, &[0.0, PI / 2.0, 0.0, 0.0]);
    let y = m.exp(&x, &v).unwrap();
    assert_relative_eq!(y.coords[1], 1.0, epsilon = 1e-12);
    assert_relative_eq!(y.coords[2], 1.0, epsilon = 1e-12);
}

#[test]
fn hyperbolic_projection_retraction_unsupported() {
    let m = h2();
    let x = hyp_point(&[0.0, 0.0]);
    let v = Tangent::zero(&x);
    assert!(matches!(
        m.retract(RetractionKind::Projection, &x, &v),
        Err(Error::Config(_))
    ));
}
