use codazzi::rng::{stream, uniform};
use codazzi::symmetric_space::{self as ss, BeltramiPoint};
use codazzi::{Mat2, SpdMat2};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

fn rand_mat(r: &mut ChaCha8Rng, s: f64) -> Mat2 {
    Mat2::new(uniform(r, -s, s), uniform(r, -s, s), uniform(r, -s, s), uniform(r, -s, s))
}

fn rand_spd(r: &mut ChaCha8Rng) -> SpdMat2 {
    let m = rand_mat(r, 1.5);
    SpdMat2::new((m.transpose() * m + Mat2::scalar(uniform(r, 0.1, 2.0))).symmetrized()).unwrap()
}

#[test]
fn b_form_is_conjugation_invariant() {
    let mut r = stream(0, 70);
    let mut tested = 0;
    while tested < 10_000 {
        let (g, b) = (rand_mat(&mut r, 2.0), rand_mat(&mut r, 2.0));
        if g.det().abs() < 0.05 {
            continue;
        }
        let cond = g.max_abs() * g.inverse().unwrap().max_abs();
        let res = ss::conjugation_residual(g, b).unwrap();
        assert!(res <= 1e-13 * (1.0 + b.max_abs()).powi(2) * cond * cond, "{res:e}");
        tested += 1;
    }
    assert!(ss::conjugation_residual(Mat2::diag(1.0, 0.0), Mat2::id()).is_err());
}

#[test]
fn gram_matrix_has_lorentz_signature() {
    // On {Id, diag(1,−1), offdiag}, Det(sId + d·D + o·O) = s² − d² − o², so
    // b_α(A) has Gram matrix ¼·Det(A)^{α−1}·diag(−1, 1, 1).
    let mut r = stream(0, 71);
    for _ in 0..2000 {
        let a = rand_spd(&mut r);
        let alpha = uniform(&mut r, -1.0, 2.0);
        let c = 0.25 * a.mat().det().powf(alpha - 1.0);
        let gram = ss::gram(a, alpha);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i != j { 0.0 } else if i == 0 { -c } else { c };
                assert!((gram[(i, j)] - expected).abs() <= 1e-12 * (1.0 + c), "{gram}");
            }
        }
        assert_eq!(ss::signature(a, alpha), (2, 1));
    }
}

#[test]
fn quotient_metric_examples() {
    let id = SpdMat2::scalar(1.0).unwrap();
    assert!((ss::quotient_metric(id, Mat2::id(), 0.0).unwrap() + 0.25).abs() < 1e-15);
    assert!((ss::quotient_metric(id, Mat2::diag(1.0, -1.0), 0.0).unwrap() - 0.25).abs() < 1e-15);
    let four = SpdMat2::scalar(4.0).unwrap();
    assert!((ss::quotient_metric(four, Mat2::id(), 0.5).unwrap() + 1.0 / 16.0).abs() < 1e-15);
    assert!(ss::quotient_metric(id, Mat2::new(0.0, 1.0, 0.0, 0.0), 0.0).is_err());
    let om = ss::christoffel_difference(SpdMat2::new(Mat2::diag(4.0, 1.0)).unwrap(), Mat2::diag(2.0, 0.0), 0.5).unwrap();
    assert!((om - Mat2::diag(-0.5, 0.0)).max_abs() < 1e-15);
    assert!((ss::christoffel_difference(id, Mat2::id(), 0.0).unwrap() + Mat2::id()).max_abs() < 1e-15);
}

#[test]
fn geodesics_solve_the_geodesic_equation() {
    let mut r = stream(0, 72);
    for _ in 0..500 {
        let a = rand_mat(&mut r, 1.0).symmetrized();
        let (lo, hi) = a.sym_eigenvalues();
        // Stay where Id + tA is positive definite.
        let tmax = if lo < 0.0 { 0.5 / -lo } else { 2.0 };
        let tmin = if hi > 0.0 { -0.5 / hi } else { -2.0 };
        let t = uniform(&mut r, tmin.max(-2.0), tmax.min(2.0));
        let res = ss::geodesic_residual(a, t, 1e-3).unwrap();
        assert!(res <= 1e-6, "{res:e}");
    }
    let g = ss::geodesic(Mat2::diag(1.0, 2.0), 0.5).unwrap();
    assert!((g.mat() - Mat2::diag(2.25, 4.0)).max_abs() < 1e-15);
    assert!(ss::geodesic(Mat2::diag(-1.0, 0.0), 1.0).is_err());
}

#[test]
fn u_tilde_membership_is_trace_and_determinant_positivity() {
    let mut r = stream(0, 73);
    for _ in 0..10_000 {
        let bp = BeltramiPoint::new(uniform(&mut r, -2.0, 1.0), Complex64::new(uniform(&mut r, -1.5, 1.5), uniform(&mut r, -1.5, 1.5)));
        let m = Mat2::id() + ss::beltrami_matrix(bp);
        if m.det().abs() < 1e-12 || m.trace().abs() < 1e-12 {
            continue;
        }
        assert_eq!(bp.in_u_tilde(), m.trace() > 0.0 && m.det() > 0.0, "{bp:?}");
    }
}

#[test]
fn exp_map_and_psi_tilde() {
    let id = SpdMat2::scalar(1.0).unwrap();
    let e = ss::exp_map(Mat2::diag(-0.5, 1.0), id).unwrap();
    assert!((e.mat() - Mat2::diag(0.25, 4.0)).max_abs() < 1e-15);
    assert!(ss::exp_map(Mat2::diag(-1.5, 0.0), id).is_err());
    let mut r = stream(0, 74);
    for _ in 0..1000 {
        let g0 = SpdMat2::scalar(uniform(&mut r, 0.2, 3.0)).unwrap();
        let bp = BeltramiPoint::new(uniform(&mut r, -0.5, 1.0), Complex64::new(uniform(&mut r, -0.4, 0.4), uniform(&mut r, -0.4, 0.4)));
        let a = ss::psi_tilde(bp, g0).unwrap();
        let b = ss::exp_map(ss::beltrami_matrix(bp), g0).unwrap();
        assert!((a.mat() - b.mat()).max_abs() <= 1e-13 * (1.0 + b.mat().max_abs()));
    }
    let four = ss::psi_tilde(BeltramiPoint::new(1.0, Complex64::new(0.0, 0.0)), id).unwrap();
    assert!((four.mat() - Mat2::scalar(4.0)).max_abs() < 1e-15);
    let boundary = BeltramiPoint::new(0.0, Complex64::new(0.6, 0.8));
    assert!((ss::beltrami_matrix(boundary) - Mat2::sym(0.6, 0.8, -0.6)).max_abs() < 1e-15);
    assert!((Mat2::id() + ss::beltrami_matrix(boundary)).det().abs() < 1e-15);
    assert!(!boundary.in_u_tilde());
}
