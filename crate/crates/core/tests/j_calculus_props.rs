use codazzi::j_calculus::{self as jc, Mat2, SpdMat2};
use proptest::prelude::*;

fn mat() -> impl Strategy<Value = Mat2> {
    prop::array::uniform4(-3.0f64..3.0).prop_map(Mat2::from_array)
}

fn spd() -> impl Strategy<Value = SpdMat2> {
    (mat(), 0.05f64..2.0).prop_map(|(m, s)| SpdMat2::new((m.transpose() * m + Mat2::scalar(s)).symmetrized()).unwrap())
}

fn scale(a: Mat2) -> f64 {
    1.0 + a.max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn sigma_rotation_invariant(a in mat(), theta in 0.0f64..std::f64::consts::TAU) {
        let m = Mat2::rotation(theta);
        prop_assert!((jc::sigma(m * a) - jc::sigma(a)).abs() <= 1e-12 * scale(a));
        prop_assert!((jc::sigma(a * m) - jc::sigma(a)).abs() <= 1e-12 * scale(a));
    }

    #[test]
    fn jlin_part_trace_formula(a in mat()) {
        let j = Mat2::j();
        let oracle = Mat2::id() * (0.5 * a.trace()) - j * (0.5 * (a * j).trace());
        prop_assert!((jc::jlin_part(a) - oracle).max_abs() <= 1e-14 * scale(a));
        prop_assert!((jc::jlin_part(a) + jc::jantilin_part(a) - a).max_abs() <= 1e-14 * scale(a));
    }

    #[test]
    fn antisymmetric_part_relation(a in mat()) {
        let j = Mat2::j();
        prop_assert!((a - a.transpose() + j * (a * j).trace()).max_abs() <= 1e-14 * scale(a));
    }

    #[test]
    fn sigma_vanishes_on_antilinear(a in mat()) {
        prop_assert!(jc::sigma(jc::jantilin_part(a)) <= 1e-14 * scale(a));
    }

    #[test]
    fn b_form_conjugation_invariant(b in mat(), p in mat()) {
        prop_assume!(p.det().abs() > 0.1);
        let inv = p.inverse().unwrap();
        let cond = p.max_abs() * inv.max_abs();
        let lhs = jc::b_form(p * b * inv);
        prop_assert!((lhs - jc::b_form(b)).abs() <= 1e-12 * scale(b).powi(2) * cond * cond);
    }

    #[test]
    fn metric_to_a_inverts_metric_action(g in spd(), h in spd()) {
        let a = jc::metric_to_a(g, h).unwrap();
        let back = jc::metric_action(a, g).unwrap();
        prop_assert!((back.mat() - h.mat()).max_abs() <= 1e-12 * (1.0 + h.mat().max_abs()));
    }

    #[test]
    fn trace_of_jaj(a in mat()) {
        let s = a.symmetrized();
        let j = Mat2::j();
        prop_assert!((-(j * s * j).trace() - s.trace()).abs() <= 1e-14 * scale(s));
    }

    #[test]
    fn dsigma_is_normalised_derivative(a in spd(), b in mat()) {
        // dsigma is the derivative of √2·σ on the symmetric branch.
        let a = a.mat();
        let eps = 1e-6;
        let fd = (jc::sigma(a + b * eps) - jc::sigma(a - b * eps)) / (2.0 * eps);
        let d = jc::dsigma(a, b).unwrap();
        prop_assert!((d - std::f64::consts::SQRT_2 * fd).abs() <= 1e-6 * scale(b));
    }

    #[test]
    fn dsigma_rejects_indefinite(a in mat(), b in mat()) {
        prop_assume!(a.symmetrized().sym_eigenvalues().0 < -1e-3);
        prop_assert!(jc::dsigma(a.symmetrized(), b).is_err());
    }
}
