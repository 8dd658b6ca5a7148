use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use sqm_smatrix::connect::{self, Omega, ScatteringCoefficients};
use sqm_smatrix::model::{validate, ProblemConfig};

fn coefficients(config: ProblemConfig) -> (connect::TransferMatrix, ScatteringCoefficients) {
    let vc = validate(&config).unwrap();
    let m = connect::transfer_matrix(&vc).unwrap();
    let sc = ScatteringCoefficients::from_transfer(&m);
    (m, sc)
}

/// Doubling μ rotates R by e^{+2iΘ ln 2} and Ω by the same phase.
#[test]
fn doubling_mu_rotates_reflection_forward() {
    for theta in [0.5, 1.0, 2.0] {
        let (m1, s1) = coefficients(ProblemConfig::conformal(theta, 1.0, 1.0).with_tol(1e-10));
        let (m2, s2) = coefficients(ProblemConfig::conformal(theta, 1.0, 2.0).with_tol(1e-10));
        let rot = Complex64::from_polar(1.0, 2.0 * theta * 2f64.ln());
        assert!((s2.r - s1.r * rot).norm() < 1e-9, "Θ={theta}");
        assert!((s2.t.norm() - s1.t.norm()).abs() < 1e-10);
        let w = Complex64::new(0.4, -0.3);
        let a = connect::s_matrix(&m2, Omega::Finite(w * rot.conj()), 1e-10).unwrap();
        let b = connect::s_matrix(&m1, Omega::Finite(w), 1e-10).unwrap();
        assert!((a - b).norm() < 1e-9);
    }
}

#[test]
fn omega_at_infinity_is_the_limit() {
    let (m, _) = coefficients(ProblemConfig::power_law(4.0, 1.0, 1.0).with_tol(1e-10));
    let at_inf = connect::s_matrix(&m, Omega::Infinity, 1e-10).unwrap();
    let far = connect::s_matrix(&m, Omega::new(1e9, 2e9), 1e-10).unwrap();
    assert!((at_inf - far).norm() < 1e-8);
    assert!(at_inf.norm() > 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn conformal_reflection_modulus(theta in 0.3f64..2.5, k in 0.5f64..3.0) {
        let (_, sc) = coefficients(ProblemConfig::conformal(theta, k, 1.0).with_tol(1e-9));
        let expect = (-PI * theta).exp();
        prop_assert!((sc.r.norm() - expect).abs() / expect < 1e-6);
        prop_assert!((sc.r.norm_sqr() + sc.t.norm_sqr() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn quartic_unitarity(lambda in 0.2f64..3.0, k in 0.5f64..2.0) {
        let (m, sc) = coefficients(ProblemConfig::power_law(4.0, lambda, k).with_tol(1e-9));
        prop_assert!(sc.defects().max() < 1e-7);
        prop_assert!(m.residuals.wronskian_drift < 1e-8);
    }
}
