//! The invariant suite behind `verify` (and the checklist in every report).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bases;
use crate::cli::report::CheckResult;
use crate::connect::{
    self, ConnectOptions, Omega, SMatrixMap, ScatteringCoefficients, TransferMatrix,
};
use crate::currents::current_density;
use crate::disk::{self, UnitaryFamilySample};
use crate::model::{SingularityClass, ValidatedConfig};
use crate::oracle;

/// Points where the sign relation, Möbius form etc. are probed.
const RNG_SEED: u64 = 0x5eed_0f_d15c;

pub struct CheckInput<'a> {
    pub config: &'a ValidatedConfig,
    pub options: ConnectOptions,
    pub nodes: usize,
    pub transfer: &'a TransferMatrix,
    pub coefficients: &'a ScatteringCoefficients,
    pub map: &'a SMatrixMap,
}

fn sign(x: f64, dead_band: f64) -> i8 {
    if x > dead_band {
        1
    } else if x < -dead_band {
        -1
    } else {
        0
    }
}

/// `sgn(|Ŝ|² − 1) = sgn(|Ω|² − 1)` after dead-banding both sides.
pub fn sign_relation_holds(omega: Complex64, s: Complex64, dead_band: f64) -> bool {
    sign(s.norm_sqr() - 1.0, dead_band) == sign(omega.norm_sqr() - 1.0, dead_band)
}

fn interior_points(n: usize, radius: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = radius * rng.gen::<f64>().sqrt();
            Complex64::from_polar(r, rng.gen_range(-PI..PI))
        })
        .collect()
}

pub fn run_checks(input: &CheckInput) -> Vec<CheckResult> {
    let vc = input.config;
    let tol = vc.tol();
    let m = input.transfer;
    let res = &m.residuals;
    let sc = input.coefficients;
    let map = input.map;
    let s_hat = |w: Complex64| map.eval(Omega::Finite(w), tol);
    let mut out = Vec::new();

    // bases at the radii actually used
    let sing = bases::eval_singularity_unchecked(vc, res.r_min);
    let asym = bases::eval_asymptotic_unchecked(vc, res.r_max);
    let conj_defect = [sing, asym]
        .iter()
        .map(|p| {
            (p.second.u - p.first.u.conj())
                .norm()
                .max((p.second.du - p.first.du.conj()).norm())
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::measure("BasisConjugation", conj_defect, 0.0));
    let current_defect = [
        current_density(&sing.first.state()) - 2.0,
        current_density(&sing.second.state()) + 2.0,
        current_density(&asym.first.state()) - 2.0,
        current_density(&asym.second.state()) + 2.0,
    ]
    .iter()
    .map(|d| d.abs() / 2.0)
    .fold(0.0, f64::max);
    out.push(CheckResult::measure("BasisCurrents", current_defect, 10.0 * tol));
    out.push(CheckResult::measure("SingularRegion", res.singular_estimate, tol));
    out.push(CheckResult::measure("AsymptoticRegion", res.asymptotic_estimate, tol));

    out.push(CheckResult::measure("WronskianDrift", res.wronskian_drift, 10.0 * tol));
    out.push(CheckResult::measure("SU11Defect", res.su11_defect, 10.0 * tol));
    out.push(CheckResult::measure(
        "TimeReversalStructure",
        res.structure_defect,
        10.0 * tol,
    ));
    let stab = CheckResult::measure("Stabilization", res.stabilization_delta, tol);
    out.push(if input.options.stabilize {
        stab
    } else {
        stab.with_detail("stabilization disabled; change from r_max to 2 r_max")
    });
    out.push(CheckResult::measure("Unitarity", sc.defects().max(), 10.0 * tol));
    let pd = map.phase_defects;
    out.push(CheckResult::measure(
        "PhaseIdentities",
        pd.transmission.max(pd.reflection).max(pd.modulus),
        10.0 * tol,
    ));

    let circle = (0..64)
        .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / 64.0))
        .map(|w| s_hat(w).map_or(f64::INFINITY, |s| (s.norm() - 1.0).abs()))
        .fold(0.0, f64::max);
    out.push(CheckResult::measure("CircleMapping", circle, 10.0 * tol));

    if map.degenerate {
        for name in [
            "SignCorrespondence",
            "MobiusForm",
            "UniqueZero",
            "PoleDivergence",
            "DiskAutomorphism",
        ] {
            out.push(CheckResult::skipped(name, "degenerate branch, Ŝ is constant"));
        }
    } else {
        out.extend(mobius_checks(input));
    }

    // Cauchy reconstruction and the uniform average
    let nodes = input.nodes;
    match UnitaryFamilySample::from_fn(nodes, s_hat) {
        Ok(samples) => {
            let mut worst = 0.0f64;
            for w in [
                Complex64::new(0.0, 0.0),
                Complex64::new(0.3, 0.0),
                Complex64::new(0.5, 0.2),
                Complex64::new(0.9, 0.0),
            ] {
                let d = match (disk::cauchy_reconstruct(&samples, w), s_hat(w)) {
                    (Ok(r), Ok(s)) => (r.value - s).norm(),
                    _ => f64::INFINITY,
                };
                worst = worst.max(d);
            }
            out.push(
                CheckResult::measure("CauchyReconstruction", worst, (10.0 * tol).max(1e-8))
                    .with_detail(format!("{nodes} nodes")),
            );
            let avg = disk::absorption_average(&samples);
            out.push(CheckResult::measure(
                "UniformAverage",
                (avg - sc.r_prime).norm(),
                (10.0 * tol).max(1e-10),
            ));
            let boundary: Vec<Complex64> = (0..4)
                .map(|j| Complex64::from_polar(1.0, 0.1 + PI * j as f64 / 2.0))
                .collect();
            out.push(mobius_fit_check(&boundary, map, tol));
        }
        Err(e) => {
            for name in ["CauchyReconstruction", "UniformAverage", "MobiusFit"] {
                out.push(CheckResult::failed(name, e.to_string()));
            }
        }
    }

    out.push(degenerate_check(m, map, tol));

    if let SingularityClass::Conformal { theta } = vc.class() {
        out.push(mu_covariance_check(input, theta));
        if vc.has_extra_potential() {
            out.push(CheckResult::skipped("OracleAgreement", "extra potential present"));
        } else {
            out.push(oracle_check(vc, theta, sc));
        }
    }
    out
}

fn mobius_checks(input: &CheckInput) -> Vec<CheckResult> {
    let tol = input.config.tol();
    let m = input.transfer;
    let map = input.map;
    let s_exact = |w: Omega| connect::s_matrix(m, w, tol);
    let mut out = Vec::new();

    let mut mismatches = 0usize;
    let mut probed = 0usize;
    for modulus in [0.5, 2.0] {
        for j in 0..16 {
            let w = Complex64::from_polar(modulus, 2.0 * PI * (j as f64 + 0.25) / 16.0);
            if let Ok(s) = s_exact(w.into()) {
                probed += 1;
                if !sign_relation_holds(w, s, 1e-10) {
                    mismatches += 1;
                }
            }
        }
    }
    out.push(
        CheckResult::measure("SignCorrespondence", mismatches as f64, 0.0)
            .with_detail(format!("{probed} points with |Ω| in {{0.5, 2}}")),
    );

    let pts = interior_points(100, 0.95, RNG_SEED);
    let form = pts
        .iter()
        .map(|&w| match s_exact(w.into()) {
            Ok(s) => (s - map.eval_blaschke(w.into())).norm() / (1.0 + s.norm()),
            Err(_) => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::measure("MobiusForm", form, 10.0 * tol));

    match map.zero {
        Some(z) => {
            let at_zero = s_exact(z.into()).map_or(f64::INFINITY, |s| s.norm());
            let root = disk::find_root(
                |w| s_exact(w.into()).unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.1, 0.05),
                1e-15,
                200,
            );
            let root_defect = root.map_or(f64::INFINITY, |r| (r - z).norm());
            let inside = if z.norm() < 1.0 { 0.0 } else { f64::INFINITY };
            out.push(CheckResult::measure(
                "UniqueZero",
                at_zero.max(root_defect).max(inside),
                (10.0 * tol).max(1e-12),
            ));
        }
        None => out.push(CheckResult::failed("UniqueZero", "zero withheld".into())),
    }

    match map.pole {
        Some(Omega::Finite(p)) => {
            let near = p + 5e-7 * p / p.norm();
            let value = s_exact(near.into()).map_or(f64::INFINITY, |s| s.norm());
            let outside = if p.norm() > 1.0 { 0.0 } else { f64::INFINITY };
            out.push(
                CheckResult::measure("PoleDivergence", (1.0 / value).max(outside), 1e-6)
                    .with_detail("defect is 1/|Ŝ| at distance 5e-7 from the pole"),
            );
        }
        Some(Omega::Infinity) => out.push(CheckResult::skipped("PoleDivergence", "pole at infinity")),
        None => out.push(CheckResult::failed("PoleDivergence", "pole withheld".into())),
    }

    let scale = m.a.norm_sqr().max(1.0);
    let auto = interior_points(32, 0.95, RNG_SEED + 1)
        .iter()
        .map(|&w| match s_exact(w.into()) {
            Ok(s) if s.norm() < 1.0 => match connect::s_matrix_inverse(m, s) {
                Omega::Finite(back) => (back - w).norm() / scale,
                Omega::Infinity => f64::INFINITY,
            },
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    out.push(CheckResult::measure("DiskAutomorphism", auto, 10.0 * tol));
    out
}

/// Fit from boundary samples of the exact map, judged on 32 held-out
/// interior points.
fn mobius_fit_check(boundary: &[Complex64], map: &SMatrixMap, tol: f64) -> CheckResult {
    let exact = TransferMatrix::from_entries(map.a, map.b);
    let values: Result<Vec<Complex64>, _> = boundary
        .iter()
        .map(|&w| connect::s_matrix(&exact, w.into(), tol))
        .collect();
    let values = match values {
        Ok(v) => v,
        Err(e) => return CheckResult::failed("MobiusFit", e.to_string()),
    };
    match (disk::fit_mobius(boundary, &values), map.degenerate) {
        (Err(disk::DiskError::RankDeficient { constant }), true) => {
            CheckResult::measure("MobiusFit", 0.0, 0.0)
                .with_detail(format!("rank deficient as expected, constant {constant}"))
        }
        (Ok(_), true) => CheckResult::failed("MobiusFit", "degenerate map fitted as non-constant".into()),
        (Err(e), true) => CheckResult::failed("MobiusFit", e.to_string()),
        (Err(e), false) => CheckResult::failed("MobiusFit", e.to_string()),
        (Ok(fit), false) => {
            let held_out = interior_points(32, 0.95, RNG_SEED + 2)
                .iter()
                .map(|&w| match map.eval(w.into(), tol) {
                    Ok(s) => (fit.map.eval(w) - s).norm(),
                    Err(_) => f64::INFINITY,
                })
                .fold(0.0, f64::max);
            CheckResult::measure("MobiusFit", held_out, (10.0 * tol).max(1e-8))
                .with_detail("4 boundary samples, 32 held-out interior points")
        }
    }
}

fn degenerate_check(m: &TransferMatrix, map: &SMatrixMap, tol: f64) -> CheckResult {
    let Some(c) = map.constant else {
        return CheckResult::skipped("DegenerateConstant", "not degenerate");
    };
    let mut spread = (c.norm() - 1.0).abs();
    for j in 0..16 {
        let modulus = if j % 2 == 0 { 0.9 } else { 0.4 };
        let w = Complex64::from_polar(modulus, 2.0 * PI * j as f64 / 16.0);
        match connect::s_matrix(m, w.into(), tol) {
            Ok(s) => spread = spread.max((s - c).norm()),
            Err(_) => spread = f64::INFINITY,
        }
    }
    CheckResult::measure("DegenerateConstant", spread, 10.0 * tol.sqrt())
        .with_detail("exact Möbius map vs reported constant at 16 interior points")
}

fn mu_covariance_check(input: &CheckInput, theta: f64) -> CheckResult {
    let vc = input.config;
    let tol = vc.tol();
    let mu = vc.config().mu;
    let shifted = match vc
        .with_mu(2.0 * mu)
        .map_err(connect::ConnectError::from)
        .and_then(|v| connect::transfer_matrix_with(&v, &input.options))
    {
        Ok(m) => m,
        Err(e) => return CheckResult::failed("MuCovariance", e.to_string()),
    };
    let sc2 = ScatteringCoefficients::from_transfer(&shifted);
    let sc = input.coefficients;
    let rotation = Complex64::from_polar(1.0, 2.0 * theta * 2f64.ln());
    let mut defect = (sc2.r.norm() - sc.r.norm())
        .abs()
        .max((sc2.t.norm() - sc.t.norm()).abs())
        .max((sc2.r - sc.r * rotation).norm());
    for w in [Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.2), Complex64::new(-0.3, 0.6)] {
        let lhs = connect::s_matrix(&shifted, (w * rotation.conj()).into(), tol);
        let rhs = connect::s_matrix(input.transfer, w.into(), tol);
        defect = match (lhs, rhs) {
            (Ok(a), Ok(b)) => defect.max((a - b).norm()),
            _ => f64::INFINITY,
        };
    }
    CheckResult::measure("MuCovariance", defect, 10.0 * tol).with_detail("μ → 2μ")
}

fn oracle_check(vc: &ValidatedConfig, theta: f64, sc: &ScatteringCoefficients) -> CheckResult {
    let cfg = vc.config();
    match oracle::isp_exact(theta, cfg.k, cfg.mu) {
        Ok(x) => {
            let e = x.coefficients;
            let defect = (sc.r - e.r)
                .norm()
                .max((sc.t - e.t).norm())
                .max((sc.r_prime - e.r_prime).norm());
            CheckResult::measure("OracleAgreement", defect, (10.0 * vc.tol()).max(1e-11))
        }
        Err(e) => CheckResult::failed("OracleAgreement", e.to_string()),
    }
}
