//! Unit-disk analytics: finite Blaschke products, Möbius fits from samples and
//! Cauchy reconstruction of interior values from boundary data.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiskError {
    #[error("PoleProximity: z = {z} is within tolerance of a pole")]
    PoleProximity { z: Complex64 },
    #[error("RankDeficient: samples do not determine a Möbius map (constant value {constant})")]
    RankDeficient { constant: Complex64 },
    #[error("OutsideDisk: |Ω| = {modulus} is not below 1")]
    OutsideDisk { modulus: f64 },
    #[error("BadGrid: {reason}")]
    BadGrid { reason: String },
    #[error("InvalidZero: |z| = {modulus} is not inside the unit disk")]
    InvalidZero { modulus: f64 },
    #[error("NoConvergence: root search stalled after {iterations} iterations near {z}")]
    NoConvergence { iterations: usize, z: Complex64 },
    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for DiskError {
    fn from(e: csv::Error) -> Self {
        DiskError::Csv(e.to_string())
    }
}

/// `F(z) = ζ ∏ (z − z_j)/(1 − z_j* z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeProduct {
    pub zeta: Complex64,
    pub zeros: Vec<Complex64>,
}

impl BlaschkeProduct {
    pub fn new(zeta: Complex64, zeros: Vec<Complex64>) -> Result<Self, DiskError> {
        if let Some(z) = zeros.iter().find(|z| !(z.norm() < 1.0)) {
            return Err(DiskError::InvalidZero { modulus: z.norm() });
        }
        Ok(Self {
            zeta: zeta / zeta.norm(),
            zeros,
        })
    }

    pub fn degree(&self) -> usize {
        self.zeros.len()
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64, DiskError> {
        let mut value = self.zeta;
        for zj in &self.zeros {
            let den = 1.0 - zj.conj() * z;
            if den.norm() < 1e-14 {
                return Err(DiskError::PoleProximity { z });
            }
            value *= (z - zj) / den;
        }
        Ok(value)
    }

    /// Zeros inside the unit disk counted by the winding number of `F` along
    /// `|z| = 1`, sampled at `points` nodes.
    pub fn winding_number(&self, points: usize) -> Result<i64, DiskError> {
        let mut total = 0.0;
        let mut prev = self.eval(Complex64::new(1.0, 0.0))?;
        for j in 1..=points {
            let z = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / points as f64);
            let next = self.eval(z)?;
            total += (next / prev).arg();
            prev = next;
        }
        Ok((total / (2.0 * PI)).round() as i64)
    }
}

/// Boundary values `Ŝ(e^{iχ_j})` on a uniform grid `χ_j = χ₀ + 2πj/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitaryFamilySample {
    pub chis: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl UnitaryFamilySample {
    pub fn from_fn<F, E>(nodes: usize, f: F) -> Result<Self, E>
    where
        F: Fn(Complex64) -> Result<Complex64, E>,
    {
        let chis: Vec<f64> = (0..nodes).map(|j| 2.0 * PI * j as f64 / nodes as f64).collect();
        let values = chis
            .iter()
            .map(|&c| f(Complex64::from_polar(1.0, c)))
            .collect::<Result<Vec<_>, E>>()?;
        Ok(Self { chis, values })
    }

    pub fn len(&self) -> usize {
        self.chis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chis.is_empty()
    }

    pub fn omegas(&self) -> Vec<Complex64> {
        self.chis.iter().map(|&c| Complex64::from_polar(1.0, c)).collect()
    }

    /// `max_j | |values_j| − 1 |`
    pub fn modulus_defect(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn check_uniform(&self) -> Result<(), DiskError> {
        let n = self.chis.len();
        if n < 2 || self.values.len() != n {
            return Err(DiskError::BadGrid {
                reason: format!("{} phases and {} values", n, self.values.len()),
            });
        }
        let step = 2.0 * PI / n as f64;
        for (j, c) in self.chis.iter().enumerate() {
            if (c - self.chis[0] - step * j as f64).abs() > 1e-9 {
                return Err(DiskError::BadGrid {
                    reason: format!("phase {j} = {c} is off the uniform grid"),
                });
            }
        }
        Ok(())
    }

    /// `chi,re_s,im_s` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DiskError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["chi", "re_s", "im_s"])?;
        for (c, v) in self.chis.iter().zip(&self.values) {
            w.write_record([
                format!("{c:.16e}"),
                format!("{:.16e}", v.re),
                format!("{:.16e}", v.im),
            ])?;
        }
        w.flush().map_err(|e| DiskError::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, DiskError> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut chis = Vec::new();
        let mut values = Vec::new();
        for row in rdr.deserialize() {
            let (chi, re, im): (f64, f64, f64) = row?;
            chis.push(chi);
            values.push(Complex64::new(re, im));
        }
        let s = Self { chis, values };
        s.check_uniform()?;
        Ok(s)
    }
}

/// `Ω ↦ (aΩ + b)/(b*Ω + a*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusMap {
    pub a: Complex64,
    pub b: Complex64,
}

impl MobiusMap {
    pub fn eval(&self, omega: Complex64) -> Complex64 {
        (self.a * omega + self.b) / (self.b.conj() * omega + self.a.conj())
    }

    pub fn inverse(&self, s: Complex64) -> Complex64 {
        (s * self.a.conj() - self.b) / (self.a - s * self.b.conj())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusFit {
    pub map: MobiusMap,
    /// Largest `|map(Ω_i) − Ŝ_i|` over the fitted samples.
    pub residual: f64,
    /// Singular values of the linearized system, descending.
    pub singular_values: [f64; 4],
}

/// Fits `(a, b)` with `|a|² − |b|² = 1` and `Re a ≥ 0` to `Ŝ_i (b*Ω_i + a*) = aΩ_i + b`.
pub fn fit_mobius(omegas: &[Complex64], values: &[Complex64]) -> Result<MobiusFit, DiskError> {
    let n = omegas.len();
    if n < 3 || values.len() != n {
        return Err(DiskError::BadGrid {
            reason: format!("need at least 3 paired samples (got {} and {})", n, values.len()),
        });
    }
    // The relation is real-linear in (Re a, Im a, Re b, Im b): build the
    // columns by evaluating it on unit vectors.
    let unit = |j: usize| -> (Complex64, Complex64) {
        match j {
            0 => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
            1 => (Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)),
            2 => (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
            _ => (Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)),
        }
    };
    let mut m = DMatrix::<f64>::zeros(2 * n, 4);
    for (i, (w, s)) in omegas.iter().zip(values).enumerate() {
        for j in 0..4 {
            let (a, b) = unit(j);
            let e = s * (b.conj() * w + a.conj()) - a * w - b;
            m[(2 * i, j)] = e.re;
            m[(2 * i + 1, j)] = e.im;
        }
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors were requested");
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let sv = [
        svd.singular_values[order[0]],
        svd.singular_values[order[1]],
        svd.singular_values[order[2]],
        svd.singular_values[order[3]],
    ];
    let constant = || {
        let mean: Complex64 = values.iter().sum::<Complex64>() / n as f64;
        mean / mean.norm()
    };
    if sv[2] <= 1e-9 * sv[0].max(f64::MIN_POSITIVE) {
        return Err(DiskError::RankDeficient {
            constant: constant(),
        });
    }
    let row = v_t.row(order[3]);
    let mut a = Complex64::new(row[0], row[1]);
    let mut b = Complex64::new(row[2], row[3]);
    let norm = a.norm_sqr() - b.norm_sqr();
    if norm <= 1e-12 {
        return Err(DiskError::RankDeficient {
            constant: constant(),
        });
    }
    let scale = if a.re < 0.0 { -1.0 } else { 1.0 } / norm.sqrt();
    a *= scale;
    b *= scale;
    let map = MobiusMap { a, b };
    let residual = omegas
        .iter()
        .zip(values)
        .map(|(w, s)| (map.eval(*w) - s).norm())
        .fold(0.0, f64::max);
    Ok(MobiusFit {
        map,
        residual,
        singular_values: sv,
    })
}

pub fn fit_mobius_samples(samples: &UnitaryFamilySample) -> Result<MobiusFit, DiskError> {
    fit_mobius(&samples.omegas(), &samples.values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CauchyRule {
    /// Trapezoid sum rescaled by `1 − Ω^N e^{−iNχ₀}`, which removes the
    /// wrap-around of the Cauchy kernel's geometric series.
    #[default]
    AliasCorrected,
    /// Plain trapezoid sum; its error is `Ω^N S(Ω)/(1 − Ω^N)`.
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub value: Complex64,
    /// Difference to the same rule on every other node (`N` even), else `NaN`.
    pub error_estimate: f64,
    pub nodes: usize,
}

fn cauchy_sum(chis: &[f64], values: &[Complex64], omega: Complex64, rule: CauchyRule) -> Complex64 {
    let n = chis.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for (c, v) in chis.iter().zip(values) {
        acc += v / (1.0 - omega * Complex64::from_polar(1.0, -c));
    }
    acc /= n as f64;
    match rule {
        CauchyRule::Trapezoid => acc,
        CauchyRule::AliasCorrected => {
            let wrap = omega.powu(n as u32) * Complex64::from_polar(1.0, -(n as f64) * chis[0]);
            acc * (1.0 - wrap)
        }
    }
}

/// `S(Ω) = ∫ dχ/2π S(e^{iχ}) / (1 − Ω e^{−iχ})` for `|Ω| < 1`.
pub fn cauchy_reconstruct(samples: &UnitaryFamilySample, omega: Complex64) -> Result<Reconstruction, DiskError> {
    cauchy_reconstruct_with(samples, omega, CauchyRule::default())
}

pub fn cauchy_reconstruct_with(
    samples: &UnitaryFamilySample,
    omega: Complex64,
    rule: CauchyRule,
) -> Result<Reconstruction, DiskError> {
    let modulus = omega.norm();
    if !(modulus < 1.0) {
        return Err(DiskError::OutsideDisk { modulus });
    }
    samples.check_uniform()?;
    let n = samples.len();
    let value = cauchy_sum(&samples.chis, &samples.values, omega, rule);
    let error_estimate = if n % 2 == 0 && n >= 4 {
        let chis: Vec<f64> = samples.chis.iter().step_by(2).copied().collect();
        let values: Vec<Complex64> = samples.values.iter().step_by(2).copied().collect();
        (cauchy_sum(&chis, &values, omega, rule) - value).norm()
    } else {
        f64::NAN
    };
    Ok(Reconstruction {
        value,
        error_estimate,
        nodes: n,
    })
}

/// Uniform mean of the boundary values, i.e. the reconstruction at `Ω = 0`.
pub fn absorption_average(samples: &UnitaryFamilySample) -> Complex64 {
    samples.values.iter().sum::<Complex64>() / samples.len() as f64
}

/// Complex secant iteration from `z0`, `z1`.
pub fn find_root<F: Fn(Complex64) -> Complex64>(
    f: F,
    z0: Complex64,
    z1: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<Complex64, DiskError> {
    let (mut a, mut b) = (z0, z1);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..max_iter {
        if fb.norm() == 0.0 {
            return Ok(b);
        }
        let den = fb - fa;
        if den.norm() == 0.0 {
            break;
        }
        let step = fb * (b - a) / den;
        a = b;
        fa = fb;
        b -= step;
        fb = f(b);
        if !(b.re.is_finite() && b.im.is_finite()) {
            break;
        }
        if step.norm() <= tol * b.norm().max(1.0) {
            return Ok(b);
        }
    }
    Err(DiskError::NoConvergence {
        iterations: max_iter,
        z: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_map(map: &MobiusMap, nodes: usize) -> UnitaryFamilySample {
        UnitaryFamilySample::from_fn(nodes, |w| Ok::<_, ()>(map.eval(w))).unwrap()
    }

    fn su11(t: f64, alpha: f64, beta: f64) -> MobiusMap {
        MobiusMap {
            a: Complex64::from_polar(t.cosh(), alpha),
            b: Complex64::from_polar(t.sinh(), beta),
        }
    }

    #[test]
    fn blaschke_basics() {
        let id = BlaschkeProduct::new(c(1.0, 0.0), vec![c(0.0, 0.0)]).unwrap();
        let z = c(0.3, -0.2);
        assert!((id.eval(z).unwrap() - z).norm() < 1e-16);
        let b = BlaschkeProduct::new(c(0.0, 1.0), vec![c(0.3, 0.0), c(0.0, -0.5)]).unwrap();
        assert_eq!(b.degree(), 2);
        assert_eq!(b.winding_number(512).unwrap(), 2);
        for j in 0..50 {
            let v = b.eval(Complex64::from_polar(1.0, 0.37 * j as f64)).unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert!(b.eval(c(0.3, 0.0)).unwrap().norm() < 1e-16);
        assert!(matches!(
            b.eval(c(0.0, -2.0)),
            Err(DiskError::PoleProximity { .. })
        ));
        assert!(BlaschkeProduct::new(c(1.0, 0.0), vec![c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn average_examples() {
        let constant = UnitaryFamilySample::from_fn(16, |_| Ok::<_, ()>(c(0.6, 0.8))).unwrap();
        assert!((absorption_average(&constant) - c(0.6, 0.8)).norm() < 1e-15);
        let identity = UnitaryFamilySample::from_fn(16, |w| Ok::<_, ()>(w)).unwrap();
        assert!(absorption_average(&identity).norm() < 1e-15);
    }

    #[test]
    fn reconstruction_of_known_map() {
        let map = su11(0.8, 0.4, -2.0);
        let s = sample_map(&map, 128);
        for w in [c(0.0, 0.0), c(0.3, 0.0), c(0.5, 0.2), c(0.9, 0.0), c(-0.2, 0.93)] {
            let r = cauchy_reconstruct(&s, w).unwrap();
            assert!((r.value - map.eval(w)).norm() < 1e-10, "{w}");
        }
        let r = cauchy_reconstruct(&s, c(0.0, 0.0)).unwrap();
        assert!((r.value - absorption_average(&s)).norm() < 1e-15);
        assert!(matches!(
            cauchy_reconstruct(&s, c(1.0, 0.0)),
            Err(DiskError::OutsideDisk { .. })
        ));
    }

    #[test]
    fn plain_trapezoid_error_is_the_wraparound() {
        let map = su11(0.3, 0.0, 1.0);
        let s = sample_map(&map, 128);
        let w = c(0.9, 0.0);
        let r = cauchy_reconstruct_with(&s, w, CauchyRule::Trapezoid).unwrap();
        let wrap = w.powu(128);
        let predicted = wrap * map.eval(w) / (1.0 - wrap);
        assert!((r.value - map.eval(w) - predicted).norm() < 1e-12);
    }

    #[test]
    fn shifted_grid_is_supported() {
        let map = su11(0.5, 1.0, 0.2);
        let n = 64;
        let chis: Vec<f64> = (0..n).map(|j| 0.3 + 2.0 * PI * j as f64 / n as f64).collect();
        let values = chis.iter().map(|&x| map.eval(Complex64::from_polar(1.0, x))).collect();
        let s = UnitaryFamilySample { chis, values };
        let w = c(0.7, -0.1);
        assert!((cauchy_reconstruct(&s, w).unwrap().value - map.eval(w)).norm() < 1e-10);
    }

    #[test]
    fn convergence_is_geometric() {
        let map = su11(1.2, 0.0, 0.5);
        let w = c(0.5, 0.0);
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let r = cauchy_reconstruct_with(&sample_map(&map, n), w, CauchyRule::Trapezoid).unwrap();
                (r.value - map.eval(w)).norm()
            })
            .collect();
        assert!(errs[1] < 0.5 * errs[0] && errs[2] < 0.5 * errs[1], "{errs:?}");
    }

    #[test]
    fn bad_grid_rejected() {
        let s = UnitaryFamilySample {
            chis: vec![0.0, 1.0, 2.5],
            values: vec![c(1.0, 0.0); 3],
        };
        assert!(matches!(
            cauchy_reconstruct(&s, c(0.1, 0.0)),
            Err(DiskError::BadGrid { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let s = sample_map(&su11(0.4, 0.1, 0.2), 16);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("chi,re_s,im_s\n"));
        let back = UnitaryFamilySample::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn fit_recovers_map() {
        let map = su11(0.9, 2.5, -0.4);
        let s = sample_map(&map, 4);
        let fit = fit_mobius_samples(&s).unwrap();
        let sign = if map.a.re < 0.0 { -1.0 } else { 1.0 };
        assert!((fit.map.a - sign * map.a).norm() < 1e-12);
        assert!((fit.map.b - sign * map.b).norm() < 1e-12);
        assert!(fit.residual < 1e-13);
        // idempotence
        let again = fit_mobius_samples(&sample_map(&fit.map, 4)).unwrap();
        assert!((again.map.a - fit.map.a).norm() < 1e-12);
        assert!((again.map.b - fit.map.b).norm() < 1e-12);
    }

    #[test]
    fn fit_from_noisy_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x = crate::oracle::isp_exact(1.0, 1.0, 1.0).unwrap();
        let map = MobiusMap { a: x.a, b: x.b };
        let mut s = sample_map(&map, 4);
        for v in s.values.iter_mut() {
            *v += c(rng.gen_range(-1e-8..1e-8), rng.gen_range(-1e-8..1e-8));
        }
        let fit = fit_mobius_samples(&s).unwrap();
        let sign = if map.a.re < 0.0 { -1.0 } else { 1.0 };
        assert!((fit.map.a - sign * map.a).norm() < 1e-6);
        assert!((fit.map.b - sign * map.b).norm() < 1e-6);
    }

    #[test]
    fn constant_samples_are_rank_deficient() {
        let k = Complex64::from_polar(1.0, 0.7);
        let s = UnitaryFamilySample::from_fn(8, |_| Ok::<_, ()>(k)).unwrap();
        match fit_mobius_samples(&s) {
            Err(DiskError::RankDeficient { constant }) => assert!((constant - k).norm() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert!(fit_mobius(&[c(0.0, 0.0)], &[k]).is_err());
    }

    #[test]
    fn secant_finds_zero() {
        let map = su11(0.6, 0.3, 1.7);
        let zero = -map.b / map.a;
        let root = find_root(|w| map.eval(w), c(0.0, 0.0), c(0.1, 0.1), 1e-14, 100).unwrap();
        assert!((root - zero).norm() < 1e-12);
        assert!(find_root(|_| c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), 1e-14, 10).is_err());
    }

    fn arb_map() -> impl Strategy<Value = MobiusMap> {
        (0.0..2.5f64, -PI..PI, -PI..PI).prop_map(|(t, a, b)| su11(t, a, b))
    }

    proptest! {
        #[test]
        fn boundary_is_preserved(zeros in proptest::collection::vec((0.0..0.95f64, -PI..PI), 0..5), phase in -PI..PI, th in -PI..PI) {
            let zs = zeros.into_iter().map(|(r, t)| Complex64::from_polar(r, t)).collect();
            let b = BlaschkeProduct::new(Complex64::from_polar(1.0, phase), zs).unwrap();
            let v = b.eval(Complex64::from_polar(1.0, th)).unwrap();
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn fit_is_idempotent(map in arb_map()) {
            let fit = fit_mobius_samples(&sample_map(&map, 6)).unwrap();
            let again = fit_mobius_samples(&sample_map(&fit.map, 6)).unwrap();
            let scale = map.a.norm_sqr();
            prop_assert!((again.map.a - fit.map.a).norm() < 1e-10 * scale);
            prop_assert!((again.map.b - fit.map.b).norm() < 1e-10 * scale);
        }

        #[test]
        fn reconstruction_matches_interior(t_map in 0.0..1.0f64, alpha in -PI..PI, r in 0.0..0.9f64, t in -PI..PI) {
            // keep the pole 1/|R| well outside so 128 nodes resolve it
            let map = su11(t_map, alpha, 0.3);
            let w = Complex64::from_polar(r, t);
            let s = sample_map(&map, 128);
            let rec = cauchy_reconstruct(&s, w).unwrap();
            prop_assert!((rec.value - map.eval(w)).norm() < 1e-9);
        }
    }
}
