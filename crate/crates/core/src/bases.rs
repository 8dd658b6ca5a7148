//! The two fundamental bases: `{u₊, u₋}` near the singular point and `{u₁, u₂}`
//! near infinity, both at WKB normalization (`J[u₊] = J[u₁] = +2`).
//!
//! Near infinity the exact solutions of the `k² − c/r²` tail are Hankel
//! functions, so `u₁ = sqrt(π/2) e^(iνπ/2) sqrt(r) H¹_ν(kr)` is evaluated through
//! its asymptotic series; whatever decays faster than `r^-2` is folded in with
//! a first-order WKB amplitude and phase.
//!
//! Near the origin:
//! * `p = 2`: `u₊ = sqrt(r/Θ) (μr)^(iΘ)` times the Frobenius series in `(kr)²`.
//! * `p > 2`: the exact `k = 0` solution `sqrt(r) H²_ν(x)`, `x = 2 sqrt(λ) r^(-n/2)/n`,
//!   through its large-`x` series.
//!
//! In both cases `u₋ = u₊*` and `u₂ = u₁*`.

use std::cell::Cell;
use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::currents;
use crate::integrate::StateVector;
use crate::model::{SingularityClass, ValidatedConfig};
use crate::special::hankel_series;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("AsymptoticRegionTooClose: truncation estimate {estimate:e} exceeds tol {tol:e} at r = {r}")]
    AsymptoticRegionTooClose { r: f64, estimate: f64, tol: f64 },
    #[error("SingularRegionTooFar: truncation estimate {estimate:e} exceeds tol {tol:e} at r = {r}")]
    SingularRegionTooFar { r: f64, estimate: f64, tol: f64 },
    #[error("TurningPoint: J changes sign between {from} and {to}")]
    TurningPoint { from: f64, to: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisLabel {
    Plus,
    Minus,
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisValue {
    pub u: Complex64,
    pub du: Complex64,
    pub which: BasisLabel,
    pub r: f64,
}

impl BasisValue {
    pub fn state(&self) -> StateVector {
        StateVector::new(self.r, self.u, self.du)
    }
}

/// A conjugate pair of basis functions evaluated at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisPair {
    pub first: BasisValue,
    pub second: BasisValue,
    /// Estimated relative truncation error of the implemented expansion.
    pub truncation_error: f64,
}

fn pair(r: f64, u: Complex64, du: Complex64, labels: (BasisLabel, BasisLabel), err: f64) -> BasisPair {
    BasisPair {
        first: BasisValue {
            u,
            du,
            which: labels.0,
            r,
        },
        second: BasisValue {
            u: u.conj(),
            du: du.conj(),
            which: labels.1,
            r,
        },
        truncation_error: err,
    }
}

/// `|J[u]/2 − 1|` for the first member of a pair, with `J[u] = W[u*, u]/i`.
fn current_defect(u: Complex64, du: Complex64, r: f64) -> f64 {
    let s = StateVector::new(r, u, du);
    (currents::current_density(&s) / 2.0 - 1.0).abs()
}

/// `(u₁, u₂)` at `r`, failing when the truncation estimate exceeds `tol`.
pub fn eval_asymptotic(config: &ValidatedConfig, r: f64) -> Result<BasisPair, BasisError> {
    let pair = eval_asymptotic_unchecked(config, r);
    if pair.truncation_error > config.tol() {
        return Err(BasisError::AsymptoticRegionTooClose {
            r,
            estimate: pair.truncation_error,
            tol: config.tol(),
        });
    }
    Ok(pair)
}

pub fn eval_asymptotic_unchecked(config: &ValidatedConfig, r: f64) -> BasisPair {
    let labels = (BasisLabel::One, BasisLabel::Two);
    let k = config.k();
    let j = config.j(r);
    let j_tail = config.j_tail(r);
    if !(j > 0.0 && j_tail > 0.0 && r > 0.0) {
        let nan = Complex64::new(f64::NAN, f64::NAN);
        return pair(r, nan, nan, labels, f64::INFINITY);
    }

    let z = k * r;
    let series = hankel_series(config.tail_four_nu_sq(), z, 1.0);
    let norm = Complex64::new(0.0, k * r - FRAC_PI_4).exp() / k.sqrt();
    let mut u = norm * series.sum;
    let mut du = norm * k * (Complex64::i() * series.sum + series.derivative);
    let mut estimate = series.remainder;

    let delta = config.residual(r);
    if delta != 0.0 {
        let sqrt_j = j.sqrt();
        let sqrt_tail = j_tail.sqrt();
        let phase = -residual_phase_tail(config, r);
        let amplitude = (j_tail / j).powf(0.25);
        let log_amp_prime = 0.25 * (config.j_tail_prime(r) / j_tail - config.j_prime(r) / j);
        let phase_prime = delta / (sqrt_j + sqrt_tail);
        let factor = Complex64::from_polar(amplitude, phase);
        du = factor * (du + Complex64::new(log_amp_prime, phase_prime) * u);
        u *= factor;
        estimate += delta.abs() / (k * k * z) + config.residual_prime(r).abs() / (k * k * k);
    }
    estimate = estimate.max(current_defect(u, du, r));
    pair(r, u, du, labels, estimate)
}

/// `∫_r^∞ (sqrt(J) − sqrt(J_tail)) dr'`.
fn residual_phase_tail(config: &ValidatedConfig, r: f64) -> f64 {
    let g = |x: f64| {
        let d = config.residual(x);
        if d == 0.0 {
            return 0.0;
        }
        let jt = config.j_tail(x);
        let jf = jt + d;
        if jf <= 0.0 || jt <= 0.0 {
            return f64::NAN;
        }
        d / (jf.sqrt() + jt.sqrt())
    };
    let near = quadrature::integrate(g, r, 2.0 * r, 1e-17).integral;
    let far = quadrature::integrate(
        |t: f64| {
            if t < 1e-150 {
                0.0
            } else {
                g(1.0 / t) / (t * t)
            }
        },
        0.0,
        0.5 / r,
        1e-17,
    )
    .integral;
    near + far
}

/// `(u₊, u₋)` at `r`, failing when the truncation estimate exceeds `tol`.
pub fn eval_singularity(config: &ValidatedConfig, r: f64) -> Result<BasisPair, BasisError> {
    let pair = eval_singularity_unchecked(config, r);
    if pair.truncation_error > config.tol() {
        return Err(BasisError::SingularRegionTooFar {
            r,
            estimate: pair.truncation_error,
            tol: config.tol(),
        });
    }
    Ok(pair)
}

pub fn eval_singularity_unchecked(config: &ValidatedConfig, r: f64) -> BasisPair {
    let labels = (BasisLabel::Plus, BasisLabel::Minus);
    let k = config.k();
    match config.class() {
        SingularityClass::Conformal { theta } => {
            let mu = config.config().mu;
            let s = Complex64::new(0.5, theta);
            let mut coeff = Complex64::new(1.0, 0.0);
            let mut sum = coeff;
            let mut dsum = s;
            let mut largest = 1.0f64;
            let r2 = r * r;
            let mut remainder = 0.0;
            for m in 1..2000 {
                let mf = m as f64;
                coeff *= -k * k * r2 / (4.0 * mf * Complex64::new(mf, theta));
                let mag = coeff.norm();
                largest = largest.max(mag);
                if mag < 1e-18 * sum.norm() {
                    remainder = mag;
                    break;
                }
                sum += coeff;
                dsum += coeff * (s + 2.0 * mf);
                remainder = mag;
            }
            let lead = Complex64::from_polar((r / theta).sqrt(), theta * (mu * r).ln());
            let u = lead * sum;
            let du = lead * dsum / r;
            let contamination = config.extra_sup_below(r) * r2 / (4.0 * theta);
            let estimate = remainder + largest * f64::EPSILON + contamination;
            pair(r, u, du, labels, estimate.max(current_defect(u, du, r)))
        }
        SingularityClass::PowerLaw { n } => {
            let p = config.config().p;
            let lambda = config.config().lambda;
            let sqrt_lambda = lambda.sqrt();
            let x = 2.0 * sqrt_lambda * r.powf(-n / 2.0) / n;
            let four_nu_sq = config.origin_four_nu_sq().unwrap_or(0.0);
            let series = hankel_series(four_nu_sq, x, -1.0);
            let amp = r.powf(p / 4.0) / lambda.powf(0.25);
            let carrier = Complex64::from_polar(amp, -x);
            let u = carrier * series.sum;
            let dx_dr = -sqrt_lambda * r.powf(-p / 2.0);
            let du = u * (p / (4.0 * r))
                + carrier * (-Complex64::i() * series.sum + series.derivative) * dx_dr;
            let contamination = (k * k + config.extra_sup_below(r)) * r.powf(p / 2.0 + 1.0)
                / (sqrt_lambda * (p + 2.0));
            let estimate = series.remainder + contamination;
            pair(r, u, du, labels, estimate.max(current_defect(u, du, r)))
        }
    }
}

/// Largest `r ≤ config.r_min` (by halving) where the singularity basis is
/// accurate to `0.1 · tol`.
pub fn choose_r_min(config: &ValidatedConfig) -> Result<f64, BasisError> {
    let target = 0.1 * config.tol();
    let mut r = config.config().r_min;
    let mut estimate = f64::INFINITY;
    for _ in 0..200 {
        estimate = eval_singularity_unchecked(config, r).truncation_error;
        if estimate <= target {
            return Ok(r);
        }
        r *= 0.5;
    }
    Err(BasisError::SingularRegionTooFar {
        r,
        estimate,
        tol: config.tol(),
    })
}

/// Smallest `r ≥ config.r_max` (by doubling) where the asymptotic basis is
/// accurate to `0.1 · tol`.
pub fn choose_r_max(config: &ValidatedConfig) -> Result<f64, BasisError> {
    let target = 0.1 * config.tol();
    let mut r = config.config().r_max;
    let mut estimate = f64::INFINITY;
    for _ in 0..16 {
        estimate = eval_asymptotic_unchecked(config, r).truncation_error;
        if estimate <= target {
            return Ok(r);
        }
        r *= 2.0;
    }
    Err(BasisError::AsymptoticRegionTooClose {
        r,
        estimate,
        tol: config.tol(),
    })
}

/// First-order WKB amplitude and accumulated phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WkbReference {
    pub amplitude: f64,
    pub phase: f64,
}

/// WKB reference for the configured problem, with the Langer-modified
/// invariant `J − 1/(4r²)` (this is what turns `sqrt(λ)` into `Θ` at `p = 2`).
pub fn wkb_reference(config: &ValidatedConfig, r_ref: f64, r: f64) -> Result<WkbReference, BasisError> {
    wkb_reference_with(|x| config.j(x) - 0.25 / (x * x), r_ref, r)
}

/// Amplitude `j(r)^(-1/4)` and phase `∫_{r_ref}^{r} sqrt(j)`, integrated in `ln r`.
pub fn wkb_reference_with<F: Fn(f64) -> f64>(j: F, r_ref: f64, r: f64) -> Result<WkbReference, BasisError> {
    let turning = BasisError::TurningPoint { from: r_ref, to: r };
    if !(r_ref > 0.0 && r > 0.0) {
        return Err(turning);
    }
    let (j_ref, j_end) = (j(r_ref), j(r));
    if !(j_ref > 0.0 && j_end > 0.0) {
        return Err(turning);
    }
    let negative = Cell::new(false);
    let integrand = |s: f64| {
        let x = s.exp();
        let jx = j(x);
        if jx <= 0.0 {
            negative.set(true);
            return 0.0;
        }
        jx.sqrt() * x
    };
    let out = quadrature::integrate(integrand, r_ref.ln(), r.ln(), 1e-13);
    if negative.get() {
        return Err(turning);
    }
    Ok(WkbReference {
        amplitude: j_end.powf(-0.25),
        phase: out.integral,
    })
}
