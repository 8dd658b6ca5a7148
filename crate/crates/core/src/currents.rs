//! Wronskian and conserved-current algebra.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::StateVector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurrentError {
    #[error("RadiusMismatch: states at r = {left} and r = {right}")]
    RadiusMismatch { left: f64, right: f64 },
    #[error("BalanceViolation: |C1|²−|C2|² = {at_infinity:e} but |C+|²−|C−|² = {at_origin:e}")]
    BalanceViolation { at_infinity: f64, at_origin: f64 },
}

/// `J[u, v] = W[u*, v] / i` together with the plain Wronskian `W[u, v]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentValue {
    pub j: Complex64,
    pub w: Complex64,
}

fn same_radius(f: &StateVector, g: &StateVector) -> Result<(), CurrentError> {
    let scale = f.r.abs().max(g.r.abs()).max(f64::MIN_POSITIVE);
    if (f.r - g.r).abs() > 8.0 * f64::EPSILON * scale {
        return Err(CurrentError::RadiusMismatch {
            left: f.r,
            right: g.r,
        });
    }
    Ok(())
}

#[inline]
pub fn wronskian_unchecked(f: &StateVector, g: &StateVector) -> Complex64 {
    f.u * g.du - f.du * g.u
}

/// `W[f, g] = f g′ − f′ g`.
pub fn wronskian(f: &StateVector, g: &StateVector) -> Result<Complex64, CurrentError> {
    same_radius(f, g)?;
    Ok(wronskian_unchecked(f, g))
}

#[inline]
pub fn current_unchecked(u: &StateVector, v: &StateVector) -> Complex64 {
    let w = wronskian_unchecked(&u.conj(), v);
    Complex64::new(w.im, -w.re)
}

pub fn current(u: &StateVector, v: &StateVector) -> Result<CurrentValue, CurrentError> {
    same_radius(u, v)?;
    Ok(CurrentValue {
        j: current_unchecked(u, v),
        w: wronskian_unchecked(u, v),
    })
}

/// `J[u] = J[u, u] = 2 Im(u* u′)`, real by construction.
pub fn current_density(u: &StateVector) -> f64 {
    2.0 * (u.u.conj() * u.du).im
}

/// `½J[u]` from both ends: `|C¹|² − |C²|²` must equal `|C⁺|² − |C⁻|²`.
///
/// The comparison is relative to the largest squared modulus involved, so that
/// strongly reflecting solutions (large cancellation) are judged fairly.
pub fn coefficient_balance(
    c1: Complex64,
    c2: Complex64,
    c_plus: Complex64,
    c_minus: Complex64,
    tol: f64,
) -> Result<f64, CurrentError> {
    let at_infinity = c1.norm_sqr() - c2.norm_sqr();
    let at_origin = c_plus.norm_sqr() - c_minus.norm_sqr();
    let scale = [c1, c2, c_plus, c_minus]
        .iter()
        .map(|c| c.norm_sqr())
        .fold(1e-300, f64::max);
    if (at_infinity - at_origin).abs() > tol * scale {
        return Err(CurrentError::BalanceViolation {
            at_infinity,
            at_origin,
        });
    }
    Ok(0.5 * (at_infinity + at_origin))
}
