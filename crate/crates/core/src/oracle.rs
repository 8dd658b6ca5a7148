//! Closed-form scattering data for the pure conformal problem
//! `J = k² + (Θ² + 1/4)/r²`.
//!
//! The exact solutions are `sqrt(r) Z_{iΘ}(kr)`. Matching the small-argument
//! form of `J_{iΘ}` to `u₊ = sqrt(r/Θ)(μr)^(iΘ)` and the Hankel large-argument
//! forms to `u₁,₂ = k^(-1/2) e^(∓iπ/4) e^(±ikr)` gives
//!
//! ```text
//! a  = Γ(1+iΘ) (k/2μ)^(-iΘ) e^( πΘ/2) / sqrt(2πΘ)
//! b* = Γ(1+iΘ) (k/2μ)^(-iΘ) e^(-πΘ/2) / sqrt(2πΘ)
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connect::{ScatteringCoefficients, TransferMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("PoleOfGamma: Γ has a pole at {z}")]
    PoleOfGamma { z: Complex64 },
    #[error("InvalidParameter: {field} must be positive (got {value})")]
    InvalidParameter { field: &'static str, value: f64 },
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Γ(z) by the Lanczos approximation (g = 7, 9 terms), with reflection for
/// `Re z < 1/2`.
pub fn complex_gamma(z: Complex64) -> Result<Complex64, OracleError> {
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Err(OracleError::PoleOfGamma { z });
    }
    Ok(gamma_unchecked(z))
}

fn gamma_unchecked(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        let s = (z * PI).sin();
        return PI / (s * gamma_unchecked(1.0 - z));
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IspExactResult {
    pub theta: f64,
    pub k: f64,
    pub mu: f64,
    pub a: Complex64,
    pub b: Complex64,
    pub coefficients: ScatteringCoefficients,
    /// `Γ(1+iΘ)/Γ(1−iΘ)`
    pub gamma_ratio: Complex64,
}

impl IspExactResult {
    pub fn transfer(&self) -> TransferMatrix {
        TransferMatrix::from_entries(self.a, self.b)
    }

    /// `e^(−πΘ)`
    pub fn reflection_modulus(&self) -> f64 {
        (-PI * self.theta).exp()
    }

    /// `1 − e^(−2πΘ)`
    pub fn transmission_probability(&self) -> f64 {
        -(-2.0 * PI * self.theta).exp_m1()
    }
}

pub fn isp_exact(theta: f64, k: f64, mu: f64) -> Result<IspExactResult, OracleError> {
    for (field, value) in [("theta", theta), ("k", k), ("mu", mu)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(OracleError::InvalidParameter { field, value });
        }
    }
    let gamma = complex_gamma(Complex64::new(1.0, theta))?;
    let scale = Complex64::from_polar(1.0, -theta * (k / (2.0 * mu)).ln());
    let common = gamma * scale / (2.0 * PI * theta).sqrt();
    let a = common * (0.5 * PI * theta).exp();
    let b = (common * (-0.5 * PI * theta).exp()).conj();
    let m = TransferMatrix::from_entries(a, b);
    Ok(IspExactResult {
        theta,
        k,
        mu,
        a,
        b,
        coefficients: ScatteringCoefficients::from_transfer(&m),
        gamma_ratio: gamma / gamma.conj(),
    })
}
