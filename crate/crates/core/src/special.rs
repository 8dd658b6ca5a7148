//! Asymptotic Hankel series used by both bases.

use num_complex::Complex64;

/// Partial sum of `Σ_m (s·i)^m a_m(ν) / z^m` and its `z`-derivative, where
/// `a_m(ν) = Π_{j=1..m} (4ν² − (2j−1)²) / (m! 8^m)` and `s = ±1`.
///
/// `s = +1` gives the correction factor of `H^(1)_ν(z)`, `s = −1` the one of
/// `H^(2)_ν(z)`. The sum is truncated at the smallest term.
#[derive(Debug, Clone, Copy)]
pub struct HankelSeries {
    pub sum: Complex64,
    pub derivative: Complex64,
    /// Magnitude of the first omitted term.
    pub remainder: f64,
    pub terms: usize,
}

const MAX_TERMS: usize = 400;

pub fn hankel_series(four_nu_sq: f64, z: f64, sign: f64) -> HankelSeries {
    let step = Complex64::new(0.0, sign);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut derivative = Complex64::new(0.0, 0.0);
    let mut prev_mag = 1.0;
    let mut m = 0usize;
    loop {
        if m >= MAX_TERMS {
            return HankelSeries {
                sum,
                derivative,
                remainder: prev_mag,
                terms: m + 1,
            };
        }
        let j = (m + 1) as f64;
        let odd = 2.0 * j - 1.0;
        let next = term * step * ((four_nu_sq - odd * odd) / (8.0 * j * z));
        let mag = next.norm();
        if mag == 0.0 {
            // Half-integer order: the series terminates.
            return HankelSeries {
                sum,
                derivative,
                remainder: 0.0,
                terms: m + 1,
            };
        }
        if mag > prev_mag || mag < f64::EPSILON * 1e-3 * sum.norm() {
            return HankelSeries {
                sum,
                derivative,
                remainder: mag,
                terms: m + 1,
            };
        }
        sum += next;
        derivative -= next * (j / z);
        term = next;
        prev_mag = mag;
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_integer_order_is_exact() {
        let s = hankel_series(1.0, 0.3, 1.0);
        assert_eq!(s.sum, Complex64::new(1.0, 0.0));
        assert_eq!(s.remainder, 0.0);
        // ν = 3/2: exactly 1 + i/z
        let s = hankel_series(9.0, 2.0, 1.0);
        assert!((s.sum - Complex64::new(1.0, 0.5)).norm() < 1e-15);
        assert!((s.derivative - Complex64::new(0.0, -0.25)).norm() < 1e-15);
    }

    #[test]
    fn conjugate_sign_gives_conjugate_sum() {
        let a = hankel_series(-4.0, 7.5, 1.0);
        let b = hankel_series(-4.0, 7.5, -1.0);
        assert!((a.sum - b.sum.conj()).norm() < 1e-16);
        assert!((a.derivative - b.derivative.conj()).norm() < 1e-16);
    }

    #[test]
    fn order_zero_large_argument_matches_h0() {
        // H0^(1)(20) = J0(20) + i Y0(20)
        let z = 20.0f64;
        let s = hankel_series(0.0, z, 1.0);
        let phase = Complex64::new(0.0, z - std::f64::consts::FRAC_PI_4).exp();
        let h = (2.0 / (std::f64::consts::PI * z)).sqrt() * phase * s.sum;
        let j0 = 0.167_024_664_340_583_2;
        let y0 = 0.062_640_596_809_383_69;
        assert!((h.re - j0).abs() < 1e-12, "{}", h.re);
        assert!((h.im - y0).abs() < 1e-12, "{}", h.im);
    }
}
