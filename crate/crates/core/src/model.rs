//! Problem configuration and the normal invariant `J(r)` of `u'' + J(r) u = 0`.
//!
//! The governing equation carries an irregular singular point at infinity and a
//! finite singular point at `r = 0` where `J(r) ~ λ r^(-p)`. Two classes are
//! supported: the conformal class `p = 2` (regular singular point, supercritical
//! coupling only) and the strongly singular class `p > 2`.
//!
//! For `p = 2` the centrifugal term is folded into `λ`, so the pure conformal
//! problem reads `J = k² + (Θ² + 1/4)/r²` with `Θ² = λ − 1/4`. The field
//! `l_plus_nu` then only enters the phase of the full S-matrix.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("SubcriticalCoupling: p = 2 requires lambda > 1/4 (got lambda = {lambda})")]
    SubcriticalCoupling { lambda: f64 },
    #[error("NonSingular: lambda must be positive (got {lambda})")]
    NonSingular { lambda: f64 },
    #[error("BadGrid: need 0 < r_min < r_max (got r_min = {r_min}, r_max = {r_max})")]
    BadGrid { r_min: f64, r_max: f64 },
    #[error("InvalidParameter: field `{field}` {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("NonPositiveRadius: r must be positive (got {r})")]
    NonPositiveRadius { r: f64 },
}

fn default_l_plus_nu() -> f64 {
    0.5
}

fn default_mu() -> f64 {
    1.0
}

fn default_r_min() -> f64 {
    0.1
}

fn default_r_max() -> f64 {
    40.0
}

fn default_tol() -> f64 {
    1e-10
}

/// Full description of one scattering problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Power of the leading singular term, `p ≥ 2`.
    pub p: f64,
    /// Coupling of the leading singular term `λ r^(-p)`.
    pub lambda: f64,
    /// Wavenumber.
    pub k: f64,
    /// Combined angular parameter `l + ν`.
    #[serde(default = "default_l_plus_nu")]
    pub l_plus_nu: f64,
    /// Floating inverse length fixing the phase of the `p = 2` singularity basis.
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Optional smooth short-range term `W(r)` entering `V = −λ r^(-p) + W`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_potential: Option<ExtraPotential>,
    /// Upper bound for the radius where the singularity basis is imposed.
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    /// Lower bound for the radius where the asymptotic basis is projected out.
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    /// Relative tolerance shared by every numerical stage.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl ProblemConfig {
    /// Pure conformal problem `J = k² + (Θ² + 1/4)/r²`.
    pub fn conformal(theta: f64, k: f64, mu: f64) -> Self {
        Self {
            p: 2.0,
            lambda: theta * theta + 0.25,
            k,
            l_plus_nu: default_l_plus_nu(),
            mu,
            extra_potential: None,
            r_min: default_r_min(),
            r_max: default_r_max(),
            tol: default_tol(),
        }
    }

    /// Pure power law `J = k² + λ r^(-p) − ((l+ν)² − 1/4)/r²` with `l + ν = 1/2`.
    pub fn power_law(p: f64, lambda: f64, k: f64) -> Self {
        Self {
            p,
            lambda,
            k,
            l_plus_nu: default_l_plus_nu(),
            mu: default_mu(),
            extra_potential: None,
            r_min: default_r_min(),
            r_max: default_r_max(),
            tol: default_tol(),
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_extra_potential(mut self, w: ExtraPotential) -> Self {
        self.extra_potential = Some(w);
        self
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Smooth additional potential `W(r)`, decaying faster than `r^(-2)` at infinity
/// and bounded at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExtraPotential {
    /// `A · exp(−(r − c)² / (2 w²))`
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `A · exp(−r / a)`
    Exponential { amplitude: f64, range: f64 },
    /// Sum of analytic pieces.
    Sum { terms: Vec<ExtraPotential> },
}

impl ExtraPotential {
    pub fn value(&self, r: f64) -> f64 {
        match self {
            Self::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let x = (r - center) / width;
                amplitude * (-0.5 * x * x).exp()
            }
            Self::Exponential { amplitude, range } => amplitude * (-r / range).exp(),
            Self::Sum { terms } => terms.iter().map(|t| t.value(r)).sum(),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match self {
            Self::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let x = (r - center) / width;
                -amplitude * x / width * (-0.5 * x * x).exp()
            }
            Self::Exponential { amplitude, range } => -amplitude / range * (-r / range).exp(),
            Self::Sum { terms } => terms.iter().map(|t| t.derivative(r)).sum(),
        }
    }

    /// Upper bound of `|W|` on `[0, r]`.
    pub fn sup_abs_below(&self, r: f64) -> f64 {
        match self {
            Self::Gaussian {
                amplitude, center, ..
            } => {
                let nearest = center.clamp(0.0, r);
                self.value(nearest).abs().max(amplitude.abs() * f64::EPSILON)
            }
            Self::Exponential { amplitude, .. } => amplitude.abs(),
            Self::Sum { terms } => terms.iter().map(|t| t.sup_abs_below(r)).sum(),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |reason: &str| ModelError::InvalidParameter {
            field: "extra_potential",
            reason: reason.to_string(),
        };
        match self {
            Self::Gaussian {
                amplitude,
                center,
                width,
            } => {
                if !(amplitude.is_finite() && center.is_finite()) {
                    return Err(bad("has non-finite gaussian parameters"));
                }
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(bad("requires a positive gaussian width"));
                }
            }
            Self::Exponential { amplitude, range } => {
                if !amplitude.is_finite() {
                    return Err(bad("has a non-finite exponential amplitude"));
                }
                if !(*range > 0.0 && range.is_finite()) {
                    return Err(bad("requires a positive exponential range"));
                }
            }
            Self::Sum { terms } => {
                for t in terms {
                    t.validate()?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum SingularityClass {
    /// `p = 2`, with `Θ = sqrt(λ − 1/4)`.
    Conformal { theta: f64 },
    /// `p > 2`, with `n = p − 2`.
    PowerLaw { n: f64 },
}

/// A configuration that passed [`validate`], with derived parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    config: ProblemConfig,
    class: SingularityClass,
}

fn require_finite(field: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            field,
            reason: format!("must be finite (got {value})"),
        })
    }
}

pub fn validate(config: &ProblemConfig) -> Result<ValidatedConfig, ModelError> {
    for (field, value) in [
        ("p", config.p),
        ("lambda", config.lambda),
        ("k", config.k),
        ("l_plus_nu", config.l_plus_nu),
        ("mu", config.mu),
        ("r_min", config.r_min),
        ("r_max", config.r_max),
        ("tol", config.tol),
    ] {
        require_finite(field, value)?;
    }
    if config.p < 2.0 {
        return Err(ModelError::InvalidParameter {
            field: "p",
            reason: format!("must be at least 2 (got {})", config.p),
        });
    }
    if config.lambda <= 0.0 {
        return Err(ModelError::NonSingular {
            lambda: config.lambda,
        });
    }
    if config.k <= 0.0 {
        return Err(ModelError::InvalidParameter {
            field: "k",
            reason: format!("must be positive (got {})", config.k),
        });
    }
    if config.tol <= 0.0 {
        return Err(ModelError::InvalidParameter {
            field: "tol",
            reason: format!("must be positive (got {})", config.tol),
        });
    }
    if !(config.r_min > 0.0 && config.r_min < config.r_max) {
        return Err(ModelError::BadGrid {
            r_min: config.r_min,
            r_max: config.r_max,
        });
    }
    if let Some(w) = &config.extra_potential {
        w.validate()?;
    }

    let class = if config.p == 2.0 {
        let theta_sq = config.lambda - 0.25;
        if theta_sq <= 0.0 {
            return Err(ModelError::SubcriticalCoupling {
                lambda: config.lambda,
            });
        }
        if config.mu <= 0.0 {
            return Err(ModelError::InvalidParameter {
                field: "mu",
                reason: format!("must be positive for p = 2 (got {})", config.mu),
            });
        }
        SingularityClass::Conformal {
            theta: theta_sq.sqrt(),
        }
    } else {
        SingularityClass::PowerLaw { n: config.p - 2.0 }
    };

    Ok(ValidatedConfig {
        config: config.clone(),
        class,
    })
}

/// `J(r) = k² + λ r^(-p) − ((l+ν)² − 1/4)/r²` with no folding and no extra term.
pub fn normal_invariant_raw(p: f64, lambda: f64, k: f64, l_plus_nu: f64, r: f64) -> f64 {
    k * k + lambda * r.powf(-p) - (l_plus_nu * l_plus_nu - 0.25) / (r * r)
}

impl ValidatedConfig {
    pub fn config(&self) -> &ProblemConfig {
        &self.config
    }

    pub fn class(&self) -> SingularityClass {
        self.class
    }

    pub fn k(&self) -> f64 {
        self.config.k
    }

    pub fn tol(&self) -> f64 {
        self.config.tol
    }

    pub fn theta(&self) -> Option<f64> {
        match self.class {
            SingularityClass::Conformal { theta } => Some(theta),
            SingularityClass::PowerLaw { .. } => None,
        }
    }

    pub fn has_extra_potential(&self) -> bool {
        self.config.extra_potential.is_some()
    }

    fn extra(&self, r: f64) -> f64 {
        self.config
            .extra_potential
            .as_ref()
            .map_or(0.0, |w| w.value(r))
    }

    fn extra_derivative(&self, r: f64) -> f64 {
        self.config
            .extra_potential
            .as_ref()
            .map_or(0.0, |w| w.derivative(r))
    }

    /// Bound on `|W|` between the origin and `r`.
    pub fn extra_sup_below(&self, r: f64) -> f64 {
        self.config
            .extra_potential
            .as_ref()
            .map_or(0.0, |w| w.sup_abs_below(r))
    }

    /// Checked evaluation of the normal invariant.
    pub fn normal_invariant(&self, r: f64) -> Result<f64, ModelError> {
        if !(r > 0.0) {
            return Err(ModelError::NonPositiveRadius { r });
        }
        Ok(self.j(r))
    }

    /// Unchecked `J(r)`, for inner loops.
    pub fn j(&self, r: f64) -> f64 {
        self.j_tail(r) + self.residual(r)
    }

    pub fn j_prime(&self, r: f64) -> f64 {
        self.j_tail_prime(r) + self.residual_prime(r)
    }

    /// Coefficient `c` in the large-r form `J ~ k² − c / r²`.
    pub fn tail_coefficient(&self) -> f64 {
        match self.class {
            SingularityClass::Conformal { .. } => -self.config.lambda,
            SingularityClass::PowerLaw { .. } => {
                self.config.l_plus_nu * self.config.l_plus_nu - 0.25
            }
        }
    }

    /// `4ν²` for the Bessel order `ν` of the exact solutions of the `1/r²` tail.
    pub fn tail_four_nu_sq(&self) -> f64 {
        4.0 * self.tail_coefficient() + 1.0
    }

    /// `4ν²` for the Bessel order of the exact `k = 0` solutions near the origin
    /// (`p > 2` only): `ν = 2 |l + ν| / n`.
    pub fn origin_four_nu_sq(&self) -> Option<f64> {
        match self.class {
            SingularityClass::Conformal { .. } => None,
            SingularityClass::PowerLaw { n } => {
                let nu = 2.0 * self.config.l_plus_nu / n;
                Some(4.0 * nu * nu)
            }
        }
    }

    /// The part of `J` solved exactly by Hankel functions at large r.
    pub fn j_tail(&self, r: f64) -> f64 {
        let k = self.config.k;
        k * k - self.tail_coefficient() / (r * r)
    }

    pub fn j_tail_prime(&self, r: f64) -> f64 {
        2.0 * self.tail_coefficient() / (r * r * r)
    }

    /// `J − J_tail`: faster-than-`r^(-2)` remainder at large r.
    pub fn residual(&self, r: f64) -> f64 {
        let power = match self.class {
            SingularityClass::Conformal { .. } => 0.0,
            SingularityClass::PowerLaw { .. } => self.config.lambda * r.powf(-self.config.p),
        };
        power - self.extra(r)
    }

    pub fn residual_prime(&self, r: f64) -> f64 {
        let power = match self.class {
            SingularityClass::Conformal { .. } => 0.0,
            SingularityClass::PowerLaw { .. } => {
                -self.config.p * self.config.lambda * r.powf(-self.config.p - 1.0)
            }
        };
        power - self.extra_derivative(r)
    }

    /// Returns a copy with a different wavenumber, revalidated.
    pub fn with_k(&self, k: f64) -> Result<Self, ModelError> {
        let mut c = self.config.clone();
        c.k = k;
        validate(&c)
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self, ModelError> {
        let mut c = self.config.clone();
        c.mu = mu;
        validate(&c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conformal_theta_from_lambda() {
        let mut c = ProblemConfig::conformal(1.0, 1.0, 1.0);
        c.lambda = 1.25;
        let vc = validate(&c).unwrap();
        assert_eq!(vc.class(), SingularityClass::Conformal { theta: 1.0 });
    }

    #[test]
    fn critical_coupling_rejected() {
        let mut c = ProblemConfig::conformal(1.0, 1.0, 1.0);
        c.lambda = 0.25;
        assert!(matches!(
            validate(&c),
            Err(ModelError::SubcriticalCoupling { .. })
        ));
    }

    #[test]
    fn quartic_has_n_two() {
        let vc = validate(&ProblemConfig::power_law(4.0, 1.0, 1.0)).unwrap();
        assert_eq!(vc.class(), SingularityClass::PowerLaw { n: 2.0 });
    }

    #[test]
    fn rejections() {
        let mut c = ProblemConfig::power_law(4.0, 0.0, 1.0);
        assert!(matches!(validate(&c), Err(ModelError::NonSingular { .. })));
        c.lambda = 1.0;
        c.r_min = 2.0;
        c.r_max = 1.0;
        assert!(matches!(validate(&c), Err(ModelError::BadGrid { .. })));
        c.r_min = -1.0;
        assert!(matches!(validate(&c), Err(ModelError::BadGrid { .. })));
        let mut c = ProblemConfig::power_law(4.0, 1.0, -1.0);
        assert!(matches!(
            validate(&c),
            Err(ModelError::InvalidParameter { field: "k", .. })
        ));
        c.k = 1.0;
        c.p = 1.5;
        assert!(matches!(
            validate(&c),
            Err(ModelError::InvalidParameter { field: "p", .. })
        ));
        let mut c = ProblemConfig::conformal(1.0, 1.0, 0.0);
        assert!(matches!(
            validate(&c),
            Err(ModelError::InvalidParameter { field: "mu", .. })
        ));
        c.mu = 1.0;
        c.tol = 0.0;
        assert!(matches!(
            validate(&c),
            Err(ModelError::InvalidParameter { field: "tol", .. })
        ));
    }

    #[test]
    fn mu_ignored_for_power_law() {
        let mut c = ProblemConfig::power_law(4.0, 1.0, 1.0);
        c.mu = -3.0;
        assert!(validate(&c).is_ok());
    }

    #[test]
    fn invariant_examples() {
        assert_eq!(normal_invariant_raw(3.0, 0.0, 2.0, 0.5, 1.0), 4.0);

        let vc = validate(&ProblemConfig::conformal(1.0, 1.0, 1.0)).unwrap();
        assert!((vc.normal_invariant(0.5).unwrap() - 6.0).abs() < 1e-14);
        assert!(vc.normal_invariant(0.0).is_err());

        let vc = validate(&ProblemConfig::power_law(4.0, 1.0, 1.0)).unwrap();
        let j = vc.normal_invariant(1e-2).unwrap();
        assert!((j - 1e8).abs() / 1e8 < 1e-7);
    }

    #[test]
    fn small_r_scaling_approaches_lambda() {
        for (p, l_plus_nu) in [(3.0, 0.5), (4.0, 1.5), (6.0, 0.0)] {
            let mut c = ProblemConfig::power_law(p, 2.0, 1.0);
            c.l_plus_nu = l_plus_nu;
            let vc = validate(&c).unwrap();
            let rel = |r: f64| (vc.j(r) * r.powf(p) / 2.0 - 1.0).abs();
            let r = 1e-3 * c.r_min;
            assert!(rel(r * 0.1) < rel(r) || rel(r) < 1e-15);
            assert!(rel(r * 0.1) < 1e-6);
        }
        let vc = validate(&ProblemConfig::conformal(1.0, 1.0, 1.0)).unwrap();
        let r = 1e-4;
        assert!((vc.j(r) * r * r / 1.25 - 1.0).abs() < 1e-7);
    }

    #[test]
    fn large_r_approaches_k_squared() {
        let c = ProblemConfig::power_law(4.0, 1.0, 2.0).with_extra_potential(
            ExtraPotential::Gaussian {
                amplitude: 3.0,
                center: 2.0,
                width: 0.5,
            },
        );
        let vc = validate(&c).unwrap();
        let d1 = (vc.j(100.0) - 4.0).abs();
        let d2 = (vc.j(200.0) - 4.0).abs();
        assert!(d2 < d1 && d2 < 1e-8);
    }

    #[test]
    fn json_defaults_and_unknown_fields() {
        let c = ProblemConfig::from_json(r#"{"p": 2, "lambda": 1.25, "k": 1}"#).unwrap();
        assert_eq!(c.mu, 1.0);
        assert_eq!(c.tol, 1e-10);
        let err = ProblemConfig::from_json(r#"{"p": 2, "lambda": 1.25}"#).unwrap_err();
        assert!(err.to_string().contains("`k`"));
        assert!(ProblemConfig::from_json(r#"{"p": 2, "lambda": 1.25, "k": 1, "q": 0}"#).is_err());
        let c = ProblemConfig::from_json(
            r#"{"p": 4, "lambda": 1, "k": 1,
                "extra_potential": {"kind": "sum", "terms": [
                    {"kind": "gaussian", "amplitude": 1, "center": 2, "width": 0.5},
                    {"kind": "exponential", "amplitude": -1, "range": 0.3}]}}"#,
        )
        .unwrap();
        let w = c.extra_potential.unwrap();
        assert!((w.value(2.0) - (1.0 - (-2.0f64 / 0.3).exp())).abs() < 1e-15);
    }

    #[test]
    fn extra_potential_derivative_matches_difference() {
        let w = ExtraPotential::Sum {
            terms: vec![
                ExtraPotential::Gaussian {
                    amplitude: 2.0,
                    center: 1.0,
                    width: 0.7,
                },
                ExtraPotential::Exponential {
                    amplitude: -1.5,
                    range: 0.4,
                },
            ],
        };
        for r in [0.3, 1.0, 2.5] {
            let h = 1e-5;
            let fd = (w.value(r + h) - w.value(r - h)) / (2.0 * h);
            assert!((fd - w.derivative(r)).abs() < 1e-8);
        }
    }
}
