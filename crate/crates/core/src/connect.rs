//! Transfer matrix between the singularity and asymptotic bases, the
//! scattering coefficients it encodes, and the Möbius map `Ω ↦ Ŝ(Ω)`.
//!
//! `M = [[a, b], [b*, a*]]` maps `(C⁺, C⁻)` to `(C¹, C²)`. The `u₊` column is
//! read off by projecting the propagated `u₊` solution on `{u₁, u₂}` with
//! Wronskians; the `u₋` column comes from the propagated `u₋` carried along as
//! the companion solution.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::bases::{self, BasisError};
use crate::currents::wronskian_unchecked;
use crate::integrate::{self, IntegrateError, IntegratorOptions, StateVector, StepStats};
use crate::model::{ModelError, ProblemConfig, SingularityClass, ValidatedConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConnectError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("NoStabilization: relative change {delta:e} still above tol at r_max = {r_max}")]
    NoStabilization { delta: f64, r_max: f64 },
    #[error("DegenerateColumns: transfer matrix entry a = {a} is not admissible")]
    DegenerateColumns { a: Complex64 },
    #[error("DegenerateTransmission: |a| = {modulus_a:e} exceeds 1/tol (|T| ≈ 0)")]
    DegenerateTransmission {
        modulus_a: f64,
        coefficients: Box<ScatteringCoefficients>,
    },
    #[error("PoleProximity: Ω = {omega} is within tolerance of the pole {pole}")]
    PoleProximity { omega: Omega, pole: Omega },
}

/// Projective singularity parameter `Ω = C⁺/C⁻`; `Infinity` is pure `u₊`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Omega {
    Finite(Complex64),
    Infinity,
}

impl Omega {
    pub fn new(re: f64, im: f64) -> Self {
        Omega::Finite(Complex64::new(re, im))
    }

    pub fn finite(&self) -> Option<Complex64> {
        match self {
            Omega::Finite(z) => Some(*z),
            Omega::Infinity => None,
        }
    }
}

impl From<Complex64> for Omega {
    fn from(z: Complex64) -> Self {
        Omega::Finite(z)
    }
}

impl fmt::Display for Omega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Omega::Finite(z) => write!(f, "({}, {})", z.re, z.im),
            Omega::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for Omega {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Omega::Finite(z) => z.serialize(s),
            Omega::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Omega {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Pair(Complex64),
            Token(String),
        }
        match Repr::deserialize(d)? {
            Repr::Pair(z) => Ok(Omega::Finite(z)),
            Repr::Token(t) if t == "inf" => Ok(Omega::Infinity),
            Repr::Token(t) => Err(serde::de::Error::custom(format!("unknown Ω token {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TransferResiduals {
    /// `| |a|² − |b|² − 1 | / max(1, |a|²)`.
    pub su11_defect: f64,
    /// Deviation of the raw 2×2 from the `[[a, b], [b*, a*]]` pattern, over `max(1, |a|)`.
    pub structure_defect: f64,
    /// Relative drift of `W[u₊, u₋]` along the propagation.
    pub wronskian_drift: f64,
    /// Relative change of `(a, b)` between the last two extraction radii.
    pub stabilization_delta: f64,
    pub singular_estimate: f64,
    pub asymptotic_estimate: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub doublings: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub a: Complex64,
    pub b: Complex64,
    pub residuals: TransferResiduals,
}

impl TransferMatrix {
    pub fn from_entries(a: Complex64, b: Complex64) -> Self {
        let mut m = Self {
            a,
            b,
            residuals: TransferResiduals::default(),
        };
        m.residuals.su11_defect = m.su11_defect();
        m
    }

    pub fn identity() -> Self {
        Self::from_entries(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn su11_defect(&self) -> f64 {
        let n = self.a.norm_sqr();
        (n - self.b.norm_sqr() - 1.0).abs() / n.max(1.0)
    }

    /// `(C¹, C²)` for given `(C⁺, C⁻)`.
    pub fn apply(&self, c_plus: Complex64, c_minus: Complex64) -> (Complex64, Complex64) {
        (
            self.a * c_plus + self.b * c_minus,
            self.b.conj() * c_plus + self.a.conj() * c_minus,
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConnectOptions {
    /// Double `r_max` until `(a, b)` settle, then extrapolate. When off, the
    /// configured `r_max` is used verbatim and only the change to `2 r_max` is
    /// measured.
    pub stabilize: bool,
    pub max_doublings: usize,
}

impl Default for ConnectOptions {
    fn default() -> Self {
        Self {
            stabilize: true,
            max_doublings: 6,
        }
    }
}

/// `(C¹, C²)` of `w` in the basis `{u₁, u₂}`, all at one radius.
pub fn project(w: &StateVector, u1: &StateVector, u2: &StateVector) -> (Complex64, Complex64) {
    let w21 = wronskian_unchecked(u2, u1);
    (
        wronskian_unchecked(u2, w) / w21,
        wronskian_unchecked(u1, w) / -w21,
    )
}

#[derive(Debug, Clone, Copy)]
struct Extraction {
    a: Complex64,
    b: Complex64,
    structure: f64,
    estimate: f64,
    r: f64,
}

impl Extraction {
    fn distance(&self, other: &Extraction) -> f64 {
        (self.a - other.a).norm().max((self.b - other.b).norm()) / self.a.norm().max(1.0)
    }
}

fn extract(config: &ValidatedConfig, mains: &[StateVector], comps: &[StateVector]) -> Extraction {
    let mut raw = [Complex64::new(0.0, 0.0); 4];
    let mut estimate = 0.0f64;
    for (w, v) in mains.iter().zip(comps) {
        let basis = bases::eval_asymptotic_unchecked(config, w.r);
        estimate = estimate.max(basis.truncation_error);
        let (u1, u2) = (basis.first.state(), basis.second.state());
        let (c1w, c2w) = project(w, &u1, &u2);
        let (c1v, c2v) = project(v, &u1, &u2);
        raw[0] += c1w;
        raw[1] += c1v;
        raw[2] += c2w;
        raw[3] += c2v;
    }
    let n = mains.len() as f64;
    for x in raw.iter_mut() {
        *x /= n;
    }
    let a = 0.5 * (raw[0] + raw[3].conj());
    let b = 0.5 * (raw[1] + raw[2].conj());
    let structure =
        (raw[0] - raw[3].conj()).norm().max((raw[1] - raw[2].conj()).norm()) / a.norm().max(1.0);
    Extraction {
        a,
        b,
        structure,
        estimate,
        r: mains[0].r,
    }
}

fn drift_against(w0: Complex64, mains: &[StateVector], comps: &[StateVector]) -> f64 {
    mains
        .iter()
        .zip(comps)
        .map(|(a, b)| {
            let scale = w0.norm().max(a.u.norm() * b.du.norm() + a.du.norm() * b.u.norm());
            (wronskian_unchecked(a, b) - w0).norm() / scale
        })
        .fold(0.0, f64::max)
}

fn richardson_order(config: &ValidatedConfig) -> f64 {
    match config.class() {
        SingularityClass::Conformal { .. } => 3.0,
        SingularityClass::PowerLaw { .. } => config.config().p + 1.0,
    }
}

pub fn transfer_matrix(config: &ValidatedConfig) -> Result<TransferMatrix, ConnectError> {
    transfer_matrix_with(config, &ConnectOptions::default())
}

pub fn transfer_matrix_with(
    config: &ValidatedConfig,
    opts: &ConnectOptions,
) -> Result<TransferMatrix, ConnectError> {
    let r_min = bases::choose_r_min(config)?;
    let start = bases::eval_singularity(config, r_min)?;
    let mut r_ext = if opts.stabilize {
        bases::choose_r_max(config)?
    } else {
        config.config().r_max
    };
    let iopts = IntegratorOptions::for_tol(config.tol());
    let spacing = PI / (4.0 * config.k());

    let mut main = start.first.state();
    let mut companion = start.second.state();
    let w0 = wronskian_unchecked(&main, &companion);
    let mut drift = 0.0f64;
    let mut stats = StepStats::default();
    let mut prev: Option<Extraction> = None;
    let mut delta = f64::INFINITY;
    let levels = if opts.stabilize { opts.max_doublings + 1 } else { 2 };

    let finish = |m: Extraction, prev: Option<Extraction>, delta: f64, level: usize, drift: f64, stats: StepStats| {
        let tm = TransferMatrix {
            a: m.a,
            b: m.b,
            residuals: TransferResiduals {
                su11_defect: 0.0,
                structure_defect: m.structure.max(prev.map_or(0.0, |p| p.structure)),
                wronskian_drift: drift,
                stabilization_delta: delta,
                singular_estimate: start.truncation_error,
                asymptotic_estimate: m.estimate,
                r_min,
                r_max: m.r,
                doublings: level,
                steps: stats.accepted,
            },
        };
        let mut tm = tm;
        tm.residuals.su11_defect = tm.su11_defect();
        if !(tm.a.re.is_finite() && tm.a.im.is_finite() && tm.b.re.is_finite() && tm.b.im.is_finite())
            || tm.a.norm() < 0.5
        {
            return Err(ConnectError::DegenerateColumns { a: tm.a });
        }
        Ok(tm)
    };

    for level in 0..levels {
        let stops: Vec<f64> = (0..4).map(|j| r_ext + j as f64 * spacing).collect();
        let traj = integrate::propagate_with(|r| config.j(r), main, &stops, Some(companion), &iopts)?;
        let mains = traj.at_stops();
        let comps = traj.companion_at_stops().expect("companion was supplied");
        drift = drift.max(drift_against(w0, &traj.samples, traj.companion.as_deref().unwrap_or(&[])));
        stats.accepted += traj.stats.accepted;
        stats.rejected += traj.stats.rejected;
        stats.evaluations += traj.stats.evaluations;
        let ext = extract(config, &mains, &comps);
        main = traj.last();
        companion = traj.last_companion().expect("companion was supplied");
        let last_stop = stops[3];

        if let Some(p) = prev {
            delta = ext.distance(&p);
            if !opts.stabilize {
                return finish(p, Some(ext), delta, level, drift, stats);
            }
            if delta < config.tol() {
                let rho = (ext.r / p.r).powf(richardson_order(config));
                let extrapolated = Extraction {
                    a: (rho * ext.a - p.a) / (rho - 1.0),
                    b: (rho * ext.b - p.b) / (rho - 1.0),
                    ..ext
                };
                return finish(extrapolated, Some(p), delta, level, drift, stats);
            }
        }
        prev = Some(ext);
        r_ext = (2.0 * r_ext).max(last_stop + spacing);
    }
    Err(ConnectError::NoStabilization {
        delta,
        r_max: prev.map_or(r_ext, |p| p.r),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitarityDefects {
    /// `| |R|² + |T|² − 1 |`
    pub right: f64,
    /// `| |R′|² + |T′|² − 1 |`
    pub left: f64,
    /// `|R* T′ + T* R′|`
    pub stokes: f64,
    /// `|T − T′|`
    pub reciprocity: f64,
}

impl UnitarityDefects {
    pub fn max(&self) -> f64 {
        self.right.max(self.left).max(self.stokes).max(self.reciprocity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringCoefficients {
    pub r: Complex64,
    pub t: Complex64,
    pub r_prime: Complex64,
    pub t_prime: Complex64,
}

impl ScatteringCoefficients {
    pub fn from_transfer(m: &TransferMatrix) -> Self {
        let ac = m.a.conj();
        Self {
            r: -m.b.conj() / ac,
            t: 1.0 / ac,
            r_prime: m.b / ac,
            t_prime: 1.0 / ac,
        }
    }

    pub fn defects(&self) -> UnitarityDefects {
        UnitarityDefects {
            right: (self.r.norm_sqr() + self.t.norm_sqr() - 1.0).abs(),
            left: (self.r_prime.norm_sqr() + self.t_prime.norm_sqr() - 1.0).abs(),
            stokes: (self.r.conj() * self.t_prime + self.t.conj() * self.r_prime).norm(),
            reciprocity: (self.t - self.t_prime).norm(),
        }
    }
}

/// `R = −b*/a*`, `T = T′ = 1/a*`, `R′ = b/a*`.
pub fn scattering_coefficients(m: &TransferMatrix, tol: f64) -> Result<ScatteringCoefficients, ConnectError> {
    let coefficients = ScatteringCoefficients::from_transfer(m);
    let modulus_a = m.a.norm();
    if modulus_a > 1.0 / tol {
        return Err(ConnectError::DegenerateTransmission {
            modulus_a,
            coefficients: Box::new(coefficients),
        });
    }
    Ok(coefficients)
}

/// `Ŝ(Ω) = (aΩ + b)/(b*Ω + a*)`; `Ŝ(∞) = a/b*`.
pub fn s_matrix(m: &TransferMatrix, omega: Omega, tol: f64) -> Result<Complex64, ConnectError> {
    let (a, b) = (m.a, m.b);
    match omega {
        Omega::Finite(w) => {
            if b.norm() > 0.0 {
                let pole = -a.conj() / b.conj();
                if (w - pole).norm() < tol * pole.norm() {
                    return Err(ConnectError::PoleProximity {
                        omega,
                        pole: Omega::Finite(pole),
                    });
                }
            }
            Ok((a * w + b) / (b.conj() * w + a.conj()))
        }
        Omega::Infinity => {
            if b.norm() == 0.0 {
                return Err(ConnectError::PoleProximity {
                    omega,
                    pole: Omega::Infinity,
                });
            }
            Ok(a / b.conj())
        }
    }
}

/// `Ω = (Ŝ a* − b)/(a − Ŝ b*)`, the inverse Möbius map.
pub fn s_matrix_inverse(m: &TransferMatrix, s: Complex64) -> Omega {
    let den = m.a - s * m.b.conj();
    if den.norm() == 0.0 {
        return Omega::Infinity;
    }
    Omega::Finite((s * m.a.conj() - m.b) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseDefects {
    /// `|Δ + T/T*|`
    pub transmission: f64,
    /// `|Δ − R′/R*|`, zero when `R = 0`.
    pub reflection: f64,
    /// `| |Δ| − 1 |`
    pub modulus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SMatrixMap {
    pub delta: Complex64,
    /// `Ω₁ = R*`, withheld on the degenerate branch.
    pub zero: Option<Complex64>,
    /// `Ω₂ = 1/R`, withheld on the degenerate branch.
    pub pole: Option<Omega>,
    pub a: Complex64,
    pub b: Complex64,
    pub degenerate: bool,
    /// The unimodular constant `Δ R*/|R|` reported when degenerate.
    pub constant: Option<Complex64>,
    pub phase_defects: PhaseDefects,
}

impl SMatrixMap {
    pub fn eval(&self, omega: Omega, tol: f64) -> Result<Complex64, ConnectError> {
        if let Some(c) = self.constant {
            return Ok(c);
        }
        s_matrix(&TransferMatrix::from_entries(self.a, self.b), omega, tol)
    }

    /// `Δ (Ω − R*)/(R Ω − 1)`, the Blaschke-factor form.
    pub fn eval_blaschke(&self, omega: Omega) -> Complex64 {
        let r = -self.b.conj() / self.a.conj();
        match omega {
            Omega::Finite(w) => self.delta * (w - r.conj()) / (r * w - 1.0),
            Omega::Infinity => self.delta / r,
        }
    }
}

pub fn blaschke_params(m: &TransferMatrix, tol: f64) -> SMatrixMap {
    let sc = ScatteringCoefficients::from_transfer(m);
    let delta = -m.a / m.a.conj();
    let r = sc.r;
    let degenerate = r.norm() > 1.0 - tol.sqrt();
    let phase_defects = PhaseDefects {
        transmission: (delta + sc.t / sc.t.conj()).norm(),
        reflection: if r.norm() > 0.0 {
            (delta - sc.r_prime / r.conj()).norm()
        } else {
            0.0
        },
        modulus: (delta.norm() - 1.0).abs(),
    };
    let (zero, pole, constant) = if degenerate {
        let c = delta * r.conj();
        (None, None, Some(c / c.norm()))
    } else if r.norm() == 0.0 {
        (Some(Complex64::new(0.0, 0.0)), Some(Omega::Infinity), None)
    } else {
        (Some(r.conj()), Some(Omega::Finite(1.0 / r)), None)
    };
    SMatrixMap {
        delta,
        zero,
        pole,
        a: m.a,
        b: m.b,
        degenerate,
        constant,
        phase_defects,
    }
}

/// `S = e^(iπ(l+ν)) Ŝ`.
pub fn full_s_matrix(
    config: &ProblemConfig,
    m: &TransferMatrix,
    omega: Omega,
    tol: f64,
) -> Result<Complex64, ConnectError> {
    let phase = Complex64::from_polar(1.0, PI * config.l_plus_nu);
    Ok(phase * s_matrix(m, omega, tol)?)
}
