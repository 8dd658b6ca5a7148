//! Adaptive propagation of complex solutions of `u'' + J(r) u = 0`.
//!
//! The first-order system `(u, u')` is advanced with the Dormand–Prince 8(5,3)
//! pair. Complex components are carried as `Complex64`; since `J` is real the
//! arithmetic commutes exactly with complex conjugation, so propagating a
//! conjugated initial state yields the bitwise conjugate trajectory.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ValidatedConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("StepUnderflow: step {step:e} at r = {r} after {steps} steps")]
    StepUnderflow { r: f64, step: f64, steps: usize },
    #[error("DriftExceeded: Wronskian drift {drift:e} exceeds {limit:e}")]
    DriftExceeded { drift: f64, limit: f64 },
    #[error("NonFinite: solution blew up near r = {r}")]
    NonFinite { r: f64 },
    #[error("BadRadius: propagation requires positive radii (got {r})")]
    BadRadius { r: f64 },
}

/// `(r, u, du/dr)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub r: f64,
    pub u: Complex64,
    pub du: Complex64,
}

impl StateVector {
    pub fn new(r: f64, u: Complex64, du: Complex64) -> Self {
        Self { r, u, du }
    }

    pub fn conj(&self) -> Self {
        Self::new(self.r, self.u.conj(), self.du.conj())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.r, self.u * c, self.du * c)
    }

    /// Pointwise sum; radii are assumed equal.
    pub fn plus(&self, other: &Self) -> Self {
        Self::new(self.r, self.u + other.u, self.du + other.du)
    }

    pub fn is_finite(&self) -> bool {
        self.r.is_finite()
            && self.u.re.is_finite()
            && self.u.im.is_finite()
            && self.du.re.is_finite()
            && self.du.im.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub min_step: f64,
    pub max_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Accepted states, strictly monotone in `r`, starting with the initial state.
    pub samples: Vec<StateVector>,
    pub companion: Option<Vec<StateVector>>,
    /// Indices into `samples` of the requested stop radii.
    pub stop_indices: Vec<usize>,
    /// Largest relative change of `W[u, companion]` seen along the way.
    pub wronskian_drift: f64,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn last(&self) -> StateVector {
        *self.samples.last().expect("trajectory is never empty")
    }

    pub fn last_companion(&self) -> Option<StateVector> {
        self.companion.as_ref().and_then(|c| c.last().copied())
    }

    pub fn at_stops(&self) -> Vec<StateVector> {
        self.stop_indices.iter().map(|&i| self.samples[i]).collect()
    }

    pub fn companion_at_stops(&self) -> Option<Vec<StateVector>> {
        self.companion
            .as_ref()
            .map(|c| self.stop_indices.iter().map(|&i| c[i]).collect())
    }

    /// Debug dump: `r,re_u,im_u,re_du,im_du`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "re_u", "im_u", "re_du", "im_du"])?;
        for s in &self.samples {
            w.write_record([
                format!("{:.16e}", s.r),
                format!("{:.16e}", s.u.re),
                format!("{:.16e}", s.u.im),
                format!("{:.16e}", s.du.re),
                format!("{:.16e}", s.du.im),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Tolerance the caller asks for; drift is checked against `10 · tol`.
    pub tol: f64,
    /// Per-step error target handed to the controller.
    pub local_tol: f64,
    pub max_steps: usize,
    /// Upper bound of a step as a fraction of the local wavelength `2π/√|J|`.
    pub wavelength_fraction: f64,
    /// Fail with `DriftExceeded` when the companion Wronskian drifts too far.
    pub enforce_drift: bool,
}

impl IntegratorOptions {
    pub fn for_tol(tol: f64) -> Self {
        Self {
            tol,
            local_tol: (tol * 1e-2).max(1e-14),
            max_steps: 20_000_000,
            wavelength_fraction: 0.5,
            enforce_drift: true,
        }
    }
}

/// Propagates `init` to `r_target` under the configured `J`. A companion state,
/// when given, is carried along and its Wronskian with the main solution is
/// monitored.
pub fn propagate(
    config: &ValidatedConfig,
    init: StateVector,
    r_target: f64,
    companion: Option<StateVector>,
) -> Result<Trajectory, IntegrateError> {
    let opts = IntegratorOptions::for_tol(config.tol());
    propagate_with(|r| config.j(r), init, &[r_target], companion, &opts)
}

/// Propagation through an ordered list of stop radii, each hit exactly.
pub fn propagate_with<F: Fn(f64) -> f64>(
    j: F,
    init: StateVector,
    stops: &[f64],
    companion: Option<StateVector>,
    opts: &IntegratorOptions,
) -> Result<Trajectory, IntegrateError> {
    if !(init.r > 0.0) {
        return Err(IntegrateError::BadRadius { r: init.r });
    }
    if let Some(&bad) = stops.iter().find(|&&s| !(s > 0.0)) {
        return Err(IntegrateError::BadRadius { r: bad });
    }
    if !init.is_finite() {
        return Err(IntegrateError::NonFinite { r: init.r });
    }
    match companion {
        None => {
            let y0 = [init.u, init.du];
            let run = run::<_, 2>(&j, init.r, y0, stops, opts)?;
            Ok(Trajectory {
                samples: run
                    .states
                    .iter()
                    .map(|(r, y)| StateVector::new(*r, y[0], y[1]))
                    .collect(),
                companion: None,
                stop_indices: run.stop_indices,
                wronskian_drift: 0.0,
                stats: run.stats,
            })
        }
        Some(c) => {
            if !c.is_finite() {
                return Err(IntegrateError::NonFinite { r: c.r });
            }
            let y0 = [init.u, init.du, c.u, c.du];
            let run = run::<_, 4>(&j, init.r, y0, stops, opts)?;
            let samples: Vec<StateVector> = run
                .states
                .iter()
                .map(|(r, y)| StateVector::new(*r, y[0], y[1]))
                .collect();
            let companions: Vec<StateVector> = run
                .states
                .iter()
                .map(|(r, y)| StateVector::new(*r, y[2], y[3]))
                .collect();
            let drift = wronskian_drift(&samples, &companions);
            if opts.enforce_drift && drift > 10.0 * opts.tol {
                return Err(IntegrateError::DriftExceeded {
                    drift,
                    limit: 10.0 * opts.tol,
                });
            }
            Ok(Trajectory {
                samples,
                companion: Some(companions),
                stop_indices: run.stop_indices,
                wronskian_drift: drift,
                stats: run.stats,
            })
        }
    }
}

/// `max_r |W(r) − W(r₀)| / max(|W(r₀)|, |u||v'| + |u'||v|)`.
///
/// The second scale keeps the measure meaningful when both solutions grow
/// through a classically forbidden region and `W` is a small difference of
/// large products.
pub fn wronskian_drift(main: &[StateVector], companion: &[StateVector]) -> f64 {
    let w = |a: &StateVector, b: &StateVector| a.u * b.du - a.du * b.u;
    let (Some(a0), Some(b0)) = (main.first(), companion.first()) else {
        return 0.0;
    };
    let w0 = w(a0, b0);
    main.iter()
        .zip(companion)
        .map(|(a, b)| {
            let scale = w0.norm().max(a.u.norm() * b.du.norm() + a.du.norm() * b.u.norm());
            if scale == 0.0 {
                0.0
            } else {
                (w(a, b) - w0).norm() / scale
            }
        })
        .fold(0.0, f64::max)
}

struct Run<const N: usize> {
    states: Vec<(f64, [Complex64; N])>,
    stop_indices: Vec<usize>,
    stats: StepStats,
}

fn rhs<F: Fn(f64) -> f64, const N: usize>(j: &F, r: f64, y: &[Complex64; N]) -> [Complex64; N] {
    let jr = j(r);
    let mut out = [Complex64::new(0.0, 0.0); N];
    for p in 0..N / 2 {
        out[2 * p] = y[2 * p + 1];
        out[2 * p + 1] = -y[2 * p] * jr;
    }
    out
}

fn combine<const N: usize>(y: &[Complex64; N], h: f64, terms: &[(f64, &[Complex64; N])]) -> [Complex64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        *o += acc * h;
    }
    out
}

fn lincomb<const N: usize>(terms: &[(f64, &[Complex64; N])]) -> [Complex64; N] {
    let mut out = [Complex64::new(0.0, 0.0); N];
    for (i, o) in out.iter_mut().enumerate() {
        for (c, k) in terms {
            *o += k[i] * *c;
        }
    }
    out
}

/// `sqrt(|J| + r^-2)`: local wavenumber, bounded away from zero.
fn local_wavenumber(jr: f64, r: f64) -> f64 {
    (jr.abs() + 1.0 / (r * r)).sqrt()
}

fn step_cap(jr: f64, r: f64, fraction: f64) -> f64 {
    let wavelength = 2.0 * std::f64::consts::PI / local_wavenumber(jr, r);
    (fraction * wavelength).min(0.5 * r)
}

struct StepResult<const N: usize> {
    y_new: [Complex64; N],
    err: f64,
}

fn dop853_step<F: Fn(f64) -> f64, const N: usize>(
    j: &F,
    r: f64,
    y: &[Complex64; N],
    k1: &[Complex64; N],
    h: f64,
    local_tol: f64,
) -> StepResult<N> {
    use tableau::*;
    let k2 = rhs(j, r + C2 * h, &combine(y, h, &[(A21, k1)]));
    let k3 = rhs(j, r + C3 * h, &combine(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = rhs(j, r + C4 * h, &combine(y, h, &[(A41, k1), (A43, &k3)]));
    let k5 = rhs(
        j,
        r + C5 * h,
        &combine(y, h, &[(A51, k1), (A53, &k3), (A54, &k4)]),
    );
    let k6 = rhs(
        j,
        r + C6 * h,
        &combine(y, h, &[(A61, k1), (A64, &k4), (A65, &k5)]),
    );
    let k7 = rhs(
        j,
        r + C7 * h,
        &combine(y, h, &[(A71, k1), (A74, &k4), (A75, &k5), (A76, &k6)]),
    );
    let k8 = rhs(
        j,
        r + C8 * h,
        &combine(
            y,
            h,
            &[(A81, k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)],
        ),
    );
    let k9 = rhs(
        j,
        r + C9 * h,
        &combine(
            y,
            h,
            &[
                (A91, k1),
                (A94, &k4),
                (A95, &k5),
                (A96, &k6),
                (A97, &k7),
                (A98, &k8),
            ],
        ),
    );
    let k10 = rhs(
        j,
        r + C10 * h,
        &combine(
            y,
            h,
            &[
                (A101, k1),
                (A104, &k4),
                (A105, &k5),
                (A106, &k6),
                (A107, &k7),
                (A108, &k8),
                (A109, &k9),
            ],
        ),
    );
    let k11 = rhs(
        j,
        r + C11 * h,
        &combine(
            y,
            h,
            &[
                (A111, k1),
                (A114, &k4),
                (A115, &k5),
                (A116, &k6),
                (A117, &k7),
                (A118, &k8),
                (A119, &k9),
                (A1110, &k10),
            ],
        ),
    );
    let k12 = rhs(
        j,
        r + h,
        &combine(
            y,
            h,
            &[
                (A121, k1),
                (A124, &k4),
                (A125, &k5),
                (A126, &k6),
                (A127, &k7),
                (A128, &k8),
                (A129, &k9),
                (A1210, &k10),
                (A1211, &k11),
            ],
        ),
    );
    let bsum = lincomb(&[
        (B1, k1),
        (B6, &k6),
        (B7, &k7),
        (B8, &k8),
        (B9, &k9),
        (B10, &k10),
        (B11, &k11),
        (B12, &k12),
    ]);
    let y_new = combine(y, h, &[(1.0, &bsum)]);
    let e3 = combine(&bsum, -1.0, &[(BHH1, k1), (BHH2, &k9), (BHH3, &k12)]);
    let e5 = lincomb(&[
        (ER1, k1),
        (ER6, &k6),
        (ER7, &k7),
        (ER8, &k8),
        (ER9, &k9),
        (ER10, &k10),
        (ER11, &k11),
        (ER12, &k12),
    ]);

    // Error scale per (u, u') pair: s = |u| κ + |u'|, so u is measured against
    // s/κ and u' against s.
    let r_new = r + h;
    let kappa = local_wavenumber(j(r_new), r_new);
    let mut err5 = 0.0;
    let mut err3 = 0.0;
    for p in 0..N / 2 {
        let s_old = y[2 * p].norm() * kappa + y[2 * p + 1].norm();
        let s_new = y_new[2 * p].norm() * kappa + y_new[2 * p + 1].norm();
        let s = s_old.max(s_new).max(f64::MIN_POSITIVE);
        let sk = [local_tol * s / kappa, local_tol * s];
        for c in 0..2 {
            let i = 2 * p + c;
            err5 += (e5[i].norm() / sk[c]).powi(2);
            err3 += (e3[i].norm() / sk[c]).powi(2);
        }
    }
    let mut deno = err5 + 0.01 * err3;
    if deno <= 0.0 {
        deno = 1.0;
    }
    let err = h.abs() * err5 * (1.0 / (deno * N as f64)).sqrt();
    StepResult { y_new, err }
}

fn run<F: Fn(f64) -> f64, const N: usize>(
    j: &F,
    r0: f64,
    y0: [Complex64; N],
    stops: &[f64],
    opts: &IntegratorOptions,
) -> Result<Run<N>, IntegrateError> {
    const SAFE: f64 = 0.9;
    const FAC_MIN: f64 = 1.0 / 3.0;
    const FAC_MAX: f64 = 6.0;

    let mut states = vec![(r0, y0)];
    let mut stop_indices = Vec::with_capacity(stops.len());
    let mut stats = StepStats {
        min_step: f64::INFINITY,
        ..StepStats::default()
    };
    let mut r = r0;
    let mut y = y0;
    let mut k1 = rhs(j, r, &y);
    stats.evaluations += 1;
    let mut h_abs = step_cap(j(r), r, opts.wavelength_fraction) * 0.1;
    let mut total_steps = 0usize;

    for &stop in stops {
        let dir = if stop >= r { 1.0 } else { -1.0 };
        while (stop - r) * dir > 0.0 {
            if total_steps >= opts.max_steps {
                return Err(IntegrateError::StepUnderflow {
                    r,
                    step: h_abs,
                    steps: total_steps,
                });
            }
            let cap = step_cap(j(r), r, opts.wavelength_fraction);
            let remaining = (stop - r).abs();
            let mut h = h_abs.min(cap);
            let hits_stop = h >= remaining;
            if hits_stop {
                h = remaining;
            }
            if h < 1e-14 * r.abs().max(f64::MIN_POSITIVE) {
                return Err(IntegrateError::StepUnderflow {
                    r,
                    step: h,
                    steps: total_steps,
                });
            }
            let step = dop853_step(j, r, &y, &k1, dir * h, opts.local_tol);
            stats.evaluations += 11;
            total_steps += 1;
            if !step.err.is_finite() {
                return Err(IntegrateError::NonFinite { r });
            }
            let fac11 = step.err.powf(1.0 / 8.0);
            if step.err <= 1.0 {
                r = if hits_stop { stop } else { r + dir * h };
                y = step.y_new;
                if y.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                    return Err(IntegrateError::NonFinite { r });
                }
                k1 = rhs(j, r, &y);
                stats.evaluations += 1;
                stats.accepted += 1;
                stats.min_step = stats.min_step.min(h);
                stats.max_step = stats.max_step.max(h);
                states.push((r, y));
                let fac = (fac11 / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                // A step clipped to a stop says nothing about the next one.
                h_abs = if hits_stop { h_abs.max(h) } else { h / fac };
            } else {
                stats.rejected += 1;
                h_abs = h / (1.0 / FAC_MIN).min(fac11 / SAFE);
            }
        }
        stop_indices.push(states.len() - 1);
    }
    if stats.accepted == 0 {
        stats.min_step = 0.0;
    }
    Ok(Run {
        states,
        stop_indices,
        stats,
    })
}

#[allow(clippy::excessive_precision, clippy::unreadable_literal, dead_code)]
mod tableau {
    pub const C2: f64 = 0.526001519587677318785587544488E-01;
    pub const C3: f64 = 0.789002279381515978178381316732E-01;
    pub const C4: f64 = 0.118350341907227396726757197510E+00;
    pub const C5: f64 = 0.281649658092772603273242802490E+00;
    pub const C6: f64 = 0.333333333333333333333333333333E+00;
    pub const C7: f64 = 0.25E+00;
    pub const C8: f64 = 0.307692307692307692307692307692E+00;
    pub const C9: f64 = 0.651282051282051282051282051282E+00;
    pub const C10: f64 = 0.6E+00;
    pub const C11: f64 = 0.857142857142857142857142857142E+00;
    pub const A21: f64 = 5.26001519587677318785587544488E-2;
    pub const A31: f64 = 1.97250569845378994544595329183E-2;
    pub const A32: f64 = 5.91751709536136983633785987549E-2;
    pub const A41: f64 = 2.95875854768068491816892993775E-2;
    pub const A43: f64 = 8.87627564304205475450678981324E-2;
    pub const A51: f64 = 2.41365134159266685502369798665E-1;
    pub const A53: f64 = -8.84549479328286085344864962717E-1;
    pub const A54: f64 = 9.24834003261792003115737966543E-1;
    pub const A61: f64 = 3.7037037037037037037037037037E-2;
    pub const A64: f64 = 1.70828608729473871279604482173E-1;
    pub const A65: f64 = 1.25467687566822425016691814123E-1;
    pub const A71: f64 = 3.7109375E-2;
    pub const A74: f64 = 1.70252211019544039314978060272E-1;
    pub const A75: f64 = 6.02165389804559606850219397283E-2;
    pub const A76: f64 = -1.7578125E-2;
    pub const A81: f64 = 3.70920001185047927108779319836E-2;
    pub const A84: f64 = 1.70383925712239993810214054705E-1;
    pub const A85: f64 = 1.07262030446373284651809199168E-1;
    pub const A86: f64 = -1.53194377486244017527936158236E-2;
    pub const A87: f64 = 8.27378916381402288758473766002E-3;
    pub const A91: f64 = 6.24110958716075717114429577812E-1;
    pub const A94: f64 = -3.36089262944694129406857109825E0;
    pub const A95: f64 = -8.68219346841726006818189891453E-1;
    pub const A96: f64 = 2.75920996994467083049415600797E1;
    pub const A97: f64 = 2.01540675504778934086186788979E1;
    pub const A98: f64 = -4.34898841810699588477366255144E1;
    pub const A101: f64 = 4.77662536438264365890433908527E-1;
    pub const A104: f64 = -2.48811461997166764192642586468E0;
    pub const A105: f64 = -5.90290826836842996371446475743E-1;
    pub const A106: f64 = 2.12300514481811942347288949897E1;
    pub const A107: f64 = 1.52792336328824235832596922938E1;
    pub const A108: f64 = -3.32882109689848629194453265587E1;
    pub const A109: f64 = -2.03312017085086261358222928593E-2;
    pub const A111: f64 = -9.3714243008598732571704021658E-1;
    pub const A114: f64 = 5.18637242884406370830023853209E0;
    pub const A115: f64 = 1.09143734899672957818500254654E0;
    pub const A116: f64 = -8.14978701074692612513997267357E0;
    pub const A117: f64 = -1.85200656599969598641566180701E1;
    pub const A118: f64 = 2.27394870993505042818970056734E1;
    pub const A119: f64 = 2.49360555267965238987089396762E0;
    pub const A1110: f64 = -3.0467644718982195003823669022E0;
    pub const A121: f64 = 2.27331014751653820792359768449E0;
    pub const A124: f64 = -1.05344954667372501984066689879E1;
    pub const A125: f64 = -2.00087205822486249909675718444E0;
    pub const A126: f64 = -1.79589318631187989172765950534E1;
    pub const A127: f64 = 2.79488845294199600508499808837E1;
    pub const A128: f64 = -2.85899827713502369474065508674E0;
    pub const A129: f64 = -8.87285693353062954433549289258E0;
    pub const A1210: f64 = 1.23605671757943030647266201528E1;
    pub const A1211: f64 = 6.43392746015763530355970484046E-1;
    pub const B1: f64 = 5.42937341165687622380535766363E-2;
    pub const B6: f64 = 4.45031289275240888144113950566E0;
    pub const B7: f64 = 1.89151789931450038304281599044E0;
    pub const B8: f64 = -5.8012039600105847814672114227E0;
    pub const B9: f64 = 3.1116436695781989440891606237E-1;
    pub const B10: f64 = -1.52160949662516078556178806805E-1;
    pub const B11: f64 = 2.01365400804030348374776537501E-1;
    pub const B12: f64 = 4.47106157277725905176885569043E-2;
    pub const BHH1: f64 = 0.244094488188976377952755905512E+00;
    pub const BHH2: f64 = 0.733846688281611857341361741547E+00;
    pub const BHH3: f64 = 0.220588235294117647058823529412E-01;
    pub const ER1: f64 = 0.1312004499419488073250102996E-01;
    pub const ER6: f64 = -0.1225156446376204440720569753E+01;
    pub const ER7: f64 = -0.4957589496572501915214079952E+00;
    pub const ER8: f64 = 0.1664377182454986536961530415E+01;
    pub const ER9: f64 = -0.3503288487499736816886487290E+00;
    pub const ER10: f64 = 0.3341791187130174790297318841E+00;
    pub const ER11: f64 = 0.8192320648511571246570742613E-01;
    pub const ER12: f64 = -0.2235530786388629525884427845E-01;
}
