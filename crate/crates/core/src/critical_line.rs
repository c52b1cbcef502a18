//! Zeros and stationary points of `u(0, y) = ∫₀^∞ G(t) cos(yt) dt`, and the
//! split `u(0, y) = p(y) − q(y)` into positive half-period aggregates.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eta_integral::{Bounded, LineKernel, QuadratureError, QuadratureSpec};
use crate::quadrature::panel_nodes;
use crate::theta_series::{g_deriv, g_eval, SeriesError};

/// Smallest ordinate accepted by [`pq`].
pub const PQ_Y_FLOOR: f64 = 5.0;
/// Default `|u′|` margin, relative to the local envelope of `|u|`.
pub const SIMPLICITY_MARGIN: f64 = 1e-4;
/// Half-width of the window over which the local envelope is sampled.
const ENVELOPE_HALF_WIDTH: f64 = 2.0;
/// A refined root is accepted as a zero while `|u| ≤` this times the envelope.
const RESIDUAL_RELATIVE: f64 = 1e-6;
const MAX_REFINE_STEPS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LineError {
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("{needed} intervals are needed to cover the support, got {given} (uncovered tail up to {tail_bound:e})")]
    Coverage {
        needed: usize,
        given: usize,
        tail_bound: f64,
    },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroRecord {
    pub y: f64,
    /// Ordinate of the corresponding ζ zero, `y/2`.
    pub t_zeta: f64,
    pub bracket: (f64, f64),
    pub residual: f64,
    pub u_deriv: f64,
    pub simple: bool,
}

/// Flat CSV/JSON row for a zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroRow {
    pub y: f64,
    pub t_zeta: f64,
    pub residual: f64,
    pub u_deriv: f64,
    pub simple: bool,
}

impl From<&ZeroRecord> for ZeroRow {
    fn from(z: &ZeroRecord) -> Self {
        Self {
            y: z.y,
            t_zeta: z.t_zeta,
            residual: z.residual,
            u_deriv: z.u_deriv,
            simple: z.simple,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryKind {
    PositiveMax,
    NegativeMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub y_m: f64,
    pub u_value: f64,
    pub kind: StationaryKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PQValue {
    pub y: f64,
    pub p: f64,
    pub q: f64,
    pub diff: f64,
    pub intervals_used: usize,
    /// Bound on the part of the integral beyond the last interval.
    pub tail_bound: f64,
    /// Quadrature, truncation and rounding bound on `p` and `q` together.
    pub quad_bound: f64,
}

/// Row of the p/q table; `scaled_p = πy·p/G(0)` tends to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PQRow {
    pub y: f64,
    pub p: f64,
    pub q: f64,
    pub diff: f64,
    pub scaled_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplicityReport {
    pub y: f64,
    pub residual: f64,
    pub u_deriv: f64,
    /// `max |u(0, ·)|` sampled over `y ± 2`.
    pub envelope: f64,
    pub neighbor_signs: (i8, i8),
    pub residual_ok: bool,
    pub simple: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeDiagnostic {
    pub y: f64,
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    /// `f″ + 6f′/y + 4f/y²`
    pub residual: f64,
    /// `|R|·y³ / max|f|` near `y`
    pub ratio: f64,
    /// `|f′ − (f(y+h) − f(y−h))/2h|`
    pub f1_difference_gap: f64,
}

/// `u(0, y)` (order 0), `∂u/∂y` (order 1) or `∂²u/∂y²` (order 2).
pub fn u_line(y: f64, order: u8, spec: &QuadratureSpec) -> Result<Bounded, LineError> {
    if order > 2 {
        return Err(LineError::Usage(format!("derivative order {order} not supported")));
    }
    if !y.is_finite() {
        return Err(LineError::Usage(format!("ordinate must be finite, got {y}")));
    }
    let kernel = LineKernel::g(y, 0.0, order, spec)?;
    let (value, bound) = kernel.eval(0.0)?;
    // ∂^k/∂y^k η(iy) = i^k η^{(k)}(iy)
    let value = match order {
        0 => value.re,
        1 => -value.im,
        _ => -value.re,
    };
    Ok(Bounded { value, bound })
}

fn check_scan(y_min: f64, y_max: f64, step: f64, tol: f64) -> Result<(), LineError> {
    if !(step > 0.0) {
        return Err(LineError::Usage(format!("step must be positive, got {step}")));
    }
    if !(tol > 0.0) {
        return Err(LineError::Usage(format!("tol must be positive, got {tol}")));
    }
    if !(y_min >= 0.0) || !(y_max >= y_min) || !y_max.is_finite() {
        return Err(LineError::Usage(format!("bad range [{y_min}, {y_max}]")));
    }
    Ok(())
}

fn sample_points(y_min: f64, y_max: f64, step: f64) -> Vec<f64> {
    let n = ((y_max - y_min) / step + 1e-9).floor() as usize;
    let mut ys: Vec<f64> = (0..=n).map(|i| y_min + i as f64 * step).collect();
    if let Some(&last) = ys.last() {
        if y_max - last > 1e-9 * step {
            ys.push(y_max);
        }
    }
    ys
}

/// Sign changes of a sampled function: brackets across strict sign changes
/// and exact zeros found at sample points.
fn brackets(ys: &[f64], values: &[f64]) -> (Vec<(f64, f64)>, Vec<f64>) {
    let mut out = Vec::new();
    let mut exact = Vec::new();
    for i in 0..ys.len() {
        if values[i] == 0.0 {
            exact.push(ys[i]);
            continue;
        }
        if i + 1 < ys.len() && values[i] * values[i + 1] < 0.0 {
            out.push((ys[i], ys[i + 1]));
        }
    }
    // a sample landing exactly on a root separates opposite signs on both sides
    (out, exact)
}

/// Root of `f` inside a sign-change bracket, by regula falsi with the
/// Illinois modification and a bisection fallback. Stops once the bracket
/// is narrower than `tol`.
pub fn refine_root<F>(mut f: F, bracket: (f64, f64), tol: f64) -> Result<f64, LineError>
where
    F: FnMut(f64) -> Result<f64, LineError>,
{
    let (mut a, mut b) = if bracket.0 <= bracket.1 { bracket } else { (bracket.1, bracket.0) };
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(LineError::NoSignChange { lo: a, hi: b });
    }
    let mut side = 0i8;
    for step in 0..MAX_REFINE_STEPS {
        if b - a < tol {
            break;
        }
        let secant = (a * fb - b * fa) / (fb - fa);
        // every fourth step bisects so the width is guaranteed to shrink
        let c = if step % 4 == 3 || !(secant > a && secant < b) { 0.5 * (a + b) } else { secant };
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if (fc > 0.0) == (fa > 0.0) {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Refines a zero of `u(0, ·)` inside `bracket` to width `tol`.
pub fn refine_zero(bracket: (f64, f64), tol: f64, spec: &QuadratureSpec) -> Result<f64, LineError> {
    if !(tol > 0.0) {
        return Err(LineError::Usage(format!("tol must be positive, got {tol}")));
    }
    refine_root(|y| Ok(u_line(y, 0, spec)?.value), bracket, tol)
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// `max |u(0, ·)|` over 17 samples spanning `y ± 2`.
pub fn local_envelope(y: f64, spec: &QuadratureSpec) -> Result<f64, LineError> {
    (0..=16)
        .map(|i| {
            let yy = (y - ENVELOPE_HALF_WIDTH + 0.25 * i as f64).abs();
            u_line(yy, 0, spec).map(|b| b.value.abs())
        })
        .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
}

/// Simplicity report for a refined zero: `|u′|` against `margin` times the
/// local envelope, opposite signs at `y0 ± h`, and a residual small relative
/// to the envelope.
pub fn classify_zero(y0: f64, h: f64, margin: f64, spec: &QuadratureSpec) -> Result<SimplicityReport, LineError> {
    if !(h > 0.0) {
        return Err(LineError::Usage(format!("h must be positive, got {h}")));
    }
    let envelope = local_envelope(y0, spec)?;
    let residual = u_line(y0, 0, spec)?.value.abs();
    let u_deriv = u_line(y0, 1, spec)?.value.abs();
    let lo = sign(u_line(y0 - h, 0, spec)?.value);
    let hi = sign(u_line(y0 + h, 0, spec)?.value);
    let residual_ok = residual <= RESIDUAL_RELATIVE * envelope;
    let simple = residual_ok && u_deriv > margin * envelope && lo * hi < 0;
    Ok(SimplicityReport {
        y: y0,
        residual,
        u_deriv,
        envelope,
        neighbor_signs: (lo, hi),
        residual_ok,
        simple,
    })
}

/// Samples `u(0, y)` every `step` on `[y_min, y_max]` and refines each sign
/// change to width `tol`. Records are sorted by `y`.
pub fn scan_zeros(
    y_min: f64,
    y_max: f64,
    step: f64,
    tol: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<ZeroRecord>, LineError> {
    check_scan(y_min, y_max, step, tol)?;
    let ys = sample_points(y_min, y_max, step);
    let values: Vec<f64> = ys
        .par_iter()
        .map(|&y| u_line(y, 0, spec).map(|b| b.value))
        .collect::<Result<_, _>>()?;
    let (brs, exact) = brackets(&ys, &values);
    let mut found: Vec<((f64, f64), f64)> = brs
        .par_iter()
        .map(|&br| refine_zero(br, tol, spec).map(|y| (br, y)))
        .collect::<Result<_, _>>()?;
    found.extend(exact.into_iter().map(|y| ((y, y), y)));
    let mut records: Vec<ZeroRecord> = found
        .par_iter()
        .map(|&(bracket, y)| {
            let h = (0.25 * (bracket.1 - bracket.0)).max(10.0 * tol).min(0.05);
            let report = classify_zero(y, h, SIMPLICITY_MARGIN, spec)?;
            Ok(ZeroRecord {
                y,
                t_zeta: 0.5 * y,
                bracket,
                residual: report.residual,
                u_deriv: report.u_deriv,
                simple: report.simple,
            })
        })
        .collect::<Result<_, LineError>>()?;
    records.sort_by(|a, b| a.y.total_cmp(&b.y));
    Ok(records)
}

/// Roots of `∂u/∂y` on the line, each with the value of `u` there.
pub fn stationary_points(
    y_min: f64,
    y_max: f64,
    step: f64,
    tol: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<StationaryPoint>, LineError> {
    check_scan(y_min, y_max, step, tol)?;
    let ys = sample_points(y_min, y_max, step);
    let values: Vec<f64> = ys
        .par_iter()
        .map(|&y| u_line(y, 1, spec).map(|b| b.value))
        .collect::<Result<_, _>>()?;
    let (brs, exact) = brackets(&ys, &values);
    let mut roots: Vec<f64> = brs
        .par_iter()
        .map(|&br| refine_root(|y| Ok(u_line(y, 1, spec)?.value), br, tol))
        .collect::<Result<_, _>>()?;
    roots.extend(exact);
    let mut points: Vec<StationaryPoint> = roots
        .par_iter()
        .map(|&y_m| {
            let u_value = u_line(y_m, 0, spec)?.value;
            let kind = if u_value > 0.0 {
                StationaryKind::PositiveMax
            } else {
                StationaryKind::NegativeMin
            };
            Ok(StationaryPoint { y_m, u_value, kind })
        })
        .collect::<Result<_, LineError>>()?;
    points.sort_by(|a, b| a.y_m.total_cmp(&b.y_m));
    Ok(points)
}

/// Per-gap interlacing summary: stationary points strictly between two
/// consecutive zeros and whether their kinds match the sign of `u` there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub lo: f64,
    pub hi: f64,
    pub u_sign: i8,
    pub stationary: Vec<StationaryPoint>,
    pub ok: bool,
}

pub fn interlacing(
    zeros: &[ZeroRecord],
    stationary: &[StationaryPoint],
    spec: &QuadratureSpec,
) -> Result<Vec<GapReport>, LineError> {
    zeros
        .windows(2)
        .map(|w| {
            let (lo, hi) = (w[0].y, w[1].y);
            let u_sign = sign(u_line(0.5 * (lo + hi), 0, spec)?.value);
            let inside: Vec<StationaryPoint> = stationary
                .iter()
                .filter(|s| s.y_m > lo && s.y_m < hi)
                .copied()
                .collect();
            let expected = if u_sign > 0 {
                StationaryKind::PositiveMax
            } else {
                StationaryKind::NegativeMin
            };
            let ok = inside.len() == 1 && inside[0].kind == expected;
            Ok(GapReport {
                lo,
                hi,
                u_sign,
                stationary: inside,
                ok,
            })
        })
        .collect()
}

/// `∫_T^∞ |G′(t)| dt` from the term majorant `|P₁(w)| ≤ 153w³`, `w ≥ π`.
fn g_prime_tail(t: f64) -> f64 {
    let lambda = 4.0 * PI * (4.0 * t).exp() - 13.0;
    if lambda <= 0.0 {
        return f64::INFINITY;
    }
    let log = 13.0 * t - PI * (4.0 * t).exp() + (153.0 * PI.powi(3)).ln() - lambda.ln();
    log.exp() / (1.0 - 0.01)
}

/// Sub-panels per half-period so that each spans at most 0.02 in `t`.
fn panels_per_interval(y: f64) -> usize {
    ((PI / y) / 0.02).ceil().max(1.0) as usize
}

/// `p(y)` and `q(y)`: with `u(0, y) = −y⁻²∫₀^∞ G′(s/y) sin s ds`, the
/// integrals over positive and negative half-periods of `sin s`, each
/// computed exactly by quadrature. `intervals` defaults to the count
/// covering `[0, y·T]` for the series cutoff `T`.
pub fn pq(y: f64, intervals: Option<usize>, spec: &QuadratureSpec) -> Result<PQValue, LineError> {
    if !(y >= PQ_Y_FLOOR) || !y.is_finite() {
        return Err(LineError::Usage(format!("y must be at least {PQ_Y_FLOOR}, got {y}")));
    }
    spec.validate()?;
    let tail_target = (0.5 * spec.tol).min(1e-20) * y;
    let mut cutoff = 0.5;
    while g_prime_tail(cutoff) >= tail_target {
        cutoff += 0.05;
    }
    let needed = ((y * cutoff) / PI).ceil() as usize;
    let given = intervals.unwrap_or(needed);
    if given == 0 {
        return Err(LineError::Usage("interval count must be positive".into()));
    }
    let covered_t = given as f64 * PI / y;
    let tail_bound = g_prime_tail(covered_t) / y;
    if given < needed && tail_bound > 0.5 * spec.tol {
        return Err(LineError::Coverage {
            needed,
            given,
            tail_bound,
        });
    }
    let m = panels_per_interval(y);
    let scale = 1.0 / (y * y);
    let interval = |k: usize| -> Result<(f64, f64, f64, f64), LineError> {
        let a = k as f64 * PI;
        let b = a + PI;
        let integrate = |panels: usize| -> Result<(f64, f64, f64), LineError> {
            let mut acc = 0.0;
            let mut mag = 0.0;
            let mut trunc = 0.0;
            for (s, w) in panel_nodes(a, b, panels) {
                let g1 = g_deriv(s / y, 1, &spec.series)?;
                let term = w * g1.value * s.sin();
                acc += term;
                mag += term.abs();
                trunc += w * g1.tail_bound;
            }
            Ok((acc, mag, trunc))
        };
        let (coarse, _, _) = integrate(m)?;
        let (fine, mag, trunc) = integrate(2 * m)?;
        Ok((fine, (fine - coarse).abs(), mag, trunc))
    };
    let parts: Vec<(f64, f64, f64, f64)> = (0..given).into_par_iter().map(interval).collect::<Result<_, _>>()?;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut err = 0.0;
    let mut mag = 0.0;
    for (k, &(value, diff, m_k, trunc)) in parts.iter().enumerate() {
        if k % 2 == 0 {
            p -= value;
        } else {
            q += value;
        }
        err += diff + trunc;
        mag += m_k;
    }
    let quad_bound = scale * (err + 16.0 * f64::EPSILON * mag) + 4.0 * f64::EPSILON * (p + q).abs() * scale;
    Ok(PQValue {
        y,
        p: scale * p,
        q: scale * q,
        diff: scale * p - scale * q,
        intervals_used: given,
        tail_bound,
        quad_bound,
    })
}

pub fn pq_table(ys: &[f64], intervals: Option<usize>, spec: &QuadratureSpec) -> Result<Vec<PQRow>, LineError> {
    let g0 = g_eval(0.0, &spec.series)?.value;
    ys.par_iter()
        .map(|&y| {
            let v = pq(y, intervals, spec)?;
            Ok(PQRow {
                y,
                p: v.p,
                q: v.q,
                diff: v.diff,
                scaled_p: PI * y * v.p / g0,
            })
        })
        .collect()
}

/// `R = f″ + 6f′/y + 4f/y²` for `f = u(0, ·)` with derivatives under the
/// integral, plus a central-difference check on `f′` with step `h`.
pub fn ode_residual(y: f64, h: f64, spec: &QuadratureSpec) -> Result<OdeDiagnostic, LineError> {
    if !(y >= 10.0) {
        return Err(LineError::Usage(format!("y must be at least 10, got {y}")));
    }
    if !(h > 0.0) {
        return Err(LineError::Usage(format!("h must be positive, got {h}")));
    }
    let f = u_line(y, 0, spec)?.value;
    let f1 = u_line(y, 1, spec)?.value;
    let f2 = u_line(y, 2, spec)?.value;
    let residual = f2 + 6.0 * f1 / y + 4.0 * f / (y * y);
    let envelope = local_envelope(y, spec)?;
    let fd = (u_line(y + h, 0, spec)?.value - u_line(y - h, 0, spec)?.value) / (2.0 * h);
    Ok(OdeDiagnostic {
        y,
        f,
        f1,
        f2,
        residual,
        ratio: residual.abs() * y.powi(3) / envelope,
        f1_difference_gap: (f1 - fd).abs(),
    })
}
