//! η(z) = ∫₀^∞ G(t) cosh(zt) dt by composite Gauss panels, plus the two
//! cross-check routes: `1/2 + (z² − 1)∫₀^∞ F(t) cosh(zt) dt` and the
//! τ-integral for ξ(s) that never touches G.
//!
//! Reported bounds are the certified cutoff tail, the difference between a
//! panel layout and its two-fold refinement, and a rounding term
//! proportional to `Σ|w·f|`.
//!
//! For large `|y|` the G route stops integrating along the real half-line:
//! with `G` even, `η(z) = ½∫_ℝ G(t) e^{zt} dt`, and because G is analytic in
//! `|Im t| < π/8` the path can move to `Im t = θ·sgn(y)`. That multiplies
//! the integrand by `e^{−|y|θ}` up front instead of recovering a result of
//! size `e^{−π|y|/8}` from cancellation between O(1) terms.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{adaptive_bisection, panel_nodes};
use crate::theta_series::{
    f_series, g_complex, g_eval, psi, SeriesError, TruncationPolicy, RATIO_BOUND,
};

pub type ComplexPoint = Complex64;

const ROUNDING_FACTOR: f64 = 16.0;
/// Cutoff tails are driven below this (in unscaled integrand units) even
/// when the requested tolerance is looser.
const TAIL_FLOOR: f64 = 1e-20;
const CUTOFF_STEPS_PER_UNIT: f64 = 20.0;
const MAX_ABS_X: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("invalid quadrature spec: {0}")]
    BadSpec(String),
    #[error("point {0} is outside the supported strip |Re z| <= 2")]
    OutOfRange(Complex64),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("panel budget of {panels} exhausted (best value {best}, bound {bound:e})")]
    PanelBudget {
        best: Complex64,
        bound: f64,
        panels: usize,
    },
    #[error("error bound {bound:e} exceeds tol {tol:e} (best value {best})")]
    ToleranceNotMet { best: Complex64, bound: f64, tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PanelRule {
    #[default]
    FixedOrderPanels,
    AdaptiveBisection,
}

/// Which path the G route integrates along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ContourPolicy {
    /// Real half-line for small `|y|`, shifted line when that is more accurate.
    #[default]
    Auto,
    RealAxis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    ViaG,
    ViaF,
    OracleXi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    SToZ,
    ZToS,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Absolute target for the reported error bound.
    pub tol: f64,
    /// Fixed cutoff; `None` derives it from the tail bound.
    pub cutoff_t: Option<f64>,
    pub max_panels: usize,
    pub panel_rule: PanelRule,
    /// Widest panel allowed before the oscillation limit applies.
    pub panel_width: f64,
    pub contour: ContourPolicy,
    pub series: TruncationPolicy,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            cutoff_t: None,
            max_panels: 8192,
            panel_rule: PanelRule::FixedOrderPanels,
            panel_width: 0.1,
            contour: ContourPolicy::Auto,
            series: TruncationPolicy::default(),
        }
    }
}

impl QuadratureSpec {
    pub fn with_tol(tol: f64) -> Result<Self, QuadratureError> {
        let spec = Self {
            tol,
            ..Self::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(QuadratureError::BadSpec(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_panels == 0 {
            return Err(QuadratureError::BadSpec("max_panels must be positive".into()));
        }
        if !(self.panel_width > 0.0) {
            return Err(QuadratureError::BadSpec("panel_width must be positive".into()));
        }
        if let Some(t) = self.cutoff_t {
            if !(t > 0.0) || !t.is_finite() {
                return Err(QuadratureError::BadSpec(format!("cutoff_t must be positive, got {t}")));
            }
        }
        Ok(())
    }

    /// Panel width for an integrand oscillating like `e^{iyt}`.
    pub fn width_for(&self, y: f64) -> f64 {
        self.panel_width.min(2.0 * PI / y.abs().max(1.0) / 4.0)
    }

    fn tail_target(&self) -> f64 {
        (0.5 * self.tol).min(TAIL_FLOOR)
    }
}

/// A complex value of η or ξ with its absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub value: Complex64,
    pub abs_error_bound: f64,
    pub route: Route,
}

/// A real quantity together with its absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounded {
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UvValue {
    pub u: Bounded,
    pub v: Bounded,
}

/// `s = (z + 1)/2` and back.
pub fn transform(point: Complex64, direction: Direction) -> Complex64 {
    match direction {
        Direction::SToZ => 2.0 * point - 1.0,
        Direction::ZToS => (point + 1.0) / 2.0,
    }
}

/// `exp[(x+9)t − πe^{4t}]·16π²/(1 − r)`, which dominates `|G(t) cosh(zt)|`
/// for `t ≥ 0` and `|Re z| ≤ x_abs`.
pub fn integrand_bound(t: f64, x_abs: f64) -> f64 {
    log_integrand_bound(t, x_abs).exp()
}

fn log_integrand_bound(t: f64, x_abs: f64) -> f64 {
    (x_abs + 9.0) * t - PI * (4.0 * t).exp() + (16.0 * PI * PI / (1.0 - RATIO_BOUND)).ln()
}

/// Natural log of an over-estimate of `∫_T^∞ t^k·bound(t) dt`, where `bound`
/// has log-derivative `growth − 4πc·e^{4t}` and `log_bound_at_t` is its log
/// at `T`. Returns `None` while the integrand is not yet decaying.
fn log_tail(log_bound_at_t: f64, t: f64, growth: f64, c: f64, moment: u8, shift: f64) -> Option<f64> {
    let k = moment as f64;
    let lambda = 4.0 * PI * c * (4.0 * t).exp() - growth - if k > 0.0 { k / (t + shift) } else { 0.0 };
    if lambda <= 0.0 {
        return None;
    }
    Some(log_bound_at_t + k * (t + shift).ln() - lambda.ln())
}

/// Smallest multiple of 0.05 at which the certified tail `∫_T^∞ bound` is
/// below `tol/2`.
pub fn cutoff_t(x_abs: f64, tol: f64) -> Result<f64, QuadratureError> {
    if !(tol > 0.0) {
        return Err(QuadratureError::BadSpec(format!("tol must be positive, got {tol}")));
    }
    cutoff_search(0.5 * tol, |t| {
        log_tail(log_integrand_bound(t, x_abs), t, x_abs + 9.0, 1.0, 0, 0.0)
    })
}

fn cutoff_search<F: Fn(f64) -> Option<f64>>(target: f64, log_tail_at: F) -> Result<f64, QuadratureError> {
    let log_target = target.ln();
    for step in 1..=400 {
        let t = step as f64 / CUTOFF_STEPS_PER_UNIT;
        if let Some(lt) = log_tail_at(t) {
            if lt < log_target {
                return Ok(t);
            }
        }
    }
    Err(QuadratureError::BadSpec("no cutoff found below t = 20".into()))
}

/// Upper bound on `|G(t + iθ)|` for real `t ≥ 0`, from term magnitudes.
fn g_majorant_log(t: f64, c: f64) -> f64 {
    let tau = (4.0 * t).exp();
    let mut sum = 0.0;
    let mut n = 1.0f64;
    loop {
        let w = PI * n * n * tau;
        let term = (t - w * c).exp() * (16.0 * w * w + 24.0 * w);
        sum += term;
        let rho = (-PI * (2.0 * n + 3.0) * tau * c).exp() * ((n + 2.0) / (n + 1.0)).powi(4);
        if rho < 0.5 || n > 200.0 {
            let wn = PI * (n + 1.0).powi(2) * tau;
            let next = (t - wn * c).exp() * (16.0 * wn * wn + 24.0 * wn);
            sum += next / (1.0 - rho.min(0.5));
            break;
        }
        n += 1.0;
    }
    sum.ln()
}

/// Candidate path heights for the shifted contour.
const THETA_CANDIDATES: [f64; 8] = [
    0.0,
    PI / 32.0,
    PI / 16.0,
    3.0 * PI / 32.0,
    PI / 8.0 * 0.7,
    PI / 10.0,
    PI / 9.0,
    0.36,
];

/// Path height for `|y|`: minimizes `e^{−|y|θ}·M(θ)`, where `M(θ)` is the
/// term-magnitude sum of `G(iθ)`, a proxy for the rounding error. A higher
/// path must win by a factor `e²` since it costs more per node.
pub fn choose_theta(y: f64) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for &theta in &THETA_CANDIDATES {
        let c = (4.0 * theta).cos();
        let score = -y.abs() * theta + g_majorant_log(0.0, c);
        if score < best.0 - 2.0 {
            best = (score, theta);
        }
    }
    best.1
}

#[derive(Debug, Clone, Copy)]
enum Integrand {
    G,
    F,
}

#[derive(Debug, Clone, Copy)]
struct HalfNode {
    t: f64,
    /// `w·t^k·f(t)`
    gw: f64,
    cos: f64,
    sin: f64,
    /// `|w|·t^k·Σ|terms|`
    mag: f64,
    /// `|w|·t^k·tail`
    tail: f64,
}

#[derive(Debug, Clone, Copy)]
struct ShiftNode {
    t: f64,
    /// `w·(t+iθ)^k·G(t+iθ)·e^{iyt}`
    plus: Complex64,
    /// `w·(−t+iθ)^k·G(−t+iθ)·e^{−iyt}`
    minus: Complex64,
    mag: f64,
    tail: f64,
}

#[derive(Debug, Clone)]
enum Layout {
    HalfLine { coarse: Vec<HalfNode>, fine: Vec<HalfNode> },
    Shifted { theta: f64, coarse: Vec<ShiftNode>, fine: Vec<ShiftNode> },
}

/// Quadrature data for `∫ t^k f(t)·(cosh|sinh)(zt)` along one horizontal
/// line `Im z = y`, reusable for every `|Re z| ≤ x_abs_max`.
#[derive(Debug, Clone)]
pub struct LineKernel {
    y: f64,
    x_abs_max: f64,
    moment: u8,
    integrand: Integrand,
    cutoff: f64,
    layout: Layout,
    panels: usize,
    tol: f64,
}

fn half_nodes(
    integrand: Integrand,
    y: f64,
    moment: u8,
    cutoff: f64,
    panels: usize,
    policy: &TruncationPolicy,
) -> Result<Vec<HalfNode>, QuadratureError> {
    panel_nodes(0.0, cutoff, panels)
        .into_iter()
        .map(|(t, w)| {
            let val = match integrand {
                Integrand::G => g_eval(t, policy)?,
                Integrand::F => f_series(t, 0, policy)?,
            };
            let tk = t.powi(moment as i32);
            let (sin, cos) = (y * t).sin_cos();
            Ok(HalfNode {
                t,
                gw: w * tk * val.value,
                cos,
                sin,
                mag: w * tk * val.abs_sum,
                tail: w * tk * val.tail_bound,
            })
        })
        .collect()
}

fn shift_nodes(
    y: f64,
    theta: f64,
    moment: u8,
    cutoff: f64,
    panels: usize,
    policy: &TruncationPolicy,
) -> Result<Vec<ShiftNode>, QuadratureError> {
    panel_nodes(0.0, cutoff, panels)
        .into_iter()
        .map(|(t, w)| {
            let g = g_complex(Complex64::new(t, theta), 0, policy)?;
            let k = moment as i32;
            let plus_arg = Complex64::new(t, theta).powi(k);
            let minus_arg = Complex64::new(-t, theta).powi(k);
            let phase = Complex64::from_polar(1.0, y * t);
            // G even and real on the real axis: G(−t + iθ) = conj(G(t + iθ))
            let g_minus = g.value.conj();
            let scale = plus_arg.norm().max(minus_arg.norm());
            Ok(ShiftNode {
                t,
                plus: w * plus_arg * g.value * phase,
                minus: w * minus_arg * g_minus * phase.conj(),
                mag: 2.0 * w * scale * g.abs_sum,
                tail: 2.0 * w * scale * g.tail_bound,
            })
        })
        .collect()
}

impl LineKernel {
    /// Kernel for G on the line `Im z = y`, `|Re z| ≤ x_abs_max`.
    pub fn g(y: f64, x_abs_max: f64, moment: u8, spec: &QuadratureSpec) -> Result<Self, QuadratureError> {
        let theta = match spec.contour {
            ContourPolicy::Auto => choose_theta(y),
            ContourPolicy::RealAxis => 0.0,
        };
        if theta == 0.0 {
            Self::half_line(Integrand::G, y, x_abs_max, moment, spec)
        } else {
            Self::shifted(y, theta.copysign(y), x_abs_max, moment, spec)
        }
    }

    fn half_line(
        integrand: Integrand,
        y: f64,
        x_abs_max: f64,
        moment: u8,
        spec: &QuadratureSpec,
    ) -> Result<Self, QuadratureError> {
        spec.validate()?;
        let growth = match integrand {
            Integrand::G => x_abs_max + 9.0,
            Integrand::F => x_abs_max + 1.0,
        };
        let cutoff = match spec.cutoff_t {
            Some(t) => t,
            None => cutoff_search(spec.tail_target(), |t| {
                let lb = match integrand {
                    Integrand::G => log_integrand_bound(t, x_abs_max),
                    Integrand::F => growth * t - PI * (4.0 * t).exp() - (1.0 - RATIO_BOUND).ln(),
                };
                log_tail(lb, t, growth, 1.0, moment, 0.0)
            })?,
        };
        let mut panels = ((cutoff / spec.width_for(y)).ceil() as usize).max(1);
        let mut coarse = half_nodes(integrand, y, moment, cutoff, panels, &spec.series)?;
        loop {
            let fine = half_nodes(integrand, y, moment, cutoff, 2 * panels, &spec.series)?;
            let mut kernel = Self {
                y,
                x_abs_max,
                moment,
                integrand,
                cutoff,
                layout: Layout::HalfLine { coarse, fine },
                panels,
                tol: spec.tol,
            };
            match kernel.check_converged() {
                Ok(true) => return Ok(kernel),
                Ok(false) if 4 * panels <= spec.max_panels => {
                    panels *= 2;
                    let Layout::HalfLine { fine, .. } = std::mem::replace(
                        &mut kernel.layout,
                        Layout::HalfLine { coarse: vec![], fine: vec![] },
                    ) else {
                        unreachable!()
                    };
                    coarse = fine;
                }
                Ok(false) => return kernel.budget_error(),
                Err(e) => return Err(e),
            }
        }
    }

    fn shifted(
        y: f64,
        theta: f64,
        x_abs_max: f64,
        moment: u8,
        spec: &QuadratureSpec,
    ) -> Result<Self, QuadratureError> {
        spec.validate()?;
        let c = (4.0 * theta).cos();
        let growth = x_abs_max + 9.0;
        let cutoff = match spec.cutoff_t {
            Some(t) => t,
            None => cutoff_search(spec.tail_target(), |t| {
                log_tail(g_majorant_log(t, c), t, growth, c, moment, theta.abs())
            })?,
        };
        let mut panels = ((cutoff / spec.width_for(y)).ceil() as usize).max(1);
        let mut coarse = shift_nodes(y, theta, moment, cutoff, panels, &spec.series)?;
        loop {
            let fine = shift_nodes(y, theta, moment, cutoff, 2 * panels, &spec.series)?;
            let mut kernel = Self {
                y,
                x_abs_max,
                moment,
                integrand: Integrand::G,
                cutoff,
                layout: Layout::Shifted { theta, coarse, fine },
                panels,
                tol: spec.tol,
            };
            match kernel.check_converged() {
                Ok(true) => return Ok(kernel),
                Ok(false) if 4 * panels <= spec.max_panels => {
                    panels *= 2;
                    let Layout::Shifted { fine, .. } = std::mem::replace(
                        &mut kernel.layout,
                        Layout::HalfLine { coarse: vec![], fine: vec![] },
                    ) else {
                        unreachable!()
                    };
                    coarse = fine;
                }
                Ok(false) => return kernel.budget_error(),
                Err(e) => return Err(e),
            }
        }
    }

    fn budget_error<T>(&self) -> Result<T, QuadratureError> {
        let (best, bound) = self.eval_raw(self.x_abs_max);
        Err(QuadratureError::PanelBudget {
            best,
            bound,
            panels: 2 * self.panels,
        })
    }

    /// Converged once the refinement difference is at rounding level at the
    /// extreme abscissae, or below half the tolerance.
    fn check_converged(&self) -> Result<bool, QuadratureError> {
        for x in [0.0, self.x_abs_max, -self.x_abs_max] {
            let s = self.sums(x);
            let diff = (s.fine - s.coarse).norm();
            let rounding = 1e3 * f64::EPSILON * s.magnitude;
            if diff > rounding && diff > 0.5 * self.tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn x_abs_max(&self) -> f64 {
        self.x_abs_max
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Height of the integration path (0 on the real half-line).
    pub fn theta(&self) -> f64 {
        match self.layout {
            Layout::HalfLine { .. } => 0.0,
            Layout::Shifted { theta, .. } => theta,
        }
    }

    pub fn panels(&self) -> usize {
        2 * self.panels
    }

    fn sums(&self, x: f64) -> Sums {
        let odd = self.moment % 2 == 1;
        match &self.layout {
            Layout::HalfLine { coarse, fine } => {
                let sum = |nodes: &[HalfNode]| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut mag = 0.0;
                    let mut tail = 0.0;
                    for n in nodes {
                        let (ch, sh) = if x == 0.0 {
                            (1.0, 0.0)
                        } else {
                            let (e, ei) = ((x * n.t).exp(), (-x * n.t).exp());
                            (0.5 * (e + ei), 0.5 * (e - ei))
                        };
                        let (re_h, im_h) = if odd { (sh, ch) } else { (ch, sh) };
                        acc += Complex64::new(n.gw * re_h * n.cos, n.gw * im_h * n.sin);
                        mag += n.mag * ch;
                        tail += n.tail * ch;
                    }
                    (acc, mag, tail)
                };
                let (c, _, _) = sum(coarse);
                let (f, m, tl) = sum(fine);
                Sums {
                    coarse: c,
                    fine: f,
                    magnitude: m,
                    series_tail: tl,
                }
            }
            Layout::Shifted { theta, coarse, fine } => {
                let pre = 0.5 * Complex64::new(-self.y * theta, x * theta).exp();
                let scale = pre.norm();
                let sum = |nodes: &[ShiftNode]| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut mag = 0.0;
                    let mut tail = 0.0;
                    for n in nodes {
                        let (e, ei) = ((x * n.t).exp(), (-x * n.t).exp());
                        acc += n.plus * e + n.minus * ei;
                        mag += n.mag * e.max(ei);
                        tail += n.tail * e.max(ei);
                    }
                    (acc * pre, mag * scale, tail * scale)
                };
                let (c, _, _) = sum(coarse);
                let (f, m, tl) = sum(fine);
                Sums {
                    coarse: c,
                    fine: f,
                    magnitude: m,
                    series_tail: tl,
                }
            }
        }
    }

    fn cutoff_tail(&self, x: f64) -> f64 {
        let xa = x.abs();
        match self.layout {
            Layout::HalfLine { .. } => {
                let (lb, growth) = match self.integrand {
                    Integrand::G => (log_integrand_bound(self.cutoff, xa), xa + 9.0),
                    Integrand::F => (
                        (xa + 1.0) * self.cutoff - PI * (4.0 * self.cutoff).exp()
                            - (1.0 - RATIO_BOUND).ln(),
                        xa + 1.0,
                    ),
                };
                log_tail(lb, self.cutoff, growth, 1.0, self.moment, 0.0)
                    .map_or(f64::INFINITY, f64::exp)
            }
            Layout::Shifted { theta, .. } => {
                let c = (4.0 * theta).cos();
                // both half-lines, ½ prefactor, e^{−|y|θ} from the shift
                log_tail(
                    g_majorant_log(self.cutoff, c),
                    self.cutoff,
                    xa + 9.0,
                    c,
                    self.moment,
                    theta.abs(),
                )
                .map_or(f64::INFINITY, |lt| (lt - self.y.abs() * theta.abs()).exp())
            }
        }
    }

    fn eval_raw(&self, x: f64) -> (Complex64, f64) {
        let s = self.sums(x);
        let bound = self.cutoff_tail(x)
            + (s.fine - s.coarse).norm()
            + ROUNDING_FACTOR * f64::EPSILON * s.magnitude
            + s.series_tail;
        (s.fine, bound)
    }

    /// `∫ t^k f(t)(cosh|sinh)((x + iy)t) dt` and its error bound.
    pub fn eval(&self, x: f64) -> Result<(Complex64, f64), QuadratureError> {
        if x.abs() > self.x_abs_max * (1.0 + 1e-12) + 1e-300 {
            return Err(QuadratureError::BadSpec(format!(
                "x = {x} outside kernel range ±{}",
                self.x_abs_max
            )));
        }
        Ok(self.eval_raw(x))
    }
}

struct Sums {
    coarse: Complex64,
    fine: Complex64,
    magnitude: f64,
    series_tail: f64,
}

fn check_point(z: Complex64) -> Result<(), QuadratureError> {
    if !z.re.is_finite() || !z.im.is_finite() || z.re.abs() > MAX_ABS_X {
        return Err(QuadratureError::OutOfRange(z));
    }
    Ok(())
}

/// `∫₀^∞ t^k f(t)·(cosh|sinh)(zt) dt` by adaptive bisection on the real axis.
fn adaptive_moment(
    integrand: Integrand,
    z: Complex64,
    moment: u8,
    spec: &QuadratureSpec,
) -> Result<(Complex64, f64), QuadratureError> {
    let xa = z.re.abs();
    let growth = match integrand {
        Integrand::G => xa + 9.0,
        Integrand::F => xa + 1.0,
    };
    let cutoff = match spec.cutoff_t {
        Some(t) => t,
        None => cutoff_search(spec.tail_target(), |t| {
            let lb = match integrand {
                Integrand::G => log_integrand_bound(t, xa),
                Integrand::F => growth * t - PI * (4.0 * t).exp() - (1.0 - RATIO_BOUND).ln(),
            };
            log_tail(lb, t, growth, 1.0, moment, 0.0)
        })?,
    };
    let tail = {
        let lb = match integrand {
            Integrand::G => log_integrand_bound(cutoff, xa),
            Integrand::F => growth * cutoff - PI * (4.0 * cutoff).exp() - (1.0 - RATIO_BOUND).ln(),
        };
        log_tail(lb, cutoff, growth, 1.0, moment, 0.0).map_or(f64::INFINITY, f64::exp)
    };
    let mut first_err: Option<QuadratureError> = None;
    let mut f = |t: f64, part: usize| -> f64 {
        let v = match integrand {
            Integrand::G => g_eval(t, &spec.series),
            Integrand::F => f_series(t, 0, &spec.series),
        };
        let v = match v {
            Ok(v) => v.value,
            Err(e) => {
                first_err.get_or_insert(e.into());
                0.0
            }
        };
        let zt = z * t;
        let h = if moment % 2 == 0 { zt.cosh() } else { zt.sinh() };
        let h = if part == 0 { h.re } else { h.im };
        v * t.powi(moment as i32) * h
    };
    let re = adaptive_bisection(0.0, cutoff, 0.25 * spec.tol, spec.max_panels, |t| f(t, 0));
    let im = adaptive_bisection(0.0, cutoff, 0.25 * spec.tol, spec.max_panels, |t| f(t, 1));
    if let Some(e) = first_err {
        return Err(e);
    }
    let value = Complex64::new(re.value, im.value);
    let bound = tail
        + re.error_estimate
        + im.error_estimate
        + ROUNDING_FACTOR * f64::EPSILON * (re.magnitude + im.magnitude);
    if !(re.converged && im.converged) && bound > spec.tol {
        return Err(QuadratureError::PanelBudget {
            best: value,
            bound,
            panels: re.panels + im.panels,
        });
    }
    Ok((value, bound))
}

/// `η^{(k)}(z) = ∫₀^∞ t^k G(t)·(cosh|sinh)(zt) dt` with its error bound.
pub fn eta_moment(z: Complex64, moment: u8, spec: &QuadratureSpec) -> Result<(Complex64, f64), QuadratureError> {
    check_point(z)?;
    spec.validate()?;
    match spec.panel_rule {
        PanelRule::FixedOrderPanels => LineKernel::g(z.im, z.re.abs(), moment, spec)?.eval(z.re),
        PanelRule::AdaptiveBisection => adaptive_moment(Integrand::G, z, moment, spec),
    }
}

/// `∫₀^∞ F(t) cosh(zt) dt` on the real half-line.
pub fn f_cosh_integral(z: Complex64, spec: &QuadratureSpec) -> Result<(Complex64, f64), QuadratureError> {
    check_point(z)?;
    match spec.panel_rule {
        PanelRule::FixedOrderPanels => {
            LineKernel::half_line(Integrand::F, z.im, z.re.abs(), 0, spec)?.eval(z.re)
        }
        PanelRule::AdaptiveBisection => adaptive_moment(Integrand::F, z, 0, spec),
    }
}

/// `∫₀^∞ G(t) cosh(zt) dt` forced onto the real half-line.
pub fn g_cosh_integral_real_axis(z: Complex64, spec: &QuadratureSpec) -> Result<(Complex64, f64), QuadratureError> {
    let spec = QuadratureSpec {
        contour: ContourPolicy::RealAxis,
        ..*spec
    };
    eta_moment(z, 0, &spec)
}

/// η(z) along the G route or the F route.
pub fn eta(z: Complex64, spec: &QuadratureSpec, route: Route) -> Result<EvalResult, QuadratureError> {
    let (value, abs_error_bound) = match route {
        Route::ViaG => eta_moment(z, 0, spec)?,
        Route::ViaF => {
            let (i, b) = f_cosh_integral(z, spec)?;
            let factor = z * z - 1.0;
            let v = 0.5 + factor * i;
            (v, factor.norm() * b + ROUNDING_FACTOR * f64::EPSILON * (0.5 + (factor * i).norm()))
        }
        Route::OracleXi => return xi_oracle(transform(z, Direction::ZToS), spec),
    };
    within_tol(value, abs_error_bound, spec)?;
    Ok(EvalResult {
        value,
        abs_error_bound,
        route,
    })
}

fn within_tol(value: Complex64, bound: f64, spec: &QuadratureSpec) -> Result<(), QuadratureError> {
    if bound > spec.tol {
        return Err(QuadratureError::ToleranceNotMet {
            best: value,
            bound,
            tol: spec.tol,
        });
    }
    Ok(())
}

/// `u(x, y) = Re η`, `v(x, y) = Im η`. `v` is exactly zero on `x = 0` and
/// on `y = 0`.
pub fn uv(x: f64, y: f64, spec: &QuadratureSpec) -> Result<UvValue, QuadratureError> {
    let r = eta(Complex64::new(x, y), spec, Route::ViaG)?;
    Ok(uv_from(x, y, r.value, r.abs_error_bound))
}

pub(crate) fn uv_from(x: f64, y: f64, value: Complex64, bound: f64) -> UvValue {
    let trivial_v = x == 0.0 || y == 0.0;
    UvValue {
        u: Bounded { value: value.re, bound },
        v: if trivial_v {
            Bounded { value: 0.0, bound: 0.0 }
        } else {
            Bounded { value: value.im, bound }
        },
    }
}

/// ξ(s) = 1/2 + ½ s(s−1) ∫₁^∞ Ψ(τ)(τ^{s/2−1} + τ^{−(1+s)/2}) dτ, integrated
/// directly in τ.
pub fn xi_oracle(s: Complex64, spec: &QuadratureSpec) -> Result<EvalResult, QuadratureError> {
    spec.validate()?;
    check_point(transform(s, Direction::SToZ))?;
    let a = s / 2.0 - 1.0;
    let b = -(1.0 + s) / 2.0;
    let prefactor = 0.5 * s * (s - 1.0);
    let pmax = a.re.max(b.re).max(0.0);
    let norm_psi = 1.0 / (1.0 - (-3.0 * PI).exp());
    let log_tail_at = |t: f64| {
        let lambda = PI - pmax / t;
        if lambda <= 0.0 {
            return None;
        }
        Some((2.0 * norm_psi).ln() + pmax * t.ln() - PI * t - lambda.ln())
    };
    let target = spec.tail_target() / prefactor.norm().max(1.0);
    let upper = {
        let mut t = 2.0;
        loop {
            if let Some(lt) = log_tail_at(t) {
                if lt < target.ln() {
                    break t;
                }
            }
            t += 0.5;
            if t > 200.0 {
                return Err(QuadratureError::BadSpec("no oracle cutoff found".into()));
            }
        }
    };
    let tail = log_tail_at(upper).map_or(f64::INFINITY, f64::exp);
    let omega = s.im.abs() / 2.0;
    let width = spec.panel_width.min(2.0 * PI / omega.max(1.0) / 4.0).min(0.25);
    let mut panels = (((upper - 1.0) / width).ceil() as usize).max(1);

    let integrate = |panels: usize| -> Result<(Complex64, f64), QuadratureError> {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        for (tau, w) in panel_nodes(1.0, upper, panels) {
            let p = psi(tau, &spec.series)?;
            let ln_tau = tau.ln();
            let term = (a * ln_tau).exp() + (b * ln_tau).exp();
            acc += w * p.value * term;
            mag += w * p.abs_sum * term.norm();
        }
        Ok((acc, mag))
    };
    let (mut coarse, _) = integrate(panels)?;
    loop {
        let (fine, mag) = integrate(2 * panels)?;
        let diff = (fine - coarse).norm();
        let integral_bound = tail + diff + ROUNDING_FACTOR * f64::EPSILON * mag;
        let value = 0.5 + prefactor * fine;
        let bound = prefactor.norm() * integral_bound + f64::EPSILON;
        let converged = diff <= 1e3 * f64::EPSILON * mag || prefactor.norm() * diff <= 0.5 * spec.tol;
        if converged {
            within_tol(value, bound, spec)?;
            return Ok(EvalResult {
                value,
                abs_error_bound: bound,
                route: Route::OracleXi,
            });
        }
        if 4 * panels > spec.max_panels {
            return Err(QuadratureError::PanelBudget {
                best: value,
                bound,
                panels: 2 * panels,
            });
        }
        panels *= 2;
        coarse = fine;
    }
}

/// `|(z²−1)∫F cosh(zt) − F′(0) − ∫G cosh(zt)|` with both integrals taken
/// independently on the real half-line.
pub fn by_parts_residual(z: Complex64, spec: &QuadratureSpec) -> Result<f64, QuadratureError> {
    let (fi, _) = f_cosh_integral(z, spec)?;
    let (gi, _) = g_cosh_integral_real_axis(z, spec)?;
    let f_prime_zero = f_series(0.0, 1, &spec.series)?.value;
    let lhs = (z * z - 1.0) * fi;
    let rhs = f_prime_zero + gi;
    Ok((lhs - rhs).norm())
}

/// Central-difference Cauchy–Riemann residuals `(|u_x − v_y|, |u_y + v_x|)`.
pub fn cr_check(z: Complex64, h: f64, spec: &QuadratureSpec) -> Result<(f64, f64), QuadratureError> {
    if !(h > 0.0) {
        return Err(QuadratureError::BadSpec(format!("step must be positive, got {h}")));
    }
    let at = |dx: f64, dy: f64| eta(z + Complex64::new(dx, dy), spec, Route::ViaG).map(|r| r.value);
    let east = at(h, 0.0)?;
    let west = at(-h, 0.0)?;
    let north = at(0.0, h)?;
    let south = at(0.0, -h)?;
    let d_dx = (east - west) / (2.0 * h);
    let d_dy = (north - south) / (2.0 * h);
    Ok(((d_dx.re - d_dy.im).abs(), (d_dy.re + d_dx.im).abs()))
}

/// One row of batch output; columns in this order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UvRow {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
    pub bound: f64,
}

/// Evaluates `u`, `v` at many points in parallel; output order matches input.
pub fn uv_batch(points: &[(f64, f64)], spec: &QuadratureSpec) -> Result<Vec<UvRow>, QuadratureError> {
    points
        .par_iter()
        .map(|&(x, y)| {
            let r = uv(x, y, spec)?;
            Ok(UvRow {
                x,
                y,
                u: r.u.value,
                v: r.v.value,
                bound: r.u.bound.max(r.v.bound),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn transform_examples() {
        assert_eq!(transform(Complex64::new(0.5, 0.0), Direction::SToZ), Complex64::new(0.0, 0.0));
        assert_eq!(transform(Complex64::new(1.0, 0.0), Direction::ZToS), Complex64::new(1.0, 0.0));
        let z = transform(Complex64::new(0.5, 14.1347251), Direction::SToZ);
        assert_eq!(z, Complex64::new(0.0, 28.2694502));
    }

    #[test]
    fn integrand_bound_examples() {
        assert!(integrand_bound(1.0, 1.0) < 1e-60);
        let at_zero = integrand_bound(0.0, 0.0);
        assert!((at_zero - 6.839_522_939_797_353_5).abs() < 1e-12);
        for k in 0..20 {
            let t1 = 0.5 + 0.1 * k as f64;
            let (a, b) = (integrand_bound(t1, 0.7), integrand_bound(t1 + 0.05, 0.7));
            assert!(b < a || a == 0.0);
        }
    }

    #[test]
    fn cutoff_examples() {
        assert!(cutoff_t(1.0, 1e-16).unwrap() <= 1.0);
        assert!(cutoff_t(1.0, 1e-300).unwrap() <= 1.4);
        assert!(cutoff_t(1.0, 0.0).is_err());
        let mut prev = 0.0;
        for k in 0..=20 {
            let c = cutoff_t(0.1 * k as f64, 1e-12).unwrap();
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn eta_at_one_is_half() {
        let r = eta(Complex64::new(1.0, 0.0), &spec(), Route::ViaG).unwrap();
        assert!((r.value.re - 0.5).abs() < 1e-10, "{r:?}");
        assert!(r.abs_error_bound <= 1e-10);
        let r = eta(Complex64::new(-1.0, 0.0), &spec(), Route::ViaF).unwrap();
        assert_eq!(r.value, Complex64::new(0.5, 0.0));
    }

    #[test]
    fn eta_at_zero() {
        let r = eta(Complex64::new(0.0, 0.0), &spec(), Route::ViaG).unwrap();
        assert!((r.value.re - 0.497_120_778_188_314_1).abs() < 1e-13);
        let o = xi_oracle(Complex64::new(0.5, 0.0), &spec()).unwrap();
        assert!((o.value.re - 0.497_120_778_188_314_1).abs() < 1e-12);
        let o = xi_oracle(Complex64::new(0.0, 0.0), &spec()).unwrap();
        assert!((o.value.re - 0.5).abs() < 1e-8);
    }

    #[test]
    fn first_zero_is_tiny() {
        let r = eta(Complex64::new(0.0, 28.269_450_283_469_4), &spec(), Route::ViaG).unwrap();
        assert!(r.value.norm() < 1e-8);
    }

    #[test]
    fn uv_examples() {
        assert!(uv(0.0, 20.0, &spec()).unwrap().u.value > 0.0);
        assert!(uv(0.0, 30.0, &spec()).unwrap().u.value < 0.0);
        let r = uv(0.7, 0.0, &spec()).unwrap();
        assert_eq!(r.v.value, 0.0);
        assert_eq!(uv(0.0, 12.0, &spec()).unwrap().v.value, 0.0);
    }

    #[test]
    fn oracle_matches_reference_off_line() {
        let z = Complex64::new(0.4, 10.0);
        let reference = Complex64::new(0.275_520_166_668_044_73, 0.013_309_198_198_120_312);
        let o = eta(z, &spec(), Route::OracleXi).unwrap();
        assert!((o.value - reference).norm() < 1e-11, "{o:?}");
        let g = eta(z, &spec(), Route::ViaG).unwrap();
        assert!((g.value - reference).norm() < 1e-11, "{g:?}");
        assert!((o.value - g.value).norm() < 1e-9);
    }

    #[test]
    fn by_parts_examples() {
        let s = spec();
        assert!(by_parts_residual(Complex64::new(0.0, 0.0), &s).unwrap() < 1e-10);
        assert!(by_parts_residual(Complex64::new(1.0, 0.0), &s).unwrap() < 1e-10);
        assert!(by_parts_residual(Complex64::new(0.5, 5.0), &s).unwrap() < 1e-9);
    }

    #[test]
    fn cr_examples() {
        let s = spec();
        let (a, b) = cr_check(Complex64::new(0.3, 12.0), 1e-4, &s).unwrap();
        assert!(a < 1e-6 && b < 1e-6);
        let (a, b) = cr_check(Complex64::new(0.0, 10.0), 1e-4, &s).unwrap();
        assert!(a < 1e-6 && b < 1e-6);
        assert!(cr_check(Complex64::new(0.0, 10.0), 0.0, &s).is_err());
    }

    #[test]
    fn adaptive_rule_agrees_with_panels() {
        let fixed = spec();
        let adaptive = QuadratureSpec {
            panel_rule: PanelRule::AdaptiveBisection,
            ..fixed
        };
        for z in [Complex64::new(0.0, 0.0), Complex64::new(0.6, 7.0), Complex64::new(-0.2, 15.0)] {
            let a = eta(z, &adaptive, Route::ViaG).unwrap();
            let b = eta(z, &fixed, Route::ViaG).unwrap();
            assert!((a.value - b.value).norm() < a.abs_error_bound + b.abs_error_bound + 1e-12);
        }
    }

    #[test]
    fn out_of_strip_rejected() {
        assert!(matches!(
            eta(Complex64::new(2.5, 1.0), &spec(), Route::ViaG),
            Err(QuadratureError::OutOfRange(_))
        ));
    }

    #[test]
    fn theta_grows_with_height() {
        assert_eq!(choose_theta(0.0), 0.0);
        assert_eq!(choose_theta(5.0), 0.0);
        assert!(choose_theta(60.0) > 0.0);
        assert!(choose_theta(200.0) >= choose_theta(60.0));
    }
}
