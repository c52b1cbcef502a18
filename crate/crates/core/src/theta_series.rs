//! Theta-type series Ψ, F, G and their derivatives with certified truncation.
//!
//! All of the kernels share one shape: a sum over `n ≥ 1` of
//! `exp(a − w_n)·P(w_n)` with `w_n = π n² τ` and a fixed polynomial `P`.
//! For F and G, `τ = e^{4t}` and `a = t`; for Ψ, `a = 0`. Differentiating
//! with respect to `t` maps `P` to `(1 − 4w)P + 4wP′`, which is how the
//! derivative polynomials below are produced.
//!
//! Two truncation certificates are used. For `τ ≥ 1` and the kernels whose
//! consecutive-term ratio never exceeds `r = 28·e^{−3π}` (Ψ, F, F′, F″, G),
//! the tail after the last summed term is bounded by `|last|·r/(1 − r)`.
//! Everywhere else a majorant `b_n = e^{Re a} e^{−π n² Re τ} Σ|c_j| (π n² |τ|)^j`
//! is used, whose ratio `b_{n+1}/b_n` is decreasing in `n`.

use std::f64::consts::PI;
use std::sync::LazyLock;

use num_complex::Complex64;
use thiserror::Error;

/// `28·e^{−3π}`, the geometric tail ratio of the G series for `t ≥ 0`.
pub const RATIO_BOUND: f64 = 0.002_259_586_491_968_528_8;

const DEFAULT_MAX_TERMS: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("{what}: argument {arg} is outside the supported domain")]
    Domain { what: &'static str, arg: f64 },
    #[error("{what}: tolerance {tol:e} not reached within {terms} terms")]
    Convergence {
        what: &'static str,
        tol: f64,
        terms: usize,
    },
    #[error("derivative order {0} is not supported")]
    UnsupportedOrder(u8),
    #[error("truncation tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Truncation settings shared by every series kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Absolute tolerance on the omitted tail.
    pub tol: f64,
    pub max_terms: usize,
    /// F is summed directly for `t ≥ −neg_extent`; G reflects beyond it.
    pub neg_extent: f64,
}

impl TruncationPolicy {
    pub fn new(tol: f64) -> Result<Self, SeriesError> {
        if !(tol > 0.0) || !tol.is_finite() {
            return Err(SeriesError::BadTolerance(tol));
        }
        Ok(Self {
            tol,
            ..Self::default()
        })
    }

    pub fn ratio_bound(&self) -> f64 {
        RATIO_BOUND
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tol: 1e-16,
            max_terms: DEFAULT_MAX_TERMS,
            neg_extent: 1.0,
        }
    }
}

/// A truncated real series value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedValue {
    pub value: f64,
    pub terms_used: usize,
    /// Certified bound on the omitted tail.
    pub tail_bound: f64,
    /// Sum of the magnitudes of the summed terms (a rounding-error scale).
    pub abs_sum: f64,
}

/// Complex counterpart of [`TruncatedValue`], used off the real axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexTruncated {
    pub value: Complex64,
    pub terms_used: usize,
    pub tail_bound: f64,
    pub abs_sum: f64,
}

/// Applies `P ↦ (1 − 4w)P + 4wP′`, the `d/dt` action on `e^{t−w}P(w)`.
pub fn differentiate_poly(p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (j, &c) in p.iter().enumerate() {
        out[j] += c * (1.0 + 4.0 * j as f64);
        out[j + 1] -= 4.0 * c;
    }
    out
}

/// `P` for F, F′, F″.
static F_POLYS: LazyLock<[Vec<f64>; 3]> = LazyLock::new(|| {
    let p0 = vec![1.0];
    let p1 = differentiate_poly(&p0);
    let p2 = differentiate_poly(&p1);
    [p0, p1, p2]
});

/// `P` for G, G′, G″, G‴; `G = F″ − F` gives `16w² − 24w`.
static G_POLYS: LazyLock<[Vec<f64>; 4]> = LazyLock::new(|| {
    let p0 = vec![0.0, -24.0, 16.0];
    let p1 = differentiate_poly(&p0);
    let p2 = differentiate_poly(&p1);
    let p3 = differentiate_poly(&p2);
    [p0, p1, p2, p3]
});

pub fn f_poly(order: u8) -> Result<&'static [f64], SeriesError> {
    F_POLYS
        .get(order as usize)
        .map(Vec::as_slice)
        .ok_or(SeriesError::UnsupportedOrder(order))
}

pub fn g_poly(order: u8) -> Result<&'static [f64], SeriesError> {
    G_POLYS
        .get(order as usize)
        .map(Vec::as_slice)
        .ok_or(SeriesError::UnsupportedOrder(order))
}

fn poly_eval(p: &[f64], w: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * w + c)
}

fn poly_abs_eval(p: &[f64], w: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * w + c.abs())
}

fn poly_eval_c(p: &[f64], w: Complex64) -> Complex64 {
    p.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * w + c)
}

/// Majorant tail after `n_done` terms, or `None` while the majorant ratio is
/// still ≥ 1. `re_tau`, `abs_tau` describe `τ`; `log_pre` is `Re a`.
fn majorant_tail(p: &[f64], log_pre: f64, re_tau: f64, abs_tau: f64, n_done: usize) -> Option<f64> {
    let degree = p.len().saturating_sub(1) as i32;
    let next = (n_done + 1) as f64;
    let rho = (-PI * (2.0 * next + 1.0) * re_tau).exp() * ((next + 1.0) / next).powi(2 * degree);
    if rho >= 1.0 {
        return None;
    }
    let w = PI * next * next * abs_tau;
    let b_next = (log_pre - PI * next * next * re_tau).exp() * poly_abs_eval(p, w);
    Some(b_next / (1.0 - rho))
}

/// Sum of `e^{log_pre − w_n} P(w_n)` with `w_n = π n² τ`, `τ > 0`.
fn kernel_sum(
    what: &'static str,
    log_pre: f64,
    tau: f64,
    p: &[f64],
    policy: &TruncationPolicy,
    ratio_certified: bool,
) -> Result<TruncatedValue, SeriesError> {
    let mut value = 0.0;
    let mut abs_sum = 0.0;
    for n in 1..=policy.max_terms {
        let nf = n as f64;
        let w = PI * nf * nf * tau;
        let term = (log_pre - w).exp() * poly_eval(p, w);
        value += term;
        abs_sum += term.abs();
        let tail = if ratio_certified {
            Some(term.abs() * RATIO_BOUND / (1.0 - RATIO_BOUND))
        } else {
            majorant_tail(p, log_pre, tau, tau, n)
        };
        if let Some(tail) = tail {
            if tail <= policy.tol {
                return Ok(TruncatedValue {
                    value,
                    terms_used: n,
                    tail_bound: tail,
                    abs_sum,
                });
            }
        }
    }
    Err(SeriesError::Convergence {
        what,
        tol: policy.tol,
        terms: policy.max_terms,
    })
}

/// Ψ(τ) = Σ e^{−π n² τ}. For `τ < 1` the Jacobi relation
/// `2Ψ(τ) + 1 = τ^{−1/2}(2Ψ(1/τ) + 1)` is applied first.
pub fn psi(tau: f64, policy: &TruncationPolicy) -> Result<TruncatedValue, SeriesError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(SeriesError::Domain { what: "psi", arg: tau });
    }
    if tau >= 1.0 {
        return kernel_sum("psi", 0.0, tau, &[1.0], policy, true);
    }
    let scale = tau.sqrt().recip();
    let inner_policy = TruncationPolicy {
        tol: policy.tol / scale,
        ..*policy
    };
    let inner = kernel_sum("psi", 0.0, 1.0 / tau, &[1.0], &inner_policy, true)?;
    Ok(TruncatedValue {
        value: 0.5 * (scale * (2.0 * inner.value + 1.0) - 1.0),
        terms_used: inner.terms_used,
        tail_bound: scale * inner.tail_bound,
        abs_sum: scale * (inner.abs_sum + 0.5) + 0.5,
    })
}

/// Ψ(τ) by direct summation, without the Jacobi relation.
pub fn psi_direct(tau: f64, policy: &TruncationPolicy) -> Result<TruncatedValue, SeriesError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(SeriesError::Domain { what: "psi", arg: tau });
    }
    kernel_sum("psi", 0.0, tau, &[1.0], policy, false)
}

/// Ψ^{(k)}(τ) = Σ (−π n²)^k e^{−π n² τ} for `k ≤ 2`, summed directly.
pub fn psi_derivative(
    tau: f64,
    order: u8,
    policy: &TruncationPolicy,
) -> Result<TruncatedValue, SeriesError> {
    if order > 2 {
        return Err(SeriesError::UnsupportedOrder(order));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(SeriesError::Domain { what: "psi", arg: tau });
    }
    let mut value = 0.0;
    let mut abs_sum = 0.0;
    for n in 1..=policy.max_terms {
        let a = PI * (n * n) as f64;
        let term = (-a).powi(order as i32) * (-a * tau).exp();
        value += term;
        abs_sum += term.abs();
        // (−π(n+1)²)^k e^{−π(n+1)²τ} / term_n ≤ 16 e^{−3πτ} < 1, decreasing in n.
        let next = (n + 1) as f64;
        let rho = (-PI * (2.0 * next + 1.0) * tau).exp()
            * ((next + 1.0) / next).powi(2 * order as i32);
        if rho < 1.0 {
            let b_next = (PI * next * next).powi(order as i32) * (-PI * next * next * tau).exp();
            let tail = b_next / (1.0 - rho);
            if tail <= policy.tol {
                return Ok(TruncatedValue {
                    value,
                    terms_used: n,
                    tail_bound: tail,
                    abs_sum,
                });
            }
        }
    }
    Err(SeriesError::Convergence {
        what: "psi derivative",
        tol: policy.tol,
        terms: policy.max_terms,
    })
}

/// F(t) = Ψ(e^{4t}) e^t and its first two derivatives.
pub fn f_series(t: f64, order: u8, policy: &TruncationPolicy) -> Result<TruncatedValue, SeriesError> {
    let p = f_poly(order)?;
    if !t.is_finite() || t < -policy.neg_extent {
        return Err(SeriesError::Domain { what: "F", arg: t });
    }
    kernel_sum("F", t, (4.0 * t).exp(), p, policy, t >= 0.0)
}

/// G(t) = Σ exp(t − π n² e^{4t})·(16π²n⁴e^{8t} − 24π n² e^{4t}).
///
/// G is even; for `t < −neg_extent` the value at `−t` is returned.
pub fn g_eval(t: f64, policy: &TruncationPolicy) -> Result<TruncatedValue, SeriesError> {
    if !t.is_finite() {
        return Err(SeriesError::Domain { what: "G", arg: t });
    }
    let t = if t < -policy.neg_extent { -t } else { t };
    kernel_sum("G", t, (4.0 * t).exp(), g_poly(0)?, policy, t >= 0.0)
}

/// G through the τ-form `e^t [16τ²Ψ″(τ) + 24τΨ′(τ)]`, `τ = e^{4t}`.
pub fn g_tau_form(t: f64, policy: &TruncationPolicy) -> Result<TruncatedValue, SeriesError> {
    if !t.is_finite() || t < -policy.neg_extent {
        return Err(SeriesError::Domain { what: "G", arg: t });
    }
    let tau = (4.0 * t).exp();
    let et = t.exp();
    let c2 = 16.0 * tau * tau * et;
    let c1 = 24.0 * tau * et;
    let inner = TruncationPolicy {
        tol: policy.tol / (c1 + c2),
        ..*policy
    };
    let d1 = psi_derivative(tau, 1, &inner)?;
    let d2 = psi_derivative(tau, 2, &inner)?;
    Ok(TruncatedValue {
        value: c2 * d2.value + c1 * d1.value,
        terms_used: d1.terms_used.max(d2.terms_used),
        tail_bound: c2 * d2.tail_bound + c1 * d1.tail_bound,
        abs_sum: c2 * d2.abs_sum + c1 * d1.abs_sum,
    })
}

/// G′ or G‴ by term-wise differentiation.
pub fn g_deriv(t: f64, order: u8, policy: &TruncationPolicy) -> Result<TruncatedValue, SeriesError> {
    if order != 1 && order != 3 {
        return Err(SeriesError::UnsupportedOrder(order));
    }
    if !t.is_finite() {
        return Err(SeriesError::Domain { what: "G'", arg: t });
    }
    if t < -policy.neg_extent {
        // odd derivatives of an even function are odd
        let r = g_deriv(-t, order, policy)?;
        return Ok(TruncatedValue {
            value: -r.value,
            ..r
        });
    }
    kernel_sum("G'", t, (4.0 * t).exp(), g_poly(order)?, policy, false)
}

/// Any derivative order 0..=3 of G at real `t`, majorant-certified.
pub fn g_any(t: f64, order: u8, policy: &TruncationPolicy) -> Result<TruncatedValue, SeriesError> {
    match order {
        0 => g_eval(t, policy),
        1 | 3 => g_deriv(t, order, policy),
        2 => {
            if !t.is_finite() {
                return Err(SeriesError::Domain { what: "G''", arg: t });
            }
            let t = if t < -policy.neg_extent { -t } else { t };
            kernel_sum("G''", t, (4.0 * t).exp(), g_poly(2)?, policy, false)
        }
        _ => Err(SeriesError::UnsupportedOrder(order)),
    }
}

/// G (or a derivative) at complex `t`, valid while `|Im t| < π/8`.
pub fn g_complex(
    t: Complex64,
    order: u8,
    policy: &TruncationPolicy,
) -> Result<ComplexTruncated, SeriesError> {
    let p = g_poly(order)?;
    let tau = (4.0 * t).exp();
    if !(tau.re > 0.0) || !t.re.is_finite() {
        return Err(SeriesError::Domain { what: "G", arg: t.im });
    }
    let abs_tau = tau.norm();
    let mut value = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    for n in 1..=policy.max_terms {
        let nf = n as f64;
        let w = PI * nf * nf * tau;
        let term = (t - w).exp() * poly_eval_c(p, w);
        value += term;
        abs_sum += term.norm();
        if let Some(tail) = majorant_tail(p, t.re, tau.re, abs_tau, n) {
            if tail <= policy.tol {
                return Ok(ComplexTruncated {
                    value,
                    terms_used: n,
                    tail_bound: tail,
                    abs_sum,
                });
            }
        }
    }
    Err(SeriesError::Convergence {
        what: "G (complex)",
        tol: policy.tol,
        terms: policy.max_terms,
    })
}

/// Number of G terms summed at `t` before the ratio-certified tail drops
/// below `policy.tol`. At least one term is always taken.
pub fn terms_needed(t: f64, policy: &TruncationPolicy) -> Result<usize, SeriesError> {
    Ok(g_eval(t, policy)?.terms_used)
}

/// `|term_{n+1}(t) / term_n(t)|` for the G series.
pub fn g_term_ratio(t: f64, n: usize) -> f64 {
    let p = &G_POLYS[0];
    let term = |k: usize| {
        let w = PI * (k * k) as f64 * (4.0 * t).exp();
        // log-space to avoid underflow of the exponential
        let poly = poly_eval(p, w);
        (t - w, poly)
    };
    let (la, pa) = term(n);
    let (lb, pb) = term(n + 1);
    ((lb - la).exp() * pb / pa).abs()
}
