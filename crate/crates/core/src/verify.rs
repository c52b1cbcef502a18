//! The audit suite run by `xilab verify`: one check per acceptance item,
//! each with the measured quantity, its threshold and a short citation of
//! the identity or claim it tests.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::critical_line::{interlacing, pq, scan_zeros, stationary_points, u_line, ZeroRow};
use crate::eta_integral::{cr_check, eta, xi_oracle, QuadratureSpec, Route};
use crate::strip_mapper::{anomaly_scan, grid_rows, min_modulus_of, sign_grid, trace_curves, Field, Region};
use crate::theta_series::{f_series, g_eval, g_tau_form, TruncationPolicy};

/// Zero ordinates of `u(0, ·)` below 100 from an independent
/// 40-digit evaluation of the τ-integral for ξ.
pub const REFERENCE_ZEROS: [f64; 10] = [
    28.269_450_283_469_4,
    42.044_079_277_543_1,
    50.021_715_160_291_4,
    60.849_752_251_719,
    65.870_123_175_478_4,
    75.172_356_317_651_3,
    81.837_438_024_295,
    86.654_146_561_83,
    96.010_301_762_334_3,
    99.547_664_955_344_6,
];

/// Regression floor for `min |η|` over `[0.05, 1] × [0, 100]` on a 128×512
/// grid. The measured minimum is 6.07e-16 at (0.05, 99.609).
pub const MIN_MODULUS_FLOOR: f64 = 3.0e-16;

/// Tightest tolerance any check needs from the quadrature.
const CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Advisory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub measured: f64,
    pub threshold: f64,
    pub citation: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    /// One aligned line per check.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Advisory => "ADVISORY",
            };
            out.push_str(&format!(
                "{status:<8} {:<36} measured={:<12.4e} threshold={:<10.3e} [{}] {}\n",
                c.name, c.measured, c.threshold, c.citation, c.detail
            ));
        }
        out
    }
}

fn check(name: &str, pass: bool, measured: f64, threshold: f64, citation: &str, detail: String) -> Check {
    Check {
        name: name.into(),
        status: if pass { Status::Pass } else { Status::Fail },
        measured,
        threshold,
        citation: citation.into(),
        detail,
    }
}

fn failed(name: &str, threshold: f64, citation: &str, err: impl std::fmt::Display) -> Check {
    Check {
        name: name.into(),
        status: Status::Fail,
        measured: f64::NAN,
        threshold,
        citation: citation.into(),
        detail: format!("error: {err}"),
    }
}

/// The 20 points used for route agreement: `|x| ≤ 1`, `|y| ≤ 60`.
pub fn agreement_points() -> Vec<Complex64> {
    (0..20)
        .map(|k| Complex64::new(((7 * k) % 21) as f64 / 10.0 - 1.0, -57.0 + 6.0 * k as f64))
        .collect()
}

/// The 10 points used for the Cauchy–Riemann residuals.
pub fn cr_points() -> Vec<Complex64> {
    [
        (0.3, 12.0),
        (0.0, 10.0),
        (0.5, 3.0),
        (-0.4, 20.0),
        (0.8, 28.0),
        (0.1, 35.0),
        (-0.9, 42.0),
        (0.6, 50.0),
        (0.2, 57.0),
        (1.0, 1.0),
    ]
    .into_iter()
    .map(|(x, y)| Complex64::new(x, y))
    .collect()
}

/// Runs every check. `tol` is capped at the tightest level the checks need,
/// so a looser request never weakens them.
pub fn run(tol: f64) -> VerifyReport {
    let spec = QuadratureSpec {
        tol: tol.min(CHECK_TOL),
        ..QuadratureSpec::default()
    };
    let policy = TruncationPolicy::default();
    let checks = vec![
        f_prime_zero(&policy),
        f_zero(&policy),
        g_even(&policy),
        g_tau_routes(&policy),
        eta_at_one(&spec),
        oracle_agreement(&spec),
        zeros(&spec),
        interlace(&spec),
        pq_machinery(&spec),
        cauchy_riemann(&spec),
        strip_map(&spec),
        determinism(&spec),
    ];
    VerifyReport { checks }
}

fn f_prime_zero(policy: &TruncationPolicy) -> Check {
    let name = "F_prime_zero_is_minus_half";
    let citation = "F'(0) = -1/2";
    match f_series(0.0, 1, policy) {
        Ok(v) => {
            let d = (v.value + 0.5).abs();
            check(name, d < 1e-12, d, 1e-12, citation, format!("F'(0) = {:.17}", v.value))
        }
        Err(e) => failed(name, 1e-12, citation, e),
    }
}

fn f_zero(policy: &TruncationPolicy) -> Check {
    let name = "F_zero_constant";
    let citation = "F(0) = 0.043217";
    match f_series(0.0, 0, policy) {
        Ok(v) => {
            let d = (v.value - 0.043_217).abs();
            check(name, d < 5e-6, d, 5e-6, citation, format!("F(0) = {:.17}", v.value))
        }
        Err(e) => failed(name, 5e-6, citation, e),
    }
}

fn g_even(policy: &TruncationPolicy) -> Check {
    let name = "G_even_symmetry";
    let citation = "Jacobi relation, G(-t) = G(t)";
    let mut worst = 0.0f64;
    for k in 0..=60 {
        let t = k as f64 / 100.0;
        match (g_eval(-t, policy), g_eval(t, policy)) {
            (Ok(a), Ok(b)) => worst = worst.max((a.value - b.value).abs()),
            (Err(e), _) | (_, Err(e)) => return failed(name, 1e-10, citation, e),
        }
    }
    check(name, worst < 1e-10, worst, 1e-10, citation, "t = 0, 0.01, ..., 0.6".into())
}

fn g_tau_routes(policy: &TruncationPolicy) -> Check {
    let name = "G_series_tau_form_agreement";
    let citation = "G = e^t (16 tau^2 Psi'' + 24 tau Psi')";
    let mut worst = 0.0f64;
    for k in 0..=100 {
        let t = k as f64 / 100.0;
        match (g_eval(t, policy), g_tau_form(t, policy)) {
            (Ok(a), Ok(b)) => worst = worst.max((a.value - b.value).abs()),
            (Err(e), _) | (_, Err(e)) => return failed(name, 1e-10, citation, e),
        }
    }
    check(name, worst < 1e-10, worst, 1e-10, citation, "t = 0, 0.01, ..., 1".into())
}

fn eta_at_one(spec: &QuadratureSpec) -> Check {
    let name = "eta_at_plus_minus_one_is_half";
    let citation = "eta(+-1) = 1/2";
    let mut worst = 0.0f64;
    for x in [1.0, -1.0] {
        match eta(Complex64::new(x, 0.0), spec, Route::ViaG) {
            Ok(r) => worst = worst.max((r.value - 0.5).norm()),
            Err(e) => return failed(name, 1e-10, citation, e),
        }
    }
    check(name, worst < 1e-10, worst, 1e-10, citation, "G route".into())
}

fn oracle_agreement(spec: &QuadratureSpec) -> Check {
    let name = "eta_oracle_agreement";
    let citation = "eta(z) = xi((1+z)/2)";
    let mut worst = 0.0f64;
    for z in agreement_points() {
        let g = eta(z, spec, Route::ViaG);
        let o = xi_oracle((z + 1.0) / 2.0, spec);
        match (g, o) {
            (Ok(g), Ok(o)) => worst = worst.max((g.value - o.value).norm()),
            (Err(e), _) | (_, Err(e)) => return failed(name, 1e-9, citation, e),
        }
    }
    check(name, worst < 1e-9, worst, 1e-9, citation, "20 points, |x| <= 1, |y| <= 60".into())
}

fn zeros(spec: &QuadratureSpec) -> Check {
    let name = "critical_line_zeros";
    let citation = "only simple zeros on the critical line";
    let found = match scan_zeros(0.0, 100.0, 0.5, 1e-8, spec) {
        Ok(z) => z,
        Err(e) => return failed(name, 1e-5, citation, e),
    };
    let worst = found
        .iter()
        .zip(REFERENCE_ZEROS.iter().take(3))
        .map(|(z, r)| (z.y - r).abs())
        .fold(0.0f64, f64::max);
    let simple = found.iter().all(|z| z.simple);
    let pass = found.len() == 10 && worst < 1e-5 && simple;
    check(
        name,
        pass,
        worst,
        1e-5,
        citation,
        format!("{} zeros in (0, 100], all simple: {simple}", found.len()),
    )
}

fn interlace(spec: &QuadratureSpec) -> Check {
    let name = "stationary_point_interlacing";
    let citation = "positive local maxima or negative local minima";
    let result = scan_zeros(0.0, 100.0, 0.5, 1e-8, spec).and_then(|z| {
        let s = stationary_points(0.0, 100.0, 0.5, 1e-9, spec)?;
        interlacing(&z, &s, spec)
    });
    match result {
        Ok(gaps) => {
            let bad = gaps.iter().filter(|g| !g.ok).count();
            check(
                name,
                bad == 0 && gaps.len() == 9,
                bad as f64,
                0.0,
                citation,
                format!("{} gaps, {bad} without exactly one matching extremum", gaps.len()),
            )
        }
        Err(e) => failed(name, 0.0, citation, e),
    }
}

fn pq_machinery(spec: &QuadratureSpec) -> Check {
    let name = "pq_decomposition";
    let citation = "p(y) -> G(0)/(pi y)";
    let g0 = match g_eval(0.0, &spec.series) {
        Ok(v) => v.value,
        Err(e) => return failed(name, 0.05, citation, e),
    };
    let mut rearranged = true;
    let mut positive = true;
    for y in [10.0, 30.0, 60.0, 100.0] {
        match (pq(y, None, spec), u_line(y, 0, spec)) {
            (Ok(v), Ok(u)) => {
                rearranged &= (v.diff - u.value).abs() <= v.quad_bound + v.tail_bound + u.bound;
                positive &= v.p > 0.0 && v.q > 0.0;
            }
            (Err(e), _) | (_, Err(e)) => return failed(name, 0.05, citation, e),
        }
    }
    let asymptote = |y: f64| pq(y, None, spec).map(|v| (PI * y * v.p / g0 - 1.0).abs());
    let (a100, a200) = match (asymptote(100.0), asymptote(200.0)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return failed(name, 0.05, citation, e),
    };
    let pass = rearranged && positive && a100 <= 0.05 && a200 < a100;
    check(
        name,
        pass,
        a100,
        0.05,
        citation,
        format!("p - q = u: {rearranged}, p, q > 0: {positive}, deviation at 200: {a200:.3e}"),
    )
}

fn cauchy_riemann(spec: &QuadratureSpec) -> Check {
    let name = "cauchy_riemann_residuals";
    let citation = "Cauchy-Riemann equations";
    let mut worst = 0.0f64;
    for z in cr_points() {
        match cr_check(z, 1e-4, spec) {
            Ok((a, b)) => worst = worst.max(a).max(b),
            Err(e) => return failed(name, 1e-6, citation, e),
        }
    }
    let mut ratios = Vec::new();
    for z in [Complex64::new(0.3, 12.0), Complex64::new(0.5, 3.0), Complex64::new(1.0, 1.0)] {
        match (cr_check(z, 1e-3, spec), cr_check(z, 5e-4, spec)) {
            (Ok(a), Ok(b)) => ratios.push(a.0.max(a.1) / b.0.max(b.1)),
            (Err(e), _) | (_, Err(e)) => return failed(name, 1e-6, citation, e),
        }
    }
    let decay = ratios.iter().all(|r| (3.0..=5.0).contains(r));
    let text: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    check(
        name,
        worst < 1e-6 && decay,
        worst,
        1e-6,
        citation,
        format!("h = 1e-4 at 10 points; halving ratios {}", text.join(" ")),
    )
}

/// The grid used for the off-line modulus floor.
pub fn strip_region() -> Region {
    Region {
        x_min: 0.05,
        ..Region::default()
    }
}

fn strip_map(spec: &QuadratureSpec) -> Check {
    let name = "strip_map_no_offline_zero";
    let citation = "no zero in the region |x| > 0";
    let region = strip_region();
    let grid = match sign_grid(&region, Field::V, spec) {
        Ok(g) => g,
        Err(e) => return failed(name, MIN_MODULUS_FLOOR, citation, e),
    };
    let Some(min) = min_modulus_of(&grid, 0.0) else {
        return failed(name, MIN_MODULUS_FLOOR, citation, "empty grid");
    };
    let curves = match trace_curves(&grid, 1e-10, &[], spec) {
        Ok(c) => c,
        Err(e) => return failed(name, MIN_MODULUS_FLOOR, citation, e),
    };
    let separated = curves.iter().all(|c| c.u_min_abs > 0.0);
    let anomalies = anomaly_scan(&curves, &grid);
    let pass = min.min_mod > MIN_MODULUS_FLOOR && separated && anomalies.is_empty();
    check(
        name,
        pass,
        min.min_mod,
        MIN_MODULUS_FLOOR,
        citation,
        format!(
            "argmin ({:.4}, {:.4}) bound {:.2e}; {} curves, u away from 0 on all: {separated}; {} anomalies",
            min.argmin.0,
            min.argmin.1,
            min.bound,
            curves.len(),
            anomalies.anomalies.len()
        ),
    )
}

/// Serialized output of a small grid and zero scan.
fn fingerprint(spec: &QuadratureSpec) -> Result<Vec<u8>, String> {
    let region = Region {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 20.0,
        y_max: 45.0,
        nx: 12,
        ny: 40,
    };
    let grid = sign_grid(&region, Field::V, spec).map_err(|e| e.to_string())?;
    let zeros = scan_zeros(0.0, 45.0, 0.5, 1e-8, spec).map_err(|e| e.to_string())?;
    let rows: Vec<ZeroRow> = zeros.iter().map(ZeroRow::from).collect();
    let mut out = serde_json::to_vec(&grid_rows(&grid)).map_err(|e| e.to_string())?;
    out.extend(serde_json::to_vec(&rows).map_err(|e| e.to_string())?);
    Ok(out)
}

fn determinism(spec: &QuadratureSpec) -> Check {
    let name = "thread_count_determinism";
    let citation = "reproducible output";
    let run_with = |threads: usize| -> Result<Vec<u8>, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| fingerprint(spec))
    };
    match (run_with(1), run_with(3)) {
        (Ok(a), Ok(b)) => {
            let mismatched = a.iter().zip(&b).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len());
            check(
                name,
                mismatched == 0,
                mismatched as f64,
                0.0,
                citation,
                format!("{} bytes compared across 1 and 3 threads", a.len()),
            )
        }
        (Err(e), _) | (_, Err(e)) => failed(name, 0.0, citation, e),
    }
}
