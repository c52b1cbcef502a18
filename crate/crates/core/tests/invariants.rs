use num_complex::Complex64;
use proptest::prelude::*;
use xilab::critical_line::{pq, refine_root, u_line};
use xilab::eta_integral::{cutoff_t, eta, integrand_bound, uv, xi_oracle, QuadratureSpec, Route};
use xilab::strip_mapper::{sign_grid, Field, Region};
use xilab::theta_series::{g_deriv, g_eval, g_tau_form, g_term_ratio, TruncationPolicy, RATIO_BOUND};

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conjugate_and_reflection_symmetry(x in -1.5f64..1.5, y in -80.0f64..80.0) {
        let s = spec();
        let z = Complex64::new(x, y);
        let a = eta(z, &s, Route::ViaG).unwrap();
        let b = eta(z.conj(), &s, Route::ViaG).unwrap();
        let c = eta(-z, &s, Route::ViaG).unwrap();
        prop_assert!((b.value - a.value.conj()).norm() <= 2.0 * s.tol);
        prop_assert!((c.value - a.value).norm() <= 2.0 * s.tol);
    }

    #[test]
    fn routes_agree_within_bounds(x in -1.0f64..1.0, y in -60.0f64..60.0) {
        let s = spec();
        let z = Complex64::new(x, y);
        let g = eta(z, &s, Route::ViaG).unwrap();
        let f = eta(z, &s, Route::ViaF).unwrap();
        let o = xi_oracle((z + 1.0) / 2.0, &s).unwrap();
        prop_assert!((g.value - o.value).norm() <= g.abs_error_bound + o.abs_error_bound);
        prop_assert!((f.value - o.value).norm() <= f.abs_error_bound + o.abs_error_bound);
    }

    #[test]
    fn real_axis_positive(x in 0.0f64..1.0) {
        prop_assert!(uv(x, 0.0, &spec()).unwrap().u.value > 0.0);
    }

    #[test]
    fn bound_covers_refinement(x in -1.0f64..1.0, y in 0.0f64..120.0) {
        let coarse = spec();
        let fine = QuadratureSpec { panel_width: 0.02, max_panels: 1 << 16, ..coarse };
        let a = eta(Complex64::new(x, y), &coarse, Route::ViaG).unwrap();
        let b = eta(Complex64::new(x, y), &fine, Route::ViaG).unwrap();
        prop_assert!((a.value - b.value).norm() <= a.abs_error_bound + b.abs_error_bound);
    }

    #[test]
    fn g_even_and_routes(t in 0.0f64..0.6) {
        let p = TruncationPolicy::default();
        let a = g_eval(t, &p).unwrap().value;
        prop_assert!((g_eval(-t, &p).unwrap().value - a).abs() <= 1e-10);
        prop_assert!((g_tau_form(t, &p).unwrap().value - a).abs() <= 1e-10);
    }

    #[test]
    fn g_signs(t in 1e-3f64..1.5) {
        let p = TruncationPolicy::default();
        let g = g_eval(t, &p).unwrap().value;
        let g1 = g_deriv(t, 1, &p).unwrap().value;
        // past t ≈ 1.4 the leading term e^{t − πe^{4t}} underflows binary64
        let underflows = t - std::f64::consts::PI * (4.0 * t).exp() < f64::MIN_POSITIVE.ln() + 20.0;
        prop_assert!(g > 0.0 || (underflows && g == 0.0));
        prop_assert!(g1 < 0.0 || (underflows && g1 == 0.0));
    }

    #[test]
    fn term_ratio_below_constant(t in 0.0f64..1.5, n in 1usize..8) {
        prop_assert!(g_term_ratio(t, n) <= RATIO_BOUND);
    }

    #[test]
    fn cutoff_tail_is_below_half_tol(x in 0.0f64..2.0, exp in 2i32..40) {
        let tol = 10f64.powi(-exp);
        let t = cutoff_t(x, tol).unwrap();
        // trapezoid over a fine grid past the cutoff, where the bound decays monotonically
        let h = 1e-3;
        let tail: f64 = (0..2000).map(|k| integrand_bound(t + (k as f64 + 0.5) * h, x) * h).sum();
        prop_assert!(tail < 0.5 * tol);
    }

    #[test]
    fn pq_positive_and_exact(y in 10.0f64..200.0) {
        let s = spec();
        let v = pq(y, None, &s).unwrap();
        let u = u_line(y, 0, &s).unwrap();
        prop_assert!(v.p > 0.0 && v.q > 0.0);
        prop_assert_eq!(v.diff, v.p - v.q);
        prop_assert!((v.diff - u.value).abs() <= v.quad_bound + v.tail_bound + u.bound);
    }

    #[test]
    fn refine_root_finds_cubic_roots(r in -5.0f64..5.0, k in 0.1f64..10.0) {
        let f = |x: f64| Ok(k * (x - r) * ((x - r) * (x - r) + 1.0));
        let x = refine_root(f, (r - 3.0, r + 7.0), 1e-12).unwrap();
        prop_assert!((x - r).abs() < 1e-11);
    }
}

#[test]
fn sign_band_soundness_and_edges() {
    let s = spec();
    let region = Region {
        x_min: 0.0,
        x_max: 1.0,
        y_min: 0.0,
        y_max: 60.0,
        nx: 16,
        ny: 48,
    };
    let g = sign_grid(&region, Field::V, &s).unwrap();
    for j in 0..region.ny {
        for i in 0..region.nx {
            let (v, b) = (g.v[j][i], g.bounds[j][i]);
            match g.signs[j][i] {
                0 => assert!(v.abs() <= b),
                1 => assert!(v > b),
                _ => assert!(v < -b),
            }
            if region.x(i) == 0.0 || region.y(j) == 0.0 {
                assert_eq!(v, 0.0);
            }
            // small |u| and |v| together only next to the line
            if g.u[j][i].abs() < 10.0 * b && v.abs() < 10.0 * b {
                assert!(i <= 1);
            }
        }
    }
}

#[test]
fn cr_residual_decays_quadratically() {
    let s = spec();
    let z = Complex64::new(0.3, 12.0);
    let (a1, b1) = xilab::eta_integral::cr_check(z, 1e-3, &s).unwrap();
    let (a2, b2) = xilab::eta_integral::cr_check(z, 5e-4, &s).unwrap();
    let ratio = a1.max(b1) / a2.max(b2);
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
}
