//! Closed-form connection of the equilibrium manifold against the generic
//! metric-derived one, and the geodesic facts it implies.

mod common;

use std::sync::Arc;

use common::{random_point, subject};
use eqmanifold_core::diffgeo::{christoffel_from_metric, DerivativeEngine, Immersion};
use eqmanifold_core::fgp::Subject;
use eqmanifold_core::geodesic::{geodesic_residual, Geometry};
use eqmanifold_core::manifolds::{alpha_line, AnalyticCurve, EquilibriumManifold, DEFAULT_ALPHA_RANGE};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn manifold(name: &str) -> EquilibriumManifold {
    match subject(name) {
        Subject::Equilibrium { manifold, .. } => manifold,
        _ => panic!("{name} is not an equilibrium manifold"),
    }
}

fn analytic(p: &[&str], w: &str, t: (f64, f64)) -> EquilibriumManifold {
    EquilibriumManifold::assemble(Arc::new(AnalyticCurve::parse(p, w, t).unwrap()), DEFAULT_ALPHA_RANGE).unwrap()
}

/// Manifolds with the flag set are also held to 1e-6 against the
/// central-difference engine; the steep CES curve is held to exact derivatives
/// only, plus second-order convergence of the stencil.
fn registered() -> Vec<(&'static str, EquilibriumManifold, bool)> {
    vec![
        ("L=2 analytic", analytic(&["2 + 0.5*sin(3*t)"], "t^2 + exp(t)", (0.0, 1.0)), true),
        ("L=2 economy", manifold("hetero_cd.json"), true),
        ("L=2 CES economy", manifold("ces_mirror.json"), false),
        ("L=4 analytic", manifold("analytic_l4.json"), true),
    ]
}

#[test]
fn closed_form_matches_metric_derived_symbols() {
    for (label, m, stencil) in registered() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dim = m.dim_param();
        for _ in 0..100 {
            let x = random_point(&m, &mut rng, 0.01);
            let closed = m.closed_form_christoffel(&x).unwrap();
            let dual = christoffel_from_metric(&m, &x, DerivativeEngine::Dual).unwrap();
            let d = closed.relative_discrepancy(&dual);
            assert!(d <= 1e-6, "{label} at {x:?} (dual): {d:e}");
            let cd = |step: f64| {
                let n = christoffel_from_metric(&m, &x, DerivativeEngine::CentralDifference { step }).unwrap();
                closed.relative_discrepancy(&n)
            };
            let d = cd(1e-5);
            if stencil {
                assert!(d <= 1e-6, "{label} at {x:?} (central difference): {d:e}");
            } else {
                let coarse = cd(1e-4);
                assert!(d <= 1e-6 || d <= 0.02 * coarse, "{label} at {x:?}: {coarse:e} → {d:e}");
            }
            for k in 0..dim {
                for i in 0..dim {
                    for j in 0..dim {
                        if k == 0 && i == 0 && j == 0 {
                            continue;
                        }
                        // Γ^0_ij with i, j ≥ 1 and Γ^k_ij with i, j ≥ 1.
                        if i >= 1 && j >= 1 {
                            assert_eq!(closed.get(k, i, j), 0.0, "{label}: Γ^{k}_{i}{j}");
                            assert!(dual.get(k, i, j).abs() <= 1e-7, "{label}: numeric Γ^{k}_{i}{j}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn unit_speed_t_curve_satisfies_the_arc_length_identity() {
    // p = 2 + sin t, w = −cos t: along α = 0, B + A² = cos² + sin² = 1.
    let m = analytic(&["2 + sin(t)"], "-cos(t)", (-1.0, 1.0));
    for i in 0..=200 {
        let t = -1.0 + 0.01 * i as f64;
        let b = m.boxed(&[t, 0.0]).unwrap();
        assert!((b.b + b.a * b.a - 1.0).abs() <= 1e-12, "not unit speed at {t}");
        assert!((b.c + b.a * b.a_prime).abs() <= 1e-8, "C + AA′ = {:e} at {t}", b.c + b.a * b.a_prime);
    }
}

#[test]
fn alpha_lines_on_every_fixture_are_geodesics() {
    for name in ["identical_cd.json", "hetero_cd.json", "ces_mirror.json", "linear_price.json", "analytic_l4.json"] {
        let m = manifold(name);
        let geom = Geometry::new(Arc::new(m.clone())).with_engine(DerivativeEngine::Dual);
        let (lo, hi) = m.domain().bounds[0];
        let t = 0.3 * lo + 0.7 * hi;
        for j in 0..m.dim_param() - 1 {
            let mut base = vec![0.0; m.dim_param() - 1];
            base[j] = -1.5;
            let grid: Vec<f64> = (0..=30).map(|i| 0.1 * i as f64).collect();
            let r = geodesic_residual(&geom, &alpha_line(t, &base, j), &grid).unwrap();
            assert!(r.max_normal <= 1e-8, "{name} α_{j}: {:e}", r.max_normal);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn alpha_lines_are_geodesics_for_any_curve(
        a in 1.0f64..3.0, b in -0.9f64..0.9, c in 0.1f64..2.0, d in -1.0f64..1.0,
        t in 0.05f64..0.95, start in -1.5f64..0.0, shift in -1.0f64..1.0,
    ) {
        let p1 = format!("{a} + {b}*sin({c}*t)");
        let p2 = format!("{a} + {b}*t^2");
        let w = format!("{d}*t^3 + exp({d}*t)");
        let m = analytic(&[&p1, &p2], &w, (0.0, 1.0));
        let geom = Geometry::new(Arc::new(m)).with_engine(DerivativeEngine::Dual);
        for j in 0..2 {
            let mut base = vec![shift, shift];
            base[j] = start;
            let grid: Vec<f64> = (0..=10).map(|i| 0.15 * i as f64).collect();
            let r = geodesic_residual(&geom, &alpha_line(t, &base, j), &grid).unwrap();
            prop_assert!(r.max_normal <= 1e-8, "α_{} residual {:e}", j, r.max_normal);
        }
    }
}
