//! Integrator, residual, reparametrization and shooting consistency.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use common::immersion;
use eqmanifold_core::charts::{FlatPlane, SphereChart};
use eqmanifold_core::expr::CurveExpression;
use eqmanifold_core::geodesic::{
    geodesic_bvp, geodesic_ivp, geodesic_residual, BvpOptions, Geometry, LineCurve, ParamCurve, SampledCurve,
    TimeWarp, DEFAULT_STEP,
};
use nalgebra::DVector;

fn sphere() -> Geometry {
    Geometry::new(Arc::new(SphereChart::default()))
}

/// Great circle through the equator point `(π/2, 0)` tilted by `tilt`
/// towards the poles, at unit speed.
fn tilted_velocity(tilt: f64) -> Vec<f64> {
    vec![-tilt.sin(), tilt.cos()]
}

fn interior_grid(traj_times: &[f64], skip: usize) -> Vec<f64> {
    traj_times[skip..traj_times.len() - skip].to_vec()
}

#[test]
fn metric_speed_is_conserved_at_the_default_step() {
    let geom = sphere();
    for tilt in [0.0, 0.3, 0.7] {
        let traj = geodesic_ivp(&geom, &[FRAC_PI_2, 0.0], &tilted_velocity(tilt), 1.0, DEFAULT_STEP).unwrap();
        assert!(!traj.exited_domain);
        let drift = traj.energy_drift(&geom).unwrap();
        assert!(drift <= 1e-6, "tilt {tilt}: drift {drift:e}");
    }
    let l4 = Geometry::new(immersion("analytic_l4.json"));
    let traj = geodesic_ivp(&l4, &[0.0, 0.2, -0.1, 0.3], &[0.3, 0.5, -0.2, 0.1], 1.0, DEFAULT_STEP).unwrap();
    let drift = traj.energy_drift(&l4).unwrap();
    assert!(drift <= 1e-6, "L = 4 drift {drift:e}");
}

#[test]
fn times_increase_and_states_stay_in_the_domain() {
    let geom = sphere();
    let traj = geodesic_ivp(&geom, &[FRAC_PI_2, 0.0], &tilted_velocity(0.5), 2.0, 0.01).unwrap();
    for w in traj.states.windows(2) {
        assert!(w[1].time > w[0].time);
    }
    for s in &traj.states {
        assert!(geom.domain().contains(&s.x));
    }
    // A path aimed at the pole leaves the chart and is flagged.
    let out = geodesic_ivp(&geom, &[FRAC_PI_2, 0.0], &[-1.0, 0.0], 3.0, 0.01).unwrap();
    assert!(out.exited_domain);
    assert!(out.last().time < 3.0);
}

#[test]
fn integrated_paths_pass_the_residual_oracle() {
    let geom = sphere();
    let traj = geodesic_ivp(&geom, &[FRAC_PI_2, 0.0], &tilted_velocity(0.4), 1.0, DEFAULT_STEP).unwrap();
    let curve = SampledCurve::from_trajectory(&traj).unwrap();
    let times: Vec<f64> = traj.states.iter().map(|s| s.time).collect();
    let report = geodesic_residual(&geom, &curve, &interior_grid(&times, 2)).unwrap();
    assert!(report.max_normal <= 1e-5, "max normal {:e}", report.max_normal);
    for k in 0..report.grid.len() {
        let split = report.normal[k].powi(2) + report.tangential[k].powi(2);
        assert!((report.total[k].powi(2) - split).abs() <= 1e-10 * report.total[k].powi(2).max(1.0));
    }
}

#[test]
fn quadratic_time_warp_keeps_the_verdict() {
    let geom = sphere();
    let warp = CurveExpression::parse("t + 0.3*t^2").unwrap();
    let grid: Vec<f64> = (0..=50).map(|i| 0.02 * i as f64).collect();
    // A meridian is a geodesic, a line of latitude is not.
    let meridian: Arc<dyn ParamCurve> = Arc::new(LineCurve::new(vec![0.4, 0.2], vec![1.0, 0.0]));
    let latitude: Arc<dyn ParamCurve> = Arc::new(LineCurve::new(vec![0.8, 0.0], vec![0.0, 1.0]));
    for (curve, geodesic) in [(meridian, true), (latitude, false)] {
        let plain = geodesic_residual(&geom, curve.as_ref(), &grid).unwrap();
        let warped = geodesic_residual(&geom, &TimeWarp::new(curve.clone(), warp.clone()), &grid).unwrap();
        assert_eq!(plain.is_pregeodesic(1e-8), geodesic);
        assert_eq!(warped.is_pregeodesic(1e-8), geodesic);
        if geodesic {
            assert!((plain.max_normal - warped.max_normal).abs() <= 1e-6);
        }
    }
}

#[test]
fn shooting_velocity_reproduces_the_endpoint() {
    let geom = sphere();
    let (a, b) = ([1.2, -0.3], [1.9, 0.8]);
    let sol = geodesic_bvp(&geom, &a, &b, None, BvpOptions::default()).unwrap();
    let again = geodesic_ivp(&geom, &a, &sol.initial_velocity, 1.0, BvpOptions::default().step).unwrap();
    let miss = (DVector::from_column_slice(&again.last().x) - DVector::from_column_slice(&b)).norm();
    assert!(miss <= 1e-7, "endpoint miss {miss:e}");
}

#[test]
fn reference_lengths() {
    let plane = Geometry::new(Arc::new(FlatPlane::default()));
    let sol = geodesic_bvp(&plane, &[0.0, 0.0], &[1.0, 2.0], None, BvpOptions::default()).unwrap();
    assert!((sol.length - 5f64.sqrt()).abs() <= 1e-8, "plane length {}", sol.length);

    let sphere = sphere();
    let sol = geodesic_bvp(&sphere, &[FRAC_PI_2, 0.0], &[FRAC_PI_2, FRAC_PI_2], None, BvpOptions::default()).unwrap();
    assert!((sol.length - PI / 2.0).abs() <= 1e-6, "quarter equator {}", sol.length);
    for s in &sol.trajectory.states {
        assert!((s.x[0] - FRAC_PI_2).abs() <= 1e-9, "left the equator");
    }
}

#[test]
fn flat_manifold_geodesics_are_ambient_segments() {
    for name in ["identical_cd.json", "constant_price.json"] {
        let f = immersion(name);
        let geom = Geometry::new(f.clone());
        let (a, b) = ([0.2, -1.0], [0.8, 1.5]);
        let sol = geodesic_bvp(&geom, &a, &b, None, BvpOptions::default()).unwrap();
        let chord = (DVector::from_vec(f.eval(&b)) - DVector::from_vec(f.eval(&a))).norm();
        assert!((sol.length - chord).abs() <= 1e-6, "{name}: {} vs {chord}", sol.length);
    }
}
