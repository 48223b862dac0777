mod common;

use common::{rng, unit};
use nalgebra::Vector3;
use omniwrench_core::apps::{
    gravity_force, interaction_feasibility_report, omni_acceleration, optimal_tilt_sweep, AppsError, DEFAULT_MAX_TILT,
};
use omniwrench_core::dynamics::{Frame, Wrench};
use omniwrench_core::model::{body_rotation, planar_quadrotor, tilted_hexarotor};
use omniwrench_core::strategies::attitude_full_tilt;
use omniwrench_core::wrenchset::{thrust_set, wrench_set_6d, WrenchSetQuery};
use std::f64::consts::TAU;

fn wrapped_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[test]
fn gravity_only_radius_is_facet_distance() {
    let model = tilted_hexarotor();
    let res = omni_acceleration(&model, &Vector3::zeros(), &gravity_force(&model), &Vector3::zeros()).unwrap();
    assert!(res.radius_n > 0.0);
    assert!((res.radius_mps2 * model.mass() - res.radius_n).abs() < 1e-12);
    // Sphere test against an independently built thrust set.
    let set = thrust_set(&model, &WrenchSetQuery::body(Vector3::zeros())).unwrap();
    let c = -gravity_force(&model);
    let mut g = rng(40);
    for _ in 0..2000 {
        let p = c + unit(&mut g) * (res.radius_n * (1.0 - 1e-9));
        assert!(set.contains(p.as_slice(), 1e-9));
    }
    let outside = (0..20_000).any(|_| {
        let p = c + unit(&mut g) * (res.radius_n * 1.01);
        !set.contains(p.as_slice(), 0.0)
    });
    assert!(outside);
}

#[test]
fn overload_gives_negative_radius() {
    let model = tilted_hexarotor();
    let huge = Vector3::new(0.0, 0.0, 1000.0);
    let res = omni_acceleration(&model, &Vector3::zeros(), &huge, &Vector3::zeros()).unwrap();
    assert!(res.radius_n < 0.0);
}

#[test]
fn boundary_center_has_zero_radius() {
    let model = tilted_hexarotor();
    let set = thrust_set(&model, &WrenchSetQuery::body(Vector3::zeros())).unwrap();
    // Pick a point on a facet: the midpoint of two vertices of that facet.
    let h = &set.halfspaces()[0];
    let on: Vec<&Vec<f64>> = set
        .vertices()
        .iter()
        .filter(|v| (v.iter().zip(&h.normal).map(|(a, b)| a * b).sum::<f64>() - h.offset).abs() < 1e-9 * set.scale())
        .collect();
    let p = Vector3::new((on[0][0] + on[1][0]) / 2.0, (on[0][1] + on[1][1]) / 2.0, (on[0][2] + on[1][2]) / 2.0);
    let res = omni_acceleration(&model, &Vector3::zeros(), &-p, &Vector3::zeros()).unwrap();
    assert!(res.radius_n.abs() < 1e-9 * set.scale());
}

#[test]
fn degenerate_thrust_set_rejected() {
    let model = planar_quadrotor();
    let err = omni_acceleration(&model, &Vector3::zeros(), &gravity_force(&model), &Vector3::zeros()).unwrap_err();
    assert_eq!(err, AppsError::DegenerateThrustSet(1));
}

#[test]
fn gravity_only_optimal_tilt_is_zero() {
    let model = tilted_hexarotor();
    let sweep = optimal_tilt_sweep(&model, &gravity_force(&model), 64, 32, DEFAULT_MAX_TILT).unwrap();
    assert!(sweep.best.tilt_rad <= sweep.tilt_step);
    assert_eq!(sweep.cells.len(), 1 + 64 * 32);
}

#[test]
fn wind_tilt_matches_full_tilt_equilibrium() {
    let model = tilted_hexarotor();
    for wind in [Vector3::new(10.0, 0.0, 0.0), Vector3::new(0.0, -10.0, 0.0), Vector3::new(6.0, 8.0, 0.0)] {
        let f_ext = gravity_force(&model) + wind;
        let sweep = optimal_tilt_sweep(&model, &f_ext, 128, 128, DEFAULT_MAX_TILT).unwrap();
        let eq = attitude_full_tilt(&-f_ext, 0.0).unwrap();
        assert!((eq.tilt() - (10.0 / (model.mass() * model.gravity())).atan()).abs() < 1e-12);
        assert!((sweep.best.tilt_rad - eq.tilt()).abs() <= sweep.tilt_step, "{} vs {}", sweep.best.tilt_rad, eq.tilt());
        // The thrust axis leans away from the wind.
        let k = eq.rotation.column(2);
        let dir = (-k[1]).atan2(-k[0]);
        assert!(wrapped_gap(sweep.best.tilt_dir_rad, dir) <= sweep.dir_step, "{} vs {dir}", sweep.best.tilt_dir_rad);
    }
}

#[test]
fn finer_grid_never_lowers_maximum() {
    let model = tilted_hexarotor();
    let f_ext = gravity_force(&model) + Vector3::new(7.0, 3.0, 0.0);
    let coarse = optimal_tilt_sweep(&model, &f_ext, 2, 8, DEFAULT_MAX_TILT).unwrap();
    let fine = optimal_tilt_sweep(&model, &f_ext, 128, 64, DEFAULT_MAX_TILT).unwrap();
    assert!(fine.best.radius_n >= coarse.best.radius_n);
}

#[test]
fn sweep_cells_match_direct_evaluation() {
    let model = tilted_hexarotor();
    let f_ext = gravity_force(&model) + Vector3::new(0.0, 5.0, 0.0);
    let sweep = optimal_tilt_sweep(&model, &f_ext, 8, 8, DEFAULT_MAX_TILT).unwrap();
    for c in sweep.cells.iter().step_by(7) {
        let direct = omni_acceleration(&model, &c.attitude, &f_ext, &Vector3::zeros()).unwrap();
        assert!((direct.radius_n - c.radius_n).abs() < 1e-9);
    }
    assert_eq!(optimal_tilt_sweep(&model, &f_ext, 1, 8, DEFAULT_MAX_TILT).unwrap_err(), AppsError::Grid { tilt: 1, dir: 8 });
    assert_eq!(optimal_tilt_sweep(&model, &f_ext, 8, 8, 2.0).unwrap_err(), AppsError::MaxTilt);
}

#[test]
fn interaction_report() {
    let model = tilted_hexarotor();
    let att = Vector3::zeros();
    let hover = model.hover_force(&att);
    let tasks = [
        Wrench { force: hover, moment: Vector3::zeros(), frame: Frame::Body },
        // Pull hard sideways.
        Wrench { force: hover + Vector3::new(0.0, 80.0, 0.0), moment: Vector3::zeros(), frame: Frame::Body },
        Wrench { force: Vector3::new(0.0, 0.0, -10.0), moment: Vector3::new(0.1, 0.0, 0.0), frame: Frame::Inertial },
    ];
    let report = interaction_feasibility_report(&model, &att, &tasks).unwrap();
    let set = wrench_set_6d(&model, &att).unwrap();
    assert!(report[0].feasible && report[0].margin > 0.0 && report[0].clipped.is_none());
    assert!(!report[1].feasible && report[1].margin < 0.0);
    let clip = report[1].clipped.unwrap();
    assert!(set.contains(&clip, 1e-9));
    assert!(set.inscribed_radius(&clip).unwrap().abs() < 1e-6 * set.scale());
    for e in &report {
        assert_eq!(e.feasible, e.margin >= 0.0);
    }
}

#[test]
fn inertial_requests_are_rotated() {
    let model = tilted_hexarotor();
    let att = Vector3::new(0.1, -0.2, 0.8);
    let w = Wrench { force: Vector3::new(3.0, -4.0, -50.0), moment: Vector3::new(0.1, 0.2, 0.0), frame: Frame::Inertial };
    let e = &interaction_feasibility_report(&model, &att, &[w]).unwrap()[0];
    let r_bi = body_rotation(att[0], att[1], att[2]).transpose();
    let f = r_bi * w.force;
    assert!((Vector3::new(e.wrench[0], e.wrench[1], e.wrench[2]) - f).norm() < 1e-12);
}
