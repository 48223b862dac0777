mod common;

use common::{random_attitude, random_command, rng, unit};
use nalgebra::{DVector, Matrix3, Vector3};
use omniwrench_core::control::{
    allocate, allocate_wrench, contact_frame, default_anchor, force_pid, hpfc_combine, hpfc_combine_contact, moment_for_euler_accel,
    saturate_priority, wrench_of, wrench_optimize, wrench_optimize_in, AccelSetpoint, AttitudeController, ControlError, ForceController,
    PidGains, PositionController, SelectionMatrices, WrenchOptimizer, WrenchPriority,
};
use omniwrench_core::dynamics::{derivatives, euler_rate_matrix, euler_rate_matrix_dot, total_wrench, Frame, VehicleState, Wrench};
use omniwrench_core::model::{body_rotation, octorotor, planar_quadrotor, tilted_hexarotor, MultirotorModel, RotorSpec};
use omniwrench_core::strategies::{attitude_fixed, attitude_zero_tilt};
use omniwrench_core::wrenchset::{apply_rotor_failure, wrench_set_6d};
use proptest::prelude::*;
use rand::Rng;

fn massless(model: &MultirotorModel) -> MultirotorModel {
    let rotors = model
        .rotors()
        .iter()
        .map(|r| RotorSpec { rotor_mass_kg: 0.0, leg_mass_kg: 0.0, ..r.clone() })
        .collect();
    model.with_rotors(rotors).unwrap()
}

fn in_bounds(model: &MultirotorModel, u: &DVector<f64>) -> bool {
    u.iter().zip(model.rotors()).all(|(x, r)| *x >= r.u_min && *x <= r.u_max)
}

fn random_state(g: &mut common::ChaCha8Rng) -> VehicleState {
    VehicleState::new(
        Vector3::new(g.gen_range(-5.0..5.0), g.gen_range(-5.0..5.0), g.gen_range(-5.0..0.0)),
        Vector3::new(g.gen_range(-2.0..2.0), g.gen_range(-2.0..2.0), g.gen_range(-2.0..2.0)),
        random_attitude(g, 1.0),
        Vector3::new(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)),
    )
    .unwrap()
}

fn output_accel(model: &MultirotorModel, s: &VehicleState, u: &DVector<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let d = derivatives(model, s, u).unwrap();
    let eta = euler_rate_matrix(&s.attitude).unwrap();
    let eta_dot = euler_rate_matrix_dot(&s.attitude, &s.attitude_rates().unwrap()).unwrap();
    (d.velocity_dot, eta_dot * s.body_rates + eta * d.body_rates_dot)
}

#[test]
fn position_pid_examples() {
    let model = planar_quadrotor();
    let s = VehicleState::at_rest(Vector3::new(1.0, 2.0, -3.0), 0.0);
    let mut pid = PositionController::new(PidGains::default_position());
    let f = pid.update(&model, &s, &s.position, &Vector3::zeros(), 0.01).unwrap();
    assert_eq!(f, Vector3::new(0.0, 0.0, -model.mass() * model.gravity()));
    let mut pid = PositionController::new(PidGains::default_position());
    let f = pid.update(&model, &s, &(s.position + Vector3::x() * 0.1), &Vector3::zeros(), 0.01).unwrap();
    assert!(f[0] > 0.0);
    assert_eq!(pid.update(&model, &s, &s.position, &Vector3::zeros(), 0.0), Err(ControlError::BadStep(0.0)));
}

#[test]
fn position_integrator_stays_bounded() {
    let model = planar_quadrotor();
    let s = VehicleState::at_rest(Vector3::zeros(), 0.0);
    let gains = PidGains::default_position();
    let mut pid = PositionController::new(gains);
    let far = Vector3::new(50.0, -50.0, 50.0);
    for _ in 0..10_000 {
        pid.update(&model, &s, &far, &Vector3::zeros(), 1e-3).unwrap();
        for k in 0..3 {
            assert!(pid.integral()[k].abs() <= gains.integral_limit[k]);
        }
    }
    // Without output limits the clamp alone bounds the state.
    let mut pid = PositionController::new(PidGains { output_limit: None, ..gains });
    for _ in 0..10_000 {
        pid.update(&model, &s, &far, &Vector3::zeros(), 1e-3).unwrap();
    }
    assert!((pid.integral()[0] - gains.integral_limit[0]).abs() < 1e-12);
    pid.reset();
    assert_eq!(pid.integral(), Vector3::zeros());
}

#[test]
fn attitude_pid_examples() {
    let s = VehicleState::at_rest(Vector3::zeros(), 0.0);
    let gains = PidGains::default_attitude();
    let mut pid = AttitudeController::new(gains);
    assert_eq!(pid.update(&s, &attitude_zero_tilt(0.0), 0.01).unwrap(), Vector3::zeros());
    let out = pid.update(&s, &attitude_zero_tilt(359f64.to_radians()), 0.01).unwrap();
    assert!(out[2] < 0.0);
    assert!((out[2] + gains.kp[2] * 1f64.to_radians()).abs() < 1e-9);
    let mut pid = AttitudeController::new(gains);
    let sp = attitude_fixed(0.02, -0.01, 0.0).unwrap();
    let out = pid.update(&s, &sp, 0.01).unwrap();
    assert_eq!(out[0], gains.kp[0] * 0.02);
    assert_eq!(out[1], gains.kp[1] * -0.01);
}

#[test]
fn allocate_quadrotor() {
    let model = planar_quadrotor();
    let s = VehicleState::at_rest(Vector3::zeros(), 0.0);
    let u = allocate(&model, &s, &AccelSetpoint { linear: Vector3::zeros(), euler: Vector3::zeros() }).unwrap();
    let hover = model.mass() * model.gravity() / (4.0 * model.rotors()[0].cf);
    assert!(u.iter().all(|x| (x - hover).abs() < 1e-9 * hover));
    // Pure yaw: rotors of one spin direction speed up, the others slow down.
    let u = allocate(&model, &s, &AccelSetpoint { linear: Vector3::zeros(), euler: Vector3::new(0.0, 0.0, 1.0) }).unwrap();
    let d: Vec<f64> = u.iter().map(|x| x - hover).collect();
    assert!((d[0] - d[2]).abs() < 1e-6 && (d[1] - d[3]).abs() < 1e-6);
    assert!(d[0] * d[1] < 0.0);
    let (lin, ang) = output_accel(&model, &s, &u);
    assert!(lin.norm() < 1e-9 && (ang - Vector3::z()).norm() < 1e-9);
    // Lateral acceleration at zero attitude is outside its range.
    let err = allocate(&model, &s, &AccelSetpoint { linear: Vector3::x(), euler: Vector3::zeros() }).unwrap_err();
    assert_eq!(err, ControlError::RankDeficient { rank: 4, needed: 6 });
}

#[test]
fn allocate_is_exact_for_hexarotor() {
    let model = tilted_hexarotor();
    let mut g = rng(30);
    for _ in 0..200 {
        let s = random_state(&mut g);
        let sp = AccelSetpoint { linear: unit(&mut g) * g.gen_range(0.0..5.0), euler: unit(&mut g) * g.gen_range(0.0..5.0) };
        let u = allocate(&model, &s, &sp).unwrap();
        let (lin, ang) = output_accel(&model, &s, &u);
        assert!((lin - sp.linear).norm() < 1e-9);
        assert!((ang - sp.euler).norm() < 1e-9);
    }
}

#[test]
fn allocate_min_norm_for_octorotor() {
    let model = octorotor();
    let mut g = rng(31);
    for _ in 0..50 {
        let s = random_state(&mut g);
        let sp = AccelSetpoint { linear: unit(&mut g), euler: unit(&mut g) };
        let u = allocate(&model, &s, &sp).unwrap();
        let (lin, ang) = output_accel(&model, &s, &u);
        assert!((lin - sp.linear).norm() < 1e-9 && (ang - sp.euler).norm() < 1e-9);
        // Minimum norm: orthogonal to the null space of the allocation matrix.
        let a = model.mixer().allocation();
        let svd = a.clone().svd(false, true);
        let v_t = svd.v_t.unwrap();
        assert_eq!(v_t.nrows(), 6);
        let proj = v_t.transpose() * (&v_t * &u);
        assert!((proj - &u).norm() < 1e-6 * u.norm().max(1.0));
    }
}

#[test]
fn moment_for_euler_accel_matches_dynamics() {
    let model = tilted_hexarotor();
    let mut g = rng(32);
    for _ in 0..100 {
        let s = random_state(&mut g);
        let target = unit(&mut g) * 3.0;
        let m = moment_for_euler_accel(&model, &s, &target).unwrap();
        let f = model.hover_force(&s.attitude);
        let alloc = allocate_wrench(&model, &s.attitude, &f, &m);
        let (_, ang) = output_accel(&model, &s, &alloc.u);
        assert!((ang - target).norm() < 1e-8, "{}", (ang - target).norm());
    }
}

#[test]
fn allocate_wrench_examples() {
    let model = massless(&tilted_hexarotor());
    let a = allocate_wrench(&model, &Vector3::zeros(), &Vector3::zeros(), &Vector3::zeros());
    assert_eq!(a.u, DVector::zeros(6));
    assert_eq!(a.rank, 6);
    let quad = planar_quadrotor();
    let a = allocate_wrench(&quad, &Vector3::zeros(), &Vector3::new(5.0, 0.0, -10.0), &Vector3::zeros());
    assert!((a.residual - 5.0).abs() < 1e-9);
    assert_eq!(a.rank, 4);
}

#[test]
fn allocate_wrench_round_trip() {
    let mut g = rng(33);
    for model in [tilted_hexarotor(), octorotor()] {
        for _ in 0..200 {
            let att = random_attitude(&mut g, 0.8);
            let u0 = random_command(&model, &mut g);
            let w = total_wrench(&model, &att, &u0);
            let a = allocate_wrench(&model, &att, &w.force, &w.moment);
            let back = total_wrench(&model, &att, &a.u);
            assert!((back.force - w.force).norm() < 1e-9 * (1.0 + w.force.norm()));
            assert!((back.moment - w.moment).norm() < 1e-9 * (1.0 + w.moment.norm()));
            assert!(a.residual < 1e-8);
        }
    }
}

#[test]
fn allocate_wrench_respects_bounds_when_possible() {
    // Lateral thrust on the octorotor needs one auxiliary rotor, not a
    // push-pull pair.
    let model = octorotor();
    let f = Vector3::new(0.0, 6.75, -model.mass() * model.gravity());
    let a = allocate_wrench(&model, &Vector3::zeros(), &f, &Vector3::zeros());
    assert!(in_bounds(&model, &a.u));
    assert!(a.residual < 1e-9);
}

#[test]
fn failed_rotor_stays_off() {
    let model = apply_rotor_failure(&octorotor(), 4).unwrap();
    let f = Vector3::new(3.0, 1.0, -40.0);
    let a = allocate_wrench(&model, &Vector3::zeros(), &f, &Vector3::new(0.1, 0.0, 0.0));
    assert_eq!(a.u[4], 0.0);
    assert!(a.residual < 1e-9);
}

#[test]
fn saturate_identity_in_bounds() {
    let model = tilted_hexarotor();
    let mut g = rng(34);
    for _ in 0..50 {
        let u = random_command(&model, &mut g);
        assert_eq!(saturate_priority(&model, &u), u);
    }
}

#[test]
fn saturate_keeps_roll_moment() {
    let model = tilted_hexarotor();
    let att = Vector3::zeros();
    let f = Vector3::new(0.0, 0.0, -150.0);
    let m = Vector3::new(2.0, 0.0, 0.0);
    let u = allocate_wrench(&model, &att, &f, &m).u;
    assert!(!in_bounds(&model, &u));
    let out = saturate_priority(&model, &u);
    assert!(in_bounds(&model, &out));
    let w = total_wrench(&model, &att, &out);
    assert!((w.moment[0] - m[0]).abs() < 1e-9);
    assert!(w.moment[1].abs() < 1e-9);
    assert!(w.force[2] > f[2] && w.force[2] < 0.0);
}

#[test]
fn saturate_all_failed_is_zero() {
    let mut model = tilted_hexarotor();
    for i in 0..6 {
        model = apply_rotor_failure(&model, i).unwrap();
    }
    let out = saturate_priority(&model, &DVector::from_element(6, 1.0e5));
    assert_eq!(out, DVector::zeros(6));
}

#[test]
fn selection_matrices() {
    let sel = SelectionMatrices::natural([false, false, true], Matrix3::identity());
    assert_eq!(sel.s_f, Matrix3::from_diagonal(&Vector3::new(0.0, 0.0, 1.0)));
    assert_eq!(sel.s_p + sel.s_f, Matrix3::identity());
    assert_eq!(sel.s_p.component_mul(&sel.s_f), Matrix3::zeros());
    sel.validate().unwrap();
    let overlap = SelectionMatrices { s_p: Matrix3::identity(), ..sel };
    assert!(matches!(overlap.validate(), Err(ControlError::Selection(_))));
    let half = SelectionMatrices { s_f: Matrix3::identity() * 0.5, s_p: Matrix3::zeros(), ..sel };
    assert!(matches!(half.validate(), Err(ControlError::Selection(_))));
    let skew = SelectionMatrices { contact_rotation: Matrix3::identity() * 2.0, ..sel };
    assert!(matches!(skew.validate(), Err(ControlError::Selection(_))));
}

#[test]
fn hpfc_examples() {
    let p = Vector3::new(1.0, 2.0, 3.0);
    let f = Vector3::new(-4.0, -5.0, -6.0);
    let sel = SelectionMatrices::natural([false, false, true], Matrix3::identity());
    assert_eq!(hpfc_combine(&p, &f, &sel).unwrap(), Vector3::new(1.0, 2.0, -6.0));
    let pure = SelectionMatrices::natural([false; 3], Matrix3::identity());
    assert_eq!(hpfc_combine(&p, &f, &pure).unwrap(), p);
    // Wall facing -x: the force axis is inertial +x.
    let r_ic = contact_frame(&Vector3::new(-1.0, 0.0, 0.0));
    assert!((r_ic.column(2) - Vector3::x()).norm() < 1e-15);
    let sel = SelectionMatrices::natural([false, false, true], r_ic);
    let out = hpfc_combine(&p, &f, &sel).unwrap();
    assert!((out - Vector3::new(-4.0, 2.0, 3.0)).norm() < 1e-12);
    let c = hpfc_combine_contact(&p, &f, &sel).unwrap();
    assert_eq!(c, Vector3::new(1.0, 2.0, -6.0));
}

#[test]
fn contact_frame_is_rotation() {
    let mut g = rng(35);
    for _ in 0..200 {
        let n = unit(&mut g);
        let r = contact_frame(&n);
        assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        assert!((r.column(2) + n).norm() < 1e-12);
    }
}

#[test]
fn force_pid_examples() {
    let gains = PidGains::default_force();
    let id = Matrix3::identity();
    let last = Vector3::new(0.5, -0.2, 3.0);
    let d = Vector3::new(0.0, 0.0, 5.0);
    let out = force_pid(&d, &d, &id, &id, &gains, 0.01, &last).unwrap();
    assert_eq!(out, last);
    let mut c = ForceController::new(gains);
    c.engage(Vector3::zeros());
    let measured = Vector3::new(0.0, 0.0, 4.0);
    let mut prev = 0.0;
    for k in 0..20 {
        let out = c.update(&measured, &d, &id, &id, 0.01).unwrap();
        assert!(out[2] > prev);
        if k > 0 {
            // Steady error: each step adds ki * e * dt.
            assert!((out[2] - prev - gains.ki[2] * 0.01).abs() < 1e-12);
        }
        prev = out[2];
    }
}

#[test]
fn force_pid_frames() {
    let gains = PidGains::default_force();
    let r_ic = contact_frame(&Vector3::new(-1.0, 0.0, 0.0));
    let r_ie = body_rotation(0.1, -0.05, 0.3);
    // Tool pushes 4 N along the wall normal (inertial +x), seen from the body.
    let measured_ee = r_ie.transpose() * Vector3::new(4.0, 0.0, 0.0);
    let d = Vector3::new(0.0, 0.0, 5.0);
    let out = force_pid(&measured_ee, &d, &r_ic, &r_ie, &gains, 0.01, &Vector3::zeros()).unwrap();
    let expected_c = Vector3::new(0.0, 0.0, gains.kp[2] * 1.0 + gains.ki[2] * 1.0 * 0.01);
    assert!((out - r_ic * expected_c).norm() < 1e-12);
}

#[test]
fn optimizer_passes_feasible_requests() {
    let model = tilted_hexarotor();
    let mut g = rng(36);
    let att = Vector3::new(0.1, 0.0, 0.2);
    for _ in 0..50 {
        let w = wrench_of(&model, &att, &random_command(&model, &mut g));
        let out = wrench_optimize(&model, &att, &w.force, &w.moment, None, WrenchPriority::PreserveMoment).unwrap();
        assert!(!out.changed);
        assert_eq!(out.force, w.force);
        assert_eq!(out.moment, w.moment);
    }
}

#[test]
fn optimizer_returns_feasible_wrenches() {
    let model = tilted_hexarotor();
    let att = Vector3::new(0.1, -0.1, 0.0);
    let set = wrench_set_6d(&model, &att).unwrap();
    let anchor = default_anchor(&model, &att, &set);
    let mut g = rng(37);
    for _ in 0..200 {
        let f = unit(&mut g) * g.gen_range(50.0..300.0);
        let m = unit(&mut g) * g.gen_range(0.0..3.0);
        for p in [WrenchPriority::PreserveMoment, WrenchPriority::PreserveDirection] {
            let out = wrench_optimize_in(&set, &anchor, &f, &m, p).unwrap();
            let w = [out.force[0], out.force[1], out.force[2], out.moment[0], out.moment[1], out.moment[2]];
            assert!(set.contains(&w, 1e-6));
            if p == WrenchPriority::PreserveMoment && out.moment_preserved {
                assert_eq!(out.moment, m);
            }
            // Idempotent.
            let again = wrench_optimize_in(&set, &anchor, &out.force, &out.moment, p).unwrap();
            assert!(!again.changed);
        }
    }
}

#[test]
fn optimizer_anchor_errors() {
    let model = tilted_hexarotor();
    let att = Vector3::zeros();
    let outside = Wrench { force: Vector3::new(0.0, 0.0, 500.0), moment: Vector3::zeros(), frame: Frame::Body };
    let f = Vector3::new(0.0, 0.0, -500.0);
    let err = wrench_optimize(&model, &att, &f, &Vector3::zeros(), Some(&outside), WrenchPriority::PreserveDirection).unwrap_err();
    assert_eq!(err, ControlError::AnchorInfeasible);
}

#[test]
fn cached_optimizer_matches_one_shot() {
    let model = tilted_hexarotor();
    let att = Vector3::new(0.05, 0.02, 1.0);
    let mut opt = WrenchOptimizer::new(WrenchPriority::PreserveMoment);
    let f = Vector3::new(20.0, 0.0, -90.0);
    let m = Vector3::new(0.3, 0.0, 0.1);
    let a = opt.optimize(&model, &att, &f, &m).unwrap();
    let b = wrench_optimize(&model, &att, &f, &m, None, WrenchPriority::PreserveMoment).unwrap();
    assert!((a.force - b.force).norm() < 1e-9 * 100.0);
    assert_eq!(a.moment, b.moment);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn saturation_always_in_bounds(scale in 0.0f64..3.0, m in prop::array::uniform3(-20.0f64..20.0), fx in -50.0f64..50.0) {
        let model = tilted_hexarotor();
        let f = Vector3::new(fx, 0.0, -60.0 * scale);
        let u = allocate_wrench(&model, &Vector3::zeros(), &f, &Vector3::from(m)).u;
        let out = saturate_priority(&model, &u);
        prop_assert!(in_bounds(&model, &out));
    }

    #[test]
    fn hpfc_parts_are_orthogonal(p in prop::array::uniform3(-10.0f64..10.0), f in prop::array::uniform3(-10.0f64..10.0), axes in prop::array::uniform3(any::<bool>())) {
        let sel = SelectionMatrices::natural(axes, Matrix3::identity());
        prop_assert_eq!((sel.s_p * Vector3::from(p)).dot(&(sel.s_f * Vector3::from(f))), 0.0);
    }
}
