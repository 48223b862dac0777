//! Equations of motion, Euler-rate kinematics, RK4 integration and a penalty
//! contact model.

use core::f64::consts::FRAC_PI_2;
use nalgebra::{DVector, Matrix3, Vector3};
#[allow(unused_imports)] // float math without std
use num_traits::Float;

use crate::model::{body_rotation, gravity_moment, wrap_angle, MultirotorModel};

/// Margin kept from the pitch singularity.
pub const PITCH_GUARD: f64 = 1e-6;
pub const MAX_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("pitch {0} rad too close to the Euler singularity")]
    SingularPitch(f64),
    #[error("attitude left the valid range during RK4 stage {stage}: {attitude:?}")]
    AttitudeRange { stage: usize, attitude: [f64; 3] },
    #[error("state has non-finite components")]
    NonFinite,
    #[error("command has {got} entries, model has {expected} rotors")]
    CommandLength { got: usize, expected: usize },
    #[error("time step {0} outside (0, 0.05]")]
    BadStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Roll, pitch, yaw.
    pub attitude: Vector3<f64>,
    pub body_rates: Vector3<f64>,
}

impl VehicleState {
    pub fn new(
        position: Vector3<f64>,
        velocity: Vector3<f64>,
        attitude: Vector3<f64>,
        body_rates: Vector3<f64>,
    ) -> Result<Self, DynamicsError> {
        let s = Self { position, velocity, attitude, body_rates };
        s.checked()
    }

    pub fn at_rest(position: Vector3<f64>, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            attitude: Vector3::new(0.0, 0.0, wrap_angle(yaw)),
            body_rates: Vector3::zeros(),
        }
    }

    fn is_finite(&self) -> bool {
        self.position.iter().chain(self.velocity.iter()).chain(self.attitude.iter()).chain(self.body_rates.iter()).all(|x| x.is_finite())
    }

    fn checked(mut self) -> Result<Self, DynamicsError> {
        if !self.is_finite() {
            return Err(DynamicsError::NonFinite);
        }
        if self.attitude[0].abs() >= FRAC_PI_2 || self.attitude[1].abs() >= FRAC_PI_2 {
            return Err(DynamicsError::AttitudeRange { stage: 0, attitude: self.attitude.into() });
        }
        self.attitude[2] = wrap_angle(self.attitude[2]);
        Ok(self)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        body_rotation(self.attitude[0], self.attitude[1], self.attitude[2])
    }

    /// Euler angle rates.
    pub fn attitude_rates(&self) -> Result<Vector3<f64>, DynamicsError> {
        Ok(euler_rate_matrix(&self.attitude)? * self.body_rates)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Frame {
    Body,
    Inertial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
    pub frame: Frame,
}

impl Wrench {
    pub fn zero(frame: Frame) -> Self {
        Self { force: Vector3::zeros(), moment: Vector3::zeros(), frame }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.force[0], self.force[1], self.force[2], self.moment[0], self.moment[1], self.moment[2]]
    }

    pub fn from_slice(w: &[f64], frame: Frame) -> Self {
        Self { force: Vector3::new(w[0], w[1], w[2]), moment: Vector3::new(w[3], w[4], w[5]), frame }
    }
}

/// Disturbances acting on the vehicle besides thrust and weight.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExternalWrench {
    pub force_inertial: Vector3<f64>,
    pub moment_body: Vector3<f64>,
}

/// Forward map `omega = W(Phi) * Phi_dot`.
pub fn euler_rate_forward(attitude: &Vector3<f64>) -> Matrix3<f64> {
    let (sf, cf) = attitude[0].sin_cos();
    let (st, ct) = attitude[1].sin_cos();
    Matrix3::new(1.0, 0.0, -st, 0.0, cf, sf * ct, 0.0, -sf, cf * ct)
}

fn pitch_guard(attitude: &Vector3<f64>) -> Result<(), DynamicsError> {
    if !(attitude[1].abs() < FRAC_PI_2 - PITCH_GUARD) {
        return Err(DynamicsError::SingularPitch(attitude[1]));
    }
    Ok(())
}

/// `eta(Phi)` with `Phi_dot = eta * omega`; the exact inverse of the forward map.
pub fn euler_rate_matrix(attitude: &Vector3<f64>) -> Result<Matrix3<f64>, DynamicsError> {
    pitch_guard(attitude)?;
    let (sf, cf) = attitude[0].sin_cos();
    let (st, ct) = attitude[1].sin_cos();
    let tt = st / ct;
    Ok(Matrix3::new(1.0, sf * tt, cf * tt, 0.0, cf, -sf, 0.0, sf / ct, cf / ct))
}

/// Time derivative of `eta` along `attitude_rates`.
pub fn euler_rate_matrix_dot(attitude: &Vector3<f64>, attitude_rates: &Vector3<f64>) -> Result<Matrix3<f64>, DynamicsError> {
    pitch_guard(attitude)?;
    let (sf, cf) = attitude[0].sin_cos();
    let (st, ct) = attitude[1].sin_cos();
    let tt = st / ct;
    let sec = 1.0 / ct;
    let d_phi = Matrix3::new(0.0, cf * tt, -sf * tt, 0.0, -sf, -cf, 0.0, cf * sec, -sf * sec);
    let d_theta = Matrix3::new(0.0, sf * sec * sec, cf * sec * sec, 0.0, 0.0, 0.0, 0.0, sf * tt * sec, cf * tt * sec);
    Ok(d_phi * attitude_rates[0] + d_theta * attitude_rates[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub position_dot: Vector3<f64>,
    pub velocity_dot: Vector3<f64>,
    pub attitude_dot: Vector3<f64>,
    pub body_rates_dot: Vector3<f64>,
}

fn check_command(model: &MultirotorModel, u: &DVector<f64>) -> Result<(), DynamicsError> {
    if u.len() != model.rotor_count() {
        return Err(DynamicsError::CommandLength { got: u.len(), expected: model.rotor_count() });
    }
    if !u.iter().all(|x| x.is_finite()) {
        return Err(DynamicsError::NonFinite);
    }
    Ok(())
}

pub fn derivatives(model: &MultirotorModel, state: &VehicleState, u: &DVector<f64>) -> Result<StateDerivative, DynamicsError> {
    derivatives_with(model, state, u, &ExternalWrench::default())
}

/// Equations of motion with an additional external wrench.
pub fn derivatives_with(
    model: &MultirotorModel,
    state: &VehicleState,
    u: &DVector<f64>,
    ext: &ExternalWrench,
) -> Result<StateDerivative, DynamicsError> {
    check_command(model, u)?;
    let eta = euler_rate_matrix(&state.attitude)?;
    let mixer = model.mixer();
    let r_ib = state.rotation();
    let thrust = &mixer.l * u;
    let velocity_dot = Vector3::new(0.0, 0.0, model.gravity()) + (r_ib * thrust + ext.force_inertial) / model.mass();
    let inertia = model.inertia();
    let w = state.body_rates;
    let moment = gravity_moment(model, &state.attitude) + &mixer.m * u + ext.moment_body - w.cross(&(inertia * w));
    let body_rates_dot = inertia.lu().solve(&moment).ok_or(DynamicsError::NonFinite)?;
    Ok(StateDerivative { position_dot: state.velocity, velocity_dot, attitude_dot: eta * w, body_rates_dot })
}

fn advance(s: &VehicleState, d: &StateDerivative, h: f64) -> VehicleState {
    VehicleState {
        position: s.position + d.position_dot * h,
        velocity: s.velocity + d.velocity_dot * h,
        attitude: s.attitude + d.attitude_dot * h,
        body_rates: s.body_rates + d.body_rates_dot * h,
    }
}

pub fn step_rk4(model: &MultirotorModel, state: &VehicleState, u: &DVector<f64>, dt: f64) -> Result<VehicleState, DynamicsError> {
    step_rk4_with(model, state, u, dt, |_| ExternalWrench::default())
}

/// RK4 step where the external wrench is re-evaluated at every stage.
pub fn step_rk4_with<E>(model: &MultirotorModel, state: &VehicleState, u: &DVector<f64>, dt: f64, ext: E) -> Result<VehicleState, DynamicsError>
where
    E: Fn(&VehicleState) -> ExternalWrench,
{
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(DynamicsError::BadStep(dt));
    }
    let stage = |s: &VehicleState, k: usize| -> Result<StateDerivative, DynamicsError> {
        derivatives_with(model, s, u, &ext(s)).map_err(|e| match e {
            DynamicsError::SingularPitch(_) => DynamicsError::AttitudeRange { stage: k, attitude: s.attitude.into() },
            other => other,
        })
    };
    let k1 = stage(state, 1)?;
    let k2 = stage(&advance(state, &k1, dt / 2.0), 2)?;
    let k3 = stage(&advance(state, &k2, dt / 2.0), 3)?;
    let k4 = stage(&advance(state, &k3, dt), 4)?;
    let sum = StateDerivative {
        position_dot: k1.position_dot + 2.0 * k2.position_dot + 2.0 * k3.position_dot + k4.position_dot,
        velocity_dot: k1.velocity_dot + 2.0 * k2.velocity_dot + 2.0 * k3.velocity_dot + k4.velocity_dot,
        attitude_dot: k1.attitude_dot + 2.0 * k2.attitude_dot + 2.0 * k3.attitude_dot + k4.attitude_dot,
        body_rates_dot: k1.body_rates_dot + 2.0 * k2.body_rates_dot + 2.0 * k3.body_rates_dot + k4.body_rates_dot,
    };
    let next = advance(state, &sum, dt / 6.0);
    next.checked().map_err(|e| match e {
        DynamicsError::AttitudeRange { attitude, .. } => DynamicsError::AttitudeRange { stage: 5, attitude },
        other => other,
    })
}

/// Body-frame thrust and total moment produced by command `u`.
pub fn total_wrench(model: &MultirotorModel, attitude: &Vector3<f64>, u: &DVector<f64>) -> Wrench {
    let mixer = model.mixer();
    Wrench { force: &mixer.l * u, moment: gravity_moment(model, attitude) + &mixer.m * u, frame: Frame::Body }
}

/// Flat compliant surface with Coulomb friction.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ContactSurface {
    /// A point on the surface.
    pub point: [f64; 3],
    /// Unit normal pointing out of the surface, into free space.
    pub normal: [f64; 3],
    #[cfg_attr(feature = "serde", serde(default = "default_stiffness"))]
    pub stiffness: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_damping"))]
    pub damping: f64,
    pub friction: f64,
}

#[cfg(feature = "serde")]
fn default_stiffness() -> f64 {
    5000.0
}

#[cfg(feature = "serde")]
fn default_damping() -> f64 {
    50.0
}

impl ContactSurface {
    pub fn new(point: Vector3<f64>, normal: Vector3<f64>, friction: f64) -> Self {
        let n = normal.normalize();
        Self { point: point.into(), normal: n.into(), stiffness: 5000.0, damping: 50.0, friction }
    }

    /// Penetration depth, positive behind the surface.
    pub fn depth(&self, p: &Vector3<f64>) -> f64 {
        -(p - Vector3::from(self.point)).dot(&Vector3::from(self.normal))
    }
}

/// Force exerted by the surface on a point at `ee_position`, inertial frame.
pub fn contact_force(surface: &ContactSurface, ee_position: &Vector3<f64>, ee_velocity: &Vector3<f64>) -> Wrench {
    let n = Vector3::from(surface.normal);
    let depth = surface.depth(ee_position);
    if depth <= 0.0 {
        return Wrench::zero(Frame::Inertial);
    }
    let approach = -ee_velocity.dot(&n);
    let fn_mag = (surface.stiffness * depth + surface.damping * approach).max(0.0);
    let mut force = n * fn_mag;
    let vt = ee_velocity - n * ee_velocity.dot(&n);
    let speed = vt.norm();
    if speed >= 1e-6 {
        force -= vt / speed * (surface.friction * fn_mag);
    }
    Wrench { force, moment: Vector3::zeros(), frame: Frame::Inertial }
}
