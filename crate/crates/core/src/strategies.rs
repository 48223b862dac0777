//! Attitude and thrust setpoint generation for fully-actuated multirotors.

use core::f64::consts::FRAC_PI_2;
use nalgebra::{Matrix3, Vector3};
#[allow(unused_imports)] // float math without std
use num_traits::Float;

use crate::model::{body_rotation, wrap_angle};

/// Thrust magnitude below which the thrust direction is undefined.
pub const MIN_THRUST: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StrategyError {
    #[error("rotation too close to gimbal lock")]
    GimbalLock,
    #[error("matrix is not a proper rotation")]
    NotRotation,
    #[error("desired thrust magnitude below {MIN_THRUST} N")]
    NearZeroThrust,
    #[error("desired thrust parallel to the yaw reference")]
    DegenerateYaw,
    #[error("tilt {0} rad outside [0, pi/2)")]
    TiltRange(f64),
    #[error("attitude outside |roll|,|pitch| < pi/2")]
    AttitudeRange,
    #[error("vertical thrust alone needs {needed} N lateral, limit {limit} N")]
    VerticalInfeasible { needed: f64, limit: f64 },
    #[error("hover thrust alone needs {needed} N lateral, limit {limit} N")]
    HoverInfeasible { needed: f64, limit: f64 },
}

/// Desired attitude as `R_IS` with its Euler angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeSetpoint {
    pub rotation: Matrix3<f64>,
    pub euler: Vector3<f64>,
}

impl AttitudeSetpoint {
    pub fn from_rotation(rotation: Matrix3<f64>) -> Result<Self, StrategyError> {
        let euler = rotation_to_euler(&rotation)?;
        Ok(Self { rotation, euler })
    }

    /// Angle between the setpoint Z axis and the inertial Z axis.
    pub fn tilt(&self) -> f64 {
        tilt_of(&self.rotation)
    }
}

pub fn tilt_of(rotation: &Matrix3<f64>) -> f64 {
    rotation[(2, 2)].clamp(-1.0, 1.0).acos()
}

pub fn rotation_to_euler(r: &Matrix3<f64>) -> Result<Vector3<f64>, StrategyError> {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    if !(ortho <= 1e-9) || !(r.determinant() > 0.0) {
        return Err(StrategyError::NotRotation);
    }
    if !(r[(2, 0)].abs() < 1.0 - 1e-9) {
        return Err(StrategyError::GimbalLock);
    }
    let phi = r[(2, 1)].atan2(r[(2, 2)]);
    let theta = -r[(2, 0)].asin();
    let psi = r[(1, 0)].atan2(r[(0, 0)]);
    Ok(Vector3::new(phi, theta, wrap_angle(psi)))
}

fn yaw_rotation(psi: f64) -> Matrix3<f64> {
    body_rotation(0.0, 0.0, psi)
}

pub fn attitude_zero_tilt(psi_des: f64) -> AttitudeSetpoint {
    AttitudeSetpoint { rotation: yaw_rotation(psi_des), euler: Vector3::new(0.0, 0.0, wrap_angle(psi_des)) }
}

/// Completes a rotation from its Z axis and a desired heading.
fn frame_from_z(k: Vector3<f64>, psi_des: f64) -> Result<AttitudeSetpoint, StrategyError> {
    let (s, c) = psi_des.sin_cos();
    let yref = Vector3::new(-s, c, 0.0);
    let x = yref.cross(&k);
    let nx = x.norm();
    if !(nx > 1e-9) {
        return Err(StrategyError::DegenerateYaw);
    }
    let i = x / nx;
    let j = k.cross(&i);
    AttitudeSetpoint::from_rotation(Matrix3::from_columns(&[i, j, k]))
}

/// Rotates `z_I` about `axis` by `angle`.
fn rodrigues_z(axis: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let z = Vector3::z();
    let (s, c) = angle.sin_cos();
    axis * ((1.0 - c) * axis.dot(&z)) + z * c + axis.cross(&z) * s
}

/// Aligns the body Z axis with the desired thrust.
pub fn attitude_full_tilt(f_des: &Vector3<f64>, psi_des: f64) -> Result<AttitudeSetpoint, StrategyError> {
    let n = f_des.norm();
    if !(n > MIN_THRUST) {
        return Err(StrategyError::NearZeroThrust);
    }
    frame_from_z(-f_des / n, psi_des)
}

/// Tilts only as much as the lateral thrust limit requires.
pub fn attitude_min_tilt(f_des: &Vector3<f64>, psi_des: f64, f_lmax: f64) -> Result<AttitudeSetpoint, StrategyError> {
    let n = f_des.norm();
    if !(n > MIN_THRUST) {
        return Err(StrategyError::NearZeroThrust);
    }
    let proj = f_des.xy().norm();
    if proj <= f_lmax {
        return Ok(attitude_zero_tilt(psi_des));
    }
    let lambda = (proj / n).min(1.0).asin() - (f_lmax.max(0.0) / n).min(1.0).asin();
    let axis = f_des.cross(&Vector3::z());
    let axis = axis / axis.norm();
    frame_from_z(rodrigues_z(&axis, lambda), psi_des)
}

/// Required tilt of the minimum-tilt strategy, for diagnostics.
pub fn min_tilt_angle(f_des: &Vector3<f64>, f_lmax: f64) -> f64 {
    let n = f_des.norm();
    let proj = f_des.xy().norm();
    if n <= MIN_THRUST || proj <= f_lmax {
        return 0.0;
    }
    (proj / n).min(1.0).asin() - (f_lmax.max(0.0) / n).min(1.0).asin()
}

/// Holds tilt `lambda_des` toward direction `kappa_des`.
pub fn attitude_fixed_tilt(lambda_des: f64, kappa_des: f64, psi_des: f64) -> Result<AttitudeSetpoint, StrategyError> {
    if !(0.0..FRAC_PI_2).contains(&lambda_des) {
        return Err(StrategyError::TiltRange(lambda_des));
    }
    if lambda_des == 0.0 {
        return Ok(attitude_zero_tilt(psi_des));
    }
    let (s, c) = kappa_des.sin_cos();
    let axis = Vector3::new(c, s, 0.0).cross(&Vector3::z());
    frame_from_z(rodrigues_z(&axis, lambda_des), psi_des)
}

pub fn attitude_fixed(phi_des: f64, theta_des: f64, psi_des: f64) -> Result<AttitudeSetpoint, StrategyError> {
    if !(phi_des.abs() < FRAC_PI_2 && theta_des.abs() < FRAC_PI_2) {
        return Err(StrategyError::AttitudeRange);
    }
    let psi = wrap_angle(psi_des);
    Ok(AttitudeSetpoint { rotation: body_rotation(phi_des, theta_des, psi), euler: Vector3::new(phi_des, theta_des, psi) })
}

/// Attitude strategy selection with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", deny_unknown_fields))]
pub enum AttitudeStrategy {
    ZeroTilt,
    FullTilt,
    MinTilt { f_lmax: f64 },
    FixedTilt { lambda: f64, kappa: f64 },
    FixedAttitude { phi: f64, theta: f64 },
}

impl AttitudeStrategy {
    pub fn setpoint(&self, f_des: &Vector3<f64>, psi_des: f64) -> Result<AttitudeSetpoint, StrategyError> {
        match *self {
            Self::ZeroTilt => Ok(attitude_zero_tilt(psi_des)),
            Self::FullTilt => attitude_full_tilt(f_des, psi_des),
            Self::MinTilt { f_lmax } => attitude_min_tilt(f_des, psi_des, f_lmax),
            Self::FixedTilt { lambda, kappa } => attitude_fixed_tilt(lambda, kappa, psi_des),
            Self::FixedAttitude { phi, theta } => attitude_fixed(phi, theta, psi_des),
        }
    }
}

fn rotation_of(attitude: &Vector3<f64>) -> Result<Matrix3<f64>, StrategyError> {
    if !(attitude[0].abs() < FRAC_PI_2 && attitude[1].abs() < FRAC_PI_2) {
        return Err(StrategyError::AttitudeRange);
    }
    Ok(body_rotation(attitude[0], attitude[1], attitude[2]))
}

/// Body-frame thrust setpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustSetpoint {
    pub force_body: Vector3<f64>,
}

pub fn thrust_project(f_des: &Vector3<f64>, r_ib: &Matrix3<f64>) -> ThrustSetpoint {
    ThrustSetpoint { force_body: r_ib.transpose() * f_des }
}

fn lateral(v: &Vector3<f64>) -> f64 {
    v.xy().norm()
}

/// Keeps the vertical component of the desired thrust and spends the
/// remaining lateral budget on the horizontal component.
pub fn thrust_keep_vertical(f_des: &Vector3<f64>, attitude: &Vector3<f64>, f_lmax: f64) -> Result<ThrustSetpoint, StrategyError> {
    let r_ib = rotation_of(attitude)?;
    let r_bi = r_ib.transpose();
    let projected = r_bi * f_des;
    if lateral(&projected) <= f_lmax {
        return Ok(ThrustSetpoint { force_body: projected });
    }
    let ver = r_bi * Vector3::new(0.0, 0.0, f_des[2]);
    let hor = r_bi * Vector3::new(f_des[0], f_des[1], 0.0);
    let used = lateral(&ver);
    if used > f_lmax {
        return Err(StrategyError::VerticalInfeasible { needed: used, limit: f_lmax });
    }
    let budget = f_lmax - used;
    let lat_hor = lateral(&hor);
    let scale = if lat_hor > budget { budget / lat_hor } else { 1.0 };
    Ok(ThrustSetpoint { force_body: ver + hor * scale })
}

/// Direct construction of the keep-vertical setpoint from the current tilt:
/// the lateral part saturates at `f_lmax` along the desired lateral heading.
pub fn thrust_keep_vertical_direct(f_des: &Vector3<f64>, attitude: &Vector3<f64>, f_lmax: f64) -> Result<ThrustSetpoint, StrategyError> {
    let r_ib = rotation_of(attitude)?;
    let projected = r_ib.transpose() * f_des;
    if lateral(&projected) <= f_lmax {
        return Ok(ThrustSetpoint { force_body: projected });
    }
    let gamma = projected[1].atan2(projected[0]);
    let lambda = tilt_of(&r_ib);
    let (s, c) = gamma.sin_cos();
    let z = f_des[2] / lambda.cos() - f_lmax * lambda.tan();
    Ok(ThrustSetpoint { force_body: Vector3::new(f_lmax * c, f_lmax * s, z) })
}

/// Keeps the hover thrust and bounds the lateral part of the remainder.
pub fn thrust_keep_direction(
    f_des: &Vector3<f64>,
    attitude: &Vector3<f64>,
    f_lmax: f64,
    f_hov: f64,
) -> Result<ThrustSetpoint, StrategyError> {
    let r_bi = rotation_of(attitude)?.transpose();
    let hover_i = Vector3::new(0.0, 0.0, -f_hov);
    let hover = r_bi * hover_i;
    let used = lateral(&hover);
    if used > f_lmax {
        return Err(StrategyError::HoverInfeasible { needed: used, limit: f_lmax });
    }
    let budget = f_lmax - used;
    let mut residual = r_bi * (f_des - hover_i);
    let lat = lateral(&residual);
    if lat > budget {
        let k = budget / lat;
        residual[0] *= k;
        residual[1] *= k;
    }
    Ok(ThrustSetpoint { force_body: hover + residual })
}

/// Scales the inertial horizontal part of `f_des` down to `f_lmax`.
pub fn horizontal_prebound(f_des: &Vector3<f64>, f_lmax: f64) -> Vector3<f64> {
    let h = lateral(f_des);
    if h <= f_lmax {
        return *f_des;
    }
    let k = f_lmax / h;
    Vector3::new(f_des[0] * k, f_des[1] * k, f_des[2])
}

/// Thrust strategy selection with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", deny_unknown_fields))]
pub enum ThrustStrategy {
    Project,
    KeepVertical { f_lmax: f64 },
    KeepDirection { f_lmax: f64, f_hov: f64 },
    Prebound { f_lmax: f64 },
}

impl ThrustStrategy {
    pub fn setpoint(&self, f_des: &Vector3<f64>, attitude: &Vector3<f64>) -> Result<ThrustSetpoint, StrategyError> {
        match *self {
            Self::Project => Ok(thrust_project(f_des, &rotation_of(attitude)?)),
            Self::KeepVertical { f_lmax } => thrust_keep_vertical(f_des, attitude, f_lmax),
            Self::KeepDirection { f_lmax, f_hov } => thrust_keep_direction(f_des, attitude, f_lmax, f_hov),
            Self::Prebound { f_lmax } => Ok(thrust_project(&horizontal_prebound(f_des, f_lmax), &rotation_of(attitude)?)),
        }
    }
}
