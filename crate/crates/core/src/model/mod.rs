//! Multirotor parameters, frame rotations and the control-affine mixer.

mod presets;

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, Matrix3, Matrix3xX, Vector3};
#[allow(unused_imports)] // float math without std
use num_traits::Float;

use crate::geometry::{convex_hull, DEFAULT_TOL};

pub use presets::{octorotor, planar_quadrotor, tilted_hexarotor, tilted_pair_quadrotor};

/// Largest rotor count for which hover feasibility is checked by enumeration.
pub const MAX_ENUMERATED_ROTORS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct RotorSpec {
    /// Rotor origin in the body frame.
    pub position_m: [f64; 3],
    pub mu_rad: f64,
    /// Inward tilt.
    pub phi_x_rad: f64,
    /// Sideward tilt.
    pub phi_y_rad: f64,
    /// Thrust constant, N per (rad/s)^2.
    pub cf: f64,
    /// Reaction-moment constant, N m per (rad/s)^2.
    pub ctau: f64,
    /// Spin direction flag, 0 or 1.
    pub direction: u8,
    /// Bounds on the squared rotor speed.
    pub u_min: f64,
    pub u_max: f64,
    pub rotor_mass_kg: f64,
    pub leg_com_m: [f64; 3],
    pub leg_mass_kg: f64,
    /// Allows negative `u_min` for reversible rotors.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "core::ops::Not::not"))]
    pub bidirectional: bool,
}

impl RotorSpec {
    pub fn position(&self) -> Vector3<f64> {
        Vector3::from(self.position_m)
    }

    pub fn arm_length(&self) -> f64 {
        self.position().norm()
    }

    /// Angle between the arm and its projection on the body XY plane, positive
    /// when the rotor sits below the plane.
    pub fn dihedral(&self) -> f64 {
        let p = self.position_m;
        p[2].atan2(p[0].hypot(p[1]))
    }

    /// Thrust direction `-Z_R` expressed in the body frame.
    pub fn thrust_axis(&self) -> Vector3<f64> {
        -rotor_rotation(self.mu_rad, self.phi_x_rad, self.phi_y_rad).column(2).into_owned()
    }

    fn is_finite(&self) -> bool {
        self.position_m.iter().chain(self.leg_com_m.iter()).all(|x| x.is_finite())
            && [self.mu_rad, self.phi_x_rad, self.phi_y_rad, self.cf, self.ctau, self.u_min, self.u_max]
                .iter()
                .all(|x| x.is_finite())
            && self.rotor_mass_kg.is_finite()
            && self.leg_mass_kg.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("a multirotor needs at least 4 rotors, got {0}")]
    TooFewRotors(usize),
    #[error("rotor {0} has non-finite parameters")]
    NonFiniteRotor(usize),
    #[error("rotor {0} direction flag must be 0 or 1")]
    BadDirection(usize),
    #[error("mass must be positive and finite")]
    BadMass,
    #[error("gravity must be positive and finite")]
    BadGravity,
    #[error("inertia must be finite")]
    BadInertia,
    #[error("rotor index {0} out of range")]
    RotorIndex(usize),
    #[error("attitude outside |roll|,|pitch| < pi/2")]
    AttitudeRange,
}

/// Thrust, reaction-moment, thrust-moment and total-moment mixers, each 3 x n.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixer {
    pub l: Matrix3xX<f64>,
    pub g: Matrix3xX<f64>,
    pub f: Matrix3xX<f64>,
    pub m: Matrix3xX<f64>,
}

impl Mixer {
    /// Stacked `[L; M]`, 6 x n.
    pub fn allocation(&self) -> DMatrix<f64> {
        let n = self.l.ncols();
        DMatrix::from_fn(6, n, |r, c| if r < 3 { self.l[(r, c)] } else { self.m[(r - 3, c)] })
    }
}

/// Rotation from the rotor frame to the body frame.
pub fn rotor_rotation(mu: f64, phi_x: f64, phi_y: f64) -> Matrix3<f64> {
    let (sm, cm) = mu.sin_cos();
    let (sx, cx) = phi_x.sin_cos();
    let (sy, cy) = phi_y.sin_cos();
    Matrix3::new(
        -sm * cy - cm * sx * sy,
        -cm * cx,
        cm * sx * cy - sm * sy,
        cm * cy - sm * sx * sy,
        -sm * cx,
        cm * sy + sm * sx * cy,
        -cx * sy,
        sx,
        cx * cy,
    )
}

/// `R_IB` for Z-Y'-X'' Euler angles.
pub fn body_rotation(phi: f64, theta: f64, psi: f64) -> Matrix3<f64> {
    let (sf, cf) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    Matrix3::new(
        ct * cp,
        sf * st * cp - cf * sp,
        cf * st * cp + sf * sp,
        ct * sp,
        sf * st * sp + cf * cp,
        cf * st * sp - sf * cp,
        -st,
        sf * ct,
        cf * ct,
    )
}

/// Checked variant of [`body_rotation`] enforcing the attitude ranges.
pub fn body_rotation_checked(attitude: &Vector3<f64>) -> Result<Matrix3<f64>, ModelError> {
    let half = core::f64::consts::FRAC_PI_2;
    if !attitude.iter().all(|x| x.is_finite()) || attitude[0].abs() >= half || attitude[1].abs() >= half {
        return Err(ModelError::AttitudeRange);
    }
    Ok(body_rotation(attitude[0], attitude[1], wrap_angle(attitude[2])))
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let mut w = a % two_pi;
    if w <= -core::f64::consts::PI {
        w += two_pi;
    } else if w > core::f64::consts::PI {
        w -= two_pi;
    }
    w
}

pub fn build_mixer(rotors: &[RotorSpec]) -> Mixer {
    let n = rotors.len();
    let mut l = Matrix3xX::zeros(n);
    let mut g = Matrix3xX::zeros(n);
    let mut f = Matrix3xX::zeros(n);
    for (i, r) in rotors.iter().enumerate() {
        let z = rotor_rotation(r.mu_rad, r.phi_x_rad, r.phi_y_rad).column(2).into_owned();
        let li = -r.cf * z;
        let sign = if r.direction == 0 { 1.0 } else { -1.0 };
        let gi = sign * r.ctau * z;
        let fi = r.position().cross(&li);
        l.set_column(i, &li);
        g.set_column(i, &gi);
        f.set_column(i, &fi);
    }
    let m = &f + &g;
    Mixer { l, g, f, m }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultirotorModel {
    name: String,
    mass_kg: f64,
    inertia: Matrix3<f64>,
    gravity: f64,
    rotors: Vec<RotorSpec>,
    mixer: Mixer,
}

impl MultirotorModel {
    pub fn new(
        name: impl Into<String>,
        mass_kg: f64,
        inertia: Matrix3<f64>,
        gravity: f64,
        rotors: Vec<RotorSpec>,
    ) -> Result<Self, ModelError> {
        if rotors.len() < 4 {
            return Err(ModelError::TooFewRotors(rotors.len()));
        }
        if !(mass_kg.is_finite() && mass_kg > 0.0) {
            return Err(ModelError::BadMass);
        }
        if !(gravity.is_finite() && gravity > 0.0) {
            return Err(ModelError::BadGravity);
        }
        if !inertia.iter().all(|x| x.is_finite()) {
            return Err(ModelError::BadInertia);
        }
        for (i, r) in rotors.iter().enumerate() {
            if !r.is_finite() {
                return Err(ModelError::NonFiniteRotor(i));
            }
            if r.direction > 1 {
                return Err(ModelError::BadDirection(i));
            }
        }
        let mixer = build_mixer(&rotors);
        Ok(Self { name: name.into(), mass_kg, inertia, gravity, rotors, mixer })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mass(&self) -> f64 {
        self.mass_kg
    }

    pub fn inertia(&self) -> &Matrix3<f64> {
        &self.inertia
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn rotors(&self) -> &[RotorSpec] {
        &self.rotors
    }

    pub fn rotor_count(&self) -> usize {
        self.rotors.len()
    }

    pub fn mixer(&self) -> &Mixer {
        &self.mixer
    }

    pub fn u_min(&self) -> Vec<f64> {
        self.rotors.iter().map(|r| r.u_min).collect()
    }

    pub fn u_max(&self) -> Vec<f64> {
        self.rotors.iter().map(|r| r.u_max).collect()
    }

    /// Copy with a replaced rotor list; the mixer is rebuilt.
    pub fn with_rotors(&self, rotors: Vec<RotorSpec>) -> Result<Self, ModelError> {
        Self::new(self.name.clone(), self.mass_kg, self.inertia, self.gravity, rotors)
    }

    pub fn with_mass(&self, mass_kg: f64) -> Result<Self, ModelError> {
        Self::new(self.name.clone(), mass_kg, self.inertia, self.gravity, self.rotors.clone())
    }

    /// Angle from rotor `i` to rotor `i+1` (cyclic) around `Z_B`, in `[0, 2 pi)`.
    pub fn alpha(&self, i: usize) -> Result<f64, ModelError> {
        let n = self.rotors.len();
        if i >= n {
            return Err(ModelError::RotorIndex(i));
        }
        let a = &self.rotors[i].position_m;
        let b = &self.rotors[(i + 1) % n].position_m;
        let d = b[1].atan2(b[0]) - a[1].atan2(a[0]);
        let two_pi = 2.0 * core::f64::consts::PI;
        Ok(((d % two_pi) + two_pi) % two_pi)
    }

    pub fn dihedral(&self, i: usize) -> Result<f64, ModelError> {
        self.rotors.get(i).map(RotorSpec::dihedral).ok_or(ModelError::RotorIndex(i))
    }

    /// Body-frame hover thrust `R_BI [0, 0, -m g]`.
    pub fn hover_force(&self, attitude: &Vector3<f64>) -> Vector3<f64> {
        let r = body_rotation(attitude[0], attitude[1], attitude[2]);
        r.transpose() * Vector3::new(0.0, 0.0, -self.mass_kg * self.gravity)
    }
}

/// Moment of the rotor and arm weights about the centre of mass, body frame.
pub fn gravity_moment(model: &MultirotorModel, attitude: &Vector3<f64>) -> Vector3<f64> {
    let r_bi = body_rotation(attitude[0], attitude[1], attitude[2]).transpose();
    let down = r_bi * Vector3::new(0.0, 0.0, model.gravity);
    let mut m = Vector3::zeros();
    for r in &model.rotors {
        m += r.position().cross(&(down * r.rotor_mass_kg));
        m += Vector3::from(r.leg_com_m).cross(&(down * r.leg_mass_kg));
    }
    m
}

/// Numeric rank by SVD with a threshold relative to the largest singular value.
pub fn numeric_rank(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |m, s| m.max(*s));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > 1e-9 * smax).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub rotor_count: usize,
    pub rank: usize,
    pub fully_actuated: bool,
    pub inertia_spd: bool,
    /// Human-readable per-rotor problems.
    pub limit_violations: Vec<String>,
    /// Some thrust within the limits balances gravity at zero attitude.
    /// `None` when the rotor count is too large to enumerate.
    pub hover_feasible: Option<bool>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.inertia_spd && self.limit_violations.is_empty() && self.rank >= 1
    }
}

pub fn validate(model: &MultirotorModel) -> ValidationReport {
    use alloc::format;
    let rank = numeric_rank(&model.mixer.allocation());
    let sym = (model.inertia - model.inertia.transpose()).abs().max() <= 1e-12 * model.inertia.abs().max().max(1.0);
    let inertia_spd = sym && model.inertia.cholesky().is_some();
    let mut limit_violations = Vec::new();
    for (i, r) in model.rotors.iter().enumerate() {
        if r.cf <= 0.0 {
            limit_violations.push(format!("rotor {i}: cf must be positive"));
        }
        if r.ctau < 0.0 {
            limit_violations.push(format!("rotor {i}: ctau must be non-negative"));
        }
        if r.u_min > r.u_max {
            limit_violations.push(format!("rotor {i}: u_min {} exceeds u_max {}", r.u_min, r.u_max));
        }
        if r.u_min < 0.0 && !r.bidirectional {
            limit_violations.push(format!("rotor {i}: negative u_min on a unidirectional rotor"));
        }
        if r.rotor_mass_kg < 0.0 || r.leg_mass_kg < 0.0 {
            limit_violations.push(format!("rotor {i}: negative component mass"));
        }
    }
    let hover_feasible = if model.rotors.len() <= MAX_ENUMERATED_ROTORS && limit_violations.is_empty() {
        let l = &model.mixer.l;
        let n = model.rotors.len();
        let corners: Vec<Vec<f64>> = (0..1usize << n)
            .map(|c| {
                let mut p = [0.0; 3];
                for (i, r) in model.rotors.iter().enumerate() {
                    let u = if c >> i & 1 == 1 { r.u_max } else { r.u_min };
                    for k in 0..3 {
                        p[k] += l[(k, i)] * u;
                    }
                }
                p.to_vec()
            })
            .collect();
        convex_hull(&corners, 3)
            .ok()
            .map(|set| set.contains(&[0.0, 0.0, -model.mass_kg * model.gravity], DEFAULT_TOL))
    } else {
        None
    };
    ValidationReport {
        rotor_count: model.rotors.len(),
        rank,
        fully_actuated: rank == 6,
        inertia_spd,
        limit_violations,
        hover_feasible,
    }
}
