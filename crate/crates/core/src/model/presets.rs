//! Bundled airframes used by the examples and tests.

use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{Matrix3, Vector3};
#[allow(unused_imports)] // float math without std
use num_traits::Float;

use super::{MultirotorModel, RotorSpec};

#[allow(clippy::too_many_arguments)]
fn arm_rotor(azimuth: f64, arm: f64, phi_x: f64, phi_y: f64, cf: f64, ctau: f64, direction: u8, u_max: f64, rotor_mass: f64, leg_mass: f64) -> RotorSpec {
    let (s, c) = azimuth.sin_cos();
    RotorSpec {
        position_m: [arm * c, arm * s, 0.0],
        mu_rad: azimuth,
        phi_x_rad: phi_x,
        phi_y_rad: phi_y,
        cf,
        ctau,
        direction,
        u_min: 0.0,
        u_max,
        rotor_mass_kg: rotor_mass,
        leg_com_m: [0.5 * arm * c, 0.5 * arm * s, 0.0],
        leg_mass_kg: leg_mass,
        bidirectional: false,
    }
}

/// Plus-configuration quadrotor with all rotors pointing up.
pub fn planar_quadrotor() -> MultirotorModel {
    let rotors = (0..4)
        .map(|i| arm_rotor(i as f64 * PI / 2.0, 0.25, 0.0, 0.0, 1.0e-5, 1.6e-7, (i % 2) as u8, 1.0e6, 0.05, 0.02))
        .collect();
    MultirotorModel::new("planar_quadrotor", 1.5, Matrix3::from_diagonal(&Vector3::new(0.015, 0.015, 0.026)), 9.81, rotors)
        .expect("valid preset")
}

/// Quadrotor whose front and back rotors lean left and side rotors lean back by
/// `tilt`, so all thrust lies in one plane.
pub fn tilted_pair_quadrotor(tilt: f64) -> MultirotorModel {
    let base = planar_quadrotor();
    // Sideward angle sign per azimuth 0, 90, 180, 270 deg.
    let signs = [-1.0, -1.0, 1.0, 1.0];
    let rotors: Vec<RotorSpec> = base
        .rotors()
        .iter()
        .zip(signs)
        .map(|(r, s)| RotorSpec { phi_y_rad: s * tilt, ..r.clone() })
        .collect();
    MultirotorModel::new("tilted_pair_quadrotor", base.mass(), *base.inertia(), base.gravity(), rotors).expect("valid preset")
}

/// Hexarotor with rotors tilted sideways by +30 and -30 degrees alternately,
/// 0.96 m motor-to-motor diameter.
pub fn tilted_hexarotor() -> MultirotorModel {
    let tilt = 30.0f64.to_radians();
    let rotors = (0..6)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            arm_rotor(i as f64 * PI / 3.0, 0.48, 0.0, s * tilt, 3.0e-5, 4.65e-7, (i % 2) as u8, 6.5e5, 0.12, 0.06)
        })
        .collect();
    let inertia = Matrix3::from_diagonal(&Vector3::new(0.22, 0.22, 0.40));
    MultirotorModel::new("tilted_hexarotor", 6.0, inertia, 9.81, rotors).expect("valid preset")
}

/// Four co-planar upward rotors in X configuration plus four auxiliary rotors
/// with horizontal, radial thrust axes.
pub fn octorotor() -> MultirotorModel {
    let mut rotors: Vec<RotorSpec> = (0..4)
        .map(|i| arm_rotor(PI / 4.0 + i as f64 * PI / 2.0, 0.35, 0.0, 0.0, 3.0e-5, 4.65e-7, (i % 2) as u8, 6.5e5, 0.12, 0.05))
        .collect();
    rotors.extend((0..4).map(|i| arm_rotor(i as f64 * PI / 2.0, 0.35, PI / 2.0, 0.0, 1.0e-5, 1.6e-7, 0, 1.0e6, 0.05, 0.0)));
    let inertia = Matrix3::from_diagonal(&Vector3::new(0.12, 0.12, 0.20));
    MultirotorModel::new("octorotor", 4.5, inertia, 9.81, rotors).expect("valid preset")
}
