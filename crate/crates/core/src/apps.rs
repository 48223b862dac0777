//! Omni-directional acceleration, optimal tilt under a constant external
//! force, and feasibility reports for interaction tasks.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use nalgebra::{Matrix3, Vector3};
#[allow(unused_imports)] // float math without std
use num_traits::Float;

use crate::control::default_anchor;
use crate::dynamics::{Frame, Wrench};
use crate::geometry::{Polytope, DEFAULT_TOL};
use crate::model::{body_rotation, MultirotorModel};
use crate::strategies::{attitude_fixed_tilt, tilt_of};
use crate::wrenchset::{base_sets, wrench_set_6d, WrenchSetError};

/// Default upper bound of the tilt sweep.
pub const DEFAULT_MAX_TILT: f64 = PI / 4.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AppsError {
    #[error("thrust set is not full-dimensional (affine dimension {0})")]
    DegenerateThrustSet(usize),
    #[error("sweep grids need at least 2 cells, got {tilt} x {dir}")]
    Grid { tilt: usize, dir: usize },
    #[error("maximum tilt must lie in (0, pi/2)")]
    MaxTilt,
    #[error(transparent)]
    WrenchSet(#[from] WrenchSetError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmniResult {
    /// Omni-directional acceleration, m/s^2. Negative when the centre is infeasible.
    pub radius_mps2: f64,
    /// Omni-directional thrust, N.
    pub radius_n: f64,
    pub tilt_rad: f64,
    /// Heading of the tilt, the azimuth the thrust axis leans toward.
    pub tilt_dir_rad: f64,
    /// Desired acceleration at the sphere centre.
    pub center: Vector3<f64>,
    pub attitude: Vector3<f64>,
}

/// Gravity as an inertial external force.
pub fn gravity_force(model: &MultirotorModel) -> Vector3<f64> {
    Vector3::new(0.0, 0.0, model.mass() * model.gravity())
}

fn tilt_direction(r: &Matrix3<f64>) -> f64 {
    let k = r.column(2);
    if k[0].hypot(k[1]) < 1e-15 {
        0.0
    } else {
        let a = (-k[1]).atan2(-k[0]);
        if a < 0.0 { a + TAU } else { a }
    }
}

fn radius_about(base: &Polytope, r: &Matrix3<f64>, center_inertial: &Vector3<f64>) -> f64 {
    let c = r.transpose() * center_inertial;
    base.halfspaces()
        .iter()
        .map(|h| h.offset - (h.normal[0] * c[0] + h.normal[1] * c[1] + h.normal[2] * c[2]))
        .fold(f64::INFINITY, f64::min)
}

fn full_thrust_base(model: &MultirotorModel) -> Result<Polytope, AppsError> {
    let base = base_sets(model)?.thrust;
    if !base.is_full_dimensional() {
        return Err(AppsError::DegenerateThrustSet(base.affine_dim()));
    }
    Ok(base)
}

fn omni_from_base(
    model: &MultirotorModel,
    base: &Polytope,
    attitude: &Vector3<f64>,
    f_ext_inertial: &Vector3<f64>,
    center_accel: &Vector3<f64>,
) -> OmniResult {
    let r = body_rotation(attitude[0], attitude[1], attitude[2]);
    let center = center_accel * model.mass() - f_ext_inertial;
    let radius_n = radius_about(base, &r, &center);
    OmniResult {
        radius_mps2: radius_n / model.mass(),
        radius_n,
        tilt_rad: tilt_of(&r),
        tilt_dir_rad: tilt_direction(&r),
        center: *center_accel,
        attitude: *attitude,
    }
}

/// Radius of the largest acceleration sphere around `center_accel` that the
/// rotors can produce at `attitude` against `f_ext_inertial`. The external
/// force must include gravity if it acts; see [`gravity_force`].
pub fn omni_acceleration(
    model: &MultirotorModel,
    attitude: &Vector3<f64>,
    f_ext_inertial: &Vector3<f64>,
    center_accel: &Vector3<f64>,
) -> Result<OmniResult, AppsError> {
    let base = full_thrust_base(model)?;
    Ok(omni_from_base(model, &base, attitude, f_ext_inertial, center_accel))
}

/// Result of a tilt sweep with every evaluated cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltSweep {
    pub best: OmniResult,
    pub cells: Vec<OmniResult>,
    /// Tilt step of the grid.
    pub tilt_step: f64,
    pub dir_step: f64,
}

/// Grid search for the tilt maximizing the omni-directional acceleration
/// with zero desired acceleration. Tilts are `i * max_tilt / tilt_grid` for
/// `i = 0..=tilt_grid` and directions `2 pi j / dir_grid`, so doubling a grid
/// keeps every previous cell. Ties keep the first cell.
pub fn optimal_tilt_sweep(
    model: &MultirotorModel,
    f_ext_inertial: &Vector3<f64>,
    tilt_grid: usize,
    dir_grid: usize,
    max_tilt: f64,
) -> Result<TiltSweep, AppsError> {
    if tilt_grid < 2 || dir_grid < 2 {
        return Err(AppsError::Grid { tilt: tilt_grid, dir: dir_grid });
    }
    if !(max_tilt > 0.0 && max_tilt < PI / 2.0) {
        return Err(AppsError::MaxTilt);
    }
    let base = full_thrust_base(model)?;
    let zero = Vector3::zeros();
    let mut cells = Vec::with_capacity(1 + tilt_grid * dir_grid);
    for i in 0..=tilt_grid {
        let lambda = i as f64 * max_tilt / tilt_grid as f64;
        let dirs = if i == 0 { 1 } else { dir_grid };
        for j in 0..dirs {
            let kappa = TAU * j as f64 / dir_grid as f64;
            let sp = attitude_fixed_tilt(lambda, kappa, 0.0).map_err(|_| AppsError::MaxTilt)?;
            let mut cell = omni_from_base(model, &base, &sp.euler, f_ext_inertial, &zero);
            cell.tilt_rad = lambda;
            cell.tilt_dir_rad = if i == 0 { 0.0 } else { kappa };
            cells.push(cell);
        }
    }
    let best = *cells
        .iter()
        .fold(None::<&OmniResult>, |acc, c| match acc {
            Some(b) if b.radius_n >= c.radius_n => Some(b),
            _ => Some(c),
        })
        .expect("grid is nonempty");
    Ok(TiltSweep { best, cells, tilt_step: max_tilt / tilt_grid as f64, dir_step: TAU / dir_grid as f64 })
}

/// Feasibility of one requested interaction wrench.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionEntry {
    /// Requested wrench in the body frame.
    pub wrench: [f64; 6],
    pub feasible: bool,
    /// Distance to the nearest facet of the wrench set, negative outside.
    pub margin: f64,
    /// Boundary point toward the request from the hover wrench, if infeasible.
    pub clipped: Option<[f64; 6]>,
}

fn to_body(attitude: &Vector3<f64>, w: &Wrench) -> [f64; 6] {
    match w.frame {
        Frame::Body => w.to_array(),
        Frame::Inertial => {
            let r_bi = body_rotation(attitude[0], attitude[1], attitude[2]).transpose();
            let (f, m) = (r_bi * w.force, r_bi * w.moment);
            [f[0], f[1], f[2], m[0], m[1], m[2]]
        }
    }
}

pub fn interaction_feasibility_report(
    model: &MultirotorModel,
    attitude: &Vector3<f64>,
    task_wrenches: &[Wrench],
) -> Result<Vec<InteractionEntry>, AppsError> {
    let set = wrench_set_6d(model, attitude)?;
    let anchor = default_anchor(model, attitude, &set);
    Ok(task_wrenches.iter().map(|w| interaction_entry(&set, &anchor, to_body(attitude, w))).collect())
}

/// Entry for one body wrench against a precomputed wrench set.
pub fn interaction_entry(set: &Polytope, anchor: &[f64; 6], w: [f64; 6]) -> InteractionEntry {
    let feasible = set.contains(&w, DEFAULT_TOL);
    let radius = set.inscribed_radius(&w).unwrap_or(f64::NEG_INFINITY);
    if feasible {
        return InteractionEntry { wrench: w, feasible, margin: radius.max(0.0), clipped: None };
    }
    let margin = if radius < 0.0 { radius } else { -set.carrier_distance(&w).max(f64::MIN_POSITIVE) };
    let clipped = set.ray_clip(anchor, &w, DEFAULT_TOL).ok().map(|(p, _)| [p[0], p[1], p[2], p[3], p[4], p[5]]);
    InteractionEntry { wrench: w, feasible, margin, clipped }
}
