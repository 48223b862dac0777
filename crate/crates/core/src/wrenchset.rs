//! Feasible thrust, moment and wrench sets of a multirotor.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
#[allow(unused_imports)] // float math without std
use num_traits::Float;

use crate::dynamics::{Frame, Wrench};
use crate::geometry::{convex_hull, GeometryError, Polytope, DEFAULT_TOL};
use crate::model::{body_rotation, gravity_moment, numeric_rank, MultirotorModel, RotorSpec};

/// Corner-explosion guard for three-dimensional sets.
pub const MAX_ROTORS_3D: usize = 16;
/// Corner-explosion guard for the six-dimensional set.
pub const MAX_ROTORS_6D: usize = 12;
/// Budget on pitch-sample combinations.
pub const MAX_PITCH_COMBINATIONS: usize = 100_000;
/// Default number of azimuth directions of the lateral sweep.
pub const DEFAULT_LATERAL_DIRECTIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WrenchSetError {
    #[error("{n} rotors exceed the corner-enumeration limit of {max}")]
    TooManyRotors { n: usize, max: usize },
    #[error("allocation matrix has rank {0}, expected 6")]
    RankDeficient(usize),
    #[error("wrench component index {0} out of range 0..6")]
    BadComponent(usize),
    #[error("too many fixed components ({0}), at most 5")]
    TooManyFixed(usize),
    #[error("{0} pitch combinations exceed the sampling budget")]
    SampleBudget(usize),
    #[error("pitch ranges given for {got} rotors, model has {expected}")]
    PitchRanges { got: usize, expected: usize },
    #[error("rotor index {0} out of range")]
    RotorIndex(usize),
    #[error("at least one lateral direction is required")]
    NoDirections,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Which part of the wrench a corner image carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    Thrust,
    Moment,
    Wrench,
}

/// Attitude, external force and frame of a set query.
#[derive(Debug, Clone, PartialEq)]
pub struct WrenchSetQuery {
    pub attitude: Vector3<f64>,
    /// Inertial external force, without gravity.
    pub external_force: Vector3<f64>,
    /// Adds `m g z_I` to the external force.
    pub include_gravity: bool,
    pub frame: Frame,
    /// Component index (Fx, Fy, Fz, Mx, My, Mz) to fixed value.
    pub fixed_components: BTreeMap<usize, f64>,
}

impl WrenchSetQuery {
    pub fn body(attitude: Vector3<f64>) -> Self {
        Self {
            attitude,
            external_force: Vector3::zeros(),
            include_gravity: false,
            frame: Frame::Body,
            fixed_components: BTreeMap::new(),
        }
    }

    pub fn inertial(attitude: Vector3<f64>, external_force: Vector3<f64>, include_gravity: bool) -> Self {
        Self { attitude, external_force, include_gravity, frame: Frame::Inertial, fixed_components: BTreeMap::new() }
    }

    pub fn total_external_force(&self, model: &MultirotorModel) -> Vector3<f64> {
        let g = if self.include_gravity { model.mass() * model.gravity() } else { 0.0 };
        self.external_force + Vector3::new(0.0, 0.0, g)
    }

    fn rotation(&self) -> Matrix3<f64> {
        body_rotation(self.attitude[0], self.attitude[1], self.attitude[2])
    }
}

fn guard(model: &MultirotorModel, max: usize) -> Result<(), WrenchSetError> {
    let n = model.rotor_count();
    if n > max {
        return Err(WrenchSetError::TooManyRotors { n, max });
    }
    Ok(())
}

/// Command at corner `index`: bit `i` selects `u_max` for rotor `i`.
pub fn corner_command(model: &MultirotorModel, index: usize) -> DVector<f64> {
    DVector::from_iterator(
        model.rotor_count(),
        model.rotors().iter().enumerate().map(|(i, r)| if index >> i & 1 == 1 { r.u_max } else { r.u_min }),
    )
}

/// Images of all `2^n` corner commands, without the gravity moment. Corner
/// `c` is at position `c` of the result.
pub fn corner_images(model: &MultirotorModel, kind: SetKind) -> Vec<Vec<f64>> {
    corner_images_of(model.mixer().l.clone(), model.mixer().m.clone(), model.rotors(), kind)
}

fn corner_images_of(
    l: nalgebra::Matrix3xX<f64>,
    m: nalgebra::Matrix3xX<f64>,
    rotors: &[RotorSpec],
    kind: SetKind,
) -> Vec<Vec<f64>> {
    let n = rotors.len();
    let mut out = Vec::with_capacity(1 << n);
    for c in 0..1usize << n {
        let mut p = vec![0.0; if kind == SetKind::Wrench { 6 } else { 3 }];
        for (i, r) in rotors.iter().enumerate() {
            let u = if c >> i & 1 == 1 { r.u_max } else { r.u_min };
            match kind {
                SetKind::Thrust => (0..3).for_each(|k| p[k] += l[(k, i)] * u),
                SetKind::Moment => (0..3).for_each(|k| p[k] += m[(k, i)] * u),
                SetKind::Wrench => (0..3).for_each(|k| {
                    p[k] += l[(k, i)] * u;
                    p[k + 3] += m[(k, i)] * u;
                }),
            }
        }
        out.push(p);
    }
    out
}

fn rows(r: &Matrix3<f64>) -> Vec<Vec<f64>> {
    (0..3).map(|i| (0..3).map(|j| r[(i, j)]).collect()).collect()
}

fn identity_rows(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn place(set: &Polytope, rotation: &Matrix3<f64>, shift: &Vector3<f64>) -> Result<Polytope, WrenchSetError> {
    Ok(set.transform(&rows(rotation), shift.as_slice())?)
}

/// Thrust set at the query attitude, by full corner enumeration.
pub fn thrust_set(model: &MultirotorModel, query: &WrenchSetQuery) -> Result<Polytope, WrenchSetError> {
    guard(model, MAX_ROTORS_3D)?;
    let body = corner_images(model, SetKind::Thrust);
    let points = match query.frame {
        Frame::Body => body,
        Frame::Inertial => {
            let r = query.rotation();
            let f = query.total_external_force(model);
            body.iter().map(|p| (r * Vector3::new(p[0], p[1], p[2]) + f).as_slice().to_vec()).collect()
        }
    };
    Ok(convex_hull(&points, 3)?)
}

/// Moment set `M u + M_grav` at the query attitude, by full corner enumeration.
pub fn moment_set(model: &MultirotorModel, query: &WrenchSetQuery) -> Result<Polytope, WrenchSetError> {
    guard(model, MAX_ROTORS_3D)?;
    let mg = gravity_moment(model, &query.attitude);
    let r = match query.frame {
        Frame::Body => Matrix3::identity(),
        Frame::Inertial => query.rotation(),
    };
    let points: Vec<Vec<f64>> = corner_images(model, SetKind::Moment)
        .iter()
        .map(|p| (r * (Vector3::new(p[0], p[1], p[2]) + mg)).as_slice().to_vec())
        .collect();
    Ok(convex_hull(&points, 3)?)
}

/// Body-frame thrust and moment sets at zero attitude and zero external force.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseSets {
    pub thrust: Polytope,
    /// `M u` only; the gravity moment is applied per query.
    pub moment: Polytope,
}

pub fn base_sets(model: &MultirotorModel) -> Result<BaseSets, WrenchSetError> {
    guard(model, MAX_ROTORS_3D)?;
    Ok(BaseSets {
        thrust: convex_hull(&corner_images(model, SetKind::Thrust), 3)?,
        moment: convex_hull(&corner_images(model, SetKind::Moment), 3)?,
    })
}

impl BaseSets {
    /// Thrust set at `query` by rotating and shifting the base set.
    pub fn thrust_at(&self, model: &MultirotorModel, query: &WrenchSetQuery) -> Result<Polytope, WrenchSetError> {
        match query.frame {
            Frame::Body => Ok(self.thrust.clone()),
            Frame::Inertial => place(&self.thrust, &query.rotation(), &query.total_external_force(model)),
        }
    }

    /// Moment set at `query`, shifting the base set by the gravity moment.
    pub fn moment_at(&self, model: &MultirotorModel, query: &WrenchSetQuery) -> Result<Polytope, WrenchSetError> {
        let mg = gravity_moment(model, &query.attitude);
        match query.frame {
            Frame::Body => place(&self.moment, &Matrix3::identity(), &mg),
            Frame::Inertial => {
                let r = query.rotation();
                place(&self.moment, &r, &(r * mg))
            }
        }
    }
}

/// Lazily computed base sets with a count of hull constructions.
#[derive(Debug, Clone, Default)]
pub struct BaseSetCache {
    sets: Option<BaseSets>,
    wrench: Option<Polytope>,
    hull_builds: usize,
}

impl BaseSetCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn base_sets(&mut self, model: &MultirotorModel) -> Result<&BaseSets, WrenchSetError> {
        if self.sets.is_none() {
            self.sets = Some(base_sets(model)?);
            self.hull_builds += 2;
        }
        Ok(self.sets.as_ref().expect("filled above"))
    }

    /// Six-dimensional set without the gravity moment.
    pub fn base_wrench_set(&mut self, model: &MultirotorModel) -> Result<&Polytope, WrenchSetError> {
        if self.wrench.is_none() {
            guard(model, MAX_ROTORS_6D)?;
            self.wrench = Some(convex_hull(&corner_images(model, SetKind::Wrench), 6)?);
            self.hull_builds += 1;
        }
        Ok(self.wrench.as_ref().expect("filled above"))
    }

    /// Six-dimensional set at `attitude`, by translating the base set.
    pub fn wrench_set_at(&mut self, model: &MultirotorModel, attitude: &Vector3<f64>) -> Result<Polytope, WrenchSetError> {
        let mg = gravity_moment(model, attitude);
        let base = self.base_wrench_set(model)?;
        let shift = [0.0, 0.0, 0.0, mg[0], mg[1], mg[2]];
        Ok(base.transform(&identity_rows(6), &shift)?)
    }

    pub fn hull_builds(&self) -> usize {
        self.hull_builds
    }
}

/// Affine map from a body wrench to a command: `u = u_ref + P (w - [0; M_grav] - A u_ref)`
/// with `P` the pseudo-inverse of `[L; M]` and `u_ref` the mid-range command.
/// For a square allocation matrix this is the exact inverse.
#[derive(Debug, Clone)]
pub struct AllocationMap {
    pub pinv: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AllocationMap {
    pub fn new(model: &MultirotorModel, attitude: &Vector3<f64>) -> Result<Self, WrenchSetError> {
        let a = model.mixer().allocation();
        let rank = numeric_rank(&a);
        if rank < 6 {
            return Err(WrenchSetError::RankDeficient(rank));
        }
        let pinv = a.clone().pseudo_inverse(1e-12).map_err(|_| WrenchSetError::RankDeficient(rank))?;
        let mid = DVector::from_iterator(model.rotor_count(), model.rotors().iter().map(|r| 0.5 * (r.u_min + r.u_max)));
        let mg = gravity_moment(model, attitude);
        let grav = DVector::from_column_slice(&[0.0, 0.0, 0.0, mg[0], mg[1], mg[2]]);
        let offset = &mid - &pinv * (grav + &a * &mid);
        Ok(Self { pinv, offset })
    }

    pub fn command(&self, wrench: &[f64; 6]) -> DVector<f64> {
        &self.offset + &self.pinv * DVector::from_column_slice(wrench)
    }
}

/// Lateral thrust polygon for a desired normal thrust and moment, by a
/// deterministic sweep over `k` azimuth directions.
pub fn lateral_thrust_set(
    model: &MultirotorModel,
    attitude: &Vector3<f64>,
    fz_desired: f64,
    moment_sp: &Vector3<f64>,
    k: usize,
) -> Result<Polytope, WrenchSetError> {
    if k == 0 {
        return Err(WrenchSetError::NoDirections);
    }
    let map = AllocationMap::new(model, attitude)?;
    let u0 = map.command(&[0.0, 0.0, fz_desired, moment_sp[0], moment_sp[1], moment_sp[2]]);
    let lo = model.u_min();
    let hi = model.u_max();
    let span = hi.iter().zip(&lo).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())).max(1.0);
    let tol = DEFAULT_TOL * span.max(u0.amax());
    if (0..u0.len()).any(|i| u0[i] < lo[i] - tol || u0[i] > hi[i] + tol) {
        return Ok(Polytope::empty(2));
    }
    let n = u0.len();
    let px: Vec<f64> = (0..n).map(|i| map.pinv[(i, 0)]).collect();
    let py: Vec<f64> = (0..n).map(|i| map.pinv[(i, 1)]).collect();
    // Constraint (rotor, upper?) active at each direction's boundary point.
    let mut active: Vec<(usize, bool)> = Vec::with_capacity(k);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(2 * k);
    for j in 0..k {
        let th = 2.0 * PI * j as f64 / k as f64;
        let (s, c) = th.sin_cos();
        let mut rho = f64::INFINITY;
        let mut which = (usize::MAX, false);
        for i in 0..n {
            let d = px[i] * c + py[i] * s;
            let (limit, upper) = if d > 0.0 {
                ((hi[i] - u0[i]) / d, true)
            } else if d < 0.0 {
                ((lo[i] - u0[i]) / d, false)
            } else {
                continue;
            };
            let limit = limit.max(0.0);
            if limit < rho {
                rho = limit;
                which = (i, upper);
            }
        }
        if !rho.is_finite() {
            return Err(WrenchSetError::RankDeficient(numeric_rank(&model.mixer().allocation())));
        }
        points.push(vec![rho * c, rho * s]);
        active.push(which);
    }
    // Consecutive directions limited by different constraints bracket a vertex.
    for j in 0..k {
        let a = active[j];
        let b = active[(j + 1) % k];
        if a == b {
            continue;
        }
        let line = |(i, upper): (usize, bool)| -> (f64, f64, f64) {
            let bound = if upper { hi[i] } else { lo[i] };
            (px[i], py[i], bound - u0[i])
        };
        let (a1, b1, c1) = line(a);
        let (a2, b2, c2) = line(b);
        let det = a1 * b2 - a2 * b1;
        if det.abs() < 1e-300 {
            continue;
        }
        let x = (c1 * b2 - c2 * b1) / det;
        let y = (a1 * c2 - a2 * c1) / det;
        let feasible = (0..n).all(|i| {
            let ui = u0[i] + px[i] * x + py[i] * y;
            ui >= lo[i] - tol && ui <= hi[i] + tol
        });
        if feasible {
            points.push(vec![x, y]);
        }
    }
    Ok(convex_hull(&points, 2)?)
}

/// Six-dimensional wrench set `[L u; M u + M_grav]` at `attitude`.
pub fn wrench_set_6d(model: &MultirotorModel, attitude: &Vector3<f64>) -> Result<Polytope, WrenchSetError> {
    guard(model, MAX_ROTORS_6D)?;
    let mg = gravity_moment(model, attitude);
    let points: Vec<Vec<f64>> = corner_images(model, SetKind::Wrench)
        .into_iter()
        .map(|mut p| {
            (0..3).for_each(|k| p[k + 3] += mg[k]);
            p
        })
        .collect();
    Ok(convex_hull(&points, 6)?)
}

/// Slices `set` at every fixed component, highest index first so remaining
/// indices stay valid.
pub fn slice_components(set: &Polytope, fixed: &BTreeMap<usize, f64>) -> Result<Polytope, WrenchSetError> {
    if fixed.len() > 5 {
        return Err(WrenchSetError::TooManyFixed(fixed.len()));
    }
    if let Some((&k, _)) = fixed.iter().find(|(&k, _)| k >= 6) {
        return Err(WrenchSetError::BadComponent(k));
    }
    let mut out = set.clone();
    for (&k, &v) in fixed.iter().rev() {
        out = out.slice_fix_coordinate(k, v)?;
    }
    Ok(out)
}

pub fn wrench_set_with_fixed(
    model: &MultirotorModel,
    attitude: &Vector3<f64>,
    fixed: &BTreeMap<usize, f64>,
) -> Result<Polytope, WrenchSetError> {
    if fixed.len() > 5 {
        return Err(WrenchSetError::TooManyFixed(fixed.len()));
    }
    if let Some((&k, _)) = fixed.iter().find(|(&k, _)| k >= 6) {
        return Err(WrenchSetError::BadComponent(k));
    }
    slice_components(&wrench_set_6d(model, attitude)?, fixed)
}

/// Which rotor tilt angle the pitch sampling varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PitchAxis {
    #[default]
    Sideward,
    Inward,
}

/// Union hull of the six-dimensional sets over sampled rotor pitch angles.
pub fn variable_pitch_wrench_set(
    model: &MultirotorModel,
    attitude: &Vector3<f64>,
    pitch_ranges: &[(f64, f64)],
    samples_per_rotor: usize,
    axis: PitchAxis,
) -> Result<Polytope, WrenchSetError> {
    guard(model, MAX_ROTORS_6D)?;
    let n = model.rotor_count();
    if pitch_ranges.len() != n {
        return Err(WrenchSetError::PitchRanges { got: pitch_ranges.len(), expected: n });
    }
    let grids: Vec<Vec<f64>> = pitch_ranges
        .iter()
        .map(|&(a, b)| {
            if a == b || samples_per_rotor <= 1 {
                vec![a]
            } else {
                (0..samples_per_rotor).map(|s| a + (b - a) * s as f64 / (samples_per_rotor - 1) as f64).collect()
            }
        })
        .collect();
    let combos = grids.iter().try_fold(1usize, |acc, g| acc.checked_mul(g.len())).unwrap_or(usize::MAX);
    if combos > MAX_PITCH_COMBINATIONS {
        return Err(WrenchSetError::SampleBudget(combos));
    }
    let mg = gravity_moment(model, attitude);
    let mut points = Vec::with_capacity(combos << n);
    let mut rotors: Vec<RotorSpec> = model.rotors().to_vec();
    for mut c in 0..combos {
        for (i, g) in grids.iter().enumerate() {
            let angle = g[c % g.len()];
            c /= g.len();
            match axis {
                PitchAxis::Sideward => rotors[i].phi_y_rad = angle,
                PitchAxis::Inward => rotors[i].phi_x_rad = angle,
            }
        }
        let mixer = crate::model::build_mixer(&rotors);
        for mut p in corner_images_of(mixer.l, mixer.m, &rotors, SetKind::Wrench) {
            (0..3).for_each(|k| p[k + 3] += mg[k]);
            points.push(p);
        }
    }
    Ok(convex_hull(&points, 6)?)
}

/// Copy of `model` with rotor `index` stopped.
pub fn apply_rotor_failure(model: &MultirotorModel, index: usize) -> Result<MultirotorModel, WrenchSetError> {
    if index >= model.rotor_count() {
        return Err(WrenchSetError::RotorIndex(index));
    }
    let mut rotors = model.rotors().to_vec();
    rotors[index].u_min = 0.0;
    rotors[index].u_max = 0.0;
    model.with_rotors(rotors).map_err(|_| WrenchSetError::RotorIndex(index))
}

/// Whether a body-frame wrench lies in the six-dimensional set.
pub fn is_feasible(model: &MultirotorModel, attitude: &Vector3<f64>, wrench: &Wrench) -> Result<bool, WrenchSetError> {
    let set = wrench_set_6d(model, attitude)?;
    Ok(set.contains(&wrench.to_array(), DEFAULT_TOL))
}

/// Corner command whose image equals `vertex` within `tol` (relative).
pub fn corner_for_vertex(
    model: &MultirotorModel,
    attitude: &Vector3<f64>,
    kind: SetKind,
    vertex: &[f64],
    tol: f64,
) -> Option<usize> {
    let mg = gravity_moment(model, attitude);
    let scale = vertex.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    corner_images(model, kind).iter().position(|p| {
        p.iter().enumerate().all(|(k, x)| {
            let shift = match (kind, k) {
                (SetKind::Moment, k) => mg[k],
                (SetKind::Wrench, k) if k >= 3 => mg[k - 3],
                _ => 0.0,
            };
            (x + shift - vertex[k]).abs() <= tol * scale
        })
    })
}
