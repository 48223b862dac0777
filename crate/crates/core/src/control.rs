//! Cascaded PID control, allocation, saturation handling and hybrid
//! position/force control.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::dynamics::{euler_rate_matrix, euler_rate_matrix_dot, DynamicsError, Frame, VehicleState, Wrench};
use crate::geometry::{Polytope, DEFAULT_TOL};
use crate::model::{gravity_moment, numeric_rank, wrap_angle, MultirotorModel};
use crate::strategies::AttitudeSetpoint;
use crate::wrenchset::{corner_command, slice_components, BaseSetCache, WrenchSetError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("allocation matrix has rank {rank}, need {needed}")]
    RankDeficient { rank: usize, needed: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("selection matrices invalid: {0}")]
    Selection(&'static str),
    #[error("anchor wrench is outside the wrench set")]
    AnchorInfeasible,
    #[error(transparent)]
    WrenchSet(#[from] WrenchSetError),
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
}

/// Per-axis PID gains.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PidGains {
    pub kp: [f64; 3],
    pub ki: [f64; 3],
    pub kd: [f64; 3],
    pub integral_limit: [f64; 3],
    #[cfg_attr(feature = "serde", serde(default))]
    pub output_limit: Option<[f64; 3]>,
}

impl PidGains {
    pub fn is_valid(&self) -> bool {
        let all = self.kp.iter().chain(&self.ki).chain(&self.kd).chain(&self.integral_limit);
        let out_ok = self.output_limit.is_none_or(|o| o.iter().all(|x| *x >= 0.0));
        all.into_iter().all(|x| *x >= 0.0 && x.is_finite()) && out_ok
    }

    /// Shipped position-loop gains for the bundled airframes.
    pub fn default_position() -> Self {
        Self {
            kp: [4.0, 4.0, 6.0],
            ki: [0.4, 0.4, 1.0],
            kd: [3.2, 3.2, 4.0],
            integral_limit: [0.5, 0.5, 0.5],
            output_limit: Some([1.5, 1.5, 3.0]),
        }
    }

    pub fn default_attitude() -> Self {
        Self {
            kp: [100.0, 100.0, 36.0],
            ki: [0.0, 0.0, 0.0],
            kd: [20.0, 20.0, 12.0],
            integral_limit: [0.0, 0.0, 0.0],
            output_limit: None,
        }
    }

    pub fn default_force() -> Self {
        Self { kp: [0.3, 0.3, 0.3], ki: [6.0, 6.0, 6.0], kd: [0.0; 3], integral_limit: [0.0; 3], output_limit: None }
    }
}

fn clamp3(v: Vector3<f64>, limit: &[f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0].clamp(-limit[0], limit[0]), v[1].clamp(-limit[1], limit[1]), v[2].clamp(-limit[2], limit[2]))
}

fn check_dt(dt: f64) -> Result<(), ControlError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(ControlError::BadStep(dt))
    }
}

/// Outer position loop producing the desired inertial force.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionController {
    pub gains: PidGains,
    integral: Vector3<f64>,
}

impl PositionController {
    pub fn new(gains: PidGains) -> Self {
        Self { gains, integral: Vector3::zeros() }
    }

    pub fn integral(&self) -> Vector3<f64> {
        self.integral
    }

    pub fn reset(&mut self) {
        self.integral = Vector3::zeros();
    }

    /// Desired acceleration, before gravity compensation.
    pub fn acceleration(
        &mut self,
        state: &VehicleState,
        position_sp: &Vector3<f64>,
        velocity_sp: &Vector3<f64>,
        dt: f64,
    ) -> Result<Vector3<f64>, ControlError> {
        check_dt(dt)?;
        let g = &self.gains;
        let e = position_sp - state.position;
        let previous = self.integral;
        self.integral = clamp3(self.integral + e * dt, &g.integral_limit);
        let ev = velocity_sp - state.velocity;
        let mut a = Vector3::zeros();
        for k in 0..3 {
            a[k] = g.kp[k] * e[k] + g.ki[k] * self.integral[k] + g.kd[k] * ev[k];
        }
        if let Some(lim) = &g.output_limit {
            // Conditional integration: freeze the axis while its output saturates
            // in the direction of the error.
            for k in 0..3 {
                if a[k].abs() > lim[k] && a[k] * e[k] > 0.0 {
                    self.integral[k] = previous[k];
                }
            }
            a = clamp3(a, lim);
        }
        Ok(a)
    }

    /// `F_des = m (a_des - [0, 0, g])`.
    pub fn update(
        &mut self,
        model: &MultirotorModel,
        state: &VehicleState,
        position_sp: &Vector3<f64>,
        velocity_sp: &Vector3<f64>,
        dt: f64,
    ) -> Result<Vector3<f64>, ControlError> {
        let a = self.acceleration(state, position_sp, velocity_sp, dt)?;
        Ok((a - Vector3::new(0.0, 0.0, model.gravity())) * model.mass())
    }
}

/// Inner Euler-angle loop producing desired Euler accelerations.
#[derive(Debug, Clone, PartialEq)]
pub struct AttitudeController {
    pub gains: PidGains,
    integral: Vector3<f64>,
}

impl AttitudeController {
    pub fn new(gains: PidGains) -> Self {
        Self { gains, integral: Vector3::zeros() }
    }

    pub fn reset(&mut self) {
        self.integral = Vector3::zeros();
    }

    pub fn update(&mut self, state: &VehicleState, setpoint: &AttitudeSetpoint, dt: f64) -> Result<Vector3<f64>, ControlError> {
        check_dt(dt)?;
        let g = &self.gains;
        let mut e = setpoint.euler - state.attitude;
        e[2] = wrap_angle(e[2]);
        self.integral = clamp3(self.integral + e * dt, &g.integral_limit);
        let rates = state.attitude_rates()?;
        let mut out = Vector3::zeros();
        for k in 0..3 {
            out[k] = g.kp[k] * e[k] + g.ki[k] * self.integral[k] - g.kd[k] * rates[k];
        }
        if let Some(lim) = &g.output_limit {
            out = clamp3(out, lim);
        }
        Ok(out)
    }
}

/// Desired second derivative of the output `y = [position; attitude]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelSetpoint {
    pub linear: Vector3<f64>,
    pub euler: Vector3<f64>,
}

/// Total body moment that produces Euler acceleration `euler_accel`.
pub fn moment_for_euler_accel(
    model: &MultirotorModel,
    state: &VehicleState,
    euler_accel: &Vector3<f64>,
) -> Result<Vector3<f64>, ControlError> {
    let eta = euler_rate_matrix(&state.attitude)?;
    let rates = state.attitude_rates()?;
    let eta_dot = euler_rate_matrix_dot(&state.attitude, &rates)?;
    let w = state.body_rates;
    let inv = eta.try_inverse().ok_or(ControlError::Dynamics(DynamicsError::SingularPitch(state.attitude[1])))?;
    let w_dot = inv * (euler_accel - eta_dot * w);
    let i = model.inertia();
    Ok(i * w_dot + w.cross(&(i * w)))
}

fn solve_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
    svd.solve(b, 1e-12 * smax.max(f64::MIN_POSITIVE)).expect("both factors computed")
}

/// Dynamic-inversion allocation: the command that produces `accel_sp` from
/// `state`, exact for square systems and minimum-norm for redundant ones.
/// A rank-deficient map is accepted as long as the demand lies in its range.
pub fn allocate(model: &MultirotorModel, state: &VehicleState, accel_sp: &AccelSetpoint) -> Result<DVector<f64>, ControlError> {
    let n = model.rotor_count();
    let eta = euler_rate_matrix(&state.attitude)?;
    let rates = state.attitude_rates()?;
    let eta_dot = euler_rate_matrix_dot(&state.attitude, &rates)?;
    let r = state.rotation();
    let i = model.inertia();
    let i_inv = i.try_inverse().ok_or(ControlError::RankDeficient { rank: 0, needed: 6 })?;
    let mixer = model.mixer();
    let top = r * &mixer.l / model.mass();
    let bottom = eta * i_inv * &mixer.m;
    let mut a = DMatrix::zeros(6, n);
    a.view_mut((0, 0), (3, n)).copy_from(&top);
    a.view_mut((3, 0), (3, n)).copy_from(&bottom);
    let rank = numeric_rank(&a);
    let w = state.body_rates;
    let drift_lin = Vector3::new(0.0, 0.0, model.gravity());
    let drift_ang = eta_dot * w + eta * i_inv * (gravity_moment(model, &state.attitude) - w.cross(&(i * w)));
    let lin = accel_sp.linear - drift_lin;
    let ang = accel_sp.euler - drift_ang;
    let b = DVector::from_column_slice(&[lin[0], lin[1], lin[2], ang[0], ang[1], ang[2]]);
    let u = solve_min_norm(&a, &b);
    if rank < 6 && (&a * &u - &b).norm() > 1e-9 * (1.0 + b.norm()) {
        return Err(ControlError::RankDeficient { rank, needed: 6 });
    }
    Ok(u)
}

/// Result of a wrench-level allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct WrenchAllocation {
    pub u: DVector<f64>,
    /// Norm of the part of the request the rotors cannot produce.
    pub residual: f64,
    pub rank: usize,
}

/// Minimum-norm command for a body thrust and total body moment request.
///
/// When the minimum-norm command leaves the rotor bounds, violating rotors
/// are pinned to the nearest bound and the rest re-solved. The pinned
/// command is kept only if it still meets the request exactly; otherwise the
/// plain minimum-norm command is returned for saturation downstream.
pub fn allocate_wrench(
    model: &MultirotorModel,
    attitude: &Vector3<f64>,
    f_sp_body: &Vector3<f64>,
    m_sp_body: &Vector3<f64>,
) -> WrenchAllocation {
    let full = model.mixer().allocation();
    let m = m_sp_body - gravity_moment(model, attitude);
    let b = DVector::from_column_slice(&[f_sp_body[0], f_sp_body[1], f_sp_body[2], m[0], m[1], m[2]]);
    let lo = model.u_min();
    let hi = model.u_max();
    // Rotors with an empty range (failed) stay at their bound.
    let mut pinned: Vec<Option<f64>> = model.rotors().iter().map(|r| (r.u_max <= r.u_min).then_some(r.u_min)).collect();
    let first = solve_pinned(&full, &b, &pinned);
    let rank = first.1;
    let mut u = first.0.clone();
    let tol = 1e-9 * (1.0 + b.norm());
    for _ in 0..u.len() {
        let mut moved = false;
        for i in 0..u.len() {
            if pinned[i].is_none() && (u[i] < lo[i] || u[i] > hi[i]) {
                pinned[i] = Some(u[i].max(lo[i]).min(hi[i]));
                moved = true;
            }
        }
        if !moved {
            break;
        }
        u = solve_pinned(&full, &b, &pinned).0;
        if (&full * &u - &b).norm() > tol {
            u = first.0.clone();
            break;
        }
    }
    let residual = (&full * &u - b).norm();
    WrenchAllocation { u, residual, rank }
}

fn solve_pinned(full: &DMatrix<f64>, b: &DVector<f64>, pinned: &[Option<f64>]) -> (DVector<f64>, usize) {
    let mut a = full.clone();
    let mut fixed = DVector::zeros(pinned.len());
    for (i, p) in pinned.iter().enumerate() {
        if let Some(v) = p {
            a.column_mut(i).fill(0.0);
            fixed[i] = *v;
        }
    }
    let rhs = b - full * &fixed;
    let mut u = solve_min_norm(&a, &rhs);
    for (i, p) in pinned.iter().enumerate() {
        if let Some(v) = p {
            u[i] = *v;
        }
    }
    (u, numeric_rank(&a))
}

fn in_bounds(u: &DVector<f64>, lo: &[f64], hi: &[f64]) -> bool {
    u.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| *x >= *l && *x <= *h)
}

/// Clips a convex polygon by `a·p <= b`.
fn clip(poly: &[[f64; 2]], a: [f64; 2], b: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let side = |p: &[f64; 2]| a[0] * p[0] + a[1] * p[1] - b;
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        let (sp, sq) = (side(&p), side(&q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Feasible `(beta, gamma)` region in the unit square for a fixed `alpha`.
fn beta_gamma_region(alpha: f64, parts: &[DVector<f64>; 3], lo: &[f64], hi: &[f64]) -> Vec<[f64; 2]> {
    let scale = lo.iter().chain(hi).fold(1.0f64, |m, x| m.max(x.abs()));
    let s = 1e-12 * scale;
    let mut poly = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    for i in 0..lo.len() {
        let base = alpha * parts[0][i];
        let a = [parts[1][i], parts[2][i]];
        poly = clip(&poly, a, hi[i] - base + s);
        poly = clip(&poly, [-a[0], -a[1]], base - lo[i] + s);
        if poly.is_empty() {
            break;
        }
    }
    poly
}

/// Brings `u` within the rotor limits, keeping the roll and pitch moments
/// first, then the yaw moment, then the thrust.
///
/// The requested actuator wrench is split into its roll/pitch moment, yaw
/// moment and force parts, each allocated separately, and the command is
/// rebuilt as `alpha u_rp + beta u_yaw + gamma u_f` with the weights chosen
/// lexicographically largest in that order.
pub fn saturate_priority(model: &MultirotorModel, u: &DVector<f64>) -> DVector<f64> {
    let lo = model.u_min();
    let hi = model.u_max();
    if in_bounds(u, &lo, &hi) {
        return u.clone();
    }
    let clamped = || DVector::from_iterator(u.len(), u.iter().zip(lo.iter().zip(&hi)).map(|(x, (l, h))| x.max(*l).min(*h)));
    let a = model.mixer().allocation();
    let w = &a * u;
    let mut w_rp = DVector::zeros(6);
    w_rp[3] = w[3];
    w_rp[4] = w[4];
    let mut w_yaw = DVector::zeros(6);
    w_yaw[5] = w[5];
    let mut w_f = DVector::zeros(6);
    w_f.rows_mut(0, 3).copy_from(&w.rows(0, 3));
    let u_rp = solve_min_norm(&a, &w_rp);
    let u_yaw = solve_min_norm(&a, &w_yaw);
    // Null-space content of `u` travels with the force part.
    let u_f = u - &u_rp - &u_yaw;
    let parts = [u_rp, u_yaw, u_f];

    let feasible = |alpha: f64| !beta_gamma_region(alpha, &parts, &lo, &hi).is_empty();
    let alpha = if feasible(1.0) {
        1.0
    } else if !feasible(0.0) {
        return clamped();
    } else {
        let (mut good, mut bad) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (good + bad);
            if feasible(mid) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    };
    let region = beta_gamma_region(alpha, &parts, &lo, &hi);
    let best = region.iter().copied().fold(None::<[f64; 2]>, |acc, p| match acc {
        None => Some(p),
        Some(q) if p[0] > q[0] + 1e-12 || ((p[0] - q[0]).abs() <= 1e-12 && p[1] > q[1]) => Some(p),
        keep => keep,
    });
    let Some([beta, gamma]) = best else { return clamped() };
    let out = &parts[0] * alpha + &parts[1] * beta.clamp(0.0, 1.0) + &parts[2] * gamma.clamp(0.0, 1.0);
    DVector::from_iterator(out.len(), out.iter().zip(lo.iter().zip(&hi)).map(|(x, (l, h))| x.max(*l).min(*h)))
}

/// Position and force selection in the contact frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionMatrices {
    pub s_p: Matrix3<f64>,
    pub s_f: Matrix3<f64>,
    /// `R_IC`, contact frame to inertial.
    pub contact_rotation: Matrix3<f64>,
}

impl SelectionMatrices {
    /// Natural constraints only: force along the flagged contact axes,
    /// position along the rest.
    pub fn natural(force_axes: [bool; 3], contact_rotation: Matrix3<f64>) -> Self {
        let f = Vector3::new(
            force_axes[0] as u8 as f64,
            force_axes[1] as u8 as f64,
            force_axes[2] as u8 as f64,
        );
        let s_f = Matrix3::from_diagonal(&f);
        Self { s_p: Matrix3::identity() - s_f, s_f, contact_rotation }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        for i in 0..3 {
            for j in 0..3 {
                let (p, f) = (self.s_p[(i, j)], self.s_f[(i, j)]);
                if i != j && (p != 0.0 || f != 0.0) {
                    return Err(ControlError::Selection("off-diagonal entries must be zero"));
                }
                if i == j {
                    if !(p == 0.0 || p == 1.0) || !(f == 0.0 || f == 1.0) {
                        return Err(ControlError::Selection("diagonal entries must be 0 or 1"));
                    }
                    if p * f != 0.0 {
                        return Err(ControlError::Selection("position and force select the same axis"));
                    }
                }
            }
        }
        let r = &self.contact_rotation;
        if (r.transpose() * r - Matrix3::identity()).abs().max() > 1e-9 || r.determinant() <= 0.0 {
            return Err(ControlError::Selection("contact rotation is not a rotation"));
        }
        Ok(())
    }
}

/// Contact frame whose Z axis points into a surface with outward `normal`.
pub fn contact_frame(normal: &Vector3<f64>) -> Matrix3<f64> {
    let z = -normal.normalize();
    let helper = if z[2].abs() < 0.9 { Vector3::z() } else { Vector3::x() };
    let x = helper.cross(&z).normalize();
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z])
}

/// Hybrid combination in the contact frame.
pub fn hpfc_combine_contact(f_pos_c: &Vector3<f64>, f_force_c: &Vector3<f64>, sel: &SelectionMatrices) -> Result<Vector3<f64>, ControlError> {
    sel.validate()?;
    let mut out = Vector3::zeros();
    for k in 0..3 {
        out[k] = if sel.s_f[(k, k)] == 1.0 {
            f_force_c[k]
        } else if sel.s_p[(k, k)] == 1.0 {
            f_pos_c[k]
        } else {
            0.0
        };
    }
    Ok(out)
}

/// `F_des = R_IC (S_p R_CI f_pos + S_f R_CI f_force)`.
pub fn hpfc_combine(f_pos: &Vector3<f64>, f_force: &Vector3<f64>, sel: &SelectionMatrices) -> Result<Vector3<f64>, ControlError> {
    let r_ci = sel.contact_rotation.transpose();
    let c = hpfc_combine_contact(&(r_ci * f_pos), &(r_ci * f_force), sel)?;
    Ok(sel.contact_rotation * c)
}

/// Incremental force controller working in the contact frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceController {
    pub gains: PidGains,
    /// Gain applied to changes of the desired force.
    pub feed_forward: f64,
    output_c: Vector3<f64>,
    prev_error: [Vector3<f64>; 2],
    prev_desired: Option<Vector3<f64>>,
}

impl ForceController {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            feed_forward: 1.0,
            output_c: Vector3::zeros(),
            prev_error: [Vector3::zeros(); 2],
            prev_desired: None,
        }
    }

    /// Starts from `output_c` so that engagement is bumpless.
    pub fn engage(&mut self, output_c: Vector3<f64>) {
        self.output_c = output_c;
        self.prev_error = [Vector3::zeros(); 2];
        self.prev_desired = None;
    }

    pub fn output_contact(&self) -> Vector3<f64> {
        self.output_c
    }

    /// One update. `measured_ee` is the force applied by the tool, in the
    /// end-effector frame, and `r_ie` the end-effector orientation.
    pub fn update(
        &mut self,
        measured_ee: &Vector3<f64>,
        desired_c: &Vector3<f64>,
        r_ic: &Matrix3<f64>,
        r_ie: &Matrix3<f64>,
        dt: f64,
    ) -> Result<Vector3<f64>, ControlError> {
        check_dt(dt)?;
        let measured_c = r_ic.transpose() * (r_ie * measured_ee);
        let e = desired_c - measured_c;
        let [e1, e2] = self.prev_error;
        let g = &self.gains;
        let mut delta = Vector3::zeros();
        for k in 0..3 {
            delta[k] = g.kp[k] * (e[k] - e1[k]) + g.ki[k] * e[k] * dt + g.kd[k] * (e[k] - 2.0 * e1[k] + e2[k]) / dt;
        }
        if let Some(prev) = self.prev_desired {
            delta += (desired_c - prev) * self.feed_forward;
        }
        self.output_c += delta;
        if let Some(lim) = &g.output_limit {
            self.output_c = clamp3(self.output_c, lim);
        }
        self.prev_error = [e, e1];
        self.prev_desired = Some(*desired_c);
        Ok(r_ic * self.output_c)
    }
}

/// Stateless form of one incremental step.
pub fn force_pid(
    measured_ee: &Vector3<f64>,
    desired_c: &Vector3<f64>,
    r_ic: &Matrix3<f64>,
    r_ie: &Matrix3<f64>,
    gains: &PidGains,
    dt: f64,
    last_output_c: &Vector3<f64>,
) -> Result<Vector3<f64>, ControlError> {
    let mut c = ForceController::new(*gains);
    c.engage(*last_output_c);
    c.update(measured_ee, desired_c, r_ic, r_ie, dt)
}

/// What [`wrench_optimize`] keeps when the setpoint is infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WrenchPriority {
    #[default]
    PreserveMoment,
    PreserveDirection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedWrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
    pub changed: bool,
    /// Whether the moment slice was used.
    pub moment_preserved: bool,
}

/// Hover wrench at `attitude` if it is in `set`, else the all-minimum corner.
pub fn default_anchor(model: &MultirotorModel, attitude: &Vector3<f64>, set: &Polytope) -> [f64; 6] {
    let f = model.hover_force(attitude);
    let hover = [f[0], f[1], f[2], 0.0, 0.0, 0.0];
    if set.contains(&hover, DEFAULT_TOL) {
        return hover;
    }
    let a = model.mixer().allocation();
    let u = corner_command(model, 0);
    let w = &a * u;
    let mg = gravity_moment(model, attitude);
    [w[0], w[1], w[2], w[3] + mg[0], w[4] + mg[1], w[5] + mg[2]]
}

/// Moves an infeasible body wrench setpoint into `set`, the six-dimensional
/// wrench set at the current attitude.
pub fn wrench_optimize_in(
    set: &Polytope,
    anchor: &[f64; 6],
    f_sp: &Vector3<f64>,
    m_sp: &Vector3<f64>,
    priority: WrenchPriority,
) -> Result<OptimizedWrench, ControlError> {
    let tol = DEFAULT_TOL;
    let target = [f_sp[0], f_sp[1], f_sp[2], m_sp[0], m_sp[1], m_sp[2]];
    if set.contains(&target, tol) {
        return Ok(OptimizedWrench { force: *f_sp, moment: *m_sp, changed: false, moment_preserved: true });
    }
    if !set.contains(anchor, tol) {
        return Err(ControlError::AnchorInfeasible);
    }
    if priority == WrenchPriority::PreserveMoment {
        let fixed: BTreeMap<usize, f64> = [(3, m_sp[0]), (4, m_sp[1]), (5, m_sp[2])].into_iter().collect();
        let slice = slice_components(set, &fixed)?;
        if !slice.is_empty() {
            let a = if slice.contains(&anchor[..3], tol) {
                anchor[..3].to_vec()
            } else {
                slice.vertex_centroid().expect("nonempty slice")
            };
            let (p, _) = slice.ray_clip(&a, &target[..3], tol).map_err(WrenchSetError::from)?;
            return Ok(OptimizedWrench {
                force: Vector3::new(p[0], p[1], p[2]),
                moment: *m_sp,
                changed: true,
                moment_preserved: true,
            });
        }
    }
    let (p, _) = set.ray_clip(anchor, &target, tol).map_err(WrenchSetError::from)?;
    Ok(OptimizedWrench {
        force: Vector3::new(p[0], p[1], p[2]),
        moment: Vector3::new(p[3], p[4], p[5]),
        changed: true,
        moment_preserved: false,
    })
}

/// One-shot optimizer: builds the wrench set at `attitude` and uses the
/// given anchor, or [`default_anchor`].
pub fn wrench_optimize(
    model: &MultirotorModel,
    attitude: &Vector3<f64>,
    f_sp: &Vector3<f64>,
    m_sp: &Vector3<f64>,
    anchor: Option<&Wrench>,
    priority: WrenchPriority,
) -> Result<OptimizedWrench, ControlError> {
    let set = crate::wrenchset::wrench_set_6d(model, attitude)?;
    let a = match anchor {
        Some(w) => w.to_array(),
        None => default_anchor(model, attitude, &set),
    };
    wrench_optimize_in(&set, &a, f_sp, m_sp, priority)
}

/// Optimizer that reuses the attitude-independent base wrench set.
#[derive(Debug, Clone, Default)]
pub struct WrenchOptimizer {
    pub priority: WrenchPriority,
    cache: BaseSetCache,
}

impl WrenchOptimizer {
    pub fn new(priority: WrenchPriority) -> Self {
        Self { priority, cache: BaseSetCache::new() }
    }

    pub fn set_at(&mut self, model: &MultirotorModel, attitude: &Vector3<f64>) -> Result<Polytope, ControlError> {
        Ok(self.cache.wrench_set_at(model, attitude)?)
    }

    pub fn optimize(
        &mut self,
        model: &MultirotorModel,
        attitude: &Vector3<f64>,
        f_sp: &Vector3<f64>,
        m_sp: &Vector3<f64>,
    ) -> Result<OptimizedWrench, ControlError> {
        let set = self.set_at(model, attitude)?;
        let anchor = default_anchor(model, attitude, &set);
        wrench_optimize_in(&set, &anchor, f_sp, m_sp, self.priority)
    }
}

/// Total body wrench of a command, as a [`Wrench`] in the body frame.
pub fn wrench_of(model: &MultirotorModel, attitude: &Vector3<f64>, u: &DVector<f64>) -> Wrench {
    let w = crate::dynamics::total_wrench(model, attitude, u);
    Wrench { force: w.force, moment: w.moment, frame: Frame::Body }
}
