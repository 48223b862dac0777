//! Closed-loop scenario runner.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DVector, Matrix3, Vector3};
#[allow(unused_imports)] // float math without std
use num_traits::Float;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::control::{
    allocate_wrench, contact_frame, hpfc_combine, moment_for_euler_accel, saturate_priority, AttitudeController,
    ControlError, ForceController, PidGains, PositionController, SelectionMatrices, WrenchOptimizer, WrenchPriority,
};
use crate::dynamics::{contact_force, step_rk4_with, ContactSurface, DynamicsError, ExternalWrench, VehicleState};
use crate::model::MultirotorModel;
use crate::strategies::{attitude_fixed, attitude_zero_tilt, AttitudeSetpoint, AttitudeStrategy, ThrustStrategy};
use crate::wrenchset::apply_rotor_failure;

/// State magnitude treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(&'static str),
    #[error("simulation diverged at tick {tick} (t = {time} s)")]
    Diverged { tick: usize, time: f64 },
    #[error("dynamics failed at tick {tick}: {source}")]
    Dynamics { tick: usize, source: DynamicsError },
    #[error("controller failed at tick {tick}: {source}")]
    Control { tick: usize, source: ControlError },
}

impl SimError {
    pub fn tick(&self) -> Option<usize> {
        match self {
            Self::Invalid(_) => None,
            Self::Diverged { tick, .. } | Self::Dynamics { tick, .. } | Self::Control { tick, .. } => Some(*tick),
        }
    }
}

/// Position and yaw setpoint active from time `t`. Roll and pitch, when
/// given, override the attitude strategy while the waypoint is active.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Waypoint {
    pub t: f64,
    pub position: [f64; 3],
    #[cfg_attr(feature = "serde", serde(default))]
    pub yaw: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub roll_pitch: Option<[f64; 2]>,
}

/// Normal-force setpoint active from time `t`, newtons pushing into the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ForcePoint {
    pub t: f64,
    pub force: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ContactTask {
    pub surface: ContactSurface,
    /// Tool tip in the body frame.
    pub ee_offset: [f64; 3],
    pub force_setpoint: Vec<ForcePoint>,
    /// Contact-frame axes under force control; Z points into the surface.
    #[cfg_attr(feature = "serde", serde(default = "default_force_axes"))]
    pub force_axes: [bool; 3],
    /// When false the task runs on position control alone.
    #[cfg_attr(feature = "serde", serde(default = "default_true"))]
    pub force_control: bool,
}

#[cfg(feature = "serde")]
fn default_force_axes() -> [bool; 3] {
    [false, false, true]
}

#[cfg(feature = "serde")]
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct RotorFailure {
    pub rotor: usize,
    pub t: f64,
}

/// Stationary standard deviation (N) and correlation time (s) of gusts.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Gust {
    pub std: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub position: PidGains,
    pub attitude: PidGains,
    pub force: PidGains,
    pub force_feed_forward: f64,
    /// Velocity damping along the force-controlled axes, 1/s (scaled by mass).
    pub force_damping: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            position: PidGains::default_position(),
            attitude: PidGains::default_attitude(),
            force: PidGains::default_force(),
            force_feed_forward: 1.0,
            force_damping: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: MultirotorModel,
    pub initial_state: VehicleState,
    pub waypoints: Vec<Waypoint>,
    pub attitude_strategy: AttitudeStrategy,
    pub thrust_strategy: ThrustStrategy,
    pub gains: ControllerGains,
    pub contact: Option<ContactTask>,
    /// Constant inertial disturbance force.
    pub wind: Vector3<f64>,
    /// Gusts added to the wind: a first-order Gauss-Markov force per axis.
    pub gust: Option<Gust>,
    pub dt: f64,
    pub duration: f64,
    /// Integration steps per control tick.
    pub decimation: usize,
    pub failures: Vec<RotorFailure>,
    pub seed: u64,
    /// Standard deviation of the force sensor noise, N.
    pub force_noise_std: f64,
    pub optimizer: Option<WrenchPriority>,
}

impl Scenario {
    /// Hold at `position` with default settings.
    pub fn hover(model: MultirotorModel, position: Vector3<f64>) -> Self {
        Self {
            model,
            initial_state: VehicleState::at_rest(position, 0.0),
            waypoints: vec![Waypoint { t: 0.0, position: position.into(), yaw: 0.0, roll_pitch: None }],
            attitude_strategy: AttitudeStrategy::ZeroTilt,
            thrust_strategy: ThrustStrategy::Project,
            gains: ControllerGains::default(),
            contact: None,
            wind: Vector3::zeros(),
            gust: None,
            dt: 1e-3,
            duration: 10.0,
            decimation: 1,
            failures: Vec::new(),
            seed: 0,
            force_noise_std: 0.0,
            optimizer: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(SimError::Invalid("duration must be positive"));
        }
        if !(self.dt > 0.0 && self.dt <= crate::dynamics::MAX_STEP) {
            return Err(SimError::Invalid("dt must lie in (0, 0.05]"));
        }
        if self.decimation == 0 {
            return Err(SimError::Invalid("decimation must be at least 1"));
        }
        if self.waypoints.windows(2).any(|w| !(w[0].t <= w[1].t)) {
            return Err(SimError::Invalid("waypoint times must be sorted"));
        }
        if let Some(g) = &self.gust {
            if !(g.std >= 0.0 && g.std.is_finite() && g.tau > 0.0 && g.tau.is_finite()) {
                return Err(SimError::Invalid("gust needs std >= 0 and tau > 0"));
            }
        }
        if !(self.force_noise_std >= 0.0 && self.force_noise_std.is_finite()) {
            return Err(SimError::Invalid("noise level must be non-negative"));
        }
        let g = &self.gains;
        if !(g.position.is_valid() && g.attitude.is_valid() && g.force.is_valid() && g.force_damping >= 0.0) {
            return Err(SimError::Invalid("gains must be non-negative"));
        }
        if self.failures.iter().any(|f| f.rotor >= self.model.rotor_count()) {
            return Err(SimError::Invalid("failed rotor index out of range"));
        }
        if let Some(c) = &self.contact {
            let n = Vector3::from(c.surface.normal);
            if (n.norm() - 1.0).abs() > 1e-9 {
                return Err(SimError::Invalid("contact normal must be unit length"));
            }
            if c.force_setpoint.windows(2).any(|w| !(w[0].t <= w[1].t)) {
                return Err(SimError::Invalid("force setpoint times must be sorted"));
            }
        }
        Ok(())
    }
}

/// One control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub state: VehicleState,
    pub u: Vec<f64>,
    /// Body thrust setpoint.
    pub f_sp: [f64; 3],
    /// Total body moment setpoint.
    pub m_sp: [f64; 3],
    /// Sensor reading in the end-effector frame.
    pub f_meas: [f64; 3],
    pub contact: bool,
    /// Desired inertial force fed to the strategies.
    pub f_des: [f64; 3],
    /// Noise-free normal contact force on the robot.
    pub normal_force: f64,
    pub attitude_sp: [f64; 3],
}

impl LogRow {
    fn bits_eq(&self, other: &Self) -> bool {
        let a = self.flat();
        let b = other.flat();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()) && self.contact == other.contact
    }

    fn flat(&self) -> Vec<f64> {
        let s = &self.state;
        let mut v = vec![self.t];
        for x in [&s.position, &s.velocity, &s.attitude, &s.body_rates] {
            v.extend_from_slice(x.as_slice());
        }
        v.extend_from_slice(&self.u);
        for x in [&self.f_sp, &self.m_sp, &self.f_meas, &self.f_des, &self.attitude_sp] {
            v.extend_from_slice(x);
        }
        v.push(self.normal_force);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
    /// Ticks where the attitude strategy failed and zero tilt was used.
    pub strategy_fallbacks: usize,
    /// Ticks where the wrench optimizer changed the setpoint.
    pub optimizer_changes: usize,
}

impl RunLog {
    pub fn final_position_error(&self, target: &Vector3<f64>) -> Option<f64> {
        self.rows.last().map(|r| (r.state.position - target).norm())
    }

    /// Mean and standard deviation of the measured normal force from `from` on.
    pub fn force_statistics(&self, from: f64, r_ic: &Matrix3<f64>) -> Option<(f64, f64)> {
        let xs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.t >= from)
            .map(|r| {
                let r_ib = r.state.rotation();
                (r_ic.transpose() * r_ib * Vector3::from(r.f_meas))[2]
            })
            .collect();
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Some((mean, var.sqrt()))
    }
}

fn active<T: Copy>(items: &[T], time: impl Fn(&T) -> f64, t: f64) -> Option<T> {
    items.iter().take_while(|w| time(w) <= t).last().copied()
}

struct ContactModel<'a> {
    task: &'a ContactTask,
    offset: Vector3<f64>,
}

impl ContactModel<'_> {
    fn ee(&self, s: &VehicleState) -> (Vector3<f64>, Vector3<f64>) {
        let r = s.rotation();
        let p = s.position + r * self.offset;
        let v = s.velocity + r * s.body_rates.cross(&self.offset);
        (p, v)
    }

    fn wrench(&self, s: &VehicleState) -> ExternalWrench {
        let (p, v) = self.ee(s);
        let f = contact_force(&self.task.surface, &p, &v).force;
        let f_body = s.rotation().transpose() * f;
        ExternalWrench { force_inertial: f, moment_body: self.offset.cross(&f_body) }
    }
}

fn diverged(s: &VehicleState) -> bool {
    [&s.position, &s.velocity, &s.attitude, &s.body_rates]
        .iter()
        .any(|v| v.iter().any(|x| !x.is_finite() || x.abs() > DIVERGENCE_LIMIT))
}

/// Runs `scenario` and logs every control tick.
pub fn run(scenario: &Scenario) -> Result<RunLog, SimError> {
    let (log, err) = run_partial(scenario);
    match err {
        None => Ok(log),
        Some(e) => Err(e),
    }
}

/// Like [`run`] but keeps the rows logged before a failure.
pub fn run_partial(scenario: &Scenario) -> (RunLog, Option<SimError>) {
    let mut log = RunLog::default();
    let err = simulate(scenario, &mut log).err();
    (log, err)
}

fn simulate(scenario: &Scenario, log: &mut RunLog) -> Result<(), SimError> {
    scenario.validate()?;
    let mut model = scenario.model.clone();
    let mut state = scenario.initial_state;
    let mut pos_ctrl = PositionController::new(scenario.gains.position);
    let mut att_ctrl = AttitudeController::new(scenario.gains.attitude);
    let mut force_ctrl = ForceController::new(scenario.gains.force);
    force_ctrl.feed_forward = scenario.gains.force_feed_forward;
    let mut optimizer = scenario.optimizer.map(WrenchOptimizer::new);
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = Normal::new(0.0, scenario.force_noise_std).map_err(|_| SimError::Invalid("bad noise level"))?;
    let contact = scenario.contact.as_ref().map(|task| ContactModel { task, offset: Vector3::from(task.ee_offset) });
    let selection = scenario.contact.as_ref().map(|task| {
        SelectionMatrices::natural(task.force_axes, contact_frame(&Vector3::from(task.surface.normal)))
    });
    let mut engaged = false;
    let mut failures = scenario.failures.clone();
    failures.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut next_failure = 0;

    let dt_ctrl = scenario.dt * scenario.decimation as f64;
    let steps = (scenario.duration / scenario.dt).round() as usize;
    let mut u = DVector::zeros(model.rotor_count());
    let mut gust = Vector3::zeros();
    let gust_step = scenario.gust.map(|g| {
        let a = (-scenario.dt / g.tau).exp();
        (a, Normal::new(0.0, g.std * (1.0 - a * a).sqrt()).expect("validated"))
    });
    let hold = Waypoint {
        t: 0.0,
        position: scenario.initial_state.position.into(),
        yaw: scenario.initial_state.attitude[2],
        roll_pitch: None,
    };

    for step in 0..steps {
        let t = step as f64 * scenario.dt;
        while next_failure < failures.len() && failures[next_failure].t <= t {
            model = apply_rotor_failure(&model, failures[next_failure].rotor)
                .map_err(|_| SimError::Invalid("failed rotor index out of range"))?;
            next_failure += 1;
        }
        if step % scenario.decimation == 0 {
            let tick = log.rows.len();
            let ctl = |source| SimError::Control { tick, source };
            let wp = active(&scenario.waypoints, |w| w.t, t).unwrap_or(hold);
            let p_sp = Vector3::from(wp.position);
            let f_pos = pos_ctrl.update(&model, &state, &p_sp, &Vector3::zeros(), dt_ctrl).map_err(ctl)?;

            let mut f_meas = Vector3::zeros();
            let mut normal_force = 0.0;
            let mut in_contact = false;
            let mut f_des = f_pos;
            if let (Some(c), Some(sel)) = (&contact, &selection) {
                let (p, v) = c.ee(&state);
                in_contact = c.task.surface.depth(&p) > 0.0;
                let on_robot = contact_force(&c.task.surface, &p, &v).force;
                normal_force = on_robot.dot(&Vector3::from(c.task.surface.normal));
                let r_ib = state.rotation();
                f_meas = r_ib.transpose() * -on_robot;
                if scenario.force_noise_std > 0.0 {
                    for k in 0..3 {
                        f_meas[k] += noise.sample(&mut rng);
                    }
                }
                if c.task.force_control {
                    if in_contact && !engaged {
                        engaged = true;
                        force_ctrl.engage(sel.contact_rotation.transpose() * f_pos);
                    }
                    if engaged {
                        let fd = active(&c.task.force_setpoint, |f| f.t, t).map_or(0.0, |f| f.force);
                        let f_force = force_ctrl
                            .update(&f_meas, &Vector3::new(0.0, 0.0, fd), &sel.contact_rotation, &r_ib, dt_ctrl)
                            .map_err(ctl)?;
                        let f_force = f_force - state.velocity * (scenario.gains.force_damping * model.mass());
                        f_des = hpfc_combine(&f_pos, &f_force, sel).map_err(ctl)?;
                    }
                }
            }

            let setpoint: AttitudeSetpoint = match wp.roll_pitch {
                Some([phi, theta]) => attitude_fixed(phi, theta, wp.yaw).unwrap_or_else(|_| attitude_zero_tilt(wp.yaw)),
                None => scenario.attitude_strategy.setpoint(&f_des, wp.yaw).unwrap_or_else(|_| {
                    log.strategy_fallbacks += 1;
                    attitude_zero_tilt(wp.yaw)
                }),
            };
            let f_sp = scenario
                .thrust_strategy
                .setpoint(&f_des, &state.attitude)
                .map(|s| s.force_body)
                .unwrap_or_else(|_| state.rotation().transpose() * f_des);
            let euler_accel = att_ctrl.update(&state, &setpoint, dt_ctrl).map_err(ctl)?;
            let mut m_sp = moment_for_euler_accel(&model, &state, &euler_accel).map_err(ctl)?;
            let mut f_cmd = f_sp;
            if let Some(opt) = optimizer.as_mut() {
                let w = opt.optimize(&model, &state.attitude, &f_sp, &m_sp).map_err(ctl)?;
                if w.changed {
                    log.optimizer_changes += 1;
                }
                f_cmd = w.force;
                m_sp = w.moment;
            }
            let alloc = allocate_wrench(&model, &state.attitude, &f_cmd, &m_sp);
            u = saturate_priority(&model, &alloc.u);

            log.rows.push(LogRow {
                t,
                state,
                u: u.iter().copied().collect(),
                f_sp: f_cmd.into(),
                m_sp: m_sp.into(),
                f_meas: f_meas.into(),
                contact: in_contact,
                f_des: f_des.into(),
                normal_force,
                attitude_sp: setpoint.euler.into(),
            });
        }

        if let Some((a, dist)) = &gust_step {
            for k in 0..3 {
                gust[k] = a * gust[k] + dist.sample(&mut rng);
            }
        }
        let disturbance = scenario.wind + gust;
        let ext = |s: &VehicleState| {
            let mut w = contact.as_ref().map_or_else(ExternalWrench::default, |c| c.wrench(s));
            w.force_inertial += disturbance;
            w
        };
        let tick = log.rows.len().saturating_sub(1);
        state = match step_rk4_with(&model, &state, &u, scenario.dt, ext) {
            Ok(s) => s,
            Err(DynamicsError::NonFinite) => return Err(SimError::Diverged { tick, time: t }),
            Err(source) => return Err(SimError::Dynamics { tick, source }),
        };
        if diverged(&state) {
            return Err(SimError::Diverged { tick, time: t });
        }
    }
    Ok(())
}

/// Whether re-running `scenario` reproduces `log` bit for bit.
pub fn replay_check(log: &RunLog, scenario: &Scenario) -> bool {
    match run(scenario) {
        Ok(again) => {
            again.rows.len() == log.rows.len() && again.rows.iter().zip(&log.rows).all(|(a, b)| a.bits_eq(b))
        }
        Err(_) => false,
    }
}
