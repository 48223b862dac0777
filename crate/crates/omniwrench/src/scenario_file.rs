//! Scenario documents.

use std::path::Path;

use nalgebra::Vector3;
use omniwrench_core::control::{PidGains, WrenchPriority};
use omniwrench_core::dynamics::VehicleState;
use omniwrench_core::sim::{ContactTask, ControllerGains, Gust, RotorFailure, Scenario, Waypoint};
use omniwrench_core::strategies::{AttitudeStrategy, ThrustStrategy};
use serde::{Deserialize, Serialize};

use crate::error::{read_text, IoError};
use crate::model_file::resolve_model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub position: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
    /// Roll, pitch, yaw.
    #[serde(default)]
    pub attitude: [f64; 3],
    #[serde(default)]
    pub body_rates: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsDocument {
    pub position: Option<PidGains>,
    pub attitude: Option<PidGains>,
    pub force: Option<PidGains>,
    pub force_feed_forward: Option<f64>,
    pub force_damping: Option<f64>,
}

impl GainsDocument {
    fn resolve(&self) -> ControllerGains {
        let d = ControllerGains::default();
        ControllerGains {
            position: self.position.unwrap_or(d.position),
            attitude: self.attitude.unwrap_or(d.attitude),
            force: self.force.unwrap_or(d.force),
            force_feed_forward: self.force_feed_forward.unwrap_or(d.force_feed_forward),
            force_damping: self.force_damping.unwrap_or(d.force_damping),
        }
    }
}

fn default_attitude_strategy() -> AttitudeStrategy {
    AttitudeStrategy::ZeroTilt
}

fn default_thrust_strategy() -> ThrustStrategy {
    ThrustStrategy::Project
}

fn default_dt() -> f64 {
    1e-3
}

fn default_decimation() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    /// `builtin:<name>` or a model file path relative to the scenario file.
    pub model: String,
    pub initial_state: InitialState,
    pub waypoints: Vec<Waypoint>,
    #[serde(default = "default_attitude_strategy")]
    pub attitude_strategy: AttitudeStrategy,
    #[serde(default = "default_thrust_strategy")]
    pub thrust_strategy: ThrustStrategy,
    #[serde(default)]
    pub gains: GainsDocument,
    #[serde(default)]
    pub contact: Option<ContactTask>,
    #[serde(default)]
    pub wind: [f64; 3],
    #[serde(default)]
    pub gust: Option<Gust>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    #[serde(default)]
    pub failures: Vec<RotorFailure>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub force_noise_std: f64,
    #[serde(default)]
    pub optimizer: Option<WrenchPriority>,
}

impl ScenarioDocument {
    pub fn into_scenario(self, base: Option<&Path>) -> Result<Scenario, IoError> {
        let model = resolve_model(&self.model, base)?;
        let s = &self.initial_state;
        let initial_state = VehicleState::new(
            Vector3::from(s.position),
            Vector3::from(s.velocity),
            Vector3::from(s.attitude),
            Vector3::from(s.body_rates),
        )
        .map_err(|e| IoError::Invalid(format!("initial state: {e}")))?;
        let scenario = Scenario {
            model,
            initial_state,
            waypoints: self.waypoints,
            attitude_strategy: self.attitude_strategy,
            thrust_strategy: self.thrust_strategy,
            gains: self.gains.resolve(),
            contact: self.contact,
            wind: Vector3::from(self.wind),
            gust: self.gust,
            dt: self.dt,
            duration: self.duration,
            decimation: self.decimation,
            failures: self.failures,
            seed: self.seed,
            force_noise_std: self.force_noise_std,
            optimizer: self.optimizer,
        };
        scenario.validate().map_err(|e| IoError::Invalid(e.to_string()))?;
        Ok(scenario)
    }
}

pub fn parse_scenario(text: &str, origin: &Path) -> Result<Scenario, IoError> {
    let doc: ScenarioDocument = serde_json::from_str(text).map_err(|e| IoError::parse(origin, e))?;
    doc.into_scenario(origin.parent())
}

pub fn load_scenario(path: &Path) -> Result<Scenario, IoError> {
    parse_scenario(&read_text(path)?, path)
}
