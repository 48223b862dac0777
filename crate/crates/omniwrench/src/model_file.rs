//! Model documents and the bundled airframes.

use std::path::Path;

use nalgebra::Matrix3;
use omniwrench_core::model::{self, MultirotorModel, RotorSpec};
use serde::{Deserialize, Serialize};

use crate::error::{read_text, write_text, IoError};

/// Prefix selecting a bundled airframe instead of a file.
pub const BUILTIN_PREFIX: &str = "builtin:";

pub const BUILTIN_NAMES: [&str; 4] = ["planar_quadrotor", "tilted_pair_quadrotor", "tilted_hexarotor", "octorotor"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub name: String,
    pub mass_kg: f64,
    pub inertia_kgm2: [[f64; 3]; 3],
    pub gravity_mps2: f64,
    pub rotors: Vec<RotorSpec>,
}

impl From<&MultirotorModel> for ModelDocument {
    fn from(m: &MultirotorModel) -> Self {
        let i = m.inertia();
        Self {
            name: m.name().to_string(),
            mass_kg: m.mass(),
            inertia_kgm2: [0, 1, 2].map(|r| [0, 1, 2].map(|c| i[(r, c)])),
            gravity_mps2: m.gravity(),
            rotors: m.rotors().to_vec(),
        }
    }
}

impl ModelDocument {
    pub fn into_model(self) -> Result<MultirotorModel, IoError> {
        let i = self.inertia_kgm2;
        let inertia = Matrix3::from_fn(|r, c| i[r][c]);
        Ok(MultirotorModel::new(self.name, self.mass_kg, inertia, self.gravity_mps2, self.rotors)?)
    }
}

pub fn parse_model(text: &str, origin: &Path) -> Result<MultirotorModel, IoError> {
    let doc: ModelDocument = serde_json::from_str(text).map_err(|e| IoError::parse(origin, e))?;
    doc.into_model()
}

pub fn model_to_json(model: &MultirotorModel) -> String {
    let mut s = serde_json::to_string_pretty(&ModelDocument::from(model)).expect("model documents serialize");
    s.push('\n');
    s
}

pub fn load_model(path: &Path) -> Result<MultirotorModel, IoError> {
    parse_model(&read_text(path)?, path)
}

pub fn save_model(path: &Path, model: &MultirotorModel) -> Result<(), IoError> {
    write_text(path, &model_to_json(model))
}

pub fn builtin_model(name: &str) -> Option<MultirotorModel> {
    match name {
        "planar_quadrotor" => Some(model::planar_quadrotor()),
        "tilted_pair_quadrotor" => Some(model::tilted_pair_quadrotor(30f64.to_radians())),
        "tilted_hexarotor" => Some(model::tilted_hexarotor()),
        "octorotor" => Some(model::octorotor()),
        _ => None,
    }
}

/// Loads `reference`, either `builtin:<name>` or a path resolved against `base`.
pub fn resolve_model(reference: &str, base: Option<&Path>) -> Result<MultirotorModel, IoError> {
    if let Some(name) = reference.strip_prefix(BUILTIN_PREFIX) {
        return builtin_model(name).ok_or_else(|| IoError::UnknownBuiltin(name.to_string()));
    }
    let path = Path::new(reference);
    match base {
        Some(dir) if path.is_relative() => load_model(&dir.join(path)),
        _ => load_model(path),
    }
}
