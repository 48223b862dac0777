use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use omniwrench::model_file::{builtin_model, load_model, model_to_json, parse_model, save_model, BUILTIN_NAMES};
use omniwrench::polytope_file::{load_polytope, parse_polytope, polytope_to_json, save_polytope};
use omniwrench::scenario_file::{load_scenario, parse_scenario};
use omniwrench::IoError;
use omniwrench_core::geometry::{convex_hull, Polytope};
use omniwrench_core::model::tilted_hexarotor;
use omniwrench_core::wrenchset::{thrust_set, wrench_set_6d, WrenchSetQuery};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn roundtrip_bytes(p: &Polytope) {
    let first = polytope_to_json(p);
    let back = parse_polytope(&first, Path::new("mem")).unwrap();
    assert_eq!(polytope_to_json(&back), first);
    assert_eq!(back.vertices(), p.vertices());
}

#[test]
fn polytope_text_roundtrip_is_byte_identical() {
    let m = tilted_hexarotor();
    let att = Vector3::new(0.1, -0.2, 0.3);
    roundtrip_bytes(&thrust_set(&m, &WrenchSetQuery::body(att)).unwrap());
    roundtrip_bytes(&wrench_set_6d(&m, &att).unwrap());
    roundtrip_bytes(&convex_hull(&[vec![0.1, 1.0 / 3.0], vec![2.0, -1e-300]], 2).unwrap());
    roundtrip_bytes(&Polytope::empty(3));
}

#[test]
fn polytope_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.json");
    let set = thrust_set(&tilted_hexarotor(), &WrenchSetQuery::body(Vector3::zeros())).unwrap();
    save_polytope(&path, &set).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let back = load_polytope(&path).unwrap();
    save_polytope(&path, &back).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
}

#[test]
fn polytope_document_errors() {
    let origin = Path::new("mem");
    assert!(matches!(parse_polytope("{", origin), Err(IoError::Parse { .. })));
    let extra = r#"{"dim": 1, "affine_dim": 0, "vertices": [[1.0]], "halfspaces": [], "colour": 1}"#;
    assert!(matches!(parse_polytope(extra, origin), Err(IoError::Parse { .. })));
    let bad = r#"{"dim": 2, "affine_dim": 0, "vertices": [[1.0]], "halfspaces": []}"#;
    assert!(parse_polytope(bad, origin).is_err());
    let empty = r#"{"dim": 2, "affine_dim": 0, "empty": true, "vertices": [[1.0, 2.0]], "halfspaces": []}"#;
    assert!(matches!(parse_polytope(empty, origin), Err(IoError::Invalid(_))));
    assert!(matches!(load_polytope(Path::new("/nonexistent/x.json")), Err(IoError::Io { .. })));
}

#[test]
fn model_json_roundtrip() {
    for name in BUILTIN_NAMES {
        let m = builtin_model(name).unwrap();
        let text = model_to_json(&m);
        let back = parse_model(&text, Path::new("mem")).unwrap();
        assert_eq!(back, m);
        assert_eq!(model_to_json(&back), text);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(&path, &tilted_hexarotor()).unwrap();
    assert_eq!(load_model(&path).unwrap(), tilted_hexarotor());
}

#[test]
fn shipped_models_match_builtins() {
    for name in BUILTIN_NAMES {
        let file = load_model(&data(&format!("models/{name}.json"))).unwrap();
        assert_eq!(file, builtin_model(name).unwrap(), "{name}");
    }
    assert!(builtin_model("pentacopter").is_none());
}

#[test]
fn model_document_rejects_bad_input() {
    let m = model_to_json(&tilted_hexarotor());
    let extra = m.replacen('{', "{\n  \"colour\": \"red\",", 1);
    assert!(matches!(parse_model(&extra, Path::new("mem")), Err(IoError::Parse { .. })));
    let negative = m.replacen("\"mass_kg\": 6.0", "\"mass_kg\": -6.0", 1);
    assert_ne!(negative, m);
    assert!(matches!(parse_model(&negative, Path::new("mem")), Err(IoError::Model(_))));
}

#[test]
fn shipped_scenarios_parse() {
    for name in [
        "hover",
        "waypoints_zero_tilt",
        "waypoints_min_tilt",
        "fixed_tilt",
        "wall_contact",
        "wall_contact_uncontrolled",
        "rotor_failure",
    ] {
        let s = load_scenario(&data(&format!("scenarios/{name}.json"))).unwrap();
        s.validate().unwrap();
    }
}

#[test]
fn scenario_defaults_and_errors() {
    let origin = Path::new("mem.json");
    let text = r#"{"model": "builtin:tilted_hexarotor", "initial_state": {"position": [0, 0, -1]},
        "waypoints": [{"t": 0, "position": [0, 0, -1]}], "duration": 2}"#;
    let s = parse_scenario(text, origin).unwrap();
    assert_eq!(s.dt, 1e-3);
    assert_eq!(s.decimation, 1);
    assert!(s.contact.is_none() && s.failures.is_empty());

    let unknown = text.replacen("\"duration\"", "\"durration\"", 1);
    assert!(parse_scenario(&unknown, origin).is_err());
    let bad_model = text.replacen("builtin:tilted_hexarotor", "builtin:blimp", 1);
    assert!(matches!(parse_scenario(&bad_model, origin), Err(IoError::UnknownBuiltin(_))));
    let bad_dt = text.replacen("\"duration\": 2", "\"duration\": 2, \"dt\": -1", 1);
    assert!(matches!(parse_scenario(&bad_dt, origin), Err(IoError::Invalid(_))));
}
