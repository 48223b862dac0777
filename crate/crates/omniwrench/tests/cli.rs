use std::path::{Path, PathBuf};

use omniwrench::cli::{bench_table, run_with, EXIT_DIVERGED, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK};
use omniwrench::polytope_file::load_polytope;
use omniwrench_core::model::tilted_hexarotor;

fn data(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel).to_string_lossy().into_owned()
}

fn cli(args: &[&str]) -> (u8, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("omniwrench").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn validate_reports() {
    let (code, out, _) = cli(&["validate", &data("models/tilted_hexarotor.json")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("fully actuated: true"));
    let (code, out, _) = cli(&["validate", "builtin:planar_quadrotor"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("fully actuated: false") && out.contains("warning"));

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"name\": \"x\",").unwrap();
    let (code, _, err) = cli(&["validate", broken.to_str().unwrap()]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("broken.json"));
    assert_eq!(cli(&["validate", "/nonexistent/model.json"]).0, EXIT_INPUT);
}

#[test]
fn usage_errors() {
    assert_eq!(cli(&[]).0, EXIT_INPUT);
    assert_eq!(cli(&["frobnicate"]).0, EXIT_INPUT);
    assert_eq!(cli(&["wrench", "builtin:tilted_hexarotor", "slice"]).0, EXIT_INPUT);
    assert_eq!(cli(&["wrench", "builtin:tilted_hexarotor", "lateral"]).0, EXIT_INPUT);
    assert_eq!(cli(&["wrench", "builtin:tilted_hexarotor", "thrust", "--attitude", "1,2"]).0, EXIT_INPUT);
    assert_eq!(cli(&["wrench", "builtin:tilted_hexarotor", "slice", "--fix", "q=1"]).0, EXIT_INPUT);
    assert_eq!(cli(&["--help"]).0, EXIT_OK);
}

#[test]
fn wrench_sets_written() {
    let dir = tempfile::tempdir().unwrap();
    let path: PathBuf = dir.path().join("thrust.json");
    let (code, out, _) = cli(&["wrench", "builtin:planar_quadrotor", "thrust", "-o", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("affine_dim 1"));
    assert_eq!(load_polytope(&path).unwrap().affine_dim(), 1);

    let (code, out, _) = cli(&["wrench", "builtin:tilted_hexarotor", "thrust", "--attitude", "deg:10,0,0"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("\"affine_dim\": 3"));

    let (code, out, _) = cli(&["wrench", "builtin:tilted_hexarotor", "slice", "--fix", "fz=-1000", "-o", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_INFEASIBLE);
    assert!(out.contains("empty set"));
    assert!(load_polytope(&path).unwrap().is_empty());

    let (code, out, _) = cli(&[
        "wrench", "builtin:tilted_hexarotor", "lateral", "--fz", "-58.86", "--k", "500", "-o", path.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("affine_dim 2") && out.contains("time"));
}

#[test]
fn feasibility_exit_codes() {
    let (code, out, _) = cli(&["feasible", "builtin:tilted_hexarotor", "--wrench", "0,0,0,0,0,0"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("feasible: true"));
    let (code, out, _) = cli(&["feasible", "builtin:tilted_hexarotor", "--wrench", "0,0,-1000,0,0,0"]);
    assert_eq!(code, EXIT_INFEASIBLE);
    assert!(out.contains("clipped"));

    let m = tilted_hexarotor();
    let u: Vec<f64> = m.rotors().iter().enumerate().map(|(i, r)| r.u_max * (0.2 + 0.1 * i as f64)).collect();
    let a = m.mixer().allocation();
    let w = a * nalgebra::DVector::from_vec(u);
    let text: Vec<String> = w.iter().map(|x| format!("{x:.17e}")).collect();
    assert_eq!(cli(&["feasible", "builtin:tilted_hexarotor", "--wrench", &text.join(",")]).0, EXIT_OK);
}

#[test]
fn tilt_report() {
    let (code, out, _) = cli(&["tilt", "builtin:tilted_hexarotor", "--grid", "16"]);
    assert_eq!(code, EXIT_OK);
    let line = out.lines().find(|l| l.starts_with("optimal tilt:")).unwrap();
    let tilt: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert_eq!(tilt, 0.0);
    assert!(out.contains("tilt_rad,tilt_dir_rad,radius_mps2,radius_n"));
    assert_eq!(out.lines().filter(|l| l.split(',').count() == 4).count(), 2 + 16 * 16);
}

#[test]
fn sim_runs_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("hover.csv");
    let (code, out, _) = cli(&["sim", &data("scenarios/hover.json"), "-o", log.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let line = out.lines().find(|l| l.starts_with("final position error")).unwrap();
    let err: f64 = line.split_whitespace().nth(3).unwrap().parse().unwrap();
    assert!(err < 0.01);
    let text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().count(), 10_001);
    assert!(text.starts_with("t,x,y,z,"));

    let (code, out, _) = cli(&["sim", &data("scenarios/wall_contact.json")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("normal force from t ="));
}

#[test]
fn divergent_sim_exits_with_tick() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"model": "builtin:tilted_hexarotor", "initial_state": {"position": [0, 0, -1], "attitude": [0.1, 0, 0]},
            "waypoints": [{"t": 0, "position": [0, 0, -1]}], "duration": 5, "dt": 0.01,
            "gains": {"attitude": {"kp": [4e6, 4e6, 4e6], "ki": [0, 0, 0], "kd": [0, 0, 0],
                      "integral_limit": [1, 1, 1], "output_limit": [1e9, 1e9, 1e9]}}}"#,
    )
    .unwrap();
    let (code, out, _) = cli(&["sim", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_DIVERGED, "{out}");
    assert!(out.contains("tick"));
}

#[test]
fn bench_rotation_path_is_faster() {
    let rows = bench_table(&tilted_hexarotor(), 9).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].ms / rows[1].ms >= 10.0);
    let (code, out, _) = cli(&["bench", "builtin:tilted_hexarotor", "--repeat", "3"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("recompute / rotation"));
}
