//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use omniwrench_core::apps::{gravity_force, interaction_entry, optimal_tilt_sweep, DEFAULT_MAX_TILT};
use omniwrench_core::control::default_anchor;
use omniwrench_core::geometry::Polytope;
use omniwrench_core::model::{validate, MultirotorModel};
use omniwrench_core::sim::{run_partial, SimError};
use omniwrench_core::strategies::tilt_of;
use omniwrench_core::wrenchset::{
    base_sets, lateral_thrust_set, moment_set, slice_components, thrust_set, wrench_set_6d, wrench_set_with_fixed,
    BaseSetCache, WrenchSetQuery, DEFAULT_LATERAL_DIRECTIONS,
};

use crate::csv_log::write_log;
use crate::error::IoError;
use crate::model_file::resolve_model;
use crate::polytope_file::{polytope_to_json, save_polytope};
use crate::scenario_file::load_scenario;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_DIVERGED: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "omniwrench", version, about = "Multirotor wrench sets, strategies and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetKindArg {
    Thrust,
    Moment,
    Wrench6d,
    Slice,
    Lateral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrameArg {
    Body,
    Inertial,
}

/// Models are file paths or `builtin:<name>`. Angles are radians unless the
/// option value starts with `deg:`, which converts every number in it.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file and report actuation properties.
    Validate { model: String },
    /// Compute a thrust, moment, 6-D, sliced or lateral set.
    Wrench {
        model: String,
        kind: SetKindArg,
        /// Roll, pitch, yaw.
        #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
        attitude: String,
        #[arg(long, value_enum, default_value = "body")]
        frame: FrameArg,
        /// Inertial external force for inertial-frame sets.
        #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
        fext: String,
        /// Include gravity in the external force of inertial-frame sets.
        #[arg(long)]
        gravity: bool,
        /// Fixed component for `slice`, e.g. `fz=-60` or `3=0.5`.
        #[arg(long = "fix", allow_hyphen_values = true)]
        fix: Vec<String>,
        /// Normal thrust for `lateral`.
        #[arg(long, allow_hyphen_values = true)]
        fz: Option<f64>,
        /// Moment setpoint for `lateral`.
        #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
        moment: String,
        /// Direction count for `lateral`.
        #[arg(long, default_value_t = DEFAULT_LATERAL_DIRECTIONS)]
        k: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check whether a body wrench is attainable.
    Feasible {
        model: String,
        /// fx,fy,fz,mx,my,mz in the body frame.
        #[arg(long, allow_hyphen_values = true)]
        wrench: String,
        #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
        attitude: String,
    },
    /// Sweep tilts for the largest omni-directional acceleration.
    Tilt {
        model: String,
        /// External force besides gravity, inertial frame.
        #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
        fext: String,
        /// Leave gravity out of the external force.
        #[arg(long)]
        no_gravity: bool,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Direction cells; defaults to `--grid`.
        #[arg(long)]
        dir_grid: Option<usize>,
        #[arg(long)]
        max_tilt: Option<String>,
        /// Write the sweep table here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a scenario and write its log.
    Sim {
        scenario: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Time the set estimation paths.
    Bench {
        model: String,
        #[arg(long, default_value_t = 20)]
        repeat: usize,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Io(_) | Self::Input(_) => EXIT_INPUT,
            Self::Runtime(_) => 1,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

/// Parses a comma-separated list; a leading `deg:` converts all entries.
pub fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    let (body, scale) = match text.trim().strip_prefix("deg:") {
        Some(rest) => (rest, std::f64::consts::PI / 180.0),
        None => (text.trim(), 1.0),
    };
    body.split(',')
        .map(|p| {
            let p = p.trim();
            let (p, s) = match p.strip_prefix("deg:") {
                Some(r) => (r, std::f64::consts::PI / 180.0),
                None => (p, scale),
            };
            p.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(|x| x * s)
                .ok_or_else(|| CliError::Input(format!("bad number `{p}` in `{text}`")))
        })
        .collect()
}

pub fn parse_vector<const N: usize>(text: &str) -> Result<[f64; N], CliError> {
    let v = parse_values(text)?;
    v.try_into().map_err(|v: Vec<f64>| CliError::Input(format!("expected {N} values, got {} in `{text}`", v.len())))
}

const COMPONENTS: [&str; 6] = ["fx", "fy", "fz", "mx", "my", "mz"];

/// Parses `name=value` pairs for fixed wrench components.
pub fn parse_fixed(items: &[String]) -> Result<BTreeMap<usize, f64>, CliError> {
    let mut out = BTreeMap::new();
    for item in items {
        let (key, value) = item.split_once('=').ok_or_else(|| input(format!("expected key=value, got `{item}`")))?;
        let key = key.trim().to_ascii_lowercase();
        let idx = COMPONENTS
            .iter()
            .position(|c| *c == key)
            .or_else(|| key.parse::<usize>().ok().filter(|k| *k < 6))
            .ok_or_else(|| input(format!("unknown component `{key}`")))?;
        let [v] = parse_vector::<1>(value)?;
        if out.insert(idx, v).is_some() {
            return Err(input(format!("component `{key}` fixed twice")));
        }
    }
    Ok(out)
}

fn load(model: &str) -> Result<MultirotorModel, CliError> {
    Ok(resolve_model(model, None)?)
}

fn set_summary(p: &Polytope) -> String {
    if p.is_empty() {
        return "empty set".into();
    }
    format!("vertices {} facets {} affine_dim {}", p.vertices().len(), p.halfspaces().len(), p.affine_dim())
}

/// Parses and runs a command line, printing to the given writers.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}

pub fn main_with(args: impl IntoIterator<Item = OsString>) -> ExitCode {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    ExitCode::from(run_with(args, &mut stdout.lock(), &mut stderr.lock()))
}

fn execute(command: Command, out: &mut dyn Write) -> Result<u8, CliError> {
    match command {
        Command::Validate { model } => cmd_validate(&model, out),
        Command::Wrench { model, kind, attitude, frame, fext, gravity, fix, fz, moment, k, output } => {
            let opts = WrenchOptions {
                attitude: parse_vector(&attitude)?,
                frame,
                fext: parse_vector(&fext)?,
                gravity,
                fixed: parse_fixed(&fix)?,
                fz,
                moment: parse_vector(&moment)?,
                k,
            };
            cmd_wrench(&model, kind, &opts, output.as_deref(), out)
        }
        Command::Feasible { model, wrench, attitude } => {
            cmd_feasible(&model, &parse_vector(&wrench)?, &parse_vector(&attitude)?, out)
        }
        Command::Tilt { model, fext, no_gravity, grid, dir_grid, max_tilt, output } => {
            let max_tilt = match max_tilt {
                Some(s) => parse_vector::<1>(&s)?[0],
                None => DEFAULT_MAX_TILT,
            };
            let opts = TiltOptions { fext: parse_vector(&fext)?, gravity: !no_gravity, grid, dir_grid: dir_grid.unwrap_or(grid), max_tilt };
            cmd_tilt(&model, &opts, output.as_deref(), out)
        }
        Command::Sim { scenario, output } => cmd_sim(&scenario, output.as_deref(), out),
        Command::Bench { model, repeat } => cmd_bench(&model, repeat, out),
    }
}

fn w(out: &mut dyn Write, text: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn cmd_validate(model: &str, out: &mut dyn Write) -> Result<u8, CliError> {
    let m = load(model)?;
    let r = validate(&m);
    w(out, format!("model: {}", m.name()))?;
    w(out, format!("rotors: {}", r.rotor_count))?;
    w(out, format!("allocation rank: {}", r.rank))?;
    w(out, format!("fully actuated: {}", r.fully_actuated))?;
    w(out, format!("inertia positive definite: {}", r.inertia_spd))?;
    let hover = r.hover_feasible.map_or("not checked".to_string(), |h| h.to_string());
    w(out, format!("hover feasible: {hover}"))?;
    if !r.fully_actuated {
        w(out, "warning: not fully actuated, thrust and moment are coupled")?;
    }
    for v in &r.limit_violations {
        w(out, format!("violation: {v}"))?;
    }
    Ok(if r.is_ok() { EXIT_OK } else { EXIT_INPUT })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WrenchOptions {
    pub attitude: [f64; 3],
    pub frame: FrameArg,
    pub fext: [f64; 3],
    pub gravity: bool,
    pub fixed: BTreeMap<usize, f64>,
    pub fz: Option<f64>,
    pub moment: [f64; 3],
    pub k: usize,
}

impl Default for WrenchOptions {
    fn default() -> Self {
        Self {
            attitude: [0.0; 3],
            frame: FrameArg::Body,
            fext: [0.0; 3],
            gravity: false,
            fixed: BTreeMap::new(),
            fz: None,
            moment: [0.0; 3],
            k: DEFAULT_LATERAL_DIRECTIONS,
        }
    }
}

/// Computes the requested set.
pub fn compute_set(model: &MultirotorModel, kind: SetKindArg, o: &WrenchOptions) -> Result<Polytope, CliError> {
    let att = Vector3::from(o.attitude);
    let query = match o.frame {
        FrameArg::Body => WrenchSetQuery::body(att),
        FrameArg::Inertial => WrenchSetQuery::inertial(att, Vector3::from(o.fext), o.gravity),
    };
    let set = match kind {
        SetKindArg::Thrust => thrust_set(model, &query),
        SetKindArg::Moment => moment_set(model, &query),
        SetKindArg::Wrench6d => wrench_set_6d(model, &att),
        SetKindArg::Slice => {
            if o.fixed.is_empty() {
                return Err(input("slice needs at least one --fix"));
            }
            wrench_set_with_fixed(model, &att, &o.fixed)
        }
        SetKindArg::Lateral => {
            let fz = o.fz.ok_or_else(|| input("lateral needs --fz"))?;
            lateral_thrust_set(model, &att, fz, &Vector3::from(o.moment), o.k)
        }
    };
    set.map_err(input)
}

pub fn cmd_wrench(
    model: &str,
    kind: SetKindArg,
    opts: &WrenchOptions,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let m = load(model)?;
    let start = Instant::now();
    let set = compute_set(&m, kind, opts)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    match output {
        Some(path) => save_polytope(path, &set)?,
        None => write!(out, "{}", polytope_to_json(&set)).map_err(|e| CliError::Runtime(e.to_string()))?,
    }
    let summary = format!("{} time {ms:.3} ms", set_summary(&set));
    if output.is_some() {
        w(out, summary)?;
    } else {
        eprintln!("{summary}");
    }
    Ok(if set.is_empty() { EXIT_INFEASIBLE } else { EXIT_OK })
}

pub fn cmd_feasible(model: &str, wrench: &[f64; 6], attitude: &[f64; 3], out: &mut dyn Write) -> Result<u8, CliError> {
    let m = load(model)?;
    let att = Vector3::from(*attitude);
    let set = wrench_set_6d(&m, &att).map_err(input)?;
    let anchor = default_anchor(&m, &att, &set);
    let e = interaction_entry(&set, &anchor, *wrench);
    w(out, format!("feasible: {}", e.feasible))?;
    w(out, format!("margin: {:.16e}", e.margin))?;
    if let Some(c) = e.clipped {
        let s: Vec<String> = c.iter().map(|x| format!("{x:.16e}")).collect();
        w(out, format!("clipped: {}", s.join(",")))?;
    }
    Ok(if e.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltOptions {
    pub fext: [f64; 3],
    pub gravity: bool,
    pub grid: usize,
    pub dir_grid: usize,
    pub max_tilt: f64,
}

pub fn cmd_tilt(model: &str, o: &TiltOptions, output: Option<&Path>, out: &mut dyn Write) -> Result<u8, CliError> {
    let m = load(model)?;
    let mut f = Vector3::from(o.fext);
    if o.gravity {
        f += gravity_force(&m);
    }
    let sweep = optimal_tilt_sweep(&m, &f, o.grid, o.dir_grid, o.max_tilt).map_err(input)?;
    let b = &sweep.best;
    w(out, format!("optimal tilt: {:.16e} rad", b.tilt_rad))?;
    w(out, format!("tilt direction: {:.16e} rad", b.tilt_dir_rad))?;
    w(out, format!("omni acceleration: {:.16e} m/s^2", b.radius_mps2))?;
    w(out, format!("omni thrust: {:.16e} N", b.radius_n))?;
    let mut table = String::from("tilt_rad,tilt_dir_rad,radius_mps2,radius_n\n");
    for c in &sweep.cells {
        table.push_str(&format!("{},{},{},{}\n", c.tilt_rad, c.tilt_dir_rad, c.radius_mps2, c.radius_n));
    }
    match output {
        Some(path) => std::fs::write(path, table).map_err(|e| IoError::io(path, e))?,
        None => write!(out, "{table}").map_err(|e| CliError::Runtime(e.to_string()))?,
    }
    Ok(EXIT_OK)
}

pub fn cmd_sim(scenario: &Path, output: Option<&Path>, out: &mut dyn Write) -> Result<u8, CliError> {
    let sc = load_scenario(scenario)?;
    let start = Instant::now();
    let (log, error) = run_partial(&sc);
    let secs = start.elapsed().as_secs_f64();
    if let Some(path) = output {
        let file = std::fs::File::create(path).map_err(|e| IoError::io(path, e))?;
        write_log(std::io::BufWriter::new(file), &log, sc.model.rotor_count())?;
    }
    w(out, format!("ticks: {}", log.rows.len()))?;
    w(out, format!("wall time: {secs:.3} s"))?;
    if let Some(e) = &error {
        w(out, format!("error: {e}"))?;
        return match e {
            SimError::Invalid(_) => Ok(EXIT_INPUT),
            _ => Ok(EXIT_DIVERGED),
        };
    }
    if let (Some(last), Some(wp)) = (log.rows.last(), sc.waypoints.last()) {
        w(out, format!("final position error: {:.6e} m", (last.state.position - Vector3::from(wp.position)).norm()))?;
    }
    let max_tilt = log.rows.iter().map(|r| tilt_of(&r.state.rotation())).fold(0.0f64, f64::max);
    w(out, format!("max tilt: {:.6} deg", max_tilt.to_degrees()))?;
    w(out, format!("strategy fallbacks: {}", log.strategy_fallbacks))?;
    if sc.optimizer.is_some() {
        w(out, format!("optimizer changes: {}", log.optimizer_changes))?;
    }
    if let Some(task) = &sc.contact {
        let r_ic = omniwrench_core::control::contact_frame(&Vector3::from(task.surface.normal));
        match log.rows.iter().find(|r| r.contact) {
            Some(first) => {
                let from = first.t + CONTACT_SETTLE;
                if let Some((mean, std)) = log.force_statistics(from, &r_ic) {
                    w(out, format!("normal force from t = {from:.3} s: mean {mean:.6} N std {std:.6} N"))?;
                }
            }
            None => w(out, "no contact")?,
        }
    }
    Ok(EXIT_OK)
}

/// Time after first contact excluded from force statistics, s.
pub const CONTACT_SETTLE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: &'static str,
    /// Median time per evaluation, ms.
    pub ms: f64,
}

fn median_ms(repeat: usize, mut f: impl FnMut(usize)) -> f64 {
    let mut t: Vec<f64> = (0..repeat.max(1))
        .map(|i| {
            let s = Instant::now();
            f(i);
            s.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    t.sort_by(f64::total_cmp);
    t[t.len() / 2]
}

fn bench_attitude(i: usize) -> Vector3<f64> {
    let x = i as f64;
    Vector3::new(0.3 * (1.3 * x).sin(), 0.3 * (0.7 * x + 1.0).cos(), (2.1 * x).sin() * 3.0)
}

/// Median timings of the set estimation paths on `model`.
pub fn bench_table(model: &MultirotorModel, repeat: usize) -> Result<Vec<BenchRow>, CliError> {
    let err = |e: omniwrench_core::wrenchset::WrenchSetError| input(e);
    let base = base_sets(model).map_err(err)?;
    let mut rows = Vec::new();
    let mut failure = None;
    let mut record = |method: &'static str, ms: f64| rows.push(BenchRow { method, ms });

    record(
        "decoupled recompute",
        median_ms(repeat, |i| {
            let q = WrenchSetQuery::inertial(bench_attitude(i), Vector3::zeros(), true);
            if let Err(e) = thrust_set(model, &q).and_then(|_| moment_set(model, &q)) {
                failure = Some(e);
            }
        }),
    );
    record(
        "decoupled by rotation",
        median_ms(repeat, |i| {
            let q = WrenchSetQuery::inertial(bench_attitude(i), Vector3::zeros(), true);
            if let Err(e) = base.thrust_at(model, &q).and_then(|_| base.moment_at(model, &q)) {
                failure = Some(e);
            }
        }),
    );
    let hover = -model.mass() * model.gravity();
    record(
        "lateral (k=500)",
        median_ms(repeat, |i| {
            let a = bench_attitude(i);
            if let Err(e) = lateral_thrust_set(model, &Vector3::new(0.0, 0.0, a[2]), hover, &Vector3::zeros(), 500) {
                failure = Some(e);
            }
        }),
    );
    let fixed: BTreeMap<usize, f64> = [(3, 0.0), (4, 0.0), (5, 0.0)].into_iter().collect();
    record(
        "coupled (6-D + 3 fixed)",
        median_ms(repeat, |i| {
            if let Err(e) = wrench_set_with_fixed(model, &bench_attitude(i), &fixed) {
                failure = Some(e);
            }
        }),
    );
    let mut cache = BaseSetCache::new();
    cache.base_wrench_set(model).map_err(err)?;
    record(
        "coupled by rotation",
        median_ms(repeat, |i| {
            if let Err(e) = cache.wrench_set_at(model, &bench_attitude(i)).and_then(|s| slice_components(&s, &fixed)) {
                failure = Some(e);
            }
        }),
    );
    if let Some(e) = failure {
        return Err(input(e));
    }
    Ok(rows)
}

pub fn cmd_bench(model: &str, repeat: usize, out: &mut dyn Write) -> Result<u8, CliError> {
    let m = load(model)?;
    let rows = bench_table(&m, repeat)?;
    w(out, format!("{:<26}{:>12}{:>14}", "method", "time [ms]", "rate [Hz]"))?;
    for r in &rows {
        w(out, format!("{:<26}{:>12.4}{:>14.1}", r.method, r.ms, 1e3 / r.ms))?;
    }
    let ratio = rows[0].ms / rows[1].ms;
    w(out, format!("recompute / rotation: {ratio:.1}x"))?;
    Ok(EXIT_OK)
}
