//! Configuration grammar, subcommands and report emission.
//!
//! Configuration files are line based:
//!
//! ```text
//! # comment
//! [scenario]
//! n_rho = 32
//! initial = swirl_vortex
//!
//! [diagnostics]
//! ladder = 1/2, 1/4, 1/8
//! specs = (7/4,10), (4,12/7), (3,3)
//! ```
//!
//! Sections are `scenario`, `diagnostics`, `rescaler` and `output`. Every key
//! must be known and must apply to the chosen options; anything left over is an
//! error. Reals accept decimals, rationals (`1/2`) and multiples of `pi` (`2pi`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::exponents::{
    admissible_as3, exponent_report, feasible_e7, parse_rational, scan_feasible_region, to_f64, MixedNormSpec, Q,
};
use crate::fields::{Grid2D, ParabolicCylinder};
use crate::functionals::{check_energy_inequality, compute_functionals_with, type1_monitors, Cutoff, FunctionalReport};
use crate::rescaler::{
    check_transport, detect_peaks_with, holder_distance, verify_zoom, zoom_with, ZoomCentre, ZoomOptions,
    ZoomSnapshot, ZoomTime,
};
use crate::solver::{
    diffusive_dt_limit, kinetic_energy, run, Forcing, InitialCondition, Scenario, Trajectory, WallCondition,
    CFL_SAFETY,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("`{key}`: {message}")]
    Semantic { key: String, message: String },

    #[error("{context}: {source}")]
    Module {
        context: String,
        #[source]
        source: Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    fn semantic(key: &str, message: impl Into<String>) -> Self {
        CliError::Semantic {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Syntax { .. } | CliError::Semantic { .. } => 2,
            CliError::Module { .. } | CliError::Io { .. } => 1,
        }
    }

    /// Machine-readable error record.
    pub fn record(&self) -> Value {
        let mut rec = json!({ "status": "error", "message": self.to_string() });
        let (kind, extra) = match self {
            CliError::Syntax { line, .. } => ("syntax", json!({ "line": line })),
            CliError::Semantic { key, .. } => ("config", json!({ "key": key })),
            CliError::Module { context, source } => (source.kind(), json!({ "context": context })),
            CliError::Io { path, .. } => ("io", json!({ "path": path })),
        };
        rec["kind"] = json!(kind);
        if let (Some(r), Some(e)) = (rec.as_object_mut(), extra.as_object()) {
            r.extend(e.clone());
        }
        rec
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

trait Context<T> {
    fn ctx(self, context: &str) -> CliResult<T>;
}

impl<T> Context<T> for crate::Result<T> {
    fn ctx(self, context: &str) -> CliResult<T> {
        self.map_err(|source| CliError::Module {
            context: context.to_string(),
            source,
        })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsConfig {
    /// Radii, largest first, each half the previous.
    pub ladder: Vec<f64>,
    pub b: f64,
    /// `None` means the last snapshot time.
    pub t0: Option<f64>,
    #[serde(serialize_with = "spec_labels")]
    pub specs: Vec<MixedNormSpec>,
    pub truncate: bool,
    pub cutoff_b: f64,
    pub cutoff_radius: f64,
    /// `None` means the first snapshot time.
    pub cutoff_t_on: Option<f64>,
    /// `None` means a quarter of the remaining time span.
    pub cutoff_ramp: Option<f64>,
    pub energy_samples: usize,
}

fn spec_labels<S: serde::Serializer>(specs: &[MixedNormSpec], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(specs.iter().map(MixedNormSpec::label))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescalerConfig {
    pub r1: f64,
    pub ratio: f64,
    pub a: f64,
    /// When set, the window of record k is `a_relative · ρ_k M_k` (falls back to `a` on the axis).
    pub a_relative: Option<f64>,
    pub n_rho: usize,
    pub n_z: usize,
    pub levels: usize,
    pub centre: ZoomCentre,
    pub transport: bool,
    pub holder_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub scenario: Scenario,
    pub diagnostics: DiagnosticsConfig,
    pub rescaler: RescalerConfig,
    pub output: OutputConfig,
    /// SHA-256 of the normalised explicit entries.
    pub hash: String,
}

struct Entry {
    value: String,
    line: usize,
}

const SECTIONS: [&str; 4] = ["scenario", "diagnostics", "rescaler", "output"];

const KNOWN: &[(&str, &[&str])] = &[
    (
        "scenario",
        &[
            "n_rho", "n_z", "rho_max", "z_min", "z_max", "z_periodic", "initial", "amplitude", "core", "z_center",
            "width", "meridional", "omega", "seed", "modes", "dt", "t_start", "t_end", "wall", "wall_omega",
            "forcing", "rate", "no_swirl", "snapshot_every",
        ],
    ),
    (
        "diagnostics",
        &[
            "ladder", "b", "t0", "specs", "truncate", "cutoff_b", "cutoff_radius", "cutoff_t_on", "cutoff_ramp",
            "energy_samples",
        ],
    ),
    (
        "rescaler",
        &["r1", "ratio", "a", "a_relative", "n_rho", "n_z", "levels", "centre", "transport", "holder_alpha"],
    ),
    ("output", &["dir", "snapshots"]),
];

/// Parsed `section → key → entry` table; keys are removed as they are consumed.
struct Table {
    entries: BTreeMap<(String, String), Entry>,
}

impl Table {
    fn parse(text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| CliError::Syntax {
                    line,
                    message: format!("malformed section header `{content}`"),
                })?;
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(CliError::Syntax {
                        line,
                        message: format!("unknown section `[{name}]`"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| CliError::Syntax {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.contains(char::is_whitespace) || value.is_empty() {
                return Err(CliError::Syntax {
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            }
            let sec = section.clone().ok_or_else(|| CliError::Syntax {
                line,
                message: format!("`{key}` appears before any section header"),
            })?;
            let prev = entries.insert(
                (sec.clone(), key.to_string()),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
            if let Some(p) = prev {
                return Err(CliError::Syntax {
                    line,
                    message: format!("duplicate key `{sec}.{key}` (first set at line {})", p.line),
                });
            }
        }
        Ok(Self { entries })
    }

    fn hash(&self) -> String {
        let mut canon = String::new();
        for ((s, k), e) in &self.entries {
            let _ = writeln!(canon, "{s}.{k}={}", e.value);
        }
        hex::encode(Sha256::digest(canon.as_bytes()))
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(String, String)> {
        self.entries
            .remove(&(section.to_string(), key.to_string()))
            .map(|e| (format!("{section}.{key}"), e.value))
    }

    fn real(&mut self, section: &str, key: &str, default: f64) -> CliResult<f64> {
        match self.take(section, key) {
            Some((k, v)) => parse_real(&k, &v),
            None => Ok(default),
        }
    }

    fn opt_real(&mut self, section: &str, key: &str, sentinel: &str) -> CliResult<Option<f64>> {
        match self.take(section, key) {
            Some((_, v)) if v == sentinel => Ok(None),
            Some((k, v)) => parse_real(&k, &v).map(Some),
            None => Ok(None),
        }
    }

    fn count(&mut self, section: &str, key: &str, default: usize) -> CliResult<usize> {
        match self.take(section, key) {
            Some((k, v)) => v
                .parse::<usize>()
                .map_err(|_| CliError::semantic(&k, format!("expected a non-negative integer, got `{v}`"))),
            None => Ok(default),
        }
    }

    fn flag(&mut self, section: &str, key: &str, default: bool) -> CliResult<bool> {
        match self.take(section, key) {
            Some((_, v)) if v == "true" => Ok(true),
            Some((_, v)) if v == "false" => Ok(false),
            Some((k, v)) => Err(CliError::semantic(&k, format!("expected true or false, got `{v}`"))),
            None => Ok(default),
        }
    }

    fn word(&mut self, section: &str, key: &str, default: &str) -> String {
        self.take(section, key).map(|(_, v)| v).unwrap_or_else(|| default.to_string())
    }

    /// Fails on the first entry nobody consumed.
    fn finish(self) -> CliResult<()> {
        if let Some(((s, k), e)) = self.entries.into_iter().min_by_key(|(_, e)| e.line) {
            let known = KNOWN.iter().any(|(sec, keys)| *sec == s && keys.contains(&k.as_str()));
            let message = if known {
                format!("line {}: key does not apply to the chosen options", e.line)
            } else {
                format!("line {}: unknown key", e.line)
            };
            return Err(CliError::semantic(&format!("{s}.{k}"), message));
        }
        Ok(())
    }
}

fn parse_real(key: &str, text: &str) -> CliResult<f64> {
    let bad = || CliError::semantic(key, format!("expected a real number, got `{text}`"));
    if let Some(mult) = text.strip_suffix("pi") {
        let m = if mult.is_empty() { 1.0 } else { parse_real(key, mult)? };
        return Ok(m * std::f64::consts::PI);
    }
    if let Ok(x) = text.parse::<f64>() {
        return if x.is_finite() { Ok(x) } else { Err(bad()) };
    }
    parse_rational(text).map(|q| to_f64(&q)).map_err(|_| bad())
}

fn parse_specs(key: &str, text: &str) -> CliResult<Vec<MixedNormSpec>> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut out = Vec::new();
    let mut rest = compact.as_str();
    while !rest.is_empty() {
        let bad = || CliError::semantic(key, format!("expected a list of `(s,l)` pairs, got `{text}`"));
        let body = rest.strip_prefix('(').ok_or_else(bad)?;
        let close = body.find(')').ok_or_else(bad)?;
        let (s, l) = body[..close].split_once(',').ok_or_else(bad)?;
        let s: Q = parse_rational(s).map_err(|_| bad())?;
        let l: Q = parse_rational(l).map_err(|_| bad())?;
        out.push(checked_spec(key, s, l)?);
        rest = &body[close + 1..];
        rest = rest.strip_prefix(',').unwrap_or(rest);
    }
    if out.is_empty() {
        return Err(CliError::semantic(key, "at least one (s,l) pair is required"));
    }
    Ok(out)
}

fn checked_spec(key: &str, s: Q, l: Q) -> CliResult<MixedNormSpec> {
    let spec = MixedNormSpec::new(s.clone(), l.clone()).map_err(|e| CliError::semantic(key, e.to_string()))?;
    let as3 = admissible_as3(&s, &l);
    let e7 = feasible_e7(&s.recip(), &l.recip());
    if !(as3 && e7) {
        let mut failed = Vec::new();
        if !as3 {
            failed.push("the interpolation admissibility check");
        }
        if !e7 {
            failed.push("the exponent feasibility check");
        }
        return Err(CliError::semantic(
            key,
            format!("spec ({s},{l}) rejected: fails {}", failed.join(" and ")),
        ));
    }
    Ok(spec)
}

fn default_specs() -> Vec<MixedNormSpec> {
    let pairs = [("7/4", "10"), ("4", "12/7"), ("3", "3")];
    pairs
        .iter()
        .map(|(s, l)| MixedNormSpec::new(parse_rational(s).unwrap(), parse_rational(l).unwrap()).unwrap())
        .collect()
}

fn parse_scenario(t: &mut Table) -> CliResult<Scenario> {
    const S: &str = "scenario";
    let n_rho = t.count(S, "n_rho", 32)?;
    let n_z = t.count(S, "n_z", 64)?;
    let rho_max = t.real(S, "rho_max", 1.0)?;
    let z_min = t.real(S, "z_min", -1.0)?;
    let z_max = t.real(S, "z_max", 1.0)?;
    let z_periodic = t.flag(S, "z_periodic", false)?;
    let grid =
        Grid2D::new(rho_max, z_min, z_max, n_rho, n_z, z_periodic).map_err(|e| CliError::semantic(S, e.to_string()))?;
    let initial = match t.word(S, "initial", "swirl_vortex").as_str() {
        "zero" => InitialCondition::Zero,
        "rigid_rotation" => InitialCondition::RigidRotation {
            omega: t.real(S, "omega", 1.0)?,
        },
        "swirl_vortex" => InitialCondition::SwirlVortex {
            amplitude: t.real(S, "amplitude", 1.0)?,
            core: t.real(S, "core", 0.3)?,
            z_center: t.real(S, "z_center", 0.0)?,
            width: t.real(S, "width", 0.3)?,
            meridional: t.real(S, "meridional", 0.0)?,
        },
        "random" => InitialCondition::Random {
            seed: t.count(S, "seed", 0)? as u64,
            amplitude: t.real(S, "amplitude", 1.0)?,
            modes: t.count(S, "modes", 4)?,
        },
        "manufactured" => InitialCondition::Manufactured,
        other => {
            return Err(CliError::semantic(
                "scenario.initial",
                format!("unknown initial condition `{other}`"),
            ))
        }
    };
    let wall = match t.word(S, "wall", "stress_free").as_str() {
        "stress_free" => WallCondition::StressFree,
        "rotating_wall" => WallCondition::RotatingWall {
            omega: t.real(S, "wall_omega", 1.0)?,
        },
        other => return Err(CliError::semantic("scenario.wall", format!("unknown wall condition `{other}`"))),
    };
    let forcing = match t.word(S, "forcing", "none").as_str() {
        "none" => Forcing::None,
        "ramped_swirl" => Forcing::RampedSwirl {
            rate: t.real(S, "rate", 25.0)?,
        },
        "manufactured" => Forcing::Manufactured,
        other => return Err(CliError::semantic("scenario.forcing", format!("unknown forcing `{other}`"))),
    };
    let t_start = t.real(S, "t_start", 0.0)?;
    let t_end = t.real(S, "t_end", t_start + 0.3)?;
    let snapshot_every = t.count(S, "snapshot_every", 10)?;
    // `auto` takes the largest step below 0.9 of the diffusive limit whose snapshots land on t_end.
    let auto_dt = || {
        let cap = 0.9 * diffusive_dt_limit(&grid);
        let span = t_end - t_start;
        let every = snapshot_every.max(1) as f64;
        if span > 0.0 {
            span / ((span / cap / every).ceil() * every)
        } else {
            cap
        }
    };
    let dt = match t.take(S, "dt") {
        None => auto_dt(),
        Some((_, v)) if v == "auto" => auto_dt(),
        Some((k, v)) => parse_real(&k, &v)?,
    };
    let mut sc = Scenario::new(grid, initial, dt, t_end);
    sc.t_start = t_start;
    sc.wall = wall;
    sc.forcing = forcing;
    sc.no_swirl = t.flag(S, "no_swirl", false)?;
    sc.snapshot_every = snapshot_every;
    sc.validate().map_err(|e| CliError::semantic(S, e.to_string()))?;
    Ok(sc)
}

fn parse_diagnostics(t: &mut Table) -> CliResult<DiagnosticsConfig> {
    const D: &str = "diagnostics";
    let ladder = match t.take(D, "ladder") {
        None => vec![0.5, 0.25, 0.125],
        Some((k, v)) => {
            let radii = v
                .split(',')
                .map(|x| parse_real(&k, x.trim()))
                .collect::<CliResult<Vec<f64>>>()?;
            if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
                return Err(CliError::semantic(&k, "radii must be positive"));
            }
            for w in radii.windows(2) {
                if (w[1] - w[0] / 2.0).abs() > 1e-12 * w[0] {
                    return Err(CliError::semantic(
                        &k,
                        "ladder must be dyadic and sorted, largest radius first (r, r/2, r/4, …)",
                    ));
                }
            }
            radii
        }
    };
    let specs = match t.take(D, "specs") {
        None => default_specs(),
        Some((k, v)) => parse_specs(&k, &v)?,
    };
    Ok(DiagnosticsConfig {
        ladder,
        b: t.real(D, "b", 0.0)?,
        t0: t.opt_real(D, "t0", "last")?,
        specs,
        truncate: t.flag(D, "truncate", false)?,
        cutoff_b: t.real(D, "cutoff_b", 0.0)?,
        cutoff_radius: t.real(D, "cutoff_radius", 0.5)?,
        cutoff_t_on: t.opt_real(D, "cutoff_t_on", "first")?,
        cutoff_ramp: t.opt_real(D, "cutoff_ramp", "auto")?,
        energy_samples: t.count(D, "energy_samples", 8)?.max(1),
    })
}

fn parse_rescaler(t: &mut Table) -> CliResult<RescalerConfig> {
    const R: &str = "rescaler";
    let cfg = RescalerConfig {
        r1: t.real(R, "r1", 0.5)?,
        ratio: t.real(R, "ratio", 1.1)?,
        a: t.real(R, "a", 1.0)?,
        a_relative: t.opt_real(R, "a_relative", "none")?,
        n_rho: t.count(R, "n_rho", 32)?,
        n_z: t.count(R, "n_z", 64)?,
        levels: t.count(R, "levels", 16)?,
        centre: match t.word(R, "centre", "axial").as_str() {
            "axial" => ZoomCentre::AxialShift,
            "full" => ZoomCentre::Full,
            other => return Err(CliError::semantic("rescaler.centre", format!("expected axial or full, got `{other}`"))),
        },
        transport: t.flag(R, "transport", false)?,
        holder_alpha: t.real(R, "holder_alpha", 0.25)?,
    };
    if !(cfg.ratio > 1.0) {
        return Err(CliError::semantic("rescaler.ratio", "must exceed 1"));
    }
    if !(cfg.r1 > 0.0 && cfg.a > 0.0) {
        return Err(CliError::semantic("rescaler", "r1 and a must be positive"));
    }
    if cfg.n_z % 2 != 0 || cfg.n_rho < 3 || cfg.n_z < 4 || cfg.levels == 0 {
        return Err(CliError::semantic("rescaler", "zoom grid needs n_rho ≥ 3, an even n_z ≥ 4 and levels ≥ 1"));
    }
    Ok(cfg)
}

/// Parses and validates a configuration text.
pub fn parse_config(text: &str) -> CliResult<Config> {
    let mut t = Table::parse(text)?;
    let hash = t.hash();
    let scenario = parse_scenario(&mut t)?;
    let diagnostics = parse_diagnostics(&mut t)?;
    let rescaler = parse_rescaler(&mut t)?;
    let output = OutputConfig {
        dir: PathBuf::from(t.word("output", "dir", "out")),
        snapshots: t.flag("output", "snapshots", true)?,
    };
    t.finish()?;
    Ok(Config {
        scenario,
        diagnostics,
        rescaler,
        output,
        hash,
    })
}

#[derive(Debug, Parser)]
#[command(name = "axiswirl", version, about = "Axisymmetric Navier-Stokes runs and scale-invariant diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Read an existing snapshot directory instead of running the scenario.
    #[arg(long, global = true)]
    pub snapshots: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario and write snapshots plus a time series.
    Run,
    /// Functionals on the configured cylinder ladder and Type I monitors.
    Diagnose,
    /// Amplitude records, zooms and their verification.
    Zoom,
    /// Exponent reports for the configured specs, optionally a feasibility scan.
    Exponents {
        #[arg(long)]
        scan: Option<usize>,
    },
    /// Local energy inequality at sampled times.
    EnergyCheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Diagnose => "diagnose",
            Command::Zoom => "zoom",
            Command::Exponents { .. } => "exponents",
            Command::EnergyCheck => "energy-check",
        }
    }
}

/// Collects output files and writes them one after another.
struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: PathBuf) -> CliResult<Self> {
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { dir, written: Vec::new() })
    }

    fn text(&mut self, name: &str, body: &str) -> CliResult<()> {
        let p = self.dir.join(name);
        std::fs::write(&p, body).map_err(io_err(&p))?;
        self.written.push(p);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(v).expect("serialisable report");
        s.push('\n');
        self.text(name, &s)
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv(header: &str, rows: &[String]) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s
}

fn trajectory(cfg: &Config, snapshots: Option<&Path>) -> CliResult<Trajectory> {
    match snapshots {
        Some(dir) => Trajectory::load_dir(dir).ctx(&format!("loading snapshots from {}", dir.display())),
        None => run(&cfg.scenario).ctx("running scenario"),
    }
}

/// Result of one command: files written and a one-paragraph summary.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<Outcome> {
    if let Some(n) = cli.threads {
        // A pool may already exist when called twice in one process; the first one wins.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(io_err(p))?,
        None => String::new(),
    };
    let cfg = parse_config(&text)?;
    let dir = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let mut w = Writer::new(dir)?;
    let snaps = cli.snapshots.as_deref();
    let summary = match &cli.command {
        Command::Run => cmd_run(&cfg, &mut w)?,
        Command::Diagnose => cmd_diagnose(&cfg, &trajectory(&cfg, snaps)?, &mut w)?,
        Command::Zoom => cmd_zoom(&cfg, &trajectory(&cfg, snaps)?, &mut w)?,
        Command::Exponents { scan } => cmd_exponents(&cfg, *scan, &mut w)?,
        Command::EnergyCheck => cmd_energy(&cfg, &trajectory(&cfg, snaps)?, &mut w)?,
    };
    Ok(Outcome {
        files: w.written,
        summary,
    })
}

fn cmd_run(cfg: &Config, w: &mut Writer) -> CliResult<String> {
    let traj = run(&cfg.scenario).ctx("running scenario")?;
    if cfg.output.snapshots {
        let d = w.dir.join("snapshots");
        traj.save_dir(&d).ctx("writing snapshots")?;
        w.written.push(d);
    }
    let rows: Vec<String> = traj
        .snapshots
        .iter()
        .map(|s| {
            let v = &s.velocity;
            let f = v.swirl_variable().max_abs();
            format!(
                "{},{},{},{},{},{},{}",
                cfg.hash,
                fmt(CFL_SAFETY),
                fmt(s.t()),
                fmt(kinetic_energy(v)),
                fmt(v.max_magnitude()),
                fmt(f),
                fmt(v.axis_defect())
            )
        })
        .collect();
    w.text(
        "run.csv",
        &csv("config_hash,cfl_safety,t,kinetic_energy,max_velocity,max_abs_f,axis_defect", &rows),
    )?;
    w.json(
        "run.json",
        &json!({
            "config_hash": cfg.hash,
            "scenario": cfg.scenario,
            "termination": traj.termination,
            "snapshots": traj.len(),
            "t_first": traj.t_first(),
            "t_last": traj.t_last(),
        }),
    )?;
    Ok(format!(
        "run: {} snapshots on [{}, {}], termination {:?}",
        traj.len(),
        traj.t_first(),
        traj.t_last(),
        traj.termination
    ))
}

/// Largest change of any functional when the trajectory is coarsened once.
fn richardson(fine: &FunctionalReport, coarse: Option<&FunctionalReport>) -> f64 {
    let Some(c) = coarse else { return f64::NAN };
    let mut d = [fine.a - c.a, fine.e - c.e, fine.c - c.c, fine.d - c.d, fine.h - c.h]
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    for (a, b) in fine.m.iter().zip(&c.m) {
        d = d.max((a.value - b.value).abs());
    }
    d
}

fn cmd_diagnose(cfg: &Config, traj: &Trajectory, w: &mut Writer) -> CliResult<String> {
    let d = &cfg.diagnostics;
    let t0 = d.t0.unwrap_or_else(|| traj.t_last());
    let coarse = traj.coarsened().ok();
    let mut rows = Vec::new();
    let mut header = String::new();
    let mut reports = Vec::new();
    for &r in &d.ladder {
        let cyl = ParabolicCylinder::new(d.b, t0, r).ctx("cylinder")?;
        let rep = compute_functionals_with(traj, &cyl, &d.specs, d.truncate).ctx(&format!("functionals at r = {r}"))?;
        let crep = match &coarse {
            Some(c) => compute_functionals_with(c, &cyl, &d.specs, d.truncate).ok(),
            None => None,
        };
        header = format!("config_hash,richardson_tol,{}", rep.csv_header());
        rows.push(format!("{},{},{}", cfg.hash, fmt(richardson(&rep, crep.as_ref())), rep.csv_row()));
        reports.push(rep);
    }
    w.text("functionals.csv", &csv(&header, &rows))?;
    let monotone = crate::functionals::ladder_monotone(&reports);
    let type1 = type1_monitors(traj, t0, cfg.rescaler.r1).ctx("type I monitors")?;
    w.json(
        "diagnose.json",
        &json!({
            "config_hash": cfg.hash,
            "t0": t0,
            "ladder_monotone": monotone,
            "reports": reports,
            "type1": type1,
        }),
    )?;
    Ok(format!(
        "diagnose: {} cylinders at t0 = {t0}, ladder monotone: {monotone}, type I ε = {}",
        reports.len(),
        type1.epsilon
    ))
}

fn zoom_options(r: &RescalerConfig) -> ZoomOptions {
    ZoomOptions {
        n_rho: r.n_rho,
        n_z: r.n_z,
        time: ZoomTime::Uniform(r.levels),
        centre: r.centre,
        lambda: None,
    }
}

fn cmd_zoom(cfg: &Config, traj: &Trajectory, w: &mut Writer) -> CliResult<String> {
    let rc = &cfg.rescaler;
    let peaks = detect_peaks_with(traj, rc.r1, rc.ratio).ctx("detecting peaks")?;
    let peak_rows: Vec<String> = peaks
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{},{},{}",
                cfg.hash,
                fmt(rc.ratio),
                p.k,
                fmt(p.t_k),
                fmt(p.rho_k),
                fmt(p.z_k),
                fmt(p.m_k)
            )
        })
        .collect();
    w.text("peaks.csv", &csv("config_hash,record_ratio,k,t_k,rho_k,z_k,m_k", &peak_rows))?;
    let later: Vec<_> = peaks.iter().filter(|p| p.k > 0).copied().collect();
    if later.is_empty() {
        let msg = "no blow-up records beyond k = 0";
        w.json(
            "zoom.json",
            &json!({ "config_hash": cfg.hash, "records": peaks, "message": msg, "zooms": [] }),
        )?;
        return Ok(format!("zoom: {msg}"));
    }
    let opts = zoom_options(rc);
    let radius = |p: &crate::rescaler::PeakRecord| match rc.a_relative {
        Some(f) if p.rho_k > 0.0 => f * p.rho_k * p.m_k,
        _ => rc.a,
    };
    let zooms: Vec<crate::Result<ZoomSnapshot>> = later
        .par_iter()
        .map(|p| zoom_with(traj, p, radius(p), &opts))
        .collect();
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut ok: Vec<&ZoomSnapshot> = Vec::new();
    let mut transport_rows = Vec::new();
    for (p, z) in later.iter().zip(&zooms) {
        match z {
            Ok(z) => {
                let rep = verify_zoom(z, &cfg.diagnostics.specs).ctx("verifying zoom")?;
                rows.push(format!(
                    "{},{},{},ok,{},{},{},{},{},{},{},{},{},{}",
                    cfg.hash,
                    fmt(rep.tolerance),
                    p.k,
                    fmt(z.lambda_k),
                    fmt(z.a),
                    fmt(rep.normalization_direct),
                    fmt(rep.normalization),
                    rep.normalization_ok,
                    fmt(rep.sup_u),
                    rep.bound_ok,
                    fmt(rep.decay_monitor),
                    fmt(rep.max_aecd),
                    rep.ladder_monotone
                ));
                if rc.transport {
                    let radii = [z.a, z.a / 2.0, z.a / 4.0];
                    let tr = check_transport(traj, p, z.a, &radii, &cfg.diagnostics.specs, &opts)
                        .ctx("functional transport")?;
                    for r in &tr.rows {
                        transport_rows.push(format!(
                            "{},{},{},{},{},{},{},{}",
                            cfg.hash,
                            fmt(r.tolerance),
                            p.k,
                            fmt(r.r),
                            r.name,
                            fmt(r.zoomed),
                            fmt(r.source),
                            r.passes
                        ));
                    }
                }
                if cfg.output.snapshots {
                    let d = w.dir.join("zoom");
                    z.save_dir(&d).ctx("writing zoom snapshots")?;
                    if !w.written.contains(&d) {
                        w.written.push(d);
                    }
                }
                entries.push(json!({ "k": p.k, "report": rep }));
                ok.push(z);
            }
            Err(e) => {
                rows.push(format!(
                    "{},NaN,{},{},NaN,NaN,NaN,NaN,false,NaN,false,NaN,NaN,false",
                    cfg.hash,
                    p.k,
                    e.kind()
                ));
                entries.push(json!({ "k": p.k, "error": { "kind": e.kind(), "message": e.to_string() } }));
            }
        }
    }
    w.text(
        "zoom.csv",
        &csv(
            "config_hash,tolerance,k,status,lambda_k,a,normalization_direct,normalization,normalization_ok,sup_u,bound_ok,decay_monitor,max_aecd,ladder_monotone",
            &rows,
        ),
    )?;
    if rc.transport {
        w.text(
            "transport.csv",
            &csv("config_hash,tolerance,k,r,functional,zoomed,source,passes", &transport_rows),
        )?;
    }
    let holder: Vec<Value> = ok
        .windows(2)
        .map(|p| match holder_distance(p[0], p[1], rc.holder_alpha) {
            Ok(d) => json!({ "k": [p[0].peak.k, p[1].peak.k], "distance": d }),
            Err(e) => json!({ "k": [p[0].peak.k, p[1].peak.k], "error": e.to_string() }),
        })
        .collect();
    w.json(
        "zoom.json",
        &json!({
            "config_hash": cfg.hash,
            "records": peaks,
            "achieved_m": peaks.last().map(|p| p.m_k),
            "zooms": entries,
            "holder_distances": holder,
        }),
    )?;
    Ok(format!(
        "zoom: {} records, {} zoomed, achieved M = {}",
        peaks.len(),
        ok.len(),
        peaks.last().map(|p| p.m_k).unwrap_or(0.0)
    ))
}

fn cmd_exponents(cfg: &Config, scan: Option<usize>, w: &mut Writer) -> CliResult<String> {
    let mut reports = Vec::new();
    for spec in &cfg.diagnostics.specs {
        let r = exponent_report(&spec.s, &spec.l).ctx(&format!("exponents for ({})", spec.label()))?;
        reports.push(r.to_json());
    }
    w.json("exponents.json", &json!({ "config_hash": cfg.hash, "reports": reports }))?;
    let mut summary = format!("exponents: {} reports", reports.len());
    if let Some(n) = scan {
        let s = scan_feasible_region(n).ctx("feasibility scan")?;
        let body = s.to_csv();
        let mut lines = body.lines();
        let header = format!("config_hash,tolerance,{}", lines.next().unwrap_or(""));
        let prefix = format!("{},{},", cfg.hash, fmt(0.0));
        let rows: Vec<String> = lines.map(|l| format!("{prefix}{l}")).collect();
        w.text("scan.csv", &csv(&header, &rows))?;
        let _ = write!(
            summary,
            "; scan {n}×{n}: {} feasible points, l < 2 present: {}",
            s.feasible_count(),
            s.has_l_below_two()
        );
    }
    Ok(summary)
}

fn cmd_energy(cfg: &Config, traj: &Trajectory, w: &mut Writer) -> CliResult<String> {
    let d = &cfg.diagnostics;
    let t_on = d.cutoff_t_on.unwrap_or_else(|| traj.t_first());
    let ramp = d.cutoff_ramp.unwrap_or((traj.t_last() - t_on) / 4.0);
    let cutoff = Cutoff {
        b: d.cutoff_b,
        radius: d.cutoff_radius,
        t_on,
        ramp,
    };
    let n = traj.len();
    if n < 2 {
        return Err(CliError::Module {
            context: "energy check".into(),
            source: Error::InvalidArgument("needs at least two snapshots".into()),
        });
    }
    let mut ks: Vec<usize> = (1..=d.energy_samples)
        .map(|m| ((m as f64 * (n - 1) as f64) / d.energy_samples as f64).round() as usize)
        .filter(|&k| k >= 1)
        .collect();
    ks.dedup();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for k in ks {
        let t = traj.snapshots[k].t();
        let r = check_energy_inequality(traj, &cutoff, t).ctx(&format!("energy inequality at t = {t}"))?;
        rows.push(format!(
            "{},{},{},{},{},{},{}",
            cfg.hash,
            fmt(r.tolerance),
            fmt(r.t),
            fmt(r.lhs),
            fmt(r.rhs),
            fmt(r.slack),
            r.passes
        ));
        reports.push(r);
    }
    w.text("energy.csv", &csv("config_hash,tolerance,t,lhs,rhs,slack,passes", &rows))?;
    let all = reports.iter().all(|r| r.passes);
    w.json(
        "energy.json",
        &json!({ "config_hash": cfg.hash, "cutoff": cutoff, "all_pass": all, "reports": reports }),
    )?;
    Ok(format!("energy-check: {} times, all pass: {all}", reports.len()))
}
