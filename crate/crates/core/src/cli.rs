//! Config loading, scenario execution and artifact export for the
//! `gedanken` binary.
//!
//! Configs are YAML. Every key is optional:
//!
//! ```yaml
//! scenario: bohr_corrected
//! grid: { n_points: 128, length: 20.0 }
//! preparation:
//!   d: 3.0
//!   sigma: 0.15
//!   K0: 0.0
//!   envelopes: [{ kind: unit }, { kind: gaussian, center: -3.0, width: 1.5 }]
//! pointer: { axis: diaphragm, basis: momentum, value: 0.0 }
//! compare_pointer: { axis: diaphragm, basis: position, value: 0.0 }
//! alice_basis: position
//! bob_basis: momentum
//! outputs: [position, momentum]
//! counterfactual_source: epr_ideal
//! doppler: { omega: 1.0, v: 1.0e-3, mass: 1.0e9 }
//! ```
//!
//! Densities are written as CSV, one row per cell in lexicographic index
//! order, preceded by a `#` line carrying the axes, bases, grid and cell
//! measure. Probabilities use the shortest round-trip exponent form.
//! Reports and the manifest are JSON.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::doppler::{
    collide_exact, conservation_residuals, infer_velocity, CollisionInput, CollisionResult,
};
use crate::error::{Error, Result};
use crate::lattice::{make_grid, Rep};
use crate::measurement::{Density, PointerSpec};
use crate::protocols::{
    disturbance_envelopes, run_scenario, GridSpec, ProtocolConfig, ProtocolReport, Scenario,
};
use crate::states::{Envelope, PreparationParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable read for the log filter (`error`, `info`, `debug`, ...).
pub const LOG_ENV: &str = "GEDANKEN_LOG";

/// What the binary was asked to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Protocol(Scenario),
    Doppler,
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "doppler" {
            Ok(Command::Doppler)
        } else {
            s.parse().map(Command::Protocol)
        }
    }
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Protocol(s) => s.as_str(),
            Command::Doppler => "doppler",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopplerSpec {
    #[serde(default = "DopplerSpec::default_omega")]
    pub omega: f64,
    #[serde(default = "DopplerSpec::default_v")]
    pub v: f64,
    #[serde(default = "DopplerSpec::default_mass")]
    pub mass: f64,
}

impl DopplerSpec {
    fn default_omega() -> f64 {
        1.0
    }

    fn default_v() -> f64 {
        1e-3
    }

    fn default_mass() -> f64 {
        1e9
    }
}

impl Default for DopplerSpec {
    fn default() -> Self {
        DopplerSpec {
            omega: Self::default_omega(),
            v: Self::default_v(),
            mass: Self::default_mass(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreparationFile {
    d: Option<f64>,
    sigma: Option<f64>,
    #[serde(rename = "K0", alias = "k0")]
    k0: Option<f64>,
    envelopes: Option<[Envelope; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scenario: Option<String>,
    #[serde(default)]
    grid: GridSpec,
    #[serde(default)]
    preparation: PreparationFile,
    pointer: Option<PointerSpec>,
    compare_pointer: Option<PointerSpec>,
    alice_basis: Option<Rep>,
    bob_basis: Option<Rep>,
    #[serde(default)]
    outputs: Vec<String>,
    counterfactual_source: Option<Scenario>,
    #[serde(default)]
    doppler: DopplerSpec,
}

/// A parsed config before scenario-dependent defaults are applied.
#[derive(Debug, Default)]
pub struct LoadedConfig {
    file: ConfigFile,
    /// Scenario named inside the file, if any.
    pub scenario: Option<Command>,
}

/// A config ready to run, with every default filled and every snap applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub protocol: ProtocolConfig,
    pub doppler: DopplerSpec,
    pub notes: Vec<String>,
}

/// Parses YAML text; `origin` names the source in diagnostics.
pub fn parse_config_str(text: &str, origin: &str) -> Result<LoadedConfig> {
    let file: ConfigFile = if text.trim().is_empty() {
        ConfigFile::default()
    } else {
        serde_yaml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?
    };
    let scenario = file
        .scenario
        .as_deref()
        .map(Command::from_str)
        .transpose()
        .map_err(|e| Error::Config(format!("{origin}: field `scenario`: {e}")))?;
    let loaded = LoadedConfig { file, scenario };
    // validate eagerly so bad files fail before any work is done
    loaded.resolve(scenario.unwrap_or(Command::Protocol(Scenario::EprIdeal)))?;
    Ok(loaded)
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        context: format!("reading config {}", path.display()),
        source,
    })?;
    parse_config_str(&text, &path.display().to_string())
}

impl LoadedConfig {
    /// Applies defaults for `command` and validates against the grid.
    pub fn resolve(&self, command: Command) -> Result<ResolvedConfig> {
        if let Some(named) = self.scenario {
            if named != command {
                return Err(Error::Config(format!(
                    "config names scenario `{}` but `{}` was requested",
                    named.as_str(),
                    command.as_str()
                )));
            }
        }
        let f = &self.file;
        let base = PreparationParams::default();
        let d = f.preparation.d.unwrap_or(base.d);
        let envelopes = match (f.preparation.envelopes, command) {
            (Some(e), _) => e,
            (None, Command::Protocol(Scenario::Disturbance)) => disturbance_envelopes(d),
            (None, _) => base.envelopes,
        };
        let preparation = PreparationParams {
            d,
            sigma: f.preparation.sigma.unwrap_or(base.sigma),
            k0: f.preparation.k0.unwrap_or(base.k0),
            envelopes,
        };
        let grid = f.grid.build()?;
        let resolved = preparation.resolve(&grid)?;
        let mut protocol = ProtocolConfig {
            grid: f.grid,
            preparation: resolved.params,
            pointer: f.pointer.clone(),
            compare_pointer: f.compare_pointer.clone(),
            alice_basis: f.alice_basis.unwrap_or(Rep::Position),
            bob_basis: f.bob_basis.unwrap_or(Rep::Momentum),
            outputs: f.outputs.clone(),
            counterfactual_source: f.counterfactual_source.unwrap_or(Scenario::EprIdeal),
        };
        let mut notes = resolved.notes;
        // fill and snap the pointers the scenario will use
        let bases: &[Rep] = match command {
            Command::Protocol(Scenario::BohrCorrected) => &[Rep::Momentum],
            Command::Protocol(Scenario::BohrFlawed) => &[Rep::Position],
            Command::Protocol(Scenario::Disturbance) => &[Rep::Momentum, Rep::Position],
            Command::Protocol(Scenario::Counterfactual) => match protocol.counterfactual_source {
                Scenario::BohrCorrected => &[Rep::Momentum],
                Scenario::BohrFlawed => &[Rep::Position],
                _ => &[],
            },
            _ => &[],
        };
        let mut filled = Vec::new();
        for &basis in bases {
            let mut p = protocol.pointer_for(basis)?;
            let snap = grid.snap(basis, p.value)?;
            if snap.distance() != 0.0 {
                notes.push(format!(
                    "snapped {basis} pointer from {} to {} (distance {:e})",
                    snap.requested,
                    snap.snapped,
                    snap.distance()
                ));
            }
            p.value = snap.snapped;
            filled.push(p);
        }
        match (command, filled.as_slice()) {
            (Command::Protocol(Scenario::Disturbance), [k, x]) => {
                protocol.pointer = Some(k.clone());
                protocol.compare_pointer = Some(x.clone());
            }
            (_, [p]) => protocol.pointer = Some(p.clone()),
            _ => {}
        }
        if command == Command::Doppler {
            let d = &f.doppler;
            CollisionInput::new(d.omega, d.v, d.mass)?;
        }
        for note in &notes {
            log::warn!("{note}");
        }
        Ok(ResolvedConfig {
            protocol,
            doppler: f.doppler,
            notes,
        })
    }
}

fn io_err(context: String) -> impl FnOnce(std::io::Error) -> Error {
    move |source| Error::Io { context, source }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        context: format!("csv {}", path.display()),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Writes `density` as CSV.
pub fn export_density(density: &Density, path: &Path) -> Result<()> {
    if density.axes().is_empty() {
        return Err(Error::Mismatch("density without axes".into()));
    }
    let file = fs::File::create(path).map_err(io_err(format!("creating {}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    let grid = density.grid();
    let reps: Vec<&str> = density.reps().iter().map(|r| r.as_str()).collect();
    writeln!(
        out,
        "# axes={} reps={} n_points={} length={} cell={}",
        density.axes().join(","),
        reps.join(","),
        grid.n_points(),
        grid.length(),
        density.cell()
    )
    .map_err(io_err(format!("writing {}", path.display())))?;

    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = density
        .axes()
        .iter()
        .zip(&reps)
        .map(|(a, r)| format!("{a}_{r}"))
        .collect();
    header.push("probability".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let mut row = Vec::with_capacity(header.len());
    for (idx, &p) in density.values().indexed_iter() {
        row.clear();
        for ax in 0..density.axes().len() {
            row.push(density.coords(ax)[idx[ax]].to_string());
        }
        row.push(format!("{p:e}"));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush()
        .map_err(io_err(format!("writing {}", path.display())))?;
    Ok(())
}

/// Reads a file written by [`export_density`].
pub fn import_density(path: &Path) -> Result<Density> {
    let bad = |what: String| Error::Config(format!("{}: {what}", path.display()));
    let file = fs::File::open(path).map_err(io_err(format!("opening {}", path.display())))?;
    let mut reader = BufReader::new(file);
    let mut meta = String::new();
    reader
        .read_line(&mut meta)
        .map_err(io_err(format!("reading {}", path.display())))?;
    let meta = meta
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| bad("missing `#` metadata line".into()))?;
    let field = |key: &str| -> Result<&str> {
        meta.split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| bad(format!("metadata lacks `{key}`")))
    };
    let axes: Vec<String> = field("axes")?.split(',').map(String::from).collect();
    let reps = field("reps")?
        .split(',')
        .map(Rep::from_str)
        .collect::<Result<Vec<_>>>()?;
    let n: usize = field("n_points")?
        .parse()
        .map_err(|_| bad("bad n_points".into()))?;
    let length: f64 = field("length")?
        .parse()
        .map_err(|_| bad("bad length".into()))?;
    let grid = make_grid(n, length)?;
    if axes.len() != reps.len() || axes.is_empty() {
        return Err(bad("axes and reps disagree".into()));
    }

    let mut rdr = csv::Reader::from_reader(reader);
    let mut values = Vec::with_capacity(n.pow(axes.len() as u32));
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != axes.len() + 1 {
            return Err(bad(format!("row {} has {} fields", i + 1, rec.len())));
        }
        let p: f64 = rec[axes.len()]
            .parse()
            .map_err(|_| bad(format!("row {}: bad probability", i + 1)))?;
        values.push(p);
    }
    let shape = vec![n; axes.len()];
    let values = ArrayD::from_shape_vec(IxDyn(&shape), values)
        .map_err(|e| bad(format!("expected {} rows: {e}", n.pow(axes.len() as u32))))?;
    Density::new(grid, axes, reps, values)
}

/// Record of one run, written as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub config: ResolvedConfig,
    pub artifacts: Vec<String>,
    pub tool_version: String,
    pub duration_seconds: f64,
}

#[derive(Debug, Serialize)]
struct DopplerReport {
    input: CollisionInput,
    result: CollisionResult,
    energy_residual: f64,
    momentum_residual: f64,
    inferred_velocity: f64,
    notes: Vec<String>,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(format!("writing {}", path.display())))
}

fn doppler_report(spec: &DopplerSpec) -> Result<DopplerReport> {
    let input = CollisionInput::new(spec.omega, spec.v, spec.mass)?;
    let result = collide_exact(&input)?;
    let (energy_residual, momentum_residual) = conservation_residuals(&input, &result);
    Ok(DopplerReport {
        input,
        result,
        energy_residual,
        momentum_residual,
        inferred_velocity: infer_velocity(input.omega_in, result.omega_out, input.mass)?,
        notes: vec![
            "shift_doppler is the large-mass limit -2 v omega (dimensionless velocity, hbar = c = 1)".into(),
        ],
    })
}

/// Runs `command` and writes its artifacts into `out_dir`.
///
/// All numerical work happens before the first file is written, so a
/// failing run leaves no partial output behind.
pub fn run(command: Command, config: &LoadedConfig, out_dir: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let resolved = config.resolve(command)?;
    let mut artifacts = Vec::new();
    match command {
        Command::Doppler => {
            let report = doppler_report(&resolved.doppler)?;
            create_dir(out_dir)?;
            write_json(&report, &out_dir.join("report.json"))?;
            artifacts.push("report.json".to_string());
        }
        Command::Protocol(scenario) => {
            log::info!("running {scenario}");
            let report = run_scenario(scenario, &resolved.protocol)?;
            create_dir(out_dir)?;
            for (name, density) in &report.densities {
                let file = format!("{name}_density.csv");
                export_density(density, &out_dir.join(&file))?;
                artifacts.push(file);
            }
            write_report(&report, &out_dir.join("report.json"))?;
            artifacts.push("report.json".to_string());
        }
    }
    for a in &artifacts {
        let len = fs::metadata(out_dir.join(a))
            .map_err(io_err(format!("checking {a}")))?
            .len();
        if len == 0 {
            return Err(Error::Config(format!("artifact {a} is empty")));
        }
    }
    let manifest = RunManifest {
        scenario: command.as_str().to_string(),
        config: resolved,
        artifacts,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&manifest, &out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// JSON text of a report, listing the density files next to it.
pub fn report_json(report: &ProtocolReport) -> Result<String> {
    #[derive(Serialize)]
    struct WithDensities<'a> {
        densities: Vec<String>,
        #[serde(flatten)]
        report: &'a ProtocolReport,
    }
    let mut text = serde_json::to_string_pretty(&WithDensities {
        densities: report
            .densities
            .keys()
            .map(|k| format!("{k}_density.csv"))
            .collect(),
        report,
    })
    .map_err(|e| Error::Config(format!("serializing report: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn write_report(report: &ProtocolReport, path: &Path) -> Result<()> {
    fs::write(path, report_json(report)?).map_err(io_err(format!("writing {}", path.display())))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))
}

/// Exit code for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

/// Machine-readable error record printed on stderr.
pub fn error_record(err: &Error) -> String {
    serde_json::json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": exit_code(err),
    })
    .to_string()
}

/// Parsed command line, shared by the binary and tests.
#[derive(Debug, clap::Parser)]
#[command(
    name = "gedanken",
    version,
    about = "EPR / diaphragm gedanken-experiment simulator"
)]
pub struct Args {
    /// epr_ideal | bohr_corrected | bohr_flawed | disturbance | counterfactual | doppler
    pub scenario: String,
    /// YAML config; defaults apply to anything it leaves out.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Incident photon frequency (doppler only).
    #[arg(long)]
    pub omega: Option<f64>,
    /// Target velocity (doppler only).
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<f64>,
    /// Target mass (doppler only).
    #[arg(long)]
    pub mass: Option<f64>,
}

/// Executes parsed arguments; returns the process exit code.
pub fn execute(args: &Args) -> i32 {
    let outcome = (|| {
        let command = Command::from_str(&args.scenario)?;
        let mut loaded = match &args.config {
            Some(path) => parse_config(path)?,
            None => LoadedConfig::default(),
        };
        if command != Command::Doppler
            && (args.omega.is_some() || args.v.is_some() || args.mass.is_some())
        {
            return Err(Error::Config(
                "--omega/--v/--mass only apply to doppler".into(),
            ));
        }
        let d = &mut loaded.file.doppler;
        d.omega = args.omega.unwrap_or(d.omega);
        d.v = args.v.unwrap_or(d.v);
        d.mass = args.mass.unwrap_or(d.mass);
        run(command, &loaded, &args.out)
    })();
    match outcome {
        Ok(manifest) => {
            log::info!(
                "wrote {} artifacts to {}",
                manifest.artifacts.len(),
                args.out.display()
            );
            EXIT_OK
        }
        Err(err) => {
            eprintln!("{}", error_record(&err));
            exit_code(&err)
        }
    }
}
