//! `qwalk`: parameter sweeps over lossy multi-step quantum walks, written
//! as CSV/JSON tables with optional SVG plots.
//!
//! Exit codes: 0 on success, 2 for invalid input or manifests, 3 when a
//! single-point query or an eigensolve fails numerically.

mod commands;
mod manifest;
mod svg;
mod table;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qwalk::momentum::DEFAULT_GRID;

use manifest::*;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] qwalk::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qwalk", version, about = "Lossy multi-step quantum walks: invariants, dynamics and spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Winding pairs (nu', nu'') over a coin grid, line or single point
    PhaseDiagram(Flags),
    /// Loss-weighted average displacement along scan lines
    Displacement(Flags),
    /// Second moment m2/t^2 at selected times
    Moments(Flags),
    /// Scaled chiral displacement -2C(t)
    Chiral(Flags),
    /// Ring spectrum with edge-state classification and profiles
    Spectrum(Flags),
    /// Corrected probability P_C(x, t) across a domain wall
    EdgeDynamics(Flags),
    /// Disorder ensembles: displacement statistics and edge runs
    Disorder(Flags),
    /// Pseudo-unitarity map (max n0^2) with gap closings
    PseudoUnitarity(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// JSON run manifest; when given it replaces all other flags
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long, value_enum)]
    frame: Option<FrameArg>,
    /// Loss probabilities, comma separated (fractions allowed: 9/25,2/3)
    #[arg(long, allow_hyphen_values = true)]
    p: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    /// Coin grid over [-pi, pi]^2, e.g. 201x201
    #[arg(long)]
    grid: Option<String>,
    /// Scan line, e.g. t1=t2+0.5pi@13 or t1=0@101; repeatable
    #[arg(long, allow_hyphen_values = true)]
    line: Vec<String>,
    /// Single coin (with --theta2), in radians or multiples of pi
    #[arg(long, allow_hyphen_values = true)]
    theta1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    theta2: Option<String>,
    /// Observation times for moments, comma separated
    #[arg(long)]
    times: Option<String>,
    /// Momentum grid for winding numbers
    #[arg(long)]
    k_grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Ring size for spectrum / edge runs (odd)
    #[arg(long)]
    sites: Option<usize>,
    /// Coin on x < 0, e.g. 0.25pi,-0.25pi
    #[arg(long, allow_hyphen_values = true)]
    left: Option<String>,
    /// Coin on x >= 0
    #[arg(long, allow_hyphen_values = true)]
    right: Option<String>,
    #[arg(long, value_enum)]
    disorder_kind: Option<DisorderKindArg>,
    /// Disorder amplitude (angle)
    #[arg(long, allow_hyphen_values = true)]
    amplitude: Option<String>,
    #[arg(long)]
    ensembles: Option<usize>,
    /// Steps for per-ensemble edge runs
    #[arg(long)]
    edge_steps: Option<usize>,
    /// Loss for per-ensemble edge runs (must be below 1)
    #[arg(long)]
    edge_p: Option<String>,
}

impl Command {
    fn split(self) -> (CommandName, Flags) {
        match self {
            Command::PhaseDiagram(f) => (CommandName::PhaseDiagram, f),
            Command::Displacement(f) => (CommandName::Displacement, f),
            Command::Moments(f) => (CommandName::Moments, f),
            Command::Chiral(f) => (CommandName::Chiral, f),
            Command::Spectrum(f) => (CommandName::Spectrum, f),
            Command::EdgeDynamics(f) => (CommandName::EdgeDynamics, f),
            Command::Disorder(f) => (CommandName::Disorder, f),
            Command::PseudoUnitarity(f) => (CommandName::PseudoUnitarity, f),
        }
    }
}

fn diagonal(points: usize) -> LineSpec {
    LineSpec { theta1: LineTheta1::Offset(PI / 2.0), points }
}

/// Domain-wall coins per command and family.
fn default_lattice(cmd: CommandName, family: FamilyArg) -> ((f64, f64), (f64, f64)) {
    match (cmd, family) {
        (CommandName::Spectrum, FamilyArg::Three) => ((PI / 4.0, -PI / 4.0), (PI / 2.0, 0.0)),
        (_, FamilyArg::Three) => ((2.0 * PI / 3.0, PI / 4.0), (-9.0 * PI / 10.0, 3.0 * PI / 5.0)),
        _ => ((PI / 16.0, 5.0 * PI / 16.0), (-9.0 * PI / 16.0, -5.0 * PI / 16.0)),
    }
}

/// Folds flags and per-command defaults into a complete manifest.
fn resolve(cmd: CommandName, f: Flags) -> Result<RunManifest, CliError> {
    use CommandName::*;
    let family = f.family.unwrap_or(FamilyArg::Three);
    let three = family == FamilyArg::Three;

    let scan = match (&f.theta1, &f.theta2, &f.grid, f.line.is_empty()) {
        (Some(a), Some(b), _, _) => Scan::Point { theta1: parse_angle(a)?, theta2: parse_angle(b)? },
        (Some(_), None, _, _) | (None, Some(_), _, _) => {
            return Err(CliError::Input("--theta1 and --theta2 go together".into()))
        }
        (None, None, Some(g), _) => {
            let (n1, n2) = parse_grid(g)?;
            Scan::Grid { n1, n2 }
        }
        (None, None, None, false) => Scan::Lines { lines: f.line.iter().map(|l| parse_line(l)).collect::<Result<_, _>>()? },
        (None, None, None, true) => match cmd {
            PhaseDiagram => Scan::Grid { n1: 201, n2: 201 },
            PseudoUnitarity => Scan::Grid { n1: 101, n2: 101 },
            Moments => Scan::Lines { lines: vec![diagonal(101), LineSpec { theta1: LineTheta1::Fixed(0.0), points: 101 }] },
            Displacement | Chiral | Disorder => Scan::Lines { lines: vec![diagonal(13)] },
            Spectrum | EdgeDynamics => Scan::None,
        },
    };

    let p = match &f.p {
        Some(s) => parse_list(s, parse_number)?,
        None => match cmd {
            Displacement => vec![9.0 / 25.0, 2.0 / 3.0, 1.0],
            PseudoUnitarity => vec![9.0 / 25.0, 2.0 / 3.0],
            _ => vec![9.0 / 25.0],
        },
    };

    let times = match (&f.times, cmd) {
        (Some(s), _) => parse_list(s, |x| x.trim().parse::<usize>().map_err(|_| CliError::Input(format!("bad time {x:?}"))))?,
        (None, Moments) => vec![if three { 4 } else { 3 }, f.steps.unwrap_or(50)],
        (None, _) => Vec::new(),
    };
    let edge_default = if three { 4 } else { 3 };
    let steps = f.steps.unwrap_or(match cmd {
        Displacement | Disorder => 30,
        Moments => times.iter().copied().max().unwrap_or(50),
        Chiral => 50,
        EdgeDynamics => edge_default,
        PhaseDiagram | Spectrum | PseudoUnitarity => 1,
    });

    let lattice = matches!(cmd, Spectrum | EdgeDynamics | Disorder).then(|| -> Result<LatticeSpec, CliError> {
        let (l, r) = default_lattice(cmd, family);
        Ok(LatticeSpec {
            n_sites: f.sites.unwrap_or(401),
            left: f.left.as_deref().map(parse_coin).transpose()?.unwrap_or(l),
            right: f.right.as_deref().map(parse_coin).transpose()?.unwrap_or(r),
        })
    });
    let lattice = lattice.transpose()?;

    let disorder = match cmd {
        Disorder => Some(DisorderSettings {
            kind: f.disorder_kind.unwrap_or(DisorderKindArg::Static),
            amplitude: f.amplitude.as_deref().map(parse_angle).transpose()?.unwrap_or(PI / 20.0),
            ensembles: f.ensembles.unwrap_or(10),
            edge_steps: f.edge_steps.unwrap_or(edge_default),
            edge_p: f.edge_p.as_deref().map(parse_number).transpose()?.unwrap_or(9.0 / 25.0),
        }),
        _ => None,
    };

    let m = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        command: cmd,
        family,
        frame: f.frame.unwrap_or(FrameArg::Prime),
        scan,
        p,
        steps,
        times,
        k_grid: f.k_grid.unwrap_or(DEFAULT_GRID),
        seed: f.seed.unwrap_or(0),
        out: f.out.unwrap_or_else(|| PathBuf::from("qwalk-out")),
        format: f.format.unwrap_or(Format::Csv),
        lattice,
        disorder,
    };
    m.validate()?;
    Ok(m)
}

fn load_manifest(cmd: CommandName, path: &Path) -> Result<RunManifest, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let m = RunManifest::from_json(&text)?;
    if m.command != cmd {
        return Err(CliError::Input(format!(
            "manifest is for {}, not {}",
            m.command.as_str(),
            cmd.as_str()
        )));
    }
    Ok(m)
}

/// Caps the rayon pool from QWALK_THREADS.
fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QWALK_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("QWALK_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    configure_threads()?;
    let (cmd, flags) = cli.command.split();
    let manifest = match &flags.manifest {
        Some(path) => load_manifest(cmd, path)?,
        None => resolve(cmd, flags)?,
    };
    commands::run(&manifest)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qwalk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
