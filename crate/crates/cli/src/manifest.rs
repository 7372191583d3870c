//! Run manifests: the fully resolved description of one CLI invocation.
//!
//! Flags are folded into a `RunManifest` with every default filled in, so
//! the manifest written next to the outputs reproduces the run exactly.

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::ValueEnum;
use qwalk::disorder::DisorderKind;
use qwalk::engine::{Family, Frame};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    PhaseDiagram,
    Displacement,
    Moments,
    Chiral,
    Spectrum,
    EdgeDynamics,
    Disorder,
    PseudoUnitarity,
}

impl CommandName {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandName::PhaseDiagram => "phase-diagram",
            CommandName::Displacement => "displacement",
            CommandName::Moments => "moments",
            CommandName::Chiral => "chiral",
            CommandName::Spectrum => "spectrum",
            CommandName::EdgeDynamics => "edge-dynamics",
            CommandName::Disorder => "disorder",
            CommandName::PseudoUnitarity => "pseudo-unitarity",
        }
    }

    /// File stem used for this command's outputs.
    pub fn stem(&self) -> String {
        self.as_str().replace('-', "_")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Three,
    Four,
    Wfour,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Three => Family::Three,
            FamilyArg::Four => Family::Four,
            FamilyArg::Wfour => Family::WFour,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FrameArg {
    Prime,
    Dprime,
    Both,
}

impl FrameArg {
    pub fn frames(&self) -> Vec<Frame> {
        match self {
            FrameArg::Prime => vec![Frame::Prime],
            FrameArg::Dprime => vec![Frame::DoublePrime],
            FrameArg::Both => vec![Frame::Prime, Frame::DoublePrime],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DisorderKindArg {
    Static,
    Dynamic,
}

impl From<DisorderKindArg> for DisorderKind {
    fn from(k: DisorderKindArg) -> DisorderKind {
        match k {
            DisorderKindArg::Static => DisorderKind::Static,
            DisorderKindArg::Dynamic => DisorderKind::Dynamic,
        }
    }
}

/// θ₁ along a scan line, as a function of the scanned θ₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "theta1", content = "value", rename_all = "lowercase")]
pub enum LineTheta1 {
    /// θ₁ = θ₂ + value
    Offset(f64),
    /// θ₁ = value
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    #[serde(flatten)]
    pub theta1: LineTheta1,
    /// Midpoints of `points` equal slices of (−π, π).
    pub points: usize,
}

impl LineSpec {
    pub fn coins(&self) -> Vec<(f64, f64)> {
        (0..self.points)
            .map(|j| {
                let t2 = -PI + 2.0 * PI * (j as f64 + 0.5) / self.points as f64;
                let t1 = match self.theta1 {
                    LineTheta1::Offset(d) => t2 + d,
                    LineTheta1::Fixed(v) => v,
                };
                (t1, t2)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scan {
    Lines { lines: Vec<LineSpec> },
    /// Inclusive `n1 × n2` grid over [−π, π]².
    Grid { n1: usize, n2: usize },
    /// A single coin: numerical failures are reported rather than marked.
    Point { theta1: f64, theta2: f64 },
    /// Scan not used by this command.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n_sites: usize,
    /// (θ₁, θ₂) on x < 0 and x ≥ 0.
    pub left: (f64, f64),
    pub right: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderSettings {
    pub kind: DisorderKindArg,
    pub amplitude: f64,
    pub ensembles: usize,
    /// Steps for the per-ensemble edge runs.
    pub edge_steps: usize,
    /// Loss for the edge runs; corrected probabilities need p < 1.
    pub edge_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: CommandName,
    pub family: FamilyArg,
    pub frame: FrameArg,
    pub scan: Scan,
    pub p: Vec<f64>,
    pub steps: usize,
    #[serde(default)]
    pub times: Vec<usize>,
    pub k_grid: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    #[serde(default)]
    pub lattice: Option<LatticeSpec>,
    #[serde(default)]
    pub disorder: Option<DisorderSettings>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CliError> {
        let m: RunManifest = serde_json::from_str(s).map_err(|e| CliError::Input(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Input(msg));
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return bad(format!("unsupported manifest schema version {}", self.schema_version));
        }
        if self.p.is_empty() {
            return bad("empty loss list".into());
        }
        for &p in &self.p {
            qwalk::engine::LossParams::new(p)?;
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if self.k_grid < 4 {
            return bad(format!("momentum grid {} too small", self.k_grid));
        }
        if self.times.iter().any(|&t| t == 0 || t > self.steps) {
            return bad(format!("times {:?} must lie in 1..={}", self.times, self.steps));
        }
        match &self.scan {
            Scan::Lines { lines } => {
                if lines.is_empty() || lines.iter().any(|l| l.points == 0) {
                    return bad("scan lines need at least one point".into());
                }
            }
            Scan::Grid { n1, n2 } => {
                if *n1 < 2 || *n2 < 2 {
                    return bad(format!("grid {n1}x{n2} needs at least 2 points per axis"));
                }
            }
            Scan::Point { theta1, theta2 } => {
                qwalk::engine::CoinParams::new(*theta1, *theta2)?;
            }
            Scan::None => {}
        }
        if let Some(d) = &self.disorder {
            if d.ensembles == 0 || d.edge_steps == 0 || !(d.amplitude.is_finite() && d.amplitude >= 0.0) {
                return bad(format!("invalid disorder settings {d:?}"));
            }
            if !(0.0..1.0).contains(&d.edge_p) {
                return bad(format!("edge-run loss must lie in [0, 1), got {}", d.edge_p));
            }
        }
        Ok(())
    }

    /// Coins named by the scan, in output order.
    pub fn coins(&self) -> Vec<(f64, f64)> {
        match &self.scan {
            Scan::Lines { lines } => lines.iter().flat_map(LineSpec::coins).collect(),
            Scan::Grid { n1, n2 } => {
                let a = qwalk::momentum::linspace(-PI, PI, *n1);
                let b = qwalk::momentum::linspace(-PI, PI, *n2);
                a.iter().flat_map(|&t1| b.iter().map(move |&t2| (t1, t2))).collect()
            }
            Scan::Point { theta1, theta2 } => vec![(*theta1, *theta2)],
            Scan::None => Vec::new(),
        }
    }
}

/// Angle in radians from `1.2`, `pi`, `-pi/3`, `0.5pi` or `-9pi/16`.
pub fn parse_angle(s: &str) -> Result<f64, CliError> {
    let bad = || CliError::Input(format!("cannot parse angle {s:?}"));
    let s = s.trim();
    let Some(idx) = s.find("pi") else {
        return s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
    };
    let (coef, rest) = (&s[..idx], &s[idx + 2..]);
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.trim_end_matches('*').parse::<f64>().map_err(|_| bad())?,
    };
    let div = match rest {
        "" => 1.0,
        r => r.strip_prefix('/').and_then(|d| d.parse::<f64>().ok()).filter(|d| *d != 0.0).ok_or_else(bad)?,
    };
    Ok(coef * PI / div)
}

/// `0.36`, `9/25` or `1`.
pub fn parse_number(s: &str) -> Result<f64, CliError> {
    let bad = || CliError::Input(format!("cannot parse number {s:?}"));
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b) = (a.trim().parse::<f64>().map_err(|_| bad())?, b.trim().parse::<f64>().map_err(|_| bad())?);
            if b == 0.0 {
                return Err(bad());
            }
            Ok(a / b)
        }
        None => s.parse::<f64>().map_err(|_| bad()),
    }
}

pub fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T, CliError>) -> Result<Vec<T>, CliError> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(f).collect()
}

/// `201x201`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Input(format!("grid must look like 201x201, got {s:?}"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// `t1=t2+0.5pi`, `t1=t2`, `t1=0`, each with an optional `@N` point count
/// (13 by default).
pub fn parse_line(s: &str) -> Result<LineSpec, CliError> {
    let bad = || CliError::Input(format!("cannot parse line {s:?}; expected e.g. t1=t2+0.5pi@13"));
    let (body, points) = match s.split_once('@') {
        Some((b, n)) => (b, n.trim().parse::<usize>().map_err(|_| bad())?),
        None => (s, 13),
    };
    let rhs = body.trim().strip_prefix("t1=").ok_or_else(bad)?.trim();
    let theta1 = match rhs.strip_prefix("t2") {
        Some("") => LineTheta1::Offset(0.0),
        Some(r) if r.starts_with('+') => LineTheta1::Offset(parse_angle(&r[1..])?),
        Some(r) if r.starts_with('-') => LineTheta1::Offset(-parse_angle(&r[1..])?),
        Some(_) => return Err(bad()),
        None => LineTheta1::Fixed(parse_angle(rhs)?),
    };
    Ok(LineSpec { theta1, points })
}

/// `0.25pi,-0.25pi`.
pub fn parse_coin(s: &str) -> Result<(f64, f64), CliError> {
    match parse_list(s, parse_angle)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(CliError::Input(format!("coin must be theta1,theta2; got {s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_in_units_of_pi() {
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("-pi").unwrap(), -PI);
        assert_eq!(parse_angle("0.5pi").unwrap(), 0.5 * PI);
        assert_eq!(parse_angle("-9pi/16").unwrap(), -9.0 * PI / 16.0);
        assert_eq!(parse_angle("pi/3").unwrap(), PI / 3.0);
        assert_eq!(parse_angle("1.25").unwrap(), 1.25);
        assert!(parse_angle("pi/0").is_err());
        assert!(parse_angle("halfpi").is_err());
    }

    #[test]
    fn numbers_and_lists() {
        assert_eq!(parse_number("9/25").unwrap(), 0.36);
        assert_eq!(parse_list("9/25, 2/3,1", parse_number).unwrap(), vec![0.36, 2.0 / 3.0, 1.0]);
        assert_eq!(parse_grid("201x51").unwrap(), (201, 51));
        assert!(parse_grid("201").is_err());
    }

    #[test]
    fn line_specs() {
        let l = parse_line("t1=t2+0.5pi").unwrap();
        assert_eq!(l, LineSpec { theta1: LineTheta1::Offset(PI / 2.0), points: 13 });
        assert_eq!(parse_line("t1=t2-pi/2@7").unwrap().theta1, LineTheta1::Offset(-PI / 2.0));
        assert_eq!(parse_line("t1=0@101").unwrap(), LineSpec { theta1: LineTheta1::Fixed(0.0), points: 101 });
        assert!(parse_line("t2=t1").is_err());
        let coins = l.coins();
        assert_eq!(coins.len(), 13);
        assert!((coins[6].1).abs() < 1e-15);
        assert!((coins[6].0 - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn grid_coins_are_theta1_major() {
        let m = RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: CommandName::PhaseDiagram,
            family: FamilyArg::Three,
            frame: FrameArg::Both,
            scan: Scan::Grid { n1: 3, n2: 2 },
            p: vec![0.36],
            steps: 1,
            times: vec![],
            k_grid: 64,
            seed: 0,
            out: "o".into(),
            format: Format::Csv,
            lattice: None,
            disorder: None,
        };
        let c = m.coins();
        assert_eq!(c.len(), 6);
        assert_eq!(c[0], (-PI, -PI));
        assert_eq!(c[1], (-PI, PI));
        assert_eq!(c[2], (0.0, -PI));
    }

    #[test]
    fn manifest_round_trip_is_exact() {
        let m = RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: CommandName::Disorder,
            family: FamilyArg::Four,
            frame: FrameArg::Prime,
            scan: Scan::Lines {
                lines: vec![LineSpec { theta1: LineTheta1::Offset(PI / 2.0), points: 13 }],
            },
            p: vec![9.0 / 25.0, 2.0 / 3.0],
            steps: 30,
            times: vec![3, 30],
            k_grid: 4096,
            seed: 42,
            out: "out".into(),
            format: Format::Json,
            lattice: Some(LatticeSpec { n_sites: 401, left: (PI / 16.0, 5.0 * PI / 16.0), right: (-0.1, 0.7) }),
            disorder: Some(DisorderSettings {
                kind: DisorderKindArg::Dynamic,
                amplitude: PI / 20.0,
                ensembles: 10,
                edge_steps: 3,
                edge_p: 9.0 / 25.0,
            }),
        };
        let s = m.to_json();
        let back = RunManifest::from_json(&s).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), s);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(matches!(
            RunManifest::from_json(r#"{"schema_version":1,"bogus":2}"#),
            Err(CliError::Input(_))
        ));
    }
}
