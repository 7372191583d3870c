//! One function per subcommand. Each reads a resolved manifest and writes
//! its tables (and plots) into the output directory.

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;

use qwalk::disorder::{disordered_edge_persistence, ensemble_displacement, DisorderSpec};
use qwalk::dynamics::{evolve, observable_series, second_moment, CorrectedProbability, Observable};
use qwalk::engine::{build_floquet, CoinParams, Family, Frame, LossParams, Region, Variant, WalkerState};
use qwalk::lattice::{build_lattice_floquet, classify_edge_states, ipr, spectrum, EdgeThresholds, LatticeConfig};
use qwalk::momentum::{phase_cell, phase_diagram, pseudo_unitarity, winding_pair_on_grid, PhaseCell};
use rayon::prelude::*;

use crate::manifest::{CommandName, Format, RunManifest, Scan};
use crate::svg::{self, Heatmap};
use crate::table::{schemas, ResultTable};
use crate::CliError;

type Res<T> = Result<T, CliError>;

/// Writes files into the manifest's output directory and remembers them.
pub struct Outputs<'a> {
    manifest: &'a RunManifest,
    pub written: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    pub fn new(manifest: &'a RunManifest) -> Res<Self> {
        fs::create_dir_all(&manifest.out).map_err(|e| CliError::io(&manifest.out, e))?;
        let mut out = Self { manifest, written: Vec::new() };
        let mut m = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        m.push('\n');
        out.write("manifest.json", &m)?;
        Ok(out)
    }

    fn write(&mut self, name: &str, body: &str) -> Res<()> {
        let path = self.manifest.out.join(name);
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn table(&mut self, stem: &str, table: &ResultTable) -> Res<()> {
        match self.manifest.format {
            Format::Json => self.write(&format!("{stem}.json"), &table.to_json(self.manifest)?),
            Format::Csv | Format::Svg => self.write(&format!("{stem}.csv"), &table.to_csv(self.manifest)),
        }
    }

    fn svg(&mut self, stem: &str, body: impl FnOnce() -> String) -> Res<()> {
        if self.manifest.format == Format::Svg {
            self.write(&format!("{stem}.svg"), &body())?;
        }
        Ok(())
    }
}

pub fn run(manifest: &RunManifest) -> Res<Vec<PathBuf>> {
    let mut out = Outputs::new(manifest)?;
    match manifest.command {
        CommandName::PhaseDiagram => cmd_phase_diagram(manifest, &mut out)?,
        CommandName::Displacement => cmd_displacement(manifest, &mut out)?,
        CommandName::Moments => cmd_moments(manifest, &mut out)?,
        CommandName::Chiral => cmd_chiral(manifest, &mut out)?,
        CommandName::Spectrum => cmd_spectrum(manifest, &mut out)?,
        CommandName::EdgeDynamics => cmd_edge_dynamics(manifest, &mut out)?,
        CommandName::Disorder => cmd_disorder(manifest, &mut out)?,
        CommandName::PseudoUnitarity => cmd_pseudo_unitarity(manifest, &mut out)?,
    }
    Ok(out.written)
}

fn family(m: &RunManifest) -> Family {
    m.family.into()
}

/// Output stem: command, then frame and loss index when there are several.
fn stem(m: &RunManifest, frame: Option<Frame>, p_index: Option<usize>) -> String {
    let mut s = m.command.stem();
    if let Some(f) = frame.filter(|_| m.frame.frames().len() > 1) {
        s.push('_');
        s.push_str(&f.to_string());
    }
    if let Some(i) = p_index.filter(|_| m.p.len() > 1) {
        s.push_str(&format!("_p{i}"));
    }
    s
}

fn coin(t: (f64, f64)) -> Res<CoinParams> {
    Ok(CoinParams::new(t.0, t.1)?)
}

fn losses(m: &RunManifest) -> Res<Vec<LossParams>> {
    m.p.iter().map(|&p| LossParams::new(p).map_err(CliError::from)).collect()
}

fn lattice(m: &RunManifest, variant: Variant, loss: LossParams) -> Res<LatticeConfig> {
    let spec = m
        .lattice
        .as_ref()
        .ok_or_else(|| CliError::Input(format!("{} needs a lattice section", m.command.as_str())))?;
    if spec.n_sites < 3 || spec.n_sites % 2 == 0 {
        return Err(CliError::Input(format!("lattice size {} must be odd and at least 3", spec.n_sites)));
    }
    let half = (spec.n_sites as i64 - 1) / 2;
    let cfg = LatticeConfig {
        n_sites: spec.n_sites,
        regions: vec![
            Region { lo: -half, hi: -1, coin: coin(spec.left)? },
            Region { lo: 0, hi: half, coin: coin(spec.right)? },
        ],
        loss,
        variant,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn theta2_series(coins: &[(f64, f64)], values: &[f64]) -> Vec<(f64, f64)> {
    coins.iter().zip(values).map(|(c, v)| (c.1, *v)).collect()
}

fn cmd_phase_diagram(m: &RunManifest, out: &mut Outputs) -> Res<()> {
    let fam = family(m);
    for (pi, loss) in losses(m)?.into_iter().enumerate() {
        let mut table = ResultTable::new(schemas::PHASE_DIAGRAM);
        let (coins, cells): (Vec<(f64, f64)>, Vec<PhaseCell>) = match &m.scan {
            Scan::Grid { n1, n2 } => {
                let d = phase_diagram(fam, loss, *n1, *n2, m.k_grid)?;
                (m.coins(), d.cells)
            }
            Scan::Point { theta1, theta2 } => {
                // a single query reports a closed gap instead of marking it
                let pair = winding_pair_on_grid(coin((*theta1, *theta2))?, loss, fam, m.k_grid)?;
                (vec![(*theta1, *theta2)], vec![PhaseCell::Phase(pair)])
            }
            _ => {
                let coins = m.coins();
                let cells = coins
                    .par_iter()
                    .map(|&c| phase_cell(coin(c)?, loss, fam, m.k_grid).map_err(CliError::from))
                    .collect::<Res<Vec<_>>>()?;
                (coins, cells)
            }
        };
        for (&(t1, t2), cell) in coins.iter().zip(&cells) {
            let (a, b, flag) = match cell {
                PhaseCell::Phase(w) => (w.nu_prime, w.nu_double_prime, false),
                PhaseCell::Boundary => (0, 0, true),
            };
            table.push(vec![t1.into(), t2.into(), a.into(), b.into(), flag.into()]);
        }
        let name = stem(m, None, Some(pi));
        out.table(&name, &table)?;
        if let Scan::Grid { n1, n2 } = m.scan {
            for frame in m.frame.frames() {
                let fill: Vec<Option<String>> = (0..n2 * n1)
                    .map(|idx| {
                        let (i2, i1) = (idx / n1, idx % n1);
                        match cells[i1 * n2 + i2] {
                            PhaseCell::Phase(w) => Some(svg::phase_colour(match frame {
                                Frame::Prime => w.nu_prime,
                                Frame::DoublePrime => w.nu_double_prime,
                            })),
                            PhaseCell::Boundary => None,
                        }
                    })
                    .collect();
                let title = format!("{fam}-step winding ({frame}), p = {}", loss.p());
                out.svg(&format!("{name}_{frame}"), || {
                    Heatmap { title: &title, x_label: "theta1", y_label: "theta2", n_rows: n2, n_cols: n1, fill, outlines: vec![] }
                        .render()
                })?;
            }
        }
    }
    Ok(())
}

/// (coin, p, values) for one scan point.
type PointSeries = ((f64, f64), f64, Vec<f64>);

/// Runs one observable over every (coin, p) and returns per-point series.
fn sweep_series(m: &RunManifest, variant: Variant, observable: Observable) -> Res<Vec<PointSeries>> {
    let coins = m.coins();
    let losses = losses(m)?;
    let jobs: Vec<((f64, f64), LossParams)> =
        coins.iter().flat_map(|&c| losses.iter().map(move |&l| (c, l))).collect();
    jobs.par_iter()
        .map(|&(c, loss)| {
            let seq = build_floquet(variant, coin(c)?, loss);
            let tr = evolve(&seq, &WalkerState::origin_plus(), m.steps);
            Ok((c, loss.p(), observable_series(&tr, observable)?.values))
        })
        .collect()
}

fn cmd_displacement(m: &RunManifest, out: &mut Outputs) -> Res<()> {
    for frame in m.frame.frames() {
        let variant = family(m).variant(frame);
        let results = sweep_series(m, variant, Observable::Displacement)?;
        let mut table = ResultTable::new(schemas::DISPLACEMENT);
        for ((t1, t2), p, vals) in &results {
            for (i, v) in vals.iter().enumerate() {
                table.push(vec![(*t1).into(), (*t2).into(), (*p).into(), (i + 1).into(), (*v).into()]);
            }
        }
        let name = stem(m, Some(frame), None);
        out.table(&name, &table)?;
        out.svg(&name, || {
            let series: Vec<(String, Vec<(f64, f64)>)> = m
                .p
                .iter()
                .map(|&p| {
                    let pts = results.iter().filter(|r| r.1 == p).map(|r| (r.0 .1, *r.2.last().unwrap())).collect();
                    (format!("p = {p:.4}"), pts)
                })
                .collect();
            svg::lines(&format!("{variant}: average displacement at t = {}", m.steps), "theta2", "<dx>", &series)
        })?;
    }
    Ok(())
}

fn cmd_moments(m: &RunManifest, out: &mut Outputs) -> Res<()> {
    for frame in m.frame.frames() {
        let variant = family(m).variant(frame);
        let coins = m.coins();
        let losses = losses(m)?;
        let jobs: Vec<((f64, f64), LossParams)> =
            coins.iter().flat_map(|&c| losses.iter().map(move |&l| (c, l))).collect();
        let results = jobs
            .par_iter()
            .map(|&(c, loss)| {
                let seq = build_floquet(variant, coin(c)?, loss);
                let tr = evolve(&seq, &WalkerState::origin_plus(), m.steps);
                let vals = m
                    .times
                    .iter()
                    .map(|&t| second_moment(&tr, t).map(|x| x.m2_over_t2))
                    .collect::<qwalk::Result<Vec<_>>>()?;
                Ok((c, loss.p(), vals))
            })
            .collect::<Res<Vec<_>>>()?;
        let mut table = ResultTable::new(schemas::MOMENTS);
        for ((t1, t2), p, vals) in &results {
            for (&t, v) in m.times.iter().zip(vals) {
                table.push(vec![(*t1).into(), (*t2).into(), (*p).into(), t.into(), (*v).into()]);
            }
        }
        let name = stem(m, Some(frame), None);
        out.table(&name, &table)?;
        out.svg(&name, || {
            let mut series = Vec::new();
            for &p in &m.p {
                for (k, &t) in m.times.iter().enumerate() {
                    let sel: Vec<_> = results.iter().filter(|r| r.1 == p).collect();
                    let cs: Vec<(f64, f64)> = sel.iter().map(|r| r.0).collect();
                    let vs: Vec<f64> = sel.iter().map(|r| r.2[k]).collect();
                    series.push((format!("p = {p:.4}, t = {t}"), theta2_series(&cs, &vs)));
                }
            }
            svg::lines(&format!("{variant}: m2/t^2"), "theta2", "m2/t^2", &series)
        })?;
    }
    Ok(())
}

fn cmd_chiral(m: &RunManifest, out: &mut Outputs) -> Res<()> {
    for frame in m.frame.frames() {
        let variant = family(m).variant(frame);
        let results = sweep_series(m, variant, Observable::Chiral)?;
        let mut table = ResultTable::new(schemas::CHIRAL);
        for ((t1, t2), p, vals) in &results {
            for (i, v) in vals.iter().enumerate() {
                table.push(vec![(*t1).into(), (*t2).into(), (*p).into(), (i + 1).into(), (*v).into()]);
            }
        }
        let name = stem(m, Some(frame), None);
        out.table(&name, &table)?;
        out.svg(&name, || {
            let series: Vec<(String, Vec<(f64, f64)>)> = results
                .iter()
                .map(|(c, p, vals)| {
                    let pts = vals.iter().enumerate().map(|(i, v)| ((i + 1) as f64, *v)).collect();
                    (format!("theta2 = {:.3}pi, p = {p:.3}", c.1 / PI), pts)
                })
                .collect();
            svg::lines(&format!("{variant}: -2C(t)"), "t", "-2C", &series)
        })?;
    }
    Ok(())
}

fn cmd_spectrum(m: &RunManifest, out: &mut Outputs) -> Res<()> {
    for frame in m.frame.frames() {
        let variant = family(m).variant(frame);
        for (pi, loss) in losses(m)?.into_iter().enumerate() {
            let cfg = lattice(m, variant, loss)?;
            let spec = spectrum(&build_lattice_floquet(&cfg)?)?;
            let edges = classify_edge_states(&spec, EdgeThresholds::default());
            let mut table = ResultTable::new(schemas::SPECTRUM);
            let mut points = Vec::with_capacity(spec.len());
            for j in 0..spec.len() {
                let prof = spec.profile(j);
                let argmax = prof.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(i, _)| i);
                let is_edge = edges.iter().any(|e| e.index == j);
                let lam = spec.eigenvalues[j];
                table.push(vec![
                    lam.re.into(),
                    lam.im.into(),
                    ipr(&prof).into(),
                    is_edge.into(),
                    (spec.x_min + argmax as i64).into(),
                ]);
                points.push((lam.re, lam.im, is_edge));
            }
            let name = stem(m, Some(frame), Some(pi));
            out.table(&name, &table)?;

            let mut profiles = ResultTable::new(schemas::EDGE_PROFILES);
            for e in &edges {
                for (i, &v) in e.profile.iter().enumerate() {
                    profiles.push(vec![e.index.into(), (spec.x_min + i as i64).into(), v.into()]);
                }
            }
            out.table(&format!("{name}_edge_profiles"), &profiles)?;
            out.svg(&name, || {
                svg::scatter(&format!("{variant} ring spectrum, p = {}", loss.p()), "Re lambda", "Im lambda", &points)
            })?;
        }
    }
    Ok(())
}

fn corrected_table(c: &CorrectedProbability) -> ResultTable {
    let mut table = ResultTable::new(schemas::CORRECTED_PROBABILITY);
    for (t, row) in c.rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            table.push(vec![t.into(), (c.x_min + i as i64).into(), v.into()]);
        }
    }
    table
}

fn corrected_svg(title: &str, c: &CorrectedProbability) -> String {
    let n_rows = c.rows.len();
    let n_cols = c.rows.first().map_or(0, Vec::len);
    let max = c.rows.iter().flatten().copied().fold(0.0, f64::max).max(1e-300);
    let fill = c
        .rows
        .iter()
        .flatten()
        .map(|&v| {
            let g = 255.0 * (1.0 - (v / max).clamp(0.0, 1.0));
            Some(format!("rgb({g:.0},{g:.0},255)"))
        })
        .collect();
    Heatmap { title, x_label: "x", y_label: "t", n_rows, n_cols, fill, outlines: vec![] }.render()
}

fn cmd_edge_dynamics(m: &RunManifest, out: &mut Outputs) -> Res<()> {
    let clean = DisorderSpec { amplitude: 0.0, n_ensembles: 1, master_seed: m.seed, ..Default::default() };
    for frame in m.frame.frames() {
        let variant = family(m).variant(frame);
        for (pi, loss) in losses(m)?.into_iter().enumerate() {
            let cfg = lattice(m, variant, loss)?;
            let run = disordered_edge_persistence(&cfg, &clean, m.steps)?.remove(0);
            let name = stem(m, Some(frame), Some(pi));
            out.table(&name, &corrected_table(&run.corrected))?;
            out.svg(&name, || corrected_svg(&format!("{variant} corrected probability, p = {}", loss.p()), &run.corrected))?;
        }
    }
    Ok(())
}

fn cmd_disorder(m: &RunManifest, out: &mut Outputs) -> Res<()> {
    let d = m
        .disorder
        .as_ref()
        .ok_or_else(|| CliError::Input("disorder needs a disorder section".into()))?;
    let spec = DisorderSpec {
        kind: d.kind.into(),
        amplitude: d.amplitude,
        n_ensembles: d.ensembles,
        master_seed: m.seed,
        ..Default::default()
    };
    spec.validate()?;
    let kind_name = match d.kind {
        crate::manifest::DisorderKindArg::Static => "static",
        crate::manifest::DisorderKindArg::Dynamic => "dynamic",
    };
    for frame in m.frame.frames() {
        let variant = family(m).variant(frame);
        let coins = m.coins();
        let losses = losses(m)?;
        let mut table = ResultTable::new(schemas::DISORDER_STATS);
        let mut results = Vec::new();
        for &c in &coins {
            for &loss in &losses {
                // ensembles already run in parallel inside
                let stats = ensemble_displacement(&spec, variant, coin(c)?, loss, m.steps)?;
                table.push(vec![
                    c.0.into(),
                    c.1.into(),
                    loss.p().into(),
                    kind_name.into(),
                    d.amplitude.into(),
                    m.steps.into(),
                    stats.mean.into(),
                    stats.std.into(),
                ]);
                results.push((c, loss.p(), stats.mean));
            }
        }
        let name = stem(m, Some(frame), None);
        out.table(&name, &table)?;
        out.svg(&name, || {
            let series: Vec<(String, Vec<(f64, f64)>)> = m
                .p
                .iter()
                .map(|&p| {
                    let pts = results.iter().filter(|r| r.1 == p).map(|r| (r.0 .1, r.2)).collect();
                    (format!("p = {p:.4}"), pts)
                })
                .collect();
            svg::lines(&format!("{variant}: ensemble mean displacement ({kind_name})"), "theta2", "<dx>", &series)
        })?;

        if m.lattice.is_some() {
            let cfg = lattice(m, variant, LossParams::new(d.edge_p)?)?;
            for run in disordered_edge_persistence(&cfg, &spec, d.edge_steps)? {
                let edge = format!("{}_edge_e{}", stem(m, Some(frame), None), run.ensemble);
                out.table(&edge, &corrected_table(&run.corrected))?;
            }
        }
    }
    Ok(())
}

fn cmd_pseudo_unitarity(m: &RunManifest, out: &mut Outputs) -> Res<()> {
    let fam = family(m);
    for frame in m.frame.frames() {
        let variant = fam.variant(frame);
        let coins = m.coins();
        let mut table = ResultTable::new(schemas::PSEUDO_UNITARITY);
        for (pi, loss) in losses(m)?.into_iter().enumerate() {
            let rows = coins
                .par_iter()
                .map(|&c| {
                    let cp = coin(c)?;
                    let pu = pseudo_unitarity(&build_floquet(variant, cp, loss), m.k_grid)?;
                    let topo = match m.scan {
                        Scan::Point { .. } => {
                            winding_pair_on_grid(cp, loss, fam, m.k_grid)?;
                            false
                        }
                        _ => phase_cell(cp, loss, fam, m.k_grid)? == PhaseCell::Boundary,
                    };
                    Ok((c, pu.max_n0_sq, pu.is_pseudo_unitary, topo))
                })
                .collect::<Res<Vec<_>>>()?;
            for &((t1, t2), n0, flag, topo) in &rows {
                table.push(vec![t1.into(), t2.into(), loss.p().into(), n0.into(), flag.into(), topo.into()]);
            }
            if let Scan::Grid { n1, n2 } = m.scan {
                // θ₁ horizontal, θ₂ vertical
                let at = |i1: usize, i2: usize| &rows[i1 * n2 + i2];
                let mut fill = Vec::with_capacity(n1 * n2);
                let mut outlines = Vec::new();
                for i2 in 0..n2 {
                    for i1 in 0..n1 {
                        let r = at(i1, i2);
                        fill.push(Some(if r.2 { "rgb(220,220,220)".to_string() } else { "white".to_string() }));
                        let idx = i2 * n1 + i1;
                        let edge = (i1 + 1 < n1 && at(i1 + 1, i2).2 != r.2) || (i2 + 1 < n2 && at(i1, i2 + 1).2 != r.2);
                        if r.3 {
                            outlines.push((idx, "black"));
                        } else if edge {
                            outlines.push((idx, "red"));
                        }
                    }
                }
                let title = format!("{variant}: pseudo-unitarity (grey), gap closings (black), p = {}", loss.p());
                out.svg(&stem(m, Some(frame), Some(pi)), || {
                    Heatmap { title: &title, x_label: "theta1", y_label: "theta2", n_rows: n2, n_cols: n1, fill, outlines }
                        .render()
                })?;
            }
        }
        out.table(&stem(m, Some(frame), None), &table)?;
    }
    Ok(())
}

