//! Static and dynamic coin-angle disorder ensembles.
//!
//! Random numbers come from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded
//! with the master seed; ensemble `e` reads stream `e` of that key, so every
//! realization is reproducible on its own and independent of scheduling.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::dynamics::{average_displacement, corrected_probability, evolve, CorrectedProbability};
use crate::engine::{build_floquet, CoinField, CoinParams, CoinSeries, FloquetSequence, LossParams, Variant, WalkerState};
use crate::error::{Error, Result};
use crate::lattice::LatticeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisorderKind {
    /// One δθ per site, fixed in time.
    Static,
    /// One δθ per step, the same on every site.
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisorderSpec {
    pub kind: DisorderKind,
    /// δθ is uniform on [−amplitude, amplitude].
    pub amplitude: f64,
    pub n_ensembles: usize,
    pub master_seed: u64,
    /// Perturb θ₁ and θ₂ by the same draw (default) or by two independent ones.
    pub shared_draw: bool,
}

impl Default for DisorderSpec {
    fn default() -> Self {
        DisorderSpec {
            kind: DisorderKind::Static,
            amplitude: PI / 20.0,
            n_ensembles: 10,
            master_seed: 0,
            shared_draw: true,
        }
    }
}

impl DisorderSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::InvalidDisorder(format!("amplitude {} must be finite and >= 0", self.amplitude)));
        }
        if self.n_ensembles == 0 {
            return Err(Error::InvalidDisorder("need at least one ensemble".into()));
        }
        Ok(())
    }

    pub fn rng(&self, ensemble: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(ensemble);
        rng
    }
}

/// One sampled disorder configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum DisorderRealization {
    /// Per-site offsets (δ₁, δ₂).
    Static(BTreeMap<i64, (f64, f64)>),
    /// Per-step offsets, entry t−1 for step t.
    Dynamic(CoinSeries),
}

impl DisorderRealization {
    /// Adds the offsets to a sequence, keeping any coin regions it has.
    pub fn apply(&self, seq: FloquetSequence) -> FloquetSequence {
        match self {
            DisorderRealization::Static(offsets) => {
                let mut field = seq.coin_field.clone().unwrap_or_default();
                for (&x, &(d1, d2)) in offsets {
                    let e = field.offsets.entry(x).or_insert((0.0, 0.0));
                    e.0 += d1;
                    e.1 += d2;
                }
                seq.with_coin_field(field)
            }
            DisorderRealization::Dynamic(series) => seq.with_coin_series(series.clone()),
        }
    }

    /// Every drawn offset, flattened.
    pub fn deltas(&self) -> Vec<f64> {
        match self {
            DisorderRealization::Static(m) => m.values().flat_map(|&(a, b)| [a, b]).collect(),
            DisorderRealization::Dynamic(s) => s.0.iter().flat_map(|&(a, b)| [a, b]).collect(),
        }
    }
}

/// Draws ensemble `ensemble`. Static disorder covers sites
/// `−extent..=extent` (in increasing x); dynamic disorder covers steps
/// `1..=extent`.
pub fn sample_disorder(spec: &DisorderSpec, ensemble: u64, extent: usize) -> Result<DisorderRealization> {
    spec.validate()?;
    if extent == 0 {
        return Err(Error::InvalidDisorder("extent must be positive".into()));
    }
    let mut rng = spec.rng(ensemble);
    let a = spec.amplitude;
    let mut draw = || -> (f64, f64) {
        if a == 0.0 {
            return (0.0, 0.0);
        }
        let d1 = rng.random_range(-a..=a);
        let d2 = if spec.shared_draw { d1 } else { rng.random_range(-a..=a) };
        (d1, d2)
    };
    Ok(match spec.kind {
        DisorderKind::Static => {
            let n = extent as i64;
            DisorderRealization::Static((-n..=n).map(|x| (x, draw())).collect())
        }
        DisorderKind::Dynamic => DisorderRealization::Dynamic(CoinSeries((0..extent).map(|_| draw()).collect())),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1); zero for a single ensemble.
    pub std: f64,
    pub values: Vec<f64>,
}

impl EnsembleStats {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len();
        if n == 0 {
            return EnsembleStats { mean: f64::NAN, std: f64::NAN, values };
        }
        // Shifting by the first value keeps identical samples at exactly
        // zero spread.
        let shift = values[0];
        let dev: Vec<f64> = values.iter().map(|v| v - shift).collect();
        let dmean = dev.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (dev.iter().map(|d| (d - dmean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        EnsembleStats { mean: shift + dmean, std, values }
    }
}

fn extent_for(spec: &DisorderSpec, variant: Variant, t: usize) -> usize {
    match spec.kind {
        DisorderKind::Static => variant.family().shifts_per_period() * t,
        DisorderKind::Dynamic => t,
    }
    .max(1)
}

/// ⟨Δx⟩(t) over `n_ensembles` disordered walks from |0, +⟩.
pub fn ensemble_displacement(
    spec: &DisorderSpec,
    variant: Variant,
    base: CoinParams,
    loss: LossParams,
    t: usize,
) -> Result<EnsembleStats> {
    spec.validate()?;
    let extent = extent_for(spec, variant, t);
    let values = (0..spec.n_ensembles as u64)
        .into_par_iter()
        .map(|e| {
            let seq = sample_disorder(spec, e, extent)?.apply(build_floquet(variant, base, loss));
            average_displacement(&evolve(&seq, &WalkerState::origin_plus(), t), t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleStats::from_values(values))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRun {
    pub ensemble: u64,
    pub corrected: CorrectedProbability,
    /// Site of the largest P_C at the final step.
    pub peak: i64,
}

/// Corrected-probability evolution from |0, +⟩ across the domain walls of
/// `cfg`, one run per ensemble.
///
/// The walk runs on the open line with the ring's coin regions. After t
/// steps it has only reached |x| ≤ 4t, so as long as that stays inside the
/// ring it never sees the wrap and the result equals the ring evolution.
pub fn disordered_edge_persistence(cfg: &LatticeConfig, spec: &DisorderSpec, t: usize) -> Result<Vec<EdgeRun>> {
    cfg.validate()?;
    spec.validate()?;
    let reach = cfg.variant.family().shifts_per_period() * t;
    if reach as i64 > cfg.half_width() {
        return Err(Error::InvalidLattice(format!(
            "{t} steps reach |x| = {reach}, beyond the ring half-width {}",
            cfg.half_width()
        )));
    }
    let base = build_floquet(cfg.variant, cfg.regions[0].coin, cfg.loss)
        .with_coin_field(CoinField::from_regions(cfg.regions.clone()));
    let extent = match spec.kind {
        DisorderKind::Static => reach,
        DisorderKind::Dynamic => t,
    }
    .max(1);
    (0..spec.n_ensembles as u64)
        .into_par_iter()
        .map(|e| {
            let seq = sample_disorder(spec, e, extent)?.apply(base.clone());
            let traj = evolve(&seq, &WalkerState::origin_plus(), t);
            let corrected = corrected_probability(&traj, cfg.loss)?;
            let peak = corrected.peak(t).unwrap_or(0);
            Ok(EdgeRun { ensemble: e, corrected, peak })
        })
        .collect()
}
