//! Lossy time evolution and the observables extracted from it.
//!
//! Everything is computed from exact probabilities. The count-based
//! estimators used in photon experiments divide by the total number of
//! detected events; with exact densities that denominator is the total
//! detection probability, so e.g. the average displacement reduces to the
//! plain weighted sum Σ_{x,t'} x·P(x, t').

use crate::engine::{step, FloquetSequence, LossParams, SiteDensity, WalkerState};
use crate::error::{Error, Result};

/// Per-step loss densities; `steps[t' - 1]` is P(·, t').
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossRecord {
    pub steps: Vec<SiteDensity>,
}

impl LossRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn at(&self, x: i64, t: usize) -> f64 {
        t.checked_sub(1)
            .and_then(|i| self.steps.get(i))
            .map_or(0.0, |d| d.get(x))
    }

    /// Σ_x P(x, t') for each step.
    pub fn column_sums(&self) -> Vec<f64> {
        self.steps.iter().map(SiteDensity::total).collect()
    }

    /// Total loss over the first `t` steps.
    pub fn cumulative(&self, t: usize) -> f64 {
        self.steps.iter().take(t).map(SiteDensity::total).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: WalkerState,
    /// `states[t - 1]` is |ψ_t⟩.
    pub states: Vec<WalkerState>,
    pub losses: LossRecord,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// |ψ_t⟩ with t = 0 the initial state.
    pub fn state(&self, t: usize) -> Result<&WalkerState> {
        match t {
            0 => Ok(&self.initial),
            _ => self.states.get(t - 1).ok_or(Error::StepOutOfRange {
                requested: t,
                len: self.len(),
            }),
        }
    }

    pub fn survival(&self, t: usize) -> Result<f64> {
        Ok(self.state(t)?.norm_sqr())
    }

    fn check(&self, t: usize) -> Result<()> {
        if t > self.len() {
            return Err(Error::StepOutOfRange {
                requested: t,
                len: self.len(),
            });
        }
        Ok(())
    }
}

/// Runs `t` periods from `initial`, recording every loss density.
pub fn evolve(seq: &FloquetSequence, initial: &WalkerState, t: usize) -> Trajectory {
    let mut states = Vec::with_capacity(t);
    let mut losses = Vec::with_capacity(t);
    let mut cur = initial.clone();
    for step_idx in 1..=t {
        let (next, loss) = step(&cur, seq, step_idx);
        states.push(next.clone());
        losses.push(loss);
        cur = next;
    }
    Trajectory {
        initial: initial.clone(),
        states,
        losses: LossRecord { steps: losses },
    }
}

/// ⟨Δx⟩ after `t` steps: Σ_{t'≤t} Σ_x x·P(x, t').
pub fn average_displacement(traj: &Trajectory, t: usize) -> Result<f64> {
    traj.check(t)?;
    Ok(traj.losses.steps.iter().take(t).map(|d| d.moment(1)).sum())
}

/// Bound on the part of ⟨Δx⟩ not yet detected after `t` steps: the
/// surviving probability times the largest |x| it can still reach.
pub fn displacement_tail_bound(traj: &Trajectory, t: usize) -> Result<f64> {
    let st = traj.state(t)?;
    let radius = st.x_min().abs().max(st.x_max().abs()) as f64;
    Ok(st.norm_sqr() * radius)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub m2: f64,
    pub m2_over_t2: f64,
}

/// m₂(t) = Σx²P_t(x) / ΣP_t(x) over the surviving population.
pub fn second_moment(traj: &Trajectory, t: usize) -> Result<Moments> {
    if t == 0 {
        return Err(Error::StepOutOfRange {
            requested: 0,
            len: traj.len(),
        });
    }
    let dens = traj.state(t)?.density();
    let total = dens.total();
    if total <= 0.0 {
        return Err(Error::ZeroSurvival(t));
    }
    let m2 = dens.moment(2) / total;
    Ok(Moments {
        m2,
        m2_over_t2: m2 / (t * t) as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiralDisplacement {
    pub c: f64,
    pub minus_two_c: f64,
}

/// C(t) = Σ_x x·⟨ψ_t|x⟩⟨x|⊗σx|ψ_t⟩ / Σ_x⟨ψ_t|x⟩⟨x|⊗1|ψ_t⟩.
///
/// The position weight x in the numerator follows the transmitted-minus-
/// reflected estimator that is actually measured.
pub fn chiral_displacement(traj: &Trajectory, t: usize) -> Result<ChiralDisplacement> {
    let st = traj.state(t)?;
    let total = st.norm_sqr();
    if total <= 0.0 {
        return Err(Error::ZeroSurvival(t));
    }
    let num: f64 = st
        .amps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let x = (st.offset + i as i64) as f64;
            x * 2.0 * (s[0].conj() * s[1]).re
        })
        .sum();
    let c = num / total;
    Ok(ChiralDisplacement {
        c,
        minus_two_c: -2.0 * c,
    })
}

/// γ^{2t}-rescaled position distributions on a common window.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedProbability {
    pub x_min: i64,
    /// `rows[t][x - x_min]` for t = 0..=T.
    pub rows: Vec<Vec<f64>>,
}

impl CorrectedProbability {
    pub fn x_max(&self) -> i64 {
        self.x_min + self.rows.first().map_or(0, Vec::len) as i64 - 1
    }

    pub fn at(&self, x: i64, t: usize) -> f64 {
        usize::try_from(x - self.x_min)
            .ok()
            .and_then(|i| self.rows.get(t)?.get(i).copied())
            .unwrap_or(0.0)
    }

    /// Site of the largest P_C at step t (leftmost on ties).
    pub fn peak(&self, t: usize) -> Option<i64> {
        let row = self.rows.get(t)?;
        let (i, _) = row
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((i, v)),
            })?;
        Some(self.x_min + i as i64)
    }
}

/// P_C(x, t) = γ^{2t}·‖ψ_t(x)‖², γ = (1−p)^(−1/4).
pub fn corrected_probability(traj: &Trajectory, loss: LossParams) -> Result<CorrectedProbability> {
    let gamma = loss.gamma().ok_or(Error::GammaUndefined(loss.p()))?;
    let last = traj.state(traj.len())?;
    let (x_min, x_max) = (
        last.x_min().min(traj.initial.x_min()),
        last.x_max().max(traj.initial.x_max()),
    );
    let rows = (0..=traj.len())
        .map(|t| {
            let st = traj.state(t)?;
            let scale = gamma.powi(2 * t as i32);
            Ok((x_min..=x_max)
                .map(|x| {
                    let s = st.get(x);
                    scale * (s[0].norm_sqr() + s[1].norm_sqr())
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrectedProbability { x_min, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Displacement,
    M2OverT2,
    Chiral,
    Survival,
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::Displacement => "displacement",
            Observable::M2OverT2 => "m2_over_t2",
            Observable::Chiral => "chiral",
            Observable::Survival => "survival",
        }
    }
}

/// One observable evaluated at t = 1..=T. `Chiral` stores −2C.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub observable: Observable,
    pub values: Vec<f64>,
}

pub fn observable_series(traj: &Trajectory, observable: Observable) -> Result<ObservableSeries> {
    let values = (1..=traj.len())
        .map(|t| match observable {
            Observable::Displacement => average_displacement(traj, t),
            Observable::M2OverT2 => second_moment(traj, t).map(|m| m.m2_over_t2),
            Observable::Chiral => chiral_displacement(traj, t).map(|c| c.minus_two_c),
            Observable::Survival => traj.survival(t),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ObservableSeries { observable, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{build_floquet, CoinParams, CoinState, Variant};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn walk(v: Variant, t1: f64, t2: f64, p: f64, t: usize) -> Trajectory {
        let seq = build_floquet(v, CoinParams::new(t1, t2).unwrap(), LossParams::new(p).unwrap());
        evolve(&seq, &WalkerState::origin_plus(), t)
    }

    #[test]
    fn unitary_walk_loses_nothing() {
        let tr = walk(Variant::U4p, 0.4, 1.1, 0.0, 12);
        assert!(tr.losses.steps.iter().all(|d| d.values.iter().all(|&v| v == 0.0)));
        for t in 0..=12 {
            assert!((tr.survival(t).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ballistic_second_moment() {
        for t in 1..=10 {
            let tr = walk(Variant::U3p, 0.0, 0.0, 0.0, t);
            let m = second_moment(&tr, t).unwrap();
            assert!((m.m2 - 9.0 * (t * t) as f64).abs() < 1e-9 * (t * t) as f64);
            let tr = walk(Variant::U4p, 0.0, 0.0, 0.0, t);
            let m = second_moment(&tr, t).unwrap();
            assert!((m.m2_over_t2 - 16.0).abs() < 1e-9);
        }
    }

    #[test]
    fn chiral_displacement_of_initial_state_is_zero() {
        let tr = walk(Variant::U3p, 0.3, 0.2, 0.5, 0);
        assert_eq!(chiral_displacement(&tr, 0).unwrap().c, 0.0);
    }

    #[test]
    fn zero_survival_is_reported() {
        let seq = build_floquet(Variant::U3p, CoinParams::new(0.0, 0.0).unwrap(), LossParams::new(1.0).unwrap());
        let tr = evolve(&seq, &WalkerState::localized(0, CoinState::MINUS), 0);
        let mut tr2 = tr.clone();
        tr2.states.push(WalkerState::new(0, vec![]));
        assert!(matches!(second_moment(&tr2, 1), Err(Error::ZeroSurvival(1))));
        assert!(matches!(chiral_displacement(&tr2, 1), Err(Error::ZeroSurvival(1))));
    }

    #[test]
    fn corrected_probability_scaling() {
        let tr = walk(Variant::U3p, 0.5, -0.8, 0.5, 3);
        let pc = corrected_probability(&tr, LossParams::new(0.5).unwrap()).unwrap();
        let g: f64 = 0.5f64.powf(-0.25);
        let sum: f64 = pc.rows[3].iter().sum();
        assert!((sum - g.powi(6) * tr.survival(3).unwrap()).abs() < 1e-12);
        assert!(matches!(
            corrected_probability(&tr, LossParams::new(1.0).unwrap()),
            Err(Error::GammaUndefined(_))
        ));

        let tr = walk(Variant::U3p, 0.5, -0.8, 0.0, 3);
        let pc = corrected_probability(&tr, LossParams::unitary()).unwrap();
        let plain = tr.state(3).unwrap().density();
        for x in pc.x_min..=pc.x_max() {
            assert_eq!(pc.at(x, 3), plain.get(x));
        }
    }

    #[test]
    fn displacement_converges_at_full_loss() {
        let tr = walk(Variant::U3p, PI / 2.0, 0.0, 1.0, 30);
        let d = average_displacement(&tr, 30).unwrap();
        assert!((d - 3.0).abs() < 0.05, "{d}");
        assert!(displacement_tail_bound(&tr, 30).unwrap() < 0.05);
        assert!(average_displacement(&tr, 31).is_err());
    }

    #[test]
    fn series_lengths_match() {
        let tr = walk(Variant::W4p, 0.3, 0.9, 0.3, 7);
        for obs in [Observable::Displacement, Observable::M2OverT2, Observable::Chiral, Observable::Survival] {
            assert_eq!(observable_series(&tr, obs).unwrap().values.len(), 7);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn loss_accounting(vi in 0usize..6, t1 in -PI..PI, t2 in -PI..PI, p in 0.0..=1.0f64, t in 1usize..20) {
            let tr = walk(Variant::ALL[vi], t1, t2, p, t);
            for s in 1..=t {
                let acc = tr.losses.cumulative(s) + tr.survival(s).unwrap();
                prop_assert!((acc - 1.0).abs() < 1e-12);
            }
            prop_assert!(tr.losses.column_sums().iter().all(|&c| (0.0..=1.0 + 1e-15).contains(&c)));
        }

        #[test]
        fn support_is_light_cone(t1 in -PI..PI, t2 in -PI..PI, p in 0.0..=1.0f64, t in 1usize..12) {
            let tr = walk(Variant::U3p, t1, t2, p, t);
            let st = tr.state(t).unwrap();
            prop_assert!(st.x_min() >= -3 * t as i64 && st.x_max() <= 3 * t as i64);
        }
    }
}
