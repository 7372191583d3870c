//! Momentum-space analysis of homogeneous walks.
//!
//! Fourier convention: `Shift(k) = diag(e^{ik}, e^{-ik})`,
//! `ShiftUp(k) = diag(1, e^{-ik})`, `ShiftDown(k) = diag(e^{ik}, 1)`.
//! The one-period matrix is decomposed as
//! `U(k) = n0·1 − i(n1σx + n2σy + n3σz)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use rayon::prelude::*;

use crate::engine::{build_floquet, CoinParams, Family, FloquetSequence, Frame, LossParams, PrimitiveOp};
use crate::error::{Error, Result};
use crate::linalg::{Mat2, C64, I, ONE};

pub const DEFAULT_GRID: usize = 4096;
pub const MAX_GRID: usize = 32768;
/// Smallest admissible |Re n(k)| before the gap counts as closed.
pub const GAP_EPS: f64 = 1e-8;
pub const INTEGER_TOL: f64 = 1e-6;
pub const CHIRAL_AXIS_TOL: f64 = 1e-9;
/// Slack on `max n0² ≤ 1` that absorbs rounding at exact band touchings.
pub const PSEUDO_UNITARY_TOL: f64 = 1e-12;
/// Points with |1 − n0²| below this are dropped from the group-velocity integral.
pub const GAPLESS_EXCLUSION: f64 = 1e-10;

/// Sampled momenta `k_j = −π + 2π(j+1)/n`, j = 0..n, covering (−π, π].
pub fn momentum_grid(n: usize) -> impl Iterator<Item = f64> + Clone {
    (0..n).map(move |j| -PI + TAU * (j + 1) as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub k: f64,
    pub n0: C64,
    pub n: [C64; 3],
}

impl BlochVector {
    pub fn from_matrix(k: f64, u: &Mat2) -> Self {
        let half_i = I * 0.5;
        BlochVector {
            k,
            n0: u.trace() * 0.5,
            n: [
                half_i * (Mat2::sigma_x() * *u).trace(),
                half_i * (Mat2::sigma_y() * *u).trace(),
                half_i * (Mat2::sigma_z() * *u).trace(),
            ],
        }
    }

    /// Rebuilds `n0·1 − i(n·σ)`.
    pub fn matrix(&self) -> Mat2 {
        let nsig = Mat2::sigma_x().scale(self.n[0])
            + Mat2::sigma_y().scale(self.n[1])
            + Mat2::sigma_z().scale(self.n[2]);
        Mat2::IDENTITY.scale(self.n0) - nsig.scale(I)
    }

    pub fn re_n(&self) -> [f64; 3] {
        [self.n[0].re, self.n[1].re, self.n[2].re]
    }

    /// Bilinear (not Hermitian) square n·n.
    pub fn n_dot_n(&self) -> C64 {
        self.n[0] * self.n[0] + self.n[1] * self.n[1] + self.n[2] * self.n[2]
    }

    pub fn scaled(&self, s: f64) -> Self {
        BlochVector {
            k: self.k,
            n0: self.n0 * s,
            n: self.n.map(|z| z * s),
        }
    }
}

/// Unit vector Re(n)/‖Re(n)‖.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HVector {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
}

impl HVector {
    pub fn from_bloch(b: &BlochVector) -> Result<Self> {
        let r = b.re_n();
        let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if !(norm > GAP_EPS) {
            return Err(Error::GapClosed { k: b.k, norm });
        }
        Ok(HVector {
            h1: r[0] / norm,
            h2: r[1] / norm,
            h3: r[2] / norm,
        })
    }
}

fn op_matrix(op: &PrimitiveOp, coin: CoinParams, phase: C64) -> Mat2 {
    match *op {
        PrimitiveOp::CoinRotation(angle) => Mat2::rotation(angle.resolve(coin)),
        PrimitiveOp::Shift => Mat2::diag(phase, phase.conj()),
        PrimitiveOp::ShiftUp => Mat2::diag(ONE, phase.conj()),
        PrimitiveOp::ShiftDown => Mat2::diag(phase, ONE),
        PrimitiveOp::Loss(p) => Mat2::loss(p),
    }
}

/// The 2×2 one-period matrix at momentum k.
pub fn floquet_matrix(seq: &FloquetSequence, k: f64) -> Result<Mat2> {
    if !seq.is_homogeneous() {
        return Err(Error::Inhomogeneous);
    }
    let phase = C64::from_polar(1.0, k);
    Ok(seq
        .ops
        .iter()
        .fold(Mat2::IDENTITY, |u, op| op_matrix(op, seq.coin, phase) * u))
}

pub fn bloch_decompose(seq: &FloquetSequence, k: f64) -> Result<BlochVector> {
    Ok(BlochVector::from_matrix(k, &floquet_matrix(seq, k)?))
}

/// Non-integer winding accumulated over an `n`-point grid.
pub(crate) fn winding_value_with<F>(bloch: F, n: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<BlochVector>,
{
    let mut phis = Vec::with_capacity(n);
    for k in momentum_grid(n) {
        let h = HVector::from_bloch(&bloch(k)?)?;
        if h.h1.abs() > CHIRAL_AXIS_TOL {
            return Err(Error::ChiralAxisViolation { k, h1: h.h1 });
        }
        phis.push(h.h3.atan2(h.h2));
    }
    let total: f64 = (0..n)
        .map(|j| crate::engine::wrap_angle(phis[(j + 1) % n] - phis[j]))
        .sum();
    Ok(-total / TAU)
}

pub(crate) fn winding_number_with<F>(bloch: F, n_grid: usize) -> Result<i32>
where
    F: Fn(f64) -> Result<BlochVector>,
{
    let mut n = n_grid.max(8);
    loop {
        let value = winding_value_with(&bloch, n)?;
        if (value - value.round()).abs() <= INTEGER_TOL {
            return Ok(value.round() as i32);
        }
        if n >= MAX_GRID {
            return Err(Error::NonIntegerWinding { value, grid: n });
        }
        n = (2 * n).min(MAX_GRID);
    }
}

/// Winding of h(k) about the h1 axis, doubling the grid up to
/// [`MAX_GRID`] when the accumulated angle is not close to an integer.
pub fn winding_number(seq: &FloquetSequence, n_grid: usize) -> Result<i32> {
    winding_number_with(|k| bloch_decompose(seq, k), n_grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindingPair {
    pub nu_prime: i32,
    pub nu_double_prime: i32,
}

impl WindingPair {
    pub fn new(nu_prime: i32, nu_double_prime: i32) -> Self {
        WindingPair {
            nu_prime,
            nu_double_prime,
        }
    }
}

pub fn winding_pair(coin: CoinParams, loss: LossParams, family: Family) -> Result<WindingPair> {
    winding_pair_on_grid(coin, loss, family, DEFAULT_GRID)
}

pub fn winding_pair_on_grid(coin: CoinParams, loss: LossParams, family: Family, n_grid: usize) -> Result<WindingPair> {
    let nu = |frame| winding_number(&build_floquet(family.variant(frame), coin, loss), n_grid);
    Ok(WindingPair::new(nu(Frame::Prime)?, nu(Frame::DoublePrime)?))
}

/// (ν₀, ν_π) stored as twice their value so half-integers stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymmetrizedInvariants {
    pub twice_nu0: i32,
    pub twice_nu_pi: i32,
}

impl SymmetrizedInvariants {
    pub fn nu0(&self) -> f64 {
        self.twice_nu0 as f64 / 2.0
    }

    pub fn nu_pi(&self) -> f64 {
        self.twice_nu_pi as f64 / 2.0
    }
}

pub fn nu0_nupi(pair: WindingPair) -> SymmetrizedInvariants {
    SymmetrizedInvariants {
        twice_nu0: pair.nu_prime + pair.nu_double_prime,
        twice_nu_pi: pair.nu_prime - pair.nu_double_prime,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quasienergy {
    pub eps_plus: C64,
    pub eps_minus: C64,
    pub lambda_plus: C64,
    pub lambda_minus: C64,
}

/// ε = i·log λ on the branch Re ε ∈ (−π, π].
pub fn quasienergy_of(lambda: C64) -> C64 {
    let mut re = -lambda.arg();
    if re <= -PI {
        re += TAU;
    }
    C64::new(re, lambda.norm().ln())
}

/// Eigenvalues λ± = n0 ∓ i·sqrt(n·n). For det U = 1 this is
/// n0 ∓ i·sqrt(1 − n0²); the n·n form also keeps λ₊λ₋ = det U for the
/// unscaled lossy operator.
pub fn quasienergy(b: &BlochVector) -> Quasienergy {
    let s = b.n_dot_n().sqrt();
    let lambda_plus = b.n0 - I * s;
    let lambda_minus = b.n0 + I * s;
    Quasienergy {
        eps_plus: quasienergy_of(lambda_plus),
        eps_minus: quasienergy_of(lambda_minus),
        lambda_plus,
        lambda_minus,
    }
}

fn require_unitary(seq: &FloquetSequence) -> Result<()> {
    let p = seq.loss.p();
    let word_p = seq.ops.iter().find_map(|op| match op {
        PrimitiveOp::Loss(p) => Some(*p),
        _ => None,
    });
    match word_p {
        Some(q) if q != 0.0 => Err(Error::NotUnitaryLimit(q)),
        _ if p != 0.0 => Err(Error::NotUnitaryLimit(p)),
        _ => Ok(()),
    }
}

/// max_k ‖σx U(k) σx U(k) − 1‖_F; zero for a chiral-symmetric word.
pub fn chiral_residual(seq: &FloquetSequence, n_grid: usize) -> Result<f64> {
    require_unitary(seq)?;
    let sx = Mat2::sigma_x();
    let mut worst: f64 = 0.0;
    for k in momentum_grid(n_grid) {
        let u = floquet_matrix(seq, k)?;
        worst = worst.max((sx * u * sx * u - Mat2::IDENTITY).frobenius_norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoUnitarity {
    pub is_pseudo_unitary: bool,
    pub max_n0_sq: f64,
}

/// Bloch vector of γ·U(k), γ = (1−p)^(−1/4).
pub fn scaled_bloch(seq: &FloquetSequence, k: f64) -> Result<BlochVector> {
    let gamma = seq.loss.gamma().ok_or(Error::GammaUndefined(seq.loss.p()))?;
    Ok(bloch_decompose(seq, k)?.scaled(gamma))
}

/// Scans γ·U(k) and reports whether n0² ≤ 1 everywhere, i.e. whether the
/// scaled spectrum is entirely unimodular.
pub fn pseudo_unitarity(seq: &FloquetSequence, n_grid: usize) -> Result<PseudoUnitarity> {
    let mut max_n0_sq = f64::NEG_INFINITY;
    for k in momentum_grid(n_grid) {
        let b = scaled_bloch(seq, k)?;
        if b.n0.im.abs() > 1e-9 {
            return Err(Error::ComplexN0 { k, im: b.n0.im });
        }
        max_n0_sq = max_n0_sq.max(b.n0.re * b.n0.re);
    }
    Ok(PseudoUnitarity {
        is_pseudo_unitary: max_n0_sq <= 1.0 + PSEUDO_UNITARY_TOL,
        max_n0_sq,
    })
}

/// Metric η = OO† built from the biorthonormal eigenvectors of the
/// (scaled) Floquet matrix at one pseudo-unitary momentum, returned with
/// the residual ‖U⁻¹ − ηU†η⁻¹‖_F.
pub fn pseudo_unitarity_metric(b: &BlochVector) -> Result<(Mat2, f64)> {
    let q = quasienergy(b);
    let (ap, am) = (q.lambda_plus.norm(), q.lambda_minus.norm());
    if (q.lambda_plus - q.lambda_minus).norm() < 1e-10 {
        return Err(Error::DegenerateSpectrum);
    }
    if (ap - 1.0).abs() > 1e-8 || (am - 1.0).abs() > 1e-8 {
        return Err(Error::NotPseudoUnitary(ap, am));
    }

    let s = b.n_dot_n().sqrt();
    let [n1, n2, n3] = b.n;
    let right = |sign: f64| {
        let norm = (s * 2.0 * (s + n3 * sign)).sqrt();
        [(n3 + s * sign) / norm, (n1 + I * n2) / norm]
    };
    let psi_p = right(1.0);
    let psi_m = right(-1.0);

    let r = C64::from(FRAC_1_SQRT_2);
    let psi = Mat2::new(psi_p[0], psi_m[0], psi_p[1], psi_m[1]);
    let phi = Mat2::new(r, r, r, -r);
    let o = psi * phi.adjoint();
    let eta = o * o.adjoint();

    let u = b.matrix();
    let u_inv = u.inverse().ok_or(Error::DegenerateSpectrum)?;
    let eta_inv = eta.inverse().ok_or(Error::DegenerateSpectrum)?;
    let residual = (u_inv - eta * u.adjoint() * eta_inv).frobenius_norm();
    Ok((eta, residual))
}

pub fn pseudo_unitarity_witness(b: &BlochVector) -> Result<f64> {
    pseudo_unitarity_metric(b).map(|(_, r)| r)
}

/// Left eigenvectors ⟨χ±| (as bilinear rows) matching the right
/// eigenvectors used by [`pseudo_unitarity_metric`], so that ⟨χ_μ|ψ_ν⟩ = δ_μν.
pub fn biorthonormal_pair(b: &BlochVector) -> ([[C64; 2]; 2], [[C64; 2]; 2]) {
    let s = b.n_dot_n().sqrt();
    let [n1, n2, n3] = b.n;
    let build = |sign: f64, conj_part: C64| {
        let norm = (s * 2.0 * (s + n3 * sign)).sqrt();
        [(n3 + s * sign) / norm, conj_part / norm]
    };
    let right = [build(1.0, n1 + I * n2), build(-1.0, n1 + I * n2)];
    let left = [build(1.0, n1 - I * n2), build(-1.0, n1 - I * n2)];
    (right, left)
}

/// ∫dk/2π (dn0/dk)² / (1 − n0²): the long-time limit of m₂(t)/t² for a
/// unitary walk. Uses a centred difference at the grid spacing and
/// averages over the points that are not within [`GAPLESS_EXCLUSION`] of
/// a band touching.
pub fn m2_group_velocity_oracle(seq: &FloquetSequence, n_grid: usize) -> Result<f64> {
    require_unitary(seq)?;
    let h = TAU / n_grid as f64;
    let n0 = |k: f64| floquet_matrix(seq, k).map(|u| (u.trace() * 0.5).re);
    let mut sum = 0.0;
    let mut used = 0usize;
    for k in momentum_grid(n_grid) {
        let c = n0(k)?;
        let denom = 1.0 - c * c;
        if denom.abs() < GAPLESS_EXCLUSION {
            continue;
        }
        let d = (n0(k + h)? - n0(k - h)?) / (2.0 * h);
        sum += d * d / denom;
        used += 1;
    }
    let excluded = n_grid - used;
    if excluded > 0 {
        log::debug!("group-velocity integral: excluded {excluded} near-gapless points");
    }
    if used == 0 {
        return Err(Error::GapClosed { k: 0.0, norm: 0.0 });
    }
    Ok(sum / used as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseCell {
    Phase(WindingPair),
    /// Gap closed or winding not resolvable: a phase boundary.
    Boundary,
}

/// Inclusive equally spaced samples.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagram {
    pub family: Family,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    /// Row-major with θ₁ as the slow index.
    pub cells: Vec<PhaseCell>,
}

impl PhaseDiagram {
    pub fn cell(&self, i1: usize, i2: usize) -> PhaseCell {
        self.cells[i1 * self.theta2.len() + i2]
    }
}

/// Classifies one coin point; gap closings and unresolved windings become
/// boundary cells instead of errors.
pub fn phase_cell(coin: CoinParams, loss: LossParams, family: Family, n_grid: usize) -> Result<PhaseCell> {
    match winding_pair_on_grid(coin, loss, family, n_grid) {
        Ok(pair) => Ok(PhaseCell::Phase(pair)),
        Err(Error::GapClosed { .. } | Error::NonIntegerWinding { .. }) => Ok(PhaseCell::Boundary),
        Err(e) => Err(e),
    }
}

/// Winding pairs on an `n1 × n2` grid over [−π, π]², evaluated in parallel.
pub fn phase_diagram(family: Family, loss: LossParams, n1: usize, n2: usize, n_grid: usize) -> Result<PhaseDiagram> {
    let theta1 = linspace(-PI, PI, n1);
    let theta2 = linspace(-PI, PI, n2);
    let cells = (0..n1 * n2)
        .into_par_iter()
        .map(|idx| {
            let coin = CoinParams {
                theta1: theta1[idx / n2],
                theta2: theta2[idx % n2],
            };
            phase_cell(coin, loss, family, n_grid)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDiagram {
        family,
        theta1,
        theta2,
        cells,
    })
}
