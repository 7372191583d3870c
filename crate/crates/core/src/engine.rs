//! Walker states, primitive walk operators and the six Floquet operator words.
//!
//! Operator words are stored in *application order*: `ops[0]` acts first on
//! the state and the loss operator acts last. This is the reverse of writing
//! the period as a left-to-right operator product.
//!
//! Coin convention: `R(θ) = exp(-iθσ_y) = [[cos θ, -sin θ], [sin θ, cos θ]]`
//! in the {H, V} basis. `Shift` moves H to x-1 and V to x+1.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{spinor_norm_sqr, Mat2, Spinor, C64, ZERO};

/// Coin angles (θ₁, θ₂) in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinParams {
    pub theta1: f64,
    pub theta2: f64,
}

impl CoinParams {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        if !theta1.is_finite() || !theta2.is_finite() {
            return Err(Error::InvalidCoin(theta1, theta2));
        }
        Ok(CoinParams { theta1, theta2 })
    }

    /// Both angles reduced to [0, 2π).
    pub fn canonical(&self) -> (f64, f64) {
        (self.theta1.rem_euclid(TAU), self.theta2.rem_euclid(TAU))
    }

    /// Equality modulo 2π in each angle.
    pub fn same_modulo_2pi(&self, other: &CoinParams, tol: f64) -> bool {
        let close = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(TAU);
            d.min(TAU - d) <= tol
        };
        close(self.theta1, other.theta1) && close(self.theta2, other.theta2)
    }

    pub fn offset(&self, d1: f64, d2: f64) -> Self {
        CoinParams {
            theta1: self.theta1 + d1,
            theta2: self.theta2 + d2,
        }
    }

    pub fn swapped(&self) -> Self {
        CoinParams {
            theta1: self.theta2,
            theta2: self.theta1,
        }
    }
}

/// Loss strength p of the partial |−⟩ measurement.
///
/// p = 0 is accepted as the unitary limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    p: f64,
}

impl LossParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidLoss(p));
        }
        Ok(LossParams { p })
    }

    pub fn unitary() -> Self {
        LossParams { p: 0.0 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Surviving amplitude factor sqrt(1-p) of the |−⟩ component.
    pub fn survival_amplitude(&self) -> f64 {
        (1.0 - self.p).sqrt()
    }

    /// γ = (1-p)^(-1/4); undefined at p = 1.
    pub fn gamma(&self) -> Option<f64> {
        (self.p < 1.0).then(|| (1.0 - self.p).powf(-0.25))
    }
}

/// Named coin states in the {H, V} basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinState(pub Spinor);

impl CoinState {
    pub const H: CoinState = CoinState([C64::new(1.0, 0.0), ZERO]);
    pub const V: CoinState = CoinState([ZERO, C64::new(1.0, 0.0)]);
    pub const PLUS: CoinState = CoinState([
        C64::new(FRAC_1_SQRT_2, 0.0),
        C64::new(FRAC_1_SQRT_2, 0.0),
    ]);
    pub const MINUS: CoinState = CoinState([
        C64::new(FRAC_1_SQRT_2, 0.0),
        C64::new(-FRAC_1_SQRT_2, 0.0),
    ]);
}

/// A coin angle written as `c1·θ₁ + c2·θ₂ + offset`, resolved per site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle {
    pub c1: f64,
    pub c2: f64,
    pub offset: f64,
}

impl Angle {
    pub const ZERO: Angle = Angle::new(0.0, 0.0, 0.0);

    pub const fn new(c1: f64, c2: f64, offset: f64) -> Self {
        Angle { c1, c2, offset }
    }

    pub const fn fixed(theta: f64) -> Self {
        Angle::new(0.0, 0.0, theta)
    }

    pub fn resolve(&self, coin: CoinParams) -> f64 {
        self.c1 * coin.theta1 + self.c2 * coin.theta2 + self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrimitiveOp {
    CoinRotation(Angle),
    /// H to x-1 and V to x+1.
    Shift,
    /// Only V moves, to x+1.
    ShiftUp,
    /// Only H moves, to x-1.
    ShiftDown,
    Loss(f64),
}

impl PrimitiveOp {
    pub fn is_shift(&self) -> bool {
        matches!(
            self,
            PrimitiveOp::Shift | PrimitiveOp::ShiftUp | PrimitiveOp::ShiftDown
        )
    }

    /// Sites added to the (left, right) edge of the window.
    pub fn growth(&self) -> (usize, usize) {
        match self {
            PrimitiveOp::Shift => (1, 1),
            PrimitiveOp::ShiftUp => (0, 1),
            PrimitiveOp::ShiftDown => (1, 0),
            _ => (0, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Three,
    Four,
    WFour,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Three, Family::Four, Family::WFour];

    pub fn variant(&self, frame: Frame) -> Variant {
        match (self, frame) {
            (Family::Three, Frame::Prime) => Variant::U3p,
            (Family::Three, Frame::DoublePrime) => Variant::U3pp,
            (Family::Four, Frame::Prime) => Variant::U4p,
            (Family::Four, Frame::DoublePrime) => Variant::U4pp,
            (Family::WFour, Frame::Prime) => Variant::W4p,
            (Family::WFour, Frame::DoublePrime) => Variant::W4pp,
        }
    }

    pub fn shifts_per_period(&self) -> usize {
        match self {
            Family::Three => 3,
            Family::Four | Family::WFour => 4,
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "three" | "3" => Ok(Family::Three),
            "four" | "4" => Ok(Family::Four),
            "wfour" | "w4" => Ok(Family::WFour),
            _ => Err(Error::UnknownVariant(s.to_string())),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Three => "three",
            Family::Four => "four",
            Family::WFour => "wfour",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    Prime,
    DoublePrime,
}

impl FromStr for Frame {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prime" | "p" => Ok(Frame::Prime),
            "dprime" | "pp" | "double-prime" => Ok(Frame::DoublePrime),
            _ => Err(Error::UnknownVariant(s.to_string())),
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Prime => "prime",
            Frame::DoublePrime => "dprime",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    U3p,
    U3pp,
    U4p,
    U4pp,
    W4p,
    W4pp,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::U3p,
        Variant::U3pp,
        Variant::U4p,
        Variant::U4pp,
        Variant::W4p,
        Variant::W4pp,
    ];

    pub fn family(&self) -> Family {
        match self {
            Variant::U3p | Variant::U3pp => Family::Three,
            Variant::U4p | Variant::U4pp => Family::Four,
            Variant::W4p | Variant::W4pp => Family::WFour,
        }
    }

    pub fn frame(&self) -> Frame {
        match self {
            Variant::U3p | Variant::U4p | Variant::W4p => Frame::Prime,
            _ => Frame::DoublePrime,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::U3p => "U3p",
            Variant::U3pp => "U3pp",
            Variant::U4p => "U4p",
            Variant::U4pp => "U4pp",
            Variant::W4p => "W4p",
            Variant::W4pp => "W4pp",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Coin region covering the inclusive site interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub lo: i64,
    pub hi: i64,
    pub coin: CoinParams,
}

impl Region {
    pub fn contains(&self, x: i64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Position-dependent coin angles.
///
/// A site takes the coin of the first region containing it (or the base coin
/// of the sequence), plus an optional per-site offset (static disorder).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoinField {
    pub regions: Vec<Region>,
    pub offsets: BTreeMap<i64, (f64, f64)>,
}

impl CoinField {
    pub fn from_regions(regions: Vec<Region>) -> Self {
        CoinField {
            regions,
            offsets: BTreeMap::new(),
        }
    }

    pub fn coin_at(&self, x: i64, base: CoinParams) -> CoinParams {
        let coin = self
            .regions
            .iter()
            .find(|r| r.contains(x))
            .map_or(base, |r| r.coin);
        match self.offsets.get(&x) {
            Some(&(d1, d2)) => coin.offset(d1, d2),
            None => coin,
        }
    }
}

/// Per-step angle offsets (δ₁, δ₂); entry `t-1` applies at step t.
/// Steps past the end get no offset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoinSeries(pub Vec<(f64, f64)>);

impl CoinSeries {
    pub fn at(&self, t: usize) -> (f64, f64) {
        t.checked_sub(1)
            .and_then(|i| self.0.get(i).copied())
            .unwrap_or((0.0, 0.0))
    }
}

/// One driving period of a walk.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetSequence {
    pub variant: Variant,
    pub coin: CoinParams,
    pub loss: LossParams,
    pub ops: Vec<PrimitiveOp>,
    pub coin_field: Option<CoinField>,
    pub coin_series: Option<CoinSeries>,
}

impl FloquetSequence {
    pub fn is_homogeneous(&self) -> bool {
        self.coin_field.is_none()
    }

    /// Lattice steps per period; `ShiftUp` and `ShiftDown` count as half a
    /// shift each, so U3pp has three like U3p.
    pub fn shifts_per_period(&self) -> usize {
        let (l, r) = self.growth_per_period();
        l.max(r)
    }

    /// Sites added per period on the (left, right) edge.
    pub fn growth_per_period(&self) -> (usize, usize) {
        self.ops.iter().fold((0, 0), |(l, r), op| {
            let (dl, dr) = op.growth();
            (l + dl, r + dr)
        })
    }

    pub fn coin_at(&self, x: i64, t: usize) -> CoinParams {
        let coin = match &self.coin_field {
            Some(field) => field.coin_at(x, self.coin),
            None => self.coin,
        };
        match &self.coin_series {
            Some(series) => {
                let (d1, d2) = series.at(t);
                coin.offset(d1, d2)
            }
            None => coin,
        }
    }

    pub fn with_coin_field(mut self, field: CoinField) -> Self {
        self.coin_field = Some(field);
        self
    }

    pub fn with_coin_series(mut self, series: CoinSeries) -> Self {
        self.coin_series = Some(series);
        self
    }

    /// Checks that the word has at most one loss operator.
    pub fn validate(&self) -> Result<()> {
        let n = self
            .ops
            .iter()
            .filter(|op| matches!(op, PrimitiveOp::Loss(_)))
            .count();
        if n > 1 {
            return Err(Error::MultipleLoss(n));
        }
        Ok(())
    }
}

/// Builds the operator word of `variant` in application order.
pub fn build_floquet(variant: Variant, coin: CoinParams, loss: LossParams) -> FloquetSequence {
    use PrimitiveOp::*;

    let half1 = CoinRotation(Angle::new(0.5, 0.0, 0.0));
    let half2 = CoinRotation(Angle::new(0.0, 0.5, 0.0));
    let full1 = CoinRotation(Angle::new(1.0, 0.0, 0.0));
    let full2 = CoinRotation(Angle::new(0.0, 1.0, 0.0));
    let none = CoinRotation(Angle::ZERO);
    let m = Loss(loss.p());

    let ops = match variant {
        Variant::U3p => vec![half1, Shift, full2, Shift, full2, Shift, half1, m],
        Variant::U3pp => vec![ShiftDown, full2, Shift, full1, Shift, full2, ShiftUp, m],
        Variant::U4p => vec![half1, Shift, none, Shift, full2, Shift, none, Shift, half1, m],
        // θ₁ and θ₂ exchange roles relative to U4p.
        Variant::U4pp => vec![half2, Shift, none, Shift, full1, Shift, none, Shift, half2, m],
        Variant::W4p => vec![half1, Shift, full2, Shift, Shift, full2, Shift, half1, m],
        Variant::W4pp => vec![Shift, full2, Shift, half1, half1, Shift, full2, Shift, m],
    };

    FloquetSequence {
        variant,
        coin,
        loss,
        ops,
        coin_field: None,
        coin_series: None,
    }
}

/// Per-site probability (or loss) density over a contiguous window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SiteDensity {
    pub offset: i64,
    pub values: Vec<f64>,
}

impl SiteDensity {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn get(&self, x: i64) -> f64 {
        usize::try_from(x - self.offset)
            .ok()
            .and_then(|i| self.values.get(i).copied())
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.offset + i as i64, v))
    }

    /// Σ_x x^n · P(x).
    pub fn moment(&self, n: i32) -> f64 {
        self.iter().map(|(x, v)| (x as f64).powi(n) * v).sum()
    }
}

/// Walker amplitudes on the contiguous window `[offset, offset + len)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkerState {
    pub offset: i64,
    pub amps: Vec<Spinor>,
}

impl WalkerState {
    pub fn new(offset: i64, amps: Vec<Spinor>) -> Self {
        WalkerState { offset, amps }
    }

    /// Walker at site `x` with coin state `coin`.
    pub fn localized(x: i64, coin: CoinState) -> Self {
        WalkerState {
            offset: x,
            amps: vec![coin.0],
        }
    }

    /// The default initial state |x=0⟩⊗|+⟩.
    pub fn origin_plus() -> Self {
        Self::localized(0, CoinState::PLUS)
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn x_min(&self) -> i64 {
        self.offset
    }

    pub fn x_max(&self) -> i64 {
        self.offset + self.amps.len() as i64 - 1
    }

    pub fn get(&self, x: i64) -> Spinor {
        usize::try_from(x - self.offset)
            .ok()
            .and_then(|i| self.amps.get(i).copied())
            .unwrap_or([ZERO, ZERO])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(spinor_norm_sqr).sum()
    }

    pub fn density(&self) -> SiteDensity {
        SiteDensity {
            offset: self.offset,
            values: self.amps.iter().map(spinor_norm_sqr).collect(),
        }
    }

    /// Pads the window with zero amplitudes.
    pub fn padded(&self, left: usize, right: usize) -> Self {
        let mut amps = vec![[ZERO, ZERO]; left];
        amps.extend_from_slice(&self.amps);
        amps.extend(std::iter::repeat([ZERO, ZERO]).take(right));
        WalkerState {
            offset: self.offset - left as i64,
            amps,
        }
    }
}

/// Applies one primitive operator. Coin rotations look up their angles
/// through `coin_at(x)`. Returns the new state and the loss density, which
/// is empty for every operator except `Loss`.
pub fn apply_primitive<F>(state: &WalkerState, op: &PrimitiveOp, coin_at: F) -> (WalkerState, SiteDensity)
where
    F: Fn(i64) -> CoinParams,
{
    let zero = [ZERO, ZERO];
    match *op {
        PrimitiveOp::CoinRotation(angle) => {
            let amps = state
                .amps
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let theta = angle.resolve(coin_at(state.offset + i as i64));
                    Mat2::rotation(theta).apply(s)
                })
                .collect();
            (WalkerState::new(state.offset, amps), SiteDensity::default())
        }
        PrimitiveOp::Shift => {
            let n = state.len();
            let mut amps = vec![zero; n + 2];
            for (i, s) in state.amps.iter().enumerate() {
                amps[i][0] = s[0];
                amps[i + 2][1] = s[1];
            }
            (WalkerState::new(state.offset - 1, amps), SiteDensity::default())
        }
        PrimitiveOp::ShiftUp | PrimitiveOp::ShiftDown => {
            let n = state.len();
            let mut amps = vec![zero; n + 1];
            for (i, s) in state.amps.iter().enumerate() {
                amps[i][0] = s[0];
                amps[i + 1][1] = s[1];
            }
            // Both shifts produce the same array; they differ in which end
            // of the window gained a site.
            let offset = match op {
                PrimitiveOp::ShiftDown => state.offset - 1,
                _ => state.offset,
            };
            (WalkerState::new(offset, amps), SiteDensity::default())
        }
        PrimitiveOp::Loss(p) => {
            // With d = (h - v)/2 the |−⟩ amplitude is sqrt(2)·d; removing the
            // fraction (1 - sqrt(1-p)) of it subtracts that multiple of d
            // from h and adds it to v. This keeps |+⟩ inputs bit-exact.
            let removed = 1.0 - (1.0 - p).max(0.0).sqrt();
            let mut losses = Vec::with_capacity(state.len());
            let amps = state
                .amps
                .iter()
                .map(|&[h, v]| {
                    let d = (h - v) * 0.5;
                    losses.push(2.0 * p * d.norm_sqr());
                    [h - d * removed, v + d * removed]
                })
                .collect();
            (
                WalkerState::new(state.offset, amps),
                SiteDensity {
                    offset: state.offset,
                    values: losses,
                },
            )
        }
    }
}

/// Applies one full period at step index `t` (1-based), resolving
/// position- and time-dependent coins. Returns the state and the per-site
/// loss probability recorded during this period.
pub fn step(state: &WalkerState, seq: &FloquetSequence, t: usize) -> (WalkerState, SiteDensity) {
    let mut cur = state.clone();
    let mut loss = SiteDensity::default();
    for op in &seq.ops {
        let (next, dens) = apply_primitive(&cur, op, |x| seq.coin_at(x, t));
        cur = next;
        if !dens.values.is_empty() {
            loss = if loss.values.is_empty() {
                dens
            } else {
                add_densities(&loss, &dens)
            };
        }
    }
    (cur, loss)
}

fn add_densities(a: &SiteDensity, b: &SiteDensity) -> SiteDensity {
    let lo = a.offset.min(b.offset);
    let hi = (a.offset + a.values.len() as i64).max(b.offset + b.values.len() as i64);
    SiteDensity {
        offset: lo,
        values: (lo..hi).map(|x| a.get(x) + b.get(x)).collect(),
    }
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, I};
    use proptest::prelude::*;

    fn coin(a: f64, b: f64) -> CoinParams {
        CoinParams::new(a, b).unwrap()
    }

    fn loss(p: f64) -> LossParams {
        LossParams::new(p).unwrap()
    }

    fn random_state(offset: i64, raw: &[(f64, f64, f64, f64)]) -> WalkerState {
        let amps: Vec<Spinor> = raw
            .iter()
            .map(|&(a, b, c, d)| [C64::new(a, b), C64::new(c, d)])
            .collect();
        let st = WalkerState::new(offset, amps);
        let n = st.norm_sqr().sqrt().max(1e-300);
        WalkerState::new(
            offset,
            st.amps.iter().map(|s| [s[0] / n, s[1] / n]).collect(),
        )
    }

    #[test]
    fn coin_states_are_orthonormal() {
        let p = CoinState::PLUS.0;
        let m = CoinState::MINUS.0;
        assert!((spinor_norm_sqr(&p) - 1.0).abs() < 1e-15);
        assert!((spinor_norm_sqr(&m) - 1.0).abs() < 1e-15);
        let overlap = p[0].conj() * m[0] + p[1].conj() * m[1];
        assert!(overlap.norm() < 1e-15);
    }

    #[test]
    fn loss_params_validate_range() {
        assert!(LossParams::new(-0.1).is_err());
        assert!(LossParams::new(1.1).is_err());
        assert!(LossParams::new(f64::NAN).is_err());
        assert_eq!(loss(1.0).gamma(), None);
        assert!((loss(9.0 / 25.0).gamma().unwrap() - 0.8f64.powf(-0.5)).abs() < 1e-15);
        assert!(CoinParams::new(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn coin_comparison_is_modulo_two_pi() {
        let a = coin(0.3, -PI);
        let b = coin(0.3 + TAU, PI);
        assert!(a.same_modulo_2pi(&b, 1e-12));
        assert!(!a.same_modulo_2pi(&coin(0.31, PI), 1e-12));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(v.family().variant(v.frame()), v);
        }
        assert!(matches!("U5p".parse::<Variant>(), Err(Error::UnknownVariant(_))));
    }

    #[test]
    fn words_have_one_trailing_loss_and_right_shift_count() {
        for v in Variant::ALL {
            let seq = build_floquet(v, coin(0.4, -1.1), loss(0.5));
            assert_eq!(seq.ops.last(), Some(&PrimitiveOp::Loss(0.5)));
            seq.validate().unwrap();
            assert_eq!(seq.shifts_per_period(), v.family().shifts_per_period());
            let shift_ops = seq.ops.iter().filter(|op| op.is_shift()).count();
            assert_eq!(shift_ops, if v == Variant::U3pp { 4 } else { seq.shifts_per_period() });
            let (l, r) = seq.growth_per_period();
            assert_eq!((l, r), (seq.shifts_per_period(), seq.shifts_per_period()));
        }
    }

    #[test]
    fn u4pp_equals_u4p_with_swapped_angles() {
        let a = coin(0.7, -0.2);
        let pp = build_floquet(Variant::U4pp, a, loss(0.3));
        let p = build_floquet(Variant::U4p, a.swapped(), loss(0.3));
        let resolve = |s: &FloquetSequence| -> Vec<String> {
            s.ops
                .iter()
                .map(|op| match op {
                    PrimitiveOp::CoinRotation(ang) => format!("R({:.15})", ang.resolve(s.coin)),
                    other => format!("{other:?}"),
                })
                .collect()
        };
        assert_eq!(resolve(&pp), resolve(&p));
    }

    #[test]
    fn identity_coins_reduce_u3p_to_three_shifts() {
        let seq = build_floquet(Variant::U3p, coin(0.0, 0.0), LossParams::unitary());
        let st = WalkerState::localized(0, CoinState([ONE, I]));
        let (out, l) = step(&st, &seq, 1);
        assert!(l.total() == 0.0);
        let (l3, r3) = (out.get(-3), out.get(3));
        assert!((l3[0] - ONE).norm() < 1e-15 && l3[1].norm() < 1e-15);
        assert!(r3[0].norm() < 1e-15 && (r3[1] - I).norm() < 1e-15);
        assert!((out.norm_sqr() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn full_loss_keeps_plus_and_removes_minus() {
        let (out, l) = apply_primitive(&WalkerState::origin_plus(), &PrimitiveOp::Loss(1.0), |_| coin(0.0, 0.0));
        assert_eq!(out, WalkerState::origin_plus());
        assert_eq!(l.total(), 0.0);

        let minus = WalkerState::localized(0, CoinState::MINUS);
        let (out, l) = apply_primitive(&minus, &PrimitiveOp::Loss(1.0), |_| coin(0.0, 0.0));
        assert!(out.norm_sqr() < 1e-30);
        assert!((l.get(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quarter_turn_rotation_takes_h_to_v() {
        let h = WalkerState::localized(0, CoinState::H);
        let op = PrimitiveOp::CoinRotation(Angle::fixed(PI / 2.0));
        let (out, _) = apply_primitive(&h, &op, |_| coin(0.0, 0.0));
        let s = out.get(0);
        assert!(s[0].norm() < 1e-15);
        assert!((s[1] - ONE).norm() < 1e-15);
    }

    #[test]
    fn shifts_move_the_right_components() {
        let st = WalkerState::localized(0, CoinState([ONE, I]));
        let noop = |_| coin(0.0, 0.0);
        let (s, _) = apply_primitive(&st, &PrimitiveOp::Shift, noop);
        assert_eq!((s.x_min(), s.x_max()), (-1, 1));
        assert_eq!(s.get(-1), [ONE, ZERO]);
        assert_eq!(s.get(1), [ZERO, I]);
        let (u, _) = apply_primitive(&st, &PrimitiveOp::ShiftUp, noop);
        assert_eq!((u.x_min(), u.x_max()), (0, 1));
        assert_eq!(u.get(0), [ONE, ZERO]);
        assert_eq!(u.get(1), [ZERO, I]);
        let (d, _) = apply_primitive(&st, &PrimitiveOp::ShiftDown, noop);
        assert_eq!((d.x_min(), d.x_max()), (-1, 0));
        assert_eq!(d.get(-1), [ONE, ZERO]);
        assert_eq!(d.get(0), [ZERO, I]);
    }

    #[test]
    fn coin_field_regions_and_offsets() {
        let mut field = CoinField::from_regions(vec![
            Region { lo: -5, hi: -1, coin: coin(1.0, 2.0) },
            Region { lo: 0, hi: 5, coin: coin(3.0, 4.0) },
        ]);
        field.offsets.insert(0, (0.1, 0.2));
        let base = coin(9.0, 9.0);
        assert_eq!(field.coin_at(-1, base), coin(1.0, 2.0));
        assert_eq!(field.coin_at(0, base), coin(3.1, 4.2));
        assert_eq!(field.coin_at(6, base), base);

        let seq = build_floquet(Variant::U3p, base, loss(0.5))
            .with_coin_field(field)
            .with_coin_series(CoinSeries(vec![(0.5, -0.5)]));
        assert_eq!(seq.coin_at(6, 1), coin(9.5, 8.5));
        assert_eq!(seq.coin_at(6, 2), base);
    }

    #[test]
    fn multiple_loss_is_rejected() {
        let mut seq = build_floquet(Variant::U3p, coin(0.1, 0.2), loss(0.5));
        seq.ops.push(PrimitiveOp::Loss(0.5));
        assert_eq!(seq.validate(), Err(Error::MultipleLoss(2)));
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    fn spinor_strategy() -> impl Strategy<Value = (f64, f64, f64, f64)> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
    }

    proptest! {
        #[test]
        fn step_conserves_probability_with_losses(
            raw in prop::collection::vec(spinor_strategy(), 1..12),
            vi in 0usize..6,
            t1 in -PI..PI,
            t2 in -PI..PI,
            p in 0.0..=1.0f64,
        ) {
            let st = random_state(-3, &raw);
            let seq = build_floquet(Variant::ALL[vi], coin(t1, t2), loss(p));
            let (out, l) = step(&st, &seq, 1);
            let bal = l.total() + out.norm_sqr() - st.norm_sqr();
            prop_assert!(bal.abs() < 1e-12, "imbalance {bal}");
            prop_assert!(l.values.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn unitary_limit_preserves_norm(
            raw in prop::collection::vec(spinor_strategy(), 1..12),
            vi in 0usize..6,
            t1 in -PI..PI,
            t2 in -PI..PI,
        ) {
            let st = random_state(2, &raw);
            let seq = build_floquet(Variant::ALL[vi], coin(t1, t2), LossParams::unitary());
            let (out, l) = step(&st, &seq, 1);
            prop_assert!(l.values.iter().all(|&v| v == 0.0));
            prop_assert!((out.norm_sqr() - st.norm_sqr()).abs() < 1e-12);
        }

        #[test]
        fn shift_down_after_shift_up_is_shift(raw in prop::collection::vec(spinor_strategy(), 1..16)) {
            let st = random_state(-4, &raw);
            let noop = |_| coin(0.0, 0.0);
            let (u, _) = apply_primitive(&st, &PrimitiveOp::ShiftUp, noop);
            let (du, _) = apply_primitive(&u, &PrimitiveOp::ShiftDown, noop);
            let (s, _) = apply_primitive(&st, &PrimitiveOp::Shift, noop);
            prop_assert_eq!((du.x_min(), du.x_max()), (s.x_min(), s.x_max()));
            for x in s.x_min()..=s.x_max() {
                let (a, b) = (du.get(x), s.get(x));
                prop_assert!((a[0] - b[0]).norm() < 1e-14 && (a[1] - b[1]).norm() < 1e-14);
            }
        }

        #[test]
        fn support_grows_by_shift_count(vi in 0usize..6, t1 in -PI..PI, t2 in -PI..PI, steps in 1usize..8) {
            let v = Variant::ALL[vi];
            let seq = build_floquet(v, coin(t1, t2), loss(0.5));
            let n = v.family().shifts_per_period() as i64;
            let mut st = WalkerState::origin_plus();
            for t in 1..=steps {
                st = step(&st, &seq, t).0;
            }
            prop_assert_eq!(st.x_min(), -n * steps as i64);
            prop_assert_eq!(st.x_max(), n * steps as i64);
        }
    }
}
