//! Finite periodic rings: dense one-period matrices, spectra and edge states.
//!
//! Site `i` of an N-site ring sits at `x = i − (N−1)/2`; basis index
//! `2i` is |x, H⟩ and `2i + 1` is |x, V⟩.

use std::f64::consts::PI;

use faer::Mat;

use crate::engine::{FloquetSequence, LossParams, PrimitiveOp, Region, Variant};
use crate::error::{Error, Result};
use crate::linalg::{spinor_norm_sqr, Mat2, Spinor, C64, ONE, ZERO};
use crate::momentum::{nu0_nupi, quasienergy_of, winding_pair, SymmetrizedInvariants, WindingPair};

/// Eigenvalues closer than this are treated as one degenerate cluster when
/// resolving bulk profiles.
pub const CLUSTER_TOL: f64 = 1e-6;
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    pub n_sites: usize,
    pub regions: Vec<Region>,
    pub loss: LossParams,
    pub variant: Variant,
}

impl LatticeConfig {
    pub fn half_width(&self) -> i64 {
        (self.n_sites as i64 - 1) / 2
    }

    pub fn x_min(&self) -> i64 {
        -self.half_width()
    }

    /// Regions must tile `[−(N−1)/2, (N−1)/2]` without gaps or overlaps.
    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 3 || self.n_sites % 2 == 0 {
            return Err(Error::InvalidLattice(format!(
                "site count must be odd and at least 3, got {}",
                self.n_sites
            )));
        }
        if self.regions.is_empty() {
            return Err(Error::InvalidLattice("no coin regions".into()));
        }
        let mut sorted = self.regions.clone();
        sorted.sort_by_key(|r| r.lo);
        let mut next = self.x_min();
        for r in &sorted {
            if r.lo > r.hi {
                return Err(Error::InvalidLattice(format!("empty region [{}, {}]", r.lo, r.hi)));
            }
            if r.lo < next {
                return Err(Error::InvalidLattice(format!("overlapping region at x = {}", r.lo)));
            }
            if r.lo > next {
                return Err(Error::InvalidLattice(format!("sites {next}..{} have no coin", r.lo)));
            }
            next = r.hi + 1;
        }
        if next != self.half_width() + 1 {
            return Err(Error::InvalidLattice(format!(
                "regions end at {} but the ring ends at {}",
                next - 1,
                self.half_width()
            )));
        }
        Ok(())
    }

    /// Positions of the domain walls, each halfway between the last site of
    /// one region and the first of the next (ring-wrapped).
    pub fn boundaries(&self) -> Vec<f64> {
        let mut sorted = self.regions.clone();
        sorted.sort_by_key(|r| r.lo);
        if sorted.len() < 2 {
            return Vec::new();
        }
        sorted.iter().map(|r| r.hi as f64 + 0.5).collect()
    }

    /// The walk restricted to the ring, with the region coins as a coin field.
    pub fn sequence(&self) -> FloquetSequence {
        let base = self.regions[0].coin;
        crate::engine::build_floquet(self.variant, base, self.loss)
            .with_coin_field(crate::engine::CoinField::from_regions(self.regions.clone()))
    }

    /// Ring distance between two positions.
    pub fn ring_distance(&self, a: f64, b: f64) -> f64 {
        let n = self.n_sites as f64;
        let d = (a - b).rem_euclid(n);
        d.min(n - d)
    }
}

fn apply_ring(op: &PrimitiveOp, psi: &[Spinor], coins: &[crate::engine::CoinParams]) -> Vec<Spinor> {
    let n = psi.len();
    let mut out = vec![[ZERO, ZERO]; n];
    match *op {
        PrimitiveOp::CoinRotation(angle) => {
            for i in 0..n {
                out[i] = Mat2::rotation(angle.resolve(coins[i])).apply(&psi[i]);
            }
        }
        PrimitiveOp::Shift | PrimitiveOp::ShiftUp | PrimitiveOp::ShiftDown => {
            let moves_h = !matches!(op, PrimitiveOp::ShiftUp);
            let moves_v = !matches!(op, PrimitiveOp::ShiftDown);
            for i in 0..n {
                let h_to = if moves_h { (i + n - 1) % n } else { i };
                let v_to = if moves_v { (i + 1) % n } else { i };
                out[h_to][0] = psi[i][0];
                out[v_to][1] = psi[i][1];
            }
        }
        PrimitiveOp::Loss(p) => {
            let m = Mat2::loss(p);
            for i in 0..n {
                out[i] = m.apply(&psi[i]);
            }
        }
    }
    out
}

/// Dense 2N×2N one-period matrix of the ring; shifts wrap around.
pub fn build_lattice_floquet(cfg: &LatticeConfig) -> Result<Mat<C64>> {
    cfg.validate()?;
    let seq = cfg.sequence();
    let n = cfg.n_sites;
    let coins: Vec<_> = (0..n).map(|i| seq.coin_at(cfg.x_min() + i as i64, 1)).collect();
    let mut u = Mat::<C64>::zeros(2 * n, 2 * n);
    for col in 0..2 * n {
        let mut psi = vec![[ZERO, ZERO]; n];
        psi[col / 2][col % 2] = ONE;
        for op in &seq.ops {
            psi = apply_ring(op, &psi, &coins);
        }
        for (i, s) in psi.iter().enumerate() {
            u[(2 * i, col)] = s[0];
            u[(2 * i + 1, col)] = s[1];
        }
    }
    Ok(u)
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub n_sites: usize,
    pub x_min: i64,
    pub eigenvalues: Vec<C64>,
    /// Unit-norm right eigenvectors, one per eigenvalue.
    pub eigenvectors: Vec<Vec<C64>>,
    pub quasienergies: Vec<C64>,
    pub max_residual: f64,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Normalized site distribution P_x of eigenvector `j`.
    pub fn profile(&self, j: usize) -> Vec<f64> {
        site_profile(&self.eigenvectors[j])
    }
}

fn site_profile(v: &[C64]) -> Vec<f64> {
    let mut p: Vec<f64> = v.chunks(2).map(|c| c[0].norm_sqr() + c[1].norm_sqr()).collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
    p
}

pub fn ipr(profile: &[f64]) -> f64 {
    profile.iter().map(|p| p * p).sum()
}

/// Full eigendecomposition with a per-pair residual check
/// ‖Uv − λv‖ < 1e−8 (v unit norm).
pub fn spectrum(matrix: &Mat<C64>) -> Result<SpectrumResult> {
    let dim = matrix.nrows();
    if dim != matrix.ncols() || dim % 2 != 0 {
        return Err(Error::InvalidLattice(format!(
            "expected a square matrix of even size, got {}x{}",
            dim,
            matrix.ncols()
        )));
    }
    if (0..dim).any(|j| (0..dim).any(|i| !matrix[(i, j)].is_finite())) {
        return Err(Error::EigensolverFailure("matrix has non-finite entries".into()));
    }
    let evd = matrix
        .eigen()
        .map_err(|e| Error::EigensolverFailure(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let vecs = evd.U();

    let eigenvalues: Vec<C64> = (0..dim).map(|j| s[j]).collect();
    let mut eigenvectors = Vec::with_capacity(dim);
    for j in 0..dim {
        let col: Vec<C64> = (0..dim).map(|i| vecs[(i, j)]).collect();
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::EigensolverFailure(format!("eigenvector {j} has norm {norm}")));
        }
        eigenvectors.push(col.into_iter().map(|z| z / norm).collect::<Vec<_>>());
    }

    let v = Mat::<C64>::from_fn(dim, dim, |i, j| eigenvectors[j][i]);
    let uv = matrix * &v;
    let mut max_residual: f64 = 0.0;
    for (j, lambda) in eigenvalues.iter().enumerate() {
        let r2: f64 = (0..dim).map(|i| (uv[(i, j)] - lambda * v[(i, j)]).norm_sqr()).sum();
        max_residual = max_residual.max(r2.sqrt());
    }
    if !(max_residual < RESIDUAL_TOL) {
        return Err(Error::EigensolverFailure(format!(
            "eigenpair residual {max_residual:e} exceeds {RESIDUAL_TOL:e}"
        )));
    }

    let n_sites = dim / 2;
    Ok(SpectrumResult {
        n_sites,
        x_min: -((n_sites as i64 - 1) / 2),
        quasienergies: eigenvalues.iter().map(|&l| quasienergy_of(l)).collect(),
        eigenvalues,
        eigenvectors,
        max_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EpsClass {
    Zero,
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeThresholds {
    /// Maximum distance of arg λ from 0 or ±π.
    pub eps_arg: f64,
    pub ipr_min: f64,
}

impl Default for EdgeThresholds {
    fn default() -> Self {
        EdgeThresholds {
            eps_arg: 1e-3,
            ipr_min: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeState {
    pub index: usize,
    pub lambda: C64,
    pub eps_class: EpsClass,
    pub profile: Vec<f64>,
    pub center: i64,
    pub ipr: f64,
}

/// Quasienergy class of λ when it lies on the real axis.
pub fn eps_class(lambda: C64, eps_arg: f64) -> Option<EpsClass> {
    let arg = lambda.arg();
    if arg.abs() < eps_arg {
        Some(EpsClass::Zero)
    } else if PI - arg.abs() < eps_arg {
        Some(EpsClass::Pi)
    } else {
        None
    }
}

/// Eigenpairs with λ on the real axis and a localized profile.
pub fn classify_edge_states(spec: &SpectrumResult, thresholds: EdgeThresholds) -> Vec<EdgeState> {
    let mut out = Vec::new();
    for (j, &lambda) in spec.eigenvalues.iter().enumerate() {
        let Some(class) = eps_class(lambda, thresholds.eps_arg) else {
            continue;
        };
        let profile = spec.profile(j);
        let ipr = ipr(&profile);
        if ipr <= thresholds.ipr_min {
            continue;
        }
        let imax = profile
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > profile[best] { i } else { best });
        out.push(EdgeState {
            index: j,
            lambda,
            eps_class: class,
            center: spec.x_min + imax as i64,
            ipr,
            profile,
        });
    }
    out
}

/// Groups eigenvalues closer than `tol` (transitively).
pub fn eigenvalue_clusters(eigenvalues: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = eigenvalues.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in 0..n {
        for b in a + 1..n {
            if (eigenvalues[a] - eigenvalues[b]).norm() < tol {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[rb] = ra;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

fn orthonormal_basis(vectors: &[&[C64]]) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        let mut w = v.to_vec();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let dot: C64 = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= dot * qi);
            }
        }
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(w.into_iter().map(|z| z / norm).collect());
        }
    }
    basis
}

/// IPR of every eigenpair, with degenerate clusters replaced by the
/// basis-independent average density of their (orthonormalized) span.
///
/// Inside an exactly degenerate eigenspace the solver returns an arbitrary
/// basis whose individual profiles mean nothing; the averaged density is
/// the quantity that does not depend on that choice.
pub fn cluster_resolved_iprs(spec: &SpectrumResult, tol: f64) -> Vec<f64> {
    let mut out = vec![0.0; spec.len()];
    for cluster in eigenvalue_clusters(&spec.eigenvalues, tol) {
        if cluster.len() == 1 {
            out[cluster[0]] = ipr(&spec.profile(cluster[0]));
            continue;
        }
        let vecs: Vec<&[C64]> = cluster.iter().map(|&j| spec.eigenvectors[j].as_slice()).collect();
        let basis = orthonormal_basis(&vecs);
        let mut dens = vec![0.0; spec.n_sites];
        for q in &basis {
            for (i, c) in q.chunks(2).enumerate() {
                dens[i] += spinor_norm_sqr(&[c[0], c[1]]);
            }
        }
        let total: f64 = dens.iter().sum();
        dens.iter_mut().for_each(|d| *d /= total);
        let value = ipr(&dens);
        for &j in &cluster {
            out[j] = value;
        }
    }
    out
}

/// Largest P_x of `state` farther than `distance` sites (around the ring)
/// from its center.
pub fn profile_tail(state: &EdgeState, cfg: &LatticeConfig, distance: f64) -> f64 {
    state
        .profile
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let x = cfg.x_min() + *i as i64;
            cfg.ring_distance(x as f64, state.center as f64) > distance
        })
        .map(|(_, &p)| p)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCount {
    pub position: f64,
    pub zero: usize,
    pub pi: usize,
}

#[derive(Debug, Clone)]
pub struct BulkBoundaryReport {
    pub left: WindingPair,
    pub right: WindingPair,
    pub left_sym: SymmetrizedInvariants,
    pub right_sym: SymmetrizedInvariants,
    /// |Δν₀| and |Δν_π|, doubled to stay integral.
    pub twice_delta_nu0: i32,
    pub twice_delta_nu_pi: i32,
    pub boundaries: Vec<BoundaryCount>,
    pub edge_states: Vec<EdgeState>,
    /// Largest cluster-resolved IPR among non-edge eigenpairs.
    pub max_bulk_ipr: f64,
    pub pass_zero: bool,
    pub pass_pi: bool,
}

impl BulkBoundaryReport {
    pub fn passed(&self) -> bool {
        self.pass_zero && self.pass_pi
    }
}

pub fn bulk_boundary_check(cfg: &LatticeConfig) -> Result<BulkBoundaryReport> {
    bulk_boundary_check_with(cfg, EdgeThresholds::default())
}

/// Compares edge-state counts per domain wall and quasienergy class with
/// the jumps of (ν₀, ν_π) across it.
pub fn bulk_boundary_check_with(cfg: &LatticeConfig, thresholds: EdgeThresholds) -> Result<BulkBoundaryReport> {
    cfg.validate()?;
    if cfg.regions.len() != 2 {
        return Err(Error::InvalidLattice(format!(
            "bulk-boundary check needs two regions, got {}",
            cfg.regions.len()
        )));
    }
    let mut regions = cfg.regions.clone();
    regions.sort_by_key(|r| r.lo);
    let family = cfg.variant.family();
    let left = winding_pair(regions[0].coin, cfg.loss, family)?;
    let right = winding_pair(regions[1].coin, cfg.loss, family)?;
    let (ls, rs) = (nu0_nupi(left), nu0_nupi(right));
    let twice_delta_nu0 = (ls.twice_nu0 - rs.twice_nu0).abs();
    let twice_delta_nu_pi = (ls.twice_nu_pi - rs.twice_nu_pi).abs();

    let spec = spectrum(&build_lattice_floquet(cfg)?)?;
    let edge_states = classify_edge_states(&spec, thresholds);

    let mut boundaries: Vec<BoundaryCount> = cfg
        .boundaries()
        .into_iter()
        .map(|position| BoundaryCount { position, zero: 0, pi: 0 })
        .collect();
    for e in &edge_states {
        let nearest = (0..boundaries.len())
            .min_by(|&a, &b| {
                let da = cfg.ring_distance(e.center as f64, boundaries[a].position);
                let db = cfg.ring_distance(e.center as f64, boundaries[b].position);
                da.total_cmp(&db)
            })
            .expect("two-region ring has two boundaries");
        match e.eps_class {
            EpsClass::Zero => boundaries[nearest].zero += 1,
            EpsClass::Pi => boundaries[nearest].pi += 1,
        }
    }

    let edge_idx: std::collections::HashSet<usize> = edge_states.iter().map(|e| e.index).collect();
    let max_bulk_ipr = cluster_resolved_iprs(&spec, CLUSTER_TOL)
        .into_iter()
        .enumerate()
        .filter(|(j, _)| !edge_idx.contains(j))
        .map(|(_, v)| v)
        .fold(0.0, f64::max);

    let expect = |twice: i32| (twice % 2 == 0).then_some((twice / 2) as usize);
    let pass_zero = expect(twice_delta_nu0).is_some_and(|n| boundaries.iter().all(|b| b.zero == n));
    let pass_pi = expect(twice_delta_nu_pi).is_some_and(|n| boundaries.iter().all(|b| b.pi == n));

    Ok(BulkBoundaryReport {
        left,
        right,
        left_sym: ls,
        right_sym: rs,
        twice_delta_nu0,
        twice_delta_nu_pi,
        boundaries,
        edge_states,
        max_bulk_ipr,
        pass_zero,
        pass_pi,
    })
}
