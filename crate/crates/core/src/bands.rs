//! Free two-polariton branches: closed-form energies and spinors, the
//! symmetrized incident states, and the band/gap layout at fixed total
//! momentum.
//!
//! A branch label `uv` denotes a polariton of kind `u` carrying momentum
//! `K/2 + q` and one of kind `v` carrying `K/2 - q`, so that
//! `E(uv, q) = eps_u(K/2 + q) + eps_v(K/2 - q)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector4;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::right_singular_ascending;
use crate::model::{ModelParams, PolaritonKind, RelativeHamiltonian, Spinor, C64, I};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Branch {
    AA,
    AB,
    BA,
    BB,
}

impl Branch {
    pub const ALL: [Branch; 4] = [Branch::AA, Branch::AB, Branch::BA, Branch::BB];

    /// `(u, v)`: kind at `K/2 + q`, kind at `K/2 - q`.
    pub fn parts(self) -> (PolaritonKind, PolaritonKind) {
        use PolaritonKind::{A, B};
        match self {
            Branch::AA => (A, A),
            Branch::AB => (A, B),
            Branch::BA => (B, A),
            Branch::BB => (B, B),
        }
    }

    pub fn from_parts(u: PolaritonKind, v: PolaritonKind) -> Self {
        use PolaritonKind::{A, B};
        match (u, v) {
            (A, A) => Branch::AA,
            (A, B) => Branch::AB,
            (B, A) => Branch::BA,
            (B, B) => Branch::BB,
        }
    }

    /// The band this branch contributes to (AB and BA share one).
    pub fn band(self) -> BandId {
        match self {
            Branch::AA => BandId::AA,
            Branch::AB | Branch::BA => BandId::AB,
            Branch::BB => BandId::BB,
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Branch::AA => "AA",
            Branch::AB => "AB",
            Branch::BA => "BA",
            Branch::BB => "BB",
        };
        f.write_str(s)
    }
}

impl FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "AA" => Ok(Branch::AA),
            "AB" => Ok(Branch::AB),
            "BA" => Ok(Branch::BA),
            "BB" => Ok(Branch::BB),
            other => Err(format!("unknown branch '{other}' (expected AA, AB, BA or BB)")),
        }
    }
}

/// `(x + y)/2 ± sqrt((x - y)^2 + 4g^2)/2` with the principal square root;
/// `+` for `A`, `-` for `B`.
pub fn cal_e(kind: PolaritonKind, x: C64, y: C64, g: f64) -> C64 {
    let root = ((x - y) * (x - y) + 4.0 * g * g).sqrt();
    0.5 * (x + y) + 0.5 * kind.sign() * root
}

/// Photon energy shared by both polaritons and the effective TLS energies of
/// the polaritons at `K/2 - q` and `K/2 + q`, all in the frame where the
/// photon term is symmetric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchOffsets {
    pub photon: C64,
    pub tls_minus: C64,
    pub tls_plus: C64,
}

pub fn branch_offsets(q: C64, params: &ModelParams) -> BranchOffsets {
    let hk = params.half_k();
    let photon = 2.0 * params.xi * hk.cos() * q.cos();
    let twist = 2.0 * params.xi * hk.sin() * q.sin();
    BranchOffsets {
        photon,
        tls_minus: params.delta - twist,
        tls_plus: params.delta + twist,
    }
}

pub fn branch_energy_complex(branch: Branch, q: C64, params: &ModelParams) -> C64 {
    let (u, v) = branch.parts();
    let o = branch_offsets(q, params);
    cal_e(u, o.photon, o.tls_plus, params.g) + cal_e(v, o.photon, o.tls_minus, params.g)
}

pub fn branch_energy(branch: Branch, q: f64, params: &ModelParams) -> f64 {
    branch_energy_complex(branch, C64::from(q), params).re
}

/// (TLS, photon) amplitudes of one polariton factor; `x` is the TLS energy
/// minus the photon energy.
fn factor_amplitudes(kind: PolaritonKind, x: C64, g: f64) -> (C64, C64) {
    let w = x + kind.sign() * (x * x + 4.0 * g * g).sqrt();
    let n = (4.0 * g * g + w.norm_sqr()).sqrt();
    (w / n, C64::from(2.0 * g / n))
}

/// Closed-form branch spinor before normalization.
fn closed_form_vector(branch: Branch, q: C64, params: &ModelParams) -> Vector4<C64> {
    let (u, v) = branch.parts();
    let o = branch_offsets(q, params);
    let (e_u, g_u) = factor_amplitudes(u, o.tls_plus - o.photon, params.g);
    let (e_v, g_v) = factor_amplitudes(v, o.tls_minus - o.photon, params.g);
    let s = C64::from(FRAC_1_SQRT_2);
    Vector4::new(
        g_u * g_v,
        s * (e_u * g_v + g_u * e_v),
        s * (g_u * e_v - e_u * g_v),
        e_u * e_v,
    )
}

/// A point on a free branch with its spinor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchPoint {
    pub branch: Branch,
    pub q: C64,
    pub energy: C64,
    pub spinor: Spinor,
    pub offsets: BranchOffsets,
}

const EIGEN_RESIDUAL_TOL: f64 = 1e-10;
const DEGENERACY_TOL: f64 = 1e-12;

/// Branch eigenvector of `A + B cos q + C sin q`, unit norm.
///
/// The closed form is used whenever it satisfies the eigen-relation; its phase
/// makes the photon-pair component real and positive. Otherwise (wrong square
/// root sheet at complex `q`) the vector is taken from the null space of
/// `A + B cos q + C sin q - E`, which fails if that null space is not
/// one-dimensional.
pub fn branch_point(branch: Branch, q: C64, params: &ModelParams) -> Result<BranchPoint> {
    let op = RelativeHamiltonian::new(params);
    branch_point_with(&op, branch, q, params)
}

pub(crate) fn branch_point_with(
    op: &RelativeHamiltonian,
    branch: Branch,
    q: C64,
    params: &ModelParams,
) -> Result<BranchPoint> {
    let energy = branch_energy_complex(branch, q, params);
    let shifted = op.bloch_at(q) - nalgebra::Matrix4::identity() * energy;
    let scale = shifted.norm().max(params.g);

    let raw = closed_form_vector(branch, q, params);
    let n = raw.norm();
    if n > 0.0 && n.is_finite() {
        let f = raw / C64::from(n);
        if (shifted * f).norm() <= EIGEN_RESIDUAL_TOL * scale {
            return Ok(BranchPoint {
                branch,
                q,
                energy,
                spinor: Spinor(f),
                offsets: branch_offsets(q, params),
            });
        }
    }

    Ok(BranchPoint {
        branch,
        q,
        energy,
        spinor: Spinor(null_vector(&shifted, scale, q)?),
        offsets: branch_offsets(q, params),
    })
}

/// Unique null vector of `shifted`, phase-fixed.
fn null_vector(shifted: &nalgebra::Matrix4<C64>, scale: f64, q: C64) -> Result<Vector4<C64>> {
    let pairs = right_singular_ascending(shifted);
    if pairs[1].0 <= DEGENERACY_TOL * scale {
        return Err(Error::DegenerateBranch { q: q.re });
    }
    if pairs[0].0 > EIGEN_RESIDUAL_TOL * scale {
        return Err(Error::Conditioning(format!("no eigenvector at q = {q}")));
    }
    Ok(crate::linalg::fix_phase(&pairs[0].1))
}

pub fn branch_vector(branch: Branch, q: C64, params: &ModelParams) -> Result<Spinor> {
    branch_point(branch, q, params).map(|p| p.spinor)
}

/// Symmetrized free state `(e^{iql} F + e^{-iql} T F) / 2` for real `q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeState {
    pub branch: Branch,
    pub q: f64,
    pub energy: f64,
    pub spinor: Spinor,
}

impl FreeState {
    pub fn new(branch: Branch, q: f64, params: &ModelParams) -> Result<Self> {
        let p = branch_point(branch, C64::from(q), params)?;
        Ok(Self {
            branch,
            q,
            energy: p.energy.re,
            spinor: p.spinor,
        })
    }

    pub fn at(&self, l: i64) -> Spinor {
        let phase = (I * self.q * l as f64).exp();
        let f = self.spinor.0;
        let tf = self.spinor.reflect().0;
        Spinor((f * phase + tf * phase.conj()) * C64::from(0.5))
    }
}

pub fn incident_state(branch: Branch, q: f64, params: &ModelParams, l: i64) -> Result<Spinor> {
    FreeState::new(branch, q, params).map(|s| s.at(l))
}

/// The three scattering bands, lowest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BandId {
    BB,
    AB,
    AA,
}

impl fmt::Display for BandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BandId::AA => "AA",
            BandId::AB => "AB",
            BandId::BB => "BB",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Band {
    pub id: BandId,
    pub lower: f64,
    pub upper: f64,
}

impl Band {
    pub fn contains(&self, e: f64) -> bool {
        e >= self.lower && e <= self.upper
    }
}

/// Energy interval covered by no band, bounded by the top of `below` and the
/// bottom of `above`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Gap {
    pub below: BandId,
    pub above: BandId,
    pub lower: f64,
    pub upper: f64,
}

impl Gap {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, e: f64) -> bool {
        e > self.lower && e < self.upper
    }

    /// 1 for the gap between the AB and AA bands, 2 for the gap between the
    /// BB and AB bands, 0 otherwise.
    pub fn id(&self) -> u8 {
        match (self.below, self.above) {
            (BandId::AB, BandId::AA) => 1,
            (BandId::BB, BandId::AB) => 2,
            _ => 0,
        }
    }
}

/// Sampled dispersion of one branch with its refined extrema.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchBand {
    pub branch: Branch,
    pub q: Vec<f64>,
    pub energy: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// Energies of every local extremum (zero group velocity).
    pub critical: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandStructure {
    pub params: ModelParams,
    pub branches: Vec<BranchBand>,
    /// AA, AB (merged with BA), BB; sorted by lower edge.
    pub bands: Vec<Band>,
    /// Open gaps, lowest first.
    pub gaps: Vec<Gap>,
}

impl BandStructure {
    pub fn band(&self, id: BandId) -> &Band {
        self.bands.iter().find(|b| b.id == id).expect("all three bands present")
    }

    pub fn gap(&self, id: u8) -> Option<&Gap> {
        self.gaps.iter().find(|g| g.id() == id)
    }

    pub fn in_any_band(&self, e: f64) -> bool {
        self.bands.iter().any(|b| b.contains(e))
    }

    /// All energies where some branch has zero group velocity.
    pub fn critical_energies(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.branches.iter().flat_map(|b| b.critical.iter().copied()).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Distance from `e` to the nearest zero-velocity energy.
    pub fn edge_distance(&self, e: f64) -> f64 {
        self.branches
            .iter()
            .flat_map(|b| b.critical.iter())
            .map(|c| (e - c).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Which bands contain `e`, counting AB and BA separately.
    pub fn open_branch_count(&self, e: f64) -> usize {
        self.branches.iter().filter(|b| e > b.min && e < b.max).count()
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimum of `f` on `[a, b]`.
pub(crate) fn golden_minimize(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(c, fc), (d, fd), (x, fx)]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap()
}

const EDGE_REFINE_TOL: f64 = 1e-10;

fn sample_branch(branch: Branch, params: &ModelParams, n: usize) -> BranchBand {
    let step = 2.0 * PI / n as f64;
    let q: Vec<f64> = (0..n).map(|i| -PI + step * i as f64).collect();
    let energy: Vec<f64> = q.iter().map(|&x| branch_energy(branch, x, params)).collect();
    let e = |x: f64| branch_energy(branch, x, params);

    let mut critical = Vec::new();
    for i in 0..n {
        let prev = energy[(i + n - 1) % n];
        let next = energy[(i + 1) % n];
        let cur = energy[i];
        let (a, b) = (q[i] - step, q[i] + step);
        if cur <= prev && cur <= next && (cur < prev || cur < next) {
            critical.push(golden_minimize(a, b, EDGE_REFINE_TOL, e).1);
        } else if cur >= prev && cur >= next && (cur > prev || cur > next) {
            critical.push(-golden_minimize(a, b, EDGE_REFINE_TOL, |x| -e(x)).1);
        }
    }
    if critical.is_empty() {
        // flat branch
        critical.push(energy[0]);
    }
    critical.sort_by(f64::total_cmp);
    critical.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let min = critical.iter().copied().fold(f64::INFINITY, f64::min);
    let max = critical.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    BranchBand {
        branch,
        q,
        energy,
        min,
        max,
        critical,
    }
}

/// Samples all four branches on a uniform grid over `[-pi, pi)`, refines every
/// extremum, merges AB/BA and lists the open gaps.
pub fn band_structure(params: &ModelParams, n_samples: usize) -> BandStructure {
    let n = n_samples.max(64);
    let branches: Vec<BranchBand> = Branch::ALL.iter().map(|&b| sample_branch(b, params, n)).collect();

    let mut bands: Vec<Band> = [BandId::BB, BandId::AB, BandId::AA]
        .iter()
        .map(|&id| {
            let members = branches.iter().filter(|b| b.branch.band() == id);
            let (lo, hi) = members.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
                (lo.min(b.min), hi.max(b.max))
            });
            Band { id, lower: lo, upper: hi }
        })
        .collect();
    bands.sort_by(|a, b| a.lower.total_cmp(&b.lower));

    let mut gaps = Vec::new();
    let mut reach = bands[0].upper;
    let mut reach_band = bands[0].id;
    for band in &bands[1..] {
        if band.lower > reach {
            gaps.push(Gap {
                below: reach_band,
                above: band.id,
                lower: reach,
                upper: band.lower,
            });
        }
        if band.upper > reach {
            reach = band.upper;
            reach_band = band.id;
        }
    }

    BandStructure {
        params: *params,
        branches,
        bands,
        gaps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_bloch_matrices, single_polariton_mode};
    use proptest::prelude::*;

    fn params(xi: f64, delta: f64, k: f64) -> ModelParams {
        ModelParams::new(xi, delta, k).unwrap()
    }

    #[test]
    fn cal_e_values() {
        let z = C64::from(0.0);
        assert!((cal_e(PolaritonKind::A, z, z, 1.0) - 1.0).norm() < 1e-15);
        assert!((cal_e(PolaritonKind::B, z, z, 1.0) + 1.0).norm() < 1e-15);
        let e = cal_e(PolaritonKind::A, C64::from(-0.4), z, 1.0);
        assert!((e.re - 0.819_803_902_718_557).abs() < 1e-12);
    }

    #[test]
    fn branch_energy_values() {
        let p = params(-0.37, 0.0, 0.0);
        assert!((branch_energy(Branch::AA, PI / 2.0, &p) - 2.0).abs() < 1e-14);
        let p = params(-0.2, 0.0, 0.0);
        assert!((branch_energy(Branch::AA, 0.0, &p) - 1.639_607_805_437_114).abs() < 1e-12);
    }

    #[test]
    fn symmetric_point_spinor() {
        // K = 0 and delta = 2 xi cos q: both factors are at resonance
        let q: f64 = 0.8;
        let xi = -0.3;
        let p = params(xi, 2.0 * xi * q.cos(), 0.0);
        let f = branch_vector(Branch::AA, C64::from(q), &p).unwrap();
        let expected = [0.5, FRAC_1_SQRT_2, 0.0, 0.5];
        for i in 0..4 {
            assert!((f.0[i] - expected[i]).norm() < 1e-14, "{i}: {}", f.0[i]);
        }
    }

    #[test]
    fn degenerate_null_space_is_refused() {
        let m = nalgebra::Matrix4::from_diagonal(&Vector4::new(0.0, 0.0, 1.0, 2.0)).map(C64::from);
        let err = null_vector(&m, 2.0, C64::from(0.3)).unwrap_err();
        assert_eq!(err, Error::DegenerateBranch { q: 0.3 });
        let m = nalgebra::Matrix4::from_diagonal(&Vector4::new(0.0, 0.5, 1.0, 2.0)).map(C64::from);
        let v = null_vector(&m, 2.0, C64::from(0.3)).unwrap();
        assert!((v[0] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn incident_state_is_reflection_symmetric() {
        let p = params(-0.4, 0.3, 0.9);
        let s = FreeState::new(Branch::AB, 1.1, &p).unwrap();
        assert_eq!(s.at(0).d_minus(), C64::from(0.0));
        for l in [1, 2, 7, 30] {
            let d = (s.at(l).0 - s.at(-l).reflect().0).norm();
            assert!(d < 1e-15);
        }
    }

    #[test]
    fn free_state_solves_site_equation_away_from_contact() {
        use crate::model::{site_residual, SpinorField};
        let p = params(-0.25, 0.6, 0.7);
        for b in Branch::ALL {
            let s = FreeState::new(b, 0.9, &p).unwrap();
            let field = SpinorField::from_fn(-12..=12, |l| s.at(l));
            let r = site_residual(&p, &field, s.energy, 2..=11).unwrap();
            assert!(r.iter().all(|x| *x < 1e-12), "{b}: {r:?}");
            let r = site_residual(&p, &field, s.energy, -11..=-2).unwrap();
            assert!(r.iter().all(|x| *x < 1e-12), "{b}: {r:?}");
        }
    }

    #[test]
    fn band_layout_zero_momentum() {
        let p = params(-0.2, 0.0, 0.0);
        let bs = band_structure(&p, 256);
        let aa = bs.band(BandId::AA);
        let ab = bs.band(BandId::AB);
        let bb = bs.band(BandId::BB);
        let e_top = 2.439_607_805_437_114;
        let e_bot = 1.639_607_805_437_114;
        assert!((aa.lower - e_bot).abs() < 1e-10 && (aa.upper - e_top).abs() < 1e-10);
        assert!((ab.lower + 0.4).abs() < 1e-10 && (ab.upper - 0.4).abs() < 1e-10);
        assert!((bb.lower + e_top).abs() < 1e-10 && (bb.upper + e_bot).abs() < 1e-10);
        assert_eq!(bs.gaps.len(), 2);
        let upper = bs.gap(1).unwrap();
        let lower = bs.gap(2).unwrap();
        assert!((upper.lower - 0.4).abs() < 1e-10 && (upper.upper - e_bot).abs() < 1e-10);
        assert!((lower.lower + e_bot).abs() < 1e-10 && (lower.upper + 0.4).abs() < 1e-10);
        for b in &bs.branches {
            assert!(b.energy.iter().all(|e| *e >= b.min - 1e-12 && *e <= b.max + 1e-12));
        }
    }

    #[test]
    fn ab_and_ba_bands_coincide() {
        let p = params(0.43, -0.8, 1.3);
        let bs = band_structure(&p, 128);
        let ab = &bs.branches[1];
        let ba = &bs.branches[2];
        assert!((ab.min - ba.min).abs() < 1e-10 && (ab.max - ba.max).abs() < 1e-10);
    }

    fn arb_point() -> impl Strategy<Value = (f64, f64, f64, f64)> {
        (-1.0..1.0f64, -5.0..5.0f64, -2.0 * PI..2.0 * PI, -PI..PI)
    }

    proptest! {
        #[test]
        fn spinors_are_orthonormal_eigenvectors((xi, delta, k, q) in arb_point()) {
            let p = params(xi, delta, k);
            let op = RelativeHamiltonian::new(&p);
            let m = op.bloch_at(C64::from(q));
            let pts: Vec<BranchPoint> = Branch::ALL
                .iter()
                .map(|&b| branch_point(b, C64::from(q), &p).unwrap())
                .collect();
            for a in &pts {
                let f = a.spinor.0;
                prop_assert!((f.norm() - 1.0).abs() < 1e-12);
                let r = (m * f - f * a.energy).norm();
                prop_assert!(r < 1e-10 * m.norm().max(1.0));
                prop_assert!(a.energy.im.abs() < 1e-14);
            }
            for i in 0..4 {
                for j in (i + 1)..4 {
                    let overlap = pts[i].spinor.0.dotc(&pts[j].spinor.0).norm();
                    prop_assert!(overlap < 1e-10);
                }
            }
        }

        #[test]
        fn branch_energy_identities((xi, delta, k, q) in arb_point()) {
            let p = params(xi, delta, k);
            let hk = p.half_k();
            let sum: f64 = Branch::ALL.iter().map(|&b| branch_energy(b, q, &p)).sum();
            prop_assert!((sum - (4.0 * delta + 8.0 * xi * q.cos() * hk.cos())).abs() < 1e-12);
            let ab = branch_energy(Branch::AB, q, &p);
            let ba = branch_energy(Branch::BA, -q, &p);
            prop_assert!((ab - ba).abs() < 1e-12);
            for b in Branch::ALL {
                let (u, v) = b.parts();
                let pair = single_polariton_mode(u, hk + q, &p).energy
                    + single_polariton_mode(v, hk - q, &p).energy;
                prop_assert!((branch_energy(b, q, &p) - pair).abs() < 1e-10);
            }
        }

        #[test]
        fn zero_momentum_branches_are_even((xi, delta, _k, q) in arb_point()) {
            let p = params(xi, delta, 0.0);
            for b in Branch::ALL {
                prop_assert!((branch_energy(b, q, &p) - branch_energy(b, -q, &p)).abs() < 1e-12);
            }
        }

        #[test]
        fn bloch_symmetries((xi, delta, k, _q) in arb_point()) {
            let m = build_bloch_matrices(&params(xi, delta, k));
            let t = crate::model::reflection();
            prop_assert_eq!(m.a, m.a.transpose());
            prop_assert_eq!(m.c, m.c.transpose());
            prop_assert_eq!(t * m.a * t, m.a);
            prop_assert_eq!(t * m.b * t, m.b);
            prop_assert_eq!(t * m.c * t, -m.c);
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        prop_assert_eq!(m.b[(i, j)], 0.0);
                    }
                }
            }
        }
    }
}
