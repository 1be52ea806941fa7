//! Exact diagonalization of the cavity-array Hamiltonian on a periodic ring,
//! restricted to two excitations.
//!
//! This is an independent oracle: the Hamiltonian is built from occupation
//! numbers with bosonic matrix elements, without reference to the relative
//! coordinate formulation used by the rest of the crate.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::bands::BandStructure;
use crate::bound_states::BoundState;
use crate::error::{Error, Result};
use crate::model::{ModelParams, C64, I};

/// Occupation numbers: photons per cavity and TLS excitation flags.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Occupation {
    pub photons: Vec<u8>,
    pub excited: Vec<bool>,
}

impl Occupation {
    fn vacuum(n: usize) -> Self {
        Self {
            photons: vec![0; n],
            excited: vec![false; n],
        }
    }

    fn translated(&self) -> Self {
        let n = self.photons.len();
        let mut out = Self::vacuum(n);
        for i in 0..n {
            out.photons[(i + 1) % n] = self.photons[i];
            out.excited[(i + 1) % n] = self.excited[i];
        }
        out
    }

    fn tls_count(&self) -> usize {
        self.excited.iter().filter(|&&e| e).count()
    }
}

/// Kind of a two-excitation basis state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PairKind {
    Photons,
    Mixed,
    Tls,
}

/// Basis of the two-excitation sector of an `N`-cavity ring.
#[derive(Clone, Debug)]
pub struct TwoExcitationBasis {
    pub sites: usize,
    pub states: Vec<Occupation>,
    /// `(kind, first site, second site)`; for mixed states the photon site comes first.
    pub labels: Vec<(PairKind, usize, usize)>,
    index: HashMap<Occupation, usize>,
}

impl TwoExcitationBasis {
    pub fn new(sites: usize) -> Result<Self> {
        if sites < 3 {
            return Err(Error::RingTooSmall(sites));
        }
        let mut states = Vec::with_capacity(2 * sites * sites);
        let mut labels = Vec::with_capacity(2 * sites * sites);
        for m in 0..sites {
            for n in m..sites {
                let mut o = Occupation::vacuum(sites);
                o.photons[m] += 1;
                o.photons[n] += 1;
                states.push(o);
                labels.push((PairKind::Photons, m, n));
            }
        }
        for m in 0..sites {
            for n in 0..sites {
                let mut o = Occupation::vacuum(sites);
                o.photons[m] = 1;
                o.excited[n] = true;
                states.push(o);
                labels.push((PairKind::Mixed, m, n));
            }
        }
        for m in 0..sites {
            for n in m + 1..sites {
                let mut o = Occupation::vacuum(sites);
                o.excited[m] = true;
                o.excited[n] = true;
                states.push(o);
                labels.push((PairKind::Tls, m, n));
            }
        }
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Self {
            sites,
            states,
            labels,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, o: &Occupation) -> Option<usize> {
        self.index.get(o).copied()
    }

    /// Basis index of the state translated by one site.
    pub fn translation(&self) -> Vec<usize> {
        self.states
            .iter()
            .map(|s| self.index[&s.translated()])
            .collect()
    }
}

/// Real symmetric sparse matrix stored by columns.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    pub dim: usize,
    pub columns: Vec<Vec<(usize, f64)>>,
}

impl SparseHamiltonian {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col].iter().filter(|(r, _)| *r == row).map(|(_, v)| v).sum()
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(|c| c.len()).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// `max |H - H^T|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }
}

/// Images of one basis state under the Hamiltonian, with amplitudes.
fn apply(state: &Occupation, params: &ModelParams) -> Vec<(Occupation, f64)> {
    let n = state.photons.len();
    let mut out = Vec::new();
    let onsite = params.delta * state.tls_count() as f64;
    if onsite != 0.0 {
        out.push((state.clone(), onsite));
    }
    for j in 0..n {
        let nj = state.photons[j];
        if nj > 0 {
            for i in [(j + n - 1) % n, (j + 1) % n] {
                let mut o = state.clone();
                o.photons[j] -= 1;
                o.photons[i] += 1;
                let amp = params.xi * (nj as f64).sqrt() * (o.photons[i] as f64).sqrt();
                out.push((o, amp));
            }
        }
        if nj > 0 && !state.excited[j] {
            let mut o = state.clone();
            o.photons[j] -= 1;
            o.excited[j] = true;
            out.push((o, params.g * (nj as f64).sqrt()));
        }
        if state.excited[j] {
            let mut o = state.clone();
            o.photons[j] += 1;
            o.excited[j] = false;
            let amp = params.g * (o.photons[j] as f64).sqrt();
            out.push((o, amp));
        }
    }
    out
}

/// Hamiltonian of the ring in the two-excitation sector; the total momentum
/// in `params` is ignored.
pub fn build_hamiltonian(basis: &TwoExcitationBasis, params: &ModelParams) -> SparseHamiltonian {
    let columns = basis
        .states
        .iter()
        .map(|s| {
            let mut col: Vec<(usize, f64)> = Vec::new();
            for (o, amp) in apply(s, params) {
                let r = basis
                    .index_of(&o)
                    .expect("Hamiltonian conserves the number of excitations");
                match col.iter_mut().find(|(row, _)| *row == r) {
                    Some(entry) => entry.1 += amp,
                    None => col.push((r, amp)),
                }
            }
            col.retain(|(_, v)| *v != 0.0);
            col.sort_by_key(|(r, _)| *r);
            col
        })
        .collect();
    SparseHamiltonian {
        dim: basis.dim(),
        columns,
    }
}

/// `max |[H, T]|` for the one-site translation `T`.
pub fn translation_defect(h: &SparseHamiltonian, translation: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for (c, col) in h.columns.iter().enumerate() {
        for &(r, v) in col {
            let moved = h.get(translation[r], translation[c]);
            worst = worst.max((moved - v).abs());
        }
    }
    worst
}

/// Translation orbits: representative, orbit length and, for every state,
/// its orbit index and shift from the representative.
#[derive(Clone, Debug)]
struct Orbits {
    reps: Vec<usize>,
    lengths: Vec<usize>,
    orbit_of: Vec<usize>,
    shift_of: Vec<usize>,
}

fn orbits(translation: &[usize]) -> Orbits {
    let dim = translation.len();
    let mut orbit_of = vec![usize::MAX; dim];
    let mut shift_of = vec![0; dim];
    let mut reps = Vec::new();
    let mut lengths = Vec::new();
    for start in 0..dim {
        if orbit_of[start] != usize::MAX {
            continue;
        }
        let id = reps.len();
        let mut s = start;
        let mut k = 0;
        while orbit_of[s] == usize::MAX {
            orbit_of[s] = id;
            shift_of[s] = k;
            s = translation[s];
            k += 1;
        }
        reps.push(start);
        lengths.push(k);
    }
    Orbits {
        reps,
        lengths,
        orbit_of,
        shift_of,
    }
}

/// Hamiltonian block at ring momentum `K = 2 pi n / N` with its spectrum.
#[derive(Clone, Debug)]
pub struct MomentumSector {
    pub n: usize,
    pub momentum: f64,
    pub block: DMatrix<C64>,
    /// Orbit index of each sector basis vector.
    pub orbit_ids: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, ordered like `eigenvalues` (ascending).
    pub eigenvectors: DMatrix<C64>,
}

/// Translation-resolved form of a ring Hamiltonian.
#[derive(Clone, Debug)]
pub struct RingOracle {
    pub basis: TwoExcitationBasis,
    pub hamiltonian: SparseHamiltonian,
    translation: Vec<usize>,
    orbits: Orbits,
}

impl RingOracle {
    pub fn new(sites: usize, params: &ModelParams) -> Result<Self> {
        let basis = TwoExcitationBasis::new(sites)?;
        let hamiltonian = build_hamiltonian(&basis, params);
        let translation = basis.translation();
        let defect = translation_defect(&hamiltonian, &translation);
        if defect > 1e-12 {
            return Err(Error::TranslationBroken(defect));
        }
        let orbits = orbits(&translation);
        Ok(Self {
            basis,
            hamiltonian,
            translation,
            orbits,
        })
    }

    pub fn sites(&self) -> usize {
        self.basis.sites
    }

    pub fn translation(&self) -> &[usize] {
        &self.translation
    }

    /// Sector with Bloch states `|a, K> = L_a^{-1/2} Σ_s e^{iKs} T^s |r_a>`,
    /// i.e. `T |a, K> = e^{-iK} |a, K>`, matching a centre-of-mass factor
    /// `e^{iK R}`.
    pub fn sector(&self, n: usize) -> MomentumSector {
        let sites = self.sites();
        let k = 2.0 * PI * n as f64 / sites as f64;
        let o = &self.orbits;
        let allowed: Vec<usize> = (0..o.reps.len()).filter(|&a| (n * o.lengths[a]) % sites == 0).collect();
        let mut position = vec![usize::MAX; o.reps.len()];
        for (i, &a) in allowed.iter().enumerate() {
            position[a] = i;
        }
        let d = allowed.len();
        let mut block = DMatrix::<C64>::zeros(d, d);
        for (col, &b) in allowed.iter().enumerate() {
            let lb = o.lengths[b] as f64;
            for &(r, h) in &self.hamiltonian.columns[o.reps[b]] {
                let a = o.orbit_of[r];
                let row = position[a];
                if row == usize::MAX {
                    continue;
                }
                let la = o.lengths[a] as f64;
                let phase = (-I * k * o.shift_of[r] as f64).exp();
                block[(row, col)] += phase * (h * (lb / la).sqrt());
            }
        }
        // Symmetrize against round-off before the Hermitian solver.
        let block = (&block + block.adjoint()) * C64::from(0.5);
        let eig = SymmetricEigen::new(block.clone());
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
        MomentumSector {
            n,
            momentum: k,
            block,
            orbit_ids: allowed,
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn sectors(&self) -> Vec<MomentumSector> {
        (0..self.sites()).into_par_iter().map(|n| self.sector(n)).collect()
    }

    /// Expand a sector eigenvector onto the full two-excitation basis.
    pub fn expand(&self, sector: &MomentumSector, column: usize) -> DVector<C64> {
        let o = &self.orbits;
        let mut psi = DVector::zeros(self.basis.dim());
        for (i, &a) in sector.orbit_ids.iter().enumerate() {
            let c = sector.eigenvectors[(i, column)];
            let l = o.lengths[a];
            let mut s = o.reps[a];
            for shift in 0..l {
                psi[s] = c * (I * sector.momentum * shift as f64).exp() / C64::from((l as f64).sqrt());
                s = self.translation[s];
            }
        }
        psi
    }
}

/// Ring index of momentum `k` (within `1e-9`), if it is on the grid.
pub fn ring_index(k: f64, sites: usize) -> Option<usize> {
    let x = k * sites as f64 / (2.0 * PI);
    let r = x.round();
    if (x - r).abs() > 1e-9 {
        return None;
    }
    Some((r as i64).rem_euclid(sites as i64) as usize)
}

/// Photon-pair, mixed and TLS-pair probabilities of a ring state.
pub fn ring_composition(basis: &TwoExcitationBasis, psi: &DVector<C64>) -> [f64; 3] {
    let mut w = [0.0; 3];
    for (i, (kind, _, _)) in basis.labels.iter().enumerate() {
        let k = match kind {
            PairKind::Photons => 0,
            PairKind::Mixed => 1,
            PairKind::Tls => 2,
        };
        w[k] += psi[i].norm_sqr();
    }
    let total: f64 = w.iter().sum();
    w.map(|x| x / total)
}

/// Relative-coordinate state wrapped onto the ring.
///
/// The infinite-lattice state `Σ_{m,l} e^{iK(m + l/2)} [...]_l` is folded by
/// reducing site indices modulo `N`; `beta` must decay within `reach` sites.
pub fn wrap_onto_ring(
    basis: &TwoExcitationBasis,
    momentum: f64,
    reach: i64,
    beta: impl Fn(i64) -> [C64; 4],
) -> DVector<C64> {
    let n = basis.sites as i64;
    let profile: Vec<[C64; 4]> = (-reach..=reach).map(&beta).collect();
    let at = |l: i64| profile[(l + reach) as usize];
    let images = |x1: usize, x2: usize, f: &dyn Fn([C64; 4]) -> C64| -> C64 {
        let l0 = x2 as i64 - x1 as i64;
        let mut sum = C64::from(0.0);
        let mut l = l0 - ((l0 + reach) / n + 1) * n;
        while l <= reach {
            if l >= -reach {
                let com = x1 as f64 + 0.5 * l as f64;
                sum += f(at(l)) * (I * momentum * com).exp();
            }
            l += n;
        }
        sum
    };
    let r2 = C64::from(2f64.sqrt());
    let mut psi = DVector::zeros(basis.dim());
    for (i, &(kind, m, k)) in basis.labels.iter().enumerate() {
        psi[i] = match kind {
            PairKind::Photons if m == k => images(m, k, &|b| b[0]),
            PairKind::Photons => r2 * images(m, k, &|b| b[0]),
            // photon at m, TLS at k: relative coordinate is photon minus TLS site
            PairKind::Mixed => images(k, m, &|b| b[1] + b[2]),
            PairKind::Tls => r2 * images(m, k, &|b| b[3]),
        };
    }
    let norm = psi.norm();
    if norm > 0.0 {
        psi /= C64::from(norm);
    }
    psi
}

#[derive(Clone, Debug, Serialize)]
pub struct RingComparison {
    pub sites: usize,
    pub ed_energy: f64,
    pub error: f64,
    pub overlap: f64,
    /// Composition of the ring eigenvector: photon pairs, mixed, TLS pairs.
    pub composition: [f64; 3],
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundStateComparison {
    pub energy: f64,
    pub gap_id: u8,
    pub rings: Vec<RingComparison>,
}

impl BoundStateComparison {
    /// Errors decrease with ring size.
    pub fn converging(&self) -> bool {
        self.rings.windows(2).all(|w| w[1].error <= w[0].error || w[1].error < 1e-12)
    }
}

/// Compare an analytic bound state with the in-gap eigenvalue of the ring
/// sector carrying the same total momentum, for each ring size.
pub fn compare_bound_state(
    state: &BoundState,
    params: &ModelParams,
    bands: &BandStructure,
    ring_sizes: &[usize],
) -> Result<BoundStateComparison> {
    let gap = bands
        .gaps
        .iter()
        .find(|g| g.id() == state.gap_id && g.contains(state.energy))
        .ok_or(Error::NotInGap(state.energy))?;
    let rings = ring_sizes
        .par_iter()
        .map(|&sites| {
            let n = ring_index(params.total_momentum, sites).ok_or_else(|| {
                Error::InvalidParams(format!(
                    "total momentum {} is not a multiple of 2 pi / {sites}",
                    params.total_momentum
                ))
            })?;
            let oracle = RingOracle::new(sites, params)?;
            let sector = oracle.sector(n);
            let (col, ed_energy) = sector
                .eigenvalues
                .iter()
                .enumerate()
                .filter(|(_, e)| gap.contains(**e))
                .min_by(|a, b| (a.1 - state.energy).abs().total_cmp(&(b.1 - state.energy).abs()))
                .map(|(i, e)| (i, *e))
                .ok_or(Error::OracleMismatch(state.energy))?;
            let psi_ed = oracle.expand(&sector, col);
            let reach = state.truncation.max(sites as i64);
            let psi = wrap_onto_ring(&oracle.basis, params.total_momentum, reach, |l| {
                let b = state.wavefunction(l).0;
                [b[0], b[1], b[2], b[3]]
            });
            Ok(RingComparison {
                sites,
                ed_energy,
                error: (ed_energy - state.energy).abs(),
                overlap: psi_ed.dotc(&psi).norm_sqr(),
                composition: ring_composition(&oracle.basis, &psi_ed),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundStateComparison {
        energy: state.energy,
        gap_id: state.gap_id,
        rings,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BandEdgeReport {
    pub sites: usize,
    pub tolerance: f64,
    /// Ring eigenvalues outside every gap and farther than `tolerance` from
    /// every band.
    pub violations: Vec<f64>,
    /// Ring eigenvalues strictly inside each gap, keyed by gap id.
    pub in_gap: Vec<(u8, Vec<f64>)>,
}

impl BandEdgeReport {
    pub fn in_gap_count(&self) -> usize {
        self.in_gap.iter().map(|(_, v)| v.len()).sum()
    }
}

/// Check the zero-momentum ring spectrum against the analytic band layout.
pub fn band_edge_check(params: &ModelParams, bands: &BandStructure, sites: usize) -> Result<BandEdgeReport> {
    let n = ring_index(params.total_momentum, sites)
        .ok_or_else(|| Error::InvalidParams("total momentum not on the ring grid".into()))?;
    let oracle = RingOracle::new(sites, params)?;
    let sector = oracle.sector(n);
    let tolerance = 5.0 * params.g / sites as f64;
    let mut violations = Vec::new();
    let mut in_gap: Vec<(u8, Vec<f64>)> = bands.gaps.iter().map(|g| (g.id(), Vec::new())).collect();
    for &e in &sector.eigenvalues {
        if let Some(i) = bands.gaps.iter().position(|g| g.contains(e)) {
            in_gap[i].1.push(e);
            continue;
        }
        let distance = bands
            .bands
            .iter()
            .map(|b| if b.contains(e) { 0.0 } else { (e - b.lower).abs().min((e - b.upper).abs()) })
            .fold(f64::INFINITY, f64::min);
        if distance > tolerance {
            violations.push(e);
        }
    }
    Ok(BandEdgeReport {
        sites,
        tolerance,
        violations,
        in_gap,
    })
}

/// Two-excitation spectrum of uncoupled Jaynes–Cummings sites (no hopping):
/// single-excitation doublet sums on distinct sites and the two-excitation
/// doublet on each site, with multiplicities, sorted ascending.
pub fn uncoupled_levels(sites: usize, g: f64, delta: f64) -> Vec<f64> {
    let one = |s: f64| 0.5 * (delta + s * (delta * delta + 4.0 * g * g).sqrt());
    let two = |s: f64| 0.5 * (delta + s * (delta * delta + 8.0 * g * g).sqrt());
    let pairs = sites * (sites - 1) / 2;
    let mut levels = Vec::with_capacity(2 * sites * sites);
    levels.extend(std::iter::repeat_n(one(1.0) + one(1.0), pairs));
    levels.extend(std::iter::repeat_n(one(-1.0) + one(-1.0), pairs));
    levels.extend(std::iter::repeat_n(one(1.0) + one(-1.0), 2 * pairs));
    levels.extend(std::iter::repeat_n(two(1.0), sites));
    levels.extend(std::iter::repeat_n(two(-1.0), sites));
    levels.sort_by(f64::total_cmp);
    levels
}

/// Largest deviation between the full ring spectrum at zero hopping and the
/// uncoupled Jaynes–Cummings levels.
pub fn uncoupled_spectrum_defect(sites: usize, g: f64, delta: f64) -> Result<f64> {
    let params = ModelParams::with_coupling(g, 0.0, delta, 0.0)?;
    let basis = TwoExcitationBasis::new(sites)?;
    let h = build_hamiltonian(&basis, &params).to_dense();
    let mut ed: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ed.sort_by(f64::total_cmp);
    let exact = uncoupled_levels(sites, g, delta);
    Ok(ed.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}
