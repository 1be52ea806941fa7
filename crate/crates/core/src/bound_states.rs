//! Two-polariton bound states inside band gaps.
//!
//! In a gap all three channels are evanescent, and a bound state is a
//! nontrivial solution of the homogeneous matching system. Candidates are
//! located by minimizing the relative smallest singular value of that system
//! and accepted only after the materialized wavefunction passes the site
//! equation everywhere it is checked.

use nalgebra::{DMatrix, DVector, Vector4};
use rayon::prelude::*;
use serde::Serialize;

use crate::bands::{golden_minimize, Gap};
use crate::channels::{ChannelRoot, ChannelSolver, Tolerances};
use crate::error::{Error, Result};
use crate::model::{site_residual_with, ModelParams, RelativeHamiltonian, Spinor, SpinorField, C64};
use crate::scattering::{matching_matrix, probability_current, ChannelExpansion};

/// Sites `|l| <= CHECK_SITES` are verified for every accepted state.
pub const CHECK_SITES: i64 = 60;
/// Minimum number of scan points per gap.
pub const SCAN_POINTS: usize = 400;
const MAX_TRUNCATION: i64 = 10_000;
const TAIL_E_FOLDS: f64 = 30.0;
const REFINE_TOL: f64 = 1e-10;
const ACCEPT_RATIO: f64 = 1e-8;
const NULLITY_RATIO: f64 = 1e-6;

/// Photon-pair, mixed and TLS-pair probabilities of a normalized state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Composition {
    pub photon: f64,
    pub mixed: f64,
    pub tls: f64,
}

impl Composition {
    pub fn total(&self) -> f64 {
        self.photon + self.mixed + self.tls
    }
}

#[derive(Clone, Debug)]
pub struct BoundState {
    pub energy: f64,
    pub gap_id: u8,
    pub roots: Vec<ChannelRoot>,
    /// Coefficients of `e^{iλ_j l} F_j`.
    pub b: Vec<C64>,
    pub b_p: C64,
    pub b_plus: C64,
    pub weights: Composition,
    /// Slowest decay rate `min_j Im λ_j`.
    pub kappa: f64,
    /// Sites `|l| <= truncation` carry all but an `e^{-30}` tail.
    pub truncation: i64,
    pub sigma_ratio: f64,
    pub residual_max: f64,
    pub current_max: f64,
    expansion: ChannelExpansion,
}

impl BoundState {
    /// Normalized `β_l`.
    pub fn wavefunction(&self, l: i64) -> Spinor {
        match l {
            0 => Spinor::new(self.b_p, self.b_plus, C64::from(0.0), C64::from(0.0)),
            l if l > 0 => Spinor(self.expansion.at(l)),
            l => self.wavefunction(-l).reflect(),
        }
    }

    pub fn field(&self, reach: i64) -> SpinorField {
        SpinorField::from_fn(-reach..=reach, |l| self.wavefunction(l))
    }

    /// `Σ_l |β_l|²` over the truncation window.
    pub fn norm_sqr(&self) -> f64 {
        let mut n = self.wavefunction(0).norm_sqr();
        for l in 1..=self.truncation {
            n += 2.0 * self.wavefunction(l).norm_sqr();
        }
        n
    }
}

/// Relative smallest singular value of the homogeneous matching matrix.
fn sigma_ratio(solver: &ChannelSolver, energy: f64) -> Result<(f64, DMatrix<C64>, Vec<ChannelRoot>)> {
    let roots = solver.roots(energy)?;
    if roots.iter().any(|r| r.open) {
        return Err(Error::NotInGap(energy));
    }
    let m = matching_matrix(solver.operator(), &roots, energy);
    let s = crate::linalg::singular_values_desc(&m);
    let ratio = s[s.len() - 1] / s[0];
    Ok((ratio, m, roots))
}

/// Homogeneous 8x5 matching matrix at a gap energy.
pub fn bound_matching_matrix(energy: f64, params: &ModelParams) -> Result<DMatrix<C64>> {
    let solver = ChannelSolver::new(params, Tolerances::default());
    sigma_ratio(&solver, energy).map(|(_, m, _)| m)
}

/// Bound states in `gap`, possibly none.
pub fn find_bound_states(params: &ModelParams, gap: &Gap) -> Result<Vec<BoundState>> {
    let solver = ChannelSolver::new(params, Tolerances::default());
    find_bound_states_with(&solver, gap)
}

/// Bound states in every open gap.
pub fn find_all_bound_states(solver: &ChannelSolver) -> Result<Vec<BoundState>> {
    let mut out = Vec::new();
    for gap in solver.bands().gaps.clone() {
        out.extend(find_bound_states_with(solver, &gap)?);
    }
    Ok(out)
}

pub fn find_bound_states_with(solver: &ChannelSolver, gap: &Gap) -> Result<Vec<BoundState>> {
    let edge = solver.tolerances().edge * solver.params().g;
    let (lo, hi) = (gap.lower + edge, gap.upper - edge);
    if hi <= lo {
        return Ok(Vec::new());
    }
    // Inset a little further so that the outermost samples stay clear of the
    // band-edge guard after rounding.
    let (lo, hi) = (lo + 1e-3 * edge, hi - 1e-3 * edge);
    let n = SCAN_POINTS;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&e| sigma_ratio(solver, e).map(|r| r.0).unwrap_or(f64::INFINITY))
        .collect();

    let mut brackets = Vec::new();
    for i in 0..=n {
        let left = if i == 0 { f64::INFINITY } else { values[i - 1] };
        let right = if i == n { f64::INFINITY } else { values[i + 1] };
        if values[i].is_finite() && values[i] <= left && values[i] < right {
            brackets.push((grid[i.saturating_sub(1)], grid[(i + 1).min(n)]));
        }
    }

    let objective = |e: f64| sigma_ratio(solver, e).map(|r| r.0).unwrap_or(f64::INFINITY);
    let mut states: Vec<BoundState> = Vec::new();
    for (a, b) in brackets {
        let (e, ratio) = golden_minimize(a, b, REFINE_TOL * solver.params().g, objective);
        if ratio >= ACCEPT_RATIO {
            continue;
        }
        match build_bound_state_with(solver, e, gap.id()) {
            Ok(state) => {
                if !states.iter().any(|s| (s.energy - state.energy).abs() < 1e-8) {
                    states.push(state);
                }
            }
            Err(err) => log::debug!("rejected bound-state candidate at {e}: {err}"),
        }
    }
    Ok(states)
}

pub fn build_bound_wavefunction(energy: f64, params: &ModelParams) -> Result<BoundState> {
    let solver = ChannelSolver::new(params, Tolerances::default());
    let gap_id = solver
        .bands()
        .gaps
        .iter()
        .find(|g| g.contains(energy))
        .map(|g| g.id())
        .ok_or(Error::NotInGap(energy))?;
    build_bound_state_with(&solver, energy, gap_id)
}

/// Materialize, normalize and certify the bound state at `energy`.
pub fn build_bound_state_with(solver: &ChannelSolver, energy: f64, gap_id: u8) -> Result<BoundState> {
    let params = solver.params();
    let tol = solver.tolerances();
    let (ratio, m, roots) = sigma_ratio(solver, energy)?;

    let svd = m.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Conditioning("SVD failed".into()))?;
    let smax = svd.singular_values.max();
    let nullity = svd.singular_values.iter().filter(|&&s| s <= NULLITY_RATIO * smax).count();
    if nullity != 1 {
        return Err(Error::DegenerateBoundState(nullity));
    }
    let imin = svd.singular_values.imin();
    let mut x: DVector<C64> = v_t.row(imin).adjoint();

    let kappa = roots.iter().map(|r| r.lambda.im).fold(f64::INFINITY, f64::min);
    let mut truncation = (TAIL_E_FOLDS / kappa).ceil() as i64;
    if truncation > MAX_TRUNCATION {
        log::warn!("bound state at {energy} decays slowly (kappa = {kappa:.3e}); truncating at {MAX_TRUNCATION} sites");
        truncation = MAX_TRUNCATION;
    }
    truncation = truncation.max(CHECK_SITES + 1);

    // Phase: the larger contact amplitude real and positive.
    let pivot = if x[3].norm() >= x[4].norm() { 3 } else { 4 };
    if x[pivot].norm() > 0.0 {
        let phase = x[pivot] / C64::from(x[pivot].norm());
        x /= phase;
    }

    let expansion = ChannelExpansion {
        site_one: x.rows(0, 3).iter().copied().collect(),
        roots: roots.clone(),
    };
    let contact = Vector4::new(x[3], x[4], C64::from(0.0), C64::from(0.0));
    let mut photon = contact[0].norm_sqr();
    let mut mixed = contact[1].norm_sqr();
    let mut tls = 0.0;
    for l in 1..=truncation {
        let v = expansion.at(l);
        photon += 2.0 * v[0].norm_sqr();
        mixed += 2.0 * (v[1].norm_sqr() + v[2].norm_sqr());
        tls += 2.0 * v[3].norm_sqr();
    }
    let total = photon + mixed + tls;
    let scale = C64::from(total.sqrt().recip());
    let expansion = ChannelExpansion {
        site_one: expansion.site_one.iter().map(|c| c * scale).collect(),
        roots: roots.clone(),
    };
    let b = (0..3).map(|j| expansion.amplitude(j)).collect();
    let mut state = BoundState {
        energy,
        gap_id,
        roots,
        b,
        b_p: contact[0] * scale,
        b_plus: contact[1] * scale,
        weights: Composition {
            photon: photon / total,
            mixed: mixed / total,
            tls: tls / total,
        },
        kappa,
        truncation,
        sigma_ratio: ratio,
        residual_max: f64::NAN,
        current_max: f64::NAN,
        expansion,
    };

    let op = solver.operator();
    let field = state.field(CHECK_SITES + 1);
    state.residual_max = site_residual_with(op, &field, energy, -CHECK_SITES..=CHECK_SITES)?
        .into_iter()
        .fold(0.0, f64::max);
    let mut current_max: f64 = 0.0;
    for l in -CHECK_SITES..=CHECK_SITES {
        current_max = current_max.max(probability_current(op, &field, l)?.abs());
    }
    state.current_max = current_max;
    if state.residual_max > tol.residual * params.g {
        return Err(Error::Certificate(format!("site residual {:.3e}", state.residual_max)));
    }
    if current_max > tol.current {
        return Err(Error::Certificate(format!("probability current {current_max:.3e}")));
    }
    Ok(state)
}

/// `<β|H|β> / <β|β>` over the truncation window.
pub fn rayleigh_quotient(state: &BoundState, op: &RelativeHamiltonian) -> f64 {
    let reach = state.truncation;
    let field = state.field(reach + 1);
    let mut num = C64::from(0.0);
    let mut den = 0.0;
    for l in -reach..=reach {
        let c = field.get(l).expect("inside window").0;
        let left = field.get(l - 1).expect("inside window").0;
        let right = field.get(l + 1).expect("inside window").0;
        let h = op.site_defect(l, &left, &c, &right, 0.0);
        num += c.dotc(&h);
        den += c.norm_squared();
    }
    num.re / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::Gap;

    fn solver(xi: f64, delta: f64) -> ChannelSolver {
        ChannelSolver::new(&ModelParams::new(xi, delta, 0.0).unwrap(), Tolerances::default())
    }

    fn gap(s: &ChannelSolver, id: u8) -> Gap {
        *s.bands().gap(id).unwrap()
    }

    #[test]
    fn one_state_per_gap() {
        let s = solver(-0.2, 0.0);
        for id in [1, 2] {
            let states = find_bound_states_with(&s, &gap(&s, id)).unwrap();
            assert_eq!(states.len(), 1);
            let b = &states[0];
            assert!(gap(&s, id).contains(b.energy));
            assert!(b.residual_max < 1e-8 && b.current_max < 1e-8);
            assert!((b.weights.total() - 1.0).abs() < 1e-12);
            assert!((b.norm_sqr() - 1.0).abs() < 1e-12);
            assert_eq!(b.wavefunction(0).t(), C64::from(0.0));
        }
    }

    #[test]
    fn matrix_vanishes_only_at_the_bound_state() {
        let s = solver(-0.2, 0.0);
        let g = gap(&s, 1);
        let b = &find_bound_states_with(&s, &g).unwrap()[0];
        let (at, _, _) = sigma_ratio(&s, b.energy).unwrap();
        assert!(at < 1e-9);
        let far = if b.energy - g.lower > g.upper - b.energy { g.lower + 0.05 } else { g.upper - 0.05 };
        let (away, _, _) = sigma_ratio(&s, far).unwrap();
        assert!(away > 1e-3);
    }

    #[test]
    fn pair_rows_have_no_hopping() {
        // the TLS-pair row at l = 1 only sees the on-site block
        let s = solver(-0.3, 0.4);
        let e = 0.5 * (gap(&s, 1).lower + gap(&s, 1).upper);
        let roots = s.roots(e).unwrap();
        let m = matching_matrix(s.operator(), &roots, e);
        assert_eq!(m[(7, 3)], C64::from(0.0));
        assert_eq!(m[(7, 4)], C64::from(0.0));
    }

    #[test]
    fn profile_decays_at_slowest_rate() {
        let s = solver(-0.2, 2.0);
        for b in find_all_bound_states(&s).unwrap() {
            let far = ((25.0 / b.kappa) as i64).clamp(4, 40);
            let near = (far / 4).max(2);
            let fit = (b.wavefunction(near).norm() / b.wavefunction(far).norm()).ln() / (far - near) as f64;
            assert!((fit - b.kappa).abs() < 0.05 * b.kappa, "{fit} vs {}", b.kappa);
        }
    }

    #[test]
    fn rayleigh_quotient_reproduces_energy() {
        let s = solver(-0.5, -1.0);
        let states = find_all_bound_states(&s).unwrap();
        assert!(!states.is_empty());
        for b in states {
            let r = rayleigh_quotient(&b, s.operator());
            assert!((r - b.energy).abs() < 1e-9, "{r} vs {}", b.energy);
        }
    }

    #[test]
    fn weak_hopping_approaches_jc_doublet() {
        let s = solver(-0.01, 0.0);
        let mut energies: Vec<f64> = find_all_bound_states(&s).unwrap().iter().map(|b| b.energy).collect();
        energies.sort_by(f64::total_cmp);
        assert_eq!(energies.len(), 2);
        let r2 = 2f64.sqrt();
        assert!((energies[0] + r2).abs() < 1e-3 && (energies[1] - r2).abs() < 1e-3);
    }
}
