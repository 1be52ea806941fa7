//! Two-polariton scattering at fixed total momentum.
//!
//! For `l >= 1` the wavefunction is the symmetrized incident wave plus one
//! term per admissible channel, `f_j e^{iλ_j l} F_j`; the contact site carries
//! `(s_p, s_+, 0, 0)` and negative sites follow from the exchange reflection.
//! The five unknowns are fixed by the site equations at `l = 0` and `l = 1`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector4};
use serde::Serialize;

use crate::bands::{Branch, FreeState};
use crate::channels::{ChannelRoot, ChannelSolver, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::model::{reflection, ModelParams, RelativeHamiltonian, Spinor, SpinorField, C64};

/// Sites `|l| <= CHECK_SITES` are verified after every scattering solve.
pub const CHECK_SITES: i64 = 50;

/// Channel expansion `Σ_j c_j z_j^{l-1} F_j` for `l >= 1`.
///
/// Coefficients refer to site 1 so that strongly evanescent channels
/// (`|z| << 1`) do not produce tiny matrix columns.
#[derive(Clone, Debug)]
pub struct ChannelExpansion {
    pub roots: Vec<ChannelRoot>,
    pub site_one: Vec<C64>,
}

impl ChannelExpansion {
    pub fn at(&self, l: i64) -> Vector4<C64> {
        debug_assert!(l >= 1);
        self.roots
            .iter()
            .zip(&self.site_one)
            .map(|(r, c)| r.spinor.0 * (c * r.z.powi((l - 1) as i32)))
            .fold(Vector4::zeros(), |a, b| a + b)
    }

    /// Coefficient of `e^{iλ_j l} F_j`.
    pub fn amplitude(&self, j: usize) -> C64 {
        self.site_one[j] / self.roots[j].z
    }
}

/// Unknowns of the matching problem: channel coefficients at site 1 followed
/// by the free components of the contact spinor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum ContactAnsatz {
    /// `(s_p, s_+, 0, 0)`.
    Physical,
    /// `(s_p, s_+, 0, s_t)`; only meaningful without the contact interaction.
    WithPairComponent,
}

impl ContactAnsatz {
    fn components(self) -> &'static [usize] {
        match self {
            ContactAnsatz::Physical => &[0, 1],
            ContactAnsatz::WithPairComponent => &[0, 1, 3],
        }
    }
}

/// Stacked site defects at `l = 0` and `l = 1` for a given unknown vector,
/// with an optional inhomogeneous (incident) part.
fn matching_defect(
    op: &RelativeHamiltonian,
    roots: &[ChannelRoot],
    energy: f64,
    ansatz: ContactAnsatz,
    x: &DVector<C64>,
    incident: Option<&FreeState>,
) -> DVector<C64> {
    let n = roots.len();
    let expansion = ChannelExpansion {
        roots: roots.to_vec(),
        site_one: x.rows(0, n).iter().copied().collect(),
    };
    let mut contact = Vector4::zeros();
    for (k, &c) in ansatz.components().iter().enumerate() {
        contact[c] = x[n + k];
    }
    let beta = |l: i64| -> Vector4<C64> {
        let free = incident.map(|s| s.at(l).0).unwrap_or_else(Vector4::zeros);
        free + expansion.at(l)
    };
    let t = reflection().map(C64::from);
    let b1 = beta(1);
    let b2 = beta(2);
    let d0 = op.site_defect(0, &(t * b1), &contact, &b1, energy);
    let d1 = op.site_defect(1, &contact, &b1, &b2, energy);
    DVector::from_iterator(8, d0.iter().chain(d1.iter()).copied())
}

/// Affine matching system `M x = rhs` assembled column by column.
pub(crate) fn matching_system(
    op: &RelativeHamiltonian,
    roots: &[ChannelRoot],
    energy: f64,
    ansatz: ContactAnsatz,
    incident: Option<&FreeState>,
) -> (DMatrix<C64>, DVector<C64>) {
    let unknowns = roots.len() + ansatz.components().len();
    let zero = DVector::zeros(unknowns);
    let base = matching_defect(op, roots, energy, ansatz, &zero, incident);
    let mut m = DMatrix::zeros(8, unknowns);
    for k in 0..unknowns {
        let mut e = zero.clone();
        e[k] = C64::from(1.0);
        let col = matching_defect(op, roots, energy, ansatz, &e, incident) - &base;
        m.set_column(k, &col);
    }
    (m, -base)
}

/// Homogeneous 8x5 matching matrix (no incident wave).
pub fn matching_matrix(op: &RelativeHamiltonian, roots: &[ChannelRoot], energy: f64) -> DMatrix<C64> {
    matching_system(op, roots, energy, ContactAnsatz::Physical, None).0
}

#[derive(Clone, Debug, Serialize)]
pub struct ScatteringSolution {
    pub incident: Branch,
    pub q: f64,
    pub energy: f64,
    #[serde(skip)]
    pub roots: Vec<ChannelRoot>,
    /// Outgoing coefficients `f(γ_j <- α, q)`, ordered like `roots`.
    #[serde(skip)]
    pub f: Vec<C64>,
    #[serde(skip)]
    pub s_p: C64,
    #[serde(skip)]
    pub s_plus: C64,
    pub matching_residual: f64,
    pub residual_max: f64,
    pub current_max: f64,
    #[serde(skip)]
    free: FreeState,
    #[serde(skip)]
    expansion: ChannelExpansion,
}

impl ScatteringSolution {
    /// `β_l` of the scattering state.
    pub fn wavefunction(&self, l: i64) -> Spinor {
        match l {
            0 => Spinor::new(self.s_p, self.s_plus, C64::from(0.0), C64::from(0.0)),
            l if l > 0 => Spinor(self.free.at(l).0 + self.expansion.at(l)),
            l => self.wavefunction(-l).reflect(),
        }
    }

    pub fn field(&self, reach: i64) -> SpinorField {
        SpinorField::from_fn(-reach..=reach, |l| self.wavefunction(l))
    }

    /// Coefficients of the open channels carrying `branch`.
    pub fn open_coefficient(&self, branch: Branch) -> Option<C64> {
        self.roots
            .iter()
            .zip(&self.f)
            .find(|(r, _)| r.open && r.branch == branch)
            .map(|(_, f)| *f)
    }

    pub fn incident_state(&self) -> &FreeState {
        &self.free
    }
}

pub fn scattering_wavefunction(sol: &ScatteringSolution, l: i64) -> Spinor {
    sol.wavefunction(l)
}

/// Probability flux from site `l` to `l + 1`,
/// `J_l = -2 Im[β_l† (B - iC)/2 β_{l+1}]`; positive for a right-mover.
pub fn probability_current(op: &RelativeHamiltonian, field: &SpinorField, l: i64) -> Result<f64> {
    let a = field.get(l).ok_or(Error::MissingSite(l))?;
    let b = field.get(l + 1).ok_or(Error::MissingSite(l + 1))?;
    Ok(-2.0 * a.0.dotc(&(op.from_right * b.0)).im)
}

pub fn solve_scattering(branch: Branch, q: f64, params: &ModelParams) -> Result<ScatteringSolution> {
    let solver = ChannelSolver::new(params, Tolerances::default());
    solve_scattering_with(&solver, branch, q)
}

/// Scattering solve reusing the band data cached in `solver`.
pub fn solve_scattering_with(solver: &ChannelSolver, branch: Branch, q: f64) -> Result<ScatteringSolution> {
    if !(q > 0.0 && q < PI) {
        return Err(Error::MomentumOutOfRange(q));
    }
    let params = solver.params();
    let op = solver.operator();
    let tol = solver.tolerances();
    let free = FreeState::new(branch, q, params)?;
    let energy = free.energy;
    let roots = solver.roots(energy)?;

    let (m, rhs) = matching_system(op, &roots, energy, ContactAnsatz::Physical, Some(&free));
    let x = least_squares(&m, &rhs).ok_or_else(|| Error::Conditioning("matching solve failed".into()))?;
    let matching_residual = (&m * &x - &rhs).norm();
    let threshold = 1e-10 * (m.norm() * x.norm() + rhs.norm());
    if matching_residual > threshold {
        return Err(Error::MatchingFailure {
            residual: matching_residual,
            threshold,
        });
    }

    let expansion = ChannelExpansion {
        site_one: x.rows(0, 3).iter().copied().collect(),
        roots: roots.clone(),
    };
    let f = (0..3).map(|j| expansion.amplitude(j)).collect();
    let mut sol = ScatteringSolution {
        incident: branch,
        q,
        energy,
        roots,
        f,
        s_p: x[3],
        s_plus: x[4],
        matching_residual,
        residual_max: f64::NAN,
        current_max: f64::NAN,
        free,
        expansion,
    };

    let field = sol.field(CHECK_SITES + 1);
    let residual_max = crate::model::site_residual_with(op, &field, energy, -CHECK_SITES..=CHECK_SITES)?
        .into_iter()
        .fold(0.0, f64::max);
    let mut current_max: f64 = 0.0;
    for l in -CHECK_SITES..=CHECK_SITES {
        current_max = current_max.max(probability_current(op, &field, l)?.abs());
    }
    sol.residual_max = residual_max;
    sol.current_max = current_max;
    if residual_max > tol.residual * params.g {
        return Err(Error::Certificate(format!("site residual {residual_max:.3e}")));
    }
    if current_max > tol.current {
        return Err(Error::Certificate(format!("probability current {current_max:.3e}")));
    }
    Ok(sol)
}

/// Matching with the contact interaction removed and the pair component of
/// the contact spinor left free. The exact answer is the incident wave
/// itself; used to validate the assembly of the matching system.
pub fn free_matching_check(branch: Branch, q: f64, params: &ModelParams) -> Result<(Vec<C64>, Vector4<C64>)> {
    let solver = ChannelSolver::new(params, Tolerances::default());
    let bl = *solver.operator().bloch();
    let op = RelativeHamiltonian::from_parts(bl, nalgebra::Matrix4::zeros());
    let free = FreeState::new(branch, q, params)?;
    let roots = solver.roots(free.energy)?;
    let (m, rhs) = matching_system(&op, &roots, free.energy, ContactAnsatz::WithPairComponent, Some(&free));
    let x = least_squares(&m, &rhs).ok_or_else(|| Error::Conditioning("matching solve failed".into()))?;
    let f = (0..3).map(|j| x[j] / roots[j].z).collect();
    let contact = Vector4::new(x[3], x[4], C64::from(0.0), x[5]);
    Ok((f, contact))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(xi: f64, delta: f64, k: f64) -> ModelParams {
        ModelParams::new(xi, delta, k).unwrap()
    }

    #[test]
    fn free_problem_reproduces_incident_wave() {
        for &(xi, delta, k, branch, q) in &[
            (-0.2, 0.0, 0.0, Branch::AA, 1.0),
            (-0.3, 0.5, 1.1, Branch::BB, 2.2),
            (0.4, -1.0, -0.7, Branch::AB, 0.6),
        ] {
            let p = params(xi, delta, k);
            let (f, contact) = free_matching_check(branch, q, &p).unwrap();
            let expected = FreeState::new(branch, q, &p).unwrap().at(0).0;
            for fj in f {
                assert!(fj.norm() < 1e-10, "{fj}");
            }
            assert!((contact - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn out_of_range_momentum_is_rejected() {
        let p = params(-0.2, 0.0, 0.0);
        assert_eq!(solve_scattering(Branch::AA, 0.0, &p).unwrap_err(), Error::MomentumOutOfRange(0.0));
        assert!(solve_scattering(Branch::AA, PI, &p).is_err());
    }

    #[test]
    fn solution_is_certified_and_symmetric() {
        let p = params(-0.2, 0.7, 0.0);
        let sol = solve_scattering(Branch::AA, 1.3, &p).unwrap();
        assert!(sol.residual_max < 1e-8 && sol.current_max < 1e-8);
        let b0 = sol.wavefunction(0);
        assert_eq!(b0.d_minus(), C64::from(0.0));
        assert_eq!(b0.t(), C64::from(0.0));
        for l in [1, 4, 17] {
            let a = sol.wavefunction(-l).0;
            let b = sol.wavefunction(l).reflect().0;
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn exchange_partners_scatter_identically_at_zero_momentum() {
        let p = params(-0.2, 1.5, 0.0);
        for q in [0.4, 1.2, 2.5] {
            let sol = solve_scattering(Branch::AB, q, &p).unwrap();
            let ab = sol.open_coefficient(Branch::AB).unwrap();
            let ba = sol.open_coefficient(Branch::BA).unwrap();
            assert!((ab - ba).norm() < 1e-8, "{ab} vs {ba}");
        }
    }

    #[test]
    fn closed_channel_tail_decays() {
        let p = params(-0.2, 0.0, 0.0);
        let sol = solve_scattering(Branch::AA, 1.0, &p).unwrap();
        let kappa = sol
            .roots
            .iter()
            .filter(|r| !r.open)
            .map(|r| r.lambda.im)
            .fold(f64::INFINITY, f64::min);
        let tail = |l: i64| {
            let mut v = sol.wavefunction(l).0 - sol.incident_state().at(l).0;
            for (r, f) in sol.roots.iter().zip(&sol.f) {
                if r.open {
                    v -= r.spinor.0 * (f * r.phase(l));
                }
            }
            v.norm()
        };
        // stay well above round-off
        let far = ((20.0 / kappa) as i64).clamp(4, 40);
        let near = far / 2;
        let rate = (tail(near) / tail(far)).ln() / (far - near) as f64;
        assert!((rate - kappa).abs() < 0.05 * kappa, "{rate} vs {kappa}");
    }

    #[test]
    fn standing_wave_carries_no_current() {
        let p = params(-0.35, 0.2, 0.9);
        let free = FreeState::new(Branch::AA, 0.8, &p).unwrap();
        let field = SpinorField::from_fn(-5..=5, |l| free.at(l));
        let op = RelativeHamiltonian::new(&p);
        for l in -5..5 {
            assert!(probability_current(&op, &field, l).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn travelling_wave_current_is_group_velocity() {
        let p = params(-0.35, 0.2, 0.9);
        let solver = ChannelSolver::new(&p, Tolerances::default());
        let e = crate::bands::branch_energy(Branch::AA, 0.8, &p);
        let roots = solver.roots(e).unwrap();
        let r = roots.iter().find(|r| r.open).unwrap();
        let field = SpinorField::from_fn(-3..=3, |l| Spinor(r.spinor.0 * r.phase(l)));
        let op = RelativeHamiltonian::new(&p);
        for l in -3..3 {
            let j = probability_current(&op, &field, l).unwrap();
            assert!((j - r.group_velocity.unwrap()).abs() < 1e-12);
        }
    }
}
