//! Model parameters and the effective relative-motion problem.
//!
//! Energies are measured in units of the photon–TLS coupling `g` (the default
//! constructors fix `g = 1`). Spinors are ordered `(p, d+, d-, t)`: photon pair,
//! symmetric and antisymmetric photon–TLS combinations, TLS pair.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::ops::RangeInclusive;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Couplings of the cavity array and the total two-polariton momentum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelParams {
    /// Photon–TLS coupling; the energy unit.
    pub g: f64,
    /// Inter-cavity photon hopping.
    pub xi: f64,
    /// TLS–cavity detuning.
    pub delta: f64,
    /// Total momentum, canonicalized to `[-2pi, 2pi)`.
    pub total_momentum: f64,
}

impl ModelParams {
    /// Parameters in units of `g` (so `g = 1`).
    pub fn new(xi: f64, delta: f64, total_momentum: f64) -> Result<Self> {
        Self::with_coupling(1.0, xi, delta, total_momentum)
    }

    pub fn with_coupling(g: f64, xi: f64, delta: f64, total_momentum: f64) -> Result<Self> {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::InvalidParams(format!("coupling g must be positive, got {g}")));
        }
        for (name, v) in [("xi", xi), ("delta", delta), ("K", total_momentum)] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(Self {
            g,
            xi,
            delta,
            total_momentum: canonical_total_momentum(total_momentum),
        })
    }

    pub fn half_k(&self) -> f64 {
        0.5 * self.total_momentum
    }
}

/// Maps `k` into `[-2pi, 2pi)`.
pub fn canonical_total_momentum(k: f64) -> f64 {
    let period = 4.0 * PI;
    let mut r = (k + 2.0 * PI).rem_euclid(period) - 2.0 * PI;
    if r >= 2.0 * PI {
        r -= period;
    }
    r
}

/// Four-component relative-motion amplitude `(p, d+, d-, t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spinor(pub Vector4<C64>);

impl Spinor {
    pub fn new(p: C64, d_plus: C64, d_minus: C64, t: C64) -> Self {
        Self(Vector4::new(p, d_plus, d_minus, t))
    }

    pub fn zero() -> Self {
        Self(Vector4::zeros())
    }

    pub fn p(&self) -> C64 {
        self.0[0]
    }

    pub fn d_plus(&self) -> C64 {
        self.0[1]
    }

    pub fn d_minus(&self) -> C64 {
        self.0[2]
    }

    pub fn t(&self) -> C64 {
        self.0[3]
    }

    /// Applies the exchange reflection `diag(1, 1, -1, 1)`.
    pub fn reflect(&self) -> Self {
        let mut v = self.0;
        v[2] = -v[2];
        Self(v)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl From<Vector4<C64>> for Spinor {
    fn from(v: Vector4<C64>) -> Self {
        Self(v)
    }
}

/// The exchange reflection as a matrix.
pub fn reflection() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, -1.0, 1.0))
}

/// On-site, hopping-symmetric and hopping-antisymmetric blocks of the
/// relative-motion operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochMatrices {
    pub a: Matrix4<f64>,
    pub b: Matrix4<f64>,
    pub c: Matrix4<f64>,
}

pub fn build_bloch_matrices(params: &ModelParams) -> BlochMatrices {
    let g = params.g;
    let d = params.delta;
    let s = SQRT_2 * g;
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, s,   0.0, 0.0,
        s,   d,   0.0, s,
        0.0, 0.0, d,   0.0,
        0.0, s,   0.0, 2.0 * d,
    );
    let hop = 2.0 * params.xi * params.half_k().cos();
    let b = Matrix4::from_diagonal(&Vector4::new(2.0 * hop, hop, hop, 0.0));
    let mut c = Matrix4::zeros();
    let twist = -2.0 * params.xi * params.half_k().sin();
    c[(1, 2)] = twist;
    c[(2, 1)] = twist;
    BlochMatrices { a, b, c }
}

/// Contact interaction acting at relative site 0 only.
pub fn interaction_matrix(params: &ModelParams) -> Matrix4<f64> {
    let mut v = Matrix4::zeros();
    v[(1, 3)] = -SQRT_2 * params.g;
    v[(3, 1)] = -SQRT_2 * params.g;
    v
}

/// Block-tridiagonal relative-motion operator: on-site block, the two
/// hopping blocks and the contact term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeHamiltonian {
    pub onsite: Matrix4<C64>,
    /// Multiplies `beta[l-1]` in the equation for site `l`.
    pub from_left: Matrix4<C64>,
    /// Multiplies `beta[l+1]` in the equation for site `l`.
    pub from_right: Matrix4<C64>,
    pub contact: Matrix4<C64>,
    bloch: BlochMatrices,
}

impl RelativeHamiltonian {
    pub fn new(params: &ModelParams) -> Self {
        Self::from_parts(build_bloch_matrices(params), interaction_matrix(params))
    }

    pub fn from_parts(bloch: BlochMatrices, interaction: Matrix4<f64>) -> Self {
        let b = bloch.b.map(C64::from);
        let ic = bloch.c.map(|x| I * x);
        Self {
            onsite: bloch.a.map(C64::from),
            from_left: (b + ic) * C64::from(0.5),
            from_right: (b - ic) * C64::from(0.5),
            contact: interaction.map(C64::from),
            bloch,
        }
    }

    pub fn bloch(&self) -> &BlochMatrices {
        &self.bloch
    }

    /// `A + B cos q + C sin q` for complex `q`.
    pub fn bloch_at(&self, q: C64) -> Matrix4<C64> {
        let (cq, sq) = (q.cos(), q.sin());
        self.bloch.a.map(C64::from) + self.bloch.b.map(|x| x * cq) + self.bloch.c.map(|x| x * sq)
    }

    /// Derivative of the Bloch matrix with respect to `q`.
    pub fn bloch_derivative(&self, q: C64) -> Matrix4<C64> {
        let (cq, sq) = (q.cos(), q.sin());
        self.bloch.b.map(|x| -x * sq) + self.bloch.c.map(|x| x * cq)
    }

    /// Left-hand side of the site equation at `l` minus `energy * beta[l]`.
    pub fn site_defect(
        &self,
        l: i64,
        left: &Vector4<C64>,
        centre: &Vector4<C64>,
        right: &Vector4<C64>,
        energy: f64,
    ) -> Vector4<C64> {
        let mut r = self.onsite * centre + self.from_left * left + self.from_right * right
            - centre * C64::from(energy);
        if l == 0 {
            r += self.contact * centre;
        }
        r
    }

    /// Hermiticity of the block-tridiagonal operator: the two hopping blocks
    /// must be adjoints and the on-site and contact blocks self-adjoint.
    /// Returns the largest violation.
    pub fn hermiticity_defect(&self) -> f64 {
        let hop = (self.from_left - self.from_right.adjoint()).camax();
        let onsite = (self.onsite - self.onsite.adjoint()).camax();
        let contact = (self.contact - self.contact.adjoint()).camax();
        hop.max(onsite).max(contact)
    }
}

/// Sparse map from relative site to spinor.
#[derive(Clone, Debug, Default)]
pub struct SpinorField {
    sites: BTreeMap<i64, Spinor>,
}

impl SpinorField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_fn(sites: RangeInclusive<i64>, mut f: impl FnMut(i64) -> Spinor) -> Self {
        Self {
            sites: sites.map(|l| (l, f(l))).collect(),
        }
    }

    pub fn insert(&mut self, l: i64, s: Spinor) {
        self.sites.insert(l, s);
    }

    pub fn get(&self, l: i64) -> Option<&Spinor> {
        self.sites.get(&l)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &Spinor)> {
        self.sites.iter().map(|(l, s)| (*l, s))
    }

    fn require(&self, l: i64) -> Result<&Spinor> {
        self.sites.get(&l).ok_or(Error::MissingSite(l))
    }
}

/// Norm of the site-equation defect for every `l` in `sites`. The field
/// must also cover one extra site on each side.
pub fn site_residual(
    params: &ModelParams,
    field: &SpinorField,
    energy: f64,
    sites: RangeInclusive<i64>,
) -> Result<Vec<f64>> {
    site_residual_with(&RelativeHamiltonian::new(params), field, energy, sites)
}

pub fn site_residual_with(
    op: &RelativeHamiltonian,
    field: &SpinorField,
    energy: f64,
    sites: RangeInclusive<i64>,
) -> Result<Vec<f64>> {
    sites
        .map(|l| {
            let left = field.require(l - 1)?;
            let centre = field.require(l)?;
            let right = field.require(l + 1)?;
            Ok(op.site_defect(l, &left.0, &centre.0, &right.0, energy).norm())
        })
        .collect()
}

/// Kind of single polariton: upper (`A`) or lower (`B`) branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum PolaritonKind {
    A,
    B,
}

impl PolaritonKind {
    pub fn sign(self) -> f64 {
        match self {
            PolaritonKind::A => 1.0,
            PolaritonKind::B => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinglePolaritonMode {
    pub kind: PolaritonKind,
    pub k: f64,
    pub energy: f64,
    /// TLS-excitation amplitude.
    pub eta: C64,
    /// Photon amplitude.
    pub eta_prime: C64,
}

/// Eigenmode of the single-excitation Bloch matrix `[[delta, g], [g, 2 xi cos k]]`
/// in the (TLS, photon) basis.
pub fn single_polariton_mode(kind: PolaritonKind, k: f64, params: &ModelParams) -> SinglePolaritonMode {
    let photon = 2.0 * params.xi * k.cos();
    let x = params.delta - photon;
    let root = (x * x + 4.0 * params.g * params.g).sqrt();
    let energy = 0.5 * (photon + params.delta + kind.sign() * root);
    // (x ± root, 2g) is never the zero vector since root >= 2g > 0.
    let tls = x + kind.sign() * root;
    let ph = 2.0 * params.g;
    let n = (tls * tls + ph * ph).sqrt();
    SinglePolaritonMode {
        kind,
        k,
        energy,
        eta: C64::from(tls / n),
        eta_prime: C64::from(ph / n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(xi: f64, delta: f64, k: f64) -> ModelParams {
        ModelParams::new(xi, delta, k).unwrap()
    }

    #[test]
    fn rejects_degenerate_coupling() {
        assert!(ModelParams::with_coupling(0.0, 0.1, 0.0, 0.0).is_err());
        assert!(ModelParams::with_coupling(-1.0, 0.1, 0.0, 0.0).is_err());
        assert!(ModelParams::new(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn total_momentum_is_canonical() {
        for k in [-7.0, -2.0 * PI, 0.0, 2.0 * PI, 3.0 * PI, 13.0] {
            let c = canonical_total_momentum(k);
            assert!((-2.0 * PI..2.0 * PI).contains(&c), "{k} -> {c}");
            let wrapped = (c - k) / (4.0 * PI);
            assert!((wrapped - wrapped.round()).abs() < 1e-12);
        }
        assert_eq!(canonical_total_momentum(2.0 * PI), -2.0 * PI);
    }

    #[test]
    fn bloch_matrices_at_zero_momentum() {
        let m = build_bloch_matrices(&params(-0.2, 0.5, 0.0));
        let expected_b = [-0.8, -0.4, -0.4, 0.0];
        for i in 0..4 {
            assert!((m.b[(i, i)] - expected_b[i]).abs() < 1e-15);
        }
        assert_eq!(m.c, Matrix4::zeros());
        assert_eq!(m.a[(0, 1)], SQRT_2);
        assert_eq!(m.a[(3, 3)], 1.0);
    }

    #[test]
    fn bloch_matrices_at_pi() {
        let m = build_bloch_matrices(&params(-0.2, 0.0, PI));
        assert!(m.b.amax() < 1e-15);
        assert!((m.c[(1, 2)] - 0.4).abs() < 1e-15);
        assert!((m.c[(2, 1)] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn interaction_is_linear_in_g() {
        let v = interaction_matrix(&ModelParams::with_coupling(2.0, 0.1, 0.0, 0.0).unwrap());
        assert!((v[(1, 3)] + 2.0 * SQRT_2).abs() < 1e-15);
        assert_eq!(v, v.transpose());
        let v1 = interaction_matrix(&params(0.1, 0.0, 0.0));
        assert_eq!(v1[(1, 3)], -SQRT_2);
        assert_eq!(v1.iter().filter(|x| **x != 0.0).count(), 2);
    }

    #[test]
    fn single_polariton_dispersion() {
        let p = params(-0.2, 0.0, 0.0);
        let a = single_polariton_mode(PolaritonKind::A, PI / 2.0, &p);
        let b = single_polariton_mode(PolaritonKind::B, PI / 2.0, &p);
        assert!((a.energy - 1.0).abs() < 1e-15);
        assert!((b.energy + 1.0).abs() < 1e-15);
        let a0 = single_polariton_mode(PolaritonKind::A, 0.0, &p);
        assert!((a0.energy - 0.819_803_902_718_557).abs() < 1e-12);
        // eigenvector of [[delta, g], [g, 2 xi cos k]]
        let photon = 2.0 * p.xi;
        let r_tls = p.delta * a0.eta + p.g * a0.eta_prime - a0.eta * a0.energy;
        let r_ph = p.g * a0.eta + photon * a0.eta_prime - a0.eta_prime * a0.energy;
        assert!(r_tls.norm() < 1e-14 && r_ph.norm() < 1e-14);
        assert!((a0.eta.norm_sqr() + a0.eta_prime.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn missing_neighbour_is_reported() {
        let p = params(-0.2, 0.0, 0.0);
        let field = SpinorField::from_fn(0..=3, |_| Spinor::zero());
        assert_eq!(site_residual(&p, &field, 0.0, 0..=2), Err(Error::MissingSite(-1)));
        assert!(site_residual(&p, &field, 0.0, 1..=2).is_ok());
    }

    #[test]
    fn generic_field_is_not_a_solution() {
        let p = params(-0.3, 0.7, 0.4);
        let field = SpinorField::from_fn(-5..=5, |l| {
            let x = l as f64;
            Spinor::new(
                C64::new(x.sin(), 0.3),
                C64::new(1.0, x.cos()),
                C64::new(0.2 * x, -0.5),
                C64::new(-0.7, 0.1 * x * x),
            )
        });
        let r = site_residual(&p, &field, 0.3, -4..=4).unwrap();
        assert!(r.iter().all(|x| *x > 1e-2));
    }

    #[test]
    fn relative_operator_is_hermitian() {
        let op = RelativeHamiltonian::new(&params(0.37, -1.2, 2.1));
        assert!(op.hermiticity_defect() < 1e-15);
    }
}
