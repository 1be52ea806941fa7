//! Channel momenta at fixed energy.
//!
//! Because the exchange reflection maps `A + B cos λ + C sin λ` to its value
//! at `-λ`, the channel determinant is an even function of `λ` and hence a real
//! cubic in `w = cos λ`. Each cubic root gives a reciprocal pair
//! `z = e^{±iλ}`; one member per pair is retained: the decaying one for closed
//! channels, the outgoing one (positive group velocity) for open channels.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Matrix4, SymmetricEigen, Vector4};
use serde::Serialize;

use crate::bands::{band_structure, branch_energy_complex, branch_point_with, BandStructure, Branch};
use crate::error::{Error, Result};
use crate::linalg::{fix_phase, right_singular_ascending, row_norm_product};
use crate::model::{reflection, ModelParams, RelativeHamiltonian, Spinor, C64, I};

/// Numerical tolerances of the channel, scattering and bound-state solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Threshold on `||z| - 1|` for a channel to count as open.
    pub open: f64,
    /// Minimum distance (in units of `g`) to any zero-velocity energy.
    pub edge: f64,
    /// Relative agreement between analytic and finite-difference velocities.
    pub velocity: f64,
    /// Energy agreement for assigning a branch label.
    pub label: f64,
    /// Site-residual certificate for scattering and bound solutions.
    pub residual: f64,
    /// Probability-current certificate.
    pub current: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            open: 1e-8,
            edge: 1e-6,
            velocity: 1e-6,
            label: 1e-8,
            residual: 1e-8,
            current: 1e-8,
        }
    }
}

/// One admissible channel momentum at a given energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelRoot {
    pub lambda: C64,
    pub z: C64,
    pub branch: Branch,
    /// Set when the label came from a complex momentum, where the square-root
    /// sheet is a convention.
    pub conventional_label: bool,
    pub open: bool,
    /// `dE/dλ`; `Some` only for open channels.
    pub group_velocity: Option<f64>,
    /// Unit norm, photon-pair component real and positive.
    pub spinor: Spinor,
}

impl ChannelRoot {
    /// `e^{iλl}` for integer `l`.
    pub fn phase(&self, l: i64) -> C64 {
        if self.open {
            (I * self.lambda.re * l as f64).exp()
        } else {
            self.z.powi(l as i32)
        }
    }

    pub fn decay_rate(&self) -> f64 {
        self.lambda.im
    }
}

/// Coefficients (ascending powers of `z`) of `z^3 det(A + B cos λ + C sin λ - E)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelPolynomial {
    pub coeffs: Vec<C64>,
    pub degree: usize,
}

impl ChannelPolynomial {
    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(C64::from(0.0), |acc, c| acc * z + c)
    }
}

fn poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::from(0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn permutations4() -> Vec<([usize; 4], f64)> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let distinct = (0..4).all(|i| (i + 1..4).all(|j| p[i] != p[j]));
                    if distinct {
                        let inversions = (0..4)
                            .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
                            .filter(|&(i, j)| p[i] > p[j])
                            .count();
                        out.push((p, if inversions % 2 == 0 { 1.0 } else { -1.0 }));
                    }
                }
            }
        }
    }
    out
}

/// Polynomial form of the channel determinant in `z = e^{iλ}`, expanded
/// entry by entry (no sampling).
pub fn channel_polynomial(energy: f64, params: &ModelParams) -> Result<ChannelPolynomial> {
    let op = RelativeHamiltonian::new(params);
    let bl = op.bloch();
    let mut entries = vec![vec![Vec::new(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let shifted = bl.a[(i, j)] - if i == j { energy } else { 0.0 };
            if i < 3 {
                // z (A - E) + (B + iC)/2 + z^2 (B - iC)/2
                let low = 0.5 * (C64::from(bl.b[(i, j)]) + I * bl.c[(i, j)]);
                let high = 0.5 * (C64::from(bl.b[(i, j)]) - I * bl.c[(i, j)]);
                entries[i][j] = vec![low, C64::from(shifted), high];
            } else {
                entries[i][j] = vec![C64::from(shifted)];
            }
        }
    }
    let mut coeffs = vec![C64::from(0.0); 7];
    for (perm, sign) in permutations4() {
        let mut term = vec![C64::from(sign)];
        for (row, &col) in perm.iter().enumerate() {
            term = poly_mul(&term, &entries[row][col]);
        }
        for (k, c) in term.into_iter().enumerate() {
            coeffs[k] += c;
        }
    }
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let reference: f64 = entries
        .iter()
        .map(|row| row.iter().flatten().map(|c| c.norm()).sum::<f64>())
        .product();
    if scale <= 1e-12 * reference {
        return Err(Error::DegenerateParameters);
    }
    let degree = coeffs
        .iter()
        .rposition(|c| c.norm() > 1e-14 * scale)
        .unwrap_or(0);
    Ok(ChannelPolynomial { coeffs, degree })
}

/// Real cubic `Q(w)` (ascending coefficients) with
/// `Q(cos λ) = det(A + B cos λ + C sin λ - E)`.
pub fn dispersion_cubic(energy: f64, params: &ModelParams) -> [f64; 4] {
    let op = RelativeHamiltonian::new(params);
    dispersion_cubic_with(&op, energy)
}

/// Bivariate polynomial in `w = cos λ`, `s = sin λ`, indexed `[w power][s power]`.
type Poly2 = [[f64; 5]; 5];

fn poly2_mul(a: &Poly2, b: &Poly2) -> Poly2 {
    let mut out = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            if a[i][j] == 0.0 {
                continue;
            }
            for k in 0..5 - i {
                for l in 0..5 - j {
                    out[i + k][j + l] += a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// Determinant of the `idx` block of `A + B w + C s - E`, expanded term by
/// term so that small leading coefficients are not lost to cancellation.
fn determinant_poly(op: &RelativeHamiltonian, energy: f64, idx: &[usize]) -> Poly2 {
    let bl = op.bloch();
    let entry = |r: usize, c: usize| {
        let mut e = [[0.0; 5]; 5];
        e[0][0] = bl.a[(r, c)] - if r == c { energy } else { 0.0 };
        e[1][0] = bl.b[(r, c)];
        e[0][1] = bl.c[(r, c)];
        e
    };
    fn permute(k: usize, perm: &mut Vec<usize>, sign: f64, f: &mut dyn FnMut(&[usize], f64)) {
        if k == perm.len() {
            f(perm, sign);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            permute(k + 1, perm, if i == k { sign } else { -sign }, f);
            perm.swap(k, i);
        }
    }
    let n = idx.len();
    let mut total = [[0.0; 5]; 5];
    let mut perm: Vec<usize> = (0..n).collect();
    permute(0, &mut perm, 1.0, &mut |p, sign| {
        let mut term = [[0.0; 5]; 5];
        term[0][0] = sign;
        for (row, &col) in p.iter().enumerate() {
            term = poly2_mul(&term, &entry(idx[row], idx[col]));
        }
        for i in 0..5 {
            for j in 0..5 {
                total[i][j] += term[i][j];
            }
        }
    });
    total
}

/// Substitute `s^2 = 1 - w^2`; odd powers of `s` cancel by reflection symmetry.
fn reduce_sine(p: &Poly2) -> [f64; 5] {
    let mut out = [0.0; 5];
    for i in 0..5 {
        for j in (0..5).step_by(2) {
            // (1 - w^2)^(j/2)
            let expansion: &[f64] = match j {
                0 => &[1.0],
                2 => &[1.0, 0.0, -1.0],
                _ => &[1.0, 0.0, -2.0, 0.0, 1.0],
            };
            for (k, &c) in expansion.iter().enumerate() {
                if i + k < 5 {
                    out[i + k] += p[i][j] * c;
                }
            }
        }
    }
    out
}

fn dispersion_cubic_with(op: &RelativeHamiltonian, energy: f64) -> [f64; 4] {
    let q = reduce_sine(&determinant_poly(op, energy, &[0, 1, 2, 3]));
    [q[0], q[1], q[2], q[3]]
}

/// Quadratic for the block without the antisymmetric component (valid when
/// `C` vanishes).
fn even_block_quadratic(op: &RelativeHamiltonian, energy: f64) -> [f64; 3] {
    let q = reduce_sine(&determinant_poly(op, energy, &[0, 1, 3]));
    [q[0], q[1], q[2]]
}

fn newton_cubic(c: &[f64; 4], mut w: C64) -> C64 {
    for _ in 0..2 {
        let p = ((C64::from(c[3]) * w + c[2]) * w + c[1]) * w + c[0];
        let dp = (C64::from(3.0 * c[3]) * w + 2.0 * c[2]) * w + c[1];
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        w -= step;
    }
    w
}

/// A root of the cubic in `cos λ` with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineRoot {
    pub w: C64,
    pub multiplicity: usize,
}

const MERGE_TOL: f64 = 1e-7;

/// Channel solver for fixed parameters; caches the band layout used for the
/// band-edge guard.
#[derive(Clone, Debug)]
pub struct ChannelSolver {
    params: ModelParams,
    op: RelativeHamiltonian,
    bands: BandStructure,
    tol: Tolerances,
    decoupled: bool,
}

impl ChannelSolver {
    pub fn new(params: &ModelParams, tol: Tolerances) -> Self {
        let op = RelativeHamiltonian::new(params);
        let bl = op.bloch();
        let decoupled = bl.c.amax() <= 1e-14 * bl.b.amax().max(f64::MIN_POSITIVE);
        Self {
            params: *params,
            op,
            bands: band_structure(params, 512),
            tol,
            decoupled,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn operator(&self) -> &RelativeHamiltonian {
        &self.op
    }

    pub fn bands(&self) -> &BandStructure {
        &self.bands
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Roots of the channel cubic in `cos λ`, with exact double roots when the
    /// antisymmetric component decouples.
    pub fn cosine_roots(&self, energy: f64) -> Result<Vec<CosineRoot>> {
        if self.decoupled {
            if let Some(r) = self.decoupled_roots(energy)? {
                return Ok(r);
            }
        }
        let c = dispersion_cubic_with(&self.op, energy);
        let scale = c.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::DegenerateParameters);
        }
        if c[3].abs() <= 1e-13 * scale {
            return Err(Error::ChannelCount { found: if c[2].abs() > 1e-13 * scale { 2 } else { 1 } });
        }
        #[rustfmt::skip]
        let companion = Matrix3::new(
            0.0, 0.0, -c[0] / c[3],
            1.0, 0.0, -c[1] / c[3],
            0.0, 1.0, -c[2] / c[3],
        );
        let raw: Vec<C64> = companion
            .complex_eigenvalues()
            .iter()
            .map(|w| newton_cubic(&c, *w))
            .collect();
        Ok(merge_roots(raw))
    }

    fn decoupled_roots(&self, energy: f64) -> Result<Option<Vec<CosineRoot>>> {
        let bl = self.op.bloch();
        let hop = bl.b[(2, 2)];
        if hop == 0.0 {
            return Err(Error::DegenerateParameters);
        }
        let w_anti = (energy - bl.a[(2, 2)]) / hop;
        let q = even_block_quadratic(&self.op, energy);
        let scale = q.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if q[2].abs() <= 1e-13 * scale {
            return Err(Error::ChannelCount { found: 2 });
        }
        // The antisymmetric root is also a root of the even block.
        let at = (q[2] * w_anti + q[1]) * w_anti + q[0];
        let mag = (q[2].abs() * w_anti * w_anti + q[1].abs() * w_anti.abs() + q[0].abs()).max(f64::MIN_POSITIVE);
        if at.abs() > 1e-9 * mag {
            return Ok(None);
        }
        let other = -q[1] / q[2] - w_anti;
        let mut roots = vec![
            CosineRoot { w: C64::from(w_anti), multiplicity: 2 },
            CosineRoot { w: C64::from(other), multiplicity: 1 },
        ];
        if (other - w_anti).abs() <= MERGE_TOL * (1.0 + w_anti.abs()) {
            roots = vec![CosineRoot { w: C64::from(w_anti), multiplicity: 3 }];
        }
        Ok(Some(roots))
    }

    /// The three admissible channels at `energy`.
    pub fn roots(&self, energy: f64) -> Result<Vec<ChannelRoot>> {
        let distance = self.bands.edge_distance(energy);
        if distance < self.tol.edge * self.params.g {
            return Err(Error::BandEdge { energy, distance });
        }
        let cos_roots = self.cosine_roots(energy)?;
        let found: usize = cos_roots.iter().map(|r| r.multiplicity).sum();
        if found != 3 {
            return Err(Error::ChannelCount { found });
        }
        let mut out = Vec::with_capacity(3);
        for r in cos_roots {
            if r.multiplicity > 2 {
                return Err(Error::Conditioning(format!("triple channel root at cos λ = {}", r.w)));
            }
            self.expand_root(energy, r, &mut out)?;
        }
        if out.len() != 3 {
            return Err(Error::ChannelCount { found: out.len() });
        }
        Ok(out)
    }

    fn expand_root(&self, energy: f64, root: CosineRoot, out: &mut Vec<ChannelRoot>) -> Result<()> {
        let w = root.w;
        let s = (C64::from(1.0) - w * w).sqrt();
        let z1 = w + I * s;
        let z2 = w - I * s;
        let open = (z1.norm() - 1.0).abs() < self.tol.open && (z2.norm() - 1.0).abs() < self.tol.open;

        if !open {
            // z1 z2 = 1; invert the larger root instead of forming the
            // smaller one by cancellation.
            let z = C64::from(1.0) / if z1.norm() > z2.norm() { z1 } else { z2 };
            let lambda = -I * z.ln();
            let vectors = self.channel_vectors(lambda, energy, root.multiplicity)?;
            for (branch, spinor) in vectors {
                out.push(ChannelRoot {
                    lambda,
                    z,
                    branch,
                    conventional_label: true,
                    open: false,
                    group_velocity: None,
                    spinor,
                });
            }
            return Ok(());
        }

        // Open: decide the direction from the velocity operator on the null
        // space at λ0 in (0, pi); components moving left live at -λ0.
        let lambda0 = w.re.clamp(-1.0, 1.0).acos();
        let shifted = self.op.bloch_at(C64::from(lambda0)) - Matrix4::identity() * C64::from(energy);
        let basis = null_basis(&shifted, root.multiplicity, self.params.g)?;
        let deriv = self.op.bloch_derivative(C64::from(lambda0));
        let m = root.multiplicity;
        let vel = DMatrix::from_fn(m, m, |i, j| basis[i].dotc(&(deriv * basis[j])));
        let eig = SymmetricEigen::new(vel);
        let mut forward = 0usize;
        for k in 0..m {
            let v = eig.eigenvalues[k];
            if v.abs() <= self.tol.edge * self.params.g {
                return Err(Error::BandEdge { energy, distance: v.abs() });
            }
            if v > 0.0 {
                forward += 1;
            }
        }
        let mut groups = Vec::new();
        if forward > 0 {
            groups.push((lambda0, forward));
        }
        if forward < m {
            groups.push((-lambda0, m - forward));
        }
        for (lambda, count) in groups {
            let lam = C64::from(lambda);
            let vectors = self.channel_vectors(lam, energy, count)?;
            for (branch, spinor) in vectors {
                let mut root = ChannelRoot {
                    lambda: lam,
                    z: (I * lambda).exp(),
                    branch,
                    conventional_label: false,
                    open: true,
                    group_velocity: None,
                    spinor,
                };
                let v = checked_velocity(&self.op, &root, &self.params, &self.tol)?;
                if v <= 0.0 {
                    return Err(Error::Conditioning(format!(
                        "outgoing channel at λ = {lambda} has velocity {v}"
                    )));
                }
                root.group_velocity = Some(v);
                out.push(root);
            }
        }
        Ok(())
    }

    /// `count` spinors spanning the outgoing part of the null space at
    /// `lambda`. Closed-form branch spinors are preferred; null-space vectors
    /// are the fallback.
    fn channel_vectors(&self, lambda: C64, energy: f64, count: usize) -> Result<Vec<(Branch, Spinor)>> {
        let shifted = self.op.bloch_at(lambda) - Matrix4::identity() * C64::from(energy);
        let scale = shifted.norm().max(self.params.g);
        let e_scale = label_scale(&self.op, lambda, energy, self.params.g);

        let mut candidates: Vec<(f64, Branch)> = Branch::ALL
            .iter()
            .map(|&b| ((branch_energy_complex(b, lambda, &self.params) - energy).norm(), b))
            .filter(|(d, _)| *d <= self.tol.label * e_scale)
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut chosen: Vec<(Branch, Spinor)> = Vec::new();
        for (_, b) in candidates {
            if chosen.len() == count {
                break;
            }
            let Ok(p) = branch_point_with(&self.op, b, lambda, &self.params) else {
                continue;
            };
            let f = Spinor(fix_phase(&p.spinor.0));
            if (shifted * f.0).norm() > 1e-9 * scale {
                continue;
            }
            let independent = chosen.iter().all(|(_, g)| g.0.dotc(&f.0).norm() < 1.0 - 1e-6);
            if independent {
                chosen.push((b, f));
            }
        }
        if chosen.len() == count {
            // Closed forms lose digits to cancellation deep in the evanescent
            // region; project onto the numerical null space, keeping labels
            // and phases.
            let pairs = right_singular_ascending(&shifted);
            return Ok(chosen
                .into_iter()
                .map(|(b, f)| {
                    let projected: Vector4<C64> = pairs.iter().take(count).map(|(_, v)| v * v.dotc(&f.0)).sum();
                    let polished = if projected.norm() > 0.5 { projected.normalize() } else { f.0 };
                    (b, Spinor(fix_phase(&polished)))
                })
                .collect());
        }

        if count > 1 {
            // Accidental degeneracy without distinct closed forms: fall back to
            // an orthonormal null-space basis and remove the mutual overlap.
            let basis = null_basis(&shifted, count, self.params.g)?;
            return basis
                .into_iter()
                .map(|v| {
                    let (b, _) = label_branch_with(&self.params, lambda, energy, &self.tol)?;
                    Ok((b, Spinor(fix_phase(&v))))
                })
                .collect();
        }
        let basis = null_basis(&shifted, 1, self.params.g)?;
        let (b, _) = label_branch_with(&self.params, lambda, energy, &self.tol)?;
        Ok(vec![(b, Spinor(fix_phase(&basis[0])))])
    }
}

/// Orthonormal basis of the `count`-dimensional null space of `shifted`.
fn null_basis(shifted: &Matrix4<C64>, count: usize, g: f64) -> Result<Vec<Vector4<C64>>> {
    let pairs = right_singular_ascending(shifted);
    let scale = shifted.norm().max(g);
    if pairs[count - 1].0 > 1e-7 * scale {
        return Err(Error::Conditioning(format!(
            "null space of dimension {count} not found (singular value {:.3e})",
            pairs[count - 1].0
        )));
    }
    if count < 4 && pairs[count].0 <= 1e-9 * scale {
        return Err(Error::Conditioning(format!("null space larger than {count}")));
    }
    Ok(pairs.into_iter().take(count).map(|p| p.1).collect())
}

fn merge_roots(raw: Vec<C64>) -> Vec<CosineRoot> {
    let mut roots: Vec<CosineRoot> = Vec::new();
    for w in raw {
        let w = if w.im.abs() <= 1e-12 * (1.0 + w.re.abs()) { C64::from(w.re) } else { w };
        if let Some(r) = roots
            .iter_mut()
            .find(|r| (r.w - w).norm() <= MERGE_TOL * (1.0 + w.norm()))
        {
            let n = r.multiplicity as f64;
            r.w = (r.w * n + w) / (n + 1.0);
            if r.w.im.abs() <= MERGE_TOL * (1.0 + r.w.re.abs()) {
                r.w = C64::from(r.w.re);
            }
            r.multiplicity += 1;
        } else {
            roots.push(CosineRoot { w, multiplicity: 1 });
        }
    }
    roots
}

/// Convenience wrapper building a [`ChannelSolver`] for one energy.
pub fn find_channel_roots(energy: f64, params: &ModelParams) -> Result<Vec<ChannelRoot>> {
    ChannelSolver::new(params, Tolerances::default()).roots(energy)
}

/// Branch label whose closed-form energy at `lambda` matches `energy`; the
/// flag marks labels that depend on the square-root sheet (complex `lambda`).
pub fn label_branch(lambda: C64, energy: f64, params: &ModelParams) -> Result<(Branch, bool)> {
    label_branch_with(params, lambda, energy, &Tolerances::default())
}

fn label_branch_with(params: &ModelParams, lambda: C64, energy: f64, tol: &Tolerances) -> Result<(Branch, bool)> {
    let conventional = lambda.im.abs() > tol.open;
    let e_scale = label_scale(&RelativeHamiltonian::new(params), lambda, energy, params.g);
    Branch::ALL
        .iter()
        .map(|&b| ((branch_energy_complex(b, lambda, params) - energy).norm(), b))
        .filter(|(d, _)| *d <= tol.label * e_scale)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, b)| (b, conventional))
        .ok_or(Error::Labeling { re: lambda.re, im: lambda.im })
}

/// Energy scale for label matching: the hopping terms grow like `cosh Im λ`
/// and set the round-off of the closed-form energies.
fn label_scale(op: &RelativeHamiltonian, lambda: C64, energy: f64, g: f64) -> f64 {
    energy.abs().max(g).max(op.bloch_at(lambda).norm())
}

/// Hellmann–Feynman velocity `F†(dM/dλ)F / F†F`.
fn hellmann_feynman(op: &RelativeHamiltonian, lambda: f64, f: &Vector4<C64>) -> f64 {
    let d = op.bloch_derivative(C64::from(lambda));
    (f.dotc(&(d * f)) / f.norm_squared()).re
}

fn finite_difference_velocity(branch: Branch, lambda: f64, params: &ModelParams) -> f64 {
    let h = 1e-3;
    let e = |x: f64| branch_energy_complex(branch, C64::from(x), params).re;
    (e(lambda - 2.0 * h) - 8.0 * e(lambda - h) + 8.0 * e(lambda + h) - e(lambda + 2.0 * h)) / (12.0 * h)
}

fn checked_velocity(op: &RelativeHamiltonian, root: &ChannelRoot, params: &ModelParams, tol: &Tolerances) -> Result<f64> {
    let lambda = root.lambda.re;
    let analytic = hellmann_feynman(op, lambda, &root.spinor.0);
    let numeric = finite_difference_velocity(root.branch, lambda, params);
    let floor = 1e-3 * params.g;
    if (analytic - numeric).abs() > tol.velocity * analytic.abs().max(floor) {
        return Err(Error::VelocityMismatch { analytic, numeric });
    }
    Ok(analytic)
}

/// Group velocity of an open channel, cross-checked against a finite
/// difference of the branch energy.
pub fn group_velocity(root: &ChannelRoot, params: &ModelParams) -> Result<f64> {
    if !root.open {
        return Err(Error::Conditioning("group velocity requested for a closed channel".into()));
    }
    let op = RelativeHamiltonian::new(params);
    checked_velocity(&op, root, params, &Tolerances::default())
}

/// `|det(A + B cos λ + C sin λ - E)|` relative to the product of row norms.
pub fn relative_determinant(params: &ModelParams, lambda: C64, energy: f64) -> f64 {
    let op = RelativeHamiltonian::new(params);
    let m = op.bloch_at(lambda) - Matrix4::identity() * C64::from(energy);
    let scale = row_norm_product(&m);
    m.determinant().norm() / scale.max(f64::MIN_POSITIVE)
}

/// `λ` in `(-pi, pi]` for an open root, mostly for display.
pub fn wrap_angle(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Reflection `T F` of a channel spinor: the spinor of the mirrored channel
/// at `-λ`.
pub fn mirrored_spinor(s: &Spinor) -> Spinor {
    Spinor(reflection().map(C64::from) * s.0)
}
