//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

use crate::model::C64;

/// Singular values of a 4x4 complex matrix in ascending order together with
/// the matching right singular vectors.
pub fn right_singular_ascending(m: &Matrix4<C64>) -> Vec<(f64, Vector4<C64>)> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut pairs: Vec<(f64, Vector4<C64>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, v_t.row(i).adjoint()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Singular values of a dense complex matrix, descending.
pub fn singular_values_desc(m: &DMatrix<C64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Smallest singular value with its right singular vector, and the largest
/// singular value.
pub fn smallest_right_singular(m: &DMatrix<C64>) -> (f64, DVector<C64>, Vec<f64>) {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (imin, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, s)| (i, *s))
        .expect("non-empty matrix");
    let mut all: Vec<f64> = svd.singular_values.iter().copied().collect();
    all.sort_by(|a, b| b.total_cmp(a));
    (smin, v_t.row(imin).adjoint(), all)
}

/// Least-squares solution of `m x = rhs` through the SVD.
pub fn least_squares(m: &DMatrix<C64>, rhs: &DVector<C64>) -> Option<DVector<C64>> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(rhs, smax * 1e-14).ok()
}

/// Unit norm, with the photon-pair component made real and positive. When
/// that component is negligible the largest-magnitude component is used
/// instead.
pub fn fix_phase(v: &Vector4<C64>) -> Vector4<C64> {
    let n = v.norm();
    if n == 0.0 {
        return *v;
    }
    let u = v / C64::from(n);
    let pivot = if u[0].norm() > 1e-8 {
        0
    } else {
        u.icamax()
    };
    let phase = u[pivot] / C64::from(u[pivot].norm());
    u / phase
}

/// Product of the Euclidean norms of the rows; the natural scale for a
/// determinant.
pub fn row_norm_product(m: &Matrix4<C64>) -> f64 {
    (0..4).map(|i| m.row(i).norm()).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_convention_makes_photon_pair_positive() {
        let v = Vector4::new(
            C64::new(0.0, -2.0),
            C64::new(1.0, 1.0),
            C64::new(0.0, 0.0),
            C64::new(-1.0, 0.0),
        );
        let u = fix_phase(&v);
        assert!((u.norm() - 1.0).abs() < 1e-15);
        assert!(u[0].im.abs() < 1e-15 && u[0].re > 0.0);
    }

    #[test]
    fn phase_convention_falls_back_to_largest() {
        let v = Vector4::new(
            C64::new(0.0, 0.0),
            C64::new(0.1, 0.0),
            C64::new(0.0, -3.0),
            C64::new(1.0, 0.0),
        );
        let u = fix_phase(&v);
        assert!(u[2].im.abs() < 1e-15 && u[2].re > 0.0);
    }

    #[test]
    fn singular_pairs_are_sorted() {
        let m = Matrix4::from_diagonal(&Vector4::new(3.0, 1e-9, 2.0, 5.0)).map(C64::from);
        let p = right_singular_ascending(&m);
        assert!((p[0].0 - 1e-9).abs() < 1e-20);
        assert!((p[0].1[1].norm() - 1.0).abs() < 1e-12);
        assert!(p.windows(2).all(|w| w[0].0 <= w[1].0));
    }
}
