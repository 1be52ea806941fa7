//! Regression tests for the physical behaviour that the solver reproduces.

use std::f64::consts::{PI, SQRT_2};

use polariton_core::ed::compare_bound_state;
use polariton_core::scattering::solve_scattering_with;
use polariton_core::{find_all_bound_states, BandId, Branch, ChannelSolver, ModelParams, Tolerances};

fn solver(xi: f64, delta: f64, k: f64) -> ChannelSolver {
    ChannelSolver::new(&ModelParams::new(xi, delta, k).unwrap(), Tolerances::default())
}

#[test]
fn one_certified_state_per_open_gap() {
    for xi in [-0.2, -0.5] {
        for i in 0..=40 {
            let delta = -10.0 + 0.5 * i as f64;
            let s = solver(xi, delta, 0.0);
            let bands = s.bands();
            let states = find_all_bound_states(&s).unwrap();
            for gap in [1u8, 2] {
                let n = states.iter().filter(|b| b.gap_id == gap).count();
                if let Some(g) = bands.gap(gap) {
                    assert_eq!(n, 1, "xi={xi} delta={delta} gap {gap}");
                    let b = states.iter().find(|b| b.gap_id == gap).unwrap();
                    assert!(g.contains(b.energy));
                    assert!(b.residual_max < 1e-8 && b.current_max < 1e-8);
                    assert!((b.weights.total() - 1.0).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn states_hug_band_edges_at_large_detuning() {
    let s = solver(-0.2, -10.0, 0.0);
    let states = find_all_bound_states(&s).unwrap();
    let b1 = states.iter().find(|b| b.gap_id == 1).unwrap();
    assert!((b1.energy - s.bands().band(BandId::AA).lower).abs() < 0.05);
    // mostly a photon pair, dressed by the ~1% TLS admixture of each polariton
    assert!(b1.weights.photon > 0.97);

    let s = solver(-0.2, 10.0, 0.0);
    let states = find_all_bound_states(&s).unwrap();
    let b1 = states.iter().find(|b| b.gap_id == 1).unwrap();
    assert!((b1.energy - s.bands().band(BandId::AB).upper).abs() < 0.05);
    let b2 = states.iter().find(|b| b.gap_id == 2).unwrap();
    assert!((b2.energy - s.bands().band(BandId::BB).upper).abs() < 0.05);
}

#[test]
fn detuning_mirror_symmetry() {
    // delta -> -delta maps E -> -E and swaps the two gaps
    for delta in [1.0, 3.5, 7.0] {
        let a = find_all_bound_states(&solver(-0.2, delta, 0.0)).unwrap();
        let b = find_all_bound_states(&solver(-0.2, -delta, 0.0)).unwrap();
        for s in &a {
            let partner = b.iter().find(|t| t.gap_id != s.gap_id).unwrap();
            assert!((s.energy + partner.energy).abs() < 1e-8, "delta={delta}");
        }
    }
}

#[test]
fn ring_diagonalization_agrees() {
    for delta in [-2.0, 0.0, 2.0] {
        let s = solver(-0.2, delta, 0.0);
        let p = *s.params();
        for b in find_all_bound_states(&s).unwrap() {
            let cmp = compare_bound_state(&b, &p, s.bands(), &[24, 48]).unwrap();
            let (r24, r48) = (&cmp.rings[0], &cmp.rings[1]);
            assert!(r48.error < r24.error || r24.error < 1e-10, "delta={delta}");
            assert!(r48.overlap > 0.9999);
            // finite-size error bounded by the decay length
            assert!(r48.error < (10.0 * (-b.kappa * 48.0).exp()).max(1e-10), "delta={delta}: {}", r48.error);
            if b.kappa > 0.5 {
                assert!(r48.error < 1e-9);
            }
        }
    }
}

#[test]
fn ring_diagonalization_agrees_at_finite_momentum() {
    // K = pi/3 lies on the momentum grid of both rings
    let k = PI / 3.0;
    let s = solver(-0.3, 0.5, k);
    let p = *s.params();
    let states = find_all_bound_states(&s).unwrap();
    assert!(!states.is_empty());
    for b in states {
        let cmp = compare_bound_state(&b, &p, s.bands(), &[24, 36]).unwrap();
        for r in &cmp.rings {
            let bound = (10.0 * (-b.kappa * r.sites as f64).exp()).max(1e-10);
            assert!(r.error < bound, "kappa={} N={} error={}", b.kappa, r.sites, r.error);
            assert!(r.overlap > 0.9999);
        }
        assert!(cmp.rings[1].error < cmp.rings[0].error || cmp.rings[0].error < 1e-10);
    }
}

#[test]
fn elastic_scattering_follows_detuning() {
    let q: Vec<f64> = (0..25).map(|i| 0.3 + 2.5 * i as f64 / 24.0).collect();
    let elastic = |branch: Branch, delta: f64| -> Vec<f64> {
        let s = solver(-0.2, delta, 0.0);
        q.iter()
            .map(|&x| {
                let sol = solve_scattering_with(&s, branch, x).unwrap();
                assert!(sol.residual_max < 1e-8 && sol.current_max < 1e-8);
                sol.open_coefficient(branch).unwrap().norm_sqr()
            })
            .collect()
    };
    assert!(elastic(Branch::AA, -10.0).iter().all(|&f| f < 0.05));
    assert!(elastic(Branch::AA, 10.0).iter().all(|&f| f > 0.9));
    assert!(elastic(Branch::BB, 10.0).iter().all(|&f| f < 0.05));
}

#[test]
fn exchange_channels_scatter_equally() {
    for delta in [-10.0, -1.0, 10.0] {
        let s = solver(-0.2, delta, 0.0);
        for i in 0..12 {
            let q = 0.3 + 0.2 * i as f64;
            let sol = solve_scattering_with(&s, Branch::AB, q).unwrap();
            let ab = sol.open_coefficient(Branch::AB).unwrap();
            let ba = sol.open_coefficient(Branch::BA).unwrap();
            assert!((ab - ba).norm() < 1e-8, "delta={delta} q={q}");
        }
    }
}

#[test]
fn weak_hopping_recovers_cavity_doublet() {
    let states = find_all_bound_states(&solver(-1e-3, 0.0, 0.0)).unwrap();
    for target in [-SQRT_2, SQRT_2] {
        assert!(states.iter().any(|b| (b.energy - target).abs() < 1e-3));
    }
}
