//! Invariant suite behind `polariton validate`.

use std::time::Instant;

use nalgebra::Matrix4;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use polariton_core::bands::{branch_energy, branch_point, incident_state};
use polariton_core::bound_states::{find_all_bound_states, rayleigh_quotient};
use polariton_core::ed::{band_edge_check, compare_bound_state, translation_defect, uncoupled_spectrum_defect, RingOracle};
use polariton_core::model::{build_bloch_matrices, reflection, single_polariton_mode, PolaritonKind};
use polariton_core::scattering::{free_matching_check, solve_scattering_with};
use polariton_core::{Branch, ChannelSolver, Error, ModelParams, RelativeHamiltonian, Tolerances, C64};

/// Deliberate defects for exercising the suite itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Wrong sign of the antisymmetric hopping term in the forward block.
    CSign,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub passed: bool,
    pub fault: Option<Fault>,
    pub tolerances: Tolerances,
    pub checks: Vec<CheckResult>,
}

type Outcome = Result<String, String>;

struct Suite {
    rng: StdRng,
    tol: Tolerances,
    fault: Option<Fault>,
    draws: usize,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

impl Suite {
    fn random_params(&mut self) -> ModelParams {
        let xi = self.rng.gen_range(-1.0..1.0);
        let delta = self.rng.gen_range(-5.0..5.0);
        let k = self.rng.gen_range(-2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI);
        ModelParams::new(xi, delta, k).expect("valid draw")
    }

    fn operator(&self, p: &ModelParams) -> RelativeHamiltonian {
        let mut op = RelativeHamiltonian::new(p);
        if self.fault == Some(Fault::CSign) {
            op.from_right = op.from_left;
        }
        op
    }

    fn matrix_symmetries(&mut self) -> Outcome {
        let t = reflection();
        for _ in 0..self.draws {
            let p = self.random_params();
            let m = build_bloch_matrices(&p);
            ensure(m.a == m.a.transpose() && m.c == m.c.transpose(), || format!("asymmetric matrix at {p:?}"))?;
            ensure(Matrix4::from_diagonal(&m.b.diagonal()) == m.b, || format!("B not diagonal at {p:?}"))?;
            ensure(t * m.a * t == m.a && t * m.b * t == m.b && t * m.c * t == -m.c, || {
                format!("reflection symmetry broken at {p:?}")
            })?;
        }
        let m = build_bloch_matrices(&ModelParams::new(-0.2, 0.5, 0.0).unwrap());
        ensure(m.c == Matrix4::zeros(), || "C nonzero at K = 0".into())?;
        Ok(format!("{} draws", self.draws))
    }

    fn operator_hermiticity(&mut self) -> Outcome {
        let mut worst: f64 = 0.0;
        for _ in 0..self.draws {
            let p = self.random_params();
            worst = worst.max(self.operator(&p).hermiticity_defect());
        }
        ensure(worst < 1e-15, || format!("hopping blocks not adjoint: defect {worst:.3e}"))?;
        Ok(format!("max defect {worst:.1e}"))
    }

    fn branch_eigenvectors(&mut self) -> Outcome {
        let mut worst: f64 = 0.0;
        for _ in 0..self.draws {
            let p = self.random_params();
            let q = self.rng.gen_range(1e-3..std::f64::consts::PI - 1e-3);
            let op = self.operator(&p);
            for b in Branch::ALL {
                let point = branch_point(b, C64::from(q), &p).map_err(|e| e.to_string())?;
                let f = point.spinor.0;
                let m = op.bloch_at(C64::from(q)) - Matrix4::identity() * point.energy;
                let scale = m.norm().max(1.0);
                worst = worst.max((m * f).norm() / scale).max((f.norm() - 1.0).abs());
            }
        }
        ensure(worst < 1e-10, || format!("eigen-relation defect {worst:.3e}"))?;
        Ok(format!("max defect {worst:.1e}"))
    }

    fn branch_identities(&mut self) -> Outcome {
        for _ in 0..self.draws {
            let p = self.random_params();
            let q = self.rng.gen_range(1e-3..std::f64::consts::PI - 1e-3);
            let ab = branch_energy(Branch::AB, q, &p);
            let ba = branch_energy(Branch::BA, -q, &p);
            ensure((ab - ba).abs() < 1e-12, || format!("AB/BA mismatch {ab} vs {ba}"))?;
            let sum: f64 = Branch::ALL.iter().map(|&b| branch_energy(b, q, &p)).sum();
            let trace = 4.0 * p.delta + 8.0 * p.xi * q.cos() * p.half_k().cos();
            ensure((sum - trace).abs() < 1e-12 * trace.abs().max(1.0), || format!("sum rule {sum} vs {trace}"))?;
            for b in Branch::ALL {
                let (u, v) = b.parts();
                let e = single_polariton_mode(u, p.half_k() + q, &p).energy
                    + single_polariton_mode(v, p.half_k() - q, &p).energy;
                let got = branch_energy(b, q, &p);
                ensure((e - got).abs() < 1e-10, || format!("{b}: {got} vs single-polariton sum {e}"))?;
            }
            let a = single_polariton_mode(PolaritonKind::A, q, &p).energy;
            let bb = single_polariton_mode(PolaritonKind::B, q, &p).energy;
            ensure(a - bb >= 2.0 * p.g - 1e-12, || "polariton splitting below 2g".into())?;
        }
        Ok(format!("{} draws", self.draws))
    }

    fn channel_roots(&mut self) -> Outcome {
        let mut solved = 0;
        let mut edges = 0;
        for _ in 0..self.draws / 2 {
            let p = self.random_params();
            let solver = ChannelSolver::new(&p, self.tol);
            let q = self.rng.gen_range(0.05..std::f64::consts::PI - 0.05);
            let b = Branch::ALL[self.rng.gen_range(0..4)];
            let e = branch_energy(b, q, &p);
            match solver.roots(e) {
                Ok(roots) => {
                    solved += 1;
                    ensure(roots.len() == 3, || "root count".into())?;
                    for r in &roots {
                        let m = solver.operator().bloch_at(r.lambda) - Matrix4::identity() * C64::from(e);
                        let d = (m * r.spinor.0).norm() / m.norm();
                        ensure(d < 1e-10, || format!("null-vector defect {d:.3e} at λ = {}", r.lambda))?;
                        ensure(r.lambda.im >= -self.tol.open, || "growing channel".into())?;
                        if r.open {
                            ensure(r.group_velocity.is_some_and(|v| v > 0.0), || "incoming channel kept".into())?;
                        }
                    }
                    ensure(roots.iter().any(|r| r.open && r.branch == b), || format!("{b} not open at its own energy"))?;
                }
                Err(Error::BandEdge { .. }) => edges += 1,
                Err(err) => return Err(format!("{p:?}, E = {e}: {err}")),
            }
        }
        Ok(format!("{solved} energies solved, {edges} refused at band edges"))
    }

    fn scattering(&mut self) -> Outcome {
        let mut count = 0;
        for delta in [-2.0, 0.0, 2.0] {
            let p = ModelParams::new(-0.2, delta, 0.0).unwrap();
            let solver = ChannelSolver::new(&p, self.tol);
            for b in [Branch::AA, Branch::AB, Branch::BB] {
                for q in [0.4, 1.3, 2.4] {
                    let sol = solve_scattering_with(&solver, b, q).map_err(|e| format!("{b} q={q} Δ={delta}: {e}"))?;
                    count += 1;
                    if b == Branch::AB {
                        let ab = sol.open_coefficient(Branch::AB).ok_or("AB channel missing")?;
                        let ba = sol.open_coefficient(Branch::BA).ok_or("BA channel missing")?;
                        ensure((ab - ba).norm() < 1e-8, || format!("f(AB) {ab} != f(BA) {ba}"))?;
                    }
                }
            }
        }
        Ok(format!("{count} certified solutions"))
    }

    fn free_matching(&mut self) -> Outcome {
        for (b, q, delta, k) in [(Branch::AA, 1.0, 0.0, 0.0), (Branch::BB, 2.0, 0.7, 1.1), (Branch::AB, 0.7, -1.0, -0.6)] {
            let p = ModelParams::new(-0.3, delta, k).unwrap();
            let (f, contact) = free_matching_check(b, q, &p).map_err(|e| e.to_string())?;
            let expected = incident_state(b, q, &p, 0).map_err(|e| e.to_string())?;
            let worst = f.iter().map(|x| x.norm()).fold((contact - expected.0).norm(), f64::max);
            ensure(worst < 1e-10, || format!("free problem not reproduced: {worst:.3e}"))?;
        }
        Ok("incident wave reproduced".into())
    }

    fn bound_states(&mut self) -> Outcome {
        let p = ModelParams::new(-0.2, 0.0, 0.0).unwrap();
        let solver = ChannelSolver::new(&p, self.tol);
        let states = find_all_bound_states(&solver).map_err(|e| e.to_string())?;
        ensure(states.len() == 2, || format!("expected 2 bound states, found {}", states.len()))?;
        for b in &states {
            let rq = rayleigh_quotient(b, solver.operator());
            ensure((rq - b.energy).abs() < 1e-9, || format!("Rayleigh quotient {rq} vs {}", b.energy))?;
            ensure((b.weights.total() - 1.0).abs() < 1e-10, || "weights do not sum to 1".into())?;
        }
        Ok(format!(
            "E_b = {:?}",
            states.iter().map(|b| format!("{:.10}", b.energy)).collect::<Vec<_>>()
        ))
    }

    fn ed_structure(&mut self) -> Outcome {
        let p = ModelParams::new(-0.3, 0.7, 0.0).unwrap();
        let oracle = RingOracle::new(6, &p).map_err(|e| e.to_string())?;
        let herm = oracle.hamiltonian.hermiticity_defect();
        ensure(herm == 0.0, || format!("ring Hamiltonian not symmetric: {herm:.3e}"))?;
        let comm = translation_defect(&oracle.hamiltonian, oracle.translation());
        ensure(comm < 1e-12, || format!("[H, T] = {comm:.3e}"))?;
        let dims: usize = oracle.sectors().iter().map(|s| s.eigenvalues.len()).sum();
        ensure(dims == 72, || format!("sector dimensions sum to {dims}"))?;
        Ok(format!("N = 6, nnz = {}", oracle.hamiltonian.nnz()))
    }

    fn ed_agreement(&mut self) -> Outcome {
        let p = ModelParams::new(-0.2, 0.0, 0.0).unwrap();
        let solver = ChannelSolver::new(&p, self.tol);
        let states = find_all_bound_states(&solver).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for b in &states {
            let c = compare_bound_state(b, &p, solver.bands(), &[24]).map_err(|e| e.to_string())?;
            let r = &c.rings[0];
            ensure(r.overlap > 0.9999, || format!("overlap {}", r.overlap))?;
            worst = worst.max(r.error);
        }
        ensure(worst < 1e-8, || format!("energy error {worst:.3e}"))?;
        Ok(format!("N = 24, max |ΔE| = {worst:.1e}"))
    }

    fn ed_band_edges(&mut self) -> Outcome {
        let p = ModelParams::new(-0.2, 0.0, 0.0).unwrap();
        let solver = ChannelSolver::new(&p, self.tol);
        let report = band_edge_check(&p, solver.bands(), 40).map_err(|e| e.to_string())?;
        ensure(report.violations.is_empty(), || format!("ring levels outside bands: {:?}", report.violations))?;
        ensure(report.in_gap_count() == 2, || format!("{} ring levels in gaps", report.in_gap_count()))?;
        Ok("N = 40, no violations, 2 in-gap levels".into())
    }

    fn jc_limit(&mut self) -> Outcome {
        let mut worst: f64 = 0.0;
        for delta in [0.0, 1.3, -2.5] {
            worst = worst.max(uncoupled_spectrum_defect(4, 1.0, delta).map_err(|e| e.to_string())?);
        }
        ensure(worst < 1e-12, || format!("deviation {worst:.3e}"))?;
        Ok(format!("max deviation {worst:.1e}"))
    }
}

pub fn run(tol: Tolerances, fault: Option<Fault>, seed: u64) -> Report {
    let mut suite = Suite {
        rng: StdRng::seed_from_u64(seed),
        tol,
        fault,
        draws: 200,
    };
    type CheckFn = fn(&mut Suite) -> Outcome;
    let checks: [(&'static str, CheckFn); 12] = [
        ("matrix_symmetries", Suite::matrix_symmetries),
        ("operator_hermiticity", Suite::operator_hermiticity),
        ("branch_eigenvectors", Suite::branch_eigenvectors),
        ("branch_identities", Suite::branch_identities),
        ("channel_roots", Suite::channel_roots),
        ("scattering_certificates", Suite::scattering),
        ("free_matching_oracle", Suite::free_matching),
        ("bound_states", Suite::bound_states),
        ("ed_structure", Suite::ed_structure),
        ("ed_bound_state_agreement", Suite::ed_agreement),
        ("ed_band_edges", Suite::ed_band_edges),
        ("jc_limit_spectrum", Suite::jc_limit),
    ];
    let mut results = Vec::new();
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = check(&mut suite);
        let wall_time_s = start.elapsed().as_secs_f64();
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        log::info!("{name}: {} ({detail})", if passed { "pass" } else { "FAIL" });
        results.push(CheckResult {
            name,
            passed,
            detail,
            wall_time_s,
        });
    }
    Report {
        passed: results.iter().all(|c| c.passed),
        fault,
        tolerances: tol,
        checks: results,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn injected_sign_error_breaks_hermiticity() {
        let mut suite = Suite {
            rng: StdRng::seed_from_u64(1),
            tol: Tolerances::default(),
            fault: Some(Fault::CSign),
            draws: 20,
        };
        assert!(suite.operator_hermiticity().is_err());
        suite.fault = None;
        assert!(suite.operator_hermiticity().is_ok());
    }
}
