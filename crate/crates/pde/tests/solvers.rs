use std::collections::BTreeMap;
use std::f64::consts::PI;

use fern_core::seeding::stream_rng;
use fern_core::FernError;
use fern_pde::{mass_drift, sample_ic, self_convergence, InitialCondition, PdeKind, PdeSpec, SolverSettings, Solver};

fn ic(kind: PdeKind, dofs: usize, params: &[(&str, f64)]) -> InitialCondition {
    let map: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    InitialCondition::new(&PdeSpec::new(kind), dofs, map).unwrap()
}

#[test]
fn constant_states_are_preserved() {
    let ac = PdeSpec::new(PdeKind::AllenCahn);
    let sol = Solver::with_profile(&ac, |_| 1.0, PdeKind::AllenCahn.default_settings()).unwrap().run().unwrap();
    assert!(sol.u.iter().all(|v| (v - 1.0).abs() < 1e-12));

    let burgers = PdeSpec::new(PdeKind::Burgers);
    let flat = ic(PdeKind::Burgers, 2, &[("c0", 0.2), ("c1", 0.0)]);
    let sol = Solver::new(&burgers, &flat, PdeKind::Burgers.default_settings()).unwrap().run().unwrap();
    assert!(sol.u.iter().all(|v| (v - 0.5).abs() < 1e-12));
}

#[test]
fn conservative_equations_keep_their_mass() {
    for kind in PdeKind::ALL.into_iter().filter(|k| k.is_conservative()) {
        let spec = PdeSpec::new(kind);
        let dofs = *kind.allowed_dofs().last().unwrap();
        for s in 0..2 {
            let u0 = sample_ic(&spec, dofs, &mut stream_rng(3, s)).unwrap();
            let solver = Solver::new(&spec, &u0, kind.default_settings()).unwrap();
            let start = solver.solution();
            let end = solver.run().unwrap();
            let drift = mass_drift(&start, &end);
            assert!(drift < 1e-4, "{kind}: mass drift {drift:e}");
        }
    }
}

#[test]
fn allen_cahn_energy_never_increases() {
    let spec = PdeSpec::new(PdeKind::AllenCahn);
    for s in 0..3 {
        let u0 = sample_ic(&spec, 2, &mut stream_rng(4, s)).unwrap();
        let mut solver = Solver::new(&spec, &u0, PdeKind::AllenCahn.default_settings()).unwrap();
        let mut last = solver.energy().unwrap();
        while solver.taken < solver.steps {
            solver.advance().unwrap();
            let e = solver.energy().unwrap();
            assert!(e <= last + 1e-13 * last.abs(), "energy rose from {last} to {e} at t = {}", solver.time());
            last = e;
        }
    }
}

#[test]
fn fokker_planck_relaxes_to_the_gibbs_profile() {
    let spec = PdeSpec::new(PdeKind::FokkerPlanck).with_t_final(1.0);
    let u0 = ic(PdeKind::FokkerPlanck, 2, &[("c0", 0.35), ("c1", 8.0)]);
    let sol = Solver::new(&spec, &u0, PdeKind::FokkerPlanck.default_settings()).unwrap().run().unwrap();
    let gibbs: Vec<f64> = sol.x.iter().map(|x| (-(2.0 * PI * x).cos()).exp()).collect();
    let dot: f64 = sol.u.iter().zip(&gibbs).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let cosine = dot / (norm(&sol.u) * norm(&gibbs));
    assert!(cosine > 0.99, "cosine similarity {cosine}");
}

#[test]
fn every_solver_is_self_convergent() {
    for kind in PdeKind::ALL {
        let spec = PdeSpec::new(kind);
        let dofs = *kind.allowed_dofs().last().unwrap();
        for s in 0..2 {
            let u0 = sample_ic(&spec, dofs, &mut stream_rng(5, s)).unwrap();
            let change = self_convergence(&spec, &u0, kind.default_settings()).unwrap();
            assert!(change < 1e-3, "{kind} {:?}: relative change {change:e}", u0.params);
        }
    }
}

#[test]
fn blow_up_reports_the_failing_time() {
    let spec = PdeSpec::new(PdeKind::AllenCahn);
    let err = Solver::with_profile(&spec, |_| 50.0, SolverSettings { cells: 64, dt: 0.5 }).unwrap().run().unwrap_err();
    match err {
        FernError::Solver(msg) => assert!(msg.contains("non-finite") && msg.contains("t = "), "{msg}"),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn under_resolved_chemotaxis_loses_positivity() {
    let spec = PdeSpec::new(PdeKind::KellerSegel);
    let u0 = ic(PdeKind::KellerSegel, 1, &[("c0", 0.8)]);
    let err = Solver::new(&spec, &u0, SolverSettings { cells: 128, dt: 5e-4 }).unwrap().run().unwrap_err();
    assert!(err.to_string().contains("positivity lost"), "{err}");
}

#[test]
fn densities_must_start_positive() {
    let spec = PdeSpec::new(PdeKind::FokkerPlanck);
    assert!(Solver::with_profile(&spec, |x| x - 0.5, PdeKind::FokkerPlanck.default_settings()).is_err());
}

#[test]
fn interpolation_reproduces_the_solver_grid() {
    for kind in PdeKind::ALL {
        let spec = PdeSpec::new(kind);
        let u0 = sample_ic(&spec, kind.default_dofs(), &mut stream_rng(6, 0)).unwrap();
        let sol = Solver::new(&spec, &u0, SolverSettings { cells: 64, dt: 1e-3 }).unwrap().solution();
        let back = sol.interpolate(&sol.x).unwrap();
        for (a, b) in back.iter().zip(&sol.u) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{kind}");
        }
        assert!(sol.interpolate(&[spec.domain[1] + 0.1]).is_err());
    }
}
