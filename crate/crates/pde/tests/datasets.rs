use fern_pde::{generate_dataset, GenRequest, MeshPolicy, PdeKind, PdeSpec};

fn small(kind: PdeKind, n: usize, mesh: MeshPolicy, seed: u64) -> GenRequest {
    let mut req = GenRequest::new(kind, n, mesh, seed);
    if kind != PdeKind::KellerSegel {
        req.settings.cells = 64;
    }
    req
}

#[test]
fn same_seed_gives_identical_files() {
    let spec = PdeSpec::new(PdeKind::Burgers);
    let req = small(PdeKind::Burgers, 6, MeshPolicy::Uniform(64), 17);
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    generate_dataset(&spec, &req).unwrap().save(&a).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    pool.install(|| generate_dataset(&spec, &req)).unwrap().save(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let other = small(PdeKind::Burgers, 6, MeshPolicy::Uniform(64), 18);
    assert_ne!(generate_dataset(&spec, &req).unwrap(), generate_dataset(&spec, &other).unwrap());
}

#[test]
fn uniform_policy_shares_one_grid() {
    let spec = PdeSpec::new(PdeKind::KellerSegel);
    let ds = generate_dataset(&spec, &small(PdeKind::KellerSegel, 4, MeshPolicy::Uniform(64), 1)).unwrap();
    assert!(ds.samples.iter().all(|s| s.x_out.len() == 64 && s.x_out == ds.samples[0].x_out));
    assert_eq!(ds.sensor_grid.len(), 22);
    assert_eq!(ds.shared_grid().map(<[f64]>::len), Some(64));
}

#[test]
fn fokker_planck_thirds_layout() {
    let spec = PdeSpec::new(PdeKind::FokkerPlanck);
    let ds = generate_dataset(&spec, &small(PdeKind::FokkerPlanck, 42, MeshPolicy::Thirds(49), 2)).unwrap();
    for (i, s) in ds.samples.iter().enumerate() {
        assert_eq!(s.x_out.len(), 49);
        let (lo, hi) = (s.x_out[0], s.x_out[48]);
        let want = match i {
            0..=13 => (0.0, 0.5),
            14..=27 => (0.5, 1.0),
            _ => (0.0, 1.0),
        };
        assert_eq!((lo, hi), want, "sample {i}");
    }
    assert_eq!(ds.grid_groups().len(), 3);
}

#[test]
fn keller_segel_thirds_layout() {
    let spec = PdeSpec::new(PdeKind::KellerSegel);
    let ds = generate_dataset(&spec, &small(PdeKind::KellerSegel, 42, MeshPolicy::Thirds(49), 3)).unwrap();
    for (i, s) in ds.samples.iter().enumerate() {
        let block = i / 14;
        let (lo, hi) = (block as f64 / 3.0, (block + 1) as f64 / 3.0);
        assert!(s.x_out.iter().all(|&x| x >= lo - 1e-15 && x <= hi + 1e-15), "sample {i}");
        assert!(s.x_out.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn sensors_hold_the_initial_condition() {
    let spec = PdeSpec::new(PdeKind::FokkerPlanck);
    let ds = generate_dataset(&spec, &small(PdeKind::FokkerPlanck, 3, MeshPolicy::Uniform(64), 4)).unwrap();
    for s in &ds.samples {
        let (c0, c1) = (s.ic_params["c0"], s.ic_params["c1"]);
        for (x, u) in ds.sensor_grid.iter().zip(&s.u_sensors) {
            assert_eq!(*u, c1 * (-100.0 * (x - c0).powi(2)).exp() + 1e-3);
        }
    }
}

#[test]
fn bad_requests_are_rejected() {
    let spec = PdeSpec::new(PdeKind::AllenCahn);
    let mut req = small(PdeKind::AllenCahn, 2, MeshPolicy::Uniform(10), 0);
    req.dofs = 3;
    assert!(generate_dataset(&spec, &req).is_err());
    let req = small(PdeKind::AllenCahn, 0, MeshPolicy::Uniform(10), 0);
    assert!(generate_dataset(&spec, &req).is_err());
    let req = small(PdeKind::AllenCahn, 2, MeshPolicy::Custom(vec![0.5, 1.5]), 0);
    assert!(generate_dataset(&spec, &req).is_err());
}

#[test]
fn solver_failures_name_the_sample() {
    let spec = PdeSpec::new(PdeKind::KellerSegel);
    let mut req = small(PdeKind::KellerSegel, 3, MeshPolicy::Uniform(10), 0);
    req.settings.cells = 32;
    let err = generate_dataset(&spec, &req).unwrap_err().to_string();
    assert!(err.contains("sample "), "{err}");
}
