use fern_core::pod::{compute_pod, pod_reconstruction_error, SnapshotMatrix};
use fern_testkit::{canonical_signs, one_sided_jacobi_svd};
use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((m, n), |_| rng.gen_range(-1.0..1.0))
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn snapshots(values: Array2<f64>) -> SnapshotMatrix {
    let m = values.nrows();
    SnapshotMatrix::new(values, (0..m).map(|i| i as f64).collect()).unwrap()
}

#[test]
fn random_six_by_four_matches_jacobi_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let values = random(&mut rng, 6, 4);
    let modes = compute_pod(&snapshots(values.clone()), 2).unwrap();
    let (mut u, _) = one_sided_jacobi_svd(&values);
    canonical_signs(&mut u);
    assert!(max_abs(&(&modes - &u.slice(s![.., ..2]))) < 1e-10);
}

#[test]
fn fifty_random_matrices_match_jacobi_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(65);
    for trial in 0..50 {
        let m = rng.gen_range(3..30);
        let sn = rng.gen_range(3..30);
        let values = random(&mut rng, m, sn);
        let n = rng.gen_range(1..=m.min(sn));
        let modes = compute_pod(&snapshots(values.clone()), n).unwrap();
        let (mut u, _) = one_sided_jacobi_svd(&values);
        canonical_signs(&mut u);
        let diff = max_abs(&(&modes - &u.slice(s![.., ..n])));
        assert!(diff < 1e-10, "trial {trial} ({m}×{sn}, N={n}): {diff:e}");
        let gram = modes.t().dot(&modes) - Array2::<f64>::eye(n);
        assert!(max_abs(&gram) < 1e-10);
    }
}

#[test]
fn reconstruction_error_is_monotone_in_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    for _ in 0..10 {
        let snaps = snapshots(random(&mut rng, 15, 11));
        let mut last = 1.0;
        for n in 1..=11 {
            let err = pod_reconstruction_error(&snaps, &compute_pod(&snaps, n).unwrap()).unwrap();
            assert!(err <= last + 1e-14);
            last = err;
        }
        assert!(last < 1e-10);
    }
}

/// Orthonormal `m × n` directions from Gram–Schmidt on random vectors.
fn random_orthonormal(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Array2<f64> {
    let mut q = random(rng, m, n);
    for k in 0..n {
        for j in 0..k {
            let proj = q.column(j).dot(&q.column(k));
            let qj = q.column(j).to_owned();
            q.column_mut(k).scaled_add(-proj, &qj);
        }
        let norm = q.column(k).dot(&q.column(k)).sqrt();
        q.column_mut(k).mapv_inplace(|v| v / norm);
    }
    q
}

#[test]
fn pod_beats_random_subspaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    for _ in 0..50 {
        let low = random(&mut rng, 20, 3).dot(&random(&mut rng, 3, 12));
        let values = low + random(&mut rng, 20, 12) * 0.05;
        let snaps = snapshots(values);
        let pod = pod_reconstruction_error(&snaps, &compute_pod(&snaps, 3).unwrap()).unwrap();
        let other = pod_reconstruction_error(&snaps, &random_orthonormal(&mut rng, 20, 3)).unwrap();
        assert!(pod <= other);
    }
}
