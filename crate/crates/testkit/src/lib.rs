//! Reference computations for tests, written independently of the
//! production code paths they check.

use ndarray::{Array1, Array2};

/// Central-difference gradient of `f` at `theta`, stepping each coordinate
/// by `1e-6·max(1, |θ_i|)`.
pub fn central_difference(theta: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    central_difference_at(theta, (0..theta.len()).collect::<Vec<_>>().as_slice(), &mut f)
}

/// Same as [`central_difference`] restricted to `coords` (in that order).
pub fn central_difference_at(theta: &[f64], coords: &[usize], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut work = theta.to_vec();
    coords
        .iter()
        .map(|&i| {
            let h = 1e-6 * theta[i].abs().max(1.0);
            work[i] = theta[i] + h;
            let up = f(&work);
            work[i] = theta[i] - h;
            let down = f(&work);
            work[i] = theta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a − b| / max(|a|, |b|, floor)`; the floor keeps coordinates whose true
/// derivative vanishes from being judged on pure rounding noise.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest [`relative_error`] over paired entries.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| relative_error(*x, *y, floor)).fold(0.0, f64::max)
}

/// Thin SVD by one-sided Jacobi rotations on the columns of `a` (M × S).
/// Returns `(U, σ)` with singular values descending; columns of `U` whose
/// singular value is zero are left as zeros.
pub fn one_sided_jacobi_svd(a: &Array2<f64>) -> (Array2<f64>, Vec<f64>) {
    let mut u = a.clone();
    let s = u.ncols();
    for _sweep in 0..200 {
        let mut rotated = false;
        for p in 0..s {
            for q in p + 1..s {
                let alpha: f64 = u.column(p).dot(&u.column(p));
                let beta: f64 = u.column(q).dot(&u.column(q));
                let gamma: f64 = u.column(p).dot(&u.column(q));
                if gamma.abs() <= 1e-16 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                let cp: Array1<f64> = u.column(p).to_owned();
                let cq: Array1<f64> = u.column(q).to_owned();
                u.column_mut(p).assign(&(&cp * c - &cq * sn));
                u.column_mut(q).assign(&(&cp * sn + &cq * c));
            }
        }
        if !rotated {
            break;
        }
    }
    let mut pairs: Vec<(f64, Array1<f64>)> = u
        .columns()
        .into_iter()
        .map(|col| {
            let norm = col.dot(&col).sqrt();
            let dir = if norm > 0.0 { &col / norm } else { col.to_owned() };
            (norm, dir)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let m = a.nrows();
    let mut out = Array2::zeros((m, pairs.len()));
    for (k, (_, dir)) in pairs.iter().enumerate() {
        out.column_mut(k).assign(dir);
    }
    (out, pairs.into_iter().map(|p| p.0).collect())
}

/// Flips each column so its largest-magnitude entry is positive.
pub fn canonical_signs(modes: &mut Array2<f64>) {
    for mut col in modes.columns_mut() {
        let mut lead = 0.0f64;
        for &v in col.iter() {
            if v.abs() > lead.abs() {
                lead = v;
            }
        }
        if lead < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_of_a_cubic() {
        let g = central_difference(&[2.0, -1.0], |t| t[0].powi(3) + 3.0 * t[1]);
        assert!((g[0] - 12.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn svd_of_a_diagonal() {
        let a = Array2::from_shape_vec((3, 2), vec![0.0, 2.0, 3.0, 0.0, 0.0, 0.0]).unwrap();
        let (u, s) = one_sided_jacobi_svd(&a);
        assert_eq!(s, vec![3.0, 2.0]);
        assert_eq!(u.column(0).to_vec(), vec![0.0, 1.0, 0.0]);
    }
}
