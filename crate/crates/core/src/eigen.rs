//! Dense symmetric eigenvalue routines.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math;
use crate::matrix::DenseMatrix;

/// Matrices up to this size go through Jacobi; larger ones use power iteration.
pub const JACOBI_LIMIT: usize = 500;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues (ascending) and column eigenvectors by cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    a.ensure_square()?;
    if !a.is_symmetric(1e-12 * a.max_abs().max(1.0)) {
        return Err(invalid!("Jacobi eigensolver needs a symmetric matrix"));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if math::sqrt(off) <= 1e-15 * scale {
            return Ok(sorted(m, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (math::abs(theta) + math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::NumericFailure { step: MAX_SWEEPS })
}

fn sorted(m: DenseMatrix, v: DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = m.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Largest algebraic eigenvalue by power iteration on `a + sI`, with `s` a
/// Gershgorin bound that makes the shifted matrix positive semidefinite.
pub fn power_lambda_max(a: &DenseMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    a.ensure_square()?;
    let n = a.rows();
    if n == 0 {
        return Err(invalid!("empty matrix has no eigenvalues"));
    }
    let shift = (0..n)
        .map(|i| a.row(i).iter().map(|v| math::abs(*v)).sum::<f64>())
        .fold(0.0, f64::max);
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0) / n as f64).collect();
    normalize(&mut x);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let mut y: Vec<f64> = (0..n)
            .map(|i| {
                a.row(i)
                    .iter()
                    .zip(&x)
                    .map(|(aij, xj)| aij * xj)
                    .sum::<f64>()
                    + shift * x[i]
            })
            .collect();
        let next: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
        if normalize(&mut y) == 0.0 {
            return Ok(-shift);
        }
        x = y;
        if math::abs(next - lambda) <= tol * next.abs().max(1.0) {
            return Ok(next - shift);
        }
        lambda = next;
    }
    Ok(lambda - shift)
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = math::sqrt(x.iter().map(|v| v * v).sum());
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(jacobi_eigen(a)?.0)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(a: &DenseMatrix) -> Result<f64> {
    if a.rows() <= JACOBI_LIMIT {
        symmetric_eigenvalues(a)?
            .last()
            .copied()
            .ok_or_else(|| invalid!("empty matrix has no eigenvalues"))
    } else {
        power_lambda_max(a, 1e-13, 200_000)
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(a: &DenseMatrix) -> Result<f64> {
    if a.rows() <= JACOBI_LIMIT {
        symmetric_eigenvalues(a)?
            .first()
            .copied()
            .ok_or_else(|| invalid!("empty matrix has no eigenvalues"))
    } else {
        Ok(-power_lambda_max(&a.scale(-1.0), 1e-13, 200_000)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_by_two() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (vals, vecs) = jacobi_eigen(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let v = [vecs[(0, 1)], vecs[(1, 1)]];
        assert!((v[0].abs() - v[1].abs()).abs() < 1e-14);
    }

    #[test]
    fn path_laplacian_spectrum() {
        // path on 4 nodes: 2 − 2cos(kπ/4)
        let l = DenseMatrix::from_rows(&[
            vec![1.0, -1.0, 0.0, 0.0],
            vec![-1.0, 2.0, -1.0, 0.0],
            vec![0.0, -1.0, 2.0, -1.0],
            vec![0.0, 0.0, -1.0, 1.0],
        ])
        .unwrap();
        let vals = symmetric_eigenvalues(&l).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let want = 2.0 - 2.0 * libm::cos(k as f64 * core::f64::consts::PI / 4.0);
            assert!((v - want).abs() < 1e-12);
        }
        assert!((power_lambda_max(&l, 1e-14, 100_000).unwrap() - vals[3]).abs() < 1e-8);
    }

    #[test]
    fn eigenvectors_diagonalize() {
        let a = DenseMatrix::from_fn(6, 6, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let (vals, v) = jacobi_eigen(&a).unwrap();
        let av = a.matmul(&v).unwrap();
        for c in 0..6 {
            for r in 0..6 {
                assert!((av[(r, c)] - vals[c] * v[(r, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(jacobi_eigen(&a).is_err());
    }
}
