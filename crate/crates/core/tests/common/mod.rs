//! Test-side oracles on plain `Vec` matrices, independent of the crate's
//! linear algebra.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbar::kernels::{Jitter, Kernel};

pub type Mat = Vec<Vec<Complex64>>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rows(m: &DMatrix<Complex64>) -> Mat {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn adjoint(a: &Mat) -> Mat {
    let cols = a.first().map_or(0, |r| r.len());
    (0..cols).map(|j| a.iter().map(|row| row[j].conj()).collect()).collect()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut left = a.clone();
    let mut right = identity(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| left[x][col].norm().partial_cmp(&left[y][col].norm()).unwrap())
            .unwrap();
        assert!(left[pivot][col].norm() > 1e-300, "singular matrix in oracle");
        left.swap(col, pivot);
        right.swap(col, pivot);
        let inv = c(1.0, 0.0) / left[col][col];
        for j in 0..n {
            left[col][j] *= inv;
            right[col][j] *= inv;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = left[r][col];
            if f == c(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                let (lc, rc) = (left[col][j], right[col][j]);
                left[r][j] -= f * lc;
                right[r][j] -= f * rc;
            }
        }
    }
    right
}

pub fn submatrix(a: &Mat, r: &[usize], cols: &[usize]) -> Mat {
    r.iter().map(|&i| cols.iter().map(|&j| a[i][j]).collect()).collect()
}

/// `(Sigma(O,O) + s2 I)^-1`.
fn gram_inverse(sigma: &Mat, omega: &[usize], s2: f64) -> Mat {
    let mut g = submatrix(sigma, omega, omega);
    for (i, row) in g.iter_mut().enumerate() {
        row[i] += c(s2, 0.0);
    }
    inverse(&g)
}

/// Batch posterior `Sigma - Sigma(:,O) (Sigma(O,O) + s2 I)^-1 Sigma(O,:)`.
pub fn batch_posterior(sigma: &Mat, omega: &[usize], s2: f64) -> Mat {
    let n = sigma.len();
    if omega.is_empty() {
        return sigma.clone();
    }
    let all: Vec<usize> = (0..n).collect();
    let cross = submatrix(sigma, &all, omega);
    let correction = matmul(&matmul(&cross, &gram_inverse(sigma, omega, s2)), &submatrix(sigma, omega, &all));
    (0..n)
        .map(|i| (0..n).map(|j| sigma[i][j] - correction[i][j]).collect())
        .collect()
}

/// Greedy order recomputing the batch posterior from scratch at every step.
/// Variances within `tie_tol` of the maximum are tied; ties go to the
/// smallest index.
pub fn greedy_oracle(sigma: &Mat, pm: usize, s2: f64, tie_tol: f64) -> Vec<usize> {
    let n = sigma.len();
    let mut omega = Vec::new();
    for _ in 0..pm {
        let post = batch_posterior(sigma, &omega, s2);
        let free: Vec<usize> = (0..n).filter(|i| !omega.contains(i)).collect();
        let max = free.iter().map(|&i| post[i][i].re).fold(f64::NEG_INFINITY, f64::max);
        let pick = *free.iter().find(|&&i| post[i][i].re >= max - tie_tol).unwrap();
        omega.push(pick);
    }
    omega
}

/// `Sigma(O,O) + s2 I)^-1 Sigma(O,:)`, the weights, by explicit inverse.
pub fn weights_oracle(sigma: &Mat, omega: &[usize], s2: f64) -> Mat {
    let all: Vec<usize> = (0..sigma.len()).collect();
    matmul(&gram_inverse(sigma, omega, s2), &submatrix(sigma, omega, &all))
}

/// Posterior mean `Sigma(:,O) (Sigma(O,O) + s2 I)^-1 y`.
pub fn posterior_mean_oracle(sigma: &Mat, omega: &[usize], s2: f64, y: &[Complex64]) -> Vec<Complex64> {
    let all: Vec<usize> = (0..sigma.len()).collect();
    let cross = submatrix(sigma, &all, omega);
    let gi = gram_inverse(sigma, omega, s2);
    let col: Mat = y.iter().map(|&v| vec![v]).collect();
    matmul(&matmul(&cross, &gi), &col).into_iter().map(|r| r[0]).collect()
}

pub fn frobenius(a: &Mat) -> f64 {
    a.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn relative_frobenius(a: &Mat, b: &Mat) -> f64 {
    let diff: Mat = a
        .iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect();
    frobenius(&diff) / frobenius(b)
}

/// Random Hermitian positive definite kernel `A A^H / n + 0.05 I`.
pub fn random_gram_kernel(rng: &mut ChaCha8Rng, n: usize) -> Kernel {
    let a: Vec<Vec<Complex64>> = (0..n)
        .map(|_| (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
        .collect();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let v: Complex64 = (0..n).map(|k| a[i][k] * a[j][k].conj()).sum::<Complex64>() / n as f64;
        if i == j {
            c(v.re + 0.05, 0.0)
        } else {
            v
        }
    });
    let m = DMatrix::from_fn(n, n, |i, j| if i <= j { m[(i, j)] } else { m[(j, i)].conj() });
    Kernel::custom(m, Jitter::Absolute(0.0)).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Median of a list of durations in nanoseconds.
pub fn median(mut v: Vec<u128>) -> u128 {
    v.sort_unstable();
    v[v.len() / 2]
}
