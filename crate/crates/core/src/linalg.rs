//! Small dense symmetric linear algebra on row-major `n × n` slices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// if a pivot is not strictly positive.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b`.
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[i * n + k] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[k * n + i] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    z
}

/// Eigen-decomposition `A = V diag(values) Vᵀ`; eigenvectors are the columns
/// of the row-major `vectors`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

/// Cyclic Jacobi rotations. Intended for the parameter dimensions met here
/// (tens to low hundreds).
pub fn sym_eigen(a: &[f64], n: usize) -> SymEigen {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut diag = 0.0;
        for i in 0..n {
            diag += m[i * n + i] * m[i * n + i];
            for j in i + 1..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off <= 1e-30 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    SymEigen {
        values: (0..n).map(|i| m[i * n + i]).collect(),
        vectors: v,
    }
}

impl SymEigen {
    /// `λ_max / λ_min`, infinite when the smallest eigenvalue is not positive.
    pub fn condition_number(&self) -> f64 {
        let max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// Inverse of a symmetric positive definite matrix, refusing matrices whose
/// condition number exceeds `max_condition`. Returns the inverse and the
/// condition number.
pub fn sym_inverse(a: &[f64], n: usize, max_condition: f64) -> Result<(Vec<f64>, f64)> {
    let eig = sym_eigen(a, n);
    let condition = eig.condition_number();
    if !(condition <= max_condition) {
        return Err(Error::Singular { condition });
    }
    let mut inv = vec![0.0; n * n];
    for k in 0..n {
        let inv_l = 1.0 / eig.values[k];
        for i in 0..n {
            let vik = eig.vectors[i * n + k] * inv_l;
            for j in 0..n {
                inv[i * n + j] += vik * eig.vectors[j * n + k];
            }
        }
    }
    symmetrize(&mut inv, n);
    Ok((inv, condition))
}

pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

pub fn symmetrize(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = avg;
            a[j * n + i] = avg;
        }
    }
}

pub fn trace(a: &[f64], n: usize) -> f64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: [f64; 9] = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];

    #[test]
    fn cholesky_solves() {
        let l = cholesky(&A, 3).unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = cholesky_solve(&l, 3, &b);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| A[i * 3 + j] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }

    #[test]
    fn eigen_reconstructs() {
        let eig = sym_eigen(&A, 3);
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3)
                    .map(|k| eig.vectors[i * 3 + k] * eig.values[k] * eig.vectors[j * 3 + k])
                    .sum();
                assert!((r - A[i * 3 + j]).abs() < 1e-12);
            }
        }
        let sum: f64 = eig.values.iter().sum();
        assert!((sum - trace(&A, 3)).abs() < 1e-12);
    }

    #[test]
    fn inverse_and_condition() {
        let (inv, cond) = sym_inverse(&A, 3, 1e12).unwrap();
        let id = matmul(&A, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i * 3 + j] - e).abs() < 1e-12);
            }
        }
        assert!(cond > 1.0);
        let singular = [1.0, 1.0, 1.0, 1.0];
        assert!(matches!(sym_inverse(&singular, 2, 1e12), Err(Error::Singular { .. })));
        let diag = [1.0, 0.0, 0.0, 1e-13];
        match sym_inverse(&diag, 2, 1e12) {
            Err(Error::Singular { condition }) => assert!((condition - 1e13).abs() < 1.0),
            other => panic!("{other:?}"),
        }
    }
}
