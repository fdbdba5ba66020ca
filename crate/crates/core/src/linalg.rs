//! Dense LU factorization with partial pivoting.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_rows(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::invalid(format!(
                "{} entries do not form a {n}x{n} matrix",
                data.len()
            )));
        }
        Ok(Matrix { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        self.data
            .chunks_exact(self.n)
            .map(|row| crate::scalar::dot(row, x))
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().fold(T::zero(), |s, v| s + v.abs()))
            .fold(T::zero(), T::max)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    /// Factors `a` as `P A = L U`. Fails when a pivot is negligible relative
    /// to the matrix norm.
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        let n = a.n;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = a.norm_inf() * T::epsilon() * T::from_usize_lossy(n.max(1));
        for k in 0..n {
            let (p, pivot) = (k..n).map(|i| (i, lu.get(i, k).abs())).fold(
                (k, T::neg_infinity()),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
            if !(pivot > tiny) {
                return Err(Error::Numeric(format!(
                    "matrix is singular to working precision (pivot {k})"
                )));
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let d = lu.get(k, k);
            for i in k + 1..n {
                let f = lu.get(i, k) / d;
                lu.set(i, k, f);
                if f != T::zero() {
                    for j in k + 1..n {
                        let v = lu.get(i, j) - f * lu.get(k, j);
                        lu.set(i, j, v);
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu.get(i, j) * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu.get(i, j) * x[j];
            }
            x[i] = s / self.lu.get(i, i);
        }
        x
    }
}

/// Solves `a x = b`, followed by one step of iterative refinement.
pub fn solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    let lu = Lu::factor(a)?;
    let mut x = lu.solve(b);
    let ax = a.mul_vec(&x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    let dx = lu.solve(&r);
    for (xi, di) in x.iter_mut().zip(dx) {
        *xi += di;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("solution is not finite".into()));
    }
    Ok(x)
}
