//! Small dense matrices and LU factorization with partial pivoting.

use std::ops::{Index, IndexMut};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = DenseMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} has wrong length");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest nonzero absolute entry, if any.
    pub fn min_nonzero_abs(&self) -> Option<f64> {
        self.data
            .iter()
            .map(|v| v.abs())
            .filter(|&v| v > 0.0)
            .reduce(f64::min)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// `P A = L U`, stored compactly with unit-diagonal `L` below the diagonal.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

/// Factorization whose smallest pivot fell below the rank tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    /// `min |pivot| / max |pivot|`.
    pub pivot_ratio: f64,
}

impl LuFactors {
    /// Factors `a`. Elimination runs to completion; afterwards the matrix is
    /// declared singular when `min |pivot| <= rank_tol * max |pivot|`.
    pub fn factor(mut a: DenseMatrix, rank_tol: f64) -> Result<Self, Singular> {
        let n = a.dim();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut max_pivot = 0.0f64;
        let mut min_pivot = f64::INFINITY;

        for k in 0..n {
            let (p, pivot_abs) =
                (k..n)
                    .map(|i| (i, a[(i, k)].abs()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            max_pivot = max_pivot.max(pivot_abs);
            min_pivot = min_pivot.min(pivot_abs);
            if pivot_abs == 0.0 {
                continue;
            }
            let pivot = a[(k, k)];
            for i in k + 1..n {
                let factor = a[(i, k)] / pivot;
                a[(i, k)] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        a[(i, j)] -= factor * a[(k, j)];
                    }
                }
            }
        }

        if n == 0 || max_pivot == 0.0 || min_pivot <= rank_tol * max_pivot {
            let pivot_ratio = if max_pivot > 0.0 {
                min_pivot / max_pivot
            } else {
                0.0
            };
            return Err(Singular { pivot_ratio });
        }
        Ok(LuFactors { lu: a, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * y[j]).sum();
            y[i] = (y[i] - s) / self.lu[(i, i)];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_permuted_system() {
        let a = DenseMatrix::from_rows(&[
            vec![0.0, 2.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![3.0, 0.0, 1.0],
        ]);
        let x_true = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x_true);
        let lu = LuFactors::factor(a, 1e-12).unwrap();
        let x = lu.solve(&b);
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn detects_rank_deficiency() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        let err = LuFactors::factor(a, 1e-10).unwrap_err();
        assert!(err.pivot_ratio <= 1e-10);
        assert!(LuFactors::factor(DenseMatrix::zeros(3), 1e-10).is_err());
    }

    #[test]
    fn norms() {
        let a = DenseMatrix::from_rows(&[vec![1.0, -3.0], vec![0.0, 0.5]]);
        assert_eq!(a.norm_inf(), 4.0);
        assert_eq!(a.max_abs(), 3.0);
        assert_eq!(a.min_nonzero_abs(), Some(0.5));
        assert_eq!(DenseMatrix::zeros(2).min_nonzero_abs(), None);
    }
}
