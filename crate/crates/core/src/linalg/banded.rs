//! Banded Cholesky factorization for symmetric positive definite matrices.
//!
//! For M-matrices (positive diagonal, non-positive off-diagonal) the factor has
//! non-positive off-diagonal entries, so triangular solves with a non-negative
//! right-hand side add only non-negative terms. Solutions are then accurate
//! entry by entry, including exponentially small tails.

use crate::error::{Error, Result};

/// Lower Cholesky factor stored by rows: `rows[i][k]` holds `L[i][i - bw + k]`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    rows: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the matrix given by `entry(i, j)` for `j <= i`, `i - j <= bw`.
    pub fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut rows = vec![0.0; n * w];
        let at = |i: usize, j: usize| i * w + (j + bw - i);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = entry(i, j);
                for k in k0..j {
                    s -= rows[at(i, k)] * rows[at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Eigensolver(format!("matrix not positive definite at pivot {i}")));
                    }
                    rows[at(i, i)] = s.sqrt();
                } else {
                    rows[at(i, j)] = s / rows[at(j, j)];
                }
            }
        }
        Ok(Self { n, bw, rows })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let at = |i: usize, j: usize| i * w + (j + bw - i);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.rows[at(i, k)] * y[k];
            }
            y[i] = s / self.rows[at(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.rows[at(k, i)] * y[k];
            }
            y[i] = s / self.rows[at(i, i)];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_banded_system() {
        let n = 30;
        let bw = 4;
        let entry = |i: usize, j: usize| {
            if i == j {
                10.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else if i.abs_diff(j) == bw {
                -2.0
            } else {
                0.0
            }
        };
        let chol = BandedCholesky::factor(n, bw, entry).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = chol.solve(&b);
        for i in 0..n {
            let ax: f64 = (0..n).map(|j| entry(i.max(j), i.min(j)) * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        assert!(BandedCholesky::factor(3, 1, |i, j| if i == j { -1.0 } else { 0.0 }).is_err());
    }
}
