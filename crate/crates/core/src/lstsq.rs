//! Dense linear least squares shared by the model fitters.
//!
//! Solves `min ||A x - y||²` through the SVD, returning the minimum-norm
//! solution when `A` is rank deficient.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub coefficients: Vec<f64>,
    /// Numerical rank of the design matrix.
    pub rank: usize,
    pub residual_ss: f64,
}

impl Solution {
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.coefficients.len()
    }
}

/// Builds a row-major design matrix.
pub fn design(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

pub fn solve(a: &DMatrix<f64>, y: &[f64]) -> Solution {
    let (m, n) = a.shape();
    assert_eq!(m, y.len(), "design rows and target length differ");
    if n == 0 {
        return Solution {
            coefficients: Vec::new(),
            rank: 0,
            residual_ss: y.iter().map(|v| v * v).sum(),
        };
    }
    let yv = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let tol = sigma_max * (m.max(n) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let x = if rank == 0 {
        DVector::zeros(n)
    } else {
        svd.solve(&yv, tol).expect("SVD computed with U and V")
    };
    let resid = a * &x - &yv;
    Solution {
        coefficients: x.iter().copied().collect(),
        rank,
        residual_ss: resid.norm_squared(),
    }
}

/// Non-negative least squares (Lawson-Hanson active set).
pub fn solve_non_negative(a: &DMatrix<f64>, y: &[f64]) -> Solution {
    let (m, n) = a.shape();
    assert_eq!(m, y.len(), "design rows and target length differ");
    let yv = DVector::from_column_slice(y);
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * (1.0 + a.norm() * yv.norm());
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (&yv - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        match candidate {
            Some(t) if w[t] > tol => passive[t] = true,
            _ => break,
        }
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(&idx);
            let s_p = solve(&sub, y).coefficients;
            let mut s = DVector::<f64>::zeros(n);
            for (k, &j) in idx.iter().enumerate() {
                s[j] = s_p[k];
            }
            if idx.iter().all(|&j| s[j] > 0.0) {
                x = s;
                break;
            }
            let alpha = idx
                .iter()
                .filter(|&&j| s[j] <= 0.0)
                .map(|&j| x[j] / (x[j] - s[j]))
                .fold(f64::INFINITY, f64::min);
            x += (&s - &x) * alpha;
            for &j in &idx {
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    let resid = a * &x - &yv;
    let active: Vec<usize> = (0..n).filter(|&j| x[j] > 0.0).collect();
    let rank = if active.is_empty() {
        0
    } else {
        solve(&a.select_columns(&active), y).rank
    };
    Solution {
        coefficients: x.iter().copied().collect(),
        rank,
        residual_ss: resid.norm_squared(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let a = design(&[vec![1.0, 1.0], vec![1.0, 3.0]], 2);
        let s = solve(&a, &[5.0, 9.0]);
        assert!((s.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((s.coefficients[1] - 2.0).abs() < 1e-12);
        assert_eq!(s.rank, 2);
    }

    #[test]
    fn minimum_norm_for_duplicate_columns() {
        // y = 2 x with the column duplicated: min-norm splits the weight
        let rows: Vec<Vec<f64>> = (1..=5).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (1..=5).map(|i| 2.0 * i as f64).collect();
        let s = solve(&design(&rows, 2), &y);
        assert_eq!(s.rank, 1);
        assert!(s.is_rank_deficient());
        assert!((s.coefficients[0] - 1.0).abs() < 1e-10);
        assert!((s.coefficients[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nnls_clips_negative_weight() {
        // unconstrained optimum has a negative second coefficient
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..6).map(|i| 10.0 - i as f64).collect();
        let free = solve(&design(&rows, 2), &y);
        assert!(free.coefficients[1] < 0.0);
        let nn = solve_non_negative(&design(&rows, 2), &y);
        assert!(nn.coefficients.iter().all(|c| *c >= 0.0));
        assert!((nn.coefficients[1]).abs() < 1e-12);
        assert!((nn.coefficients[0] - 7.5).abs() < 1e-9);
    }

    #[test]
    fn nnls_matches_free_when_interior() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| 1.0 + 0.5 * i as f64).collect();
        let nn = solve_non_negative(&design(&rows, 2), &y);
        assert!((nn.coefficients[0] - 1.0).abs() < 1e-9);
        assert!((nn.coefficients[1] - 0.5).abs() < 1e-9);
    }
}
