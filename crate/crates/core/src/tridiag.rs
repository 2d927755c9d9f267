//! Thomas algorithm for tridiagonal systems.

use crate::error::{HeatError, Result};
use crate::scalar::Real;

/// A tridiagonal matrix stored by diagonals. `lower[0]` and `upper[n-1]` are
/// unused.
#[derive(Debug, Clone)]
pub struct Tridiagonal<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc = acc + self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                acc = acc + self.upper[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    /// Row-wise strict diagonal dominance, which guarantees the elimination
    /// below never pivots on zero.
    pub fn is_diagonally_dominant(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| {
            let mut off = T::zero();
            if i > 0 {
                off = off + self.lower[i].abs();
            }
            if i + 1 < n {
                off = off + self.upper[i].abs();
            }
            self.diag[i].abs() > off
        })
    }

    /// Solves `A x = rhs` in place, using `scratch` (length n) for the
    /// modified upper diagonal.
    pub fn solve_in_place(&self, rhs: &mut [T], scratch: &mut [T]) -> Result<()> {
        let n = self.len();
        if rhs.len() != n || scratch.len() != n {
            return Err(HeatError::Solver(format!(
                "dimension mismatch: matrix {n}, rhs {}, scratch {}",
                rhs.len(),
                scratch.len()
            )));
        }
        if n == 0 {
            return Ok(());
        }
        let mut denom = self.diag[0];
        if denom == T::zero() {
            return Err(HeatError::Solver("zero pivot in row 0".into()));
        }
        scratch[0] = if n > 1 { self.upper[0] / denom } else { T::zero() };
        rhs[0] = rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.lower[i] * scratch[i - 1];
            if denom == T::zero() || !denom.is_finite() {
                return Err(HeatError::Solver(format!("zero pivot in row {i}")));
            }
            scratch[i] = if i + 1 < n { self.upper[i] / denom } else { T::zero() };
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            rhs[i] = rhs[i] - scratch[i] * rhs[i + 1];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_residual(m: &Tridiagonal<f64>, x: &[f64], b: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        m.apply(x, &mut y);
        y.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn solves_small_system() {
        let m = Tridiagonal {
            lower: vec![0.0, -1.0, -1.0],
            diag: vec![2.0, 2.0, 2.0],
            upper: vec![-1.0, -1.0, 0.0],
        };
        let b = vec![1.0, 0.0, 1.0];
        let mut x = b.clone();
        let mut scratch = vec![0.0; 3];
        m.solve_in_place(&mut x, &mut scratch).unwrap();
        assert!(dense_residual(&m, &x, &b) < 1e-14);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let m = Tridiagonal { lower: vec![0.0, 1.0], diag: vec![0.0, 1.0], upper: vec![1.0, 0.0] };
        let mut x = vec![1.0, 1.0];
        let mut s = vec![0.0; 2];
        assert!(matches!(m.solve_in_place(&mut x, &mut s), Err(HeatError::Solver(_))));
    }

    proptest! {
        #[test]
        fn dominant_systems_solve_to_roundoff(
            entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 2..60)
        ) {
            let n = entries.len();
            let lower: Vec<f64> = entries.iter().map(|e| e.0).collect();
            let upper: Vec<f64> = entries.iter().map(|e| e.1).collect();
            let diag: Vec<f64> = (0..n).map(|i| 2.5 + lower[i].abs() + upper[i].abs()).collect();
            let m = Tridiagonal { lower, diag, upper };
            prop_assert!(m.is_diagonally_dominant());
            let b: Vec<f64> = entries.iter().map(|e| e.2).collect();
            let mut x = b.clone();
            let mut s = vec![0.0; n];
            m.solve_in_place(&mut x, &mut s).unwrap();
            prop_assert!(dense_residual(&m, &x, &b) < 1e-12);
        }
    }
}
