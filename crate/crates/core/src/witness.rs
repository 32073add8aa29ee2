//! Linear witness coefficients `w_{xy}` with an optional POVM penalty term.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::qstate::Povm;

/// Default weight of the POVM penalty term.
pub const DEFAULT_K: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Penalty {
    pub k: f64,
    pub povm: Povm,
}

/// `M_m × M_v` witness coefficients. Rows index preparations, columns index
/// the binary measurement settings.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessMatrix {
    w: DMatrix<f64>,
    penalty: Option<Penalty>,
}

impl WitnessMatrix {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite witness coefficient".into()));
        }
        Ok(WitnessMatrix { w, penalty: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged witness rows".into()));
        }
        Self::new(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    /// Attaches the penalty `-k Σ_b P(b = x | x, target)`.
    pub fn with_penalty(mut self, k: f64, povm: Povm) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidK(k));
        }
        if povm.outcomes() > self.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{}-outcome POVM needs at least as many preparations (have {})",
                povm.outcomes(),
                self.rows()
            )));
        }
        self.penalty = Some(Penalty { k, povm });
        Ok(self)
    }

    pub fn without_penalty(mut self) -> Self {
        self.penalty = None;
        self
    }

    pub fn penalty(&self) -> Option<&Penalty> {
        self.penalty.as_ref()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn rows(&self) -> usize {
        self.w.nrows()
    }

    pub fn cols(&self) -> usize {
        self.w.ncols()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.w[(x, y)]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|i| self.w.row(i).iter().cloned().collect())
            .collect()
    }

    /// Correctly rounded sum of column `y`.
    pub fn column_sum(&self, y: usize) -> f64 {
        fsum(self.w.column(y).iter().cloned())
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.cols()).map(|y| self.column_sum(y)).collect()
    }

    pub fn row_is_zero(&self, x: usize) -> bool {
        self.w.row(x).iter().all(|&v| v == 0.0)
    }
}

/// Exactly rounded floating-point summation (Shewchuk partials).
pub fn fsum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    // fold the partials from the top, correcting the final rounding
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        let yr = x - hi;
        if y == yr {
            hi = x;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::Povm;

    #[test]
    fn fsum_cancels_exactly() {
        let xs = [0.1, 0.7, -0.3, 1e16, -0.1, -0.7, 0.3, -1e16];
        assert_eq!(fsum(xs), 0.0);
        assert_eq!(fsum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(fsum([0.1; 10]), 1.0);
    }

    #[test]
    fn penalty_requires_positive_k() {
        let w = WitnessMatrix::from_rows(&vec![vec![1.0]; 4]).unwrap();
        assert_eq!(
            w.clone().with_penalty(0.0, Povm::sic()).unwrap_err(),
            Error::InvalidK(0.0)
        );
        assert!(w.with_penalty(1.0, Povm::sic()).is_ok());
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(WitnessMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }
}
