//! Tridiagonal systems with several right-hand sides.

use crate::error::StepError;

/// `sub[i]` couples row `i` to `i - 1`, `sup[i]` to `i + 1`; `sub[0]` and the last `sup` are ignored.
#[derive(Debug, Clone, Default)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    scratch: Vec<f64>,
}

impl Tridiagonal {
    pub fn with_size(n: usize) -> Self {
        Self { sub: vec![0.0; n], diag: vec![0.0; n], sup: vec![0.0; n], scratch: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Make row `i` the identity row.
    pub fn pin_row(&mut self, i: usize) {
        self.sub[i] = 0.0;
        self.diag[i] = 1.0;
        self.sup[i] = 0.0;
    }

    /// `diag_j - (|sup_{j-1}| + |sub_{j+1}|)`, the column-dominance margin of column `j`.
    pub fn column_margin(&self, j: usize) -> f64 {
        let n = self.len();
        let above = if j > 0 { self.sup[j - 1].abs() } else { 0.0 };
        let below = if j + 1 < n { self.sub[j + 1].abs() } else { 0.0 };
        self.diag[j] - above - below
    }

    pub fn min_column_margin(&self) -> f64 {
        (0..self.len()).map(|j| self.column_margin(j)).fold(f64::INFINITY, f64::min)
    }

    /// `y = A x`.
    pub fn apply<const K: usize>(&self, x: &[[f64; K]], y: &mut [[f64; K]]) {
        let n = self.len();
        for i in 0..n {
            for k in 0..K {
                let mut v = self.diag[i] * x[i][k];
                if i > 0 {
                    v += self.sub[i] * x[i - 1][k];
                }
                if i + 1 < n {
                    v += self.sup[i] * x[i + 1][k];
                }
                y[i][k] = v;
            }
        }
    }

    /// Thomas algorithm, overwriting `rhs` with the solution.
    pub fn solve<const K: usize>(&mut self, rhs: &mut [[f64; K]]) -> Result<(), StepError> {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        if n == 0 {
            return Ok(());
        }
        let c = &mut self.scratch;
        let pivot = |p: f64, row: usize| {
            if p.abs() < f64::MIN_POSITIVE || !p.is_finite() {
                Err(StepError::SingularPivot { row })
            } else {
                Ok(p)
            }
        };
        let mut p = pivot(self.diag[0], 0)?;
        c[0] = if n > 1 { self.sup[0] / p } else { 0.0 };
        rhs[0].iter_mut().for_each(|v| *v /= p);
        for i in 1..n {
            p = pivot(self.diag[i] - self.sub[i] * c[i - 1], i)?;
            c[i] = if i + 1 < n { self.sup[i] / p } else { 0.0 };
            let prev = rhs[i - 1];
            for k in 0..K {
                rhs[i][k] = (rhs[i][k] - self.sub[i] * prev[k]) / p;
            }
        }
        for i in (0..n - 1).rev() {
            let next = rhs[i + 1];
            for k in 0..K {
                rhs[i][k] -= c[i] * next[k];
            }
        }
        Ok(())
    }
}
