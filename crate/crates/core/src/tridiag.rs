//! Cyclic tridiagonal solver ("sweep method"): Thomas elimination plus a
//! Sherman-Morrison correction for the periodic corner entries.

use crate::error::{KgError, Result};

/// Pre-factored Thomas elimination for a plain tridiagonal matrix with
/// sub-diagonal `lower`, diagonal `diag` and super-diagonal `upper`.
#[derive(Debug, Clone)]
struct Thomas {
    lower: Vec<f64>,
    /// Modified super-diagonal `c'_i`.
    upper_mod: Vec<f64>,
    /// Reciprocal pivots.
    inv_pivot: Vec<f64>,
}

impl Thomas {
    fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut upper_mod = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut pivot = diag[0];
        for i in 0..n {
            if i > 0 {
                pivot = diag[i] - lower[i] * upper_mod[i - 1];
            }
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(KgError::SingularSystem(format!("zero pivot at row {i}")));
            }
            inv_pivot[i] = 1.0 / pivot;
            if i + 1 < n {
                upper_mod[i] = upper[i] * inv_pivot[i];
            }
        }
        Ok(Self {
            lower: lower.to_vec(),
            upper_mod,
            inv_pivot,
        })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i] * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.upper_mod[i] * x[i + 1];
        }
    }
}

/// Periodic tridiagonal system with constant off-diagonal `off` (also placed
/// in the two corners) and arbitrary diagonal.
#[derive(Debug, Clone)]
pub struct CyclicTridiagonal {
    thomas: Thomas,
    /// Solution of the modified system against the Sherman-Morrison vector.
    z: Vec<f64>,
    gamma: f64,
    off: f64,
}

impl CyclicTridiagonal {
    pub fn new(diag: &[f64], off: f64) -> Result<Self> {
        let n = diag.len();
        if n < 3 {
            return Err(KgError::SingularSystem(format!(
                "cyclic system needs at least 3 rows, got {n}"
            )));
        }
        let gamma = -diag[0];
        let mut modified = diag.to_vec();
        modified[0] -= gamma;
        modified[n - 1] -= off * off / gamma;
        let lower = vec![off; n];
        let upper = vec![off; n];
        let thomas = Thomas::factor(&lower, &modified, &upper)?;
        let mut z = vec![0.0; n];
        z[0] = gamma;
        z[n - 1] = off;
        thomas.solve_in_place(&mut z);
        Ok(Self {
            thomas,
            z,
            gamma,
            off,
        })
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        self.thomas.solve_in_place(rhs);
        let ratio = self.off / self.gamma;
        let num = rhs[0] + ratio * rhs[n - 1];
        let den = 1.0 + self.z[0] + ratio * self.z[n - 1];
        let fact = num / den;
        for (x, z) in rhs.iter_mut().zip(&self.z) {
            *x -= fact * z;
        }
    }
}
