//! Cholesky factorization with the escalating-jitter policy shared by all
//! GP code: start at `1e-8·scale` on the diagonal, multiply by ten up to
//! `1e-4·scale`, then give up.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub const JITTER_START: f64 = 1e-8;
pub const JITTER_MAX: f64 = 1e-4;

/// A Cholesky factor together with the diagonal jitter that was added.
#[derive(Clone, Debug)]
pub struct JitteredCholesky {
    pub factor: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl JitteredCholesky {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(b)
    }

    pub fn l(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    /// `log |A + jitter·I|`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.factor.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L v = b` for the lower factor.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let l = self.factor.l_dirty();
        let n = b.len();
        let mut v = b.clone();
        for i in 0..n {
            let mut s = v[i];
            for k in 0..i {
                s -= l[(i, k)] * v[k];
            }
            v[i] = s / l[(i, i)];
        }
        v
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.factor.inverse()
    }
}

/// Factorizes `a + jitter·I`, escalating the jitter when needed.
pub fn cholesky_jittered(a: &DMatrix<f64>, scale: f64) -> Result<JitteredCholesky> {
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("matrix passed to Cholesky".into()));
    }
    let scale = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
    let mut eps = JITTER_START;
    while eps <= JITTER_MAX * (1.0 + 1e-12) {
        let jitter = eps * scale;
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(factor) = Cholesky::new(m) {
            if factor.l_dirty().diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
                return Ok(JitteredCholesky { factor, jitter });
            }
        }
        eps *= 10.0;
    }
    Err(Error::NotPositiveDefinite {
        jitter: JITTER_MAX * scale,
    })
}
