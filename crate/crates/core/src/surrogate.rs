//! The common face of the two regression models: a point posterior over the
//! mean response `f(x)` and the log noise variance `g(x)`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gp::{sgpr_predict, tensor_weighted_kernel_sum, InputPoint, SgprModel};

/// Posterior moments at one input. For a homoscedastic model the log
/// variance is the constant `ln γ0²` with zero variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointPosterior {
    pub mu_f: f64,
    pub var_f: f64,
    pub mu_g: f64,
    pub var_g: f64,
}

impl PointPosterior {
    pub fn new(mu_f: f64, var_f: f64, mu_g: f64, var_g: f64) -> Self {
        PointPosterior {
            mu_f,
            var_f: var_f.max(0.0),
            mu_g,
            var_g: var_g.max(0.0),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mu_f.is_finite() && self.var_f.is_finite() && self.mu_g.is_finite() && self.var_g.is_finite()
    }
}

/// Mean-only prediction, enough for the plug-in exceedance estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointMean {
    pub mu_f: f64,
    pub mu_g: f64,
}

pub trait Surrogate: Send + Sync {
    fn dim(&self) -> usize;

    fn predict(&self, x: &InputPoint) -> Result<PointPosterior>;

    fn predict_mean(&self, x: &InputPoint) -> Result<PointMean> {
        let p = self.predict(x)?;
        Ok(PointMean {
            mu_f: p.mu_f,
            mu_g: p.mu_g,
        })
    }

    fn predict_batch(&self, xs: &[InputPoint]) -> Result<Vec<PointPosterior>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    fn predict_mean_batch(&self, xs: &[InputPoint]) -> Result<Vec<PointMean>> {
        xs.iter().map(|x| self.predict_mean(x)).collect()
    }

    /// Means on the tensor grid spanned by `axes`, row-major with the last
    /// axis fastest.
    fn predict_mean_tensor(&self, axes: &[Vec<f64>]) -> Result<Vec<PointMean>> {
        self.predict_mean_batch(&tensor_points(axes))
    }
}

pub(crate) fn tensor_points(axes: &[Vec<f64>]) -> Vec<InputPoint> {
    let mut pts: Vec<Vec<f64>> = vec![vec![]];
    for axis in axes {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |a| {
                    let mut q = p.clone();
                    q.push(*a);
                    q
                })
            })
            .collect();
    }
    pts.into_iter().map(|c| InputPoint::new(c).expect("finite axes")).collect()
}

impl Surrogate for SgprModel {
    fn dim(&self) -> usize {
        self.hyper().kernel.dim()
    }

    fn predict(&self, x: &InputPoint) -> Result<PointPosterior> {
        let (mu, var) = sgpr_predict(self, x)?;
        let g = (self.hyper().noise_std.powi(2)).max(f64::MIN_POSITIVE).ln();
        Ok(PointPosterior::new(mu, var, g, 0.0))
    }

    fn predict_mean_tensor(&self, axes: &[Vec<f64>]) -> Result<Vec<PointMean>> {
        let g = (self.hyper().noise_std.powi(2)).max(f64::MIN_POSITIVE).ln();
        let f = tensor_weighted_kernel_sum(axes, self.dataset().inputs(), &self.hyper().kernel, self.alpha())?;
        Ok(f.into_iter().map(|mu_f| PointMean { mu_f, mu_g: g }).collect())
    }
}
