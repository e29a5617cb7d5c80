//! The problem abstraction: an input density, a seeded stochastic
//! input-to-response map and a threshold.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::gp::InputPoint;
use crate::quadrature::WeightedRule;
use crate::rng::Rng;

/// Number of standard deviations spanned by a Gaussian domain box.
pub const DOMAIN_HALF_WIDTH: f64 = 5.0;
/// Quadrature nodes per dimension for Gaussian inputs.
pub const QUAD_NODES_1D: usize = 800;
pub const QUAD_NODES_2D: usize = 200;

pub trait ProblemSpec: Send + Sync {
    fn id(&self) -> &str;

    fn dim(&self) -> usize;

    /// Exceedance threshold δ.
    fn threshold(&self) -> f64;

    /// Input density `p_X(x)`.
    fn density(&self, x: &InputPoint) -> f64;

    fn sample_input(&self, rng: &mut Rng) -> InputPoint;

    /// One draw of `S(x, ω)`; the same seed gives the same response.
    fn sample_response(&self, x: &InputPoint, seed: u64) -> Result<f64>;

    /// Search box, one `(lo, hi)` per dimension.
    fn domain(&self) -> Vec<(f64, f64)>;

    /// Maps a point of the unit cube to the input space through the input
    /// marginals.
    fn map_unit(&self, u: &[f64]) -> Result<InputPoint>;

    /// Where a space-filling design puts the unit point `u`. Defaults to the
    /// affine map onto [`domain`](Self::domain).
    fn design_point(&self, u: &[f64]) -> Result<InputPoint> {
        check_dim(u, self.dim())?;
        check_unit(u)?;
        let c = u.iter().zip(self.domain()).map(|(u, (lo, hi))| lo + u * (hi - lo)).collect();
        InputPoint::new(c)
    }

    /// Rule used by the plug-in exceedance estimate.
    fn pe_rule(&self) -> Result<WeightedRule>;

    /// Parameters that identify the problem, used to key cached oracle
    /// results.
    fn fingerprint(&self) -> String;

    /// One joint draw of input and response randomness.
    fn sample_exceedance(&self, rng: &mut Rng) -> Result<bool> {
        let x = self.sample_input(rng);
        let seed = rng.next_u64();
        Ok(self.sample_response(&x, seed)? > self.threshold())
    }
}

pub(crate) fn check_dim(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    Ok(())
}

pub(crate) fn check_unit(u: &[f64]) -> Result<()> {
    if u.iter().any(|v| !(0.0..1.0).contains(v)) {
        return Err(Error::InvalidArgument(format!("point {u:?} outside the unit cube")));
    }
    Ok(())
}

/// Independent Gaussian input marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianInput {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Keeps inverse-CDF images finite for `u` at the edge of the unit cube.
const UNIT_EPS: f64 = 1e-12;

impl GaussianInput {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() || mean.is_empty() {
            return Err(Error::InvalidArgument("mean and std must have equal nonzero length".into()));
        }
        if std.iter().any(|s| !(*s > 0.0 && s.is_finite())) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("Gaussian marginals need finite mean and positive std".into()));
        }
        Ok(GaussianInput { mean, std })
    }

    pub fn standard(d: usize) -> Self {
        GaussianInput {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let mut logp = 0.0;
        for ((xi, m), s) in x.iter().zip(&self.mean).zip(&self.std) {
            let z = (xi - m) / s;
            logp += -0.5 * z * z - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        logp.exp()
    }

    pub fn sample(&self, rng: &mut Rng) -> InputPoint {
        let c = self
            .mean
            .iter()
            .zip(&self.std)
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            })
            .collect();
        InputPoint::new(c).expect("finite Gaussian draw")
    }

    pub fn domain(&self) -> Vec<(f64, f64)> {
        self.mean
            .iter()
            .zip(&self.std)
            .map(|(m, s)| (m - DOMAIN_HALF_WIDTH * s, m + DOMAIN_HALF_WIDTH * s))
            .collect()
    }

    pub fn map_unit(&self, u: &[f64]) -> Result<InputPoint> {
        check_dim(u, self.dim())?;
        check_unit(u)?;
        let c = u
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((u, m), s)| {
                let n = Normal::new(*m, *s).expect("validated marginal");
                n.inverse_cdf(u.clamp(UNIT_EPS, 1.0 - UNIT_EPS))
            })
            .collect();
        InputPoint::new(c)
    }

    pub fn tensor_rule(&self) -> Result<WeightedRule> {
        let nodes = if self.dim() == 1 { QUAD_NODES_1D } else { QUAD_NODES_2D };
        WeightedRule::tensor(&self.domain(), nodes, |x| self.density(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_maps_to_mean() {
        let g = GaussianInput::new(vec![5.0], vec![1.0]).unwrap();
        assert!((g.map_unit(&[0.5]).unwrap()[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn standard_quantile() {
        let g = GaussianInput::standard(1);
        assert!((g.map_unit(&[0.97725]).unwrap()[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_points_outside_cube() {
        let g = GaussianInput::standard(2);
        assert!(g.map_unit(&[0.5, 1.0]).is_err());
        assert!(g.map_unit(&[-0.1, 0.5]).is_err());
        assert!(g.map_unit(&[0.0, 0.5]).unwrap()[0].is_finite());
    }

    #[test]
    fn rule_integrates_density() {
        let g = GaussianInput::new(vec![1.0, -2.0], vec![0.5, 2.0]).unwrap();
        let r = g.tensor_rule().unwrap();
        assert!((r.total_weight() - 1.0).abs() < 1e-5);
    }
}
