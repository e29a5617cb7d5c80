//! The two closed-form benchmark problems.

use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::gp::InputPoint;
use crate::problem::{check_dim, GaussianInput, ProblemSpec};
use crate::quadrature::WeightedRule;
use crate::rng::{seeded, Rng};

/// `S(x) = (x − 5)² + γ(x) Z` with `γ(x) = 0.1 + 0.1x²`, `X ~ N(5, 1)`.
#[derive(Clone, Debug)]
pub struct Synthetic1D {
    pub threshold: f64,
    input: GaussianInput,
}

impl Default for Synthetic1D {
    fn default() -> Self {
        Synthetic1D::new(9.0)
    }
}

impl Synthetic1D {
    pub const ID: &'static str = "synthetic1d";

    pub fn new(threshold: f64) -> Self {
        Synthetic1D {
            threshold,
            input: GaussianInput::new(vec![5.0], vec![1.0]).expect("valid marginal"),
        }
    }

    pub fn mean(x: f64) -> f64 {
        (x - 5.0).powi(2)
    }

    pub fn noise_std(x: f64) -> f64 {
        0.1 + 0.1 * x * x
    }
}

/// One draw of the 1D response at `x`.
pub fn synthetic1d_sample(x: f64, seed: u64) -> f64 {
    let z: f64 = StandardNormal.sample(&mut seeded(seed));
    Synthetic1D::mean(x) + Synthetic1D::noise_std(x) * z
}

impl ProblemSpec for Synthetic1D {
    fn id(&self) -> &str {
        Self::ID
    }

    fn dim(&self) -> usize {
        1
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }

    fn density(&self, x: &InputPoint) -> f64 {
        self.input.density(x)
    }

    fn sample_input(&self, rng: &mut Rng) -> InputPoint {
        self.input.sample(rng)
    }

    fn sample_response(&self, x: &InputPoint, seed: u64) -> Result<f64> {
        check_dim(x, 1)?;
        Ok(synthetic1d_sample(x[0], seed))
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        self.input.domain()
    }

    fn map_unit(&self, u: &[f64]) -> Result<InputPoint> {
        self.input.map_unit(u)
    }

    fn pe_rule(&self) -> Result<WeightedRule> {
        self.input.tensor_rule()
    }

    fn fingerprint(&self) -> String {
        format!("{};delta={:e}", Self::ID, self.threshold)
    }
}

/// `f = −min` of the four classic branches.
pub fn fourbranch_mean(x1: f64, x2: f64) -> f64 {
    let s = std::f64::consts::SQRT_2;
    let q = 8.0 + 0.1 * (x1 - x2).powi(2);
    let b = [
        q + (x1 + x2) / s,
        q - (x1 + x2) / s,
        (x1 - x2) + 6.0 / s + 5.0,
        (x2 - x1) + 6.0 / s + 5.0,
    ];
    -b.into_iter().fold(f64::INFINITY, f64::min)
}

/// Four-branch mean with Gaussian noise of std `max(|f|/6, floor)`,
/// `X ~ N(0, I)`.
#[derive(Clone, Debug)]
pub struct FourBranch2D {
    pub threshold: f64,
    pub sigma_floor: f64,
    input: GaussianInput,
}

impl Default for FourBranch2D {
    fn default() -> Self {
        FourBranch2D::new(5.0)
    }
}

impl FourBranch2D {
    pub const ID: &'static str = "fourbranch2d";

    pub fn new(threshold: f64) -> Self {
        FourBranch2D {
            threshold,
            sigma_floor: 0.05,
            input: GaussianInput::standard(2),
        }
    }

    pub fn noise_std(&self, x1: f64, x2: f64) -> f64 {
        (fourbranch_mean(x1, x2).abs() / 6.0).max(self.sigma_floor)
    }
}

impl ProblemSpec for FourBranch2D {
    fn id(&self) -> &str {
        Self::ID
    }

    fn dim(&self) -> usize {
        2
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }

    fn density(&self, x: &InputPoint) -> f64 {
        self.input.density(x)
    }

    fn sample_input(&self, rng: &mut Rng) -> InputPoint {
        self.input.sample(rng)
    }

    fn sample_response(&self, x: &InputPoint, seed: u64) -> Result<f64> {
        check_dim(x, 2)?;
        let z: f64 = StandardNormal.sample(&mut seeded(seed));
        Ok(fourbranch_mean(x[0], x[1]) + self.noise_std(x[0], x[1]) * z)
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        self.input.domain()
    }

    fn map_unit(&self, u: &[f64]) -> Result<InputPoint> {
        self.input.map_unit(u)
    }

    fn pe_rule(&self) -> Result<WeightedRule> {
        self.input.tensor_rule()
    }

    fn fingerprint(&self) -> String {
        format!("{};delta={:e};floor={:e}", Self::ID, self.threshold, self.sigma_floor)
    }
}
