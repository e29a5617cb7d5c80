//! Product-Gaussian kernel density estimate of the group parameters.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Smallest catalog accepted by the density estimate.
pub const MIN_GROUPS: usize = 100;
/// Kernel contributions are ignored beyond this many bandwidths.
const CUTOFF: f64 = 9.0;

#[derive(Clone, Debug)]
pub struct GroupDensity {
    /// Points sorted by the first coordinate.
    points: Vec<[f64; 2]>,
    pub bandwidth: [f64; 2],
    norm: f64,
}

fn mean_std(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl GroupDensity {
    /// Scott's rule `h_j = σ_j n^{−1/6}` in two dimensions.
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        if points.len() < MIN_GROUPS {
            return Err(Error::InsufficientData {
                needed: MIN_GROUPS,
                got: points.len(),
            });
        }
        let n = points.len() as f64;
        let mut bandwidth = [0.0; 2];
        for (j, h) in bandwidth.iter_mut().enumerate() {
            let (_, sd) = mean_std(points.iter().map(|p| p[j]));
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::InvalidArgument("degenerate group catalog".into()));
            }
            *h = sd * n.powf(-1.0 / 6.0);
        }
        let mut sorted = points.to_vec();
        sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        Ok(GroupDensity {
            points: sorted,
            bandwidth,
            norm: 1.0 / (n * 2.0 * std::f64::consts::PI * bandwidth[0] * bandwidth[1]),
        })
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        let [h0, h1] = self.bandwidth;
        let lo = self.points.partition_point(|p| p[0] < x[0] - CUTOFF * h0);
        let mut acc = 0.0;
        for p in &self.points[lo..] {
            let z0 = (p[0] - x[0]) / h0;
            if z0 > CUTOFF {
                break;
            }
            let z1 = (p[1] - x[1]) / h1;
            acc += (-0.5 * (z0 * z0 + z1 * z1)).exp();
        }
        acc * self.norm
    }

    /// Bootstrap a catalog point and add kernel-distributed jitter.
    pub fn sample(&self, rng: &mut Rng) -> [f64; 2] {
        let p = self.points[rng.random_range(0..self.points.len())];
        let z0: f64 = StandardNormal.sample(rng);
        let z1: f64 = StandardNormal.sample(rng);
        [p[0] + self.bandwidth[0] * z0, p[1] + self.bandwidth[1] * z1]
    }

    /// Bounding box of the data widened by `pad` bandwidths.
    pub fn support(&self, pad: f64) -> [(f64, f64); 2] {
        let mut b = [(f64::INFINITY, f64::NEG_INFINITY); 2];
        for p in &self.points {
            for j in 0..2 {
                b[j].0 = b[j].0.min(p[j]);
                b[j].1 = b[j].1.max(p[j]);
            }
        }
        for j in 0..2 {
            b[j].0 -= pad * self.bandwidth[j];
            b[j].1 += pad * self.bandwidth[j];
        }
        b
    }
}

/// Density of the `(L, A)` catalog.
pub fn group_density(points: &[[f64; 2]]) -> Result<GroupDensity> {
    GroupDensity::new(points)
}
