//! Local exceedance probability under the surrogate, its cubature
//! standard deviation, and the density-weighted acquisition rule.

use statrs::function::erf::erfc;

use crate::design::latin_hypercube;
use crate::error::{Error, Result};
use crate::gp::InputPoint;
use crate::problem::ProblemSpec;
use crate::quadrature::WeightedRule;
use crate::rng::{substream, Rng};
use crate::surrogate::{PointPosterior, Surrogate};

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `Φ((f − δ) / exp(g/2))`: probability that one response exceeds `delta`
/// given mean `f_val` and log variance `g_val`.
pub fn tail_prob(f_val: f64, g_val: f64, delta: f64) -> f64 {
    let diff = f_val - delta;
    if diff == 0.0 {
        return 0.5;
    }
    let sd = (0.5 * g_val).exp();
    if sd == 0.0 {
        return if diff > 0.0 { 1.0 } else { 0.0 };
    }
    std_normal_cdf(diff / sd)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubaturePoint {
    pub f_val: f64,
    pub g_val: f64,
    pub weight: f64,
}

/// The four equal-weight points `(μ_f ± √(2 var_f), μ_g)` and
/// `(μ_f, μ_g ± √(2 var_g))`.
pub fn cubature_points(p: &PointPosterior) -> [CubaturePoint; 4] {
    let df = (2.0 * p.var_f.max(0.0)).sqrt();
    let dg = (2.0 * p.var_g.max(0.0)).sqrt();
    let pt = |f_val, g_val| CubaturePoint { f_val, g_val, weight: 0.25 };
    [pt(p.mu_f + df, p.mu_g), pt(p.mu_f - df, p.mu_g), pt(p.mu_f, p.mu_g + dg), pt(p.mu_f, p.mu_g - dg)]
}

/// Cubature mean and standard deviation of `h(f, g)` under the posterior.
pub fn cubature_moments(p: &PointPosterior, h: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let pts = cubature_points(p);
    let vals = pts.map(|c| h(c.f_val, c.g_val));
    let mean: f64 = pts.iter().zip(&vals).map(|(c, v)| c.weight * v).sum();
    let var: f64 = pts.iter().zip(&vals).map(|(c, v)| c.weight * (v - mean).powi(2)).sum();
    (mean, var.max(0.0).sqrt())
}

/// Cubature mean and standard deviation of the local exceedance
/// probability.
pub fn cubature_std(p: &PointPosterior, delta: f64) -> (f64, f64) {
    cubature_moments(p, |f, g| tail_prob(f, g, delta))
}

/// `std[P(S(x) > δ)] · p_X(x)`.
pub fn acquisition_value(x: &InputPoint, m: &dyn Surrogate, prob: &dyn ProblemSpec) -> Result<f64> {
    let p = m.predict(x)?;
    Ok(weighted_std(&p, prob.density(x), prob.threshold()))
}

fn weighted_std(p: &PointPosterior, density: f64, delta: f64) -> f64 {
    if density == 0.0 {
        return 0.0;
    }
    cubature_std(p, delta).1 * density
}

#[derive(Clone, Debug)]
pub struct AcquisitionResult {
    pub x_star: InputPoint,
    pub value: f64,
    /// Position of `x_star` in the candidate pool.
    pub index: usize,
    pub candidate_values: Option<Vec<f64>>,
}

/// Candidate pool: `n_density` draws from `p_X` followed by a Latin
/// hypercube of `n_lh` points over the domain box.
pub fn candidate_pool(prob: &dyn ProblemSpec, n_density: usize, n_lh: usize, rng: &mut Rng) -> Result<Vec<InputPoint>> {
    let mut pool: Vec<InputPoint> = (0..n_density).map(|_| prob.sample_input(rng)).collect();
    if n_lh > 0 {
        let domain = prob.domain();
        for u in latin_hypercube(n_lh, prob.dim(), rng) {
            let c = u.iter().zip(&domain).map(|(u, (lo, hi))| lo + u * (hi - lo)).collect();
            pool.push(InputPoint::new(c)?);
        }
    }
    Ok(pool)
}

/// Argmax of the acquisition over `candidates`. Ties go to the lowest
/// index; non-finite values never win.
pub fn select_from(m: &dyn Surrogate, prob: &dyn ProblemSpec, candidates: &[InputPoint], keep_values: bool) -> Result<AcquisitionResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate pool".into()));
    }
    let post = m.predict_batch(candidates)?;
    let delta = prob.threshold();
    let values: Vec<f64> = candidates
        .iter()
        .zip(&post)
        .map(|(x, p)| {
            let v = weighted_std(p, prob.density(x), delta);
            if v.is_nan() { f64::NEG_INFINITY } else { v }
        })
        .collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok(AcquisitionResult {
        x_star: candidates[best].clone(),
        value: values[best],
        index: best,
        candidate_values: keep_values.then_some(values),
    })
}

/// Draws the default pool (`n_candidates` density draws plus a tenth as many
/// Latin hypercube points) from `seed` and returns its maximizer.
pub fn select_next(m: &dyn Surrogate, prob: &dyn ProblemSpec, n_candidates: usize, seed: u64) -> Result<AcquisitionResult> {
    if n_candidates == 0 {
        return Err(Error::InvalidArgument("n_candidates must be at least 1".into()));
    }
    let mut rng = substream(seed, 0);
    let pool = candidate_pool(prob, n_candidates, n_candidates / 10, &mut rng)?;
    select_from(m, prob, &pool, false)
}

/// `½ ∫ std(x) p_X(x) dx` for a given pointwise standard deviation.
pub fn variance_bound_from_std(rule: &WeightedRule, std: impl Fn(&InputPoint) -> Result<f64>) -> Result<f64> {
    let mut acc = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        if *w != 0.0 {
            acc += w * std(x)?;
        }
    }
    Ok(0.5 * acc)
}

/// Upper bound on the variance of the exceedance estimate over surrogate
/// uncertainty, `½ ∫ std[P(S(x) > δ)] p_X(x) dx`, on a tensor grid of
/// `n_quad` nodes per dimension over the domain box.
pub fn variance_upper_bound(m: &dyn Surrogate, prob: &dyn ProblemSpec, n_quad: usize) -> Result<f64> {
    if prob.dim() > 2 {
        return Err(Error::Unsupported(format!(
            "grid quadrature in {} dimensions; use variance_bound_from_std with a Monte Carlo rule",
            prob.dim()
        )));
    }
    let rule = WeightedRule::tensor(&prob.domain(), n_quad, |x| prob.density(x))?;
    let post = m.predict_batch(&rule.nodes)?;
    let delta = prob.threshold();
    let std: Vec<f64> = post.iter().map(|p| cubature_std(p, delta).1).collect();
    Ok(0.5 * rule.integrate(&std))
}
