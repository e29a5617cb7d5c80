//! Brute-force reference values: Monte Carlo exceedance probabilities,
//! Monte Carlo model evidence, and the long-record ship census.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmarks::groups::GroupCatalog;
use crate::benchmarks::ship::{simulate_windows, ShipConfig, ShipRoll};
use crate::benchmarks::waves::WaveField;
use crate::error::{Error, Result};
use crate::gp::{kernel_matrix, Dataset};
use crate::linalg::cholesky_jittered;
use crate::problem::ProblemSpec;
use crate::rng::substream;
use crate::vhgpr::VhgprHyper;

/// Environment variable naming the oracle cache directory.
pub const CACHE_ENV: &str = "STOCHBED_CACHE_DIR";
const CHUNK: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_counts(hits: usize, n: usize, seed: u64) -> Self {
        let value = hits as f64 / n as f64;
        McEstimate {
            value,
            std_error: (value * (1.0 - value) / n as f64).sqrt(),
            n_samples: n,
            seed,
        }
    }

    /// The `value·(1 ± rel)` band.
    pub fn band(&self, rel: f64) -> (f64, f64) {
        (self.value * (1.0 - rel), self.value * (1.0 + rel))
    }
}

/// Fraction of `n` joint input/response draws above the threshold. Draws
/// come in chunks of 10⁴, each on its own substream of `seed`.
pub fn exact_mc(prob: &dyn ProblemSpec, n: usize, seed: u64) -> Result<McEstimate> {
    if n < 1000 {
        return Err(Error::InvalidArgument("Monte Carlo oracle needs n ≥ 1000".into()));
    }
    let chunks = n.div_ceil(CHUNK);
    let hits: Vec<usize> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<usize> {
            let mut rng = substream(seed, c as u64);
            let m = CHUNK.min(n - c * CHUNK);
            let mut h = 0;
            for _ in 0..m {
                if prob.sample_exceedance(&mut rng)? {
                    h += 1;
                }
            }
            Ok(h)
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_counts(hits.iter().sum(), n, seed))
}

/// Log evidence `log ∫ N(y; f, diag e^g) p(f) p(g) df dg` by Monte Carlo.
/// The integral over `f` is done exactly, leaving
/// `E_g[N(y; 0, K_f + diag e^g)]` with `g ~ N(μ0, K_g)`. Returns the log of
/// the sample mean and its delta-method standard error.
pub fn brute_force_log_evidence(d: &Dataset, h: &VhgprHyper, n_mc: usize, seed: u64) -> Result<(f64, f64)> {
    let n = d.len();
    if n > 4 {
        return Err(Error::InvalidArgument(format!("brute-force evidence is limited to n ≤ 4, got {n}")));
    }
    if n_mc < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    h.validate()?;
    let kf = kernel_matrix(d.inputs(), d.inputs(), &h.kernel_f)?;
    let kg = kernel_matrix(d.inputs(), d.inputs(), &h.kernel_g)?;
    let lg = cholesky_jittered(&kg, h.kernel_g.variance())?.l();
    let y = d.y();
    let log2pi = (2.0 * std::f64::consts::PI).ln();

    // per chunk: (max, Σ e^{l−max}, Σ e^{2(l−max)})
    let chunks = n_mc.div_ceil(CHUNK);
    let parts: Vec<(f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let m = CHUNK.min(n_mc - c * CHUNK);
            let mut ls = Vec::with_capacity(m);
            let mut z = DVector::zeros(n);
            for _ in 0..m {
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                let g = &lg * &z;
                let mut c = kf.clone();
                for i in 0..n {
                    c[(i, i)] += (h.mu0 + g[i]).exp();
                }
                let l = match c.cholesky() {
                    Some(ch) => {
                        let alpha = ch.solve(&y);
                        let logdet = 2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                        -0.5 * y.dot(&alpha) - 0.5 * logdet - 0.5 * n as f64 * log2pi
                    }
                    None => f64::NEG_INFINITY,
                };
                ls.push(l);
            }
            let mx = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s1 = ls.iter().map(|l| (l - mx).exp()).sum::<f64>();
            let s2 = ls.iter().map(|l| (2.0 * (l - mx)).exp()).sum::<f64>();
            (mx, s1, s2)
        })
        .collect();
    let mx = parts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return Err(Error::NonFinite("all evidence samples vanished".into()));
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for (m, a, b) in &parts {
        s1 += a * (m - mx).exp();
        s2 += b * (2.0 * (m - mx)).exp();
    }
    let nf = n_mc as f64;
    let mean = s1 / nf;
    let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    let ci = (var / nf).sqrt() / mean;
    Ok((mean.ln() + mx, ci))
}

/// Group-based exceedance probability over a whole record: one continuous
/// simulation from rest, counting groups whose maximum roll exceeds
/// `delta`.
pub fn ship_exact(field: &WaveField, catalog: &GroupCatalog, cfg: &ShipConfig, delta: f64) -> Result<McEstimate> {
    if catalog.is_empty() {
        return Err(Error::InvalidArgument("empty group catalog".into()));
    }
    let mut hits = 0;
    simulate_windows(field, catalog, cfg, 0, catalog.len() - 1, |_, r| {
        if r > delta {
            hits += 1;
        }
    });
    Ok(McEstimate::from_counts(hits, catalog.len(), cfg.field_seed))
}

/// Reference value for any problem: the record census for the ship, Monte
/// Carlo otherwise.
pub fn reference(prob: &dyn ProblemSpec, ship: Option<&ShipRoll>, n: usize, seed: u64) -> Result<McEstimate> {
    match ship {
        Some(s) => ship_exact(&s.field, &s.catalog, &s.cfg, s.cfg.threshold),
        None => exact_mc(prob, n, seed),
    }
}

/// On-disk store of oracle results keyed by problem, sample count and seed.
#[derive(Clone, Debug)]
pub struct OracleCache {
    dir: PathBuf,
}

impl OracleCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        OracleCache { dir: dir.into() }
    }

    /// The cache named by `STOCHBED_CACHE_DIR`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_ENV).map(|d| OracleCache::new(PathBuf::from(d)))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, fingerprint: &str, n: usize, seed: u64) -> PathBuf {
        let mut hasher = Sha256::new();
        hasher.update(fingerprint.as_bytes());
        let digest = hasher.finalize();
        let hex: String = digest.iter().take(12).map(|b| format!("{b:02x}")).collect();
        self.dir.join(format!("oracle_{hex}_n{n}_s{seed}.json"))
    }

    pub fn get(&self, fingerprint: &str, n: usize, seed: u64) -> Option<McEstimate> {
        let text = std::fs::read_to_string(self.path(fingerprint, n, seed)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn put(&self, fingerprint: &str, n: usize, seed: u64, est: &McEstimate) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        std::fs::write(self.path(fingerprint, n, seed), serde_json::to_string_pretty(est)?)?;
        Ok(())
    }

    /// Cached value or `compute()`, stored on success.
    pub fn get_or_compute(&self, fingerprint: &str, n: usize, seed: u64, compute: impl FnOnce() -> Result<McEstimate>) -> Result<McEstimate> {
        if let Some(e) = self.get(fingerprint, n, seed) {
            return Ok(e);
        }
        let e = compute()?;
        self.put(fingerprint, n, seed, &e)?;
        Ok(e)
    }
}

/// `reference`, going through the cache when one is given.
pub fn cached_reference(prob: &dyn ProblemSpec, ship: Option<&ShipRoll>, n: usize, seed: u64, cache: Option<&OracleCache>) -> Result<McEstimate> {
    match cache {
        Some(c) => c.get_or_compute(&prob.fingerprint(), n, seed, || reference(prob, ship, n, seed)),
        None => reference(prob, ship, n, seed),
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::Synthetic1D;
    use crate::gp::{sgpr_log_marginal, InputPoint, KernelParams, SgprHyper};

    #[test]
    fn threshold_below_everything_gives_one() {
        let p = Synthetic1D::new(-1e6);
        let e = exact_mc(&p, 2000, 1).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn seeds_agree() {
        let p = Synthetic1D::default();
        let a = exact_mc(&p, 200_000, 1).unwrap();
        let b = exact_mc(&p, 200_000, 2).unwrap();
        let pooled = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.value - b.value).abs() < 6.0 * pooled);
    }

    #[test]
    fn homoscedastic_collapse() {
        let d = Dataset::new(vec![0.0.into(), 0.7.into(), 1.5.into()], vec![0.3, -0.4, 1.1]).unwrap();
        let kf = KernelParams::new(1.1, vec![0.9]).unwrap();
        let h = VhgprHyper::new(-1.2, kf.clone(), KernelParams::new(1e-4, vec![1.0]).unwrap()).unwrap();
        let (est, ci) = brute_force_log_evidence(&d, &h, 20_000, 3).unwrap();
        let exact = sgpr_log_marginal(&d, &SgprHyper::new(kf, (-0.6f64).exp()).unwrap()).unwrap();
        assert!((est - exact).abs() < 3.0 * ci + 1e-6, "{est} {exact} {ci}");
    }

    #[test]
    fn rejects_large_datasets() {
        let d = Dataset::new((0..5).map(|i| InputPoint::from(i as f64)).collect(), vec![0.0; 5]).unwrap();
        let h = VhgprHyper::new(0.0, KernelParams::isotropic(1.0, 1.0, 1).unwrap(), KernelParams::isotropic(1.0, 1.0, 1).unwrap()).unwrap();
        assert!(brute_force_log_evidence(&d, &h, 100, 1).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = OracleCache::new(dir.path());
        let e = McEstimate::from_counts(3, 1000, 7);
        assert!(c.get("p", 1000, 7).is_none());
        c.put("p", 1000, 7, &e).unwrap();
        assert_eq!(c.get("p", 1000, 7), Some(e));
        let again = c.get_or_compute("p", 1000, 7, || panic!("should hit the cache")).unwrap();
        assert_eq!(again, e);
    }
}
