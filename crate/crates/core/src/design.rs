//! The sequential sampling driver, Latin hypercube designs and the plug-in
//! exceedance estimate.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::acquisition::{candidate_pool, select_from, tail_prob};
use crate::error::{Error, Result};
use crate::gp::{sgpr_fit, Dataset, InputPoint, SgprHyper, SgprModel};
use crate::problem::ProblemSpec;
use crate::quadrature::WeightedRule;
use crate::rng::{mix, substream, Rng};
use crate::surrogate::Surrogate;
use crate::vhgpr::{vhgpr_fit_auto, vhgpr_refit, ModelArtifact, TrainedVhgpr, MIN_POINTS};

/// `n` jittered-stratified points in `[0, 1)^d`: every marginal has exactly
/// one point in each `[k/n, (k+1)/n)`.
pub fn latin_hypercube(n: usize, d: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; d]; n];
    let below_one = 1.0 - f64::EPSILON / 2.0;
    for j in 0..d {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        for (i, k) in perm.into_iter().enumerate() {
            let u: f64 = rng.random();
            pts[i][j] = ((k as f64 + u) / n as f64).min(below_one);
        }
    }
    pts
}

pub fn map_to_input(units: &[Vec<f64>], prob: &dyn ProblemSpec) -> Result<Vec<InputPoint>> {
    units.iter().map(|u| prob.map_unit(u)).collect()
}

/// Lays out unit points the way space-filling designs are placed.
pub fn map_to_design(units: &[Vec<f64>], prob: &dyn ProblemSpec) -> Result<Vec<InputPoint>> {
    units.iter().map(|u| prob.design_point(u)).collect()
}

/// `∫ Φ((μ_f(x) − δ) / exp(μ_g(x)/2)) p_X(x) dx` under `rule`.
pub fn estimate_pe_with(m: &dyn Surrogate, delta: f64, rule: &WeightedRule) -> Result<f64> {
    let means = match &rule.axes {
        Some(axes) => m.predict_mean_tensor(axes)?,
        None => m.predict_mean_batch(&rule.nodes)?,
    };
    let mut acc = 0.0;
    for (p, w) in means.iter().zip(&rule.weights) {
        acc += w * tail_prob(p.mu_f, p.mu_g, delta);
    }
    if !acc.is_finite() {
        return Err(Error::NonFinite("exceedance estimate".into()));
    }
    Ok(acc.clamp(0.0, 1.0))
}

pub fn estimate_pe(m: &dyn Surrogate, prob: &dyn ProblemSpec) -> Result<f64> {
    estimate_pe_with(m, prob.threshold(), &prob.pe_rule()?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SeqVhgpr,
    LhVhgpr,
    LhSgpr,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::SeqVhgpr, Method::LhVhgpr, Method::LhSgpr];

    pub fn id(self) -> &'static str {
        match self {
            Method::SeqVhgpr => "seq-vhgpr",
            Method::LhVhgpr => "lh-vhgpr",
            Method::LhSgpr => "lh-sgpr",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.id() == s).ok_or_else(|| Error::UnknownId {
            kind: "method",
            given: s.to_string(),
            valid: Method::ALL.iter().map(|m| m.id()).collect::<Vec<_>>().join(", "),
        })
    }

    fn sequential(self) -> bool {
        self == Method::SeqVhgpr
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub n_init: usize,
    pub n_iter: usize,
    pub seed: u64,
    /// Density draws in each acquisition pool; a tenth as many Latin
    /// hypercube points are added.
    pub n_candidates: usize,
    /// Record the estimate every `cadence` iterations (and at the end).
    /// Space-filling methods skip the fit at unrecorded iterations.
    pub cadence: usize,
    /// Write wall times into the CSV. Off by default so CSVs are
    /// reproducible byte for byte.
    pub record_timing: bool,
}

impl RunOptions {
    pub fn new(n_init: usize, n_iter: usize, seed: u64) -> Self {
        RunOptions {
            n_init,
            n_iter,
            seed,
            n_candidates: 10_000,
            cadence: 1,
            record_timing: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Sample added at this iteration (none for iteration 0).
    pub x: Option<InputPoint>,
    pub y: Option<f64>,
    pub acq_value: Option<f64>,
    pub pe_estimate: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitSummary {
    pub iter: usize,
    pub n_points: usize,
    /// Bound value for the heteroscedastic model, log marginal likelihood
    /// for the standard one.
    pub objective: f64,
    pub converged: bool,
    /// Log-scale kernel parameters (and `μ0` or `log γ0`).
    pub hyper: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem_id: String,
    pub method: Method,
    pub seed: u64,
    pub n_init: usize,
    pub n_iter: usize,
    pub initial_inputs: Vec<InputPoint>,
    pub initial_outputs: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub fits: Vec<FitSummary>,
    /// Why the run stopped early, if it did.
    pub aborted: Option<String>,
    #[serde(skip)]
    pub final_model: Option<ModelArtifact>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl RunRecord {
    pub fn dim(&self) -> usize {
        self.initial_inputs.first().map_or(0, |x| x.dim())
    }

    /// Estimates by iteration; `None` where none was recorded.
    pub fn pe_trajectory(&self) -> Vec<Option<f64>> {
        let mut out = vec![None; self.n_iter + 1];
        for r in &self.iterations {
            out[r.iter] = r.pe_estimate;
        }
        out
    }

    pub fn final_pe(&self) -> Option<f64> {
        self.iterations.iter().rev().find_map(|r| r.pe_estimate)
    }

    pub fn completed(&self) -> bool {
        self.aborted.is_none()
    }

    /// Columns `iter, x1.., y, acq_value, pe_estimate, wall_ms`.
    pub fn write_csv(&self, w: impl Write, with_timing: bool) -> Result<()> {
        let d = self.dim();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["iter".to_string()];
        header.extend((1..=d).map(|j| format!("x{j}")));
        header.extend(["y", "acq_value", "pe_estimate", "wall_ms"].map(String::from));
        out.write_record(&header)?;
        for r in &self.iterations {
            let mut row = vec![r.iter.to_string()];
            match &r.x {
                Some(x) => row.extend(x.iter().map(|v| v.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), d)),
            }
            row.push(fmt_opt(r.y));
            row.push(fmt_opt(r.acq_value));
            row.push(fmt_opt(r.pe_estimate));
            row.push(if with_timing { format!("{:.3}", r.wall_ms) } else { String::new() });
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, with_timing: bool) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?), with_timing)
    }

    /// Metadata sidecar: seeds, problem, design, fit trace, wall times.
    pub fn save_sidecar(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}

enum Fitted {
    Vhgpr(TrainedVhgpr),
    Sgpr(SgprModel),
}

impl Fitted {
    fn surrogate(&self) -> &dyn Surrogate {
        match self {
            Fitted::Vhgpr(m) => m,
            Fitted::Sgpr(m) => m,
        }
    }

    fn summary(&self, iter: usize) -> FitSummary {
        match self {
            Fitted::Vhgpr(m) => FitSummary {
                iter,
                n_points: m.dataset().len(),
                objective: m.elbo(),
                converged: m.converged(),
                hyper: m.hyper().to_vec(),
            },
            Fitted::Sgpr(m) => {
                let mut hyper = m.hyper().kernel.to_log();
                hyper.push(m.hyper().noise_std.max(f64::MIN_POSITIVE).ln());
                FitSummary {
                    iter,
                    n_points: m.dataset().len(),
                    objective: m.log_marginal(),
                    converged: m.converged(),
                    hyper,
                }
            }
        }
    }
}

fn fit(method: Method, d: &Dataset, prev: Option<&Fitted>, round: usize) -> Result<Fitted> {
    match method {
        Method::SeqVhgpr | Method::LhVhgpr => {
            let first = match prev {
                Some(Fitted::Vhgpr(p)) => vhgpr_refit(d, p, round),
                _ => vhgpr_fit_auto(d),
            };
            match first {
                Ok(m) => Ok(Fitted::Vhgpr(m)),
                Err(e) => {
                    log::warn!("VHGPR fit failed ({e}); retrying from a fresh start");
                    vhgpr_fit_auto(d).map(Fitted::Vhgpr)
                }
            }
        }
        Method::LhSgpr => match sgpr_fit(d, &SgprHyper::from_data(d)) {
            Ok(m) => Ok(Fitted::Sgpr(m)),
            Err(e) => {
                log::warn!("SGPR fit failed ({e}); retrying from the previous hyperparameters");
                match prev {
                    Some(Fitted::Sgpr(p)) => sgpr_fit(d, p.hyper()).map(Fitted::Sgpr),
                    _ => Err(e),
                }
            }
        },
    }
}

/// Seed of the `k`-th response query of a run.
pub fn query_seed(seed: u64, k: usize) -> u64 {
    mix(seed, 10_000 + k as u64)
}

/// Runs one design: Latin hypercube initialization, then `n_iter` rounds of
/// fit, choose, query, append. The sequential method chooses by the
/// acquisition rule; the space-filling methods take the next point of a
/// second, pre-drawn Latin hypercube. Fit failures end the run early with
/// the reason recorded.
pub fn run_design(prob: &dyn ProblemSpec, method: Method, opts: &RunOptions) -> Result<RunRecord> {
    if opts.n_init < MIN_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_POINTS,
            got: opts.n_init,
        });
    }
    if opts.cadence == 0 {
        return Err(Error::InvalidArgument("cadence must be positive".into()));
    }
    let seed = opts.seed;
    let d = prob.dim();
    let rule = prob.pe_rule()?;
    let delta = prob.threshold();

    let init_inputs = map_to_design(&latin_hypercube(opts.n_init, d, &mut substream(seed, 1)), prob)?;
    let mut init_outputs = Vec::with_capacity(opts.n_init);
    for (k, x) in init_inputs.iter().enumerate() {
        init_outputs.push(prob.sample_response(x, query_seed(seed, k))?);
    }
    let extra = if method.sequential() {
        Vec::new()
    } else {
        map_to_design(&latin_hypercube(opts.n_iter, d, &mut substream(seed, 2)), prob)?
    };

    let mut record = RunRecord {
        problem_id: prob.id().to_string(),
        method,
        seed,
        n_init: opts.n_init,
        n_iter: opts.n_iter,
        initial_inputs: init_inputs.clone(),
        initial_outputs: init_outputs.clone(),
        iterations: Vec::with_capacity(opts.n_iter + 1),
        fits: Vec::new(),
        aborted: None,
        final_model: None,
    };
    let mut data = Dataset::new(init_inputs, init_outputs)?;
    let mut model: Option<Fitted> = None;
    let mut pending: (Option<InputPoint>, Option<f64>, Option<f64>) = (None, None, None);

    for j in 0..=opts.n_iter {
        let start = Instant::now();
        let recorded = j % opts.cadence == 0 || j == opts.n_iter;
        let need_fit = recorded || (method.sequential() && j < opts.n_iter);
        if need_fit {
            match fit(method, &data, model.as_ref(), j) {
                Ok(m) => {
                    record.fits.push(m.summary(j));
                    model = Some(m);
                }
                Err(e) => {
                    log::error!("run {} seed {seed}: fit failed at iteration {j}: {e}", method.id());
                    record.aborted = Some(format!("fit failed at iteration {j}: {e}"));
                    break;
                }
            }
        }
        let pe = if recorded {
            let m = model.as_ref().expect("fitted on recorded iterations");
            Some(estimate_pe_with(m.surrogate(), delta, &rule)?)
        } else {
            None
        };
        let (x, y, acq) = std::mem::take(&mut pending);
        let mut row = IterationRecord {
            iter: j,
            x,
            y,
            acq_value: acq,
            pe_estimate: pe,
            wall_ms: 0.0,
        };
        if j < opts.n_iter {
            let (x_next, acq_next) = if method.sequential() {
                let m = model.as_ref().expect("sequential runs fit every iteration");
                let mut rng = substream(seed, 1000 + j as u64);
                let pool = candidate_pool(prob, opts.n_candidates, opts.n_candidates / 10, &mut rng)?;
                let res = select_from(m.surrogate(), prob, &pool, false)?;
                (res.x_star, Some(res.value))
            } else {
                (extra[j].clone(), None)
            };
            let y_next = prob.sample_response(&x_next, query_seed(seed, opts.n_init + j))?;
            data.push(x_next.clone(), y_next)?;
            pending = (Some(x_next), Some(y_next), acq_next);
        }
        row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        record.iterations.push(row);
    }
    if let Some(Fitted::Vhgpr(m)) = &model {
        record.final_model = Some(m.to_artifact());
    }
    Ok(record)
}

/// The sequential method with the default options.
pub fn run_sequential(prob: &dyn ProblemSpec, n_init: usize, n_iter: usize, seed: u64) -> Result<RunRecord> {
    run_design(prob, Method::SeqVhgpr, &RunOptions::new(n_init, n_iter, seed))
}
