//! Replicated experiments: many seeded runs of one method on one problem,
//! summarized per iteration against a reference value.
//!
//! Output layout under the configured directory:
//!
//! ```text
//! runs/run_<index>_seed<seed>.csv    per-run table
//! runs/run_<index>_seed<seed>.json   per-run metadata
//! summary.csv                        mean, std and median of P_e by iteration
//! manifest.json                      config echo, build id, timings, failures
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{FourBranch2D, ShipConfig, ShipRoll, Synthetic1D};
use crate::benchmarks::waves::SpectrumConfig;
use crate::design::{run_design, Method, RunOptions, RunRecord};
use crate::error::{Error, Result};
use crate::oracle::{cached_reference, exact_mc, McEstimate, OracleCache};
use crate::problem::ProblemSpec;
use crate::vhgpr::MIN_POINTS;

pub const PROBLEM_IDS: [&str; 3] = [Synthetic1D::ID, FourBranch2D::ID, ShipRoll::ID];
pub const EXACT_MC_ID: &str = "exact-mc";

/// Relative half-width of the band drawn around the reference value.
pub const BAND: f64 = 0.05;

/// Identifier of the build that produced the outputs.
pub fn build_id() -> String {
    format!("{}+{}", env!("CARGO_PKG_VERSION"), option_env!("STOCHBED_GIT_REV").unwrap_or("unknown"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MethodId {
    Design(Method),
    ExactMc,
}

impl MethodId {
    pub fn all() -> Vec<MethodId> {
        let mut v: Vec<MethodId> = Method::ALL.into_iter().map(MethodId::Design).collect();
        v.push(MethodId::ExactMc);
        v
    }

    pub fn id(self) -> &'static str {
        match self {
            MethodId::Design(m) => m.id(),
            MethodId::ExactMc => EXACT_MC_ID,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        MethodId::all().into_iter().find(|m| m.id() == s).ok_or_else(|| Error::UnknownId {
            kind: "method",
            given: s.to_string(),
            valid: MethodId::all().iter().map(|m| m.id()).collect::<Vec<_>>().join(", "),
        })
    }
}

impl TryFrom<String> for MethodId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        MethodId::parse(&s)
    }
}

impl From<MethodId> for String {
    fn from(m: MethodId) -> String {
        m.id().to_string()
    }
}

fn check_problem_id(s: &str) -> Result<()> {
    if PROBLEM_IDS.contains(&s) {
        Ok(())
    } else {
        Err(Error::UnknownId {
            kind: "problem",
            given: s.to_string(),
            valid: PROBLEM_IDS.join(", "),
        })
    }
}

/// One layer of settings. A config file parses into a layer, command-line
/// flags form another, and later layers win.
///
/// ```toml
/// problem = "synthetic1d"      # synthetic1d | fourbranch2d | shiproll
/// method = "seq-vhgpr"         # seq-vhgpr | lh-vhgpr | lh-sgpr | exact-mc
/// n_init = 40
/// n_iter = 60
/// replications = 20
/// seed = 1                     # replication i uses seed + i
/// out = "results"
/// jobs = 4
/// n_candidates = 10000
/// cadence = 1
/// record_timing = false
/// oracle_samples = 1000000
/// oracle_seed = 20210
/// threshold = 9.0              # overrides the problem's default
/// ship_hours = 150.0
/// ship_field_seed = 1
/// ship_cache = "ship-cache"
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigLayer {
    pub problem: Option<String>,
    pub method: Option<String>,
    pub n_init: Option<usize>,
    pub n_iter: Option<usize>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub n_candidates: Option<usize>,
    pub cadence: Option<usize>,
    pub record_timing: Option<bool>,
    pub oracle_samples: Option<usize>,
    pub oracle_seed: Option<u64>,
    pub threshold: Option<f64>,
    pub ship_hours: Option<f64>,
    pub ship_field_seed: Option<u64>,
    pub ship_cache: Option<PathBuf>,
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// `other`'s values where set, ours elsewhere.
    pub fn merged(mut self, other: &ConfigLayer) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f.clone(); } )* };
        }
        take!(
            problem, method, n_init, n_iter, replications, seed, out, jobs, n_candidates, cadence, record_timing,
            oracle_samples, oracle_seed, threshold, ship_hours, ship_field_seed, ship_cache
        );
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: String,
    pub method: MethodId,
    pub n_init: usize,
    pub n_iter: usize,
    pub replications: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    pub n_candidates: usize,
    pub cadence: usize,
    pub record_timing: bool,
    pub oracle_samples: usize,
    pub oracle_seed: u64,
    pub threshold: Option<f64>,
    pub ship_hours: f64,
    pub ship_field_seed: u64,
    pub ship_cache: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for `problem` with the reference budgets.
    pub fn for_problem(problem: &str) -> Result<Self> {
        check_problem_id(problem)?;
        let n_init = if problem == Synthetic1D::ID { 40 } else { 60 };
        Ok(ExperimentConfig {
            problem: problem.to_string(),
            method: MethodId::Design(Method::SeqVhgpr),
            n_init,
            n_iter: 60,
            replications: 20,
            seed: 1,
            out: PathBuf::from("results"),
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            n_candidates: 10_000,
            cadence: 1,
            record_timing: false,
            oracle_samples: 1_000_000,
            oracle_seed: 20210,
            threshold: None,
            ship_hours: 150.0,
            ship_field_seed: 1,
            ship_cache: None,
        })
    }

    /// Resolves layers in order on top of the problem defaults.
    pub fn from_layers(layers: &[ConfigLayer]) -> Result<Self> {
        let merged = layers.iter().fold(ConfigLayer::default(), |acc, l| acc.merged(l));
        let problem = merged.problem.clone().unwrap_or_else(|| Synthetic1D::ID.to_string());
        let mut cfg = Self::for_problem(&problem)?;
        if let Some(m) = &merged.method {
            cfg.method = MethodId::parse(m)?;
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = merged.$f.clone() { cfg.$f = v; } )* };
        }
        set!(n_init, n_iter, replications, seed, out, jobs, n_candidates, cadence, record_timing, oracle_samples, oracle_seed, ship_hours, ship_field_seed);
        cfg.threshold = merged.threshold;
        cfg.ship_cache = merged.ship_cache;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_problem_id(&self.problem)?;
        let positive = [
            ("replications", self.replications),
            ("jobs", self.jobs),
            ("n_candidates", self.n_candidates),
            ("cadence", self.cadence),
            ("oracle_samples", self.oracle_samples),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.n_init < MIN_POINTS {
            return Err(Error::Config(format!("n_init must be at least {MIN_POINTS}")));
        }
        if let Some(t) = self.threshold {
            if !t.is_finite() {
                return Err(Error::Config("threshold must be finite".into()));
            }
        }
        if !(self.ship_hours > 0.0 && self.ship_hours.is_finite()) {
            return Err(Error::Config("ship_hours must be positive".into()));
        }
        Ok(())
    }

    /// Run options for replication `index`.
    pub fn run_options(&self, index: usize) -> RunOptions {
        RunOptions {
            n_init: self.n_init,
            n_iter: self.n_iter,
            seed: self.replication_seed(index),
            n_candidates: self.n_candidates,
            cadence: self.cadence,
            record_timing: self.record_timing,
        }
    }

    pub fn replication_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }

    pub fn ship_config(&self) -> ShipConfig {
        let mut c = ShipConfig {
            spectrum: SpectrumConfig::with_hours(self.ship_hours),
            field_seed: self.ship_field_seed,
            ..ShipConfig::default()
        };
        if let Some(t) = self.threshold {
            c.threshold = t;
        }
        c
    }

    fn ship_dir(&self) -> PathBuf {
        if let Some(d) = &self.ship_cache {
            return d.clone();
        }
        match OracleCache::from_env() {
            Some(c) => c.dir().join("ship"),
            None => self.out.join("ship"),
        }
    }
}

/// A built problem instance.
pub enum Problem {
    Synthetic1D(Synthetic1D),
    FourBranch2D(FourBranch2D),
    ShipRoll(Box<ShipRoll>),
}

impl Problem {
    /// Builds the problem named in `cfg`. The ship record is generated on
    /// first use and reused from disk afterwards.
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        check_problem_id(&cfg.problem)?;
        Ok(match cfg.problem.as_str() {
            Synthetic1D::ID => Problem::Synthetic1D(cfg.threshold.map_or_else(Synthetic1D::default, Synthetic1D::new)),
            FourBranch2D::ID => Problem::FourBranch2D(cfg.threshold.map_or_else(FourBranch2D::default, FourBranch2D::new)),
            _ => Problem::ShipRoll(Box::new(ShipRoll::load_or_build(cfg.ship_config(), &cfg.ship_dir())?)),
        })
    }

    pub fn spec(&self) -> &dyn ProblemSpec {
        match self {
            Problem::Synthetic1D(p) => p,
            Problem::FourBranch2D(p) => p,
            Problem::ShipRoll(p) => p.as_ref(),
        }
    }

    pub fn ship(&self) -> Option<&ShipRoll> {
        match self {
            Problem::ShipRoll(p) => Some(p),
            _ => None,
        }
    }

    /// Reference value: Monte Carlo for the synthetic problems, the record
    /// census for the ship. Goes through `STOCHBED_CACHE_DIR` when set.
    pub fn reference(&self, cfg: &ExperimentConfig) -> Result<McEstimate> {
        cached_reference(self.spec(), self.ship(), cfg.oracle_samples, cfg.oracle_seed, OracleCache::from_env().as_ref())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub iter: usize,
    pub n_samples: usize,
    pub n_runs: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub median: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub problem: String,
    pub method: MethodId,
    pub rows: Vec<SummaryRow>,
    pub oracle: Option<McEstimate>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Mean, sample standard deviation (0 for one value) and median.
pub fn describe(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Some((mean, std, median(&s)))
}

impl SummaryTable {
    /// Per-iteration statistics over the trajectories (`n_iter + 1` rows).
    pub fn from_trajectories(problem: &str, method: MethodId, n_init: usize, n_iter: usize, runs: &[Vec<Option<f64>>], oracle: Option<McEstimate>) -> Self {
        let rows = (0..=n_iter)
            .map(|j| {
                let vals: Vec<f64> = runs.iter().filter_map(|r| r.get(j).copied().flatten()).collect();
                let stats = describe(&vals);
                SummaryRow {
                    iter: j,
                    n_samples: n_init + j,
                    n_runs: vals.len(),
                    mean: stats.map(|s| s.0),
                    std: stats.map(|s| s.1),
                    median: stats.map(|s| s.2),
                }
            })
            .collect();
        SummaryTable {
            problem: problem.to_string(),
            method,
            rows,
            oracle,
        }
    }

    pub fn last(&self) -> Option<&SummaryRow> {
        self.rows.iter().rev().find(|r| r.n_runs > 0)
    }

    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iter", "n_samples", "n_runs", "mean", "std", "median", "oracle", "band_lo", "band_hi"])?;
        let (o, lo, hi) = match &self.oracle {
            Some(o) => {
                let (lo, hi) = o.band(BAND);
                (o.value.to_string(), lo.to_string(), hi.to_string())
            }
            None => Default::default(),
        };
        let s = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            out.write_record([
                r.iter.to_string(),
                r.n_samples.to_string(),
                r.n_runs.to_string(),
                s(r.mean),
                s(r.std),
                s(r.median),
                o.clone(),
                lo.clone(),
                hi.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(fs::File::create(path)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationStatus {
    pub index: usize,
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
    pub final_pe: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub build_id: String,
    pub config: ExperimentConfig,
    pub oracle: Option<McEstimate>,
    pub replications: Vec<ReplicationStatus>,
    pub failed: Vec<usize>,
    pub wall_ms: f64,
}

impl Manifest {
    pub fn all_succeeded(&self) -> bool {
        self.failed.is_empty()
    }
}

pub struct ExperimentOutcome {
    pub summary: SummaryTable,
    pub manifest: Manifest,
    /// Trajectories by replication; empty for failed replications that
    /// produced nothing.
    pub trajectories: Vec<Vec<Option<f64>>>,
}

impl ExperimentOutcome {
    /// Estimates at iteration `j` over the replications that recorded one.
    pub fn values_at(&self, j: usize) -> Vec<f64> {
        self.trajectories.iter().filter_map(|t| t.get(j).copied().flatten()).collect()
    }

    pub fn final_values(&self) -> Vec<f64> {
        self.trajectories.iter().filter_map(|t| t.iter().rev().find_map(|v| *v)).collect()
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run_file(dir: &Path, index: usize, seed: u64, ext: &str) -> PathBuf {
    dir.join(format!("run_{index:03}_seed{seed}.{ext}"))
}

struct Replication {
    status: ReplicationStatus,
    trajectory: Vec<Option<f64>>,
}

fn design_replication(prob: &dyn ProblemSpec, method: Method, cfg: &ExperimentConfig, runs_dir: &Path, index: usize) -> Replication {
    let opts = cfg.run_options(index);
    let start = Instant::now();
    let result = run_design(prob, method, &opts).and_then(|r: RunRecord| {
        r.save_csv(&run_file(runs_dir, index, opts.seed, "csv"), cfg.record_timing)?;
        r.save_sidecar(&run_file(runs_dir, index, opts.seed, "json"))?;
        Ok(r)
    });
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (trajectory, error, final_pe) = match result {
        Ok(r) => (r.pe_trajectory(), r.aborted.clone(), r.final_pe()),
        Err(e) => (Vec::new(), Some(e.to_string()), None),
    };
    if let Some(e) = &error {
        log::warn!("replication {index} (seed {}) failed: {e}", opts.seed);
    }
    Replication {
        status: ReplicationStatus {
            index,
            seed: opts.seed,
            ok: error.is_none(),
            error,
            final_pe,
            wall_ms,
        },
        trajectory,
    }
}

fn mc_replication(prob: &Problem, cfg: &ExperimentConfig, runs_dir: &Path, index: usize) -> Replication {
    let seed = cfg.replication_seed(index);
    let start = Instant::now();
    let result = match prob.ship() {
        Some(s) => crate::oracle::reference(prob.spec(), Some(s), cfg.oracle_samples, seed),
        None => exact_mc(prob.spec(), cfg.oracle_samples, seed),
    }
    .and_then(|e| {
        fs::write(run_file(runs_dir, index, seed, "json"), serde_json::to_string_pretty(&e)?)?;
        Ok(e)
    });
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (trajectory, error, final_pe) = match result {
        Ok(e) => (vec![Some(e.value); cfg.n_iter + 1], None, Some(e.value)),
        Err(e) => (Vec::new(), Some(e.to_string()), None),
    };
    Replication {
        status: ReplicationStatus {
            index,
            seed,
            ok: error.is_none(),
            error,
            final_pe,
            wall_ms,
        },
        trajectory,
    }
}

/// Runs the configured replications and writes their outputs. Failed
/// replications are listed in the manifest rather than aborting the rest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let prob = Problem::build(cfg)?;
    let oracle = prob.reference(cfg)?;
    run_with(cfg, &prob, Some(oracle))
}

/// [`run_experiment`] on an already built problem and reference value.
pub fn run_with(cfg: &ExperimentConfig, prob: &Problem, oracle: Option<McEstimate>) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let runs_dir = cfg.out.join("runs");
    fs::create_dir_all(&runs_dir)?;
    let start = Instant::now();
    let reps: Vec<Replication> = pool(cfg.jobs)?.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|i| match cfg.method {
                MethodId::Design(m) => design_replication(prob.spec(), m, cfg, &runs_dir, i),
                MethodId::ExactMc => mc_replication(prob, cfg, &runs_dir, i),
            })
            .collect()
    });
    let trajectories: Vec<Vec<Option<f64>>> = reps.iter().map(|r| r.trajectory.clone()).collect();
    let summary = SummaryTable::from_trajectories(&cfg.problem, cfg.method, cfg.n_init, cfg.n_iter, &trajectories, oracle.clone());
    summary.save_csv(&cfg.out.join("summary.csv"))?;
    let statuses: Vec<ReplicationStatus> = reps.into_iter().map(|r| r.status).collect();
    let manifest = Manifest {
        build_id: build_id(),
        config: cfg.clone(),
        oracle,
        failed: statuses.iter().filter(|s| !s.ok).map(|s| s.index).collect(),
        replications: statuses,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    fs::write(cfg.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(ExperimentOutcome {
        summary,
        manifest,
        trajectories,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub method: MethodId,
    pub final_mean: Option<f64>,
    pub final_std: Option<f64>,
    pub final_median: Option<f64>,
    /// Final mean over the reference value.
    pub ratio_mean: Option<f64>,
    pub ratio_median: Option<f64>,
    pub failed: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub problem: String,
    pub oracle: McEstimate,
    pub entries: Vec<ComparisonEntry>,
}

impl ComparisonReport {
    pub fn entry(&self, m: MethodId) -> Option<&ComparisonEntry> {
        self.entries.iter().find(|e| e.method == m)
    }

    pub fn all_succeeded(&self) -> bool {
        self.entries.iter().all(|e| e.failed.is_empty())
    }
}

/// Per-method summaries side by side: `iter, n_samples`, then mean, std
/// and median for each method, then the reference and its band.
pub fn write_combined_csv(tables: &[SummaryTable], oracle: &McEstimate, w: impl std::io::Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["iter".to_string(), "n_samples".to_string()];
    for t in tables {
        for col in ["mean", "std", "median"] {
            header.push(format!("{}_{col}", t.method.id()));
        }
    }
    header.extend(["oracle", "band_lo", "band_hi"].map(String::from));
    out.write_record(&header)?;
    let (lo, hi) = oracle.band(BAND);
    let n_rows = tables.iter().map(|t| t.rows.len()).max().unwrap_or(0);
    let s = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for j in 0..n_rows {
        let first = tables.iter().find_map(|t| t.rows.get(j));
        let mut row = vec![j.to_string(), first.map(|r| r.n_samples.to_string()).unwrap_or_default()];
        for t in tables {
            let r = t.rows.get(j);
            row.push(s(r.and_then(|r| r.mean)));
            row.push(s(r.and_then(|r| r.std)));
            row.push(s(r.and_then(|r| r.median)));
        }
        row.extend([oracle.value.to_string(), lo.to_string(), hi.to_string()]);
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Runs every method in `methods` on the same seeds and budget, each into
/// `<out>/<method>/`, and writes `compare.csv` and `compare.json`.
pub fn compare(methods: &[MethodId], cfg: &ExperimentConfig) -> Result<(ComparisonReport, Vec<ExperimentOutcome>)> {
    if methods.is_empty() {
        return Err(Error::Config("no methods to compare".into()));
    }
    cfg.validate()?;
    let prob = Problem::build(cfg)?;
    let oracle = prob.reference(cfg)?;
    let mut outcomes = Vec::with_capacity(methods.len());
    let mut entries = Vec::with_capacity(methods.len());
    for &m in methods {
        let sub = ExperimentConfig {
            method: m,
            out: cfg.out.join(m.id()),
            ..cfg.clone()
        };
        let o = run_with(&sub, &prob, Some(oracle.clone()))?;
        let stats = describe(&o.final_values());
        let ratio = |v: Option<f64>| v.filter(|_| oracle.value > 0.0).map(|v| v / oracle.value);
        entries.push(ComparisonEntry {
            method: m,
            final_mean: stats.map(|s| s.0),
            final_std: stats.map(|s| s.1),
            final_median: stats.map(|s| s.2),
            ratio_mean: ratio(stats.map(|s| s.0)),
            ratio_median: ratio(stats.map(|s| s.2)),
            failed: o.manifest.failed.clone(),
        });
        outcomes.push(o);
    }
    let report = ComparisonReport {
        problem: cfg.problem.clone(),
        oracle: oracle.clone(),
        entries,
    };
    let tables: Vec<SummaryTable> = outcomes.iter().map(|o| o.summary.clone()).collect();
    write_combined_csv(&tables, &oracle, std::io::BufWriter::new(fs::File::create(cfg.out.join("compare.csv"))?))?;
    fs::write(cfg.out.join("compare.json"), serde_json::to_string_pretty(&report)?)?;
    Ok((report, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_override_in_order() {
        let file = ConfigLayer::from_toml("problem = \"fourbranch2d\"\nn_iter = 5\nreplications = 3\n").unwrap();
        let flags = ConfigLayer {
            n_iter: Some(7),
            ..Default::default()
        };
        let cfg = ExperimentConfig::from_layers(&[file, flags]).unwrap();
        assert_eq!(cfg.problem, "fourbranch2d");
        assert_eq!(cfg.n_init, 60);
        assert_eq!(cfg.n_iter, 7);
        assert_eq!(cfg.replications, 3);
    }

    #[test]
    fn unknown_ids_list_valid_ones() {
        let e = ExperimentConfig::for_problem("nope").unwrap_err().to_string();
        assert!(e.contains("synthetic1d") && e.contains("shiproll"), "{e}");
        let e = MethodId::parse("mc").unwrap_err().to_string();
        assert!(e.contains("exact-mc"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigLayer::from_toml("n_inti = 3").is_err());
    }

    #[test]
    fn zero_counts_are_rejected() {
        let l = ConfigLayer {
            replications: Some(0),
            ..Default::default()
        };
        assert!(ExperimentConfig::from_layers(&[l]).is_err());
    }

    #[test]
    fn method_ids_round_trip() {
        for m in MethodId::all() {
            assert_eq!(MethodId::parse(m.id()).unwrap(), m);
            let s = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<MethodId>(&s).unwrap(), m);
        }
    }

    #[test]
    fn describe_small_samples() {
        assert_eq!(describe(&[]), None);
        assert_eq!(describe(&[2.0]), Some((2.0, 0.0, 2.0)));
        let (m, s, med) = describe(&[1.0, 2.0, 3.0, 10.0]).unwrap();
        assert_eq!(m, 4.0);
        assert_eq!(med, 2.5);
        assert!((s - (50.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn summary_has_one_row_per_iteration() {
        let runs = vec![vec![Some(0.1), None, Some(0.3)], vec![Some(0.2), None, Some(0.5)], vec![]];
        let t = SummaryTable::from_trajectories("synthetic1d", MethodId::Design(Method::LhSgpr), 10, 2, &runs, None);
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.rows[0].n_runs, 2);
        assert_eq!(t.rows[1].mean, None);
        assert_eq!(t.rows[2].n_samples, 12);
        assert!((t.rows[2].mean.unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(t.last().unwrap().iter, 2);
    }
}
