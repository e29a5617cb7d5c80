//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! `STOCHBED_ACCEPTANCE=1,6,9` runs a subset and `none` skips the suite.
//! `STOCHBED_SHIP_REPS` sets the ship replication count (default 10) and
//! `STOCHBED_SHIP_FULL=1` adds the 1500-hour ship run. Experiment outputs
//! are kept under the cargo target tmpdir for inspection.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use stochbed::acquisition::{cubature_moments, tail_prob, variance_upper_bound};
use stochbed::benchmarks::{FourBranch2D, Synthetic1D};
use stochbed::experiment::{run_experiment, ConfigLayer, ExperimentConfig, ExperimentOutcome};
use stochbed::gp::{kernel_matrix, sgpr_log_marginal, sgpr_log_marginal_grad};
use stochbed::linalg::cholesky_jittered;
use stochbed::oracle::brute_force_log_evidence;
use stochbed::quadrature::{composite_gauss_legendre, WeightedRule};
use stochbed::rng::{seeded, Rng};
use stochbed::vhgpr::{elbo, elbo_general, optimize_lambda, variational_moments, vhgpr_fit_auto, FitOptions};
use stochbed::{Dataset, InputPoint, KernelParams, PointPosterior, ProblemSpec, SgprHyper, Surrogate, VhgprHyper};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn scratch() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

/// Runs an experiment into a fresh directory under the scratch root.
fn experiment(name: &str, layer: ConfigLayer) -> (ExperimentOutcome, f64) {
    let out = scratch().join(name);
    let _ = fs::remove_dir_all(&out);
    let cfg = ExperimentConfig::from_layers(&[ConfigLayer { out: Some(out), ..layer }]).expect("valid config");
    let t = Instant::now();
    let o = run_experiment(&cfg).expect("experiment runs");
    let secs = t.elapsed().as_secs_f64();
    if !o.manifest.all_succeeded() {
        eprintln!("{name}: replications {:?} failed", o.manifest.failed);
    }
    (o, secs)
}

fn layer(problem: &str, method: &str, cadence: usize) -> ConfigLayer {
    ConfigLayer {
        problem: Some(problem.into()),
        method: Some(method.into()),
        n_iter: Some(60),
        replications: Some(20),
        cadence: Some(cadence),
        ..Default::default()
    }
}

/// Benchmark runs shared between criteria, computed on first use.
#[derive(Default)]
struct Runs {
    done: BTreeMap<(String, String), (ExperimentOutcome, f64)>,
}

impl Runs {
    fn get(&mut self, problem: &str, method: &str) -> &(ExperimentOutcome, f64) {
        self.done.entry((problem.into(), method.into())).or_insert_with(|| {
            // space-filling designs are only judged at the final budget
            let cadence = if method == "seq-vhgpr" { 1 } else { 60 };
            experiment(&format!("{problem}-{method}"), layer(problem, method, cadence))
        })
    }
}

fn oracle_of(o: &ExperimentOutcome) -> f64 {
    o.summary.oracle.as_ref().expect("reference value").value
}

fn median_at(o: &ExperimentOutcome, j: usize) -> f64 {
    o.summary.rows.get(j).and_then(|r| r.median).unwrap_or(f64::NAN)
}

fn final_median(o: &ExperimentOutcome) -> f64 {
    o.summary.last().and_then(|r| r.median).unwrap_or(f64::NAN)
}

fn final_std(o: &ExperimentOutcome) -> f64 {
    o.summary.last().and_then(|r| r.std).unwrap_or(f64::NAN)
}

/// `|a/b − 1|`, infinite when the reference is zero.
fn rel_dev(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        f64::INFINITY
    } else {
        (a / b - 1.0).abs()
    }
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v >= lo && v <= hi
}

fn one_d_convergence(runs: &mut Runs) -> Verdict {
    let (seq, secs) = runs.get("synthetic1d", "seq-vhgpr");
    let oracle = oracle_of(seq);
    let dev: Vec<f64> = (0..=60).map(|j| rel_dev(median_at(seq, j), oracle)).collect();
    let worst_after = dev[40..].iter().copied().fold(0.0, f64::max);
    let entered = dev.iter().position(|&d| d <= 0.05);
    let pass = dev[40] <= 0.05 && worst_after <= 0.10 && *secs < 600.0;
    verdict(
        pass,
        format!(
            "1D Seq-VHGPR median at iter 40 {:.5} vs exact {:.5} ({:+.1}%), worst deviation iter 40..60 {:.1}%, first inside 5% band {}, {:.0} s",
            median_at(seq, 40),
            oracle,
            100.0 * (median_at(seq, 40) / oracle - 1.0),
            100.0 * worst_after,
            entered.map_or("never".to_string(), |j| format!("iter {j}")),
            secs
        ),
    )
}

fn one_d_sgpr_bias(runs: &mut Runs) -> Verdict {
    let (lh, _) = runs.get("synthetic1d", "lh-sgpr");
    let ratio = final_median(lh) / oracle_of(lh);
    verdict(within(ratio, 2.0, 4.0), format!("1D LH-SGPR median at 100 samples over exact = {ratio:.2}"))
}

fn two_d_convergence(runs: &mut Runs) -> Verdict {
    let (seq, _) = runs.get("fourbranch2d", "seq-vhgpr");
    let oracle = oracle_of(seq);
    let m40 = median_at(seq, 40);
    let dev = rel_dev(m40, oracle);
    let (lh, _) = runs.get("fourbranch2d", "lh-sgpr");
    let lh_med = final_median(lh);
    let ratio = if oracle > 0.0 { lh_med / oracle } else { f64::INFINITY };
    verdict(
        dev <= 0.10 && within(ratio, 1.8, 3.5),
        format!("2D exact {oracle:.3e}, Seq-VHGPR median at iter 40 {m40:.3e} (deviation {:.1}%), LH-SGPR median {lh_med:.3e} (ratio {ratio:.2})", 100.0 * dev),
    )
}

fn variance_ordering(runs: &mut Runs) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in ["synthetic1d", "fourbranch2d"] {
        let seq = final_std(&runs.get(p, "seq-vhgpr").0);
        let lh = final_std(&runs.get(p, "lh-vhgpr").0);
        pass &= seq < lh;
        parts.push(format!("{p} std Seq-VHGPR {seq:.3e} vs LH-VHGPR {lh:.3e}"));
    }
    verdict(pass, parts.join(", "))
}

fn env_usize(key: &str, default: usize) -> usize {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn ship_cache(hours: u32) -> PathBuf {
    match std::env::var_os("STOCHBED_CACHE_DIR") {
        Some(d) => Path::new(&d).join("ship"),
        None => scratch().join(format!("ship-record-{hours}h")),
    }
}

fn ship_run(hours: u32, check_at: usize) -> (Verdict, f64) {
    let reps = env_usize("STOCHBED_SHIP_REPS", 10);
    let (o, secs) = experiment(
        &format!("shiproll-{hours}h"),
        ConfigLayer {
            replications: Some(reps),
            ship_hours: Some(hours as f64),
            ship_cache: Some(ship_cache(hours)),
            ..layer("shiproll", "seq-vhgpr", 1)
        },
    );
    let oracle = oracle_of(&o);
    let m = median_at(&o, check_at);
    let dev = rel_dev(m, oracle);
    let v = verdict(
        dev <= 0.25,
        format!(
            "{hours} h record, {reps} replications: census {oracle:.4}, Seq-VHGPR median at iter {check_at} {m:.4} ({:+.1}%), {:.0} s",
            100.0 * (m / oracle - 1.0),
            secs
        ),
    );
    (v, secs)
}

fn random_hyper(dim: usize, rng: &mut Rng) -> VhgprHyper {
    VhgprHyper::new(
        rng.random_range(-1.5..0.5),
        KernelParams::new(rng.random_range(0.5..1.5), (0..dim).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap(),
        KernelParams::new(rng.random_range(0.3..1.2), (0..dim).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap(),
    )
    .unwrap()
}

fn random_data(n: usize, dim: usize, rng: &mut Rng) -> Dataset {
    let xs = (0..n)
        .map(|_| InputPoint::new((0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap())
        .collect();
    let ys = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Dataset::new(xs, ys).unwrap()
}

fn lambda_only(max_iter: usize, grad_tol: f64) -> FitOptions {
    FitOptions {
        max_iter,
        rel_tol: 0.0,
        grad_tol,
        optimize_hyper: false,
    }
}

fn elbo_bound() -> Verdict {
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for k in 0..20u64 {
        let mut rng = seeded(600 + k);
        let n = 1 + (k % 4) as usize;
        let dim = 1 + ((k / 4) % 2) as usize;
        let d = random_data(n, dim, &mut rng);
        let h = random_hyper(dim, &mut rng);
        let (ev, ci) = brute_force_log_evidence(&d, &h, 1_000_000, 6000 + k).unwrap();
        let (opt, _) = optimize_lambda(&d, &h, &vec![0.5; n], &lambda_only(500, 1e-9)).unwrap();
        let random: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.5)).collect();
        for lambda in [opt, random] {
            let l = elbo(&d, &lambda, &h).unwrap().value;
            if l > ev + 3.0 * ci {
                violations += 1;
            }
            tightest = tightest.min(ev - l);
        }
    }
    verdict(violations == 0, format!("40 bounds on 20 datasets, {violations} violations, smallest gap {tightest:.2e}"))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖ / ‖b‖`.
fn rel_norm(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(b).max(1e-12)
}

fn central_diff(theta: &[f64], step: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..theta.len())
        .map(|i| {
            let mut p = theta.to_vec();
            p[i] += step;
            let fp = f(&p);
            p[i] -= 2.0 * step;
            (fp - f(&p)) / (2.0 * step)
        })
        .collect()
}

fn gradient_checks() -> Verdict {
    let step = 1e-5;
    let mut worst_sgpr = 0.0f64;
    let mut worst_elbo = 0.0f64;
    for k in 0..20u64 {
        let mut rng = seeded(700 + k);
        let dim = 1 + (k % 2) as usize;
        let n = 3 + (k % 8) as usize;
        let d = random_data(n, dim, &mut rng);

        let kernel = KernelParams::new(rng.random_range(0.5..2.0), (0..dim).map(|_| rng.random_range(0.4..2.0)).collect()).unwrap();
        let sh = SgprHyper::new(kernel, rng.random_range(0.1..0.8)).unwrap();
        let (_, g) = sgpr_log_marginal_grad(&d, &sh).unwrap();
        let mut theta = sh.kernel.to_log();
        theta.push(sh.noise_std.ln());
        let fd = central_diff(&theta, step, |t| {
            let h = SgprHyper::new(KernelParams::from_log(&t[..=dim]), t[dim + 1].exp()).unwrap();
            sgpr_log_marginal(&d, &h).unwrap()
        });
        worst_sgpr = worst_sgpr.max(rel_norm(&g, &fd));

        let h = random_hyper(dim, &mut rng);
        let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.5)).collect();
        let e = elbo(&d, &lambda, &h).unwrap();
        let analytic: Vec<f64> = e.grad_log_lambda.iter().chain(&e.grad_hyper).copied().collect();
        let theta: Vec<f64> = lambda.iter().map(|l| l.ln()).chain(h.to_vec()).collect();
        let fd = central_diff(&theta, step, |t| {
            let lam: Vec<f64> = t[..n].iter().map(|v| v.exp()).collect();
            elbo(&d, &lam, &VhgprHyper::from_vec(&t[n..])).unwrap().value
        });
        worst_elbo = worst_elbo.max(rel_norm(&analytic, &fd));
    }
    verdict(
        worst_sgpr < 1e-5 && worst_elbo < 1e-5,
        format!("worst relative error over 20 instances: log marginal {worst_sgpr:.1e}, ELBO {worst_elbo:.1e}"),
    )
}

/// `std[P(S(x) > δ)]` by a 48×48 Gauss–Legendre grid over ±8 posterior
/// standard deviations, a reference for the 4-point cubature.
fn quadrature_std(p: &PointPosterior, delta: f64) -> f64 {
    let (z, w) = composite_gauss_legendre(-8.0, 8.0, 48);
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (mut m1, mut m2) = (0.0, 0.0);
    for (zf, wf) in z.iter().zip(&w) {
        for (zg, wg) in z.iter().zip(&w) {
            let t = tail_prob(p.mu_f + p.var_f.sqrt() * zf, p.mu_g + p.var_g.sqrt() * zg, delta);
            let wt = wf * phi(*zf) * wg * phi(*zg);
            m1 += wt * t;
            m2 += wt * t * t;
        }
    }
    (m2 - m1 * m1).max(0.0).sqrt()
}

/// Draws from `N(mean, cov)` as columns.
fn gaussian_draws(mean: &DVector<f64>, cov: &DMatrix<f64>, n: usize, rng: &mut Rng) -> Vec<DVector<f64>> {
    let scale = cov.diagonal().max();
    let l = cholesky_jittered(cov, scale).unwrap().l();
    (0..n)
        .map(|_| {
            let z = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
            mean + &l * z
        })
        .collect()
}

fn variance_bound() -> Verdict {
    let n_mc = 4000;
    let mut violations = 0;
    let mut strict_violations = 0;
    let mut worst: Option<(f64, String)> = None;
    let one_d = Synthetic1D::default();
    let two_d = FourBranch2D::default();
    for k in 0..100u64 {
        let mut rng = seeded(800 + k);
        let (prob, n_quad): (&dyn ProblemSpec, usize) = if k % 4 == 3 { (&two_d, 16) } else { (&one_d, 64) };
        let n = 10 + (k % 21) as usize;
        let xs: Vec<InputPoint> = (0..n).map(|_| prob.sample_input(&mut rng)).collect();
        let ys = xs.iter().enumerate().map(|(i, x)| prob.sample_response(x, 10_000 * k + i as u64).unwrap()).collect();
        let m = vhgpr_fit_auto(&Dataset::new(xs, ys).unwrap()).unwrap();

        let bound = variance_upper_bound(&m, prob, n_quad).unwrap();
        let rule = WeightedRule::tensor(&prob.domain(), n_quad, |x| prob.density(x)).unwrap();
        let (mf, cf, mg, cg) = m.joint_posterior(&rule.nodes).unwrap();
        let fs = gaussian_draws(&mf, &cf, n_mc, &mut rng);
        let gs = gaussian_draws(&mg, &cg, n_mc, &mut rng);
        let delta = prob.threshold();
        let pe: Vec<f64> = fs
            .iter()
            .zip(&gs)
            .map(|(f, g)| {
                let local: Vec<f64> = f.iter().zip(g.iter()).map(|(f, g)| tail_prob(*f, *g, delta)).collect();
                rule.integrate(&local)
            })
            .collect();
        let nf = n_mc as f64;
        let mean = pe.iter().sum::<f64>() / nf;
        let var = pe.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let m4 = pe.iter().map(|p| (p - mean).powi(4)).sum::<f64>() / nf;
        let se = ((m4 - var * var).max(0.0) / nf).sqrt();
        if var > bound + 3.0 * se {
            violations += 1;
            let post = m.predict_batch(&rule.nodes).unwrap();
            let stds: Vec<f64> = post.iter().map(|p| quadrature_std(p, delta)).collect();
            if var > 0.5 * rule.integrate(&stds) + 3.0 * se {
                strict_violations += 1;
            }
        }
        let excess = (var - bound) / se.max(f64::MIN_POSITIVE);
        if worst.as_ref().is_none_or(|w| excess > w.0) {
            worst = Some((excess, format!("surrogate {k} ({}, n={n}): variance {var:.3e} ± {se:.1e}, bound {bound:.3e}", prob.id())));
        }
    }
    verdict(
        violations == 0,
        format!(
            "100 surrogates, {violations} violations ({strict_violations} when the std comes from fine quadrature instead of the 4-point cubature), closest {}",
            worst.unwrap().1
        ),
    )
}

/// `E[x^k]` for `x ~ N(m, v)`, `k ≤ 3`.
fn gaussian_moment(m: f64, v: f64, k: u32) -> f64 {
    match k {
        0 => 1.0,
        1 => m,
        2 => m * m + v,
        3 => m * m * m + 3.0 * m * v,
        _ => unreachable!(),
    }
}

fn cubature_exactness() -> Verdict {
    let mut worst = 0.0f64;
    let mut rng = seeded(900);
    for _ in 0..20 {
        let p = PointPosterior::new(rng.random_range(-3.0..3.0), rng.random_range(0.01..4.0), rng.random_range(-3.0..3.0), rng.random_range(0.01..4.0));
        for a in 0..=3u32 {
            for b in 0..=(3 - a) {
                let (c, _) = cubature_moments(&p, |f, g| f.powi(a as i32) * g.powi(b as i32));
                let exact = gaussian_moment(p.mu_f, p.var_f, a) * gaussian_moment(p.mu_g, p.var_g, b);
                worst = worst.max((c - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    verdict(worst < 1e-10, format!("10 monomials on 20 posteriors, worst error {worst:.1e}"))
}

/// Central difference with one Richardson step, error `O(h⁴)`.
fn richardson(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let d = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

fn stationarity() -> Verdict {
    let step = 1e-4;
    let mut worst = 0.0f64;
    for k in 0..5u64 {
        let mut rng = seeded(1000 + k);
        let n = 5;
        // spread inputs keep Σ well conditioned for the difference quotient
        let xs = (0..n).map(|i| InputPoint::from(1.2 * i as f64 + rng.random_range(-0.2..0.2))).collect();
        let ys = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = Dataset::new(xs, ys).unwrap();
        let h = random_hyper(1, &mut rng);
        let (lambda, _) = optimize_lambda(&d, &h, &vec![0.5; n], &lambda_only(5000, 1e-11)).unwrap();
        let kg = kernel_matrix(d.inputs(), d.inputs(), &h.kernel_g).unwrap();
        let (mu, sigma) = variational_moments(&lambda, &kg, h.mu0).unwrap();
        for i in 0..n {
            let f = |t: f64| {
                let mut m = mu.clone();
                m[i] += t;
                elbo_general(&d, &m, &sigma, &h).unwrap()
            };
            worst = worst.max(richardson(f, step).abs());
            for j in 0..=i {
                let f = |t: f64| {
                    let mut s = sigma.clone();
                    s[(i, j)] += t;
                    if i != j {
                        s[(j, i)] += t;
                    }
                    elbo_general(&d, &mu, &s, &h).unwrap()
                };
                worst = worst.max(richardson(f, step).abs());
            }
        }
    }
    verdict(worst < 1e-6, format!("largest |∂L| over μ and Σ at the optimal Λ on 5 datasets: {worst:.1e}"))
}

fn csv_tree(dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>, root: &Path) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            csv_tree(&p, out, root);
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
        }
    }
}

fn determinism() -> Verdict {
    let mut files = 0;
    let mut mismatched = Vec::new();
    for problem in ["synthetic1d", "fourbranch2d"] {
        for method in ["seq-vhgpr", "lh-vhgpr", "lh-sgpr", "exact-mc"] {
            let trees: Vec<BTreeMap<PathBuf, Vec<u8>>> = ["a", "b"]
                .iter()
                .map(|tag| {
                    let name = format!("rerun-{tag}/{problem}-{method}");
                    experiment(
                        &name,
                        ConfigLayer {
                            problem: Some(problem.into()),
                            method: Some(method.into()),
                            n_init: Some(12),
                            n_iter: Some(4),
                            replications: Some(3),
                            n_candidates: Some(500),
                            oracle_samples: Some(20_000),
                            ..Default::default()
                        },
                    );
                    let root = scratch().join(&name);
                    let mut t = BTreeMap::new();
                    csv_tree(&root, &mut t, &root);
                    t
                })
                .collect();
            files += trees[0].len();
            if trees[0] != trees[1] || trees[0].is_empty() {
                mismatched.push(format!("{problem}/{method}"));
            }
        }
    }
    verdict(
        mismatched.is_empty(),
        format!("{files} CSV files over 8 configurations compared byte for byte, mismatches: {}", if mismatched.is_empty() { "none".to_string() } else { mismatched.join(" ") }),
    )
}

fn selected() -> BTreeSet<usize> {
    match std::env::var("STOCHBED_ACCEPTANCE") {
        Ok(v) if !v.trim().is_empty() => v.split(',').filter_map(|s| s.trim().parse().ok()).collect(),
        _ => (1..=11).collect(),
    }
}

fn main() -> ExitCode {
    // libtest arguments such as --nocapture are accepted and ignored
    let which = selected();
    if which.is_empty() {
        println!("no acceptance criteria selected");
        return ExitCode::SUCCESS;
    }
    let mut runs = Runs::default();
    let mut failed = 0;
    let mut report = |id: &str, name: &str, v: std::thread::Result<Verdict>| {
        let v = v.unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !v.pass {
            failed += 1;
        }
        println!("criterion {id:>3} {} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    };

    type Check = fn(&mut Runs) -> Verdict;
    let checks: [(usize, &str, Check); 11] = [
        (1, "1D convergence", one_d_convergence),
        (2, "1D SGPR bias", one_d_sgpr_bias),
        (3, "2D convergence", two_d_convergence),
        (4, "variance ordering", variance_ordering),
        (5, "ship roll", |_| ship_run(150, 60).0),
        (6, "ELBO bound", |_| elbo_bound()),
        (7, "gradient checks", |_| gradient_checks()),
        (8, "estimator variance bound", |_| variance_bound()),
        (9, "cubature exactness", |_| cubature_exactness()),
        (10, "stationarity", |_| stationarity()),
        (11, "determinism", |_| determinism()),
    ];
    for (id, name, check) in checks {
        if which.contains(&id) {
            let v = catch_unwind(AssertUnwindSafe(|| check(&mut runs)));
            report(&id.to_string(), name, v);
        }
    }
    if which.contains(&5) && std::env::var_os("STOCHBED_SHIP_FULL").is_some() {
        let v = catch_unwind(|| ship_run(1500, 30).0);
        report("5b", "ship roll, 1500 h", v);
    }

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
