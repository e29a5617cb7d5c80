//! Variational heteroscedastic GP regression.
//!
//! Two GP priors: `f ~ GP(0, k_f)` for the mean response and
//! `g ~ GP(μ0, k_g)` for the log noise variance, so that
//! `y = f(x) + N(0, e^{g(x)})`. The variational posterior over `g` at the
//! training inputs is parameterized by a positive diagonal `Λ`:
//!
//! ```text
//! μ = K_g (Λ − ½I) 1 + μ0 1,     Σ = (K_g⁻¹ + Λ)⁻¹
//! ```
//!
//! and `(Λ, θ)` maximize the marginalized variational bound
//!
//! ```text
//! L = log N(y; 0, K_f + Z) − ¼ tr Σ − KL(N(μ, Σ) ‖ N(μ0 1, K_g)),
//! Z = diag(exp(μ_i − Σ_ii / 2)).
//! ```
//!
//! All quantities involving `K_g` go through `B = I + Λ^½ K_g Λ^½`, whose
//! eigenvalues are at least one, so `K_g` itself is never inverted.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{kernel_vector, sgpr_fit, tensor_weighted_kernel_sum, Dataset, InputPoint, KernelParams, SgprHyper, SquaredDiffs, LOG_BOUND};
use crate::linalg::{cholesky_jittered, JitteredCholesky};
use crate::optim::{maximize, Bounds, OptimOptions};
use crate::surrogate::{PointMean, PointPosterior, Surrogate};

/// Smallest dataset the heteroscedastic model accepts.
pub const MIN_POINTS: usize = 5;
const MU0_BOUND: f64 = 25.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VhgprHyper {
    /// Prior mean of the log-variance process.
    pub mu0: f64,
    pub kernel_f: KernelParams,
    pub kernel_g: KernelParams,
}

impl VhgprHyper {
    pub fn new(mu0: f64, kernel_f: KernelParams, kernel_g: KernelParams) -> Result<Self> {
        let h = VhgprHyper { mu0, kernel_f, kernel_g };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel_f.validate()?;
        self.kernel_g.validate()?;
        if self.kernel_f.dim() != self.kernel_g.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.kernel_f.dim(),
                got: self.kernel_g.dim(),
            });
        }
        if !self.mu0.is_finite() {
            return Err(Error::NonFinite("mu0".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.kernel_f.dim()
    }

    /// Number of entries in the hyperparameter vector.
    pub fn n_params(dim: usize) -> usize {
        2 * (dim + 1) + 1
    }

    /// `[log τ_f, log l_f.., log τ_g, log l_g.., μ0]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.kernel_f.to_log();
        v.extend(self.kernel_g.to_log());
        v.push(self.mu0);
        v
    }

    pub fn from_vec(v: &[f64]) -> Self {
        let d = (v.len() - 3) / 2;
        VhgprHyper {
            kernel_f: KernelParams::from_log(&v[..d + 1]),
            kernel_g: KernelParams::from_log(&v[d + 1..2 * d + 2]),
            mu0: v[2 * d + 2],
        }
    }

    /// Data-driven start: lengthscales a quarter of each input range, `τ_f`
    /// the output standard deviation, unit `τ_g`, and `μ0` the log variance
    /// of the residuals of a quick homoscedastic fit.
    pub fn initial(d: &Dataset) -> Result<Self> {
        let base = SgprHyper::from_data(d);
        let residual_var = match sgpr_fit(d, &base) {
            Ok(m) => {
                let mut acc = 0.0;
                for (x, y) in d.inputs().iter().zip(d.outputs()) {
                    let (mean, _) = m.predict(x)?;
                    acc += (y - mean).powi(2);
                }
                (acc / d.len() as f64).max(m.hyper().noise_std.powi(2))
            }
            Err(_) => d.output_std().powi(2),
        };
        let mu0 = residual_var.max(1e-10).ln().clamp(-MU0_BOUND, MU0_BOUND);
        let kernel_g = KernelParams {
            amplitude: 1.0,
            lengthscales: base.kernel.lengthscales.clone(),
        };
        VhgprHyper::new(mu0, base.kernel, kernel_g)
    }
}

/// The variational posterior over `g` at the training inputs.
#[derive(Clone, Debug)]
pub struct VariationalState {
    pub lambda: Vec<f64>,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    /// `Z_ii = exp(μ_i − Σ_ii / 2)`.
    pub z: DVector<f64>,
}

fn plain_or_jittered(m: &DMatrix<f64>, scale: f64) -> Result<JitteredCholesky> {
    match Cholesky::new(m.clone()) {
        Some(factor) => Ok(JitteredCholesky { factor, jitter: 0.0 }),
        None => cholesky_jittered(m, scale),
    }
}

fn check_lambda(lambda: &[f64], n: usize) -> Result<()> {
    if lambda.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: lambda.len(),
        });
    }
    if lambda.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("Λ entries must be positive".into()));
    }
    Ok(())
}

/// `B = I + S K_g S` with `S = Λ^½`.
fn b_matrix(kg: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
    let n = s.len();
    DMatrix::from_fn(n, n, |i, j| s[i] * kg[(i, j)] * s[j] + if i == j { 1.0 } else { 0.0 })
}

fn sigma_from_b(kg: &DMatrix<f64>, s: &DVector<f64>, chol_b: &JitteredCholesky) -> DMatrix<f64> {
    let sk = DMatrix::from_fn(kg.nrows(), kg.ncols(), |i, j| s[i] * kg[(i, j)]);
    let v = chol_b
        .l()
        .solve_lower_triangular(&sk)
        .expect("Cholesky factor has a positive diagonal");
    let mut sigma = kg - v.transpose() * v;
    sigma = (&sigma + sigma.transpose()) * 0.5;
    sigma
}

/// `μ = K_g(Λ − ½I)1 + μ0·1` and `Σ = (K_g⁻¹ + Λ)⁻¹`.
pub fn variational_moments(lambda: &[f64], kg: &DMatrix<f64>, mu0: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = kg.nrows();
    if kg.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: kg.ncols(),
        });
    }
    check_lambda(lambda, n)?;
    let s = DVector::from_iterator(n, lambda.iter().map(|l| l.sqrt()));
    let a = DVector::from_iterator(n, lambda.iter().map(|l| l - 0.5));
    let chol_b = plain_or_jittered(&b_matrix(kg, &s), 1.0)?;
    let sigma = sigma_from_b(kg, &s, &chol_b);
    let mu = kg * a + DVector::from_element(n, mu0);
    Ok((mu, sigma))
}

/// Value of the bound and its gradients.
#[derive(Clone, Debug)]
pub struct ElboValue {
    pub value: f64,
    /// `∂L/∂ log Λ_ii`.
    pub grad_log_lambda: Vec<f64>,
    /// `∂L` w.r.t. `[log τ_f, log l_f.., log τ_g, log l_g.., μ0]`.
    pub grad_hyper: Vec<f64>,
}

struct ElboParts {
    value: f64,
    grad_log_lambda: Vec<f64>,
    grad_hyper: Vec<f64>,
    chol_b: JitteredCholesky,
    chol_c: JitteredCholesky,
    alpha: DVector<f64>,
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    z: DVector<f64>,
}

fn elbo_parts(diffs: &SquaredDiffs, y: &DVector<f64>, lambda: &[f64], h: &VhgprHyper, want_grad: bool) -> Result<ElboParts> {
    let n = y.len();
    check_lambda(lambda, n)?;
    let kf = diffs.kernel(&h.kernel_f);
    let kg = diffs.kernel(&h.kernel_g);
    let lam = DVector::from_column_slice(lambda);
    let s = lam.map(f64::sqrt);
    let a = lam.add_scalar(-0.5);

    let chol_b = plain_or_jittered(&b_matrix(&kg, &s), 1.0)?;
    let sigma = sigma_from_b(&kg, &s, &chol_b);
    let mu = &kg * &a + DVector::from_element(n, h.mu0);
    let z = DVector::from_fn(n, |i, _| (mu[i] - 0.5 * sigma[(i, i)]).exp());
    if z.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::NonFinite("variational noise variances".into()));
    }

    let mut c = kf.clone();
    for i in 0..n {
        c[(i, i)] += z[i];
    }
    let chol_c = cholesky_jittered(&c, h.kernel_f.variance())?;
    let alpha = chol_c.solve(y);
    let data = -0.5 * y.dot(&alpha) - 0.5 * chol_c.log_det() - 0.5 * n as f64 * (2.0 * PI).ln();

    let binv = chol_b.inverse();
    let kl = 0.5 * (binv.trace() + a.dot(&(&kg * &a)) - n as f64 + chol_b.log_det());
    let value = data - 0.25 * sigma.trace() - kl;

    let mut grad_log_lambda = Vec::new();
    let mut grad_hyper = Vec::new();
    if want_grad {
        let cinv = chol_c.inverse();
        let w = DVector::from_fn(n, |i, _| 0.5 * (alpha[i] * alpha[i] - cinv[(i, i)]));
        let g_mu = w.component_mul(&z);
        let g_s = g_mu.map(|v| -0.5 * v - 0.25);

        // ∂L/∂λ = K_g(g_μ − a) − (Σ∘Σ)(g_s + λ/2)
        let u = &kg * (&g_mu - &a);
        let v = DVector::from_fn(n, |i, _| g_s[i] + 0.5 * lam[i]);
        let sig2 = sigma.component_mul(&sigma);
        let t = sig2.transpose() * v;
        grad_log_lambda = (0..n).map(|j| lam[j] * (u[j] - t[j])).collect();

        // f-kernel: ½ tr((ααᵀ − C⁻¹) ∂K_f)
        let wf = (&alpha * alpha.transpose() - &cinv) * 0.5;
        let mut dkf = diffs.kernel_grads(&kf, &h.kernel_f);
        for i in 0..n {
            dkf[0][(i, i)] += 2.0 * chol_c.jitter;
        }
        grad_hyper.extend(dkf.iter().map(|dk| wf.component_mul(dk).sum()));

        // g-kernel: tr(W_g ∂K_g) with M = (I + K_g Λ)⁻¹ = I − K_g S B⁻¹ S
        let p = DMatrix::from_fn(n, n, |i, j| s[i] * binv[(i, j)] * s[j]);
        let m = DMatrix::identity(n, n) - &kg * p;
        let lm = DMatrix::from_fn(n, n, |i, j| lam[i] * m[(i, j)]);
        let gsm = DMatrix::from_fn(n, n, |i, j| g_s[i] * m[(i, j)]);
        let wg = &a * g_mu.transpose() + m.transpose() * gsm + (&lm * &m) * 0.5 - (&a * a.transpose()) * 0.5 - lm * 0.5;
        let dkg = diffs.kernel_grads(&kg, &h.kernel_g);
        grad_hyper.extend(dkg.iter().map(|dk| wg.component_mul(dk).sum()));

        grad_hyper.push(g_mu.sum());
    }

    Ok(ElboParts {
        value,
        grad_log_lambda,
        grad_hyper,
        chol_b,
        chol_c,
        alpha,
        mu,
        sigma,
        z,
    })
}

fn check_dataset(d: &Dataset, h: &VhgprHyper) -> Result<()> {
    h.validate()?;
    if d.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: d.dim(),
        });
    }
    Ok(())
}

/// The marginalized variational bound at `(Λ, θ)` with analytic gradients.
pub fn elbo(d: &Dataset, lambda: &[f64], h: &VhgprHyper) -> Result<ElboValue> {
    check_dataset(d, h)?;
    let p = elbo_parts(&SquaredDiffs::new(d.inputs()), &d.y(), lambda, h, true)?;
    Ok(ElboValue {
        value: p.value,
        grad_log_lambda: p.grad_log_lambda,
        grad_hyper: p.grad_hyper,
    })
}

/// The same bound for an arbitrary Gaussian `q(g) = N(μ, Σ)`, not
/// restricted to the `Λ` family. Used to check that the `Λ` family
/// contains the stationary point.
pub fn elbo_general(d: &Dataset, mu: &DVector<f64>, sigma: &DMatrix<f64>, h: &VhgprHyper) -> Result<f64> {
    check_dataset(d, h)?;
    let n = d.len();
    if mu.len() != n || sigma.nrows() != n || sigma.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: mu.len(),
        });
    }
    let kf = crate::gp::kernel_matrix(d.inputs(), d.inputs(), &h.kernel_f)?;
    let kg = crate::gp::kernel_matrix(d.inputs(), d.inputs(), &h.kernel_g)?;
    let y = d.y();
    let mut c = kf;
    for i in 0..n {
        c[(i, i)] += (mu[i] - 0.5 * sigma[(i, i)]).exp();
    }
    let chol_c = cholesky_jittered(&c, h.kernel_f.variance())?;
    let alpha = chol_c.solve(&y);
    let data = -0.5 * y.dot(&alpha) - 0.5 * chol_c.log_det() - 0.5 * n as f64 * (2.0 * PI).ln();

    let chol_g = plain_or_jittered(&kg, h.kernel_g.variance())?;
    let chol_s = Cholesky::new(sigma.clone()).ok_or(Error::NotPositiveDefinite { jitter: 0.0 })?;
    let diff = mu - DVector::from_element(n, h.mu0);
    let kinv_sigma = chol_g.factor.solve(sigma);
    let log_det_s = 2.0 * chol_s.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let kl = 0.5 * (kinv_sigma.trace() + diff.dot(&chol_g.solve(&diff)) - n as f64 + chol_g.log_det() - log_det_s);
    Ok(data - 0.25 * sigma.trace() - kl)
}

/// Options for [`vhgpr_fit_from`].
#[derive(Clone, Debug)]
pub struct FitOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub grad_tol: f64,
    /// When false only `Λ` is optimized.
    pub optimize_hyper: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 500,
            rel_tol: 1e-6,
            grad_tol: 1e-8,
            optimize_hyper: true,
        }
    }
}

/// A fitted model: data, hyperparameters, variational state and the
/// factorizations needed for prediction.
#[derive(Clone, Debug)]
pub struct TrainedVhgpr {
    dataset: Dataset,
    hyper: VhgprHyper,
    vstate: VariationalState,
    chol_c: JitteredCholesky,
    alpha_f: DVector<f64>,
    chol_b: JitteredCholesky,
    sqrt_lambda: DVector<f64>,
    weights_g: DVector<f64>,
    elbo: f64,
    converged: bool,
    trace: Vec<f64>,
}

impl TrainedVhgpr {
    /// Builds the model (and all caches) for fixed `Λ` and `θ`.
    pub fn build(dataset: Dataset, hyper: VhgprHyper, lambda: Vec<f64>) -> Result<Self> {
        check_dataset(&dataset, &hyper)?;
        let diffs = SquaredDiffs::new(dataset.inputs());
        let p = elbo_parts(&diffs, &dataset.y(), &lambda, &hyper, false)?;
        let sqrt_lambda = DVector::from_iterator(lambda.len(), lambda.iter().map(|l| l.sqrt()));
        let weights_g = DVector::from_iterator(lambda.len(), lambda.iter().map(|l| l - 0.5));
        Ok(TrainedVhgpr {
            dataset,
            hyper,
            vstate: VariationalState {
                lambda,
                mu: p.mu,
                sigma: p.sigma,
                z: p.z,
            },
            chol_c: p.chol_c,
            alpha_f: p.alpha,
            chol_b: p.chol_b,
            sqrt_lambda,
            weights_g,
            elbo: p.value,
            converged: true,
            trace: vec![p.value],
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn hyper(&self) -> &VhgprHyper {
        &self.hyper
    }

    pub fn vstate(&self) -> &VariationalState {
        &self.vstate
    }

    pub fn lambda(&self) -> &[f64] {
        &self.vstate.lambda
    }

    pub fn elbo(&self) -> f64 {
        self.elbo
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Accepted bound values of the optimizer run that produced this model.
    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.hyper.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.hyper.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Joint posterior over `f` and `g` at several inputs:
    /// `(mean_f, cov_f, mean_g, cov_g)`.
    pub fn joint_posterior(&self, xs: &[InputPoint]) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
        for x in xs {
            self.check_point(x)?;
        }
        let train = self.dataset.inputs();
        let kf_star = crate::gp::kernel_matrix(train, xs, &self.hyper.kernel_f)?;
        let kg_star = crate::gp::kernel_matrix(train, xs, &self.hyper.kernel_g)?;
        let kf_ss = crate::gp::kernel_matrix(xs, xs, &self.hyper.kernel_f)?;
        let kg_ss = crate::gp::kernel_matrix(xs, xs, &self.hyper.kernel_g)?;
        let mean_f = kf_star.transpose() * &self.alpha_f;
        let mean_g = kg_star.transpose() * &self.weights_g + DVector::from_element(xs.len(), self.hyper.mu0);
        let vf = self.chol_c.l().solve_lower_triangular(&kf_star).expect("positive diagonal");
        let skg = DMatrix::from_fn(kg_star.nrows(), kg_star.ncols(), |i, j| self.sqrt_lambda[i] * kg_star[(i, j)]);
        let vg = self.chol_b.l().solve_lower_triangular(&skg).expect("positive diagonal");
        let cov_f = kf_ss - vf.transpose() * vf;
        let cov_g = kg_ss - vg.transpose() * vg;
        Ok((mean_f, cov_f, mean_g, cov_g))
    }
}

const BATCH: usize = 512;

impl Surrogate for TrainedVhgpr {
    fn dim(&self) -> usize {
        self.hyper.dim()
    }

    fn predict(&self, x: &InputPoint) -> Result<PointPosterior> {
        vhgpr_predict(self, x)
    }

    fn predict_mean(&self, x: &InputPoint) -> Result<PointMean> {
        self.check_point(x)?;
        let kf = kernel_vector(x, self.dataset.inputs(), &self.hyper.kernel_f);
        let kg = kernel_vector(x, self.dataset.inputs(), &self.hyper.kernel_g);
        Ok(PointMean {
            mu_f: kf.dot(&self.alpha_f),
            mu_g: kg.dot(&self.weights_g) + self.hyper.mu0,
        })
    }

    fn predict_batch(&self, xs: &[InputPoint]) -> Result<Vec<PointPosterior>> {
        for x in xs {
            self.check_point(x)?;
        }
        let train = self.dataset.inputs();
        let lc = self.chol_c.l();
        let lb = self.chol_b.l();
        let tf = self.hyper.kernel_f.variance();
        let tg = self.hyper.kernel_g.variance();
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(BATCH) {
            let kf = DMatrix::from_fn(train.len(), chunk.len(), |i, j| self.hyper.kernel_f.eval_unchecked(&train[i], &chunk[j]));
            let mut kg = DMatrix::from_fn(train.len(), chunk.len(), |i, j| self.hyper.kernel_g.eval_unchecked(&train[i], &chunk[j]));
            let mf = kf.transpose() * &self.alpha_f;
            let mg = (kg.transpose() * &self.weights_g).add_scalar(self.hyper.mu0);
            for (i, mut row) in kg.row_iter_mut().enumerate() {
                row *= self.sqrt_lambda[i];
            }
            let vf = lc.solve_lower_triangular(&kf).expect("positive diagonal");
            let vg = lb.solve_lower_triangular(&kg).expect("positive diagonal");
            for j in 0..chunk.len() {
                let var_f = tf - vf.column(j).norm_squared();
                let var_g = tg - vg.column(j).norm_squared();
                out.push(PointPosterior::new(mf[j], var_f, mg[j], var_g));
            }
        }
        Ok(out)
    }

    fn predict_mean_batch(&self, xs: &[InputPoint]) -> Result<Vec<PointMean>> {
        xs.iter().map(|x| self.predict_mean(x)).collect()
    }

    fn predict_mean_tensor(&self, axes: &[Vec<f64>]) -> Result<Vec<PointMean>> {
        let train = self.dataset.inputs();
        let f = tensor_weighted_kernel_sum(axes, train, &self.hyper.kernel_f, &self.alpha_f)?;
        let g = tensor_weighted_kernel_sum(axes, train, &self.hyper.kernel_g, &self.weights_g)?;
        Ok(f.into_iter()
            .zip(g)
            .map(|(mu_f, g)| PointMean {
                mu_f,
                mu_g: g + self.hyper.mu0,
            })
            .collect())
    }
}

/// Posterior of `f(x)` and `g(x)` (variances clamped at zero).
pub fn vhgpr_predict(m: &TrainedVhgpr, x: &InputPoint) -> Result<PointPosterior> {
    m.check_point(x)?;
    let kf = kernel_vector(x, m.dataset.inputs(), &m.hyper.kernel_f);
    let kg = kernel_vector(x, m.dataset.inputs(), &m.hyper.kernel_g);
    let mu_f = kf.dot(&m.alpha_f);
    let var_f = m.hyper.kernel_f.variance() - m.chol_c.solve_lower(&kf).norm_squared();
    let mu_g = kg.dot(&m.weights_g) + m.hyper.mu0;
    let skg = kg.component_mul(&m.sqrt_lambda);
    let var_g = m.hyper.kernel_g.variance() - m.chol_b.solve_lower(&skg).norm_squared();
    Ok(PointPosterior::new(mu_f, var_f, mu_g, var_g))
}

fn param_bounds(n: usize, dim: usize, optimize_hyper: bool) -> Bounds {
    let mut lower = vec![-LOG_BOUND; n];
    let mut upper = vec![LOG_BOUND; n];
    if optimize_hyper {
        let k = 2 * (dim + 1);
        lower.extend(std::iter::repeat_n(-LOG_BOUND, k));
        upper.extend(std::iter::repeat_n(LOG_BOUND, k));
        lower.push(-MU0_BOUND);
        upper.push(MU0_BOUND);
    }
    Bounds { lower, upper }
}

/// Maximizes the bound from explicit starting `Λ` and `θ`.
/// Hyperparameter fits need at least [`MIN_POINTS`] samples; `Λ` alone can
/// be optimized on any non-empty dataset.
pub fn vhgpr_fit_from(d: &Dataset, init: &VhgprHyper, init_lambda: &[f64], opts: &FitOptions) -> Result<TrainedVhgpr> {
    if opts.optimize_hyper && d.len() < MIN_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_POINTS,
            got: d.len(),
        });
    }
    check_dataset(d, init)?;
    check_lambda(init_lambda, d.len())?;
    let n = d.len();
    let dim = d.dim();
    let diffs = SquaredDiffs::new(d.inputs());
    let y = d.y();

    let mut x0: Vec<f64> = init_lambda.iter().map(|l| l.ln()).collect();
    if opts.optimize_hyper {
        x0.extend(init.to_vec());
    }
    let bounds = param_bounds(n, dim, opts.optimize_hyper);

    let split = |v: &[f64]| -> (Vec<f64>, VhgprHyper) {
        let lambda = v[..n].iter().map(|l| l.exp()).collect();
        let h = if opts.optimize_hyper {
            VhgprHyper::from_vec(&v[n..])
        } else {
            init.clone()
        };
        (lambda, h)
    };
    let objective = |v: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (lambda, h) = split(v);
        let p = elbo_parts(&diffs, &y, &lambda, &h, true)?;
        let mut g = p.grad_log_lambda;
        if opts.optimize_hyper {
            g.extend(p.grad_hyper);
        }
        Ok((p.value, g))
    };
    let res = maximize(
        objective,
        &x0,
        &bounds,
        &OptimOptions {
            max_iter: opts.max_iter,
            rel_tol: opts.rel_tol,
            grad_tol: opts.grad_tol,
            memory: 10,
        },
    )?;
    let (lambda, h) = split(&res.x);
    let mut model = TrainedVhgpr::build(d.clone(), h, lambda)?;
    model.converged = res.converged;
    model.trace = res.trace;
    if !res.converged {
        log::warn!("VHGPR fit stopped after {} iterations without converging", res.iterations);
    }
    Ok(model)
}

/// Fit from `init` with `Λ = ½I`.
pub fn vhgpr_fit(d: &Dataset, init: &VhgprHyper) -> Result<TrainedVhgpr> {
    vhgpr_fit_from(d, init, &vec![0.5; d.len()], &FitOptions::default())
}

/// Starting points for a cold fit: the data-driven start, one whose `f`
/// kernel comes from a homoscedastic fit, and a short-lengthscale start
/// that lets both processes follow local structure.
fn cold_starts(d: &Dataset) -> Result<Vec<VhgprHyper>> {
    let init = VhgprHyper::initial(d)?;
    let mut starts = vec![init.clone()];
    if let Ok(m) = sgpr_fit(d, &SgprHyper::from_data(d)) {
        let mut alt = init.clone();
        alt.kernel_f = m.hyper().kernel.clone();
        alt.mu0 = (m.hyper().noise_std.powi(2)).max(1e-10).ln().clamp(-MU0_BOUND, MU0_BOUND);
        starts.push(alt);
    }
    let short: Vec<f64> = init.kernel_f.lengthscales.iter().map(|l| 0.4 * l).collect();
    let var_y = d.output_std().powi(2).max(1e-10);
    starts.push(VhgprHyper::new(
        (0.25 * var_y).ln().clamp(-MU0_BOUND, MU0_BOUND),
        KernelParams::new(d.output_std().max(1e-2), short.clone())?,
        KernelParams::new(1.0, short)?,
    )?);
    Ok(starts)
}

fn best_of(fits: impl IntoIterator<Item = Result<TrainedVhgpr>>) -> Result<TrainedVhgpr> {
    let mut best: Option<TrainedVhgpr> = None;
    let mut last_err = None;
    for f in fits {
        match f {
            Ok(m) => {
                if best.as_ref().is_none_or(|b| m.elbo > b.elbo) {
                    best = Some(m);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::InvalidArgument("no starting point".into())))
}

/// Cold fit without a caller-supplied start: runs every start from
/// `cold_starts` and keeps the largest bound.
pub fn vhgpr_fit_auto(d: &Dataset) -> Result<TrainedVhgpr> {
    if d.len() < MIN_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_POINTS,
            got: d.len(),
        });
    }
    best_of(cold_starts(d)?.iter().map(|s| vhgpr_fit(d, s)))
}

/// Refit after the dataset grew: starts from the previous `θ` and `Λ`,
/// padding `Λ` with ½ for the new points.
pub fn vhgpr_fit_warm(d: &Dataset, prev: &TrainedVhgpr) -> Result<TrainedVhgpr> {
    let mut lambda = prev.lambda().to_vec();
    if d.len() < lambda.len() {
        return Err(Error::InvalidArgument("warm start from a larger dataset".into()));
    }
    lambda.resize(d.len(), 0.5);
    vhgpr_fit_from(d, &prev.hyper, &lambda, &FitOptions::default())
}

/// Warm refit that also runs one of the cold starts, chosen by `round`
/// in rotation, and keeps the larger bound. A warm start alone can stay
/// stuck in a poor optimum as the data grows.
pub fn vhgpr_refit(d: &Dataset, prev: &TrainedVhgpr, round: usize) -> Result<TrainedVhgpr> {
    let warm = vhgpr_fit_warm(d, prev);
    let cold = cold_starts(d).and_then(|starts| vhgpr_fit(d, &starts[round % starts.len()]));
    best_of([warm, cold])
}

/// Optimizes only `Λ` for fixed `θ`; returns `(Λ*, L*)`.
pub fn optimize_lambda(d: &Dataset, h: &VhgprHyper, init_lambda: &[f64], opts: &FitOptions) -> Result<(Vec<f64>, f64)> {
    let opts = FitOptions {
        optimize_hyper: false,
        ..opts.clone()
    };
    let m = vhgpr_fit_from(d, h, init_lambda, &opts)?;
    Ok((m.vstate.lambda.clone(), m.elbo))
}

const ARTIFACT_FORMAT: &str = "stochbed.vhgpr";
const ARTIFACT_VERSION: u32 = 1;

/// Serialized form of a trained model. Caches are rebuilt on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub version: u32,
    pub dataset: Dataset,
    pub hyper: VhgprHyper,
    pub lambda: Vec<f64>,
    pub converged: bool,
    pub elbo: f64,
}

impl TrainedVhgpr {
    pub fn to_artifact(&self) -> ModelArtifact {
        ModelArtifact {
            format: ARTIFACT_FORMAT.into(),
            version: ARTIFACT_VERSION,
            dataset: self.dataset.clone(),
            hyper: self.hyper.clone(),
            lambda: self.vstate.lambda.clone(),
            converged: self.converged,
            elbo: self.elbo,
        }
    }

    pub fn from_artifact(a: ModelArtifact) -> Result<Self> {
        if a.format != ARTIFACT_FORMAT || a.version != ARTIFACT_VERSION {
            return Err(Error::Unsupported(format!("model artifact {} v{}", a.format, a.version)));
        }
        let mut m = TrainedVhgpr::build(a.dataset, a.hyper, a.lambda)?;
        m.converged = a.converged;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, &self.to_artifact())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::from_artifact(serde_json::from_reader(f)?)
    }
}
