//! Squared-exponential kernels and standard (homoscedastic) GP regression.

use std::f64::consts::PI;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, JitteredCholesky, JITTER_START};
use crate::optim::{maximize, Bounds, OptimOptions};
use crate::rng;

/// Natural-log bounds for every positive hyperparameter.
pub const LOG_BOUND: f64 = 6.0;

/// A point of the input space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputPoint(Vec<f64>);

impl InputPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("input point with zero dimensions".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("input point {coords:?}")));
        }
        Ok(InputPoint(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for InputPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<f64> for InputPoint {
    fn from(x: f64) -> Self {
        InputPoint(vec![x])
    }
}

impl From<[f64; 2]> for InputPoint {
    fn from(x: [f64; 2]) -> Self {
        InputPoint(x.to_vec())
    }
}

/// Ordered (input, response) pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<InputPoint>,
    outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<InputPoint>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: outputs.len(),
            });
        }
        if inputs.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let d = inputs[0].dim();
        if let Some(bad) = inputs.iter().find(|x| x.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.dim(),
            });
        }
        if outputs.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("dataset output".into()));
        }
        Ok(Dataset { inputs, outputs })
    }

    pub fn push(&mut self, x: InputPoint, y: f64) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        if !y.is_finite() {
            return Err(Error::NonFinite("dataset output".into()));
        }
        self.inputs.push(x);
        self.outputs.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].dim()
    }

    pub fn inputs(&self) -> &[InputPoint] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn y(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.outputs)
    }

    /// Per-dimension (min, max) of the inputs.
    pub fn input_ranges(&self) -> Vec<(f64, f64)> {
        (0..self.dim())
            .map(|j| {
                self.inputs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                    (lo.min(x[j]), hi.max(x[j]))
                })
            })
            .collect()
    }

    pub fn output_std(&self) -> f64 {
        let n = self.len() as f64;
        let mean = self.outputs.iter().sum::<f64>() / n;
        (self.outputs.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt()
    }
}

/// Amplitude and per-dimension lengthscales of a squared-exponential kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub amplitude: f64,
    pub lengthscales: Vec<f64>,
}

impl KernelParams {
    pub fn new(amplitude: f64, lengthscales: Vec<f64>) -> Result<Self> {
        let p = KernelParams {
            amplitude,
            lengthscales,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn isotropic(amplitude: f64, lengthscale: f64, dim: usize) -> Result<Self> {
        Self::new(amplitude, vec![lengthscale; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!("kernel amplitude {}", self.amplitude)));
        }
        if self.lengthscales.is_empty() || self.lengthscales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!("kernel lengthscales {:?}", self.lengthscales)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn variance(&self) -> f64 {
        self.amplitude * self.amplitude
    }

    /// `[log τ, log l_1, …, log l_d]`.
    pub fn to_log(&self) -> Vec<f64> {
        std::iter::once(self.amplitude.ln())
            .chain(self.lengthscales.iter().map(|l| l.ln()))
            .collect()
    }

    pub fn from_log(v: &[f64]) -> Self {
        KernelParams {
            amplitude: v[0].exp(),
            lengthscales: v[1..].iter().map(|l| l.exp()).collect(),
        }
    }

    fn inv_sq_lengths(&self) -> Vec<f64> {
        self.lengthscales.iter().map(|l| 1.0 / (l * l)).collect()
    }

    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((x, y), l)| {
                let t = (x - y) / l;
                t * t
            })
            .sum();
        self.variance() * (-0.5 * r2).exp()
    }
}

fn check_dims(p: &KernelParams, x: &[f64]) -> Result<()> {
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `τ² exp(−½ Σ_j (x_j − x2_j)² / l_j²)`.
pub fn rbf_kernel(x: &InputPoint, x2: &InputPoint, p: &KernelParams) -> Result<f64> {
    check_dims(p, x)?;
    check_dims(p, x2)?;
    Ok(p.eval_unchecked(x, x2))
}

pub fn kernel_matrix(xs: &[InputPoint], xs2: &[InputPoint], p: &KernelParams) -> Result<DMatrix<f64>> {
    if xs.is_empty() || xs2.is_empty() {
        return Err(Error::InvalidArgument("empty point list".into()));
    }
    for x in xs.iter().chain(xs2) {
        check_dims(p, x)?;
    }
    Ok(DMatrix::from_fn(xs.len(), xs2.len(), |i, j| p.eval_unchecked(&xs[i], &xs2[j])))
}

/// Kernel vector `k(x, X)`.
pub(crate) fn kernel_vector(x: &[f64], xs: &[InputPoint], p: &KernelParams) -> DVector<f64> {
    DVector::from_iterator(xs.len(), xs.iter().map(|xi| p.eval_unchecked(x, xi)))
}

/// `Σ_i w_i k(x, X_i)` for every `x` of the tensor grid spanned by `axes`
/// (row-major, last axis fastest). The RBF kernel factorizes over
/// dimensions, so a 2D grid costs one matrix product.
pub(crate) fn tensor_weighted_kernel_sum(axes: &[Vec<f64>], xs: &[InputPoint], p: &KernelParams, w: &DVector<f64>) -> Result<Vec<f64>> {
    if axes.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: axes.len(),
        });
    }
    let factor = |j: usize| {
        let l = p.lengthscales[j];
        DMatrix::from_fn(axes[j].len(), xs.len(), |a, i| (-0.5 * ((axes[j][a] - xs[i][j]) / l).powi(2)).exp())
    };
    let tau2 = p.variance();
    match axes.len() {
        1 => Ok((factor(0) * w * tau2).iter().copied().collect()),
        2 => {
            let e1 = factor(0);
            let mut e2 = factor(1);
            for (i, mut col) in e2.column_iter_mut().enumerate() {
                col *= w[i] * tau2;
            }
            let grid = e1 * e2.transpose();
            // nalgebra is column-major; emit row-major
            let mut out = Vec::with_capacity(grid.len());
            for r in 0..grid.nrows() {
                out.extend(grid.row(r).iter());
            }
            Ok(out)
        }
        d => Err(Error::Unsupported(format!("tensor grid in {d} dimensions"))),
    }
}

/// Pairwise squared coordinate differences, one matrix per dimension.
/// Cached per dataset so kernel matrices and their lengthscale derivatives
/// are cheap to rebuild during optimization.
#[derive(Clone, Debug)]
pub(crate) struct SquaredDiffs {
    pub per_dim: Vec<DMatrix<f64>>,
}

impl SquaredDiffs {
    pub fn new(xs: &[InputPoint]) -> Self {
        let n = xs.len();
        let d = xs[0].dim();
        let per_dim = (0..d)
            .map(|j| DMatrix::from_fn(n, n, |a, b| (xs[a][j] - xs[b][j]).powi(2)))
            .collect();
        SquaredDiffs { per_dim }
    }

    pub fn kernel(&self, p: &KernelParams) -> DMatrix<f64> {
        let inv = p.inv_sq_lengths();
        let n = self.per_dim[0].nrows();
        let tau2 = p.variance();
        DMatrix::from_fn(n, n, |a, b| {
            let r2: f64 = self.per_dim.iter().zip(&inv).map(|(m, w)| m[(a, b)] * w).sum();
            tau2 * (-0.5 * r2).exp()
        })
    }

    /// Derivatives of `kernel(p)` w.r.t. `[log τ, log l_1, …]`.
    pub fn kernel_grads(&self, k: &DMatrix<f64>, p: &KernelParams) -> Vec<DMatrix<f64>> {
        let inv = p.inv_sq_lengths();
        let mut out = Vec::with_capacity(1 + inv.len());
        out.push(k * 2.0);
        for (m, w) in self.per_dim.iter().zip(&inv) {
            out.push(k.component_mul(m) * *w);
        }
        out
    }
}

/// Standard GP regression hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgprHyper {
    pub kernel: KernelParams,
    pub noise_std: f64,
}

impl SgprHyper {
    pub fn new(kernel: KernelParams, noise_std: f64) -> Result<Self> {
        kernel.validate()?;
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise std {noise_std}")));
        }
        Ok(SgprHyper { kernel, noise_std })
    }

    /// Heuristic start: lengthscales a quarter of each input range, amplitude
    /// the output standard deviation, noise a tenth of it.
    pub fn from_data(d: &Dataset) -> Self {
        let sd = d.output_std().max(1e-2);
        let lengthscales = d
            .input_ranges()
            .iter()
            .map(|(lo, hi)| {
                let r = 0.25 * (hi - lo);
                if r > 0.0 {
                    r
                } else {
                    1.0
                }
            })
            .collect();
        SgprHyper {
            kernel: KernelParams {
                amplitude: sd,
                lengthscales,
            },
            noise_std: 0.1 * sd,
        }
    }

    fn to_log(&self) -> Vec<f64> {
        let mut v = self.kernel.to_log();
        v.push(self.noise_std.ln());
        v
    }

    fn from_log(v: &[f64]) -> Self {
        let d = v.len() - 2;
        SgprHyper {
            kernel: KernelParams::from_log(&v[..d + 1]),
            noise_std: v[d + 1].exp(),
        }
    }
}

fn check_dataset(d: &Dataset, p: &KernelParams) -> Result<()> {
    if d.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: d.dim(),
        });
    }
    Ok(())
}

struct SgprEval {
    value: f64,
    grad: Vec<f64>,
    chol: JitteredCholesky,
    alpha: DVector<f64>,
}

fn sgpr_eval(diffs: &SquaredDiffs, y: &DVector<f64>, h: &SgprHyper, want_grad: bool) -> Result<SgprEval> {
    let n = y.len();
    let k = diffs.kernel(&h.kernel);
    let mut c = k.clone();
    let noise = h.noise_std * h.noise_std;
    for i in 0..n {
        c[(i, i)] += noise;
    }
    let tau2 = h.kernel.variance();
    let chol = cholesky_jittered(&c, tau2)?;
    let alpha = chol.solve(y);
    let value = -0.5 * y.dot(&alpha) - 0.5 * chol.log_det() - 0.5 * n as f64 * (2.0 * PI).ln();
    let mut grad = Vec::new();
    if want_grad {
        // W = ½(ααᵀ − C⁻¹); ∂L/∂θ = Σ_ij W_ij ∂C_ij
        let cinv = chol.inverse();
        let w = (&alpha * alpha.transpose() - cinv) * 0.5;
        let mut dks = diffs.kernel_grads(&k, &h.kernel);
        // the jitter scales with τ², so it moves with log τ as well
        for i in 0..n {
            dks[0][(i, i)] += 2.0 * chol.jitter;
        }
        for dk in &dks {
            grad.push(w.component_mul(dk).sum());
        }
        let wtrace: f64 = w.diagonal().sum();
        grad.push(wtrace * 2.0 * noise);
    }
    Ok(SgprEval {
        value,
        grad,
        chol,
        alpha,
    })
}

/// `log N(y; 0, K_f(X,X) + γ0² I)`.
pub fn sgpr_log_marginal(d: &Dataset, h: &SgprHyper) -> Result<f64> {
    check_dataset(d, &h.kernel)?;
    Ok(sgpr_eval(&SquaredDiffs::new(d.inputs()), &d.y(), h, false)?.value)
}

/// Log marginal likelihood and its gradient w.r.t.
/// `[log τ, log l_1, …, log l_d, log γ0]`.
pub fn sgpr_log_marginal_grad(d: &Dataset, h: &SgprHyper) -> Result<(f64, Vec<f64>)> {
    check_dataset(d, &h.kernel)?;
    let e = sgpr_eval(&SquaredDiffs::new(d.inputs()), &d.y(), h, true)?;
    Ok((e.value, e.grad))
}

/// A fitted standard GP: hyperparameters plus the cached factorization of
/// `K_f + γ0² I`.
#[derive(Clone, Debug)]
pub struct SgprModel {
    dataset: Dataset,
    hyper: SgprHyper,
    chol: JitteredCholesky,
    alpha: DVector<f64>,
    log_marginal: f64,
    converged: bool,
}

impl SgprModel {
    /// Builds the model for fixed hyperparameters (no optimization).
    pub fn with_hyper(d: Dataset, h: SgprHyper) -> Result<Self> {
        check_dataset(&d, &h.kernel)?;
        let e = sgpr_eval(&SquaredDiffs::new(d.inputs()), &d.y(), &h, false)?;
        Ok(SgprModel {
            dataset: d,
            hyper: h,
            chol: e.chol,
            alpha: e.alpha,
            log_marginal: e.value,
            converged: true,
        })
    }

    pub fn hyper(&self) -> &SgprHyper {
        &self.hyper
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn log_marginal(&self) -> f64 {
        self.log_marginal
    }

    /// False when no optimizer start met its convergence test.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn predict(&self, x: &InputPoint) -> Result<(f64, f64)> {
        sgpr_predict(self, x)
    }

    pub(crate) fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }
}

const SGPR_RESTARTS: usize = 3;
const RESTART_SCALE: f64 = 0.5;
const RESTART_SEED: u64 = 0x5347_5052;

/// Maximizes the log marginal likelihood in log-hyperparameter space from
/// `init` plus three perturbed restarts and keeps the best.
pub fn sgpr_fit(d: &Dataset, init: &SgprHyper) -> Result<SgprModel> {
    if d.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: d.len() });
    }
    check_dataset(d, &init.kernel)?;
    init.kernel.validate()?;
    let diffs = SquaredDiffs::new(d.inputs());
    let y = d.y();
    let dim = init.kernel.dim() + 2;
    let bounds = Bounds::uniform(dim, -LOG_BOUND, LOG_BOUND);
    let opts = OptimOptions {
        max_iter: 300,
        rel_tol: 1e-9,
        ..OptimOptions::default()
    };
    let mut x0 = init.to_log();
    bounds.project(&mut x0);

    let mut starts = vec![x0.clone()];
    let mut r = rng::seeded(RESTART_SEED);
    for _ in 0..SGPR_RESTARTS {
        starts.push(
            x0.iter()
                .map(|v| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    v + RESTART_SCALE * z
                })
                .collect(),
        );
    }

    let objective = |v: &[f64]| -> Result<(f64, Vec<f64>)> {
        let e = sgpr_eval(&diffs, &y, &SgprHyper::from_log(v), true)?;
        Ok((e.value, e.grad))
    };

    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    let mut last_err = None;
    for s in &starts {
        match maximize(objective, s, &bounds, &opts) {
            Ok(res) => {
                if best.as_ref().is_none_or(|b| res.value > b.0) {
                    best = Some((res.value, res.x, res.converged));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((_, xbest, converged)) = best else {
        return Err(last_err.unwrap_or(Error::NotPositiveDefinite {
            jitter: JITTER_START,
        }));
    };
    let hyper = SgprHyper::from_log(&xbest);
    let mut model = SgprModel::with_hyper(d.clone(), hyper)?;
    model.converged = converged;
    if !converged {
        log::warn!("SGPR hyperparameter optimization did not converge; using best iterate");
    }
    Ok(model)
}

/// Posterior mean and variance of `f(x)`.
pub fn sgpr_predict(m: &SgprModel, x: &InputPoint) -> Result<(f64, f64)> {
    check_dims(&m.hyper.kernel, x)?;
    let k = kernel_vector(x, m.dataset.inputs(), &m.hyper.kernel);
    let mean = k.dot(&m.alpha);
    let v = m.chol.solve_lower(&k);
    let var = (m.hyper.kernel.variance() - v.norm_squared()).max(0.0);
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng as _;

    fn pts(v: &[f64]) -> Vec<InputPoint> {
        v.iter().map(|x| InputPoint::from(*x)).collect()
    }

    #[test]
    fn kernel_zero_distance_is_variance() {
        let p = KernelParams::isotropic(1.5, 0.7, 2).unwrap();
        let x = InputPoint::from([0.3, -1.0]);
        assert_relative_eq!(rbf_kernel(&x, &x, &p).unwrap(), 2.25);
    }

    #[test]
    fn kernel_direct_formula() {
        let p = KernelParams::isotropic(1.0, 2.0, 1).unwrap();
        let v = rbf_kernel(&0.0.into(), &2.0.into(), &p).unwrap();
        assert_relative_eq!(v, (-0.5f64).exp(), epsilon = 1e-15);
        assert!((v - 0.606531).abs() < 1e-6);
    }

    #[test]
    fn kernel_symmetric_and_dimension_checked() {
        let p = KernelParams::new(1.2, vec![0.5, 2.0]).unwrap();
        let a = InputPoint::from([0.1, 0.2]);
        let b = InputPoint::from([1.1, -0.4]);
        assert_eq!(rbf_kernel(&a, &b, &p).unwrap(), rbf_kernel(&b, &a, &p).unwrap());
        assert!(matches!(
            rbf_kernel(&a, &InputPoint::from(1.0), &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kernel_matrix_shapes() {
        let p = KernelParams::isotropic(2.0, 1.0, 1).unwrap();
        let xs = pts(&[0.0, 0.5, 3.0]);
        let k = kernel_matrix(&xs, &xs, &p).unwrap();
        assert_eq!(k, k.transpose());
        assert!(k.diagonal().iter().all(|v| (*v - 4.0).abs() < 1e-15));
        let one = kernel_matrix(&xs[..1], &xs[1..2], &p).unwrap();
        assert_eq!(one[(0, 0)], rbf_kernel(&xs[0], &xs[1], &p).unwrap());
        let far = kernel_matrix(&pts(&[0.0, 100.0, 200.0]), &pts(&[0.0, 100.0, 200.0]), &p).unwrap();
        assert!(far[(0, 1)] < 1e-10 * 4.0 && far[(1, 2)] < 1e-10 * 4.0);
    }

    #[test]
    fn kernel_matrix_psd_with_jitter() {
        let mut r = rng::seeded(3);
        let xs: Vec<InputPoint> = (0..30).map(|_| InputPoint::from(r.random_range(0.0..1.0))).collect();
        let p = KernelParams::isotropic(1.3, 2.0, 1).unwrap();
        let k = kernel_matrix(&xs, &xs, &p).unwrap();
        let eig = k.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|e| *e >= -1e-10 * p.variance()));
        assert!(cholesky_jittered(&k, p.variance()).is_ok());
    }

    #[test]
    fn log_marginal_single_point() {
        let d = Dataset::new(pts(&[0.0]), vec![0.0]).unwrap();
        let h = SgprHyper::new(KernelParams::isotropic(1.0, 1.0, 1).unwrap(), 1.0).unwrap();
        let v = sgpr_log_marginal(&d, &h).unwrap();
        assert_relative_eq!(v, -0.5 * (4.0 * PI).ln(), epsilon = 1e-7);
    }

    #[test]
    fn zero_outputs_leave_only_determinant() {
        let xs = pts(&[0.0, 0.4, 1.3]);
        let h = SgprHyper::new(KernelParams::isotropic(1.1, 0.8, 1).unwrap(), 0.3).unwrap();
        let d = Dataset::new(xs.clone(), vec![0.0; 3]).unwrap();
        let mut c = kernel_matrix(&xs, &xs, &h.kernel).unwrap();
        for i in 0..3 {
            c[(i, i)] += 0.09 + 1e-8 * 1.21;
        }
        let expect = -0.5 * c.determinant().ln() - 1.5 * (2.0 * PI).ln();
        assert_relative_eq!(sgpr_log_marginal(&d, &h).unwrap(), expect, epsilon = 1e-10);
    }

    #[test]
    fn interpolates_without_noise() {
        let xs = pts(&[0.0, 1.0, 2.5]);
        let d = Dataset::new(xs.clone(), vec![1.0, -0.5, 2.0]).unwrap();
        let h = SgprHyper::new(KernelParams::isotropic(1.0, 1.0, 1).unwrap(), 0.0).unwrap();
        let m = SgprModel::with_hyper(d, h).unwrap();
        let (mean, var) = m.predict(&xs[1]).unwrap();
        assert!((mean + 0.5).abs() < 1e-6);
        assert!(var < 1e-6);
    }

    #[test]
    fn recovers_prior_far_away() {
        let d = Dataset::new(pts(&[0.0, 1.0]), vec![1.0, 2.0]).unwrap();
        let h = SgprHyper::new(KernelParams::isotropic(1.7, 1.0, 1).unwrap(), 0.1).unwrap();
        let m = SgprModel::with_hyper(d, h).unwrap();
        let (mean, var) = m.predict(&1e3.into()).unwrap();
        assert!(mean.abs() < 1e-12);
        assert_relative_eq!(var, 1.7 * 1.7, epsilon = 1e-12);
    }

    #[test]
    fn two_point_dense_oracle() {
        // direct 2x2 inverse of K + γ0² I
        let d = Dataset::new(pts(&[0.0, 1.0]), vec![1.0, 2.0]).unwrap();
        let h = SgprHyper::new(KernelParams::isotropic(1.0, 1.0, 1).unwrap(), 0.5).unwrap();
        let m = SgprModel::with_hyper(d, h).unwrap();
        let k01 = (-0.5f64).exp();
        let (a, b, c) = (1.0 + 0.25 + 1e-8, k01, 1.0 + 0.25 + 1e-8);
        let det = a * c - b * b;
        let inv = [[c / det, -b / det], [-b / det, a / det]];
        let x = 0.3f64;
        let kx = [(-0.5 * x * x).exp(), (-0.5 * (x - 1.0).powi(2)).exp()];
        let y = [1.0, 2.0];
        let mut mean = 0.0;
        let mut quad = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                mean += kx[i] * inv[i][j] * y[j];
                quad += kx[i] * inv[i][j] * kx[j];
            }
        }
        let (pm, pv) = m.predict(&x.into()).unwrap();
        assert_relative_eq!(pm, mean, epsilon = 1e-12);
        assert_relative_eq!(pv, 1.0 - quad, epsilon = 1e-12);
    }

    #[test]
    fn variance_shrinks_with_repeated_points() {
        let h = SgprHyper::new(KernelParams::isotropic(1.0, 0.5, 1).unwrap(), 0.3).unwrap();
        let mut xs = pts(&[0.0, 1.0]);
        let mut ys = vec![0.2, -0.1];
        let mut last = f64::INFINITY;
        for _ in 0..5 {
            let m = SgprModel::with_hyper(Dataset::new(xs.clone(), ys.clone()).unwrap(), h.clone()).unwrap();
            let (_, v) = m.predict(&0.5.into()).unwrap();
            assert!(v <= last + 1e-14);
            last = v;
            xs.push(0.5.into());
            ys.push(0.0);
        }
    }

    #[test]
    fn constant_outputs_fit() {
        let xs = pts(&(0..12).map(|i| i as f64 * 0.5).collect::<Vec<_>>());
        let d = Dataset::new(xs, vec![3.0; 12]).unwrap();
        let init = SgprHyper::new(KernelParams::isotropic(1.0, 1.0, 1).unwrap(), 0.5).unwrap();
        let m = sgpr_fit(&d, &init).unwrap();
        assert!(m.hyper().noise_std < 0.05, "{:?}", m.hyper());
        let (mean, _) = m.predict(&2.2.into()).unwrap();
        assert!((mean - 3.0).abs() < 1e-2);
    }

    #[test]
    fn fit_never_decreases_likelihood() {
        let mut r = rng::seeded(11);
        let xs: Vec<InputPoint> = (0..15).map(|_| InputPoint::from(r.random_range(-2.0..2.0))).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0].sin() + 0.1 * r.random::<f64>()).collect();
        let d = Dataset::new(xs, ys).unwrap();
        let init = SgprHyper::from_data(&d);
        let m = sgpr_fit(&d, &init).unwrap();
        assert!(m.log_marginal() >= sgpr_log_marginal(&d, &init).unwrap());
        // refitting from the optimum cannot do worse
        let again = sgpr_fit(&d, m.hyper()).unwrap();
        assert!(again.log_marginal() >= m.log_marginal() - 1e-12);
    }

    #[test]
    fn rejects_tiny_dataset() {
        let d = Dataset::new(pts(&[0.0]), vec![1.0]).unwrap();
        let init = SgprHyper::from_data(&d);
        assert!(matches!(sgpr_fit(&d, &init), Err(Error::InsufficientData { .. })));
    }
}
