//! Gaussian-process posterior over a function and its derivatives.
//!
//! Conditioning treats gradient and Hessian entries as linear functionals of
//! the latent function, so their posterior means and the power functions
//! (traces of the derivative posterior covariances) have closed forms built
//! from kernel derivatives. Posterior covariances are independent of the
//! observed targets, which is what makes fantasy conditioning on pending
//! inputs possible.

mod fit;
mod power;

pub use fit::{fit_hyperparams, fit_hyperparams_from, FitStatus, HyperFit};
pub use power::PowerProbe;

pub(crate) use power::{cross_deriv_matrix, hess_pairs, powers_from_solved};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{self, KernelParams};
use crate::linalg::CholFactor;

/// Training inputs and observations.
#[derive(Debug, Clone)]
pub struct Dataset {
    dim: usize,
    inputs: Vec<DVector<f64>>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn empty(dim: usize) -> Self {
        Dataset {
            dim,
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn from_rows(dim: usize, inputs: Vec<DVector<f64>>, targets: Vec<f64>) -> Result<Self> {
        let mut data = Dataset::empty(dim);
        if inputs.len() != targets.len() {
            return Err(Error::argument(format!(
                "dataset: {} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        for (x, y) in inputs.into_iter().zip(targets) {
            data.push(x, y)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, x: DVector<f64>, y: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::argument(format!(
                "dataset: point dimension {} does not match {}",
                x.len(),
                self.dim
            )));
        }
        if !y.is_finite() {
            return Err(Error::argument(format!("dataset: non-finite target {y}")));
        }
        self.inputs.push(x);
        self.targets.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

/// Posterior belief about the gradient and Hessian at one query point.
#[derive(Debug, Clone)]
pub struct DerivBelief {
    /// Posterior mean gradient ĝ(x).
    pub mean_grad: DVector<f64>,
    /// Posterior mean Hessian Ĥ(x), symmetrized.
    pub mean_hess: DMatrix<f64>,
    /// Gradient power function π^g(x) ≥ 0.
    pub pi_g: f64,
    /// Hessian power function π^H(x) ≥ 0.
    pub pi_h: f64,
}

/// Construction options for [`GpState`].
#[derive(Debug, Clone)]
pub struct GpOptions {
    /// Diagonal jitter. Defaults to `1e-8 · σ_f²`.
    pub jitter: Option<f64>,
    /// Standardize targets (subtract mean, divide by std) before
    /// conditioning; read-out quantities are mapped back.
    pub standardize: bool,
}

impl Default for GpOptions {
    fn default() -> Self {
        GpOptions {
            jitter: None,
            standardize: false,
        }
    }
}

/// A fitted GP posterior: dataset, hyperparameters, kernel-matrix factor and
/// precomputed weight vector. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GpState {
    data: Dataset,
    params: KernelParams,
    jitter: f64,
    shift: f64,
    scale: f64,
    chol: CholFactor,
    weights: DVector<f64>,
}

impl GpState {
    pub fn new(data: Dataset, params: KernelParams) -> Result<Self> {
        GpState::with_options(data, params, GpOptions::default())
    }

    pub fn standardized(data: Dataset, params: KernelParams) -> Result<Self> {
        GpState::with_options(
            data,
            params,
            GpOptions {
                jitter: None,
                standardize: true,
            },
        )
    }

    pub fn with_options(data: Dataset, params: KernelParams, opts: GpOptions) -> Result<Self> {
        if data.dim() != params.dim() {
            return Err(Error::argument(format!(
                "gp: dataset dimension {} does not match kernel dimension {}",
                data.dim(),
                params.dim()
            )));
        }
        let jitter = opts.jitter.unwrap_or(1e-8 * params.signal_variance());
        let (shift, scale) = if opts.standardize {
            standardization(data.targets())
        } else {
            (0.0, 1.0)
        };
        let n = data.len();
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v = kernel::k_unchecked(
                    &params,
                    data.inputs()[a].as_slice(),
                    data.inputs()[b].as_slice(),
                );
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
            gram[(a, a)] += params.noise_variance() + jitter;
        }
        let chol = CholFactor::new(&gram).map_err(|e| {
            Error::numerical(format!("gp: kernel matrix factorization failed (n={n}): {e}"))
        })?;
        let y_std = DVector::from_iterator(n, data.targets().iter().map(|y| (y - shift) / scale));
        let weights = chol.solve(&y_std);
        Ok(GpState {
            data,
            params,
            jitter,
            shift,
            scale,
            chol,
            weights,
        })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub(crate) fn chol(&self) -> &CholFactor {
        &self.chol
    }

    #[cfg(test)]
    pub(crate) fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub(crate) fn target_scale(&self) -> f64 {
        self.scale
    }

    pub(crate) fn target_shift(&self) -> f64 {
        self.shift
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::argument(format!(
                "gp: query dimension {} does not match {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Posterior mean μ(x) = k(x, X) α, mapped back through standardization.
    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let mut acc = 0.0;
        for (xi, w) in self.data.inputs().iter().zip(self.weights.iter()) {
            acc += kernel::k_unchecked(&self.params, x, xi.as_slice()) * w;
        }
        Ok(self.shift + self.scale * acc)
    }

    /// Posterior variance k(x,x) − k(x,X) K⁻¹ k(X,x), clamped at zero.
    pub fn posterior_var(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let n = self.data.len();
        let prior = self.params.signal_variance();
        if n == 0 {
            return Ok(self.scale * self.scale * prior);
        }
        let kv = DVector::from_iterator(
            n,
            self.data
                .inputs()
                .iter()
                .map(|xi| kernel::k_unchecked(&self.params, x, xi.as_slice())),
        );
        let v = self.chol.solve_lower(&kv);
        let var = prior - v.norm_squared();
        let var = clamp_nonneg(var, 1e-10, "posterior variance")?;
        Ok(self.scale * self.scale * var)
    }

    /// Posterior mean gradient and Hessian plus both power functions at `x`.
    pub fn grad_belief(&self, x: &[f64]) -> Result<DerivBelief> {
        self.check_point(x)?;
        let d = self.dim();
        let q = power::cross_deriv_matrix(&self.params, self.data.inputs(), x);
        let w = self.chol.solve_lower_mat(&q);
        let (pi_g, pi_h) = power::powers_from_solved(&self.params, &w)?;

        let means = q.transpose() * &self.weights;
        let mut mean_grad = DVector::zeros(d);
        for i in 0..d {
            mean_grad[i] = self.scale * means[i];
        }
        let mut mean_hess = DMatrix::zeros(d, d);
        for (col, &(i, j, _)) in power::hess_pairs(d).iter().enumerate() {
            let v = self.scale * means[d + col];
            mean_hess[(i, j)] = v;
            mean_hess[(j, i)] = v;
        }
        // analytically symmetric; make it exact against numerical drift
        let sym = (&mean_hess + mean_hess.transpose()) * 0.5;
        Ok(DerivBelief {
            mean_grad,
            mean_hess: sym,
            pi_g: self.scale * self.scale * pi_g,
            pi_h: self.scale * self.scale * pi_h,
        })
    }

    /// Factorization extended with pending inputs `z` (no targets needed).
    pub(crate) fn extended_conditioning(
        &self,
        z: &[DVector<f64>],
    ) -> Result<(Vec<DVector<f64>>, CholFactor)> {
        let n = self.data.len();
        let b = z.len();
        for (idx, row) in z.iter().enumerate() {
            if row.len() != self.dim() {
                return Err(Error::argument(format!(
                    "fantasy row {idx} has dimension {}, expected {}",
                    row.len(),
                    self.dim()
                )));
            }
        }
        let mut cross = DMatrix::<f64>::zeros(n, b);
        for (col, zr) in z.iter().enumerate() {
            for (row, xi) in self.data.inputs().iter().enumerate() {
                cross[(row, col)] =
                    kernel::k_unchecked(&self.params, xi.as_slice(), zr.as_slice());
            }
        }
        let mut corner = DMatrix::<f64>::zeros(b, b);
        for a in 0..b {
            for c in a..b {
                let v = kernel::k_unchecked(&self.params, z[a].as_slice(), z[c].as_slice());
                corner[(a, c)] = v;
                corner[(c, a)] = v;
            }
            corner[(a, a)] += self.params.noise_variance() + self.jitter;
        }
        let chol = self.chol.extend(&cross, &corner)?;
        let mut points: Vec<DVector<f64>> = self.data.inputs().to_vec();
        points.extend(z.iter().cloned());
        Ok((points, chol))
    }

    /// Power functions at `x` after conditioning on the inputs `D ∪ Z`.
    ///
    /// With `z` empty this equals the power functions from
    /// [`GpState::grad_belief`] exactly (same code path).
    pub fn fantasy_power(&self, x: &[f64], z: &[DVector<f64>]) -> Result<(f64, f64)> {
        self.check_point(x)?;
        let (points, chol) = self.extended_conditioning(z)?;
        let q = power::cross_deriv_matrix(&self.params, &points, x);
        let w = chol.solve_lower_mat(&q);
        let (pi_g, pi_h) = power::powers_from_solved(&self.params, &w)?;
        let s2 = self.scale * self.scale;
        Ok((s2 * pi_g, s2 * pi_h))
    }
}

/// Scale factor s = ‖Ĥ⁻¹‖² ‖ĝ‖² with the operator 2-norm on the matrix.
pub fn scale_factor(belief: &DerivBelief) -> Result<f64> {
    scale_factor_parts(&belief.mean_grad, &belief.mean_hess)
}

pub(crate) fn scale_factor_parts(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Result<f64> {
    let gnorm2 = grad.norm_squared();
    if gnorm2 == 0.0 {
        return Ok(0.0);
    }
    let ev = crate::linalg::symmetric_eigenvalues(hess);
    let sigma_min = ev.iter().fold(f64::INFINITY, |m, &l| m.min(l.abs()));
    let sigma_max = ev.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let threshold = 1e-10 * sigma_max.max(1.0);
    if sigma_min < threshold {
        return Err(Error::SingularHessian {
            sigma_min,
            threshold,
        });
    }
    Ok(gnorm2 / (sigma_min * sigma_min))
}

/// Mean and population std of the targets; a vanishing std maps to (mean, 1).
pub(crate) fn standardization(targets: &[f64]) -> (f64, f64) {
    let n = targets.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mean = targets.iter().sum::<f64>() / n as f64;
    let var = targets.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if std < 1e-12 * mean.abs().max(1.0) {
        (mean, 1.0)
    } else {
        (mean, std)
    }
}

/// Negative values within `tol` of zero clamp to zero; anything lower is a
/// genuine bug, not roundoff, and raises.
pub(crate) fn clamp_nonneg(v: f64, tol: f64, what: &str) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -tol {
        Ok(0.0)
    } else {
        Err(Error::numerical(format!(
            "{what} is {v:.6e}, below the roundoff tolerance -{tol:.1e}"
        )))
    }
}
