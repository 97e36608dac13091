//! Marginal-likelihood hyperparameter fitting.
//!
//! Optimizes the log marginal likelihood of the standardized targets over
//! log-hyperparameters with a bounded quasi-Newton method from several
//! seeded starts. Lengthscales live in [1e-3, 1e3] (normalized input units),
//! noise in [1e-8, 1], signal variance in [1e-4, 1e4].

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::KernelParams;
use crate::linalg::CholFactor;
use crate::opt::{minimize_box, LbfgsOptions};

use super::{standardization, Dataset};

/// Outcome status of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    /// All targets identical; the returned parameters are the heuristic
    /// initialization with the noise at its floor.
    DegenerateTargets,
}

/// Fitted hyperparameters plus status.
#[derive(Debug, Clone)]
pub struct HyperFit {
    pub params: KernelParams,
    pub status: FitStatus,
}

const LN_LS_LO: f64 = -6.907755278982137; // ln 1e-3
const LN_LS_HI: f64 = 6.907755278982137; // ln 1e3
const LN_NOISE_LO: f64 = -18.420680743952367; // ln 1e-8
const LN_NOISE_HI: f64 = 0.0;
const LN_SIGNAL_LO: f64 = -9.210340371976182; // ln 1e-4
const LN_SIGNAL_HI: f64 = 9.210340371976182; // ln 1e4

fn theta_to_params(theta: &DVector<f64>, d: usize) -> KernelParams {
    let signal = theta[0].exp();
    let ls: Vec<f64> = (0..d).map(|i| theta[1 + i].exp()).collect();
    let noise = theta[1 + d].exp();
    KernelParams::new(signal, ls, noise).expect("bounded log-parameters are valid")
}

/// Noiseless gram and factorized noisy gram at the given log-parameters.
fn build_factors(
    theta: &DVector<f64>,
    n: usize,
    d: usize,
    sq_dists: &[DMatrix<f64>],
) -> Option<(DMatrix<f64>, CholFactor)> {
    let signal = theta[0].exp();
    let noise = theta[1 + d].exp();
    let jitter = 1e-8 * signal;
    let inv_sq: Vec<f64> = (0..d).map(|i| (-2.0 * theta[1 + i]).exp()).collect();
    let mut gram_f = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let mut q = 0.0;
            for (i, inv) in inv_sq.iter().enumerate() {
                q += inv * sq_dists[i][(a, b)];
            }
            let v = signal * (-0.5 * q).exp();
            gram_f[(a, b)] = v;
            gram_f[(b, a)] = v;
        }
    }
    let mut gram = gram_f.clone();
    for a in 0..n {
        gram[(a, a)] += noise + jitter;
    }
    let chol = CholFactor::new(&gram).ok()?;
    Some((gram_f, chol))
}

/// Negative log marginal likelihood (value only; the line search calls this).
fn nlml_value(
    theta: &DVector<f64>,
    n: usize,
    d: usize,
    y: &DVector<f64>,
    sq_dists: &[DMatrix<f64>],
) -> f64 {
    let Some((_, chol)) = build_factors(theta, n, d, sq_dists) else {
        return f64::INFINITY;
    };
    let alpha = chol.solve(y);
    0.5 * y.dot(&alpha) + chol.half_log_det() + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// NLML gradient in log-parameter space; returns zeros when the kernel
/// matrix fails to factorize (the line search has already backed off).
fn nlml_grad(
    theta: &DVector<f64>,
    n: usize,
    d: usize,
    y: &DVector<f64>,
    sq_dists: &[DMatrix<f64>],
) -> DVector<f64> {
    let signal = theta[0].exp();
    let noise = theta[1 + d].exp();
    let jitter = 1e-8 * signal;
    let Some((gram_f, chol)) = build_factors(theta, n, d, sq_dists) else {
        return DVector::zeros(theta.len());
    };
    let alpha = chol.solve(y);

    // A = ααᵀ − K⁻¹; dNLML/dθ = −½ tr(A ∂K/∂θ)
    let mut kinv = DMatrix::<f64>::identity(n, n);
    for mut col in kinv.column_iter_mut() {
        let slice: &mut [f64] = col.as_mut_slice();
        chol.solve_lower_in_place(slice);
        chol.solve_upper_in_place(slice);
    }
    let a_mat = &alpha * alpha.transpose() - kinv;

    let mut grad = DVector::zeros(theta.len());
    let a_data = a_mat.as_slice();
    let gf_data = gram_f.as_slice();
    // ∂K/∂ln σ_f² = gram_f + jitter·I (both symmetric, so plain products)
    let mut tr = 0.0;
    for (av, gv) in a_data.iter().zip(gf_data) {
        tr += av * gv;
    }
    for r in 0..n {
        tr += a_mat[(r, r)] * jitter;
    }
    grad[0] = -0.5 * tr;
    // ∂K/∂ln ℓ_i = gram_f ⊙ sq_dist_i · ℓ_i⁻²
    for i in 0..d {
        let inv_sq = (-2.0 * theta[1 + i]).exp();
        let sq_data = sq_dists[i].as_slice();
        let mut tr = 0.0;
        for ((av, gv), sv) in a_data.iter().zip(gf_data).zip(sq_data) {
            tr += av * gv * sv;
        }
        grad[1 + i] = -0.5 * tr * inv_sq;
    }
    // ∂K/∂ln σ² = σ²·I
    let mut tr = 0.0;
    for r in 0..n {
        tr += a_mat[(r, r)] * noise;
    }
    grad[1 + d] = -0.5 * tr;

    grad
}

fn heuristic_init(inputs: &[DVector<f64>]) -> DVector<f64> {
    let d = inputs[0].len();
    let mut theta = DVector::zeros(d + 2);
    theta[0] = 0.0; // σ_f² = 1 on standardized targets
    for i in 0..d {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in inputs {
            lo = lo.min(x[i]);
            hi = hi.max(x[i]);
        }
        let range = (hi - lo).max(1e-3);
        theta[1 + i] = (0.3 * range).ln().clamp(LN_LS_LO, LN_LS_HI);
    }
    theta[1 + d] = (1e-4f64).ln();
    theta
}

/// Fit SE-ARD hyperparameters by maximizing the log marginal likelihood from
/// `restarts` seeded initializations; the best restart wins, ties broken by
/// first index.
pub fn fit_hyperparams<R: Rng>(data: &Dataset, restarts: usize, rng: &mut R) -> Result<HyperFit> {
    fit_hyperparams_from(data, restarts, None, rng)
}

/// As [`fit_hyperparams`], but the first initialization restarts from warm
/// parameters (a previous fit) instead of the range heuristic.
pub fn fit_hyperparams_from<R: Rng>(
    data: &Dataset,
    restarts: usize,
    warm: Option<&KernelParams>,
    rng: &mut R,
) -> Result<HyperFit> {
    let n = data.len();
    let d = data.dim();
    if n < 2 {
        return Err(Error::argument(format!(
            "hyperparameter fit needs at least 2 observations, got {n}"
        )));
    }
    if restarts == 0 {
        return Err(Error::argument("restarts must be at least 1"));
    }

    let (shift, scale) = standardization(data.targets());
    let spread = data
        .targets()
        .iter()
        .map(|y| (y - shift).abs())
        .fold(0.0f64, f64::max);
    if spread < 1e-12 * shift.abs().max(1.0) {
        let mut theta = heuristic_init(data.inputs());
        theta[1 + d] = LN_NOISE_LO;
        return Ok(HyperFit {
            params: theta_to_params(&theta, d),
            status: FitStatus::DegenerateTargets,
        });
    }

    let y = DVector::from_iterator(n, data.targets().iter().map(|t| (t - shift) / scale));
    let mut sq_dists = Vec::with_capacity(d);
    for i in 0..d {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let r = data.inputs()[a][i] - data.inputs()[b][i];
                m[(a, b)] = r * r;
                m[(b, a)] = r * r;
            }
        }
        sq_dists.push(m);
    }

    let mut lo = DVector::zeros(d + 2);
    let mut hi = DVector::zeros(d + 2);
    lo[0] = LN_SIGNAL_LO;
    hi[0] = LN_SIGNAL_HI;
    for i in 0..d {
        lo[1 + i] = LN_LS_LO;
        hi[1 + i] = LN_LS_HI;
    }
    lo[1 + d] = LN_NOISE_LO;
    hi[1 + d] = LN_NOISE_HI;

    let opts = LbfgsOptions {
        max_iters: 60,
        grad_tol: 1e-5,
        ..Default::default()
    };

    let mut best: Option<(f64, DVector<f64>)> = None;
    for restart in 0..restarts {
        let theta0 = if restart == 0 {
            match warm {
                Some(p) => {
                    let mut t = DVector::zeros(d + 2);
                    t[0] = p.signal_variance().ln().clamp(LN_SIGNAL_LO, LN_SIGNAL_HI);
                    for i in 0..d {
                        t[1 + i] = p.lengthscales()[i].ln().clamp(LN_LS_LO, LN_LS_HI);
                    }
                    t[1 + d] = p.noise_variance().max(1e-8).ln().clamp(LN_NOISE_LO, LN_NOISE_HI);
                    t
                }
                None => heuristic_init(data.inputs()),
            }
        } else if restart == 1 && warm.is_some() {
            heuristic_init(data.inputs())
        } else {
            let mut t = DVector::zeros(d + 2);
            t[0] = rng.random_range(-2.3..2.3); // σ_f² in ~[0.1, 10]
            for i in 0..d {
                t[1 + i] = rng.random_range((0.05f64).ln()..(2.0f64).ln());
            }
            t[1 + d] = rng.random_range((1e-6f64).ln()..(1e-1f64).ln());
            t
        };
        let value_fn = |th: &DVector<f64>| nlml_value(th, n, d, &y, &sq_dists);
        let grad_fn = |th: &DVector<f64>| nlml_grad(th, n, d, &y, &sq_dists);
        let (theta, value) = minimize_box(value_fn, grad_fn, &theta0, &lo, &hi, &opts);
        let better = match &best {
            None => value.is_finite(),
            Some((bv, _)) => value < *bv,
        };
        if better {
            best = Some((value, theta));
        }
    }

    let (_, theta) = best.ok_or_else(|| {
        Error::numerical("hyperparameter fit: every restart failed to produce a finite likelihood")
    })?;
    Ok(HyperFit {
        params: theta_to_params(&theta, d),
        status: FitStatus::Converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_data(rng: &mut ChaCha8Rng, n: usize) -> Dataset {
        let mut data = Dataset::empty(1);
        for _ in 0..n {
            let x = rng.random::<f64>();
            data.push(
                DVector::from_row_slice(&[x]),
                (6.0 * x).sin() + 0.01 * rng.random::<f64>(),
            )
            .unwrap();
        }
        data
    }

    #[test]
    fn rejects_tiny_datasets() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut data = Dataset::empty(1);
        data.push(DVector::from_row_slice(&[0.0]), 1.0).unwrap();
        assert!(fit_hyperparams(&data, 1, &mut rng).is_err());
    }

    #[test]
    fn degenerate_targets_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let mut data = Dataset::empty(1);
        data.push(DVector::from_row_slice(&[0.0]), 2.5).unwrap();
        data.push(DVector::from_row_slice(&[1.0]), 2.5).unwrap();
        let fit = fit_hyperparams(&data, 3, &mut rng).unwrap();
        assert_eq!(fit.status, FitStatus::DegenerateTargets);
        assert!((fit.params.noise_variance() - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn deterministic_given_seed() {
        let data = toy_data(&mut ChaCha8Rng::seed_from_u64(33), 12);
        let a = fit_hyperparams(&data, 1, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = fit_hyperparams(&data, 1, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.params.signal_variance(), b.params.signal_variance());
        assert_eq!(a.params.lengthscales(), b.params.lengthscales());
        assert_eq!(a.params.noise_variance(), b.params.noise_variance());
    }

    #[test]
    fn fit_improves_likelihood_over_heuristic() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let data = toy_data(&mut rng, 20);
        let fit = fit_hyperparams(&data, 3, &mut rng).unwrap();
        assert_eq!(fit.status, FitStatus::Converged);
        // the fitted lengthscale should be well inside the bounds
        let ls = fit.params.lengthscales()[0];
        assert!(ls > 1e-3 && ls < 1e3);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let data = toy_data(&mut rng, 10);
        let (shift, scale) = standardization(data.targets());
        let y = DVector::from_iterator(
            data.len(),
            data.targets().iter().map(|t| (t - shift) / scale),
        );
        let mut sq = DMatrix::<f64>::zeros(10, 10);
        for a in 0..10 {
            for b in 0..10 {
                let r = data.inputs()[a][0] - data.inputs()[b][0];
                sq[(a, b)] = r * r;
            }
        }
        let sq_dists = vec![sq];
        let theta = DVector::from_row_slice(&[0.2, -0.9, -5.0]);
        let g = nlml_grad(&theta, 10, 1, &y, &sq_dists);
        for p in 0..3 {
            let h = 1e-6;
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[p] += h;
            tm[p] -= h;
            let fp = nlml_value(&tp, 10, 1, &y, &sq_dists);
            let fm = nlml_value(&tm, 10, 1, &y, &sq_dists);
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (g[p] - fd).abs() < 1e-4 * fd.abs().max(1.0),
                "param {p}: analytic {} vs fd {}",
                g[p],
                fd
            );
        }
    }
}
