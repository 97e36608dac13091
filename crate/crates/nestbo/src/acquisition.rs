//! Newton-step-targeting acquisition and greedy batch selection.
//!
//! The single-batch value is π^g_{D∪Z}(x_t) + ŝ·π^H_{D∪Z}(x_t). Because the
//! power functions only depend on inputs, pending points condition the
//! posterior without targets; greedy selection appends each accepted point
//! to the pending set so later picks see it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{self, GpState, PowerProbe};
use crate::lowdisc::LowDiscrepancy;
use crate::opt::{central_fd_gradient, minimize_box, LbfgsOptions};

/// Scale-factor strategy for weighting the Hessian power function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "arg")]
pub enum ScaleMode {
    /// Fixed ŝ > 0.
    Fixed(f64),
    /// ŝ = s_D(x_t) from the current belief.
    Plugin,
    /// Monte-Carlo estimate of E_y{s_{D∪(Z,y)}(x_t)} with this many samples.
    MonteCarlo(usize),
}

/// Acquisition configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcqConfig {
    pub scale_mode: ScaleMode,
    /// Half-width of the local search box as a fraction of each dimension's
    /// domain width.
    pub box_radius: f64,
    /// Polished starts per greedy pick.
    pub num_restarts: usize,
    /// Seed points scored before polishing.
    pub raw_samples: usize,
    /// Inner-optimizer iteration cap.
    pub polish_iters: usize,
    /// Inner-optimizer gradient-norm tolerance.
    pub polish_grad_tol: f64,
}

impl Default for AcqConfig {
    fn default() -> Self {
        AcqConfig {
            scale_mode: ScaleMode::Fixed(1.0),
            box_radius: 0.2,
            num_restarts: 5,
            raw_samples: 20,
            polish_iters: 100,
            polish_grad_tol: 1e-6,
        }
    }
}

impl AcqConfig {
    pub fn validate(&self) -> Result<()> {
        match self.scale_mode {
            ScaleMode::Fixed(v) if !(v > 0.0) => {
                return Err(Error::argument(format!(
                    "fixed scale factor must be positive, got {v}"
                )))
            }
            ScaleMode::MonteCarlo(n) if n == 0 => {
                return Err(Error::argument("monte_carlo sample count must be >= 1"))
            }
            _ => {}
        }
        if !(self.box_radius > 0.0 && self.box_radius <= 1.0) {
            return Err(Error::argument(format!(
                "box radius must lie in (0, 1], got {}",
                self.box_radius
            )));
        }
        if self.num_restarts == 0 || self.raw_samples == 0 {
            return Err(Error::argument(
                "num_restarts and raw_samples must be at least 1",
            ));
        }
        Ok(())
    }
}

/// π^g_{D∪Z}(x_t) + ŝ·π^H_{D∪Z}(x_t) with a fixed ŝ > 0.
pub fn nest_value(gp: &GpState, x_t: &[f64], z: &[DVector<f64>], s_hat: f64) -> Result<f64> {
    if !(s_hat > 0.0) {
        return Err(Error::argument(format!(
            "nest_value requires s_hat > 0, got {s_hat}"
        )));
    }
    let (pi_g, pi_h) = gp.fantasy_power(x_t, z)?;
    Ok(pi_g + s_hat * pi_h)
}

/// Gradient-information value π^g_{D∪Z}(x_t) (the ŝ = 0 degenerate case).
pub fn gi_value(gp: &GpState, x_t: &[f64], z: &[DVector<f64>]) -> Result<f64> {
    let (pi_g, _) = gp.fantasy_power(x_t, z)?;
    Ok(pi_g)
}

/// Monte-Carlo acquisition value and diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct McNestValue {
    pub value: f64,
    pub pi_g: f64,
    pub pi_h: f64,
    pub mean_scale: f64,
    /// Samples whose fantasy Hessian was singular; their scale was replaced
    /// by the plug-in value from current data.
    pub singular_replacements: usize,
}

/// Monte-Carlo NeST value: draws joint fantasy targets at Z from the
/// posterior predictive, averages the resulting scale factors, and returns
/// π^g + mean(s)·π^H. Deterministic given the RNG state.
pub fn mc_nest_value<R: Rng>(
    gp: &GpState,
    x_t: &[f64],
    z: &[DVector<f64>],
    num_samples: usize,
    rng: &mut R,
) -> Result<McNestValue> {
    if num_samples == 0 {
        return Err(Error::argument("monte_carlo sample count must be >= 1"));
    }
    let b = z.len();
    let xi = DMatrix::from_fn(num_samples, b, |_, _| StandardNormal.sample(rng));
    mc_nest_value_with_draws(gp, x_t, z, &xi)
}

/// As [`mc_nest_value`] but with externally fixed standard-normal draws
/// (`xi` is `num_samples × |Z|`); used by greedy selection so every candidate
/// in one pick shares common random numbers.
pub(crate) fn mc_nest_value_with_draws(
    gp: &GpState,
    x_t: &[f64],
    z: &[DVector<f64>],
    xi: &DMatrix<f64>,
) -> Result<McNestValue> {
    let d = gp.dim();
    let belief = gp.grad_belief(x_t)?;
    let plugin = gp::scale_factor(&belief);

    if z.is_empty() {
        // expectation over nothing: the plug-in value
        let s = plugin?;
        return Ok(McNestValue {
            value: belief.pi_g + s * belief.pi_h,
            pi_g: belief.pi_g,
            pi_h: belief.pi_h,
            mean_scale: s,
            singular_replacements: 0,
        });
    }
    let b = z.len();
    if xi.ncols() != b {
        return Err(Error::argument(format!(
            "draw matrix has {} columns for a batch of {b}",
            xi.ncols()
        )));
    }

    let (points, chol) = gp.extended_conditioning(z)?;
    let q = gp::cross_deriv_matrix(gp.params(), &points, x_t);
    let w = chol.solve_lower_mat(&q);
    let (pi_g_std, pi_h_std) = gp::powers_from_solved(gp.params(), &w)?;
    let s2 = gp.target_scale() * gp.target_scale();
    let (pi_g, pi_h) = (s2 * pi_g_std, s2 * pi_h_std);

    // With the bordered factor L' = [[L,0],[Vᵀ,Λ]] and fantasy targets
    // y* = μ_Z + Λξ, the solved data vector is exactly [L⁻¹y_std; ξ], so a
    // fantasy's derivative means are the current means plus (bottom rows of
    // W')ᵀ ξ. That keeps the per-sample cost at O(p·b).
    let n = gp.data().len();
    let mean_base = w.rows(0, n).transpose()
        * {
            let y_std = DVector::from_iterator(
                n,
                gp.data()
                    .targets()
                    .iter()
                    .map(|y| (y - gp.target_shift()) / gp.target_scale()),
            );
            gp.chol().solve_lower(&y_std)
        };
    let w_bot = w.rows(n, b).into_owned();

    let pairs = gp::hess_pairs(d);
    let mut s_sum = 0.0;
    let mut replaced = 0usize;
    for row in 0..xi.nrows() {
        let xi_row = xi.row(row).transpose();
        let m = &mean_base + w_bot.transpose() * &xi_row;
        let grad = DVector::from_fn(d, |i, _| m[i]);
        let mut hess = DMatrix::zeros(d, d);
        for (col, &(i, j, _)) in pairs.iter().enumerate() {
            hess[(i, j)] = m[d + col];
            hess[(j, i)] = m[d + col];
        }
        let s_k = match gp::scale_factor_parts(&grad, &hess) {
            Ok(s) => s,
            Err(Error::SingularHessian { .. }) => {
                replaced += 1;
                match &plugin {
                    Ok(s) => *s,
                    Err(_) => {
                        return Err(Error::numerical(
                            "mc_nest_value: fantasy and plug-in Hessians are both singular",
                        ))
                    }
                }
            }
            Err(e) => return Err(e),
        };
        s_sum += s_k;
    }
    let mean_scale = s_sum / xi.nrows() as f64;
    Ok(McNestValue {
        value: pi_g + mean_scale * pi_h,
        pi_g,
        pi_h,
        mean_scale,
        singular_replacements: replaced,
    })
}

/// Outcome of one greedy batch selection.
#[derive(Debug, Clone)]
pub struct BatchSelection {
    pub points: Vec<DVector<f64>>,
    /// Acquisition value after each accepted pick (non-increasing).
    pub values: Vec<f64>,
    /// Scale factor in effect for the batch.
    pub s_hat: f64,
}

fn intersect_box(
    x_t: &[f64],
    radius_fraction: f64,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let d = x_t.len();
    let mut blo = DVector::zeros(d);
    let mut bhi = DVector::zeros(d);
    for i in 0..d {
        let half = radius_fraction * (hi[i] - lo[i]);
        blo[i] = (x_t[i] - half).max(lo[i]);
        bhi[i] = (x_t[i] + half).min(hi[i]);
    }
    (blo, bhi)
}

/// Select `b` rows greedily: each inner problem minimizes the single-point
/// acquisition over the box `[x_t − δ, x_t + δ] ∩ domain`, seeding from
/// `raw_samples` quasi-random points and polishing the best `num_restarts`
/// with a bounded quasi-Newton on finite-difference gradients. Ties break
/// toward the lowest start index; if every polish fails the best raw sample
/// is accepted.
pub fn select_batch<R: Rng>(
    gp: &GpState,
    x_t: &[f64],
    b: usize,
    cfg: &AcqConfig,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    rng: &mut R,
) -> Result<BatchSelection> {
    cfg.validate()?;
    let s_hat = match cfg.scale_mode {
        ScaleMode::Fixed(v) => v,
        ScaleMode::Plugin | ScaleMode::MonteCarlo(_) => {
            // plug-in from current data; robust default when the current
            // Hessian estimate is still singular
            match gp.grad_belief(x_t).and_then(|b| gp::scale_factor(&b)) {
                Ok(s) if s > 0.0 => s,
                _ => 1.0,
            }
        }
    };
    let mc = match cfg.scale_mode {
        ScaleMode::MonteCarlo(k) => Some(k),
        _ => None,
    };
    greedy_select(gp, x_t, b, cfg, s_hat, mc, lo, hi, rng)
}

/// Gradient-information batch selection: the same greedy machinery with the
/// Hessian term absent. Used by the GIBO baseline.
pub fn select_batch_gi<R: Rng>(
    gp: &GpState,
    x_t: &[f64],
    b: usize,
    cfg: &AcqConfig,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    rng: &mut R,
) -> Result<BatchSelection> {
    cfg.validate()?;
    greedy_select(gp, x_t, b, cfg, 0.0, None, lo, hi, rng)
}

#[allow(clippy::too_many_arguments)]
fn greedy_select<R: Rng>(
    gp: &GpState,
    x_t: &[f64],
    b: usize,
    cfg: &AcqConfig,
    s_hat: f64,
    mc: Option<usize>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    rng: &mut R,
) -> Result<BatchSelection> {
    if b == 0 {
        return Err(Error::argument("batch size must be at least 1"));
    }
    let d = gp.dim();
    if x_t.len() != d || lo.len() != d || hi.len() != d {
        return Err(Error::argument("select_batch: dimension mismatch"));
    }
    let (blo, bhi) = intersect_box(x_t, cfg.box_radius, lo, hi);

    let mut seeds = LowDiscrepancy::new(d, rng.random::<u64>());
    let mut probe = PowerProbe::new(gp, x_t)?;
    let mut pending: Vec<DVector<f64>> = Vec::with_capacity(b);
    let mut values = Vec::with_capacity(b);

    let polish_opts = LbfgsOptions {
        max_iters: cfg.polish_iters,
        grad_tol: cfg.polish_grad_tol,
        ..Default::default()
    };

    for _pick in 0..b {
        let mc_draws = mc.map(|k| {
            DMatrix::from_fn(k, pending.len() + 1, |_, _| StandardNormal.sample(rng))
        });

        let evaluate = |z: &DVector<f64>| -> f64 {
            let v = match &mc_draws {
                None => probe
                    .value_with(z)
                    .map(|(pg, ph)| pg + s_hat * ph),
                Some(xi) => {
                    let mut zs = pending.clone();
                    zs.push(z.clone());
                    mc_nest_value_with_draws(gp, x_t, &zs, xi).map(|m| m.value)
                }
            };
            v.unwrap_or(f64::INFINITY)
        };

        // raw seed points
        let mut raw: Vec<(f64, DVector<f64>)> = Vec::with_capacity(cfg.raw_samples);
        for _ in 0..cfg.raw_samples {
            let p = DVector::from_vec(seeds.next_in_box(blo.as_slice(), bhi.as_slice()));
            raw.push((evaluate(&p), p));
        }
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &c| raw[a].0.partial_cmp(&raw[c].0).expect("non-finite cmp"));

        let mut best: Option<(f64, DVector<f64>)> = None;
        for &idx in order.iter().take(cfg.num_restarts) {
            if !raw[idx].0.is_finite() {
                continue;
            }
            let value_fn = |z: &DVector<f64>| evaluate(z);
            let grad_fn = |z: &DVector<f64>| {
                let mut f = |p: &DVector<f64>| evaluate(p);
                central_fd_gradient(&mut f, z, 1e-4, &blo, &bhi)
            };
            let (z, v) = minimize_box(value_fn, grad_fn, &raw[idx].1, &blo, &bhi, &polish_opts);
            if v.is_finite() && best.as_ref().map_or(true, |(bv, _)| v < *bv) {
                best = Some((v, z));
            }
        }
        let (value, chosen) = match best {
            Some((v, z)) => (v, z),
            None => {
                let idx = order[0];
                (raw[idx].0, raw[idx].1.clone())
            }
        };
        if !value.is_finite() {
            return Err(Error::numerical(
                "select_batch: acquisition non-finite at every candidate",
            ));
        }
        if mc_draws.is_none() {
            probe.push(chosen.clone())?;
        }
        pending.push(chosen);
        values.push(value);
    }

    Ok(BatchSelection {
        points: pending,
        values,
        s_hat,
    })
}
