//! Bounded quasi-Newton minimization (projected L-BFGS).
//!
//! Serves two callers: marginal-likelihood fitting (analytic gradients) and
//! acquisition polish inside the local box (finite-difference gradients).
//! Line-search probes call the value-only closure; the gradient closure runs
//! only at accepted iterates, which matters when gradients cost 2d extra
//! evaluations.

use nalgebra::DVector;

/// Options for [`minimize_box`].
#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub memory: usize,
    pub c1: f64,
    pub shrink: f64,
    pub max_line_steps: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iters: 100,
            grad_tol: 1e-6,
            memory: 8,
            c1: 1e-4,
            shrink: 0.5,
            max_line_steps: 25,
        }
    }
}

fn clamp_to_box(x: &mut DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Gradient with coordinates pointing out of the box zeroed.
fn projected_gradient(
    x: &DVector<f64>,
    g: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let at_lo = x[i] <= lo[i] && g[i] > 0.0;
        let at_hi = x[i] >= hi[i] && g[i] < 0.0;
        if at_lo || at_hi {
            0.0
        } else {
            g[i]
        }
    })
}

/// Minimize over the box `[lo, hi]` starting from `x0`.
///
/// `value` evaluates the objective; `gradient` returns its gradient (called
/// only at accepted iterates). The returned point is the best iterate seen;
/// the search is monotone in the objective.
pub fn minimize_box<FV, FG>(
    mut value: FV,
    mut gradient: FG,
    x0: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    opts: &LbfgsOptions,
) -> (DVector<f64>, f64)
where
    FV: FnMut(&DVector<f64>) -> f64,
    FG: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut x = x0.clone();
    clamp_to_box(&mut x, lo, hi);
    let mut fx = value(&x);
    if !fx.is_finite() {
        return (x, fx);
    }
    let mut g = gradient(&x);

    let mut s_hist: Vec<DVector<f64>> = Vec::new();
    let mut y_hist: Vec<DVector<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut stalled = 0usize;
    let mut skipped_updates = 0usize;

    for _ in 0..opts.max_iters {
        let pg = projected_gradient(&x, &g, lo, hi);
        if pg.norm() <= opts.grad_tol {
            break;
        }

        // Two-loop recursion on the stored curvature pairs.
        let mut q = pg.clone();
        let m = s_hist.len();
        let mut alphas = vec![0.0; m];
        for k in (0..m).rev() {
            alphas[k] = rho_hist[k] * s_hist[k].dot(&q);
            q -= &y_hist[k] * alphas[k];
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let yy = y.dot(y);
            if yy > 0.0 {
                q *= s.dot(y) / yy;
            }
        }
        for k in 0..m {
            let beta = rho_hist[k] * y_hist[k].dot(&q);
            q += &s_hist[k] * (alphas[k] - beta);
        }
        let mut dir = q; // candidate descent direction (to be subtracted)
        if s_hist.is_empty() {
            // unit-length first step instead of a raw-gradient leap
            let norm = dir.norm();
            if norm > 1.0 {
                dir /= norm;
            }
        }
        let mut slope = pg.dot(&dir);
        if !(slope > 0.0) || !slope.is_finite() {
            dir = pg.clone();
            slope = pg.norm_squared();
        }

        // Backtracking on the projection arc; probes are value-only.
        let mut gamma = 1.0;
        let mut accepted = false;
        for _ in 0..opts.max_line_steps {
            let mut cand = &x - &dir * gamma;
            clamp_to_box(&mut cand, lo, hi);
            if (&cand - &x).norm() == 0.0 {
                break;
            }
            let fc = value(&cand);
            if fc.is_finite() && fc <= fx - opts.c1 * gamma * slope {
                let gc = gradient(&cand);
                let step = &cand - &x;
                let ygrad = &gc - &g;
                let sy = step.dot(&ygrad);
                if sy > 1e-12 * step.norm() * ygrad.norm() {
                    s_hist.push(step);
                    y_hist.push(ygrad);
                    rho_hist.push(1.0 / sy);
                    if s_hist.len() > opts.memory {
                        s_hist.remove(0);
                        y_hist.remove(0);
                        rho_hist.remove(0);
                    }
                    skipped_updates = 0;
                } else {
                    // negative curvature along the step; a stale model keeps
                    // reproducing the same direction, so restart the memory
                    skipped_updates += 1;
                    if skipped_updates >= 2 {
                        s_hist.clear();
                        y_hist.clear();
                        rho_hist.clear();
                        skipped_updates = 0;
                    }
                }
                let improvement = fx - fc;
                x = cand;
                fx = fc;
                g = gc;
                accepted = true;
                if improvement <= 1e-12 * (1.0 + fx.abs()) {
                    stalled += 1;
                    if stalled >= 2 {
                        return (x, fx);
                    }
                } else {
                    stalled = 0;
                }
                break;
            }
            gamma *= opts.shrink;
        }
        if !accepted {
            if dir != pg {
                // retry once along steepest descent before giving up
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                let mut gamma = 1.0;
                let mut moved = false;
                for _ in 0..opts.max_line_steps {
                    let mut cand = &x - &pg * gamma;
                    clamp_to_box(&mut cand, lo, hi);
                    let fc = value(&cand);
                    if fc.is_finite() && fc < fx {
                        g = gradient(&cand);
                        x = cand;
                        fx = fc;
                        moved = true;
                        break;
                    }
                    gamma *= opts.shrink;
                }
                if moved {
                    continue;
                }
            }
            break;
        }
    }
    (x, fx)
}

/// Central finite-difference gradient of a value-only objective, with steps
/// scaled by the box width and clipped at the bounds.
pub fn central_fd_gradient<F>(
    f: &mut F,
    x: &DVector<f64>,
    step: f64,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> DVector<f64>
where
    F: FnMut(&DVector<f64>) -> f64,
{
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    let mut xm = x.clone();
    for i in 0..x.len() {
        let h = step * (hi[i] - lo[i]).max(1e-12);
        xp[i] = (x[i] + h).min(hi[i]);
        xm[i] = (x[i] - h).max(lo[i]);
        let denom = xp[i] - xm[i];
        g[i] = if denom > 0.0 {
            (f(&xp) - f(&xm)) / denom
        } else {
            0.0
        };
        xp[i] = x[i];
        xm[i] = x[i];
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_quadratic(x0: &[f64]) -> (DVector<f64>, f64) {
        let value = |x: &DVector<f64>| (x[0] - 0.3).powi(2) + 4.0 * (x[1] + 0.2).powi(2);
        let gradient = |x: &DVector<f64>| {
            DVector::from_row_slice(&[2.0 * (x[0] - 0.3), 8.0 * (x[1] + 0.2)])
        };
        let lo = DVector::from_row_slice(&[-1.0, -1.0]);
        let hi = DVector::from_row_slice(&[1.0, 1.0]);
        minimize_box(
            value,
            gradient,
            &DVector::from_row_slice(x0),
            &lo,
            &hi,
            &LbfgsOptions::default(),
        )
    }

    #[test]
    fn quadratic_interior_minimum() {
        let (x, fx) = run_quadratic(&[0.9, 0.9]);
        assert!(fx < 1e-10);
        assert!((x[0] - 0.3).abs() < 1e-5 && (x[1] + 0.2).abs() < 1e-5);
    }

    #[test]
    fn minimum_on_boundary() {
        let value = |x: &DVector<f64>| (x[0] - 2.0).powi(2);
        let gradient = |x: &DVector<f64>| DVector::from_row_slice(&[2.0 * (x[0] - 2.0)]);
        let lo = DVector::from_row_slice(&[-1.0]);
        let hi = DVector::from_row_slice(&[1.0]);
        let x0 = DVector::from_row_slice(&[-0.5]);
        let (x, _) = minimize_box(value, gradient, &x0, &lo, &hi, &LbfgsOptions::default());
        assert!((x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rosenbrock_2d_converges() {
        let value = |x: &DVector<f64>| {
            let (a, b) = (x[0], x[1]);
            100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2)
        };
        let gradient = |x: &DVector<f64>| {
            let (a, b) = (x[0], x[1]);
            DVector::from_row_slice(&[
                -400.0 * a * (b - a * a) - 2.0 * (1.0 - a),
                200.0 * (b - a * a),
            ])
        };
        let lo = DVector::from_row_slice(&[-2.0, -2.0]);
        let hi = DVector::from_row_slice(&[2.0, 2.0]);
        let x0 = DVector::from_row_slice(&[-1.2, 1.0]);
        let opts = LbfgsOptions {
            max_iters: 400,
            grad_tol: 1e-8,
            ..Default::default()
        };
        let (x, fx) = minimize_box(value, gradient, &x0, &lo, &hi, &opts);
        assert!(fx < 1e-8, "fx={fx:.3e} at {x:?}");
    }

    #[test]
    fn fd_gradient_matches_analytic() {
        let lo = DVector::from_row_slice(&[-1.0, -1.0]);
        let hi = DVector::from_row_slice(&[1.0, 1.0]);
        let mut f = |x: &DVector<f64>| x[0] * x[0] + 3.0 * x[1];
        let x = DVector::from_row_slice(&[0.4, 0.1]);
        let g = central_fd_gradient(&mut f, &x, 1e-5, &lo, &hi);
        assert!((g[0] - 0.8).abs() < 1e-6);
        assert!((g[1] - 3.0).abs() < 1e-6);
    }
}
