//! Independent verification machinery.
//!
//! Finite-difference oracles for every kernel derivative order, the
//! symmetric (d²+d+1)-point stencil, the vanishing-power-function sweep,
//! Newton-step-error measurement against analytic ground truth, and a
//! brute-force Hessian power function that assembles the full d²×d²
//! posterior covariance entry by entry.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::{Dataset, GpOptions, GpState};
use crate::kernel::{self, KernelParams};

/// FD steps: `1e-4·ℓ` for orders one and two, `1e-2·ℓ` for order four
/// (truncation versus cancellation at double precision).
pub const FD_STEP_LOW_ORDER: f64 = 1e-4;
pub const FD_STEP_FOURTH_ORDER: f64 = 1e-2;

/// Central finite difference of k in x_i.
pub fn fd_dk_dx(params: &KernelParams, x: &[f64], xp: &[f64], i: usize) -> Result<f64> {
    let h = FD_STEP_LOW_ORDER * params.lengthscales()[i];
    let mut xa = x.to_vec();
    let mut xb = x.to_vec();
    xa[i] += h;
    xb[i] -= h;
    Ok((kernel::k(params, &xa, xp)? - kernel::k(params, &xb, xp)?) / (2.0 * h))
}

/// Central finite difference of dk/dx_i in the second argument's j-th
/// coordinate.
pub fn fd_d2k_dx_dxp(params: &KernelParams, x: &[f64], xp: &[f64], i: usize, j: usize) -> Result<f64> {
    let h = FD_STEP_LOW_ORDER * params.lengthscales()[j];
    let mut pa = xp.to_vec();
    let mut pb = xp.to_vec();
    pa[j] += h;
    pb[j] -= h;
    Ok((kernel::dk_dx(params, x, &pa, i)? - kernel::dk_dx(params, x, &pb, i)?) / (2.0 * h))
}

/// Second central finite difference of k in x_i, x_j (same argument).
pub fn fd_d2k_dx_dx(params: &KernelParams, x: &[f64], xp: &[f64], i: usize, j: usize) -> Result<f64> {
    let hi = FD_STEP_LOW_ORDER * params.lengthscales()[i];
    let hj = FD_STEP_LOW_ORDER * params.lengthscales()[j];
    if i == j {
        let mut xa = x.to_vec();
        let mut xb = x.to_vec();
        xa[i] += hi;
        xb[i] -= hi;
        Ok((kernel::k(params, &xa, xp)? - 2.0 * kernel::k(params, x, xp)?
            + kernel::k(params, &xb, xp)?)
            / (hi * hi))
    } else {
        let mut pp = x.to_vec();
        let mut pm = x.to_vec();
        let mut mp = x.to_vec();
        let mut mm = x.to_vec();
        pp[i] += hi;
        pp[j] += hj;
        pm[i] += hi;
        pm[j] -= hj;
        mp[i] -= hi;
        mp[j] += hj;
        mm[i] -= hi;
        mm[j] -= hj;
        Ok((kernel::k(params, &pp, xp)? - kernel::k(params, &pm, xp)?
            - kernel::k(params, &mp, xp)?
            + kernel::k(params, &mm, xp)?)
            / (4.0 * hi * hj))
    }
}

/// Fourth-order-accurate central first difference along one coordinate.
fn directional_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut p2 = x.to_vec();
    let mut p1 = x.to_vec();
    let mut m1 = x.to_vec();
    let mut m2 = x.to_vec();
    p2[i] += 2.0 * h;
    p1[i] += h;
    m1[i] -= h;
    m2[i] -= 2.0 * h;
    (-f(&p2) + 8.0 * f(&p1) - 8.0 * f(&m1) + f(&m2)) / (12.0 * h)
}

/// Fourth-order mixed finite difference ∂⁴k/∂x_i∂x_j∂x'_i∂x'_j as four
/// nested first differences, two per kernel argument.
pub fn fd_d4k(params: &KernelParams, x: &[f64], xp: &[f64], i: usize, j: usize) -> Result<f64> {
    if i >= params.dim() || j >= params.dim() {
        return Err(Error::argument("fd_d4k: index out of range"));
    }
    let hi = FD_STEP_FOURTH_ORDER * params.lengthscales()[i];
    let hj = FD_STEP_FOURTH_ORDER * params.lengthscales()[j];
    let d_xpj = |xx: &[f64], pp: &[f64]| {
        let mut inner = |p: &[f64]| kernel::k_unchecked(params, xx, p);
        directional_diff(&mut inner, pp, j, hj)
    };
    let d_xpi = |xx: &[f64], pp: &[f64]| {
        let mut inner = |p: &[f64]| d_xpj(xx, p);
        directional_diff(&mut inner, pp, i, hi)
    };
    let d_xj = |xx: &[f64]| {
        let mut inner = |q: &[f64]| d_xpi(q, xp);
        directional_diff(&mut inner, xx, j, hj)
    };
    let mut outer = |q: &[f64]| d_xj(q);
    Ok(directional_diff(&mut outer, x, i, hi))
}

/// The symmetric stencil {0} ∪ {±h e_i} ∪ {±h(e_i+e_j), i<j} around a
/// center, b* = d² + d + 1 points. Row order: center, then ±h e_1, …,
/// then the (i, j) pairs lexicographically with + before −.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub center: DVector<f64>,
    pub h: f64,
    pub points: Vec<DVector<f64>>,
}

pub fn make_stencil(center: &DVector<f64>, h: f64, d: usize) -> Result<Stencil> {
    if !(h > 0.0) {
        return Err(Error::argument("stencil spacing h must be positive"));
    }
    if center.len() != d {
        return Err(Error::argument("stencil center dimension mismatch"));
    }
    let mut points = Vec::with_capacity(d * d + d + 1);
    points.push(center.clone());
    for i in 0..d {
        for sign in [1.0, -1.0] {
            let mut p = center.clone();
            p[i] += sign * h;
            points.push(p);
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            for sign in [1.0, -1.0] {
                let mut p = center.clone();
                p[i] += sign * h;
                p[j] += sign * h;
                points.push(p);
            }
        }
    }
    debug_assert_eq!(points.len(), d * d + d + 1);
    Ok(Stencil {
        center: center.clone(),
        h,
        points,
    })
}

/// One row of the vanishing-power-function sweep.
#[derive(Debug, Clone)]
pub struct VpcRow {
    pub h: f64,
    pub pi_g: f64,
    pub pi_h: f64,
    pub failed: bool,
}

/// Sweep table: prior values plus one row per stencil spacing.
#[derive(Debug, Clone)]
pub struct VpcTable {
    pub prior_g: f64,
    pub prior_h: f64,
    pub rows: Vec<VpcRow>,
}

impl VpcTable {
    /// CSV rendering with the prior as the first row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,pi_g,pi_h,status\n");
        out.push_str(&format!("prior,{},{},ok\n", self.prior_g, self.prior_h));
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.h,
                row.pi_g,
                row.pi_h,
                if row.failed { "failed" } else { "ok" }
            ));
        }
        out
    }
}

/// Condition an empty-prior GP on the symmetric stencil for each spacing in
/// `h_sweep` and report both power functions at the center. Noise is
/// jitter-only (1e-10).
pub fn vpc_check(params: &KernelParams, d: usize, h_sweep: &[f64]) -> Result<VpcTable> {
    if params.dim() != d {
        return Err(Error::argument("vpc_check: kernel dimension mismatch"));
    }
    let noiseless = params.with_noise_variance(0.0)?;
    let prior_g = kernel::prior_grad_power(&noiseless);
    let prior_h = kernel::prior_hess_power(&noiseless);
    let center = DVector::zeros(d);
    let mut rows = Vec::with_capacity(h_sweep.len());
    for &h in h_sweep {
        let stencil = make_stencil(&center, h, d)?;
        let mut data = Dataset::empty(d);
        for p in &stencil.points {
            data.push(p.clone(), 0.0)?; // targets irrelevant to power functions
        }
        let gp = GpState::with_options(
            data,
            noiseless.clone(),
            GpOptions {
                jitter: Some(1e-10),
                standardize: false,
            },
        );
        match gp.and_then(|gp| gp.fantasy_power(center.as_slice(), &[])) {
            Ok((pi_g, pi_h)) => rows.push(VpcRow {
                h,
                pi_g,
                pi_h,
                failed: false,
            }),
            Err(_) => rows.push(VpcRow {
                h,
                pi_g: f64::NAN,
                pi_h: f64::NAN,
                failed: true,
            }),
        }
    }
    Ok(VpcTable {
        prior_g,
        prior_h,
        rows,
    })
}

/// Outcome of a Newton-step-error measurement.
#[derive(Debug, Clone, Copy)]
pub enum NewtonError {
    Value(f64),
    /// True or estimated Hessian singular at this point; the protocol skips
    /// such test locations.
    Skip,
}

fn solve_if_regular(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    if g.norm() == 0.0 {
        return Some(DVector::zeros(g.len()));
    }
    match crate::linalg::solve_symmetric(h, g) {
        Ok(v) => Some(v),
        Err(Error::SingularHessian { .. }) => None,
        Err(_) => None,
    }
}

/// ‖H(x)⁻¹g(x) − Ĥ_D(x)⁻¹ĝ_D(x)‖ with analytic ground truth. A zero
/// estimated gradient forces a zero estimated step (the caller's
/// convergence convention), so an empty-data GP yields ‖d(x)‖.
pub fn newton_error(
    true_grad: &DVector<f64>,
    true_hess: &DMatrix<f64>,
    gp: &GpState,
    x: &[f64],
) -> Result<NewtonError> {
    let d_true = match solve_if_regular(true_hess, true_grad) {
        Some(v) => v,
        None => return Ok(NewtonError::Skip),
    };
    let belief = gp.grad_belief(x)?;
    let d_est = if belief.mean_grad.norm() < 1e-300 {
        DVector::zeros(x.len())
    } else {
        match solve_if_regular(&belief.mean_hess, &belief.mean_grad) {
            Some(v) => v,
            None => return Ok(NewtonError::Skip),
        }
    };
    Ok(NewtonError::Value((d_true - d_est).norm()))
}

/// Brute-force Hessian power function: assembles the full d²×d² posterior
/// covariance of vec(H) entry by entry and returns its trace. Refuses d > 4.
///
/// Independent of the fast trace-accumulation route: the prior block uses the
/// general fourth-derivative pairing formula, the data reduction inverts the
/// kernel matrix explicitly, and the trace is taken over the materialized
/// matrix.
pub fn brute_force_pi_h(gp: &GpState, x: &[f64]) -> Result<f64> {
    let d = gp.dim();
    if d > 4 {
        return Err(Error::argument(format!(
            "brute_force_pi_h is limited to d <= 4, got {d}"
        )));
    }
    if x.len() != d {
        return Err(Error::argument("brute_force_pi_h: dimension mismatch"));
    }
    let params = gp.params();
    let n = gp.data().len();

    // explicit K⁻¹ (LU path, distinct from the Cholesky solves)
    let kinv = if n > 0 {
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                gram[(a, b)] = kernel::k_unchecked(
                    params,
                    gp.data().inputs()[a].as_slice(),
                    gp.data().inputs()[b].as_slice(),
                );
            }
            gram[(a, a)] += params.noise_variance() + gp.jitter();
        }
        Some(gram.lu().try_inverse().ok_or_else(|| {
            Error::numerical("brute_force_pi_h: kernel matrix not invertible")
        })?)
    } else {
        None
    };

    // u_ab[n] = ∂²k(X_n, x)/∂x'_a∂x'_b, one vector per (a, b) pair
    let mut u = vec![DVector::<f64>::zeros(n); d * d];
    for a in 0..d {
        for b in 0..d {
            for (row, xn) in gp.data().inputs().iter().enumerate() {
                u[a * d + b][row] = kernel::d2k_dx_dx_unchecked(params, x, xn.as_slice(), a, b);
            }
        }
    }

    let lsq = |i: usize| params.inv_sq(i);
    let lam = |i: usize, j: usize| if i == j { lsq(i) } else { 0.0 };

    let mut trace = 0.0;
    for i in 0..d {
        for j in 0..d {
            // diagonal entry ((i,j),(i,j)) of the d²×d² covariance
            let prior = params.signal_variance()
                * (lam(i, j) * lam(i, j) + lam(i, i) * lam(j, j) + lam(i, j) * lam(j, i));
            let reduction = match &kinv {
                Some(kinv) => {
                    let ui = &u[i * d + j];
                    (ui.transpose() * kinv * ui)[(0, 0)]
                }
                None => 0.0,
            };
            trace += prior - reduction;
        }
    }
    let s2 = {
        // match the read-out scaling of the fast path
        let scale = gp_target_scale(gp);
        scale * scale
    };
    Ok(s2 * trace)
}

fn gp_target_scale(gp: &GpState) -> f64 {
    gp.target_scale()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng, d: usize) -> KernelParams {
        let ls: Vec<f64> = (0..d).map(|_| 0.3 + rng.random::<f64>()).collect();
        KernelParams::new(0.5 + 2.0 * rng.random::<f64>(), ls, 0.0).unwrap()
    }

    #[test]
    fn stencil_cardinality() {
        for d in 1..=8 {
            let s = make_stencil(&DVector::zeros(d), 0.1, d).unwrap();
            assert_eq!(s.points.len(), d * d + d + 1);
        }
        let s2 = make_stencil(&DVector::zeros(2), 0.1, 2).unwrap();
        assert_eq!(s2.points.len(), 7);
        let s3 = make_stencil(&DVector::zeros(3), 0.1, 3).unwrap();
        assert_eq!(s3.points.len(), 13);
    }

    #[test]
    fn stencil_mirror_symmetry() {
        let center = DVector::from_row_slice(&[0.4, -0.7, 1.1]);
        let s = make_stencil(&center, 0.25, 3).unwrap();
        for p in &s.points {
            let mirror = &center * 2.0 - p;
            assert!(
                s.points.iter().any(|q| (q - &mirror).norm() < 1e-14),
                "mirror of {p:?} missing"
            );
        }
    }

    #[test]
    fn kernel_first_derivative_fd_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        for _ in 0..100 {
            let params = random_params(&mut rng, 3);
            let x: Vec<f64> = (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let xp: Vec<f64> = (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            for i in 0..3 {
                let a = kernel::dk_dx(&params, &x, &xp, i).unwrap();
                let f = fd_dk_dx(&params, &x, &xp, i).unwrap();
                let rel = (a - f).abs() / f.abs().max(1e-10);
                assert!(rel < 1e-5, "rel err {rel:.2e}");
            }
        }
    }

    #[test]
    fn kernel_mixed_second_fd_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        for _ in 0..100 {
            let params = random_params(&mut rng, 3);
            let x: Vec<f64> = (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let xp: Vec<f64> = (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            for i in 0..3 {
                for j in 0..3 {
                    let a = kernel::d2k_dx_dxp(&params, &x, &xp, i, j).unwrap();
                    let f = fd_d2k_dx_dxp(&params, &x, &xp, i, j).unwrap();
                    let rel = (a - f).abs() / f.abs().max(1e-8);
                    assert!(rel < 1e-5, "rel err {rel:.2e}");
                }
            }
        }
    }

    #[test]
    fn kernel_same_arg_second_fd_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        for _ in 0..100 {
            let params = random_params(&mut rng, 3);
            let x: Vec<f64> = (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let xp: Vec<f64> = (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            for i in 0..3 {
                for j in 0..3 {
                    let a = kernel::d2k_dx_dx(&params, &x, &xp, i, j).unwrap();
                    let f = fd_d2k_dx_dx(&params, &x, &xp, i, j).unwrap();
                    let rel = (a - f).abs() / f.abs().max(1e-7);
                    assert!(rel < 1e-4, "rel err {rel:.2e}");
                }
            }
        }
    }

    #[test]
    fn kernel_fourth_fd_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(84);
        for _ in 0..100 {
            let params = random_params(&mut rng, 3);
            let x: Vec<f64> = (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let xp: Vec<f64> = (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            for i in 0..3 {
                for j in 0..3 {
                    let a = kernel::d4k(&params, &x, &xp, i, j).unwrap();
                    let f = fd_d4k(&params, &x, &xp, i, j).unwrap();
                    // near the polynomial's zero crossings the FD truncation
                    // dominates the tiny local value, so the tolerance gets a
                    // small floor at the entry's coincidence magnitude
                    let scale =
                        params.signal_variance() * params.inv_sq(i) * params.inv_sq(j);
                    let tol = 1e-3 * f.abs() + 1e-6 * scale;
                    assert!((a - f).abs() < tol, "err {:.2e} tol {tol:.2e}", (a - f).abs());
                }
            }
        }
    }

    #[test]
    fn vpc_prior_row_and_monotone_sweep() {
        let params = KernelParams::isotropic(1.0, 1.0, 0.0, 2).unwrap();
        let table = vpc_check(&params, 2, &[0.5, 0.2, 0.1]).unwrap();
        assert_eq!(table.prior_g, 2.0);
        assert_eq!(table.prior_h, 8.0);
        for row in &table.rows {
            assert!(!row.failed, "row h={} failed", row.h);
        }
        for w in table.rows.windows(2) {
            assert!(
                w[1].pi_g < w[0].pi_g && w[1].pi_h < w[0].pi_h,
                "sweep not strictly decreasing"
            );
        }
        // both strictly below the prior already at the coarsest spacing
        assert!(table.rows[0].pi_g < table.prior_g);
        assert!(table.rows[0].pi_h < table.prior_h);
    }

    #[test]
    fn vpc_replication_beats_single_copy_under_noise() {
        // with observation noise, m replicates per location average like a
        // single pseudo-observation with noise σ²/m
        let d = 2;
        let params = KernelParams::isotropic(1.0, 1.0, 0.01, d).unwrap();
        let center = DVector::zeros(d);
        let stencil = make_stencil(&center, 0.3, d).unwrap();

        let single = {
            let mut data = Dataset::empty(d);
            for p in &stencil.points {
                data.push(p.clone(), 0.0).unwrap();
            }
            let gp = GpState::new(data, params.clone()).unwrap();
            gp.fantasy_power(center.as_slice(), &[]).unwrap()
        };
        let replicated = {
            let mut data = Dataset::empty(d);
            for p in &stencil.points {
                data.push(p.clone(), 0.0).unwrap();
                data.push(p.clone(), 0.0).unwrap();
            }
            let gp = GpState::new(data, params).unwrap();
            gp.fantasy_power(center.as_slice(), &[]).unwrap()
        };
        assert!(
            replicated.0 < single.0,
            "pi_g replicated {} vs single {}",
            replicated.0,
            single.0
        );
    }

    #[test]
    fn brute_force_matches_fast_pi_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(85);
        for _ in 0..50 {
            let d = 1 + (rng.random::<u32>() % 3) as usize;
            let n = (rng.random::<u32>() % 11) as usize;
            let params = random_params(&mut rng, d).with_noise_variance(1e-4).unwrap();
            let mut data = Dataset::empty(d);
            for _ in 0..n {
                data.push(
                    DVector::from_fn(d, |_, _| 2.0 * rng.random::<f64>() - 1.0),
                    rng.random::<f64>(),
                )
                .unwrap();
            }
            let gp = GpState::new(data, params).unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let fast = gp.grad_belief(&x).unwrap().pi_h;
            let brute = brute_force_pi_h(&gp, &x).unwrap();
            let rel = (fast - brute).abs() / brute.abs().max(1e-12);
            assert!(rel < 1e-8, "d={d} n={n}: fast {fast} vs brute {brute}");
        }
    }

    #[test]
    fn brute_force_prior_and_guard() {
        let params = KernelParams::isotropic(1.0, 1.0, 0.0, 2).unwrap();
        let gp = GpState::new(Dataset::empty(2), params).unwrap();
        let v = brute_force_pi_h(&gp, &[0.0, 0.0]).unwrap();
        assert!((v - 8.0).abs() < 1e-12);

        let params5 = KernelParams::isotropic(1.0, 1.0, 0.0, 5).unwrap();
        let gp5 = GpState::new(Dataset::empty(5), params5).unwrap();
        assert!(brute_force_pi_h(&gp5, &[0.0; 5]).is_err());
    }

    #[test]
    fn brute_force_never_exceeds_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(86);
        for _ in 0..20 {
            let d = 2;
            let params = random_params(&mut rng, d).with_noise_variance(1e-3).unwrap();
            let prior = kernel::prior_hess_power(&params);
            let mut data = Dataset::empty(d);
            for _ in 0..5 {
                data.push(
                    DVector::from_fn(d, |_, _| rng.random::<f64>()),
                    rng.random::<f64>(),
                )
                .unwrap();
            }
            let gp = GpState::new(data, params).unwrap();
            let v = brute_force_pi_h(&gp, &[0.3, 0.4]).unwrap();
            assert!(v <= prior + 1e-10);
        }
    }

    #[test]
    fn newton_error_identical_truth_is_zero() {
        let g = DVector::from_row_slice(&[1.0, 2.0]);
        let h = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 5.0]);
        // estimate == truth when the gp reproduces the same belief; emulate
        // by comparing the truth against itself through the formula
        let d_true = crate::linalg::solve_symmetric(&h, &g).unwrap();
        assert!(d_true.norm() > 0.0);
        let err = (&d_true - &d_true).norm();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn newton_error_empty_gp_is_true_step_norm() {
        let params = KernelParams::isotropic(1.0, 1.0, 0.0, 2).unwrap();
        let gp = GpState::new(Dataset::empty(2), params).unwrap();
        let g = DVector::from_row_slice(&[2.0, -1.0]);
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let d_true = crate::linalg::solve_symmetric(&h, &g).unwrap();
        match newton_error(&g, &h, &gp, &[0.2, 0.2]).unwrap() {
            NewtonError::Value(e) => assert!((e - d_true.norm()).abs() < 1e-12),
            NewtonError::Skip => panic!("unexpected skip"),
        }
    }

    #[test]
    fn newton_error_skips_singular_truth() {
        let params = KernelParams::isotropic(1.0, 1.0, 0.0, 2).unwrap();
        let gp = GpState::new(Dataset::empty(2), params).unwrap();
        let g = DVector::from_row_slice(&[1.0, 1.0]);
        let h = DMatrix::zeros(2, 2);
        assert!(matches!(
            newton_error(&g, &h, &gp, &[0.0, 0.0]).unwrap(),
            NewtonError::Skip
        ));
    }

    #[test]
    fn csv_rendering_includes_prior() {
        let params = KernelParams::isotropic(1.0, 1.0, 0.0, 2).unwrap();
        let table = vpc_check(&params, 2, &[0.5]).unwrap();
        let csv = table.to_csv();
        assert!(csv.starts_with("h,pi_g,pi_h,status\nprior,2,8,ok\n"));
    }
}
