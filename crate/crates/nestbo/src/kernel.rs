//! Squared-exponential ARD kernel and its derivatives up to fourth order.
//!
//! All closed forms are written in terms of `L_ii = 1/ℓ_i²` and `r = x − x'`.
//! Derivatives are never computed by automatic differentiation, so the
//! finite-difference checks in the test suite are meaningful.

use crate::error::{Error, Result};

/// Hyperparameters of the SE-ARD kernel.
///
/// Immutable after construction; the inverse squared lengthscales are
/// precomputed since every derivative formula consumes them.
#[derive(Debug, Clone)]
pub struct KernelParams {
    signal_variance: f64,
    lengthscales: Vec<f64>,
    noise_variance: f64,
    inv_sq: Vec<f64>,
}

impl KernelParams {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if !(signal_variance > 0.0) || !signal_variance.is_finite() {
            return Err(Error::argument(format!(
                "signal variance must be positive, got {signal_variance}"
            )));
        }
        if lengthscales.is_empty() {
            return Err(Error::argument("lengthscale vector must be non-empty"));
        }
        for (i, &l) in lengthscales.iter().enumerate() {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::argument(format!(
                    "lengthscale[{i}] must be positive, got {l}"
                )));
            }
        }
        if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
            return Err(Error::argument(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        let inv_sq = lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        Ok(KernelParams {
            signal_variance,
            lengthscales,
            noise_variance,
            inv_sq,
        })
    }

    /// Isotropic shorthand: one lengthscale replicated over `dim` dimensions.
    pub fn isotropic(signal_variance: f64, lengthscale: f64, noise_variance: f64, dim: usize) -> Result<Self> {
        KernelParams::new(signal_variance, vec![lengthscale; dim], noise_variance)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        KernelParams::new(self.signal_variance, self.lengthscales.clone(), noise_variance)
    }

    /// Inverse squared lengthscale `L_ii = ℓ_i⁻²`.
    #[inline]
    pub fn inv_sq(&self, i: usize) -> f64 {
        self.inv_sq[i]
    }

    fn check_points(&self, x: &[f64], xp: &[f64]) -> Result<()> {
        let d = self.dim();
        if x.len() != d || xp.len() != d {
            return Err(Error::argument(format!(
                "point dimensions {} and {} do not match kernel dimension {}",
                x.len(),
                xp.len(),
                d
            )));
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.dim() {
            return Err(Error::argument(format!(
                "dimension index {i} out of range for d={}",
                self.dim()
            )));
        }
        Ok(())
    }
}

#[inline]
fn coincident(x: &[f64], xp: &[f64]) -> bool {
    std::ptr::eq(x, xp) || x == xp
}

/// k(x, x') = σ_f² exp(−½ Σ_i (x_i − x'_i)² / ℓ_i²).
pub fn k(params: &KernelParams, x: &[f64], xp: &[f64]) -> Result<f64> {
    params.check_points(x, xp)?;
    Ok(k_unchecked(params, x, xp))
}

#[inline]
pub(crate) fn k_unchecked(params: &KernelParams, x: &[f64], xp: &[f64]) -> f64 {
    if coincident(x, xp) {
        return params.signal_variance;
    }
    let mut q = 0.0;
    for ((&a, &b), &inv) in x.iter().zip(xp).zip(&params.inv_sq) {
        let r = a - b;
        q += inv * r * r;
    }
    params.signal_variance * (-0.5 * q).exp()
}

/// ∂k/∂x_i = −L_ii r_i k.
pub fn dk_dx(params: &KernelParams, x: &[f64], xp: &[f64], i: usize) -> Result<f64> {
    params.check_points(x, xp)?;
    params.check_index(i)?;
    Ok(dk_dx_unchecked(params, x, xp, i))
}

#[inline]
pub(crate) fn dk_dx_unchecked(params: &KernelParams, x: &[f64], xp: &[f64], i: usize) -> f64 {
    if coincident(x, xp) {
        return 0.0;
    }
    -params.inv_sq(i) * (x[i] - xp[i]) * k_unchecked(params, x, xp)
}

/// ∂²k/∂x_i ∂x'_j = (L_ii δ_ij − L_ii L_jj r_i r_j) k; coincidence value L_ii δ_ij σ_f².
pub fn d2k_dx_dxp(params: &KernelParams, x: &[f64], xp: &[f64], i: usize, j: usize) -> Result<f64> {
    params.check_points(x, xp)?;
    params.check_index(i)?;
    params.check_index(j)?;
    Ok(d2k_dx_dxp_unchecked(params, x, xp, i, j))
}

#[inline]
pub(crate) fn d2k_dx_dxp_unchecked(
    params: &KernelParams,
    x: &[f64],
    xp: &[f64],
    i: usize,
    j: usize,
) -> f64 {
    let lii = params.inv_sq(i);
    if coincident(x, xp) {
        return if i == j { lii * params.signal_variance } else { 0.0 };
    }
    let ljj = params.inv_sq(j);
    let ri = x[i] - xp[i];
    let rj = x[j] - xp[j];
    let delta = if i == j { lii } else { 0.0 };
    (delta - lii * ljj * ri * rj) * k_unchecked(params, x, xp)
}

/// ∂²k/∂x_i ∂x_j = (−L_ii δ_ij + L_ii L_jj r_i r_j) k; coincidence value −L_ii δ_ij σ_f².
///
/// The same closed form gives ∂²k/∂x'_i ∂x'_j since r_i r_j is even in r.
pub fn d2k_dx_dx(params: &KernelParams, x: &[f64], xp: &[f64], i: usize, j: usize) -> Result<f64> {
    params.check_points(x, xp)?;
    params.check_index(i)?;
    params.check_index(j)?;
    Ok(d2k_dx_dx_unchecked(params, x, xp, i, j))
}

#[inline]
pub(crate) fn d2k_dx_dx_unchecked(
    params: &KernelParams,
    x: &[f64],
    xp: &[f64],
    i: usize,
    j: usize,
) -> f64 {
    let lii = params.inv_sq(i);
    if coincident(x, xp) {
        return if i == j { -lii * params.signal_variance } else { 0.0 };
    }
    let ljj = params.inv_sq(j);
    let ri = x[i] - xp[i];
    let rj = x[j] - xp[j];
    let delta = if i == j { lii } else { 0.0 };
    (-delta + lii * ljj * ri * rj) * k_unchecked(params, x, xp)
}

/// ∂⁴k/∂x_i ∂x_j ∂x'_i ∂x'_j.
///
/// For i = j: L_ii² (L_ii² r_i⁴ − 6 L_ii r_i² + 3) k, coincidence 3 L_ii² σ_f².
/// For i ≠ j: L_ii L_jj (L_ii L_jj r_i² r_j² − L_ii r_i² − L_jj r_j² + 1) k,
/// coincidence L_ii L_jj σ_f².
pub fn d4k(params: &KernelParams, x: &[f64], xp: &[f64], i: usize, j: usize) -> Result<f64> {
    params.check_points(x, xp)?;
    params.check_index(i)?;
    params.check_index(j)?;
    Ok(d4k_unchecked(params, x, xp, i, j))
}

#[inline]
pub(crate) fn d4k_unchecked(
    params: &KernelParams,
    x: &[f64],
    xp: &[f64],
    i: usize,
    j: usize,
) -> f64 {
    let lii = params.inv_sq(i);
    let ljj = params.inv_sq(j);
    if coincident(x, xp) {
        return if i == j {
            3.0 * lii * lii * params.signal_variance
        } else {
            lii * ljj * params.signal_variance
        };
    }
    let kv = k_unchecked(params, x, xp);
    if i == j {
        let r2 = (x[i] - xp[i]) * (x[i] - xp[i]);
        lii * lii * (lii * lii * r2 * r2 - 6.0 * lii * r2 + 3.0) * kv
    } else {
        let ri2 = (x[i] - xp[i]) * (x[i] - xp[i]);
        let rj2 = (x[j] - xp[j]) * (x[j] - xp[j]);
        lii * ljj * (lii * ljj * ri2 * rj2 - lii * ri2 - ljj * rj2 + 1.0) * kv
    }
}

/// Prior (no-data) gradient power function Σ_i L_ii σ_f².
pub fn prior_grad_power(params: &KernelParams) -> f64 {
    (0..params.dim()).map(|i| params.inv_sq(i)).sum::<f64>() * params.signal_variance
}

/// Prior (no-data) Hessian power function
/// Σ_i 3 L_ii² σ_f² + Σ_{i≠j} L_ii L_jj σ_f².
pub fn prior_hess_power(params: &KernelParams) -> f64 {
    let d = params.dim();
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            let lii = params.inv_sq(i);
            let ljj = params.inv_sq(j);
            total += if i == j { 3.0 * lii * lii } else { lii * ljj };
        }
    }
    total * params.signal_variance
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, d: usize) -> (KernelParams, Vec<f64>, Vec<f64>) {
        let ls: Vec<f64> = (0..d).map(|_| 0.3 + rng.random::<f64>()).collect();
        let params = KernelParams::new(0.5 + 2.0 * rng.random::<f64>(), ls, 0.0).unwrap();
        let x: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let xp: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        (params, x, xp)
    }

    #[test]
    fn value_at_coincidence_is_signal_variance() {
        let p = KernelParams::isotropic(1.0, 0.7, 0.0, 3).unwrap();
        let x = vec![0.3, -0.2, 1.5];
        assert_eq!(k(&p, &x, &x).unwrap(), 1.0);
    }

    #[test]
    fn value_1d_halfstep() {
        let p = KernelParams::isotropic(1.0, 1.0, 0.0, 1).unwrap();
        let v = k(&p, &[1.0], &[0.0]).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn value_2d_pinned() {
        // d=2, ℓ=(1,2), σ_f²=2, x=(1,2), xp=(0,0): exponent = −½(1 + 4/4) = −1.
        let p = KernelParams::new(2.0, vec![1.0, 2.0], 0.0).unwrap();
        let v = k(&p, &[1.0, 2.0], &[0.0, 0.0]).unwrap();
        let expected = 2.0 * (-1.0f64).exp(); // 0.7357588823428847
        assert!((v - expected).abs() < 1e-15, "{v} vs {expected}");
        assert!((v - 0.735_758_882_342_884_7).abs() < 1e-15);
    }

    #[test]
    fn value_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (p, x, xp) = random_instance(&mut rng, 3);
            let a = k(&p, &x, &xp).unwrap();
            let b = k(&p, &xp, &x).unwrap();
            assert_eq!(a, b);
            assert!(a > 0.0 && a <= p.signal_variance());
        }
    }

    #[test]
    fn dk_antisymmetric_and_zero_at_coincidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (p, x, xp) = random_instance(&mut rng, 3);
        for i in 0..3 {
            let a = dk_dx(&p, &x, &xp, i).unwrap();
            let b = dk_dx(&p, &xp, &x, i).unwrap();
            assert!((a + b).abs() < 1e-15);
            assert_eq!(dk_dx(&p, &x, &x, i).unwrap(), 0.0);
        }
    }

    #[test]
    fn dk_1d_pinned() {
        let p = KernelParams::isotropic(1.0, 1.0, 0.0, 1).unwrap();
        let v = dk_dx(&p, &[1.0], &[0.0], 0).unwrap();
        assert!((v + (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn coincidence_second_and_fourth_order() {
        let p = KernelParams::new(1.0, vec![1.0, 2.0], 0.0).unwrap();
        let x = vec![0.4, -0.7];
        assert_eq!(d2k_dx_dxp(&p, &x, &x, 0, 0).unwrap(), 1.0);
        assert_eq!(d2k_dx_dxp(&p, &x, &x, 0, 1).unwrap(), 0.0);
        assert_eq!(d2k_dx_dx(&p, &x, &x, 0, 0).unwrap(), -1.0);
        assert_eq!(d2k_dx_dx(&p, &x, &x, 0, 1).unwrap(), 0.0);
        assert_eq!(d4k(&p, &x, &x, 0, 0).unwrap(), 3.0);
        // ℓ = (1, 2): L_00 L_11 = 1 · 1/4.
        assert_eq!(d4k(&p, &x, &x, 0, 1).unwrap(), 0.25);
    }

    #[test]
    fn symmetry_relations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (p, x, xp) = random_instance(&mut rng, 3);
            for i in 0..3 {
                for j in 0..3 {
                    let a = d2k_dx_dxp(&p, &x, &xp, i, j).unwrap();
                    let b = d2k_dx_dxp(&p, &xp, &x, j, i).unwrap();
                    assert!((a - b).abs() < 1e-14);
                    let c = d4k(&p, &x, &xp, i, j).unwrap();
                    let d = d4k(&p, &x, &xp, j, i).unwrap();
                    assert!((c - d).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn stationarity_under_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let (p, x, xp) = random_instance(&mut rng, 3);
            let c: Vec<f64> = (0..3).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
            let xs: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a + b).collect();
            let xps: Vec<f64> = xp.iter().zip(&c).map(|(a, b)| a + b).collect();
            assert!((k(&p, &x, &xp).unwrap() - k(&p, &xs, &xps).unwrap()).abs() < 1e-12);
            for i in 0..3 {
                assert!(
                    (dk_dx(&p, &x, &xp, i).unwrap() - dk_dx(&p, &xs, &xps, i).unwrap()).abs()
                        < 1e-12
                );
                for j in 0..3 {
                    assert!(
                        (d2k_dx_dx(&p, &x, &xp, i, j).unwrap()
                            - d2k_dx_dx(&p, &xs, &xps, i, j).unwrap())
                        .abs()
                            < 1e-12
                    );
                    assert!(
                        (d4k(&p, &x, &xp, i, j).unwrap() - d4k(&p, &xs, &xps, i, j).unwrap())
                            .abs()
                            < 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn dimension_and_index_errors() {
        let p = KernelParams::isotropic(1.0, 1.0, 0.0, 2).unwrap();
        assert!(k(&p, &[0.0], &[0.0, 0.0]).is_err());
        assert!(dk_dx(&p, &[0.0, 0.0], &[1.0, 1.0], 2).is_err());
        assert!(d4k(&p, &[0.0, 0.0], &[1.0, 1.0], 0, 5).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(KernelParams::new(0.0, vec![1.0], 0.0).is_err());
        assert!(KernelParams::new(1.0, vec![-1.0], 0.0).is_err());
        assert!(KernelParams::new(1.0, vec![1.0], -0.1).is_err());
        assert!(KernelParams::new(1.0, vec![], 0.0).is_err());
    }

    #[test]
    fn prior_powers_match_coincidence_sums() {
        let p = KernelParams::isotropic(1.0, 1.0, 0.0, 2).unwrap();
        assert_eq!(prior_grad_power(&p), 2.0);
        assert_eq!(prior_hess_power(&p), 8.0);
    }
}
