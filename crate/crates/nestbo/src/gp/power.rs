//! Power-function assembly and the incremental probe used by greedy batch
//! selection.
//!
//! The d²×d² Hessian covariance is never materialized. Its trace needs only
//! the quadratic forms u_ijᵀ K⁻¹ u_ij for i ≤ j (off-diagonal pairs counted
//! twice), which share one triangular solve with the gradient terms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{self, KernelParams};
use crate::linalg::CholFactor;

use super::{clamp_nonneg, GpState};

/// Column order of the cross-derivative matrix: (i, j, multiplicity) for the
/// upper-triangular Hessian pairs, after the `d` gradient columns.
pub(crate) fn hess_pairs(d: usize) -> Vec<(usize, usize, f64)> {
    let mut pairs = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            pairs.push((i, j, if i == j { 1.0 } else { 2.0 }));
        }
    }
    pairs
}

/// N×p matrix whose n-th row holds ∂k(x, X_n)/∂x_i for i < d followed by
/// ∂²k(x, X_n)/∂x_i∂x_j for the pairs of [`hess_pairs`]. These equal the
/// adjoint derivatives in the second kernel argument by stationarity, so one
/// matrix serves mean and covariance computations.
pub(crate) fn cross_deriv_matrix(
    params: &KernelParams,
    points: &[DVector<f64>],
    x: &[f64],
) -> DMatrix<f64> {
    let d = params.dim();
    let pairs = hess_pairs(d);
    let p = d + pairs.len();
    let mut q = DMatrix::<f64>::zeros(points.len(), p);
    for (n, pt) in points.iter().enumerate() {
        let xn = pt.as_slice();
        for i in 0..d {
            q[(n, i)] = kernel::dk_dx_unchecked(params, x, xn, i);
        }
        for (col, &(i, j, _)) in pairs.iter().enumerate() {
            q[(n, d + col)] = kernel::d2k_dx_dx_unchecked(params, x, xn, i, j);
        }
    }
    q
}

/// π^g and π^H from the solved block W = L⁻¹Q: prior traces minus the summed
/// squared columns.
pub(crate) fn powers_from_solved(params: &KernelParams, w: &DMatrix<f64>) -> Result<(f64, f64)> {
    let d = params.dim();
    let prior_g = kernel::prior_grad_power(params);
    let prior_h = kernel::prior_hess_power(params);
    let mut red_g = 0.0;
    for i in 0..d {
        red_g += w.column(i).norm_squared();
    }
    let mut red_h = 0.0;
    for (col, &(_, _, mult)) in hess_pairs(d).iter().enumerate() {
        red_h += mult * w.column(d + col).norm_squared();
    }
    let pi_g = clamp_nonneg(prior_g - red_g, 1e-10 * prior_g.max(1.0), "pi_g")?;
    let pi_h = clamp_nonneg(prior_h - red_h, 1e-10 * prior_h.max(1.0), "pi_h")?;
    Ok((pi_g, pi_h))
}

/// Incremental power-function evaluator at a fixed query point.
///
/// Holds the factorization over the dataset plus accepted pending points and
/// answers "what would π^g, π^H at x become if z were appended" with one
/// triangular solve, instead of refactorizing per candidate.
pub struct PowerProbe<'a> {
    gp: &'a GpState,
    x: Vec<f64>,
    points: Vec<DVector<f64>>,
    chol: CholFactor,
    w: DMatrix<f64>,
    quad: Vec<f64>,
    prior_g: f64,
    prior_h: f64,
}

impl<'a> PowerProbe<'a> {
    pub fn new(gp: &'a GpState, x: &[f64]) -> Result<Self> {
        if x.len() != gp.dim() {
            return Err(Error::argument(format!(
                "probe: query dimension {} does not match {}",
                x.len(),
                gp.dim()
            )));
        }
        let points: Vec<DVector<f64>> = gp.data().inputs().to_vec();
        let chol = gp.chol().clone();
        let q = cross_deriv_matrix(gp.params(), &points, x);
        let w = chol.solve_lower_mat(&q);
        let quad = (0..w.ncols()).map(|c| w.column(c).norm_squared()).collect();
        Ok(PowerProbe {
            gp,
            x: x.to_vec(),
            points,
            chol,
            w,
            quad,
            prior_g: kernel::prior_grad_power(gp.params()),
            prior_h: kernel::prior_hess_power(gp.params()),
        })
    }

    fn powers_from_quad(&self, quad: &[f64]) -> Result<(f64, f64)> {
        let d = self.gp.dim();
        let red_g: f64 = quad[..d].iter().sum();
        let mut red_h = 0.0;
        for (col, &(_, _, mult)) in hess_pairs(d).iter().enumerate() {
            red_h += mult * quad[d + col];
        }
        let pi_g = clamp_nonneg(self.prior_g - red_g, 1e-10 * self.prior_g.max(1.0), "pi_g")?;
        let pi_h = clamp_nonneg(self.prior_h - red_h, 1e-10 * self.prior_h.max(1.0), "pi_h")?;
        let s2 = self.gp.target_scale() * self.gp.target_scale();
        Ok((s2 * pi_g, s2 * pi_h))
    }

    /// Power functions for the current point set (dataset plus accepted
    /// pending points).
    pub fn current(&self) -> Result<(f64, f64)> {
        self.powers_from_quad(&self.quad)
    }

    /// Bordered-factor row for a new point: m = L⁻¹ k(points, z) and the
    /// pivot λ from the Schur complement.
    fn border(&self, z: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let params = self.gp.params();
        let n = self.points.len();
        let kv = DVector::from_iterator(
            n,
            self.points
                .iter()
                .map(|p| kernel::k_unchecked(params, p.as_slice(), z.as_slice())),
        );
        let m = self.chol.solve_lower(&kv);
        let corner =
            params.signal_variance() + params.noise_variance() + self.gp.jitter();
        let pivot2 = corner - m.norm_squared();
        if !(pivot2 > 0.0) || !pivot2.is_finite() {
            return Err(Error::numerical(format!(
                "probe: non-positive Schur pivot {pivot2:.3e} while appending a point"
            )));
        }
        Ok((m, pivot2.sqrt()))
    }

    fn correction_row(&self, z: &DVector<f64>, m: &DVector<f64>, pivot: f64) -> Vec<f64> {
        let params = self.gp.params();
        let d = params.dim();
        let pairs = hess_pairs(d);
        let xn = z.as_slice();
        let mut row = Vec::with_capacity(d + pairs.len());
        for i in 0..d {
            row.push(kernel::dk_dx_unchecked(params, &self.x, xn, i));
        }
        for &(i, j, _) in &pairs {
            row.push(kernel::d2k_dx_dx_unchecked(params, &self.x, xn, i, j));
        }
        let n = self.points.len();
        let w_data = self.w.as_slice(); // column-major, columns contiguous
        let m_data = m.as_slice();
        for (col, entry) in row.iter_mut().enumerate() {
            let w_col = &w_data[col * n..(col + 1) * n];
            let proj: f64 = m_data.iter().zip(w_col).map(|(a, b)| a * b).sum();
            *entry = (*entry - proj) / pivot;
        }
        row
    }

    /// π^g and π^H at the query point if `z` were appended to the pending set.
    pub fn value_with(&self, z: &DVector<f64>) -> Result<(f64, f64)> {
        let (m, pivot) = self.border(z)?;
        let row = self.correction_row(z, &m, pivot);
        let quad: Vec<f64> = self
            .quad
            .iter()
            .zip(&row)
            .map(|(q, c)| q + c * c)
            .collect();
        self.powers_from_quad(&quad)
    }

    /// Append `z` to the pending set, extending the factorization in place.
    pub fn push(&mut self, z: DVector<f64>) -> Result<()> {
        let (m, pivot) = self.border(&z)?;
        let row = self.correction_row(&z, &m, pivot);
        let n = self.points.len();
        let mut l = DMatrix::<f64>::zeros(n + 1, n + 1);
        l.view_mut((0, 0), (n, n)).copy_from(self.chol.lower());
        for k in 0..n {
            l[(n, k)] = m[k];
        }
        l[(n, n)] = pivot;
        self.chol = CholFactor::from_lower(l);
        let mut w = DMatrix::<f64>::zeros(n + 1, self.w.ncols());
        w.view_mut((0, 0), (n, self.w.ncols())).copy_from(&self.w);
        for (col, c) in row.iter().enumerate() {
            w[(n, col)] = *c;
            self.quad[col] += c * c;
        }
        self.w = w;
        self.points.push(z);
        Ok(())
    }

    pub fn pending_len(&self) -> usize {
        self.points.len() - self.gp.data().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Dataset;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn probe_matches_block_fantasy() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let d = 1 + (rng.random::<u32>() % 3) as usize;
            let n = (rng.random::<u32>() % 6) as usize;
            let params =
                KernelParams::isotropic(0.8 + rng.random::<f64>(), 0.5 + rng.random::<f64>(), 1e-4, d)
                    .unwrap();
            let mut data = Dataset::empty(d);
            for _ in 0..n {
                data.push(
                    DVector::from_fn(d, |_, _| rng.random::<f64>()),
                    rng.random::<f64>(),
                )
                .unwrap();
            }
            let gp = GpState::new(data, params).unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let z1 = DVector::from_fn(d, |_, _| rng.random::<f64>());
            let z2 = DVector::from_fn(d, |_, _| rng.random::<f64>());

            let mut probe = PowerProbe::new(&gp, &x).unwrap();
            let (pg_a, ph_a) = probe.value_with(&z1).unwrap();
            let (pg_b, ph_b) = gp.fantasy_power(&x, std::slice::from_ref(&z1)).unwrap();
            assert!((pg_a - pg_b).abs() < 1e-9, "{pg_a} vs {pg_b}");
            assert!((ph_a - ph_b).abs() < 1e-9, "{ph_a} vs {ph_b}");

            probe.push(z1.clone()).unwrap();
            let (pg_c, ph_c) = probe.value_with(&z2).unwrap();
            let (pg_d, ph_d) = gp.fantasy_power(&x, &[z1, z2]).unwrap();
            assert!((pg_c - pg_d).abs() < 1e-9);
            assert!((ph_c - ph_d).abs() < 1e-9);
        }
    }
}
