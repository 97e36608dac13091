//! Synthetic benchmark objectives, embedded sparse variants, and random
//! Fourier feature draws from an SE-GP prior.
//!
//! Each function also exposes analytic gradients and Hessians; those serve as
//! ground truth for the Newton-step-error studies.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the objective family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionId {
    Sphere,
    Rosenbrock,
    Griewank,
    Ackley,
    RffPrior,
}

impl FunctionId {
    /// Default per-dimension bounds as a function of the ambient dimension.
    pub fn default_bounds(self, d: usize) -> (f64, f64) {
        match self {
            FunctionId::Sphere => {
                let b = (d * d) as f64;
                (-b, b)
            }
            FunctionId::Rosenbrock => (-5.0, 5.0),
            FunctionId::Griewank => (-300.0, 300.0),
            FunctionId::Ackley => (-5.0, 5.0),
            FunctionId::RffPrior => (0.0, 1.0),
        }
    }
}

/// Random Fourier feature expansion of a draw from a unit-variance SE prior:
/// f(x) = Σ_i w_i √(2/n_b) cos(θ_iᵀ x + τ_i).
#[derive(Debug, Clone)]
pub struct RffFunction {
    weights: Vec<f64>,
    frequencies: DMatrix<f64>, // n_b × d
    phases: Vec<f64>,
    lengthscale: f64,
}

/// Draw an RFF function: w ~ N(0,1), τ ~ U(0, 2π), θ ~ N(0, ℓ⁻² I).
pub fn sample_rff<R: Rng>(d: usize, n_b: usize, lengthscale: f64, rng: &mut R) -> Result<RffFunction> {
    if n_b == 0 {
        return Err(Error::argument("rff: need at least one feature"));
    }
    if !(lengthscale > 0.0) {
        return Err(Error::argument("rff: lengthscale must be positive"));
    }
    let weights: Vec<f64> = (0..n_b).map(|_| StandardNormal.sample(rng)).collect();
    let frequencies = DMatrix::from_fn(n_b, d, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z / lengthscale
    });
    let phases: Vec<f64> = (0..n_b)
        .map(|_| rng.random::<f64>() * 2.0 * std::f64::consts::PI)
        .collect();
    Ok(RffFunction {
        weights,
        frequencies,
        phases,
        lengthscale,
    })
}

/// The lengthscale heuristic for prior draws: uniform over
/// [0.8, 1.2] · √d / 10.
pub fn rff_lengthscale<R: Rng>(d: usize, rng: &mut R) -> f64 {
    let heuristic = (d as f64).sqrt() / 10.0;
    (0.8 + 0.4 * rng.random::<f64>()) * heuristic
}

impl RffFunction {
    pub fn dim(&self) -> usize {
        self.frequencies.ncols()
    }

    pub fn num_features(&self) -> usize {
        self.weights.len()
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let scale = (2.0 / self.num_features() as f64).sqrt();
        let mut acc = 0.0;
        for i in 0..self.num_features() {
            let mut arg = self.phases[i];
            for j in 0..self.dim() {
                arg += self.frequencies[(i, j)] * x[j];
            }
            acc += self.weights[i] * arg.cos();
        }
        scale * acc
    }

    pub fn grad(&self, x: &[f64]) -> DVector<f64> {
        let d = self.dim();
        let scale = (2.0 / self.num_features() as f64).sqrt();
        let mut g = DVector::zeros(d);
        for i in 0..self.num_features() {
            let mut arg = self.phases[i];
            for j in 0..d {
                arg += self.frequencies[(i, j)] * x[j];
            }
            let coeff = -scale * self.weights[i] * arg.sin();
            for j in 0..d {
                g[j] += coeff * self.frequencies[(i, j)];
            }
        }
        g
    }

    pub fn hess(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let scale = (2.0 / self.num_features() as f64).sqrt();
        let mut h = DMatrix::zeros(d, d);
        for i in 0..self.num_features() {
            let mut arg = self.phases[i];
            for j in 0..d {
                arg += self.frequencies[(i, j)] * x[j];
            }
            let coeff = -scale * self.weights[i] * arg.cos();
            for a in 0..d {
                for b in 0..d {
                    // θ_a·θ_b first keeps the matrix bitwise symmetric
                    let outer = self.frequencies[(i, a)] * self.frequencies[(i, b)];
                    h[(a, b)] += coeff * outer;
                }
            }
        }
        h
    }
}

/// A benchmark objective over a box, optionally restricted to a hidden
/// active subset of coordinates, with optional observation noise.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub function: FunctionId,
    pub ambient_dim: usize,
    /// Ascending ambient indices of the coordinates that affect the value;
    /// `None` means all of them.
    pub active_dims: Option<Vec<usize>>,
    pub bounds: Vec<(f64, f64)>,
    pub noise_std: f64,
    pub optimum_value: Option<f64>,
    rff: Option<RffFunction>,
}

impl BenchmarkSpec {
    /// The standard suite member with its documented bounds and optimum.
    pub fn standard(function: FunctionId, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::argument("benchmark dimension must be positive"));
        }
        if function == FunctionId::RffPrior {
            return Err(Error::argument(
                "rff_prior requires an explicit draw; use BenchmarkSpec::rff_prior",
            ));
        }
        let (lo, hi) = function.default_bounds(d);
        Ok(BenchmarkSpec {
            function,
            ambient_dim: d,
            active_dims: None,
            bounds: vec![(lo, hi); d],
            noise_std: 0.0,
            optimum_value: Some(0.0),
            rff: None,
        })
    }

    /// A GP-prior draw as the objective (optimum unknown).
    pub fn rff_prior<R: Rng>(d: usize, n_b: usize, lengthscale: f64, rng: &mut R) -> Result<Self> {
        let f = sample_rff(d, n_b, lengthscale, rng)?;
        let (lo, hi) = FunctionId::RffPrior.default_bounds(d);
        Ok(BenchmarkSpec {
            function: FunctionId::RffPrior,
            ambient_dim: d,
            active_dims: None,
            bounds: vec![(lo, hi); d],
            noise_std: 0.0,
            optimum_value: None,
            rff: Some(f),
        })
    }

    /// Embed the base function in `d` ambient dimensions with a uniformly
    /// random hidden subset of `d_eff` active coordinates; the remaining
    /// coordinates are dummies.
    pub fn embedded<R: Rng>(
        function: FunctionId,
        d: usize,
        d_eff: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if d_eff > d {
            return Err(Error::argument(format!(
                "effective dimension {d_eff} exceeds ambient dimension {d}"
            )));
        }
        if d_eff == 0 {
            return Err(Error::argument("effective dimension must be positive"));
        }
        let mut spec = BenchmarkSpec::standard(function, d)?;
        if d_eff < d {
            let mut idx: Vec<usize> = (0..d).collect();
            idx.shuffle(rng);
            let mut active: Vec<usize> = idx.into_iter().take(d_eff).collect();
            active.sort_unstable();
            spec.active_dims = Some(active);
        }
        Ok(spec)
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != self.ambient_dim {
            return Err(Error::argument(format!(
                "bounds length {} does not match dimension {}",
                bounds.len(),
                self.ambient_dim
            )));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::argument(format!(
                    "bounds[{i}] is empty: [{lo}, {hi}]"
                )));
            }
        }
        self.bounds = bounds;
        Ok(self)
    }

    pub fn with_noise(mut self, noise_std: f64) -> Result<Self> {
        if !(noise_std >= 0.0) {
            return Err(Error::argument("noise std must be non-negative"));
        }
        self.noise_std = noise_std;
        Ok(self)
    }

    pub fn effective_dim(&self) -> usize {
        self.active_dims
            .as_ref()
            .map_or(self.ambient_dim, |a| a.len())
    }

    fn check_bounds(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim {
            return Err(Error::argument(format!(
                "point dimension {} does not match benchmark dimension {}",
                x.len(),
                self.ambient_dim
            )));
        }
        for (i, &v) in x.iter().enumerate() {
            let (lo, hi) = self.bounds[i];
            let slack = 1e-9 * (hi - lo); // roundoff guard for clamped points
            if v < lo - slack || v > hi + slack {
                return Err(Error::argument(format!(
                    "coordinate {i} = {v} outside bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    fn active_values(&self, x: &[f64]) -> Vec<f64> {
        match &self.active_dims {
            None => x.to_vec(),
            Some(active) => active.iter().map(|&i| x[i]).collect(),
        }
    }

    /// Noiseless objective value.
    pub fn noiseless(&self, x: &[f64]) -> Result<f64> {
        self.check_bounds(x)?;
        let xa = self.active_values(x);
        Ok(match self.function {
            FunctionId::Sphere => sphere(&xa),
            FunctionId::Rosenbrock => rosenbrock(&xa),
            FunctionId::Griewank => griewank(&xa),
            FunctionId::Ackley => ackley(&xa),
            FunctionId::RffPrior => self.rff.as_ref().expect("rff draw").eval(&xa),
        })
    }

    /// Observed value: the noiseless objective plus N(0, noise_std²) noise.
    pub fn evaluate<R: Rng>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        let v = self.noiseless(x)?;
        if self.noise_std > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            Ok(v + self.noise_std * z)
        } else {
            Ok(v)
        }
    }

    /// Analytic gradient in ambient coordinates (zero on dummy coordinates).
    pub fn true_gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_bounds(x)?;
        let xa = self.active_values(x);
        let ga = match self.function {
            FunctionId::Sphere => sphere_grad(&xa),
            FunctionId::Rosenbrock => rosenbrock_grad(&xa),
            FunctionId::Griewank => griewank_grad(&xa),
            FunctionId::Ackley => ackley_grad(&xa),
            FunctionId::RffPrior => self.rff.as_ref().expect("rff draw").grad(&xa),
        };
        Ok(self.lift_grad(ga))
    }

    /// Analytic Hessian in ambient coordinates.
    pub fn true_hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_bounds(x)?;
        let xa = self.active_values(x);
        let ha = match self.function {
            FunctionId::Sphere => sphere_hess(&xa),
            FunctionId::Rosenbrock => rosenbrock_hess(&xa),
            FunctionId::Griewank => griewank_hess(&xa),
            FunctionId::Ackley => ackley_hess(&xa),
            FunctionId::RffPrior => self.rff.as_ref().expect("rff draw").hess(&xa),
        };
        Ok(self.lift_hess(ha))
    }

    fn lift_grad(&self, ga: DVector<f64>) -> DVector<f64> {
        match &self.active_dims {
            None => ga,
            Some(active) => {
                let mut g = DVector::zeros(self.ambient_dim);
                for (pos, &i) in active.iter().enumerate() {
                    g[i] = ga[pos];
                }
                g
            }
        }
    }

    fn lift_hess(&self, ha: DMatrix<f64>) -> DMatrix<f64> {
        match &self.active_dims {
            None => ha,
            Some(active) => {
                let mut h = DMatrix::zeros(self.ambient_dim, self.ambient_dim);
                for (pa, &i) in active.iter().enumerate() {
                    for (pb, &j) in active.iter().enumerate() {
                        h[(i, j)] = ha[(pa, pb)];
                    }
                }
                h
            }
        }
    }
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn sphere_grad(x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len(), x.iter().map(|v| 2.0 * v))
}

fn sphere_hess(x: &[f64]) -> DMatrix<f64> {
    DMatrix::identity(x.len(), x.len()) * 2.0
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

fn rosenbrock_grad(x: &[f64]) -> DVector<f64> {
    let m = x.len();
    let mut g = DVector::zeros(m);
    for i in 0..m.saturating_sub(1) {
        let t = x[i + 1] - x[i] * x[i];
        g[i] += -400.0 * x[i] * t + 2.0 * (x[i] - 1.0);
        g[i + 1] += 200.0 * t;
    }
    g
}

fn rosenbrock_hess(x: &[f64]) -> DMatrix<f64> {
    let m = x.len();
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m.saturating_sub(1) {
        let t = x[i + 1] - x[i] * x[i];
        h[(i, i)] += -400.0 * t + 800.0 * x[i] * x[i] + 2.0;
        h[(i, i + 1)] += -400.0 * x[i];
        h[(i + 1, i)] += -400.0 * x[i];
        h[(i + 1, i + 1)] += 200.0;
    }
    h
}

pub fn griewank(x: &[f64]) -> f64 {
    let quad: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
    let prod: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
        .product();
    quad - prod + 1.0
}

fn griewank_grad(x: &[f64]) -> DVector<f64> {
    let m = x.len();
    let cosines: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
        .collect();
    let mut g = DVector::zeros(m);
    for i in 0..m {
        let si = ((i + 1) as f64).sqrt();
        let prod_others: f64 = cosines
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, c)| c)
            .product();
        g[i] = x[i] / 2000.0 + (x[i] / si).sin() / si * prod_others;
    }
    g
}

fn griewank_hess(x: &[f64]) -> DMatrix<f64> {
    let m = x.len();
    let cosines: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
        .collect();
    let sines: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).sin())
        .collect();
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m {
        let si = ((i + 1) as f64).sqrt();
        for j in i..m {
            if i == j {
                let prod_others: f64 = cosines
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i)
                    .map(|(_, c)| c)
                    .product();
                h[(i, i)] = 1.0 / 2000.0 + cosines[i] / (i as f64 + 1.0) * prod_others;
            } else {
                let sj = ((j + 1) as f64).sqrt();
                let prod_others: f64 = cosines
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i && k != j)
                    .map(|(_, c)| c)
                    .product();
                let v = -sines[i] / si * sines[j] / sj * prod_others;
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
    }
    h
}

pub fn ackley(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let s: f64 = x.iter().map(|v| v * v).sum();
    let c: f64 = x.iter().map(|v| (2.0 * std::f64::consts::PI * v).cos()).sum();
    -20.0 * (-0.2 * (s / d).sqrt()).exp() - (c / d).exp() + 20.0 + std::f64::consts::E
}

fn ackley_grad(x: &[f64]) -> DVector<f64> {
    let m = x.len();
    let d = m as f64;
    let s: f64 = x.iter().map(|v| v * v).sum();
    let u = (s / d).sqrt();
    let two_pi = 2.0 * std::f64::consts::PI;
    let c: f64 = x.iter().map(|v| (two_pi * v).cos()).sum();
    let b = (c / d).exp();
    let mut g = DVector::zeros(m);
    if u < 1e-12 {
        return g; // non-differentiable point at the origin
    }
    let a = (-0.2 * u).exp();
    for i in 0..m {
        g[i] = 4.0 * a * x[i] / (d * u) + (two_pi / d) * (two_pi * x[i]).sin() * b;
    }
    g
}

fn ackley_hess(x: &[f64]) -> DMatrix<f64> {
    let m = x.len();
    let d = m as f64;
    let s: f64 = x.iter().map(|v| v * v).sum();
    let u = (s / d).sqrt();
    let two_pi = 2.0 * std::f64::consts::PI;
    let c: f64 = x.iter().map(|v| (two_pi * v).cos()).sum();
    let b = (c / d).exp();
    let mut h = DMatrix::zeros(m, m);
    if u < 1e-12 {
        return h;
    }
    let a = (-0.2 * u).exp();
    for i in 0..m {
        for j in 0..m {
            let delta = if i == j { 1.0 } else { 0.0 };
            let first = 4.0 * a / d
                * (delta / u - x[i] * x[j] / (d * u * u * u) - x[i] * x[j] / (5.0 * d * u * u));
            let second = if i == j {
                (two_pi * two_pi / d) * (two_pi * x[i]).cos() * b
            } else {
                0.0
            } - (two_pi * two_pi / (d * d)) * (two_pi * x[i]).sin() * (two_pi * x[j]).sin() * b;
            h[(i, j)] = first + second;
        }
    }
    h
}
