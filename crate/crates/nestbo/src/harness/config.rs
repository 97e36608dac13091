//! Experiment configuration: TOML schema, validation, and construction of
//! benchmark specs with deterministic seed streams.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{AcqConfig, ScaleMode};
use crate::benchfns::{rff_lengthscale, BenchmarkSpec, FunctionId};
use crate::error::{Error, Result};

/// Optimization method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NestBo,
    NestBoSub,
    Gibo,
    SobolRandom,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::NestBo => "nest_bo",
            Method::NestBoSub => "nest_bo_sub",
            Method::Gibo => "gibo",
            Method::SobolRandom => "sobol_random",
        }
    }
}

/// Named RNG streams derived from the experiment seed. The benchmark and
/// noise streams are method-independent so every method in one experiment
/// sees the same hidden active dimensions and noise sequence.
#[derive(Debug, Clone, Copy)]
pub enum SeedStream {
    Benchmark,
    Noise,
    Init,
    Method,
    Embedding,
}

impl SeedStream {
    fn tag(self) -> u64 {
        match self {
            SeedStream::Benchmark => 0x42454e4348,
            SeedStream::Noise => 0x4e4f495345,
            SeedStream::Init => 0x494e4954,
            SeedStream::Method => 0x4d455448,
            SeedStream::Embedding => 0x454d424544,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, stream: SeedStream) -> u64 {
    splitmix64(base ^ splitmix64(stream.tag()))
}

pub fn stream_rng(base: u64, stream: SeedStream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub function: FunctionId,
    pub dimension: usize,
    /// For embedded variants: the number of hidden active coordinates. The
    /// subset itself is drawn from the benchmark seed stream.
    #[serde(default)]
    pub effective_dim: Option<usize>,
    #[serde(default)]
    pub noise_std: f64,
    /// Uniform bounds override applied to every dimension.
    #[serde(default)]
    pub bound: Option<(f64, f64)>,
    /// Per-dimension bounds override.
    #[serde(default)]
    pub bounds: Option<Vec<(f64, f64)>>,
    /// rff_prior only: number of Fourier features.
    #[serde(default = "default_rff_features")]
    pub rff_features: usize,
    /// rff_prior only: lengthscale; absent means the heuristic draw.
    #[serde(default)]
    pub rff_lengthscale: Option<f64>,
}

fn default_rff_features() -> usize {
    1024
}

impl BenchmarkConfig {
    /// Materialize the benchmark. All randomness (active subset, RFF draw)
    /// comes from the benchmark stream of `seed`.
    pub fn build(&self, seed: u64) -> Result<BenchmarkSpec> {
        let mut rng = stream_rng(seed, SeedStream::Benchmark);
        let mut spec = match self.function {
            FunctionId::RffPrior => {
                let ls = self
                    .rff_lengthscale
                    .unwrap_or_else(|| rff_lengthscale(self.dimension, &mut rng));
                BenchmarkSpec::rff_prior(self.dimension, self.rff_features, ls, &mut rng)?
            }
            _ => match self.effective_dim {
                Some(d_eff) if d_eff != self.dimension => {
                    BenchmarkSpec::embedded(self.function, self.dimension, d_eff, &mut rng)?
                }
                _ => BenchmarkSpec::standard(self.function, self.dimension)?,
            },
        };
        if let Some((lo, hi)) = self.bound {
            spec = spec.with_bounds(vec![(lo, hi); self.dimension])?;
        }
        if let Some(bounds) = &self.bounds {
            spec = spec.with_bounds(bounds.clone())?;
        }
        spec = spec.with_noise(self.noise_std)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    /// Total evaluation count.
    pub budget: usize,
    pub init_points: usize,
    #[serde(default)]
    pub seed: u64,
    /// Points per iteration; defaults to the search dimension (d, or the
    /// current subspace dimension for the subspace variant).
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Refit hyperparameters every this many iterations; defaults to 1
    /// (every move).
    #[serde(default = "default_refit_every")]
    pub refit_every: usize,
    #[serde(default = "default_fit_restarts")]
    pub fit_restarts: usize,
    /// Fixed step size for the GIBO baseline (no line search).
    #[serde(default = "default_gibo_step")]
    pub gibo_step_size: f64,
    /// Start the iterate at the domain center instead of a random point.
    #[serde(default)]
    pub start_at_center: bool,
}

fn default_refit_every() -> usize {
    1
}

fn default_fit_restarts() -> usize {
    2
}

fn default_gibo_step() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcqFileConfig {
    #[serde(default = "default_scale_mode")]
    pub scale_mode: ScaleModeName,
    #[serde(default = "default_scale_value")]
    pub scale_value: f64,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_box_radius")]
    pub box_radius: f64,
    #[serde(default = "default_num_restarts")]
    pub num_restarts: usize,
    #[serde(default = "default_raw_samples")]
    pub raw_samples: usize,
    #[serde(default = "default_polish_iters")]
    pub polish_iters: usize,
    #[serde(default = "default_polish_grad_tol")]
    pub polish_grad_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScaleModeName {
    #[default]
    Fixed,
    Plugin,
    MonteCarlo,
}

fn default_scale_mode() -> ScaleModeName {
    ScaleModeName::Fixed
}
fn default_scale_value() -> f64 {
    1.0
}
fn default_mc_samples() -> usize {
    32
}
fn default_box_radius() -> f64 {
    0.2
}
fn default_num_restarts() -> usize {
    5
}
fn default_raw_samples() -> usize {
    20
}
fn default_polish_iters() -> usize {
    100
}
fn default_polish_grad_tol() -> f64 {
    1e-6
}

impl Default for AcqFileConfig {
    fn default() -> Self {
        AcqFileConfig {
            scale_mode: default_scale_mode(),
            scale_value: default_scale_value(),
            mc_samples: default_mc_samples(),
            box_radius: default_box_radius(),
            num_restarts: default_num_restarts(),
            raw_samples: default_raw_samples(),
            polish_iters: default_polish_iters(),
            polish_grad_tol: default_polish_grad_tol(),
        }
    }
}

impl AcqFileConfig {
    pub fn to_acq_config(&self) -> AcqConfig {
        let scale_mode = match self.scale_mode {
            ScaleModeName::Fixed => ScaleMode::Fixed(self.scale_value),
            ScaleModeName::Plugin => ScaleMode::Plugin,
            ScaleModeName::MonteCarlo => ScaleMode::MonteCarlo(self.mc_samples),
        };
        AcqConfig {
            scale_mode,
            box_radius: self.box_radius,
            num_restarts: self.num_restarts,
            raw_samples: self.raw_samples,
            polish_iters: self.polish_iters,
            polish_grad_tol: self.polish_grad_tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceConfig {
    #[serde(default = "default_initial_dim")]
    pub initial_dim: usize,
    /// Expand after this many consecutive iterations without improvement.
    #[serde(default = "default_expansion_window")]
    pub expansion_window: usize,
}

fn default_initial_dim() -> usize {
    4
}

fn default_expansion_window() -> usize {
    10
}

impl Default for SubspaceConfig {
    fn default() -> Self {
        SubspaceConfig {
            initial_dim: default_initial_dim(),
            expansion_window: default_expansion_window(),
        }
    }
}

/// A complete experiment description: one benchmark, one method, seeds, and
/// acquisition settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub acquisition: AcqFileConfig,
    #[serde(default)]
    pub subspace: SubspaceConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        ExperimentConfig::from_toml_str(&text)
    }

    /// Search-space dimension the method operates in (subspace dimension for
    /// the subspace variant, ambient dimension otherwise).
    pub fn search_dim(&self) -> usize {
        match self.run.method {
            Method::NestBoSub => self.subspace.initial_dim,
            _ => self.benchmark.dimension,
        }
    }

    pub fn batch_size(&self) -> usize {
        self.run.batch_size.unwrap_or_else(|| self.search_dim())
    }

    pub fn validate(&self) -> Result<()> {
        if self.benchmark.dimension == 0 {
            return Err(Error::Config("benchmark dimension must be positive".into()));
        }
        if let Some(d_eff) = self.benchmark.effective_dim {
            if d_eff == 0 || d_eff > self.benchmark.dimension {
                return Err(Error::Config(format!(
                    "effective_dim must satisfy 1 <= {d_eff} <= {}",
                    self.benchmark.dimension
                )));
            }
        }
        if self.run.init_points == 0 {
            return Err(Error::Config("init_points must be positive".into()));
        }
        if self.run.budget < self.run.init_points + self.batch_size() {
            return Err(Error::Config(format!(
                "budget {} must be at least init_points {} + batch_size {}",
                self.run.budget,
                self.run.init_points,
                self.batch_size()
            )));
        }
        if self.run.fit_restarts == 0 {
            return Err(Error::Config("fit_restarts must be at least 1".into()));
        }
        if self.run.method == Method::NestBoSub {
            if self.subspace.initial_dim == 0
                || self.subspace.initial_dim > self.benchmark.dimension
            {
                return Err(Error::Config(format!(
                    "subspace initial_dim must satisfy 1 <= {} <= {}",
                    self.subspace.initial_dim, self.benchmark.dimension
                )));
            }
            if self.subspace.expansion_window == 0 {
                return Err(Error::Config("expansion_window must be positive".into()));
            }
        }
        self.acquisition
            .to_acq_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}
