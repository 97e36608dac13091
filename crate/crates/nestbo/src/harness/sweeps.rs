//! Preset ablation sweeps: the scale-factor study, the batch-size study and
//! the step-size study.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::experiment::{self, median, parallel_collect};
use super::steperror::{
    median_final_error, run_step_error_replicate, StepErrorConfig, StepErrorMethod,
    StepErrorOutcome,
};

/// Named preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Scale-factor comparison via Newton-step error on Griewank (d = 2, 3).
    Scale,
    /// Batch-size ablation b ∈ {0.2d, d, 2d} on Griewank and Ackley, d = 10.
    Batch,
    /// Line search versus fixed GIBO step sizes on Rosenbrock, d = 4.
    StepSize,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "scale" => Ok(Preset::Scale),
            "batch" => Ok(Preset::Batch),
            "stepsize" => Ok(Preset::StepSize),
            other => Err(Error::Config(format!(
                "unknown sweep preset '{other}' (expected scale, batch, or stepsize)"
            ))),
        }
    }
}

/// Scale-study result for one method at one dimension.
#[derive(Debug, Serialize)]
pub struct ScaleStudyRow {
    pub method: String,
    pub dimension: usize,
    pub median_final_error: f64,
    pub per_iteration_median: Vec<f64>,
}

/// Run the scale-factor study for one dimension; outcomes are ordered like
/// `methods`, one entry per (method, replicate).
pub fn run_scale_study(
    methods: &[StepErrorMethod],
    cfg: &StepErrorConfig,
    base_seed: u64,
    replicates: usize,
    jobs: usize,
) -> Result<Vec<ScaleStudyRow>> {
    let tasks: Vec<(usize, u64)> = (0..methods.len())
        .flat_map(|m| (0..replicates).map(move |r| (m, base_seed + r as u64)))
        .collect();
    let outcomes = parallel_collect(tasks.len(), jobs, |idx| {
        let (m, seed) = tasks[idx];
        run_step_error_replicate(methods[m], cfg, seed)
    });
    let mut rows = Vec::with_capacity(methods.len());
    for (m, method) in methods.iter().enumerate() {
        let mut method_outcomes: Vec<StepErrorOutcome> = Vec::with_capacity(replicates);
        for (idx, (task_m, _)) in tasks.iter().enumerate() {
            if *task_m == m {
                match &outcomes[idx] {
                    Ok(o) => method_outcomes.push(o.clone()),
                    Err(e) => {
                        return Err(Error::numerical(format!(
                            "scale study replicate failed for {}: {e}",
                            method.label()
                        )))
                    }
                }
            }
        }
        let iters = method_outcomes
            .iter()
            .map(|o| o.per_iteration_median.len())
            .min()
            .unwrap_or(0);
        let mut per_iteration_median = Vec::with_capacity(iters);
        for it in 0..iters {
            let vals: Vec<f64> = method_outcomes
                .iter()
                .map(|o| o.per_iteration_median[it])
                .filter(|v| v.is_finite())
                .collect();
            per_iteration_median.push(median(&vals).unwrap_or(f64::NAN));
        }
        rows.push(ScaleStudyRow {
            method: method.label(),
            dimension: cfg.dimension,
            median_final_error: median_final_error(&method_outcomes),
            per_iteration_median,
        });
    }
    Ok(rows)
}

fn write_scale_rows(dir: &Path, rows: &[ScaleStudyRow]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut summary = String::from("method,dimension,median_final_error\n");
    for row in rows {
        summary.push_str(&format!(
            "{},{},{}\n",
            row.method, row.dimension, row.median_final_error
        ));
        let mut curve = String::from("iteration,median_error\n");
        for (i, v) in row.per_iteration_median.iter().enumerate() {
            curve.push_str(&format!("{i},{v}\n"));
        }
        std::fs::write(
            dir.join(format!("error_curve_{}_d{}.csv", row.method, row.dimension)),
            curve,
        )?;
    }
    std::fs::write(dir.join("summary.csv"), summary)?;
    Ok(())
}

fn experiment_toml(
    function: &str,
    dimension: usize,
    method: &str,
    budget: usize,
    batch_size: Option<usize>,
    seed: u64,
    extra: &str,
) -> String {
    let batch_line = batch_size
        .map(|b| format!("batch_size = {b}\n"))
        .unwrap_or_default();
    format!(
        r#"
[benchmark]
function = "{function}"
dimension = {dimension}

[run]
method = "{method}"
budget = {budget}
init_points = 10
seed = {seed}
refit_every = {refit}
{batch_line}{extra}
"#,
        refit = dimension
    )
}

fn run_and_write(
    cfg_text: &str,
    out_dir: &Path,
    name: &str,
    replicates: usize,
    jobs: usize,
) -> Result<f64> {
    let cfg = ExperimentConfig::from_toml_str(cfg_text)?;
    let report = experiment::run_experiment(&cfg, replicates, jobs, Some(&out_dir.join(name)))?;
    Ok(report
        .median_final_regret()
        .or_else(|| report.median_final_best())
        .unwrap_or(f64::NAN))
}

/// Execute a preset and write its outputs under `out_dir`. Returns a list of
/// (label, headline value) pairs for the console summary.
pub fn run_preset(
    preset: Preset,
    out_dir: &Path,
    seed: u64,
    replicates: usize,
    jobs: usize,
) -> Result<Vec<(String, f64)>> {
    std::fs::create_dir_all(out_dir)?;
    let mut summary = Vec::new();
    match preset {
        Preset::Scale => {
            let methods = [
                StepErrorMethod::NestFixed(1.0),
                StepErrorMethod::NestPlugin,
                StepErrorMethod::NestMc(32),
                StepErrorMethod::Gi,
                StepErrorMethod::Random,
            ];
            for d in [2usize, 3] {
                let cfg = StepErrorConfig::for_dimension(d);
                let rows = run_scale_study(&methods, &cfg, seed, replicates, jobs)?;
                write_scale_rows(&out_dir.join(format!("scale_d{d}")), &rows)?;
                for row in rows {
                    summary.push((
                        format!("scale d={d} {}", row.method),
                        row.median_final_error,
                    ));
                }
            }
        }
        Preset::Batch => {
            for function in ["griewank", "ackley"] {
                for (label, b) in [("0.2d", 2usize), ("1d", 10), ("2d", 20)] {
                    let text = experiment_toml(function, 10, "nest_bo", 200, Some(b), seed, "");
                    let name = format!("batch_{function}_b{label}");
                    let v = run_and_write(&text, out_dir, &name, replicates, jobs)?;
                    summary.push((name, v));
                }
            }
        }
        Preset::StepSize => {
            let text = experiment_toml("rosenbrock", 4, "nest_bo", 300, None, seed, "");
            let v = run_and_write(&text, out_dir, "stepsize_nest_bo", replicates, jobs)?;
            summary.push(("stepsize nest_bo (line search)".into(), v));
            for eta in [1.0, 0.5, 0.1] {
                let extra = format!("gibo_step_size = {eta}\n");
                let text = experiment_toml("rosenbrock", 4, "gibo", 300, None, seed, &extra);
                let name = format!("stepsize_gibo_eta{eta}");
                let v = run_and_write(&text, out_dir, &name, replicates, jobs)?;
                summary.push((format!("stepsize gibo eta={eta}"), v));
            }
        }
    }
    Ok(summary)
}
