//! Replicate orchestration and aggregation.
//!
//! Replicates run seeds base..base+r−1, in parallel when requested; within a
//! replicate execution is strictly sequential so traces are reproducible.
//! The aggregate reports per-evaluation medians and standard errors of the
//! best-so-far (and regret) curves over the successful replicates.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::methods::run_replicate;
use super::trace::RunTrace;

#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub eval_index: usize,
    pub median_best: f64,
    pub se_best: f64,
    pub median_regret: Option<f64>,
    pub se_regret: Option<f64>,
    /// Successful replicates contributing to this row.
    pub count: usize,
}

#[derive(Debug, Serialize)]
pub struct AggregateReport {
    pub config: ExperimentConfig,
    pub replicates: usize,
    pub failed: usize,
    pub rows: Vec<AggregateRow>,
    pub final_bests: Vec<f64>,
    pub final_regrets: Vec<Option<f64>>,
}

impl AggregateReport {
    pub fn median_final_best(&self) -> Option<f64> {
        median(&self.final_bests)
    }

    pub fn median_final_regret(&self) -> Option<f64> {
        let vals: Vec<f64> = self.final_regrets.iter().filter_map(|r| *r).collect();
        median(&vals)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("eval_index,median_best,se_best,median_regret,se_regret,count\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.eval_index,
                r.median_best,
                r.se_best,
                r.median_regret.map(|v| v.to_string()).unwrap_or_default(),
                r.se_regret.map(|v| v.to_string()).unwrap_or_default(),
                r.count
            ));
        }
        out
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in median"));
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Evaluate `f(0..n)` with up to `jobs` worker threads, results in index
/// order. Each index is processed exactly once; workers pull from a shared
/// counter.
pub(crate) fn parallel_collect<T, F>(n: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = jobs.max(1).min(n.max(1));
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= n {
                    break;
                }
                let value = f(idx);
                if let Some(slot) = slots.lock().expect("slots").get_mut(idx) {
                    *slot = Some(value);
                }
            });
        }
    });
    slots
        .into_inner()
        .expect("slots")
        .into_iter()
        .map(|t| t.expect("every index produces a value"))
        .collect()
}

/// Run `replicates` seeded replicates with up to `jobs` worker threads and
/// aggregate the curves. Traces come back ordered by replicate index.
pub fn run_traces(cfg: &ExperimentConfig, replicates: usize, jobs: usize) -> Vec<RunTrace> {
    assert!(replicates >= 1, "need at least one replicate");
    parallel_collect(replicates, jobs, |idx| {
        let mut rep_cfg = cfg.clone();
        rep_cfg.run.seed = cfg.run.seed + idx as u64;
        run_replicate(&rep_cfg)
    })
}

/// Aggregate already-computed traces.
pub fn aggregate(cfg: &ExperimentConfig, traces: &[RunTrace]) -> AggregateReport {
    let ok: Vec<&RunTrace> = traces.iter().filter(|t| t.failed.is_none()).collect();
    let budget = cfg.run.budget;
    let mut rows = Vec::with_capacity(budget);
    for e in 0..budget {
        let bests: Vec<f64> = ok
            .iter()
            .filter_map(|t| t.evals.get(e).map(|r| r.best_so_far))
            .collect();
        let regrets: Vec<f64> = ok
            .iter()
            .filter_map(|t| t.evals.get(e).and_then(|r| r.regret))
            .collect();
        rows.push(AggregateRow {
            eval_index: e,
            median_best: median(&bests).unwrap_or(f64::NAN),
            se_best: standard_error(&bests),
            median_regret: median(&regrets),
            se_regret: if regrets.len() >= 2 {
                Some(standard_error(&regrets))
            } else {
                None
            },
            count: bests.len(),
        });
    }
    AggregateReport {
        config: cfg.clone(),
        replicates: traces.len(),
        failed: traces.len() - ok.len(),
        rows,
        final_bests: ok.iter().filter_map(|t| t.best_so_far()).collect(),
        final_regrets: ok.iter().map(|t| t.final_regret()).collect(),
    }
}

/// Run an experiment and, when `out_dir` is given, write one JSON and one
/// CSV trace per replicate plus the aggregate files.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    replicates: usize,
    jobs: usize,
    out_dir: Option<&Path>,
) -> Result<AggregateReport> {
    if replicates == 0 {
        return Err(Error::argument("replicates must be at least 1"));
    }
    let traces = run_traces(cfg, replicates, jobs);
    let report = aggregate(cfg, &traces);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        for trace in &traces {
            let stem = format!("replicate_{:04}", trace.seed);
            std::fs::write(dir.join(format!("{stem}.json")), trace.to_json()?)?;
            std::fs::write(dir.join(format!("{stem}.csv")), trace.to_csv())?;
        }
        std::fs::write(dir.join("aggregate.csv"), report.to_csv())?;
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::numerical(format!("aggregate serialization: {e}")))?;
        std::fs::write(dir.join("aggregate.json"), json)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_se() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert!(standard_error(&[1.0]) == 0.0);
        let se = standard_error(&[1.0, 2.0, 3.0]);
        assert!((se - 1.0 / (3.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_replicate_aggregate_matches_trace() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [benchmark]
            function = "griewank"
            dimension = 2

            [run]
            method = "sobol_random"
            budget = 40
            init_points = 5
            seed = 9
            "#,
        )
        .unwrap();
        let traces = run_traces(&cfg, 1, 1);
        let report = aggregate(&cfg, &traces);
        assert_eq!(report.rows.len(), 40);
        for (row, e) in report.rows.iter().zip(&traces[0].evals) {
            assert_eq!(row.median_best, e.best_so_far);
            assert_eq!(row.se_best, 0.0);
            assert_eq!(row.count, 1);
        }
    }

    #[test]
    fn parallel_matches_serial() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [benchmark]
            function = "griewank"
            dimension = 2

            [run]
            method = "sobol_random"
            budget = 30
            init_points = 5
            seed = 100
            "#,
        )
        .unwrap();
        let serial = run_traces(&cfg, 4, 1);
        let parallel = run_traces(&cfg, 4, 4);
        for (a, b) in serial.iter().zip(&parallel) {
            assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        }
    }

    #[test]
    fn median_curve_non_increasing() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [benchmark]
            function = "griewank"
            dimension = 2

            [run]
            method = "sobol_random"
            budget = 60
            init_points = 5
            seed = 17
            "#,
        )
        .unwrap();
        let traces = run_traces(&cfg, 10, 2);
        let report = aggregate(&cfg, &traces);
        assert_eq!(report.failed, 0);
        for w in report.rows.windows(2) {
            assert!(w[1].median_best <= w[0].median_best + 1e-12);
        }
    }
}
