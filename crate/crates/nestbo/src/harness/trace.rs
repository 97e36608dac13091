//! Run traces: per-evaluation and per-iteration records, CSV and JSON
//! serialization.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::newton::StepKind;
use crate::subspace::Embedding;

use super::config::Method;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub eval_index: usize,
    /// Ambient-space point that was evaluated.
    pub point: Vec<f64>,
    pub y: f64,
    pub best_so_far: f64,
    /// best_so_far − optimum when the optimum is known.
    pub regret: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterRecord {
    pub iteration: usize,
    /// Ambient image of the iterate after the update.
    pub iterate: Vec<f64>,
    pub step_kind: Option<StepKind>,
    pub gamma: Option<f64>,
    /// Acquisition value after the final greedy pick.
    pub acq_value: Option<f64>,
    pub pi_g: Option<f64>,
    pub pi_h: Option<f64>,
    pub s_used: Option<f64>,
    pub subspace_dim: Option<usize>,
    pub converged: bool,
    /// Set on iterations that expanded the subspace: whether every historic
    /// ambient image was preserved exactly by the split.
    pub split_preserved: Option<bool>,
}

/// Complete log of one seeded replicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunTrace {
    pub method: Method,
    pub seed: u64,
    pub budget: usize,
    pub evals: Vec<EvalRecord>,
    pub iterations: Vec<IterRecord>,
    /// Final embedding (assignment plus split history) for subspace runs.
    pub embedding: Option<Embedding>,
    /// Populated when the replicate aborted; the trace is partial.
    pub failed: Option<String>,
}

impl RunTrace {
    pub fn best_so_far(&self) -> Option<f64> {
        self.evals.last().map(|e| e.best_so_far)
    }

    pub fn final_regret(&self) -> Option<f64> {
        self.evals.last().and_then(|e| e.regret)
    }

    /// CSV with the documented columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eval_index,y,best_so_far,regret\n");
        for e in &self.evals {
            let regret = e
                .regret
                .map(|r| format!("{r}"))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.eval_index, e.y, e.best_so_far, regret
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| crate::error::Error::numerical(format!("trace serialization: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_documented_columns() {
        let trace = RunTrace {
            method: Method::SobolRandom,
            seed: 1,
            budget: 2,
            evals: vec![
                EvalRecord {
                    eval_index: 0,
                    point: vec![0.0],
                    y: 3.0,
                    best_so_far: 3.0,
                    regret: Some(3.0),
                },
                EvalRecord {
                    eval_index: 1,
                    point: vec![1.0],
                    y: 5.0,
                    best_so_far: 3.0,
                    regret: Some(3.0),
                },
            ],
            iterations: vec![],
            embedding: None,
            failed: None,
        };
        let csv = trace.to_csv();
        assert!(csv.starts_with("eval_index,y,best_so_far,regret\n0,3,3,3\n"));
        let json = trace.to_json().unwrap();
        let back: RunTrace = serde_json::from_str(&json).unwrap();
        assert_eq!(back.evals.len(), 2);
    }
}
