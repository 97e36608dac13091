//! Nested sparse sign embedding.
//!
//! Each ambient dimension maps to exactly one subspace bin with a random
//! sign, i.e. the implied m×d matrix has one ±1 per column. Expansion splits
//! every bin holding two or more dimensions into two children and lifts
//! historical subspace points by copying the parent coordinate into both
//! children, so ambient images are preserved exactly across splits.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One ambient dimension's slot in the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub bin: usize,
    /// +1 or −1.
    pub sign: i8,
}

/// Record of one expansion event.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitEvent {
    /// Subspace dimension before and after the split.
    pub from_dim: usize,
    pub to_dim: usize,
    /// For every new bin, the parent bin it came from.
    pub parents: Vec<usize>,
}

/// Sparse sign projection from an m-dimensional subspace into d ambient
/// dimensions. Immutable; `split` returns a new embedding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Embedding {
    ambient_dim: usize,
    target_dim: usize,
    assignment: Vec<Assignment>,
    history: Vec<SplitEvent>,
}

/// Result of a split: the enlarged embedding, lifted history rows, and a
/// saturation flag when no bin could split.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub embedding: Embedding,
    pub lifted: Vec<DVector<f64>>,
    pub saturated: bool,
}

/// Balanced random assignment: ambient dimensions are dealt round-robin over
/// a random permutation so every bin is non-empty, then signs are randomized.
pub fn new_embedding<R: Rng>(d: usize, m0: usize, rng: &mut R) -> Result<Embedding> {
    if m0 == 0 || m0 > d {
        return Err(Error::argument(format!(
            "target dimension must satisfy 1 <= m0 <= d, got m0={m0}, d={d}"
        )));
    }
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(rng);
    let mut assignment = vec![Assignment { bin: 0, sign: 1 }; d];
    for (pos, &dim) in perm.iter().enumerate() {
        let sign = if rng.random::<bool>() { 1 } else { -1 };
        assignment[dim] = Assignment {
            bin: pos % m0,
            sign,
        };
    }
    Ok(Embedding {
        ambient_dim: d,
        target_dim: m0,
        assignment,
        history: Vec::new(),
    })
}

impl Embedding {
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn assignment(&self) -> &[Assignment] {
        &self.assignment
    }

    pub fn history(&self) -> &[SplitEvent] {
        &self.history
    }

    /// The implied m×d sign matrix S (one ±1 per column).
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.target_dim, self.ambient_dim);
        for (dim, a) in self.assignment.iter().enumerate() {
            s[(a.bin, dim)] = a.sign as f64;
        }
        s
    }

    /// Pre-rescale projection x_i = sign_i · v_{bin(i)} in [−1,1]^d.
    pub fn project_signs(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.target_dim {
            return Err(Error::argument(format!(
                "subspace point has dimension {}, expected {}",
                v.len(),
                self.target_dim
            )));
        }
        Ok(DVector::from_fn(self.ambient_dim, |dim, _| {
            let a = self.assignment[dim];
            a.sign as f64 * v[a.bin]
        }))
    }

    /// Map a subspace point v ∈ [−1,1]^m to the ambient box: x_i = sign_i ·
    /// v_{bin(i)} rescaled affinely from [−1,1] to `bounds` and clamped.
    pub fn project_up(&self, v: &DVector<f64>, bounds: &[(f64, f64)]) -> Result<DVector<f64>> {
        if v.len() != self.target_dim {
            return Err(Error::argument(format!(
                "subspace point has dimension {}, expected {}",
                v.len(),
                self.target_dim
            )));
        }
        if bounds.len() != self.ambient_dim {
            return Err(Error::argument(format!(
                "bounds length {} does not match ambient dimension {}",
                bounds.len(),
                self.ambient_dim
            )));
        }
        let mut x = DVector::zeros(self.ambient_dim);
        for (dim, a) in self.assignment.iter().enumerate() {
            let raw = a.sign as f64 * v[a.bin];
            let (lo, hi) = bounds[dim];
            let mapped = lo + (raw + 1.0) * 0.5 * (hi - lo);
            x[dim] = mapped.clamp(lo, hi);
        }
        Ok(x)
    }

    /// Number of ambient dimensions in each bin.
    pub fn bin_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.target_dim];
        for a in &self.assignment {
            sizes[a.bin] += 1;
        }
        sizes
    }

    /// Split every bin holding at least two dimensions into two children,
    /// partitioning its dimensions as evenly as possible in seeded random
    /// order. Historical subspace rows are lifted so that ambient images are
    /// bit-identical before and after. Returns the input unchanged with the
    /// saturation flag when m = d.
    pub fn split<R: Rng>(&self, data_v: &[DVector<f64>], rng: &mut R) -> Result<SplitOutcome> {
        for (idx, row) in data_v.iter().enumerate() {
            if row.len() != self.target_dim {
                return Err(Error::argument(format!(
                    "history row {idx} has dimension {}, expected {}",
                    row.len(),
                    self.target_dim
                )));
            }
        }
        let sizes = self.bin_sizes();
        if sizes.iter().all(|&s| s <= 1) {
            return Ok(SplitOutcome {
                embedding: self.clone(),
                lifted: data_v.to_vec(),
                saturated: true,
            });
        }

        // members per bin, order randomized by seed before the even partition
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.target_dim];
        for (dim, a) in self.assignment.iter().enumerate() {
            members[a.bin].push(dim);
        }

        let mut assignment = self.assignment.clone();
        let mut parents = Vec::new();
        let mut next_bin = 0usize;
        for (bin, mut dims) in members.into_iter().enumerate() {
            if dims.len() >= 2 {
                dims.shuffle(rng);
                let half = dims.len() / 2;
                let first = next_bin;
                let second = next_bin + 1;
                next_bin += 2;
                parents.push(bin);
                parents.push(bin);
                for (pos, dim) in dims.into_iter().enumerate() {
                    assignment[dim].bin = if pos < half { first } else { second };
                }
            } else {
                let child = next_bin;
                next_bin += 1;
                parents.push(bin);
                for dim in dims {
                    assignment[dim].bin = child;
                }
            }
        }
        let new_dim = next_bin;

        // lift: each child coordinate copies its parent's value
        let lifted: Vec<DVector<f64>> = data_v
            .iter()
            .map(|v| DVector::from_fn(new_dim, |c, _| v[parents[c]]))
            .collect();

        let mut history = self.history.clone();
        history.push(SplitEvent {
            from_dim: self.target_dim,
            to_dim: new_dim,
            parents,
        });

        Ok(SplitOutcome {
            embedding: Embedding {
                ambient_dim: self.ambient_dim,
                target_dim: new_dim,
                assignment,
                history,
            },
            lifted,
            saturated: false,
        })
    }
}

/// Expansion trigger: true iff the window holds at least 10 completed
/// iterations and none of the last 10 improved the incumbent strictly
/// (relative tolerance 1e−12).
pub fn should_expand(incumbents: &[f64]) -> bool {
    should_expand_with(incumbents, 10)
}

/// [`should_expand`] with a configurable window length.
pub fn should_expand_with(incumbents: &[f64], window: usize) -> bool {
    if window == 0 || incumbents.len() < window {
        return false;
    }
    let tail = &incumbents[incumbents.len() - window..];
    for w in tail.windows(2) {
        let improvement = w[0] - w[1];
        if improvement > 1e-12 * w[0].abs().max(1.0) {
            return false;
        }
    }
    true
}
