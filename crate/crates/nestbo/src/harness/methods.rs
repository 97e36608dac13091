//! Replicate execution for every method in the registry.
//!
//! All model-based methods operate in a normalized search space (the unit
//! cube, or [−1,1]^m for the subspace variant) and map points affinely into
//! the ambient box before evaluating the objective. Line search happens on
//! the GP mean only, so it consumes no evaluation budget; the trace length
//! equals the budget exactly.

use nalgebra::DVector;
use rand::Rng;

use crate::acquisition::{self};
use crate::benchfns::BenchmarkSpec;
use crate::error::{Error, Result};
use crate::gp::{self, Dataset, GpState};
use crate::lowdisc::LowDiscrepancy;
use crate::newton::{
    self, ArmijoOptions, IterateConfig, IterateState, StepKind,
};
use crate::subspace::{self};

use super::config::{derive_seed, stream_rng, ExperimentConfig, Method, SeedStream};
use super::trace::{EvalRecord, IterRecord, RunTrace};

/// Budget-accounted objective evaluator with incumbent tracking.
struct Evaluator {
    spec: BenchmarkSpec,
    noise_rng: rand_chacha::ChaCha8Rng,
    budget: usize,
    evals: Vec<EvalRecord>,
    best: f64,
}

impl Evaluator {
    fn new(spec: BenchmarkSpec, seed: u64, budget: usize) -> Self {
        Evaluator {
            spec,
            noise_rng: stream_rng(seed, SeedStream::Noise),
            budget,
            evals: Vec::with_capacity(budget),
            best: f64::INFINITY,
        }
    }

    fn remaining(&self) -> usize {
        self.budget - self.evals.len()
    }

    fn evaluate(&mut self, ambient: &DVector<f64>) -> Result<f64> {
        if self.evals.len() >= self.budget {
            return Err(Error::numerical("evaluation budget exhausted"));
        }
        let y = self.spec.evaluate(ambient.as_slice(), &mut self.noise_rng)?;
        if y < self.best {
            self.best = y;
        }
        let regret = self.spec.optimum_value.map(|o| self.best - o);
        self.evals.push(EvalRecord {
            eval_index: self.evals.len(),
            point: ambient.as_slice().to_vec(),
            y,
            best_so_far: self.best,
            regret,
        });
        Ok(y)
    }
}

fn unit_to_ambient(u: &DVector<f64>, bounds: &[(f64, f64)]) -> DVector<f64> {
    DVector::from_fn(u.len(), |i, _| {
        let (lo, hi) = bounds[i];
        (lo + u[i] * (hi - lo)).clamp(lo, hi)
    })
}

/// Execute one seeded replicate. Module errors abort the replicate; the
/// partial trace is returned with the failure recorded.
pub fn run_replicate(cfg: &ExperimentConfig) -> RunTrace {
    let seed = cfg.run.seed;
    let mut trace = RunTrace {
        method: cfg.run.method,
        seed,
        budget: cfg.run.budget,
        evals: Vec::new(),
        iterations: Vec::new(),
        embedding: None,
        failed: None,
    };
    let spec = match cfg.benchmark.build(seed) {
        Ok(s) => s,
        Err(e) => {
            trace.failed = Some(e.to_string());
            return trace;
        }
    };
    let mut ev = Evaluator::new(spec, seed, cfg.run.budget);
    let outcome = match cfg.run.method {
        Method::SobolRandom => run_quasi_random(cfg, &mut ev),
        Method::NestBo => run_directional(cfg, &mut ev, &mut trace, UpdateRule::NewtonArmijo),
        Method::Gibo => run_directional(
            cfg,
            &mut ev,
            &mut trace,
            UpdateRule::FixedGradientStep(cfg.run.gibo_step_size),
        ),
        Method::NestBoSub => run_subspace(cfg, &mut ev, &mut trace),
    };
    trace.evals = ev.evals;
    if let Err(e) = outcome {
        trace.failed = Some(e.to_string());
    }
    trace
}

fn run_quasi_random(cfg: &ExperimentConfig, ev: &mut Evaluator) -> Result<()> {
    let d = cfg.benchmark.dimension;
    let mut seq = LowDiscrepancy::new(d, derive_seed(cfg.run.seed, SeedStream::Init));
    let lo: Vec<f64> = ev.spec.bounds.iter().map(|b| b.0).collect();
    let hi: Vec<f64> = ev.spec.bounds.iter().map(|b| b.1).collect();
    while ev.remaining() > 0 {
        let p = DVector::from_vec(seq.next_in_box(&lo, &hi));
        ev.evaluate(&p)?;
    }
    Ok(())
}

enum UpdateRule {
    NewtonArmijo,
    FixedGradientStep(f64),
}

fn initial_design<R: Rng>(
    search_dim: usize,
    init_points: usize,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    start_at_center: bool,
    seed: u64,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    let start = if start_at_center {
        DVector::from_fn(search_dim, |i, _| 0.5 * (lo[i] + hi[i]))
    } else {
        DVector::from_fn(search_dim, |i, _| {
            lo[i] + (hi[i] - lo[i]) * rng.random::<f64>()
        })
    };
    // quasi-random fill around the always-included starting point
    let mut seq = LowDiscrepancy::new(search_dim, derive_seed(seed, SeedStream::Init));
    let mut design = vec![start];
    while design.len() < init_points {
        let p = seq.next_in_box(lo.as_slice(), hi.as_slice());
        design.push(DVector::from_vec(p));
    }
    design
}

fn run_directional(
    cfg: &ExperimentConfig,
    ev: &mut Evaluator,
    trace: &mut RunTrace,
    rule: UpdateRule,
) -> Result<()> {
    let d = cfg.benchmark.dimension;
    let bounds = ev.spec.bounds.clone();
    let lo = DVector::zeros(d);
    let hi = DVector::from_element(d, 1.0);
    let mut init_rng = stream_rng(cfg.run.seed, SeedStream::Init);
    let mut method_rng = stream_rng(cfg.run.seed, SeedStream::Method);

    let design = initial_design(
        d,
        cfg.run.init_points,
        &lo,
        &hi,
        cfg.run.start_at_center,
        cfg.run.seed,
        &mut init_rng,
    );
    let start = design[0].clone();
    let mut data = Dataset::empty(d);
    for u in &design {
        let y = ev.evaluate(&unit_to_ambient(u, &bounds))?;
        data.push(u.clone(), y)?;
    }
    let fit = gp::fit_hyperparams(&data, cfg.run.fit_restarts, &mut method_rng)?;
    let mut state = IterateState {
        x_t: start,
        data,
        params: fit.params,
        iteration: 0,
        converged: false,
    };
    let acq = cfg.acquisition.to_acq_config();

    while ev.remaining() > 0 {
        let remaining = ev.remaining();
        let b_t = cfg.batch_size().min(remaining);
        let evaluate_iterate = remaining > b_t;
        match rule {
            UpdateRule::NewtonArmijo => {
                let itcfg = IterateConfig {
                    acq: acq.clone(),
                    batch_size: b_t,
                    refit_every: cfg.run.refit_every,
                    fit_restarts: cfg.run.fit_restarts,
                    armijo: ArmijoOptions::default(),
                    lo: lo.clone(),
                    hi: hi.clone(),
                    standardize: true,
                    evaluate_iterate,
                };
                let bounds_ref = &bounds;
                let mut objective =
                    |u: &DVector<f64>| ev.evaluate(&unit_to_ambient(u, bounds_ref));
                let rec =
                    newton::nest_bo_iterate(&mut state, &mut objective, &itcfg, &mut method_rng)?;
                trace.iterations.push(IterRecord {
                    iteration: state.iteration - 1,
                    iterate: unit_to_ambient(&state.x_t, &bounds).as_slice().to_vec(),
                    step_kind: Some(rec.step.kind),
                    gamma: Some(rec.step.step_size),
                    acq_value: rec.acq_values.last().copied(),
                    pi_g: Some(rec.pi_g),
                    pi_h: Some(rec.pi_h),
                    s_used: Some(rec.s_hat),
                    subspace_dim: None,
                    converged: rec.converged,
                    split_preserved: None,
                });
            }
            UpdateRule::FixedGradientStep(eta) => {
                let gp = GpState::standardized(state.data.clone(), state.params.clone())?;
                let sel = acquisition::select_batch_gi(
                    &gp,
                    state.x_t.as_slice(),
                    b_t,
                    &acq,
                    &lo,
                    &hi,
                    &mut method_rng,
                )?;
                for z in &sel.points {
                    let y = ev.evaluate(&unit_to_ambient(z, &bounds))?;
                    state.data.push(z.clone(), y)?;
                }
                let refit =
                    cfg.run.refit_every > 0 && state.iteration % cfg.run.refit_every == 0;
                if refit {
                    let fit = gp::fit_hyperparams_from(
                        &state.data,
                        cfg.run.fit_restarts,
                        Some(&state.params),
                        &mut method_rng,
                    )?;
                    if fit.status == gp::FitStatus::Converged {
                        state.params = fit.params;
                    }
                }
                let gp = GpState::standardized(state.data.clone(), state.params.clone())?;
                let belief = gp.grad_belief(state.x_t.as_slice())?;
                let converged = belief.mean_grad.norm() < 1e-10;
                if !converged {
                    let dir = newton::lengthscale_normalized_direction(
                        &belief.mean_grad,
                        state.params.lengthscales(),
                    );
                    let mut next = &state.x_t - &dir * eta;
                    for i in 0..d {
                        next[i] = next[i].clamp(lo[i], hi[i]);
                    }
                    state.x_t = next;
                } else {
                    state.converged = true;
                }
                if evaluate_iterate && !converged {
                    let y = ev.evaluate(&unit_to_ambient(&state.x_t, &bounds))?;
                    state.data.push(state.x_t.clone(), y)?;
                }
                state.iteration += 1;
                trace.iterations.push(IterRecord {
                    iteration: state.iteration - 1,
                    iterate: unit_to_ambient(&state.x_t, &bounds).as_slice().to_vec(),
                    step_kind: Some(StepKind::FallbackGradient),
                    gamma: Some(eta),
                    acq_value: sel.values.last().copied(),
                    pi_g: Some(belief.pi_g),
                    pi_h: Some(belief.pi_h),
                    s_used: None,
                    subspace_dim: None,
                    converged,
                    split_preserved: None,
                });
            }
        }
    }
    Ok(())
}

fn run_subspace(cfg: &ExperimentConfig, ev: &mut Evaluator, trace: &mut RunTrace) -> Result<()> {
    let d = cfg.benchmark.dimension;
    let bounds = ev.spec.bounds.clone();
    let mut emb_rng = stream_rng(cfg.run.seed, SeedStream::Embedding);
    let mut init_rng = stream_rng(cfg.run.seed, SeedStream::Init);
    let mut method_rng = stream_rng(cfg.run.seed, SeedStream::Method);

    let mut embedding = subspace::new_embedding(d, cfg.subspace.initial_dim, &mut emb_rng)?;
    let mut m = embedding.target_dim();
    let mut lo = DVector::from_element(m, -1.0);
    let mut hi = DVector::from_element(m, 1.0);

    let design = initial_design(
        m,
        cfg.run.init_points,
        &lo,
        &hi,
        cfg.run.start_at_center,
        cfg.run.seed,
        &mut init_rng,
    );
    let start = design[0].clone();
    let mut data = Dataset::empty(m);
    for v in &design {
        let y = ev.evaluate(&embedding.project_up(v, &bounds)?)?;
        data.push(v.clone(), y)?;
    }
    let fit = gp::fit_hyperparams(&data, cfg.run.fit_restarts, &mut method_rng)?;
    let mut state = IterateState {
        x_t: start,
        data,
        params: fit.params,
        iteration: 0,
        converged: false,
    };
    let acq = cfg.acquisition.to_acq_config();
    let mut window: Vec<f64> = Vec::new();

    while ev.remaining() > 0 {
        let remaining = ev.remaining();
        let b_t = cfg.run.batch_size.unwrap_or(m).min(remaining);
        let evaluate_iterate = remaining > b_t;
        let itcfg = IterateConfig {
            acq: acq.clone(),
            batch_size: b_t,
            refit_every: cfg.run.refit_every,
            fit_restarts: cfg.run.fit_restarts,
            armijo: ArmijoOptions::default(),
            lo: lo.clone(),
            hi: hi.clone(),
            standardize: true,
            evaluate_iterate,
        };
        let emb_ref = &embedding;
        let bounds_ref = &bounds;
        let mut objective = |v: &DVector<f64>| {
            let x = emb_ref.project_up(v, bounds_ref)?;
            ev.evaluate(&x)
        };
        let rec = newton::nest_bo_iterate(&mut state, &mut objective, &itcfg, &mut method_rng)?;
        window.push(ev.best);
        let mut record = IterRecord {
            iteration: state.iteration - 1,
            iterate: embedding
                .project_up(&state.x_t, &bounds)?
                .as_slice()
                .to_vec(),
            step_kind: Some(rec.step.kind),
            gamma: Some(rec.step.step_size),
            acq_value: rec.acq_values.last().copied(),
            pi_g: Some(rec.pi_g),
            pi_h: Some(rec.pi_h),
            s_used: Some(rec.s_hat),
            subspace_dim: Some(m),
            converged: rec.converged,
            split_preserved: None,
        };

        let stagnated =
            subspace::should_expand_with(&window, cfg.subspace.expansion_window) && m < d;
        if stagnated && ev.remaining() > 0 {
            // lift the iterate together with the dataset rows
            let mut rows: Vec<DVector<f64>> = state.data.inputs().to_vec();
            rows.push(state.x_t.clone());
            let split = embedding.split(&rows, &mut emb_rng)?;
            if !split.saturated {
                let mut preserved = true;
                for (old_v, new_v) in rows.iter().zip(&split.lifted) {
                    let before = embedding.project_up(old_v, &bounds)?;
                    let after = split.embedding.project_up(new_v, &bounds)?;
                    if before != after {
                        preserved = false;
                    }
                }
                record.split_preserved = Some(preserved);
                let new_m = split.embedding.target_dim();
                let mut lifted = split.lifted;
                let lifted_xt = lifted.pop().expect("iterate row");
                let mut new_data = Dataset::empty(new_m);
                for (v, &y) in lifted.into_iter().zip(state.data.targets()) {
                    new_data.push(v, y)?;
                }
                let fit = gp::fit_hyperparams(&new_data, cfg.run.fit_restarts, &mut method_rng)?;
                embedding = split.embedding;
                m = new_m;
                lo = DVector::from_element(m, -1.0);
                hi = DVector::from_element(m, 1.0);
                state = IterateState {
                    x_t: lifted_xt,
                    data: new_data,
                    params: fit.params,
                    iteration: state.iteration,
                    converged: false,
                };
                window.clear();
            }
        }
        trace.iterations.push(record);
    }
    trace.embedding = Some(embedding);
    Ok(())
}
