//! The `verify` property suite: fast, seeded spot checks over every layer,
//! runnable from the CLI as a smoke gate.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{self, AcqConfig};
use crate::gp::{Dataset, GpState};
use crate::kernel::{self, KernelParams};
use crate::oracle;
use crate::subspace;

use super::config::ExperimentConfig;
use super::methods::run_replicate;

#[derive(Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, result: Result<String, String>) -> CheckResult {
    match result {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn random_params(rng: &mut ChaCha8Rng, d: usize, noise: f64) -> KernelParams {
    let ls: Vec<f64> = (0..d).map(|_| 0.3 + rng.random::<f64>()).collect();
    KernelParams::new(0.5 + 2.0 * rng.random::<f64>(), ls, noise).unwrap()
}

fn kernel_fd_check() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let params = random_params(&mut rng, 3, 0.0);
        let x: Vec<f64> = (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let xp: Vec<f64> = (0..3).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        for i in 0..3 {
            let a = kernel::dk_dx(&params, &x, &xp, i).map_err(|e| e.to_string())?;
            let f = oracle::fd_dk_dx(&params, &x, &xp, i).map_err(|e| e.to_string())?;
            let rel = (a - f).abs() / f.abs().max(1e-10);
            worst = worst.max(rel);
            if rel > 1e-5 {
                return Err(format!("first derivative fd mismatch {rel:.2e}"));
            }
            for j in 0..3 {
                let a = kernel::d4k(&params, &x, &xp, i, j).map_err(|e| e.to_string())?;
                let f = oracle::fd_d4k(&params, &x, &xp, i, j).map_err(|e| e.to_string())?;
                let scale = params.signal_variance() * params.inv_sq(i) * params.inv_sq(j);
                if (a - f).abs() > 1e-3 * f.abs() + 1e-6 * scale {
                    return Err(format!("fourth derivative fd mismatch {:.2e}", (a - f).abs()));
                }
            }
        }
    }
    Ok(format!("worst first-order fd relative error {worst:.2e}"))
}

fn power_equivalence_check() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut worst: f64 = 0.0;
    for _ in 0..12 {
        let d = 1 + (rng.random::<u32>() % 3) as usize;
        let n = (rng.random::<u32>() % 9) as usize;
        let params = random_params(&mut rng, d, 1e-4);
        let mut data = Dataset::empty(d);
        for _ in 0..n {
            data.push(
                DVector::from_fn(d, |_, _| rng.random::<f64>()),
                rng.random::<f64>(),
            )
            .map_err(|e| e.to_string())?;
        }
        let gp = GpState::new(data, params).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let fast = gp.grad_belief(&x).map_err(|e| e.to_string())?.pi_h;
        let brute = oracle::brute_force_pi_h(&gp, &x).map_err(|e| e.to_string())?;
        let rel = (fast - brute).abs() / brute.abs().max(1e-12);
        worst = worst.max(rel);
        if rel > 1e-8 {
            return Err(format!("pi_h disagreement {rel:.2e}"));
        }
    }
    Ok(format!("worst relative disagreement {worst:.2e}"))
}

fn monotonicity_check() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    for _ in 0..30 {
        let d = 1 + (rng.random::<u32>() % 3) as usize;
        let n = (rng.random::<u32>() % 7) as usize;
        let params = random_params(&mut rng, d, 1e-4);
        let mut data = Dataset::empty(d);
        for _ in 0..n {
            data.push(
                DVector::from_fn(d, |_, _| rng.random::<f64>()),
                rng.random::<f64>(),
            )
            .map_err(|e| e.to_string())?;
        }
        let gp = GpState::new(data, params).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let b = 1 + (rng.random::<u32>() % 4) as usize;
        let z: Vec<DVector<f64>> = (0..b)
            .map(|_| DVector::from_fn(d, |_, _| 2.0 * rng.random::<f64>() - 1.0))
            .collect();
        let belief = gp.grad_belief(&x).map_err(|e| e.to_string())?;
        let (pg, ph) = gp.fantasy_power(&x, &z).map_err(|e| e.to_string())?;
        if pg > belief.pi_g + 1e-8 || ph > belief.pi_h + 1e-8 {
            return Err(format!(
                "conditioning increased a power function: ({pg}, {ph}) vs ({}, {})",
                belief.pi_g, belief.pi_h
            ));
        }
    }
    Ok("fantasy conditioning never increased a power function".into())
}

fn vpc_check_run() -> Result<String, String> {
    let params = KernelParams::isotropic(1.0, 1.0, 0.0, 2).map_err(|e| e.to_string())?;
    let table = oracle::vpc_check(&params, 2, &[0.5, 0.2, 0.1]).map_err(|e| e.to_string())?;
    let prior = table.prior_g + table.prior_h;
    let mut last = f64::INFINITY;
    for row in &table.rows {
        if row.failed {
            return Err(format!("sweep row h={} failed to factorize", row.h));
        }
        let sum = row.pi_g + row.pi_h;
        if sum >= last {
            return Err("sweep is not strictly decreasing".into());
        }
        last = sum;
    }
    let floor = table.rows.last().map(|r| r.pi_g + r.pi_h).unwrap_or(f64::NAN);
    if floor >= 0.1 * prior {
        return Err(format!(
            "power sum at the finest spacing is {floor:.3e}, not below 10% of the prior {prior}"
        ));
    }
    Ok(format!("prior {prior}, finest-spacing sum {floor:.3e}"))
}

fn stencil_check() -> Result<String, String> {
    for d in 1..=6 {
        let s = oracle::make_stencil(&DVector::zeros(d), 0.1, d).map_err(|e| e.to_string())?;
        if s.points.len() != d * d + d + 1 {
            return Err(format!(
                "stencil for d={d} has {} points, expected {}",
                s.points.len(),
                d * d + d + 1
            ));
        }
    }
    Ok("cardinality d²+d+1 holds for d in 1..=6".into())
}

fn split_preservation_check() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    for _ in 0..10 {
        let d = 4 + (rng.random::<u32>() % 10) as usize;
        let m0 = 1 + (rng.random::<u32>() % 3) as usize;
        let e = subspace::new_embedding(d, m0.min(d), &mut rng).map_err(|e| e.to_string())?;
        let bounds: Vec<(f64, f64)> = (0..d).map(|_| (-3.0, 7.0)).collect();
        let rows: Vec<DVector<f64>> = (0..5)
            .map(|_| DVector::from_fn(e.target_dim(), |_, _| 2.0 * rng.random::<f64>() - 1.0))
            .collect();
        let out = e.split(&rows, &mut rng).map_err(|e| e.to_string())?;
        for (v, lv) in rows.iter().zip(&out.lifted) {
            let before = e.project_up(v, &bounds).map_err(|e| e.to_string())?;
            let after = out
                .embedding
                .project_up(lv, &bounds)
                .map_err(|e| e.to_string())?;
            if before != after {
                return Err("ambient image changed across a split".into());
            }
        }
    }
    Ok("ambient images bit-identical across splits".into())
}

fn determinism_check() -> Result<String, String> {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        [benchmark]
        function = "griewank"
        dimension = 2

        [run]
        method = "sobol_random"
        budget = 40
        init_points = 5
        seed = 123
        "#,
    )
    .map_err(|e| e.to_string())?;
    let a = run_replicate(&cfg).to_json().map_err(|e| e.to_string())?;
    let b = run_replicate(&cfg).to_json().map_err(|e| e.to_string())?;
    if a != b {
        return Err("repeated run with the same seed produced different traces".into());
    }
    Ok("byte-identical traces for repeated seeds".into())
}

fn greedy_batch_check() -> Result<String, String> {
    let params = KernelParams::isotropic(1.0, 1.0, 0.0, 2).map_err(|e| e.to_string())?;
    let gp = GpState::new(Dataset::empty(2), params).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let cfg = AcqConfig {
        raw_samples: 8,
        num_restarts: 2,
        polish_iters: 20,
        ..Default::default()
    };
    let lo = DVector::from_row_slice(&[0.0, 0.0]);
    let hi = DVector::from_row_slice(&[1.0, 1.0]);
    let sel = acquisition::select_batch(&gp, &[0.5, 0.5], 4, &cfg, &lo, &hi, &mut rng)
        .map_err(|e| e.to_string())?;
    for w in sel.values.windows(2) {
        if w[1] > w[0] + 1e-9 {
            return Err("greedy acquisition values are not non-increasing".into());
        }
    }
    if sel.values[sel.values.len() - 1] >= 10.0 {
        return Err("batch failed to reduce the prior acquisition value".into());
    }
    Ok(format!(
        "acquisition after 4 greedy picks: {:.4}",
        sel.values[sel.values.len() - 1]
    ))
}

/// Run the full property suite.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check("kernel finite-difference oracles", kernel_fd_check()),
        check("hessian power brute-force equivalence", power_equivalence_check()),
        check("conditioning monotonicity", monotonicity_check()),
        check("vanishing power functions on the stencil", vpc_check_run()),
        check("stencil cardinality", stencil_check()),
        check("embedding split preservation", split_preservation_check()),
        check("trace determinism", determinism_check()),
        check("greedy batch monotonicity", greedy_batch_check()),
    ]
}
