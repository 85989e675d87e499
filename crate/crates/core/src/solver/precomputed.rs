use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::MgdConfig;
use super::run::{run_with_drift, Drift};
use super::trace::SolverTrace;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::interpolant::InterpolantSchedule;
use crate::moments::gram::add_outer_upper;
use crate::moments::MomentFunction;
use crate::path::MomentPath;
use crate::rng::{Purpose, RngContract};

/// Gradient iterations for the transport regression.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdParams {
    /// Interpolant samples per iteration.
    pub batch: usize,
    /// Iterations at each grid time (warm-started from the previous time).
    pub iters_per_time: usize,
    /// Fixed learning rate; `None` uses `1/trace(Ĝ_batch)` at every iteration.
    pub learning_rate: Option<f64>,
    /// Gradient norms above this abort the fit.
    pub max_grad_norm: f64,
}

impl Default for SgdParams {
    fn default() -> Self {
        Self {
            batch: 512,
            iters_per_time: 20,
            learning_rate: None,
            max_grad_norm: 1e12,
        }
    }
}

/// Fits `η̃_{t_k} = argmin E|η̃ᵀ∇φ(I_t) − İ_t|²` at each grid time
/// `t_k = k/n_steps`, `k = 0..n_steps`.
pub fn fit_transport_drift(
    phi: &dyn MomentFunction,
    n_steps: usize,
    dataset: &ParticleEnsemble,
    sched: &InterpolantSchedule,
    params: &SgdParams,
    rng: &RngContract,
) -> Result<Vec<Vec<f64>>> {
    if params.batch == 0 || params.iters_per_time == 0 {
        return Err(Error::InvalidConfig("SGD batch and iteration counts must be positive".into()));
    }
    if n_steps == 0 {
        return Err(Error::InvalidConfig("need at least one step".into()));
    }
    let (d, r) = (phi.dim(), phi.n_moments());
    if dataset.dim() != d {
        return Err(Error::mismatch("dataset dimension", d, dataset.dim()));
    }
    let n_data = dataset.n_rep();
    let mut eta = vec![0.0; r];
    let mut table = Vec::with_capacity(n_steps + 1);
    let mut jac = vec![0.0; r * d];
    let mut z = vec![0.0; d];
    let mut state = vec![0.0; d];
    let mut velocity = vec![0.0; d];
    for k in 0..=n_steps {
        let t = if k == n_steps { 1.0 } else { k as f64 / n_steps as f64 };
        let (c, s) = sched.coefficients(t)?;
        let (dc, ds) = sched.coefficient_rates(t)?;
        for it in 0..params.iters_per_time {
            let mut stream = rng.stream(Purpose::Regression, it as u64, k as u64);
            let mut g = vec![0.0; r * r];
            let mut b = vec![0.0; r];
            for _ in 0..params.batch {
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(&mut stream);
                }
                let xi = dataset.row(stream.random_range(0..n_data));
                for q in 0..d {
                    state[q] = c * z[q] + s * xi[q];
                    velocity[q] = dc * z[q] + ds * xi[q];
                }
                phi.jacobian(&state, &mut jac)?;
                add_outer_upper(&jac, r, d, &mut g);
                for (bk, row) in b.iter_mut().zip(jac.chunks_exact(d)) {
                    *bk += row.iter().zip(&velocity).map(|(a, v)| a * v).sum::<f64>();
                }
            }
            let inv = 1.0 / params.batch as f64;
            for a in 0..r {
                for l in a..r {
                    let v = g[a * r + l] * inv;
                    g[a * r + l] = v;
                    g[l * r + a] = v;
                }
                b[a] *= inv;
            }
            // ∇ ½E|Jᵀη − İ|² = Ĝη − E[J İ]
            let grad: Vec<f64> = (0..r)
                .map(|a| (0..r).map(|l| g[a * r + l] * eta[l]).sum::<f64>() - b[a])
                .collect();
            let norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() || norm > params.max_grad_norm {
                return Err(Error::OptimizerDiverged(format!(
                    "gradient norm {norm:e} at t = {t}, iteration {it}"
                )));
            }
            let trace: f64 = (0..r).map(|a| g[a * r + a]).sum();
            let lr = match params.learning_rate {
                Some(lr) => lr,
                None if trace > 0.0 => 1.0 / trace,
                None => 0.0,
            };
            for (e, gr) in eta.iter_mut().zip(&grad) {
                *e -= lr * gr;
            }
        }
        table.push(eta.clone());
    }
    Ok(table)
}

/// Predictor driven by a drift fitted on interpolant samples, followed by
/// the usual corrector.
pub fn mgd_run_precomputed(
    config: &MgdConfig,
    phi: &dyn MomentFunction,
    path: &MomentPath,
    dataset: &ParticleEnsemble,
    sched: &InterpolantSchedule,
    params: &SgdParams,
    init: ParticleEnsemble,
) -> Result<(ParticleEnsemble, SolverTrace)> {
    config.validate()?;
    let table = fit_transport_drift(phi, config.n_steps(), dataset, sched, params, &config.rng())?;
    run_with_drift(config, phi, path, init, Drift::Table(&table))
}
