use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::target::ExpFamilyTarget;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::rng::{Purpose, RngContract};

/// Acceptance rate the step size is tuned toward.
pub const OPTIMAL_ACCEPTANCE: f64 = 0.57;

/// Post-tuning acceptance below this is reported as a collapse.
pub const COLLAPSE_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MalaParams {
    /// Initial step size.
    pub h0: f64,
    pub target_acceptance: f64,
    /// Leading fraction of steps during which `h` adapts.
    pub burn_in_fraction: f64,
    pub adapt: bool,
    /// Caps the drift `h∇log p` at this many proposal standard deviations
    /// `√(2h)`. The same capped drift enters both proposal densities, so the
    /// chain stays exact; it only stops chains far in a stiff tail from
    /// proposing wildly across the mode.
    pub drift_cap: Option<f64>,
}

impl Default for MalaParams {
    fn default() -> Self {
        Self {
            h0: 0.1,
            target_acceptance: OPTIMAL_ACCEPTANCE,
            burn_in_fraction: 0.2,
            adapt: true,
            drift_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MalaOutput {
    pub samples: ParticleEnsemble,
    /// Fraction of accepted proposals after burn-in (over all steps when
    /// there is no post-burn-in phase).
    pub acceptance_rate: f64,
    pub tuned_h: f64,
    /// Acceptance fell below [`COLLAPSE_THRESHOLD`] after tuning.
    pub collapsed: bool,
}

/// Metropolis–Hastings acceptance probability
/// `min(1, π(y) q(x|y) / (π(x) q(y|x)))` from its log pieces.
pub fn mh_accept_probability(log_target_ratio: f64, log_q_reverse: f64, log_q_forward: f64) -> f64 {
    let a = log_target_ratio + log_q_reverse - log_q_forward;
    if a.is_nan() {
        0.0
    } else if a >= 0.0 {
        1.0
    } else {
        a.exp()
    }
}

/// Log density, up to a constant, of the Langevin proposal
/// `y ~ N(x + h ∇log p(x), 2h I)`.
pub fn mala_log_proposal(x: &[f64], grad_log_p_x: &[f64], y: &[f64], h: f64) -> f64 {
    let mut s = 0.0;
    for ((yi, xi), gi) in y.iter().zip(x).zip(grad_log_p_x) {
        let r = yi - xi - h * gi;
        s += r * r;
    }
    -s / (4.0 * h)
}

/// Ensemble of chains sharing a step size, with `log p` and `∇log p` cached
/// at the current states.
#[derive(Clone)]
pub(crate) struct MalaChains<'a> {
    target: &'a ExpFamilyTarget,
    pub x: Vec<f64>,
    log_p: Vec<f64>,
    grad: Vec<f64>,
    d: usize,
    pub drift_cap: Option<f64>,
}

impl<'a> MalaChains<'a> {
    pub fn new(target: &'a ExpFamilyTarget, init: ParticleEnsemble) -> Result<Self> {
        let d = target.dim();
        if init.dim() != d {
            return Err(Error::mismatch("initial ensemble dimension", d, init.dim()));
        }
        let x = init.into_states().into_raw_vec_and_offset().0;
        let n = x.len() / d;
        let mut log_p = vec![0.0; n];
        let mut grad = vec![0.0; n * d];
        let mut scratch = vec![0.0; target.phi().n_moments()];
        for i in 0..n {
            let g = &mut grad[i * d..(i + 1) * d];
            log_p[i] = -target.energy_and_grad(&x[i * d..(i + 1) * d], &mut scratch, g)?;
            g.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(Self {
            target,
            x,
            log_p,
            grad,
            d,
            drift_cap: None,
        })
    }

    pub fn n_chains(&self) -> usize {
        self.log_p.len()
    }

    /// One proposal per chain; returns the number accepted. Randomness for
    /// `step` comes from `(Mala, block, step)` streams.
    pub fn sweep(&mut self, h: f64, step: usize, rng: &RngContract) -> Result<u64> {
        let d = self.d;
        let block = rng.block_size;
        let target = self.target;
        let r = target.phi().n_moments();
        let sd = (2.0 * h).sqrt();
        let cap = self.drift_cap.map(|c| c * sd);
        // gradient with the drift `h g` clipped to `cap` in norm
        let capped = |g: &[f64], out: &mut [f64]| {
            out.copy_from_slice(g);
            if let Some(cap) = cap {
                let norm = h * g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > cap {
                    out.iter_mut().for_each(|v| *v *= cap / norm);
                }
            }
        };
        let counts: Vec<u64> = self
            .x
            .par_chunks_mut(block * d)
            .zip(self.log_p.par_chunks_mut(block))
            .zip(self.grad.par_chunks_mut(block * d))
            .enumerate()
            .map(|(b, ((xs, lps), gs))| -> Result<u64> {
                let mut s = rng.stream(Purpose::Mala, b as u64, step as u64);
                let mut y = vec![0.0; d];
                let mut gy = vec![0.0; d];
                let mut dx = vec![0.0; d];
                let mut dy = vec![0.0; d];
                let mut scratch = vec![0.0; r];
                let mut acc = 0;
                for ((x, lp), g) in xs.chunks_exact_mut(d).zip(lps.iter_mut()).zip(gs.chunks_exact_mut(d)) {
                    capped(g, &mut dx);
                    for k in 0..d {
                        let z: f64 = StandardNormal.sample(&mut s);
                        y[k] = x[k] + h * dx[k] + sd * z;
                    }
                    let u: f64 = s.random();
                    if y.iter().any(|v| !v.is_finite()) {
                        continue;
                    }
                    let lpy = -target.energy_and_grad(&y, &mut scratch, &mut gy)?;
                    gy.iter_mut().for_each(|v| *v = -*v);
                    capped(&gy, &mut dy);
                    let fwd = mala_log_proposal(x, &dx, &y, h);
                    let rev = mala_log_proposal(&y, &dy, x, h);
                    if u < mh_accept_probability(lpy - *lp, rev, fwd) {
                        x.copy_from_slice(&y);
                        g.copy_from_slice(&gy);
                        *lp = lpy;
                        acc += 1;
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        Ok(counts.iter().sum())
    }

    pub fn states(&self) -> Result<ParticleEnsemble> {
        ParticleEnsemble::from_flat(self.n_chains(), self.d, self.x.clone())
    }
}

/// Step-size update `h ← h exp(i^{−0.6} (acc − target))` at adaptation step `i ≥ 1`.
pub fn adapt_step_size(h: f64, i: usize, acceptance: f64, target: f64) -> f64 {
    h * ((i as f64).powf(-0.6) * (acceptance - target)).exp()
}

/// Runs one MALA chain per particle for `n_steps` steps. During the first
/// `burn_in_fraction` of the steps the shared step size adapts toward the
/// target acceptance from the ensemble acceptance of each sweep; it is
/// frozen afterwards.
pub fn mala_run(
    target: &ExpFamilyTarget,
    n_steps: usize,
    init: ParticleEnsemble,
    rng: &RngContract,
    params: MalaParams,
) -> Result<MalaOutput> {
    if !(params.h0 > 0.0) || !params.h0.is_finite() {
        return Err(Error::InvalidConfig(format!("initial step size must be positive, got {}", params.h0)));
    }
    if !(0.0..1.0).contains(&params.burn_in_fraction) {
        return Err(Error::InvalidConfig("burn-in fraction must lie in [0, 1)".into()));
    }
    if n_steps == 0 {
        return Err(Error::InvalidConfig("MALA needs at least one step".into()));
    }
    let mut chains = MalaChains::new(target, init)?;
    chains.drift_cap = params.drift_cap;
    let n = chains.n_chains() as f64;
    let burn = if params.adapt {
        (params.burn_in_fraction * n_steps as f64).floor() as usize
    } else {
        0
    };
    let mut h = params.h0;
    let (mut accepted, mut proposed) = (0u64, 0u64);
    let (mut all_acc, mut all_prop) = (0u64, 0u64);
    for step in 0..n_steps {
        let a = chains.sweep(h, step, rng)?;
        all_acc += a;
        all_prop += n as u64;
        if step < burn {
            h = adapt_step_size(h, step + 1, a as f64 / n, params.target_acceptance);
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::Diverged {
                    step,
                    residual: f64::NAN,
                });
            }
        } else {
            accepted += a;
            proposed += n as u64;
        }
    }
    let acceptance_rate = if proposed > 0 {
        accepted as f64 / proposed as f64
    } else {
        all_acc as f64 / all_prop as f64
    };
    Ok(MalaOutput {
        samples: chains.states()?,
        acceptance_rate,
        tuned_h: h,
        collapsed: acceptance_rate < COLLAPSE_THRESHOLD,
    })
}
