use rand_distr::{Distribution, StandardNormal};

use super::config::MgdConfig;
use super::run::{sub, Stepper};
use crate::error::{Error, Result};
use crate::moments::gram::StatsScratch;
use crate::moments::{regularized_solve, MomentFunction};
use crate::path::MomentPath;
use crate::reduce::block_sum;
use crate::rng::{Purpose, RngContract};

/// Per-step multipliers learned without holding the ensemble in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub sigma2: f64,
    pub epsilon_confine: f64,
    /// Predictor multipliers `η̂_k`.
    pub eta: Vec<Vec<f64>>,
    /// Corrector weights `c_k`: `x_{k+1} = y − c_kᵀ∇φ(y)`.
    pub correction: Vec<Vec<f64>>,
    /// `θ̂_k = c_k / (hσ²)` (zero when σ = 0).
    pub theta: Vec<Vec<f64>>,
}

impl CoefficientTable {
    pub fn n_steps(&self) -> usize {
        self.eta.len()
    }

    /// Sum of `θ̂_kᵀ (m_{k+1} − m_k)`.
    pub fn entropy_increment(&self, path: &MomentPath) -> f64 {
        let mut s = 0.0;
        for (k, th) in self.theta.iter().enumerate() {
            for (q, t) in th.iter().enumerate() {
                s += t * (path.value(k + 1)[q] - path.value(k)[q]);
            }
        }
        s
    }

    /// Draws one particle from a standard Gaussian start using only `O(d)`
    /// working memory. `id` selects an independent random stream.
    pub fn sample_particle(&self, phi: &dyn MomentFunction, seed: u64, id: u64) -> Result<Vec<f64>> {
        let d = phi.dim();
        let n = self.n_steps();
        let h = 1.0 / n as f64;
        let noise_scale = (2.0 * h * self.sigma2).sqrt();
        let mut stream = RngContract::new(seed).stream(Purpose::Offline, id, 0);
        let mut x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut stream)).collect();
        let mut y = vec![0.0; d];
        let mut g = vec![0.0; d];
        for k in 0..n {
            phi.vjp(&x, &self.eta[k], &mut g)?;
            for q in 0..d {
                y[q] = x[q] + h * g[q] - h * self.epsilon_confine * x[q];
                if noise_scale > 0.0 {
                    let e: f64 = StandardNormal.sample(&mut stream);
                    y[q] += noise_scale * e;
                }
            }
            phi.vjp(&y, &self.correction[k], &mut g)?;
            for q in 0..d {
                x[q] = y[q] - g[q];
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { step: k, residual: f64::NAN });
            }
        }
        Ok(x)
    }
}

/// Learns `{η̂_k, c_k}` step by step, regenerating `n_batches` batches from
/// their seeds and propagating each to `t_k` with the coefficients found so
/// far. Only one batch is held in memory at a time.
///
/// With the same seed and block size, the batches reproduce exactly the
/// particles of [`super::mgd_run`] started from
/// [`crate::ParticleEnsemble::standard_normal`], so the coefficients agree
/// with that run's trace.
pub fn learn_coefficients_offline(
    config: &MgdConfig,
    phi: &dyn MomentFunction,
    path: &MomentPath,
    n_batches: usize,
) -> Result<CoefficientTable> {
    config.validate()?;
    if n_batches == 0 {
        return Err(Error::InvalidConfig("need at least one batch".into()));
    }
    let n_steps = config.n_steps();
    if path.n_steps() != n_steps {
        return Err(Error::mismatch("moment path steps", n_steps, path.n_steps()));
    }
    let n = config.n_rep;
    let block = config.block_size;
    let n_blocks = n.div_ceil(block);
    if n_blocks % n_batches != 0 {
        return Err(Error::InvalidConfig(format!(
            "{n_batches} batches must evenly split {n_blocks} particle blocks"
        )));
    }
    let blocks_per_batch = n_blocks / n_batches;
    let st = Stepper::new(config, phi);
    let (d, r) = (st.d, st.r);
    let h = st.h;
    let rng = config.rng();

    let mut table = CoefficientTable {
        sigma2: config.sigma2,
        epsilon_confine: config.epsilon_confine,
        eta: Vec::with_capacity(n_steps),
        correction: Vec::with_capacity(n_steps),
        theta: Vec::with_capacity(n_steps),
    };

    // Regenerates batch `b` and moves it to `t_k`; returns (x_k, y_k) where
    // y_k is the predictor output at step k when `eta_k` is given.
    let propagate = |b: usize, k: usize, table: &CoefficientTable, eta_k: Option<&[f64]>| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let lo = b * blocks_per_batch * block;
        let hi = ((b + 1) * blocks_per_batch * block).min(n);
        let first_block = b * blocks_per_batch;
        let mut x = initial_batch(&rng, d, lo, hi, first_block);
        let mut y = vec![0.0; x.len()];
        let mut partial = Vec::new();
        for l in 0..k {
            st.predictor_blocks(&x, &mut y, &table.eta[l], l, first_block)?;
            st.corrector_blocks(&y, &mut x, &table.correction[l], 1.0, false, l)?;
        }
        if let Some(eta) = eta_k {
            partial = st.predictor_blocks(&x, &mut y, eta, k, first_block)?;
        }
        Ok((x, y, partial))
    };

    for k in 0..n_steps {
        // pass 1: Gram at x_k
        let mut acc = vec![0.0; StatsScratch::acc_len(r)];
        for b in 0..n_batches {
            let (x, _, _) = propagate(b, k, &table, None)?;
            add_block_partials(&st, &x, &mut acc)?;
        }
        let at_x = st.finish(acc, n, false)?;
        let eta = regularized_solve(&at_x.gram, path.diff(k), config.delta)?;

        // pass 2: predictor output, its Gram and mean moments
        let mut acc = vec![0.0; StatsScratch::acc_len(r)];
        for b in 0..n_batches {
            let (_, _, partial) = propagate(b, k, &table, Some(&eta))?;
            for (a, p) in acc.iter_mut().zip(&partial) {
                *a += p;
            }
        }
        let at_y = st.finish(acc, n, false)?;
        let residual = sub(&at_y.phi_mean, path.value(k + 1));
        let c = regularized_solve(&at_y.gram, &residual, config.delta)?;
        let theta = if config.sigma2 > 0.0 {
            c.iter().map(|v| v / (h * config.sigma2)).collect()
        } else {
            vec![0.0; r]
        };
        table.eta.push(eta);
        table.correction.push(c);
        table.theta.push(theta);
    }
    Ok(table)
}

/// Standard Gaussian states for particles `lo..hi`, drawn exactly as in
/// [`crate::ParticleEnsemble::standard_normal`].
fn initial_batch(rng: &RngContract, d: usize, lo: usize, hi: usize, first_block: usize) -> Vec<f64> {
    let mut x = vec![0.0; (hi - lo) * d];
    let block = rng.block_size;
    for (i, chunk) in x.chunks_mut(block * d).enumerate() {
        let mut s = rng.stream(Purpose::Init, (first_block + i) as u64, 0);
        for v in chunk.iter_mut() {
            *v = StandardNormal.sample(&mut s);
        }
    }
    x
}

/// Adds block partial sums for `x` into `acc` in block order, matching the
/// fold of a full-ensemble pass.
fn add_block_partials(st: &Stepper<'_>, x: &[f64], acc: &mut [f64]) -> Result<()> {
    let d = st.d;
    let block = st.rng.block_size;
    let n = x.len() / d;
    let n_blocks = n.div_ceil(block);
    for b in 0..n_blocks {
        let lo = b * block;
        let part = block_sum(((b + 1) * block).min(n) - lo, block, acc.len(), true, |range, a| {
            let mut scratch = StatsScratch::new(st.phi, crate::moments::StatsRequest::PHI_GRAM);
            scratch.add_rows(st.phi, &x[(lo + range.start) * d..(lo + range.end) * d], a)
        })?;
        for (a, p) in acc.iter_mut().zip(&part) {
            *a += p;
        }
    }
    Ok(())
}
