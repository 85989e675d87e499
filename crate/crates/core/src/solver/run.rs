use rand_distr::{Distribution, StandardNormal};

use super::config::{EntropyMultiplier, MgdConfig};
use super::trace::{gaussian_entropy, SolverTrace, StepRecord};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::moments::{ensemble_stats, regularized_solve, GramMatrix, MomentFunction, StatsRequest};
use crate::moments::gram::StatsScratch;
use crate::path::MomentPath;
use crate::reduce::block_update_sum;
use crate::rng::{Purpose, RngContract};

/// Per-run constants shared by the particle passes.
pub(crate) struct Stepper<'a> {
    pub phi: &'a dyn MomentFunction,
    pub d: usize,
    pub r: usize,
    pub h: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub rng: RngContract,
    pub deterministic: bool,
}

/// Ensemble averages after a pass.
pub(crate) struct PassStats {
    pub phi_mean: Vec<f64>,
    pub gram: GramMatrix,
    pub lap_mean: Option<Vec<f64>>,
}

impl<'a> Stepper<'a> {
    pub fn new(config: &MgdConfig, phi: &'a dyn MomentFunction) -> Self {
        Self {
            phi,
            d: phi.dim(),
            r: phi.n_moments(),
            h: config.step_size(),
            sigma: config.sigma2.sqrt(),
            epsilon: config.epsilon_confine,
            rng: config.rng(),
            deterministic: config.deterministic,
        }
    }

    fn request(laplacian: bool) -> StatsRequest {
        StatsRequest {
            phi: true,
            gram: true,
            laplacian,
        }
    }

    pub fn stats(&self, states: &[f64], laplacian: bool) -> Result<PassStats> {
        let s = ensemble_stats(
            states,
            self.phi,
            Self::request(laplacian),
            self.rng.block_size,
            self.deterministic,
        )?;
        Ok(PassStats {
            phi_mean: s.phi_mean.expect("requested"),
            gram: s.gram.expect("requested"),
            lap_mean: s.lap_mean,
        })
    }

    /// Block partial sums of a predictor pass, `y ← x + h ηᵀ∇φ(x) − hεx + √(2h)σξ`.
    ///
    /// `first_block` is the global index of the first particle block, so a
    /// batch of particles draws the same noise as inside a full ensemble.
    pub fn predictor_blocks(
        &self,
        x: &[f64],
        y: &mut [f64],
        eta: &[f64],
        step: usize,
        first_block: usize,
    ) -> Result<Vec<f64>> {
        let (d, r) = (self.d, self.r);
        let block = self.rng.block_size;
        let req = Self::request(false);
        let noise_scale = (2.0 * self.h).sqrt() * self.sigma;
        block_update_sum(y, d, block, StatsScratch::acc_len(r), self.deterministic, |b, rows, acc| {
            let xs = &x[b * block * d..b * block * d + rows.len()];
            let mut stream = self.rng.stream(Purpose::PredictorNoise, (first_block + b) as u64, step as u64);
            let mut g = vec![0.0; d];
            let mut scratch = StatsScratch::new(self.phi, req);
            for (xi, yi) in xs.chunks_exact(d).zip(rows.chunks_exact_mut(d)) {
                self.phi.vjp(xi, eta, &mut g)?;
                for q in 0..d {
                    let mut v = xi[q] + self.h * g[q] - self.h * self.epsilon * xi[q];
                    if noise_scale > 0.0 {
                        let xi_n: f64 = StandardNormal.sample(&mut stream);
                        v += noise_scale * xi_n;
                    }
                    yi[q] = v;
                }
                check_row(yi, step)?;
            }
            scratch.add_rows(self.phi, rows, acc)
        })
    }

    /// Block partial sums of a corrector pass, `x ← y − sign · cᵀ∇φ(y)`.
    pub fn corrector_blocks(
        &self,
        y: &[f64],
        x: &mut [f64],
        c: &[f64],
        sign: f64,
        laplacian: bool,
        step: usize,
    ) -> Result<Vec<f64>> {
        let (d, r) = (self.d, self.r);
        let block = self.rng.block_size;
        let req = Self::request(laplacian);
        block_update_sum(x, d, block, StatsScratch::acc_len(r), self.deterministic, |b, rows, acc| {
            let ys = &y[b * block * d..b * block * d + rows.len()];
            let mut g = vec![0.0; d];
            let mut scratch = StatsScratch::new(self.phi, req);
            for (yi, xi) in ys.chunks_exact(d).zip(rows.chunks_exact_mut(d)) {
                self.phi.vjp(yi, c, &mut g)?;
                for q in 0..d {
                    xi[q] = yi[q] - sign * g[q];
                }
                check_row(xi, step)?;
            }
            scratch.add_rows(self.phi, rows, acc)
        })
    }

    pub fn finish(&self, acc: Vec<f64>, n: usize, laplacian: bool) -> Result<PassStats> {
        let s = StatsScratch::finish(Self::request(laplacian), self.r, acc, n)?;
        Ok(PassStats {
            phi_mean: s.phi_mean.expect("requested"),
            gram: s.gram.expect("requested"),
            lap_mean: s.lap_mean,
        })
    }
}

fn check_row(row: &[f64], step: usize) -> Result<()> {
    if row.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("particle state at step {step}")))
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Where the predictor multiplier comes from.
pub(crate) enum Drift<'a> {
    /// Solve `Ĝ η̂ = dm/dt` on the current ensemble.
    Solve,
    /// Precomputed `η̃` per grid time.
    Table(&'a [Vec<f64>]),
}

/// Runs the predictor–corrector scheme from `init` along `path`.
pub fn mgd_run(
    config: &MgdConfig,
    phi: &dyn MomentFunction,
    path: &MomentPath,
    init: ParticleEnsemble,
) -> Result<(ParticleEnsemble, SolverTrace)> {
    run_with_drift(config, phi, path, init, Drift::Solve)
}

pub(crate) fn run_with_drift(
    config: &MgdConfig,
    phi: &dyn MomentFunction,
    path: &MomentPath,
    init: ParticleEnsemble,
    drift: Drift<'_>,
) -> Result<(ParticleEnsemble, SolverTrace)> {
    config.validate()?;
    let n_steps = config.n_steps();
    if path.n_steps() != n_steps {
        return Err(Error::mismatch("moment path steps", n_steps, path.n_steps()));
    }
    if path.n_moments() != phi.n_moments() {
        return Err(Error::mismatch("moment path width", phi.n_moments(), path.n_moments()));
    }
    if init.dim() != phi.dim() {
        return Err(Error::mismatch("initial ensemble dimension", phi.dim(), init.dim()));
    }
    if init.n_rep() != config.n_rep {
        return Err(Error::mismatch("initial ensemble size", config.n_rep, init.n_rep()));
    }
    if let Drift::Table(t) = &drift {
        if t.len() < n_steps {
            return Err(Error::mismatch("drift table length", n_steps, t.len()));
        }
    }
    let st = Stepper::new(config, phi);
    let n = init.n_rep();
    let d = st.d;
    let sigma2 = config.sigma2;
    let h = st.h;

    let use_laplacian = match config.entropy_multiplier {
        EntropyMultiplier::Laplacian => {
            if !phi.has_laplacian() {
                return Err(Error::Unsupported(
                    "Laplacian entropy multiplier needs a moment function with a Laplacian".into(),
                ));
            }
            true
        }
        // the corrector multiplier degenerates without noise
        EntropyMultiplier::Corrector => sigma2 == 0.0 && phi.has_laplacian(),
    };

    let mut trace = SolverTrace::new(config.h0_entropy.unwrap_or_else(|| gaussian_entropy(d)));
    if sigma2 == 0.0 && !use_laplacian {
        trace.bound_valid = false;
    }

    let mut x = init.into_states().into_raw_vec_and_offset().0;
    let mut y = vec![0.0; x.len()];
    let mut at_x = st.stats(&x, use_laplacian)?;

    for k in 0..n_steps {
        let target = path.value(k + 1);
        let diverged = |e: Error, res: f64| match e {
            Error::NonFinite(_) => Error::Diverged { step: k, residual: res },
            other => other,
        };
        let last_res = trace.steps.last().map_or(0.0, |s| s.moment_residual);

        let eta = match &drift {
            Drift::Solve => regularized_solve(&at_x.gram, path.diff(k), config.delta)
                .map_err(|e| diverged(e, last_res))?,
            Drift::Table(t) => t[k].clone(),
        };
        let theta_lap = if use_laplacian {
            Some(regularized_solve(&at_x.gram, at_x.lap_mean.as_ref().expect("requested"), config.delta)?)
        } else {
            None
        };

        let acc = st
            .predictor_blocks(&x, &mut y, &eta, k, 0)
            .map_err(|e| diverged(e, last_res))?;
        let at_y = st.finish(acc, n, false).map_err(|e| diverged(e, last_res))?;
        let before = sub(&at_y.phi_mean, target);
        let res_before = sup_distance(&at_y.phi_mean, target);
        let nu = regularized_solve(&at_y.gram, &before, config.delta).map_err(|e| diverged(e, res_before))?;

        let acc = st
            .corrector_blocks(&y, &mut x, &nu, 1.0, use_laplacian, k)
            .map_err(|e| diverged(e, res_before))?;
        let mut next = st.finish(acc, n, use_laplacian).map_err(|e| diverged(e, res_before))?;
        let mut res = sup_distance(&next.phi_mean, target);
        let mut sign = 1.0;
        let floor = 1e-13 * target.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if !(res < res_before) && res_before > floor {
            let mut x_alt = vec![0.0; x.len()];
            let alt = st
                .corrector_blocks(&y, &mut x_alt, &nu, -1.0, use_laplacian, k)
                .and_then(|acc| st.finish(acc, n, use_laplacian));
            if let Ok(alt) = alt {
                let res_alt = sup_distance(&alt.phi_mean, target);
                if res_alt < res {
                    x = x_alt;
                    next = alt;
                    res = res_alt;
                    sign = -1.0;
                }
            }
        }
        if !res.is_finite() {
            return Err(Error::Diverged { step: k, residual: res });
        }

        let theta: Vec<f64> = match theta_lap {
            Some(t) => t,
            None if sigma2 > 0.0 => nu.iter().map(|v| sign * v / (h * sigma2)).collect(),
            None => vec![0.0; st.r],
        };
        let m_k = path.value(k);
        let increment: f64 = theta
            .iter()
            .zip(target.iter().zip(m_k))
            .map(|(t, (a, b))| t * (a - b))
            .sum();
        trace.push(StepRecord {
            k,
            t: path.time(k + 1),
            eta,
            theta,
            moment_residual: res,
            entropy_increment: increment,
            entropy_partial_sum: 0.0,
            corrector_flipped: sign < 0.0,
        });
        at_x = next;
    }
    let out = ParticleEnsemble::from_flat(n, d, x)?;
    Ok((out, trace))
}
