use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::target::ExpFamilyTarget;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::rng::{Purpose, RngContract};

/// Euler–Maruyama for `dX = −σ² ∇(θᵀφ)(X) dt + √2 σ dW`, every particle an
/// independent chain. Each particle block consumes one stream across all steps.
pub fn langevin_run(
    target: &ExpFamilyTarget,
    sigma2: f64,
    n_steps: usize,
    h: f64,
    init: ParticleEnsemble,
    rng: &RngContract,
) -> Result<ParticleEnsemble> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidConfig(format!("step size must be positive, got {h}")));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidConfig(format!("σ² must be non-negative, got {sigma2}")));
    }
    let d = target.dim();
    if init.dim() != d {
        return Err(Error::mismatch("initial ensemble dimension", d, init.dim()));
    }
    let n = init.n_rep();
    let mut x = init.into_states().into_raw_vec_and_offset().0;
    let drift = h * sigma2;
    let noise = (2.0 * h * sigma2).sqrt();
    x.par_chunks_mut(rng.block_size * d)
        .enumerate()
        .try_for_each(|(b, chunk)| -> Result<()> {
            let mut s = rng.stream(Purpose::Langevin, b as u64, 0);
            let mut g = vec![0.0; d];
            for step in 0..n_steps {
                for xi in chunk.chunks_exact_mut(d) {
                    target.grad_energy(xi, &mut g)?;
                    for (v, gv) in xi.iter_mut().zip(&g) {
                        let z: f64 = StandardNormal.sample(&mut s);
                        *v += -drift * gv + noise * z;
                    }
                    if xi.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Diverged {
                            step,
                            residual: f64::INFINITY,
                        });
                    }
                }
            }
            Ok(())
        })?;
    ParticleEnsemble::from_flat(n, d, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::QuadraticMap;
    use std::sync::Arc;

    fn gaussian_target(theta: f64) -> ExpFamilyTarget {
        ExpFamilyTarget::new(vec![theta], Arc::new(QuadraticMap::new(1).unwrap())).unwrap()
    }

    fn var(e: &ParticleEnsemble) -> f64 {
        e.covariance()[0]
    }

    #[test]
    fn stationary_law_is_the_target() {
        let n = 40_000;
        let t = gaussian_target(0.5);
        let rng = RngContract::new(1);
        let init = ParticleEnsemble::standard_normal(n, 1, &rng).unwrap();
        let out = langevin_run(&t, 1.0, 2000, 0.005, init, &rng).unwrap();
        // Euler–Maruyama on an OU process has stationary variance 1/(1 − h/2)
        let mc = 4.0 * (2.0 / n as f64).sqrt();
        assert!((var(&out) - 1.0 / (1.0 - 0.0025)).abs() < mc, "{}", var(&out));
    }

    #[test]
    fn halving_the_step_barely_moves_the_variance() {
        let n = 40_000;
        let t = gaussian_target(0.5);
        let rng = RngContract::new(2);
        let init = ParticleEnsemble::standard_normal(n, 1, &rng).unwrap();
        let a = langevin_run(&t, 1.0, 1000, 0.01, init.clone(), &rng).unwrap();
        let b = langevin_run(&t, 1.0, 2000, 0.005, init, &rng).unwrap();
        let mc = 4.0 * (2.0 / n as f64).sqrt();
        assert!((var(&a) - var(&b)).abs() < 2.0 * mc);
    }

    #[test]
    fn zero_theta_is_brownian_motion() {
        let n = 40_000;
        let t = gaussian_target(0.0);
        let rng = RngContract::new(3);
        let init = ParticleEnsemble::from_flat(n, 1, vec![0.0; n]).unwrap();
        let (s2, steps, h) = (1.5, 200, 0.01);
        let out = langevin_run(&t, s2, steps, h, init, &rng).unwrap();
        let expect = 2.0 * s2 * steps as f64 * h;
        assert!((var(&out) - expect).abs() < 4.0 * expect * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn same_seed_same_chains() {
        let t = gaussian_target(0.5);
        let rng = RngContract::new(4);
        let init = ParticleEnsemble::standard_normal(1000, 1, &rng).unwrap();
        let a = langevin_run(&t, 1.0, 50, 0.01, init.clone(), &rng).unwrap();
        let b = langevin_run(&t, 1.0, 50, 0.01, init, &rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unstable_steps_diverge() {
        let t = gaussian_target(0.5);
        let rng = RngContract::new(5);
        let init = ParticleEnsemble::standard_normal(10, 1, &rng).unwrap();
        let err = langevin_run(&t, 1.0, 10_000, 10.0, init, &rng).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
        let init = ParticleEnsemble::standard_normal(10, 1, &rng).unwrap();
        assert!(langevin_run(&t, 1.0, 1, 0.0, init, &rng).is_err());
    }
}
