use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::moments::{ensemble_stats, regularized_solve, MomentFunction, StatsRequest};
use crate::rng::DEFAULT_BLOCK;

/// Score-matching estimate of `θ` for `p ∝ e^{−θᵀφ}`: solves
/// `E[∇φ∇φᵀ] θ = E[Δφ]` with sample averages.
pub fn score_matching_estimate(samples: &ParticleEnsemble, phi: &dyn MomentFunction) -> Result<Vec<f64>> {
    score_matching_estimate_with(samples, phi, 1e-7)
}

pub fn score_matching_estimate_with(
    samples: &ParticleEnsemble,
    phi: &dyn MomentFunction,
    delta: f64,
) -> Result<Vec<f64>> {
    if !phi.has_laplacian() {
        return Err(Error::Unsupported(
            "score matching needs the Laplacian of every moment".into(),
        ));
    }
    if samples.dim() != phi.dim() {
        return Err(Error::mismatch("sample dimension", phi.dim(), samples.dim()));
    }
    let req = StatsRequest {
        phi: false,
        gram: true,
        laplacian: true,
    };
    let s = ensemble_stats(samples.as_slice(), phi, req, DEFAULT_BLOCK, true)?;
    regularized_solve(&s.gram.expect("requested"), &s.lap_mean.expect("requested"), delta)
}
