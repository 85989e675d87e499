//! Closed-form Gaussian references: interpolant covariances, their drift and
//! an exact sampler.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::{E, TAU};

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::interpolant::InterpolantSchedule;
use crate::rng::{Purpose, RngContract};

fn check_spd(c: &DMatrix<f64>, what: &str) -> Result<()> {
    if !c.is_square() {
        return Err(Error::InvalidConfig(format!("{what} is not square")));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    let scale = c.amax().max(f64::MIN_POSITIVE);
    if (c - c.transpose()).amax() > 1e-12 * scale {
        return Err(Error::Domain(format!("{what} is not symmetric")));
    }
    if c.clone().cholesky().is_none() {
        return Err(Error::Domain(format!("{what} is not positive definite")));
    }
    Ok(())
}

/// `C_t = cos²(α_t) C0 + sin²(α_t) C1`, the covariance of `cos α_t Z + sin α_t X`
/// for independent centered `Z ~ C0`, `X ~ C1`.
pub fn interpolant_covariance(
    c0: &DMatrix<f64>,
    c1: &DMatrix<f64>,
    t: f64,
    sched: &InterpolantSchedule,
) -> Result<DMatrix<f64>> {
    check_spd(c0, "C0")?;
    check_spd(c1, "C1")?;
    if c0.shape() != c1.shape() {
        return Err(Error::mismatch("covariance size", c0.nrows(), c1.nrows()));
    }
    let (c, s) = sched.coefficients(t)?;
    Ok(c0 * (c * c) + c1 * (s * s))
}

/// `dC_t/dt = α̇_t sin(2α_t) (C1 − C0)`.
pub fn interpolant_covariance_rate(
    c0: &DMatrix<f64>,
    c1: &DMatrix<f64>,
    t: f64,
    sched: &InterpolantSchedule,
) -> Result<DMatrix<f64>> {
    let (c, s) = sched.coefficients(t)?;
    Ok((c1 - c0) * (2.0 * sched.alpha_dot(t) * c * s))
}

/// Linear drift coefficient of the 1D Gaussian MGD SDE,
/// `dX = (½ Ċ_t/C_t − σ²/C_t) X dt + √2 σ dW`.
pub fn gaussian_drift_1d(c0: f64, c1: f64, t: f64, sigma2: f64, sched: &InterpolantSchedule) -> Result<f64> {
    if !(c0 > 0.0 && c1 > 0.0) {
        return Err(Error::Domain("variances must be positive".into()));
    }
    let (c, s) = sched.coefficients(t)?;
    let ct = c * c * c0 + s * s * c1;
    let rate = 2.0 * sched.alpha_dot(t) * c * s * (c1 - c0);
    Ok(0.5 * rate / ct - sigma2 / ct)
}

/// `½ log det(2πe C)`.
pub fn gaussian_entropy_of(cov: &DMatrix<f64>) -> Result<f64> {
    check_spd(cov, "covariance")?;
    let chol = cov.clone().cholesky().expect("checked");
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(0.5 * (cov.nrows() as f64 * (TAU * E).ln() + log_det))
}

/// Exact sampler for `N(mean, cov)` via a Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        check_spd(cov, "covariance")?;
        if mean.len() != cov.nrows() {
            return Err(Error::mismatch("mean length", cov.nrows(), mean.len()));
        }
        let chol = cov.clone().cholesky().expect("checked").l();
        Ok(Self { mean, chol })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `n` draws; particle blocks use independent [`Purpose::Dataset`] streams.
    pub fn sample(&self, n: usize, rng: &RngContract) -> Result<ParticleEnsemble> {
        let d = self.dim();
        let mut out = vec![0.0; n * d];
        let mut z = vec![0.0; d];
        for (b, chunk) in out.chunks_mut(rng.block_size * d).enumerate() {
            let mut s = rng.stream(Purpose::Dataset, b as u64, 0);
            for row in chunk.chunks_exact_mut(d) {
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(&mut s);
                }
                for i in 0..d {
                    let mut acc = self.mean[i];
                    for j in 0..=i {
                        acc += self.chol[(i, j)] * z[j];
                    }
                    row[i] = acc;
                }
            }
        }
        ParticleEnsemble::from_flat(n, d, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(d: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |i, j| ((i * 3 + j * 5) % 7) as f64 / 7.0 - 0.4);
        &a * a.transpose() + DMatrix::identity(d, d) * 0.5
    }

    #[test]
    fn endpoints_and_midpoint() {
        let sched = InterpolantSchedule::Linear;
        let (c0, c1) = (DMatrix::identity(3, 3), spd(3));
        assert!((interpolant_covariance(&c0, &c1, 0.0, &sched).unwrap() - &c0).amax() < 1e-15);
        assert!((interpolant_covariance(&c0, &c1, 1.0, &sched).unwrap() - &c1).amax() < 1e-15);
        let mid = interpolant_covariance(&c0, &c1, 0.5, &sched).unwrap();
        assert!((mid - (&c0 + &c1) * 0.5).amax() < 1e-15);
    }

    #[test]
    fn path_stays_positive_definite() {
        let sched = InterpolantSchedule::Linear;
        let (c0, c1) = (spd(4), DMatrix::identity(4, 4) * 1e-3);
        for i in 0..=50 {
            let c = interpolant_covariance(&c0, &c1, i as f64 / 50.0, &sched).unwrap();
            assert!(c.symmetric_eigenvalues().min() >= 0.0);
        }
    }

    #[test]
    fn rate_matches_finite_differences() {
        let sched = InterpolantSchedule::Linear;
        let (c0, c1) = (DMatrix::identity(2, 2), spd(2));
        let (t, e) = (0.3, 1e-6);
        let fd = (interpolant_covariance(&c0, &c1, t + e, &sched).unwrap()
            - interpolant_covariance(&c0, &c1, t - e, &sched).unwrap())
            / (2.0 * e);
        assert!((fd - interpolant_covariance_rate(&c0, &c1, t, &sched).unwrap()).amax() < 1e-8);
    }

    #[test]
    fn drift_keeps_the_variance_on_the_path() {
        // d/dt E[X²] = 2 a_t C_t + 2σ² must equal Ċ_t
        let sched = InterpolantSchedule::Linear;
        for &(t, s2) in &[(0.2, 0.0), (0.5, 1.0), (0.9, 3.0)] {
            let a = gaussian_drift_1d(1.0, 4.0, t, s2, &sched).unwrap();
            let (c, s) = sched.coefficients(t).unwrap();
            let ct = c * c + 4.0 * s * s;
            let rate = 2.0 * sched.alpha_dot(t) * c * s * 3.0;
            assert!((2.0 * a * ct + 2.0 * s2 - rate).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_of_diagonal_covariance() {
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let h = gaussian_entropy_of(&c).unwrap();
        assert!((h - ((TAU * E).ln() + 0.5 * 4f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn sampler_reproduces_covariance() {
        let c = spd(3);
        let g = GaussianSampler::new(DVector::zeros(3), &c).unwrap();
        let e = g.sample(200_000, &RngContract::new(9)).unwrap();
        let emp = e.covariance();
        for i in 0..3 {
            for j in 0..3 {
                let se = ((c[(i, i)] * c[(j, j)] + c[(i, j)].powi(2)) / 200_000.0).sqrt();
                assert!((emp[i * 3 + j] - c[(i, j)]).abs() < 4.0 * se);
            }
        }
    }

    #[test]
    fn non_spd_inputs_are_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let id = DMatrix::identity(2, 2);
        let sched = InterpolantSchedule::Linear;
        assert!(interpolant_covariance(&bad, &id, 0.5, &sched).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(interpolant_covariance(&id, &asym, 0.5, &sched).is_err());
        assert!(GaussianSampler::new(DVector::zeros(2), &bad).is_err());
    }
}
