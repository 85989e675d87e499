//! Entropy and KL estimates, Gaussian references and diagnostics for samples.

mod density;
mod gaussian;
mod histogram;
mod series;
mod welch;

pub use density::{Density1D, DEFAULT_NODES};
pub use gaussian::{
    gaussian_drift_1d, gaussian_entropy_of, interpolant_covariance, interpolant_covariance_rate, GaussianSampler,
};
pub use histogram::{
    histogram_entropy, kl_histogram, kl_histogram_corrected, kl_to_density, kl_vs_density, Histogram1D, DEFAULT_BINS, MASS_FLOOR,
};
pub use series::{loglog_rate_fit, rolling_volatility, RateFit};
pub use welch::{gaussian_entropy_rate, negentropy_estimate, welch_psd, GaussianReference, WelchParams, PSD_FLOOR};

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::scattering::{wavelet_transform, FilterBank};

/// Pooled equal-mass histogram of `Re(x ∗ ψ_λ)` over every field and position.
pub fn wavelet_marginal_histogram(
    fields: &ParticleEnsemble,
    bank: &FilterBank,
    channel: usize,
    n_bins: usize,
) -> Result<Histogram1D> {
    if fields.dim() != bank.size() {
        return Err(Error::mismatch("field size", bank.size(), fields.dim()));
    }
    if channel >= bank.channels().len() {
        return Err(Error::InvalidConfig(format!("channel {channel} is not in the filter bank")));
    }
    let mut pooled = Vec::with_capacity(fields.n_rep() * fields.dim());
    for i in 0..fields.n_rep() {
        let w = wavelet_transform(fields.row(i), bank)?;
        pooled.extend(w[channel].iter().map(|c| c.re));
    }
    Histogram1D::quantile(&pooled, n_bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngContract;
    use crate::scattering::build_filter_bank;

    #[test]
    fn constant_fields_have_a_spike_at_zero() {
        let bank = build_filter_bank(16, 2, 2, 4).unwrap();
        let fields = ParticleEnsemble::from_flat(3, 256, vec![1.7; 768]).unwrap();
        let h = wavelet_marginal_histogram(&fields, &bank, 0, 100).unwrap();
        // band filters vanish at zero frequency, so only rounding survives
        let spread = h.edges().last().unwrap() - h.edges()[0];
        assert!(h.is_point_mass() || spread < 1e-12, "{spread}");
        assert!(h.edges()[0].abs() < 1e-12);
    }

    #[test]
    fn gaussian_fields_have_gaussian_marginals() {
        let bank = build_filter_bank(32, 2, 2, 4).unwrap();
        let fields = ParticleEnsemble::standard_normal(200, 1024, &RngContract::new(5)).unwrap();
        let c = bank.channel_index(1, 0).unwrap();
        let h = wavelet_marginal_histogram(&fields, &bank, c, 200).unwrap();
        let mut pooled = Vec::new();
        for i in 0..fields.n_rep() {
            pooled.extend(wavelet_transform(fields.row(i), &bank).unwrap()[c].iter().map(|z| z.re));
        }
        let var = pooled.iter().map(|v| v * v).sum::<f64>() / pooled.len() as f64;
        // Kolmogorov–Smirnov distance at the bin edges against N(0, var)
        let normal = Density1D::new(move |x| -0.5 * x * x / var, -12.0 * var.sqrt(), 12.0 * var.sqrt(), 20_001).unwrap();
        let mut cum = 0.0;
        let mut ks: f64 = 0.0;
        let masses = h.masses();
        for (i, e) in h.edges()[1..].iter().enumerate() {
            cum += masses[i];
            let q = normal.cdf(*e);
            ks = ks.max((cum - q).abs());
        }
        assert!(ks <= 0.01, "{ks}");
    }

    #[test]
    fn wrong_sizes_are_rejected() {
        let bank = build_filter_bank(16, 1, 2, 1).unwrap();
        let fields = ParticleEnsemble::from_flat(1, 8, vec![0.0; 8]).unwrap();
        assert!(wavelet_marginal_histogram(&fields, &bank, 0, 10).is_err());
        let fields = ParticleEnsemble::from_flat(1, 16, vec![0.0; 16]).unwrap();
        assert!(wavelet_marginal_histogram(&fields, &bank, 99, 10).is_err());
    }
}
