//! Gaussian entropy of stationary fields from Welch spectral estimates.
//!
//! For a stationary field with periodic boundaries the covariance is
//! circulant, so `(1/d) log det Σ` is the mean of `log S(ω)` over frequencies.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::{E, TAU};

use crate::error::{Error, Result};

/// Spectral bins below this are floored before the log.
pub const PSD_FLOOR: f64 = 1e-12;

/// Segment length per axis; `None` means `min(256, n/4)`. Segments overlap
/// by half and carry a Hann taper.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WelchParams {
    pub segment: Option<usize>,
}

/// Entropy of the Gaussian with the same stationary covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianReference {
    /// Number of coordinates of one realization.
    pub d: usize,
    /// `(1/d) log det Σ`.
    pub log_det_rate: f64,
    /// `(d/2) log(2πe (det Σ)^{1/d})`.
    pub entropy: f64,
}

impl GaussianReference {
    pub fn new(d: usize, log_det_rate: f64) -> Self {
        let entropy = 0.5 * d as f64 * ((TAU * E).ln() + log_det_rate);
        Self {
            d,
            log_det_rate,
            entropy,
        }
    }
}

/// Welch estimate of the power spectrum of one or more realizations.
///
/// `fields` holds `m` realizations of shape `shape` (1 or 2 axes, row-major)
/// back to back. The result is on the `L_1 × … ` segment frequency grid,
/// normalized so unit white noise has `S ≡ 1`.
pub fn welch_psd(fields: &[f64], shape: &[usize], params: WelchParams) -> Result<(Vec<usize>, Vec<f64>)> {
    if shape.is_empty() || shape.len() > 2 || shape.iter().any(|&n| n == 0) {
        return Err(Error::InvalidConfig(format!("unsupported field shape {shape:?}")));
    }
    let size: usize = shape.iter().product();
    if fields.is_empty() || fields.len() % size != 0 {
        return Err(Error::mismatch("field data length (multiple of the shape)", size, fields.len()));
    }
    if let Some(i) = fields.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("field value {i}")));
    }
    let seg: Vec<usize> = shape
        .iter()
        .map(|&n| params.segment.unwrap_or((n / 4).min(256)))
        .collect();
    for (&l, &n) in seg.iter().zip(shape) {
        if l < 2 || l > n {
            return Err(Error::InvalidConfig(format!(
                "field of length {n} is shorter than one Welch segment ({l})"
            )));
        }
    }
    let windows: Vec<Vec<f64>> = seg.iter().map(|&l| hann(l)).collect();
    let starts: Vec<Vec<usize>> = seg
        .iter()
        .zip(shape)
        .map(|(&l, &n)| {
            let step = (l / 2).max(1);
            (0..=(n - l) / step).map(|i| i * step).collect()
        })
        .collect();
    let norm: f64 = windows.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).product();

    let mut planner = FftPlanner::new();
    let plans: Vec<_> = seg.iter().map(|&l| planner.plan_fft_forward(l)).collect();
    let seg_size: usize = seg.iter().product();
    let mut psd = vec![0.0; seg_size];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg_size];
    let mut col = vec![Complex64::new(0.0, 0.0); if seg.len() == 2 { seg[0] } else { 0 }];
    let mut count = 0usize;
    for field in fields.chunks_exact(size) {
        if shape.len() == 1 {
            for &s in &starts[0] {
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = Complex64::new(field[s + i] * windows[0][i], 0.0);
                }
                plans[0].process(&mut buf);
                accumulate(&mut psd, &buf);
                count += 1;
            }
        } else {
            let (n1, l0, l1) = (shape[1], seg[0], seg[1]);
            for &s0 in &starts[0] {
                for &s1 in &starts[1] {
                    for i in 0..l0 {
                        for j in 0..l1 {
                            let v = field[(s0 + i) * n1 + s1 + j] * windows[0][i] * windows[1][j];
                            buf[i * l1 + j] = Complex64::new(v, 0.0);
                        }
                    }
                    for row in buf.chunks_exact_mut(l1) {
                        plans[1].process(row);
                    }
                    for j in 0..l1 {
                        for i in 0..l0 {
                            col[i] = buf[i * l1 + j];
                        }
                        plans[0].process(&mut col);
                        for i in 0..l0 {
                            buf[i * l1 + j] = col[i];
                        }
                    }
                    accumulate(&mut psd, &buf);
                    count += 1;
                }
            }
        }
    }
    let scale = 1.0 / (norm * count as f64);
    for p in &mut psd {
        *p *= scale;
    }
    Ok((seg, psd))
}

fn accumulate(psd: &mut [f64], spec: &[Complex64]) {
    for (p, c) in psd.iter_mut().zip(spec) {
        *p += c.norm_sqr();
    }
}

/// Periodic Hann taper.
fn hann(l: usize) -> Vec<f64> {
    (0..l)
        .map(|i| 0.5 * (1.0 - (TAU * i as f64 / l as f64).cos()))
        .collect()
}

/// Gaussian reference of standardized fields: the log-determinant rate is the
/// mean log Welch spectrum.
pub fn gaussian_entropy_rate(fields: &[f64], shape: &[usize], params: WelchParams) -> Result<GaussianReference> {
    let (_, psd) = welch_psd(fields, shape, params)?;
    let rate = psd.iter().map(|&s| s.max(PSD_FLOOR).ln()).sum::<f64>() / psd.len() as f64;
    Ok(GaussianReference::new(shape.iter().product(), rate))
}

/// Negentropy rate `(H(g) − H_*)/d`.
pub fn negentropy_estimate(h_gaussian: f64, h_star: f64, d: usize) -> Result<f64> {
    if !h_gaussian.is_finite() || !h_star.is_finite() {
        return Err(Error::NonFinite("entropy passed to the negentropy estimate".into()));
    }
    if d == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    Ok((h_gaussian - h_star) / d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn white_noise_has_unit_spectrum() {
        let x = white(1 << 16, 1);
        let g = gaussian_entropy_rate(&x, &[x.len()], WelchParams::default()).unwrap();
        assert!(g.log_det_rate.abs() < 0.02, "{}", g.log_det_rate);
        let per_coord = g.entropy / g.d as f64;
        assert!((per_coord - 0.5 * (TAU * E).ln()).abs() < 0.02);
    }

    #[test]
    fn constant_segment_puts_all_power_at_zero_frequency() {
        let (seg, psd) = welch_psd(&[1.0; 64], &[64], WelchParams::default()).unwrap();
        assert_eq!(seg, vec![16]);
        assert!(psd[0] > 1.0);
        // Hann has nonzero first sidelobes only at ±1
        for p in &psd[2..15] {
            assert!(p.abs() < 1e-20);
        }
    }

    #[test]
    fn transposed_fields_give_the_same_rate() {
        let n = 48;
        let x = white(n * n, 2);
        // correlate along one axis so the spectrum is anisotropic
        let mut y = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                y[i * n + j] = x[i * n + j] + 0.8 * x[i * n + (j + 1) % n];
            }
        }
        let mut yt = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                yt[j * n + i] = y[i * n + j];
            }
        }
        let a = gaussian_entropy_rate(&y, &[n, n], WelchParams::default()).unwrap();
        let b = gaussian_entropy_rate(&yt, &[n, n], WelchParams::default()).unwrap();
        assert!((a.log_det_rate - b.log_det_rate).abs() < 1e-12);
    }

    #[test]
    fn short_fields_are_rejected() {
        assert!(welch_psd(&[0.0; 7], &[7], WelchParams::default()).is_err());
        assert!(welch_psd(&[0.0; 10], &[10], WelchParams { segment: Some(11) }).is_err());
        assert!(welch_psd(&[0.0; 10], &[3], WelchParams::default()).is_err());
    }

    #[test]
    fn negentropy_is_a_scaled_difference() {
        assert_eq!(negentropy_estimate(3.0, 2.5, 2).unwrap(), 0.25);
        assert!(negentropy_estimate(f64::NAN, 1.0, 1).is_err());
    }
}
