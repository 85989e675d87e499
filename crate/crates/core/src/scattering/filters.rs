//! Morlet filter banks sampled on the DFT grid.

use num_complex::Complex64;

use super::fft::angular_frequency;
use crate::error::{Error, Result};

/// Gaussian envelope width of the mother wavelet.
pub const MORLET_SIGMA: f64 = 0.8;
/// Centre frequency of the mother wavelet along the first axis.
pub const MORLET_XI: f64 = 0.75;

/// A band-pass channel `(scale, orientation)` or the low-pass channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Channel {
    /// Dyadic scale `j ≥ 1`; `None` for the low-pass channel.
    pub scale: Option<usize>,
    pub orientation: usize,
}

impl Channel {
    pub fn is_low_pass(&self) -> bool {
        self.scale.is_none()
    }
}

/// Frequency-domain Morlet wavelets `ψ̂_λ` at scales `2^j`, `1 ≤ j ≤ J`,
/// and `L` orientations (2D), plus a Gaussian low-pass filter at scale `2^J`.
#[derive(Debug, Clone)]
pub struct FilterBank {
    n: usize,
    kappa: usize,
    j_max: usize,
    orientations: usize,
    channels: Vec<Channel>,
    filters: Vec<Vec<Complex64>>,
    power: Vec<Vec<f64>>,
}

impl FilterBank {
    /// `n` samples per axis (a power of two), `kappa ∈ {1, 2}`, scales
    /// `1..=j_max`, `orientations` directions (forced to 1 in 1D).
    pub fn new(n: usize, kappa: usize, j_max: usize, orientations: usize) -> Result<Self> {
        if kappa != 1 && kappa != 2 {
            return Err(Error::InvalidConfig(format!("kappa must be 1 or 2, got {kappa}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidConfig(format!("grid size {n} is not a power of two >= 2")));
        }
        let log_n = n.trailing_zeros() as usize;
        if j_max == 0 || j_max > log_n {
            return Err(Error::InvalidConfig(format!(
                "scale count {j_max} must lie in 1..={log_n} for grid size {n}"
            )));
        }
        let orientations = if kappa == 1 { 1 } else { orientations };
        if orientations == 0 {
            return Err(Error::InvalidConfig("need at least one orientation".into()));
        }
        let mut channels = Vec::new();
        for j in 1..=j_max {
            for l in 0..orientations {
                channels.push(Channel {
                    scale: Some(j),
                    orientation: l,
                });
            }
        }
        channels.push(Channel {
            scale: None,
            orientation: 0,
        });
        let d = n.pow(kappa as u32);
        let mut filters = Vec::with_capacity(channels.len());
        for ch in &channels {
            let mut f = vec![Complex64::default(); d];
            for (i, v) in f.iter_mut().enumerate() {
                let omega = grid_frequency(i, n, kappa);
                *v = Complex64::new(
                    match ch.scale {
                        Some(j) => band_response(omega, j, ch.orientation, orientations, kappa),
                        None => low_pass_response(omega, j_max),
                    },
                    0.0,
                );
            }
            filters.push(f);
        }
        let power = filters.iter().map(|f| f.iter().map(|v| v.norm_sqr()).collect()).collect();
        Ok(Self {
            n,
            kappa,
            j_max,
            orientations,
            channels,
            filters,
            power,
        })
    }

    /// Samples per axis.
    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    /// Total number of samples `d`.
    pub fn size(&self) -> usize {
        self.n.pow(self.kappa as u32)
    }

    pub fn n_scales(&self) -> usize {
        self.j_max
    }

    pub fn n_orientations(&self) -> usize {
        self.orientations
    }

    /// Band-pass channels ordered by scale then orientation; low-pass last.
    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn n_band(&self) -> usize {
        self.channels.len() - 1
    }

    pub fn low_pass_index(&self) -> usize {
        self.channels.len() - 1
    }

    pub fn filter(&self, channel: usize) -> &[Complex64] {
        &self.filters[channel]
    }

    /// `|ψ̂_λ|²` on the grid.
    pub(crate) fn power(&self, channel: usize) -> &[f64] {
        &self.power[channel]
    }

    pub fn channel_index(&self, scale: usize, orientation: usize) -> Option<usize> {
        self.channels
            .iter()
            .position(|c| c.scale == Some(scale) && c.orientation == orientation)
    }
}

/// `(ω_0, ω_1)` for flat grid index `i` (`ω_1 = 0` in 1D).
pub(crate) fn grid_frequency(i: usize, n: usize, kappa: usize) -> [f64; 2] {
    if kappa == 1 {
        [angular_frequency(i, n), 0.0]
    } else {
        [angular_frequency(i / n, n), angular_frequency(i % n, n)]
    }
}

/// Fourier transform of the mother Morlet wavelet, unit peak envelope.
pub(crate) fn morlet_hat(omega: [f64; 2]) -> f64 {
    let s2 = MORLET_SIGMA * MORLET_SIGMA;
    let dx = omega[0] - MORLET_XI;
    let shifted = dx * dx + omega[1] * omega[1];
    let centred = omega[0] * omega[0] + omega[1] * omega[1];
    let c = (-0.5 * s2 * MORLET_XI * MORLET_XI).exp();
    (-0.5 * s2 * shifted).exp() - c * (-0.5 * s2 * centred).exp()
}

fn band_response(omega: [f64; 2], j: usize, l: usize, orientations: usize, kappa: usize) -> f64 {
    let dil = (1u64 << j) as f64;
    // rotate by −θ so the passband is centred at 2^{−j} R_θ ξ
    let theta = std::f64::consts::PI * l as f64 / orientations as f64;
    let (s, c) = theta.sin_cos();
    let rotated = if kappa == 1 {
        omega
    } else {
        [c * omega[0] + s * omega[1], -s * omega[0] + c * omega[1]]
    };
    dil.powf(kappa as f64 / 2.0) * morlet_hat([dil * rotated[0], dil * rotated[1]])
}

fn low_pass_response(omega: [f64; 2], j_max: usize) -> f64 {
    let dil = (1u64 << j_max) as f64;
    let s2 = MORLET_SIGMA * MORLET_SIGMA;
    (-0.5 * s2 * dil * dil * (omega[0] * omega[0] + omega[1] * omega[1])).exp()
}
