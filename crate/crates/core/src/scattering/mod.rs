//! Wavelet scattering spectra on periodic 1D series and square 2D fields.
//!
//! Filters are Morlet wavelets sampled directly on the DFT grid, so
//! convolutions are exact periodic convolutions. Moments are spatial
//! averages, hence invariant to circular shifts, and their gradients are
//! computed by an explicit adjoint pass through the FFTs.

mod fft;
mod filters;
mod index;
mod transform;

use std::sync::Arc;

pub use filters::{Channel, FilterBank, MORLET_SIGMA, MORLET_XI};
pub use index::{ScatteringIndex, ScatteringMoment};
pub use transform::{
    scattering_jacobian_rows, scattering_moments, scattering_vjp, wavelet_transform,
    wavelet_transform_complex,
};

use crate::error::Result;
use crate::moments::{check_lengths, MomentFunction};
use fft::GridFft;
use transform::{jacobian_into, Engine};

/// Builds the bank: `n` samples per axis, `kappa` axes, scales `1..=j_max`,
/// `orientations` directions in 2D.
pub fn build_filter_bank(n: usize, kappa: usize, j_max: usize, orientations: usize) -> Result<FilterBank> {
    FilterBank::new(n, kappa, j_max, orientations)
}

/// Scattering spectra as a moment function on flattened signals.
#[derive(Clone)]
pub struct ScatteringMap {
    bank: Arc<FilterBank>,
    index: Arc<ScatteringIndex>,
    fft: GridFft,
}

impl std::fmt::Debug for ScatteringMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScatteringMap")
            .field("n", &self.bank.n_per_axis())
            .field("kappa", &self.bank.kappa())
            .field("scales", &self.bank.n_scales())
            .field("orientations", &self.bank.n_orientations())
            .field("moments", &self.index.len())
            .finish()
    }
}

impl ScatteringMap {
    pub fn new(bank: FilterBank) -> Self {
        let index = ScatteringIndex::new(&bank);
        let fft = GridFft::new(bank.n_per_axis(), bank.kappa());
        Self {
            bank: Arc::new(bank),
            index: Arc::new(index),
            fft,
        }
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn index(&self) -> &ScatteringIndex {
        &self.index
    }

    fn engine(&self) -> Engine<'_> {
        Engine::with_fft(&self.bank, &self.index, self.fft.clone())
    }
}

impl MomentFunction for ScatteringMap {
    fn dim(&self) -> usize {
        self.bank.size()
    }

    fn n_moments(&self) -> usize {
        self.index.len()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, out.len(), self.index.len())?;
        let eng = self.engine();
        let f = eng.forward(x)?;
        eng.moments(&f, out)
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, out.len(), self.index.len() * self.dim())?;
        let eng = self.engine();
        let f = eng.forward(x)?;
        jacobian_into(&eng, &f, out)
    }

    fn eval_and_jacobian(&self, x: &[f64], phi: &mut [f64], jac: &mut [f64]) -> Result<()> {
        check_lengths(self, x, phi.len(), self.index.len())?;
        check_lengths(self, x, jac.len(), self.index.len() * self.dim())?;
        let eng = self.engine();
        let f = eng.forward(x)?;
        eng.moments(&f, phi)?;
        jacobian_into(&eng, &f, jac)
    }

    fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, out.len(), self.dim())?;
        let eng = self.engine();
        let f = eng.forward(x)?;
        eng.backward(&f, w, out)
    }
}
