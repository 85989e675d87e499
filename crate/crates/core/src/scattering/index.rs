//! Enumeration of scattering moments.

use super::filters::FilterBank;

/// One real-valued scattering moment. Channels are indices into
/// [`FilterBank::channels`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScatteringMoment {
    /// Spatial mean of `|X^λ|`.
    MeanModulus { channel: usize },
    /// Spatial mean of `|X^λ|²`.
    Power { channel: usize },
    /// Correlation of the envelope `|X^λ| ∗ ψ_λ′` with `X^λ′`, `λ` finer than `λ′`.
    EnvelopePhase {
        fine: usize,
        coarse: usize,
        imaginary: bool,
    },
    /// Correlation of `|X^λ| ∗ ψ_λ′` with `|X^λ″| ∗ ψ_λ′`, both finer than `λ′`.
    EnvelopeCross {
        fine_a: usize,
        coarse: usize,
        fine_b: usize,
        imaginary: bool,
    },
}

/// Ordered list of moments: all mean moduli, all powers, then envelope-phase
/// and envelope-cross terms, with real and imaginary parts adjacent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScatteringIndex {
    entries: Vec<ScatteringMoment>,
}

impl ScatteringIndex {
    pub fn new(bank: &FilterBank) -> Self {
        use ScatteringMoment::*;
        let channels = bank.channels();
        let n_all = channels.len();
        let n_band = bank.n_band();
        let mut entries = Vec::new();
        for c in 0..n_all {
            entries.push(MeanModulus { channel: c });
        }
        for c in 0..n_all {
            entries.push(Power { channel: c });
        }
        let scale = |c: usize| channels[c].scale.expect("band channel");
        for coarse in 0..n_band {
            for fine in 0..n_band {
                if scale(fine) < scale(coarse) {
                    for imaginary in [false, true] {
                        entries.push(EnvelopePhase {
                            fine,
                            coarse,
                            imaginary,
                        });
                    }
                }
            }
        }
        for coarse in 0..n_band {
            for fine_a in 0..n_band {
                for fine_b in fine_a..n_band {
                    if scale(fine_a) < scale(coarse) && scale(fine_b) < scale(coarse) {
                        entries.push(EnvelopeCross {
                            fine_a,
                            coarse,
                            fine_b,
                            imaginary: false,
                        });
                        // the diagonal term is real
                        if fine_b != fine_a {
                            entries.push(EnvelopeCross {
                                fine_a,
                                coarse,
                                fine_b,
                                imaginary: true,
                            });
                        }
                    }
                }
            }
        }
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ScatteringMoment] {
        &self.entries
    }
}
