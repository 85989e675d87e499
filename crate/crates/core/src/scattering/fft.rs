//! Periodic FFTs on 1D and square 2D grids.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub(crate) struct GridFft {
    n: usize,
    kappa: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl GridFft {
    pub fn new(n: usize, kappa: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            kappa,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.kappa as u32)
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(&self.forward, data);
    }

    /// Unnormalized inverse transform in place (no `1/d` factor).
    pub fn inverse_unnormalized(&self, data: &mut [Complex64]) {
        self.run(&self.inverse, data);
    }

    /// Inverse transform including the `1/d` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(&self.inverse, data);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        if self.kappa == 2 {
            transpose_square(data, self.n);
            plan.process_with_scratch(data, &mut scratch);
            transpose_square(data, self.n);
        }
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Signed angular frequency `2πk/n` of DFT bin `k` (bins at or above `n/2`
/// are negative).
pub(crate) fn angular_frequency(k: usize, n: usize) -> f64 {
    let signed = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
    std::f64::consts::TAU * signed / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft_2d(x: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); n * n];
        for a in 0..n {
            for b in 0..n {
                let mut s = Complex64::default();
                for u in 0..n {
                    for v in 0..n {
                        let ph = -std::f64::consts::TAU * ((a * u + b * v) as f64) / n as f64;
                        s += x[u * n + v] * Complex64::from_polar(1.0, ph);
                    }
                }
                out[a * n + b] = s;
            }
        }
        out
    }

    #[test]
    fn two_dimensional_transform_matches_direct_sum() {
        let n = 8;
        let x: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let mut y = x.clone();
        let f = GridFft::new(n, 2);
        f.forward(&mut y);
        let z = naive_dft_2d(&x, n);
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).norm() < 1e-10);
        }
        f.inverse(&mut y);
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn frequencies_are_signed() {
        assert_eq!(angular_frequency(0, 8), 0.0);
        assert!(angular_frequency(7, 8) < 0.0);
        assert!((angular_frequency(1, 4) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
