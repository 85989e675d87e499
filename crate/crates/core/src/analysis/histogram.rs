//! One-dimensional histograms and the entropy/KL estimates built on them.

use std::fmt::Write as _;

use super::density::Density1D;
use crate::error::{Error, Result};

/// Default number of bins (quantiles) for entropy estimates.
pub const DEFAULT_BINS: usize = 500;

/// Masses below this are floored before taking logs in KL estimates.
pub const MASS_FLOOR: f64 = 1e-12;

/// Binned samples: `edges.len() == counts.len() + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram1D {
    edges: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
    point_mass: bool,
}

impl Histogram1D {
    /// Equal-mass bins with edges at sample quantiles. Tied quantiles are
    /// merged, so fewer than `n_bins` bins may come out. If every sample is
    /// equal the result is a point mass (see [`Histogram1D::is_point_mass`]).
    pub fn quantile(samples: &[f64], n_bins: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("histogram samples"));
        }
        if n_bins == 0 {
            return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
        }
        check_finite(samples)?;
        let mut sorted = samples.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let n = sorted.len();
        let (lo, hi) = (sorted[0], sorted[n - 1]);
        if lo == hi {
            let half = f64::EPSILON * lo.abs().max(1.0);
            return Ok(Self {
                edges: vec![lo - half, lo + half],
                counts: vec![n as u64],
                total: n as u64,
                point_mass: true,
            });
        }
        let mut edges = Vec::with_capacity(n_bins + 1);
        for i in 0..=n_bins {
            let pos = (i as f64 * (n - 1) as f64 / n_bins as f64).round() as usize;
            let e = sorted[pos.min(n - 1)];
            if edges.last().is_none_or(|&last| e > last) {
                edges.push(e);
            }
        }
        let counts = count_sorted(&sorted, &edges);
        Ok(Self {
            edges,
            counts,
            total: n as u64,
            point_mass: false,
        })
    }

    /// `n_bins` equal-width bins on `[lo, hi]`. Samples outside are dropped
    /// and the masses are relative to the samples that landed inside.
    pub fn equal_width(samples: &[f64], n_bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!("bad histogram range [{lo}, {hi}]")));
        }
        check_finite(samples)?;
        let w = (hi - lo) / n_bins as f64;
        let edges: Vec<f64> = (0..=n_bins)
            .map(|i| if i == n_bins { hi } else { lo + i as f64 * w })
            .collect();
        let mut counts = vec![0u64; n_bins];
        let mut total = 0;
        for &x in samples {
            if x < lo || x > hi {
                continue;
            }
            let b = (((x - lo) / w) as usize).min(n_bins - 1);
            counts[b] += 1;
            total += 1;
        }
        if total == 0 {
            return Err(Error::Empty("no samples inside the histogram range"));
        }
        Ok(Self {
            edges,
            counts,
            total,
            point_mass: false,
        })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Number of samples that were binned.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn masses(&self) -> Vec<f64> {
        let t = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| e[1] - e[0]).collect()
    }

    /// All samples were identical.
    pub fn is_point_mass(&self) -> bool {
        self.point_mass
    }

    /// `−Σ p_i log(p_i / w_i)`, the entropy of the piecewise-constant density.
    pub fn entropy(&self) -> Result<f64> {
        if self.point_mass {
            return Err(Error::Degenerate("all samples are equal, entropy is −∞".into()));
        }
        let mut h = 0.0;
        for (p, w) in self.masses().into_iter().zip(self.widths()) {
            if p > 0.0 {
                h -= p * (p / w).ln();
            }
        }
        Ok(h)
    }

    /// `bin_left,bin_right,mass` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_left,bin_right,mass\n");
        for ((e, p), w) in self.edges.iter().zip(self.masses()).zip(self.widths()) {
            let _ = writeln!(s, "{:e},{:e},{:e}", e, e + w, p);
        }
        s
    }
}

fn check_finite(samples: &[f64]) -> Result<()> {
    match samples.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("sample {i}"))),
        None => Ok(()),
    }
}

/// Counts of sorted samples in `[e_i, e_{i+1})`, last bin closed.
fn count_sorted(sorted: &[f64], edges: &[f64]) -> Vec<u64> {
    let nb = edges.len() - 1;
    let mut counts = vec![0u64; nb];
    let mut b = 0;
    for &x in sorted {
        while b + 1 < nb && x >= edges[b + 1] {
            b += 1;
        }
        counts[b] += 1;
    }
    counts
}

/// Differential entropy from an equal-mass histogram with `n_bins` bins.
pub fn histogram_entropy(samples: &[f64], n_bins: usize) -> Result<f64> {
    if samples.len() < n_bins {
        return Err(Error::InvalidConfig(format!(
            "{} samples are too few for {} bins",
            samples.len(),
            n_bins
        )));
    }
    Histogram1D::quantile(samples, n_bins)?.entropy()
}

/// `Σ p̂_i log(p̂_i / q_i)` over `n_bins` equal-width bins on `support`, with
/// `q` the target normalized by quadrature.
pub fn kl_vs_density<F>(samples: &[f64], log_density: F, support: (f64, f64), n_bins: usize) -> Result<f64>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let target = Density1D::new(log_density, support.0, support.1, super::density::DEFAULT_NODES)?;
    kl_to_density(samples, &target, n_bins)
}

/// [`kl_vs_density`] against an already normalized density.
pub fn kl_to_density(samples: &[f64], target: &Density1D, n_bins: usize) -> Result<f64> {
    let (lo, hi) = target.support();
    let hist = Histogram1D::equal_width(samples, n_bins, lo, hi)?;
    Ok(kl_histogram(&hist, &target.bin_masses(hist.edges())))
}

/// `Σ p_i log(p_i / q_i)` with both masses floored at [`MASS_FLOOR`].
pub fn kl_histogram(hist: &Histogram1D, q: &[f64]) -> f64 {
    let mut kl = 0.0;
    for (p, &q) in hist.masses().into_iter().zip(q) {
        if p > 0.0 {
            kl += p * (p.max(MASS_FLOOR) / q.max(MASS_FLOOR)).ln();
        }
    }
    kl
}

/// [`kl_histogram`] minus the Miller–Madow term `(B_occupied − 1)/(2N)`,
/// the leading-order positive bias of the plug-in estimate.
pub fn kl_histogram_corrected(hist: &Histogram1D, q: &[f64]) -> f64 {
    let occupied = hist.counts().iter().filter(|&&c| c > 0).count();
    kl_histogram(hist, q) - occupied.saturating_sub(1) as f64 / (2.0 * hist.total() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_samples_give_zero_entropy() {
        let n = 100_000;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let h = histogram_entropy(&x, 500).unwrap();
        assert!(h.abs() < 1e-3, "{h}");
    }

    #[test]
    fn masses_sum_to_one_and_widths_are_positive() {
        let x: Vec<f64> = (0..5000).map(|i| ((i * 7919) % 1013) as f64 / 13.0).collect();
        let h = Histogram1D::quantile(&x, 500).unwrap();
        let s: f64 = h.masses().iter().sum();
        assert!((s - 1.0).abs() <= 1e-12);
        assert!(h.widths().iter().all(|&w| w > 0.0));
        assert_eq!(h.counts().iter().sum::<u64>(), 5000);
    }

    #[test]
    fn ties_merge_bins() {
        let mut x = vec![0.0; 900];
        x.extend((0..100).map(|i| 1.0 + i as f64));
        let h = Histogram1D::quantile(&x, 500).unwrap();
        assert!(h.n_bins() < 500);
        // the spike sits in a single bin with whatever shares its right edge
        assert!((900..=902).contains(&h.counts()[0]), "{}", h.counts()[0]);
        assert_eq!(h.edges()[0], 0.0);
    }

    #[test]
    fn constant_samples_are_a_point_mass() {
        let h = Histogram1D::quantile(&[2.5; 1000], 500).unwrap();
        assert!(h.is_point_mass());
        assert_eq!(h.masses(), vec![1.0]);
        assert!(matches!(h.entropy(), Err(Error::Degenerate(_))));
        assert!(histogram_entropy(&[2.5; 1000], 500).is_err());
    }

    #[test]
    fn too_few_samples_are_rejected() {
        assert!(histogram_entropy(&[1.0, 2.0], 500).is_err());
        assert!(Histogram1D::quantile(&[], 5).is_err());
        assert!(Histogram1D::quantile(&[1.0, f64::NAN], 1).is_err());
    }

    #[test]
    fn equal_width_drops_outside_samples() {
        let h = Histogram1D::equal_width(&[-5.0, 0.1, 0.2, 0.9, 1.0, 7.0], 2, 0.0, 1.0).unwrap();
        assert_eq!(h.counts(), &[2, 2]);
        assert_eq!(h.total(), 4);
        assert_eq!(h.edges(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn kl_of_matching_masses_is_zero() {
        let h = Histogram1D::equal_width(&[0.25, 0.75], 2, 0.0, 1.0).unwrap();
        assert_eq!(kl_histogram(&h, &[0.5, 0.5]), 0.0);
        let k = kl_histogram(&h, &[0.25, 0.75]);
        let expect = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        assert!((k - expect).abs() < 1e-15);
    }

    #[test]
    fn csv_has_one_row_per_bin() {
        let h = Histogram1D::equal_width(&[0.25, 0.75], 2, 0.0, 1.0).unwrap();
        let csv = h.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("bin_left,bin_right,mass"));
    }
}
