use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{Purpose, RngContract};

/// `n_rep` particles in `R^d`, stored row-major (one particle per row).
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    states: Array2<f64>,
}

impl ParticleEnsemble {
    pub fn new(states: Array2<f64>) -> Result<Self> {
        let (n, d) = states.dim();
        if n == 0 || d == 0 {
            return Err(Error::Empty("particle ensemble"));
        }
        let states = if states.is_standard_layout() {
            states
        } else {
            states.as_standard_layout().into_owned()
        };
        let ens = Self { states };
        ens.check_finite()?;
        Ok(ens)
    }

    pub fn from_flat(n_rep: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rep * dim {
            return Err(Error::mismatch("flat ensemble length", n_rep * dim, data.len()));
        }
        let states = Array2::from_shape_vec((n_rep, dim), data)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Self::new(states)
    }

    /// Standard Gaussian particles drawn from the `Init` streams.
    pub fn standard_normal(n_rep: usize, dim: usize, rng: &RngContract) -> Result<Self> {
        if n_rep == 0 || dim == 0 {
            return Err(Error::Empty("particle ensemble"));
        }
        let mut data = vec![0.0; n_rep * dim];
        fill_standard_normal(&mut data, dim, rng, Purpose::Init, 0);
        Self::from_flat(n_rep, dim, data)
    }

    pub fn n_rep(&self) -> usize {
        self.states.nrows()
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn states(&self) -> &Array2<f64> {
        &self.states
    }

    pub fn into_states(self) -> Array2<f64> {
        self.states
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.as_slice()[i * d..(i + 1) * d]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.states.as_slice().expect("standard layout")
    }

    /// Errors on the first NaN/Inf entry.
    pub fn check_finite(&self) -> Result<()> {
        if let Some(pos) = self.as_slice().iter().position(|v| !v.is_finite()) {
            let d = self.dim();
            return Err(Error::NonFinite(format!(
                "particle {} coordinate {}",
                pos / d,
                pos % d
            )));
        }
        Ok(())
    }

    /// Empirical mean of each coordinate.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d];
        for row in self.as_slice().chunks_exact(d) {
            for (a, &v) in m.iter_mut().zip(row) {
                *a += v;
            }
        }
        let n = self.n_rep() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Empirical covariance (normalized by `n_rep`), row-major `d × d`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim();
        let mu = self.mean();
        let mut c = vec![0.0; d * d];
        let mut centered = vec![0.0; d];
        for row in self.as_slice().chunks_exact(d) {
            for k in 0..d {
                centered[k] = row[k] - mu[k];
            }
            for a in 0..d {
                for b in a..d {
                    c[a * d + b] += centered[a] * centered[b];
                }
            }
        }
        let n = self.n_rep() as f64;
        for a in 0..d {
            for b in a..d {
                let v = c[a * d + b] / n;
                c[a * d + b] = v;
                c[b * d + a] = v;
            }
        }
        c
    }

    /// Little-endian bytes of all coordinates; used for bit-exact comparisons.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

/// Fills `data` (rows of length `dim`) with standard normals, one stream per
/// particle block.
pub(crate) fn fill_standard_normal(
    data: &mut [f64],
    dim: usize,
    rng: &RngContract,
    purpose: Purpose,
    step: u64,
) {
    let chunk = rng.block_size * dim;
    data.par_chunks_mut(chunk).enumerate().for_each(|(b, block)| {
        let mut stream = rng.stream(purpose, b as u64, step);
        for v in block.iter_mut() {
            *v = StandardNormal.sample(&mut stream);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_states() {
        let err = ParticleEnsemble::from_flat(2, 2, vec![0.0, 1.0, f64::NAN, 2.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(ref s) if s.contains("particle 1")));
        assert!(ParticleEnsemble::from_flat(0, 1, vec![]).is_err());
    }

    #[test]
    fn standard_normal_is_reproducible() {
        let rng = RngContract::new(11);
        let a = ParticleEnsemble::standard_normal(1000, 3, &rng).unwrap();
        let b = ParticleEnsemble::standard_normal(1000, 3, &rng).unwrap();
        assert_eq!(a.to_le_bytes(), b.to_le_bytes());
        let m = a.mean();
        assert!(m.iter().all(|v| v.abs() < 0.15));
        let c = a.covariance();
        assert!((c[0] - 1.0).abs() < 0.15 && c[1].abs() < 0.15);
    }
}
