//! Target moment paths `m_t = E[φ(I_t)]` on a uniform time grid.

use rand::Rng;
use rayon::prelude::*;

use crate::ensemble::{fill_standard_normal, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::interpolant::{mix_into, InterpolantSchedule};
use crate::moments::MomentFunction;
use crate::rng::{Purpose, RngContract};

/// Moments on the grid `t_k = k/n` plus forward differences.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPath {
    n_steps: usize,
    r: usize,
    values: Vec<f64>,
    diffs: Vec<f64>,
}

impl MomentPath {
    /// Builds a path from `n_steps + 1` rows of moment values.
    pub fn from_values(values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidConfig("a moment path needs at least 2 grid points".into()));
        }
        let r = values[0].len();
        if r == 0 {
            return Err(Error::Empty("moment vector"));
        }
        let mut flat = Vec::with_capacity(values.len() * r);
        for v in &values {
            if v.len() != r {
                return Err(Error::mismatch("moment vector length", r, v.len()));
            }
            flat.extend_from_slice(v);
        }
        Self::from_flat(values.len() - 1, r, flat)
    }

    /// A path that stays at `m` for `n_steps` steps.
    pub fn constant(m: &[f64], n_steps: usize) -> Result<Self> {
        Self::from_values(vec![m.to_vec(); n_steps + 1])
    }

    fn from_flat(n_steps: usize, r: usize, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("moment path at grid {} moment {}", i / r, i % r)));
        }
        let inv_h = n_steps as f64;
        let mut diffs = vec![0.0; n_steps * r];
        for k in 0..n_steps {
            for q in 0..r {
                diffs[k * r + q] = (values[(k + 1) * r + q] - values[k * r + q]) * inv_h;
            }
        }
        Ok(Self {
            n_steps,
            r,
            values,
            diffs,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_moments(&self) -> usize {
        self.r
    }

    pub fn step_size(&self) -> f64 {
        1.0 / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            1.0
        } else {
            k as f64 / self.n_steps as f64
        }
    }

    /// `m_{t_k}`.
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.r..(k + 1) * self.r]
    }

    /// `(m_{t_{k+1}} − m_{t_k}) / h`.
    pub fn diff(&self, k: usize) -> &[f64] {
        &self.diffs[k * self.r..(k + 1) * self.r]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// How the data half of each interpolant pair is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataDraw {
    /// Uniformly with replacement.
    #[default]
    WithReplacement,
    /// Pair `j` uses data point `j mod n`; no resampling noise.
    InOrder,
}

/// Monte-Carlo estimate of `m_t` with `n_mc` pairs `(z_j, x_j)` shared by all
/// `n_grid` grid times.
pub fn estimate_moment_path(
    dataset: &ParticleEnsemble,
    phi: &dyn MomentFunction,
    n_grid: usize,
    n_mc: usize,
    sched: &InterpolantSchedule,
    rng: &RngContract,
) -> Result<MomentPath> {
    estimate_moment_path_with(dataset, phi, n_grid, n_mc, sched, rng, DataDraw::WithReplacement)
}

pub fn estimate_moment_path_with(
    dataset: &ParticleEnsemble,
    phi: &dyn MomentFunction,
    n_grid: usize,
    n_mc: usize,
    sched: &InterpolantSchedule,
    rng: &RngContract,
    draw: DataDraw,
) -> Result<MomentPath> {
    if n_grid < 2 {
        return Err(Error::InvalidConfig(format!("n_grid must be >= 2, got {n_grid}")));
    }
    if n_mc == 0 {
        return Err(Error::InvalidConfig("n_mc must be >= 1".into()));
    }
    let d = phi.dim();
    if dataset.dim() != d {
        return Err(Error::mismatch("dataset dimension", d, dataset.dim()));
    }
    let n_data = dataset.n_rep();

    let mut noise = vec![0.0; n_mc * d];
    fill_standard_normal(&mut noise, d, rng, Purpose::PathNoise, 0);
    let picks = data_indices(n_mc, n_data, rng, draw);

    let r = phi.n_moments();
    let n_steps = n_grid - 1;
    let rows: Vec<Result<Vec<f64>>> = (0..n_grid)
        .into_par_iter()
        .map(|k| {
            let t = if k == n_steps { 1.0 } else { k as f64 / n_steps as f64 };
            let (c, s) = sched.coefficients(t)?;
            let mut state = vec![0.0; d];
            let mut out = vec![0.0; r];
            let mut acc = vec![0.0; r];
            for (j, &i) in picks.iter().enumerate() {
                mix_into(&noise[j * d..(j + 1) * d], dataset.row(i), c, s, &mut state);
                phi.eval(&state, &mut out)?;
                for (a, v) in acc.iter_mut().zip(&out) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|v| *v /= n_mc as f64);
            Ok(acc)
        })
        .collect();
    let mut flat = Vec::with_capacity(n_grid * r);
    for row in rows {
        flat.extend(row?);
    }
    MomentPath::from_flat(n_steps, r, flat)
}

/// Exact path for the 1D monomials `φ(x) = (x, …, x^r)` when the data
/// moments `E[X^k]`, `k = 1..=r`, are known: `E[(cZ + sX)^k]` expands
/// binomially with Gaussian moments of `Z`.
pub fn monomial_moment_path(data_moments: &[f64], n_steps: usize, sched: &InterpolantSchedule) -> Result<MomentPath> {
    if data_moments.is_empty() {
        return Err(Error::Empty("data moments"));
    }
    if n_steps == 0 {
        return Err(Error::InvalidConfig("a moment path needs at least one step".into()));
    }
    let r = data_moments.len();
    // E[X^0] = 1; E[Z^j] = (j−1)!! for even j
    let mut mx = vec![1.0];
    mx.extend_from_slice(data_moments);
    let mut mz = vec![1.0; r + 1];
    for j in 1..=r {
        mz[j] = if j % 2 == 1 { 0.0 } else { mz[j - 2] * (j - 1) as f64 };
    }
    let mut flat = Vec::with_capacity((n_steps + 1) * r);
    for k in 0..=n_steps {
        let t = if k == n_steps { 1.0 } else { k as f64 / n_steps as f64 };
        let (c, s) = sched.coefficients(t)?;
        for deg in 1..=r {
            let mut binom = 1.0;
            let mut m = 0.0;
            for j in 0..=deg {
                m += binom * c.powi(j as i32) * s.powi((deg - j) as i32) * mz[j] * mx[deg - j];
                binom = binom * (deg - j) as f64 / (j + 1) as f64;
            }
            flat.push(m);
        }
    }
    MomentPath::from_flat(n_steps, r, flat)
}

pub(crate) fn data_indices(n: usize, n_data: usize, rng: &RngContract, draw: DataDraw) -> Vec<usize> {
    match draw {
        DataDraw::InOrder => (0..n).map(|j| j % n_data).collect(),
        DataDraw::WithReplacement => {
            let mut idx = vec![0usize; n];
            idx.par_chunks_mut(rng.block_size)
                .enumerate()
                .for_each(|(b, chunk)| {
                    let mut s = rng.stream(Purpose::PathData, b as u64, 0);
                    for v in chunk.iter_mut() {
                        *v = s.random_range(0..n_data);
                    }
                });
            idx
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{MonomialMap, QuadraticMap};

    fn gaussian_data(n: usize, d: usize, seed: u64, scale: f64) -> ParticleEnsemble {
        let e = ParticleEnsemble::standard_normal(n, d, &RngContract::new(seed)).unwrap();
        let v: Vec<f64> = e.as_slice().iter().map(|x| x * scale).collect();
        ParticleEnsemble::from_flat(n, d, v).unwrap()
    }

    #[test]
    fn gaussian_start_has_normal_moments() {
        let data = gaussian_data(20_000, 1, 1, 1.0);
        let p = estimate_moment_path(
            &data,
            &MonomialMap::new(4).unwrap(),
            3,
            200_000,
            &InterpolantSchedule::Linear,
            &RngContract::new(2),
        )
        .unwrap();
        let m0 = p.value(0);
        let expect = [0.0, 1.0, 0.0, 3.0];
        let tol = [0.01, 0.015, 0.03, 0.05];
        for q in 0..4 {
            assert!((m0[q] - expect[q]).abs() < tol[q], "{m0:?}");
        }
    }

    #[test]
    fn endpoint_matches_dataset_mean() {
        let data = gaussian_data(1000, 1, 3, 2.0);
        let phi = MonomialMap::new(2).unwrap();
        let p = estimate_moment_path_with(
            &data,
            &phi,
            5,
            1000,
            &InterpolantSchedule::Linear,
            &RngContract::new(4),
            DataDraw::InOrder,
        )
        .unwrap();
        let m = crate::moments::empirical_mean(&phi, data.as_slice()).unwrap();
        for q in 0..2 {
            assert!((p.value(4)[q] - m[q]).abs() < 1e-12);
        }
    }

    #[test]
    fn second_moments_mix_linearly_at_midpoint() {
        // oracle: for independent Z, X, E[(cZ + sX)_i (cZ + sX)_j] = c² δ_ij + s² E[X_i X_j]
        let data = gaussian_data(50_000, 2, 5, 1.7);
        let phi = QuadraticMap::new(2).unwrap();
        let p = estimate_moment_path(
            &data,
            &phi,
            3,
            100_000,
            &InterpolantSchedule::Linear,
            &RngContract::new(6),
        )
        .unwrap();
        for q in 0..3 {
            let mid = 0.5 * (p.value(0)[q] + p.value(2)[q]);
            assert!((p.value(1)[q] - mid).abs() < 0.03, "{q}: {} vs {mid}", p.value(1)[q]);
        }
    }

    #[test]
    fn common_random_numbers_make_differences_smooth() {
        let data = gaussian_data(2000, 1, 7, 1.5);
        let phi = MonomialMap::new(4).unwrap();
        let mut prev = f64::INFINITY;
        for n_grid in [11, 41, 161] {
            let p = estimate_moment_path(&data, &phi, n_grid, 2000, &InterpolantSchedule::Linear, &RngContract::new(8)).unwrap();
            let h = p.step_size();
            let worst = (0..p.n_steps())
                .flat_map(|k| p.diff(k).iter().map(move |v| v.abs() * h))
                .fold(0.0, f64::max);
            assert!(worst < prev * 0.5, "{worst} vs {prev}");
            prev = worst;
        }
    }

    #[test]
    fn reproducible_and_validated() {
        let data = gaussian_data(100, 1, 9, 1.0);
        let phi = MonomialMap::new(2).unwrap();
        let s = InterpolantSchedule::Linear;
        let a = estimate_moment_path(&data, &phi, 4, 500, &s, &RngContract::new(1)).unwrap();
        let b = estimate_moment_path(&data, &phi, 4, 500, &s, &RngContract::new(1)).unwrap();
        assert_eq!(a, b);
        assert!(estimate_moment_path(&data, &phi, 1, 500, &s, &RngContract::new(1)).is_err());
        assert!(estimate_moment_path(&data, &phi, 3, 0, &s, &RngContract::new(1)).is_err());
    }

    #[test]
    fn constant_path_has_zero_differences() {
        let p = MomentPath::constant(&[1.0, 3.0], 10).unwrap();
        assert_eq!(p.n_steps(), 10);
        assert!(p.diff(4).iter().all(|&v| v == 0.0));
        assert_eq!(p.time(10), 1.0);
    }

    #[test]
    fn exact_monomial_path_matches_common_random_numbers() {
        // X ~ N(0, 4): E[X^k] = 0, 4, 0, 48
        let path = monomial_moment_path(&[0.0, 4.0, 0.0, 48.0], 8, &InterpolantSchedule::Linear).unwrap();
        assert_eq!(path.value(0), &[0.0, 1.0, 0.0, 3.0]);
        let end = path.value(8);
        assert!((end[1] - 4.0).abs() < 1e-12 && (end[3] - 48.0).abs() < 1e-12);
        for k in 0..=8 {
            let t = path.time(k);
            let (c, s) = InterpolantSchedule::Linear.coefficients(t).unwrap();
            let v = c * c + 4.0 * s * s;
            assert!((path.value(k)[1] - v).abs() < 1e-12);
            assert!((path.value(k)[3] - 3.0 * v * v).abs() < 1e-10);
        }
        let data = gaussian_data(50_000, 1, 9, 2.0);
        let mc = estimate_moment_path(&data, &MonomialMap::new(4).unwrap(), 9, 50_000, &InterpolantSchedule::Linear, &RngContract::new(10)).unwrap();
        for k in 0..=8 {
            assert!((mc.value(k)[1] - path.value(k)[1]).abs() < 0.1);
        }
    }

    #[test]
    fn exact_path_mixes_odd_moments() {
        // E[(cZ + sX)^3] = s^3 E[X^3] + 3 c^2 s E[X]
        let path = monomial_moment_path(&[0.5, 1.0, 2.0], 4, &InterpolantSchedule::Linear).unwrap();
        let (c, s) = InterpolantSchedule::Linear.coefficients(0.25).unwrap();
        let expect = s.powi(3) * 2.0 + 3.0 * c * c * s * 0.5;
        assert!((path.value(1)[2] - expect).abs() < 1e-14);
        assert!(monomial_moment_path(&[], 4, &InterpolantSchedule::Linear).is_err());
    }
}
