//! Moment functions `φ: R^d → R^r` and the Gram-matrix machinery built on
//! their Jacobians.

pub(crate) mod gram;
mod maps;
mod solve;

pub use gram::{gram, gram_with, GramMatrix};
pub(crate) use gram::{ensemble_stats, StatsRequest};
pub use maps::{AbsQuadraticMap, LogDensityMap, MonomialMap, QuadraticMap};
pub use solve::{regularized_solve, PRUNE_THRESHOLD};

use crate::error::{Error, Result};

/// A vector of moment functions with analytic first derivatives.
///
/// Jacobians are `r × d`, row-major: row `k` is `∇φ_k(x)`.
pub trait MomentFunction: Send + Sync {
    /// Dimension `d` of the state.
    fn dim(&self) -> usize;

    /// Number of moments `r`.
    fn n_moments(&self) -> usize;

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    fn jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    fn eval_and_jacobian(&self, x: &[f64], phi: &mut [f64], jac: &mut [f64]) -> Result<()> {
        self.eval(x, phi)?;
        self.jacobian(x, jac)
    }

    /// `Σ_k w_k ∇φ_k(x)`. The default materializes the Jacobian.
    fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        let mut jac = vec![0.0; self.n_moments() * d];
        self.jacobian(x, &mut jac)?;
        out.fill(0.0);
        for (row, &wk) in jac.chunks_exact(d).zip(w) {
            if wk != 0.0 {
                for (o, &j) in out.iter_mut().zip(row) {
                    *o += wk * j;
                }
            }
        }
        Ok(())
    }

    /// Laplacian `Δφ_k(x)` of every moment, when it exists in closed form.
    fn laplacian(&self, _x: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::Unsupported(
            "this moment function has no Laplacian".into(),
        ))
    }

    fn has_laplacian(&self) -> bool {
        false
    }

    /// Writes `φ_k` and `∂_q φ_k` of every row of `states` into columns:
    /// `phi_cols[k n + i]` (skipped when `None`) and `jac_cols[(k d + q) n + i]`
    /// for `n` rows.
    fn columns(&self, states: &[f64], phi_cols: Option<&mut [f64]>, jac_cols: &mut [f64]) -> Result<()> {
        let (d, r) = (self.dim(), self.n_moments());
        let n = states.len() / d;
        let mut p = vec![0.0; r];
        let mut j = vec![0.0; r * d];
        let mut phi_cols = phi_cols;
        for (i, x) in states.chunks_exact(d).enumerate() {
            match phi_cols.as_deref_mut() {
                Some(cols) => {
                    self.eval_and_jacobian(x, &mut p, &mut j)?;
                    for k in 0..r {
                        cols[k * n + i] = p[k];
                    }
                }
                None => self.jacobian(x, &mut j)?,
            }
            for (kq, &v) in j.iter().enumerate() {
                jac_cols[kq * n + i] = v;
            }
        }
        Ok(())
    }

    /// Batched evaluation over rows of `states`, row-major `n × r` output.
    fn eval_batch(&self, states: &[f64]) -> Result<Vec<f64>> {
        let (d, r) = (self.dim(), self.n_moments());
        if states.len() % d != 0 {
            return Err(Error::mismatch("batch length (multiple of d)", d, states.len()));
        }
        let mut out = vec![0.0; states.len() / d * r];
        for (x, o) in states.chunks_exact(d).zip(out.chunks_exact_mut(r)) {
            self.eval(x, o)?;
        }
        Ok(out)
    }
}

/// Mean of `φ` over the rows of `states`.
pub fn empirical_mean(phi: &dyn MomentFunction, states: &[f64]) -> Result<Vec<f64>> {
    let stats = ensemble_stats(
        states,
        phi,
        StatsRequest::PHI,
        crate::rng::DEFAULT_BLOCK,
        true,
    )?;
    Ok(stats.phi_mean.expect("requested"))
}

pub(crate) fn check_lengths(phi: &dyn MomentFunction, x: &[f64], out: usize, expected_out: usize) -> Result<()> {
    if x.len() != phi.dim() {
        return Err(Error::mismatch("state dimension", phi.dim(), x.len()));
    }
    if out != expected_out {
        return Err(Error::mismatch("output length", expected_out, out));
    }
    Ok(())
}
