use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::GramMatrix;
use crate::error::{Error, Result};

/// Diagonal entries at or below this value mark a moment with no gradient
/// signal; its multiplier is set to zero.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// Solves `G θ = rhs` after pruning null moments, rescaling `G` to unit
/// diagonal and adding `delta·Id`.
///
/// Uses a Cholesky factorization, falling back to an eigendecomposition
/// pseudo-inverse when the factorization fails.
pub fn regularized_solve(g: &GramMatrix, rhs: &[f64], delta: f64) -> Result<Vec<f64>> {
    let r = g.dim();
    if rhs.len() != r {
        return Err(Error::mismatch("right-hand side length", r, rhs.len()));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidConfig(format!("regularization must be >= 0, got {delta}")));
    }
    if let Some(k) = rhs.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("right-hand side entry {k}")));
    }
    let kept: Vec<usize> = (0..r).filter(|&k| g.get(k, k) > PRUNE_THRESHOLD).collect();
    let mut out = vec![0.0; r];
    if kept.is_empty() {
        return Ok(out);
    }
    let m = kept.len();
    let scale: Vec<f64> = kept.iter().map(|&k| 1.0 / g.get(k, k).sqrt()).collect();
    let a = rescaled(g, &kept, &scale, delta);
    let b = DVector::from_iterator(m, kept.iter().zip(&scale).map(|(&k, s)| s * rhs[k]));

    let y = match a.clone().cholesky() {
        Some(ch) => {
            let y = ch.solve(&b);
            if y.iter().all(|v| v.is_finite()) {
                y
            } else {
                pseudo_inverse_solve(a, &b)
            }
        }
        None => pseudo_inverse_solve(a, &b),
    };
    for (i, &k) in kept.iter().enumerate() {
        out[k] = scale[i] * y[i];
    }
    Ok(out)
}

/// `D^{-1/2} G D^{-1/2} + δ Id` on the kept coordinates.
pub(crate) fn rescaled(g: &GramMatrix, kept: &[usize], scale: &[f64], delta: f64) -> DMatrix<f64> {
    let m = kept.len();
    DMatrix::from_fn(m, m, |i, j| {
        let v = scale[i] * g.get(kept[i], kept[j]) * scale[j];
        if i == j {
            v + delta
        } else {
            v
        }
    })
}

fn pseudo_inverse_solve(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let m = a.nrows();
    let eig = SymmetricEigen::new(a);
    let top = eig.eigenvalues.iter().fold(0.0_f64, |x, v| x.max(v.abs()));
    let cutoff = top * f64::EPSILON * m as f64;
    let coeffs = eig.eigenvectors.transpose() * b;
    let mut scaled = DVector::zeros(m);
    for i in 0..m {
        let lam = eig.eigenvalues[i];
        if lam > cutoff {
            scaled[i] = coeffs[i] / lam;
        }
    }
    &eig.eigenvectors * scaled
}
