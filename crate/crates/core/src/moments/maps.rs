use std::fmt;
use std::sync::Arc;

use super::{check_lengths, MomentFunction};
use crate::error::{Error, Result};

/// `φ(x) = (x, x², …, x^r)` on the real line.
#[derive(Debug, Clone, Copy)]
pub struct MonomialMap {
    degree: usize,
}

impl MonomialMap {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidConfig("monomial degree must be at least 1".into()));
        }
        Ok(Self { degree })
    }
}

impl MomentFunction for MonomialMap {
    fn dim(&self) -> usize {
        1
    }

    fn n_moments(&self) -> usize {
        self.degree
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, out.len(), self.degree)?;
        let mut p = 1.0;
        for o in out.iter_mut() {
            p *= x[0];
            *o = p;
        }
        Ok(())
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, out.len(), self.degree)?;
        let mut p = 1.0;
        for (k, o) in out.iter_mut().enumerate() {
            *o = (k + 1) as f64 * p;
            p *= x[0];
        }
        Ok(())
    }

    fn eval_and_jacobian(&self, x: &[f64], phi: &mut [f64], jac: &mut [f64]) -> Result<()> {
        check_lengths(self, x, phi.len(), self.degree)?;
        check_lengths(self, x, jac.len(), self.degree)?;
        let mut p = 1.0;
        for k in 0..self.degree {
            jac[k] = (k + 1) as f64 * p;
            p *= x[0];
            phi[k] = p;
        }
        Ok(())
    }

    fn columns(&self, states: &[f64], phi_cols: Option<&mut [f64]>, jac_cols: &mut [f64]) -> Result<()> {
        let n = states.len();
        let r = self.degree;
        if jac_cols.len() != r * n {
            return Err(Error::mismatch("Jacobian columns", r * n, jac_cols.len()));
        }
        // raw powers x^k first, the same products as the row-wise path
        let (first, rest) = jac_cols.split_at_mut(n);
        first.fill(1.0);
        let mut prev: &[f64] = first;
        for col in rest.chunks_exact_mut(n) {
            for ((c, &p), &x) in col.iter_mut().zip(prev).zip(states) {
                *c = p * x;
            }
            prev = col;
        }
        if let Some(cols) = phi_cols {
            if cols.len() != r * n {
                return Err(Error::mismatch("moment columns", r * n, cols.len()));
            }
            for (col, pow) in cols.chunks_exact_mut(n).zip(jac_cols.chunks_exact(n)) {
                for ((c, &p), &x) in col.iter_mut().zip(pow).zip(states) {
                    *c = p * x;
                }
            }
        }
        for (k, col) in jac_cols.chunks_exact_mut(n).enumerate().skip(1) {
            let f = (k + 1) as f64;
            col.iter_mut().for_each(|v| *v *= f);
        }
        Ok(())
    }

    fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, w.len(), self.degree)?;
        // Horner on Σ (k+1) w_k x^k
        let mut acc = 0.0;
        for k in (0..self.degree).rev() {
            acc = acc * x[0] + (k + 1) as f64 * w[k];
        }
        out[0] = acc;
        Ok(())
    }

    fn laplacian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, out.len(), self.degree)?;
        let mut p = 1.0;
        for (k, o) in out.iter_mut().enumerate() {
            let n = (k + 1) as f64;
            if k == 0 {
                *o = 0.0;
            } else {
                *o = n * (n - 1.0) * p;
                p *= x[0];
            }
        }
        Ok(())
    }

    fn has_laplacian(&self) -> bool {
        true
    }
}

/// Upper-triangular products `x_i x_j`, `i ≤ j`, in row order.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticMap {
    dim: usize,
}

impl QuadraticMap {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("quadratic map needs d >= 1".into()));
        }
        Ok(Self { dim })
    }

    /// The `(i, j)` pair behind moment `k`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut v = Vec::with_capacity(self.n_moments());
        for i in 0..self.dim {
            for j in i..self.dim {
                v.push((i, j));
            }
        }
        v
    }
}

impl MomentFunction for QuadraticMap {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_moments(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, out.len(), self.n_moments())?;
        let mut k = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                out[k] = x[i] * x[j];
                k += 1;
            }
        }
        Ok(())
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim;
        check_lengths(self, x, out.len(), self.n_moments() * d)?;
        out.fill(0.0);
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                let row = &mut out[k * d..(k + 1) * d];
                row[i] += x[j];
                row[j] += x[i];
                k += 1;
            }
        }
        Ok(())
    }

    fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, w.len(), self.n_moments())?;
        out.fill(0.0);
        let mut k = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                out[i] += w[k] * x[j];
                out[j] += w[k] * x[i];
                k += 1;
            }
        }
        Ok(())
    }

    fn laplacian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, out.len(), self.n_moments())?;
        let mut k = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                out[k] = if i == j { 2.0 } else { 0.0 };
                k += 1;
            }
        }
        Ok(())
    }

    fn has_laplacian(&self) -> bool {
        true
    }
}

/// `φ(x) = (x², |x|)`. The derivative of `|x|` at 0 is taken to be 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct AbsQuadraticMap;

impl AbsQuadraticMap {
    pub fn new() -> Self {
        Self
    }
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl MomentFunction for AbsQuadraticMap {
    fn dim(&self) -> usize {
        1
    }

    fn n_moments(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, out.len(), 2)?;
        out[0] = x[0] * x[0];
        out[1] = x[0].abs();
        Ok(())
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, out.len(), 2)?;
        out[0] = 2.0 * x[0];
        out[1] = sign0(x[0]);
        Ok(())
    }

    fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, w.len(), 2)?;
        out[0] = 2.0 * x[0] * w[0] + sign0(x[0]) * w[1];
        Ok(())
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `φ(x) = (x², log p(x))` for a user-supplied 1D log-density.
#[derive(Clone)]
pub struct LogDensityMap {
    log_p: ScalarFn,
    dlog_p: ScalarFn,
    d2log_p: Option<ScalarFn>,
}

impl fmt::Debug for LogDensityMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LogDensityMap")
            .field("has_second_derivative", &self.d2log_p.is_some())
            .finish()
    }
}

impl LogDensityMap {
    pub fn new<F, G>(log_p: F, dlog_p: G) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            log_p: Arc::new(log_p),
            dlog_p: Arc::new(dlog_p),
            d2log_p: None,
        }
    }

    /// Adds the second derivative, which enables the Laplacian.
    pub fn with_second_derivative<H>(mut self, d2: H) -> Self
    where
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.d2log_p = Some(Arc::new(d2));
        self
    }

    /// `log p(x) = Σ_k c_k x^k`.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig(
                "log-density polynomial needs finite coefficients".into(),
            ));
        }
        let c = Arc::new(coeffs);
        let (c0, c1, c2) = (c.clone(), c.clone(), c);
        Ok(Self::new(
            move |x| c0.iter().rev().fold(0.0, |a, &ck| a * x + ck),
            move |x| {
                c1.iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |a, (k, &ck)| a * x + k as f64 * ck)
            },
        )
        .with_second_derivative(move |x| {
            c2.iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |a, (k, &ck)| a * x + (k * (k - 1)) as f64 * ck)
        }))
    }

    pub fn log_p(&self, x: f64) -> f64 {
        (self.log_p)(x)
    }

    pub fn dlog_p(&self, x: f64) -> f64 {
        (self.dlog_p)(x)
    }

    fn finite(&self, what: &str, x: f64, v: f64) -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("{what} at x = {x}")))
        }
    }
}

impl MomentFunction for LogDensityMap {
    fn dim(&self) -> usize {
        1
    }

    fn n_moments(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, out.len(), 2)?;
        out[0] = x[0] * x[0];
        out[1] = self.finite("log p", x[0], (self.log_p)(x[0]))?;
        Ok(())
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, out.len(), 2)?;
        out[0] = 2.0 * x[0];
        out[1] = self.finite("d/dx log p", x[0], (self.dlog_p)(x[0]))?;
        Ok(())
    }

    fn vjp(&self, x: &[f64], w: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, w.len(), 2)?;
        let g = self.finite("d/dx log p", x[0], (self.dlog_p)(x[0]))?;
        out[0] = 2.0 * x[0] * w[0] + g * w[1];
        Ok(())
    }

    fn laplacian(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_lengths(self, x, out.len(), 2)?;
        let d2 = self.d2log_p.as_ref().ok_or_else(|| {
            Error::Unsupported("log-density map without a second derivative".into())
        })?;
        out[0] = 2.0;
        out[1] = self.finite("d²/dx² log p", x[0], d2(x[0]))?;
        Ok(())
    }

    fn has_laplacian(&self) -> bool {
        self.d2log_p.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn jac(phi: &dyn MomentFunction, x: &[f64]) -> Vec<f64> {
        let mut j = vec![0.0; phi.n_moments() * phi.dim()];
        phi.jacobian(x, &mut j).unwrap();
        j
    }

    fn ev(phi: &dyn MomentFunction, x: &[f64]) -> Vec<f64> {
        let mut o = vec![0.0; phi.n_moments()];
        phi.eval(x, &mut o).unwrap();
        o
    }

    fn fd_jacobian(phi: &dyn MomentFunction, x: &[f64]) -> Vec<f64> {
        let (d, r) = (phi.dim(), phi.n_moments());
        let mut out = vec![0.0; r * d];
        for i in 0..d {
            let eps = 1e-6 * x[i].abs().max(1.0);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += eps;
            xm[i] -= eps;
            let (fp, fm) = (ev(phi, &xp), ev(phi, &xm));
            for k in 0..r {
                out[k * d + i] = (fp[k] - fm[k]) / (2.0 * eps);
            }
        }
        out
    }

    fn assert_fd(phi: &dyn MomentFunction, x: &[f64]) {
        let a = jac(phi, x);
        let b = fd_jacobian(phi, x);
        let scale = a.iter().fold(1e-3_f64, |m, v| m.max(v.abs()));
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-5 * scale, "{a:?} vs {b:?} at {x:?}");
        }
    }

    fn assert_vjp(phi: &dyn MomentFunction, x: &[f64], w: &[f64]) {
        let d = phi.dim();
        let j = jac(phi, x);
        let mut got = vec![0.0; d];
        phi.vjp(x, w, &mut got).unwrap();
        for i in 0..d {
            let expect: f64 = (0..phi.n_moments()).map(|k| w[k] * j[k * d + i]).sum();
            let scale = (0..phi.n_moments())
                .map(|k| (w[k] * j[k * d + i]).abs())
                .sum::<f64>()
                .max(1e-300);
            assert!((got[i] - expect).abs() <= 1e-12 * scale, "{got:?}");
        }
    }

    #[test]
    fn monomial_examples() {
        let m = MonomialMap::new(4).unwrap();
        assert_eq!(ev(&m, &[2.0]), vec![2.0, 4.0, 8.0, 16.0]);
        assert_eq!(jac(&m, &[2.0]), vec![1.0, 4.0, 12.0, 32.0]);
        let m1 = MonomialMap::new(1).unwrap();
        assert_eq!(ev(&m1, &[0.0]), vec![0.0]);
        assert_eq!(jac(&m1, &[0.0]), vec![1.0]);
        assert!(MonomialMap::new(0).is_err());
        let mut lap = vec![0.0; 4];
        m.laplacian(&[2.0], &mut lap).unwrap();
        assert_eq!(lap, vec![0.0, 2.0, 12.0, 48.0]);
    }

    #[test]
    fn quadratic_examples() {
        let q = QuadraticMap::new(2).unwrap();
        assert_eq!(ev(&q, &[1.0, 2.0]), vec![1.0, 2.0, 4.0]);
        let q1 = QuadraticMap::new(1).unwrap();
        assert_eq!(ev(&q1, &[3.0]), vec![9.0]);
        assert_eq!(jac(&q1, &[3.0]), vec![6.0]);
        assert_eq!(QuadraticMap::new(3).unwrap().n_moments(), 6);
    }

    #[test]
    fn abs_examples() {
        let a = AbsQuadraticMap::new();
        assert_eq!(ev(&a, &[-3.0]), vec![9.0, 3.0]);
        assert_eq!(jac(&a, &[-3.0]), vec![-6.0, -1.0]);
        assert_eq!(ev(&a, &[0.0]), vec![0.0, 0.0]);
        assert_eq!(jac(&a, &[0.0]), vec![0.0, 0.0]);
        assert!(a.laplacian(&[1.0], &mut [0.0; 2]).is_err());
    }

    #[test]
    fn log_density_examples() {
        let g = LogDensityMap::new(|x| -0.5 * x * x, |x| -x);
        assert_eq!(ev(&g, &[1.0]), vec![1.0, -0.5]);
        assert_eq!(jac(&g, &[1.0]), vec![2.0, -1.0]);
        let bimodal = LogDensityMap::polynomial(vec![1.25, 0.4, 4.0, 0.0, -0.8]).unwrap();
        assert_eq!(ev(&bimodal, &[0.0]), vec![0.0, 1.25]);
        let bad = LogDensityMap::new(|x: f64| x.ln(), |x| 1.0 / x);
        assert!(matches!(bad.eval(&[-1.0], &mut [0.0; 2]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn polynomial_log_density_derivatives() {
        let p = LogDensityMap::polynomial(vec![0.3, -1.0, 2.0, 0.5]).unwrap();
        let x = 1.7;
        let expect_d1 = -1.0 + 4.0 * x + 1.5 * x * x;
        let expect_d2 = 4.0 + 3.0 * x;
        assert!((p.dlog_p(x) - expect_d1).abs() < 1e-12);
        let mut lap = [0.0; 2];
        p.laplacian(&[x], &mut lap).unwrap();
        assert!((lap[1] - expect_d2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn jacobians_match_finite_differences(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
            assert_fd(&MonomialMap::new(5).unwrap(), &[x]);
            assert_fd(&QuadraticMap::new(3).unwrap(), &[x, y, z]);
            if x.abs() > 1e-3 {
                assert_fd(&AbsQuadraticMap, &[x]);
            }
            assert_fd(&LogDensityMap::polynomial(vec![0.0, 0.4, 4.0, 0.0, -0.8]).unwrap(), &[x]);
        }

        #[test]
        fn vjp_matches_transposed_jacobian(x in -3.0f64..3.0, y in -3.0f64..3.0, w in proptest::collection::vec(-2.0f64..2.0, 6)) {
            assert_vjp(&MonomialMap::new(4).unwrap(), &[x], &w[..4]);
            assert_vjp(&QuadraticMap::new(2).unwrap(), &[x, y], &w[..3]);
            assert_vjp(&AbsQuadraticMap, &[x], &w[..2]);
        }
    }
}
