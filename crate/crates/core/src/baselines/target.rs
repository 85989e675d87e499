use std::sync::Arc;

use crate::analysis::Density1D;
use crate::error::{Error, Result};
use crate::moments::{MomentFunction, MonomialMap};

/// Exponential-family density `p(x) ∝ exp(−θᵀφ(x))`.
#[derive(Clone)]
pub struct ExpFamilyTarget {
    theta: Vec<f64>,
    phi: Arc<dyn MomentFunction>,
    /// Set when `φ` is the monomial map: the energy is then the polynomial
    /// `Σ θ_k x^{k+1}`, evaluated by Horner without going through `φ`.
    monomial: bool,
}

impl std::fmt::Debug for ExpFamilyTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExpFamilyTarget")
            .field("theta", &self.theta)
            .field("dim", &self.phi.dim())
            .finish()
    }
}

impl ExpFamilyTarget {
    pub fn new(theta: Vec<f64>, phi: Arc<dyn MomentFunction>) -> Result<Self> {
        if theta.len() != phi.n_moments() {
            return Err(Error::mismatch("θ length", phi.n_moments(), theta.len()));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("θ".into()));
        }
        Ok(Self {
            theta,
            phi,
            monomial: false,
        })
    }

    /// `p(x) ∝ exp(−Σ_k θ_k x^{k+1})` on the real line.
    pub fn polynomial(theta: Vec<f64>) -> Result<Self> {
        let phi = Arc::new(MonomialMap::new(theta.len())?);
        let mut t = Self::new(theta, phi)?;
        t.monomial = true;
        Ok(t)
    }

    /// `p(x) ∝ exp(−β(x⁴ − 5x² − x/2))`, an unbalanced double well whose
    /// barrier height grows linearly in `β`.
    pub fn double_well(beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Domain(format!("β must be positive, got {beta}")));
        }
        Self::polynomial(vec![-0.5 * beta, -5.0 * beta, 0.0, beta])
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi(&self) -> &Arc<dyn MomentFunction> {
        &self.phi
    }

    pub fn dim(&self) -> usize {
        self.phi.dim()
    }

    /// `θᵀφ(x)`; `scratch` has length `r`.
    pub fn energy_with(&self, x: &[f64], scratch: &mut [f64]) -> Result<f64> {
        if self.monomial {
            return Ok(self.poly_energy(x[0]));
        }
        self.phi.eval(x, scratch)?;
        Ok(self.theta.iter().zip(scratch.iter()).map(|(t, p)| t * p).sum())
    }

    pub fn energy(&self, x: &[f64]) -> Result<f64> {
        let mut s = vec![0.0; self.phi.n_moments()];
        self.energy_with(x, &mut s)
    }

    /// `∇(θᵀφ)(x) = Σ_k θ_k ∇φ_k(x)`.
    pub fn grad_energy(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if self.monomial {
            out[0] = self.poly_grad(x[0]);
            return Ok(());
        }
        self.phi.vjp(x, &self.theta, out)
    }

    /// Energy and gradient together; `scratch` has length `r`.
    pub fn energy_and_grad(&self, x: &[f64], scratch: &mut [f64], grad: &mut [f64]) -> Result<f64> {
        if self.monomial {
            grad[0] = self.poly_grad(x[0]);
            return Ok(self.poly_energy(x[0]));
        }
        let e = self.energy_with(x, scratch)?;
        self.phi.vjp(x, &self.theta, grad)?;
        Ok(e)
    }

    fn poly_energy(&self, x: f64) -> f64 {
        self.theta.iter().rev().fold(0.0, |acc, &t| (acc + t) * x)
    }

    fn poly_grad(&self, x: f64) -> f64 {
        let r = self.theta.len();
        self.theta.iter().rev().enumerate().fold(0.0, |acc, (i, &t)| acc * x + (r - i) as f64 * t)
    }

    /// The normalized 1D density on `[lo, hi]` by Simpson quadrature.
    pub fn density_1d(&self, lo: f64, hi: f64, n_nodes: usize) -> Result<Density1D> {
        if self.dim() != 1 {
            return Err(Error::Unsupported("quadrature normalization is only available in 1D".into()));
        }
        let t = self.clone();
        Density1D::new(move |x| t.energy(&[x]).map_or(f64::NAN, |e| -e), lo, hi, n_nodes)
    }

    /// `log Z_θ` on `[lo, hi]` in 1D.
    pub fn log_normalizer(&self, lo: f64, hi: f64, n_nodes: usize) -> Result<f64> {
        Ok(self.density_1d(lo, hi, n_nodes)?.log_normalizer())
    }
}
