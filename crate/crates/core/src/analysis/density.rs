//! Unnormalized 1D densities tabulated on a grid and normalized by Simpson's rule.

use rand::Rng;

use crate::error::{Error, Result};

/// Quadrature nodes used when none are given.
pub const DEFAULT_NODES: usize = 10_001;

/// A density on `[lo, hi]` known up to its normalizer.
#[derive(Clone)]
pub struct Density1D {
    lo: f64,
    hi: f64,
    /// `log p` at the nodes, shifted so the maximum is 0.
    log_p: Vec<f64>,
    shift: f64,
    /// log of `∫ exp(log_p)` (shifted).
    log_z: f64,
    /// Normalized CDF at the nodes.
    cdf: Vec<f64>,
    log_density: std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Density1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Density1D")
            .field("support", &(self.lo, self.hi))
            .field("nodes", &self.log_p.len())
            .field("log_normalizer", &self.log_normalizer())
            .finish()
    }
}

impl Density1D {
    /// Tabulates `log_density` on `n_nodes` equally spaced points (rounded up
    /// to an odd count for Simpson's rule).
    pub fn new<F>(log_density: F, lo: f64, hi: f64, n_nodes: usize) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!("bad support [{lo}, {hi}]")));
        }
        let n = n_nodes.max(3) | 1;
        let dx = (hi - lo) / (n - 1) as f64;
        let raw: Vec<f64> = (0..n).map(|i| log_density(node(lo, hi, dx, i, n))).collect();
        if raw.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::NonFinite("log density on its support".into()));
        }
        let shift = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            return Err(Error::Degenerate("density vanishes on its support".into()));
        }
        let log_p: Vec<f64> = raw.iter().map(|v| v - shift).collect();
        let p: Vec<f64> = log_p.iter().map(|v| v.exp()).collect();
        let z = simpson(&p, dx);
        let mut cdf = vec![0.0; n];
        for i in 1..n {
            cdf[i] = cdf[i - 1] + 0.5 * dx * (p[i - 1] + p[i]);
        }
        let last = cdf[n - 1];
        for c in &mut cdf {
            *c /= last;
        }
        Ok(Self {
            lo,
            hi,
            log_p,
            shift,
            log_z: z.ln(),
            cdf,
            log_density: std::sync::Arc::new(log_density),
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// `log ∫ exp(log_density)`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_z + self.shift
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return f64::NEG_INFINITY;
        }
        (self.log_density)(x) - self.log_normalizer()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    fn dx(&self) -> f64 {
        (self.hi - self.lo) / (self.log_p.len() - 1) as f64
    }

    /// `E[f(X)]` by Simpson's rule on the nodes.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let n = self.log_p.len();
        let dx = self.dx();
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let p = (self.log_p[i] - self.log_z).exp();
                if p == 0.0 {
                    0.0
                } else {
                    p * f(node(self.lo, self.hi, dx, i, n))
                }
            })
            .collect();
        simpson(&vals, dx)
    }

    /// Differential entropy `−∫ p log p`.
    pub fn entropy(&self) -> f64 {
        let n = self.log_p.len();
        let dx = self.dx();
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let lp = self.log_p[i] - self.log_z;
                if lp == f64::NEG_INFINITY {
                    0.0
                } else {
                    -lp.exp() * lp
                }
            })
            .collect();
        simpson(&vals, dx)
    }

    /// `E[φ(X)]` for a scalar moment map given as closures.
    pub fn moments(&self, phi: &[&dyn Fn(f64) -> f64]) -> Vec<f64> {
        phi.iter().map(|f| self.expectation(f)).collect()
    }

    /// Probability of each bin `[e_i, e_{i+1}]`, each integrated with an
    /// 8-panel Simpson rule on the exact density.
    pub fn bin_masses(&self, edges: &[f64]) -> Vec<f64> {
        const PANELS: usize = 8;
        let log_norm = self.log_normalizer();
        edges
            .windows(2)
            .map(|e| {
                let (a, b) = (e[0].max(self.lo), e[1].min(self.hi));
                if !(a < b) {
                    return 0.0;
                }
                let dx = (b - a) / PANELS as f64;
                let vals: Vec<f64> = (0..=PANELS)
                    .map(|i| ((self.log_density)(a + i as f64 * dx) - log_norm).exp())
                    .collect();
                simpson(&vals, dx)
            })
            .collect()
    }

    /// CDF interpolated linearly between nodes.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let pos = (x - self.lo) / self.dx();
        let i = (pos as usize).min(self.cdf.len() - 2);
        let f = pos - i as f64;
        self.cdf[i] + f * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Inverse CDF by linear interpolation between nodes.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = self.cdf.partition_point(|&c| c < u);
        if i == 0 {
            return self.lo;
        }
        if i >= self.cdf.len() {
            return self.hi;
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let n = self.cdf.len();
        let dx = self.dx();
        let x0 = node(self.lo, self.hi, dx, i - 1, n);
        let x1 = node(self.lo, self.hi, dx, i, n);
        if c1 > c0 {
            x0 + (u - c0) / (c1 - c0) * (x1 - x0)
        } else {
            x0
        }
    }

    /// `n` i.i.d. draws by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.quantile(rng.random::<f64>())).collect()
    }

    /// The quantiles at `(i + ½)/n`, a low-discrepancy stand-in for a sample.
    pub fn stratified(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.quantile((i as f64 + 0.5) / n as f64)).collect()
    }
}

fn node(lo: f64, hi: f64, dx: f64, i: usize, n: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + i as f64 * dx
    }
}

/// Composite Simpson rule; `vals.len()` must be odd.
fn simpson(vals: &[f64], dx: f64) -> f64 {
    let n = vals.len();
    debug_assert!(n % 2 == 1 && n >= 3);
    let mut s = vals[0] + vals[n - 1];
    for (i, v) in vals.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * dx / 3.0
}
