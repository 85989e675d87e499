//! Small series utilities: rolling volatility and log-log rate fits.

use crate::error::{Error, Result};

/// `vol(u) = sqrt(mean_{v<w} x(u−v)²)` with periodic wrap.
pub fn rolling_volatility(x: &[f64], w: usize) -> Result<Vec<f64>> {
    if w == 0 {
        return Err(Error::InvalidConfig("window must be at least 1".into()));
    }
    if w > x.len() {
        return Err(Error::InvalidConfig(format!(
            "window {w} exceeds series length {}",
            x.len()
        )));
    }
    let n = x.len();
    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    // running sum recomputed per output so errors never accumulate
    Ok((0..n)
        .map(|u| {
            let s: f64 = (0..w).map(|v| sq[(u + n - v) % n]).sum();
            (s / w as f64).sqrt()
        })
        .collect())
}

/// Least-squares line through `(log σ², log gap)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
}

impl RateFit {
    pub fn predict(&self, sigma2: f64) -> f64 {
        (self.intercept + self.slope * sigma2.ln()).exp()
    }
}

/// Fits `gap ≈ C (σ²)^slope` by least squares in log-log coordinates.
pub fn loglog_rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InvalidConfig("a rate fit needs at least 3 points".into()));
    }
    if let Some(&(s, g)) = points.iter().find(|(s, g)| !(*s > 0.0 && *g > 0.0 && s.is_finite() && g.is_finite())) {
        return Err(Error::Domain(format!("rate fit needs positive finite points, got ({s}, {g})")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all σ² values are equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
    })
}
