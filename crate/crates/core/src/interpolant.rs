//! Variance-preserving stochastic interpolant `I_t = cos(α_t) Z + sin(α_t) X`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type AngleFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Angle schedule `α: [0, 1] → [0, π/2]`.
#[derive(Clone, Default)]
pub enum InterpolantSchedule {
    /// `α_t = π t / 2`.
    #[default]
    Linear,
    /// User supplied angle map and its time derivative.
    Custom { alpha: AngleFn, alpha_dot: AngleFn },
}

impl fmt::Debug for InterpolantSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear => write!(f, "Linear"),
            Self::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl InterpolantSchedule {
    /// Builds a custom schedule, checking the boundary conditions and
    /// monotonicity on a grid of 1025 points.
    pub fn custom<A, D>(alpha: A, alpha_dot: D) -> Result<Self>
    where
        A: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if alpha(0.0) != 0.0 {
            return Err(Error::InvalidConfig("alpha(0) must be 0".into()));
        }
        if (alpha(1.0) - FRAC_PI_2).abs() > 1e-12 {
            return Err(Error::InvalidConfig("alpha(1) must be pi/2".into()));
        }
        let n = 1024;
        let mut prev = 0.0;
        for k in 1..=n {
            let a = alpha(k as f64 / n as f64);
            if !a.is_finite() || a < prev {
                return Err(Error::InvalidConfig(
                    "alpha must be finite and non-decreasing on [0, 1]".into(),
                ));
            }
            prev = a;
        }
        Ok(Self::Custom {
            alpha: Arc::new(alpha),
            alpha_dot: Arc::new(alpha_dot),
        })
    }

    pub fn alpha(&self, t: f64) -> f64 {
        match self {
            Self::Linear => FRAC_PI_2 * t,
            Self::Custom { alpha, .. } => alpha(t),
        }
    }

    pub fn alpha_dot(&self, t: f64) -> f64 {
        match self {
            Self::Linear => FRAC_PI_2,
            Self::Custom { alpha_dot, .. } => alpha_dot(t),
        }
    }

    /// `(cos α_t, sin α_t)` with exact values at both endpoints.
    pub fn coefficients(&self, t: f64) -> Result<(f64, f64)> {
        check_time(t)?;
        if t == 0.0 {
            return Ok((1.0, 0.0));
        }
        if t == 1.0 {
            return Ok((0.0, 1.0));
        }
        let a = self.alpha(t);
        Ok((a.cos(), a.sin()))
    }

    /// Time derivatives `(d/dt cos α_t, d/dt sin α_t)`.
    pub fn coefficient_rates(&self, t: f64) -> Result<(f64, f64)> {
        let (c, s) = self.coefficients(t)?;
        let ad = self.alpha_dot(t);
        Ok((-ad * s, ad * c))
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, 1]")));
    }
    Ok(())
}

/// `cos(α_t) z + sin(α_t) x`.
pub fn interpolant_sample(
    z: &[f64],
    x: &[f64],
    t: f64,
    sched: &InterpolantSchedule,
) -> Result<Vec<f64>> {
    if z.len() != x.len() {
        return Err(Error::mismatch("interpolant endpoints", z.len(), x.len()));
    }
    let (c, s) = sched.coefficients(t)?;
    Ok(mix(z, x, c, s))
}

pub(crate) fn mix(z: &[f64], x: &[f64], c: f64, s: f64) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    mix_into(z, x, c, s, &mut out);
    out
}

#[inline]
pub(crate) fn mix_into(z: &[f64], x: &[f64], c: f64, s: f64, out: &mut [f64]) {
    if s == 0.0 {
        out.copy_from_slice(z);
    } else if c == 0.0 {
        out.copy_from_slice(x);
    } else {
        for ((o, &a), &b) in out.iter_mut().zip(z).zip(x) {
            *o = c * a + s * b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        let s = InterpolantSchedule::Linear;
        let z = [0.3, -1.7, 1e300];
        let x = [2.5, 4.0, -3.0];
        assert_eq!(interpolant_sample(&z, &x, 0.0, &s).unwrap(), z.to_vec());
        assert_eq!(interpolant_sample(&z, &x, 1.0, &s).unwrap(), x.to_vec());
    }

    #[test]
    fn midpoint_mixes_equally() {
        let v = interpolant_sample(&[1.0], &[3.0], 0.5, &InterpolantSchedule::Linear).unwrap();
        assert!((v[0] - 4.0 * 2f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((v[0] - 2.8284).abs() < 1e-4);
    }

    #[test]
    fn rejects_times_outside_unit_interval() {
        let s = InterpolantSchedule::Linear;
        assert!(matches!(
            interpolant_sample(&[0.0], &[0.0], 1.5, &s),
            Err(Error::Domain(_))
        ));
        assert!(interpolant_sample(&[0.0], &[0.0], -0.1, &s).is_err());
    }

    #[test]
    fn custom_schedule_is_validated() {
        assert!(InterpolantSchedule::custom(|t| FRAC_PI_2 * t * t, |t| std::f64::consts::PI * t).is_ok());
        assert!(InterpolantSchedule::custom(|t| t, |_| 1.0).is_err());
        assert!(InterpolantSchedule::custom(
            |t| FRAC_PI_2 * (t + 0.8 * (10.0 * t).sin() * t * (1.0 - t)),
            |_| 0.0
        )
        .is_err());
    }
}
