use crate::error::{Error, Result};
use crate::rng::{RngContract, DEFAULT_BLOCK};

/// `n_σ = ceil(a σ² + b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub a: f64,
    pub b: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        Self { a: 400.0, b: 1000.0 }
    }
}

impl StepRule {
    pub fn n_steps(&self, sigma2: f64) -> usize {
        ((self.a * sigma2 + self.b).ceil() as usize).max(1)
    }
}

/// Which multiplier feeds the entropy bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntropyMultiplier {
    /// The corrector's multiplier, rescaled by `1/(hσ²)`.
    #[default]
    Corrector,
    /// A separate solve of `Ĝ θ = mean Δφ` at the start of each step.
    Laplacian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgdConfig {
    pub sigma2: f64,
    pub step_rule: StepRule,
    /// Overrides the step rule when set.
    pub n_steps: Option<usize>,
    pub n_rep: usize,
    /// Gram regularization.
    pub delta: f64,
    /// Extra drift `−ε x`.
    pub epsilon_confine: f64,
    pub seed: u64,
    /// Particles per random stream and per partial sum.
    pub block_size: usize,
    /// Fixed reduction order, bit-reproducible across thread counts.
    pub deterministic: bool,
    pub entropy_multiplier: EntropyMultiplier,
    /// Entropy of the initial law; standard Gaussian when `None`.
    pub h0_entropy: Option<f64>,
}

impl MgdConfig {
    pub fn new(sigma2: f64, n_rep: usize, seed: u64) -> Self {
        Self {
            sigma2,
            step_rule: StepRule::default(),
            n_steps: None,
            n_rep,
            delta: 1e-7,
            epsilon_confine: 0.0,
            seed,
            block_size: DEFAULT_BLOCK,
            deterministic: true,
            entropy_multiplier: EntropyMultiplier::Corrector,
            h0_entropy: None,
        }
    }

    pub fn with_steps(mut self, n_steps: usize) -> Self {
        self.n_steps = Some(n_steps);
        self
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps.unwrap_or_else(|| self.step_rule.n_steps(self.sigma2))
    }

    pub fn step_size(&self) -> f64 {
        1.0 / self.n_steps() as f64
    }

    pub fn rng(&self) -> RngContract {
        RngContract::new(self.seed).with_block_size(self.block_size)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 must be finite and >= 0, got {}", self.sigma2));
        }
        if self.n_rep == 0 {
            return bad("n_rep must be positive".into());
        }
        if self.n_steps() == 0 {
            return bad("need at least one step".into());
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be >= 0, got {}", self.delta));
        }
        if !(self.epsilon_confine >= 0.0 && self.epsilon_confine.is_finite()) {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon_confine));
        }
        if self.block_size == 0 {
            return bad("block size must be positive".into());
        }
        Ok(())
    }
}
