//! Moment guided diffusion integrators.
//!
//! [`mgd_run`] is the predictor–corrector particle scheme. The predictor moves
//! particles along `η̂ᵀ∇φ` (with `Ĝ η̂ = dm/dt`) plus Gaussian noise; the
//! corrector projects the ensemble back onto the target moments with one
//! linearized step along `∇φ`. The multiplier of that projection also gives
//! the entropy lower bound `H(p_0) + ∫ θ_tᵀ ṁ_t dt`.
//!
//! Variants: drift fitted beforehand by regression on interpolant samples
//! ([`mgd_run_precomputed`]), and coefficients learned batch by batch so that
//! particles can later be sampled one at a time ([`learn_coefficients_offline`]).

mod config;
mod offline;
mod precomputed;
mod run;
mod score;
mod trace;

pub use config::{EntropyMultiplier, MgdConfig, StepRule};
pub use offline::{learn_coefficients_offline, CoefficientTable};
pub use precomputed::{fit_transport_drift, mgd_run_precomputed, SgdParams};
pub use run::mgd_run;
pub use score::{score_matching_estimate, score_matching_estimate_with};
pub use trace::{entropy_lower_bound, gaussian_entropy, SolverTrace, StepRecord};
