//! Equilibrium MCMC baselines (Langevin, MALA) on exponential-family targets
//! and the barrier-height cost comparison against MGD.

mod barrier;
mod langevin;
mod mala;
mod target;

pub use barrier::{
    barrier_cost_experiment, barrier_kl, barrier_table_csv, mala_steps_to_target, mgd_kl_at, mgd_steps_to_target, BarrierConfig,
    BarrierRow, Sampler,
};
pub use langevin::langevin_run;
pub use mala::{
    adapt_step_size, mala_log_proposal, mala_run, mh_accept_probability, MalaOutput, MalaParams, COLLAPSE_THRESHOLD,
    OPTIMAL_ACCEPTANCE,
};
pub use target::ExpFamilyTarget;
