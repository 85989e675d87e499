//! Moment guided diffusion (MGD).
//!
//! Samples maximum-entropy distributions constrained by moment functions with an
//! interacting-particle SDE that transports Gaussian noise along a stochastic
//! interpolant while keeping the particle moments on a prescribed path. The
//! crate also provides the pieces needed around the sampler: moment maps
//! (monomials, quadratics, wavelet scattering spectra), entropy and KL
//! estimators, Gaussian closed-form references and Langevin/MALA baselines.

pub mod analysis;
pub mod baselines;
pub mod ensemble;
pub mod error;
pub mod interpolant;
pub mod moments;
pub mod path;
pub(crate) mod reduce;
pub mod rng;
pub mod scattering;
pub mod solver;

pub use ensemble::ParticleEnsemble;
pub use error::{Error, Result};
pub use interpolant::{interpolant_sample, InterpolantSchedule};
pub use moments::{GramMatrix, MomentFunction};
pub use path::{estimate_moment_path, monomial_moment_path, MomentPath};
pub use rng::RngContract;
