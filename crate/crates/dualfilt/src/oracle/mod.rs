//! Independent ground-truth machinery for validating the exact filter.
//!
//! Nothing in here is needed to run the filter; everything is needed to
//! trust it. The submodules deliberately reach the same quantities as the
//! production code through different routes:
//!
//! - [`expm`]: death-process transition rows via a dense matrix exponential
//!   of the explicit generator, checked against the closed-form route.
//! - [`quadrature`]: grid-based Bayes updates and the series form of the
//!   CIR transition kernel, checked against conjugate closed forms.
//! - [`sim`]: signal and observation simulators (exact for CIR and OU,
//!   Euler-Maruyama for Wright-Fisher) for generating test data.
//! - [`particle`]: a bootstrap particle filter whose replicate-based
//!   standard errors define the agreement bands for the exact filter.
//!
//! All randomness is ChaCha8 seeded through explicit configuration, with one
//! counted stream per replicate, so every failure reproduces bit-for-bit.

pub mod expm;
pub mod particle;
pub mod quadrature;
pub mod sim;

pub use expm::generator_expm;
pub use particle::{particle_filter, ParticleConfig, ParticleSummary};
pub use quadrature::{
    bayes_on_grid, cir_predicted_density_series, quadrature_bayes, trapezoid, DensityGrid,
};
pub use sim::{
    sample_emission, sample_stationary, simulate_hmm, simulate_signal, HmmSample,
    SimulationConfig,
};
