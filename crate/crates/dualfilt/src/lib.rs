//! Exact finite-mixture filtering for reversible diffusions.
//!
//! This crate implements optimal (exact) filtering for hidden Markov models
//! whose hidden signal is a Cox-Ingersoll-Ross, Ornstein-Uhlenbeck, or
//! Wright-Fisher diffusion observed at discrete times through a conjugate
//! emission channel (Poisson, Gaussian, or multinomial respectively).
//!
//! For these models the filtering distribution stays inside a family of
//! finite mixtures of conjugate measures. Assimilating an observation
//! translates the mixture support and reweights the components; propagating
//! between observations expands the support downward through the transition
//! probabilities of a multidimensional pure death process paired with a
//! deterministic parameter flow. Both steps are computed in closed form, so
//! the filter is exact up to floating point and optional support pruning.
//!
//! Module map:
//!
//! * [`multiindex`]: multi-index and index-set combinatorics (supports).
//! * [`dual_death`]: death-process transition probabilities.
//! * [`models`]: the three signal families, their conjugate updates, dual
//!   parameter flows, and predictive constants.
//! * [`filter`]: the mixture filter itself.
//! * [`oracle`]: independent reference machinery (simulators, a bootstrap
//!   particle filter, a dense matrix-exponential check, grid quadrature)
//!   used to validate the closed-form path.

pub mod dual_death;
pub mod error;
pub mod filter;
pub mod models;
pub mod multiindex;
pub mod oracle;

pub use error::{Error, Result};
pub use filter::{FilterOptions, FilterTrace, MixtureState};
pub use models::{DualParameter, ModelSpec, Observation, ObservationValue};
pub use multiindex::{IndexSet, MultiIndex};
