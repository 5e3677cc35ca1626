//! The mixture filter: conjugate observation updates alternating with
//! dual-process prediction.
//!
//! A filtering distribution is a finite mixture sum_m w_m h(x,m,theta)
//! pi(dx) and is represented by its support, weights, and shared parameter.
//! Assimilating an observation translates every support point by the
//! observation's shift and reweights by the predictive constants;
//! propagating over an inter-observation gap pushes weight downward through
//! the death-process transition probabilities while theta follows its
//! deterministic flow. Both maps are closed-form, so a full filter run is
//! exact up to floating point and the optional pruning threshold.
//!
//! States are immutable; every operation returns a fresh state. Weights are
//! kept in plain space (they are probabilities of a normalized mixture) but
//! every update works through max-shifted logs, so extreme observations
//! cannot underflow a whole step.

use std::collections::BTreeMap;

use crate::dual_death::{self, LevelRates};
use crate::error::{Error, Result};
use crate::models::{DualParameter, ModelSpec, Observation};
use crate::multiindex::{IndexSet, MultiIndex};

/// Run-level knobs; `Default` gives the production configuration.
#[derive(Debug, Clone)]
pub struct FilterOptions {
    /// Components below this weight are dropped after each update; zero
    /// disables pruning.
    pub prune_eps: f64,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self { prune_eps: 1e-10 }
    }
}

impl FilterOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.prune_eps) {
            return Err(Error::InvalidParameter(format!(
                "prune threshold must lie in [0, 1), got {}",
                self.prune_eps
            )));
        }
        Ok(())
    }
}

/// One filtering distribution: mixture weights over a multi-index support
/// (absent for OU, whose dual is a single deterministic component), the
/// shared dual parameter, and the time the distribution refers to.
///
/// Canonical form: weights are strictly positive and sum to one, and
/// exact-zero components are never stored, so value equality of two states
/// means equality of the distributions they describe.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    model: ModelSpec,
    components: Option<BTreeMap<MultiIndex, f64>>,
    theta: DualParameter,
    time: f64,
}

/// What one predict-update-prune cycle produced.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: MixtureState,
    /// log p(y | past), the observation's predictive log density.
    pub log_predictive: f64,
    /// Mixture mass removed by pruning, before renormalization.
    pub pruned_mass: f64,
}

/// Per-observation record kept by [`run`].
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub time: f64,
    pub log_predictive: f64,
    pub pruned_mass: f64,
    /// Post-update, post-prune state.
    pub state: MixtureState,
}

/// A complete filter pass over an observation sequence.
#[derive(Debug, Clone)]
pub struct FilterTrace {
    pub steps: Vec<StepRecord>,
    /// Cumulative log-likelihood, the sum of the per-step predictive logs.
    pub loglik: f64,
}

impl FilterTrace {
    pub fn final_state(&self) -> Option<&MixtureState> {
        self.steps.last().map(|s| &s.state)
    }
}

impl MixtureState {
    /// Single-component state at time zero. CIR and WF require a starting
    /// multi-index; OU requires none.
    pub fn init(model: &ModelSpec, m0: Option<MultiIndex>, theta0: DualParameter) -> Result<Self> {
        model.validate_dual(&theta0)?;
        let components = match (model.death_dim(), m0) {
            (Some(dim), Some(m)) => {
                if m.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: m.dim(),
                    });
                }
                let mut map = BTreeMap::new();
                map.insert(m, 1.0);
                Some(map)
            }
            (Some(dim), None) => {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: 0,
                })
            }
            (None, None) => None,
            (None, Some(_)) => {
                return Err(Error::InvalidParameter(
                    "the OU dual carries no multi-index".into(),
                ))
            }
        };
        Ok(Self {
            model: model.clone(),
            components,
            theta: theta0,
            time: 0.0,
        })
    }

    /// The stationary prior: zero multi-index and the reversible-measure
    /// parameter, under which h is identically one.
    pub fn stationary(model: &ModelSpec) -> Self {
        Self::init(model, model.initial_index(), model.stationary_dual())
            .expect("stationary parameters are always valid")
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn theta(&self) -> &DualParameter {
        &self.theta
    }

    /// Mixture components in lexicographic support order; `None` for OU.
    pub fn components(&self) -> Option<&BTreeMap<MultiIndex, f64>> {
        self.components.as_ref()
    }

    /// Number of mixture components (1 for OU).
    pub fn support_size(&self) -> usize {
        self.components.as_ref().map_or(1, BTreeMap::len)
    }

    /// Size of the downward closure G(support), the support the next
    /// prediction will produce. 1 for OU.
    pub fn predictive_support(&self) -> Result<usize> {
        match &self.components {
            None => Ok(1),
            Some(map) => {
                let support = IndexSet::from_indices(map.keys().cloned())?;
                Ok(support.lower_set()?.len())
            }
        }
    }

    pub fn weight_sum(&self) -> f64 {
        self.components
            .as_ref()
            .map_or(1.0, |map| map.values().sum())
    }

    /// Assimilates an observation taken at exactly this state's time.
    /// Returns the posterior state and log p(y), the predictive log density
    /// of the observation under the current mixture.
    pub fn update(&self, y: &Observation) -> Result<(Self, f64)> {
        self.model.validate_observation(y)?;
        if y.time != self.time {
            return Err(Error::InvalidObservation(format!(
                "observation at time {} applied to a state at time {}; predict first",
                y.time, self.time
            )));
        }
        match &self.components {
            None => {
                let log_pred = self.model.log_predictive_const(None, &self.theta, y)?;
                if log_pred == f64::NEG_INFINITY {
                    return Err(Error::ImpossibleObservation);
                }
                let (_, theta) = self.model.conjugate_update(y, None, &self.theta)?;
                let state = Self {
                    model: self.model.clone(),
                    components: None,
                    theta,
                    time: self.time,
                };
                Ok((state, log_pred))
            }
            Some(map) => {
                let shift = self
                    .model
                    .observation_shift(y)?
                    .expect("indexed models shift by the observation");
                let mut logs = Vec::with_capacity(map.len());
                let mut max_lw = f64::NEG_INFINITY;
                for (m, w) in map {
                    let lc = self.model.log_predictive_const(Some(m), &self.theta, y)?;
                    let lw = w.ln() + lc;
                    max_lw = max_lw.max(lw);
                    logs.push((m, lw));
                }
                if max_lw == f64::NEG_INFINITY {
                    return Err(Error::ImpossibleObservation);
                }
                let mut z = 0.0;
                for (_, lw) in &logs {
                    z += (lw - max_lw).exp();
                }
                let mut components = BTreeMap::new();
                for (m, lw) in logs {
                    let w = (lw - max_lw).exp() / z;
                    if w > 0.0 {
                        components.insert(m.plus(&shift)?, w);
                    }
                }
                let any_m = map.keys().next().expect("canonical states are non-empty");
                let (_, theta) = self.model.conjugate_update(y, Some(any_m), &self.theta)?;
                let state = Self {
                    model: self.model.clone(),
                    components: Some(components),
                    theta,
                    time: self.time,
                };
                Ok((state, max_lw + z.ln()))
            }
        }
    }

    /// Propagates the mixture over a gap of length dt: support expands to
    /// its downward closure, weights move through the death-process
    /// transition rows, theta follows the deterministic flow. dt = 0 is the
    /// identity.
    pub fn predict(&self, dt: f64) -> Result<Self> {
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "prediction over a negative or non-finite gap {dt}"
            )));
        }
        if dt == 0.0 {
            return Ok(self.clone());
        }
        let theta_next = self.model.theta_flow(&self.theta, dt)?;
        let components = match &self.components {
            None => None,
            Some(map) => {
                let mut acc: BTreeMap<MultiIndex, f64> = BTreeMap::new();
                match (&self.model, &self.theta) {
                    (ModelSpec::Cir(_), DualParameter::Cir { theta }) => {
                        // Closed-form binomial rows; the generic path below
                        // would give the same numbers (acceptance-tested)
                        // at higher cost.
                        for (m, w) in map {
                            let m0 = m.coord(0);
                            for n in 0..=m0 {
                                let p =
                                    self.model.cir_binomial_transition(m0, m0 - n, dt, *theta)?;
                                if p > 0.0 {
                                    *acc.entry(MultiIndex::new(vec![n])?).or_insert(0.0) +=
                                        w * p;
                                }
                            }
                        }
                    }
                    _ => {
                        let kernel = self.model.death_kernel_spec()?;
                        let tau = self.model.rho_integral(&self.theta, dt)?;
                        let max_total = map.keys().map(MultiIndex::magnitude).max().unwrap_or(0);
                        let rates = LevelRates::from_kernel(&kernel, max_total)?;
                        for (m, w) in map {
                            let row = dual_death::table_at_tau(m, dt, tau, &rates)?;
                            for (n, p) in row.entries() {
                                if *p > 0.0 {
                                    *acc.entry(n.clone()).or_insert(0.0) += w * p;
                                }
                            }
                        }
                    }
                }
                let total: f64 = acc.values().sum();
                if !(total.is_finite() && total > 0.0) {
                    return Err(Error::Numerical(format!(
                        "predicted weights sum to {total}"
                    )));
                }
                for w in acc.values_mut() {
                    *w /= total;
                }
                Some(acc)
            }
        };
        Ok(Self {
            model: self.model.clone(),
            components,
            theta: theta_next,
            time: self.time + dt,
        })
    }

    /// Drops components with weight below eps and renormalizes. Returns the
    /// new state and the discarded mass. eps = 0 is the identity.
    pub fn prune(&self, eps: f64) -> Result<(Self, f64)> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!(
                "prune threshold must lie in [0, 1), got {eps}"
            )));
        }
        let map = match &self.components {
            None => return Ok((self.clone(), 0.0)),
            Some(map) => map,
        };
        if eps == 0.0 {
            return Ok((self.clone(), 0.0));
        }
        let mut kept = BTreeMap::new();
        let mut discarded = 0.0;
        for (m, w) in map {
            if *w < eps {
                discarded += w;
            } else {
                kept.insert(m.clone(), *w);
            }
        }
        if kept.is_empty() {
            return Err(Error::AllComponentsPruned(eps));
        }
        let total: f64 = kept.values().sum();
        for w in kept.values_mut() {
            *w /= total;
        }
        let state = Self {
            model: self.model.clone(),
            components: Some(kept),
            theta: self.theta.clone(),
            time: self.time,
        };
        Ok((state, discarded))
    }

    /// One full filter cycle: predict to the observation's time, update,
    /// prune at the given threshold.
    pub fn step(&self, y: &Observation, prune_eps: f64) -> Result<StepResult> {
        if y.time < self.time {
            return Err(Error::NonMonotoneTime {
                previous: self.time,
                current: y.time,
            });
        }
        let mut predicted = self.predict(y.time - self.time)?;
        // Adding the gap back cannot be trusted to reproduce y.time to the
        // last bit; the state is valid at the observation instant by
        // construction.
        predicted.time = y.time;
        let (updated, log_predictive) = predicted.update(y)?;
        let (state, pruned_mass) = updated.prune(prune_eps)?;
        Ok(StepResult {
            state,
            log_predictive,
            pruned_mass,
        })
    }

    /// Mean and variance of the filtering distribution, per signal
    /// coordinate.
    pub fn moments(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let dim = self.model.signal_dim();
        let mut mean = vec![0.0; dim];
        let mut second = vec![0.0; dim];
        let mut add = |m: Option<&MultiIndex>, w: f64| -> Result<()> {
            let (cm, cv) = self.model.component_moments(m, &self.theta)?;
            for j in 0..dim {
                mean[j] += w * cm[j];
                second[j] += w * (cv[j] + cm[j] * cm[j]);
            }
            Ok(())
        };
        match &self.components {
            None => add(None, 1.0)?,
            Some(map) => {
                for (m, w) in map {
                    add(Some(m), *w)?;
                }
            }
        }
        let var = second
            .iter()
            .zip(&mean)
            .map(|(s, m)| s - m * m)
            .collect();
        Ok((mean, var))
    }

    /// log of the mixture density at a state-space point.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        match &self.components {
            None => self.model.component_log_density(None, &self.theta, x),
            Some(map) => {
                let mut logs = Vec::with_capacity(map.len());
                let mut max_l = f64::NEG_INFINITY;
                for (m, w) in map {
                    let l = w.ln() + self.model.component_log_density(Some(m), &self.theta, x)?;
                    max_l = max_l.max(l);
                    logs.push(l);
                }
                if max_l == f64::NEG_INFINITY {
                    return Ok(f64::NEG_INFINITY);
                }
                let z: f64 = logs.iter().map(|l| (l - max_l).exp()).sum();
                Ok(max_l + z.ln())
            }
        }
    }
}

/// Runs the filter from the stationary prior over a whole observation
/// sequence, recording one [`StepRecord`] per observation.
pub fn run(
    model: &ModelSpec,
    observations: &[Observation],
    options: &FilterOptions,
) -> Result<FilterTrace> {
    options.validate()?;
    let mut state = MixtureState::stationary(model);
    let mut steps = Vec::with_capacity(observations.len());
    let mut loglik = 0.0;
    for y in observations {
        let outcome = state.step(y, options.prune_eps)?;
        loglik += outcome.log_predictive;
        steps.push(StepRecord {
            time: y.time,
            log_predictive: outcome.log_predictive,
            pruned_mass: outcome.pruned_mass,
            state: outcome.state.clone(),
        });
        state = outcome.state;
    }
    Ok(FilterTrace { steps, loglik })
}
