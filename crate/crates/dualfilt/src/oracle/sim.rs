//! Signal simulators and synthetic data generation.
//!
//! CIR and OU transitions are sampled exactly (Poisson-gamma mixture and
//! Gaussian closed form), so nothing downstream of them carries
//! discretization error. Wright-Fisher has no exact sampler here; it runs
//! Euler-Maruyama on the simplex with a positivity floor, and its accuracy
//! is statistical only, which the step-halving test quantifies.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Gamma, Normal, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, Observation, ObservationValue};

/// Coordinates are floored here after every Euler substep so that the
/// square-root diffusion term stays real.
const SIMPLEX_FLOOR: f64 = 1e-12;

/// Plan for one synthetic observation run.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub model: ModelSpec,
    /// Number of observations; the first is emitted at time zero from a
    /// stationary draw.
    pub num_obs: usize,
    /// Time between consecutive observations.
    pub gap: f64,
    pub seed: u64,
    /// Euler substep bound, used by the Wright-Fisher transition only.
    pub euler_step: f64,
    /// Multinomial sample size per Wright-Fisher observation.
    pub wf_total: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_obs == 0 {
            return Err(Error::InvalidParameter(
                "simulation needs at least one observation".into(),
            ));
        }
        if !self.gap.is_finite() || self.gap <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "observation gap must be positive, got {}",
                self.gap
            )));
        }
        if !self.euler_step.is_finite() || self.euler_step <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Euler step must be positive, got {}",
                self.euler_step
            )));
        }
        if matches!(self.model, ModelSpec::WrightFisher(_)) && self.wf_total == 0 {
            return Err(Error::InvalidParameter(
                "multinomial sample size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One simulated trajectory with its observations.
#[derive(Debug, Clone)]
pub struct HmmSample {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub observations: Vec<Observation>,
}

/// Draws one state from the signal's stationary law.
pub fn sample_stationary(model: &ModelSpec, rng: &mut impl Rng) -> Result<Vec<f64>> {
    match model {
        ModelSpec::Cir(p) => {
            let dist = Gamma::new(0.5 * p.delta, p.sigma2 / p.gamma)
                .map_err(|e| Error::Numerical(format!("stationary gamma: {e}")))?;
            Ok(vec![rng.sample(dist)])
        }
        ModelSpec::Ou(p) => {
            let dist = Normal::new(p.gamma, p.alpha.sqrt())
                .map_err(|e| Error::Numerical(format!("stationary normal: {e}")))?;
            Ok(vec![rng.sample(dist)])
        }
        ModelSpec::WrightFisher(p) => {
            // Dirichlet(a) as normalized independent gammas; the floor
            // keeps boundary-hugging draws (a_i < 1) inside the open
            // simplex that the Euler scheme needs.
            let mut draws = Vec::with_capacity(p.dim());
            for aj in &p.a {
                let dist = Gamma::new(*aj, 1.0)
                    .map_err(|e| Error::Numerical(format!("stationary dirichlet: {e}")))?;
                draws.push(rng.sample::<f64, _>(dist).max(SIMPLEX_FLOOR));
            }
            let sum: f64 = draws.iter().sum();
            Ok(draws.into_iter().map(|g| g / sum).collect())
        }
    }
}

/// One draw from the time-dt transition kernel started at x0. CIR and OU
/// are exact; Wright-Fisher takes Euler substeps no longer than
/// `euler_step` (ignored by the other two models).
pub fn simulate_signal(
    model: &ModelSpec,
    x0: &[f64],
    dt: f64,
    euler_step: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let x0 = model.checked_state(x0)?;
    if !dt.is_finite() || dt < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "transition time must be finite and non-negative, got {dt}"
        )));
    }
    if dt == 0.0 {
        return Ok(x0);
    }
    match model {
        ModelSpec::Cir(p) => {
            let c = p.gamma / p.sigma2;
            let pois_rate = c * x0[0] / f64::exp_m1(2.0 * p.gamma * dt);
            let k = if pois_rate > 0.0 {
                let dist = Poisson::new(pois_rate)
                    .map_err(|e| Error::Numerical(format!("transition poisson: {e}")))?;
                rng.sample(dist)
            } else {
                0.0
            };
            let beta = c / -f64::exp_m1(-2.0 * p.gamma * dt);
            let dist = Gamma::new(k + 0.5 * p.delta, 1.0 / beta)
                .map_err(|e| Error::Numerical(format!("transition gamma: {e}")))?;
            Ok(vec![rng.sample(dist)])
        }
        ModelSpec::Ou(p) => {
            let decay = (-p.sigma2 * dt / p.alpha).exp();
            let mean = p.gamma + (x0[0] - p.gamma) * decay;
            let var = p.alpha * (1.0 - decay * decay);
            let z: f64 = rng.sample(StandardNormal);
            Ok(vec![mean + var.sqrt() * z])
        }
        ModelSpec::WrightFisher(p) => {
            if !euler_step.is_finite() || euler_step <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "Euler step must be positive, got {euler_step}"
                )));
            }
            let substeps = (dt / euler_step).ceil().max(1.0) as usize;
            let h = dt / substeps as f64;
            let total: f64 = p.total();
            let mut x = x0;
            let mut noise = vec![0.0; p.dim()];
            for _ in 0..substeps {
                // Noise with covariance h (diag(x) - x x^T), built from one
                // standard normal per type.
                let mut cross = 0.0;
                for (nj, xj) in noise.iter_mut().zip(&x) {
                    let z: f64 = rng.sample(StandardNormal);
                    *nj = (xj * h).sqrt() * z;
                    cross += *nj;
                }
                for ((xj, aj), nj) in x.iter_mut().zip(&p.a).zip(&noise) {
                    let drift = 0.5 * (aj - total * *xj);
                    *xj += drift * h + nj - *xj * cross;
                }
                let mut sum = 0.0;
                for xj in &mut x {
                    *xj = xj.max(SIMPLEX_FLOOR);
                    sum += *xj;
                }
                for xj in &mut x {
                    *xj /= sum;
                }
            }
            Ok(x)
        }
    }
}

/// Draws one observation value from the emission channel at state x.
/// `wf_total` is the multinomial sample size, used only by Wright-Fisher.
pub fn sample_emission(
    model: &ModelSpec,
    x: &[f64],
    wf_total: u64,
    rng: &mut impl Rng,
) -> Result<ObservationValue> {
    let x = model.checked_state(x)?;
    match model {
        ModelSpec::Cir(p) => {
            let rate = p.lambda_em * x[0];
            let n = if rate > 0.0 {
                let dist = Poisson::new(rate)
                    .map_err(|e| Error::Numerical(format!("emission poisson: {e}")))?;
                rng.sample::<f64, _>(dist) as u64
            } else {
                0
            };
            Ok(ObservationValue::Count(n))
        }
        ModelSpec::Ou(p) => {
            let dist = Normal::new(x[0], p.lambda_em.sqrt())
                .map_err(|e| Error::Numerical(format!("emission normal: {e}")))?;
            Ok(ObservationValue::Real(rng.sample(dist)))
        }
        ModelSpec::WrightFisher(_) => {
            // Multinomial by chained conditional binomials.
            let mut counts = vec![0u64; x.len()];
            let mut remaining = wf_total;
            let mut mass_left = 1.0;
            for j in 0..x.len() - 1 {
                if remaining == 0 {
                    break;
                }
                let pj = (x[j] / mass_left).clamp(0.0, 1.0);
                let dist = Binomial::new(remaining, pj)
                    .map_err(|e| Error::Numerical(format!("emission binomial: {e}")))?;
                let c = rng.sample(dist);
                counts[j] = c;
                remaining -= c;
                mass_left = (mass_left - x[j]).max(0.0);
            }
            *counts.last_mut().expect("dim >= 2") = remaining;
            Ok(ObservationValue::Counts(counts))
        }
    }
}

/// Generates a hidden trajectory plus observations: a stationary draw
/// observed at time zero, then transition and emission alternating at the
/// configured gap. Fully determined by `config.seed`.
pub fn simulate_hmm(config: &SimulationConfig) -> Result<HmmSample> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut times = Vec::with_capacity(config.num_obs);
    let mut states = Vec::with_capacity(config.num_obs);
    let mut observations = Vec::with_capacity(config.num_obs);
    let mut x = sample_stationary(&config.model, &mut rng)?;
    for i in 0..config.num_obs {
        let t = i as f64 * config.gap;
        if i > 0 {
            x = simulate_signal(&config.model, &x, config.gap, config.euler_step, &mut rng)?;
        }
        let value = sample_emission(&config.model, &x, config.wf_total, &mut rng)?;
        times.push(t);
        states.push(x.clone());
        observations.push(Observation { time: t, value });
    }
    Ok(HmmSample {
        times,
        states,
        observations,
    })
}
