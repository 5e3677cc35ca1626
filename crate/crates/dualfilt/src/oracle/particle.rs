//! Bootstrap particle filter used as a statistical cross-check.
//!
//! Deliberately the dumbest correct design: stationary initialization,
//! propagation through the exact (or Euler) samplers in [`super::sim`],
//! multinomial resampling at every step. Accuracy comes from particle count
//! and replicate averaging, never from shared code with the exact filter.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::models::{ModelSpec, Observation};
use crate::oracle::sim::{sample_stationary, simulate_signal};

/// Replicated-run plan. Each replicate draws from its own counted RNG
/// stream, so runs are reproducible and replicates independent.
#[derive(Debug, Clone)]
pub struct ParticleConfig {
    pub particles: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Passed through to the Wright-Fisher Euler propagator.
    pub euler_step: f64,
}

/// Replicate-averaged filtering summaries: outer index is the observation
/// step, inner the signal coordinate. Standard errors are over replicates.
#[derive(Debug, Clone)]
pub struct ParticleSummary {
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub mean_se: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
    pub var_se: Vec<Vec<f64>>,
    pub loglik: f64,
    pub loglik_se: f64,
}

struct ReplicateRun {
    mean: Vec<Vec<f64>>,
    var: Vec<Vec<f64>>,
    loglik: f64,
}

/// Bootstrap filter over one observation sequence.
///
/// Particles start from the stationary law; because that law is invariant,
/// no propagation is needed before the first observation regardless of its
/// timestamp. Weighted moments are recorded per step before resampling, and
/// the log-likelihood accumulates log of the mean unnormalized weight.
pub fn particle_filter(
    model: &ModelSpec,
    obs: &[Observation],
    config: &ParticleConfig,
) -> Result<ParticleSummary> {
    if config.particles < 100 {
        return Err(Error::InvalidParameter(format!(
            "particle filter needs at least 100 particles, got {}",
            config.particles
        )));
    }
    if config.replicates < 20 {
        return Err(Error::InvalidParameter(format!(
            "standard errors need at least 20 replicates, got {}",
            config.replicates
        )));
    }
    if obs.is_empty() {
        return Err(Error::InvalidObservation(
            "particle filter needs at least one observation".into(),
        ));
    }
    for y in obs {
        model.validate_observation(y)?;
    }
    for pair in obs.windows(2) {
        if pair[1].time < pair[0].time {
            return Err(Error::NonMonotoneTime {
                previous: pair[0].time,
                current: pair[1].time,
            });
        }
    }

    let runs: Vec<ReplicateRun> = (0..config.replicates)
        .map(|r| run_replicate(model, obs, config, r as u64))
        .collect::<Result<_>>()?;

    let steps = obs.len();
    let dim = model.signal_dim();
    let rf = config.replicates as f64;
    let mut summary = ParticleSummary {
        times: obs.iter().map(|y| y.time).collect(),
        mean: vec![vec![0.0; dim]; steps],
        mean_se: vec![vec![0.0; dim]; steps],
        var: vec![vec![0.0; dim]; steps],
        var_se: vec![vec![0.0; dim]; steps],
        loglik: 0.0,
        loglik_se: 0.0,
    };
    for i in 0..steps {
        for j in 0..dim {
            let (m, se) = pooled(runs.iter().map(|run| run.mean[i][j]), rf);
            summary.mean[i][j] = m;
            summary.mean_se[i][j] = se;
            let (v, se) = pooled(runs.iter().map(|run| run.var[i][j]), rf);
            summary.var[i][j] = v;
            summary.var_se[i][j] = se;
        }
    }
    let (ll, se) = pooled(runs.iter().map(|run| run.loglik), rf);
    summary.loglik = ll;
    summary.loglik_se = se;
    Ok(summary)
}

/// Mean and standard error of one scalar across replicates.
fn pooled(values: impl Iterator<Item = f64> + Clone, rf: f64) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / rf;
    let ss = values.map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (rf - 1.0)).sqrt() / rf.sqrt())
}

fn run_replicate(
    model: &ModelSpec,
    obs: &[Observation],
    config: &ParticleConfig,
    replicate: u64,
) -> Result<ReplicateRun> {
    let n = config.particles;
    let dim = model.signal_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replicate + 1);

    let mut particles: Vec<Vec<f64>> = (0..n)
        .map(|_| sample_stationary(model, &mut rng))
        .collect::<Result<_>>()?;
    let mut logw = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut cumulative = vec![0.0; n];
    let mut run = ReplicateRun {
        mean: Vec::with_capacity(obs.len()),
        var: Vec::with_capacity(obs.len()),
        loglik: 0.0,
    };
    let mut prev_time = obs[0].time;

    for (step, y) in obs.iter().enumerate() {
        let dt = y.time - prev_time;
        prev_time = y.time;
        if dt > 0.0 {
            for p in &mut particles {
                *p = simulate_signal(model, p, dt, config.euler_step, &mut rng)?;
            }
        }

        let mut max_lw = f64::NEG_INFINITY;
        for (lw, p) in logw.iter_mut().zip(&particles) {
            *lw = model.log_emission_density(p, y)?;
            max_lw = max_lw.max(*lw);
        }
        if !max_lw.is_finite() {
            return Err(Error::ParticleDegeneracy(step));
        }
        let mut total = 0.0;
        for (w, lw) in weights.iter_mut().zip(&logw) {
            *w = (lw - max_lw).exp();
            total += *w;
        }
        if total <= 0.0 {
            return Err(Error::ParticleDegeneracy(step));
        }
        run.loglik += max_lw + (total / n as f64).ln();

        let mut mean = vec![0.0; dim];
        for (w, p) in weights.iter().zip(&particles) {
            for (mj, xj) in mean.iter_mut().zip(p) {
                *mj += w * xj;
            }
        }
        for mj in &mut mean {
            *mj /= total;
        }
        let mut var = vec![0.0; dim];
        for (w, p) in weights.iter().zip(&particles) {
            for ((vj, mj), xj) in var.iter_mut().zip(&mean).zip(p) {
                let d = xj - mj;
                *vj += w * d * d;
            }
        }
        for vj in &mut var {
            *vj /= total;
        }
        run.mean.push(mean);
        run.var.push(var);

        let mut acc = 0.0;
        for (c, w) in cumulative.iter_mut().zip(&weights) {
            acc += w;
            *c = acc;
        }
        let resampled: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let u: f64 = rng.random_range(0.0..acc);
                let idx = cumulative.partition_point(|c| *c < u).min(n - 1);
                particles[idx].clone()
            })
            .collect();
        particles = resampled;
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::sim::{simulate_hmm, SimulationConfig};

    fn ou() -> ModelSpec {
        ModelSpec::ou(0.2, 1.3, 0.9, 0.6).unwrap()
    }

    #[test]
    fn single_observation_matches_the_conjugate_posterior() {
        // One Gaussian observation of a stationary N(0.2, 1.3) start:
        // posterior mean (alpha y + lambda gamma) / (alpha + lambda).
        let model = ou();
        let y = Observation::real(0.0, 0.9);
        let summary = particle_filter(
            &model,
            &[y],
            &ParticleConfig {
                particles: 2_000,
                replicates: 20,
                seed: 17,
                euler_step: 1e-4,
            },
        )
        .unwrap();
        let want = (1.3 * 0.9 + 0.6 * 0.2) / (1.3 + 0.6);
        let se = summary.mean_se[0][0];
        assert!(
            (summary.mean[0][0] - want).abs() < 3.0 * se,
            "mean {} vs {want} (se {se})",
            summary.mean[0][0]
        );
        // Predictive density of y is N(0.9; 0.2, 1.9).
        let var = 1.3 + 0.6;
        let want_ll = -0.5 * ((0.9f64 - 0.2).powi(2) / var
            + var.ln()
            + (2.0 * std::f64::consts::PI).ln());
        assert!(
            (summary.loglik - want_ll).abs() < 3.0 * summary.loglik_se,
            "loglik {} vs {want_ll}",
            summary.loglik
        );
    }

    #[test]
    fn doubling_particles_shrinks_the_error_at_the_monte_carlo_rate() {
        let model = ou();
        let sample = simulate_hmm(&SimulationConfig {
            model: model.clone(),
            num_obs: 10,
            gap: 0.5,
            seed: 23,
            euler_step: 1e-4,
            wf_total: 0,
        })
        .unwrap();
        let run = |particles: usize| {
            particle_filter(
                &model,
                &sample.observations,
                &ParticleConfig {
                    particles,
                    replicates: 200,
                    seed: 31,
                    euler_step: 1e-4,
                },
            )
            .unwrap()
            .loglik_se
        };
        let ratio = run(500) / run(1_000);
        let want = std::f64::consts::SQRT_2;
        assert!(
            (ratio - want).abs() < 0.3 * want,
            "SE ratio {ratio} is off the Monte Carlo rate"
        );
    }

    #[test]
    fn hopeless_observations_report_degeneracy() {
        // An observation so far out that every Gaussian log weight
        // underflows to -inf.
        let model = ou();
        let err = particle_filter(
            &model,
            &[Observation::real(0.0, 1e300)],
            &ParticleConfig {
                particles: 200,
                replicates: 20,
                seed: 1,
                euler_step: 1e-4,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::ParticleDegeneracy(0)));
    }

    #[test]
    fn config_bounds_are_enforced() {
        let model = ou();
        let y = [Observation::real(0.0, 0.1)];
        let base = ParticleConfig {
            particles: 100,
            replicates: 20,
            seed: 0,
            euler_step: 1e-4,
        };
        assert!(particle_filter(
            &model,
            &y,
            &ParticleConfig {
                particles: 99,
                ..base.clone()
            }
        )
        .is_err());
        assert!(particle_filter(
            &model,
            &y,
            &ParticleConfig {
                replicates: 19,
                ..base.clone()
            }
        )
        .is_err());
        assert!(particle_filter(&model, &[], &base).is_err());
        let unordered = [Observation::real(1.0, 0.1), Observation::real(0.5, 0.0)];
        assert!(matches!(
            particle_filter(&model, &unordered, &base).unwrap_err(),
            Error::NonMonotoneTime { .. }
        ));
    }
}
