//! Grid-based Bayes updates and series-kernel integrals.
//!
//! Everything here works on explicit one-dimensional grids with the
//! trapezoid rule, which keeps the oracle's numerics transparent: no
//! adaptivity to second-guess, accuracy controlled purely by node count and
//! truncation, both validated. Wright-Fisher with K = 2 is handled through
//! its one-dimensional simplex coordinate.

use crate::error::{Error, Result};
use crate::models::{CirParams, ModelSpec, Observation};

use statrs::function::gamma::ln_gamma;

/// Minimum node count for a contract-level Bayes update.
const MIN_NODES: usize = 10_000;

/// How much prior mass may be lost to grid truncation.
const MASS_SLACK: f64 = 1e-6;

/// A density sampled on a strictly increasing one-dimensional grid.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl DensityGrid {
    /// Tabulates `f` on `n` equispaced nodes over [lo, hi].
    pub fn from_fn(lo: f64, hi: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidParameter(format!(
                "bad grid interval [{lo}, {hi}]"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 nodes, got {n}"
            )));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|k| lo + k as f64 * step).collect();
        let values = nodes.iter().map(|x| f(*x)).collect();
        Ok(Self { nodes, values })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Total mass under the trapezoid rule.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.nodes, &self.values)
    }

    /// Mean and variance of the (assumed normalized) grid density.
    pub fn mean_var(&self) -> (f64, f64) {
        let weighted: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(x, v)| x * v)
            .collect();
        let mean = trapezoid(&self.nodes, &weighted);
        let second: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(x, v)| x * x * v)
            .collect();
        let var = trapezoid(&self.nodes, &second) - mean * mean;
        (mean, var)
    }
}

/// Trapezoid rule over a (possibly non-uniform) increasing grid.
pub fn trapezoid(nodes: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(nodes.len(), values.len());
    let mut total = 0.0;
    for k in 1..nodes.len() {
        total += 0.5 * (nodes[k] - nodes[k - 1]) * (values[k] + values[k - 1]);
    }
    total
}

/// Core grid Bayes step: multiply a prior by an arbitrary likelihood and
/// renormalize. Returns the posterior and the normalizing constant
/// int lik(x) prior(x) dx. No contract-level validation; see
/// [`quadrature_bayes`] for the checked entry point.
pub fn bayes_on_grid(
    prior: &DensityGrid,
    mut likelihood: impl FnMut(f64) -> f64,
) -> Result<(DensityGrid, f64)> {
    let weighted: Vec<f64> = prior
        .nodes
        .iter()
        .zip(&prior.values)
        .map(|(x, v)| likelihood(*x) * v)
        .collect();
    let z = trapezoid(&prior.nodes, &weighted);
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::ImpossibleObservation);
    }
    let posterior = DensityGrid {
        nodes: prior.nodes.clone(),
        values: weighted.iter().map(|v| v / z).collect(),
    };
    Ok((posterior, z))
}

/// Reference Bayes update of a gridded prior by one observation's emission
/// density. The prior must carry at least 10^4 nodes and at least
/// 1 - 1e-6 of its mass inside the grid, otherwise the truncation is too
/// tight to certify anything. Returns the posterior grid and the predictive
/// density of the observation.
pub fn quadrature_bayes(
    model: &ModelSpec,
    prior: &DensityGrid,
    y: &Observation,
) -> Result<(DensityGrid, f64)> {
    model.validate_observation(y)?;
    if prior.len() < MIN_NODES {
        return Err(Error::InvalidParameter(format!(
            "reference Bayes update needs at least {MIN_NODES} grid nodes, got {}",
            prior.len()
        )));
    }
    let mass = prior.mass();
    if (mass - 1.0).abs() > MASS_SLACK {
        return Err(Error::Numerical(format!(
            "prior grid carries mass {mass}; truncation too tight"
        )));
    }
    let state_of = state_embedding(model)?;
    bayes_on_grid(prior, |x| {
        model
            .log_emission_density(&state_of(x), y)
            .map(f64::exp)
            .unwrap_or(0.0)
    })
}

/// How a scalar grid node maps into the model's state space: identity for
/// the scalar models, (x, 1-x) for the two-type Wright-Fisher simplex.
fn state_embedding(model: &ModelSpec) -> Result<impl Fn(f64) -> Vec<f64>> {
    let wf_dim = match model {
        ModelSpec::Cir(_) | ModelSpec::Ou(_) => 0,
        ModelSpec::WrightFisher(p) => {
            if p.dim() != 2 {
                return Err(Error::InvalidParameter(format!(
                    "grid quadrature handles Wright-Fisher only for K = 2, got K = {}",
                    p.dim()
                )));
            }
            2
        }
    };
    Ok(move |x: f64| {
        if wf_dim == 2 {
            vec![x, 1.0 - x]
        } else {
            vec![x]
        }
    })
}

/// The t-step predictive density of a CIR signal started from Ga(r, theta),
/// computed by quadrature of the Poisson-gamma series form of the
/// transition kernel, evaluated at each target point.
///
/// The x-integral and the series sum are exchanged (both are non-negative,
/// so Tonelli applies): for each Poisson index k the overlap
/// A_k = int Ga(x; r, theta) Poisson(k; s x) dx is computed by Simpson's
/// rule, the series being truncated once the accumulated weight reaches
/// 1 - 1e-12; the predictive density is then sum_k A_k Ga(x'; k + delta/2,
/// beta). Rates: s = (gamma/sigma2)/(e^{2 gamma t} - 1), beta =
/// (gamma/sigma2)/(1 - e^{-2 gamma t}).
pub fn cir_predicted_density_series(
    params: &CirParams,
    r: f64,
    theta: f64,
    dt: f64,
    targets: &[f64],
) -> Result<Vec<f64>> {
    if !(r > 0.0 && theta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma component needs positive shape and rate, got ({r}, {theta})"
        )));
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "series kernel needs a positive elapsed time, got {dt}"
        )));
    }
    let c = params.gamma / params.sigma2;
    let s = c / f64::exp_m1(2.0 * params.gamma * dt);
    let beta = c / -f64::exp_m1(-2.0 * params.gamma * dt);

    let mut weights = Vec::new();
    let mut acc = 0.0;
    let mut k = 0usize;
    loop {
        let a_k = ga_poisson_overlap(r, theta, s, k);
        if !a_k.is_finite() {
            return Err(Error::Numerical(format!(
                "series overlap weight diverged at index {k}"
            )));
        }
        weights.push(a_k);
        acc += a_k;
        // The weights are a proper probability vector; stop when the tail is
        // inside the truncation target, but only past the mixture's bulk.
        if acc >= 1.0 - 1e-12 && k as f64 > s * r / theta {
            break;
        }
        if k > 10_000 {
            return Err(Error::Numerical(format!(
                "series truncation did not converge; accumulated mass {acc}"
            )));
        }
        k += 1;
    }

    let half_delta = 0.5 * params.delta;
    let out = targets
        .iter()
        .map(|x1| {
            if *x1 <= 0.0 {
                return 0.0;
            }
            let mut total = 0.0;
            for (k, a_k) in weights.iter().enumerate() {
                if *a_k == 0.0 {
                    continue;
                }
                let shape = k as f64 + half_delta;
                let ln_ga =
                    shape * beta.ln() - ln_gamma(shape) + (shape - 1.0) * x1.ln() - beta * x1;
                total += a_k * ln_ga.exp();
            }
            total
        })
        .collect();
    Ok(out)
}

/// int Ga(x; r, rate) Poisson(k; s x) dx by Simpson's rule after the
/// substitution x = e^v. In v the integrand exp((r+k) v - (rate+s) e^v),
/// up to constants, is smooth with a single interior maximum, so the rule
/// converges at full order; in x the factor x^{r-1} has an unbounded
/// derivative at zero for fractional shapes and would cap the accuracy far
/// above what the tolerance checks need. Window endpoints sit where the
/// integrand has fallen ~45 nats below the peak.
fn ga_poisson_overlap(r: f64, rate: f64, s: f64, k: usize) -> f64 {
    let kf = k as f64;
    let total = rate + s;
    let shape = r + kf;
    let v_star = (shape / total).ln();
    let lo = v_star - (45.0 / shape + 2.5);
    let hi = v_star + (45.0 / shape + 3.0).ln() + 1.5;
    let intervals = 4_000usize;
    let h = (hi - lo) / intervals as f64;
    let ln_const = r * rate.ln() - ln_gamma(r) + kf * s.ln() - ln_gamma(kf + 1.0);
    let mut sum = 0.0;
    for i in 0..=intervals {
        let v = lo + i as f64 * h;
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * (ln_const + shape * v - total * v.exp()).exp();
    }
    sum * h / 3.0
}
