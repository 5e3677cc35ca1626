//! The three concrete signal/emission families and their conjugate structure.
//!
//! Each model supplies the same interface: a reversible law pi, a family of
//! conjugate measures h(x,m,theta) pi(dx) indexed by a multi-index m and a
//! deterministic parameter theta, an emission density f_x(y), the conjugate
//! update maps (m,theta) -> (t(y,m), T(y,theta)), the normalizing constant
//! c(m,theta,y) of one Bayes step, the deterministic dual flow Theta_t, and
//! the death-process ingredients consumed by [`crate::dual_death`].
//!
//! Families:
//! - CIR signal dX = (delta sigma2 - 2 gamma X) dt + 2 sigma sqrt(X) dB on
//!   [0,inf), reversible w.r.t. Ga(delta/2, gamma/sigma2), observed through
//!   Poisson(lambda_em X) counts. Conjugate components are Ga(delta/2+m,
//!   theta); the dual jumps at lambda(m) = 2 sigma2 modulated by rho = theta.
//! - OU signal with stationary law N(gamma, alpha), observed in Gaussian
//!   noise with variance lambda_em. The dual is purely deterministic (no
//!   multi-index) and the filter reduces to the Kalman recursion.
//! - K-type Wright-Fisher signal on the simplex, reversible w.r.t.
//!   Dirichlet(a), observed through multinomial draws. No deterministic
//!   parameter; components are Dirichlet(a+m) and lambda(|m|) =
//!   (|a|+|m|-1)/2 with rho = 1.
//!
//! All densities are computed in log space; gamma-function ratios go through
//! `ln_gamma` so large |m| cannot overflow.

use statrs::function::gamma::ln_gamma;

use crate::dual_death::DeathKernel;
use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;

/// Slack accepted when validating that a Wright-Fisher state sums to one;
/// inputs inside the slack are renormalized.
const SIMPLEX_SLACK: f64 = 1e-9;

/// CIR signal parameters and Poisson emission intensity multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct CirParams {
    pub delta: f64,
    pub gamma: f64,
    pub sigma2: f64,
    pub lambda_em: f64,
}

/// OU signal parameters; `lambda_em` is the observation variance.
#[derive(Debug, Clone, PartialEq)]
pub struct OuParams {
    pub gamma: f64,
    pub alpha: f64,
    pub sigma2: f64,
    pub lambda_em: f64,
}

/// Wright-Fisher mutation parameters, one per type.
#[derive(Debug, Clone, PartialEq)]
pub struct WfParams {
    pub a: Vec<f64>,
}

impl WfParams {
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// |a|, the total mutation mass.
    pub fn total(&self) -> f64 {
        self.a.iter().sum()
    }
}

/// A fully validated model: signal family, its parameters, and the emission
/// channel. Construct through [`ModelSpec::cir`], [`ModelSpec::ou`],
/// [`ModelSpec::wright_fisher`].
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Cir(CirParams),
    Ou(OuParams),
    WrightFisher(WfParams),
}

/// Deterministic dual parameter theta. CIR carries a gamma rate, OU a
/// Gaussian mean/variance pair, Wright-Fisher nothing.
#[derive(Debug, Clone, PartialEq)]
pub enum DualParameter {
    Cir { theta: f64 },
    Ou { mean: f64, var: f64 },
    WrightFisher,
}

/// One time-stamped emission datum.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub value: ObservationValue,
}

/// Emission value per family: a Poisson count, a real measurement, or a
/// vector of multinomial counts whose total is the trial count.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationValue {
    Count(u64),
    Real(f64),
    Counts(Vec<u64>),
}

impl Observation {
    pub fn count(time: f64, y: u64) -> Self {
        Self {
            time,
            value: ObservationValue::Count(y),
        }
    }

    pub fn real(time: f64, y: f64) -> Self {
        Self {
            time,
            value: ObservationValue::Real(y),
        }
    }

    pub fn counts(time: f64, ys: Vec<u64>) -> Self {
        Self {
            time,
            value: ObservationValue::Counts(ys),
        }
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

fn require_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name} must be finite, got {v}"
        )));
    }
    Ok(())
}

impl ModelSpec {
    pub fn cir(delta: f64, gamma: f64, sigma2: f64, lambda_em: f64) -> Result<Self> {
        require_positive("delta", delta)?;
        require_positive("gamma", gamma)?;
        require_positive("sigma2", sigma2)?;
        require_positive("lambda_em", lambda_em)?;
        Ok(Self::Cir(CirParams {
            delta,
            gamma,
            sigma2,
            lambda_em,
        }))
    }

    pub fn ou(gamma: f64, alpha: f64, sigma2: f64, lambda_em: f64) -> Result<Self> {
        require_finite("gamma", gamma)?;
        require_positive("alpha", alpha)?;
        require_positive("sigma2", sigma2)?;
        require_positive("lambda_em", lambda_em)?;
        Ok(Self::Ou(OuParams {
            gamma,
            alpha,
            sigma2,
            lambda_em,
        }))
    }

    pub fn wright_fisher(a: Vec<f64>) -> Result<Self> {
        if a.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "Wright-Fisher needs at least two types, got {}",
                a.len()
            )));
        }
        for (j, aj) in a.iter().enumerate() {
            require_positive(&format!("a[{j}]"), *aj)?;
        }
        Ok(Self::WrightFisher(WfParams { a }))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Cir(_) => "cir",
            Self::Ou(_) => "ou",
            Self::WrightFisher(_) => "wf",
        }
    }

    /// Dimension of the signal state space.
    pub fn signal_dim(&self) -> usize {
        match self {
            Self::Cir(_) | Self::Ou(_) => 1,
            Self::WrightFisher(p) => p.dim(),
        }
    }

    /// Dimension K of the death-process lattice; `None` for OU, whose dual
    /// has no jump component.
    pub fn death_dim(&self) -> Option<usize> {
        match self {
            Self::Cir(_) => Some(1),
            Self::Ou(_) => None,
            Self::WrightFisher(p) => Some(p.dim()),
        }
    }

    /// The parameter theta-tilde at which h(x, 0, theta-tilde) = 1, i.e. the
    /// component reproducing the reversible law itself.
    pub fn stationary_dual(&self) -> DualParameter {
        match self {
            Self::Cir(p) => DualParameter::Cir {
                theta: p.gamma / p.sigma2,
            },
            Self::Ou(p) => DualParameter::Ou {
                mean: p.gamma,
                var: p.alpha,
            },
            Self::WrightFisher(_) => DualParameter::WrightFisher,
        }
    }

    /// The zero multi-index for models with a death component.
    pub fn initial_index(&self) -> Option<MultiIndex> {
        self.death_dim()
            .map(|k| MultiIndex::zeros(k).expect("model dimensions are positive"))
    }

    pub fn validate_dual(&self, theta: &DualParameter) -> Result<()> {
        match (self, theta) {
            (Self::Cir(_), DualParameter::Cir { theta }) => require_positive("theta", *theta),
            (Self::Ou(_), DualParameter::Ou { mean, var }) => {
                require_finite("mean", *mean)?;
                require_positive("var", *var)
            }
            (Self::WrightFisher(_), DualParameter::WrightFisher) => Ok(()),
            _ => Err(Error::InvalidParameter(format!(
                "dual parameter {theta:?} does not belong to the {} family",
                self.name()
            ))),
        }
    }

    /// True when theta sits outside the range covered by the duality proof
    /// (CIR: theta < gamma/sigma2; OU: var > alpha). The formulas remain
    /// valid there; callers may surface a diagnostic.
    pub fn outside_proof_range(&self, theta: &DualParameter) -> bool {
        match (self, theta) {
            (Self::Cir(p), DualParameter::Cir { theta }) => {
                *theta < p.gamma / p.sigma2 * (1.0 - 1e-12)
            }
            (Self::Ou(p), DualParameter::Ou { var, .. }) => *var > p.alpha * (1.0 + 1e-12),
            _ => false,
        }
    }

    pub fn validate_observation(&self, y: &Observation) -> Result<()> {
        if !y.time.is_finite() || y.time < 0.0 {
            return Err(Error::InvalidObservation(format!(
                "observation time must be finite and non-negative, got {}",
                y.time
            )));
        }
        match (self, &y.value) {
            (Self::Cir(_), ObservationValue::Count(_)) => Ok(()),
            (Self::Ou(_), ObservationValue::Real(v)) => {
                if v.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidObservation(format!(
                        "real observation must be finite, got {v}"
                    )))
                }
            }
            (Self::WrightFisher(p), ObservationValue::Counts(ys)) => {
                if ys.len() != p.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: p.dim(),
                        got: ys.len(),
                    });
                }
                Ok(())
            }
            _ => Err(Error::InvalidObservation(format!(
                "observation {:?} does not match the {} emission channel",
                y.value,
                self.name()
            ))),
        }
    }

    pub(crate) fn checked_state(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Cir(_) => {
                if x.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: x.len(),
                    });
                }
                if !x[0].is_finite() || x[0] < 0.0 {
                    return Err(Error::OutOfStateSpace(format!(
                        "CIR state must be finite and non-negative, got {}",
                        x[0]
                    )));
                }
                Ok(vec![x[0]])
            }
            Self::Ou(_) => {
                if x.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: x.len(),
                    });
                }
                if !x[0].is_finite() {
                    return Err(Error::OutOfStateSpace(format!(
                        "OU state must be finite, got {}",
                        x[0]
                    )));
                }
                Ok(vec![x[0]])
            }
            Self::WrightFisher(p) => {
                if x.len() != p.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: p.dim(),
                        got: x.len(),
                    });
                }
                let mut sum = 0.0;
                for xi in x {
                    if !xi.is_finite() || *xi < 0.0 {
                        return Err(Error::OutOfStateSpace(format!(
                            "simplex coordinate must be finite and non-negative, got {xi}"
                        )));
                    }
                    sum += xi;
                }
                if (sum - 1.0).abs() > SIMPLEX_SLACK {
                    return Err(Error::OutOfStateSpace(format!(
                        "simplex point sums to {sum}"
                    )));
                }
                Ok(x.iter().map(|xi| xi / sum).collect())
            }
        }
    }

    fn index_for(&self, m: Option<&MultiIndex>) -> Result<Option<MultiIndex>> {
        match (self.death_dim(), m) {
            (Some(k), Some(idx)) => {
                if idx.dim() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        got: idx.dim(),
                    });
                }
                Ok(Some(idx.clone()))
            }
            (Some(k), None) => Err(Error::DimensionMismatch {
                expected: k,
                got: 0,
            }),
            (None, None) => Ok(None),
            (None, Some(_)) => Err(Error::InvalidParameter(
                "the OU dual carries no multi-index".into(),
            )),
        }
    }

    /// log h(x, m, theta), the conjugate component's density relative to the
    /// reversible law. Minus infinity on the boundary zeros (e.g. x = 0 with
    /// m >= 1).
    pub fn log_h(&self, x: &[f64], m: Option<&MultiIndex>, theta: &DualParameter) -> Result<f64> {
        let x = self.checked_state(x)?;
        let m = self.index_for(m)?;
        self.validate_dual(theta)?;
        match (self, theta) {
            (Self::Cir(p), DualParameter::Cir { theta }) => {
                let m = m.unwrap().coord(0);
                let c = p.gamma / p.sigma2;
                let r = 0.5 * p.delta;
                let mut ln = ln_gamma(r) - ln_gamma(r + m as f64) - r * c.ln()
                    + (r + m as f64) * theta.ln()
                    - (theta - c) * x[0];
                if m > 0 {
                    ln += m as f64 * x[0].ln();
                }
                Ok(ln)
            }
            (Self::Ou(p), DualParameter::Ou { mean, var }) => {
                let d_post = x[0] - mean;
                let d_stat = x[0] - p.gamma;
                Ok(0.5 * (p.alpha / var).ln() - d_post * d_post / (2.0 * var)
                    + d_stat * d_stat / (2.0 * p.alpha))
            }
            (Self::WrightFisher(p), DualParameter::WrightFisher) => {
                let m = m.unwrap();
                let atot = p.total();
                let mut ln = ln_gamma(atot + m.magnitude() as f64) - ln_gamma(atot);
                for ((aj, mj), xj) in p.a.iter().zip(m.coords()).zip(&x) {
                    ln += ln_gamma(*aj) - ln_gamma(aj + *mj as f64);
                    if *mj > 0 {
                        ln += *mj as f64 * xj.ln();
                    }
                }
                Ok(ln)
            }
            _ => unreachable!("validate_dual fixed the pairing"),
        }
    }

    /// h(x, m, theta) itself; see [`ModelSpec::log_h`].
    pub fn h_eval(&self, x: &[f64], m: Option<&MultiIndex>, theta: &DualParameter) -> Result<f64> {
        Ok(self.log_h(x, m, theta)?.exp())
    }

    /// One conjugate Bayes step: (m, theta) -> (t(y,m), T(y,theta)).
    pub fn conjugate_update(
        &self,
        y: &Observation,
        m: Option<&MultiIndex>,
        theta: &DualParameter,
    ) -> Result<(Option<MultiIndex>, DualParameter)> {
        self.validate_observation(y)?;
        self.validate_dual(theta)?;
        let m = self.index_for(m)?;
        match (self, theta, &y.value) {
            (Self::Cir(p), DualParameter::Cir { theta }, ObservationValue::Count(n)) => {
                let shifted = m.unwrap().plus(&MultiIndex::new(vec![*n])?)?;
                Ok((
                    Some(shifted),
                    DualParameter::Cir {
                        theta: theta + p.lambda_em,
                    },
                ))
            }
            (Self::Ou(p), DualParameter::Ou { mean, var }, ObservationValue::Real(c)) => {
                let denom = p.lambda_em + var;
                Ok((
                    None,
                    DualParameter::Ou {
                        mean: (p.lambda_em * mean + var * c) / denom,
                        var: p.lambda_em * var / denom,
                    },
                ))
            }
            (Self::WrightFisher(_), DualParameter::WrightFisher, ObservationValue::Counts(ys)) => {
                let shifted = m.unwrap().plus(&MultiIndex::new(ys.clone())?)?;
                Ok((Some(shifted), DualParameter::WrightFisher))
            }
            _ => unreachable!("validated above"),
        }
    }

    /// The support translation N(y) induced by one observation: t(y, m) =
    /// m + N(y). `None` for OU.
    pub fn observation_shift(&self, y: &Observation) -> Result<Option<MultiIndex>> {
        self.validate_observation(y)?;
        match &y.value {
            ObservationValue::Count(n) => Ok(Some(MultiIndex::new(vec![*n])?)),
            ObservationValue::Real(_) => Ok(None),
            ObservationValue::Counts(ys) => Ok(Some(MultiIndex::new(ys.clone())?)),
        }
    }

    /// log c(m, theta, y) = log of the predictive density of one observation
    /// under the component h(x,m,theta) pi(dx): the integral
    /// int f_x(y) h(x,m,theta) pi(dx) in closed form.
    ///
    /// CIR: negative-binomial mass of the count under a Ga(delta/2+m, theta)
    /// intensity mixture. OU: Normal(y; mean, var + lambda_em). WF:
    /// Dirichlet-multinomial mass (multinomial coefficient included, so the
    /// value is a genuine predictive probability).
    pub fn log_predictive_const(
        &self,
        m: Option<&MultiIndex>,
        theta: &DualParameter,
        y: &Observation,
    ) -> Result<f64> {
        self.validate_observation(y)?;
        self.validate_dual(theta)?;
        let m = self.index_for(m)?;
        match (self, theta, &y.value) {
            (Self::Cir(p), DualParameter::Cir { theta }, ObservationValue::Count(n)) => {
                let r = 0.5 * p.delta + m.unwrap().coord(0) as f64;
                let k = *n as f64;
                let total = theta + p.lambda_em;
                Ok(ln_gamma(k + r) - ln_gamma(r) - ln_gamma(k + 1.0) + r * (theta / total).ln()
                    + k * (p.lambda_em / total).ln())
            }
            (Self::Ou(p), DualParameter::Ou { mean, var }, ObservationValue::Real(v)) => {
                Ok(ln_normal(*v, *mean, var + p.lambda_em))
            }
            (Self::WrightFisher(p), DualParameter::WrightFisher, ObservationValue::Counts(ys)) => {
                let m = m.unwrap();
                let n: u64 = ys.iter().sum();
                let atot = p.total() + m.magnitude() as f64;
                let mut ln = ln_gamma(n as f64 + 1.0) + ln_gamma(atot)
                    - ln_gamma(atot + n as f64);
                for ((aj, mj), yj) in p.a.iter().zip(m.coords()).zip(ys) {
                    let alpha_j = aj + *mj as f64;
                    ln += ln_gamma(alpha_j + *yj as f64) - ln_gamma(alpha_j)
                        - ln_gamma(*yj as f64 + 1.0);
                }
                Ok(ln)
            }
            _ => unreachable!("validated above"),
        }
    }

    /// c(m, theta, y) itself; see [`ModelSpec::log_predictive_const`].
    pub fn predictive_const(
        &self,
        m: Option<&MultiIndex>,
        theta: &DualParameter,
        y: &Observation,
    ) -> Result<f64> {
        Ok(self.log_predictive_const(m, theta, y)?.exp())
    }

    /// The deterministic dual flow Theta_t started from theta, in closed
    /// form. CIR: logistic relaxation towards gamma/sigma2; OU: exponential
    /// relaxation of (mean, var) towards (gamma, alpha); WF: identity.
    /// Satisfies the semigroup law flow(flow(theta,s),t) = flow(theta,s+t).
    pub fn theta_flow(&self, theta: &DualParameter, t: f64) -> Result<DualParameter> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "flow time must be finite and non-negative, got {t}"
            )));
        }
        self.validate_dual(theta)?;
        match (self, theta) {
            (Self::Cir(p), DualParameter::Cir { theta }) => Ok(DualParameter::Cir {
                theta: cir_flow(p.gamma, p.sigma2, *theta, t),
            }),
            (Self::Ou(p), DualParameter::Ou { mean, var }) => {
                let decay = (-p.sigma2 * t / p.alpha).exp();
                Ok(DualParameter::Ou {
                    mean: p.gamma + (mean - p.gamma) * decay,
                    var: p.alpha + (var - p.alpha) * decay * decay,
                })
            }
            (Self::WrightFisher(_), DualParameter::WrightFisher) => {
                Ok(DualParameter::WrightFisher)
            }
            _ => unreachable!("validated above"),
        }
    }

    /// tau(t) = int_0^t rho(Theta_s) ds, the time change feeding the death
    /// process. CIR integrates the flow analytically; WF has rho = 1; OU has
    /// no death component and rejects the call.
    pub fn rho_integral(&self, theta: &DualParameter, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "integration time must be finite and non-negative, got {t}"
            )));
        }
        self.validate_dual(theta)?;
        match (self, theta) {
            (Self::Cir(p), DualParameter::Cir { theta }) => {
                Ok(cir_tau(p.gamma, p.sigma2, *theta, t))
            }
            (Self::WrightFisher(_), DualParameter::WrightFisher) => Ok(t),
            (Self::Ou(_), _) => Err(Error::InvalidParameter(
                "the OU dual has no death component".into(),
            )),
            _ => unreachable!("validated above"),
        }
    }

    /// CIR-only closed form: the death process started at m is binomially
    /// thinned, p_{m,m-i}(t;theta) = Bin(m-i; m, p(t,theta)) with success
    /// probability gamma/sigma2 over theta e^{2 gamma t} + gamma/sigma2 -
    /// theta. Must agree with the generic machinery; kept as a fast path and
    /// cross-check.
    pub fn cir_binomial_transition(&self, m: u64, i: u64, t: f64, theta: f64) -> Result<f64> {
        let p = match self {
            Self::Cir(p) => p,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "binomial transition is CIR-specific, model is {}",
                    self.name()
                )))
            }
        };
        if i > m {
            return Err(Error::InvalidParameter(format!(
                "cannot lose {i} units out of {m}"
            )));
        }
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "elapsed time must be finite and non-negative, got {t}"
            )));
        }
        require_positive("theta", theta)?;
        if m == 0 {
            return Ok(1.0);
        }
        let c = p.gamma / p.sigma2;
        // Survival probability written with e^{-2 gamma t} so large t cannot
        // overflow: p = c E / (theta (1-E) + c E), 1-p = theta (1-E) / (...).
        let e = (-2.0 * p.gamma * t).exp();
        let one_minus_e = -f64::exp_m1(-2.0 * p.gamma * t);
        let den = theta * one_minus_e + c * e;
        let surv = c * e / den;
        let die = theta * one_minus_e / den;
        let keep = m - i;
        let mut ln = ln_gamma(m as f64 + 1.0)
            - ln_gamma(keep as f64 + 1.0)
            - ln_gamma(i as f64 + 1.0);
        if keep > 0 {
            ln += keep as f64 * surv.ln();
        } else if surv == 0.0 {
            // 0^0 from the pmf; ln stays as the coefficient
        }
        if i > 0 {
            if die == 0.0 {
                return Ok(0.0);
            }
            ln += i as f64 * die.ln();
        }
        if keep > 0 && surv == 0.0 {
            return Ok(0.0);
        }
        crate::dual_death::clamp_probability(ln.exp())
    }

    /// Packages the death-process ingredients for [`crate::dual_death`].
    /// Errors for OU, whose dual is purely deterministic.
    pub fn death_kernel_spec(&self) -> Result<ModelKernel> {
        match self {
            Self::Cir(p) => Ok(ModelKernel {
                inner: KernelInner::Cir {
                    gamma: p.gamma,
                    sigma2: p.sigma2,
                },
            }),
            Self::Ou(_) => Err(Error::InvalidParameter(
                "the OU dual has no death component".into(),
            )),
            Self::WrightFisher(p) => Ok(ModelKernel {
                inner: KernelInner::Wf {
                    atot: p.total(),
                    dim: p.dim(),
                },
            }),
        }
    }

    /// log f_x(y), the emission density at signal state x.
    pub fn log_emission_density(&self, x: &[f64], y: &Observation) -> Result<f64> {
        self.validate_observation(y)?;
        let x = self.checked_state(x)?;
        match (self, &y.value) {
            (Self::Cir(p), ObservationValue::Count(n)) => {
                Ok(ln_poisson(*n, p.lambda_em * x[0]))
            }
            (Self::Ou(p), ObservationValue::Real(v)) => Ok(ln_normal(*v, x[0], p.lambda_em)),
            (Self::WrightFisher(_), ObservationValue::Counts(ys)) => {
                let n: u64 = ys.iter().sum();
                let mut ln = ln_gamma(n as f64 + 1.0);
                for (yj, xj) in ys.iter().zip(&x) {
                    ln -= ln_gamma(*yj as f64 + 1.0);
                    if *yj > 0 {
                        if *xj == 0.0 {
                            return Ok(f64::NEG_INFINITY);
                        }
                        ln += *yj as f64 * xj.ln();
                    }
                }
                Ok(ln)
            }
            _ => unreachable!("validated above"),
        }
    }

    /// log of the conjugate component's density h(x,m,theta) pi(x) in x:
    /// Ga(delta/2+m, theta) for CIR, N(mean, var) for OU, Dirichlet(a+m) for
    /// WF (density on the K-1 simplex in the first K-1 coordinates).
    pub fn component_log_density(
        &self,
        m: Option<&MultiIndex>,
        theta: &DualParameter,
        x: &[f64],
    ) -> Result<f64> {
        let x = self.checked_state(x)?;
        let m = self.index_for(m)?;
        self.validate_dual(theta)?;
        match (self, theta) {
            (Self::Cir(p), DualParameter::Cir { theta }) => {
                let r = 0.5 * p.delta + m.unwrap().coord(0) as f64;
                if x[0] <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(r * theta.ln() - ln_gamma(r) + (r - 1.0) * x[0].ln() - theta * x[0])
            }
            (Self::Ou(_), DualParameter::Ou { mean, var }) => Ok(ln_normal(x[0], *mean, *var)),
            (Self::WrightFisher(p), DualParameter::WrightFisher) => {
                let m = m.unwrap();
                let mut ln = ln_gamma(p.total() + m.magnitude() as f64);
                for ((aj, mj), xj) in p.a.iter().zip(m.coords()).zip(&x) {
                    let alpha_j = aj + *mj as f64;
                    ln -= ln_gamma(alpha_j);
                    if *xj <= 0.0 {
                        return Ok(if alpha_j < 1.0 {
                            f64::INFINITY
                        } else if alpha_j == 1.0 {
                            ln_dirichlet_rest(p, &m, &x)
                        } else {
                            f64::NEG_INFINITY
                        });
                    }
                    ln += (alpha_j - 1.0) * xj.ln();
                }
                Ok(ln)
            }
            _ => unreachable!("validated above"),
        }
    }

    /// Per-coordinate mean and variance of one conjugate component.
    pub fn component_moments(
        &self,
        m: Option<&MultiIndex>,
        theta: &DualParameter,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.index_for(m)?;
        self.validate_dual(theta)?;
        match (self, theta) {
            (Self::Cir(p), DualParameter::Cir { theta }) => {
                let r = 0.5 * p.delta + m.unwrap().coord(0) as f64;
                Ok((vec![r / theta], vec![r / (theta * theta)]))
            }
            (Self::Ou(_), DualParameter::Ou { mean, var }) => Ok((vec![*mean], vec![*var])),
            (Self::WrightFisher(p), DualParameter::WrightFisher) => {
                let m = m.unwrap();
                let total = p.total() + m.magnitude() as f64;
                let mut means = Vec::with_capacity(p.dim());
                let mut vars = Vec::with_capacity(p.dim());
                for (aj, mj) in p.a.iter().zip(m.coords()) {
                    let alpha_j = aj + *mj as f64;
                    let mean = alpha_j / total;
                    means.push(mean);
                    vars.push(mean * (1.0 - mean) / (total + 1.0));
                }
                Ok((means, vars))
            }
            _ => unreachable!("validated above"),
        }
    }
}

/// Fallback for a Dirichlet density evaluated where one coordinate with
/// alpha_j = 1 sits exactly on zero: that coordinate contributes nothing and
/// the remaining factors are computed directly.
fn ln_dirichlet_rest(p: &WfParams, m: &MultiIndex, x: &[f64]) -> f64 {
    let mut ln = ln_gamma(p.total() + m.magnitude() as f64);
    for ((aj, mj), xj) in p.a.iter().zip(m.coords()).zip(x) {
        let alpha_j = aj + *mj as f64;
        ln -= ln_gamma(alpha_j);
        if *xj > 0.0 {
            ln += (alpha_j - 1.0) * xj.ln();
        } else if alpha_j > 1.0 {
            return f64::NEG_INFINITY;
        }
    }
    ln
}

/// Death-process ingredients of a concrete model; implements
/// [`DeathKernel`] with the model's own [`DualParameter`] as the flow state.
#[derive(Debug, Clone)]
pub struct ModelKernel {
    inner: KernelInner,
}

#[derive(Debug, Clone)]
enum KernelInner {
    Cir { gamma: f64, sigma2: f64 },
    Wf { atot: f64, dim: usize },
}

impl DeathKernel for ModelKernel {
    type Theta = DualParameter;

    fn dim(&self) -> usize {
        match &self.inner {
            KernelInner::Cir { .. } => 1,
            KernelInner::Wf { dim, .. } => *dim,
        }
    }

    fn lambda(&self, total: u64) -> f64 {
        match &self.inner {
            KernelInner::Cir { sigma2, .. } => 2.0 * sigma2,
            KernelInner::Wf { atot, .. } => 0.5 * (atot + total as f64 - 1.0),
        }
    }

    fn rho(&self, theta: &DualParameter) -> Result<f64> {
        match (&self.inner, theta) {
            (KernelInner::Cir { .. }, DualParameter::Cir { theta }) => Ok(*theta),
            (KernelInner::Wf { .. }, DualParameter::WrightFisher) => Ok(1.0),
            _ => Err(Error::InvalidParameter(format!(
                "dual parameter {theta:?} does not match the kernel's family"
            ))),
        }
    }

    fn rho_integral(&self, theta: &DualParameter, t: f64) -> Result<f64> {
        match (&self.inner, theta) {
            (KernelInner::Cir { gamma, sigma2 }, DualParameter::Cir { theta }) => {
                Ok(cir_tau(*gamma, *sigma2, *theta, t))
            }
            (KernelInner::Wf { .. }, DualParameter::WrightFisher) => Ok(t),
            _ => Err(Error::InvalidParameter(format!(
                "dual parameter {theta:?} does not match the kernel's family"
            ))),
        }
    }
}

/// Logistic relaxation of the CIR dual parameter towards gamma/sigma2,
/// written with e^{-2 gamma t} so large horizons cannot overflow.
fn cir_flow(gamma: f64, sigma2: f64, theta: f64, t: f64) -> f64 {
    let c = gamma / sigma2;
    let q = (c - theta) / theta;
    c / (1.0 + q * (-2.0 * gamma * t).exp())
}

/// Antiderivative of the CIR flow: tau(t) = [ln(theta sigma2 / gamma) +
/// 2 gamma t + ln(1 + q e^{-2 gamma t})] / (2 sigma2), q = (gamma/sigma2 -
/// theta)/theta. Vanishes at t = 0 and grows like (gamma/sigma2) t.
fn cir_tau(gamma: f64, sigma2: f64, theta: f64, t: f64) -> f64 {
    if t == 0.0 {
        // The closed form leaves an O(eps) residue of cancelling logs here.
        return 0.0;
    }
    let c = gamma / sigma2;
    let q = (c - theta) / theta;
    ((theta / c).ln() + 2.0 * gamma * t + f64::ln_1p(q * (-2.0 * gamma * t).exp()))
        / (2.0 * sigma2)
}

fn ln_poisson(k: u64, rate: f64) -> f64 {
    if rate == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * rate.ln() - rate - ln_gamma(k as f64 + 1.0)
}

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var)
}
