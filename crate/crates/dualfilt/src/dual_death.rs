//! Transition probabilities of a multidimensional pure death process.
//!
//! The process lives on Z_+^K and jumps from m to m - e_j at rate
//! lambda(|m|) rho(theta) m_j, where lambda is increasing in the total
//! magnitude and rho(theta) >= 0 modulates all rates through a deterministic
//! parameter flow. The zero index is absorbing. Because every coordinate
//! shares the same magnitude-dependent intensity, the total |M_t| is itself a
//! one-dimensional death chain with level rates lam_n = n lambda(n), and
//! conditionally on the number of deaths the lost units are spread across
//! coordinates by a multivariate hypergeometric draw. Transition
//! probabilities therefore factor as
//!
//! ```text
//! p_{m,m-i}(t) = [ prod_{h=0}^{|i|-1} lam_{|m|-h} ] * C_{|m|,|m|-|i|}(tau)
//!                * hyp(i; m, |i|),       tau = int_0^t rho(Theta_s) ds,
//! ```
//!
//! with `C` an alternating sum of exponentials over the traversed levels
//! (the hypoexponential occupation formula). The alternating sum loses
//! precision when level rates are close relative to 1/tau, so it is evaluated
//! in signed log-space with compensated accumulation and an explicit error
//! estimate; rows whose estimate degrades are recomputed by uniformization of
//! the level chain, which sums only non-negative terms.
//!
//! Everything here is parameterized by a [`DeathKernel`], so the same code
//! serves every model family that supplies level intensities and the
//! time-change integral.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::multiindex::{IndexSet, MultiIndex};

/// Fall back to uniformization when the estimated relative error of the
/// compensated alternating sum exceeds this.
const REL_ERR_FALLBACK: f64 = 1e-6;

/// Fall back when the estimated absolute error of a probability exceeds
/// this. The relative gate alone would accept mid-sized probabilities whose
/// absolute error is far above what downstream row comparisons tolerate.
const ABS_ERR_FALLBACK: f64 = 1e-12;

/// Fall back when a full row's raw sum strays from 1 by more than this;
/// tighter than the clamping slack so the published row-sum invariant holds.
const ROW_SUM_FALLBACK: f64 = 1e-11;

/// Probabilities outside [0,1] by at most this slack are clamped; larger
/// violations are reported as numerical failures.
const CLAMP_SLACK: f64 = 1e-10;

/// Adjacent level rates closer than this (relatively) are degenerate.
const DEGENERATE_REL_GAP: f64 = 1e-12;

/// Hard ceiling on uniformization iterations; reached only for pathological
/// rate scales far outside anything the filter produces.
const MAX_UNIFORMIZATION_STEPS: usize = 20_000_000;

/// The ingredients of a death process: dimension, magnitude intensity
/// lambda(n), the rate modulator rho(theta), and its flow integral
/// tau(t) = int_0^t rho(Theta_s) ds started from theta.
pub trait DeathKernel {
    /// Parameter type carried by the deterministic flow. Kernels without a
    /// parameter use `()` or ignore the argument.
    type Theta;

    /// Number of coordinates K >= 1.
    fn dim(&self) -> usize;

    /// Per-unit intensity lambda(n) at total magnitude n >= 1. Must be
    /// positive, finite, and non-decreasing in n.
    fn lambda(&self, total: u64) -> f64;

    /// Instantaneous modulator rho(theta) >= 0.
    fn rho(&self, theta: &Self::Theta) -> Result<f64>;

    /// tau(t) = int_0^t rho(Theta_s) ds along the parameter flow started at
    /// theta. Zero at t = 0 and non-decreasing in t.
    fn rho_integral(&self, theta: &Self::Theta, t: f64) -> Result<f64>;
}

/// Instantaneous rate of the jump m -> m - e_coord.
///
/// Zero when the coordinate is already exhausted; the zero index is globally
/// absorbing because every coordinate rate vanishes there.
pub fn death_rate<K: DeathKernel + ?Sized>(
    m: &MultiIndex,
    coord: usize,
    theta: &K::Theta,
    kernel: &K,
) -> Result<f64> {
    if m.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            got: m.dim(),
        });
    }
    if coord >= m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: coord + 1,
        });
    }
    if m.coord(coord) == 0 {
        return Ok(0.0);
    }
    let rho = kernel.rho(theta)?;
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "rho(theta) must be finite and non-negative, got {rho}"
        )));
    }
    Ok(kernel.lambda(m.magnitude()) * rho * m.coord(coord) as f64)
}

/// Level rates lam_n = n lambda(n) for n = 0..=N, validated strictly
/// increasing. Owns all magnitude-direction computations.
#[derive(Debug, Clone)]
pub struct LevelRates {
    rates: Vec<f64>,
}

impl LevelRates {
    /// Tabulates lam_n = n lambda(n) from a kernel up to `max_total`.
    pub fn from_kernel<K: DeathKernel + ?Sized>(kernel: &K, max_total: u64) -> Result<Self> {
        let mut rates = Vec::with_capacity(max_total as usize + 1);
        rates.push(0.0);
        for n in 1..=max_total {
            let lam = kernel.lambda(n);
            if !lam.is_finite() || lam <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "lambda({n}) must be positive and finite, got {lam}"
                )));
            }
            rates.push(n as f64 * lam);
        }
        Self::from_rates(rates)
    }

    /// Wraps an explicit level-rate table `rates[n] = lam_n`. `rates[0]` must
    /// be zero (the absorbing level) and the sequence strictly increasing.
    pub fn from_rates(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() || rates[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "level rates must start with lam_0 = 0".into(),
            ));
        }
        for n in 1..rates.len() {
            let gap = rates[n] - rates[n - 1];
            if !(gap > DEGENERATE_REL_GAP * rates[n].abs().max(1.0)) {
                return Err(Error::DegenerateRates(format!(
                    "levels {} and {} have rates {} and {}",
                    n - 1,
                    n,
                    rates[n - 1],
                    rates[n]
                )));
            }
        }
        Ok(Self { rates })
    }

    pub fn max_total(&self) -> u64 {
        (self.rates.len() - 1) as u64
    }

    /// lam_n = n lambda(n).
    pub fn rate(&self, total: u64) -> f64 {
        self.rates[total as usize]
    }

    /// Probability vector over the number of deaths j = 0..=total after
    /// time-changed duration tau, clamped and renormalized so it sums to one.
    pub fn level_drop_probs(&self, total: u64, tau: f64) -> Result<Vec<f64>> {
        self.check_args(total, tau)?;
        let n = total as usize;
        if n == 0 {
            return Ok(vec![1.0]);
        }
        if tau == 0.0 {
            let mut out = vec![0.0; n + 1];
            out[0] = 1.0;
            return Ok(out);
        }
        let (mut vals, errs) = self.drop_profile(n, tau);
        let mut degraded = vals
            .iter()
            .zip(&errs)
            .any(|(&v, &e)| !(e <= REL_ERR_FALLBACK && v * e <= ABS_ERR_FALLBACK));
        if !degraded {
            let sum: f64 = vals.iter().sum();
            degraded = (sum - 1.0).abs() > ROW_SUM_FALLBACK;
        }
        if degraded {
            log::warn!(
                "death-process drop profile (total {total}, tau {tau:.3e}) lost precision \
                 in the alternating sum; recomputed by uniformization"
            );
            vals = self.uniformized_drops(n, tau)?;
        }
        finalize_distribution(&mut vals)?;
        Ok(vals)
    }

    /// Probability of exactly `drop` deaths after duration tau.
    pub fn drop_prob(&self, total: u64, drop: u64, tau: f64) -> Result<f64> {
        self.check_args(total, tau)?;
        if drop > total {
            return Err(Error::InvalidParameter(format!(
                "drop {drop} exceeds total {total}"
            )));
        }
        let (n, j) = (total as usize, drop as usize);
        if tau == 0.0 {
            return Ok(if j == 0 { 1.0 } else { 0.0 });
        }
        let (val, rel) = self.drop_term(n, j, tau, true);
        let p = if rel <= REL_ERR_FALLBACK && val * rel <= ABS_ERR_FALLBACK {
            val
        } else {
            log::warn!(
                "death-process drop probability (total {total}, drop {drop}, tau {tau:.3e}) \
                 lost precision in the alternating sum; recomputed by uniformization"
            );
            self.uniformized_drops(n, tau)?[j]
        };
        clamp_probability(p)
    }

    /// The occupation coefficient C_{total, total-drop}(tau): the alternating
    /// exponential sum without the rate prefactor. `drop = 0` degenerates to
    /// exp(-lam_total tau).
    pub fn c_coeff(&self, total: u64, drop: u64, tau: f64) -> Result<f64> {
        self.check_args(total, tau)?;
        if drop > total {
            return Err(Error::InvalidParameter(format!(
                "drop {drop} exceeds total {total}"
            )));
        }
        let (n, j) = (total as usize, drop as usize);
        if j == 0 {
            return Ok((-self.rates[n] * tau).exp());
        }
        if tau == 0.0 {
            // Partial fractions of a proper rational function sum to zero.
            return Ok(0.0);
        }
        let (val, rel) = self.drop_term(n, j, tau, false);
        if rel <= REL_ERR_FALLBACK {
            return Ok(val);
        }
        // Recover C = drop probability / prefactor through logs.
        let p = self.uniformized_drops(n, tau)?[j];
        if p <= 0.0 {
            return Ok(0.0);
        }
        let mut pref = 0.0;
        for h in 0..j {
            pref += self.rates[n - h].ln();
        }
        Ok((p.ln() - pref).exp())
    }

    fn check_args(&self, total: u64, tau: f64) -> Result<()> {
        if total > self.max_total() {
            return Err(Error::InvalidParameter(format!(
                "total {total} exceeds tabulated level rates ({})",
                self.max_total()
            )));
        }
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "time-change integral must be finite and non-negative, got {tau}"
            )));
        }
        Ok(())
    }

    /// One alternating-sum evaluation for `drop = j` deaths out of `total = n`.
    /// Returns the value and an estimated relative error. `with_prefactor`
    /// folds prod lam into the terms (giving the probability) instead of the
    /// bare coefficient C.
    fn drop_term(&self, n: usize, j: usize, tau: f64, with_prefactor: bool) -> (f64, f64) {
        if j == 0 {
            return ((-self.rates[n] * tau).exp(), f64::EPSILON);
        }
        let lam = |k: usize| self.rates[n - k];
        let mut pref = 0.0;
        if with_prefactor {
            for h in 0..j {
                pref += lam(h).ln();
            }
        }
        let mut logmag = Vec::with_capacity(j + 1);
        let mut scale = lam(0) * tau + pref.abs();
        for k in 0..=j {
            let mut logden = 0.0;
            for h in 0..=j {
                if h != k {
                    logden += (lam(k) - lam(h)).abs().ln();
                }
            }
            scale = scale.max(lam(0) * tau + pref.abs() + logden.abs());
            logmag.push(-lam(k) * tau + pref - logden);
        }
        signed_exp_sum(&logmag, j, scale)
    }

    /// All drop depths at once, sharing the O(n^2) denominator recurrences.
    /// Returns values and per-depth relative error estimates.
    fn drop_profile(&self, n: usize, tau: f64) -> (Vec<f64>, Vec<f64>) {
        let lam: Vec<f64> = (0..=n).map(|k| self.rates[n - k]).collect();
        let mut logden = vec![0.0; n + 1];
        let mut values = vec![0.0; n + 1];
        let mut errors = vec![f64::EPSILON; n + 1];
        values[0] = (-lam[0] * tau).exp();
        let mut pref = 0.0;
        let mut logmag = vec![0.0; n + 1];
        for j in 1..=n {
            // Bring the level n - j into play: extend every denominator
            // product by |lam_k - lam_j| and seed the new node's own product.
            let mut dj = 0.0;
            for (h, item) in logden.iter_mut().enumerate().take(j) {
                let gap = (lam[h] - lam[j]).ln();
                dj += gap;
                *item += gap;
            }
            logden[j] = dj;
            pref += lam[j - 1].ln();
            let mut scale: f64 = 0.0;
            for k in 0..=j {
                logmag[k] = -lam[k] * tau + pref - logden[k];
                scale = scale.max(lam[0] * tau + pref.abs() + logden[k].abs());
            }
            let (val, rel) = signed_exp_sum(&logmag[..=j], j, scale);
            values[j] = val;
            errors[j] = rel;
        }
        (values, errors)
    }

    /// Level-drop probabilities by uniformization of the bidiagonal level
    /// chain: all terms are non-negative, so no cancellation, at the price of
    /// roughly lam_max tau iterations.
    fn uniformized_drops(&self, n: usize, tau: f64) -> Result<Vec<f64>> {
        let lam_max = self.rates[n];
        let q = lam_max * tau;
        let mut v = vec![0.0; n + 1];
        let mut out = vec![0.0; n + 1];
        v[0] = 1.0;
        let ln_q = if q > 0.0 { q.ln() } else { f64::NEG_INFINITY };
        let mut cum = 0.0;
        let mut k = 0usize;
        loop {
            let lw = if q == 0.0 {
                if k == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                -q + k as f64 * ln_q - ln_gamma(k as f64 + 1.0)
            };
            let w = lw.exp();
            if w > 0.0 {
                for (o, vj) in out.iter_mut().zip(&v) {
                    *o += w * vj;
                }
                cum += w;
            }
            // The walk needs at least n jump opportunities to reach the
            // deepest drop; past that, stop once the Poisson mass is spent.
            if k >= n && (cum >= 1.0 - 1e-16 || k as f64 > q + 60.0 * q.sqrt() + 60.0) {
                break;
            }
            if k >= MAX_UNIFORMIZATION_STEPS {
                return Err(Error::Numerical(format!(
                    "uniformization did not converge within {MAX_UNIFORMIZATION_STEPS} steps \
                     (lam_max tau = {q:.3e})"
                )));
            }
            for j in (1..=n).rev() {
                v[j] = v[j] * (1.0 - self.rates[n - j] / lam_max)
                    + v[j - 1] * (self.rates[n - j + 1] / lam_max);
            }
            v[0] = 0.0; // level n is the uniformization rate, so it never holds
            k += 1;
        }
        Ok(out)
    }
}

/// Max-shifted, Neumaier-compensated evaluation of
/// sum_k (-1)^(j+k) exp(logmag[k]). Returns the value and an estimated
/// relative error eps (j + 1 + input_scale) sum|t| / |sum t|, infinite when
/// the sum is consumed by cancellation. `input_scale` is the largest log
/// magnitude that went into assembling the exponents: each exponent carries
/// rounding proportional to the terms it was built from, and after the
/// cancellation those input errors dominate the compensated summation's own.
fn signed_exp_sum(logmag: &[f64], j: usize, input_scale: f64) -> (f64, f64) {
    let maxlog = logmag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if maxlog == f64::NEG_INFINITY {
        return (0.0, f64::EPSILON);
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut abs = 0.0;
    for (k, &lm) in logmag.iter().enumerate() {
        let mag = (lm - maxlog).exp();
        let term = if (j + k) % 2 == 0 { mag } else { -mag };
        let fresh = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - fresh) + term;
        } else {
            comp += (term - fresh) + sum;
        }
        sum = fresh;
        abs += mag;
    }
    let s = sum + comp;
    if s <= 0.0 {
        return (0.0, f64::INFINITY);
    }
    let value = (maxlog + s.ln()).exp();
    let rel = f64::EPSILON * (j as f64 + 1.0 + input_scale) * abs / s;
    (value, rel)
}

/// Clamps to [0,1] when outside by at most the published slack; anything
/// worse is a real numerical failure.
pub(crate) fn clamp_probability(p: f64) -> Result<f64> {
    if p.is_nan() {
        return Err(Error::Numerical("probability evaluated to NaN".into()));
    }
    if p < 0.0 {
        if p >= -CLAMP_SLACK {
            return Ok(0.0);
        }
        return Err(Error::Numerical(format!("probability {p} below 0")));
    }
    if p > 1.0 {
        if p <= 1.0 + CLAMP_SLACK {
            return Ok(1.0);
        }
        return Err(Error::Numerical(format!("probability {p} above 1")));
    }
    Ok(p)
}

/// Clamps every entry and renormalizes to an exact unit sum.
fn finalize_distribution(vals: &mut [f64]) -> Result<()> {
    let mut sum = 0.0;
    for v in vals.iter_mut() {
        *v = clamp_probability(*v)?;
        sum += *v;
    }
    if (sum - 1.0).abs() > CLAMP_SLACK {
        return Err(Error::Numerical(format!(
            "transition row sums to {sum}, too far from 1"
        )));
    }
    for v in vals.iter_mut() {
        *v /= sum;
    }
    Ok(())
}

/// Shared table of ln k! for integer combinatorics on hot paths.
pub(crate) struct FactorialTable {
    lnfact: Vec<f64>,
}

impl FactorialTable {
    pub fn new(max_n: u64) -> Self {
        let mut lnfact = Vec::with_capacity(max_n as usize + 1);
        lnfact.push(0.0);
        for k in 1..=max_n {
            lnfact.push(lnfact[k as usize - 1] + (k as f64).ln());
        }
        Self { lnfact }
    }

    pub fn ln_binom(&self, n: u64, k: u64) -> f64 {
        self.lnfact[n as usize] - self.lnfact[k as usize] - self.lnfact[(n - k) as usize]
    }

    /// Multivariate hypergeometric mass, assuming i <= m was already checked.
    pub fn hypergeom(&self, i: &MultiIndex, m: &MultiIndex) -> f64 {
        let mut ln = -self.ln_binom(m.magnitude(), i.magnitude());
        for (ik, mk) in i.coords().iter().zip(m.coords()) {
            ln += self.ln_binom(*mk, *ik);
        }
        ln.exp()
    }
}

/// Multivariate hypergeometric probability of removing i_k units from
/// coordinate k when |i| removals are distributed uniformly over the |m|
/// units of m: prod_k C(m_k, i_k) / C(|m|, |i|).
pub fn mv_hypergeometric(i: &MultiIndex, m: &MultiIndex) -> Result<f64> {
    if i.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: i.dim(),
        });
    }
    if !i.leq(m)? {
        return Err(Error::NotDominated {
            origin: m.to_string(),
            target: i.to_string(),
        });
    }
    let table = FactorialTable::new(m.magnitude());
    Ok(table.hypergeom(i, m))
}

/// The occupation coefficient C_{|m|,|m|-|i|}(tau) for a kernel: builds the
/// level rates and evaluates the alternating sum. See [`LevelRates::c_coeff`].
pub fn c_coeff<K: DeathKernel + ?Sized>(
    total: u64,
    drop: u64,
    tau: f64,
    kernel: &K,
) -> Result<f64> {
    let rates = LevelRates::from_kernel(kernel, total)?;
    rates.c_coeff(total, drop, tau)
}

/// Probability that the process started at m sits at n <= m after elapsed
/// time t under the flow started at theta.
pub fn transition_prob<K: DeathKernel + ?Sized>(
    m: &MultiIndex,
    n: &MultiIndex,
    t: f64,
    theta: &K::Theta,
    kernel: &K,
) -> Result<f64> {
    if m.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            got: m.dim(),
        });
    }
    if !n.leq(m)? {
        return Err(Error::NotDominated {
            origin: m.to_string(),
            target: n.to_string(),
        });
    }
    check_elapsed(t)?;
    if t == 0.0 {
        return Ok(if n == m { 1.0 } else { 0.0 });
    }
    if m.is_zero() {
        return Ok(1.0);
    }
    let tau = checked_rho_integral(kernel, theta, t)?;
    let rates = LevelRates::from_kernel(kernel, m.magnitude())?;
    let i = m.minus(n)?;
    let level = rates.drop_prob(m.magnitude(), i.magnitude(), tau)?;
    let hyper = mv_hypergeometric(&i, m)?;
    clamp_probability(level * hyper)
}

/// The full transition row from origin m over lower_set({m}).
#[derive(Debug, Clone)]
pub struct TransitionTable {
    origin: MultiIndex,
    elapsed: f64,
    tau: f64,
    entries: Vec<(MultiIndex, f64)>,
}

impl TransitionTable {
    /// Assembles a table from lexicographically sorted entries, clamping and
    /// renormalizing. Used by both the closed-form path and the dense oracle.
    pub(crate) fn from_entries(
        origin: MultiIndex,
        elapsed: f64,
        tau: f64,
        mut entries: Vec<(MultiIndex, f64)>,
    ) -> Result<Self> {
        let mut sum = 0.0;
        for (_, p) in entries.iter_mut() {
            *p = clamp_probability(*p)?;
            sum += *p;
        }
        if (sum - 1.0).abs() > CLAMP_SLACK {
            return Err(Error::Numerical(format!(
                "transition table from {origin} sums to {sum}, too far from 1"
            )));
        }
        for (_, p) in entries.iter_mut() {
            *p /= sum;
        }
        Ok(Self {
            origin,
            elapsed,
            tau,
            entries,
        })
    }

    pub fn origin(&self) -> &MultiIndex {
        &self.origin
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    /// The time-change integral the table was computed at.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries over lower_set({origin}) in lexicographic order, zeros kept.
    pub fn entries(&self) -> &[(MultiIndex, f64)] {
        &self.entries
    }

    pub fn prob(&self, n: &MultiIndex) -> Option<f64> {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(n))
            .ok()
            .map(|idx| self.entries[idx].1)
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

/// Transition probabilities from m to every point of lower_set({m}) after
/// elapsed time t, sharing a single evaluation of the time-change integral.
pub fn transition_table<K: DeathKernel + ?Sized>(
    m: &MultiIndex,
    t: f64,
    theta: &K::Theta,
    kernel: &K,
) -> Result<TransitionTable> {
    if m.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            got: m.dim(),
        });
    }
    check_elapsed(t)?;
    let tau = if t == 0.0 {
        0.0
    } else {
        checked_rho_integral(kernel, theta, t)?
    };
    let rates = LevelRates::from_kernel(kernel, m.magnitude())?;
    table_at_tau(m, t, tau, &rates)
}

/// Table construction once tau is known; shared with the filter's
/// prediction step, which batches sources at one tau.
pub(crate) fn table_at_tau(
    m: &MultiIndex,
    elapsed: f64,
    tau: f64,
    rates: &LevelRates,
) -> Result<TransitionTable> {
    let drops = rates.level_drop_probs(m.magnitude(), tau)?;
    let table = FactorialTable::new(m.magnitude());
    let lower = IndexSet::singleton(m.clone()).lower_set()?;
    let mut entries = Vec::with_capacity(lower.len());
    for n in lower.iter() {
        let i = m.minus(n)?;
        let p = drops[i.magnitude() as usize] * table.hypergeom(&i, m);
        entries.push((n.clone(), p));
    }
    TransitionTable::from_entries(m.clone(), elapsed, tau, entries)
}

fn check_elapsed(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "elapsed time must be finite and non-negative, got {t}"
        )));
    }
    Ok(())
}

fn checked_rho_integral<K: DeathKernel + ?Sized>(
    kernel: &K,
    theta: &K::Theta,
    t: f64,
) -> Result<f64> {
    let tau = kernel.rho_integral(theta, t)?;
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::Numerical(format!(
            "time-change integral evaluated to {tau}"
        )));
    }
    Ok(tau)
}
