//! Death-process transition rows by dense matrix exponential.
//!
//! Builds the explicit generator of the pure death process on
//! lower_set({m}), with the modulator rho scaled out of the rates and
//! absorbed into the time variable tau, and exponentiates it with
//! scaling-and-squaring. This shares no code with the closed-form
//! evaluation in [`crate::dual_death`], which is the point: the two routes
//! agree only if both are right.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::dual_death::{DeathKernel, TransitionTable};
use crate::error::{Error, Result};
use crate::multiindex::{IndexSet, MultiIndex};

/// Hard cap on the number of lattice states the dense route will handle.
const MAX_STATES: u128 = 100_000;

/// Transition probabilities from m over lower_set({m}) after elapsed time t,
/// computed as the m-row of exp(tau Q). Q holds the rates lambda(|n|) n_j
/// for the jumps n -> n - e_j; tau is the kernel's time-change integral.
pub fn generator_expm<K: DeathKernel + ?Sized>(
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
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "elapsed time must be finite and non-negative, got {t}"
        )));
    }
    if m.lower_size() > MAX_STATES {
        return Err(Error::StateSpaceTooLarge(m.lower_size() as usize));
    }
    let tau = if t == 0.0 {
        0.0
    } else {
        kernel.rho_integral(theta, t)?
    };
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::Numerical(format!(
            "time-change integral evaluated to {tau}"
        )));
    }

    let states: Vec<MultiIndex> = IndexSet::singleton(m.clone())
        .lower_set()?
        .iter()
        .cloned()
        .collect();
    let index: BTreeMap<&MultiIndex, usize> =
        states.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let size = states.len();

    let mut q = DMatrix::<f64>::zeros(size, size);
    for (i, n) in states.iter().enumerate() {
        if n.is_zero() {
            continue;
        }
        let lam = kernel.lambda(n.magnitude());
        let mut total = 0.0;
        for j in 0..n.dim() {
            if n.coord(j) == 0 {
                continue;
            }
            let rate = lam * n.coord(j) as f64;
            let mut target = n.coords().to_vec();
            target[j] -= 1;
            let target = MultiIndex::new(target)?;
            q[(i, index[&target])] += rate;
            total += rate;
        }
        q[(i, i)] -= total;
    }

    let p = (q * tau).exp();
    let origin_row = index[m];
    let entries: Vec<(MultiIndex, f64)> = states
        .iter()
        .enumerate()
        .map(|(j, n)| (n.clone(), p[(origin_row, j)]))
        .collect();
    TransitionTable::from_entries(m.clone(), t, tau, entries)
}
