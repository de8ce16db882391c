//! The rescaled linear learning rate `alpha_t = (H + 1) / (H + t)` and the
//! compound weights it induces.
//!
//! After `t` updates with rates `alpha_1, ..., alpha_t`, a Q estimate is a
//! convex combination of its initialization and the `t` update targets:
//!
//! ```text
//! alpha_t^0 = prod_{j=1..t} (1 - alpha_j)
//! alpha_t^i = alpha_i * prod_{j=i+1..t} (1 - alpha_j)
//! ```
//!
//! Agents use the incremental update directly; the weight vectors exist for
//! analysis and property checks.

use crate::error::{Error, Result};

/// `(H + 1) / (H + t)` for `t >= 1`.
pub fn alpha(t: usize, horizon: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::Argument("learning rate index t must be at least 1".into()));
    }
    if horizon == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    Ok(rate(t, horizon))
}

#[inline]
pub(crate) fn rate(t: usize, horizon: usize) -> f64 {
    (horizon + 1) as f64 / (horizon + t) as f64
}

/// Weights `[alpha_t^0, alpha_t^1, ..., alpha_t^t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    t: usize,
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn t(&self) -> usize {
        self.t
    }

    /// Weight of the initialization.
    pub fn initial(&self) -> f64 {
        self.weights[0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// Weights of updates `1..=t`.
    pub fn updates(&self) -> &[f64] {
        &self.weights[1..]
    }
}

/// Compound weights after `t` updates, computed in one backward pass that
/// accumulates the product of `(1 - alpha_j)` from the most recent update.
pub fn alpha_weights(t: usize, horizon: usize) -> Result<WeightVector> {
    if horizon == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    let mut weights = vec![0.0; t + 1];
    let mut tail = 1.0;
    for i in (1..=t).rev() {
        let a = rate(i, horizon);
        weights[i] = a * tail;
        tail *= 1.0 - a;
    }
    weights[0] = tail;
    Ok(WeightVector { t, weights })
}

/// Bracket for `sum_i alpha_t^i / i^a`: returns `(1 / t^a, value, (1 + 1/H) / t^a)`.
pub fn weight_bound_report(t: usize, horizon: usize, exponent: f64) -> Result<(f64, f64, f64)> {
    if t == 0 {
        return Err(Error::Argument("t must be at least 1".into()));
    }
    if !(0.5..=1.0).contains(&exponent) {
        return Err(Error::Argument(format!("exponent {exponent} outside [1/2, 1]")));
    }
    let weights = alpha_weights(t, horizon)?;
    let value = weights
        .updates()
        .iter()
        .enumerate()
        .map(|(i, w)| w / ((i + 1) as f64).powf(exponent))
        .sum();
    let base = (t as f64).powf(-exponent);
    Ok((base, value, (1.0 + 1.0 / horizon as f64) * base))
}

/// Partial sums `sum_{t=i..=T} alpha_t^i` for `T = i, ..., last`.
pub fn column_partial_sums(i: usize, last: usize, horizon: usize) -> Result<Vec<f64>> {
    if i == 0 {
        return Err(Error::Argument("update index i must be at least 1".into()));
    }
    if horizon == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    let mut sums = Vec::with_capacity(last.saturating_sub(i) + 1);
    let mut weight = rate(i, horizon);
    let mut total = 0.0;
    for t in i..=last {
        if t > i {
            weight *= 1.0 - rate(t, horizon);
        }
        total += weight;
        sums.push(total);
    }
    Ok(sums)
}
