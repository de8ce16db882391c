//! Exact finite-horizon dynamic programming over a known kernel.
//!
//! These routines are used for evaluation and testing only. Learning agents
//! never call them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MdpSpec, RewardTable, TransitionKernel};

/// Action-value table `[H x S x A]` and value table `[(H + 1) x S]` with the
/// last layer fixed at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTables {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    q: Vec<f64>,
    v: Vec<f64>,
}

impl ValueTables {
    pub fn zeros(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        ValueTables {
            horizon,
            num_states,
            num_actions,
            q: vec![0.0; horizon * num_states * num_actions],
            v: vec![0.0; (horizon + 1) * num_states],
        }
    }

    /// Value tables with only `V` populated, `Q` left at zero. Layer `H` of
    /// `values` must already be zero.
    pub fn from_values(horizon: usize, num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != (horizon + 1) * num_states {
            return Err(Error::Dimension(format!(
                "value table has {} entries, expected {}x{num_states}",
                values.len(),
                horizon + 1
            )));
        }
        let mut tables = Self::zeros(horizon, num_states, num_actions);
        tables.v = values;
        Ok(tables)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[(h * self.num_states + s) * self.num_actions + a]
    }

    #[inline]
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.num_states + s]
    }

    /// `V_h(.)` for `h` in `0..=H`.
    pub fn v_layer(&self, h: usize) -> &[f64] {
        &self.v[h * self.num_states..(h + 1) * self.num_states]
    }

    pub fn q_row(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.num_states + s) * self.num_actions;
        &self.q[start..start + self.num_actions]
    }

    /// `sum_s weights[s] * V_h(s)`.
    pub fn expected_value(&self, h: usize, weights: &[f64]) -> f64 {
        self.v_layer(h).iter().zip(weights).map(|(v, w)| v * w).sum()
    }
}

/// Deterministic non-stationary policy, one action per `(h, s)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy {
    horizon: usize,
    num_states: usize,
    actions: Vec<usize>,
}

impl Policy {
    pub fn new(horizon: usize, num_states: usize, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != horizon * num_states {
            return Err(Error::Dimension(format!(
                "policy has {} entries, expected {horizon}x{num_states}",
                actions.len()
            )));
        }
        Ok(Policy {
            horizon,
            num_states,
            actions,
        })
    }

    pub fn constant(horizon: usize, num_states: usize, action: usize) -> Self {
        Policy {
            horizon,
            num_states,
            actions: vec![action; horizon * num_states],
        }
    }

    pub fn from_fn(horizon: usize, num_states: usize, mut f: impl FnMut(usize, usize) -> usize) -> Self {
        let mut actions = Vec::with_capacity(horizon * num_states);
        for h in 0..horizon {
            for s in 0..num_states {
                actions.push(f(h, s));
            }
        }
        Policy {
            horizon,
            num_states,
            actions,
        }
    }

    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h * self.num_states + s]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }
}

/// Index of the first maximum.
#[inline]
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate().skip(1) {
        if x > values[best] {
            best = i;
        }
    }
    best
}

fn check_dims(kernel: &TransitionKernel, rewards: &RewardTable) -> Result<()> {
    let k = (kernel.horizon(), kernel.num_states(), kernel.num_actions());
    let r = (rewards.horizon(), rewards.num_states(), rewards.num_actions());
    if k != r {
        return Err(Error::Dimension(format!(
            "kernel is (H, S, A) = {k:?} but rewards are {r:?}"
        )));
    }
    Ok(())
}

#[inline]
fn backup(kernel: &TransitionKernel, next: &[f64], h: usize, s: usize, a: usize) -> f64 {
    let (first, probs) = kernel.support(h, s, a);
    probs.iter().zip(&next[first..]).map(|(p, v)| p * v).sum()
}

/// Backward induction for `Q*` and `V*` with the greedy optimal policy
/// (lowest action index on ties).
pub fn optimal_values(kernel: &TransitionKernel, rewards: &RewardTable) -> Result<(ValueTables, Policy)> {
    check_dims(kernel, rewards)?;
    let (hn, sn, an) = (kernel.horizon(), kernel.num_states(), kernel.num_actions());
    let mut tables = ValueTables::zeros(hn, sn, an);
    let mut actions = vec![0; hn * sn];
    for h in (0..hn).rev() {
        let (head, tail) = tables.v.split_at_mut((h + 1) * sn);
        let next = &tail[..sn];
        let current = &mut head[h * sn..];
        for s in 0..sn {
            let row = (h * sn + s) * an;
            for a in 0..an {
                tables.q[row + a] = rewards.get(h, s, a) + backup(kernel, next, h, s, a);
            }
            let best = argmax_first(&tables.q[row..row + an]);
            actions[h * sn + s] = best;
            current[s] = tables.q[row + best];
        }
    }
    Ok((tables, Policy::new(hn, sn, actions)?))
}

/// Exact `Q^pi` and `V^pi` of a deterministic policy.
pub fn evaluate_policy(kernel: &TransitionKernel, rewards: &RewardTable, policy: &Policy) -> Result<ValueTables> {
    check_dims(kernel, rewards)?;
    let (hn, sn, an) = (kernel.horizon(), kernel.num_states(), kernel.num_actions());
    if policy.horizon != hn || policy.num_states != sn {
        return Err(Error::Dimension(format!(
            "policy is {}x{} but kernel has H={hn}, S={sn}",
            policy.horizon, policy.num_states
        )));
    }
    if let Some(&bad) = policy.actions.iter().find(|&&a| a >= an) {
        return Err(Error::Argument(format!("policy action {bad} outside 0..{an}")));
    }
    let mut tables = ValueTables::zeros(hn, sn, an);
    for h in (0..hn).rev() {
        let (head, tail) = tables.v.split_at_mut((h + 1) * sn);
        let next = &tail[..sn];
        let current = &mut head[h * sn..];
        for s in 0..sn {
            let row = (h * sn + s) * an;
            for a in 0..an {
                tables.q[row + a] = rewards.get(h, s, a) + backup(kernel, next, h, s, a);
            }
            current[s] = tables.q[row + policy.action(h, s)];
        }
    }
    Ok(tables)
}

/// Largest absolute deviation of `Q` from its optimality backup and of `V`
/// from `max_a Q`, including the terminal layer's deviation from zero.
pub fn bellman_residual(kernel: &TransitionKernel, rewards: &RewardTable, tables: &ValueTables) -> f64 {
    let (hn, sn, an) = (kernel.horizon(), kernel.num_states(), kernel.num_actions());
    let mut worst = tables.v_layer(hn).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for h in 0..hn {
        let next = tables.v_layer(h + 1);
        for s in 0..sn {
            for a in 0..an {
                let target = rewards.get(h, s, a) + backup(kernel, next, h, s, a);
                worst = worst.max((tables.q(h, s, a) - target).abs());
            }
            let best = tables.q_row(h, s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max((tables.v(h, s) - best).abs());
        }
    }
    worst
}

/// Upper limit on the number of policies [`brute_force_values`] enumerates.
pub const BRUTE_FORCE_LIMIT: f64 = 1e6;

/// Exhaustive oracle: evaluates every deterministic policy by expanding all
/// disturbance sequences from the instance directly (no kernel, no backward
/// induction) and keeps the per-entry maximum.
pub fn brute_force_values(spec: &MdpSpec) -> Result<ValueTables> {
    let (hn, sn, an) = (spec.horizon(), spec.num_states(), spec.num_actions());
    let policies = (an as f64).powi((hn * sn) as i32);
    if policies > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            policies,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    // Expected return from (h, s) onward following `actions`.
    fn rollout(spec: &MdpSpec, actions: &[usize], h: usize, s: usize) -> f64 {
        if h == spec.horizon() {
            return 0.0;
        }
        let a = actions[h * spec.num_states() + s];
        spec.rewards().get(h, s, a) + continuation(spec, actions, h, s, a)
    }

    fn continuation(spec: &MdpSpec, actions: &[usize], h: usize, s: usize, a: usize) -> f64 {
        spec.disturbance()
            .probs(h)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(w, &p)| p * rollout(spec, actions, h + 1, spec.f(s, a) + w))
            .sum()
    }

    let mut best = ValueTables::zeros(hn, sn, an);
    best.q.fill(f64::NEG_INFINITY);
    best.v[..hn * sn].fill(f64::NEG_INFINITY);

    let mut actions = vec![0usize; hn * sn];
    loop {
        for h in 0..hn {
            for s in 0..sn {
                let value = rollout(spec, &actions, h, s);
                let slot = &mut best.v[h * sn + s];
                *slot = slot.max(value);
                for a in 0..an {
                    let q = spec.rewards().get(h, s, a) + continuation(spec, &actions, h, s, a);
                    let slot = &mut best.q[(h * sn + s) * an + a];
                    *slot = slot.max(q);
                }
            }
        }
        // Odometer increment over the action table.
        let mut i = 0;
        while i < actions.len() {
            actions[i] += 1;
            if actions[i] < an {
                break;
            }
            actions[i] = 0;
            i += 1;
        }
        if i == actions.len() {
            break;
        }
    }
    Ok(best)
}

/// Tightest Lipschitz constant of `V_h(.)` over the integer state line,
/// maximized over steps.
pub fn lipschitz_constant(tables: &ValueTables) -> f64 {
    (0..tables.horizon)
        .flat_map(|h| {
            tables
                .v_layer(h)
                .windows(2)
                .map(|pair| (pair[1] - pair[0]).abs())
        })
        .fold(0.0, f64::max)
}
