//! Problem-agnostic comparison agents: asynchronous optimistic Q-learning
//! (UCB-H), optimistic value iteration on an empirical model (UCBVI), and a
//! fixed policy that is greedy with respect to immediate rewards.
//!
//! Both learners use the same Hoeffding-style bonus `c * sqrt(H^2 / N)`
//! where `N` is the visit count of the pair being updated.

use crate::agent::{Learner, QTables, Sizes};
use crate::dp::{argmax_first, Policy};
use crate::error::{Error, Result};
use crate::lr;
use crate::mdp::RewardTable;

/// Visit counters `N_h(s, a)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitCounts {
    sizes: Sizes,
    counts: Vec<u64>,
}

impl VisitCounts {
    pub fn new(sizes: Sizes) -> Self {
        VisitCounts {
            sizes,
            counts: vec![0; sizes.horizon * sizes.num_states * sizes.num_actions],
        }
    }

    #[inline]
    fn index(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.sizes.num_states + s) * self.sizes.num_actions + a
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> u64 {
        self.counts[self.index(h, s, a)]
    }

    /// Increments `N_h(s, a)` and returns the new count.
    pub fn increment(&mut self, h: usize, s: usize, a: usize) -> u64 {
        let i = self.index(h, s, a);
        self.counts[i] += 1;
        self.counts[i]
    }

    /// `sum_{s, a} N_h(s, a)`.
    pub fn total_at(&self, h: usize) -> u64 {
        let width = self.sizes.num_states * self.sizes.num_actions;
        self.counts[h * width..(h + 1) * width].iter().sum()
    }

    pub fn sizes(&self) -> Sizes {
        self.sizes
    }
}

/// Next-state tallies `n_h(s, a, s')` stored densely, plus the list of
/// distinct next states seen from each `(h, s, a)` so that planning only
/// touches observed entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionTallies {
    sizes: Sizes,
    counts: Vec<u32>,
    seen: Vec<Vec<usize>>,
}

impl TransitionTallies {
    pub fn new(sizes: Sizes) -> Self {
        let rows = sizes.horizon * sizes.num_states * sizes.num_actions;
        TransitionTallies {
            sizes,
            counts: vec![0; rows * sizes.num_states],
            seen: vec![Vec::new(); rows],
        }
    }

    #[inline]
    fn row(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.sizes.num_states + s) * self.sizes.num_actions + a
    }

    pub fn record(&mut self, h: usize, s: usize, a: usize, next: usize) {
        let row = self.row(h, s, a);
        let slot = &mut self.counts[row * self.sizes.num_states + next];
        if *slot == 0 {
            self.seen[row].push(next);
        }
        *slot += 1;
    }

    pub fn get(&self, h: usize, s: usize, a: usize, next: usize) -> u32 {
        self.counts[self.row(h, s, a) * self.sizes.num_states + next]
    }

    /// `(s', n_h(s, a, s'))` for every observed next state.
    pub fn observed(&self, h: usize, s: usize, a: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        let row = self.row(h, s, a);
        let base = row * self.sizes.num_states;
        self.seen[row].iter().map(move |&next| (next, self.counts[base + next]))
    }

    /// Number of stored tally cells, `H * S * A * S`.
    pub fn capacity(&self) -> usize {
        self.counts.len()
    }

    pub fn sizes(&self) -> Sizes {
        self.sizes
    }
}

/// Optimistic backward induction on the empirical kernel
/// `P_hat = n_h(s, a, s') / N_h(s, a)`:
/// `Q_h = min{H, r_h + P_hat V_{h+1} + c sqrt(H^2 / N)}`, and `Q_h = H` for
/// pairs never visited.
pub fn ucbvi_plan_episode(
    counts: &VisitCounts,
    tallies: &TransitionTallies,
    rewards: &RewardTable,
    c: f64,
) -> Result<QTables> {
    let sizes = counts.sizes();
    if tallies.sizes() != sizes
        || (rewards.horizon(), rewards.num_states(), rewards.num_actions())
            != (sizes.horizon, sizes.num_states, sizes.num_actions)
    {
        return Err(Error::Dimension("counts, tallies and rewards disagree in shape".into()));
    }
    let Sizes {
        num_states: sn,
        num_actions: an,
        horizon: hn,
    } = sizes;
    let cap = hn as f64;
    let mut tables = QTables::optimistic(sizes);
    for h in (0..hn).rev() {
        for s in 0..sn {
            for a in 0..an {
                let n = counts.get(h, s, a);
                let q = if n == 0 {
                    cap
                } else {
                    let n_f = n as f64;
                    let next = tables.v_layer(h + 1);
                    let expected: f64 = tallies
                        .observed(h, s, a)
                        .map(|(s_next, m)| m as f64 / n_f * next[s_next])
                        .sum();
                    let bonus = c * (cap * cap / n_f).sqrt();
                    (rewards.get(h, s, a) + expected + bonus).min(cap)
                };
                tables.set_q(h, s, a, q);
            }
            tables.refresh_value(h, s);
        }
    }
    Ok(tables)
}

/// Asynchronous optimistic Q-learning: only the visited pair is updated.
#[derive(Debug, Clone)]
pub struct UcbHAgent {
    rewards: RewardTable,
    c: f64,
    tables: QTables,
    counts: VisitCounts,
    writes: u64,
}

impl UcbHAgent {
    pub fn new(rewards: RewardTable, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Config(format!("bonus constant c = {c} must be nonnegative")));
        }
        let sizes = Sizes::new(rewards.num_states(), rewards.num_actions(), rewards.horizon());
        Ok(UcbHAgent {
            rewards,
            c,
            tables: QTables::optimistic(sizes),
            counts: VisitCounts::new(sizes),
            writes: 0,
        })
    }

    pub fn tables(&self) -> &QTables {
        &self.tables
    }

    pub fn counts(&self) -> &VisitCounts {
        &self.counts
    }

    pub fn ucb_h_update(&mut self, h: usize, s_h: usize, a_h: usize, s_next: usize) {
        let horizon = self.tables.sizes().horizon;
        let t = self.counts.increment(h, s_h, a_h);
        let step_rate = lr::rate(t as usize, horizon);
        let hf = horizon as f64;
        let bonus = self.c * (hf * hf / t as f64).sqrt();
        let target = self.rewards.get(h, s_h, a_h) + self.tables.v(h + 1, s_next) + bonus;
        let old = self.tables.q(h, s_h, a_h);
        self.tables.set_q(h, s_h, a_h, (1.0 - step_rate) * old + step_rate * target);
        self.tables.refresh_value(h, s_h);
        self.writes += 1;
    }
}

impl Learner for UcbHAgent {
    fn act(&self, h: usize, s: usize) -> usize {
        self.tables.greedy(h, s)
    }

    fn observe(&mut self, h: usize, s: usize, a: usize, next: usize) {
        self.ucb_h_update(h, s, a, next);
    }

    fn end_episode(&mut self) {
        self.tables.advance_episode();
    }

    fn policy(&self) -> Policy {
        self.tables.greedy_policy()
    }

    fn q_writes(&self) -> u64 {
        self.writes
    }
}

/// Model-based optimistic planning, replanned at the start of each episode.
#[derive(Debug, Clone)]
pub struct UcbviAgent {
    rewards: RewardTable,
    c: f64,
    counts: VisitCounts,
    tallies: TransitionTallies,
    plan: QTables,
    writes: u64,
}

impl UcbviAgent {
    pub fn new(rewards: RewardTable, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Config(format!("bonus constant c = {c} must be nonnegative")));
        }
        let sizes = Sizes::new(rewards.num_states(), rewards.num_actions(), rewards.horizon());
        Ok(UcbviAgent {
            rewards,
            c,
            counts: VisitCounts::new(sizes),
            tallies: TransitionTallies::new(sizes),
            plan: QTables::optimistic(sizes),
            writes: 0,
        })
    }

    pub fn plan(&self) -> &QTables {
        &self.plan
    }

    pub fn counts(&self) -> &VisitCounts {
        &self.counts
    }

    pub fn tallies(&self) -> &TransitionTallies {
        &self.tallies
    }

    pub fn replan(&mut self) {
        let episode = self.plan.episode();
        self.plan = ucbvi_plan_episode(&self.counts, &self.tallies, &self.rewards, self.c)
            .expect("agent tables share one shape");
        for _ in 1..episode {
            self.plan.advance_episode();
        }
        let sizes = self.plan.sizes();
        self.writes += (sizes.horizon * sizes.num_states * sizes.num_actions) as u64;
    }
}

impl Learner for UcbviAgent {
    fn begin_episode(&mut self) {
        self.replan();
    }

    fn act(&self, h: usize, s: usize) -> usize {
        self.plan.greedy(h, s)
    }

    fn observe(&mut self, h: usize, s: usize, a: usize, next: usize) {
        self.counts.increment(h, s, a);
        self.tallies.record(h, s, a, next);
    }

    fn end_episode(&mut self) {
        self.plan.advance_episode();
    }

    fn policy(&self) -> Policy {
        self.plan.greedy_policy()
    }

    fn q_writes(&self) -> u64 {
        self.writes
    }
}

/// `pi_h(s) = argmax_a r_h(s, a)`, lowest index on ties.
pub fn reward_greedy_policy(rewards: &RewardTable) -> Policy {
    Policy::from_fn(rewards.horizon(), rewards.num_states(), |h, s| argmax_first(rewards.row(h, s)))
}

/// A learner that never learns: it follows one policy forever.
#[derive(Debug, Clone)]
pub struct FixedPolicyAgent {
    policy: Policy,
}

impl FixedPolicyAgent {
    pub fn new(policy: Policy) -> Self {
        FixedPolicyAgent { policy }
    }

    pub fn reward_greedy(rewards: &RewardTable) -> Self {
        Self::new(reward_greedy_policy(rewards))
    }
}

impl Learner for FixedPolicyAgent {
    fn act(&self, h: usize, s: usize) -> usize {
        self.policy.action(h, s)
    }

    fn observe(&mut self, _: usize, _: usize, _: usize, _: usize) {}

    fn policy(&self) -> Policy {
        self.policy.clone()
    }
}
