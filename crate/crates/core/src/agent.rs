//! Plumbing shared by the learning agents.

use serde::{Deserialize, Serialize};

use crate::dp::{argmax_first, Policy};
use crate::error::{Error, Result};
use crate::ucbf::ApproxModel;

/// Problem sizes `(S, A, H)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sizes {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
}

impl Sizes {
    pub fn new(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        Sizes {
            num_states,
            num_actions,
            horizon,
        }
    }
}

/// Optimistic agent-side tables `Q_h(s, a)` and `V_h(s)` with the episode
/// counter `k` (one-based).
///
/// `V_{H+1}` is stored as a zero layer so that backups at the last step need
/// no special case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTables {
    sizes: Sizes,
    episode: usize,
    q: Vec<f64>,
    v: Vec<f64>,
}

impl QTables {
    /// Every `Q` and `V` entry at `H`, the terminal layer at zero, `k = 1`.
    pub fn optimistic(sizes: Sizes) -> Self {
        let Sizes {
            num_states: sn,
            num_actions: an,
            horizon: hn,
        } = sizes;
        let top = hn as f64;
        let mut v = vec![top; (hn + 1) * sn];
        v[hn * sn..].fill(0.0);
        QTables {
            sizes,
            episode: 1,
            q: vec![top; hn * sn * an],
            v,
        }
    }

    pub fn sizes(&self) -> Sizes {
        self.sizes
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub(crate) fn advance_episode(&mut self) {
        self.episode += 1;
    }

    #[inline]
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[(h * self.sizes.num_states + s) * self.sizes.num_actions + a]
    }

    #[inline]
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.sizes.num_states + s]
    }

    pub fn q_row(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.sizes.num_states + s) * self.sizes.num_actions;
        &self.q[start..start + self.sizes.num_actions]
    }

    pub fn v_layer(&self, h: usize) -> &[f64] {
        let sn = self.sizes.num_states;
        &self.v[h * sn..(h + 1) * sn]
    }

    /// Mutable `Q_h` rows together with a read-only `V_{h+1}`.
    pub(crate) fn split_step(&mut self, h: usize) -> (&mut [f64], &[f64]) {
        let Sizes {
            num_states: sn,
            num_actions: an,
            ..
        } = self.sizes;
        let q = &mut self.q[h * sn * an..(h + 1) * sn * an];
        let next = &self.v[(h + 1) * sn..(h + 2) * sn];
        (q, next)
    }

    pub(crate) fn set_q(&mut self, h: usize, s: usize, a: usize, value: f64) {
        let i = (h * self.sizes.num_states + s) * self.sizes.num_actions + a;
        self.q[i] = value;
    }

    pub(crate) fn set_v(&mut self, h: usize, s: usize, value: f64) {
        self.v[h * self.sizes.num_states + s] = value;
    }

    /// `V_h(s) <- min{H, max_a Q_h(s, a)}`.
    pub(crate) fn refresh_value(&mut self, h: usize, s: usize) {
        let best = self.q_row(h, s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cap = self.sizes.horizon as f64;
        self.set_v(h, s, best.min(cap));
    }

    /// Greedy action, lowest index on ties.
    #[inline]
    pub fn greedy(&self, h: usize, s: usize) -> usize {
        argmax_first(self.q_row(h, s))
    }

    pub fn greedy_policy(&self) -> Policy {
        Policy::from_fn(self.sizes.horizon, self.sizes.num_states, |h, s| self.greedy(h, s))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Restores a snapshot, checking that the stored arrays fit the sizes.
    pub fn from_json(text: &str) -> Result<Self> {
        let tables: QTables = serde_json::from_str(text)?;
        let Sizes {
            num_states: sn,
            num_actions: an,
            horizon: hn,
        } = tables.sizes;
        if tables.q.len() != hn * sn * an || tables.v.len() != (hn + 1) * sn {
            return Err(Error::Dimension("snapshot arrays do not match its sizes".into()));
        }
        if tables.episode == 0 {
            return Err(Error::Argument("snapshot episode counter must be at least 1".into()));
        }
        Ok(tables)
    }
}

/// An agent that interacts with the environment one episode at a time.
///
/// The harness calls `begin_episode`, then `act`/`observe` for each of the
/// `H` steps, then `end_episode`. `policy` returns the greedy policy the
/// agent would follow if an episode started now.
pub trait Learner: Send {
    fn begin_episode(&mut self) {}

    fn act(&self, h: usize, s: usize) -> usize;

    fn observe(&mut self, h: usize, s: usize, a: usize, next: usize);

    fn end_episode(&mut self) {}

    fn policy(&self) -> Policy;

    /// Number of Q-table entries written so far.
    fn q_writes(&self) -> u64 {
        0
    }

    /// Replaces the dynamics model, for agents that use one.
    fn set_model(&mut self, _model: ApproxModel) -> Result<()> {
        Err(Error::Argument("this agent does not use a dynamics model".into()))
    }
}
