//! Ground-truth episodic MDPs whose transitions follow an additive
//! disturbance model: the next state is `f(s, a) + w` where `w` is drawn
//! from a distribution over `{0, ..., W}` that does not depend on the state
//! or the action.
//!
//! All indices are zero-based: states are `0..S`, actions `0..A` and steps
//! `0..H`. The dynamics table is restricted to `[0, S - 1 - W]` so that every
//! disturbance lands on a valid state without clamping.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the normalization of probability vectors.
pub const PROB_TOL: f64 = 1e-12;

/// Distribution of the disturbance at each step of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfDocument", into = "PmfDocument")]
pub struct DisturbancePmf {
    support_max: usize,
    // Either one vector shared by all steps or one vector per step.
    per_step: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PmfDocument {
    support_max: usize,
    pmf: Vec<Vec<f64>>,
}

impl TryFrom<PmfDocument> for DisturbancePmf {
    type Error = Error;

    fn try_from(doc: PmfDocument) -> Result<Self> {
        DisturbancePmf::from_vectors(doc.support_max, doc.pmf)
    }
}

impl From<DisturbancePmf> for PmfDocument {
    fn from(pmf: DisturbancePmf) -> Self {
        PmfDocument {
            support_max: pmf.support_max,
            pmf: pmf.per_step,
        }
    }
}

fn check_probability_vector(what: &str, probs: &[f64]) -> Result<()> {
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "{what}[{i}] = {p} is not a nonnegative probability"
            )));
        }
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidSpec(format!(
            "{what} sums to {total}, expected 1"
        )));
    }
    Ok(())
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    // Only reachable through rounding when `acc` ends a hair below one.
    last
}

impl DisturbancePmf {
    /// One distribution shared across all steps.
    pub fn shared(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidSpec("disturbance pmf is empty".into()));
        }
        Self::from_vectors(probs.len() - 1, vec![probs])
    }

    /// A distinct distribution for each step; the list length must equal
    /// the horizon of the instance it is used in.
    pub fn per_step(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let support_max = vectors
            .first()
            .map(|v| v.len().saturating_sub(1))
            .ok_or_else(|| Error::InvalidSpec("no disturbance vectors".into()))?;
        Self::from_vectors(support_max, vectors)
    }

    pub fn uniform(support_max: usize) -> Self {
        let n = support_max + 1;
        DisturbancePmf {
            support_max,
            per_step: vec![vec![1.0 / n as f64; n]],
        }
    }

    /// All mass on `value`.
    pub fn point_mass(support_max: usize, value: usize) -> Result<Self> {
        if value > support_max {
            return Err(Error::Argument(format!(
                "point mass at {value} outside support 0..={support_max}"
            )));
        }
        let mut probs = vec![0.0; support_max + 1];
        probs[value] = 1.0;
        Ok(DisturbancePmf {
            support_max,
            per_step: vec![probs],
        })
    }

    fn from_vectors(support_max: usize, per_step: Vec<Vec<f64>>) -> Result<Self> {
        if per_step.is_empty() {
            return Err(Error::InvalidSpec("no disturbance vectors".into()));
        }
        for (h, probs) in per_step.iter().enumerate() {
            if probs.len() != support_max + 1 {
                return Err(Error::InvalidSpec(format!(
                    "disturbance pmf for step {h} has {} entries, expected {}",
                    probs.len(),
                    support_max + 1
                )));
            }
            check_probability_vector(&format!("disturbance pmf[{h}]"), probs)?;
        }
        Ok(DisturbancePmf {
            support_max,
            per_step,
        })
    }

    /// The support maximum `W`.
    pub fn support_max(&self) -> usize {
        self.support_max
    }

    pub fn is_shared(&self) -> bool {
        self.per_step.len() == 1
    }

    pub fn num_vectors(&self) -> usize {
        self.per_step.len()
    }

    /// Probabilities over `{0, ..., W}` at step `h`.
    pub fn probs(&self, h: usize) -> &[f64] {
        if self.per_step.len() == 1 {
            &self.per_step[0]
        } else {
            &self.per_step[h]
        }
    }

    /// Draws a disturbance for step `h`.
    pub fn sample<R: Rng + ?Sized>(&self, h: usize, rng: &mut R) -> usize {
        sample_index(self.probs(h), rng)
    }
}

/// Rewards `r_h(s, a)` in `[0, 1]`, stored `[H x S x A]` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl RewardTable {
    pub fn new(horizon: usize, num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != horizon * num_states * num_actions {
            return Err(Error::Dimension(format!(
                "reward table has {} entries, expected {horizon}x{num_states}x{num_actions}",
                values.len()
            )));
        }
        for (i, &r) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                let (h, rest) = (i / (num_states * num_actions), i % (num_states * num_actions));
                return Err(Error::InvalidSpec(format!(
                    "reward r[{h}][{}][{}] = {r} outside [0, 1]",
                    rest / num_actions,
                    rest % num_actions
                )));
            }
        }
        Ok(RewardTable {
            horizon,
            num_states,
            num_actions,
            values,
        })
    }

    /// Builds a table from a closure over `(h, s, a)`.
    pub fn from_fn(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(horizon * num_states * num_actions);
        for h in 0..horizon {
            for s in 0..num_states {
                for a in 0..num_actions {
                    values.push(f(h, s, a));
                }
            }
        }
        Self::new(horizon, num_states, num_actions, values)
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.values[(h * self.num_states + s) * self.num_actions + a]
    }

    /// The rewards of all actions at `(h, s)`.
    #[inline]
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = (h * self.num_states + s) * self.num_actions;
        &self.values[start..start + self.num_actions]
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

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Complete ground-truth description of an additive-disturbance MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDocument", into = "SpecDocument")]
pub struct MdpSpec {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    dynamics: Vec<usize>,
    rewards: RewardTable,
    disturbance: DisturbancePmf,
    initial_dist: Vec<f64>,
}

/// On-disk layout of an [`MdpSpec`]. Tables are flattened row-major:
/// `dynamics[s * A + a]` and `rewards[(h * S + s) * A + a]`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDocument {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    dynamics: Vec<usize>,
    rewards: Vec<f64>,
    disturbance: DisturbancePmf,
    initial_dist: Vec<f64>,
}

impl TryFrom<SpecDocument> for MdpSpec {
    type Error = Error;

    fn try_from(doc: SpecDocument) -> Result<Self> {
        let rewards = RewardTable::new(doc.horizon, doc.num_states, doc.num_actions, doc.rewards)?;
        MdpSpec::new(doc.dynamics, rewards, doc.disturbance, doc.initial_dist)
    }
}

impl From<MdpSpec> for SpecDocument {
    fn from(spec: MdpSpec) -> Self {
        SpecDocument {
            num_states: spec.num_states,
            num_actions: spec.num_actions,
            horizon: spec.horizon,
            dynamics: spec.dynamics,
            rewards: spec.rewards.values,
            disturbance: spec.disturbance,
            initial_dist: spec.initial_dist,
        }
    }
}

impl MdpSpec {
    /// Validates and assembles a spec. Sizes are taken from the reward table.
    pub fn new(
        dynamics: Vec<usize>,
        rewards: RewardTable,
        disturbance: DisturbancePmf,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        let (horizon, num_states, num_actions) =
            (rewards.horizon, rewards.num_states, rewards.num_actions);
        if horizon == 0 || num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidSpec(format!(
                "sizes must be positive (S={num_states}, A={num_actions}, H={horizon})"
            )));
        }
        let w = disturbance.support_max;
        if w >= num_states {
            return Err(Error::InvalidSpec(format!(
                "disturbance support maximum {w} leaves no room in {num_states} states"
            )));
        }
        if dynamics.len() != num_states * num_actions {
            return Err(Error::Dimension(format!(
                "dynamics table has {} entries, expected {num_states}x{num_actions}",
                dynamics.len()
            )));
        }
        let max_image = num_states - 1 - w;
        if let Some(i) = dynamics.iter().position(|&next| next > max_image) {
            return Err(Error::InvalidSpec(format!(
                "f[{}][{}] = {} outside codomain 0..={max_image}",
                i / num_actions,
                i % num_actions,
                dynamics[i]
            )));
        }
        if !disturbance.is_shared() && disturbance.num_vectors() != horizon {
            return Err(Error::InvalidSpec(format!(
                "{} per-step disturbance vectors for horizon {horizon}",
                disturbance.num_vectors()
            )));
        }
        if initial_dist.len() != num_states {
            return Err(Error::Dimension(format!(
                "initial distribution has {} entries, expected {num_states}",
                initial_dist.len()
            )));
        }
        check_probability_vector("initial distribution", &initial_dist)?;
        Ok(MdpSpec {
            num_states,
            num_actions,
            horizon,
            dynamics,
            rewards,
            disturbance,
            initial_dist,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// The dynamics table `f`, flattened `[S x A]`.
    pub fn dynamics(&self) -> &[usize] {
        &self.dynamics
    }

    #[inline]
    pub fn f(&self, s: usize, a: usize) -> usize {
        self.dynamics[s * self.num_actions + a]
    }

    pub fn rewards(&self) -> &RewardTable {
        &self.rewards
    }

    pub fn disturbance(&self) -> &DisturbancePmf {
        &self.disturbance
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// Next state `f(s, a) + w`.
    pub fn step(&self, h: usize, s: usize, a: usize, w: usize) -> Result<usize> {
        if h >= self.horizon {
            return Err(Error::Argument(format!("step {h} outside 0..{}", self.horizon)));
        }
        if s >= self.num_states {
            return Err(Error::Argument(format!("state {s} outside 0..{}", self.num_states)));
        }
        if a >= self.num_actions {
            return Err(Error::Argument(format!("action {a} outside 0..{}", self.num_actions)));
        }
        if w > self.disturbance.support_max {
            return Err(Error::Argument(format!(
                "disturbance {w} outside 0..={}",
                self.disturbance.support_max
            )));
        }
        Ok(self.f(s, a) + w)
    }

    pub fn sample_disturbance<R: Rng + ?Sized>(&self, h: usize, rng: &mut R) -> usize {
        self.disturbance.sample(h, rng)
    }

    pub fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.initial_dist, rng)
    }

    /// Materializes `P_h(s' | s, a) = Pr[W_h = s' - f(s, a)]`.
    pub fn build_kernel(&self) -> TransitionKernel {
        TransitionKernel::from_spec(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Dense transition kernel `[H x S x A x S]`.
///
/// Every row is the disturbance pmf shifted by `f(s, a)`, so its support is
/// the window `f(s, a) ..= f(s, a) + W`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    support_len: usize,
    base: Vec<usize>,
    probs: Vec<f64>,
}

impl TransitionKernel {
    fn from_spec(spec: &MdpSpec) -> Self {
        let (hn, sn, an) = (spec.horizon, spec.num_states, spec.num_actions);
        let mut probs = vec![0.0; hn * sn * an * sn];
        for h in 0..hn {
            let pmf = spec.disturbance.probs(h);
            for s in 0..sn {
                for a in 0..an {
                    let start = ((h * sn + s) * an + a) * sn + spec.f(s, a);
                    probs[start..start + pmf.len()].copy_from_slice(pmf);
                }
            }
        }
        TransitionKernel {
            horizon: hn,
            num_states: sn,
            num_actions: an,
            support_len: spec.disturbance.support_max + 1,
            base: spec.dynamics.clone(),
            probs,
        }
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

    /// The full row `P_h(. | s, a)` over all `S` next states.
    #[inline]
    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let start = ((h * self.num_states + s) * self.num_actions + a) * self.num_states;
        &self.probs[start..start + self.num_states]
    }

    /// First reachable next state and the probabilities of the window of
    /// `W + 1` states starting there.
    #[inline]
    pub fn support(&self, h: usize, s: usize, a: usize) -> (usize, &[f64]) {
        let first = self.base[s * self.num_actions + a];
        (first, &self.row(h, s, a)[first..first + self.support_len])
    }

    #[inline]
    pub fn prob(&self, h: usize, s: usize, a: usize, next: usize) -> f64 {
        self.row(h, s, a)[next]
    }
}
