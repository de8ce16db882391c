use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::config::{AgentKind, AgentSpec, ExperimentConfig};
use super::metrics::RunMetrics;
use crate::agent::{Learner, Sizes};
use crate::baseline::{FixedPolicyAgent, UcbHAgent, UcbviAgent};
use crate::dp::{evaluate_policy, lipschitz_constant, optimal_values, Policy, ValueTables};
use crate::envgen::{corrupt_model, derive_seed, estimator_sequence, random_mdp, rng_from};
use crate::error::{Error, Result};
use crate::mdp::{MdpSpec, TransitionKernel};
use crate::ucbf::{AgentConfig, ApproxModel, BonusSchedule, UcbfAgent};

// Stream tags mixed into derived seeds.
const STREAM_MDP: u64 = 1;
const STREAM_ENV: u64 = 2;
const STREAM_CORRUPT: u64 = 3;
const STREAM_ESTIMATOR: u64 = 4;

/// Ground truth of one run: the sampled MDP and its exact optimum.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub run_index: usize,
    pub spec: MdpSpec,
    pub kernel: TransitionKernel,
    pub optimal: ValueTables,
    pub optimal_policy: Policy,
    env_seed: u64,
    master_seed: u64,
}

impl RunContext {
    pub fn new(cfg: &ExperimentConfig, run_index: usize) -> Result<Self> {
        let mdp_seed = mdp_seed(cfg, run_index);
        let spec = random_mdp(&cfg.gen.with_seed(mdp_seed))?;
        let kernel = spec.build_kernel();
        let (optimal, optimal_policy) = optimal_values(&kernel, spec.rewards())?;
        Ok(RunContext {
            run_index,
            spec,
            kernel,
            optimal,
            optimal_policy,
            env_seed: derive_seed(&[cfg.master_seed, cfg.gen.seed, run_index as u64, STREAM_ENV]),
            master_seed: cfg.master_seed,
        })
    }

    /// `V*_1(s) - V^pi_1(s)` at `s` and averaged under the initial distribution.
    pub fn gaps(&self, policy: &Policy, s1: usize) -> Result<(f64, f64)> {
        let value = evaluate_policy(&self.kernel, self.spec.rewards(), policy)?;
        let at_s1 = self.optimal.v(0, s1) - value.v(0, s1);
        let mu = self.spec.initial_dist();
        let expected = self.optimal.expected_value(0, mu) - value.expected_value(0, mu);
        Ok((at_s1, expected))
    }
}

/// Seed of the MDP drawn for `run_index`; shared by all agents in the run.
pub fn mdp_seed(cfg: &ExperimentConfig, run_index: usize) -> u64 {
    derive_seed(&[cfg.master_seed, cfg.gen.seed, run_index as u64, STREAM_MDP])
}

/// The learner plus whatever schedule of model updates it needs.
pub struct BuiltAgent {
    pub learner: Box<dyn Learner>,
    /// Produces the model for episode `k` when the agent uses an online
    /// estimator.
    pub refresh: Option<ModelRefresh>,
}

pub type ModelRefresh = Box<dyn FnMut(usize) -> Result<ApproxModel> + Send>;

/// Builds the agent described by `agent` for the run in `ctx`. Agents see
/// the known rewards and, for `ucb_f`, a dynamics model; never the kernel.
pub fn build_agent(agent: &AgentSpec, ctx: &RunContext) -> Result<BuiltAgent> {
    let spec = &ctx.spec;
    let rewards = spec.rewards().clone();
    let sizes = Sizes::new(spec.num_states(), spec.num_actions(), spec.horizon());
    let learner: Box<dyn Learner> = match agent.kind {
        AgentKind::UcbH => Box::new(UcbHAgent::new(rewards, agent.c)?),
        AgentKind::Ucbvi => Box::new(UcbviAgent::new(rewards, agent.c)?),
        AgentKind::RewardGreedy => Box::new(FixedPolicyAgent::reward_greedy(&rewards)),
        AgentKind::UcbF => {
            let mut constants = agent.constants();
            if agent.lipschitz_from_oracle {
                constants.lipschitz = lipschitz_constant(&ctx.optimal);
            }
            let config = AgentConfig::new(agent.schedule, constants, sizes)?;
            let model = if agent.schedule == BonusSchedule::Online || agent.zeta == 0 {
                // The online estimator replaces this before the first episode.
                ApproxModel::exact(sizes.num_states, sizes.num_actions, spec.dynamics())?
            } else {
                let seed = derive_seed(&[ctx.master_seed, ctx.run_index as u64, STREAM_CORRUPT, agent.zeta as u64]);
                corrupt_model(spec, agent.zeta, seed)?
            };
            Box::new(UcbfAgent::new(rewards, model, config)?)
        }
    };
    let refresh: Option<ModelRefresh> = if agent.kind == AgentKind::UcbF && agent.schedule == BonusSchedule::Online {
        let truth = spec.clone();
        let d = agent.d;
        let seed = derive_seed(&[ctx.master_seed, ctx.run_index as u64, STREAM_ESTIMATOR]);
        Some(Box::new(move |k| estimator_sequence(&truth, d, k, seed)))
    } else {
        None
    };
    Ok(BuiltAgent { learner, refresh })
}

/// Plays one episode from `s1` and feeds every transition to the learner.
/// Returns the realized return.
pub fn play_episode<R: Rng + ?Sized>(
    spec: &MdpSpec,
    learner: &mut dyn Learner,
    s1: usize,
    rng: &mut R,
) -> f64 {
    let mut s = s1;
    let mut total = 0.0;
    for h in 0..spec.horizon() {
        let a = learner.act(h, s);
        total += spec.rewards().get(h, s, a);
        let w = spec.sample_disturbance(h, rng);
        let next = spec.f(s, a) + w;
        learner.observe(h, s, a, next);
        s = next;
    }
    total
}

fn is_eval_episode(k: usize, every: usize, last: usize) -> bool {
    (k - 1).is_multiple_of(every) || k == last
}

/// Runs one agent for `K` episodes on the run's MDP.
pub fn run_agent(cfg: &ExperimentConfig, agent: &AgentSpec, ctx: &RunContext) -> Result<RunMetrics> {
    let BuiltAgent { mut learner, mut refresh } = build_agent(agent, ctx)?;
    let mut rng = rng_from(ctx.env_seed);
    let k_max = cfg.episodes;
    let points = k_max.div_ceil(cfg.eval_every) + 1;
    let mut metrics = RunMetrics {
        agent: agent.label(),
        run_index: ctx.run_index,
        episodes: Vec::with_capacity(points),
        gap_at_s1: Vec::with_capacity(points),
        gap_mu: Vec::with_capacity(points),
        cum_regret: Vec::with_capacity(points),
        episode_seconds: Vec::with_capacity(points),
        q_writes: 0,
    };
    let mut regret = 0.0;
    let mut current_gap = 0.0;
    for k in 1..=k_max {
        if let Some(next_model) = refresh.as_mut() {
            learner.set_model(next_model(k)?)?;
        }
        learner.begin_episode();
        let s1 = ctx.spec.sample_initial_state(&mut rng);
        let evaluate = is_eval_episode(k, cfg.eval_every, k_max);
        let mut at_s1 = 0.0;
        if evaluate {
            let (g1, gmu) = ctx.gaps(&learner.policy(), s1)?;
            at_s1 = g1;
            current_gap = gmu;
        }
        regret += current_gap;

        let started = Instant::now();
        play_episode(&ctx.spec, learner.as_mut(), s1, &mut rng);
        learner.end_episode();
        if evaluate {
            metrics.episodes.push(k);
            metrics.gap_at_s1.push(at_s1);
            metrics.gap_mu.push(current_gap);
            metrics.cum_regret.push(regret);
            metrics.episode_seconds.push(started.elapsed().as_secs_f64());
        }
    }
    metrics.q_writes = learner.q_writes();
    Ok(metrics)
}

/// Metrics of every configured agent for one run, in configuration order.
pub fn run_experiment(cfg: &ExperimentConfig, run_index: usize) -> Result<Vec<RunMetrics>> {
    cfg.validate()?;
    let ctx = RunContext::new(cfg, run_index)?;
    cfg.agents.iter().map(|agent| run_agent(cfg, agent, &ctx)).collect()
}

/// All `(agent, run)` pairs, executed on a pool of `threads` workers (zero
/// picks the available parallelism). Output order is agent-major, then run
/// index, independent of scheduling.
pub fn run_all(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<RunMetrics>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        let contexts: Vec<RunContext> = (0..cfg.num_runs)
            .into_par_iter()
            .map(|run| RunContext::new(cfg, run))
            .collect::<Result<_>>()?;
        let units: Vec<(usize, usize)> = (0..cfg.agents.len())
            .flat_map(|a| (0..cfg.num_runs).map(move |r| (a, r)))
            .collect();
        units
            .into_par_iter()
            .map(|(a, r)| run_agent(cfg, &cfg.agents[a], &contexts[r]))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envgen::GenConfig;

    fn tiny(episodes: usize) -> ExperimentConfig {
        ExperimentConfig::new(
            GenConfig::new(3, 2, 2, 0),
            vec![
                AgentSpec::ucb_f(0),
                AgentSpec::new(AgentKind::UcbH),
                AgentSpec::new(AgentKind::Ucbvi),
                AgentSpec::new(AgentKind::RewardGreedy),
            ],
            episodes,
            2,
        )
        .with_seed(5)
    }

    #[test]
    fn single_policy_mdp_has_no_gap() {
        let cfg = ExperimentConfig::new(GenConfig::new(1, 1, 3, 0), vec![AgentSpec::ucb_f(0)], 50, 1);
        let runs = run_experiment(&cfg, 0).unwrap();
        assert!(runs[0].gap_mu.iter().all(|&g| g == 0.0));
        assert!(runs[0].gap_at_s1.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn deterministic_tiny_instance_converges() {
        let runs = run_experiment(&tiny(2000), 0).unwrap();
        assert!(runs[0].final_gap() < 1e-6);
    }

    #[test]
    fn same_seed_same_metrics() {
        let cfg = tiny(200);
        let mut a = run_experiment(&cfg, 1).unwrap();
        let mut b = run_experiment(&cfg, 1).unwrap();
        for m in a.iter_mut().chain(b.iter_mut()) {
            m.episode_seconds.clear();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_matches_serial() {
        let mut cfg = tiny(100);
        cfg.gen = GenConfig::new(10, 3, 3, 2);
        cfg.num_runs = 4;
        let strip = |mut v: Vec<RunMetrics>| {
            v.iter_mut().for_each(|m| m.episode_seconds.clear());
            v
        };
        assert_eq!(strip(run_all(&cfg, 1).unwrap()), strip(run_all(&cfg, 4).unwrap()));
    }

    #[test]
    fn write_counts_per_episode() {
        let mut cfg = tiny(10);
        cfg.gen = GenConfig::new(7, 3, 4, 2);
        let runs = run_experiment(&cfg, 0).unwrap();
        assert_eq!(runs[0].q_writes, 10 * 4 * 7 * 3);
        assert_eq!(runs[1].q_writes, 10 * 4);
    }

    #[test]
    fn regret_is_monotone_and_gaps_bounded() {
        let mut cfg = tiny(300);
        cfg.gen = GenConfig::new(12, 3, 4, 3);
        cfg.eval_every = 7;
        for m in run_experiment(&cfg, 0).unwrap() {
            assert!(m.cum_regret.windows(2).all(|w| w[1] >= w[0]));
            assert!(m.gap_mu.iter().all(|&g| (-1e-9..=4.0 + 1e-9).contains(&g)));
            assert!(m.gap_at_s1.iter().all(|&g| (-1e-9..=4.0 + 1e-9).contains(&g)));
            assert_eq!(m.episodes.first(), Some(&1));
            assert_eq!(m.episodes.last(), Some(&300));
        }
    }

    #[test]
    fn online_schedule_reaches_exact_model() {
        let mut agent = AgentSpec::ucb_f(0).with_schedule(BonusSchedule::Online);
        agent.d = 4.0;
        let cfg = ExperimentConfig::new(GenConfig::new(10, 2, 3, 2), vec![agent.clone()], 10, 1);
        let ctx = RunContext::new(&cfg, 0).unwrap();
        let mut built = build_agent(&agent, &ctx).unwrap();
        let refresh = built.refresh.as_mut().unwrap();
        assert!(refresh(1).unwrap().sup_error(ctx.spec.dynamics()) <= 2);
        assert_eq!(refresh(5).unwrap().table(), ctx.spec.dynamics());
    }
}
