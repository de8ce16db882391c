//! Optimistic Q-learning for episodic MDPs whose transitions follow an
//! additive disturbance model `s' = f(s, a) + w`.
//!
//! The crate contains:
//!
//! * [`mdp`]: instances, the disturbance law and the induced transition kernel;
//! * [`dp`]: exact backward induction, policy evaluation and a brute-force oracle;
//! * [`lr`]: the `(H + 1) / (H + t)` learning rate and its compound weights;
//! * [`ucbf`]: the UCB-f agent, which updates every state-action pair from
//!   each observed disturbance through a dynamics model `f_hat`;
//! * [`baseline`]: UCB-H, UCBVI and a fixed reward-greedy policy;
//! * [`envgen`]: seeded random instances, corrupted models and a synthetic
//!   online estimator;
//! * [`harness`]: experiments, metrics, CSV and SVG output;
//! * [`verify`]: the property checks behind `ucbf verify`.
//!
//! ```
//! use ucbf::prelude::*;
//!
//! let spec = random_mdp(&GenConfig::new(12, 3, 4, 2).with_seed(7)).unwrap();
//! let (optimal, _) = optimal_values(&spec.build_kernel(), spec.rewards()).unwrap();
//! assert!(optimal.v(0, 0) <= 4.0);
//! ```

pub mod agent;
pub mod baseline;
pub mod dp;
pub mod envgen;
pub mod error;
pub mod harness;
pub mod lr;
pub mod mdp;
pub mod ucbf;
pub mod verify;

pub use error::{Error, Result};

/// The types most programs need.
pub mod prelude {
    pub use crate::agent::{Learner, QTables, Sizes};
    pub use crate::baseline::{reward_greedy_policy, FixedPolicyAgent, UcbHAgent, UcbviAgent};
    pub use crate::dp::{
        brute_force_values, evaluate_policy, lipschitz_constant, optimal_values, Policy, ValueTables,
    };
    pub use crate::envgen::{corrupt_model, estimator_sequence, random_mdp, GenConfig, PmfFamily};
    pub use crate::error::{Error, Result};
    pub use crate::harness::{AgentKind, AgentSpec, ExperimentConfig, RunMetrics};
    pub use crate::lr::{alpha, alpha_weights};
    pub use crate::mdp::{DisturbancePmf, MdpSpec, RewardTable, TransitionKernel};
    pub use crate::ucbf::{AgentConfig, ApproxModel, BonusConstants, BonusSchedule, UcbfAgent};
}

// Compiles and runs every listing of the guide in book/ as a doc-test.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/exact.md")]
    mod exact {}
    #[doc = include_str!("../../../book/src/learning-rate.md")]
    mod learning_rate {}
    #[doc = include_str!("../../../book/src/ucb-f.md")]
    mod ucb_f {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/instances.md")]
    mod instances {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
