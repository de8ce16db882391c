//! Seeded generation of random additive-disturbance MDPs, corrupted dynamics
//! models with a bounded error budget, and a synthetic online estimator whose
//! error shrinks like `sqrt(d / k)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{DisturbancePmf, MdpSpec, RewardTable};
use crate::ucbf::ApproxModel;

/// Mixes a list of integers into one seed (splitmix64 finalizer applied to
/// a running state), so that per-run streams never overlap in practice.
pub fn derive_seed(parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    parts.iter().fold(0x9e37_79b9_7f4a_7c15, |state, &part| {
        mix(state.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ mix(part))
    })
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Family the disturbance distribution is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PmfFamily {
    /// Uniform over `{0, ..., W}`.
    #[default]
    Uniform,
    /// `p(w)` proportional to `ratio^w`.
    TruncatedGeometric { ratio: f64 },
    /// Independent uniform weights, normalized.
    Random,
}

impl PmfFamily {
    fn draw<R: Rng + ?Sized>(&self, support_max: usize, rng: &mut R) -> Result<DisturbancePmf> {
        let weights: Vec<f64> = match *self {
            PmfFamily::Uniform => return Ok(DisturbancePmf::uniform(support_max)),
            PmfFamily::TruncatedGeometric { ratio } => {
                if !(ratio.is_finite() && ratio > 0.0) {
                    return Err(Error::Config(format!("geometric ratio {ratio} must be positive")));
                }
                (0..=support_max).map(|w| ratio.powi(w as i32)).collect()
            }
            PmfFamily::Random => (0..=support_max).map(|_| 1.0 - rng.random::<f64>()).collect(),
        };
        let total: f64 = weights.iter().sum();
        DisturbancePmf::shared(weights.into_iter().map(|x| x / total).collect())
    }
}

fn default_true() -> bool {
    true
}

/// Random-instance settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    /// Disturbance support maximum `W`.
    pub support_max: usize,
    /// Rewards depend on the state only (`r_h(s, a) = r_h(s)`).
    #[serde(default = "default_true")]
    pub state_only_rewards: bool,
    #[serde(default)]
    pub pmf_family: PmfFamily,
    #[serde(default)]
    pub seed: u64,
}

impl GenConfig {
    /// The grid cell used throughout the experiments: `S = 25`, `W = 5`.
    pub fn new(num_states: usize, num_actions: usize, horizon: usize, support_max: usize) -> Self {
        GenConfig {
            num_states,
            num_actions,
            horizon,
            support_max,
            state_only_rewards: true,
            pmf_family: PmfFamily::Uniform,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_states == 0 || self.num_actions == 0 || self.horizon == 0 {
            return Err(Error::Config("S, A and H must be positive".into()));
        }
        if self.num_states <= self.support_max {
            return Err(Error::Config(format!(
                "need S > W, got S = {} and W = {}",
                self.num_states, self.support_max
            )));
        }
        Ok(())
    }
}

/// Draws an MDP: `f` uniform over `[0, S - 1 - W]`, rewards i.i.d. uniform on
/// `[0, 1]` (shared across actions by default), the disturbance pmf from the
/// configured family shared across steps, and a uniform initial distribution.
pub fn random_mdp(cfg: &GenConfig) -> Result<MdpSpec> {
    cfg.validate()?;
    let GenConfig {
        num_states: sn,
        num_actions: an,
        horizon: hn,
        support_max: w,
        ..
    } = *cfg;
    let mut rng = rng_from(cfg.seed);
    let dynamics = (0..sn * an).map(|_| rng.random_range(0..sn - w)).collect();
    let rewards = if cfg.state_only_rewards {
        let per_state: Vec<f64> = (0..hn * sn).map(|_| rng.random()).collect();
        RewardTable::from_fn(hn, sn, an, |h, s, _| per_state[h * sn + s])?
    } else {
        RewardTable::from_fn(hn, sn, an, |_, _, _| rng.random())?
    };
    let pmf = cfg.pmf_family.draw(w, &mut rng)?;
    MdpSpec::new(dynamics, rewards, pmf, vec![1.0 / sn as f64; sn])
}

fn perturb<R: Rng + ?Sized>(spec: &MdpSpec, magnitude: usize, rng: &mut R) -> Vec<usize> {
    let max_image = (spec.num_states() - 1 - spec.disturbance().support_max()) as i64;
    let m = magnitude as i64;
    spec.dynamics()
        .iter()
        .map(|&x| {
            let eps = if m == 0 { 0 } else { rng.random_range(-m..=m) };
            (x as i64 + eps).clamp(0, max_image) as usize
        })
        .collect()
}

/// Corrupts the true dynamics with integer noise uniform on
/// `{-zeta/2, ..., zeta/2}`, clamped back into the dynamics codomain.
pub fn corrupt_model(spec: &MdpSpec, zeta: u32, seed: u64) -> Result<ApproxModel> {
    if !zeta.is_multiple_of(2) {
        return Err(Error::Config(format!("error budget zeta = {zeta} must be even")));
    }
    let mut rng = rng_from(seed);
    let f_hat = perturb(spec, (zeta / 2) as usize, &mut rng);
    ApproxModel::new(spec.num_states(), spec.num_actions(), f_hat, zeta as f64)
}

/// Error magnitude `floor(sqrt(d / k))` of the synthetic estimator.
pub fn estimator_bound(d: f64, k: usize) -> usize {
    (d / k as f64).sqrt().floor() as usize
}

/// The `k`-th model of a synthetic online estimator with
/// `|f_hat_k - f| <= floor(sqrt(d / k))`.
pub fn estimator_sequence(spec: &MdpSpec, d: f64, k: usize, seed: u64) -> Result<ApproxModel> {
    if k == 0 {
        return Err(Error::Argument("estimator index k must be at least 1".into()));
    }
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::Argument(format!("estimator dimension d = {d} must be positive")));
    }
    let bound = estimator_bound(d, k);
    let mut rng = rng_from(derive_seed(&[seed, k as u64]));
    let f_hat = perturb(spec, bound, &mut rng);
    ApproxModel::new(spec.num_states(), spec.num_actions(), f_hat, 2.0 * bound as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn zero_support_gives_deterministic_dynamics() {
        let spec = random_mdp(&GenConfig::new(10, 3, 4, 0).with_seed(3)).unwrap();
        assert_eq!(spec.disturbance().probs(0), &[1.0]);
        assert!(spec.dynamics().iter().all(|&x| x < 10));
    }

    #[test]
    fn dynamics_respect_codomain() {
        for seed in 0..20 {
            let spec = random_mdp(&GenConfig::new(25, 4, 5, 5).with_seed(seed)).unwrap();
            assert!(spec.dynamics().iter().all(|&x| x <= 19));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig {
            pmf_family: PmfFamily::Random,
            ..GenConfig::new(25, 8, 10, 5)
        }
        .with_seed(99);
        assert_eq!(random_mdp(&cfg).unwrap(), random_mdp(&cfg).unwrap());
        assert_ne!(random_mdp(&cfg).unwrap(), random_mdp(&cfg.with_seed(100)).unwrap());
    }

    #[test]
    fn state_only_rewards_are_broadcast() {
        let spec = random_mdp(&GenConfig::new(12, 4, 3, 2).with_seed(1)).unwrap();
        for h in 0..3 {
            for s in 0..12 {
                let row = spec.rewards().row(h, s);
                assert!(row.iter().all(|&r| r == row[0]));
            }
        }
        let general = GenConfig {
            state_only_rewards: false,
            ..GenConfig::new(12, 4, 3, 2)
        };
        let spec = random_mdp(&general).unwrap();
        assert!((0..12).any(|s| spec.rewards().row(0, s)[0] != spec.rewards().row(0, s)[1]));
    }

    #[test]
    fn families_are_normalized() {
        for family in [
            PmfFamily::Uniform,
            PmfFamily::TruncatedGeometric { ratio: 0.5 },
            PmfFamily::Random,
        ] {
            let cfg = GenConfig {
                pmf_family: family,
                ..GenConfig::new(25, 2, 5, 5)
            };
            let spec = random_mdp(&cfg).unwrap();
            let total: f64 = spec.disturbance().probs(0).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn support_must_fit() {
        assert!(random_mdp(&GenConfig::new(5, 2, 3, 5)).is_err());
    }

    #[test]
    fn zero_budget_keeps_truth() {
        let spec = random_mdp(&GenConfig::new(25, 4, 5, 5).with_seed(2)).unwrap();
        let model = corrupt_model(&spec, 0, 17).unwrap();
        assert_eq!(model.table(), spec.dynamics());
        assert!(corrupt_model(&spec, 3, 17).is_err());
    }

    #[test]
    fn corruption_respects_budget() {
        for zeta in [0u32, 2, 4] {
            for seed in 0..1000 {
                let spec = random_mdp(&GenConfig::new(25, 4, 5, 5).with_seed(seed)).unwrap();
                let model = corrupt_model(&spec, zeta, seed + 1).unwrap();
                assert!(model.sup_error(spec.dynamics()) <= (zeta / 2) as usize);
                assert!(model.table().iter().all(|&x| x <= 19));
                assert_eq!(model.zeta(), zeta as f64);
            }
        }
    }

    #[test]
    fn clamping_never_increases_error() {
        // Unclamped noise from the same stream, compared entrywise.
        for seed in 0..100 {
            let spec = random_mdp(&GenConfig::new(25, 4, 5, 5).with_seed(seed)).unwrap();
            let model = corrupt_model(&spec, 4, seed).unwrap();
            let mut rng = rng_from(seed);
            for (i, &x) in spec.dynamics().iter().enumerate() {
                let raw = x as i64 + rng.random_range(-2i64..=2);
                assert!(model.table()[i].abs_diff(x) as i64 <= (raw - x as i64).abs());
            }
        }
    }

    #[test]
    fn estimator_bound_examples() {
        assert_eq!(estimator_bound(4.0, 1), 2);
        assert_eq!(estimator_bound(4.0, 5), 0);
        let spec = random_mdp(&GenConfig::new(25, 4, 5, 5).with_seed(7)).unwrap();
        assert_eq!(estimator_sequence(&spec, 4.0, 5, 1).unwrap().table(), spec.dynamics());
        let first = estimator_sequence(&spec, 4.0, 1, 1).unwrap();
        assert!(first.sup_error(spec.dynamics()) <= 2);
        assert!(estimator_sequence(&spec, 4.0, 0, 1).is_err());
    }

    proptest! {
        #[test]
        fn estimator_bound_decays(d in 0.1f64..100.0, k in 1usize..10_000) {
            prop_assert!(estimator_bound(d, k + 1) <= estimator_bound(d, k));
            if k as f64 > d {
                prop_assert_eq!(estimator_bound(d, k), 0);
            }
        }

        #[test]
        fn generated_specs_are_valid(s in 2usize..30, a in 1usize..6, h in 1usize..8, w in 0usize..6, seed in any::<u64>()) {
            prop_assume!(s > w);
            let spec = random_mdp(&GenConfig::new(s, a, h, w).with_seed(seed)).unwrap();
            // Revalidate through the document path.
            let back = MdpSpec::from_json(&spec.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, spec);
        }
    }
}
