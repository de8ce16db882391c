use proptest::prelude::*;
use ucbf::envgen::rng_from;
use ucbf::harness::play_episode;
use ucbf::prelude::*;

fn gen_config() -> impl Strategy<Value = GenConfig> {
    (2usize..14, 1usize..5, 1usize..5, 0usize..4, any::<u64>(), any::<bool>()).prop_filter_map(
        "need S > W",
        |(s, a, h, w, seed, random_pmf)| {
            (s > w).then(|| {
                let mut g = GenConfig::new(s, a, h, w).with_seed(seed);
                if random_pmf {
                    g.pmf_family = PmfFamily::Random;
                }
                g
            })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_rows_are_stochastic_and_supported(gen in gen_config()) {
        let spec = random_mdp(&gen).unwrap();
        let kernel = spec.build_kernel();
        for h in 0..spec.horizon() {
            for s in 0..spec.num_states() {
                for a in 0..spec.num_actions() {
                    let row = kernel.row(h, s, a);
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    let base = spec.f(s, a);
                    for (next, &p) in row.iter().enumerate() {
                        if p > 0.0 {
                            prop_assert!(next >= base && next - base <= gen.support_max);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn step_is_pure(gen in gen_config(), h in 0usize..4, s in 0usize..14, a in 0usize..4, w in 0usize..4) {
        let spec = random_mdp(&gen).unwrap();
        let first = spec.step(h, s, a, w).ok();
        prop_assert_eq!(first, spec.step(h, s, a, w).ok());
    }

    #[test]
    fn every_agent_keeps_values_in_range(gen in gen_config(), episodes in 1usize..40) {
        let spec = random_mdp(&gen).unwrap();
        let (sn, an, hn) = (spec.num_states(), spec.num_actions(), spec.horizon());
        let sizes = Sizes::new(sn, an, hn);
        let config = AgentConfig::new(BonusSchedule::Empirical, BonusConstants::default(), sizes).unwrap();
        let model = ApproxModel::exact(sn, an, spec.dynamics()).unwrap();
        let mut ucbf = UcbfAgent::new(spec.rewards().clone(), model, config).unwrap();
        let mut ucbh = UcbHAgent::new(spec.rewards().clone(), 0.05).unwrap();
        let mut ucbvi = UcbviAgent::new(spec.rewards().clone(), 0.05).unwrap();
        let mut rng = rng_from(gen.seed ^ 1);
        let cap = hn as f64;
        for _ in 0..episodes {
            for learner in [&mut ucbf as &mut dyn Learner, &mut ucbh, &mut ucbvi] {
                learner.begin_episode();
                let s1 = spec.sample_initial_state(&mut rng);
                play_episode(&spec, learner, s1, &mut rng);
                learner.end_episode();
            }
            for tables in [ucbf.tables(), ucbh.tables(), ucbvi.plan()] {
                for h in 0..hn {
                    for s in 0..sn {
                        let v = tables.v(h, s);
                        prop_assert!((0.0..=cap).contains(&v), "V_{h}({s}) = {v}");
                    }
                }
                prop_assert!(tables.v_layer(hn).iter().all(|&v| v == 0.0));
            }
        }
    }
}

/// A model off by the same integer everywhere recovers shifted disturbances
/// that cancel exactly, so the learned tables match the exact-model run.
#[test]
fn constant_offset_model_learns_identical_tables() {
    let (sn, an, hn, w) = (20, 3, 4, 3);
    let offset = 4;
    let base = random_mdp(&GenConfig::new(sn, an, hn, w).with_seed(8)).unwrap();
    let dynamics: Vec<usize> = base.dynamics().iter().map(|&x| x % (sn - w - offset)).collect();
    let spec = MdpSpec::new(
        dynamics.clone(),
        base.rewards().clone(),
        DisturbancePmf::uniform(w),
        base.initial_dist().to_vec(),
    )
    .unwrap();
    let sizes = Sizes::new(sn, an, hn);
    let config = AgentConfig::new(BonusSchedule::Empirical, BonusConstants::default(), sizes).unwrap();
    let exact = ApproxModel::exact(sn, an, &dynamics).unwrap();
    let shifted = ApproxModel::new(sn, an, dynamics.iter().map(|x| x + offset).collect(), 0.0).unwrap();
    let mut a = UcbfAgent::new(spec.rewards().clone(), exact, config).unwrap();
    let mut b = UcbfAgent::new(spec.rewards().clone(), shifted, config).unwrap();
    let mut rng_a = rng_from(77);
    let mut rng_b = rng_from(77);
    for _ in 0..300 {
        let s1 = spec.sample_initial_state(&mut rng_a);
        assert_eq!(s1, spec.sample_initial_state(&mut rng_b));
        play_episode(&spec, &mut a, s1, &mut rng_a);
        play_episode(&spec, &mut b, s1, &mut rng_b);
        a.end_episode();
        b.end_episode();
        assert_eq!(a.tables(), b.tables());
    }
}

#[test]
fn write_counters_contrast_sweep_and_single_entry_updates() {
    let spec = random_mdp(&GenConfig::new(15, 4, 5, 2).with_seed(2)).unwrap();
    let sizes = Sizes::new(15, 4, 5);
    let config = AgentConfig::new(BonusSchedule::Empirical, BonusConstants::default(), sizes).unwrap();
    let model = ApproxModel::exact(15, 4, spec.dynamics()).unwrap();
    let mut ucbf = UcbfAgent::new(spec.rewards().clone(), model, config).unwrap();
    let mut ucbh = UcbHAgent::new(spec.rewards().clone(), 0.05).unwrap();
    let mut rng = rng_from(3);
    for k in 1..=25u64 {
        for learner in [&mut ucbf as &mut dyn Learner, &mut ucbh] {
            let s1 = spec.sample_initial_state(&mut rng);
            play_episode(&spec, learner, s1, &mut rng);
            learner.end_episode();
        }
        assert_eq!(ucbf.q_writes(), k * 5 * 15 * 4);
        assert_eq!(ucbh.q_writes(), k * 5);
    }
}

#[test]
fn ucbvi_tallies_are_quadratic_in_states() {
    for sn in [5, 10, 20] {
        let spec = random_mdp(&GenConfig::new(sn, 3, 4, 2).with_seed(1)).unwrap();
        let agent = UcbviAgent::new(spec.rewards().clone(), 0.05).unwrap();
        assert_eq!(agent.tallies().capacity(), 4 * sn * sn * 3);
    }
}

#[test]
fn evaluation_dominated_by_optimum_for_learned_policies() {
    let spec = random_mdp(&GenConfig::new(12, 3, 4, 2).with_seed(4)).unwrap();
    let kernel = spec.build_kernel();
    let (optimal, _) = optimal_values(&kernel, spec.rewards()).unwrap();
    let sizes = Sizes::new(12, 3, 4);
    let config = AgentConfig::new(BonusSchedule::Empirical, BonusConstants::default(), sizes).unwrap();
    let model = ApproxModel::exact(12, 3, spec.dynamics()).unwrap();
    let mut agent = UcbfAgent::new(spec.rewards().clone(), model, config).unwrap();
    let mut rng = rng_from(9);
    for _ in 0..100 {
        let value = evaluate_policy(&kernel, spec.rewards(), &agent.extract_policy()).unwrap();
        for h in 0..4 {
            for s in 0..12 {
                assert!(value.v(h, s) <= optimal.v(h, s) + 1e-9);
            }
        }
        let s1 = spec.sample_initial_state(&mut rng);
        play_episode(&spec, &mut agent, s1, &mut rng);
        agent.end_episode();
    }
}
