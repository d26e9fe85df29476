mod common;

use normact::belief::Categorical;
use normact::engine::{
    expected_free_energy, infer_states, policy_posterior, select_action, update_precision, Agent,
    EfeBreakdown, EngineConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sums_to_one(p: &[f64]) -> bool {
    (p.iter().sum::<f64>() - 1.0).abs() <= 1e-9 && p.iter().all(|x| *x >= 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn current_posterior_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(&mut rng);
        let history = common::sample_history(&model, &mut rng);
        let exact = common::brute_force_marginals(&model, &history);
        let current = history.observations.len() - 1;
        for policy in model.policies() {
            let beliefs = infer_states(&model, policy, &history.observations, &history.actions, &EngineConfig::default()).unwrap();
            prop_assert!(beliefs.converged);
            let engine: Vec<Vec<f64>> = beliefs.factors[current].iter().map(|c| c.probs().to_vec()).collect();
            prop_assert!(common::max_abs_diff(&engine, &exact) <= 1e-3);
        }
    }

    #[test]
    fn beliefs_and_free_energy_are_well_formed(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(&mut rng);
        let history = common::sample_history(&model, &mut rng);
        let current = history.observations.len() - 1;
        for policy in model.policies() {
            let beliefs = infer_states(&model, policy, &history.observations, &history.actions, &EngineConfig::default()).unwrap();
            prop_assert_eq!(beliefs.joint.len(), current + model.shape().horizon + 1);
            for q in &beliefs.joint {
                prop_assert!(sums_to_one(q));
            }
            for factors in &beliefs.factors {
                for c in factors {
                    prop_assert!(sums_to_one(c.probs()));
                }
            }
            let g = expected_free_energy(&model, &beliefs, current).unwrap();
            prop_assert!((g.total - (g.risk + g.ambiguity)).abs() <= 1e-9);
            prop_assert!(g.risk >= -1e-12 && g.ambiguity >= -1e-12);
            prop_assert_eq!(g.per_timepoint.len(), model.shape().horizon);
        }
    }

    #[test]
    fn agent_plays_a_whole_trial(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(&mut rng);
        let config = EngineConfig::default();
        let mut agent = Agent::new(&model, config.clone()).unwrap();
        let outcomes = model.shape().outcomes_per_modality.clone();
        for _ in 0..model.shape().trial_length {
            let obs: Vec<usize> = outcomes.iter().map(|n| rand::Rng::gen_range(&mut rng, 0..*n)).collect();
            let out = agent.step(&obs).unwrap();
            prop_assert!(sums_to_one(out.posterior.probs()));
            prop_assert!(sums_to_one(&out.action_marginal));
            prop_assert!(out.precision.gamma > 0.0);
            // free energy is non-negative, so confidence never exceeds its prior
            prop_assert!(out.precision.gamma <= 1.0 / config.beta_prior + 1e-12);
            prop_assert!(out.action < model.num_actions());
        }
        prop_assert!(agent.step(&vec![0; outcomes.len()]).is_err());
        prop_assert_eq!(agent.precision().records.len(), model.shape().trial_length);
    }

    #[test]
    fn posterior_ignores_constant_shifts(
        g in prop::collection::vec(0.0f64..20.0, 1..8),
        shift in -50.0f64..50.0,
        gamma in 0.01f64..16.0,
    ) {
        let a = policy_posterior(&EfeBreakdown::from_totals(&g), gamma).unwrap();
        let shifted: Vec<f64> = g.iter().map(|x| x + shift).collect();
        let b = policy_posterior(&EfeBreakdown::from_totals(&shifted), gamma).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn precision_stays_positive(g in prop::collection::vec(0.0f64..50.0, 1..16), beta in 0.1f64..4.0) {
        let config = EngineConfig { beta_prior: beta, ..EngineConfig::default() };
        let (gamma, record) = update_precision(&EfeBreakdown::from_totals(&g), &config).unwrap();
        prop_assert!(gamma > 0.0 && gamma <= 1.0 / beta + 1e-12);
        prop_assert!(record.iterates.iter().all(|x| *x > 0.0));
        prop_assert_eq!(record.iterates[0], 1.0 / beta);
    }

    #[test]
    fn action_choice_ignores_rescaling(weights in prop::collection::vec(0.01f64..1.0, 4), scale in 0.1f64..100.0) {
        let policies = normact::model::enumerate_policies(2, 2).unwrap();
        let a = Categorical::from_weights(weights.clone()).unwrap();
        let b = Categorical::from_weights(weights.iter().map(|w| w * scale).collect()).unwrap();
        prop_assert_eq!(select_action(&a, &policies).unwrap(), select_action(&b, &policies).unwrap());
    }
}
