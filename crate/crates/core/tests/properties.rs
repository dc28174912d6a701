mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::properties::{match_law_violations, refinement_walk, WalkStats};
use common::{compose_single, random_problem, scenario_path, BOUND};
use svc_compose::planner::{oracle_solve, solve, validate_plan};
use svc_compose::runtime::{load_scenario, replay, run, Transcript};
use svc_compose::Conjecture;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn match_degrees_obey_their_laws(
        n in 1usize..=50,
        edges in prop::collection::vec((0usize..50, 0usize..50), 0..150),
        a in 0usize..50,
        b in 0usize..50,
    ) {
        let bad = match_law_violations(n, &edges, a, b);
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solutions_linearize_to_valid_plans(seed in any::<u64>()) {
        let bad = refinement_walk(seed, &mut WalkStats::default());
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }

    #[test]
    fn search_agrees_with_breadth_first_oracle(seed in any::<u64>()) {
        let p = random_problem(&mut ChaCha8Rng::seed_from_u64(seed), true);
        let oracle = oracle_solve(&p, BOUND).unwrap();
        let found = solve(&p, BOUND);
        prop_assert_eq!(oracle.is_some(), found.is_some());
        if let (Some(o), Some(f)) = (&oracle, &found) {
            prop_assert!(validate_plan(&p, f));
            prop_assert!(f.len() >= o.len());
        }
    }

    #[test]
    fn initial_conjectures_round_trip_through_json(seed in any::<u64>()) {
        let p = random_problem(&mut ChaCha8Rng::seed_from_u64(seed), true);
        let c = Conjecture::initial(&p);
        let back: Conjecture = serde_json::from_str(&c.to_json()).unwrap();
        prop_assert_eq!(back, c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn composition_agrees_with_oracle(seed in any::<u64>()) {
        let p = random_problem(&mut ChaCha8Rng::seed_from_u64(seed), true);
        let oracle = oracle_solve(&p, BOUND).unwrap();
        let outcome = compose_single(&p, seed, 100_000);
        prop_assert_eq!(oracle.is_some(), outcome.plan().is_some());
        if let Some(plan) = outcome.plan() {
            prop_assert!(validate_plan(&p, plan));
        }
    }

    #[test]
    fn travel_is_deterministic_for_any_seed(seed in any::<u64>()) {
        let mut s = load_scenario(scenario_path("travel/scenario.json")).unwrap();
        s.seed = seed;
        let a = run(&s).unwrap();
        let b = run(&s).unwrap();
        prop_assert_eq!(a.transcript.to_jsonl(), b.transcript.to_jsonl());
        let parsed = Transcript::from_jsonl(&a.transcript.to_jsonl()).unwrap();
        prop_assert_eq!(replay(&parsed).unwrap(), a.outcome.clone());
        prop_assert_eq!(a.outcome.plan().map(|p| p.len()), Some(4));
    }
}
