mod common;

use proptest::prelude::*;
use provox_core::dsl::{Call, Plan};
use provox_core::eval::{efficacy_overlap, lcs_overlap};
use provox_core::proactive::{build_trigger, TRIGGER_PREFIX};
use provox_core::sim::load_scene;
use provox_core::synthesis::{apply_lifting, enumerate_liftings, lift_body, TeachExample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn arb_call() -> impl Strategy<Value = Call> {
    (
        prop::sample::select(vec!["goto", "pickup", "release", "pack"]),
        prop::collection::vec(prop::sample::select(OBJECT_IDS.to_vec()), 0..3),
    )
        .prop_map(|(f, args)| Call { function: f.to_string(), args: args.into_iter().map(String::from).collect() })
}

fn arb_plan() -> impl Strategy<Value = Plan> {
    prop::collection::vec(arb_call(), 0..10).prop_map(Plan::new)
}

proptest! {
    #[test]
    fn render_parse_round_trip(seed in any::<u64>()) {
        let plan = random_syntax_plan(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(Plan::parse_syntax(&plan.to_string()).unwrap(), plan.clone());
        let json = serde_json::to_string(&plan).unwrap();
        prop_assert_eq!(serde_json::from_str::<Plan>(&json).unwrap(), plan);
    }

    #[test]
    fn inlining_matches_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let api = random_api(&mut rng, &scene("lunchbag").base_api());
        let plan: Plan = (0..3).map(|_| random_call(&mut rng, &api)).collect();
        let mut expected = Vec::new();
        for c in &plan {
            expand_oracle(&api, c, &mut expected);
        }
        let inlined = api.inline_plan(&plan).unwrap();
        prop_assert!(inlined.iter().all(|c| provox_core::dsl::is_base_primitive(&c.function)));
        prop_assert_eq!(inlined.calls, expected);
        prop_assert!(api.topological_order().is_some());
    }

    #[test]
    fn overlap_is_symmetric_and_bounded(a in arb_plan(), b in arb_plan()) {
        prop_assert_eq!(efficacy_overlap(&a, &b), efficacy_overlap(&b, &a));
        prop_assert!(efficacy_overlap(&a, &b) <= a.len().min(b.len()));
        prop_assert_eq!(efficacy_overlap(&a, &a), a.len());
        prop_assert!(lcs_overlap(&a, &b) <= efficacy_overlap(&a, &b));
    }

    #[test]
    fn overlap_monotone_under_appending(a in arb_plan(), b in arb_plan(), extra in arb_call()) {
        let mut longer = a.calls.clone();
        longer.push(extra);
        prop_assert!(efficacy_overlap(&Plan::new(longer), &b) >= efficacy_overlap(&a, &b));
    }

    #[test]
    fn trigger_shape(goal in "[a-zA-Z' ,.-]{0,40}") {
        match build_trigger(&goal) {
            Ok(t) => {
                prop_assert!(t.starts_with(TRIGGER_PREFIX));
                prop_assert!(t.ends_with('.') && !t.ends_with(".."));
            }
            Err(_) => prop_assert!(goal.trim().is_empty()),
        }
    }

    #[test]
    fn every_lifting_reproduces_its_example(plan in prop::collection::vec(
        (prop::sample::select(vec!["goto", "pickup"]), prop::sample::select(OBJECT_IDS.to_vec())), 1..5)
    ) {
        let decomposition: Plan = plan.iter().map(|(f, o)| Call::new(f, &[o])).collect();
        let example = TeachExample::new("do it", decomposition.clone());
        for lifting in enumerate_liftings(&example) {
            let body = lift_body(&decomposition, &lifting);
            prop_assert_eq!(apply_lifting(&body, &lifting), Some(decomposition.clone()));
        }
    }

    #[test]
    fn sim_conserves_objects(seed in any::<u64>()) {
        let world = load_scene(&scene("lunchbag")).unwrap();
        let plan = random_primitive_plan(&mut ChaCha8Rng::seed_from_u64(seed));
        let run = world.exec_primitives(&plan);
        prop_assert_eq!(run.world.objects.len(), world.objects.len());
        prop_assert!(run.world.check_invariants().is_ok());
    }
}
