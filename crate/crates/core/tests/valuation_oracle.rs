mod common;

use common::{oracle_value_ticks, outcome_paths, rollout, tiny_scenario, Oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use verispace_core::presets::exemplar_scenario;
use verispace_core::sampler::random_tree;
use verispace_core::treespace::Valuator;
use verispace_core::{Label, Money, RawTree, Scenario, VerificationState};

fn check_against_enumeration(scenario: &Scenario, tree: &RawTree) {
    let mut oracle = Oracle::new(scenario);
    let want = outcome_paths(&mut oracle, tree);
    let fvt = Valuator::new(scenario).evaluate(tree).unwrap();
    assert_eq!(
        fvt.paths.len(),
        want.len(),
        "path count for {:?}",
        tree.labels()
    );
    for (got, want) in fvt.paths.iter().zip(&want) {
        assert_eq!(got.end_state, want.end);
        assert!((got.probability - want.probability).abs() < 1e-12);
        assert_eq!(got.terminal_value.ticks(), want.value_ticks.round() as i64);
    }
    let total: f64 = fvt.paths.iter().map(|p| p.probability).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert_eq!(
        fvt.expected_value,
        Money::round_ticks(oracle_value_ticks(&want)),
        "tree {:?}",
        tree.labels()
    );
}

#[test]
fn every_two_activity_exemplar_tree_matches_four_path_enumeration() {
    for rule in ["Low", "High"] {
        let scn = exemplar_scenario(rule).unwrap();
        let origin = VerificationState::from_results(&[0; 4], scn.horizon() - 2).unwrap();
        let mut seen = 0;
        for a in 0..4u16 {
            for b in (0..4u16).filter(|&b| b != a) {
                for c in (0..4u16).filter(|&c| c != a) {
                    let labels = [Label::Activity(a), Label::Activity(b), Label::Activity(c)];
                    let tree = RawTree::new(origin, 2, labels.to_vec()).unwrap();
                    check_against_enumeration(&scn, &tree);
                    seen += 1;
                }
            }
        }
        assert_eq!(seen, 36);
    }
}

#[test]
fn shallow_random_trees_match_enumeration_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..40 {
        let horizon = 1 + seed as usize % 3;
        let scn = tiny_scenario(seed, 3 + seed as usize % 3, horizon);
        let origin = scn.initial_state();
        for _ in 0..25 {
            let tree = random_tree(origin, horizon, &mut rng);
            check_against_enumeration(&scn, &tree);
        }
        // Mid-process origin: one activity already verified.
        let k = rng.random_range(0..scn.n_activities());
        let mid = origin.with_result(k, rng.random_bool(0.5));
        if mid.time() < horizon {
            for _ in 0..10 {
                let tree = random_tree(mid, horizon - mid.time(), &mut rng);
                check_against_enumeration(&scn, &tree);
            }
        }
    }
}

#[test]
fn depth_five_trees_match_rollout_mean() {
    const ROLLOUTS: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut informative = 0;
    for seed in 0..4 {
        let scn = tiny_scenario(100 + seed, 6, 5);
        let mut oracle = Oracle::new(&scn);
        let mut val = Valuator::new(&scn);
        for _ in 0..2 {
            let tree = random_tree(scn.initial_state(), 5, &mut rng);
            let ev = val.value(&tree).unwrap().ticks() as f64;
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..ROLLOUTS {
                let v = rollout(&mut oracle, &tree, &mut rng);
                sum += v;
                sq += v * v;
            }
            let n = ROLLOUTS as f64;
            let mean = sum / n;
            let se = ((sq / n - mean * mean).max(0.0) / n).sqrt();
            if se > 0.0 {
                informative += 1;
            }
            assert!(
                (mean - ev).abs() <= 3.0 * se + 0.5,
                "seed {seed}: rollout mean {mean:.1} vs {ev} (se {se:.2})"
            );
        }
    }
    assert!(informative >= 4, "too many deterministic trees");
}
