use std::collections::{BTreeSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use verispace_core::presets::{exemplar_scenario, fig3a_tree};
use verispace_core::pt::{metropolis_accept_prob, metropolis_step};
use verispace_core::sampler::{
    exchange_at, propose, random_tree, replace_at, replacement_candidates, MoveKind,
    EXCHANGE_PROBABILITY,
};
use verispace_core::{Label, Money, RawTree, VerificationState};

#[test]
fn move_mixture_frequency() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut t = random_tree(VerificationState::initial(10), 5, &mut rng);
    let n = 100_000;
    let mut exchanges = 0;
    for _ in 0..n {
        let (next, kind) = propose(&t, &mut rng, EXCHANGE_PROBABILITY);
        exchanges += (kind == MoveKind::Exchange) as usize;
        t = next;
    }
    let f = exchanges as f64 / n as f64;
    assert!((f - 0.8).abs() <= 0.01, "exchange share {f}");
}

#[test]
fn metropolis_frequency_matches_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let trials = 10_000;
    for (drop_units, temp) in [
        (5, 10.0),
        (20, 39.0),
        (100, 156.0),
        (700, 625.0),
        (3000, 2500.0),
    ] {
        let old = Money::from_units(10_000);
        let new = Money::from_units(10_000 - drop_units);
        let want = metropolis_accept_prob(old, new, temp);
        let hits = (0..trials)
            .filter(|_| metropolis_step(old, new, temp, &mut rng))
            .count();
        let got = hits as f64 / trials as f64;
        assert!(
            (got - want).abs() <= 0.02,
            "dE=-{drop_units} T={temp}: {got} vs {want}"
        );
    }
    let old = Money::from_units(1);
    assert!((0..1000).all(|_| metropolis_step(old, Money::from_units(2), 1.0, &mut rng)));
}

#[test]
fn hot_limit_accepts_everything() {
    let p = metropolis_accept_prob(Money::from_units(10_000), Money::ZERO, 1e12);
    assert!(p > 1.0 - 1e-6);
}

#[test]
fn fig3a_exchange_repairs_the_duplicate() {
    let scn = exemplar_scenario("Low").unwrap();
    let t = fig3a_tree(&scn);
    let a1 = Label::Activity(scn.activity_index(&"A1".into()).unwrap() as u16);
    let a2 = Label::Activity(scn.activity_index(&"A2".into()).unwrap() as u16);
    assert_eq!((t.label(0), t.label(1)), (a2, a1));
    let ex = exchange_at(&t, 0, 1);
    assert!(!ex.rejected);
    assert_eq!(ex.tree.label(0), a1);
    assert_eq!(ex.tree.label(1), a2);
    assert!(!ex.corrected.is_empty());
    for &j in &ex.corrected {
        assert_eq!(t.label(j), a1);
        assert_eq!(ex.tree.label(j), a2);
    }
    ex.tree.check().unwrap();
    // Every path through the root already carries all four activities.
    assert_eq!(replacement_candidates(&t, 0), vec![Label::Na]);
}

#[test]
fn swapping_equal_labels_is_a_no_op() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = random_tree(VerificationState::initial(4), 3, &mut rng);
    for i in 0..t.len() {
        for j in 0..t.len() {
            if t.label(i) == t.label(j) {
                assert_eq!(exchange_at(&t, i, j).tree, t);
            }
        }
    }
}

#[test]
fn single_activity_replacement_only_offers_na() {
    let t = RawTree::new(VerificationState::initial(1), 1, vec![Label::Activity(0)]).unwrap();
    assert_eq!(replacement_candidates(&t, 0), vec![Label::Na]);
    let all_na = RawTree::all_na(VerificationState::initial(3), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let reintroduced = (0..200).any(|_| {
        let next = propose(&all_na, &mut rng, EXCHANGE_PROBABILITY).0;
        next.labels().iter().any(|l| !l.is_na())
    });
    assert!(reintroduced);
}

/// Every tree one move away, with nonzero probability.
fn neighbours(t: &RawTree) -> Vec<RawTree> {
    let mut out = Vec::new();
    for a in 0..t.len() {
        for b in 0..t.len() {
            if a != b && !t.label(a).is_na() && !t.label(b).is_na() {
                out.push(exchange_at(t, a, b).tree);
            }
        }
        for c in replacement_candidates(t, a) {
            let mut labels = t.labels().to_vec();
            labels[a] = c;
            out.push(RawTree::new(*t.origin(), t.depth(), labels).unwrap());
        }
    }
    out
}

#[test]
fn every_valid_depth_two_tree_is_reachable() {
    let origin = VerificationState::initial(3);
    let alphabet = [
        Label::Na,
        Label::Activity(0),
        Label::Activity(1),
        Label::Activity(2),
    ];
    let mut valid = BTreeSet::new();
    for &r in &alphabet {
        for &x in &alphabet {
            for &y in &alphabet {
                if let Ok(t) = RawTree::new(origin, 2, vec![r, x, y]) {
                    valid.insert(t.labels().to_vec());
                }
            }
        }
    }
    // Root activity: children from NA plus the two others, each way.
    assert_eq!(valid.len(), 3 * 3 * 3 + 4 * 4);

    // The replacement move realizes exactly its candidate list.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let probe = RawTree::new(
        origin,
        2,
        vec![Label::Activity(0), Label::Na, Label::Activity(1)],
    )
    .unwrap();
    let drawn: BTreeSet<Label> = (0..200)
        .map(|_| replace_at(&probe, 1, &mut rng).label(1))
        .collect();
    assert_eq!(
        drawn,
        replacement_candidates(&probe, 1).into_iter().collect()
    );

    for start in &valid {
        let start = RawTree::new(origin, 2, start.clone()).unwrap();
        let mut seen = BTreeSet::from([start.labels().to_vec()]);
        let mut queue = VecDeque::from([start]);
        while let Some(t) = queue.pop_front() {
            for n in neighbours(&t) {
                if seen.insert(n.labels().to_vec()) {
                    queue.push_back(n);
                }
            }
        }
        assert_eq!(seen, valid);
    }
}
