mod common;

use common::{oracle_value_ticks, outcome_paths, tiny_scenario, Backward, Oracle};
use verispace_core::baselines::{self, fp_enumerate, mc_search, Strategy};
use verispace_core::explorer::{build_hvt, value_plot_data};
use verispace_core::optimize::{state_seed, StateOptimizer};
use verispace_core::presets::exemplar_scenario;
use verispace_core::pt::PtConfig;
use verispace_core::treespace::{Action, ValuatorPool};
use verispace_core::{
    ExhaustiveOptimizer, HindsightTree, Label, McConfig, McOptimizer, Money, RawTree, Scenario,
    StopReason, VerificationState,
};

/// One tick is the money resolution; optimizer ties are only defined up to it.
const TICK: f64 = 1.0;

/// Returns the number of optimized states and of rework arcs checked.
fn check_hvt_against_backward_induction(scn: &Scenario, hvt: &HindsightTree) -> (usize, usize) {
    let mut oracle = Oracle::new(scn);
    let mut dp = Backward::new(&mut oracle);
    let values = hvt.state_values().unwrap();
    let (mut optimized, mut reworks) = (0, 0);
    for (s, node) in hvt.nodes() {
        let v_star = dp.value(s);
        let v = values[s];
        assert!(
            (v - v_star).abs() <= TICK,
            "state {s}: hvt {v} vs oracle {v_star}"
        );
        match node.stop {
            Some(StopReason::Deployed | StopReason::HorizonEnd) => {
                assert!(node.branches.is_empty());
                assert!(node.fvt_value.is_none(), "terminal {s} was optimized");
            }
            Some(StopReason::NaStop | StopReason::Unrecoverable) => {
                let stop_q = dp.q_values(s)[0].1;
                assert!(stop_q >= v_star - TICK, "stopping at {s} is not optimal");
            }
            None => {
                let k = match &node.action {
                    Action::Activity(id) => scn.activity_index(id).unwrap(),
                    Action::Stop => panic!("non-terminal state {s} without activity"),
                };
                let q = dp.q_values(s);
                let qk = q.iter().find(|x| x.0 == Some(k)).unwrap().1;
                assert!(qk >= v_star - TICK, "action at {s} is not optimal");
                let fvt = node.fvt_value.unwrap().ticks() as f64;
                assert!((fvt - v_star).abs() <= TICK, "fvt value at {s}");
                check_children(scn, dp.oracle, s, k, &node.branches);
                optimized += 1;
                reworks += node.branches.iter().filter(|b| b.rework.is_some()).count();
            }
        }
    }
    let root = dp.value(hvt.root());
    assert!((hvt.expected_value().ticks() as f64 - root).abs() <= TICK);
    (optimized, reworks)
}

fn check_children(
    scn: &Scenario,
    oracle: &mut Oracle<'_>,
    s: &VerificationState,
    k: usize,
    branches: &[verispace_core::treespace::HvtBranch],
) {
    let p = oracle.pass_prob(s, k);
    let pass = s.with_result(k, true);
    let fail = s.with_result(k, false);
    let reworked = oracle.posterior(&fail) < scn.lower_threshold(s.time());
    let mut total = 0.0;
    for b in branches {
        total += b.probability;
        if b.result {
            assert_eq!(b.child, pass);
            assert!(b.rework.is_none());
            assert!((b.probability - p).abs() < 1e-12);
        } else if reworked {
            assert_eq!(
                b.child, pass,
                "reworked failure must merge into the pass state"
            );
            assert_eq!(b.rework, Some(scn.rework_cost_at(k, s.time())));
        } else {
            assert_eq!(b.child, fail);
            assert!(b.rework.is_none());
        }
    }
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn exhaustive_hvt_equals_backward_induction() {
    let opt = ExhaustiveOptimizer::default();
    let (mut optimized, mut reworks) = (0, 0);
    for seed in 0..20 {
        let scn = tiny_scenario(seed, 3 + seed as usize % 3, 2 + seed as usize % 2);
        let hvt = build_hvt(&scn, &opt, seed).unwrap();
        let (o, r) = check_hvt_against_backward_induction(&scn, &hvt);
        optimized += o;
        reworks += r;
    }
    for rule in ["Low", "Low-high", "High-low", "High"] {
        let scn = exemplar_scenario(rule).unwrap();
        let hvt = build_hvt(&scn, &opt, 1).unwrap();
        let (o, r) = check_hvt_against_backward_induction(&scn, &hvt);
        optimized += o;
        reworks += r;
    }
    println!("{optimized} optimized states, {reworks} rework arcs");
    assert!(
        optimized >= 40 && reworks >= 5,
        "{optimized} states, {reworks} reworks"
    );
}

#[test]
fn dmc_hvt_equals_backward_induction_on_three_activities() {
    let opt = McOptimizer::default();
    for seed in 0..10 {
        let scn = tiny_scenario(200 + seed, 3, 3);
        let hvt = build_hvt(&scn, &opt, seed).unwrap();
        check_hvt_against_backward_induction(&scn, &hvt);
    }
}

#[test]
fn monte_carlo_reaches_optimum_on_three_activities() {
    let cfg = McConfig {
        convergence_length: 10_000,
        max_samples: 10_000,
    };
    for seed in 0..10 {
        let scn = tiny_scenario(300 + seed, 3, 3);
        let mut oracle = Oracle::new(&scn);
        let best = Backward::new(&mut oracle).value(&scn.initial_state());
        let mc = mc_search(&scn, &cfg, seed).unwrap();
        assert!(
            (mc.expected_value.ticks() as f64 - best).abs() <= TICK,
            "seed {seed}"
        );
    }
}

/// Best fixed sequence by brute force, each sequence laid out one label per
/// level and valued by the enumeration oracle.
fn fixed_path_oracle(scn: &Scenario) -> Money {
    let origin = scn.initial_state();
    let depth = scn.horizon();
    let n = scn.n_activities();
    let mut oracle = Oracle::new(scn);
    let mut best = f64::NEG_INFINITY;
    let mut stack: Vec<Vec<usize>> = vec![vec![]];
    while let Some(seq) = stack.pop() {
        let labels: Vec<Label> = (0..depth)
            .flat_map(|l| {
                let lab = seq.get(l).map_or(Label::Na, |&k| Label::Activity(k as u16));
                std::iter::repeat_n(lab, 1 << l)
            })
            .collect();
        let tree = RawTree::new(origin, depth, labels).unwrap();
        let v = oracle_value_ticks(&outcome_paths(&mut oracle, &tree));
        best = best.max(Money::round_ticks(v).ticks() as f64);
        if seq.len() < depth {
            for k in (0..n).filter(|k| !seq.contains(k)) {
                let mut next = seq.clone();
                next.push(k);
                stack.push(next);
            }
        }
    }
    Money::from_ticks(best as i64)
}

#[test]
fn fixed_path_matches_brute_force_and_never_beats_dynamic() {
    for seed in 0..12 {
        let scn = tiny_scenario(400 + seed, 3 + seed as usize % 3, 3);
        let fp = fp_enumerate(&scn, 1_000_000).unwrap();
        assert_eq!(fp.expected_value, fixed_path_oracle(&scn), "seed {seed}");
        let mut oracle = Oracle::new(&scn);
        let best = Backward::new(&mut oracle).value(&scn.initial_state());
        assert!(fp.expected_value.ticks() as f64 <= best + TICK);
    }
    let scn = exemplar_scenario("Low").unwrap();
    assert_eq!(
        fp_enumerate(&scn, 1_000_000).unwrap().expected_value,
        fixed_path_oracle(&scn)
    );
}

#[test]
fn fixed_path_budget_is_reported_as_infeasible() {
    let scn = tiny_scenario(1, 5, 3);
    let err = fp_enumerate(&scn, 10).unwrap_err();
    assert!(matches!(err, verispace_core::Error::Infeasible(_)), "{err}");
}

#[test]
fn static_tree_is_the_first_tempering_tree_and_never_beats_the_hvt() {
    let cfg = PtConfig {
        convergence_length: 200,
        ..PtConfig::default()
    };
    for seed in 0..4 {
        let scn = tiny_scenario(500 + seed, 4, 3);
        let static_tree = baselines::sfvt(&scn, &cfg, seed).unwrap();
        let dynamic = baselines::pta(&scn, &cfg, seed).unwrap();
        let Strategy::Hvt(hvt) = &dynamic.strategy else {
            panic!("PTA returns a hindsight tree")
        };
        assert_eq!(hvt.root_node().fvt_value, Some(static_tree.expected_value));
        let exhaustive = build_hvt(&scn, &ExhaustiveOptimizer::default(), seed).unwrap();
        assert!(static_tree.expected_value <= exhaustive.expected_value());
    }
}

#[test]
fn value_plot_mean_is_the_expected_value_at_every_boundary() {
    let opt = ExhaustiveOptimizer::default();
    let mut cases: Vec<Scenario> = (0..6).map(|s| tiny_scenario(600 + s, 4, 3)).collect();
    cases.push(exemplar_scenario("Low").unwrap());
    cases.push(exemplar_scenario("High-low").unwrap());
    for scn in &cases {
        let hvt = build_hvt(scn, &opt, 9).unwrap();
        let plot = value_plot_data(&hvt, scn).unwrap();
        let total: f64 = plot.paths.iter().map(|p| p.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let root_v = hvt.state_values().unwrap()[hvt.root()] / 1000.0;
        for (i, m) in plot.mean_series().into_iter().enumerate() {
            assert!(
                (m - root_v).abs() <= 1e-9 * root_v.abs().max(1.0),
                "t index {i}: {m} vs {root_v}"
            );
        }
        for p in &plot.paths {
            assert!(p.values.iter().skip(1).all(|v| v.is_finite()));
            assert_eq!(p.values[0], plot.paths[0].values[0]);
        }
    }
}

#[test]
fn per_state_seeds_make_hvts_reproducible() {
    let scn = tiny_scenario(7, 4, 3);
    let opt = McOptimizer::default();
    let a = build_hvt(&scn, &opt, 11).unwrap();
    let b = build_hvt(&scn, &opt, 11).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let origin = scn.initial_state();
    let mut pool = ValuatorPool::new(&scn);
    let direct = opt
        .optimize(&origin, state_seed(11, &origin), &mut pool)
        .unwrap();
    assert_eq!(a.root_node().fvt_value, Some(direct.fvt.expected_value));
}
