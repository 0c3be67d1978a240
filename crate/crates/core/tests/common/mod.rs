//! Independent oracles shared by the integration tests. Nothing here calls the
//! crate's inference or valuation code; networks are read as plain data.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;

use verispace_core::bayesnet::{BayesNetwork, BayesNode, Cpt};
use verispace_core::presets::{random_scenario, RandomScenarioSpec};
use verispace_core::treespace::RawTree;
use verispace_core::{Label, Scenario, VerificationState};

/// `P(node = true | parents)` straight from the table definition.
pub fn cpt_true(node: &BayesNode, parents: &[bool]) -> f64 {
    match &node.cpt {
        Cpt::Explicit { rows } => {
            let key: String = parents.iter().map(|&b| if b { '1' } else { '0' }).collect();
            rows[&key]
        }
        Cpt::NoisyOr { leak, weights } => {
            let off: f64 = parents
                .iter()
                .zip(weights)
                .filter(|(on, _)| **on)
                .map(|(_, w)| 1.0 - w)
                .product();
            1.0 - (1.0 - leak) * off
        }
    }
}

/// Full joint distribution by enumeration of every assignment.
pub struct Joint {
    probs: Vec<f64>,
}

impl Joint {
    pub fn new(net: &BayesNetwork) -> Self {
        let nodes = net.nodes();
        assert!(
            nodes.len() <= 20,
            "enumeration oracle is for small networks"
        );
        let parent_idx: Vec<Vec<usize>> = nodes
            .iter()
            .map(|n| n.parents.iter().map(|p| net.index_of(p).unwrap()).collect())
            .collect();
        let probs = (0..1usize << nodes.len())
            .map(|mask| {
                nodes
                    .iter()
                    .enumerate()
                    .map(|(i, node)| {
                        let pv: Vec<bool> =
                            parent_idx[i].iter().map(|&j| mask >> j & 1 == 1).collect();
                        let p = cpt_true(node, &pv);
                        if mask >> i & 1 == 1 {
                            p
                        } else {
                            1.0 - p
                        }
                    })
                    .product()
            })
            .collect();
        Joint { probs }
    }

    /// Probability of the evidence `(node index, value)`.
    pub fn prob(&self, evidence: &[(usize, bool)]) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(mask, _)| evidence.iter().all(|&(i, v)| (mask >> i & 1 == 1) == v))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn posterior(&self, evidence: &[(usize, bool)], query: usize) -> f64 {
        let mut with = evidence.to_vec();
        with.push((query, true));
        self.prob(&with) / self.prob(evidence)
    }
}

/// Scenario-level oracle: posteriors and outcome probabilities by enumeration,
/// memoized per state.
pub struct Oracle<'a> {
    pub scenario: &'a Scenario,
    joint: Joint,
    target: usize,
    activities: Vec<usize>,
    memo: HashMap<(u64, u64), f64>,
}

impl<'a> Oracle<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let net = scenario.network();
        Oracle {
            scenario,
            joint: Joint::new(net),
            target: net.index_of(scenario.target()).unwrap(),
            activities: (0..scenario.n_activities())
                .map(|k| net.index_of(scenario.activity_id(k)).unwrap())
                .collect(),
            memo: HashMap::new(),
        }
    }

    fn evidence(&self, s: &VerificationState) -> Vec<(usize, bool)> {
        (0..s.width())
            .filter(|&k| s.result(k) != 0)
            .map(|k| (self.activities[k], s.result(k) > 0))
            .collect()
    }

    /// Probability of the evidence in `s`.
    pub fn evidence_prob(&mut self, s: &VerificationState) -> f64 {
        let key = s.evidence_key();
        if let Some(&p) = self.memo.get(&key) {
            return p;
        }
        let p = self.joint.prob(&self.evidence(s));
        self.memo.insert(key, p);
        p
    }

    pub fn posterior(&mut self, s: &VerificationState) -> f64 {
        let mut e = self.evidence(s);
        e.push((self.target, true));
        self.joint.prob(&e) / self.evidence_prob(s)
    }

    pub fn pass_prob(&mut self, s: &VerificationState, k: usize) -> f64 {
        self.evidence_prob(&s.with_result(k, true)) / self.evidence_prob(s)
    }

    /// Revenue in ticks for a final posterior.
    pub fn revenue(&self, post: f64) -> f64 {
        if post > self.scenario.upper_threshold() {
            self.scenario.revenue().ticks() as f64 * post
        } else {
            0.0
        }
    }
}

/// One outcome path of the enumeration oracle.
#[derive(Clone, Debug)]
pub struct OraclePath {
    pub probability: f64,
    pub value_ticks: f64,
    pub end: VerificationState,
}

/// Enumerates every outcome path of a raw tree, pass branch first, applying
/// the rework and deployment rules directly.
pub fn outcome_paths(o: &mut Oracle<'_>, tree: &RawTree) -> Vec<OraclePath> {
    let origin = *tree.origin();
    let mut out = Vec::new();
    let post = o.posterior(&origin);
    if post >= o.scenario.upper_threshold() {
        out.push(OraclePath {
            probability: 1.0,
            value_ticks: o.revenue(post),
            end: origin,
        });
        return out;
    }
    descend(o, tree, 0, origin, 1.0, 0.0, &mut out);
    out
}

fn descend(
    o: &mut Oracle<'_>,
    tree: &RawTree,
    i: usize,
    s: VerificationState,
    prob: f64,
    paid: f64,
    out: &mut Vec<OraclePath>,
) {
    let Some(k) = tree.label(i).activity() else {
        let post = o.posterior(&s);
        out.push(OraclePath {
            probability: prob,
            value_ticks: o.revenue(post) - paid,
            end: s,
        });
        return;
    };
    let scn = o.scenario;
    let t = s.time();
    let paid = paid + scn.activity_cost(k).ticks() as f64;
    let p = o.pass_prob(&s, k);
    let pass = s.with_result(k, true);
    let fail = s.with_result(k, false);
    let leaf = 2 * i + 1 >= tree.len();
    let mut branch =
        |o: &mut Oracle<'_>, next: VerificationState, child: usize, q: f64, paid: f64| {
            if q == 0.0 {
                return;
            }
            let post = o.posterior(&next);
            if post >= scn.upper_threshold() || leaf {
                out.push(OraclePath {
                    probability: prob * q,
                    value_ticks: o.revenue(post) - paid,
                    end: next,
                });
            } else {
                descend(o, tree, child, next, prob * q, paid, out);
            }
        };
    branch(o, pass, 2 * i + 1, p, paid);
    if o.posterior(&fail) < scn.lower_threshold(t) {
        let rework = scn.rework_cost_at(k, t).ticks() as f64;
        branch(o, pass, 2 * i + 1, 1.0 - p, paid + rework);
    } else {
        branch(o, fail, 2 * i + 2, 1.0 - p, paid);
    }
}

/// Path values are money, so each is rounded to whole ticks before weighting.
pub fn oracle_value_ticks(paths: &[OraclePath]) -> f64 {
    paths
        .iter()
        .map(|p| p.probability * p.value_ticks.round())
        .sum()
}

/// Optimal value and, per action (`None` = stop), its value.
type Solved = (f64, Vec<(Option<usize>, f64)>);

/// Backward induction over the full state space. Terminal revenue is rounded
/// to ticks like every money amount.
pub struct Backward<'a, 'b> {
    pub oracle: &'b mut Oracle<'a>,
    memo: HashMap<VerificationState, Solved>,
}

impl<'a, 'b> Backward<'a, 'b> {
    pub fn new(oracle: &'b mut Oracle<'a>) -> Self {
        Backward {
            oracle,
            memo: HashMap::new(),
        }
    }

    /// `V*(s)` in ticks.
    pub fn value(&mut self, s: &VerificationState) -> f64 {
        self.solve(s).0
    }

    /// Action values at `s`: stop plus each unverified activity.
    pub fn q_values(&mut self, s: &VerificationState) -> Vec<(Option<usize>, f64)> {
        self.solve(s).1
    }

    fn solve(&mut self, s: &VerificationState) -> (f64, Vec<(Option<usize>, f64)>) {
        if let Some(v) = self.memo.get(s) {
            return v.clone();
        }
        let scn = self.oracle.scenario;
        let post = self.oracle.posterior(s);
        let stop = self.oracle.revenue(post).round();
        let result = if post >= scn.upper_threshold() || s.time() >= scn.horizon() {
            (stop, vec![])
        } else {
            let mut q = vec![(None, stop)];
            let t = s.time();
            for k in s.unverified().collect::<Vec<_>>() {
                let p = self.oracle.pass_prob(s, k);
                let pass = s.with_result(k, true);
                let fail = s.with_result(k, false);
                let mut v = -(scn.activity_cost(k).ticks() as f64);
                if p > 0.0 {
                    v += p * self.value(&pass);
                }
                if p < 1.0 {
                    let cont = if self.oracle.posterior(&fail) < scn.lower_threshold(t) {
                        self.value(&pass) - scn.rework_cost_at(k, t).ticks() as f64
                    } else {
                        self.value(&fail)
                    };
                    v += (1.0 - p) * cont;
                }
                q.push((Some(k), v));
            }
            let best = q.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            (best, q)
        };
        self.memo.insert(*s, result.clone());
        result
    }
}

/// Samples one outcome path by drawing each result from its conditional
/// probability; returns the realized value in ticks.
pub fn rollout<R: Rng>(o: &mut Oracle<'_>, tree: &RawTree, rng: &mut R) -> f64 {
    let scn = o.scenario;
    let mut s = *tree.origin();
    let mut paid = 0.0;
    let mut i = 0;
    let post = o.posterior(&s);
    if post >= scn.upper_threshold() {
        return o.revenue(post);
    }
    loop {
        let Some(k) = tree.label(i).activity() else {
            let post = o.posterior(&s);
            return o.revenue(post) - paid;
        };
        let t = s.time();
        paid += scn.activity_cost(k).ticks() as f64;
        let passed = rng.random::<f64>() < o.pass_prob(&s, k);
        let child;
        if passed {
            s = s.with_result(k, true);
            child = 2 * i + 1;
        } else {
            let fail = s.with_result(k, false);
            if o.posterior(&fail) < scn.lower_threshold(t) {
                paid += scn.rework_cost_at(k, t).ticks() as f64;
                s = s.with_result(k, true);
                child = 2 * i + 1;
            } else {
                s = fail;
                child = 2 * i + 2;
            }
        }
        let post = o.posterior(&s);
        if post >= scn.upper_threshold() || child >= tree.len() {
            return o.revenue(post) - paid;
        }
        i = child;
    }
}

/// Tiny seeded scenarios for exhaustive comparisons.
pub fn tiny_scenario(seed: u64, activities: usize, horizon: usize) -> Scenario {
    random_scenario(
        &RandomScenarioSpec {
            activities,
            horizon,
            ..Default::default()
        },
        seed,
    )
    .unwrap()
}

/// Depth-`d` tree over `origin` with every label drawn from `labels`, used when
/// a test needs a hand-built tree.
pub fn tree_from(origin: VerificationState, labels: &[Label]) -> RawTree {
    let depth = (labels.len() + 1).trailing_zeros() as usize;
    RawTree::new(origin, depth, labels.to_vec()).unwrap()
}
