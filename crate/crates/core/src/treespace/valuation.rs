//! Raw-tree evaluation.
//!
//! The walk visits outcome branches true-first. A failure whose posterior drops
//! below `H_l(t)` is reworked: the rework cost is paid, the result is flipped and
//! the walk continues into the *true* subtree, so the false subtree is never
//! visited. Paths end on deployment (`P >= H_u`), on `NA`, or at the last level.
//! Branches of probability exactly zero are skipped.
//!
//! The value-only walk and the full tree builder share this code, so both
//! accumulate `sum P_q * U_q` in the same order and agree bit for bit.

use rustc_hash::FxHashMap;

use super::fvt::{Action, ForesightTree, FvtBranch, FvtNode, Path, Step, StopReason};
use super::raw::{Label, RawTree};
use crate::error::{Error, Result};
use crate::money::Money;
use crate::scenario::{Scenario, VerificationState};

#[derive(Clone, Copy, Debug)]
struct Joint {
    /// `P(S)`.
    p: f64,
    /// `P(S, target = true)`.
    pt: f64,
}

impl Joint {
    fn posterior(self) -> f64 {
        (self.pt / self.p).clamp(0.0, 1.0)
    }
}

/// Evaluates raw trees against one scenario, memoizing inference per evidence
/// set. Owned by a single worker.
#[derive(Clone, Debug)]
pub struct Valuator<'s> {
    scenario: &'s Scenario,
    cache: FxHashMap<(u64, u64), Joint>,
}

impl<'s> Valuator<'s> {
    pub fn new(scenario: &'s Scenario) -> Self {
        Valuator {
            scenario,
            cache: FxHashMap::default(),
        }
    }

    pub fn scenario(&self) -> &'s Scenario {
        self.scenario
    }

    /// Number of memoized evidence sets.
    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    fn joint(&mut self, s: &VerificationState) -> Joint {
        let scenario = self.scenario;
        *self.cache.entry(s.evidence_key()).or_insert_with(|| {
            let (p, pt) = scenario.state_joint(s);
            Joint { p, pt }
        })
    }

    /// Probability of the evidence encoded in `s`.
    pub fn state_probability(&mut self, s: &VerificationState) -> f64 {
        self.joint(s).p
    }

    pub fn posterior(&mut self, s: &VerificationState) -> Result<f64> {
        let j = self.joint(s);
        if j.p <= 0.0 {
            return Err(Error::ImpossibleEvidence);
        }
        Ok(j.posterior())
    }

    /// `P(activity k passes | s)`.
    pub fn pass_probability(&mut self, s: &VerificationState, k: usize) -> Result<f64> {
        let p = self.joint(s).p;
        if p <= 0.0 {
            return Err(Error::ImpossibleEvidence);
        }
        let next = s.with_result(k, true);
        Ok(self.joint(&next).p / p)
    }

    /// Expected value of the tree without materializing paths.
    pub fn value(&mut self, tree: &RawTree) -> Result<Money> {
        let mut w = Walker {
            val: self,
            tree,
            sum: 0.0,
            rec: None,
        };
        w.run()?;
        Ok(Money::round_ticks(w.sum))
    }

    /// Prunes and values the tree.
    pub fn evaluate(&mut self, tree: &RawTree) -> Result<ForesightTree> {
        let mut w = Walker {
            val: self,
            tree,
            sum: 0.0,
            rec: Some(Recorder::default()),
        };
        let root = w.run()?.expect("recording walk builds a root");
        let sum = w.sum;
        let paths = w.rec.take().expect("recorder present").paths;
        Ok(ForesightTree {
            origin: *tree.origin(),
            raw: tree.clone(),
            root,
            paths,
            expected_value: Money::round_ticks(sum),
        })
    }
}

/// Per-worker valuators over one scenario, reused across optimizer calls so
/// inference caches survive from state to state.
#[derive(Debug)]
pub struct ValuatorPool<'s> {
    scenario: &'s Scenario,
    valuators: Vec<Valuator<'s>>,
}

impl<'s> ValuatorPool<'s> {
    pub fn new(scenario: &'s Scenario) -> Self {
        ValuatorPool {
            scenario,
            valuators: Vec::new(),
        }
    }

    pub fn scenario(&self) -> &'s Scenario {
        self.scenario
    }

    /// The first `n` valuators, created on demand.
    pub fn take(&mut self, n: usize) -> &mut [Valuator<'s>] {
        while self.valuators.len() < n {
            self.valuators.push(Valuator::new(self.scenario));
        }
        &mut self.valuators[..n]
    }

    pub fn first(&mut self) -> &mut Valuator<'s> {
        &mut self.take(1)[0]
    }
}

#[derive(Default)]
struct Recorder {
    steps: Vec<Step>,
    paths: Vec<Path>,
}

struct Walker<'a, 's> {
    val: &'a mut Valuator<'s>,
    tree: &'a RawTree,
    sum: f64,
    rec: Option<Recorder>,
}

impl Walker<'_, '_> {
    fn run(&mut self) -> Result<Option<FvtNode>> {
        let origin = *self.tree.origin();
        let j = self.val.joint(&origin);
        if j.p <= 0.0 {
            return Err(Error::ImpossibleEvidence);
        }
        let post = j.posterior();
        let scenario = self.val.scenario;
        if post >= scenario.upper_threshold() {
            return Ok(self.leaf(origin, post, 1.0, Money::ZERO, StopReason::Deployed));
        }
        Ok(self.visit(0, origin, j, 1.0, Money::ZERO))
    }

    fn leaf(
        &mut self,
        state: VerificationState,
        posterior: f64,
        prob: f64,
        costs: Money,
        stop: StopReason,
    ) -> Option<FvtNode> {
        let u = self.val.scenario.revenue_for(posterior) - costs;
        self.sum += prob * u.ticks() as f64;
        let rec = self.rec.as_mut()?;
        rec.paths.push(Path {
            steps: rec.steps.clone(),
            probability: prob,
            end_state: state,
            costs,
            terminal_value: u,
            stop,
        });
        Some(FvtNode {
            action: Action::Stop,
            stop: Some(stop),
            state,
            posterior,
            branches: Vec::new(),
        })
    }

    /// Node `i` is reached in `state` (not deployed) with path probability `prob`.
    fn visit(
        &mut self,
        i: usize,
        state: VerificationState,
        j: Joint,
        prob: f64,
        costs: Money,
    ) -> Option<FvtNode> {
        let scenario = self.val.scenario;
        let k = match self.tree.label(i) {
            Label::Na => return self.leaf(state, j.posterior(), prob, costs, StopReason::NaStop),
            Label::Activity(k) => k as usize,
        };
        let t = state.time();
        let costs = costs + scenario.activity_cost(k);
        let pass = state.with_result(k, true);
        let fail = state.with_result(k, false);
        let jp = self.val.joint(&pass);
        let jf = self.val.joint(&fail);
        let post_pass = jp.posterior();

        let mut branches = Vec::new();
        if jp.p > 0.0 {
            let p = jp.p / j.p;
            let child = self.branch(i, 2 * i + 1, pass, jp, prob * p, costs, k, t, true, p, None);
            if let Some(child) = child {
                branches.push(FvtBranch {
                    result: true,
                    probability: p,
                    posterior: post_pass,
                    rework: None,
                    child: Box::new(child),
                });
            }
        }
        if jf.p > 0.0 {
            let p = jf.p / j.p;
            let post_fail = jf.posterior();
            let child = if post_fail < scenario.lower_threshold(t) {
                let rework = scenario.rework_cost_at(k, t);
                // Rework flips the result: same state and continuation as a pass.
                self.branch(
                    i,
                    2 * i + 1,
                    pass,
                    jp,
                    prob * p,
                    costs + rework,
                    k,
                    t,
                    false,
                    p,
                    Some(rework),
                )
                .map(|c| (c, post_pass, Some(rework)))
            } else {
                self.branch(
                    i,
                    2 * i + 2,
                    fail,
                    jf,
                    prob * p,
                    costs,
                    k,
                    t,
                    false,
                    p,
                    None,
                )
                .map(|c| (c, post_fail, None))
            };
            if let Some((child, posterior, rework)) = child {
                branches.push(FvtBranch {
                    result: false,
                    probability: p,
                    posterior,
                    rework,
                    child: Box::new(child),
                });
            }
        }

        self.rec.as_ref()?;
        Some(FvtNode {
            action: Action::Activity(scenario.activity_id(k).clone()),
            stop: None,
            state,
            posterior: j.posterior(),
            branches,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn branch(
        &mut self,
        parent: usize,
        child: usize,
        state: VerificationState,
        j: Joint,
        prob: f64,
        costs: Money,
        k: usize,
        t: usize,
        result: bool,
        step_prob: f64,
        rework: Option<Money>,
    ) -> Option<FvtNode> {
        let post = j.posterior();
        if let Some(rec) = self.rec.as_mut() {
            rec.steps.push(Step {
                activity: self.val.scenario.activity_id(k).clone(),
                t,
                result,
                rework: rework.is_some(),
                rework_cost: rework.unwrap_or(Money::ZERO),
                probability: step_prob,
                posterior_after: post,
            });
        }
        let node = if post >= self.val.scenario.upper_threshold() {
            self.leaf(state, post, prob, costs, StopReason::Deployed)
        } else if self.tree.is_leaf(parent) {
            self.leaf(state, post, prob, costs, StopReason::HorizonEnd)
        } else {
            self.visit(child, state, j, prob, costs)
        };
        if let Some(rec) = self.rec.as_mut() {
            rec.steps.pop();
        }
        node
    }
}
