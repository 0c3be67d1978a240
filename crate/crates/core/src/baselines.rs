//! Comparison methods. Every method values its strategy with the same tree
//! valuation as the tempering search.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bayesnet::NodeId;
use crate::error::{Error, Result};
use crate::explorer::explore;
use crate::money::Money;
use crate::optimize::{state_seed, McConfig, McOptimizer, PtOptimizer, StateOptimizer};
use crate::pt::PtConfig;
use crate::scenario::{Scenario, VerificationState};
use crate::treespace::{ForesightTree, HindsightTree, Label, RawTree, ValuatorPool};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    /// Hindsight tree with tempering at every state.
    Pta,
    /// Best fixed activity sequence.
    Fp,
    /// Best of independent random trees at the initial state.
    Mc,
    /// Hindsight tree with Monte Carlo at every state.
    Dmc,
    /// Tempering at the initial state only.
    Sfvt,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Pta,
        Method::Fp,
        Method::Mc,
        Method::Dmc,
        Method::Sfvt,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pta => "PTA",
            Method::Fp => "FP",
            Method::Mc => "MC",
            Method::Dmc => "DMC",
            Method::Sfvt => "SFVT",
        })
    }
}

#[derive(Clone, Debug)]
pub enum Strategy {
    Fvt(ForesightTree),
    Hvt(HindsightTree),
    FixedPath {
        activities: Vec<NodeId>,
        fvt: ForesightTree,
    },
}

#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub method: Method,
    pub strategy: Strategy,
    pub expected_value: Money,
    pub wall_time_seconds: f64,
    /// Trees evaluated (per replica for tempering runs).
    pub iterations: u64,
}

/// Number of sequences of at most `depth` distinct activities out of `n`,
/// the empty sequence included.
pub fn fixed_path_count(n: usize, depth: usize) -> u128 {
    let mut total = 1u128;
    let mut perm = 1u128;
    for j in 0..depth.min(n) {
        perm = perm.saturating_mul((n - j) as u128);
        total = total.saturating_add(perm);
    }
    total
}

/// Best fixed sequence from the initial state. Each sequence becomes a tree
/// with one label per level, so the result still branches on outcomes and
/// rework and early deployment apply along every branch.
pub fn fp_enumerate(scenario: &Scenario, budget: u64) -> Result<BaselineResult> {
    let start = Instant::now();
    let origin = scenario.initial_state();
    let depth = RawTree::depth_for(scenario, &origin);
    let free: Vec<u16> = origin.unverified().map(|k| k as u16).collect();
    let count = fixed_path_count(free.len(), depth);
    if count > budget as u128 {
        return Err(Error::Infeasible(format!(
            "fixed-path enumeration needs {count} sequences, budget is {budget}"
        )));
    }
    let mut pool = ValuatorPool::new(scenario);
    let val = pool.first();
    let mut seq: Vec<u16> = Vec::with_capacity(depth);
    let mut best: Option<(Vec<u16>, Money)> = None;
    let mut evaluated = 0u64;

    // Prefix-first depth-first order over sequences.
    fn walk(
        seq: &mut Vec<u16>,
        free: &[u16],
        depth: usize,
        visit: &mut dyn FnMut(&[u16]) -> Result<()>,
    ) -> Result<()> {
        visit(seq)?;
        if seq.len() == depth {
            return Ok(());
        }
        for &k in free {
            if !seq.contains(&k) {
                seq.push(k);
                walk(seq, free, depth, visit)?;
                seq.pop();
            }
        }
        Ok(())
    }
    walk(&mut seq, &free, depth, &mut |s| {
        let v = val.value(&level_tree(origin, depth, s))?;
        evaluated += 1;
        if best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((s.to_vec(), v));
        }
        Ok(())
    })?;
    let (s, value) = best.expect("the empty sequence is always evaluated");
    let fvt = val.evaluate(&level_tree(origin, depth, &s))?;
    Ok(BaselineResult {
        method: Method::Fp,
        strategy: Strategy::FixedPath {
            activities: s
                .iter()
                .map(|&k| scenario.activity_id(k as usize).clone())
                .collect(),
            fvt,
        },
        expected_value: value,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        iterations: evaluated,
    })
}

/// Tree labelled `seq[l]` on every node of level `l`, `NA` below the sequence.
pub fn level_tree(origin: VerificationState, depth: usize, seq: &[u16]) -> RawTree {
    let labels = (0..depth)
        .flat_map(|l| {
            let label = seq.get(l).map_or(Label::Na, |&k| Label::Activity(k));
            std::iter::repeat_n(label, 1 << l)
        })
        .collect();
    RawTree::new_unchecked(origin, depth, labels)
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

fn root_run(
    scenario: &Scenario,
    optimizer: &dyn StateOptimizer,
    seed: u64,
    method: Method,
) -> Result<BaselineResult> {
    let origin = scenario.initial_state();
    let mut pool = ValuatorPool::new(scenario);
    let (out, secs) = timed(|| optimizer.optimize(&origin, state_seed(seed, &origin), &mut pool))?;
    Ok(BaselineResult {
        method,
        expected_value: out.fvt.expected_value,
        strategy: Strategy::Fvt(out.fvt),
        wall_time_seconds: secs,
        iterations: out.iterations,
    })
}

fn hvt_run(
    scenario: &Scenario,
    optimizer: &dyn StateOptimizer,
    seed: u64,
    method: Method,
) -> Result<BaselineResult> {
    let mut pool = ValuatorPool::new(scenario);
    let (out, secs) = timed(|| explore(&scenario.initial_state(), optimizer, seed, &mut pool))?;
    Ok(BaselineResult {
        method,
        expected_value: out.hvt.expected_value(),
        strategy: Strategy::Hvt(out.hvt),
        wall_time_seconds: secs,
        iterations: out.iterations,
    })
}

/// Best of independent uniform random trees at the initial state.
pub fn mc_search(scenario: &Scenario, cfg: &McConfig, seed: u64) -> Result<BaselineResult> {
    let opt = McOptimizer {
        config: cfg.clone(),
    };
    root_run(scenario, &opt, seed, Method::Mc)
}

/// Hindsight tree with Monte Carlo as the per-state optimizer.
pub fn dmc_explore(scenario: &Scenario, cfg: &McConfig, seed: u64) -> Result<BaselineResult> {
    let opt = McOptimizer {
        config: cfg.clone(),
    };
    hvt_run(scenario, &opt, seed, Method::Dmc)
}

/// The tempering tree found at the initial state, used statically. Its seed is
/// the one the hindsight tree uses at the root, so it equals that tree's first
/// foresight tree.
pub fn sfvt(scenario: &Scenario, cfg: &PtConfig, seed: u64) -> Result<BaselineResult> {
    root_run(scenario, &PtOptimizer::new(cfg.clone()), seed, Method::Sfvt)
}

/// Hindsight tree with tempering at every state.
pub fn pta(scenario: &Scenario, cfg: &PtConfig, seed: u64) -> Result<BaselineResult> {
    hvt_run(scenario, &PtOptimizer::new(cfg.clone()), seed, Method::Pta)
}
