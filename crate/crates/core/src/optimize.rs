//! Per-state optimizers: given an origin state, find a good foresight tree.

use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Money;
use crate::pt::{self, build_ladder, stream_rng, trivial_fvt, PtConfig};
use crate::sampler::random_tree;
use crate::scenario::VerificationState;
use crate::treespace::{ForesightTree, Label, RawTree, ValuatorPool};

/// Best tree found plus the number of trees evaluated (per replica for PT).
#[derive(Clone, Debug)]
pub struct Optimized {
    pub fvt: ForesightTree,
    pub iterations: u64,
}

pub trait StateOptimizer: Send + Sync {
    fn name(&self) -> &'static str;

    /// Deterministic in `(origin, seed)`.
    fn optimize(
        &self,
        origin: &VerificationState,
        seed: u64,
        pool: &mut ValuatorPool<'_>,
    ) -> Result<Optimized>;
}

/// Seed for the optimizer run at `state`, derived from a base seed so that every
/// state of a hindsight tree gets an independent, reproducible stream.
pub fn state_seed(base: u64, state: &VerificationState) -> u64 {
    let (verified, positive) = state.evidence_key();
    let shape = (state.time() as u64) << 32 | state.width() as u64;
    [verified, positive, shape]
        .into_iter()
        .fold(splitmix64(base), |h, w| splitmix64(h ^ w))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Parallel tempering; the run seed replaces `config.seed`.
#[derive(Clone, Debug, Default)]
pub struct PtOptimizer {
    pub config: PtConfig,
    pub cancel: Option<Arc<AtomicBool>>,
}

impl PtOptimizer {
    pub fn new(config: PtConfig) -> Self {
        PtOptimizer {
            config,
            cancel: None,
        }
    }

    pub fn run(
        &self,
        origin: &VerificationState,
        seed: u64,
        pool: &mut ValuatorPool<'_>,
    ) -> Result<pt::PtOutcome> {
        let cfg = PtConfig {
            seed,
            ..self.config.clone()
        };
        let m = build_ladder(&cfg)?.temperatures.len();
        pt::run(origin, &cfg, pool.take(m), self.cancel.as_deref())
    }
}

impl StateOptimizer for PtOptimizer {
    fn name(&self) -> &'static str {
        "pt"
    }

    fn optimize(
        &self,
        origin: &VerificationState,
        seed: u64,
        pool: &mut ValuatorPool<'_>,
    ) -> Result<Optimized> {
        let out = self.run(origin, seed, pool)?;
        Ok(Optimized {
            fvt: out.fvt,
            iterations: out.iterations as u64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    /// Stop after this many samples without strict improvement.
    pub convergence_length: usize,
    pub max_samples: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            convergence_length: 1000,
            max_samples: 1_000_000,
        }
    }
}

/// Independent uniform random trees; keeps the best.
#[derive(Clone, Debug, Default)]
pub struct McOptimizer {
    pub config: McConfig,
}

impl StateOptimizer for McOptimizer {
    fn name(&self) -> &'static str {
        "mc"
    }

    fn optimize(
        &self,
        origin: &VerificationState,
        seed: u64,
        pool: &mut ValuatorPool<'_>,
    ) -> Result<Optimized> {
        if self.config.convergence_length == 0 || self.config.max_samples == 0 {
            return Err(Error::InvalidConfig(
                "Monte Carlo lengths must be at least 1".into(),
            ));
        }
        let val = pool.first();
        if let Some(fvt) = trivial_fvt(origin, val)? {
            return Ok(Optimized { fvt, iterations: 0 });
        }
        let depth = RawTree::depth_for(val.scenario(), origin);
        let mut rng = stream_rng(seed, 0);
        let mut best: Option<(RawTree, Money)> = None;
        let mut stall = 0;
        let mut samples = 0;
        while stall < self.config.convergence_length && samples < self.config.max_samples {
            let tree = random_tree(*origin, depth, &mut rng);
            let v = val.value(&tree)?;
            samples += 1;
            if best.as_ref().is_none_or(|b| v > b.1) {
                best = Some((tree, v));
                stall = 0;
            } else {
                stall += 1;
            }
        }
        let (tree, _) = best.expect("at least one sample");
        Ok(Optimized {
            fvt: val.evaluate(&tree)?,
            iterations: samples as u64,
        })
    }
}

/// Evaluates every effective tree: labels below an `NA` are fixed to `NA`, so
/// each tree is one distinct strategy. Ties keep the first tree in enumeration
/// order (`NA` first, then activities in scope order, true subtree outermost).
#[derive(Clone, Debug)]
pub struct ExhaustiveOptimizer {
    /// Largest number of trees to evaluate per state.
    pub budget: u64,
}

impl Default for ExhaustiveOptimizer {
    fn default() -> Self {
        ExhaustiveOptimizer { budget: 5_000_000 }
    }
}

/// Number of effective trees of `depth` over `k` activities:
/// `f(d, k) = 1 + k * f(d - 1, k - 1)^2`, `f(0, k) = 1`.
pub fn effective_tree_count(depth: usize, k: usize) -> u128 {
    if depth == 0 {
        return 1;
    }
    let sub = effective_tree_count(depth - 1, k.saturating_sub(1));
    sub.saturating_mul(sub)
        .saturating_mul(k as u128)
        .saturating_add(1)
}

/// All effective subtrees of `depth` over `avail`, in heap layout.
fn subtrees(depth: usize, avail: u64) -> Vec<Vec<Label>> {
    let size = (1usize << depth) - 1;
    let mut out = vec![vec![Label::Na; size]];
    if depth == 0 {
        return out;
    }
    for k in (0..64).filter(|k| avail >> k & 1 == 1) {
        let children = subtrees(depth - 1, avail & !(1 << k));
        for left in &children {
            for right in &children {
                out.push(join(Label::Activity(k as u16), left, right, depth));
            }
        }
    }
    out
}

/// Root `label` over `left` and `right` subtrees of `depth - 1`.
fn join(label: Label, left: &[Label], right: &[Label], depth: usize) -> Vec<Label> {
    let mut v = Vec::with_capacity((1 << depth) - 1);
    v.push(label);
    for level in 0..depth - 1 {
        let range = (1 << level) - 1..(1 << (level + 1)) - 1;
        v.extend_from_slice(&left[range.clone()]);
        v.extend_from_slice(&right[range]);
    }
    v
}

impl StateOptimizer for ExhaustiveOptimizer {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn optimize(
        &self,
        origin: &VerificationState,
        _seed: u64,
        pool: &mut ValuatorPool<'_>,
    ) -> Result<Optimized> {
        let val = pool.first();
        if let Some(fvt) = trivial_fvt(origin, val)? {
            return Ok(Optimized { fvt, iterations: 0 });
        }
        let depth = RawTree::depth_for(val.scenario(), origin);
        let avail = origin.unverified_mask();
        let count = effective_tree_count(depth, avail.count_ones() as usize);
        if count > self.budget as u128 {
            return Err(Error::Infeasible(format!(
                "{count} trees exceed the enumeration budget of {}",
                self.budget
            )));
        }
        let mut best = RawTree::all_na(*origin, depth);
        let mut best_value = val.value(&best)?;
        let mut evaluated = 1u64;
        for k in (0..64).filter(|k| avail >> k & 1 == 1) {
            let children = subtrees(depth - 1, avail & !(1 << k));
            for left in &children {
                for right in &children {
                    let labels = join(Label::Activity(k as u16), left, right, depth);
                    let tree = RawTree::new_unchecked(*origin, depth, labels);
                    let v = val.value(&tree)?;
                    evaluated += 1;
                    if v > best_value {
                        best_value = v;
                        best = tree;
                    }
                }
            }
        }
        debug_assert_eq!(evaluated as u128, count);
        Ok(Optimized {
            fvt: val.evaluate(&best)?,
            iterations: evaluated,
        })
    }
}
