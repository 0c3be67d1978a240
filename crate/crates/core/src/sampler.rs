//! Proposal moves over raw trees.
//!
//! Positions are drawn level-uniformly and then node-uniformly within the level,
//! which gives node `i` at level `l` the weight `1 / (2^l * d)`. Exchange swaps
//! the labels of two activity nodes and repairs any resulting duplicate on a
//! root-to-leaf path; replacement relabels one node with an activity that does
//! not appear on any path through it, or with `NA`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::VerificationState;
use crate::treespace::{level_of, Label, RawTree};

/// Probability that [`propose`] attempts an exchange.
pub const EXCHANGE_PROBABILITY: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveKind {
    Exchange,
    Replacement,
}

/// Sampling weight of every position of a tree.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeWeightTable {
    pub weights: Vec<f64>,
}

pub fn node_weights(rvt: &RawTree) -> NodeWeightTable {
    let d = rvt.depth() as f64;
    let weights = (0..rvt.len())
        .map(|i| 1.0 / ((1u64 << level_of(i)) as f64 * d))
        .collect();
    NodeWeightTable { weights }
}

/// Draws a position with the node weights.
pub fn sample_position<R: Rng + ?Sized>(depth: usize, rng: &mut R) -> usize {
    let level = rng.random_range(0..depth);
    (1 << level) - 1 + rng.random_range(0..1usize << level)
}

/// Result of an exchange with explicit endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Exchange {
    pub tree: RawTree,
    /// Positions relabelled by the correction, in order.
    pub corrected: Vec<usize>,
    /// True when the correction hit a conflict between two protected positions
    /// and the original tree was kept.
    pub rejected: bool,
}

/// Swaps the labels at `a` and `b`, then repairs duplicates.
///
/// Repair: while some root-to-leaf path holds a swapped label twice, the
/// occurrence outside the protected set (initially `{a, b}`) is relabelled with
/// the other swapped label and becomes protected. When neither occurrence is
/// protected the deeper one is relabelled. When both are, the move is rejected.
pub fn exchange_at(rvt: &RawTree, a: usize, b: usize) -> Exchange {
    let (la, lb) = (rvt.label(a), rvt.label(b));
    let unchanged = || Exchange {
        tree: rvt.clone(),
        corrected: Vec::new(),
        rejected: false,
    };
    if la == lb {
        return unchanged();
    }
    let mut tree = rvt.clone();
    tree.swap(a, b);
    let pair = [la, lb];
    let mut protected = vec![a, b];
    let mut corrected = Vec::new();
    // Every pass protects one more position, so this bound is never reached.
    for _ in 0..=tree.len() {
        let Some((shallow, deep, label)) = find_conflict(&tree, pair) else {
            return Exchange {
                tree,
                corrected,
                rejected: false,
            };
        };
        let target = match (protected.contains(&shallow), protected.contains(&deep)) {
            (true, true) => break,
            (true, false) | (false, false) => deep,
            (false, true) => shallow,
        };
        let other = if label == pair[0] { pair[1] } else { pair[0] };
        tree.set(target, other);
        protected.push(target);
        corrected.push(target);
    }
    Exchange {
        rejected: true,
        ..unchanged()
    }
}

/// First path (left to right) holding a label of `pair` twice.
fn find_conflict(tree: &RawTree, pair: [Label; 2]) -> Option<(usize, usize, Label)> {
    for leaf in tree.leaves() {
        for &label in &pair {
            if label.is_na() {
                continue;
            }
            let mut hits = tree.path_to_root(leaf).filter(|&j| tree.label(j) == label);
            if let (Some(deep), Some(shallow)) = (hits.next(), hits.next()) {
                return Some((shallow, deep, label));
            }
        }
    }
    None
}

fn activity_count(rvt: &RawTree) -> usize {
    rvt.labels().iter().filter(|l| !l.is_na()).count()
}

/// Exchange with weighted endpoints. Endpoints are redrawn until both hold
/// activities and differ; trees with fewer than two activity nodes are
/// returned unchanged.
pub fn exchange_move<R: Rng + ?Sized>(rvt: &RawTree, rng: &mut R) -> RawTree {
    if activity_count(rvt) < 2 {
        return rvt.clone();
    }
    let draw = |rng: &mut R, avoid: Option<usize>| loop {
        let i = sample_position(rvt.depth(), rng);
        if !rvt.label(i).is_na() && Some(i) != avoid {
            return i;
        }
    };
    let a = draw(rng, None);
    let b = draw(rng, Some(a));
    exchange_at(rvt, a, b).tree
}

/// Labels allowed at position `i`: unverified activities absent from every
/// root-to-leaf path through `i`, then `NA`.
pub fn replacement_candidates(rvt: &RawTree, i: usize) -> Vec<Label> {
    let mut used = 0u64;
    for j in rvt.path_to_root(i) {
        used |= rvt.label(j).bit();
    }
    let mut level = vec![i];
    while !level.is_empty() {
        let mut next = Vec::with_capacity(level.len() * 2);
        for &j in &level {
            used |= rvt.label(j).bit();
            if !rvt.is_leaf(j) {
                next.extend([2 * j + 1, 2 * j + 2]);
            }
        }
        level = next;
    }
    let free = rvt.universe() & !used;
    let mut out: Vec<Label> = (0..64)
        .filter(|k| free >> k & 1 == 1)
        .map(|k| Label::Activity(k as u16))
        .collect();
    out.push(Label::Na);
    out
}

pub fn replace_at<R: Rng + ?Sized>(rvt: &RawTree, i: usize, rng: &mut R) -> RawTree {
    let candidates = replacement_candidates(rvt, i);
    let mut tree = rvt.clone();
    tree.set(i, candidates[rng.random_range(0..candidates.len())]);
    tree
}

/// Replacement at a weighted position.
pub fn replacement_move<R: Rng + ?Sized>(rvt: &RawTree, rng: &mut R) -> RawTree {
    let i = sample_position(rvt.depth(), rng);
    replace_at(rvt, i, rng)
}

/// Exchange with probability `exchange_prob`, otherwise replacement.
pub fn propose<R: Rng + ?Sized>(
    rvt: &RawTree,
    rng: &mut R,
    exchange_prob: f64,
) -> (RawTree, MoveKind) {
    if rng.random_bool(exchange_prob) {
        (exchange_move(rvt, rng), MoveKind::Exchange)
    } else {
        (replacement_move(rvt, rng), MoveKind::Replacement)
    }
}

/// Uniform constructive sampling: each node, in level order, draws uniformly
/// from `NA` and the unverified activities not used by its ancestors.
pub fn random_tree<R: Rng + ?Sized>(
    origin: VerificationState,
    depth: usize,
    rng: &mut R,
) -> RawTree {
    let universe = origin.unverified_mask();
    let mut tree = RawTree::all_na(origin, depth);
    let mut above = vec![0u64; tree.len()];
    for i in 0..tree.len() {
        let free = universe & !above[i];
        let n = free.count_ones() as usize;
        let pick = rng.random_range(0..=n);
        let label = if pick == n {
            Label::Na
        } else {
            let k = nth_set_bit(free, pick);
            Label::Activity(k as u16)
        };
        tree.set(i, label);
        if !tree.is_leaf(i) {
            let mask = above[i] | label.bit();
            above[2 * i + 1] = mask;
            above[2 * i + 2] = mask;
        }
    }
    tree
}

fn nth_set_bit(mut mask: u64, n: usize) -> usize {
    for _ in 0..n {
        mask &= mask - 1;
    }
    mask.trailing_zeros() as usize
}
