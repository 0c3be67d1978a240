use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Scenario, VerificationState};

/// Label of a raw-tree node: an activity (index into the activity scope) or
/// the `NA` sentinel that ends the process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Na,
    Activity(u16),
}

impl Label {
    pub fn activity(self) -> Option<usize> {
        match self {
            Label::Na => None,
            Label::Activity(k) => Some(k as usize),
        }
    }

    pub fn is_na(self) -> bool {
        self == Label::Na
    }

    /// Single-bit mask of the activity, zero for `NA`.
    pub(crate) fn bit(self) -> u64 {
        match self {
            Label::Na => 0,
            Label::Activity(k) => 1 << k,
        }
    }
}

/// Complete binary decision tree over the remaining `depth = T - t` intervals.
///
/// Nodes are stored in heap order: the children of node `i` are `2i + 1` (the
/// activity passed) and `2i + 2` (it failed). Level `l` holds nodes
/// `2^l - 1 .. 2^(l+1) - 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawTree {
    origin: VerificationState,
    depth: usize,
    labels: Vec<Label>,
}

pub(crate) fn level_of(i: usize) -> usize {
    (usize::BITS - 1 - (i + 1).leading_zeros()) as usize
}

impl RawTree {
    /// Validates labels against the activities still unverified at `origin`.
    pub fn new(origin: VerificationState, depth: usize, labels: Vec<Label>) -> Result<Self> {
        let tree = RawTree {
            origin,
            depth,
            labels,
        };
        tree.check()?;
        Ok(tree)
    }

    pub(crate) fn new_unchecked(
        origin: VerificationState,
        depth: usize,
        labels: Vec<Label>,
    ) -> Self {
        debug_assert_eq!(labels.len(), (1 << depth) - 1);
        RawTree {
            origin,
            depth,
            labels,
        }
    }

    pub fn all_na(origin: VerificationState, depth: usize) -> Self {
        RawTree::new_unchecked(origin, depth, vec![Label::Na; (1 << depth) - 1])
    }

    /// Builds a tree from its levels, root first.
    pub fn from_levels(origin: VerificationState, levels: &[&[Label]]) -> Result<Self> {
        let labels = levels.iter().flat_map(|l| l.iter().copied()).collect();
        RawTree::new(origin, levels.len(), labels)
    }

    /// Tree for `origin` spanning every remaining interval of `scenario`.
    pub fn depth_for(scenario: &Scenario, origin: &VerificationState) -> usize {
        scenario.horizon().saturating_sub(origin.time())
    }

    pub fn origin(&self) -> &VerificationState {
        &self.origin
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub(crate) fn set(&mut self, i: usize, label: Label) {
        self.labels[i] = label;
    }

    pub(crate) fn swap(&mut self, a: usize, b: usize) {
        self.labels.swap(a, b);
    }

    pub fn level(&self, i: usize) -> usize {
        level_of(i)
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        2 * i + 1 >= self.labels.len()
    }

    /// Indices of the deepest level, left to right.
    pub fn leaves(&self) -> std::ops::Range<usize> {
        (1 << (self.depth - 1)) - 1..self.labels.len()
    }

    /// Node indices from `i` up to the root, `i` included.
    pub fn path_to_root(&self, i: usize) -> impl Iterator<Item = usize> {
        std::iter::successors(Some(i), |&j| (j > 0).then(|| (j - 1) / 2))
    }

    /// Whether `a` lies on the root path of `b` (or `a == b`).
    pub fn is_ancestor_or_self(a: usize, b: usize) -> bool {
        let (la, lb) = (level_of(a), level_of(b));
        lb >= la && ((b + 1) >> (lb - la)) == a + 1
    }

    /// Activities still unverified at the origin.
    pub fn universe(&self) -> u64 {
        self.origin.unverified_mask()
    }

    /// Number of root-to-leaf paths on which some activity appears twice.
    pub fn duplicate_violations(&self) -> usize {
        self.leaves()
            .filter(|&leaf| {
                let mut seen = 0u64;
                self.path_to_root(leaf).any(|j| {
                    let b = self.labels[j].bit();
                    let dup = seen & b != 0;
                    seen |= b;
                    dup
                })
            })
            .count()
    }

    /// Structural and label invariants.
    pub fn check(&self) -> Result<()> {
        if self.depth == 0 || self.depth > 16 {
            return Err(Error::InvalidConfig(format!(
                "raw tree depth {} outside 1..=16",
                self.depth
            )));
        }
        if self.labels.len() != (1 << self.depth) - 1 {
            return Err(Error::InvalidConfig(format!(
                "depth-{} tree needs {} nodes, got {}",
                self.depth,
                (1 << self.depth) - 1,
                self.labels.len()
            )));
        }
        let universe = self.universe();
        if let Some(l) = self.labels.iter().find(|l| {
            l.activity()
                .is_some_and(|k| k >= 64 || universe >> k & 1 == 0)
        }) {
            return Err(Error::InvalidConfig(format!(
                "label {l:?} is not an unverified activity at the origin"
            )));
        }
        match self.duplicate_violations() {
            0 => Ok(()),
            n => Err(Error::InvalidConfig(format!(
                "{n} root-to-leaf paths repeat an activity"
            ))),
        }
    }

    /// Graphviz rendering of the labels, for debugging.
    pub fn to_dot(&self, scenario: &Scenario) -> String {
        let mut out = String::from("digraph rvt {\n  node [shape=box];\n");
        for (i, l) in self.labels.iter().enumerate() {
            let name = match l.activity() {
                Some(k) => scenario.activity_id(k).to_string(),
                None => "NA".into(),
            };
            let _ = writeln!(out, "  n{i} [label=\"{name}\"];");
            if i > 0 {
                let style = if i % 2 == 1 { "T" } else { "F" };
                let _ = writeln!(out, "  n{} -> n{i} [label=\"{style}\"];", (i - 1) / 2);
            }
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin(n: usize) -> VerificationState {
        VerificationState::initial(n)
    }

    #[test]
    fn levels_and_ancestry() {
        assert_eq!(level_of(0), 0);
        assert_eq!(level_of(2), 1);
        assert_eq!(level_of(3), 2);
        assert_eq!(level_of(14), 3);
        assert!(RawTree::is_ancestor_or_self(0, 13));
        assert!(RawTree::is_ancestor_or_self(2, 6));
        assert!(!RawTree::is_ancestor_or_self(1, 6));
        assert!(RawTree::is_ancestor_or_self(5, 5));
        let t = RawTree::all_na(origin(3), 3);
        assert_eq!(t.path_to_root(6).collect::<Vec<_>>(), vec![6, 2, 0]);
        assert_eq!(t.leaves(), 3..7);
    }

    #[test]
    fn duplicates_detected_per_path() {
        use Label::*;
        let ok = RawTree::from_levels(
            origin(3),
            &[
                &[Activity(0)],
                &[Activity(1), Activity(1)],
                &[Activity(2), Na, Na, Activity(2)],
            ],
        );
        assert!(ok.is_ok());
        let bad = RawTree::from_levels(
            origin(3),
            &[
                &[Activity(0)],
                &[Activity(1), Na],
                &[Activity(1), Na, Na, Na],
            ],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn labels_must_be_unverified() {
        let o = VerificationState::from_results(&[1, 0], 1).unwrap();
        assert!(RawTree::new(o, 1, vec![Label::Activity(0)]).is_err());
        assert!(RawTree::new(o, 1, vec![Label::Activity(1)]).is_ok());
    }
}
