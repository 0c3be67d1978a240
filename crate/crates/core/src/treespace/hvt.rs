use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::fvt::{Action, StopReason};
use crate::error::{Error, Result};
use crate::money::Money;
use crate::scenario::VerificationState;

/// Outcome arc of a hindsight-tree state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvtBranch {
    pub result: bool,
    /// `P(result | state)`.
    pub probability: f64,
    /// Target posterior in `child`.
    pub posterior: f64,
    /// Penalized rework cost; a reworked failure leads to the same child as the
    /// pass arc.
    pub rework: Option<Money>,
    pub child: VerificationState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvtNode {
    pub state: VerificationState,
    pub posterior: f64,
    pub action: Action,
    /// Set on terminal states.
    pub stop: Option<StopReason>,
    /// Activity cost of `action`, zero for terminals.
    pub cost: Money,
    /// Revenue collected when the process ends here.
    pub revenue: Money,
    /// Expected value of the foresight tree the optimizer returned here.
    pub fvt_value: Option<Money>,
    pub branches: Vec<HvtBranch>,
}

/// Per-state near-optimal actions stitched into one strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HvtFile", into = "HvtFile")]
pub struct HindsightTree {
    root: VerificationState,
    nodes: BTreeMap<VerificationState, HvtNode>,
    expected_value: Money,
}

#[derive(Serialize, Deserialize)]
struct HvtFile {
    root: VerificationState,
    expected_value: Money,
    nodes: Vec<HvtNode>,
}

impl TryFrom<HvtFile> for HindsightTree {
    type Error = Error;

    fn try_from(f: HvtFile) -> Result<Self> {
        let nodes = f.nodes.into_iter().map(|n| (n.state, n)).collect();
        HindsightTree::new(f.root, nodes)
    }
}

impl From<HindsightTree> for HvtFile {
    fn from(h: HindsightTree) -> Self {
        HvtFile {
            root: h.root,
            expected_value: h.expected_value,
            nodes: h.nodes.into_values().collect(),
        }
    }
}

/// One arc sequence from the root to a terminal state.
#[derive(Clone, Debug, PartialEq)]
pub struct HvtPath {
    /// Visited states, root first.
    pub states: Vec<VerificationState>,
    /// Cost paid on each arc (activity plus rework).
    pub arc_costs: Vec<Money>,
    pub probability: f64,
    pub value: Money,
    pub stop: StopReason,
}

impl HindsightTree {
    /// Checks that every reachable state is resolved and values the tree.
    pub fn new(
        root: VerificationState,
        nodes: BTreeMap<VerificationState, HvtNode>,
    ) -> Result<Self> {
        let mut hvt = HindsightTree {
            root,
            nodes,
            expected_value: Money::ZERO,
        };
        hvt.expected_value = hvt_expected_value(&hvt)?;
        Ok(hvt)
    }

    pub fn root(&self) -> &VerificationState {
        &self.root
    }

    pub fn root_node(&self) -> &HvtNode {
        &self.nodes[&self.root]
    }

    pub fn nodes(&self) -> &BTreeMap<VerificationState, HvtNode> {
        &self.nodes
    }

    pub fn node(&self, s: &VerificationState) -> Result<&HvtNode> {
        self.nodes.get(s).ok_or(Error::UnresolvedState(*s))
    }

    pub fn expected_value(&self) -> Money {
        self.expected_value
    }

    /// Every arc sequence (a reworked failure and the pass arc into the same
    /// state are separate paths), depth-first with pass arcs first.
    pub fn paths(&self) -> Result<Vec<HvtPath>> {
        let mut out = Vec::new();
        let mut states = vec![self.root];
        let mut costs = Vec::new();
        self.collect(
            &self.root,
            1.0,
            Money::ZERO,
            &mut states,
            &mut costs,
            &mut out,
        )?;
        Ok(out)
    }

    fn collect(
        &self,
        s: &VerificationState,
        prob: f64,
        paid: Money,
        states: &mut Vec<VerificationState>,
        costs: &mut Vec<Money>,
        out: &mut Vec<HvtPath>,
    ) -> Result<()> {
        let node = self.node(s)?;
        if let Some(stop) = node.stop {
            out.push(HvtPath {
                states: states.clone(),
                arc_costs: costs.clone(),
                probability: prob,
                value: node.revenue - paid,
                stop,
            });
            return Ok(());
        }
        for b in &node.branches {
            let arc = node.cost + b.rework.unwrap_or(Money::ZERO);
            states.push(b.child);
            costs.push(arc);
            self.collect(
                &b.child,
                prob * b.probability,
                paid + arc,
                states,
                costs,
                out,
            )?;
            states.pop();
            costs.pop();
        }
        Ok(())
    }

    /// Number of distinct root-to-terminal state sequences. Parallel arcs into
    /// the same state (pass and reworked failure) count once.
    pub fn leaf_path_count(&self) -> Result<u64> {
        let mut memo = BTreeMap::new();
        self.count_from(&self.root, &mut memo)
    }

    fn count_from(
        &self,
        s: &VerificationState,
        memo: &mut BTreeMap<VerificationState, u64>,
    ) -> Result<u64> {
        if let Some(&n) = memo.get(s) {
            return Ok(n);
        }
        let node = self.node(s)?;
        let n = if node.stop.is_some() {
            1
        } else {
            let children: BTreeSet<VerificationState> =
                node.branches.iter().map(|b| b.child).collect();
            let mut n = 0u64;
            for c in &children {
                n += self.count_from(c, memo)?;
            }
            n
        };
        memo.insert(*s, n);
        Ok(n)
    }

    /// `V(S)` for every state in ticks: revenue at terminals, otherwise
    /// `-cost + sum_b p_b (V(child_b) - rework_b)`.
    pub fn state_values(&self) -> Result<BTreeMap<VerificationState, f64>> {
        let mut memo = BTreeMap::new();
        self.value_from(&self.root, &mut memo)?;
        Ok(memo)
    }

    fn value_from(
        &self,
        s: &VerificationState,
        memo: &mut BTreeMap<VerificationState, f64>,
    ) -> Result<f64> {
        if let Some(&v) = memo.get(s) {
            return Ok(v);
        }
        let node = self.node(s)?;
        let v = if node.stop.is_some() {
            node.revenue.ticks() as f64
        } else {
            let mut v = -(node.cost.ticks() as f64);
            for b in &node.branches {
                let rework = b.rework.map_or(0.0, |m| m.ticks() as f64);
                v += b.probability * (self.value_from(&b.child, memo)? - rework);
            }
            v
        };
        memo.insert(*s, v);
        Ok(v)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree serializes");
        s.push('\n');
        s
    }

    /// Graphviz rendering in the usual strategy-tree style: rework arcs dashed,
    /// terminal states as ellipses.
    pub fn to_dot(&self) -> String {
        let ids: BTreeMap<&VerificationState, usize> =
            self.nodes.keys().enumerate().map(|(i, s)| (s, i)).collect();
        let mut out = String::from("digraph hvt {\n  rankdir=TB;\n");
        for (s, node) in &self.nodes {
            let (label, shape) = match node.stop {
                Some(stop) => (format!("{stop:?}\\nP={:.4}", node.posterior), "ellipse"),
                None => (format!("{}\\nP={:.4}", node.action, node.posterior), "box"),
            };
            let _ = writeln!(out, "  s{} [label=\"{label}\", shape={shape}];", ids[s]);
        }
        for (s, node) in &self.nodes {
            for b in &node.branches {
                let mut attrs = format!(
                    "label=\"{} p={:.3} P={:.3}",
                    if b.result { "T" } else { "F" },
                    b.probability,
                    b.posterior
                );
                if let Some(r) = b.rework {
                    let _ = write!(attrs, " rework={r}\", style=dashed");
                } else {
                    attrs.push('"');
                }
                let _ = writeln!(out, "  s{} -> s{} [{attrs}];", ids[s], ids[&b.child]);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Expected value over all hindsight-tree paths, accumulated in path order.
pub fn hvt_expected_value(hvt: &HindsightTree) -> Result<Money> {
    let ticks: f64 = hvt
        .paths()?
        .iter()
        .map(|p| p.probability * p.value.ticks() as f64)
        .sum();
    Ok(Money::round_ticks(ticks))
}
