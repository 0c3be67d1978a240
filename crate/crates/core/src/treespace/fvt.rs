use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::raw::RawTree;
use crate::bayesnet::NodeId;
use crate::error::Result;
use crate::money::Money;
use crate::scenario::{Scenario, VerificationState};

/// Why a path ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StopReason {
    /// Posterior reached the deployment threshold.
    Deployed,
    /// An `NA` label was reached.
    NaStop,
    /// Every interval was used.
    HorizonEnd,
    /// The best action at a low-confidence state is to stop.
    Unrecoverable,
}

/// A decision: run an activity or stop. Serialized as the activity id or
/// `"Stop"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Activity(NodeId),
    Stop,
}

impl Action {
    pub fn activity(&self) -> Option<&NodeId> {
        match self {
            Action::Activity(id) => Some(id),
            Action::Stop => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Activity(id) => write!(f, "{id}"),
            Action::Stop => f.write_str("Stop"),
        }
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(match s.as_str() {
            "Stop" | "NA" => Action::Stop,
            _ => Action::Activity(NodeId::new(s)),
        })
    }
}

/// One executed activity on a path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub activity: NodeId,
    /// Interval in which the activity ran.
    pub t: usize,
    /// Observed result, before any rework.
    pub result: bool,
    pub rework: bool,
    /// Penalized rework cost, zero without rework.
    pub rework_cost: Money,
    /// `P(result | state before the step)`.
    pub probability: f64,
    /// Target posterior after the result (and rework, if any).
    pub posterior_after: f64,
}

/// A root-to-terminal outcome path of a foresight tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub steps: Vec<Step>,
    /// Product of the step probabilities.
    pub probability: f64,
    pub end_state: VerificationState,
    /// Activity and rework costs paid along the path.
    pub costs: Money,
    /// Path value `U`: revenue (if deployed) minus `costs`.
    pub terminal_value: Money,
    pub stop: StopReason,
}

/// Node of the pruned, valued tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FvtNode {
    pub action: Action,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stop: Option<StopReason>,
    pub state: VerificationState,
    pub posterior: f64,
    #[serde(rename = "branch", skip_serializing_if = "Vec::is_empty", default)]
    pub branches: Vec<FvtBranch>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FvtBranch {
    pub result: bool,
    pub probability: f64,
    /// Posterior after the result and any rework.
    pub posterior: f64,
    /// Penalized rework cost when the failure was reworked.
    pub rework: Option<Money>,
    pub child: Box<FvtNode>,
}

/// Foresight tree: a raw tree after pruning, with its outcome paths and value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForesightTree {
    pub origin: VerificationState,
    pub raw: RawTree,
    pub root: FvtNode,
    pub paths: Vec<Path>,
    pub expected_value: Money,
}

/// Probability-weighted sum of path values, accumulated in path order and
/// rounded once.
pub fn expected_value(paths: &[Path]) -> Money {
    Money::round_ticks(expected_ticks(paths))
}

fn expected_ticks(paths: &[Path]) -> f64 {
    paths
        .iter()
        .map(|p| p.probability * p.terminal_value.ticks() as f64)
        .sum()
}

/// Kind of a cost incurred along a path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostKind {
    Activity,
    Rework,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub kind: CostKind,
    pub activity: NodeId,
    pub t: usize,
}

/// Path value: `B * P(target | end)` when the posterior clears `H_u`, minus
/// activity costs and penalized rework costs.
pub fn path_value(
    scenario: &Scenario,
    end_state: &VerificationState,
    ledger: &[LedgerEntry],
) -> Result<Money> {
    let mut value = scenario.revenue_for(scenario.posterior(end_state)?);
    for e in ledger {
        let k = scenario.activity_index(&e.activity)?;
        value -= match e.kind {
            CostKind::Activity => scenario.activity_cost(k),
            CostKind::Rework => scenario.rework_cost(&e.activity, e.t)?,
        };
    }
    Ok(value)
}

impl ForesightTree {
    pub fn root_action(&self) -> &Action {
        &self.root.action
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree serializes");
        s.push('\n');
        s
    }

    /// Graphviz rendering; rework arcs are dashed.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph fvt {\n  node [shape=box];\n");
        let mut next = 0usize;
        dot_node(&self.root, &mut next, &mut out);
        out.push_str("}\n");
        out
    }
}

fn dot_node(node: &FvtNode, next: &mut usize, out: &mut String) -> usize {
    let id = *next;
    *next += 1;
    let label = match node.stop {
        Some(reason) => format!("{reason:?}\\nP={:.4}", node.posterior),
        None => format!("{}\\nP={:.4}", node.action, node.posterior),
    };
    let shape = if node.stop.is_some() {
        "ellipse"
    } else {
        "box"
    };
    let _ = writeln!(out, "  n{id} [label=\"{label}\", shape={shape}];");
    for b in &node.branches {
        let child = dot_node(&b.child, next, out);
        let style = if b.rework.is_some() {
            ", style=dashed"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  n{id} -> n{child} [label=\"{} p={:.3} P={:.3}\"{style}];",
            if b.result { "T" } else { "F" },
            b.probability,
            b.posterior
        );
    }
    id
}
