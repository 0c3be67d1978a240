//! Binary Bayesian networks of system parameters and verification activities.
//!
//! A network is immutable once constructed: node lookups, topological checks and the
//! compiled CPT tables used by [`inference`] are built in [`BayesNetwork::new`]. All
//! queries take `&self`, so one network can be shared by any number of workers.

pub mod generate;
mod inference;

pub use generate::{noisy_or, random_network, RandomNetworkSpec};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::VerificationState;

pub(crate) use inference::Compiled;

/// Node identifier, e.g. `theta3` or `A24`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    SystemParameter,
    VerificationActivity,
}

/// Conditional probability of a node being true given its parents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cpt {
    /// One row per parent assignment. Keys are parent-ordered bitstrings: `"10"`
    /// means the first parent is true and the second false. A root node has the
    /// single key `""`.
    Explicit { rows: BTreeMap<String, f64> },
    /// `P(true) = 1 - (1 - leak) * prod_{j: parent j true} (1 - weights[j])`.
    NoisyOr { leak: f64, weights: Vec<f64> },
}

impl Cpt {
    /// Root prior expressed as an explicit one-row table.
    pub fn prior(p: f64) -> Self {
        Cpt::Explicit {
            rows: BTreeMap::from([(String::new(), p)]),
        }
    }

    fn check(&self, node: &NodeId, n_parents: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidNetwork(format!("node `{node}`: {msg}")));
        match self {
            Cpt::Explicit { rows } => {
                if rows.len() != 1 << n_parents {
                    return bad(format!(
                        "explicit table has {} rows, expected {}",
                        rows.len(),
                        1usize << n_parents
                    ));
                }
                for (key, &p) in rows {
                    if key.len() != n_parents || !key.bytes().all(|b| b == b'0' || b == b'1') {
                        return bad(format!("malformed row key `{key}`"));
                    }
                    if !(0.0..=1.0).contains(&p) {
                        return bad(format!("row `{key}` probability {p} outside [0, 1]"));
                    }
                }
            }
            Cpt::NoisyOr { leak, weights } => {
                if !(0.0..1.0).contains(leak) {
                    return bad(format!("leak {leak} outside [0, 1)"));
                }
                if weights.len() != n_parents {
                    return bad(format!(
                        "{} noisy-or weights for {n_parents} parents",
                        weights.len()
                    ));
                }
                if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
                    return bad(format!("noisy-or weight {w} outside [0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// Probability of true for a parent assignment encoded as a bitmask
    /// (bit `j` set when parent `j` is true).
    pub(crate) fn prob_for_mask(&self, mask: usize, n_parents: usize) -> f64 {
        match self {
            Cpt::Explicit { rows } => {
                let key: String = (0..n_parents)
                    .map(|j| if mask >> j & 1 == 1 { '1' } else { '0' })
                    .collect();
                rows[&key]
            }
            Cpt::NoisyOr { leak, weights } => {
                let mut off = 1.0 - leak;
                for (j, w) in weights.iter().enumerate() {
                    if mask >> j & 1 == 1 {
                        off *= 1.0 - w;
                    }
                }
                1.0 - off
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesNode {
    pub id: NodeId,
    pub kind: NodeKind,
    #[serde(default)]
    pub parents: Vec<NodeId>,
    pub cpt: Cpt,
}

/// Probability that `node` is true given a full assignment of its parents.
pub fn cpt_prob(node: &BayesNode, assignment: &BTreeMap<NodeId, bool>) -> Result<f64> {
    let malformed = |message: String| Error::MalformedAssignment {
        node: node.id.clone(),
        message,
    };
    if let Some(extra) = assignment.keys().find(|k| !node.parents.contains(k)) {
        return Err(malformed(format!("`{extra}` is not a parent")));
    }
    let mut mask = 0usize;
    for (j, parent) in node.parents.iter().enumerate() {
        match assignment.get(parent) {
            Some(true) => mask |= 1 << j,
            Some(false) => {}
            None => return Err(malformed(format!("missing parent `{parent}`"))),
        }
    }
    Ok(node.cpt.prob_for_mask(mask, node.parents.len()))
}

/// Observed node values; `true` is a positive result.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Evidence(BTreeMap<NodeId, bool>);

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, id: impl Into<NodeId>, value: bool) -> Self {
        self.0.insert(id.into(), value);
        self
    }

    pub fn insert(&mut self, id: NodeId, value: bool) {
        self.0.insert(id, value);
    }

    pub fn get(&self, id: &NodeId) -> Option<bool> {
        self.0.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, bool)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }
}

/// On-disk form of a network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkFile {
    pub nodes: Vec<BayesNode>,
    pub targets: Vec<NodeId>,
    pub activity_scope: Vec<NodeId>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "NetworkFile", into = "NetworkFile")]
pub struct BayesNetwork {
    nodes: Vec<BayesNode>,
    targets: Vec<NodeId>,
    activity_scope: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    compiled: Compiled,
}

/// Networks are equal when their definitions are; derived data is ignored.
impl PartialEq for BayesNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.targets == other.targets
            && self.activity_scope == other.activity_scope
    }
}

impl TryFrom<NetworkFile> for BayesNetwork {
    type Error = Error;
    fn try_from(file: NetworkFile) -> Result<Self> {
        BayesNetwork::new(file.nodes, file.targets, file.activity_scope)
    }
}

impl From<BayesNetwork> for NetworkFile {
    fn from(net: BayesNetwork) -> Self {
        NetworkFile {
            nodes: net.nodes,
            targets: net.targets,
            activity_scope: net.activity_scope,
        }
    }
}

impl BayesNetwork {
    pub fn new(
        nodes: Vec<BayesNode>,
        targets: Vec<NodeId>,
        activity_scope: Vec<NodeId>,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidNetwork(msg));
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return invalid(format!("duplicate node id `{}`", node.id));
            }
        }
        for node in &nodes {
            for (j, p) in node.parents.iter().enumerate() {
                if !index.contains_key(p) {
                    return invalid(format!("node `{}` has unknown parent `{p}`", node.id));
                }
                if node.parents[..j].contains(p) {
                    return invalid(format!("node `{}` lists parent `{p}` twice", node.id));
                }
            }
            node.cpt.check(&node.id, node.parents.len())?;
        }
        if targets.is_empty() {
            return invalid("no target node".into());
        }
        for t in &targets {
            match index.get(t).map(|&i| nodes[i].kind) {
                Some(NodeKind::SystemParameter) => {}
                Some(_) => return invalid(format!("target `{t}` is not a system parameter")),
                None => return invalid(format!("unknown target `{t}`")),
            }
        }
        for (k, a) in activity_scope.iter().enumerate() {
            match index.get(a).map(|&i| nodes[i].kind) {
                Some(NodeKind::VerificationActivity) => {}
                Some(_) => return invalid(format!("scope entry `{a}` is not an activity")),
                None => return invalid(format!("unknown scope activity `{a}`")),
            }
            if activity_scope[..k].contains(a) {
                return invalid(format!("scope lists `{a}` twice"));
            }
        }
        let compiled = Compiled::new(&nodes, &index)?;
        Ok(BayesNetwork {
            nodes,
            targets,
            activity_scope,
            index,
            compiled,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("network", e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("network serializes");
        s.push('\n');
        s
    }

    pub fn nodes(&self) -> &[BayesNode] {
        &self.nodes
    }

    pub fn targets(&self) -> &[NodeId] {
        &self.targets
    }

    pub fn activity_scope(&self) -> &[NodeId] {
        &self.activity_scope
    }

    pub fn node(&self, id: &NodeId) -> Result<&BayesNode> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    pub fn index_of(&self, id: &NodeId) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.clone()))
    }

    /// Same nodes and CPTs, restricted to a different set of eligible activities.
    pub fn with_scope(&self, activity_scope: Vec<NodeId>) -> Result<Self> {
        BayesNetwork::new(self.nodes.clone(), self.targets.clone(), activity_scope)
    }

    /// Exact `P(query = true | evidence)`.
    pub fn posterior(&self, evidence: &Evidence, query: &NodeId) -> Result<f64> {
        let q = self.index_of(query)?;
        let mut obs = self.observations(evidence)?;
        let p_e = self.compiled.evidence_probability(&obs);
        if p_e <= 0.0 {
            return Err(Error::ImpossibleEvidence);
        }
        if let Some(&(_, v)) = obs.iter().find(|(i, _)| *i == q) {
            return Ok(if v { 1.0 } else { 0.0 });
        }
        obs.push((q, true));
        let joint = self.compiled.evidence_probability(&obs);
        Ok((joint / p_e).clamp(0.0, 1.0))
    }

    /// Exact probability of the evidence under the joint distribution.
    pub fn evidence_probability(&self, evidence: &Evidence) -> Result<f64> {
        let obs = self.observations(evidence)?;
        Ok(self.compiled.evidence_probability(&obs))
    }

    /// Evidence as `(node index, value)` pairs.
    pub fn observations(&self, evidence: &Evidence) -> Result<Vec<(usize, bool)>> {
        evidence
            .iter()
            .map(|(id, v)| self.index_of(id).map(|i| (i, v)))
            .collect()
    }

    pub(crate) fn compiled(&self) -> &Compiled {
        &self.compiled
    }
}

/// Converts a ternary result vector over the activity scope into evidence.
/// Unverified entries are omitted.
pub fn state_to_evidence(net: &BayesNetwork, state: &VerificationState) -> Result<Evidence> {
    if state.width() != net.activity_scope.len() {
        return Err(Error::InvalidScenario(format!(
            "state has {} entries but the activity scope has {}",
            state.width(),
            net.activity_scope.len()
        )));
    }
    let mut ev = Evidence::new();
    for (k, r) in state.results().enumerate() {
        if r != 0 {
            ev.insert(net.activity_scope[k].clone(), r > 0);
        }
    }
    Ok(ev)
}
