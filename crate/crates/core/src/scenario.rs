//! Economic and policy parameters of a verification campaign.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bayesnet::{BayesNetwork, NodeId, NodeKind};
use crate::error::{Error, Result};
use crate::money::Money;

/// Largest activity scope a [`VerificationState`] can hold.
pub const MAX_ACTIVITIES: usize = 64;

/// Rework rules of the reference experiments, one lower threshold per interval.
pub const NAMED_RULES: [(&str, [f64; 5]); 4] = [
    ("Low", [0.2, 0.2, 0.2, 0.2, 0.2]),
    ("Low-high", [0.2, 0.3, 0.575, 0.85, 0.95]),
    ("High-low", [0.95, 0.85, 0.575, 0.3, 0.2]),
    ("High", [0.95, 0.95, 0.95, 0.95, 0.95]),
];

pub const DEFAULT_HORIZON: usize = 5;
pub const DEFAULT_UPPER_THRESHOLD: f64 = 0.95;

/// Results of every scoped activity (0 unverified, +1 positive, -1 negative)
/// plus the elapsed interval count.
///
/// Stored as two bitmasks so states hash and compare cheaply.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VerificationState {
    time: u32,
    width: u32,
    verified: u64,
    positive: u64,
}

impl VerificationState {
    /// All activities unverified at `t = 0`.
    pub fn initial(width: usize) -> Self {
        assert!(
            width <= MAX_ACTIVITIES,
            "activity scope exceeds {MAX_ACTIVITIES}"
        );
        VerificationState {
            time: 0,
            width: width as u32,
            verified: 0,
            positive: 0,
        }
    }

    pub fn from_results(results: &[i8], time: usize) -> Result<Self> {
        if results.len() > MAX_ACTIVITIES {
            return Err(Error::Unsupported(format!(
                "activity scope larger than {MAX_ACTIVITIES}"
            )));
        }
        let mut s = VerificationState::initial(results.len());
        for (k, &r) in results.iter().enumerate() {
            match r {
                0 => {}
                1 => {
                    s.verified |= 1 << k;
                    s.positive |= 1 << k;
                }
                -1 => s.verified |= 1 << k,
                _ => {
                    return Err(Error::InvalidScenario(format!(
                        "state entry {r} is not one of 0, 1, -1"
                    )))
                }
            }
        }
        if s.verified_count() > time {
            return Err(Error::InvalidScenario(format!(
                "{} verified activities at t={time}",
                s.verified_count()
            )));
        }
        s.time = time as u32;
        Ok(s)
    }

    pub fn time(&self) -> usize {
        self.time as usize
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn result(&self, k: usize) -> i8 {
        if self.verified >> k & 1 == 0 {
            0
        } else if self.positive >> k & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn results(&self) -> impl Iterator<Item = i8> + '_ {
        (0..self.width()).map(|k| self.result(k))
    }

    pub fn is_verified(&self, k: usize) -> bool {
        self.verified >> k & 1 == 1
    }

    pub fn verified_count(&self) -> usize {
        self.verified.count_ones() as usize
    }

    pub fn unverified(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width()).filter(|&k| !self.is_verified(k))
    }

    /// Bitmask of unverified activities.
    pub fn unverified_mask(&self) -> u64 {
        let all = if self.width == 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        };
        all & !self.verified
    }

    /// `(verified, positive)` masks; the posterior depends on nothing else.
    pub fn evidence_key(&self) -> (u64, u64) {
        (self.verified, self.positive)
    }

    /// Records a result for an unverified activity and advances time.
    /// Callers must check the horizon and prior status.
    pub fn with_result(&self, k: usize, positive: bool) -> Self {
        debug_assert!(!self.is_verified(k));
        let mut s = *self;
        s.verified |= 1 << k;
        if positive {
            s.positive |= 1 << k;
        }
        s.time += 1;
        s
    }

    /// Flips a failed result to a success without advancing time.
    pub fn with_rework(&self, k: usize) -> Self {
        debug_assert_eq!(self.result(k), -1);
        let mut s = *self;
        s.positive |= 1 << k;
        s
    }
}

impl fmt::Display for VerificationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, r) in self.results().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, "]@t{}", self.time)
    }
}

impl fmt::Debug for VerificationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    results: Vec<i8>,
    time: usize,
}

impl Serialize for VerificationState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        StateRepr {
            results: self.results().collect(),
            time: self.time(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VerificationState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = StateRepr::deserialize(deserializer)?;
        VerificationState::from_results(&repr.results, repr.time).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityCosts {
    /// Execution cost of the activity.
    pub cost: Money,
    /// Rework base cost, before the interval penalty.
    pub rework: Money,
}

/// Cost file contents. Money is in $1,000 units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub revenue: BTreeMap<NodeId, Money>,
    pub activities: BTreeMap<NodeId, ActivityCosts>,
    /// Rework cost multiplier per interval, non-decreasing.
    pub penalty: Vec<f64>,
}

impl CostModel {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    /// Rework base cost times the penalty of interval `t`.
    pub fn rework_cost(&self, activity: &NodeId, t: usize) -> Result<Money> {
        let c = self
            .activities
            .get(activity)
            .ok_or_else(|| Error::UnknownActivity(activity.clone()))?;
        let factor = self.penalty.get(t).ok_or(Error::HorizonReached(t))?;
        Ok(c.rework.scale(*factor))
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        for (id, c) in &self.activities {
            if c.cost < Money::ZERO || c.rework < Money::ZERO {
                return bad(format!("negative cost for `{id}`"));
            }
        }
        for (id, r) in &self.revenue {
            if *r < Money::ZERO {
                return bad(format!("negative revenue for `{id}`"));
            }
        }
        if self.penalty.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return bad("rework penalties must be finite and non-negative".into());
        }
        if self.penalty.windows(2).any(|w| w[1] < w[0]) {
            return bad("rework penalties must be non-decreasing".into());
        }
        Ok(())
    }
}

/// Lower confidence thresholds `H_l(t)` that trigger rework after a failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReworkRule {
    pub name: String,
    pub lower_thresholds: Vec<f64>,
}

/// Rule file contents: rule name to per-interval thresholds.
pub type RuleBook = BTreeMap<String, Vec<f64>>;

impl ReworkRule {
    pub fn new(name: impl Into<String>, lower_thresholds: Vec<f64>) -> Result<Self> {
        let rule = ReworkRule {
            name: name.into(),
            lower_thresholds,
        };
        if rule
            .lower_thresholds
            .iter()
            .any(|h| !(0.0..=1.0).contains(h))
        {
            return Err(Error::InvalidScenario(format!(
                "rule `{}` has a threshold outside [0, 1]",
                rule.name
            )));
        }
        Ok(rule)
    }

    /// One of `Low`, `Low-high`, `High-low`, `High`.
    pub fn named(name: &str) -> Result<Self> {
        NAMED_RULES
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(n, h)| ReworkRule::new(*n, h.to_vec()))
            .unwrap_or_else(|| Err(Error::UnknownRule(name.to_owned())))
    }

    /// Looks a rule up in a rule book, falling back to the named rules.
    pub fn lookup(name: &str, book: Option<&RuleBook>) -> Result<Self> {
        if let Some(h) = book.and_then(|b| b.get(name)) {
            return ReworkRule::new(name, h.clone());
        }
        ReworkRule::named(name)
    }

    pub fn builtin_book() -> RuleBook {
        NAMED_RULES
            .iter()
            .map(|(n, h)| (n.to_string(), h.to_vec()))
            .collect()
    }

    pub fn load_book(path: &Path) -> Result<RuleBook> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn threshold(&self, t: usize) -> f64 {
        self.lower_thresholds[t]
    }
}

/// Deployment threshold `H_u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeploymentRule {
    pub upper_threshold: f64,
}

impl Default for DeploymentRule {
    fn default() -> Self {
        DeploymentRule {
            upper_threshold: DEFAULT_UPPER_THRESHOLD,
        }
    }
}

/// A fully validated verification campaign.
#[derive(Clone, Debug)]
pub struct Scenario {
    network: BayesNetwork,
    costs: CostModel,
    rework: ReworkRule,
    deploy: DeploymentRule,
    horizon: usize,
    target: NodeId,
    target_node: usize,
    scope_nodes: Vec<usize>,
    activity_cost: Vec<Money>,
    rework_base: Vec<Money>,
    revenue: Money,
}

impl Scenario {
    pub fn new(
        network: BayesNetwork,
        costs: CostModel,
        rework: ReworkRule,
        deploy: DeploymentRule,
        horizon: usize,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        costs.validate()?;
        // Entries past the horizon are unused, so bundled data serves shorter horizons.
        if costs.penalty.len() < horizon {
            return bad(format!(
                "penalty list has {} entries; horizon {horizon} needs one per interval",
                costs.penalty.len()
            ));
        }
        if rework.lower_thresholds.len() < horizon {
            return bad(format!(
                "rule `{}` has {} thresholds; horizon {horizon} needs one per interval",
                rework.name,
                rework.lower_thresholds.len()
            ));
        }
        if !(0.0..=1.0).contains(&deploy.upper_threshold) {
            return bad("deployment threshold outside [0, 1]".into());
        }
        if network.activity_scope().len() > MAX_ACTIVITIES {
            return Err(Error::Unsupported(format!(
                "activity scope larger than {MAX_ACTIVITIES}"
            )));
        }
        for id in costs.activities.keys() {
            match network.node(id) {
                Ok(n) if n.kind == NodeKind::VerificationActivity => {}
                _ => return Err(Error::UnknownActivity(id.clone())),
            }
        }
        if costs.revenue.len() != 1 {
            return Err(Error::Unsupported(
                "exactly one revenue target per scenario is supported".into(),
            ));
        }
        let (target, &revenue) = costs.revenue.iter().next().unwrap();
        if !network.targets().contains(target) {
            return bad(format!("revenue target `{target}` is not a network target"));
        }
        let target = target.clone();
        let target_node = network.index_of(&target)?;

        let mut scope_nodes = Vec::new();
        let mut activity_cost = Vec::new();
        let mut rework_base = Vec::new();
        for id in network.activity_scope() {
            let c = costs
                .activities
                .get(id)
                .ok_or_else(|| Error::InvalidScenario(format!("no costs for activity `{id}`")))?;
            scope_nodes.push(network.index_of(id)?);
            activity_cost.push(c.cost);
            rework_base.push(c.rework);
        }

        Ok(Scenario {
            network,
            costs,
            rework,
            deploy,
            horizon,
            target,
            target_node,
            scope_nodes,
            activity_cost,
            rework_base,
            revenue,
        })
    }

    pub fn network(&self) -> &BayesNetwork {
        &self.network
    }

    pub fn costs(&self) -> &CostModel {
        &self.costs
    }

    pub fn rework_rule(&self) -> &ReworkRule {
        &self.rework
    }

    pub fn deployment_rule(&self) -> DeploymentRule {
        self.deploy
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn target(&self) -> &NodeId {
        &self.target
    }

    pub fn revenue(&self) -> Money {
        self.revenue
    }

    pub fn n_activities(&self) -> usize {
        self.scope_nodes.len()
    }

    pub fn activity_id(&self, k: usize) -> &NodeId {
        &self.network.activity_scope()[k]
    }

    pub fn activity_index(&self, id: &NodeId) -> Result<usize> {
        self.network
            .activity_scope()
            .iter()
            .position(|a| a == id)
            .ok_or_else(|| Error::UnknownActivity(id.clone()))
    }

    pub fn activity_cost(&self, k: usize) -> Money {
        self.activity_cost[k]
    }

    /// Penalized rework cost of scoped activity `k` triggered at interval `t`.
    pub fn rework_cost_at(&self, k: usize, t: usize) -> Money {
        self.rework_base[k].scale(self.costs.penalty[t])
    }

    pub fn rework_cost(&self, id: &NodeId, t: usize) -> Result<Money> {
        if t >= self.horizon {
            return Err(Error::HorizonReached(t));
        }
        self.costs.rework_cost(id, t)
    }

    pub fn lower_threshold(&self, t: usize) -> f64 {
        self.rework.threshold(t)
    }

    pub fn upper_threshold(&self) -> f64 {
        self.deploy.upper_threshold
    }

    /// Revenue term of the path value: `B * P` when `P > H_u`, else zero.
    pub fn revenue_for(&self, posterior: f64) -> Money {
        if posterior > self.deploy.upper_threshold {
            self.revenue.scale(posterior)
        } else {
            Money::ZERO
        }
    }

    pub fn initial_state(&self) -> VerificationState {
        VerificationState::initial(self.n_activities())
    }

    pub fn state(&self, results: &[i8], time: usize) -> Result<VerificationState> {
        if results.len() != self.n_activities() {
            return Err(Error::InvalidScenario(format!(
                "state has {} entries but the activity scope has {}",
                results.len(),
                self.n_activities()
            )));
        }
        if time > self.horizon {
            return Err(Error::HorizonReached(time));
        }
        VerificationState::from_results(results, time)
    }

    /// Records the result of `activity`, advancing time by one interval.
    pub fn apply_result(
        &self,
        state: &VerificationState,
        activity: &NodeId,
        result: bool,
    ) -> Result<VerificationState> {
        let k = self.activity_index(activity)?;
        if state.is_verified(k) {
            return Err(Error::AlreadyVerified(activity.clone()));
        }
        if state.time() >= self.horizon {
            return Err(Error::HorizonReached(state.time()));
        }
        Ok(state.with_result(k, result))
    }

    /// Corrects a failed result to a success. Time is unchanged.
    pub fn apply_rework(
        &self,
        state: &VerificationState,
        activity: &NodeId,
    ) -> Result<VerificationState> {
        let k = self.activity_index(activity)?;
        if state.result(k) != -1 {
            return Err(Error::NotFailed(activity.clone()));
        }
        Ok(state.with_rework(k))
    }

    /// `(P(S), P(S, target = true))` for the evidence encoded in `state`.
    pub(crate) fn state_joint(&self, state: &VerificationState) -> (f64, f64) {
        let mut obs: Vec<(usize, bool)> = (0..self.n_activities())
            .filter(|&k| state.is_verified(k))
            .map(|k| (self.scope_nodes[k], state.result(k) > 0))
            .collect();
        let c = self.network.compiled();
        let p = c.evidence_probability(&obs);
        obs.push((self.target_node, true));
        (p, c.evidence_probability(&obs))
    }

    /// Uncached posterior confidence in the target.
    pub fn posterior(&self, state: &VerificationState) -> Result<f64> {
        let (p, joint) = self.state_joint(state);
        if p <= 0.0 {
            return Err(Error::ImpossibleEvidence);
        }
        Ok((joint / p).clamp(0.0, 1.0))
    }
}

/// Loads and validates a scenario from a network file, a cost file and a rule
/// name. The rule is looked up in `rules_file` first when given, then among the
/// named rules.
pub fn load_scenario(
    network_file: &Path,
    cost_file: &Path,
    rule_name: &str,
    horizon: usize,
    rules_file: Option<&Path>,
) -> Result<Scenario> {
    let network = BayesNetwork::load(network_file)?;
    let costs = CostModel::load(cost_file)?;
    let book = rules_file.map(ReworkRule::load_book).transpose()?;
    let rule = ReworkRule::lookup(rule_name, book.as_ref())?;
    Scenario::new(network, costs, rule, DeploymentRule::default(), horizon)
}
