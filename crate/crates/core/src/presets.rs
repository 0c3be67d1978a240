//! Bundled scenarios.
//!
//! * `exemplar`: three parameters and four activities with hand-set tables.
//!   A failed `A2` drops confidence in `theta1` below 0.2; `A2` and `A1` both
//!   passing lifts it above 0.95.
//! * `satellite-*`: an optical-instrument network of twelve parameters and the
//!   29 activities `A22..A50` with the reference cost table. The target is
//!   `theta3`. Noisy-OR parameters are drawn from [`SATELLITE_SEED`]. The four
//!   scopes restrict which activities may be selected; inference always runs on
//!   the full network.
//!
//! The files under `crates/core/data` are the serialized output of these
//! functions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bayesnet::generate::{draw, noisy_or, random_network, RandomNetworkSpec};
use crate::bayesnet::{BayesNetwork, BayesNode, Cpt, NodeId, NodeKind};
use crate::error::{Error, Result};
use crate::money::Money;
use crate::scenario::{
    ActivityCosts, CostModel, DeploymentRule, ReworkRule, Scenario, DEFAULT_HORIZON,
};
use crate::treespace::{Label, RawTree};

/// Rework penalty per interval of the reference experiments.
pub const PENALTY: [f64; 5] = [1.0, 1.11, 1.22, 1.36, 1.5];
pub const SATELLITE_SEED: u64 = 2021;
pub const SATELLITE_REVENUE: i64 = 20_000;

pub const PRESET_NAMES: [&str; 5] = [
    "exemplar",
    "satellite-small",
    "satellite-medium",
    "satellite-large",
    "satellite-full",
];

fn explicit(id: &str, kind: NodeKind, parents: &[&str], rows: &[(&str, f64)]) -> BayesNode {
    BayesNode {
        id: NodeId::new(id),
        kind,
        parents: parents.iter().map(|&p| NodeId::new(p)).collect(),
        cpt: Cpt::Explicit {
            rows: rows.iter().map(|&(k, p)| (k.to_owned(), p)).collect(),
        },
    }
}

pub fn exemplar_network() -> BayesNetwork {
    use NodeKind::{SystemParameter as P, VerificationActivity as A};
    let nodes = vec![
        explicit(
            "theta1",
            P,
            &["theta2", "theta3"],
            &[("11", 0.95), ("10", 0.6), ("01", 0.4), ("00", 0.05)],
        ),
        explicit("theta2", P, &[], &[("", 0.7)]),
        explicit("theta3", P, &[], &[("", 0.6)]),
        explicit("A1", A, &["theta1"], &[("1", 0.88), ("0", 0.15)]),
        explicit(
            "A2",
            A,
            &["theta1", "theta2"],
            &[("11", 0.97), ("10", 0.55), ("01", 0.25), ("00", 0.02)],
        ),
        explicit("A3", A, &["theta3"], &[("1", 0.85), ("0", 0.15)]),
        explicit("A4", A, &["theta2"], &[("1", 0.9), ("0", 0.2)]),
    ];
    let scope = ["A1", "A2", "A3", "A4"].map(NodeId::new).to_vec();
    BayesNetwork::new(nodes, vec![NodeId::new("theta1")], scope).expect("exemplar network is valid")
}

fn costs(revenue: (&str, i64), table: &[(&str, i64, i64)]) -> CostModel {
    CostModel {
        revenue: BTreeMap::from([(NodeId::new(revenue.0), Money::from_units(revenue.1))]),
        activities: table
            .iter()
            .map(|&(id, cost, rework)| {
                (
                    NodeId::new(id),
                    ActivityCosts {
                        cost: Money::from_units(cost),
                        rework: Money::from_units(rework),
                    },
                )
            })
            .collect(),
        penalty: PENALTY.to_vec(),
    }
}

pub fn exemplar_costs() -> CostModel {
    costs(
        ("theta1", 2000),
        &[
            ("A1", 120, 300),
            ("A2", 100, 250),
            ("A3", 60, 150),
            ("A4", 50, 120),
        ],
    )
}

pub fn exemplar_scenario(rule: &str) -> Result<Scenario> {
    Scenario::new(
        exemplar_network(),
        exemplar_costs(),
        ReworkRule::named(rule)?,
        DeploymentRule::default(),
        DEFAULT_HORIZON,
    )
}

/// The four-level tree used to illustrate pruning and the exchange
/// correction: `A2 / A1 A4 / A4 NA A3 A1 / NA...`.
pub fn fig3a_tree(scenario: &Scenario) -> RawTree {
    let a = |id: &str| Label::Activity(scenario.activity_index(&NodeId::new(id)).unwrap() as u16);
    RawTree::from_levels(
        scenario.initial_state(),
        &[
            &[a("A2")],
            &[a("A1"), a("A4")],
            &[a("A4"), Label::Na, a("A3"), a("A1")],
            &[Label::Na; 8],
        ],
    )
    .expect("illustration tree is valid")
}

/// Reference cost table: `(activity, cost, rework base)`.
pub const SATELLITE_COSTS: [(&str, i64, i64); 29] = [
    ("A22", 350, 39_010),
    ("A23", 800, 740),
    ("A24", 350, 36_620),
    ("A25", 250, 38_430),
    ("A26", 800, 5_160),
    ("A27", 350, 37_550),
    ("A28", 350, 30_970),
    ("A29", 550, 8_310),
    ("A30", 450, 7_030),
    ("A31", 300, 7_880),
    ("A32", 250, 1_860),
    ("A33", 700, 8_180),
    ("A34", 250, 6_200),
    ("A35", 700, 8_070),
    ("A36", 450, 6_020),
    ("A37", 300, 7_800),
    ("A38", 350, 1_490),
    ("A39", 350, 770),
    ("A40", 550, 7_910),
    ("A41", 1000, 740),
    ("A42", 450, 8_020),
    ("A43", 450, 1_700),
    ("A44", 950, 1_470),
    ("A45", 950, 1_270),
    ("A46", 250, 1_160),
    ("A47", 250, 1_600),
    ("A48", 400, 1_330),
    ("A49", 850, 1_010),
    ("A50", 250, 1_220),
];

const SATELLITE_PARAMETERS: [(&str, &[&str]); 12] = [
    ("theta1", &["theta4", "theta5"]),
    ("theta2", &["theta4"]),
    ("theta3", &["theta2", "theta7", "theta8"]),
    ("theta4", &[]),
    ("theta5", &[]),
    ("theta6", &["theta9", "theta10"]),
    ("theta7", &[]),
    ("theta8", &["theta5", "theta6"]),
    ("theta9", &[]),
    ("theta10", &[]),
    ("theta11", &["theta1", "theta12"]),
    ("theta12", &[]),
];

const SATELLITE_ACTIVITIES: [(&str, &[&str]); 29] = [
    ("A22", &["theta6"]),
    ("A23", &["theta3"]),
    ("A24", &["theta6"]),
    ("A25", &["theta9"]),
    ("A26", &["theta3"]),
    ("A27", &["theta10"]),
    ("A28", &["theta8"]),
    ("A29", &["theta2"]),
    ("A30", &["theta7"]),
    ("A31", &["theta8", "theta6"]),
    ("A32", &["theta3", "theta8"]),
    ("A33", &["theta3"]),
    ("A34", &["theta2"]),
    ("A35", &["theta6"]),
    ("A36", &["theta9"]),
    ("A37", &["theta10"]),
    ("A38", &["theta3"]),
    ("A39", &["theta3"]),
    ("A40", &["theta11"]),
    ("A41", &["theta1"]),
    ("A42", &["theta4"]),
    ("A43", &["theta5"]),
    ("A44", &["theta1"]),
    ("A45", &["theta2"]),
    ("A46", &["theta12"]),
    ("A47", &["theta11"]),
    ("A48", &["theta5"]),
    ("A49", &["theta1"]),
    ("A50", &["theta12"]),
];

/// Activity scope of the satellite network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SatelliteScope {
    /// Activities observing `theta3` directly.
    Small,
    /// Adds activities on `theta3`'s parents.
    Medium,
    /// Adds activities on the degradation branch (`theta6` and its causes).
    Large,
    Full,
}

impl SatelliteScope {
    pub const ALL: [SatelliteScope; 4] = [
        SatelliteScope::Small,
        SatelliteScope::Medium,
        SatelliteScope::Large,
        SatelliteScope::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SatelliteScope::Small => "small",
            SatelliteScope::Medium => "medium",
            SatelliteScope::Large => "large",
            SatelliteScope::Full => "full",
        }
    }

    pub fn activities(self) -> Vec<NodeId> {
        const SMALL: [&str; 5] = ["A23", "A26", "A33", "A38", "A39"];
        const MEDIUM: [&str; 5] = ["A29", "A30", "A31", "A32", "A34"];
        const LARGE: [&str; 8] = ["A22", "A24", "A25", "A27", "A28", "A35", "A36", "A37"];
        let mut ids: Vec<&str> = match self {
            SatelliteScope::Small => SMALL.to_vec(),
            SatelliteScope::Medium => [&SMALL[..], &MEDIUM[..]].concat(),
            SatelliteScope::Large => [&SMALL[..], &MEDIUM[..], &LARGE[..]].concat(),
            SatelliteScope::Full => SATELLITE_ACTIVITIES.iter().map(|a| a.0).collect(),
        };
        ids.sort_by_key(|id| id[1..].parse::<u32>().unwrap());
        ids.into_iter().map(NodeId::new).collect()
    }
}

/// Full satellite network (every activity in scope).
pub fn satellite_network() -> BayesNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(SATELLITE_SEED);
    let mut nodes = Vec::new();
    for (id, parents) in SATELLITE_PARAMETERS {
        let (leak, weights) = if parents.is_empty() {
            (draw(&mut rng, (0.6, 0.85)), vec![])
        } else {
            let leak = draw(&mut rng, (0.1, 0.25));
            let w = parents
                .iter()
                .map(|_| draw(&mut rng, (0.35, 0.6)))
                .collect::<Vec<_>>();
            (leak, w)
        };
        nodes.push(noisy_or(
            id,
            NodeKind::SystemParameter,
            parents,
            leak,
            &weights,
        ));
    }
    for (id, parents) in SATELLITE_ACTIVITIES {
        let leak = draw(&mut rng, (0.1, 0.25));
        let w = parents
            .iter()
            .map(|_| draw(&mut rng, (0.6, 0.85)))
            .collect::<Vec<_>>();
        nodes.push(noisy_or(
            id,
            NodeKind::VerificationActivity,
            parents,
            leak,
            &w,
        ));
    }
    let scope = SatelliteScope::Full.activities();
    BayesNetwork::new(nodes, vec![NodeId::new("theta3")], scope)
        .expect("satellite network is valid")
}

pub fn satellite_costs() -> CostModel {
    costs(("theta3", SATELLITE_REVENUE), &SATELLITE_COSTS)
}

pub fn satellite_scenario(scope: SatelliteScope, rule: &str) -> Result<Scenario> {
    let net = satellite_network().with_scope(scope.activities())?;
    Scenario::new(
        net,
        satellite_costs(),
        ReworkRule::named(rule)?,
        DeploymentRule::default(),
        DEFAULT_HORIZON,
    )
}

/// Network and cost model of a named preset.
pub fn preset(name: &str) -> Result<(BayesNetwork, CostModel)> {
    if name == "exemplar" {
        return Ok((exemplar_network(), exemplar_costs()));
    }
    let scope = SatelliteScope::ALL
        .into_iter()
        .find(|s| name.strip_prefix("satellite-") == Some(s.name()))
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown preset `{name}`; expected one of {}",
                PRESET_NAMES.join(", ")
            ))
        })?;
    Ok((
        satellite_network().with_scope(scope.activities())?,
        satellite_costs(),
    ))
}

pub fn preset_scenario(name: &str, rule: &ReworkRule, horizon: usize) -> Result<Scenario> {
    let (net, costs) = preset(name)?;
    Scenario::new(net, costs, rule.clone(), DeploymentRule::default(), horizon)
}

/// Small random scenario for exhaustive comparisons.
#[derive(Clone, Debug)]
pub struct RandomScenarioSpec {
    pub parameters: usize,
    pub activities: usize,
    pub horizon: usize,
    pub revenue: i64,
    pub cost: (i64, i64),
    pub rework: (i64, i64),
    pub lower_threshold: (f64, f64),
    pub upper_threshold: f64,
}

impl Default for RandomScenarioSpec {
    fn default() -> Self {
        RandomScenarioSpec {
            parameters: 3,
            activities: 4,
            horizon: 3,
            revenue: 1000,
            cost: (10, 120),
            rework: (20, 400),
            lower_threshold: (0.1, 0.6),
            upper_threshold: 0.9,
        }
    }
}

/// Target `theta1`, activities `A1..An`, penalty rising by 10% per interval.
pub fn random_scenario(spec: &RandomScenarioSpec, seed: u64) -> Result<Scenario> {
    let net = random_network(
        &RandomNetworkSpec {
            parameters: spec.parameters,
            activities: spec.activities,
            activity_leak: (0.02, 0.15),
            activity_weight: (0.75, 0.98),
            ..Default::default()
        },
        seed,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c057);
    let table: Vec<(String, i64, i64)> = (1..=spec.activities)
        .map(|i| {
            (
                format!("A{i}"),
                rng.random_range(spec.cost.0..=spec.cost.1),
                rng.random_range(spec.rework.0..=spec.rework.1),
            )
        })
        .collect();
    let mut costs = costs(
        ("theta1", spec.revenue),
        &table
            .iter()
            .map(|(a, c, r)| (a.as_str(), *c, *r))
            .collect::<Vec<_>>(),
    );
    costs.penalty = (0..spec.horizon).map(|t| 1.0 + 0.1 * t as f64).collect();
    let thresholds = (0..spec.horizon)
        .map(|_| draw(&mut rng, spec.lower_threshold))
        .collect();
    Scenario::new(
        net,
        costs,
        ReworkRule::new("random", thresholds)?,
        DeploymentRule {
            upper_threshold: spec.upper_threshold,
        },
        spec.horizon,
    )
}
