//! Seeded Noisy-OR network generation.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BayesNetwork, BayesNode, Cpt, NodeId, NodeKind};
use crate::error::{Error, Result};

/// Shape and parameter ranges for [`random_network`].
#[derive(Clone, Debug)]
pub struct RandomNetworkSpec {
    pub parameters: usize,
    pub activities: usize,
    /// Upper bound on parameter-to-parameter parents (at least one for non-roots).
    pub max_parameter_parents: usize,
    /// Upper bound on the parents of an activity.
    pub max_activity_parents: usize,
    /// Probability that an activity also depends on an earlier activity.
    pub activity_chain_prob: f64,
    pub prior: (f64, f64),
    pub parameter_leak: (f64, f64),
    pub parameter_weight: (f64, f64),
    pub activity_leak: (f64, f64),
    pub activity_weight: (f64, f64),
}

impl Default for RandomNetworkSpec {
    fn default() -> Self {
        RandomNetworkSpec {
            parameters: 3,
            activities: 5,
            max_parameter_parents: 2,
            max_activity_parents: 2,
            activity_chain_prob: 0.0,
            prior: (0.5, 0.85),
            parameter_leak: (0.05, 0.3),
            parameter_weight: (0.5, 0.95),
            activity_leak: (0.02, 0.2),
            activity_weight: (0.6, 0.98),
        }
    }
}

pub(crate) fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    let x = if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    };
    // three decimals keep generated files readable
    (x * 1000.0).round() / 1000.0
}

/// Noisy-OR node helper.
pub fn noisy_or(
    id: &str,
    kind: NodeKind,
    parents: &[&str],
    leak: f64,
    weights: &[f64],
) -> BayesNode {
    BayesNode {
        id: NodeId::new(id),
        kind,
        parents: parents.iter().map(|&p| NodeId::new(p)).collect(),
        cpt: Cpt::NoisyOr {
            leak,
            weights: weights.to_vec(),
        },
    }
}

/// Random network: parameters `theta1..thetaP` form a DAG rooted at `theta1`
/// (every later parameter has at least one earlier parameter as parent) and
/// activities `A1..An` observe one or more parameters. `theta1` is the target and
/// every activity is in scope.
pub fn random_network(spec: &RandomNetworkSpec, seed: u64) -> Result<BayesNetwork> {
    if spec.parameters == 0 {
        return Err(Error::InvalidConfig(
            "at least one parameter is required".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(spec.parameters + spec.activities);

    let param = |i: usize| format!("theta{}", i + 1);
    for i in 0..spec.parameters {
        if i == 0 {
            nodes.push(BayesNode {
                id: NodeId::new(param(0)),
                kind: NodeKind::SystemParameter,
                parents: vec![],
                cpt: Cpt::NoisyOr {
                    leak: draw(&mut rng, spec.prior),
                    weights: vec![],
                },
            });
            continue;
        }
        let k = rng.random_range(1..=spec.max_parameter_parents.max(1).min(i));
        let mut picks = sample(&mut rng, i, k).into_vec();
        picks.sort_unstable();
        let weights = picks
            .iter()
            .map(|_| draw(&mut rng, spec.parameter_weight))
            .collect();
        nodes.push(BayesNode {
            id: NodeId::new(param(i)),
            kind: NodeKind::SystemParameter,
            parents: picks.iter().map(|&j| NodeId::new(param(j))).collect(),
            cpt: Cpt::NoisyOr {
                leak: draw(&mut rng, spec.parameter_leak),
                weights,
            },
        });
    }

    let activity = |i: usize| format!("A{}", i + 1);
    for i in 0..spec.activities {
        let k = rng.random_range(1..=spec.max_activity_parents.max(1).min(spec.parameters));
        let mut picks = sample(&mut rng, spec.parameters, k).into_vec();
        picks.sort_unstable();
        let mut parents: Vec<NodeId> = picks.iter().map(|&j| NodeId::new(param(j))).collect();
        if i > 0 && rng.random_bool(spec.activity_chain_prob.clamp(0.0, 1.0)) {
            parents.push(NodeId::new(activity(rng.random_range(0..i))));
        }
        let weights = parents
            .iter()
            .map(|_| draw(&mut rng, spec.activity_weight))
            .collect();
        nodes.push(BayesNode {
            id: NodeId::new(activity(i)),
            kind: NodeKind::VerificationActivity,
            parents,
            cpt: Cpt::NoisyOr {
                leak: draw(&mut rng, spec.activity_leak),
                weights,
            },
        });
    }

    let scope = (0..spec.activities)
        .map(|i| NodeId::new(activity(i)))
        .collect();
    BayesNetwork::new(nodes, vec![NodeId::new(param(0))], scope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_generation_is_reproducible() {
        let spec = RandomNetworkSpec {
            parameters: 5,
            activities: 8,
            activity_chain_prob: 0.3,
            ..Default::default()
        };
        let a = random_network(&spec, 11).unwrap().to_json();
        let b = random_network(&spec, 11).unwrap().to_json();
        let c = random_network(&spec, 12).unwrap().to_json();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn shape_follows_spec() {
        let spec = RandomNetworkSpec {
            parameters: 4,
            activities: 6,
            ..Default::default()
        };
        let net = random_network(&spec, 3).unwrap();
        assert_eq!(net.nodes().len(), 10);
        assert_eq!(net.activity_scope().len(), 6);
        assert_eq!(net.targets(), &[NodeId::new("theta1")]);
        for n in &net.nodes()[1..4] {
            assert!(!n.parents.is_empty());
        }
    }
}
