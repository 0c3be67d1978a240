use serde::{Deserialize, Serialize};
use verispace_core::presets;
use verispace_core::scenario::{DeploymentRule, DEFAULT_HORIZON};
use verispace_core::{BayesNetwork, CostModel, Result, ReworkRule, Scenario};

/// How a session names its scenario: a bundled preset, or an inline network
/// and cost model. A bare string is shorthand for `{"preset": name}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", from = "ScenarioInput")]
pub struct ScenarioRef {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<BayesNetwork>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub costs: Option<CostModel>,
    pub rule: String,
    /// Custom lower thresholds for `rule`; otherwise `rule` names a bundled rule.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    pub horizon: usize,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioInput {
    Name(String),
    Full(Box<Fields>),
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct Fields {
    preset: Option<String>,
    network: Option<BayesNetwork>,
    costs: Option<CostModel>,
    rule: Option<String>,
    thresholds: Option<Vec<f64>>,
    horizon: Option<usize>,
}

impl From<ScenarioInput> for ScenarioRef {
    fn from(input: ScenarioInput) -> Self {
        let f = match input {
            ScenarioInput::Name(name) => Fields {
                preset: Some(name),
                network: None,
                costs: None,
                rule: None,
                thresholds: None,
                horizon: None,
            },
            ScenarioInput::Full(f) => *f,
        };
        ScenarioRef {
            preset: f.preset,
            network: f.network,
            costs: f.costs,
            rule: f.rule.unwrap_or_else(|| "Low".to_owned()),
            thresholds: f.thresholds,
            horizon: f.horizon.unwrap_or(DEFAULT_HORIZON),
        }
    }
}

impl ScenarioRef {
    pub fn preset(name: &str, rule: &str) -> Self {
        ScenarioRef {
            preset: Some(name.to_owned()),
            network: None,
            costs: None,
            rule: rule.to_owned(),
            thresholds: None,
            horizon: DEFAULT_HORIZON,
        }
    }

    pub fn resolve(&self) -> Result<Scenario> {
        let rule = match &self.thresholds {
            Some(h) => ReworkRule::new(self.rule.clone(), h.clone())?,
            None => ReworkRule::named(&self.rule)?,
        };
        let (preset_net, preset_costs) = match &self.preset {
            Some(name) => {
                let (n, c) = presets::preset(name)?;
                (Some(n), Some(c))
            }
            None => (None, None),
        };
        let network = self.network.clone().or(preset_net);
        let costs = self.costs.clone().or(preset_costs);
        let (Some(network), Some(costs)) = (network, costs) else {
            return Err(verispace_core::Error::InvalidScenario(
                "a scenario needs a preset or both a network and costs".into(),
            ));
        };
        Scenario::new(
            network,
            costs,
            rule,
            DeploymentRule::default(),
            self.horizon,
        )
    }
}
