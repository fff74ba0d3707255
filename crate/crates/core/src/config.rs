//! Scenario files: a JSON document with top-level keys `name`, `community`,
//! `opinions`, `graph`, `weights`, `utility` and `run`.
//!
//! ```json
//! {
//!   "name": "toy",
//!   "community": { "subjects": 1, "agents": 2, "stubborn": [2] },
//!   "opinions": [[0.0], [1.0]],
//!   "graph": { "kind": "static", "edges": [{ "agent": 1, "neighbors": [2] }] },
//!   "weights": { "mode": "fixed", "bias": 0.5, "influence": "uniform" },
//!   "utility": { "kind": "gaussian", "mean": [0.5], "cov_scale": 0.1 },
//!   "run": { "horizon": 50, "epsilon": 1e-9, "seed": 0, "stop_early": true }
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fj::{BiasMatrix, InfluenceMatrix, ModelError};
use crate::graph::{validate_layering, AgentId, Community, EdgeSet, GraphError, LayerPartition, LayeringMode};
use crate::linalg::DenseMatrix;
use crate::reward::{GridField, RewardError, UtilityField};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot access {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed scenario JSON")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("graph")]
    Graph(#[from] GraphError),
    #[error("model")]
    Model(#[from] ModelError),
    #[error("utility")]
    Utility(#[from] RewardError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunitySpec {
    pub subjects: usize,
    pub agents: usize,
    pub stubborn: Vec<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub agent: AgentId,
    pub neighbors: Vec<AgentId>,
}

fn default_prob() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomGraphSpec {
    /// In-neighbors drawn per regular agent per step.
    pub out_degree: usize,
    /// Probability that an agent's candidate pool includes stubborn agents.
    #[serde(default = "default_prob")]
    pub allow_stubborn_prob: f64,
    #[serde(default = "default_true")]
    pub require_reachability: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Static {
        edges: Vec<EdgeRecord>,
    },
    Layered {
        layers: Vec<Vec<AgentId>>,
        #[serde(default = "strict")]
        mode: LayeringMode,
        edges: Vec<EdgeRecord>,
    },
    Random(RandomGraphSpec),
}

fn strict() -> LayeringMode {
    LayeringMode::Strict
}

/// A single bias for every regular agent or one per regular agent in
/// ascending id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BiasSpec {
    Constant(f64),
    PerAgent(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniformInfluence {
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightRecord {
    pub agent: AgentId,
    /// `[neighbor, weight]` pairs.
    pub weights: Vec<(AgentId, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InfluenceSpec {
    Uniform(UniformInfluence),
    Explicit(Vec<WeightRecord>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Fixed {
        bias: BiasSpec,
        influence: InfluenceSpec,
    },
    Reward {
        /// Row used by the zero-reward fallback before any update happened.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial_bias: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySpec {
    Gaussian {
        mean: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cov_scale: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        covariance: Option<Vec<Vec<f64>>>,
    },
    /// Lattice CSV, resolved relative to the scenario file.
    Grid {
        file: PathBuf,
    },
}

fn default_horizon() -> usize {
    200
}

fn default_epsilon() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub stop_early: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self { horizon: default_horizon(), epsilon: default_epsilon(), seed: 0, stop_early: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub community: CommunitySpec,
    /// `N × n`, row `k` holding agent `k + 1`.
    pub opinions: Vec<Vec<f64>>,
    pub graph: GraphSpec,
    pub weights: WeightSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySpec>,
    #[serde(default)]
    pub run: RunSpec,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn load(path: &Path) -> Result<(Self, Option<PathBuf>), ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Ok((Self::from_json(&text)?, path.parent().map(Path::to_path_buf)))
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        fs::write(path, self.to_json()).map_err(|source| ConfigError::Io { path: path.into(), source })
    }

    /// Validates the document and builds the runtime objects. Relative grid
    /// paths are resolved against `base`.
    pub fn resolve(&self, base: Option<&Path>) -> Result<Scenario, ConfigError> {
        let c = &self.community;
        let community = Community::new(c.subjects, c.agents, c.stubborn.iter().copied())?;
        if self.opinions.len() != c.agents || self.opinions.iter().any(|r| r.len() != c.subjects) {
            return Err(ConfigError::Invalid(format!("opinions must be {} rows of {} values", c.agents, c.subjects)));
        }
        let opinions = DenseMatrix::from_rows(&self.opinions)
            .map_err(|e| ConfigError::Invalid(format!("opinions: {e}")))?;
        if let Some(v) = opinions.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ConfigError::Invalid(format!("opinion {v} outside [0, 1]")));
        }
        if self.run.horizon < 1 {
            return Err(ConfigError::Invalid("run.horizon must be at least 1".into()));
        }
        if !(self.run.epsilon > 0.0) {
            return Err(ConfigError::Invalid("run.epsilon must be positive".into()));
        }
        let records = |edges: &[EdgeRecord]| {
            EdgeSet::from_records(&community, 0, edges.iter().map(|r| (r.agent, r.neighbors.iter().copied())))
        };
        let graph = match &self.graph {
            GraphSpec::Static { edges } => GraphPlan::Static { edges: records(edges)?, layers: None },
            GraphSpec::Layered { layers, mode, edges } => {
                let edges = records(edges)?;
                let part = LayerPartition::for_community(&community, layers.clone())?;
                if !validate_layering(&edges, &part, *mode)? {
                    return Err(ConfigError::Invalid(format!("edges do not satisfy the declared {mode:?} layering")));
                }
                GraphPlan::Static { edges, layers: Some((part, *mode)) }
            }
            GraphSpec::Random(spec) => {
                if spec.out_degree < 1 || spec.out_degree >= c.agents {
                    return Err(ConfigError::Invalid(format!(
                        "out_degree must lie in [1, {}], got {}",
                        c.agents - 1,
                        spec.out_degree
                    )));
                }
                if !(0.0..=1.0).contains(&spec.allow_stubborn_prob) {
                    return Err(ConfigError::Invalid("allow_stubborn_prob must lie in [0, 1]".into()));
                }
                GraphPlan::Random(spec.clone())
            }
        };
        let weights = match &self.weights {
            WeightSpec::Fixed { bias, influence } => {
                let bias = match bias {
                    BiasSpec::Constant(v) => BiasMatrix::constant(community.n_regular(), *v)?,
                    BiasSpec::PerAgent(vs) => {
                        if vs.len() != community.n_regular() {
                            return Err(ConfigError::Invalid(format!(
                                "bias lists {} values for {} regular agents",
                                vs.len(),
                                community.n_regular()
                            )));
                        }
                        BiasMatrix::new(vs.clone())?
                    }
                };
                let influence = match (influence, &graph) {
                    (InfluenceSpec::Uniform(_), _) => None,
                    (InfluenceSpec::Explicit(_), GraphPlan::Random(_)) => {
                        return Err(ConfigError::Invalid("random graphs take uniform influence only".into()))
                    }
                    (InfluenceSpec::Explicit(rows), GraphPlan::Static { edges, .. }) => {
                        let mut map = std::collections::BTreeMap::new();
                        for r in rows {
                            if map.insert(r.agent, r.weights.iter().copied().collect()).is_some() {
                                return Err(GraphError::Duplicate(r.agent).into());
                            }
                        }
                        Some(InfluenceMatrix::from_weights(&community, edges, &map)?)
                    }
                };
                WeightPlan::Fixed { bias, influence }
            }
            WeightSpec::Reward { initial_bias } => {
                let lambda = initial_bias.unwrap_or(0.0);
                if !(0.0..=1.0).contains(&lambda) {
                    return Err(ConfigError::Invalid("initial_bias must lie in [0, 1]".into()));
                }
                WeightPlan::Reward { initial_bias: lambda }
            }
        };
        let utility = match &self.utility {
            None => None,
            Some(UtilitySpec::Gaussian { mean, cov_scale, covariance }) => {
                if mean.len() != c.subjects {
                    return Err(ConfigError::Invalid("utility mean length differs from subjects".into()));
                }
                Some(match (cov_scale, covariance) {
                    (Some(_), Some(_)) => {
                        return Err(ConfigError::Invalid("give cov_scale or covariance, not both".into()))
                    }
                    (_, Some(rows)) => {
                        let cov = DenseMatrix::from_rows(rows)
                            .map_err(|e| ConfigError::Invalid(format!("covariance: {e}")))?;
                        UtilityField::gaussian(mean.clone(), &cov)?
                    }
                    (scale, None) => UtilityField::isotropic_gaussian(mean.clone(), scale.unwrap_or(0.1))?,
                })
            }
            Some(UtilitySpec::Grid { file }) => {
                let path = match base {
                    Some(b) if file.is_relative() => b.join(file),
                    _ => file.clone(),
                };
                let f = fs::File::open(&path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                let grid = GridField::from_csv(f)?;
                let field = UtilityField::grid(grid);
                if crate::reward::Utility::subjects(&field) != c.subjects {
                    return Err(ConfigError::Invalid("utility grid dimension differs from subjects".into()));
                }
                Some(field)
            }
        };
        if matches!(weights, WeightPlan::Reward { .. }) && utility.is_none() {
            return Err(ConfigError::Invalid("reward-driven weights need a utility".into()));
        }
        Ok(Scenario { name: self.name.clone(), community, opinions, graph, weights, utility, run: self.run.clone() })
    }
}

#[derive(Debug, Clone)]
pub enum GraphPlan {
    Static { edges: EdgeSet, layers: Option<(LayerPartition, LayeringMode)> },
    Random(RandomGraphSpec),
}

#[derive(Debug, Clone)]
pub enum WeightPlan {
    /// `influence: None` means uniform over each step's in-neighbors.
    Fixed { bias: BiasMatrix<f64>, influence: Option<InfluenceMatrix<f64>> },
    Reward { initial_bias: f64 },
}

/// A validated scenario ready to simulate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub community: Community,
    pub opinions: DenseMatrix<f64>,
    pub graph: GraphPlan,
    pub weights: WeightPlan,
    pub utility: Option<UtilityField<f64>>,
    pub run: RunSpec,
}

impl Scenario {
    /// Whether `L(k)` cannot change from step to step.
    pub fn matrices_static(&self) -> bool {
        matches!(self.graph, GraphPlan::Static { .. }) && matches!(self.weights, WeightPlan::Fixed { .. })
    }

    pub fn is_random(&self) -> bool {
        matches!(self.graph, GraphPlan::Random(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"{
        "name": "toy",
        "community": { "subjects": 1, "agents": 2, "stubborn": [2] },
        "opinions": [[0.0], [1.0]],
        "graph": { "kind": "static", "edges": [{ "agent": 1, "neighbors": [2] }] },
        "weights": { "mode": "fixed", "bias": 0.5, "influence": "uniform" }
    }"#;

    #[test]
    fn defaults_and_roundtrip() {
        let cfg = ScenarioConfig::from_json(TOY).unwrap();
        assert_eq!(cfg.run, RunSpec::default());
        assert_eq!(cfg.run.horizon, 200);
        assert_eq!(cfg.run.epsilon, 1e-9);
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let sc = cfg.resolve(None).unwrap();
        assert!(sc.matrices_static());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let extra = TOY.replace("\"name\"", "\"nmae\"");
        assert!(matches!(ScenarioConfig::from_json(&extra), Err(ConfigError::Parse(_))));
        let mut cfg = ScenarioConfig::from_json(TOY).unwrap();
        cfg.run.horizon = 0;
        assert!(matches!(cfg.resolve(None), Err(ConfigError::Invalid(_))));
        let mut cfg = ScenarioConfig::from_json(TOY).unwrap();
        cfg.opinions[0][0] = 1.5;
        assert!(matches!(cfg.resolve(None), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn agent_without_neighbors_is_named() {
        let cfg = ScenarioConfig::from_json(&TOY.replace(r#"[{ "agent": 1, "neighbors": [2] }]"#, "[]")).unwrap();
        let err = cfg.resolve(None).unwrap_err();
        assert!(matches!(err, ConfigError::Graph(GraphError::EmptyNeighborhood(AgentId(1)))), "{err}");
    }

    #[test]
    fn reward_mode_needs_utility() {
        let cfg = ScenarioConfig::from_json(&TOY.replace(
            r#"{ "mode": "fixed", "bias": 0.5, "influence": "uniform" }"#,
            r#"{ "mode": "reward" }"#,
        ))
        .unwrap();
        assert!(matches!(cfg.resolve(None), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn random_degree_bounds() {
        let cfg = ScenarioConfig::from_json(&TOY.replace(
            r#"{ "kind": "static", "edges": [{ "agent": 1, "neighbors": [2] }] }"#,
            r#"{ "kind": "random", "out_degree": 2 }"#,
        ))
        .unwrap();
        assert!(matches!(cfg.resolve(None), Err(ConfigError::Invalid(_))));
    }
}
