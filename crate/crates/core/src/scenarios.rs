//! Built-in scenarios: `dnn57`, `irreducible100` and `random-tv`.
//!
//! Initial opinions are not published, so each built-in draws them once from
//! a fixed seed and rounds to three decimals; the resulting configs are plain
//! [`ScenarioConfig`] values and round-trip through JSON.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{
    BiasSpec, CommunitySpec, EdgeRecord, GraphSpec, InfluenceSpec, RandomGraphSpec, RunSpec, ScenarioConfig,
    UniformInfluence, UtilitySpec, WeightSpec,
};
use crate::graph::{AgentId, LayeringMode};

pub const NAMES: [&str; 3] = ["dnn57", "irreducible100", "random-tv"];

/// Utility peak used by every built-in.
pub const MU: [f64; 2] = [0.25, 0.6];
pub const COV_SCALE: f64 = 0.1;

/// Corners of the stubborn rectangle in `irreducible100`.
pub const RECTANGLE: [[f64; 2]; 4] = [[0.15, 0.45], [0.4, 0.45], [0.4, 0.75], [0.15, 0.75]];

fn ids(v: impl IntoIterator<Item = usize>) -> Vec<AgentId> {
    v.into_iter().map(AgentId).collect()
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn gaussian() -> Option<UtilitySpec> {
    Some(UtilitySpec::Gaussian { mean: MU.to_vec(), cov_scale: Some(COV_SCALE), covariance: None })
}

fn uniform_box(rng: &mut ChaCha8Rng, lo: [f64; 2], hi: [f64; 2]) -> Vec<f64> {
    (0..2).map(|j| round3(rng.random_range(lo[j]..=hi[j]))).collect()
}

/// Regular agents of block `b` (0-based) in layer `l` of the 4-block DNN.
fn dnn_layer(b: usize, l: usize) -> Vec<usize> {
    let base = 6 + 13 * b;
    match l {
        1 => vec![base],
        2 => (base + 1..=base + 3).collect(),
        _ => (base + 4..=base + 12).collect(),
    }
}

/// 57 agents: stubborn `1..=5` around the utility peak, then four DNN blocks
/// of 13 regular agents (1 + 3 + 9 per layer). Layer-1 agents hear every
/// stubborn agent; a layer-2 agent hears the layer-1 agents of its own and
/// the next block; a layer-3 agent hears the layer-2 agents of its block.
pub fn dnn57() -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(57);
    let stubborn = [[0.25, 0.6], [0.2, 0.55], [0.3, 0.55], [0.3, 0.65], [0.2, 0.65]];
    let mut opinions: Vec<Vec<f64>> = stubborn.iter().map(|p| p.to_vec()).collect();
    for _ in 6..=57 {
        opinions.push(uniform_box(&mut rng, [0.0, 0.0], [1.0, 1.0]));
    }
    let mut edges = Vec::new();
    for b in 0..4 {
        for i in dnn_layer(b, 1) {
            edges.push(EdgeRecord { agent: AgentId(i), neighbors: ids(1..=5) });
        }
        let feeders: Vec<usize> = dnn_layer(b, 1).into_iter().chain(dnn_layer((b + 1) % 4, 1)).collect();
        for i in dnn_layer(b, 2) {
            edges.push(EdgeRecord { agent: AgentId(i), neighbors: ids(feeders.clone()) });
        }
        for i in dnn_layer(b, 3) {
            edges.push(EdgeRecord { agent: AgentId(i), neighbors: ids(dnn_layer(b, 2)) });
        }
    }
    edges.sort_by_key(|r| r.agent);
    let layers = (1..=3).map(|l| {
        let mut v: Vec<usize> = (0..4).flat_map(|b| dnn_layer(b, l)).collect();
        v.sort_unstable();
        ids(v)
    });
    ScenarioConfig {
        name: "dnn57".into(),
        community: CommunitySpec { subjects: 2, agents: 57, stubborn: ids(1..=5) },
        opinions,
        graph: GraphSpec::Layered { layers: layers.collect(), mode: LayeringMode::Strict, edges },
        weights: WeightSpec::Reward { initial_bias: None },
        utility: gaussian(),
        run: RunSpec { horizon: 7, epsilon: 1e-9, seed: 0, stop_early: false },
    }
}

fn hundred_agent_opinions(rng: &mut ChaCha8Rng, regular_lo: [f64; 2], regular_hi: [f64; 2]) -> Vec<Vec<f64>> {
    (1..=96).map(|_| uniform_box(rng, regular_lo, regular_hi)).collect()
}

/// In-neighborhoods for `irreducible100`: regular agent `i` hears `i − 1`
/// (agent 1 hears 96), closing a ring over all regular agents, plus two
/// further distinct agents drawn from `V \ {i}`.
fn ring_edges(rng: &mut ChaCha8Rng) -> Vec<EdgeRecord> {
    (1..=96)
        .map(|i| {
            let prev = if i == 1 { 96 } else { i - 1 };
            let pool: Vec<usize> = (1..=100).filter(|&j| j != i && j != prev).collect();
            let mut neighbors = vec![AgentId(prev)];
            neighbors.extend(rand::seq::index::sample(rng, pool.len(), 2).iter().map(|p| AgentId(pool[p])));
            neighbors.sort();
            EdgeRecord { agent: AgentId(i), neighbors }
        })
        .collect()
}

/// 100 agents: regular `1..=96` spread over the unit square, stubborn
/// `97..=100` at the corners of [`RECTANGLE`], a fixed irreducible graph with
/// three in-neighbors each and reward-driven weights. With `zero_bias` the
/// weights are instead fixed: uniform influence and `λ ≡ 0`.
pub fn irreducible100(zero_bias: bool) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut opinions = hundred_agent_opinions(&mut rng, [0.0, 0.0], [1.0, 1.0]);
    opinions.extend(RECTANGLE.iter().map(|p| p.to_vec()));
    let edges = ring_edges(&mut rng);
    let weights = if zero_bias {
        WeightSpec::Fixed { bias: BiasSpec::Constant(0.0), influence: InfluenceSpec::Uniform(UniformInfluence::Uniform) }
    } else {
        WeightSpec::Reward { initial_bias: None }
    };
    ScenarioConfig {
        name: if zero_bias { "irreducible100-zero-bias" } else { "irreducible100" }.into(),
        community: CommunitySpec { subjects: 2, agents: 100, stubborn: ids(97..=100) },
        opinions,
        graph: GraphSpec::Static { edges },
        weights,
        utility: gaussian(),
        run: RunSpec { horizon: 2000, epsilon: 1e-9, seed: 0, stop_early: true },
    }
}

/// Out-degree of the random time-varying built-in.
pub const RANDOM_TV_DEGREE: usize = 10;
pub const RANDOM_TV_SEED: u64 = 7;

/// The `irreducible100` community (regular agents spread over the unit
/// square, stubborn agents at the corners of [`RECTANGLE`]) with fresh random
/// in-neighborhoods at every step and reward-driven weights.
pub fn random_tv() -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(RANDOM_TV_SEED);
    let mut opinions = hundred_agent_opinions(&mut rng, [0.0, 0.0], [1.0, 1.0]);
    opinions.extend(RECTANGLE.iter().map(|p| p.to_vec()));
    ScenarioConfig {
        name: "random-tv".into(),
        community: CommunitySpec { subjects: 2, agents: 100, stubborn: ids(97..=100) },
        opinions,
        graph: GraphSpec::Random(RandomGraphSpec {
            out_degree: RANDOM_TV_DEGREE,
            allow_stubborn_prob: 1.0,
            require_reachability: true,
        }),
        weights: WeightSpec::Reward { initial_bias: None },
        utility: gaussian(),
        run: RunSpec { horizon: 20, epsilon: 1e-9, seed: RANDOM_TV_SEED, stop_early: false },
    }
}

/// Looks up a built-in by name.
pub fn builtin(name: &str, zero_bias: bool) -> Option<ScenarioConfig> {
    match name {
        "dnn57" => Some(dnn57()),
        "irreducible100" => Some(irreducible100(zero_bias)),
        "random-tv" => Some(random_tv()),
        _ => None,
    }
}
