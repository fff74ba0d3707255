#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use fjsteer::graph::all_reachable;
use fjsteer::{
    AgentId, BiasMatrix, Community, DenseMatrix, EdgeSet, InfluenceMatrix, InputVector, LayerPartition, LayeringMode,
    SystemMatrices,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

pub struct RandomSystem {
    pub community: Community,
    pub edges: EdgeSet,
    pub mats: SystemMatrices<f64>,
    pub u: InputVector<f64>,
}

fn random_opinions<R: Rng>(rng: &mut R, agents: usize, subjects: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(agents, subjects, |_, _| rng.random_range(0.0..=1.0))
}

fn random_weights<R: Rng>(
    rng: &mut R,
    edges: &EdgeSet,
) -> BTreeMap<AgentId, BTreeMap<AgentId, f64>> {
    edges
        .iter()
        .map(|(i, ns)| {
            let raw: Vec<f64> = ns.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            (i, ns.iter().copied().zip(raw.into_iter().map(|w| w / total)).collect())
        })
        .collect()
}

fn random_bias<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..0.9) }).collect()
}

fn assemble<R: Rng>(rng: &mut R, community: Community, edges: EdgeSet, bias: Vec<f64>) -> RandomSystem {
    let w = InfluenceMatrix::from_weights(&community, &edges, &random_weights(rng, &edges)).unwrap();
    let mats = SystemMatrices::assemble(&w, &BiasMatrix::new(bias).unwrap()).unwrap();
    let u = InputVector::from_opinions(&community, &random_opinions(rng, community.agents(), community.subjects()))
        .unwrap();
    RandomSystem { community, edges, mats, u }
}

/// Random community with `2..=max_agents` agents, a random stubborn subset,
/// random in-neighborhoods redrawn until every regular agent is reachable.
pub fn random_reachable<R: Rng>(rng: &mut R, max_agents: usize, subjects: usize) -> RandomSystem {
    let n = rng.random_range(2..=max_agents);
    let ns = rng.random_range(1..=3.min(n - 1));
    let mut ids: Vec<usize> = (1..=n).collect();
    ids.shuffle(rng);
    let community = Community::new(subjects, n, ids[..ns].iter().copied().map(AgentId)).unwrap();
    let edges = loop {
        let map: BTreeMap<AgentId, BTreeSet<AgentId>> = community
            .regular()
            .iter()
            .map(|&i| {
                let pool: Vec<AgentId> = (1..=n).map(AgentId).filter(|&j| j != i).collect();
                let k = rng.random_range(1..=3.min(pool.len()));
                (i, pool.choose_multiple(rng, k).copied().collect())
            })
            .collect();
        let e = EdgeSet::new(&community, 0, map).unwrap();
        if all_reachable(&e) {
            break e;
        }
    };
    let bias = random_bias(rng, community.n_regular());
    assemble(rng, community, edges, bias)
}

pub struct LayeredSystem {
    pub system: RandomSystem,
    pub partition: LayerPartition,
    pub mode: LayeringMode,
}

/// Random layered system over a shuffled agent numbering. Only layer 1
/// listens to stubborn agents. Strict mode draws neighbors from earlier
/// layers; weak mode may also use the agent's own layer.
pub fn random_layered<R: Rng>(rng: &mut R, mode: LayeringMode, subjects: usize, zero_bias: bool) -> LayeredSystem {
    let ns = rng.random_range(1..=3);
    let depth = rng.random_range(2..=4);
    let sizes: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=3)).collect();
    let n = ns + sizes.iter().sum::<usize>();
    let mut ids: Vec<AgentId> = (1..=n).map(AgentId).collect();
    ids.shuffle(rng);
    let stubborn: Vec<AgentId> = ids[..ns].to_vec();
    let mut layers: Vec<Vec<AgentId>> = Vec::new();
    let mut at = ns;
    for &s in &sizes {
        let mut l = ids[at..at + s].to_vec();
        l.sort();
        layers.push(l);
        at += s;
    }
    let community = Community::new(subjects, n, stubborn.iter().copied()).unwrap();
    let mut map = BTreeMap::new();
    for (l, layer) in layers.iter().enumerate() {
        for &i in layer {
            let mut pool: Vec<AgentId> = if l == 0 { stubborn.clone() } else { layers[..l].concat() };
            if mode == LayeringMode::Weak {
                pool.extend(layer.iter().copied().filter(|&j| j != i));
            }
            let k = rng.random_range(1..=3.min(pool.len()));
            let mut chosen: BTreeSet<AgentId> = pool.choose_multiple(rng, k).copied().collect();
            // keep every agent reachable: one neighbor from the layer below
            let below: &[AgentId] = if l == 0 { &stubborn } else { &layers[l - 1] };
            chosen.insert(*below.choose(rng).unwrap());
            map.insert(i, chosen);
        }
    }
    let edges = EdgeSet::new(&community, 0, map).unwrap();
    let partition = LayerPartition::for_community(&community, layers).unwrap();
    let bias = if zero_bias { vec![0.0; community.n_regular()] } else { random_bias(rng, community.n_regular()) };
    LayeredSystem { system: assemble(rng, community, edges, bias), partition, mode }
}
