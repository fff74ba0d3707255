//! Community membership, per-step influence edges, reachability and layering.
//!
//! Agents carry 1-based ids. Internally the regular agents are indexed by
//! their position in the ascending list of regular ids, and the stubborn
//! agents likewise; every matrix in the crate uses those two index spaces.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("community needs at least one subject")]
    NoSubjects,
    #[error("community needs at least one regular and one stubborn agent")]
    DegenerateSplit,
    #[error("unknown agent id {0}")]
    UnknownAgent(AgentId),
    #[error("agent {0} listed twice")]
    Duplicate(AgentId),
    #[error("stubborn agent {0} takes no input")]
    StubbornQueried(AgentId),
    #[error("regular agent {0} has no in-neighbors")]
    EmptyNeighborhood(AgentId),
    #[error("agent {0} lists itself as an in-neighbor")]
    SelfLoop(AgentId),
    #[error("layer {0} is empty")]
    EmptyLayer(usize),
    #[error("layer partition does not match the regular agents: {0}")]
    PartitionMismatch(String),
}

/// 1-based agent identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub usize);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Position among the regular agents.
    Regular(usize),
    /// Position among the stubborn agents.
    Stubborn(usize),
}

/// Agent universe split into stubborn leaders and regular followers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Community {
    subjects: usize,
    regular: Vec<AgentId>,
    stubborn: Vec<AgentId>,
    roles: Vec<Role>,
}

impl Community {
    /// Builds a community of `agents` agents on `subjects` subjects whose
    /// stubborn members are `stubborn`; everyone else is regular.
    pub fn new(
        subjects: usize,
        agents: usize,
        stubborn: impl IntoIterator<Item = AgentId>,
    ) -> Result<Self, GraphError> {
        if subjects == 0 {
            return Err(GraphError::NoSubjects);
        }
        let mut is_stubborn = vec![false; agents];
        for id in stubborn {
            if id.0 == 0 || id.0 > agents {
                return Err(GraphError::UnknownAgent(id));
            }
            if std::mem::replace(&mut is_stubborn[id.0 - 1], true) {
                return Err(GraphError::Duplicate(id));
            }
        }
        let mut regular = Vec::new();
        let mut stubborn = Vec::new();
        let mut roles = Vec::with_capacity(agents);
        for (k, &s) in is_stubborn.iter().enumerate() {
            if s {
                roles.push(Role::Stubborn(stubborn.len()));
                stubborn.push(AgentId(k + 1));
            } else {
                roles.push(Role::Regular(regular.len()));
                regular.push(AgentId(k + 1));
            }
        }
        if regular.is_empty() || stubborn.is_empty() {
            return Err(GraphError::DegenerateSplit);
        }
        Ok(Self { subjects, regular, stubborn, roles })
    }

    /// Regular agents `1..=n_regular`, stubborn agents after them.
    pub fn with_regular_prefix(
        subjects: usize,
        agents: usize,
        n_regular: usize,
    ) -> Result<Self, GraphError> {
        Self::new(subjects, agents, (n_regular + 1..=agents).map(AgentId))
    }

    pub fn subjects(&self) -> usize {
        self.subjects
    }

    pub fn agents(&self) -> usize {
        self.roles.len()
    }

    pub fn n_regular(&self) -> usize {
        self.regular.len()
    }

    pub fn n_stubborn(&self) -> usize {
        self.stubborn.len()
    }

    /// Regular ids, ascending.
    pub fn regular(&self) -> &[AgentId] {
        &self.regular
    }

    /// Stubborn ids, ascending.
    pub fn stubborn(&self) -> &[AgentId] {
        &self.stubborn
    }

    pub fn role(&self, id: AgentId) -> Result<Role, GraphError> {
        id.0.checked_sub(1)
            .and_then(|k| self.roles.get(k))
            .copied()
            .ok_or(GraphError::UnknownAgent(id))
    }

    pub fn regular_index(&self, id: AgentId) -> Option<usize> {
        match self.role(id) {
            Ok(Role::Regular(r)) => Some(r),
            _ => None,
        }
    }

    pub fn stubborn_index(&self, id: AgentId) -> Option<usize> {
        match self.role(id) {
            Ok(Role::Stubborn(s)) => Some(s),
            _ => None,
        }
    }

    pub fn is_stubborn(&self, id: AgentId) -> bool {
        self.stubborn_index(id).is_some()
    }

    /// Column of `id` in the influence matrix: regular agents first, then stubborn.
    pub fn influence_column(&self, id: AgentId) -> Result<usize, GraphError> {
        Ok(match self.role(id)? {
            Role::Regular(r) => r,
            Role::Stubborn(s) => self.n_regular() + s,
        })
    }

    /// Agent id for a column of the influence matrix.
    pub fn agent_at_column(&self, col: usize) -> AgentId {
        if col < self.n_regular() {
            self.regular[col]
        } else {
            self.stubborn[col - self.n_regular()]
        }
    }
}

/// In-neighbor sets of every regular agent at one time step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    step: usize,
    agents: usize,
    in_neighbors: BTreeMap<AgentId, BTreeSet<AgentId>>,
}

impl EdgeSet {
    /// Validates `in_neighbors` against `community`: exactly the regular agents
    /// are keys, every set is nonempty, no self loops, all ids known.
    pub fn new(
        community: &Community,
        step: usize,
        in_neighbors: BTreeMap<AgentId, BTreeSet<AgentId>>,
    ) -> Result<Self, GraphError> {
        for (&i, ns) in &in_neighbors {
            match community.role(i)? {
                Role::Stubborn(_) => return Err(GraphError::StubbornQueried(i)),
                Role::Regular(_) => {}
            }
            if ns.is_empty() {
                return Err(GraphError::EmptyNeighborhood(i));
            }
            if ns.contains(&i) {
                return Err(GraphError::SelfLoop(i));
            }
            for &j in ns {
                community.role(j)?;
            }
        }
        if let Some(&missing) = community.regular().iter().find(|i| !in_neighbors.contains_key(i)) {
            return Err(GraphError::EmptyNeighborhood(missing));
        }
        Ok(Self { step, agents: community.agents(), in_neighbors })
    }

    /// Builds from `(agent, neighbors)` records; an agent may appear once.
    pub fn from_records<I, N>(community: &Community, step: usize, records: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (AgentId, N)>,
        N: IntoIterator<Item = AgentId>,
    {
        let mut map = BTreeMap::new();
        for (i, ns) in records {
            if map.insert(i, ns.into_iter().collect::<BTreeSet<_>>()).is_some() {
                return Err(GraphError::Duplicate(i));
            }
        }
        Self::new(community, step, map)
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn with_step(mut self, step: usize) -> Self {
        self.step = step;
        self
    }

    /// `N_i(k)` for regular agent `i`.
    pub fn in_neighbors(&self, i: AgentId) -> Result<&BTreeSet<AgentId>, GraphError> {
        if i.0 == 0 || i.0 > self.agents {
            return Err(GraphError::UnknownAgent(i));
        }
        self.in_neighbors.get(&i).ok_or(GraphError::StubbornQueried(i))
    }

    pub fn is_regular(&self, i: AgentId) -> bool {
        self.in_neighbors.contains_key(&i)
    }

    /// Regular agents, ascending.
    pub fn regular_agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.in_neighbors.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (AgentId, &BTreeSet<AgentId>)> + '_ {
        self.in_neighbors.iter().map(|(&i, ns)| (i, ns))
    }

    pub fn edge_count(&self) -> usize {
        self.in_neighbors.values().map(BTreeSet::len).sum()
    }

    /// Copy with the extra influence edge `from -> to`.
    pub fn with_edge(&self, from: AgentId, to: AgentId) -> Result<Self, GraphError> {
        if from.0 == 0 || from.0 > self.agents {
            return Err(GraphError::UnknownAgent(from));
        }
        if from == to {
            return Err(GraphError::SelfLoop(to));
        }
        let mut out = self.clone();
        out.in_neighbors
            .get_mut(&to)
            .ok_or(GraphError::StubbornQueried(to))?
            .insert(from);
        Ok(out)
    }

    /// Stable hex digest of the adjacency, used to tag trajectory steps.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (i, ns) in &self.in_neighbors {
            h.update((i.0 as u64).to_le_bytes());
            h.update((ns.len() as u64).to_le_bytes());
            for j in ns {
                h.update((j.0 as u64).to_le_bytes());
            }
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// For each regular agent, whether some stubborn agent reaches it along
/// influence edges (`j -> i` whenever `j ∈ N_i`).
pub fn stubborn_reachable(edges: &EdgeSet) -> BTreeMap<AgentId, bool> {
    let mut out_edges: BTreeMap<AgentId, Vec<AgentId>> = BTreeMap::new();
    for (i, ns) in edges.iter() {
        for &j in ns {
            out_edges.entry(j).or_default().push(i);
        }
    }
    let mut reached: BTreeMap<AgentId, bool> = edges.regular_agents().map(|i| (i, false)).collect();
    let mut queue: VecDeque<AgentId> = (1..=edges.agents())
        .map(AgentId)
        .filter(|id| !edges.is_regular(*id))
        .collect();
    while let Some(j) = queue.pop_front() {
        for &i in out_edges.get(&j).map(Vec::as_slice).unwrap_or(&[]) {
            if let Some(seen) = reached.get_mut(&i) {
                if !*seen {
                    *seen = true;
                    queue.push_back(i);
                }
            }
        }
    }
    reached
}

pub fn all_reachable(edges: &EdgeSet) -> bool {
    stubborn_reachable(edges).values().all(|&r| r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayeringMode {
    /// Layer `l` may listen to stubborn agents and layers `1..=l`.
    Weak,
    /// Layer 1 listens only to stubborn agents, layer `l > 1` to layers `< l`
    /// (and stubborn agents).
    Strict,
}

/// Ordered disjoint groups `V_1..V_M` of regular agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<AgentId>>", into = "Vec<Vec<AgentId>>")]
pub struct LayerPartition {
    layers: Vec<Vec<AgentId>>,
    layer_of: BTreeMap<AgentId, usize>,
}

impl LayerPartition {
    pub fn new(layers: Vec<Vec<AgentId>>) -> Result<Self, GraphError> {
        let mut layer_of = BTreeMap::new();
        let mut sorted = Vec::with_capacity(layers.len());
        for (l, mut layer) in layers.into_iter().enumerate() {
            if layer.is_empty() {
                return Err(GraphError::EmptyLayer(l + 1));
            }
            layer.sort_unstable();
            for &i in &layer {
                if layer_of.insert(i, l).is_some() {
                    return Err(GraphError::Duplicate(i));
                }
            }
            sorted.push(layer);
        }
        if sorted.is_empty() {
            return Err(GraphError::EmptyLayer(1));
        }
        Ok(Self { layers: sorted, layer_of })
    }

    /// Like [`LayerPartition::new`] but also checks the layers cover the
    /// community's regular agents exactly.
    pub fn for_community(community: &Community, layers: Vec<Vec<AgentId>>) -> Result<Self, GraphError> {
        let part = Self::new(layers)?;
        part.check_cover(community.regular().iter().copied())?;
        Ok(part)
    }

    fn check_cover(&self, regular: impl Iterator<Item = AgentId>) -> Result<(), GraphError> {
        let regular: BTreeSet<AgentId> = regular.collect();
        let covered: BTreeSet<AgentId> = self.layer_of.keys().copied().collect();
        if regular != covered {
            let missing: Vec<_> = regular.difference(&covered).map(|a| a.0).collect();
            let extra: Vec<_> = covered.difference(&regular).map(|a| a.0).collect();
            return Err(GraphError::PartitionMismatch(format!(
                "missing {missing:?}, not regular {extra:?}"
            )));
        }
        Ok(())
    }

    /// Number of layers `M`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Layer members (ascending) for 1-based layer `l`.
    pub fn layer(&self, l: usize) -> &[AgentId] {
        &self.layers[l - 1]
    }

    pub fn layers(&self) -> &[Vec<AgentId>] {
        &self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    /// 1-based layer of a regular agent.
    pub fn layer_of(&self, i: AgentId) -> Option<usize> {
        self.layer_of.get(&i).map(|l| l + 1)
    }

    /// Whether `j` belongs to `W_l = V_S ∪ V_1 ∪ … ∪ V_l`; `l = 0` gives `V_S`.
    pub fn cumulative_contains(&self, l: usize, j: AgentId) -> bool {
        match self.layer_of(j) {
            Some(h) => h <= l,
            None => true,
        }
    }
}

impl TryFrom<Vec<Vec<AgentId>>> for LayerPartition {
    type Error = GraphError;
    fn try_from(v: Vec<Vec<AgentId>>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<LayerPartition> for Vec<Vec<AgentId>> {
    fn from(p: LayerPartition) -> Self {
        p.layers
    }
}

/// Checks the layering condition in the selected mode.
pub fn validate_layering(
    edges: &EdgeSet,
    part: &LayerPartition,
    mode: LayeringMode,
) -> Result<bool, GraphError> {
    part.check_cover(edges.regular_agents())?;
    for (i, ns) in edges.iter() {
        let l = part.layer_of(i).expect("cover checked");
        let bound = match mode {
            LayeringMode::Weak => l,
            LayeringMode::Strict => l - 1,
        };
        if !ns.iter().all(|&j| part.cumulative_contains(bound, j)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Outcome of [`infer_layering`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Layering {
    Strict(LayerPartition),
    Weak(LayerPartition),
    NotReducible,
}

impl Layering {
    pub fn partition(&self) -> Option<&LayerPartition> {
        match self {
            Layering::Strict(p) | Layering::Weak(p) => Some(p),
            Layering::NotReducible => None,
        }
    }

    pub fn mode(&self) -> Option<LayeringMode> {
        match self {
            Layering::Strict(_) => Some(LayeringMode::Strict),
            Layering::Weak(_) => Some(LayeringMode::Weak),
            Layering::NotReducible => None,
        }
    }
}

/// Longest-path layering of the condensed regular-agent influence graph.
///
/// An acyclic regular subgraph yields the minimal strict layering. Cycles are
/// collapsed into their strongly connected components, which then share a
/// layer (weak layering). A single component covering every regular agent is
/// not reducible.
pub fn infer_layering(edges: &EdgeSet) -> Layering {
    let regular: Vec<AgentId> = edges.regular_agents().collect();
    let mut g: DiGraph<AgentId, ()> = DiGraph::with_capacity(regular.len(), edges.edge_count());
    let nodes: BTreeMap<AgentId, NodeIndex> = regular.iter().map(|&i| (i, g.add_node(i))).collect();
    for (i, ns) in edges.iter() {
        for j in ns {
            if let Some(&src) = nodes.get(j) {
                g.add_edge(src, nodes[&i], ());
            }
        }
    }
    // Tarjan emits components in reverse topological order.
    let mut sccs = tarjan_scc(&g);
    sccs.reverse();
    if sccs.len() == 1 && sccs[0].len() > 1 {
        return Layering::NotReducible;
    }
    let acyclic = sccs.iter().all(|c| c.len() == 1);
    let mut comp_of = vec![0usize; g.node_count()];
    for (c, members) in sccs.iter().enumerate() {
        for n in members {
            comp_of[n.index()] = c;
        }
    }
    let mut level = vec![1usize; sccs.len()];
    for (c, members) in sccs.iter().enumerate() {
        for &n in members {
            for pred in g.neighbors_directed(n, petgraph::Direction::Incoming) {
                let pc = comp_of[pred.index()];
                if pc != c {
                    level[c] = level[c].max(level[pc] + 1);
                }
            }
        }
    }
    let depth = level.iter().copied().max().unwrap_or(1);
    let mut layers = vec![Vec::new(); depth];
    for (c, members) in sccs.iter().enumerate() {
        layers[level[c] - 1].extend(members.iter().map(|n| g[*n]));
    }
    let part = LayerPartition::new(layers).expect("levels are contiguous and disjoint");
    if acyclic {
        Layering::Strict(part)
    } else {
        Layering::Weak(part)
    }
}

/// Row selectors `Q_1..Q_M`, their stack `Q` and the padded `H`.
///
/// Row `r` of `Q` has its single one in column `order[r]`, where columns are
/// regular-agent positions (ascending id) and rows run through the layers in
/// order, ascending id within each layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMatrices {
    layer_sizes: Vec<usize>,
    order: Vec<usize>,
    n_stubborn: usize,
}

pub fn build_selection_matrices(
    community: &Community,
    part: &LayerPartition,
) -> Result<SelectionMatrices, GraphError> {
    part.check_cover(community.regular().iter().copied())?;
    let order = part
        .layers()
        .iter()
        .flatten()
        .map(|&i| community.regular_index(i).expect("cover checked"))
        .collect();
    Ok(SelectionMatrices { layer_sizes: part.sizes(), order, n_stubborn: community.n_stubborn() })
}

impl SelectionMatrices {
    pub fn identity(n_regular: usize, n_stubborn: usize) -> Self {
        Self { layer_sizes: vec![n_regular], order: (0..n_regular).collect(), n_stubborn }
    }

    /// Builds from an explicit permutation split into consecutive layer sizes.
    pub fn from_order(order: Vec<usize>, layer_sizes: Vec<usize>, n_stubborn: usize) -> Result<Self, GraphError> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &o in &order {
            if o >= n || std::mem::replace(&mut seen[o], true) {
                return Err(GraphError::PartitionMismatch(format!("order {order:?} is not a permutation")));
            }
        }
        if layer_sizes.iter().sum::<usize>() != n {
            return Err(GraphError::PartitionMismatch("layer sizes do not sum to N_R".into()));
        }
        if let Some(l) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(GraphError::EmptyLayer(l + 1));
        }
        Ok(Self { layer_sizes, order, n_stubborn })
    }

    pub fn n_regular(&self) -> usize {
        self.order.len()
    }

    pub fn n_stubborn(&self) -> usize {
        self.n_stubborn
    }

    pub fn depth(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Permutation: transformed position `r` holds regular index `order[r]`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Row range of 1-based layer `l` inside `Q`.
    pub fn layer_range(&self, l: usize) -> std::ops::Range<usize> {
        let start: usize = self.layer_sizes[..l - 1].iter().sum();
        start..start + self.layer_sizes[l - 1]
    }

    pub fn q_layer<T: Scalar>(&self, l: usize) -> DenseMatrix<T> {
        let range = self.layer_range(l);
        let mut q = DenseMatrix::zeros(range.len(), self.n_regular());
        for (row, r) in range.enumerate() {
            q[(row, self.order[r])] = T::one();
        }
        q
    }

    pub fn q<T: Scalar>(&self) -> DenseMatrix<T> {
        let mut q = DenseMatrix::zeros(self.n_regular(), self.n_regular());
        for (r, &c) in self.order.iter().enumerate() {
            q[(r, c)] = T::one();
        }
        q
    }

    /// `diag(I_{N−N_R}, Q)`.
    pub fn h<T: Scalar>(&self) -> DenseMatrix<T> {
        let s = self.n_stubborn;
        let n = s + self.n_regular();
        let mut h = DenseMatrix::zeros(n, n);
        for k in 0..s {
            h[(k, k)] = T::one();
        }
        for (r, &c) in self.order.iter().enumerate() {
            h[(s + r, s + c)] = T::one();
        }
        h
    }
}
