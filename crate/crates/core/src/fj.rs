//! Opinions, biases, influence weights and the Friedkin–Johnsen update.
//!
//! Layout conventions used throughout the crate:
//!
//! * influence matrix `W` is `N_R × N` with the regular agents' columns first
//!   and the stubborn agents' columns after them, so `(I − Λ) W = [A | S]`;
//! * `L = [A | S | Λ]` and `B = [S | Λ]`;
//! * the input vector `u` holds, per subject, the stubborn opinions followed
//!   by the regular agents' initial opinions;
//! * state vectors are subject-major: all agents' component 1, then all
//!   agents' component 2, and so on.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{AgentId, Community, EdgeSet, GraphError, Role};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("{what} value {value} outside [0, 1]")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("row {row} of {what} sums to {sum}, not 1")]
    RowSum { what: &'static str, row: usize, sum: f64 },
    #[error("negative weight {value} in row {row}")]
    Negative { row: usize, value: f64 },
    #[error("weights of agent {0} do not match its in-neighbors")]
    Support(AgentId),
    #[error("no current opinion for agent {0}")]
    MissingOpinion(AgentId),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn check_unit<T: Scalar>(what: &'static str, v: T) -> Result<(), ModelError> {
    if v.is_finite() && v >= T::zero() && v <= T::one() {
        Ok(())
    } else {
        Err(ModelError::OutOfRange { what, value: v.to_f64().unwrap_or(f64::NAN) })
    }
}

/// Opinion of one agent on every subject, each component in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionVector<T>(Vec<T>);

impl<T: Scalar> OpinionVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self, ModelError> {
        for &v in &values {
            check_unit("opinion", v)?;
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn subjects(&self) -> usize {
        self.0.len()
    }
}

/// Per-agent bias `λ_i` on the initial opinion, realized as `Λ = diag(λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasMatrix<T>(Vec<T>);

impl<T: Scalar> BiasMatrix<T> {
    pub fn new(lambda: Vec<T>) -> Result<Self, ModelError> {
        for &v in &lambda {
            check_unit("bias", v)?;
        }
        Ok(Self(lambda))
    }

    pub fn constant(n_regular: usize, value: T) -> Result<Self, ModelError> {
        Self::new(vec![value; n_regular])
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn all_zero(&self) -> bool {
        self.0.iter().all(|&v| v == T::zero())
    }

    /// Regular positions with `λ_i = 1`: such agents ignore every neighbor.
    pub fn saturated(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &v)| v == T::one()).map(|(i, _)| i).collect()
    }

    pub fn to_matrix(&self) -> DenseMatrix<T> {
        DenseMatrix::diagonal(&self.0)
    }
}

/// Row-stochastic, nonnegative `N_R × N` influence matrix `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix<T> {
    w: DenseMatrix<T>,
}

impl<T: Scalar> InfluenceMatrix<T> {
    /// Validates shape, sign, row sums and the absence of self-influence.
    pub fn from_dense(community: &Community, w: DenseMatrix<T>) -> Result<Self, ModelError> {
        let (nr, n) = (community.n_regular(), community.agents());
        if w.rows() != nr {
            return Err(ModelError::Dimension { what: "influence rows", expected: nr, got: w.rows() });
        }
        if w.cols() != n {
            return Err(ModelError::Dimension { what: "influence columns", expected: n, got: w.cols() });
        }
        for r in 0..nr {
            let row = w.row(r);
            if let Some(&neg) = row.iter().find(|v| !(**v >= T::zero())) {
                return Err(ModelError::Negative { row: r, value: neg.to_f64().unwrap_or(f64::NAN) });
            }
            if row[r] != T::zero() {
                return Err(ModelError::Support(community.regular()[r]));
            }
            let sum: T = row.iter().copied().sum();
            if (sum - T::one()).abs() > T::row_tolerance() {
                return Err(ModelError::RowSum { what: "W", row: r, sum: sum.to_f64().unwrap_or(f64::NAN) });
            }
        }
        Ok(Self { w })
    }

    /// Builds `W` from per-agent weight maps whose keys must equal `N_i`.
    pub fn from_weights(
        community: &Community,
        edges: &EdgeSet,
        weights: &BTreeMap<AgentId, BTreeMap<AgentId, T>>,
    ) -> Result<Self, ModelError> {
        let mut w = DenseMatrix::zeros(community.n_regular(), community.agents());
        for (r, &i) in community.regular().iter().enumerate() {
            let ns = edges.in_neighbors(i)?;
            let row = weights.get(&i).ok_or(ModelError::Support(i))?;
            if row.len() != ns.len() || !row.keys().all(|j| ns.contains(j)) {
                return Err(ModelError::Support(i));
            }
            for (&j, &v) in row {
                w[(r, community.influence_column(j)?)] = v;
            }
        }
        Self::from_dense(community, w)
    }

    /// Equal weight on every in-neighbor.
    pub fn uniform(community: &Community, edges: &EdgeSet) -> Result<Self, ModelError> {
        let mut w = DenseMatrix::zeros(community.n_regular(), community.agents());
        for (r, &i) in community.regular().iter().enumerate() {
            let ns = edges.in_neighbors(i)?;
            let share = T::one() / T::from_usize(ns.len()).unwrap();
            for &j in ns {
                w[(r, community.influence_column(j)?)] = share;
            }
        }
        Self::from_dense(community, w)
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.w
    }

    /// Nonzero `(agent, weight)` pairs of regular position `r`.
    pub fn row_weights(&self, community: &Community, r: usize) -> Vec<(AgentId, T)> {
        self.w
            .row(r)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != T::zero())
            .map(|(c, &v)| (community.agent_at_column(c), v))
            .collect()
    }
}

/// `L = [(I − Λ) W | Λ]` held as its partitions `A`, `S` and `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices<T> {
    a: DenseMatrix<T>,
    s: DenseMatrix<T>,
    bias: Vec<T>,
}

impl<T: Scalar> SystemMatrices<T> {
    /// Assembles `L` from `W` and `Λ`.
    pub fn assemble(w: &InfluenceMatrix<T>, bias: &BiasMatrix<T>) -> Result<Self, ModelError> {
        let wm = w.matrix();
        let nr = wm.rows();
        if bias.len() != nr {
            return Err(ModelError::Dimension { what: "bias length", expected: nr, got: bias.len() });
        }
        for (r, sum) in wm.row_sums().into_iter().enumerate() {
            if (sum - T::one()).abs() > T::row_tolerance() {
                return Err(ModelError::RowSum { what: "W", row: r, sum: sum.to_f64().unwrap_or(f64::NAN) });
            }
        }
        let scaled = DenseMatrix::from_fn(nr, wm.cols(), |i, j| (T::one() - bias.values()[i]) * wm[(i, j)]);
        Ok(Self {
            a: scaled.block(0, 0, nr, nr),
            s: scaled.block(0, nr, nr, wm.cols() - nr),
            bias: bias.values().to_vec(),
        })
    }

    /// Builds directly from partitions, e.g. for transformed systems.
    pub fn from_parts(a: DenseMatrix<T>, s: DenseMatrix<T>, bias: Vec<T>) -> Result<Self, ModelError> {
        let nr = a.rows();
        if a.cols() != nr {
            return Err(ModelError::Dimension { what: "A columns", expected: nr, got: a.cols() });
        }
        if s.rows() != nr {
            return Err(ModelError::Dimension { what: "S rows", expected: nr, got: s.rows() });
        }
        if bias.len() != nr {
            return Err(ModelError::Dimension { what: "bias length", expected: nr, got: bias.len() });
        }
        Ok(Self { a, s, bias })
    }

    pub fn n_regular(&self) -> usize {
        self.a.rows()
    }

    pub fn n_stubborn(&self) -> usize {
        self.s.cols()
    }

    pub fn n_agents(&self) -> usize {
        self.n_regular() + self.n_stubborn()
    }

    /// Regular-to-regular influence, `N_R × N_R`.
    pub fn a(&self) -> &DenseMatrix<T> {
        &self.a
    }

    /// Stubborn-to-regular influence, `N_R × (N − N_R)`.
    pub fn s(&self) -> &DenseMatrix<T> {
        &self.s
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn lambda(&self) -> DenseMatrix<T> {
        DenseMatrix::diagonal(&self.bias)
    }

    /// `B = [S | Λ]`, matching the stubborn-first input ordering.
    pub fn b(&self) -> DenseMatrix<T> {
        self.s.hcat(&self.lambda())
    }

    /// `L = [A | S | Λ]`.
    pub fn l(&self) -> DenseMatrix<T> {
        self.a.hcat(&self.b())
    }

    /// Largest `|Σ_j L_ij − 1|`.
    pub fn row_sum_error_max(&self) -> T {
        self.l().row_sums().into_iter().fold(T::zero(), |m, s| m.max((s - T::one()).abs()))
    }
}

/// Stacked regular opinions `x`, subject-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionState<T> {
    x: Vec<T>,
    n_regular: usize,
}

impl<T: Scalar> OpinionState<T> {
    pub fn from_vec(x: Vec<T>, n_regular: usize) -> Result<Self, ModelError> {
        if n_regular == 0 || !x.len().is_multiple_of(n_regular) {
            return Err(ModelError::Dimension { what: "state length", expected: n_regular, got: x.len() });
        }
        Ok(Self { x, n_regular })
    }

    /// `vec` of the `N_R × n` opinion matrix (row = agent).
    pub fn vectorize(opinions: &DenseMatrix<T>) -> Self {
        let (nr, n) = opinions.shape();
        let mut x = Vec::with_capacity(nr * n);
        for j in 0..n {
            x.extend((0..nr).map(|i| opinions[(i, j)]));
        }
        Self { x, n_regular: nr }
    }

    pub fn devectorize(&self) -> DenseMatrix<T> {
        DenseMatrix::from_fn(self.n_regular, self.subjects(), |i, j| self.x[j * self.n_regular + i])
    }

    pub fn n_regular(&self) -> usize {
        self.n_regular
    }

    pub fn subjects(&self) -> usize {
        self.x.len() / self.n_regular
    }

    pub fn as_slice(&self) -> &[T] {
        &self.x
    }

    pub fn into_vec(self) -> Vec<T> {
        self.x
    }

    /// Component `j` (0-based) of every regular agent.
    pub fn subject_block(&self, j: usize) -> &[T] {
        &self.x[j * self.n_regular..(j + 1) * self.n_regular]
    }

    /// Opinion of regular position `r`.
    pub fn agent(&self, r: usize) -> Vec<T> {
        (0..self.subjects()).map(|j| self.x[j * self.n_regular + r]).collect()
    }

    pub fn in_unit_box(&self) -> bool {
        self.x.iter().all(|&v| v >= T::zero() && v <= T::one())
    }
}

/// Constant input `u`: per subject, stubborn opinions then regular initials.
#[derive(Debug, Clone, PartialEq)]
pub struct InputVector<T> {
    u: Vec<T>,
    n_agents: usize,
    n_stubborn: usize,
}

impl<T: Scalar> InputVector<T> {
    /// `opinions` is `N × n`, row `k` holding agent `k + 1`.
    pub fn from_opinions(community: &Community, opinions: &DenseMatrix<T>) -> Result<Self, ModelError> {
        let n = community.agents();
        if opinions.rows() != n {
            return Err(ModelError::Dimension { what: "opinion rows", expected: n, got: opinions.rows() });
        }
        if opinions.cols() != community.subjects() {
            return Err(ModelError::Dimension {
                what: "opinion columns",
                expected: community.subjects(),
                got: opinions.cols(),
            });
        }
        for &v in opinions.as_slice() {
            check_unit("opinion", v)?;
        }
        let order: Vec<usize> = community
            .stubborn()
            .iter()
            .chain(community.regular())
            .map(|id| id.0 - 1)
            .collect();
        let mut u = Vec::with_capacity(n * community.subjects());
        for j in 0..community.subjects() {
            u.extend(order.iter().map(|&k| opinions[(k, j)]));
        }
        Ok(Self { u, n_agents: n, n_stubborn: community.n_stubborn() })
    }

    pub fn from_vec(u: Vec<T>, n_agents: usize, n_stubborn: usize) -> Result<Self, ModelError> {
        if n_agents == 0 || !u.len().is_multiple_of(n_agents) || n_stubborn >= n_agents {
            return Err(ModelError::Dimension { what: "input length", expected: n_agents, got: u.len() });
        }
        for &v in &u {
            check_unit("input", v)?;
        }
        Ok(Self { u, n_agents, n_stubborn })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.u
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_stubborn(&self) -> usize {
        self.n_stubborn
    }

    pub fn subjects(&self) -> usize {
        self.u.len() / self.n_agents
    }

    pub fn subject_block(&self, j: usize) -> &[T] {
        &self.u[j * self.n_agents..(j + 1) * self.n_agents]
    }

    /// Stubborn opinions on subject `j`.
    pub fn stubborn_block(&self, j: usize) -> &[T] {
        &self.subject_block(j)[..self.n_stubborn]
    }

    /// Regular initial opinions on subject `j`.
    pub fn regular_block(&self, j: usize) -> &[T] {
        &self.subject_block(j)[self.n_stubborn..]
    }

    /// Regular initial opinions as a state vector.
    pub fn initial_state(&self) -> OpinionState<T> {
        let x = (0..self.subjects()).flat_map(|j| self.regular_block(j).to_vec()).collect();
        OpinionState { x, n_regular: self.n_agents - self.n_stubborn }
    }

    /// Stubborn opinions as an `(N − N_R) × n` matrix.
    pub fn stubborn_opinions(&self) -> DenseMatrix<T> {
        DenseMatrix::from_fn(self.n_stubborn, self.subjects(), |s, j| self.stubborn_block(j)[s])
    }
}

/// One agent's update:
/// `o_i(k+1) = (1 − λ_i) Σ_{j ∈ N_i} w_ij o_j(k) + λ_i o_i(0)`.
pub fn step_agent<T: Scalar>(
    community: &Community,
    i: AgentId,
    current: &BTreeMap<AgentId, OpinionVector<T>>,
    w: &InfluenceMatrix<T>,
    bias: &BiasMatrix<T>,
    initial_i: &OpinionVector<T>,
) -> Result<OpinionVector<T>, ModelError> {
    let r = match community.role(i)? {
        Role::Regular(r) => r,
        Role::Stubborn(_) => return Err(GraphError::StubbornQueried(i).into()),
    };
    let lambda = bias.values()[r];
    let n = initial_i.subjects();
    let mut mix = vec![T::zero(); n];
    for (j, wij) in w.row_weights(community, r) {
        let oj = current.get(&j).ok_or(ModelError::MissingOpinion(j))?;
        if oj.subjects() != n {
            return Err(ModelError::Dimension { what: "neighbor opinion", expected: n, got: oj.subjects() });
        }
        for (m, &o) in mix.iter_mut().zip(oj.values()) {
            *m += wij * o;
        }
    }
    let out = mix
        .into_iter()
        .zip(initial_i.values())
        .map(|(m, &o0)| (T::one() - lambda) * m + lambda * o0)
        .collect();
    Ok(OpinionVector(out))
}

/// Whole-network update `x(k+1) = (I_n ⊗ A) x(k) + (I_n ⊗ B) u`, computed one
/// subject block at a time.
pub fn step_network<T: Scalar>(
    x: &OpinionState<T>,
    mats: &SystemMatrices<T>,
    u: &InputVector<T>,
) -> Result<OpinionState<T>, ModelError> {
    let nr = mats.n_regular();
    if x.n_regular() != nr {
        return Err(ModelError::Dimension { what: "state agents", expected: nr, got: x.n_regular() });
    }
    if u.n_agents() != mats.n_agents() || u.n_stubborn() != mats.n_stubborn() {
        return Err(ModelError::Dimension { what: "input agents", expected: mats.n_agents(), got: u.n_agents() });
    }
    if u.subjects() != x.subjects() {
        return Err(ModelError::Dimension { what: "input subjects", expected: x.subjects(), got: u.subjects() });
    }
    let mut out = Vec::with_capacity(x.as_slice().len());
    for j in 0..x.subjects() {
        let xj = x.subject_block(j);
        let us = u.stubborn_block(j);
        let ur = u.regular_block(j);
        for i in 0..nr {
            let mut v = T::zero();
            for (&a, &xv) in mats.a().row(i).iter().zip(xj) {
                v += a * xv;
            }
            for (&s, &uv) in mats.s().row(i).iter().zip(us) {
                v += s * uv;
            }
            v += mats.bias()[i] * ur[i];
            out.push(v);
        }
    }
    Ok(OpinionState { x: out, n_regular: nr })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Community, InfluenceMatrix<f64>, BiasMatrix<f64>) {
        let c = Community::with_regular_prefix(1, 2, 1).unwrap();
        let w = InfluenceMatrix::from_dense(&c, DenseMatrix::from_rows(&[vec![0.0, 1.0]]).unwrap()).unwrap();
        (c, w, BiasMatrix::new(vec![0.5]).unwrap())
    }

    #[test]
    fn assemble_toy_system() {
        let (_, w, b) = toy();
        let m = SystemMatrices::assemble(&w, &b).unwrap();
        assert_eq!(m.l().to_rows(), vec![vec![0.0, 0.5, 0.5]]);
        assert_eq!(m.a().to_rows(), vec![vec![0.0]]);
        assert_eq!(m.b().to_rows(), vec![vec![0.5, 0.5]]);
    }

    #[test]
    fn assemble_extreme_biases() {
        let c = Community::with_regular_prefix(1, 4, 2).unwrap();
        let w = InfluenceMatrix::from_dense(
            &c,
            DenseMatrix::from_rows(&[vec![0.0, 0.5, 0.5, 0.0], vec![0.25, 0.0, 0.0, 0.75]]).unwrap(),
        )
        .unwrap();
        let ones = SystemMatrices::assemble(&w, &BiasMatrix::constant(2, 1.0).unwrap()).unwrap();
        assert!(ones.a().is_zero());
        assert_eq!(ones.l(), DenseMatrix::zeros(2, 4).hcat(&DenseMatrix::identity(2)));
        let zeros = SystemMatrices::assemble(&w, &BiasMatrix::constant(2, 0.0).unwrap()).unwrap();
        assert_eq!(zeros.l(), w.matrix().hcat(&DenseMatrix::zeros(2, 2)));
    }

    #[test]
    fn assemble_rejects_bad_input() {
        let (_, w, _) = toy();
        let b2 = BiasMatrix::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(SystemMatrices::assemble(&w, &b2), Err(ModelError::Dimension { .. })));
        let c = Community::with_regular_prefix(1, 2, 1).unwrap();
        let off = DenseMatrix::from_rows(&[vec![0.0, 0.9]]).unwrap();
        assert!(matches!(InfluenceMatrix::from_dense(&c, off), Err(ModelError::RowSum { .. })));
        assert!(BiasMatrix::new(vec![1.5]).is_err());
        assert!(OpinionVector::new(vec![-0.1]).is_err());
    }

    #[test]
    fn step_agent_cases() {
        let (c, w, b) = toy();
        let mut cur = BTreeMap::new();
        cur.insert(AgentId(2), OpinionVector::new(vec![1.0]).unwrap());
        cur.insert(AgentId(1), OpinionVector::new(vec![0.0]).unwrap());
        let init = OpinionVector::new(vec![0.0]).unwrap();
        assert_eq!(step_agent(&c, AgentId(1), &cur, &w, &b, &init).unwrap().values(), &[0.5]);

        let stubborn = BiasMatrix::new(vec![1.0]).unwrap();
        let init = OpinionVector::new(vec![0.3]).unwrap();
        assert_eq!(step_agent(&c, AgentId(1), &cur, &w, &stubborn, &init).unwrap().values(), &[0.3]);

        assert!(matches!(
            step_agent(&c, AgentId(2), &cur, &w, &b, &init),
            Err(ModelError::Graph(GraphError::StubbornQueried(_)))
        ));
        cur.remove(&AgentId(2));
        assert_eq!(
            step_agent(&c, AgentId(1), &cur, &w, &b, &init),
            Err(ModelError::MissingOpinion(AgentId(2)))
        );
    }

    #[test]
    fn step_agent_two_neighbors() {
        // regular 1 listens to stubborn 2 (w=0.25) and 3 (w=0.75)
        let c = Community::with_regular_prefix(1, 3, 1).unwrap();
        let w = InfluenceMatrix::from_dense(&c, DenseMatrix::from_rows(&[vec![0.0, 0.25, 0.75]]).unwrap()).unwrap();
        let b = BiasMatrix::new(vec![0.0]).unwrap();
        let mut cur = BTreeMap::new();
        cur.insert(AgentId(2), OpinionVector::new(vec![0.2]).unwrap());
        cur.insert(AgentId(3), OpinionVector::new(vec![0.6]).unwrap());
        let init = OpinionVector::new(vec![0.9]).unwrap();
        let out = step_agent(&c, AgentId(1), &cur, &w, &b, &init).unwrap();
        assert!((out.values()[0] - 0.5f64).abs() < 1e-15);
    }

    #[test]
    fn step_network_toy() {
        let (c, w, b) = toy();
        let m = SystemMatrices::assemble(&w, &b).unwrap();
        let opinions = DenseMatrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let u = InputVector::from_opinions(&c, &opinions).unwrap();
        assert_eq!(u.as_slice(), &[1.0, 0.0]);
        let x0 = u.initial_state();
        let x1 = step_network(&x0, &m, &u).unwrap();
        assert_eq!(x1.as_slice(), &[0.5]);
        let x2 = step_network(&x1, &m, &u).unwrap();
        assert_eq!(x2.as_slice(), &[0.5]);
    }

    #[test]
    fn pure_bias_is_fixed_after_one_step() {
        let c = Community::with_regular_prefix(2, 3, 2).unwrap();
        let w = InfluenceMatrix::from_dense(
            &c,
            DenseMatrix::from_rows(&[vec![0.0, 0.5, 0.5], vec![1.0, 0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let m = SystemMatrices::assemble(&w, &BiasMatrix::constant(2, 1.0).unwrap()).unwrap();
        let opinions = DenseMatrix::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4], vec![0.9, 0.9]]).unwrap();
        let u = InputVector::from_opinions(&c, &opinions).unwrap();
        let x = OpinionState::from_vec(vec![0.7; 4], 2).unwrap();
        let x1 = step_network(&x, &m, &u).unwrap();
        assert_eq!(x1.devectorize().to_rows(), vec![vec![0.1, 0.2], vec![0.3, 0.4]]);
        assert_eq!(step_network(&x1, &m, &u).unwrap(), x1);
    }

    #[test]
    fn vectorize_layout() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let x = OpinionState::vectorize(&m);
        assert_eq!(x.as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(x.devectorize(), m);
        let col = DenseMatrix::from_rows(&[vec![0.5], vec![0.25]]).unwrap();
        assert_eq!(OpinionState::vectorize(&col).as_slice(), &[0.5, 0.25]);
        assert!(OpinionState::from_vec(vec![0.0; 5], 2).is_err());
    }

    #[test]
    fn input_ordering_puts_stubborn_first() {
        let c = Community::new(1, 3, [AgentId(1)]).unwrap();
        let opinions = DenseMatrix::from_rows(&[vec![0.9], vec![0.1], vec![0.2]]).unwrap();
        let u = InputVector::from_opinions(&c, &opinions).unwrap();
        assert_eq!(u.as_slice(), &[0.9, 0.1, 0.2]);
        assert_eq!(u.initial_state().as_slice(), &[0.1, 0.2]);
    }
}
