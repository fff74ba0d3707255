//! Leader-specified utility fields and the decentralized bias/weight rule.
//!
//! Each regular agent sees only pointwise rewards: its own reward at its
//! initial opinion and its in-neighbors' current rewards. From those it sets
//!
//! ```text
//! ū_i   = u_i(0) + Σ_{j∈N_i} u_j(k)
//! L_ij  = u_j(k) / ū_i          (j ∈ N_i)
//! λ_i   = u_i(0) / ū_i
//! w_ij  = L_ij / (1 − λ_i)
//! ```

use std::collections::BTreeMap;
use std::io::Read;

use thiserror::Error;

use crate::fj::{BiasMatrix, InfluenceMatrix, ModelError};
use crate::graph::{AgentId, Community, EdgeSet, GraphError};
use crate::linalg::{Cholesky, DenseMatrix, LinalgError};
use crate::scalar::Scalar;

/// Total reward at or below which an agent keeps its previous row.
pub const ZERO_REWARD_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("opinion component {value} outside [0, 1]")]
    OutOfRange { value: f64 },
    #[error("expected {expected} subjects, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("covariance")]
    Covariance(#[from] LinalgError),
    #[error("reward {value} for agent {agent} is negative or not finite")]
    BadReward { agent: AgentId, value: f64 },
    #[error("agent {0} observed no neighbors")]
    NoNeighbors(AgentId),
    #[error("utility grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Pointwise access to a utility field. Agents never see more than this.
pub trait Utility<T: Scalar>: Sync {
    fn subjects(&self) -> usize;
    fn evaluate(&self, opinion: &[T]) -> Result<T, RewardError>;
}

fn check_opinion<T: Scalar>(subjects: usize, o: &[T]) -> Result<(), RewardError> {
    if o.len() != subjects {
        return Err(RewardError::Dimension { expected: subjects, got: o.len() });
    }
    let tol = T::row_tolerance();
    for &v in o {
        if !(v >= -tol && v <= T::one() + tol) {
            return Err(RewardError::OutOfRange { value: v.to_f64().unwrap_or(f64::NAN) });
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum FieldKind<T> {
    Gaussian { mean: Vec<T>, covariance: Cholesky<T> },
    Grid(GridField<T>),
}

/// Nonnegative reward over `[0, 1]^n`.
#[derive(Debug, Clone)]
pub struct UtilityField<T> {
    kind: FieldKind<T>,
    subjects: usize,
}

impl<T: Scalar> UtilityField<T> {
    /// Unnormalized Gaussian `exp(−½ (o−μ)ᵀ Σ⁻¹ (o−μ))`; peak value 1.
    pub fn gaussian(mean: Vec<T>, covariance: &DenseMatrix<T>) -> Result<Self, RewardError> {
        if covariance.shape() != (mean.len(), mean.len()) {
            return Err(RewardError::Dimension { expected: mean.len(), got: covariance.rows() });
        }
        let covariance = Cholesky::factor(covariance)?;
        Ok(Self { subjects: mean.len(), kind: FieldKind::Gaussian { mean, covariance } })
    }

    /// Gaussian with covariance `scale · I`.
    pub fn isotropic_gaussian(mean: Vec<T>, scale: T) -> Result<Self, RewardError> {
        let cov = DenseMatrix::identity(mean.len()).scale(scale);
        Self::gaussian(mean, &cov)
    }

    pub fn grid(grid: GridField<T>) -> Self {
        Self { subjects: grid.axes.len(), kind: FieldKind::Grid(grid) }
    }

    /// Location of the highest reward: the Gaussian mean, or the best
    /// lattice point. For run summaries only; agents never call this.
    pub fn peak(&self) -> Vec<T> {
        match &self.kind {
            FieldKind::Gaussian { mean, .. } => mean.clone(),
            FieldKind::Grid(g) => {
                let best = (0..g.values.len())
                    .max_by(|&a, &b| g.values[a].partial_cmp(&g.values[b]).unwrap())
                    .unwrap_or(0);
                let mut rest = best;
                let mut point = vec![T::zero(); g.axes.len()];
                for d in (0..g.axes.len()).rev() {
                    point[d] = g.axes[d][rest % g.axes[d].len()];
                    rest /= g.axes[d].len();
                }
                point
            }
        }
    }
}

impl<T: Scalar> Utility<T> for UtilityField<T> {
    fn subjects(&self) -> usize {
        self.subjects
    }

    fn evaluate(&self, opinion: &[T]) -> Result<T, RewardError> {
        check_opinion(self.subjects, opinion)?;
        Ok(match &self.kind {
            FieldKind::Gaussian { mean, covariance } => {
                let d: Vec<T> = opinion.iter().zip(mean).map(|(&o, &m)| o - m).collect();
                (-covariance.inverse_quadratic_form(&d) / T::lit(2.0)).exp()
            }
            FieldKind::Grid(g) => g.interpolate(opinion),
        })
    }
}

/// Sampled utility on a tensor lattice, multilinearly interpolated. Points
/// outside the lattice are clamped to its boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    axes: Vec<Vec<T>>,
    values: Vec<T>,
}

impl<T: Scalar> GridField<T> {
    /// `values` are row-major over `axes` (last axis fastest).
    pub fn new(axes: Vec<Vec<T>>, values: Vec<T>) -> Result<Self, RewardError> {
        if axes.is_empty() {
            return Err(RewardError::Grid("no axes".into()));
        }
        for (d, ax) in axes.iter().enumerate() {
            if ax.is_empty() || ax.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(RewardError::Grid(format!("axis {d} must be strictly increasing and nonempty")));
            }
        }
        let count: usize = axes.iter().map(Vec::len).product();
        if values.len() != count {
            return Err(RewardError::Grid(format!("expected {count} values, got {}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= T::zero()) || !v.is_finite()) {
            return Err(RewardError::Grid(format!("value {v} is negative or not finite")));
        }
        Ok(Self { axes, values })
    }

    /// Reads a lattice CSV: a header row naming the coordinate columns and a
    /// final value column, then one lattice point per row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, RewardError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let width = rdr.headers().map_err(|e| RewardError::Grid(e.to_string()))?.len();
        if width < 2 {
            return Err(RewardError::Grid("need at least one coordinate column and a value column".into()));
        }
        let dims = width - 1;
        let mut points: Vec<(Vec<f64>, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| RewardError::Grid(e.to_string()))?;
            let nums = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| RewardError::Grid(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if nums.len() != width {
                return Err(RewardError::Grid(format!("row has {} fields, header {width}", nums.len())));
            }
            points.push((nums[..dims].to_vec(), nums[dims]));
        }
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); dims];
        for (c, _) in &points {
            for (ax, &v) in axes.iter_mut().zip(c) {
                ax.push(v);
            }
        }
        for ax in &mut axes {
            ax.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ax.dedup();
        }
        let count: usize = axes.iter().map(Vec::len).product();
        let mut values: Vec<Option<f64>> = vec![None; count];
        for (c, v) in &points {
            let mut flat = 0;
            for (ax, x) in axes.iter().zip(c) {
                flat = flat * ax.len() + ax.iter().position(|a| a == x).unwrap();
            }
            if values[flat].replace(*v).is_some() {
                return Err(RewardError::Grid(format!("duplicate lattice point {c:?}")));
            }
        }
        let values = values
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| RewardError::Grid("lattice is not a full tensor grid".into()))?;
        Self::new(
            axes.into_iter().map(|ax| ax.into_iter().map(T::lit).collect()).collect(),
            values.into_iter().map(T::lit).collect(),
        )
    }

    fn interpolate(&self, o: &[T]) -> T {
        let dims = self.axes.len();
        // per axis: lower index, upper index, weight of upper
        let cells: Vec<(usize, usize, T)> = self
            .axes
            .iter()
            .zip(o)
            .map(|(ax, &x)| {
                let last = ax.len() - 1;
                if last == 0 || x <= ax[0] {
                    return (0, 0, T::zero());
                }
                if x >= ax[last] {
                    return (last, last, T::zero());
                }
                let hi = ax.partition_point(|&a| a <= x).min(last);
                let lo = hi - 1;
                (lo, hi, (x - ax[lo]) / (ax[hi] - ax[lo]))
            })
            .collect();
        let mut total = T::zero();
        for corner in 0..(1usize << dims) {
            let mut weight = T::one();
            let mut flat = 0;
            for (d, &(lo, hi, t)) in cells.iter().enumerate() {
                let upper = corner >> d & 1 == 1;
                weight *= if upper { t } else { T::one() - t };
                flat = flat * self.axes[d].len() + if upper { hi } else { lo };
            }
            if weight != T::zero() {
                total += weight * self.values[flat];
            }
        }
        total
    }
}

/// What regular agent `agent` observes at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardObservation<T> {
    agent: AgentId,
    own_initial: T,
    neighbor_rewards: BTreeMap<AgentId, T>,
}

impl<T: Scalar> RewardObservation<T> {
    pub fn new(agent: AgentId, own_initial: T, neighbor_rewards: BTreeMap<AgentId, T>) -> Result<Self, RewardError> {
        if neighbor_rewards.is_empty() {
            return Err(RewardError::NoNeighbors(agent));
        }
        let bad = |v: T| !(v >= T::zero()) || !v.is_finite();
        if bad(own_initial) {
            return Err(RewardError::BadReward { agent, value: own_initial.to_f64().unwrap_or(f64::NAN) });
        }
        if let Some((&j, &v)) = neighbor_rewards.iter().find(|(_, &v)| bad(v)) {
            return Err(RewardError::BadReward { agent: j, value: v.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(Self { agent, own_initial, neighbor_rewards })
    }

    pub fn agent(&self) -> AgentId {
        self.agent
    }

    pub fn own_initial(&self) -> T {
        self.own_initial
    }

    pub fn neighbor_rewards(&self) -> &BTreeMap<AgentId, T> {
        &self.neighbor_rewards
    }
}

/// `ū_i(k) = u_i(0) + Σ_{j∈N_i} u_j(k)`.
pub fn local_reward_sum<T: Scalar>(obs: &RewardObservation<T>) -> T {
    obs.own_initial + obs.neighbor_rewards.values().copied().sum::<T>()
}

/// An agent's bias and neighbor weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RowWeights<T> {
    pub lambda: T,
    pub weights: BTreeMap<AgentId, T>,
}

impl<T: Scalar> RowWeights<T> {
    pub fn uniform(neighbors: impl IntoIterator<Item = AgentId>, lambda: T) -> Self {
        let ids: Vec<AgentId> = neighbors.into_iter().collect();
        let share = T::one() / T::from_usize(ids.len().max(1)).unwrap();
        Self { lambda, weights: ids.into_iter().map(|j| (j, share)).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    /// No reward mass at all; the previous row was kept.
    ZeroReward,
    /// Every neighbor earned zero, so `λ_i = 1` and the weights were set uniform.
    SaturatedBias,
}

/// One agent's rebuilt row of `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceRowUpdate<T> {
    /// `L_ij` for `j ∈ N_i`.
    pub neighbor_shares: BTreeMap<AgentId, T>,
    /// `L_{i,N+i}`.
    pub self_share: T,
    pub lambda: T,
    pub weights: BTreeMap<AgentId, T>,
    pub fallback: Option<Fallback>,
}

impl<T: Scalar> InfluenceRowUpdate<T> {
    pub fn row_sum(&self) -> T {
        self.self_share + self.neighbor_shares.values().copied().sum::<T>()
    }
}

/// Rebuilds an agent's row from its observation. `previous` is used only by
/// the zero-reward fallback.
pub fn update_influence_row<T: Scalar>(obs: &RewardObservation<T>, previous: &RowWeights<T>) -> InfluenceRowUpdate<T> {
    let total = local_reward_sum(obs);
    let neighbors = obs.neighbor_rewards.keys().copied();
    if total <= T::lit(ZERO_REWARD_FLOOR) {
        let keep = previous.weights.len() == obs.neighbor_rewards.len()
            && obs.neighbor_rewards.keys().all(|j| previous.weights.contains_key(j));
        let row = if keep { previous.clone() } else { RowWeights::uniform(neighbors, previous.lambda) };
        return InfluenceRowUpdate {
            neighbor_shares: row.weights.iter().map(|(&j, &w)| (j, (T::one() - row.lambda) * w)).collect(),
            self_share: row.lambda,
            lambda: row.lambda,
            weights: row.weights,
            fallback: Some(Fallback::ZeroReward),
        };
    }
    let neighbor_shares: BTreeMap<AgentId, T> = obs.neighbor_rewards.iter().map(|(&j, &u)| (j, u / total)).collect();
    let self_share = obs.own_initial / total;
    let neighbor_mass: T = obs.neighbor_rewards.values().copied().sum();
    // w_ij = L_ij / (1 − λ_i) = u_j / Σ u_j; the right-hand form avoids the
    // cancellation in 1 − λ_i when λ_i is close to 1.
    let (weights, fallback) = if neighbor_mass > T::zero() {
        (obs.neighbor_rewards.iter().map(|(&j, &u)| (j, u / neighbor_mass)).collect(), None)
    } else {
        (RowWeights::uniform(neighbors, T::one()).weights, Some(Fallback::SaturatedBias))
    };
    InfluenceRowUpdate { neighbor_shares, self_share, lambda: self_share, weights, fallback }
}

/// Reward at every regular agent's initial opinion, cached for a whole run.
pub fn initial_rewards<T: Scalar>(
    community: &Community,
    opinions: &DenseMatrix<T>,
    utility: &dyn Utility<T>,
) -> Result<Vec<T>, RewardError> {
    community.regular().iter().map(|id| utility.evaluate(opinions.row(id.0 - 1))).collect()
}

/// Result of one network-wide reward round.
#[derive(Debug, Clone)]
pub struct RewardStep<T> {
    pub influence: InfluenceMatrix<T>,
    pub bias: BiasMatrix<T>,
    pub rows: Vec<InfluenceRowUpdate<T>>,
    /// Utility at each agent's current opinion, indexed by `id − 1`.
    pub utilities: Vec<T>,
}

impl<T: Scalar> RewardStep<T> {
    pub fn row_weights(&self) -> Vec<RowWeights<T>> {
        self.rows.iter().map(|r| RowWeights { lambda: r.lambda, weights: r.weights.clone() }).collect()
    }

    pub fn fallback_count(&self) -> usize {
        self.rows.iter().filter(|r| r.fallback.is_some()).count()
    }
}

/// Evaluates the utility once per agent at its current opinion, hands every
/// regular agent its local observation and assembles the resulting `W`, `Λ`.
///
/// `opinions` is `N × n` (row `k` = agent `k + 1`); `initial` holds `u_i(0)`
/// per regular position and `previous` the rows in force before this round.
pub fn reward_step<T: Scalar>(
    community: &Community,
    edges: &EdgeSet,
    opinions: &DenseMatrix<T>,
    initial: &[T],
    utility: &dyn Utility<T>,
    previous: &[RowWeights<T>],
) -> Result<RewardStep<T>, RewardError> {
    let nr = community.n_regular();
    if initial.len() != nr || previous.len() != nr {
        return Err(RewardError::Dimension { expected: nr, got: initial.len().min(previous.len()) });
    }
    if opinions.rows() != community.agents() {
        return Err(RewardError::Dimension { expected: community.agents(), got: opinions.rows() });
    }
    let utilities = (0..community.agents())
        .map(|k| utility.evaluate(opinions.row(k)))
        .collect::<Result<Vec<T>, _>>()?;
    let mut rows = Vec::with_capacity(nr);
    for (r, &i) in community.regular().iter().enumerate() {
        let observed = edges.in_neighbors(i)?.iter().map(|&j| (j, utilities[j.0 - 1])).collect();
        let obs = RewardObservation::new(i, initial[r], observed)?;
        rows.push(update_influence_row(&obs, &previous[r]));
    }
    let weights: BTreeMap<AgentId, BTreeMap<AgentId, T>> =
        community.regular().iter().zip(&rows).map(|(&i, row)| (i, row.weights.clone())).collect();
    let influence = InfluenceMatrix::from_weights(community, edges, &weights)?;
    let bias = BiasMatrix::new(rows.iter().map(|r| r.lambda).collect())?;
    Ok(RewardStep { influence, bias, rows, utilities })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(own: f64, ns: &[(usize, f64)]) -> RewardObservation<f64> {
        RewardObservation::new(AgentId(1), own, ns.iter().map(|&(j, u)| (AgentId(j), u)).collect()).unwrap()
    }

    fn prev(ns: &[usize]) -> RowWeights<f64> {
        RowWeights::uniform(ns.iter().copied().map(AgentId), 0.0)
    }

    #[test]
    fn gaussian_values() {
        let u = UtilityField::isotropic_gaussian(vec![0.25, 0.6], 0.1).unwrap();
        assert_eq!(u.evaluate(&[0.25, 0.6]).unwrap(), 1.0);
        let v = u.evaluate(&[0.25 + 0.2f64.sqrt(), 0.6]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-12);
        assert!(matches!(u.evaluate(&[1.2, 0.5]), Err(RewardError::OutOfRange { .. })));
        assert!(matches!(u.evaluate(&[0.5]), Err(RewardError::Dimension { .. })));
    }

    #[test]
    fn reward_sums() {
        assert_eq!(local_reward_sum(&obs(1.0, &[(2, 3.0)])), 4.0);
        assert_eq!(local_reward_sum(&obs(0.0, &[(2, 0.0)])), 0.0);
        assert!((local_reward_sum(&obs(0.2, &[(2, 0.3), (3, 0.5)])) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn row_update_examples() {
        let r = update_influence_row(&obs(1.0, &[(2, 3.0)]), &prev(&[2]));
        assert_eq!(r.lambda, 0.25);
        assert_eq!(r.weights[&AgentId(2)], 1.0);
        assert_eq!(r.neighbor_shares[&AgentId(2)], 0.75);
        assert_eq!(r.self_share, 0.25);
        assert_eq!(r.fallback, None);

        let r = update_influence_row(&obs(0.0, &[(2, 2.0), (3, 2.0)]), &prev(&[2, 3]));
        assert_eq!(r.lambda, 0.0);
        assert_eq!(r.weights.values().copied().collect::<Vec<_>>(), vec![0.5, 0.5]);

        let r = update_influence_row(&obs(0.7, &[(2, 0.0), (3, 0.0)]), &prev(&[2, 3]));
        assert_eq!(r.lambda, 1.0);
        assert_eq!(r.weights.values().copied().collect::<Vec<_>>(), vec![0.5, 0.5]);
        assert_eq!(r.fallback, Some(Fallback::SaturatedBias));
    }

    #[test]
    fn zero_reward_keeps_previous_row() {
        let mut p = prev(&[2, 3]);
        p.lambda = 0.4;
        p.weights.insert(AgentId(2), 0.9);
        p.weights.insert(AgentId(3), 0.1);
        let r = update_influence_row(&obs(0.0, &[(2, 0.0), (3, 0.0)]), &p);
        assert_eq!(r.fallback, Some(Fallback::ZeroReward));
        assert_eq!(r.lambda, 0.4);
        assert_eq!(r.weights, p.weights);
        assert!((r.row_sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn observation_validation() {
        assert!(RewardObservation::new(AgentId(1), -1.0, [(AgentId(2), 1.0)].into()).is_err());
        assert!(RewardObservation::new(AgentId(1), 1.0, BTreeMap::new()).is_err());
        assert!(RewardObservation::new(AgentId(1), 1.0, [(AgentId(2), f64::NAN)].into()).is_err());
    }

    #[test]
    fn grid_interpolation() {
        let g = GridField::<f64>::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let u = UtilityField::grid(g);
        assert_eq!(u.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(u.evaluate(&[1.0, 1.0]).unwrap(), 3.0);
        assert!((u.evaluate(&[0.5, 0.5]).unwrap() - 1.5).abs() < 1e-15);
        assert!((u.evaluate(&[0.25, 0.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn grid_from_csv() {
        let csv = "o1,o2,value\n0,0,1\n0,1,1\n1,0,2\n1,1,2\n";
        let g: GridField<f64> = GridField::from_csv(csv.as_bytes()).unwrap();
        let u = UtilityField::grid(g);
        assert!((u.evaluate(&[0.5, 0.3]).unwrap() - 1.5).abs() < 1e-15);
        let holes = "o1,o2,value\n0,0,1\n1,1,2\n";
        assert!(GridField::<f64>::from_csv(holes.as_bytes()).is_err());
        let neg = "o1,value\n0,-1\n1,2\n";
        assert!(GridField::<f64>::from_csv(neg.as_bytes()).is_err());
    }
}
