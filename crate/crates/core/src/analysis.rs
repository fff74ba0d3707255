//! Stability, equilibrium, layered-structure and containment analysis.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fj::{InputVector, ModelError, OpinionState, SystemMatrices};
use crate::graph::{
    infer_layering, validate_layering, Community, EdgeSet, GraphError, Layering, LayeringMode, SelectionMatrices,
};
use crate::hull::{convex_hull_2d, hull_distance, point_in_convex_polygon};
use crate::linalg::{DenseMatrix, LinalgError, Lu};
use crate::scalar::Scalar;

/// Condition-number ceiling above which `I − A` counts as singular.
pub const MAX_CONDITION: f64 = 1e12;
/// Iteration cap for the Perron-root estimate.
pub const POWER_ITERATION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("no unique equilibrium: I - A is singular or too ill-conditioned")]
    NoUniqueEquilibrium,
    #[error("layered update requested in {requested:?} mode but the transformed system does not have that structure")]
    ModeMismatch { requested: LayeringMode },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn collatz_wielandt<T: Scalar>(block: &DenseMatrix<T>) -> T {
    // block is irreducible and nonnegative; block + I is primitive, so plain
    // power iteration converges and min/max ratios bracket its Perron root.
    let n = block.rows();
    let shifted = block.add(&DenseMatrix::identity(n));
    let mut x = vec![T::one(); n];
    let (mut lo, mut hi) = (T::zero(), T::infinity());
    for _ in 0..POWER_ITERATION_CAP {
        let y = shifted.mul_vec(&x);
        lo = T::infinity();
        hi = T::zero();
        for (&yi, &xi) in y.iter().zip(&x) {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let top = y.iter().copied().fold(T::zero(), T::max);
        x = y.into_iter().map(|v| v / top).collect();
        if hi - lo <= T::eigen_tolerance() * hi {
            break;
        }
    }
    ((lo + hi) / T::lit(2.0) - T::one()).max(T::zero())
}

/// Spectral radius of a nonnegative square matrix.
///
/// The matrix is split into its strongly connected components; the radius is
/// the largest Perron root among the irreducible diagonal blocks, so nilpotent
/// (acyclic) patterns give exactly zero. Entries are taken in absolute value,
/// which is the identity on the intended nonnegative inputs.
pub fn spectral_radius<T: Scalar>(a: &DenseMatrix<T>) -> Result<T, AnalysisError> {
    if !a.is_square() {
        return Err(AnalysisError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    let abs = a.map(T::abs);
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && abs[(i, j)] != T::zero() {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut rho = T::zero();
    for comp in tarjan_scc(&g) {
        let idx: Vec<usize> = comp.iter().map(|v| v.index()).collect();
        let r = if idx.len() == 1 {
            abs[(idx[0], idx[0])]
        } else {
            collatz_wielandt(&abs.select_rows(&idx).select_cols(&idx))
        };
        rho = rho.max(r);
    }
    Ok(rho)
}

/// `D = −I + A` together with the stability verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct HurwitzCheck<T> {
    pub d: DenseMatrix<T>,
    pub spectral_radius: T,
    pub hurwitz: bool,
}

/// For nonnegative `A` the eigenvalues of `D` lie in the disk of radius
/// `ρ(A)` around −1, and the Perron root sits on the real axis, so `D` is
/// Hurwitz exactly when `ρ(A) < 1`.
pub fn check_hurwitz<T: Scalar>(a: &DenseMatrix<T>) -> Result<HurwitzCheck<T>, AnalysisError> {
    let r = spectral_radius(a)?;
    Ok(HurwitzCheck {
        d: a.sub(&DenseMatrix::identity(a.rows())),
        spectral_radius: r,
        hurwitz: r < T::one() - T::eigen_tolerance(),
    })
}

/// Steady-state matrix `C = −D⁻¹ B`, obtained by solving `(I − A) C = B`.
pub fn steady_state_matrix<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>, AnalysisError> {
    if !a.is_square() {
        return Err(AnalysisError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    if b.rows() != a.rows() {
        return Err(AnalysisError::Dimension(format!("B has {} rows, A has {}", b.rows(), a.rows())));
    }
    let m = DenseMatrix::identity(a.rows()).sub(a);
    let lu = match Lu::factor(&m) {
        Ok(lu) => lu,
        Err(LinalgError::Singular) => return Err(AnalysisError::NoUniqueEquilibrium),
        Err(e) => return Err(AnalysisError::Dimension(e.to_string())),
    };
    let cond = lu.condition_estimate();
    if !(cond.to_f64().unwrap_or(f64::INFINITY) <= MAX_CONDITION) {
        return Err(AnalysisError::NoUniqueEquilibrium);
    }
    Ok(lu.solve_mat(b))
}

/// `x* = (I_n ⊗ C) u`.
pub fn equilibrium<T: Scalar>(c: &DenseMatrix<T>, u: &InputVector<T>) -> Result<OpinionState<T>, AnalysisError> {
    if c.cols() != u.n_agents() {
        return Err(AnalysisError::Dimension(format!("C has {} columns, u has {} agents", c.cols(), u.n_agents())));
    }
    let x = (0..u.subjects()).flat_map(|j| c.mul_vec(u.subject_block(j))).collect();
    Ok(OpinionState::from_vec(x, c.rows())?)
}

/// Equilibrium quantities of the system in force at step `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult<T> {
    pub step: usize,
    pub c: DenseMatrix<T>,
    pub x_star: OpinionState<T>,
    pub spectral_radius: T,
    pub hurwitz: bool,
}

impl<T: Scalar> EquilibriumResult<T> {
    pub fn compute(mats: &SystemMatrices<T>, u: &InputVector<T>, step: usize) -> Result<Self, AnalysisError> {
        let h = check_hurwitz(mats.a())?;
        let c = steady_state_matrix(mats.a(), &mats.b())?;
        let x_star = equilibrium(&c, u)?;
        Ok(Self { step, c, x_star, spectral_radius: h.spectral_radius, hurwitz: h.hurwitz })
    }

    pub fn row_sum_error_max(&self) -> T {
        self.c.row_sums().into_iter().fold(T::zero(), |m, s| m.max((s - T::one()).abs()))
    }
}

/// System rewritten in layer order: `Ā = Q A Qᵀ`, `S̄ = Q S`, `Λ̄ = Q Λ Qᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem<T> {
    a_bar: DenseMatrix<T>,
    s_bar: DenseMatrix<T>,
    lambda_bar: DenseMatrix<T>,
    sel: SelectionMatrices,
}

pub fn reduce_system<T: Scalar>(
    mats: &SystemMatrices<T>,
    sel: &SelectionMatrices,
) -> Result<ReducedSystem<T>, AnalysisError> {
    if sel.n_regular() != mats.n_regular() || sel.n_stubborn() != mats.n_stubborn() {
        return Err(AnalysisError::Dimension(format!(
            "selection is for {}+{} agents, system has {}+{}",
            sel.n_regular(),
            sel.n_stubborn(),
            mats.n_regular(),
            mats.n_stubborn()
        )));
    }
    let q: DenseMatrix<T> = sel.q();
    let qt = q.transpose();
    Ok(ReducedSystem {
        a_bar: q.matmul(mats.a()).matmul(&qt),
        s_bar: q.matmul(mats.s()),
        lambda_bar: q.matmul(&mats.lambda()).matmul(&qt),
        sel: sel.clone(),
    })
}

impl<T: Scalar> ReducedSystem<T> {
    pub fn a_bar(&self) -> &DenseMatrix<T> {
        &self.a_bar
    }

    pub fn s_bar(&self) -> &DenseMatrix<T> {
        &self.s_bar
    }

    pub fn lambda_bar(&self) -> &DenseMatrix<T> {
        &self.lambda_bar
    }

    pub fn selection(&self) -> &SelectionMatrices {
        &self.sel
    }

    pub fn depth(&self) -> usize {
        self.sel.depth()
    }

    /// `Ā_pq = Q_p A Q_qᵀ` (1-based layers).
    pub fn a_block(&self, p: usize, q: usize) -> DenseMatrix<T> {
        let (rp, rq) = (self.sel.layer_range(p), self.sel.layer_range(q));
        self.a_bar.block(rp.start, rq.start, rp.len(), rq.len())
    }

    pub fn lambda_block(&self, p: usize, q: usize) -> DenseMatrix<T> {
        let (rp, rq) = (self.sel.layer_range(p), self.sel.layer_range(q));
        self.lambda_bar.block(rp.start, rq.start, rp.len(), rq.len())
    }

    /// `S̄_l = Q_l S`.
    pub fn s_block(&self, l: usize) -> DenseMatrix<T> {
        let r = self.sel.layer_range(l);
        self.s_bar.block(r.start, 0, r.len(), self.s_bar.cols())
    }

    /// `Ā_pq = 0` whenever `q > p`.
    pub fn is_block_lower_triangular(&self) -> bool {
        let m = self.depth();
        (1..=m).all(|p| (p + 1..=m).all(|q| self.a_block(p, q).is_zero()))
    }

    pub fn has_zero_diagonal_blocks(&self) -> bool {
        (1..=self.depth()).all(|l| self.a_block(l, l).is_zero())
    }

    /// Rows of `S̄` past the first layer are all zero.
    pub fn stubborn_confined_to_first_layer(&self) -> bool {
        (2..=self.depth()).all(|l| self.s_block(l).is_zero())
    }

    /// Structure actually present in the transformed matrices.
    pub fn structure(&self) -> Option<LayeringMode> {
        if !self.is_block_lower_triangular() {
            None
        } else if self.has_zero_diagonal_blocks() {
            Some(LayeringMode::Strict)
        } else {
            Some(LayeringMode::Weak)
        }
    }

    fn permute(&self, v: &[T], forward: bool) -> Vec<T> {
        let order = self.sel.order();
        let mut out = vec![T::zero(); v.len()];
        for (r, &c) in order.iter().enumerate() {
            if forward {
                out[r] = v[c];
            } else {
                out[c] = v[r];
            }
        }
        out
    }

    /// `x̄ = (I_n ⊗ Q) x`.
    pub fn transform_state(&self, x: &OpinionState<T>) -> Result<OpinionState<T>, AnalysisError> {
        self.check_state(x)?;
        let v = (0..x.subjects()).flat_map(|j| self.permute(x.subject_block(j), true)).collect();
        Ok(OpinionState::from_vec(v, x.n_regular())?)
    }

    /// `x = (I_n ⊗ Qᵀ) x̄`.
    pub fn restore_state(&self, x_bar: &OpinionState<T>) -> Result<OpinionState<T>, AnalysisError> {
        self.check_state(x_bar)?;
        let v = (0..x_bar.subjects()).flat_map(|j| self.permute(x_bar.subject_block(j), false)).collect();
        Ok(OpinionState::from_vec(v, x_bar.n_regular())?)
    }

    /// `ū = (I_n ⊗ H) u`.
    pub fn transform_input(&self, u: &InputVector<T>) -> Result<InputVector<T>, AnalysisError> {
        if u.n_agents() != self.sel.n_regular() + self.sel.n_stubborn() || u.n_stubborn() != self.sel.n_stubborn() {
            return Err(AnalysisError::Dimension("input does not match selection".into()));
        }
        let mut v = Vec::with_capacity(u.as_slice().len());
        for j in 0..u.subjects() {
            v.extend_from_slice(u.stubborn_block(j));
            v.extend(self.permute(u.regular_block(j), true));
        }
        Ok(InputVector::from_vec(v, u.n_agents(), u.n_stubborn())?)
    }

    fn check_state(&self, x: &OpinionState<T>) -> Result<(), AnalysisError> {
        if x.n_regular() != self.sel.n_regular() {
            return Err(AnalysisError::Dimension(format!(
                "state has {} agents, selection {}",
                x.n_regular(),
                self.sel.n_regular()
            )));
        }
        Ok(())
    }

    /// Transformed dynamics `x̄(k+1) = (I_n ⊗ Ā) x̄(k) + (I_n ⊗ [S̄ Λ̄]) ū`.
    pub fn step_transformed(
        &self,
        x_bar: &OpinionState<T>,
        u_bar: &InputVector<T>,
    ) -> Result<OpinionState<T>, AnalysisError> {
        self.check_state(x_bar)?;
        let b_bar = self.s_bar.hcat(&self.lambda_bar);
        let mut v = Vec::with_capacity(x_bar.as_slice().len());
        for j in 0..x_bar.subjects() {
            let ax = self.a_bar.mul_vec(x_bar.subject_block(j));
            let bu = b_bar.mul_vec(u_bar.subject_block(j));
            v.extend(ax.into_iter().zip(bu).map(|(a, b)| a + b));
        }
        Ok(OpinionState::from_vec(v, x_bar.n_regular())?)
    }
}

/// Per-layer opinion stacks `x̄_1 … x̄_M`, each subject-major over its layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredState<T> {
    layers: Vec<Vec<T>>,
    subjects: usize,
}

impl<T: Scalar> LayeredState<T> {
    /// Splits `x̄_l = (I_n ⊗ Q_l) x`.
    pub fn split(x: &OpinionState<T>, reduced: &ReducedSystem<T>) -> Result<Self, AnalysisError> {
        let x_bar = reduced.transform_state(x)?;
        let sel = reduced.selection();
        let layers = (1..=sel.depth())
            .map(|l| {
                let r = sel.layer_range(l);
                (0..x.subjects()).flat_map(|j| x_bar.subject_block(j)[r.clone()].to_vec()).collect()
            })
            .collect();
        Ok(Self { layers, subjects: x.subjects() })
    }

    /// Reassembles the original-order state.
    pub fn merge(&self, reduced: &ReducedSystem<T>) -> Result<OpinionState<T>, AnalysisError> {
        let sel = reduced.selection();
        let nr = sel.n_regular();
        let mut v = vec![T::zero(); nr * self.subjects];
        for (l, layer) in self.layers.iter().enumerate() {
            let r = sel.layer_range(l + 1);
            for j in 0..self.subjects {
                v[j * nr + r.start..j * nr + r.end].copy_from_slice(&layer[j * r.len()..(j + 1) * r.len()]);
            }
        }
        reduced.restore_state(&OpinionState::from_vec(v, nr)?)
    }

    pub fn layer(&self, l: usize) -> &[T] {
        &self.layers[l - 1]
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    fn subject_slice(&self, l: usize, j: usize) -> &[T] {
        let layer = &self.layers[l - 1];
        let size = layer.len() / self.subjects;
        &layer[j * size..(j + 1) * size]
    }
}

/// One layer-by-layer step.
///
/// Layer `l` combines `Ā_lh x̄_h(k)` over `h ≤ l` (weak) or `h < l` (strict),
/// its own bias term `Λ̄_ll x̄_l(0)` and the stubborn term `S̄_l ū_S`. The
/// stubborn term vanishes for `l > 1` whenever only the first layer listens
/// to stubborn agents.
pub fn layered_step<T: Scalar>(
    state: &LayeredState<T>,
    reduced: &ReducedSystem<T>,
    initials: &LayeredState<T>,
    u: &InputVector<T>,
    mode: LayeringMode,
) -> Result<LayeredState<T>, AnalysisError> {
    let structure = reduced.structure();
    let ok = match mode {
        LayeringMode::Weak => structure.is_some(),
        LayeringMode::Strict => structure == Some(LayeringMode::Strict),
    };
    if !ok {
        return Err(AnalysisError::ModeMismatch { requested: mode });
    }
    let m = reduced.depth();
    if state.depth() != m || initials.depth() != m {
        return Err(AnalysisError::Dimension("layer count mismatch".into()));
    }
    let mut layers = Vec::with_capacity(m);
    for l in 1..=m {
        let upper = match mode {
            LayeringMode::Weak => l,
            LayeringMode::Strict => l - 1,
        };
        let lam = reduced.lambda_block(l, l);
        let s = reduced.s_block(l);
        let mut out = Vec::new();
        for j in 0..state.subjects {
            let mut v = lam.mul_vec(initials.subject_slice(l, j));
            for (acc, su) in v.iter_mut().zip(s.mul_vec(u.stubborn_block(j))) {
                *acc += su;
            }
            for h in 1..=upper {
                let ah = reduced.a_block(l, h).mul_vec(state.subject_slice(h, j));
                for (acc, a) in v.iter_mut().zip(ah) {
                    *acc += a;
                }
            }
            out.extend(v);
        }
        layers.push(out);
    }
    Ok(LayeredState { layers, subjects: state.subjects })
}

/// Convergence guarantee for a transformed system.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvergenceCertificate<T> {
    /// Exact convergence after `steps = M` updates; layer `l` is frozen from
    /// step `layer_fixed_at[l-1]` on.
    Finite { steps: usize, layer_fixed_at: Vec<usize> },
    /// Geometric convergence at rate `spectral_radius`.
    Asymptotic { spectral_radius: T },
}

pub fn convergence_certificate<T: Scalar>(
    reduced: &ReducedSystem<T>,
    mode: LayeringMode,
) -> Result<ConvergenceCertificate<T>, AnalysisError> {
    let m = reduced.depth();
    if mode == LayeringMode::Strict && reduced.structure() == Some(LayeringMode::Strict) {
        let nilpotent = reduced.a_bar().pow(m as u32).is_zero();
        if nilpotent {
            let mut fixed = Vec::with_capacity(m);
            for l in 1..=m {
                let t = (1..l)
                    .filter(|&h| !reduced.a_block(l, h).is_zero())
                    .map(|h| fixed[h - 1] + 1)
                    .max()
                    .unwrap_or(1);
                fixed.push(t);
            }
            return Ok(ConvergenceCertificate::Finite { steps: m, layer_fixed_at: fixed });
        }
    }
    Ok(ConvergenceCertificate::Asymptotic { spectral_radius: spectral_radius(reduced.a_bar())? })
}

/// Containment verdict for one regular agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentContainment {
    /// Position among the regular agents.
    pub regular_index: usize,
    /// Row of `C` is a valid convex-combination certificate for `x*_i`.
    pub convex_certificate: bool,
    /// Distance to the stubborn hull, when the hull test ran.
    pub hull_distance: Option<f64>,
    pub in_hull: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub hull_checked: bool,
    pub agents: Vec<AgentContainment>,
}

impl ContainmentReport {
    pub fn certificates_ok(&self) -> bool {
        self.agents.iter().all(|a| a.convex_certificate)
    }

    pub fn hull_ok(&self) -> bool {
        self.agents.iter().all(|a| a.in_hull != Some(false))
    }

    /// Regular positions failing any performed check.
    pub fn violations(&self) -> Vec<usize> {
        self.agents
            .iter()
            .filter(|a| !a.convex_certificate || a.in_hull == Some(false))
            .map(|a| a.regular_index)
            .collect()
    }
}

/// Checks that every equilibrium opinion is a convex combination of the
/// entries of `u` (certificate: the matching row of `C`); with all biases
/// zero, also that it lies in the convex hull of the stubborn opinions.
pub fn containment_check<T: Scalar>(
    x_star: &OpinionState<T>,
    c: &DenseMatrix<T>,
    u: &InputVector<T>,
    lambda_all_zero: bool,
) -> Result<ContainmentReport, AnalysisError> {
    if c.rows() != x_star.n_regular() || c.cols() != u.n_agents() || u.subjects() != x_star.subjects() {
        return Err(AnalysisError::Dimension("containment inputs disagree".into()));
    }
    let sum_tol = T::hull_slack();
    let neg_tol = T::row_tolerance();
    let n = x_star.subjects();
    let stubborn = u.stubborn_opinions().to_rows();
    let planar_hull = (lambda_all_zero && n == 2)
        .then(|| convex_hull_2d(&stubborn.iter().map(|p| [p[0], p[1]]).collect::<Vec<_>>()));
    let mut agents = Vec::with_capacity(c.rows());
    for i in 0..c.rows() {
        let row = c.row(i);
        let sum: T = row.iter().copied().sum();
        let point = x_star.agent(i);
        let reproduces = (0..n).all(|j| {
            let v: T = row.iter().zip(u.subject_block(j)).map(|(&a, &b)| a * b).sum();
            (v - point[j]).abs() <= sum_tol
        });
        let convex_certificate =
            row.iter().all(|&v| v >= -neg_tol) && (sum - T::one()).abs() <= sum_tol && reproduces;
        let (hull_distance, in_hull) = if lambda_all_zero {
            let d = hull_distance(&stubborn, &point);
            let inside = match &planar_hull {
                Some(h) => point_in_convex_polygon(h, [point[0], point[1]], T::hull_slack()),
                None => d <= T::hull_slack(),
            };
            (d.to_f64(), Some(inside))
        } else {
            (None, None)
        };
        agents.push(AgentContainment { regular_index: i, convex_certificate, hull_distance, in_hull });
    }
    Ok(ContainmentReport { hull_checked: lambda_all_zero, agents })
}

/// Serializable summary of the layering found in an edge set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeringReport {
    /// `strict`, `weak` or `not_reducible`.
    pub kind: String,
    pub layers: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `finite` or `asymptotic`.
    pub mode: String,
    pub steps: Option<usize>,
    pub layer_fixed_at: Option<Vec<usize>>,
    pub spectral_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentSummary {
    /// Whether the stubborn-hull test ran (all biases zero).
    pub checked: bool,
    pub certificates_ok: bool,
    /// Regular agent ids failing a check.
    pub violations: Vec<usize>,
}

/// Equilibrium opinions per regular agent, or the literal
/// `"no unique equilibrium"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EquilibriumField {
    Unique(Vec<Vec<f64>>),
    Missing(String),
}

pub const NO_UNIQUE_EQUILIBRIUM: &str = "no unique equilibrium";

/// Structured analysis record of one frozen system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub step: usize,
    pub spectral_radius: f64,
    pub hurwitz: bool,
    pub row_sum_error_max: Option<f64>,
    #[serde(rename = "min_C_entry")]
    pub min_c_entry: Option<f64>,
    pub equilibrium: EquilibriumField,
    pub steady_state: Option<Vec<Vec<f64>>>,
    pub layering: LayeringReport,
    pub convergence: ConvergenceReport,
    pub containment: ContainmentSummary,
}

fn f<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn to_f64_rows<T: Scalar>(m: &DenseMatrix<T>) -> Vec<Vec<f64>> {
    m.to_rows().into_iter().map(|r| r.into_iter().map(f).collect()).collect()
}

/// Runs the full analysis of the system `(community, edges, mats, u)` in
/// force at `step`. A missing equilibrium is reported, not returned as error.
pub fn analyze<T: Scalar>(
    community: &Community,
    edges: &EdgeSet,
    mats: &SystemMatrices<T>,
    u: &InputVector<T>,
    step: usize,
) -> Result<AnalysisReport, AnalysisError> {
    let hurwitz = check_hurwitz(mats.a())?;
    let layering = infer_layering(edges);
    let (kind, sel, mode) = match &layering {
        Layering::NotReducible => ("not_reducible", SelectionMatrices::identity(mats.n_regular(), mats.n_stubborn()), None),
        Layering::Strict(p) | Layering::Weak(p) => {
            let mode = if validate_layering(edges, p, LayeringMode::Strict)? {
                LayeringMode::Strict
            } else {
                LayeringMode::Weak
            };
            let kind = if mode == LayeringMode::Strict { "strict" } else { "weak" };
            (kind, crate::graph::build_selection_matrices(community, p)?, Some(mode))
        }
    };
    let layers = layering
        .partition()
        .map(|p| p.layers().iter().map(|l| l.iter().map(|a| a.0).collect()).collect())
        .unwrap_or_default();
    let reduced = reduce_system(mats, &sel)?;
    let convergence = match convergence_certificate(&reduced, mode.unwrap_or(LayeringMode::Weak))? {
        ConvergenceCertificate::Finite { steps, layer_fixed_at } => ConvergenceReport {
            mode: "finite".into(),
            steps: Some(steps),
            layer_fixed_at: Some(layer_fixed_at),
            spectral_radius: Some(0.0),
        },
        ConvergenceCertificate::Asymptotic { spectral_radius } => ConvergenceReport {
            mode: "asymptotic".into(),
            steps: None,
            layer_fixed_at: None,
            spectral_radius: Some(f(spectral_radius)),
        },
    };
    let regular = community.regular();
    let (equilibrium_field, steady_state, row_err, min_c, containment) =
        match steady_state_matrix(mats.a(), &mats.b()) {
            Ok(c) => {
                let x_star = equilibrium(&c, u)?;
                let all_zero = mats.bias().iter().all(|&v| v == T::zero());
                let report = containment_check(&x_star, &c, u, all_zero)?;
                let rows = (0..x_star.n_regular()).map(|i| x_star.agent(i).into_iter().map(f).collect()).collect();
                let row_err = c.row_sums().into_iter().fold(T::zero(), |m, s| m.max((s - T::one()).abs()));
                (
                    EquilibriumField::Unique(rows),
                    Some(to_f64_rows(&c)),
                    Some(f(row_err)),
                    c.min_entry().map(f),
                    ContainmentSummary {
                        checked: report.hull_checked,
                        certificates_ok: report.certificates_ok(),
                        violations: report.violations().into_iter().map(|r| regular[r].0).collect(),
                    },
                )
            }
            Err(AnalysisError::NoUniqueEquilibrium) => (
                EquilibriumField::Missing(NO_UNIQUE_EQUILIBRIUM.into()),
                None,
                None,
                None,
                ContainmentSummary { checked: false, certificates_ok: false, violations: vec![] },
            ),
            Err(e) => return Err(e),
        };
    Ok(AnalysisReport {
        step,
        spectral_radius: f(hurwitz.spectral_radius),
        hurwitz: hurwitz.hurwitz,
        row_sum_error_max: row_err,
        min_c_entry: min_c,
        equilibrium: equilibrium_field,
        steady_state,
        layering: LayeringReport { kind: kind.into(), layers },
        convergence,
        containment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fj::{BiasMatrix, InfluenceMatrix};
    use crate::graph::AgentId;

    fn m(rows: &[&[f64]]) -> DenseMatrix<f64> {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn spectral_radius_examples() {
        assert_eq!(spectral_radius(&DenseMatrix::<f64>::zeros(3, 3)).unwrap(), 0.0);
        let r = spectral_radius(&m(&[&[0.0, 0.5], &[0.5, 0.0]])).unwrap();
        assert!((r - 0.5).abs() < 1e-10);
        let lower = m(&[&[0.0, 0.0, 0.0], &[0.7, 0.0, 0.0], &[0.2, 0.8, 0.0]]);
        assert_eq!(spectral_radius(&lower).unwrap(), 0.0);
        assert!(matches!(
            spectral_radius(&DenseMatrix::<f64>::zeros(2, 3)),
            Err(AnalysisError::NotSquare { .. })
        ));
    }

    #[test]
    fn hurwitz_examples() {
        let h = check_hurwitz(&DenseMatrix::<f64>::zeros(2, 2)).unwrap();
        assert!(h.hurwitz);
        assert_eq!(h.d, DenseMatrix::identity(2).scale(-1.0));
        let cyc = check_hurwitz(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!(!cyc.hurwitz);
    }

    #[test]
    fn steady_state_examples() {
        let c = steady_state_matrix(&m(&[&[0.0]]), &m(&[&[0.5, 0.5]])).unwrap();
        assert_eq!(c.to_rows(), vec![vec![0.5, 0.5]]);
        let u = InputVector::from_vec(vec![1.0, 0.0], 2, 1).unwrap();
        assert_eq!(equilibrium(&c, &u).unwrap().as_slice(), &[0.5]);

        let b: DenseMatrix<f64> = DenseMatrix::zeros(2, 2).hcat(&DenseMatrix::identity(2));
        let c = steady_state_matrix(&DenseMatrix::zeros(2, 2), &b).unwrap();
        assert_eq!(c, b);

        let singular = steady_state_matrix(&m(&[&[0.0, 1.0], &[1.0, 0.0]]), &m(&[&[0.0], &[0.0]]));
        assert_eq!(singular, Err(AnalysisError::NoUniqueEquilibrium));
    }

    #[test]
    fn constant_input_gives_constant_equilibrium() {
        let c = steady_state_matrix(&m(&[&[0.0, 0.3], &[0.2, 0.0]]), &m(&[&[0.7, 0.0, 0.0], &[0.3, 0.1, 0.4]]))
            .unwrap();
        let u = InputVector::from_vec(vec![0.4; 3], 3, 1).unwrap();
        for v in equilibrium(&c, &u).unwrap().as_slice() {
            assert!((v - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_reduction_is_noop() {
        let a = m(&[&[0.0, 0.3], &[0.2, 0.0]]);
        let mats = SystemMatrices::from_parts(a.clone(), m(&[&[0.5], &[0.4]]), vec![0.2, 0.4]).unwrap();
        let r = reduce_system(&mats, &SelectionMatrices::identity(2, 1)).unwrap();
        assert_eq!(r.a_bar(), &a);
        assert_eq!(r.s_bar(), mats.s());
        assert_eq!(r.lambda_bar(), &mats.lambda());
    }

    #[test]
    fn strict_certificate_and_layers() {
        // stubborn 4 -> 1 -> 2 -> 3
        let c = Community::with_regular_prefix(1, 4, 3).unwrap();
        let e = EdgeSet::from_records(
            &c,
            0,
            [(AgentId(1), vec![AgentId(4)]), (AgentId(2), vec![AgentId(1)]), (AgentId(3), vec![AgentId(2)])],
        )
        .unwrap();
        let w = InfluenceMatrix::uniform(&c, &e).unwrap();
        let mats = SystemMatrices::assemble(&w, &BiasMatrix::constant(3, 0.25).unwrap()).unwrap();
        let part = infer_layering(&e).partition().unwrap().clone();
        let sel = crate::graph::build_selection_matrices(&c, &part).unwrap();
        let red = reduce_system(&mats, &sel).unwrap();
        assert_eq!(
            convergence_certificate(&red, LayeringMode::Strict).unwrap(),
            ConvergenceCertificate::Finite { steps: 3, layer_fixed_at: vec![1, 2, 3] }
        );
        let weak = convergence_certificate(&red, LayeringMode::Weak).unwrap();
        assert_eq!(weak, ConvergenceCertificate::Asymptotic { spectral_radius: 0.0 });
    }

    #[test]
    fn strict_layered_step_rejects_weak_structure() {
        let a = m(&[&[0.3, 0.0], &[0.2, 0.0]]);
        let mats = SystemMatrices::from_parts(a, m(&[&[0.5], &[0.0]]), vec![0.2, 0.8]).unwrap();
        let sel = SelectionMatrices::from_order(vec![0, 1], vec![1, 1], 1).unwrap();
        let red = reduce_system(&mats, &sel).unwrap();
        assert_eq!(red.structure(), Some(LayeringMode::Weak));
        let x = OpinionState::from_vec(vec![0.1, 0.2], 2).unwrap();
        let ls = LayeredState::split(&x, &red).unwrap();
        let u = InputVector::from_vec(vec![0.5, 0.1, 0.2], 3, 1).unwrap();
        assert!(matches!(
            layered_step(&ls, &red, &ls, &u, LayeringMode::Strict),
            Err(AnalysisError::ModeMismatch { .. })
        ));
        assert!(layered_step(&ls, &red, &ls, &u, LayeringMode::Weak).is_ok());
    }

    #[test]
    fn containment_certificate_for_toy() {
        let c = m(&[&[0.5, 0.5]]);
        let u = InputVector::from_vec(vec![1.0, 0.0], 2, 1).unwrap();
        let x = equilibrium(&c, &u).unwrap();
        let rep = containment_check(&x, &c, &u, false).unwrap();
        assert!(rep.certificates_ok());
        assert!(!rep.hull_checked);
        assert_eq!(rep.agents[0].in_hull, None);
    }

    #[test]
    fn single_stubborn_hull_is_a_point() {
        // λ = 0, one stubborn agent: every equilibrium equals its opinion
        let c = Community::with_regular_prefix(2, 3, 2).unwrap();
        let e = EdgeSet::from_records(&c, 0, [(AgentId(1), vec![AgentId(3)]), (AgentId(2), vec![AgentId(1)])])
            .unwrap();
        let w = InfluenceMatrix::uniform(&c, &e).unwrap();
        let mats = SystemMatrices::assemble(&w, &BiasMatrix::constant(2, 0.0).unwrap()).unwrap();
        let ops = m(&[&[0.9, 0.1], &[0.4, 0.4], &[0.3, 0.7]]);
        let u = InputVector::from_opinions(&c, &ops).unwrap();
        let eq = EquilibriumResult::compute(&mats, &u, 0).unwrap();
        for i in 0..2 {
            assert_eq!(eq.x_star.agent(i), vec![0.3, 0.7]);
        }
        let rep = containment_check(&eq.x_star, &eq.c, &u, true).unwrap();
        assert!(rep.hull_checked && rep.hull_ok() && rep.certificates_ok());
    }
}
