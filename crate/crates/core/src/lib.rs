//! Friedkin–Johnsen opinion dynamics with stubborn agents, layered
//! reducibility and reward-driven steering of bias and influence weights.

pub mod analysis;
pub mod config;
pub mod fj;
pub mod graph;
pub mod hull;
pub mod linalg;
pub mod reward;
pub mod scalar;
pub mod scenarios;
pub mod simulator;

pub use analysis::{
    analyze, check_hurwitz, containment_check, convergence_certificate, equilibrium, layered_step, reduce_system,
    spectral_radius, steady_state_matrix, AnalysisError, AnalysisReport, ConvergenceCertificate, EquilibriumResult,
    LayeredState, ReducedSystem,
};
pub use fj::{
    step_agent, step_network, BiasMatrix, InfluenceMatrix, InputVector, ModelError, OpinionState, OpinionVector,
    SystemMatrices,
};
pub use graph::{
    build_selection_matrices, infer_layering, stubborn_reachable, validate_layering, AgentId, Community, EdgeSet,
    GraphError, LayerPartition, Layering, LayeringMode, SelectionMatrices,
};
pub use linalg::{DenseMatrix, LinalgError};
pub use reward::{
    local_reward_sum, reward_step, update_influence_row, GridField, RewardError, RewardObservation, RowWeights,
    Utility, UtilityField,
};
pub use scalar::Scalar;

pub type Matrix64 = DenseMatrix<f64>;
pub type Matrix32 = DenseMatrix<f32>;
pub type SystemMatrices64 = SystemMatrices<f64>;
pub type SystemMatrices32 = SystemMatrices<f32>;
pub type InfluenceMatrix64 = InfluenceMatrix<f64>;
pub type BiasMatrix64 = BiasMatrix<f64>;
pub type OpinionState64 = OpinionState<f64>;
pub type InputVector64 = InputVector<f64>;
pub type ReducedSystem64 = ReducedSystem<f64>;
pub type UtilityField64 = UtilityField<f64>;
pub type EquilibriumResult64 = EquilibriumResult<f64>;
