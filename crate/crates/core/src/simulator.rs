//! Full runs: edge sampling, the reward → matrices → opinions pipeline,
//! convergence detection and trajectory/report recording.
//!
//! Randomness comes from `ChaCha8Rng` seeded with the run seed; step `k`
//! draws from stream `k`, so the edges at step `k` do not depend on the
//! horizon or on earlier steps.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{analyze, AnalysisError, AnalysisReport, EquilibriumField};
use crate::config::{GraphPlan, RandomGraphSpec, Scenario, WeightPlan};
use crate::fj::{step_network, InfluenceMatrix, InputVector, ModelError, OpinionState, SystemMatrices};
use crate::graph::{all_reachable, AgentId, Community, EdgeSet, GraphError};
use crate::linalg::{inf_norm_diff, DenseMatrix};
use crate::reward::{initial_rewards, reward_step, RewardError, RowWeights, Utility};

/// Whole-edge-set redraws allowed per step when reachability is required.
pub const REJECTION_CAP: usize = 1000;

pub const UPDATE_ORDERING: &str = "sample_edges, rewards_at_x(k), rebuild_W_Lambda, advance_opinions";

#[derive(Debug, Error)]
pub enum StepFailure {
    #[error("graph")]
    Graph(#[from] GraphError),
    #[error("fj_core")]
    Model(#[from] ModelError),
    #[error("reward")]
    Reward(#[from] RewardError),
    #[error("analysis")]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("step {step}")]
    Step { step: usize, source: StepFailure },
    #[error("step {step}: no edge set reaching every regular agent from a stubborn one after {attempts} draws; increase out_degree")]
    Unreachable { step: usize, attempts: usize },
    #[error("reward-driven weights need a utility field")]
    NoUtility,
    #[error("trajectory CSV: {0}")]
    Csv(String),
}

fn at<E: Into<StepFailure>>(step: usize) -> impl Fn(E) -> SimError {
    move |e| SimError::Step { step, source: e.into() }
}

/// Draws `E_k`: every regular agent gets `out_degree` distinct in-neighbors,
/// uniform over `V \ {i}` (or over regular agents only, with probability
/// `1 − allow_stubborn_prob`). With `require_reachability` the whole set is
/// redrawn until every regular agent hears a stubborn one.
pub fn sample_edge_set(community: &Community, spec: &RandomGraphSpec, seed: u64, k: usize) -> Result<EdgeSet, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let n = community.agents();
    for _ in 0..REJECTION_CAP {
        let mut map = BTreeMap::new();
        for &i in community.regular() {
            let with_stubborn = rng.random_bool(spec.allow_stubborn_prob);
            let pool: Vec<AgentId> = (1..=n)
                .map(AgentId)
                .filter(|&j| j != i && (with_stubborn || !community.is_stubborn(j)))
                .collect();
            let d = spec.out_degree.min(pool.len());
            let picks = rand::seq::index::sample(&mut rng, pool.len(), d);
            map.insert(i, picks.iter().map(|p| pool[p]).collect());
        }
        let edges = EdgeSet::new(community, k, map).map_err(at(k))?;
        if !spec.require_reachability || all_reachable(&edges) {
            return Ok(edges);
        }
    }
    Err(SimError::Unreachable { step: k, attempts: REJECTION_CAP })
}

/// Opinions, biases and utilities of every agent at one step. Stubborn
/// agents carry no bias; utilities are absent when no field is configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    /// `N × n`, row `a` holding agent `a + 1`.
    pub opinions: Vec<Vec<f64>>,
    pub lambda: Vec<Option<f64>>,
    pub utility: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub agents: usize,
    pub subjects: usize,
    pub steps: Vec<StepRecord>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl TrajectoryLog {
    pub const HEADER: [&'static str; 6] = ["k", "agent_id", "subject", "opinion", "lambda", "utility"];

    /// Long-format CSV, one row per (step, agent, subject).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| SimError::Csv(e.to_string());
        w.write_record(Self::HEADER).map_err(err)?;
        for s in &self.steps {
            for (a, row) in s.opinions.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    w.write_record([
                        s.k.to_string(),
                        (a + 1).to_string(),
                        (j + 1).to_string(),
                        v.to_string(),
                        opt(s.lambda[a]),
                        opt(s.utility[a]),
                    ])
                    .map_err(err)?;
                }
            }
        }
        w.flush().map_err(|e| SimError::Csv(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, SimError> {
        let mut rdr = csv::Reader::from_reader(input);
        let bad = |m: String| SimError::Csv(m);
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != Self::HEADER {
            return Err(bad(format!("unexpected header {headers:?}")));
        }
        type Row = (usize, usize, usize, f64, Option<f64>, Option<f64>);
        let mut rows: Vec<Row> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let int = |i: usize| rec[i].parse::<usize>().map_err(|e| bad(format!("{:?}: {e}", &rec[i])));
            let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("{:?}: {e}", &rec[i])));
            let maybe = |i: usize| if rec[i].is_empty() { Ok(None) } else { num(i).map(Some) };
            rows.push((int(0)?, int(1)?, int(2)?, num(3)?, maybe(4)?, maybe(5)?));
        }
        let agents = rows.iter().map(|r| r.1).max().unwrap_or(0);
        let subjects = rows.iter().map(|r| r.2).max().unwrap_or(0);
        if rows.iter().any(|r| r.1 == 0 || r.2 == 0) {
            return Err(bad("agent ids and subjects are 1-based".into()));
        }
        let mut steps: Vec<StepRecord> = Vec::new();
        for (k, a, j, v, lambda, utility) in rows {
            if steps.last().is_none_or(|s| s.k != k) {
                if steps.last().is_some_and(|s| s.k > k) {
                    return Err(bad(format!("step {k} out of order")));
                }
                steps.push(StepRecord {
                    k,
                    opinions: vec![vec![f64::NAN; subjects]; agents],
                    lambda: vec![None; agents],
                    utility: vec![None; agents],
                });
            }
            let s = steps.last_mut().unwrap();
            s.opinions[a - 1][j - 1] = v;
            s.lambda[a - 1] = lambda;
            s.utility[a - 1] = utility;
        }
        if steps.iter().any(|s| s.opinions.iter().flatten().any(|v| v.is_nan())) {
            return Err(bad("missing (agent, subject) rows".into()));
        }
        Ok(Self { agents, subjects, steps })
    }

    /// `‖x(k+1) − x(k)‖∞` for consecutive logged steps.
    pub fn step_deltas(&self) -> Vec<f64> {
        self.steps
            .windows(2)
            .map(|w| {
                let a: Vec<f64> = w[0].opinions.iter().flatten().copied().collect();
                let b: Vec<f64> = w[1].opinions.iter().flatten().copied().collect();
                inf_norm_diff(&a, &b)
            })
            .collect()
    }

    pub fn in_unit_box(&self) -> bool {
        self.steps.iter().flat_map(|s| s.opinions.iter().flatten()).all(|v| (0.0..=1.0).contains(v))
    }
}

/// First `k` with `‖x(k+1) − x(k)‖∞ < ε`.
pub fn detect_convergence(log: &TrajectoryLog, epsilon: f64) -> Option<usize> {
    log.step_deltas().iter().position(|&d| d < epsilon).map(|p| log.steps[p].k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMeta {
    pub k: usize,
    pub row_sum_error_max: f64,
    pub edge_hash: String,
    /// Regular agents that hit a reward fallback at this step.
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario_name: String,
    pub seed: u64,
    pub converged: bool,
    pub convergence_step: Option<usize>,
    /// `equilibrium` when `L(k)` was frozen; `settled` when it varied, in
    /// which case only the step-delta criterion was met.
    pub criterion: String,
    pub matrices_static: bool,
    pub epsilon: f64,
    pub final_step: usize,
    pub step_deltas: Vec<f64>,
    pub steps: Vec<StepMeta>,
    pub update_ordering: String,
    /// `‖x(final) − x*‖∞` against the snapshot equilibrium.
    pub equilibrium_gap: Option<f64>,
    #[serde(flatten)]
    pub analysis: AnalysisReport,
}

/// Matrices and side data in force at one step.
#[derive(Debug, Clone)]
pub struct BuiltStep {
    pub edges: EdgeSet,
    pub mats: SystemMatrices<f64>,
    /// `λ_i` per regular position.
    pub lambda: Vec<f64>,
    /// Utility per agent, when a field is available.
    pub utilities: Option<Vec<f64>>,
    pub fallbacks: usize,
}

fn current_opinions(community: &Community, base: &DenseMatrix<f64>, x: &OpinionState<f64>) -> DenseMatrix<f64> {
    let mut cur = base.clone();
    for (r, id) in community.regular().iter().enumerate() {
        cur.row_mut(id.0 - 1).copy_from_slice(&x.agent(r));
    }
    cur
}

/// Per-step matrix construction: sample `E_k`, then (reward mode) evaluate
/// rewards at the current opinions and rebuild `W`, `Λ`.
pub struct Pipeline<'a> {
    scenario: &'a Scenario,
    utility: Option<&'a dyn Utility<f64>>,
    rewards0: Option<Vec<f64>>,
    previous: Option<Vec<RowWeights<f64>>>,
    input: InputVector<f64>,
}

impl<'a> Pipeline<'a> {
    pub fn new(scenario: &'a Scenario, utility: Option<&'a dyn Utility<f64>>) -> Result<Self, SimError> {
        let input = InputVector::from_opinions(&scenario.community, &scenario.opinions).map_err(at(0))?;
        let rewards0 = match (&scenario.weights, utility) {
            (WeightPlan::Reward { .. }, Some(f)) => {
                Some(initial_rewards(&scenario.community, &scenario.opinions, f).map_err(at(0))?)
            }
            (WeightPlan::Reward { .. }, None) => return Err(SimError::NoUtility),
            _ => None,
        };
        Ok(Self { scenario, utility, rewards0, previous: None, input })
    }

    /// The constant input `u`.
    pub fn input(&self) -> &InputVector<f64> {
        &self.input
    }

    /// Builds `L(k)` from the opinions `cur` (`N × n`) at step `k`.
    pub fn build(&mut self, k: usize, cur: &DenseMatrix<f64>) -> Result<BuiltStep, SimError> {
        let community = &self.scenario.community;
        let edges = match &self.scenario.graph {
            GraphPlan::Static { edges, .. } => edges.clone().with_step(k),
            GraphPlan::Random(r) => sample_edge_set(community, r, self.scenario.run.seed, k)?,
        };
        let (influence, bias, utilities, fallbacks) = match &self.scenario.weights {
            WeightPlan::Fixed { bias, influence } => {
                let w = match influence {
                    Some(w) => w.clone(),
                    None => InfluenceMatrix::uniform(community, &edges).map_err(at(k))?,
                };
                let utilities = self
                    .utility
                    .map(|f| (0..cur.rows()).map(|a| f.evaluate(cur.row(a))).collect::<Result<Vec<_>, _>>())
                    .transpose()
                    .map_err(at(k))?;
                (w, bias.clone(), utilities, 0)
            }
            WeightPlan::Reward { initial_bias } => {
                let prev = match self.previous.take() {
                    Some(p) => p,
                    None => community
                        .regular()
                        .iter()
                        .map(|&i| Ok(RowWeights::uniform(edges.in_neighbors(i)?.iter().copied(), *initial_bias)))
                        .collect::<Result<Vec<_>, GraphError>>()
                        .map_err(at(k))?,
                };
                let f = self.utility.expect("checked in new");
                let rewards0 = self.rewards0.as_deref().expect("set in new");
                let step = reward_step(community, &edges, cur, rewards0, f, &prev).map_err(at(k))?;
                self.previous = Some(step.row_weights());
                let fallbacks = step.fallback_count();
                (step.influence, step.bias, Some(step.utilities), fallbacks)
            }
        };
        let mats = SystemMatrices::assemble(&influence, &bias).map_err(at(k))?;
        Ok(BuiltStep { lambda: bias.values().to_vec(), edges, mats, utilities, fallbacks })
    }
}

/// Matrices in force at `k = 0` together with `u`; what `analyze` inspects
/// for a scenario file.
pub fn initial_snapshot(scenario: &Scenario) -> Result<(BuiltStep, InputVector<f64>), SimError> {
    let mut p = Pipeline::new(scenario, scenario.utility.as_ref().map(|u| u as &dyn Utility<f64>))?;
    let built = p.build(0, &scenario.opinions)?;
    Ok((built, p.input))
}

/// Runs `scenario` with its configured utility.
pub fn run(scenario: &Scenario) -> Result<(TrajectoryLog, RunReport), SimError> {
    run_with_utility(scenario, scenario.utility.as_ref().map(|u| u as &dyn Utility<f64>))
}

/// Runs `scenario`, querying `utility` instead of the configured field.
pub fn run_with_utility(
    scenario: &Scenario,
    utility: Option<&dyn Utility<f64>>,
) -> Result<(TrajectoryLog, RunReport), SimError> {
    let community = &scenario.community;
    let spec = &scenario.run;
    let mut pipeline = Pipeline::new(scenario, utility)?;
    let u = pipeline.input.clone();
    let mut x = u.initial_state();
    let mut cur = scenario.opinions.clone();
    let mut log = TrajectoryLog { agents: community.agents(), subjects: community.subjects(), steps: Vec::new() };
    let mut metas = Vec::new();
    let mut deltas = Vec::new();
    let mut stop = false;
    let mut k = 0;
    let last = loop {
        let built = pipeline.build(k, &cur)?;
        let mut lambda = vec![None; community.agents()];
        for (r, id) in community.regular().iter().enumerate() {
            lambda[id.0 - 1] = Some(built.lambda[r]);
        }
        log.steps.push(StepRecord {
            k,
            opinions: cur.to_rows(),
            lambda,
            utility: match &built.utilities {
                Some(v) => v.iter().copied().map(Some).collect(),
                None => vec![None; community.agents()],
            },
        });
        metas.push(StepMeta {
            k,
            row_sum_error_max: built.mats.row_sum_error_max(),
            edge_hash: built.edges.fingerprint(),
            fallbacks: built.fallbacks,
        });
        if stop || k == spec.horizon {
            break built;
        }
        let next = step_network(&x, &built.mats, &u).map_err(at(k))?;
        let delta = inf_norm_diff(x.as_slice(), next.as_slice());
        deltas.push(delta);
        x = next;
        cur = current_opinions(community, &scenario.opinions, &x);
        stop = spec.stop_early && !scenario.is_random() && delta < spec.epsilon;
        k += 1;
    };

    let analysis = analyze(community, &last.edges, &last.mats, &u, k).map_err(at(k))?;
    let equilibrium_gap = match &analysis.equilibrium {
        EquilibriumField::Unique(rows) => {
            let star: Vec<f64> = rows.iter().flatten().copied().collect();
            let now: Vec<f64> = (0..x.n_regular()).flat_map(|r| x.agent(r)).collect();
            Some(inf_norm_diff(&star, &now))
        }
        EquilibriumField::Missing(_) => None,
    };
    let convergence_step = deltas.iter().position(|&d| d < spec.epsilon);
    let matrices_static = scenario.matrices_static();
    let report = RunReport {
        scenario_name: scenario.name.clone(),
        seed: spec.seed,
        converged: convergence_step.is_some(),
        convergence_step,
        criterion: if matrices_static { "equilibrium" } else { "settled" }.into(),
        matrices_static,
        epsilon: spec.epsilon,
        final_step: k,
        step_deltas: deltas,
        steps: metas,
        update_ordering: UPDATE_ORDERING.into(),
        equilibrium_gap,
        analysis,
    };
    Ok((log, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRun {
    pub seed: u64,
    pub report: Option<RunReport>,
    pub error: Option<String>,
    /// Mean distance of final regular opinions to the utility peak.
    pub final_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub failures: usize,
    pub converged: usize,
    pub mean_convergence_step: Option<f64>,
    pub containment_pass_rate: f64,
    pub mean_final_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub summary: MonteCarloSummary,
    pub runs: Vec<MonteCarloRun>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Independent runs of `scenario`, one per seed, in parallel; results keep
/// the order of `seeds`. Failed seeds are recorded, not propagated.
pub fn monte_carlo(scenario: &Scenario, seeds: &[u64]) -> MonteCarloReport {
    let runs: Vec<MonteCarloRun> = seeds
        .par_iter()
        .map(|&seed| {
            let mut sc = scenario.clone();
            sc.run.seed = seed;
            match run(&sc) {
                Ok((log, report)) => {
                    let peak = sc.utility.as_ref().map(|u| u.peak());
                    let final_distance = peak.and_then(|p| {
                        let last = log.steps.last()?;
                        let d: Vec<f64> = sc
                            .community
                            .regular()
                            .iter()
                            .map(|id| {
                                last.opinions[id.0 - 1].iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                            })
                            .collect();
                        mean(&d)
                    });
                    MonteCarloRun { seed, report: Some(report), error: None, final_distance }
                }
                Err(e) => MonteCarloRun { seed, report: None, error: Some(e.to_string()), final_distance: None },
            }
        })
        .collect();
    let ok: Vec<&RunReport> = runs.iter().filter_map(|r| r.report.as_ref()).collect();
    let steps: Vec<f64> = ok.iter().filter_map(|r| r.convergence_step).map(|s| s as f64).collect();
    let passed = ok
        .iter()
        .filter(|r| r.analysis.containment.certificates_ok && r.analysis.containment.violations.is_empty())
        .count();
    let distances: Vec<f64> = runs.iter().filter_map(|r| r.final_distance).collect();
    MonteCarloReport {
        summary: MonteCarloSummary {
            runs: runs.len(),
            failures: runs.len() - ok.len(),
            converged: ok.iter().filter(|r| r.converged).count(),
            mean_convergence_step: mean(&steps),
            containment_pass_rate: if ok.is_empty() { 0.0 } else { passed as f64 / ok.len() as f64 },
            mean_final_distance: mean(&distances),
        },
        runs,
    }
}
