//! Level-by-level training with warm-started merges.
//!
//! The data is split into K = p^L stratified partitions. Every level solves
//! its partitions in parallel, then merges each run of `p` consecutive
//! partitions by concatenating their members and their dual blocks (all ζ
//! first, then all β). A final solve on the fully merged data yields the model.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataView, Dataset};
use crate::kernel::{CacheConfig, KernelSpec};
use crate::partition::{default_stratums, PartitionPlan};
use crate::report::duration_secs;
use crate::solver::{
    cached_objective, dual_objective, max_violation, recover_decision, solve_local, DualState, HyperParams, Model,
    SolveOptions, SolveReport,
};
use crate::util::{derive_seed, thread_pool};
use crate::{Error, Result};

/// Kernel problems above this size skip the O(M·support) global objective.
pub const GLOBAL_OBJECTIVE_LIMIT: usize = 5000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Merge factor.
    pub p: usize,
    /// Number of levels; the data starts in p^levels partitions.
    pub levels: usize,
    /// Number of strata; `None` picks min(32, ⌈√M⌉).
    pub stratums: Option<usize>,
    pub tol: f64,
    /// Epoch budget of every local solve.
    pub max_epochs: usize,
    pub seed: u64,
    pub workers: usize,
    /// Run the last solve on the fully merged data. When false the model is
    /// built from the concatenated level-1 solutions.
    pub final_refine: bool,
    pub cache: CacheConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            p: 2,
            levels: 2,
            stratums: None,
            tol: 1e-4,
            max_epochs: 100,
            seed: 0,
            workers: 1,
            final_refine: true,
            cache: CacheConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Number of initial partitions, p^levels.
    pub fn partitions(&self) -> Option<usize> {
        self.p.checked_pow(u32::try_from(self.levels).ok()?)
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.p < 2 {
            return Err(Error::invalid(format!("merge factor p must be at least 2, got {}", self.p)));
        }
        match self.partitions() {
            Some(k) if k <= m => {}
            _ => {
                return Err(Error::invalid(format!(
                    "p^levels = {}^{} exceeds the {m} instances",
                    self.p, self.levels
                )))
            }
        }
        if let Some(s) = self.stratums {
            if s == 0 || s > m {
                return Err(Error::invalid(format!("stratums must lie in 1..={m}, got {s}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.workers == 0 {
            return Err(Error::invalid("worker count must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub partitions: Vec<SolveReport>,
    /// Sum of the local dual objectives.
    pub merged_objective: f64,
    /// Global dual objective of the concatenated solution, when computed.
    pub global_objective: Option<f64>,
    pub converged: bool,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: Model,
    pub levels: Vec<LevelReport>,
    pub plan: PartitionPlan,
    /// Level at which every warm start already met the tolerance.
    pub early_exit: Option<usize>,
    /// Global instance index of every position of `state`.
    pub order: Vec<usize>,
    pub state: DualState,
}

impl TrainOutput {
    pub fn final_level(&self) -> &LevelReport {
        self.levels.last().expect("at least one level is always solved")
    }
}

/// Per-partition solver seed.
pub fn partition_seed(seed: u64, level: usize, k: usize) -> u64 {
    derive_seed(seed, ((level as u64) << 32) | k as u64)
}

/// True iff every state meets `tol` on its own local problem.
pub fn check_global_convergence(
    dataset: &Dataset,
    members: &[Vec<usize>],
    states: &[DualState],
    kernel: &KernelSpec,
    hp: &HyperParams,
    tol: f64,
) -> Result<bool> {
    if states.is_empty() {
        return Err(Error::invalid("no states to check"));
    }
    if members.len() != states.len() {
        return Err(Error::DimensionMismatch {
            expected: members.len(),
            actual: states.len(),
        });
    }
    for (part, state) in members.iter().zip(states) {
        let view = DataView::subset(dataset, part);
        state.check(view.len())?;
        let mut fresh = state.clone();
        fresh.refresh_cache(&view, kernel);
        if max_violation(&fresh, hp) > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Trains with a stratified plan built from `config`.
pub fn train(dataset: &Dataset, kernel: &KernelSpec, hp: &HyperParams, config: &TrainConfig) -> Result<TrainOutput> {
    config.validate(dataset.len())?;
    let k = config.partitions().expect("validated");
    let s = config.stratums.unwrap_or_else(|| default_stratums(dataset.len()));
    let plan = PartitionPlan::build(dataset, kernel, s, k, config.seed)?;
    train_with_plan(dataset, kernel, hp, config, plan)
}

/// Trains on the partitions of an explicit plan, which must have p^levels parts.
pub fn train_with_plan(
    dataset: &Dataset,
    kernel: &KernelSpec,
    hp: &HyperParams,
    config: &TrainConfig,
    plan: PartitionPlan,
) -> Result<TrainOutput> {
    hp.validate()?;
    kernel.validate()?;
    config.validate(dataset.len())?;
    let m = dataset.len();
    if plan.partition_of.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: plan.partition_of.len(),
        });
    }
    if Some(plan.num_partitions) != config.partitions() {
        return Err(Error::invalid(format!(
            "plan has {} partitions, configuration needs {}",
            plan.num_partitions,
            config.partitions().unwrap_or(0)
        )));
    }
    let mut parts = plan.partitions();
    if parts.iter().any(Vec::is_empty) {
        return Err(Error::invalid("plan contains an empty partition"));
    }
    let pool = thread_pool(config.workers)?;
    let record_global = matches!(kernel, KernelSpec::Linear) || m <= GLOBAL_OBJECTIVE_LIMIT;

    let mut states: Vec<DualState> = parts.iter().map(|p| DualState::zeros(p.len(), p.len())).collect();
    let mut levels = Vec::new();
    let mut early_exit = None;

    for level in (1..=config.levels).rev() {
        let report = solve_level(dataset, kernel, hp, config, &pool, level, &parts, &mut states, record_global)?;
        let warm_already_optimal = level < config.levels && report.partitions.iter().all(|r| r.epochs == 0 && r.converged);
        levels.push(report);
        if warm_already_optimal {
            early_exit = Some(level);
            break;
        }
        (parts, states) = merge(parts, states, config.p);
    }

    if early_exit.is_none() && config.final_refine {
        debug_assert_eq!(parts.len(), 1);
        let report = solve_level(dataset, kernel, hp, config, &pool, 0, &parts, &mut states, record_global)?;
        levels.push(report);
    }

    let order: Vec<usize> = parts.concat();
    let state = concat_states(&states, m);
    let view = DataView::subset(dataset, &order);
    let mut model = recover_decision(&state, &view, kernel);
    model.hyper = Some(*hp);
    Ok(TrainOutput {
        model,
        levels,
        plan,
        early_exit,
        order,
        state,
    })
}

#[allow(clippy::too_many_arguments)]
fn solve_level(
    dataset: &Dataset,
    kernel: &KernelSpec,
    hp: &HyperParams,
    config: &TrainConfig,
    pool: &rayon::ThreadPool,
    level: usize,
    parts: &[Vec<usize>],
    states: &mut Vec<DualState>,
    record_global: bool,
) -> Result<LevelReport> {
    let start = Instant::now();
    let taken = std::mem::take(states);
    let results: Vec<Result<(DualState, SolveReport)>> = pool.install(|| {
        parts
            .par_iter()
            .zip(taken.into_par_iter())
            .enumerate()
            .map(|(k, (members, init))| {
                let view = DataView::subset(dataset, members);
                let opts = SolveOptions {
                    tol: config.tol,
                    max_epochs: config.max_epochs,
                    seed: partition_seed(config.seed, level, k),
                    cache: config.cache,
                };
                solve_local(&view, kernel, hp, init, &opts)
            })
            .collect()
    });
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        let (state, report) = r?;
        states.push(state);
        reports.push(report);
    }
    let merged_objective = states.iter().map(|s| cached_objective(hp, s)).sum();
    let global_objective = if record_global {
        let order = parts.concat();
        let view = DataView::subset(dataset, &order);
        Some(dual_objective(&view, kernel, hp, &concat_states(states, order.len()))?)
    } else {
        None
    };
    Ok(LevelReport {
        level,
        converged: reports.iter().all(|r| r.converged),
        partitions: reports,
        merged_objective,
        global_objective,
        wall_time: start.elapsed(),
    })
}

fn concat_states(states: &[DualState], m_scale: usize) -> DualState {
    let mut out = DualState::zeros(0, m_scale);
    for s in states {
        out.zeta.extend_from_slice(&s.zeta);
        out.beta.extend_from_slice(&s.beta);
        out.s_cache.extend_from_slice(&s.s_cache);
    }
    out
}

/// Merges runs of `p` consecutive partitions; the cache of a merged state is
/// stale and gets rebuilt by the next solve.
fn merge(parts: Vec<Vec<usize>>, states: Vec<DualState>, p: usize) -> (Vec<Vec<usize>>, Vec<DualState>) {
    let mut merged_parts = Vec::with_capacity(parts.len() / p);
    let mut merged_states = Vec::with_capacity(parts.len() / p);
    for (group, sgroup) in parts.chunks(p).zip(states.chunks(p)) {
        let members = group.concat();
        merged_states.push(concat_states(sgroup, members.len()));
        merged_parts.push(members);
    }
    (merged_parts, merged_states)
}
