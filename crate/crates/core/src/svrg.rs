//! Distributed SVRG for the linear-kernel primal, simulated over in-process nodes.
//!
//! Every epoch broadcasts the anchor w, reduces the per-node gradient sums
//! into the full gradient h, and then passes a single token round-robin over
//! the nodes. The holder of the token takes `steps_per_visit` variance-reduced
//! steps on instances drawn without replacement from its own shard.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataView, Dataset, Instance};
use crate::kernel::KernelSpec;
use crate::partition::{default_stratums, PartitionPlan};
use crate::solver::{primal_objective, HyperParams, Model};
use crate::util::{derive_seed, pairwise_reduce, pairwise_vec_sum, rng_from_seed, thread_pool};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrgConfig {
    pub nodes: usize,
    /// Number of strata; `None` picks min(32, ⌈√M⌉).
    pub stratums: Option<usize>,
    pub epochs: usize,
    /// Step size; `None` uses 0.1 / (1 + λ·max‖x‖²/(1−θ)²).
    pub eta: Option<f64>,
    pub steps_per_visit: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SvrgConfig {
    fn default() -> Self {
        SvrgConfig {
            nodes: 4,
            stratums: None,
            epochs: 20,
            eta: None,
            steps_per_visit: 1,
            seed: 0,
            workers: 1,
        }
    }
}

impl SvrgConfig {
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.nodes == 0 || self.nodes > m {
            return Err(Error::invalid(format!("node count must lie in 1..={m}, got {}", self.nodes)));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("at least one epoch is required"));
        }
        if let Some(eta) = self.eta {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(Error::invalid(format!("step size must be nonnegative, got {eta}")));
            }
        }
        if self.steps_per_visit == 0 {
            return Err(Error::invalid("steps per visit must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("worker count must be at least 1"));
        }
        Ok(())
    }
}

/// Default step size for a dataset.
pub fn default_eta(dataset: &Dataset, hp: &HyperParams) -> f64 {
    let max_norm = dataset
        .instances
        .iter()
        .map(|i| i.features.norm_sq())
        .fold(0.0, f64::max);
    0.1 / (1.0 + hp.lambda * max_norm / (1.0 - hp.theta).powi(2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub primal_objective: f64,
    pub broadcasts: u64,
    pub reductions: u64,
    pub token_passes: u64,
}

#[derive(Clone, Debug)]
pub struct SvrgOutput {
    pub model: Model,
    pub w: Vec<f64>,
    /// Epoch 0 is the initial point.
    pub trajectory: Vec<EpochRecord>,
    pub plan: PartitionPlan,
    pub eta: f64,
}

/// Scalar a with ∇p_i(w) = w + a·y_i·x_i.
#[inline]
fn loss_coefficient(margin: f64, hp: &HyperParams) -> f64 {
    let denom = (1.0 - hp.theta).powi(2);
    if margin < 1.0 - hp.theta {
        hp.lambda * (margin + hp.theta - 1.0) / denom
    } else if margin > 1.0 + hp.theta {
        hp.lambda * hp.nu * (margin - hp.theta - 1.0) / denom
    } else {
        0.0
    }
}

#[inline]
fn margin(w: &[f64], inst: &Instance) -> f64 {
    inst.y() * inst.features.dot_dense(w)
}

/// Gradient of p_i(w) = ½‖w‖² + λ(ξ_i² + υ·ε_i²) / (2(1−θ)²).
pub fn instance_gradient(w: &[f64], instance: &Instance, hp: &HyperParams) -> Vec<f64> {
    let mut g = w.to_vec();
    let a = loss_coefficient(margin(w, instance), hp);
    instance.features.axpy_into(a * instance.y(), &mut g);
    g
}

fn node_gradient_sum(w: &[f64], dataset: &Dataset, members: &[usize], hp: &HyperParams) -> Vec<f64> {
    pairwise_vec_sum(members.len(), w.len(), &|k, out: &mut [f64]| {
        let inst = &dataset.instances[members[k]];
        let a = loss_coefficient(margin(w, inst), hp);
        for (o, wv) in out.iter_mut().zip(w) {
            *o += wv;
        }
        inst.features.axpy_into(a * inst.y(), out);
    })
}

fn full_gradient_in(
    pool: &rayon::ThreadPool,
    w: &[f64],
    dataset: &Dataset,
    nodes: &[Vec<usize>],
    hp: &HyperParams,
) -> Vec<f64> {
    let partial: Vec<Vec<f64>> =
        pool.install(|| nodes.par_iter().map(|members| node_gradient_sum(w, dataset, members, hp)).collect());
    let mut h = pairwise_reduce(&partial, w.len());
    let m = dataset.len() as f64;
    for v in &mut h {
        *v /= m;
    }
    h
}

/// (1/M) Σ_i ∇p_i(w), reduced pairwise over `nodes` in order.
pub fn full_gradient(
    w: &[f64],
    dataset: &Dataset,
    hp: &HyperParams,
    nodes: &[Vec<usize>],
    workers: usize,
) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::invalid("gradient of an empty dataset"));
    }
    if w.len() != dataset.num_features {
        return Err(Error::DimensionMismatch {
            expected: dataset.num_features,
            actual: w.len(),
        });
    }
    let pool = thread_pool(workers)?;
    Ok(full_gradient_in(&pool, w, dataset, nodes, hp))
}

fn objective(w: &[f64], dataset: &Dataset, hp: &HyperParams) -> f64 {
    primal_objective(&Model::linear(w.to_vec(), None), &DataView::full(dataset), hp)
}

/// Distributed SVRG from w = 0 over a stratified node layout.
pub fn dsvrg_train(dataset: &Dataset, kernel: &KernelSpec, hp: &HyperParams, config: &SvrgConfig) -> Result<SvrgOutput> {
    if !matches!(kernel, KernelSpec::Linear) {
        return Err(Error::Unsupported("distributed SVRG needs the linear kernel".into()));
    }
    hp.validate()?;
    config.validate(dataset.len())?;
    let s = config.stratums.unwrap_or_else(|| default_stratums(dataset.len()));
    let plan = PartitionPlan::build(dataset, kernel, s, config.nodes, config.seed)?;
    dsvrg_with_plan(dataset, hp, config, plan)
}

/// Distributed SVRG with nodes given by the partitions of `plan`.
pub fn dsvrg_with_plan(dataset: &Dataset, hp: &HyperParams, config: &SvrgConfig, plan: PartitionPlan) -> Result<SvrgOutput> {
    hp.validate()?;
    config.validate(dataset.len())?;
    if plan.partition_of.len() != dataset.len() {
        return Err(Error::DimensionMismatch {
            expected: dataset.len(),
            actual: plan.partition_of.len(),
        });
    }
    let pool = thread_pool(config.workers)?;
    let nodes = plan.partitions();
    let k = nodes.len() as u64;
    let eta = config.eta.unwrap_or_else(|| default_eta(dataset, hp));
    let dim = dataset.num_features;
    let mut w = vec![0.0; dim];
    let (mut broadcasts, mut reductions, mut token_passes) = (0u64, 0u64, 0u64);
    let mut trajectory = vec![EpochRecord {
        epoch: 0,
        primal_objective: objective(&w, dataset, hp),
        broadcasts,
        reductions,
        token_passes,
    }];

    for epoch in 1..=config.epochs {
        let anchor = w.clone();
        broadcasts += k;
        let h = full_gradient_in(&pool, &anchor, dataset, &nodes, hp);
        reductions += k;

        let epoch_seed = derive_seed(config.seed, epoch as u64);
        let mut remaining: Vec<Vec<usize>> = nodes
            .iter()
            .enumerate()
            .map(|(j, members)| {
                let mut r = members.clone();
                r.shuffle(&mut rng_from_seed(derive_seed(epoch_seed, j as u64)));
                r
            })
            .collect();
        let mut left: usize = remaining.iter().map(Vec::len).sum();
        while left > 0 {
            for r in remaining.iter_mut().filter(|r| !r.is_empty()) {
                for _ in 0..config.steps_per_visit {
                    let Some(i) = r.pop() else { break };
                    left -= 1;
                    let inst = &dataset.instances[i];
                    let delta = loss_coefficient(margin(&w, inst), hp) - loss_coefficient(margin(&anchor, inst), hp);
                    for ((wv, av), hv) in w.iter_mut().zip(&anchor).zip(&h) {
                        *wv -= eta * (*wv - av + hv);
                    }
                    inst.features.axpy_into(-eta * delta * inst.y(), &mut w);
                }
                token_passes += 1;
            }
        }
        trajectory.push(EpochRecord {
            epoch,
            primal_objective: objective(&w, dataset, hp),
            broadcasts,
            reductions,
            token_passes,
        });
    }

    let mut model = Model::linear(w.clone(), Some(*hp));
    model.num_features = dim;
    Ok(SvrgOutput {
        model,
        w,
        trajectory,
        plan,
        eta,
    })
}
