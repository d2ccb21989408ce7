//! The dual ODM problem and its coordinate-descent solver.
//!
//! With α = [ζ; β] ⪰ 0 and γ = ζ − β the dual objective is
//!
//! ```text
//! d(ζ, β) = ½ γᵀQγ + (m·c/2)(υ‖ζ‖² + ‖β‖²) + (θ−1)·Σζ + (θ+1)·Σβ,
//! c = (1−θ)² / (λυ),   Q_ij = y_i y_j κ(x_i, x_j)
//! ```
//!
//! where `m` is the cardinality the problem is scaled by (the full `M` for
//! the global problem, the partition size for a local one). The solver keeps
//! `s = Qγ` up to date so that every coordinate gradient costs O(1); for the
//! linear kernel `s` is represented implicitly through `w = Σ γ_i y_i x_i`.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{DataView, Dataset, MinMaxTable, SparseVector};
use crate::kernel::{q_view, CacheConfig, KernelSpec, RowCache};
use crate::report::{duration_secs, SCHEMA};
use crate::util::rng_from_seed;
use crate::{Error, Result};

/// Coefficients with |γ| at or below this are left out of a model's support list.
pub const SUPPORT_EPSILON: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lambda: f64,
    pub theta: f64,
    pub nu: f64,
}

impl HyperParams {
    pub fn new(lambda: f64, theta: f64, nu: f64) -> Result<Self> {
        let hp = HyperParams { lambda, theta, nu };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::invalid(format!("theta must lie in [0, 1), got {}", self.theta)));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::invalid(format!("nu must lie in (0, 1], got {}", self.nu)));
        }
        Ok(())
    }

    /// c = (1−θ)² / (λυ).
    pub fn c(&self) -> f64 {
        (1.0 - self.theta).powi(2) / (self.lambda * self.nu)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coord {
    Zeta,
    Beta,
}

/// Dual variables of one (local or global) problem plus the cached `s = Qγ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub zeta: Vec<f64>,
    pub beta: Vec<f64>,
    pub s_cache: Vec<f64>,
    pub m_scale: usize,
}

impl DualState {
    pub fn zeros(len: usize, m_scale: usize) -> Self {
        DualState {
            zeta: vec![0.0; len],
            beta: vec![0.0; len],
            s_cache: vec![0.0; len],
            m_scale,
        }
    }

    /// A state whose cache is recomputed for `view` before it is returned.
    pub fn from_duals(
        view: &DataView<'_>,
        kernel: &KernelSpec,
        zeta: Vec<f64>,
        beta: Vec<f64>,
        m_scale: usize,
    ) -> Result<Self> {
        let mut state = DualState {
            s_cache: Vec::new(),
            zeta,
            beta,
            m_scale,
        };
        state.check(view.len())?;
        state.refresh_cache(view, kernel);
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    pub fn gamma(&self) -> Vec<f64> {
        self.zeta.iter().zip(&self.beta).map(|(z, b)| z - b).collect()
    }

    pub fn value(&self, which: Coord, i: usize) -> f64 {
        match which {
            Coord::Zeta => self.zeta[i],
            Coord::Beta => self.beta[i],
        }
    }

    /// max(‖ζ‖∞, ‖β‖∞).
    pub fn inf_norm(&self) -> f64 {
        self.zeta.iter().chain(&self.beta).fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Recomputes `s = Q(ζ − β)` from scratch.
    pub fn refresh_cache(&mut self, view: &DataView<'_>, kernel: &KernelSpec) {
        self.s_cache = compute_s(view, kernel, &self.gamma());
    }

    pub(crate) fn check(&self, len: usize) -> Result<()> {
        for got in [self.zeta.len(), self.beta.len()] {
            if got != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    actual: got,
                });
            }
        }
        if self.m_scale == 0 {
            return Err(Error::invalid("m_scale must be positive"));
        }
        if self.zeta.iter().chain(&self.beta).any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("dual variables must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// s = Qγ computed from scratch. Columns with γ_j = 0 are skipped.
pub fn compute_s(view: &DataView<'_>, kernel: &KernelSpec, gamma: &[f64]) -> Vec<f64> {
    let m = view.len();
    match kernel {
        KernelSpec::Linear => {
            let w = weight_vector(view, gamma);
            (0..m)
                .map(|i| {
                    let inst = view.instance(i);
                    inst.y() * inst.features.dot_dense(&w)
                })
                .collect()
        }
        KernelSpec::Rbf { .. } => {
            let mut s = vec![0.0; m];
            for (j, &g) in gamma.iter().enumerate() {
                if g != 0.0 {
                    for (i, si) in s.iter_mut().enumerate() {
                        *si += g * q_view(view, kernel, i, j);
                    }
                }
            }
            s
        }
    }
}

/// w = Σ γ_i y_i x_i as a dense vector of length `num_features`.
pub fn weight_vector(view: &DataView<'_>, gamma: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; view.num_features()];
    for (i, &g) in gamma.iter().enumerate() {
        if g != 0.0 {
            let inst = view.instance(i);
            inst.features.axpy_into(g * inst.y(), &mut w);
        }
    }
    w
}

fn objective_from_parts(hp: &HyperParams, state: &DualState, s: &[f64]) -> f64 {
    let c = hp.c();
    let ms = state.m_scale as f64;
    let mut quad = 0.0;
    let (mut zz, mut bb, mut sz, mut sb) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..state.len() {
        let (z, b) = (state.zeta[i], state.beta[i]);
        quad += (z - b) * s[i];
        zz += z * z;
        bb += b * b;
        sz += z;
        sb += b;
    }
    0.5 * quad + 0.5 * ms * c * (hp.nu * zz + bb) + (hp.theta - 1.0) * sz + (hp.theta + 1.0) * sb
}

/// Dual objective, with `Qγ` recomputed from scratch (the cache is not trusted).
pub fn dual_objective(
    view: &DataView<'_>,
    kernel: &KernelSpec,
    hp: &HyperParams,
    state: &DualState,
) -> Result<f64> {
    state.check(view.len())?;
    let s = compute_s(view, kernel, &state.gamma());
    Ok(objective_from_parts(hp, state, &s))
}

/// Dual objective from the cached `s`; O(m).
pub fn cached_objective(hp: &HyperParams, state: &DualState) -> f64 {
    objective_from_parts(hp, state, &state.s_cache)
}

/// ∂d/∂ζ_i or ∂d/∂β_i, read from the cached `s`.
pub fn grad_coordinate(state: &DualState, hp: &HyperParams, which: Coord, i: usize) -> Result<f64> {
    if i >= state.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: state.len(),
        });
    }
    Ok(grad_unchecked(state.s_cache[i], state, hp.c(), hp, which, i))
}

#[inline]
fn grad_unchecked(s_i: f64, state: &DualState, c: f64, hp: &HyperParams, which: Coord, i: usize) -> f64 {
    let ms = state.m_scale as f64;
    match which {
        Coord::Zeta => s_i + ms * c * hp.nu * state.zeta[i] + (hp.theta - 1.0),
        Coord::Beta => -s_i + ms * c * state.beta[i] + (hp.theta + 1.0),
    }
}

/// Diagonal entry of H for the given coordinate.
pub fn h_diag(
    view: &DataView<'_>,
    kernel: &KernelSpec,
    hp: &HyperParams,
    state: &DualState,
    which: Coord,
    i: usize,
) -> f64 {
    let q_ii = kernel.self_eval(&view.instance(i).features);
    h_from_qii(q_ii, hp, state.m_scale, which)
}

#[inline]
fn h_from_qii(q_ii: f64, hp: &HyperParams, m_scale: usize, which: Coord) -> f64 {
    let mc = m_scale as f64 * hp.c();
    match which {
        Coord::Zeta => q_ii + mc * hp.nu,
        Coord::Beta => q_ii + mc,
    }
}

/// Minimizer of the univariate quadratic over t ≥ 0: max(old − grad/h, 0).
#[inline]
pub fn closed_form_step(old: f64, grad: f64, h: f64) -> f64 {
    (old - grad / h).max(0.0)
}

/// Projected-gradient violation of one coordinate.
#[inline]
pub fn projected_violation(value: f64, grad: f64) -> f64 {
    if value > 0.0 {
        grad.abs()
    } else {
        (-grad).max(0.0)
    }
}

/// Largest projected-gradient violation over all 2m coordinates, from the cache.
pub fn max_violation(state: &DualState, hp: &HyperParams) -> f64 {
    let c = hp.c();
    (0..state.len())
        .map(|i| {
            let s = state.s_cache[i];
            let gz = grad_unchecked(s, state, c, hp, Coord::Zeta, i);
            let gb = grad_unchecked(s, state, c, hp, Coord::Beta, i);
            projected_violation(state.zeta[i], gz).max(projected_violation(state.beta[i], gb))
        })
        .fold(0.0, f64::max)
}

/// Performs one exact coordinate minimization and updates `s` from a freshly
/// computed Q column. Returns the new coordinate value.
pub fn coordinate_update(
    state: &mut DualState,
    view: &DataView<'_>,
    kernel: &KernelSpec,
    hp: &HyperParams,
    which: Coord,
    i: usize,
) -> Result<f64> {
    let grad = grad_coordinate(state, hp, which, i)?;
    let h = h_diag(view, kernel, hp, state, which, i);
    let old = state.value(which, i);
    let new = closed_form_step(old, grad, h);
    let delta = new - old;
    if delta != 0.0 {
        let signed = match which {
            Coord::Zeta => {
                state.zeta[i] = new;
                delta
            }
            Coord::Beta => {
                state.beta[i] = new;
                -delta
            }
        };
        for (j, s) in state.s_cache.iter_mut().enumerate() {
            *s += signed * q_view(view, kernel, j, i);
        }
    }
    Ok(new)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub cache: CacheConfig,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-4,
            max_epochs: 100,
            seed: 0,
            cache: CacheConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub epochs: usize,
    pub converged: bool,
    pub final_violation: f64,
    /// Objective before the first epoch followed by the value after each epoch.
    pub objective_trajectory: Vec<f64>,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

impl SolveReport {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trajectory.last().expect("trajectory is never empty")
    }
}

/// Dual coordinate descent on the problem defined by `view`, started from `init`.
///
/// Each epoch visits all 2m coordinates in a fresh seeded permutation. The
/// run stops as soon as the maximum projected-gradient violation is at most
/// `opts.tol` (checked before the first epoch and after every epoch) or when
/// `opts.max_epochs` epochs have run; the latter is reported through
/// [`SolveReport::converged`], not as an error.
pub fn solve_local(
    view: &DataView<'_>,
    kernel: &KernelSpec,
    hp: &HyperParams,
    init: DualState,
    opts: &SolveOptions,
) -> Result<(DualState, SolveReport)> {
    hp.validate()?;
    kernel.validate()?;
    init.check(view.len())?;
    if !(opts.tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let start = Instant::now();
    let mut state = init;
    let (report_core, hits, misses) = match kernel {
        KernelSpec::Linear => (linear_dcd(view, hp, &mut state, opts), 0, 0),
        KernelSpec::Rbf { .. } => kernel_dcd(view, kernel, hp, &mut state, opts),
    };
    let (epochs, converged, final_violation, objective_trajectory) = report_core;
    Ok((
        state,
        SolveReport {
            epochs,
            converged,
            final_violation,
            objective_trajectory,
            wall_time: start.elapsed(),
            cache_hits: hits,
            cache_misses: misses,
        },
    ))
}

type CoreReport = (usize, bool, f64, Vec<f64>);

fn coordinate_order(m: usize) -> Vec<(Coord, usize)> {
    (0..m)
        .map(|i| (Coord::Zeta, i))
        .chain((0..m).map(|i| (Coord::Beta, i)))
        .collect()
}

fn kernel_dcd(
    view: &DataView<'_>,
    kernel: &KernelSpec,
    hp: &HyperParams,
    state: &mut DualState,
    opts: &SolveOptions,
) -> (CoreReport, u64, u64) {
    let m = view.len();
    let c = hp.c();
    let q_diag: Vec<f64> = (0..m)
        .map(|i| kernel.self_eval(&view.instance(i).features))
        .collect();
    let mut cache = RowCache::new(m, m, opts.cache.rows_for(m));
    let mut scratch = Vec::new();
    let fill = |i: usize| {
        move |row: &mut [f64]| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = q_view(view, kernel, i, j);
            }
        }
    };

    let mut s = vec![0.0; m];
    for j in 0..m {
        let g = state.zeta[j] - state.beta[j];
        if g != 0.0 {
            let row = cache.get_or_fill(j, &mut scratch, fill(j));
            for (si, q) in s.iter_mut().zip(row) {
                *si += g * q;
            }
        }
    }
    state.s_cache = s;

    let mut rng = rng_from_seed(opts.seed);
    let mut order = coordinate_order(m);
    let mut trajectory = vec![cached_objective(hp, state)];
    let mut violation = max_violation(state, hp);
    let mut epochs = 0;
    while violation > opts.tol && epochs < opts.max_epochs {
        order.shuffle(&mut rng);
        for &(which, i) in &order {
            let grad = grad_unchecked(state.s_cache[i], state, c, hp, which, i);
            let h = h_from_qii(q_diag[i], hp, state.m_scale, which);
            let old = state.value(which, i);
            let new = closed_form_step(old, grad, h);
            if new == old {
                continue;
            }
            let signed = match which {
                Coord::Zeta => {
                    state.zeta[i] = new;
                    new - old
                }
                Coord::Beta => {
                    state.beta[i] = new;
                    old - new
                }
            };
            let row = cache.get_or_fill(i, &mut scratch, fill(i));
            for (sj, q) in state.s_cache.iter_mut().zip(row) {
                *sj += signed * q;
            }
        }
        epochs += 1;
        violation = max_violation(state, hp);
        trajectory.push(cached_objective(hp, state));
    }
    let (hits, misses) = cache.stats();
    (
        (epochs, violation <= opts.tol, violation, trajectory),
        hits,
        misses,
    )
}

fn linear_dcd(view: &DataView<'_>, hp: &HyperParams, state: &mut DualState, opts: &SolveOptions) -> CoreReport {
    let m = view.len();
    let c = hp.c();
    let q_diag: Vec<f64> = (0..m).map(|i| view.instance(i).features.norm_sq()).collect();
    let mut w = weight_vector(view, &state.gamma());
    let margins = |w: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| {
                let inst = view.instance(i);
                inst.y() * inst.features.dot_dense(w)
            })
            .collect()
    };
    state.s_cache = margins(&w);

    let mut rng = rng_from_seed(opts.seed);
    let mut order = coordinate_order(m);
    let mut trajectory = vec![cached_objective(hp, state)];
    let mut violation = max_violation(state, hp);
    let mut epochs = 0;
    while violation > opts.tol && epochs < opts.max_epochs {
        order.shuffle(&mut rng);
        for &(which, i) in &order {
            let inst = view.instance(i);
            let s_i = inst.y() * inst.features.dot_dense(&w);
            let grad = grad_unchecked(s_i, state, c, hp, which, i);
            let h = h_from_qii(q_diag[i], hp, state.m_scale, which);
            let old = state.value(which, i);
            let new = closed_form_step(old, grad, h);
            if new == old {
                continue;
            }
            let signed = match which {
                Coord::Zeta => {
                    state.zeta[i] = new;
                    new - old
                }
                Coord::Beta => {
                    state.beta[i] = new;
                    old - new
                }
            };
            inst.features.axpy_into(signed * inst.y(), &mut w);
        }
        epochs += 1;
        state.s_cache = margins(&w);
        violation = max_violation(state, hp);
        trajectory.push(cached_objective(hp, state));
    }
    (epochs, violation <= opts.tol, violation, trajectory)
}

/// Complementarity and stationarity residuals of a dual state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// max_i min(ζ_i, β_i)
    pub complementarity: f64,
    /// max projected-gradient violation
    pub stationarity: f64,
}

pub fn kkt_residuals(
    state: &DualState,
    view: &DataView<'_>,
    kernel: &KernelSpec,
    hp: &HyperParams,
) -> Result<KktResiduals> {
    state.check(view.len())?;
    let mut fresh = state.clone();
    fresh.refresh_cache(view, kernel);
    let complementarity = state
        .zeta
        .iter()
        .zip(&state.beta)
        .map(|(z, b)| z.min(*b))
        .fold(0.0, f64::max);
    Ok(KktResiduals {
        complementarity,
        stationarity: max_violation(&fresh, hp),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportVector {
    /// Index of the instance in the training dataset.
    pub index: usize,
    pub label: i8,
    /// ζ_i − β_i
    pub gamma: f64,
    pub features: SparseVector,
}

/// Trained decision function f(x) = Σ γ_i y_i κ(x_i, x).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub schema: String,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub hyper: Option<HyperParams>,
    pub num_features: usize,
    pub support: Vec<SupportVector>,
    /// Dense primal weights; present iff the kernel is linear.
    #[serde(default)]
    pub w: Option<Vec<f64>>,
    /// Min-max statistics applied to raw inputs before prediction.
    #[serde(default)]
    pub normalization: Option<MinMaxTable>,
}

impl Model {
    /// A linear model given directly by its weights.
    pub fn linear(w: Vec<f64>, hyper: Option<HyperParams>) -> Self {
        Model {
            schema: SCHEMA.to_string(),
            kernel: KernelSpec::Linear,
            hyper,
            num_features: w.len(),
            support: Vec::new(),
            w: Some(w),
            normalization: None,
        }
    }

    pub fn decision_value(&self, x: &SparseVector) -> f64 {
        match &self.w {
            Some(w) => x.dot_dense(w),
            None => self
                .support
                .iter()
                .map(|sv| sv.gamma * f64::from(sv.label) * self.kernel.eval(&sv.features, x))
                .sum(),
        }
    }

    /// sign(f(x)) with sign(0) = +1.
    pub fn predict(&self, x: &SparseVector) -> i8 {
        if self.decision_value(x) >= 0.0 {
            1
        } else {
            -1
        }
    }

    /// Predicts every instance of an already-normalized dataset.
    pub fn predict_all(&self, dataset: &Dataset) -> Vec<i8> {
        dataset.instances.iter().map(|inst| self.predict(&inst.features)).collect()
    }

    /// Fraction of correctly predicted labels; `None` for an empty dataset.
    pub fn accuracy(&self, dataset: &Dataset) -> Option<f64> {
        if dataset.is_empty() {
            return None;
        }
        let correct = dataset
            .instances
            .iter()
            .filter(|inst| self.predict(&inst.features) == inst.label)
            .count();
        Some(correct as f64 / dataset.len() as f64)
    }

    /// ‖w‖² in the RKHS.
    pub fn norm_sq(&self) -> f64 {
        match &self.w {
            Some(w) => w.iter().map(|v| v * v).sum(),
            None => {
                let mut acc = 0.0;
                for a in &self.support {
                    for b in &self.support {
                        acc += a.gamma
                            * b.gamma
                            * f64::from(a.label * b.label)
                            * self.kernel.eval(&a.features, &b.features);
                    }
                }
                acc
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Model = serde_json::from_str(text)?;
        if model.schema != SCHEMA {
            return Err(Error::Unsupported(format!("model schema `{}`", model.schema)));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text)
    }
}

/// Builds the decision function from dual variables: γ = ζ − β, and for the
/// linear kernel also the dense w = Σ γ_i y_i x_i.
pub fn recover_decision(state: &DualState, view: &DataView<'_>, kernel: &KernelSpec) -> Model {
    let gamma = state.gamma();
    let support = gamma
        .iter()
        .enumerate()
        .filter(|(_, g)| g.abs() > SUPPORT_EPSILON)
        .map(|(i, &g)| {
            let inst = view.instance(i);
            SupportVector {
                index: view.global_index(i),
                label: inst.label,
                gamma: g,
                features: inst.features.clone(),
            }
        })
        .collect();
    let w = matches!(kernel, KernelSpec::Linear).then(|| weight_vector(view, &gamma));
    Model {
        schema: SCHEMA.to_string(),
        kernel: *kernel,
        hyper: None,
        num_features: view.num_features(),
        support,
        w,
        normalization: None,
    }
}

/// Optimal slacks (ξ, ε) for a functional margin y·f(x).
#[inline]
pub fn slacks(margin: f64, theta: f64) -> (f64, f64) {
    ((1.0 - theta - margin).max(0.0), (margin - 1.0 - theta).max(0.0))
}

fn primal_from_margins(norm_sq: f64, margins: impl Iterator<Item = f64>, m: usize, hp: &HyperParams) -> f64 {
    let loss: f64 = margins
        .map(|mg| {
            let (xi, eps) = slacks(mg, hp.theta);
            xi * xi + hp.nu * eps * eps
        })
        .sum();
    0.5 * norm_sq + hp.lambda / (2.0 * m as f64 * (1.0 - hp.theta).powi(2)) * loss
}

/// Primal ODM objective of a model on `view`, using the optimal slacks for
/// the model's decision function.
pub fn primal_objective(model: &Model, view: &DataView<'_>, hp: &HyperParams) -> f64 {
    let margins = (0..view.len()).map(|i| {
        let inst = view.instance(i);
        inst.y() * model.decision_value(&inst.features)
    });
    primal_from_margins(model.norm_sq(), margins, view.len(), hp)
}

/// Primal objective of the w recovered from `state`, read off the cached
/// `s = Qγ` (‖w‖² = γᵀs, y_i f(x_i) = s_i).
pub fn primal_objective_from_state(state: &DualState, hp: &HyperParams) -> f64 {
    let norm_sq: f64 = state
        .zeta
        .iter()
        .zip(&state.beta)
        .zip(&state.s_cache)
        .map(|((z, b), s)| (z - b) * s)
        .sum();
    primal_from_margins(norm_sq, state.s_cache.iter().copied(), state.len(), hp)
}
