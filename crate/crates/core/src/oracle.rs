//! Reference solver and bound checkers for small problems.
//!
//! The reference solver materializes the dense 2M×2M Hessian of the dual and
//! runs accelerated projected gradient with adaptive restart, a method that
//! shares no code path with the coordinate-descent solver.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DataView, Dataset};
use crate::kernel::KernelSpec;
use crate::partition::{diagnostics, PartitionPlan};
use crate::solver::{DualState, HyperParams};
use crate::svrg::instance_gradient;
use crate::synth::random_classification;
use crate::util::{derive_seed, rng_from_seed, Rng as SeededRng};
use crate::{Error, Result};

/// Largest dataset the dense oracle accepts.
pub const MAX_ORACLE_M: usize = 50;
pub const DEFAULT_TOL: f64 = 1e-10;
/// Slack allowed when comparing the two sides of a bound.
pub const BOUND_SLACK: f64 = 1e-9;

const MAX_ITERATIONS: usize = 5_000_000;
const CHECK_EVERY: usize = 10;

/// min ½ xᵀHx + linᵀx subject to x ≥ 0, with H dense row-major.
struct BoxQp {
    n: usize,
    h: Vec<f64>,
    lin: Vec<f64>,
}

impl BoxQp {
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.h[i * self.n..(i + 1) * self.n];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.lin[i];
        }
    }

    fn violation(x: &[f64], g: &[f64]) -> f64 {
        x.iter()
            .zip(g)
            .map(|(&xi, &gi)| if xi > 0.0 { gi.abs() } else { (-gi).max(0.0) })
            .fold(0.0, f64::max)
    }

    /// Power iteration on H (which is PSD), scaled up by 1%.
    fn step_bound(&self) -> f64 {
        let mut v: Vec<f64> = (0..self.n).map(|i| 1.0 + (i as f64 * 0.618_033_988_7).fract()).collect();
        let mut hv = vec![0.0; self.n];
        let mut estimate = 0.0;
        for _ in 0..20_000 {
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            v.iter_mut().for_each(|a| *a /= norm);
            for (i, o) in hv.iter_mut().enumerate() {
                *o = self.h[i * self.n..(i + 1) * self.n].iter().zip(&v).map(|(a, b)| a * b).sum();
            }
            let next: f64 = hv.iter().zip(&v).map(|(a, b)| a * b).sum();
            std::mem::swap(&mut v, &mut hv);
            if (next - estimate).abs() <= 1e-13 * next.abs() {
                estimate = next;
                break;
            }
            estimate = next;
        }
        1.01 * estimate
    }

    fn solve(&self, tol: f64) -> Result<Vec<f64>> {
        let n = self.n;
        let step = 1.0 / self.step_bound();
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut x_next = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut t = 1.0f64;
        let mut violation = f64::INFINITY;
        for it in 0..MAX_ITERATIONS {
            if it % CHECK_EVERY == 0 {
                self.gradient(&x, &mut g);
                violation = Self::violation(&x, &g);
                if violation <= tol {
                    return Ok(x);
                }
            }
            self.gradient(&y, &mut g);
            for i in 0..n {
                x_next[i] = (y[i] - step * g[i]).max(0.0);
            }
            // Restart the momentum when it points against the gradient step.
            let uphill: f64 = (0..n).map(|i| (y[i] - x_next[i]) * (x_next[i] - x[i])).sum();
            let t_next = if uphill > 0.0 { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
            let momentum = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
            for i in 0..n {
                y[i] = x_next[i] + momentum * (x_next[i] - x[i]);
            }
            std::mem::swap(&mut x, &mut x_next);
            t = t_next;
        }
        Err(Error::NotConverged {
            iterations: MAX_ITERATIONS,
            violation,
        })
    }
}

/// Dense signed Gram matrix Q_ij = y_i y_j κ(x_i, x_j) of a view, row-major.
pub fn dense_q(view: &DataView<'_>, kernel: &KernelSpec) -> Vec<f64> {
    let m = view.len();
    let mut q = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let (a, b) = (view.instance(i), view.instance(j));
            q[i * m + j] = a.y() * b.y() * kernel.eval(&a.features, &b.features);
        }
    }
    q
}

fn dual_qp(q: &[f64], m: usize, hp: &HyperParams, m_scale: usize) -> BoxQp {
    let n = 2 * m;
    let mc = m_scale as f64 * hp.c();
    let mut h = vec![0.0; n * n];
    for i in 0..m {
        for j in 0..m {
            let v = q[i * m + j];
            h[i * n + j] = v;
            h[(i + m) * n + (j + m)] = v;
            h[i * n + (j + m)] = -v;
            h[(i + m) * n + j] = -v;
        }
        h[i * n + i] += mc * hp.nu;
        h[(i + m) * n + (i + m)] += mc;
    }
    let mut lin = vec![hp.theta - 1.0; m];
    lin.extend(std::iter::repeat_n(hp.theta + 1.0, m));
    BoxQp { n, h, lin }
}

/// Dual objective from a dense Q.
pub fn dense_objective(q: &[f64], hp: &HyperParams, m_scale: usize, zeta: &[f64], beta: &[f64]) -> f64 {
    let m = zeta.len();
    let gamma: Vec<f64> = zeta.iter().zip(beta).map(|(z, b)| z - b).collect();
    let mut quad = 0.0;
    for i in 0..m {
        for j in 0..m {
            quad += gamma[i] * q[i * m + j] * gamma[j];
        }
    }
    let mc = m_scale as f64 * hp.c();
    let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    0.5 * quad + 0.5 * mc * (hp.nu * sq(zeta) + sq(beta)) + (hp.theta - 1.0) * zeta.iter().sum::<f64>()
        + (hp.theta + 1.0) * beta.iter().sum::<f64>()
}

fn solve_dense(q: &[f64], m: usize, hp: &HyperParams, m_scale: usize, tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut x = dual_qp(q, m, hp, m_scale).solve(tol)?;
    let beta = x.split_off(m);
    Ok((x, beta))
}

fn check_size(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("the reference solver needs at least one instance"));
    }
    if m > MAX_ORACLE_M {
        return Err(Error::invalid(format!(
            "the reference solver handles at most {MAX_ORACLE_M} instances, got {m}"
        )));
    }
    Ok(())
}

/// Solves the dual of `view` scaled by `m_scale` to projected-gradient violation ≤ `tol`.
pub fn brute_force_view(
    view: &DataView<'_>,
    kernel: &KernelSpec,
    hp: &HyperParams,
    m_scale: usize,
    tol: f64,
) -> Result<DualState> {
    hp.validate()?;
    kernel.validate()?;
    check_size(view.len())?;
    let q = dense_q(view, kernel);
    let (zeta, beta) = solve_dense(&q, view.len(), hp, m_scale, tol)?;
    DualState::from_duals(view, kernel, zeta, beta, m_scale)
}

/// Solves the global dual problem of a dataset with at most 50 instances.
pub fn brute_force_solve(dataset: &Dataset, kernel: &KernelSpec, hp: &HyperParams, tol: f64) -> Result<DualState> {
    brute_force_view(&DataView::full(dataset), kernel, hp, dataset.len(), tol)
}

/// Largest deviation between the slacks implied by the margins of a dual
/// state and those implied by its multipliers (ξ = mcυ·ζ, ε = mc·β).
pub fn slack_consistency(state: &DualState, hp: &HyperParams) -> f64 {
    let mc = state.m_scale as f64 * hp.c();
    (0..state.len())
        .map(|i| {
            let s = state.s_cache[i];
            let xi = (1.0 - hp.theta - s).max(0.0);
            let eps = (s - 1.0 - hp.theta).max(0.0);
            (xi - mc * hp.nu * state.zeta[i]).abs().max((eps - mc * state.beta[i]).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl Inequality {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Inequality {
            name: name.into(),
            lhs,
            rhs,
            satisfied: lhs <= rhs + BOUND_SLACK,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem: u8,
    pub seed: Option<u64>,
    pub m: usize,
    pub partitions: usize,
    pub u: f64,
    pub q_offdiag: Option<f64>,
    /// Largest left-hand side of the objective-gap inequalities.
    pub gap_lhs: f64,
    pub gap_rhs: f64,
    pub distance_sq: Option<f64>,
    pub tau: Option<f64>,
    pub cross_pairs: Option<u64>,
    /// The bound does not apply (a single stratum).
    pub skipped: bool,
    pub inequalities: Vec<Inequality>,
}

impl BoundReport {
    pub fn satisfied(&self) -> bool {
        self.inequalities.iter().all(|i| i.satisfied)
    }
}

fn inf_norm(parts: &[&[f64]]) -> f64 {
    parts.iter().flat_map(|p| p.iter()).fold(0.0, |a, v| a.max(v.abs()))
}

/// Compares the global optimum with the optimum of the block-diagonal
/// problem (cross-partition Q entries dropped, scaled by the common
/// partition size m), both evaluated on the global objective.
pub fn theorem1_check(
    dataset: &Dataset,
    kernel: &KernelSpec,
    hp: &HyperParams,
    partition_of: &[usize],
) -> Result<BoundReport> {
    hp.validate()?;
    kernel.validate()?;
    let big_m = dataset.len();
    check_size(big_m)?;
    if partition_of.len() != big_m {
        return Err(Error::DimensionMismatch {
            expected: big_m,
            actual: partition_of.len(),
        });
    }
    let k = partition_of.iter().max().map_or(0, |p| p + 1);
    let mut sizes = vec![0usize; k];
    for &p in partition_of {
        sizes[p] += 1;
    }
    let m = sizes[0];
    if sizes.iter().any(|&s| s != m) {
        return Err(Error::invalid(format!("partitions must have equal sizes, got {sizes:?}")));
    }

    let q = dense_q(&DataView::full(dataset), kernel);
    let mut q_block = q.clone();
    let mut q_offdiag = 0.0;
    for i in 0..big_m {
        for j in 0..big_m {
            if partition_of[i] != partition_of[j] {
                q_offdiag += q[i * big_m + j].abs();
                q_block[i * big_m + j] = 0.0;
            }
        }
    }
    let (zs, bs) = solve_dense(&q, big_m, hp, big_m, DEFAULT_TOL)?;
    let (za, ba) = solve_dense(&q_block, big_m, hp, m, DEFAULT_TOL)?;
    let d_star = dense_objective(&q, hp, big_m, &zs, &bs);
    let d_approx = dense_objective(&q, hp, big_m, &za, &ba);
    let gap = d_approx - d_star;

    let u = inf_norm(&[&zs, &bs]).max(inf_norm(&[&za, &ba]));
    let c = hp.c();
    let rhs = u * u * (q_offdiag + (big_m * (big_m - m)) as f64 * c);
    let dist_rhs = rhs / (big_m as f64 * c * hp.nu);
    let distance_sq: f64 = zs
        .iter()
        .chain(&bs)
        .zip(za.iter().chain(&ba))
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(BoundReport {
        theorem: 1,
        seed: None,
        m: big_m,
        partitions: k,
        u,
        q_offdiag: Some(q_offdiag),
        gap_lhs: gap,
        gap_rhs: rhs,
        distance_sq: Some(distance_sq),
        tau: None,
        cross_pairs: None,
        skipped: false,
        inequalities: vec![
            Inequality::new("gap_nonnegative", 0.0, gap),
            Inequality::new("gap_upper", gap, rhs),
            Inequality::new("distance", distance_sq, dist_rhs),
        ],
    })
}

/// Compares every local optimum of a stratified plan with the global optimum.
pub fn theorem2_check(dataset: &Dataset, kernel: &KernelSpec, hp: &HyperParams, plan: &PartitionPlan) -> Result<BoundReport> {
    if !kernel.is_shift_invariant() {
        return Err(Error::Unsupported("the partition bound needs a shift-invariant kernel".into()));
    }
    hp.validate()?;
    let big_m = dataset.len();
    check_size(big_m)?;
    if plan.partition_of.len() != big_m {
        return Err(Error::DimensionMismatch {
            expected: big_m,
            actual: plan.partition_of.len(),
        });
    }
    let diag = diagnostics(dataset, kernel, &plan.stratum_of)?;
    let parts = plan.partitions();
    let mut report = BoundReport {
        theorem: 2,
        seed: None,
        m: big_m,
        partitions: parts.len(),
        u: 0.0,
        q_offdiag: None,
        gap_lhs: 0.0,
        gap_rhs: 0.0,
        distance_sq: None,
        tau: diag.tau,
        cross_pairs: Some(diag.cross_pairs),
        skipped: false,
        inequalities: Vec::new(),
    };
    let Some(tau) = diag.tau else {
        report.skipped = true;
        return Ok(report);
    };

    let q = dense_q(&DataView::full(dataset), kernel);
    let (zs, bs) = solve_dense(&q, big_m, hp, big_m, DEFAULT_TOL)?;
    let d_star = dense_objective(&q, hp, big_m, &zs, &bs);
    let mut u = inf_norm(&[&zs, &bs]);
    let mut local = Vec::with_capacity(parts.len());
    for members in parts.iter().filter(|p| !p.is_empty()) {
        let view = DataView::subset(dataset, members);
        let qk = dense_q(&view, kernel);
        let (z, b) = solve_dense(&qk, members.len(), hp, members.len(), DEFAULT_TOL)?;
        u = u.max(inf_norm(&[&z, &b]));
        local.push(dense_objective(&qk, hp, members.len(), &z, &b));
    }

    let (mf, c, r2) = (big_m as f64, hp.c(), 1.0);
    let cross = diag.cross_pairs as f64;
    let rhs = u * u * mf * mf * c + 2.0 * u * mf + 0.5 * u * u * (mf * mf * r2 + r2 * tau.cos() * (2.0 * cross - mf * mf));
    report.u = u;
    report.gap_rhs = rhs;
    report.gap_lhs = f64::NEG_INFINITY;
    for (k, dk) in local.iter().enumerate() {
        let lhs = dk - d_star;
        report.gap_lhs = report.gap_lhs.max(lhs);
        report.inequalities.push(Inequality::new(format!("partition_{k}"), lhs, rhs));
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteDiffReport {
    pub max_deviation: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Per-instance primal term ½‖w‖² + λ(ξ² + υε²) / (2(1−θ)²).
fn instance_primal(w: &[f64], dataset: &Dataset, i: usize, hp: &HyperParams) -> f64 {
    let inst = &dataset.instances[i];
    let margin = inst.y() * inst.features.dot_dense(w);
    let xi = (1.0 - hp.theta - margin).max(0.0);
    let eps = (margin - 1.0 - hp.theta).max(0.0);
    0.5 * w.iter().map(|v| v * v).sum::<f64>() + hp.lambda * (xi * xi + hp.nu * eps * eps) / (2.0 * (1.0 - hp.theta).powi(2))
}

/// Compares the analytic instance gradient with central differences at
/// random (w, i). Pairs within 1e-4 of a kink of the loss are skipped.
pub fn finite_diff_check(dataset: &Dataset, hp: &HyperParams, trials: usize, seed: u64) -> Result<FiniteDiffReport> {
    hp.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("finite differences need at least one instance"));
    }
    let dim = dataset.num_features;
    let mut rng = rng_from_seed(seed);
    let mut report = FiniteDiffReport {
        max_deviation: 0.0,
        checked: 0,
        skipped: 0,
    };
    for _ in 0..trials {
        let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let i = rng.gen_range(0..dataset.len());
        let inst = &dataset.instances[i];
        let margin = inst.y() * inst.features.dot_dense(&w);
        if (margin - (1.0 - hp.theta)).abs() < 1e-4 || (margin - (1.0 + hp.theta)).abs() < 1e-4 {
            report.skipped += 1;
            continue;
        }
        let g = instance_gradient(&w, inst, hp);
        for d in 0..dim {
            let h = 1e-6 * (1.0 + w[d].abs());
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus[d] += h;
            minus[d] -= h;
            let fd = (instance_primal(&plus, dataset, i, hp) - instance_primal(&minus, dataset, i, hp)) / (plus[d] - minus[d]);
            let dev = (fd - g[d]).abs() / g[d].abs().max(1.0);
            report.max_deviation = report.max_deviation.max(dev);
        }
        report.checked += 1;
    }
    Ok(report)
}

/// λ log-uniform on [0.1, 100], θ uniform on [0, 0.8], υ uniform on [0.1, 1].
pub fn random_hyper(rng: &mut SeededRng) -> HyperParams {
    let lambda = 10f64.powf(rng.gen_range(-1.0..2.0));
    let theta = rng.gen_range(0.0..0.8);
    let nu = rng.gen_range(0.1..=1.0);
    HyperParams { lambda, theta, nu }
}

/// RBF with γ log-uniform on [0.1, 10].
pub fn random_rbf(rng: &mut SeededRng) -> KernelSpec {
    KernelSpec::Rbf {
        gamma: 10f64.powf(rng.gen_range(-1.0..1.0)),
    }
}

/// One seeded bound trial: M ∈ [6, 40] divisible by K ∈ {2, 4}, random
/// kernel, hyperparameters and an equal-size random split.
pub fn theorem1_trial(seed: u64) -> Result<BoundReport> {
    let mut rng = rng_from_seed(seed);
    let k = if rng.gen::<bool>() { 2 } else { 4 };
    let m = k * rng.gen_range(6usize.div_ceil(k)..=40 / k);
    let dims = rng.gen_range(2..=5);
    let kernel = if rng.gen::<bool>() { KernelSpec::Linear } else { random_rbf(&mut rng) };
    let hp = random_hyper(&mut rng);
    let dataset = random_classification(m, dims, derive_seed(seed, 1))?;
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let mut partition_of = vec![0; m];
    for (pos, &i) in order.iter().enumerate() {
        partition_of[i] = pos % k;
    }
    let mut report = theorem1_check(&dataset, &kernel, &hp, &partition_of)?;
    report.seed = Some(seed);
    Ok(report)
}

/// One seeded bound trial: RBF kernel, M ∈ [8, 30], S ∈ {2, 3}, K = 2,
/// partitions from the stratified plan.
pub fn theorem2_trial(seed: u64) -> Result<BoundReport> {
    let mut rng = rng_from_seed(seed);
    let m = rng.gen_range(8..=30);
    let s = rng.gen_range(2..=3);
    let dims = rng.gen_range(2..=5);
    let kernel = random_rbf(&mut rng);
    let hp = random_hyper(&mut rng);
    let dataset = random_classification(m, dims, derive_seed(seed, 1))?;
    let plan = PartitionPlan::build(&dataset, &kernel, s, 2, derive_seed(seed, 2))?;
    let mut report = theorem2_check(&dataset, &kernel, &hp, &plan)?;
    report.seed = Some(seed);
    Ok(report)
}
