//! Distribution-aware partitioning: greedy landmarks, RKHS strata and a
//! stratified K-way split.
//!
//! Strata and partitions are numbered from 0. Landmark selection and stratum
//! assignment work with the normalized kernel κ(x,z)/(‖φ(x)‖‖φ(z)‖), which is
//! κ itself for the RBF kernel and the cosine for the linear kernel.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::kernel::KernelSpec;
use crate::util::{derive_seed, rng_from_seed};
use crate::{Error, Result};

const PIVOT_FLOOR: f64 = 1e-10;
const RIDGE: f64 = 1e-8;

/// min(32, ⌈√M⌉).
pub fn default_stratums(m: usize) -> usize {
    let root = (m as f64).sqrt().ceil() as usize;
    root.clamp(1, 32)
}

/// Normalized kernel value; `None` for a zero-norm input under the linear kernel.
fn unit_kernel(dataset: &Dataset, kernel: &KernelSpec, i: usize, j: usize) -> Option<f64> {
    kernel.cosine(&dataset.instances[i].features, &dataset.instances[j].features)
}

fn is_candidate(dataset: &Dataset, kernel: &KernelSpec, i: usize) -> bool {
    kernel.is_shift_invariant() || dataset.instances[i].features.norm_sq() > 0.0
}

/// Greedy landmark selection.
///
/// The first landmark is the first eligible instance; each further landmark
/// minimizes the Schur quantity k_cᵀ K⁻¹ k_c over the remaining candidates
/// (ties to the lowest index). K⁻¹ is applied through an incrementally grown
/// Cholesky factor, so each step costs O(M·s).
pub fn select_landmarks(dataset: &Dataset, kernel: &KernelSpec, s: usize) -> Result<Vec<usize>> {
    kernel.validate()?;
    let m = dataset.len();
    if s == 0 {
        return Err(Error::invalid("number of stratums must be at least 1"));
    }
    if s > m {
        return Err(Error::invalid(format!("{s} stratums requested for {m} instances")));
    }
    let candidates: Vec<usize> = (0..m).filter(|&i| is_candidate(dataset, kernel, i)).collect();
    if candidates.len() < s {
        return Err(Error::invalid(format!(
            "only {} instances have nonzero norm, {s} landmarks requested",
            candidates.len()
        )));
    }

    // u[c] = L⁻¹ k_c for candidate position c; q[c] = ‖u[c]‖².
    let n = candidates.len();
    let mut u: Vec<Vec<f64>> = vec![Vec::with_capacity(s); n];
    let mut q = vec![0.0; n];
    let mut taken = vec![false; n];
    let mut landmarks = Vec::with_capacity(s);
    let mut pick = 0;
    loop {
        taken[pick] = true;
        let z = candidates[pick];
        landmarks.push(z);
        if landmarks.len() == s {
            return Ok(landmarks);
        }
        let mut pivot = 1.0 - q[pick];
        if pivot <= PIVOT_FLOOR {
            pivot += RIDGE;
        }
        let ell = pivot.sqrt();
        let uz = u[pick].clone();
        for c in 0..n {
            if taken[c] {
                continue;
            }
            let k = unit_kernel(dataset, kernel, candidates[c], z).unwrap_or(0.0);
            let dot: f64 = u[c].iter().zip(&uz).map(|(a, b)| a * b).sum();
            let entry = (k - dot) / ell;
            u[c].push(entry);
            q[c] += entry * entry;
        }
        pick = (0..n)
            .filter(|&c| !taken[c])
            .fold(None, |best: Option<usize>, c| match best {
                Some(b) if q[b] <= q[c] => Some(b),
                _ => Some(c),
            })
            .expect("enough candidates remain");
    }
}

/// Nearest landmark in RKHS distance, ties to the lowest stratum. Landmarks
/// always get their own stratum; zero-norm points (linear kernel) go to stratum 0.
pub fn assign_stratums(dataset: &Dataset, kernel: &KernelSpec, landmarks: &[usize]) -> Result<Vec<usize>> {
    if landmarks.is_empty() {
        return Err(Error::invalid("landmark list is empty"));
    }
    let m = dataset.len();
    if let Some(&bad) = landmarks.iter().find(|&&l| l >= m) {
        return Err(Error::IndexOutOfRange { index: bad, len: m });
    }
    let mut stratum_of: Vec<usize> = (0..m)
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for (sidx, &z) in landmarks.iter().enumerate() {
                let Some(k) = unit_kernel(dataset, kernel, i, z) else {
                    return 0;
                };
                let dist = 2.0 - 2.0 * k;
                if dist < best.1 {
                    best = (sidx, dist);
                }
            }
            best.0
        })
        .collect();
    for (sidx, &z) in landmarks.iter().enumerate() {
        stratum_of[z] = sidx;
    }
    Ok(stratum_of)
}

/// Shuffles every stratum with a seed derived from (seed, stratum) and deals
/// its members round-robin into `k` pieces; piece j of every stratum goes to
/// partition j.
pub fn make_partitions(stratum_of: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    let m = stratum_of.len();
    if k == 0 {
        return Err(Error::invalid("number of partitions must be at least 1"));
    }
    if k > m {
        return Err(Error::invalid(format!("{k} partitions requested for {m} instances")));
    }
    let strata = stratum_of.iter().max().map_or(0, |s| s + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); strata];
    for (i, &s) in stratum_of.iter().enumerate() {
        members[s].push(i);
    }
    let mut partition_of = vec![0; m];
    for (s, list) in members.iter_mut().enumerate() {
        list.shuffle(&mut rng_from_seed(derive_seed(seed, s as u64)));
        for (pos, &i) in list.iter().enumerate() {
            partition_of[i] = pos % k;
        }
    }
    Ok(partition_of)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionDiagnostics {
    /// Minimal RKHS angle between points of different strata; absent with a
    /// single stratum.
    pub tau: Option<f64>,
    /// Ordered pairs (i, j) in different strata.
    pub cross_pairs: u64,
    pub stratum_sizes: Vec<usize>,
}

/// O(M²) diagnostics of a stratum assignment.
pub fn diagnostics(dataset: &Dataset, kernel: &KernelSpec, stratum_of: &[usize]) -> Result<PartitionDiagnostics> {
    if stratum_of.len() != dataset.len() {
        return Err(Error::DimensionMismatch {
            expected: dataset.len(),
            actual: stratum_of.len(),
        });
    }
    let strata = stratum_of.iter().max().map_or(0, |s| s + 1);
    let mut sizes = vec![0usize; strata];
    for &s in stratum_of {
        sizes[s] += 1;
    }
    let m = stratum_of.len() as u64;
    let cross_pairs = m * m - sizes.iter().map(|&n| (n as u64) * (n as u64)).sum::<u64>();

    let mut max_cos: Option<f64> = None;
    for i in 0..stratum_of.len() {
        for j in i + 1..stratum_of.len() {
            if stratum_of[i] == stratum_of[j] {
                continue;
            }
            if let Some(c) = unit_kernel(dataset, kernel, i, j) {
                max_cos = Some(max_cos.map_or(c, |b: f64| b.max(c)));
            }
        }
    }
    Ok(PartitionDiagnostics {
        tau: max_cos.map(|c| c.clamp(-1.0, 1.0).acos()),
        cross_pairs,
        stratum_sizes: sizes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub landmark_indices: Vec<usize>,
    pub stratum_of: Vec<usize>,
    pub partition_of: Vec<usize>,
    pub num_partitions: usize,
    pub seed: u64,
}

impl PartitionPlan {
    /// Landmarks, strata and a `k`-way stratified split with `s` strata.
    pub fn build(dataset: &Dataset, kernel: &KernelSpec, s: usize, k: usize, seed: u64) -> Result<Self> {
        if k > dataset.len() {
            return Err(Error::invalid(format!(
                "{k} partitions requested for {} instances",
                dataset.len()
            )));
        }
        let landmark_indices = select_landmarks(dataset, kernel, s)?;
        let stratum_of = assign_stratums(dataset, kernel, &landmark_indices)?;
        let partition_of = make_partitions(&stratum_of, k, seed)?;
        Ok(PartitionPlan {
            landmark_indices,
            stratum_of,
            partition_of,
            num_partitions: k,
            seed,
        })
    }

    /// A plan from an explicit assignment (one stratum, no landmarks).
    pub fn from_assignment(partition_of: Vec<usize>, num_partitions: usize) -> Result<Self> {
        if num_partitions == 0 || partition_of.iter().any(|&p| p >= num_partitions) {
            return Err(Error::invalid("partition ids must lie in 0..num_partitions"));
        }
        Ok(PartitionPlan {
            landmark_indices: Vec::new(),
            stratum_of: vec![0; partition_of.len()],
            partition_of,
            num_partitions,
            seed: 0,
        })
    }

    pub fn num_stratums(&self) -> usize {
        self.stratum_of.iter().max().map_or(0, |s| s + 1)
    }

    /// Members of every partition in ascending instance order.
    pub fn partitions(&self) -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); self.num_partitions];
        for (i, &p) in self.partition_of.iter().enumerate() {
            parts[p].push(i);
        }
        parts
    }
}
