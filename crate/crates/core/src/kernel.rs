//! Kernels, signed Gram entries and RKHS geometry.

use serde::{Deserialize, Serialize};

use crate::data::{DataView, Dataset, SparseVector};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("rbf gamma must be positive, got {gamma}")));
        }
        Ok(KernelSpec::Rbf { gamma })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } => KernelSpec::rbf(gamma).map(|_| ()),
        }
    }

    #[inline]
    pub fn eval(&self, x: &SparseVector, z: &SparseVector) -> f64 {
        match *self {
            KernelSpec::Linear => x.dot(z),
            KernelSpec::Rbf { gamma } => (-gamma * x.distance_sq(z)).exp(),
        }
    }

    /// κ(x, x).
    #[inline]
    pub fn self_eval(&self, x: &SparseVector) -> f64 {
        match self {
            KernelSpec::Linear => x.norm_sq(),
            KernelSpec::Rbf { .. } => 1.0,
        }
    }

    /// κ(x, x) = r² is the same for every input.
    pub fn is_shift_invariant(&self) -> bool {
        matches!(self, KernelSpec::Rbf { .. })
    }

    /// Cosine of the RKHS angle between φ(x) and φ(z); `None` when either
    /// feature vector has zero norm.
    pub fn cosine(&self, x: &SparseVector, z: &SparseVector) -> Option<f64> {
        match self {
            KernelSpec::Rbf { .. } => Some(self.eval(x, z)),
            KernelSpec::Linear => {
                let (nx, nz) = (x.norm_sq(), z.norm_sq());
                if nx == 0.0 || nz == 0.0 {
                    None
                } else {
                    Some((x.dot(z) / (nx * nz).sqrt()).clamp(-1.0, 1.0))
                }
            }
        }
    }
}

/// ‖φ(x) − φ(z)‖² via the kernel trick, clamped at zero.
pub fn rkhs_distance_sq(kernel: &KernelSpec, x: &SparseVector, z: &SparseVector) -> f64 {
    (kernel.self_eval(x) - 2.0 * kernel.eval(x, z) + kernel.self_eval(z)).max(0.0)
}

/// Q_ij = y_i y_j κ(x_i, x_j).
pub fn q_entry(dataset: &Dataset, kernel: &KernelSpec, i: usize, j: usize) -> Result<f64> {
    let len = dataset.len();
    for idx in [i, j] {
        if idx >= len {
            return Err(Error::IndexOutOfRange { index: idx, len });
        }
    }
    let (a, b) = (&dataset.instances[i], &dataset.instances[j]);
    Ok(a.y() * b.y() * kernel.eval(&a.features, &b.features))
}

#[inline]
pub(crate) fn q_view(view: &DataView<'_>, kernel: &KernelSpec, i: usize, j: usize) -> f64 {
    let (a, b) = (view.instance(i), view.instance(j));
    a.y() * b.y() * kernel.eval(&a.features, &b.features)
}

/// Environment variable overriding the row-cache memory budget, in MiB.
pub const CACHE_ENV: &str = "SODM_CACHE_MB";

const DEFAULT_MAX_ROWS: usize = 4096;
const DEFAULT_BUDGET_MB: usize = 1024;

/// Sizing of the per-solve kernel row cache.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub max_rows: usize,
    pub budget_mb: usize,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            max_rows: DEFAULT_MAX_ROWS,
            budget_mb: DEFAULT_BUDGET_MB,
        }
    }
}

impl CacheConfig {
    /// Default sizing with the memory budget taken from `SODM_CACHE_MB` when set.
    pub fn from_env() -> Self {
        let mut cfg = CacheConfig::default();
        if let Some(mb) = std::env::var(CACHE_ENV).ok().and_then(|v| v.trim().parse().ok()) {
            cfg.budget_mb = mb;
        }
        cfg
    }

    /// Number of rows of length `m` to keep: min(m, max_rows, budget / row size).
    pub fn rows_for(&self, m: usize) -> usize {
        let row_bytes = m.max(1) * std::mem::size_of::<f64>();
        let by_budget = self.budget_mb.saturating_mul(1 << 20) / row_bytes;
        m.min(self.max_rows).min(by_budget)
    }
}

const NIL: usize = usize::MAX;

/// Fixed-capacity LRU cache of Q rows keyed by view position.
///
/// Rows live in a slab of `capacity` slots; an index-linked list orders the
/// slots from most to least recently used.
pub struct RowCache {
    capacity: usize,
    row_len: usize,
    slot_of: Vec<usize>,
    key_of: Vec<usize>,
    rows: Vec<Box<[f64]>>,
    prev: Vec<usize>,
    next: Vec<usize>,
    head: usize,
    tail: usize,
    hits: u64,
    misses: u64,
}

impl RowCache {
    pub fn new(keys: usize, row_len: usize, capacity: usize) -> Self {
        RowCache {
            capacity,
            row_len,
            slot_of: vec![NIL; keys],
            key_of: Vec::with_capacity(capacity),
            rows: Vec::with_capacity(capacity),
            prev: Vec::with_capacity(capacity),
            next: Vec::with_capacity(capacity),
            head: NIL,
            tail: NIL,
            hits: 0,
            misses: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn stats(&self) -> (u64, u64) {
        (self.hits, self.misses)
    }

    pub fn contains(&self, key: usize) -> bool {
        self.slot_of[key] != NIL
    }

    fn unlink(&mut self, slot: usize) {
        let (p, n) = (self.prev[slot], self.next[slot]);
        if p == NIL {
            self.head = n;
        } else {
            self.next[p] = n;
        }
        if n == NIL {
            self.tail = p;
        } else {
            self.prev[n] = p;
        }
    }

    fn push_front(&mut self, slot: usize) {
        self.prev[slot] = NIL;
        self.next[slot] = self.head;
        if self.head != NIL {
            self.prev[self.head] = slot;
        }
        self.head = slot;
        if self.tail == NIL {
            self.tail = slot;
        }
    }

    /// Returns row `key`, computing it with `fill` on a miss. With zero
    /// capacity the row is computed into `scratch` every time.
    pub fn get_or_fill<'s, F>(&'s mut self, key: usize, scratch: &'s mut Vec<f64>, fill: F) -> &'s [f64]
    where
        F: FnOnce(&mut [f64]),
    {
        let slot = self.slot_of[key];
        if slot != NIL {
            self.hits += 1;
            if self.head != slot {
                self.unlink(slot);
                self.push_front(slot);
            }
            return &self.rows[slot];
        }
        self.misses += 1;
        if self.capacity() == 0 {
            scratch.resize(self.row_len, 0.0);
            fill(scratch);
            return scratch;
        }
        let slot = if self.rows.len() < self.capacity() {
            self.rows.push(vec![0.0; self.row_len].into_boxed_slice());
            self.key_of.push(key);
            self.prev.push(NIL);
            self.next.push(NIL);
            self.rows.len() - 1
        } else {
            let victim = self.tail;
            self.unlink(victim);
            self.slot_of[self.key_of[victim]] = NIL;
            self.key_of[victim] = key;
            victim
        };
        fill(&mut self.rows[slot]);
        self.slot_of[key] = slot;
        self.push_front(slot);
        &self.rows[slot]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> SparseVector {
        SparseVector::from_dense(v)
    }

    #[test]
    fn linear_orthogonal_is_zero() {
        assert_eq!(KernelSpec::Linear.eval(&sv(&[1.0, 0.0]), &sv(&[0.0, 1.0])), 0.0);
    }

    #[test]
    fn rbf_identity_and_ln2() {
        let k = KernelSpec::rbf(3.7).unwrap();
        let x = sv(&[0.3, 0.9]);
        assert_eq!(k.eval(&x, &x), 1.0);
        let k1 = KernelSpec::rbf(1.0).unwrap();
        let z = sv(&[2f64.ln().sqrt()]);
        assert!((k1.eval(&sv(&[0.0]), &z) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rbf_rejects_bad_gamma() {
        assert!(KernelSpec::rbf(0.0).is_err());
        assert!(KernelSpec::rbf(-1.0).is_err());
        assert!(KernelSpec::rbf(f64::NAN).is_err());
    }

    fn ds(rows: &[Vec<f64>], labels: &[i8]) -> Dataset {
        Dataset::from_dense(rows, labels).unwrap()
    }

    #[test]
    fn q_entries() {
        let d = ds(&[vec![1.0, 0.0], vec![1.0, 0.0]], &[1, -1]);
        assert_eq!(q_entry(&d, &KernelSpec::Linear, 0, 1).unwrap(), -1.0);
        let rbf = KernelSpec::rbf(0.5).unwrap();
        assert_eq!(q_entry(&d, &rbf, 1, 1).unwrap(), 1.0);
        let d2 = ds(&[vec![2.0, 0.0], vec![0.0, 3.0]], &[1, -1]);
        assert_eq!(q_entry(&d2, &KernelSpec::Linear, 0, 1).unwrap(), 0.0);
        assert!(matches!(
            q_entry(&d2, &KernelSpec::Linear, 0, 2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn rkhs_distances() {
        let x = sv(&[0.2, 0.4]);
        let rbf = KernelSpec::rbf(1.0).unwrap();
        assert_eq!(rkhs_distance_sq(&rbf, &x, &x), 0.0);
        let z = sv(&[0.2 + 2f64.ln().sqrt(), 0.4]);
        assert!((rkhs_distance_sq(&rbf, &x, &z) - 1.0).abs() < 1e-12);
        assert_eq!(
            rkhs_distance_sq(&KernelSpec::Linear, &sv(&[1.0, 0.0]), &sv(&[0.0, 1.0])),
            2.0
        );
    }

    #[test]
    fn cache_sizing() {
        let cfg = CacheConfig { max_rows: 4096, budget_mb: 1 };
        // 1 MiB of 8-byte entries holds 131072 values
        assert_eq!(cfg.rows_for(100), 100);
        assert_eq!(cfg.rows_for(1024), 128);
        assert_eq!(CacheConfig::default().rows_for(10_000), 4096);
    }

    #[test]
    fn lru_evicts_least_recent() {
        let mut cache = RowCache::new(5, 2, 2);
        let mut scratch = Vec::new();
        let mut fills = Vec::new();
        for key in [0, 1, 0, 2, 1, 0] {
            let row = cache
                .get_or_fill(key, &mut scratch, |r| {
                    fills.push(key);
                    r.fill(key as f64);
                })
                .to_vec();
            assert_eq!(row, vec![key as f64; 2]);
        }
        // 0,1 miss; 0 hit; 2 evicts 1; 1 evicts 0; 0 evicts 2
        assert_eq!(fills, vec![0, 1, 2, 1, 0]);
        assert_eq!(cache.stats(), (1, 5));
        assert!(cache.contains(0) && cache.contains(1) && !cache.contains(2));
    }

    #[test]
    fn zero_capacity_cache_recomputes() {
        let mut cache = RowCache::new(3, 4, 0);
        let mut scratch = Vec::new();
        for _ in 0..3 {
            assert_eq!(cache.get_or_fill(1, &mut scratch, |r| r.fill(2.0)), &[2.0; 4]);
        }
        assert_eq!(cache.stats(), (0, 3));
    }

    /// Symmetric Jacobi eigenvalue iteration, independent of anything in the crate.
    fn jacobi_min_eigenvalue(mut a: Vec<Vec<f64>>) -> f64 {
        let n = a.len();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
    }

    fn arb_points(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 2..=max)
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric(x in prop::collection::vec(-5.0f64..5.0, 4),
                               z in prop::collection::vec(-5.0f64..5.0, 4),
                               g in 0.01f64..10.0) {
            for k in [KernelSpec::Linear, KernelSpec::rbf(g).unwrap()] {
                prop_assert_eq!(k.eval(&sv(&x), &sv(&z)), k.eval(&sv(&z), &sv(&x)));
            }
        }

        #[test]
        fn gram_is_psd(points in arb_points(10), g in 0.05f64..5.0) {
            for k in [KernelSpec::Linear, KernelSpec::rbf(g).unwrap()] {
                let vs: Vec<_> = points.iter().map(|p| sv(p)).collect();
                let gram: Vec<Vec<f64>> = vs.iter()
                    .map(|a| vs.iter().map(|b| k.eval(a, b)).collect())
                    .collect();
                prop_assert!(jacobi_min_eigenvalue(gram) >= -1e-8);
            }
        }

        #[test]
        fn rkhs_triangle_inequality(points in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 3),
                                    g in 0.05f64..5.0) {
            for k in [KernelSpec::Linear, KernelSpec::rbf(g).unwrap()] {
                let v: Vec<_> = points.iter().map(|p| sv(p)).collect();
                let d = |a: usize, b: usize| rkhs_distance_sq(&k, &v[a], &v[b]).sqrt();
                prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
            }
        }

        #[test]
        fn q_view_matches_q_entry(points in arb_points(6), g in 0.05f64..5.0) {
            let labels: Vec<i8> = (0..points.len()).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
            let d = ds(&points, &labels);
            let view = DataView::full(&d);
            let k = KernelSpec::rbf(g).unwrap();
            for i in 0..d.len() {
                for j in 0..d.len() {
                    prop_assert_eq!(q_view(&view, &k, i, j), q_entry(&d, &k, i, j).unwrap());
                    prop_assert_eq!(q_entry(&d, &k, i, j).unwrap(), q_entry(&d, &k, j, i).unwrap());
                }
            }
        }
    }
}
