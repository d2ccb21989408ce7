//! LIBSVM-format datasets.
//!
//! Feature indices are 1-based on disk and 0-based in memory. Labels are
//! restricted to {+1, -1}; nothing is remapped.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::util::rng_from_seed;
use crate::{Error, Result};

/// Sparse feature vector with strictly increasing 0-based indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn new(entries: Vec<(u32, f64)>) -> Result<Self> {
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::invalid("feature indices must be strictly increasing"));
        }
        Ok(SparseVector { entries })
    }

    /// Builds a sparse vector from dense values, dropping zeros.
    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .collect();
        SparseVector { entries }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One past the largest stored index (0 for the empty vector).
    pub fn dim(&self) -> usize {
        self.entries.last().map_or(0, |(i, _)| *i as usize + 1)
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .map_or(0.0, |pos| self.entries[pos].1)
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// ‖self − other‖², computed by merging so that identical vectors give
    /// exactly zero.
    pub fn distance_sq(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() || j < b.len() {
            let d = if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                i += 1;
                a[i - 1].1
            } else if i == a.len() || b[j].0 < a[i].0 {
                j += 1;
                -b[j - 1].1
            } else {
                i += 1;
                j += 1;
                a[i - 1].1 - b[j - 1].1
            };
            acc += d * d;
        }
        acc
    }

    /// Dot product with a dense vector; indices beyond `dense` count as zero.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .filter_map(|(i, v)| dense.get(*i as usize).map(|w| w * v))
            .sum()
    }

    /// `dense += scale * self`.
    pub fn axpy_into(&self, scale: f64, dense: &mut [f64]) {
        for (i, v) in &self.entries {
            dense[*i as usize] += scale * v;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub features: SparseVector,
    /// +1 or -1.
    pub label: i8,
}

impl Instance {
    pub fn new(features: SparseVector, label: i8) -> Result<Self> {
        if label != 1 && label != -1 {
            return Err(Error::invalid(format!("label {label} is not +1 or -1")));
        }
        Ok(Instance { features, label })
    }

    #[inline]
    pub fn y(&self) -> f64 {
        f64::from(self.label)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    pub num_features: usize,
}

impl Dataset {
    pub fn new(instances: Vec<Instance>) -> Self {
        let num_features = instances
            .iter()
            .map(|inst| inst.features.dim())
            .max()
            .unwrap_or(0);
        Dataset {
            instances,
            num_features,
        }
    }

    /// Builds a dataset from dense rows; mostly useful in tests and FFI.
    pub fn from_dense(rows: &[Vec<f64>], labels: &[i8]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        let instances = rows
            .iter()
            .zip(labels)
            .map(|(row, &y)| Instance::new(SparseVector::from_dense(row), y))
            .collect::<Result<Vec<_>>>()?;
        let mut ds = Dataset::new(instances);
        ds.num_features = ds
            .num_features
            .max(rows.iter().map(Vec::len).max().unwrap_or(0));
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
            num_features: self.num_features,
        }
    }
}

/// A dataset restricted to an ordered list of member indices.
///
/// Position `i` of the view is instance `members[i]` of the dataset; every
/// per-coordinate quantity of the solvers is indexed by view position.
#[derive(Clone, Copy, Debug)]
pub struct DataView<'a> {
    dataset: &'a Dataset,
    members: Option<&'a [usize]>,
}

impl<'a> DataView<'a> {
    pub fn full(dataset: &'a Dataset) -> Self {
        DataView {
            dataset,
            members: None,
        }
    }

    pub fn subset(dataset: &'a Dataset, members: &'a [usize]) -> Self {
        DataView {
            dataset,
            members: Some(members),
        }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn len(&self) -> usize {
        self.members.map_or(self.dataset.len(), <[usize]>::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index into the underlying dataset of view position `i`.
    #[inline]
    pub fn global_index(&self, i: usize) -> usize {
        self.members.map_or(i, |m| m[i])
    }

    #[inline]
    pub fn instance(&self, i: usize) -> &'a Instance {
        &self.dataset.instances[self.global_index(i)]
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.instance(i).y()
    }

    pub fn num_features(&self) -> usize {
        self.dataset.num_features
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<Instance> {
    let mut tokens = line.split_whitespace();
    let label_tok = tokens.next().ok_or_else(|| Error::Parse {
        line: lineno,
        message: "missing label".into(),
    })?;
    let label_val: f64 = label_tok.parse().map_err(|_| Error::Parse {
        line: lineno,
        message: format!("cannot parse label `{label_tok}`"),
    })?;
    let label = if label_val == 1.0 {
        1
    } else if label_val == -1.0 {
        -1
    } else {
        return Err(Error::Label {
            line: lineno,
            label: label_tok.to_string(),
        });
    };

    let mut entries = Vec::new();
    for tok in tokens {
        let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
            line: lineno,
            message: format!("expected `index:value`, found `{tok}`"),
        })?;
        let idx: u32 = idx.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad feature index `{idx}`"),
        })?;
        if idx == 0 {
            return Err(Error::Parse {
                line: lineno,
                message: "feature indices are 1-based".into(),
            });
        }
        let val: f64 = val.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad feature value `{val}`"),
        })?;
        if !val.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("non-finite feature value `{val}`"),
            });
        }
        if let Some((prev, _)) = entries.last() {
            if idx - 1 <= *prev {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("feature index {idx} is not increasing"),
                });
            }
        }
        entries.push((idx - 1, val));
    }
    Ok(Instance {
        features: SparseVector { entries },
        label,
    })
}

/// Parses LIBSVM text. Blank lines are skipped; line numbers in errors are
/// 1-based.
pub fn parse_libsvm_str(text: &str) -> Result<Dataset> {
    let instances = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| parse_line(l, n + 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(instances))
}

pub fn parse_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm_str(&text)
}

pub fn to_libsvm_string(dataset: &Dataset) -> String {
    let mut out = String::new();
    for inst in &dataset.instances {
        out.push_str(if inst.label > 0 { "+1" } else { "-1" });
        for (i, v) in inst.features.entries() {
            // `{}` on f64 prints the shortest representation that round-trips.
            let _ = write!(out, " {}:{}", i + 1, v);
        }
        out.push('\n');
    }
    out
}

pub fn write_libsvm(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(to_libsvm_string(dataset).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Per-feature (min, max) statistics from a training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxTable {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxTable {
    pub fn fit(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::invalid("cannot normalize an empty dataset"));
        }
        let nf = dataset.num_features;
        let mut min = vec![f64::INFINITY; nf];
        let mut max = vec![f64::NEG_INFINITY; nf];
        let mut present = vec![0usize; nf];
        for inst in &dataset.instances {
            for &(i, v) in inst.features.entries() {
                let i = i as usize;
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
                present[i] += 1;
            }
        }
        // Absent entries are implicit zeros.
        for f in 0..nf {
            if present[f] < dataset.len() {
                min[f] = min[f].min(0.0);
                max[f] = max[f].max(0.0);
            }
        }
        Ok(MinMaxTable { min, max })
    }

    fn map(&self, f: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[f], self.max[f]);
        if hi <= lo {
            0.0
        } else {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        }
    }

    /// Applies the transform; features the table does not know are dropped.
    pub fn apply(&self, dataset: &Dataset) -> Dataset {
        let nf = self.min.len();
        let instances = dataset
            .instances
            .iter()
            .map(|inst| {
                let mut entries = Vec::new();
                let mut src = inst.features.entries().iter().peekable();
                for f in 0..nf {
                    let mut raw = 0.0;
                    while let Some(&&(i, v)) = src.peek() {
                        if (i as usize) < f {
                            src.next();
                        } else {
                            if i as usize == f {
                                raw = v;
                            }
                            break;
                        }
                    }
                    let mapped = self.map(f, raw);
                    if mapped != 0.0 {
                        entries.push((f as u32, mapped));
                    }
                }
                Instance {
                    features: SparseVector { entries },
                    label: inst.label,
                }
            })
            .collect();
        Dataset {
            instances,
            num_features: nf,
        }
    }
}

/// Min-max normalizes every feature to [0, 1] and returns the statistics so
/// the same transform can be applied to held-out data.
pub fn normalize(dataset: &Dataset) -> Result<(Dataset, MinMaxTable)> {
    let table = MinMaxTable::fit(dataset)?;
    Ok((table.apply(dataset), table))
}

/// Random train/test split: the first ⌊fraction·M⌋ instances of a seeded
/// permutation go to the training set.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    if dataset.len() < 2 {
        return Err(Error::invalid("split needs at least two instances"));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let n_train = (train_fraction * dataset.len() as f64).floor() as usize;
    Ok((
        dataset.subset(&order[..n_train]),
        dataset.subset(&order[n_train..]),
    ))
}
