//! Synthetic classification task: Gaussian blobs on a grid.
//!
//! `C * K` blob centres sit on a `g × g` grid (`g = ceil(sqrt(C * K))`),
//! filled row-major, spaced `spacing` apart and centred on the origin in the
//! first two feature dimensions. Blob `b` at grid cell `(row, col)` belongs to
//! class `row mod C` under [`Layout::Bands`] (horizontal bands, the default)
//! or `(row + col) mod C` under [`Layout::Checker`] (neighbours always differ,
//! a much harder boundary). Any further feature dimensions are pure noise
//! around zero.
//!
//! Sets are stratified by blob: record `i` of a set of `n` gets label
//! `i mod C` and the `((i / C) mod K)`-th blob of that class, so class counts
//! differ by at most one and so do blob counts (exactly equal when `n` is a
//! multiple of `C * K`). Each record is its blob centre plus `N(0, std_dev²)`
//! noise per dimension; the set is then shuffled. The training set uses stream 0 of `DetRng("podl/task", seed)`,
//! test set `k` uses stream `k + 1`. A sample that repeats any earlier sample
//! bit-for-bit (in any set) is redrawn, which keeps all sets disjoint.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::rng::DetRng;
use super::{Dataset, DlError, Record};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    #[default]
    Bands,
    Checker,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSpec {
    pub num_classes: usize,
    pub input_dim: usize,
    pub blobs_per_class: usize,
    pub spacing: f64,
    pub std_dev: f64,
    pub layout: Layout,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec { num_classes: 3, input_dim: 2, blobs_per_class: 3, spacing: 1.0, std_dev: 0.05, layout: Layout::Bands }
    }
}

impl TaskSpec {
    fn validate(&self) -> Result<(), DlError> {
        if self.num_classes < 2 || self.input_dim < 2 || self.blobs_per_class == 0 {
            return Err(DlError::BadDataset(format!("unsupported task shape {self:?}")));
        }
        if !(self.spacing.is_finite() && self.std_dev.is_finite() && self.std_dev >= 0.0) {
            return Err(DlError::BadDataset("spacing and std_dev must be finite, std_dev >= 0".into()));
        }
        Ok(())
    }

    /// `(centre, class)` for every blob.
    pub fn blobs(&self) -> Vec<([f64; 2], usize)> {
        let n = self.num_classes * self.blobs_per_class;
        let g = (1..).find(|g| g * g >= n).unwrap();
        let offset = (g as f64 - 1.0) / 2.0;
        (0..n)
            .map(|b| {
                let (row, col) = (b / g, b % g);
                let centre = [(col as f64 - offset) * self.spacing, (row as f64 - offset) * self.spacing];
                let class = match self.layout {
                    Layout::Bands => row,
                    Layout::Checker => row + col,
                } % self.num_classes;
                (centre, class)
            })
            .collect()
    }
}

struct Sampler<'a> {
    spec: &'a TaskSpec,
    by_class: Vec<Vec<[f64; 2]>>,
    seen: HashSet<Vec<u64>>,
}

impl Sampler<'_> {
    fn draw_set(&mut self, rng: &mut DetRng, n: usize) -> Result<Dataset, DlError> {
        let c = self.spec.num_classes;
        let mut records = Vec::with_capacity(n);
        for i in 0..n {
            let label = i % c;
            let blobs = &self.by_class[label];
            let centre = blobs[(i / c) % blobs.len()];
            loop {
                let features: Vec<f64> = (0..self.spec.input_dim)
                    .map(|d| centre.get(d).copied().unwrap_or(0.0) + self.spec.std_dev * rng.standard_normal())
                    .collect();
                let key: Vec<u64> = features.iter().map(|x| x.to_bits()).collect();
                if self.seen.insert(key) {
                    records.push(Record { features, label: label as u32 });
                    break;
                }
                if self.spec.std_dev == 0.0 && self.seen.len() >= self.spec.num_classes * self.spec.blobs_per_class {
                    return Err(DlError::BadDataset("zero-noise task cannot produce disjoint sets".into()));
                }
            }
        }
        rng.shuffle(&mut records);
        Dataset::new(records, self.spec.input_dim, c)
    }
}

/// Training set plus `blocks` fresh test sets for the given task shape.
pub fn generate_task_with(
    spec: &TaskSpec,
    task_seed: u64,
    n_train: usize,
    n_test_per_block: usize,
    blocks: usize,
) -> Result<(Dataset, Vec<Dataset>), DlError> {
    spec.validate()?;
    if n_train == 0 || n_test_per_block == 0 {
        return Err(DlError::EmptyDataset);
    }
    let mut by_class = vec![Vec::new(); spec.num_classes];
    for (centre, class) in spec.blobs() {
        by_class[class].push(centre);
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(DlError::BadDataset("a class has no blobs".into()));
    }
    let mut sampler = Sampler { spec, by_class, seen: HashSet::new() };
    let train = sampler.draw_set(&mut DetRng::new("podl/task", task_seed, 0), n_train)?;
    let tests = (0..blocks)
        .map(|k| sampler.draw_set(&mut DetRng::new("podl/task", task_seed, k as u64 + 1), n_test_per_block))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((train, tests))
}

/// [`generate_task_with`] on the default [`TaskSpec`].
pub fn generate_task(
    task_seed: u64,
    n_train: usize,
    n_test_per_block: usize,
    blocks: usize,
) -> Result<(Dataset, Vec<Dataset>), DlError> {
    generate_task_with(&TaskSpec::default(), task_seed, n_train, n_test_per_block, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let (a, at) = generate_task(7, 50, 20, 3).unwrap();
        let (b, bt) = generate_task(7, 50, 20, 3).unwrap();
        assert_eq!(a.id(), b.id());
        assert_eq!(at.iter().map(Dataset::id).collect::<Vec<_>>(), bt.iter().map(Dataset::id).collect::<Vec<_>>());
        let (c, _) = generate_task(8, 50, 20, 3).unwrap();
        assert_ne!(a.id(), c.id());
    }

    #[test]
    fn pairwise_disjoint_by_brute_force() {
        let (train, tests) = generate_task(3, 120, 40, 4).unwrap();
        let mut sets = vec![&train];
        sets.extend(tests.iter());
        for (i, a) in sets.iter().enumerate() {
            for b in sets.iter().skip(i + 1) {
                for ra in a.records() {
                    for rb in b.records() {
                        assert_ne!(ra.features, rb.features);
                    }
                }
            }
        }
    }

    #[test]
    fn class_balance_within_one() {
        let (train, tests) = generate_task(5, 101, 37, 2).unwrap();
        for ds in std::iter::once(&train).chain(&tests) {
            let counts = ds.label_counts();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "{counts:?}");
            assert_eq!(counts.iter().sum::<usize>(), ds.len());
        }
    }

    #[test]
    fn blobs_equally_represented() {
        let spec = TaskSpec::default();
        let (_, tests) = generate_task(9, 10, 90, 1).unwrap();
        let blobs = spec.blobs();
        let mut counts = vec![0usize; blobs.len()];
        for r in tests[0].records() {
            let nearest = (0..blobs.len())
                .min_by(|&a, &b| {
                    let d = |k: usize| (r.features[0] - blobs[k].0[0]).powi(2) + (r.features[1] - blobs[k].0[1]).powi(2);
                    d(a).total_cmp(&d(b))
                })
                .unwrap();
            assert_eq!(blobs[nearest].1 as u32, r.label);
            counts[nearest] += 1;
        }
        assert_eq!(counts, vec![10; 9]);
    }

    #[test]
    fn each_class_gets_its_blobs() {
        for layout in [Layout::Bands, Layout::Checker] {
            let blobs = TaskSpec { layout, ..TaskSpec::default() }.blobs();
            assert_eq!(blobs.len(), 9);
            for c in 0..3 {
                assert_eq!(blobs.iter().filter(|b| b.1 == c).count(), 3);
            }
        }
        let bands = TaskSpec::default().blobs();
        assert_eq!(bands[0].1, bands[1].1);
        assert_ne!(bands[0].1, bands[3].1);
        let checker = TaskSpec { layout: Layout::Checker, ..TaskSpec::default() }.blobs();
        assert_ne!(checker[0].1, checker[1].1);
    }

    #[test]
    fn rejects_empty_sizes() {
        assert!(generate_task(1, 0, 5, 1).is_err());
        assert!(generate_task(1, 5, 0, 1).is_err());
    }
}
