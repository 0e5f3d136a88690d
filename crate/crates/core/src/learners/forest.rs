//! Random-forest combiner: bagged regression trees over random feature
//! subsets. Splits minimize the summed squared error of the two children,
//! cutpoints are midpoints between consecutive distinct feature values, and
//! leaves predict the mean target of the samples that reached them.
//!
//! Each tree sorts every feature once over its (bootstrap) sample and keeps
//! the per-feature orderings partitioned while it grows, so no node below
//! the root sorts anything.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{Error, Result, TrainingSet};

/// Forest hyperparameters. `bootstrap` exists so oracle tests can grow a
/// tree on the exact training rows; experiments leave it on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RfParams {
    pub trees: usize,
    pub min_leaf: usize,
    pub features_per_split: usize,
    pub bootstrap: bool,
}

/// r = n/3 rounded, at least 1.
pub fn default_features_per_split(n_features: usize) -> usize {
    ((n_features as f64 / 3.0).round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        cutpoint: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, query: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { value } => *value,
            TreeNode::Split {
                feature,
                cutpoint,
                left,
                right,
            } => {
                if query[*feature] <= *cutpoint {
                    left.predict(query)
                } else {
                    right.predict(query)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<TreeNode>,
    pub params: RfParams,
}

impl Forest {
    /// Average of the tree responses.
    pub fn predict(&self, query: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(query)).sum();
        sum / self.trees.len() as f64
    }
}

/// Fit with bootstrap resampling on.
pub fn fit(
    train: &TrainingSet,
    trees: usize,
    min_leaf: usize,
    features_per_split: usize,
    seed: u64,
) -> Result<Forest> {
    fit_with(
        train,
        &RfParams {
            trees,
            min_leaf,
            features_per_split,
            bootstrap: true,
        },
        seed,
    )
}

pub fn fit_with(train: &TrainingSet, params: &RfParams, seed: u64) -> Result<Forest> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let n_features = train.n_features();
    if params.trees == 0
        || params.min_leaf == 0
        || params.features_per_split == 0
        || params.features_per_split > n_features
    {
        return Err(Error::InvalidParameter {
            name: "rf",
            reason: format!(
                "need trees >= 1, min_leaf >= 1 and 1 <= features_per_split <= {n_features}, got {params:?}"
            ),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = train.len();

    // Sort every feature once over the training rows; each tree derives its
    // own sorted bootstrap columns from these in linear time.
    let presorted: Vec<Vec<(f64, u32)>> = (0..n_features)
        .map(|feature| {
            let mut order: Vec<(f64, u32)> = train
                .patterns()
                .iter()
                .enumerate()
                .map(|(row, p)| (p[feature], row as u32))
                .collect();
            order.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            order
        })
        .collect();

    let mut builder = TreeBuilder {
        n_features,
        params: *params,
        columns: vec![Vec::with_capacity(rows); n_features],
        goes_left: vec![false; rows],
        partition_scratch: Vec::with_capacity(rows),
        feature_pool: (0..n_features).collect(),
        multiplicity: vec![0u32; rows],
        slot_start: vec![0u32; rows],
    };
    let trees = (0..params.trees)
        .map(|_| {
            builder.prepare(train, &presorted, params.bootstrap, &mut rng);
            let root_stats = NodeStats::over(&builder.columns[0]);
            builder.grow(0, builder.columns[0].len(), root_stats, &mut rng)
        })
        .collect();
    Ok(Forest {
        trees,
        params: *params,
    })
}

/// Target statistics of one node, carried down from the parent's partition
/// sweep so nodes need no extra stats pass.
#[derive(Debug, Clone, Copy)]
struct NodeStats {
    sum: f64,
    sum_sq: f64,
    min_t: f64,
    max_t: f64,
}

impl NodeStats {
    fn empty() -> NodeStats {
        NodeStats {
            sum: 0.0,
            sum_sq: 0.0,
            min_t: f64::INFINITY,
            max_t: f64::NEG_INFINITY,
        }
    }

    fn add(&mut self, target: f64) {
        self.sum += target;
        self.sum_sq += target * target;
        self.min_t = self.min_t.min(target);
        self.max_t = self.max_t.max(target);
    }

    fn over(entries: &[Entry]) -> NodeStats {
        let mut stats = NodeStats::empty();
        for e in entries {
            stats.add(e.target);
        }
        stats
    }
}

/// One sample of a tree: feature value, target and the sample's identity
/// within the tree (consistent across all feature columns).
#[derive(Debug, Clone, Copy)]
struct Entry {
    value: f64,
    target: f64,
    slot: u32,
}

struct TreeBuilder {
    n_features: usize,
    params: RfParams,
    /// Per feature, sorted by value at the root; node ranges stay sorted
    /// because splits partition them stably.
    columns: Vec<Vec<Entry>>,
    goes_left: Vec<bool>,
    partition_scratch: Vec<Entry>,
    feature_pool: Vec<usize>,
    multiplicity: Vec<u32>,
    slot_start: Vec<u32>,
}

struct BestSplit {
    feature: usize,
    cutpoint: f64,
    score: f64,
    left_count: usize,
}

impl TreeBuilder {
    /// Draw this tree's (bootstrap) sample and lay out the sorted columns.
    fn prepare(
        &mut self,
        train: &TrainingSet,
        presorted: &[Vec<(f64, u32)>],
        bootstrap: bool,
        rng: &mut ChaCha8Rng,
    ) {
        let rows = train.len();
        self.multiplicity.fill(0);
        if bootstrap {
            for _ in 0..rows {
                self.multiplicity[rng.gen_range(0..rows)] += 1;
            }
        } else {
            self.multiplicity.fill(1);
        }
        let mut next = 0u32;
        for row in 0..rows {
            self.slot_start[row] = next;
            next += self.multiplicity[row];
        }
        for (column, order) in self.columns.iter_mut().zip(presorted) {
            column.clear();
            for &(value, row) in order {
                let copies = self.multiplicity[row as usize];
                let target = train.targets()[row as usize];
                let base = self.slot_start[row as usize];
                for copy in 0..copies {
                    column.push(Entry {
                        value,
                        target,
                        slot: base + copy,
                    });
                }
            }
        }
        self.goes_left.resize(next as usize, false);
    }

    fn grow(&mut self, lo: usize, hi: usize, stats: NodeStats, rng: &mut ChaCha8Rng) -> TreeNode {
        let count = (hi - lo) as f64;
        let mean = stats.sum / count;
        if stats.min_t == stats.max_t || hi - lo < 2 * self.params.min_leaf {
            return TreeNode::Leaf { value: mean };
        }

        // sample r features without replacement, scanned in ascending order
        let r = self.params.features_per_split;
        for i in 0..r {
            let j = rng.gen_range(i..self.n_features);
            self.feature_pool.swap(i, j);
        }
        self.feature_pool[..r].sort_unstable();

        let mut best: Option<BestSplit> = None;
        for i in 0..r {
            let feature = self.feature_pool[i];
            if let Some(split) = self.best_split_on(lo, hi, feature, stats.sum, stats.sum_sq) {
                // strict improvement keeps the lowest feature index and
                // lowest cutpoint among exact ties
                if best.as_ref().map_or(true, |b| split.score < b.score) {
                    best = Some(split);
                }
            }
        }
        let Some(best) = best else {
            return TreeNode::Leaf { value: mean };
        };

        let (left_stats, right_stats) = self.partition(lo, hi, &best);
        let mid = lo + best.left_count;
        TreeNode::Split {
            feature: best.feature,
            cutpoint: best.cutpoint,
            left: Box::new(self.grow(lo, mid, left_stats, rng)),
            right: Box::new(self.grow(mid, hi, right_stats, rng)),
        }
    }

    /// Lowest-SSE cutpoint on one feature, honoring the min-leaf constraint.
    /// `total`/`total_sq` are the node's target sums (identical for every
    /// feature). Returns None when the feature is constant over the node.
    fn best_split_on(
        &self,
        lo: usize,
        hi: usize,
        feature: usize,
        total: f64,
        total_sq: f64,
    ) -> Option<BestSplit> {
        let range = &self.columns[feature][lo..hi];
        let n = range.len();
        let q = self.params.min_leaf;

        let mut best: Option<BestSplit> = None;
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for i in 0..n - 1 {
            let e = range[i];
            left_sum += e.target;
            left_sq += e.target * e.target;
            if range[i + 1].value <= e.value {
                continue; // not a boundary between distinct values
            }
            if (i + 1) < q || (n - i - 1) < q {
                continue;
            }
            let left_n = (i + 1) as f64;
            let right_n = (n - i - 1) as f64;
            let right_sum = total - left_sum;
            let right_sq = total_sq - left_sq;
            let score = (left_sq - left_sum * left_sum / left_n)
                + (right_sq - right_sum * right_sum / right_n);
            if best.as_ref().map_or(true, |b| score < b.score) {
                best = Some(BestSplit {
                    feature,
                    cutpoint: 0.5 * (e.value + range[i + 1].value),
                    score,
                    left_count: i + 1,
                });
            }
        }
        best
    }

    /// Stable-partition every feature's range so the left child occupies
    /// [lo, lo + left_count). The split feature is already partitioned by
    /// virtue of being sorted; the sweep over it also collects the child
    /// target statistics.
    fn partition(&mut self, lo: usize, hi: usize, best: &BestSplit) -> (NodeStats, NodeStats) {
        let mut left_stats = NodeStats::empty();
        let mut right_stats = NodeStats::empty();
        for e in &self.columns[best.feature][lo..lo + best.left_count] {
            self.goes_left[e.slot as usize] = true;
            left_stats.add(e.target);
        }
        for e in &self.columns[best.feature][lo + best.left_count..hi] {
            self.goes_left[e.slot as usize] = false;
            right_stats.add(e.target);
        }
        let scratch = &mut self.partition_scratch;
        scratch.resize(hi - lo, Entry { value: 0.0, target: 0.0, slot: 0 });
        let goes_left = &self.goes_left;
        for (feature, column) in self.columns.iter_mut().enumerate() {
            if feature == best.feature {
                continue;
            }
            let range = &mut column[lo..hi];
            // branch-free stable partition: every entry is written to both
            // destinations, only the matching cursor advances; the in-place
            // cursor never passes the read position so nothing unread is
            // clobbered
            let mut write = 0;
            let mut spill = 0;
            for read in 0..range.len() {
                let entry = range[read];
                let left = goes_left[entry.slot as usize] as usize;
                range[write] = entry;
                scratch[spill] = entry;
                write += left;
                spill += 1 - left;
            }
            range[write..].copy_from_slice(&scratch[..spill]);
        }
        (left_stats, right_stats)
    }
}
