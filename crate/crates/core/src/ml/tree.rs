//! CART decision trees on binary targets with integer sample weights.
//!
//! Splits are axis-aligned `x[f] <= threshold`. The `best` splitter scans
//! midpoints between consecutive distinct values; `random` draws one
//! threshold per candidate feature uniformly between its node minimum and
//! maximum. Ties between equally good splits keep the lowest feature index,
//! then the lowest threshold. Leaves predict the weighted majority, with ties
//! going to class 0.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::metrics::{impurity_unchecked, Criterion};
use super::{FeatureMatrix, MlError};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitter {
    Best,
    Random,
}

/// Number of features drawn as split candidates at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
}

impl MaxFeatures {
    pub fn count(self, width: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (width as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (width as f64).log2().floor() as usize,
            MaxFeatures::All => width,
        };
        k.clamp(1, width.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub splitter: Splitter,
    /// `None` grows until the other limits stop it.
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            splitter: Splitter::Best,
            max_depth: None,
            max_features: MaxFeatures::All,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), MlError> {
        if self.min_samples_split < 2 {
            return Err(MlError::InvalidParams("min_samples_split must be at least 2".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(MlError::InvalidParams("min_samples_leaf must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(MlError::InvalidParams("max_depth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        counts: [f64; 2],
        class: u8,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        counts: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Impurity decrease per feature, normalized to sum to 1 (all zero when
    /// the tree never split with a positive decrease).
    pub importances: Vec<f64>,
}

impl Tree {
    /// Fit on the rows with positive `weights` (one entry per matrix row).
    pub fn fit(
        x: &FeatureMatrix,
        y: &[u8],
        weights: &[u32],
        params: &TreeParams,
        rng: &mut seed::Rng,
    ) -> Result<Tree, MlError> {
        params.validate()?;
        for (name, len) in [("labels", y.len()), ("weights", weights.len())] {
            if len != x.n_rows() {
                return Err(MlError::Shape(format!(
                    "{name} has {len} entries for {} rows",
                    x.n_rows()
                )));
            }
        }
        let samples: Vec<usize> = (0..x.n_rows()).filter(|&i| weights[i] > 0).collect();
        if samples.is_empty() {
            return Err(MlError::EmptyTrainingSet);
        }
        let mut b = Builder {
            x,
            y,
            w: weights,
            params,
            rng,
            nodes: Vec::new(),
            gains: vec![0.0; x.n_cols()],
        };
        b.grow(samples, 0);
        let total: f64 = b.gains.iter().sum();
        let importances = if total > 0.0 {
            b.gains.iter().map(|g| g / total).collect()
        } else {
            vec![0.0; x.n_cols()]
        };
        Ok(Tree {
            nodes: b.nodes,
            importances,
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class, .. } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    y: &'a [u8],
    w: &'a [u32],
    params: &'a TreeParams,
    rng: &'a mut seed::Rng,
    nodes: Vec<Node>,
    gains: Vec<f64>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn counts(&self, samples: &[usize]) -> [f64; 2] {
        let mut c = [0.0; 2];
        for &i in samples {
            c[self.y[i] as usize] += self.w[i] as f64;
        }
        c
    }

    fn imp(&self, c: &[f64; 2]) -> f64 {
        impurity_unchecked(c, c[0] + c[1], self.params.criterion)
    }

    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&samples);
        let total = counts[0] + counts[1];
        let idx = self.nodes.len();
        let leaf = Node::Leaf {
            counts,
            class: (counts[1] > counts[0]) as u8,
        };
        self.nodes.push(leaf.clone());
        let node_imp = self.imp(&counts);
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if depth_reached || total < self.params.min_samples_split as f64 || node_imp <= 0.0 {
            return idx;
        }
        let Some(best) = self.find_split(&samples, counts, node_imp) else {
            return idx;
        };
        self.gains[best.feature] += best.gain;
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| self.x.get(i, best.feature) <= best.threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[idx] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
            counts,
        };
        idx
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.n_cols();
        let k = self.params.max_features.count(d);
        if k >= d {
            return (0..d).collect();
        }
        let mut f = sample(self.rng, d, k).into_vec();
        f.sort_unstable();
        f
    }

    fn find_split(&mut self, samples: &[usize], counts: [f64; 2], node_imp: f64) -> Option<Candidate> {
        let total = counts[0] + counts[1];
        let min_leaf = self.params.min_samples_leaf as f64;
        let eps = 1e-12 * total.max(1.0);
        let mut best: Option<Candidate> = None;
        let mut consider = |gain: f64, feature: usize, threshold: f64| {
            if best.as_ref().is_none_or(|b| gain > b.gain + eps) {
                best = Some(Candidate {
                    gain: gain.max(0.0),
                    feature,
                    threshold,
                });
            }
        };
        let features = self.candidate_features();
        match self.params.splitter {
            Splitter::Best => {
                let mut col: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
                for f in features {
                    col.clear();
                    col.extend(samples.iter().map(|&i| (self.x.get(i, f), i)));
                    col.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    let mut left = [0.0; 2];
                    for k in 0..col.len() - 1 {
                        let i = col[k].1;
                        left[self.y[i] as usize] += self.w[i] as f64;
                        let (v, next) = (col[k].0, col[k + 1].0);
                        if v == next {
                            continue;
                        }
                        let right = [counts[0] - left[0], counts[1] - left[1]];
                        let (wl, wr) = (left[0] + left[1], right[0] + right[1]);
                        if wl < min_leaf || wr < min_leaf {
                            continue;
                        }
                        let gain = total * node_imp - wl * self.imp(&left) - wr * self.imp(&right);
                        let mut threshold = v + (next - v) / 2.0;
                        if threshold >= next {
                            threshold = v;
                        }
                        consider(gain, f, threshold);
                    }
                }
            }
            Splitter::Random => {
                for f in features {
                    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                        let v = self.x.get(i, f);
                        (lo.min(v), hi.max(v))
                    });
                    if lo >= hi {
                        continue;
                    }
                    let threshold = self.rng.random_range(lo..hi);
                    let mut left = [0.0; 2];
                    for &i in samples {
                        if self.x.get(i, f) <= threshold {
                            left[self.y[i] as usize] += self.w[i] as f64;
                        }
                    }
                    let right = [counts[0] - left[0], counts[1] - left[1]];
                    let (wl, wr) = (left[0] + left[1], right[0] + right[1]);
                    if wl < min_leaf || wr < min_leaf {
                        continue;
                    }
                    let gain = total * node_imp - wl * self.imp(&left) - wr * self.imp(&right);
                    consider(gain, f, threshold);
                }
            }
        }
        best
    }
}
