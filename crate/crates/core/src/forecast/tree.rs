//! CART-style classification tree over price ranges.
//!
//! Splits are chosen greedily by weighted Gini impurity. Candidate thresholds
//! are midpoints between consecutive distinct feature values. Ties resolve to
//! the lowest feature index, then the lowest threshold; leaf ties resolve to
//! the lowest class id.

use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::ols::Sample;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TreeError {
    #[error("no observations")]
    Empty,
    #[error("class edges must be finite and strictly ascending")]
    BadEdges,
    #[error("feature dimension mismatch: tree expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 4,
            min_samples: 2,
        }
    }
}

/// Preorder node list; children are explicit indices into the same list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
    pub class_edges: Vec<f64>,
    pub dim: usize,
}

impl TreeModel {
    pub fn n_classes(&self) -> usize {
        self.class_edges.len() + 1
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

/// Class id of a price: the number of edges at or below it.
pub fn price_class(price: f64, edges: &[f64]) -> usize {
    edges.partition_point(|&e| e <= price)
}

pub fn fit_tree(samples: &[Sample], class_edges: &[f64], config: &TreeConfig) -> Result<TreeModel, TreeError> {
    if samples.is_empty() {
        return Err(TreeError::Empty);
    }
    if class_edges.iter().any(|e| !e.is_finite()) || class_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TreeError::BadEdges);
    }
    let dim = samples[0].features.dim();
    if let Some(bad) = samples.iter().find(|s| s.features.dim() != dim) {
        return Err(TreeError::DimensionMismatch {
            expected: dim,
            got: bad.features.dim(),
        });
    }
    let n_classes = class_edges.len() + 1;
    let xs: Vec<&[f64]> = samples.iter().map(|s| s.features.values()).collect();
    let ys: Vec<usize> = samples.iter().map(|s| price_class(s.label, class_edges)).collect();
    let mut builder = Builder {
        xs: &xs,
        ys: &ys,
        n_classes,
        dim,
        config,
        nodes: Vec::new(),
    };
    let idx: Vec<usize> = (0..samples.len()).collect();
    builder.grow(idx, 0);
    Ok(TreeModel {
        nodes: builder.nodes,
        max_depth: config.max_depth,
        class_edges: class_edges.to_vec(),
        dim,
    })
}

struct Builder<'a> {
    xs: &'a [&'a [f64]],
    ys: &'a [usize],
    n_classes: usize,
    dim: usize,
    config: &'a TreeConfig,
    nodes: Vec<TreeNode>,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.ys[i]] += 1;
        }
        c
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let here = self.nodes.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if depth >= self.config.max_depth || pure || idx.len() < self.config.min_samples.max(2) {
            self.nodes.push(TreeNode::Leaf {
                class: majority(&counts),
            });
            return here;
        }
        let parent = gini(&counts, idx.len());
        let Some((feature, threshold, score)) = self.best_split(&idx) else {
            self.nodes.push(TreeNode::Leaf {
                class: majority(&counts),
            });
            return here;
        };
        if score >= parent {
            self.nodes.push(TreeNode::Leaf {
                class: majority(&counts),
            });
            return here;
        }
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.xs[i][feature] <= threshold);
        self.nodes.push(TreeNode::Split {
            feature,
            threshold,
            left: usize::MAX,
            right: usize::MAX,
        });
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        if let TreeNode::Split {
            left: ref mut lslot,
            right: ref mut rslot,
            ..
        } = self.nodes[here]
        {
            *lslot = left;
            *rslot = right;
        }
        here
    }

    /// (feature, threshold, weighted child impurity) of the best split.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let n = idx.len();
        let total = self.counts(idx);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..self.dim {
            order.sort_by(|&a, &b| self.xs[a][f].total_cmp(&self.xs[b][f]));
            let mut left = vec![0usize; self.n_classes];
            for k in 0..n - 1 {
                left[self.ys[order[k]]] += 1;
                let (a, b) = (self.xs[order[k]][f], self.xs[order[k + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = k + 1;
                let nr = n - nl;
                let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let score = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                let threshold = a + (b - a) / 2.0;
                if best.is_none_or(|(_, _, s)| score < s) {
                    best = Some((f, threshold, score));
                }
            }
        }
        best
    }
}

/// Root-to-leaf traversal; `feature <= threshold` goes left.
pub fn classify_price_range(tree: &TreeModel, features: &FeatureVector) -> Result<usize, TreeError> {
    if features.dim() != tree.dim {
        return Err(TreeError::DimensionMismatch {
            expected: tree.dim,
            got: features.dim(),
        });
    }
    let x = features.values();
    let mut i = 0;
    loop {
        match tree.nodes[i] {
            TreeNode::Leaf { class } => return Ok(class),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => i = if x[feature] <= threshold { left } else { right },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s1(x: f64, label: f64) -> Sample {
        Sample {
            features: FeatureVector::from_values(vec![x]),
            label,
        }
    }

    fn accuracy(tree: &TreeModel, data: &[Sample]) -> f64 {
        let ok = data
            .iter()
            .filter(|s| classify_price_range(tree, &s.features).unwrap() == price_class(s.label, &tree.class_edges))
            .count();
        ok as f64 / data.len() as f64
    }

    #[test]
    fn class_of_price() {
        let e = [10.0, 20.0];
        assert_eq!(price_class(5.0, &e), 0);
        assert_eq!(price_class(10.0, &e), 1);
        assert_eq!(price_class(19.9, &e), 1);
        assert_eq!(price_class(25.0, &e), 2);
    }

    #[test]
    fn pure_root_is_single_leaf() {
        let data: Vec<_> = (0..10).map(|i| s1(i as f64, 1.0)).collect();
        let t = fit_tree(&data, &[5.0], &TreeConfig::default()).unwrap();
        assert_eq!(t.nodes, vec![TreeNode::Leaf { class: 0 }]);
    }

    #[test]
    fn depth_zero_is_majority_leaf() {
        let data = vec![s1(0.0, 1.0), s1(1.0, 9.0), s1(2.0, 9.0)];
        let cfg = TreeConfig {
            max_depth: 0,
            ..Default::default()
        };
        let t = fit_tree(&data, &[5.0], &cfg).unwrap();
        assert_eq!(t.nodes, vec![TreeNode::Leaf { class: 1 }]);
        // tie goes to the lower class
        let tie = vec![s1(0.0, 1.0), s1(1.0, 9.0)];
        let t = fit_tree(&tie, &[5.0], &cfg).unwrap();
        assert_eq!(t.nodes, vec![TreeNode::Leaf { class: 0 }]);
    }

    #[test]
    fn one_dimensional_step() {
        // x < 5 -> class 0, x >= 5 -> class 1
        let data: Vec<_> = (0..10)
            .map(|x| s1(x as f64, if x < 5 { 1.0 } else { 10.0 }))
            .collect();
        let cfg = TreeConfig {
            max_depth: 1,
            ..Default::default()
        };
        let t = fit_tree(&data, &[5.0], &cfg).unwrap();
        match t.nodes[0] {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert!((4.0..=5.0).contains(&threshold));
                assert_eq!(threshold, 4.5);
            }
            ref other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(accuracy(&t, &data), 1.0);
    }

    #[test]
    fn hand_built_depth_two() {
        let t = TreeModel {
            nodes: vec![
                TreeNode::Split { feature: 0, threshold: 0.5, left: 1, right: 4 },
                TreeNode::Split { feature: 1, threshold: 10.0, left: 2, right: 3 },
                TreeNode::Leaf { class: 0 },
                TreeNode::Leaf { class: 1 },
                TreeNode::Leaf { class: 2 },
            ],
            max_depth: 2,
            class_edges: vec![1.0, 2.0],
            dim: 2,
        };
        let f = |a: f64, b: f64| FeatureVector::from_values(vec![a, b]);
        assert_eq!(classify_price_range(&t, &f(0.0, 5.0)).unwrap(), 0);
        assert_eq!(classify_price_range(&t, &f(0.5, 10.5)).unwrap(), 1);
        assert_eq!(classify_price_range(&t, &f(0.7, 0.0)).unwrap(), 2);
        assert!(classify_price_range(&t, &FeatureVector::from_values(vec![1.0])).is_err());
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn errors() {
        assert_eq!(fit_tree(&[], &[1.0], &TreeConfig::default()), Err(TreeError::Empty));
        assert_eq!(
            fit_tree(&[s1(0.0, 1.0)], &[2.0, 1.0], &TreeConfig::default()),
            Err(TreeError::BadEdges)
        );
    }

    fn dataset() -> impl Strategy<Value = Vec<Sample>> {
        prop::collection::vec((0u8..20, 0u8..20, 0.0f64..30.0), 5..60).prop_map(|v| {
            v.into_iter()
                .map(|(a, b, y)| Sample {
                    features: FeatureVector::from_values(vec![a as f64, b as f64]),
                    label: y,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn accuracy_non_decreasing_in_depth(data in dataset()) {
            let edges = [10.0, 20.0];
            let mut prev = 0.0;
            for d in 0..6 {
                let cfg = TreeConfig { max_depth: d, ..Default::default() };
                let t = fit_tree(&data, &edges, &cfg).unwrap();
                prop_assert!(t.depth() <= d);
                let acc = accuracy(&t, &data);
                prop_assert!(acc + 1e-12 >= prev, "depth {d}: {acc} < {prev}");
                prev = acc;
            }
        }

        #[test]
        fn constant_within_leaf_regions(data in dataset(), probes in prop::collection::vec((0.0f64..20.0, 0.0f64..20.0), 50)) {
            // leaf regions are axis-aligned boxes; collect them and check every probe
            let t = fit_tree(&data, &[10.0, 20.0], &TreeConfig::default()).unwrap();
            let mut regions = Vec::new();
            fn walk(t: &TreeModel, i: usize, lo: [f64; 2], hi: [f64; 2], out: &mut Vec<([f64; 2], [f64; 2], usize)>) {
                match t.nodes[i] {
                    TreeNode::Leaf { class } => out.push((lo, hi, class)),
                    TreeNode::Split { feature, threshold, left, right } => {
                        let mut lhi = hi; lhi[feature] = lhi[feature].min(threshold);
                        let mut rlo = lo; rlo[feature] = rlo[feature].max(threshold);
                        walk(t, left, lo, lhi, out);
                        walk(t, right, rlo, hi, out);
                    }
                }
            }
            walk(&t, 0, [f64::NEG_INFINITY; 2], [f64::INFINITY; 2], &mut regions);
            for (a, b) in probes {
                let c = classify_price_range(&t, &FeatureVector::from_values(vec![a, b])).unwrap();
                let owners: Vec<_> = regions
                    .iter()
                    .filter(|(lo, hi, _)| a > lo[0] && a <= hi[0] && b > lo[1] && b <= hi[1])
                    .collect();
                prop_assert_eq!(owners.len(), 1);
                prop_assert_eq!(owners[0].2, c);
            }
        }
    }
}
