//! Binary decision trees over sparse rows, shared by the forest and the
//! boosted ensemble. Absent features are read as zero.

use serde::{Deserialize, Serialize};

use crate::features::SparseVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", rename_all = "snake_case")]
pub enum Node<T> {
    Leaf {
        value: T,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Tree<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn leaf(value: T) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn evaluate(&self, x: &SparseVector<T>) -> T {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x.get(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Additive per-row statistic summarised by a split criterion.
pub(crate) trait Stat: Copy + Default {
    fn plus(self, o: Self) -> Self;
    fn minus(self, o: Self) -> Self;
}

/// Class counts `[negative, positive]`.
impl Stat for [usize; 2] {
    fn plus(self, o: Self) -> Self {
        [self[0] + o[0], self[1] + o[1]]
    }
    fn minus(self, o: Self) -> Self {
        [self[0] - o[0], self[1] - o[1]]
    }
}

/// First and second derivative sums of the boosting loss.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct GradPair<T> {
    pub g: T,
    pub h: T,
}

impl<T: Scalar> Stat for GradPair<T> {
    fn plus(self, o: Self) -> Self {
        GradPair {
            g: self.g + o.g,
            h: self.h + o.h,
        }
    }
    fn minus(self, o: Self) -> Self {
        GradPair {
            g: self.g - o.g,
            h: self.h - o.h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitChoice<T> {
    pub feature: usize,
    pub threshold: T,
    pub gain: T,
}

/// Nonzero entries of the rows at one node, grouped by feature and sorted by
/// value within each group.
pub(crate) struct NodeColumns<T> {
    entries: Vec<(usize, T, usize)>,
    groups: Vec<(usize, usize, usize)>,
    n_rows: usize,
}

impl<T: Scalar> NodeColumns<T> {
    pub fn gather(x: &[SparseVector<T>], rows: &[usize]) -> Self {
        let mut entries: Vec<(usize, T, usize)> = Vec::new();
        for &r in rows {
            entries.extend(x[r].iter().map(|(f, v)| (f, v, r)));
        }
        entries.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.partial_cmp(&b.1).expect("finite features"))
                .then(a.2.cmp(&b.2))
        });
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=entries.len() {
            if i == entries.len() || entries[i].0 != entries[start].0 {
                groups.push((entries[start].0, start, i));
                start = i;
            }
        }
        NodeColumns {
            entries,
            groups,
            n_rows: rows.len(),
        }
    }

    /// Indices into the group list of features that take more than one
    /// value among the node's rows.
    pub fn nonconstant(&self) -> Vec<usize> {
        (0..self.groups.len())
            .filter(|&g| {
                let (_, s, e) = self.groups[g];
                e - s < self.n_rows || self.entries[s].1 != self.entries[e - 1].1
            })
            .collect()
    }

    #[cfg(test)]
    pub fn feature_of(&self, group: usize) -> usize {
        self.groups[group].0
    }

    /// Best split over the given groups. `gain(left, right)` returns `None`
    /// for inadmissible partitions. Ties keep the earliest candidate.
    pub fn best_split<S: Stat>(
        &self,
        groups: &[usize],
        row_stat: impl Fn(usize) -> S,
        parent: S,
        gain: impl Fn(S, S) -> Option<T>,
    ) -> Option<SplitChoice<T>> {
        let mut best: Option<SplitChoice<T>> = None;
        let mut segments: Vec<(T, S, usize)> = Vec::new();
        for &g in groups {
            let (feature, s, e) = self.groups[g];
            segments.clear();
            let zero_count = self.n_rows - (e - s);
            let mut nonzero_sum = S::default();
            for &(_, _, r) in &self.entries[s..e] {
                nonzero_sum = nonzero_sum.plus(row_stat(r));
            }
            let mut zero_pending = zero_count > 0;
            for &(_, v, r) in &self.entries[s..e] {
                if zero_pending && v > T::zero() {
                    segments.push((T::zero(), parent.minus(nonzero_sum), zero_count));
                    zero_pending = false;
                }
                match segments.last_mut() {
                    Some(last) if last.0 == v => {
                        last.1 = last.1.plus(row_stat(r));
                        last.2 += 1;
                    }
                    _ => segments.push((v, row_stat(r), 1)),
                }
            }
            if zero_pending {
                segments.push((T::zero(), parent.minus(nonzero_sum), zero_count));
            }

            let mut left = S::default();
            for w in segments.windows(2) {
                left = left.plus(w[0].1);
                let (a, b) = (w[0].0, w[1].0);
                let Some(score) = gain(left, parent.minus(left)) else {
                    continue;
                };
                if best.is_none_or(|bst| score > bst.gain) {
                    let mut threshold = a + (b - a) / T::of(2.0);
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(SplitChoice {
                        feature,
                        threshold,
                        gain: score,
                    });
                }
            }
        }
        best
    }
}

/// Splits `rows` by a chosen split; both sides are nonempty by construction.
pub(crate) fn partition<T: Scalar>(
    x: &[SparseVector<T>],
    rows: &[usize],
    split: &SplitChoice<T>,
) -> (Vec<usize>, Vec<usize>) {
    rows.iter()
        .partition(|&&r| x[r].get(split.feature) <= split.threshold)
}

/// Accumulates nodes in depth-first order while a builder recurses.
pub(crate) struct TreeBuilder<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> TreeBuilder<T> {
    pub fn new() -> Self {
        TreeBuilder { nodes: Vec::new() }
    }

    pub fn reserve(&mut self) -> usize {
        self.nodes.push(Node::Leaf { value: T::zero() });
        self.nodes.len() - 1
    }

    pub fn set(&mut self, at: usize, node: Node<T>) {
        self.nodes[at] = node;
    }

    pub fn finish(self) -> Tree<T> {
        Tree { nodes: self.nodes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(v: &[&[f64]]) -> Vec<SparseVector<f64>> {
        v.iter().map(|r| SparseVector::from_dense(r)).collect()
    }

    #[test]
    fn nonconstant_detection() {
        let x = rows(&[&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0], &[3.0, 1.0, 0.0]]);
        let cols = NodeColumns::gather(&x, &[0, 1, 2]);
        let feats: Vec<usize> = cols.nonconstant().iter().map(|&g| cols.feature_of(g)).collect();
        assert_eq!(feats, vec![0, 2]);
        let cols = NodeColumns::gather(&x, &[0, 1]);
        let feats: Vec<usize> = cols.nonconstant().iter().map(|&g| cols.feature_of(g)).collect();
        assert_eq!(feats, vec![2]);
    }

    #[test]
    fn split_threshold_is_midpoint_and_zero_group_is_counted() {
        let x = rows(&[&[0.0], &[0.0], &[2.0], &[4.0]]);
        let labels = [0usize, 0, 1, 1];
        let cols = NodeColumns::gather(&x, &[0, 1, 2, 3]);
        let stat = |r: usize| {
            let mut s = [0usize; 2];
            s[labels[r]] += 1;
            s
        };
        let purity = |l: [usize; 2], r: [usize; 2]| {
            let mis = l[0].min(l[1]) + r[0].min(r[1]);
            Some(-(mis as f64))
        };
        let best = cols
            .best_split(&cols.nonconstant(), stat, [2, 2], purity)
            .unwrap();
        assert_eq!(best.feature, 0);
        assert_eq!(best.threshold, 1.0);
        assert_eq!(best.gain, 0.0);
        let (l, r) = partition(&x, &[0, 1, 2, 3], &best);
        assert_eq!((l, r), (vec![0, 1], vec![2, 3]));
    }

    #[test]
    fn negative_values_sort_before_zero() {
        let x = rows(&[&[-1.0], &[0.0], &[1.0]]);
        let cols = NodeColumns::gather(&x, &[0, 1, 2]);
        let labels = [1usize, 0, 0];
        let stat = |r: usize| {
            let mut s = [0usize; 2];
            s[labels[r]] += 1;
            s
        };
        let gain = |l: [usize; 2], r: [usize; 2]| Some(-((l[0].min(l[1]) + r[0].min(r[1])) as f64));
        let best = cols.best_split(&[0], stat, [2, 1], gain).unwrap();
        assert_eq!(best.threshold, -0.5);
    }

    #[test]
    fn evaluate_walks_the_tree() {
        let mut b = TreeBuilder::new();
        let root = b.reserve();
        let l = b.reserve();
        let r = b.reserve();
        b.set(l, Node::Leaf { value: -1.0 });
        b.set(r, Node::Leaf { value: 1.0 });
        b.set(
            root,
            Node::Split {
                feature: 1,
                threshold: 0.5,
                left: l,
                right: r,
            },
        );
        let t = b.finish();
        assert_eq!(t.evaluate(&SparseVector::from_dense(&[9.0, 0.0])), -1.0);
        assert_eq!(t.evaluate(&SparseVector::from_dense(&[0.0, 0.7])), 1.0);
        assert_eq!(t.depth(), 1);
        assert_eq!(t.n_leaves(), 2);
    }
}
