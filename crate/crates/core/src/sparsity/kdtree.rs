use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::data::{squared_euclidean, PointCloud};

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static kd-tree over the rows of a [`PointCloud`] for exact k-NN queries.
///
/// Neighbors are ordered by `(squared distance, index)`, which is also the
/// order the brute-force scan uses, so both return identical lists.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    cloud: &'a PointCloud,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Max-heap entry keyed on `(d2, index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub d2: f64,
    pub index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

impl<'a> KdTree<'a> {
    pub fn build(cloud: &'a PointCloud) -> Self {
        let mut tree = KdTree {
            cloud,
            order: (0..cloud.len()).collect(),
            nodes: Vec::new(),
        };
        if !cloud.is_empty() {
            tree.build_node(0, cloud.len(), 0);
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let axis = self.widest_axis(start, end).unwrap_or(depth % self.cloud.dim());
        let mid = start + (end - start) / 2;
        let cloud = self.cloud;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            cloud.point(a)[axis].total_cmp(&cloud.point(b)[axis])
        });
        let value = cloud.point(self.order[mid])[axis];
        let left = self.build_node(start, mid, depth + 1);
        let right = self.build_node(mid, end, depth + 1);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    fn widest_axis(&self, start: usize, end: usize) -> Option<usize> {
        let dim = self.cloud.dim();
        let mut best = None;
        let mut best_spread = 0.0;
        for axis in 0..dim {
            let (lo, hi) = self.order[start..end].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = self.cloud.point(i)[axis];
                (lo.min(v), hi.max(v))
            });
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best = Some(axis);
            }
        }
        best
    }

    /// The `k` nearest rows to `query` sorted ascending, skipping `exclude`.
    pub(crate) fn knn(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<Candidate> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, exclude, &mut heap);
        heap.into_sorted_vec()
    }

    fn search(&self, node: usize, query: &[f64], k: usize, exclude: Option<usize>, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let cand = Candidate {
                        d2: squared_euclidean(query, self.cloud.point(i)),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, exclude, heap);
                // Points on the far side are at least |diff| away along `axis`.
                // Ties must still be visited: a tied point may have a smaller index.
                let bound = diff * diff;
                if heap.len() < k || bound <= heap.peek().expect("heap is non-empty").d2 {
                    self.search(far, query, k, exclude, heap);
                }
            }
        }
    }
}

impl<'a> KdTree<'a> {
    pub fn cloud(&self) -> &'a PointCloud {
        self.cloud
    }
}
