//! Neighborhood (sparsity) measures over a sample.
//!
//! The k-NN distance `g(x) = ‖x − x^(k)‖` is a sparsity measure: it is
//! asymptotically larger at low-density points. Two exact backends are
//! provided, a brute-force scan and a kd-tree; they return identical results.

mod kdtree;

pub use self::kdtree::KdTree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use self::kdtree::Candidate;
use crate::data::{squared_euclidean, PointCloud};
use crate::error::{Error, Result};

/// Above this many points `Backend::Auto` switches to the kd-tree.
pub const BRUTE_FORCE_MAX: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Auto,
    BruteForce,
    KdTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

impl From<Candidate> for Neighbor {
    fn from(c: Candidate) -> Self {
        Neighbor {
            index: c.index,
            distance: c.d2.sqrt(),
        }
    }
}

/// Exact nearest-neighbor search over one cloud with a fixed backend.
#[derive(Debug, Clone)]
pub enum NeighborIndex<'a> {
    BruteForce(&'a PointCloud),
    KdTree(KdTree<'a>),
}

impl<'a> NeighborIndex<'a> {
    pub fn new(cloud: &'a PointCloud, backend: Backend) -> Self {
        match backend {
            Backend::BruteForce => NeighborIndex::BruteForce(cloud),
            Backend::KdTree => NeighborIndex::KdTree(KdTree::build(cloud)),
            Backend::Auto if cloud.len() <= BRUTE_FORCE_MAX => NeighborIndex::BruteForce(cloud),
            Backend::Auto => NeighborIndex::KdTree(KdTree::build(cloud)),
        }
    }

    pub fn cloud(&self) -> &PointCloud {
        match self {
            NeighborIndex::BruteForce(c) => c,
            NeighborIndex::KdTree(t) => t.cloud(),
        }
    }

    /// `k` nearest rows in ascending `(distance, index)` order.
    /// `exclude` removes one row (typically the query point itself).
    pub fn knn(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        let found = match self {
            NeighborIndex::BruteForce(cloud) => brute_knn(cloud, query, k, exclude),
            NeighborIndex::KdTree(tree) => tree.knn(query, k, exclude),
        };
        found.into_iter().map(Neighbor::from).collect()
    }

    /// Distance to the closest row, or `None` for an empty index.
    pub fn nearest_distance(&self, query: &[f64]) -> Option<f64> {
        self.knn(query, 1, None).first().map(|n| n.distance)
    }
}

fn brute_knn(cloud: &PointCloud, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<Candidate> {
    let mut all: Vec<Candidate> = cloud
        .points()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(index, p)| Candidate {
            d2: squared_euclidean(query, p),
            index,
        })
        .collect();
    let k = k.min(all.len());
    if k == 0 {
        return Vec::new();
    }
    if k < all.len() {
        all.select_nth_unstable(k - 1);
        all.truncate(k);
    }
    all.sort_unstable();
    all
}

/// The `k` nearest sample points to `query`, including an exact self-match.
pub fn knn_query(cloud: &PointCloud, query: &[f64], k: usize) -> Result<Vec<Neighbor>> {
    knn_query_with(cloud, query, k, Backend::Auto)
}

pub fn knn_query_with(cloud: &PointCloud, query: &[f64], k: usize, backend: Backend) -> Result<Vec<Neighbor>> {
    if query.len() != cloud.dim() {
        return Err(Error::DimensionMismatch {
            expected: cloud.dim(),
            found: query.len(),
        });
    }
    if k > cloud.len() {
        return Err(Error::param("k", format!("k = {k} exceeds sample size {}", cloud.len())));
    }
    Ok(NeighborIndex::new(cloud, backend).knn(query, k, None))
}

/// Per-point k-NN distances g_n(x_i) of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityProfile {
    pub values: Vec<f64>,
    pub k: usize,
    pub sample_ref: String,
}

impl SparsityProfile {
    /// Wraps externally computed sparsity values.
    pub fn from_values(values: Vec<f64>, k: usize, sample_ref: impl Into<String>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::param("values", "sparsity values must be finite and non-negative"));
        }
        Ok(Self {
            values,
            k,
            sample_ref: sample_ref.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Default neighbor count max(2, ⌈√n⌉).
pub fn default_k(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(2)
}

/// Distance from each sample point to its k-th nearest neighbor among the
/// other n − 1 points.
pub fn knn_sparsity(cloud: &PointCloud, k: usize) -> Result<SparsityProfile> {
    knn_sparsity_with(cloud, k, Backend::Auto)
}

pub fn knn_sparsity_with(cloud: &PointCloud, k: usize, backend: Backend) -> Result<SparsityProfile> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return Err(Error::param("k", format!("need 1 <= k <= n - 1, got k = {k}, n = {n}")));
    }
    let index = NeighborIndex::new(cloud, backend);
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            let nn = index.knn(cloud.point(i), k, Some(i));
            nn[k - 1].distance
        })
        .collect();
    Ok(SparsityProfile {
        values,
        k,
        sample_ref: cloud.label().unwrap_or("<unlabelled>").to_string(),
    })
}
