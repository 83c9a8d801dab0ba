//! Covering estimates of set overlap between two finite samples.
//!
//! A band sample `s_A` with radius `r_A` stands for the union of closed balls
//! `B(x, r_A)`, `x ∈ s_A`. A point of the other sample is covered when it
//! falls inside that union. All counts are point-level: each point is counted
//! at most once.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{check_same_dim, euclidean, PointCloud};
use crate::error::Result;
use crate::sparsity::{Backend, NeighborIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetOverlapStats {
    pub n_a: usize,
    pub n_b: usize,
    /// Points of A inside B's covering.
    pub covered_a: usize,
    /// Points of B inside A's covering.
    pub covered_b: usize,
    pub sym_diff: usize,
    pub union: usize,
    pub jaccard_term: f64,
}

/// How the intersection is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageRule {
    /// Each point counted at most once via its nearest neighbor.
    #[default]
    PointLevel,
    /// `union − Σ_x Σ_y I(x, y)`, clamped at 0. For auditing only: the double
    /// sum can exceed the number of points.
    LiteralDoubleSum,
}

/// Per-point coverage flags for both samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub a_covered: Vec<bool>,
    pub b_covered: Vec<bool>,
}

impl Coverage {
    pub fn stats(&self) -> SetOverlapStats {
        let n_a = self.a_covered.len();
        let n_b = self.b_covered.len();
        let covered_a = self.a_covered.iter().filter(|&&c| c).count();
        let covered_b = self.b_covered.iter().filter(|&&c| c).count();
        let sym_diff = (n_a - covered_a) + (n_b - covered_b);
        SetOverlapStats {
            n_a,
            n_b,
            covered_a,
            covered_b,
            sym_diff,
            union: n_a + n_b,
            jaccard_term: jaccard(sym_diff, n_a, n_b),
        }
    }
}

fn jaccard(sym_diff: usize, n_a: usize, n_b: usize) -> f64 {
    match (n_a, n_b) {
        (0, 0) => 0.0,
        (0, _) | (_, 0) => 1.0,
        _ => sym_diff as f64 / (n_a + n_b) as f64,
    }
}

/// 1 when y lies in the ball `B(x, r_a)` or x lies in `B(y, r_b)` (closed).
pub fn covering_indicator(x: &[f64], y: &[f64], r_a: f64, r_b: f64) -> u8 {
    let d = euclidean(x, y);
    let in_a = (d <= r_a) as u8;
    let in_b = (d <= r_b) as u8;
    in_a + in_b - in_a * in_b
}

fn covered_by(index: &NeighborIndex<'_>, queries: &PointCloud, radius: f64) -> Vec<bool> {
    (0..queries.len())
        .into_par_iter()
        .map(|i| index.nearest_distance(queries.point(i)).is_some_and(|d| d <= radius))
        .collect()
}

/// Coverage flags: B's points against A's covering and vice versa.
pub fn coverage(a: &PointCloud, r_a: f64, b: &PointCloud, r_b: f64, backend: Backend) -> Result<Coverage> {
    check_same_dim(a, b)?;
    let index_a = NeighborIndex::new(a, backend);
    let index_b = NeighborIndex::new(b, backend);
    Ok(Coverage {
        a_covered: covered_by(&index_b, a, r_b),
        b_covered: covered_by(&index_a, b, r_a),
    })
}

pub fn overlap(a: &PointCloud, r_a: f64, b: &PointCloud, r_b: f64) -> Result<SetOverlapStats> {
    overlap_with(a, r_a, b, r_b, Backend::Auto, CoverageRule::PointLevel)
}

pub fn overlap_with(
    a: &PointCloud,
    r_a: f64,
    b: &PointCloud,
    r_b: f64,
    backend: Backend,
    rule: CoverageRule,
) -> Result<SetOverlapStats> {
    let mut stats = coverage(a, r_a, b, r_b, backend)?.stats();
    if rule == CoverageRule::LiteralDoubleSum {
        let pairs = literal_pair_cover_count(a, r_a, b, r_b)?;
        stats.sym_diff = stats.union.saturating_sub(pairs);
        stats.jaccard_term = jaccard(stats.sym_diff, stats.n_a, stats.n_b);
    }
    Ok(stats)
}

/// `Σ_{x∈A} Σ_{y∈B} I(x, y)`.
pub fn literal_pair_cover_count(a: &PointCloud, r_a: f64, b: &PointCloud, r_b: f64) -> Result<usize> {
    check_same_dim(a, b)?;
    Ok(a.points()
        .map(|x| b.points().map(|y| covering_indicator(x, y, r_a, r_b) as usize).sum::<usize>())
        .sum())
}

/// Finite Hausdorff distance. Returns 0 when either set is empty.
pub fn hausdorff(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    hausdorff_with(x, y, Backend::Auto)
}

pub fn hausdorff_with(x: &PointCloud, y: &PointCloud, backend: Backend) -> Result<f64> {
    check_same_dim(x, y)?;
    if x.is_empty() || y.is_empty() {
        return Ok(0.0);
    }
    let directed = |from: &PointCloud, to: &PointCloud| {
        let index = NeighborIndex::new(to, backend);
        (0..from.len())
            .into_par_iter()
            .map(|i| index.nearest_distance(from.point(i)).unwrap_or(0.0))
            .reduce(|| 0.0, f64::max)
    };
    Ok(directed(x, y).max(directed(y, x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, Family, RngSpec, SyntheticSpec};

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::from_scalars(xs).unwrap()
    }

    fn empty() -> PointCloud {
        PointCloud::from_flat(1, vec![], None).unwrap()
    }

    #[test]
    fn indicator_cases() {
        assert_eq!(covering_indicator(&[0.0], &[1.0], 1.0, 0.5), 1);
        assert_eq!(covering_indicator(&[0.0], &[1.0], 0.4, 0.4), 0);
        assert_eq!(covering_indicator(&[2.0], &[2.0], 0.0, 0.0), 1);
        assert_eq!(covering_indicator(&[0.0], &[1.0], 0.5, 1.0), 1);
    }

    #[test]
    fn identical_samples_have_no_difference() {
        let a = line(&[0.0, 0.5, 2.0]);
        let s = overlap(&a, 0.3, &a, 0.3).unwrap();
        assert_eq!(s.sym_diff, 0);
        assert_eq!(s.jaccard_term, 0.0);
    }

    #[test]
    fn disjoint_singletons() {
        let s = overlap(&line(&[0.0]), 1.0, &line(&[10.0]), 1.0).unwrap();
        assert_eq!((s.sym_diff, s.union), (2, 2));
        assert_eq!(s.jaccard_term, 1.0);
    }

    #[test]
    fn partial_overlap_hand_example() {
        // 1.05 is within 1 of A; 1 is within 0.5 of 1.05, 0 and 5 are not.
        let a = line(&[0.0, 1.0]);
        let b = line(&[1.05, 5.0]);
        let s = overlap(&a, 1.0, &b, 0.5).unwrap();
        assert_eq!(s.covered_b, 1);
        assert_eq!(s.covered_a, 1);
        assert_eq!(s.sym_diff, 2);
        assert_eq!(s.union, 4);
        assert_eq!(s.jaccard_term, 0.5);

        // Shrinking r_b below 0.05 uncovers A entirely.
        let s = overlap(&a, 1.0, &b, 0.04).unwrap();
        assert_eq!((s.covered_a, s.sym_diff), (0, 3));
        assert_eq!(s.jaccard_term, 0.75);
    }

    #[test]
    fn degenerate_empty_sets() {
        let s = overlap(&empty(), 1.0, &empty(), 1.0).unwrap();
        assert_eq!(s.jaccard_term, 0.0);
        let s = overlap(&empty(), 1.0, &line(&[1.0, 2.0]), 1.0).unwrap();
        assert_eq!(s.jaccard_term, 1.0);
        assert_eq!(s.sym_diff, 2);
    }

    #[test]
    fn dimension_mismatch() {
        let a = PointCloud::from_flat(2, vec![0.0, 0.0], None).unwrap();
        assert!(overlap(&a, 1.0, &line(&[0.0]), 1.0).is_err());
    }

    #[test]
    fn literal_double_sum_can_exceed_points() {
        // Two A points each cover both B points: I(A, B) = 4 = union.
        let a = line(&[0.0, 0.1]);
        let b = line(&[0.05, 0.06]);
        assert_eq!(literal_pair_cover_count(&a, 1.0, &b, 1.0).unwrap(), 4);
        let s = overlap_with(&a, 1.0, &b, 1.0, Backend::Auto, CoverageRule::LiteralDoubleSum).unwrap();
        assert_eq!(s.sym_diff, 0);
        // A point far from everything: literal count 4 of union 5.
        let a = line(&[0.0, 0.1, 9.0]);
        let s = overlap_with(&a, 1.0, &b, 1.0, Backend::Auto, CoverageRule::LiteralDoubleSum).unwrap();
        assert_eq!(s.sym_diff, 1);
    }

    #[test]
    fn hausdorff_cases() {
        assert_eq!(hausdorff(&line(&[0.0]), &line(&[3.0])).unwrap(), 3.0);
        let x = line(&[0.0, 2.0, 7.0]);
        assert_eq!(hausdorff(&x, &x).unwrap(), 0.0);
        assert_eq!(hausdorff(&line(&[0.0, 10.0]), &line(&[1.0])).unwrap(), 9.0);
        assert_eq!(hausdorff(&empty(), &line(&[1.0])).unwrap(), 0.0);
        assert_eq!(hausdorff(&empty(), &empty()).unwrap(), 0.0);
    }

    #[test]
    fn swap_symmetry_and_radius_monotonicity() {
        for seed in 0..30 {
            let spec = SyntheticSpec::new(Family::standard_normal(2), 40);
            let a = generate(&spec, RngSpec::with_stream(seed, 0)).unwrap();
            let b = generate(&spec, RngSpec::with_stream(seed, 1)).unwrap();
            let (r_a, r_b) = (0.1 + seed as f64 * 0.01, 0.2);
            let ab = overlap(&a, r_a, &b, r_b).unwrap();
            let ba = overlap(&b, r_b, &a, r_a).unwrap();
            assert_eq!((ab.sym_diff, ab.union, ab.jaccard_term), (ba.sym_diff, ba.union, ba.jaccard_term));
            let bigger = overlap(&a, r_a * 1.5, &b, r_b).unwrap();
            assert!(bigger.sym_diff <= ab.sym_diff);
            let bigger = overlap(&a, r_a, &b, r_b * 2.0).unwrap();
            assert!(bigger.sym_diff <= ab.sym_diff);
        }
    }
}
