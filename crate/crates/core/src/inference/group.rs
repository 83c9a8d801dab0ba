use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PermutationReport;
use crate::data::{PointCloud, RngSpec};
use crate::error::{Error, Result};
use crate::lsdistance::{distance_matrix, DistanceMatrix, DistanceOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTestReport {
    pub group_sizes: (usize, usize),
    /// Mean distance over ordered pairs i ≠ j within group 1.
    pub delta1: f64,
    pub delta2: f64,
    /// Mean distance over the |G1|·|G2| between-group pairs.
    pub delta12: f64,
    /// `delta12 − (delta1 + delta2)/2`.
    pub delta_star: f64,
    pub permutation: PermutationReport,
}

/// `(Δ₁, Δ₂, Δ₁₂)` for an assignment of subjects to group 0 or 1.
pub fn group_deltas(matrix: &DistanceMatrix, groups: &[usize]) -> (f64, f64, f64) {
    let mut sums = [0.0f64; 3];
    let mut sizes = [0usize; 2];
    for &g in groups {
        sizes[g] += 1;
    }
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let d = matrix.get(i, j);
            match (groups[i], groups[j]) {
                (0, 0) => sums[0] += 2.0 * d,
                (1, 1) => sums[1] += 2.0 * d,
                _ => sums[2] += d,
            }
        }
    }
    let within = |s: f64, g: usize| s / (g * (g - 1)) as f64;
    (
        within(sums[0], sizes[0]),
        within(sums[1], sizes[1]),
        sums[2] / (sizes[0] * sizes[1]) as f64,
    )
}

fn delta_star(matrix: &DistanceMatrix, groups: &[usize]) -> f64 {
    let (d1, d2, d12) = group_deltas(matrix, groups);
    d12 - (d1 + d2) / 2.0
}

fn validate_groups(groups: &[usize], n: usize) -> Result<(usize, usize)> {
    if groups.len() != n {
        return Err(Error::Groups(format!("{} labels for {n} subjects", groups.len())));
    }
    if let Some(g) = groups.iter().find(|&&g| g > 1) {
        return Err(Error::Groups(format!("group index {g} is not 0 or 1")));
    }
    let g2 = groups.iter().filter(|&&g| g == 1).count();
    let g1 = n - g2;
    if g1 < 2 || g2 < 2 {
        return Err(Error::Groups(format!("each group needs at least 2 subjects, got {g1} and {g2}")));
    }
    Ok((g1, g2))
}

/// Group test on a precomputed subject distance matrix. Replicates relabel
/// subjects uniformly at random, keeping group sizes, and reuse the matrix.
pub fn group_test_from_matrix(
    matrix: &DistanceMatrix,
    groups: &[usize],
    n_permutations: usize,
    rng: RngSpec,
) -> Result<GroupTestReport> {
    let sizes = validate_groups(groups, matrix.size)?;
    if n_permutations == 0 {
        return Err(Error::param("n_permutations", "need at least one permutation"));
    }
    let (delta1, delta2, delta12) = group_deltas(matrix, groups);
    let observed = delta12 - (delta1 + delta2) / 2.0;
    let replicates = (0..n_permutations as u64)
        .into_par_iter()
        .map(|r| {
            let mut relabeled = groups.to_vec();
            relabeled.shuffle(&mut rng.child(r).rng());
            delta_star(matrix, &relabeled)
        })
        .collect();
    Ok(GroupTestReport {
        group_sizes: sizes,
        delta1,
        delta2,
        delta12,
        delta_star: observed,
        permutation: PermutationReport::from_replicates(observed, replicates, rng),
    })
}

/// Group test with an arbitrary subject distance, evaluated once per
/// unordered pair.
pub fn group_test_with<F>(n_subjects: usize, groups: &[usize], distance: F, n_permutations: usize, rng: RngSpec) -> Result<GroupTestReport>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    validate_groups(groups, n_subjects)?;
    let labels = (0..n_subjects).map(|i| format!("subject{i}")).collect();
    let matrix = DistanceMatrix::from_pairs(labels, distance)?;
    group_test_from_matrix(&matrix, groups, n_permutations, rng)
}

/// Level-set group test: one cloud per subject, `groups[i] ∈ {0, 1}`.
pub fn group_test(
    clouds: &[PointCloud],
    groups: &[usize],
    opts: &DistanceOptions,
    n_permutations: usize,
    rng: RngSpec,
) -> Result<(GroupTestReport, DistanceMatrix)> {
    validate_groups(groups, clouds.len())?;
    let matrix = distance_matrix(clouds, opts)?;
    let report = group_test_from_matrix(&matrix, groups, n_permutations, rng)?;
    Ok((report, matrix))
}
