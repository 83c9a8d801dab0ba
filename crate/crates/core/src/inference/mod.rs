//! Permutation tests, the group-distance test and discrimination-threshold
//! searches.
//!
//! Every replicate draws from its own RNG stream keyed by the replicate
//! index, and results are collected in index order, so reports are identical
//! for any worker count.

mod group;
mod metric;
mod threshold;

pub use self::group::{group_deltas, group_test, group_test_from_matrix, group_test_with, GroupTestReport};
pub use self::metric::Metric;
pub use self::threshold::{threshold_search, ShiftMode, ThresholdProtocol, ThresholdSearchReport};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{generate, Family, PointCloud, RngSpec, SyntheticSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationReport {
    pub observed: f64,
    pub replicates: Vec<f64>,
    /// `#[replicate >= observed] / N`, no +1 correction.
    pub p_value: f64,
    pub n_permutations: usize,
    pub seed: RngSpec,
    /// Set when `p_value == 0`, meaning p < 1/N.
    pub below_resolution: bool,
}

impl PermutationReport {
    pub(crate) fn from_replicates(observed: f64, replicates: Vec<f64>, seed: RngSpec) -> Self {
        let n = replicates.len();
        let hits = replicates.iter().filter(|&&r| r >= observed).count();
        let p_value = hits as f64 / n as f64;
        Self {
            observed,
            replicates,
            p_value,
            n_permutations: n,
            seed,
            below_resolution: hits == 0,
        }
    }
}

/// Two-sample permutation test.
///
/// The n + m points are pooled; each replicate shuffles the pooled indices
/// (Fisher–Yates, stream `rng.child(r)`), assigns the first n to P and
/// recomputes `stat`.
pub fn permutation_test<F>(stat: F, p: &PointCloud, q: &PointCloud, n_permutations: usize, rng: RngSpec) -> Result<PermutationReport>
where
    F: Fn(&PointCloud, &PointCloud) -> Result<f64> + Sync,
{
    if n_permutations == 0 {
        return Err(Error::param("n_permutations", "need at least one permutation"));
    }
    let observed = stat(p, q)?;
    let pooled = p.concat(q)?;
    let n = p.len();
    let replicates = (0..n_permutations as u64)
        .into_par_iter()
        .map(|r| {
            let mut idx: Vec<usize> = (0..pooled.len()).collect();
            idx.shuffle(&mut rng.child(r).rng());
            let (left, right) = idx.split_at(n);
            stat(&pooled.subset(left), &pooled.subset(right))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PermutationReport::from_replicates(observed, replicates, rng))
}

/// Mixture-versus-gamma homogeneity design: P = 0.7·N(1, 1) + 0.3·U(1, 8),
/// Q = Gamma(shape 1, scale 2).
pub fn homogeneity_samples(n: usize, rng: RngSpec) -> Result<(PointCloud, PointCloud)> {
    let p = generate(
        &SyntheticSpec::new(
            Family::NormalMixtureUniform {
                alpha: 0.7,
                mu: 1.0,
                sigma: 1.0,
                a: 1.0,
                b: 8.0,
            },
            n,
        ),
        rng.child(0),
    )?;
    let q = generate(&SyntheticSpec::new(Family::Gamma { shape: 1.0, scale: 2.0 }, n), rng.child(1))?;
    Ok((p.with_label("mixture"), q.with_label("gamma")))
}

/// Runs the homogeneity design once and tests it with every metric. All
/// metrics see the same samples and the same permutation streams.
pub fn homogeneity_experiment(
    metrics: &[Metric],
    n: usize,
    n_permutations: usize,
    rng: RngSpec,
) -> Result<Vec<(Metric, PermutationReport)>> {
    let (p, q) = homogeneity_samples(n, rng)?;
    metrics
        .iter()
        .map(|m| {
            let report = permutation_test(|a, b| m.evaluate(a, b), &p, &q, n_permutations, rng.child(2))?;
            Ok((m.clone(), report))
        })
        .collect()
}
