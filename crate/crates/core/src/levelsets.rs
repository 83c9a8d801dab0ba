//! Minimum-volume sets and level-set bands via the order statistic of a
//! sparsity measure.
//!
//! The estimate of S_α at level ν retains the ⌈(1 − ν)·n⌉ sample points
//! with the smallest sparsity, so its empirical mass is 1 − ν. Bands are
//! differences of consecutive retained sets: band 1 is the sparsest shell,
//! band m − 1 holds the densest points.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{euclidean, LevelGrid, PointCloud};
use crate::error::{Error, Result};
use crate::sparsity::{knn_sparsity_with, Backend, SparsityProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetModel {
    pub profile: SparsityProfile,
    pub grid: LevelGrid,
    /// ρ*(ν_i): largest retained sparsity at each grid value, 0 for the empty
    /// set. Non-increasing in i because retained mass shrinks as ν grows.
    pub rho_stars: Vec<f64>,
    /// 1-based band index of every sample point.
    pub band_assignment: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelBand {
    /// 1-based, ascending in density.
    pub index: usize,
    /// Indices into the parent cloud, ascending.
    pub member_indices: Vec<usize>,
    pub radius: f64,
    pub count: usize,
}

/// Audit view of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelExport {
    pub grid: LevelGrid,
    pub k: usize,
    pub rho_stars: Vec<f64>,
    pub band_sizes: Vec<usize>,
    pub radii: Vec<f64>,
    pub warnings: Vec<String>,
}

impl LevelSetModel {
    pub fn export(&self, bands: &[LevelBand]) -> ModelExport {
        ModelExport {
            grid: self.grid.clone(),
            k: self.profile.k,
            rho_stars: self.rho_stars.clone(),
            band_sizes: bands.iter().map(|b| b.count).collect(),
            radii: bands.iter().map(|b| b.radius).collect(),
            warnings: self.warnings.clone(),
        }
    }
}

/// Number of points retained at level ν: ⌈(1 − ν)·n⌉.
pub fn retained_count(n: usize, nu: f64) -> usize {
    // The slack absorbs representation error such as (1 − 0.7)·100 = 30.000000000000004.
    let raw = (1.0 - nu) * n as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Sample indices ordered by `(sparsity, index)`.
fn sparsity_order(profile: &SparsityProfile) -> Vec<usize> {
    let mut order: Vec<usize> = (0..profile.len()).collect();
    order.sort_by(|&a, &b| {
        profile.values[a]
            .partial_cmp(&profile.values[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

fn check_nu(nu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::param("nu", format!("must lie in [0, 1], got {nu}")));
    }
    Ok(())
}

/// Estimated minimum-volume set at level ν, as ascending sample indices.
/// Ties at the threshold are taken in ascending index order.
pub fn minimum_volume_set(profile: &SparsityProfile, nu: f64) -> Result<Vec<usize>> {
    check_nu(nu)?;
    if profile.len() < 2 {
        return Err(Error::param("profile", "need a profile of at least 2 points"));
    }
    let count = retained_count(profile.len(), nu);
    let mut set = sparsity_order(profile)[..count].to_vec();
    set.sort_unstable();
    Ok(set)
}

/// Lower median of all pairwise distances among `members`; 0 below 2 members.
pub fn band_radius(cloud: &PointCloud, members: &[usize]) -> f64 {
    let s = members.len();
    if s < 2 {
        return 0.0;
    }
    let mut d = Vec::with_capacity(s * (s - 1) / 2);
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            d.push(euclidean(cloud.point(i), cloud.point(j)));
        }
    }
    let mid = (d.len() - 1) / 2;
    let (_, median, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    *median
}

/// Computes the k-NN profile of `cloud` and slices it into bands.
pub fn fit_bands(cloud: &PointCloud, grid: &LevelGrid, k: usize) -> Result<(LevelSetModel, Vec<LevelBand>)> {
    fit_bands_with(cloud, grid, k, Backend::Auto)
}

pub fn fit_bands_with(
    cloud: &PointCloud,
    grid: &LevelGrid,
    k: usize,
    backend: Backend,
) -> Result<(LevelSetModel, Vec<LevelBand>)> {
    if cloud.len() < 2 {
        return Err(Error::param("cloud", "need at least 2 points to fit level sets"));
    }
    let profile = knn_sparsity_with(cloud, k, backend)?;
    fit_bands_from_profile(cloud, profile, grid)
}

/// Band fitting for a precomputed sparsity profile of `cloud`.
pub fn fit_bands_from_profile(
    cloud: &PointCloud,
    profile: SparsityProfile,
    grid: &LevelGrid,
) -> Result<(LevelSetModel, Vec<LevelBand>)> {
    let n = cloud.len();
    if profile.len() != n {
        return Err(Error::param("profile", format!("profile has {} values for {n} points", profile.len())));
    }
    if n < 2 {
        return Err(Error::param("cloud", "need at least 2 points to fit level sets"));
    }
    let order = sparsity_order(&profile);
    let counts: Vec<usize> = grid.nu_values().iter().map(|&nu| retained_count(n, nu)).collect();
    let rho_stars = counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { profile.values[order[c - 1]] })
        .collect();

    let band_count = grid.band_count();
    let mut warnings = Vec::new();
    if n < band_count {
        warnings.push(format!("{n} points for {band_count} bands: some bands are empty"));
    }

    let members: Vec<Vec<usize>> = (0..band_count)
        .map(|i| {
            let mut m = order[counts[i + 1]..counts[i]].to_vec();
            m.sort_unstable();
            m
        })
        .collect();
    let mut band_assignment = vec![0; n];
    for (i, m) in members.iter().enumerate() {
        for &p in m {
            band_assignment[p] = i + 1;
        }
    }
    let bands = members
        .into_par_iter()
        .enumerate()
        .map(|(i, member_indices)| LevelBand {
            index: i + 1,
            radius: band_radius(cloud, &member_indices),
            count: member_indices.len(),
            member_indices,
        })
        .collect();

    let model = LevelSetModel {
        profile,
        grid: grid.clone(),
        rho_stars,
        band_assignment,
        warnings,
    };
    Ok((model, bands))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, Family, RngSpec, SyntheticSpec};
    use proptest::prelude::*;

    fn profile(values: &[f64]) -> SparsityProfile {
        SparsityProfile::from_values(values.to_vec(), 1, "test").unwrap()
    }

    #[test]
    fn order_statistic_hand_example() {
        let g = profile(&[1.0, 1.0, 2.0, 5.0]);
        assert_eq!(minimum_volume_set(&g, 0.25).unwrap(), vec![0, 1, 2]);
        assert_eq!(minimum_volume_set(&g, 0.0).unwrap(), vec![0, 1, 2, 3]);
        assert!(minimum_volume_set(&g, 1.0).unwrap().is_empty());
        assert!(minimum_volume_set(&g, 1.5).is_err());
        assert!(minimum_volume_set(&g, -0.1).is_err());
    }

    #[test]
    fn ties_resolved_by_index() {
        let g = profile(&[3.0, 1.0, 1.0, 1.0]);
        // ⌈0.5·4⌉ = 2 of the three tied points, lowest indices first.
        assert_eq!(minimum_volume_set(&g, 0.5).unwrap(), vec![1, 2]);
    }

    #[test]
    fn retained_counts_are_exact_on_uniform_grids() {
        let grid = LevelGrid::uniform(11).unwrap();
        let counts: Vec<usize> = grid.nu_values().iter().map(|&nu| retained_count(100, nu)).collect();
        assert_eq!(counts, vec![100, 90, 80, 70, 60, 50, 40, 30, 20, 10, 0]);
        assert_eq!(retained_count(4, 0.25), 3);
        assert_eq!(retained_count(7, 0.5), 4);
    }

    #[test]
    fn hundred_points_ten_bands() {
        let c = generate(&SyntheticSpec::new(Family::standard_normal(2), 100), RngSpec::new(1)).unwrap();
        let (model, bands) = fit_bands(&c, &LevelGrid::uniform(11).unwrap(), 10).unwrap();
        assert_eq!(bands.len(), 10);
        assert!(bands.iter().all(|b| b.count == 10));
        assert!(model.warnings.is_empty());
    }

    #[test]
    fn two_value_grid_is_one_band() {
        let c = PointCloud::from_scalars(&[0.0, 1.0, 3.0, 7.0]).unwrap();
        let (model, bands) = fit_bands(&c, &LevelGrid::uniform(2).unwrap(), 1).unwrap();
        assert_eq!(bands.len(), 1);
        assert_eq!(bands[0].member_indices, vec![0, 1, 2, 3]);
        assert_eq!(model.band_assignment, vec![1; 4]);
    }

    #[test]
    fn identical_points_have_zero_radius() {
        let c = PointCloud::from_scalars(&[4.0, 4.0, 4.0]).unwrap();
        let (_, bands) = fit_bands(&c, &LevelGrid::uniform(2).unwrap(), 1).unwrap();
        assert_eq!(bands[0].count, 3);
        assert_eq!(bands[0].radius, 0.0);
        // Finer grids split the tied points by index, but every radius stays 0.
        let (model, bands) = fit_bands(&c, &LevelGrid::uniform(11).unwrap(), 1).unwrap();
        assert!(bands.iter().all(|b| b.radius == 0.0));
        assert_eq!(bands.iter().map(|b| b.count).sum::<usize>(), 3);
        assert!(!model.warnings.is_empty());
    }

    #[test]
    fn radius_is_lower_median() {
        let c = PointCloud::from_scalars(&[0.0, 1.0, 3.0, 0.0, 0.0]).unwrap();
        assert_eq!(band_radius(&c, &[0, 1, 2]), 2.0);
        assert_eq!(band_radius(&c, &[1]), 0.0);
        assert_eq!(band_radius(&c, &[]), 0.0);
        assert_eq!(band_radius(&c, &[0, 3, 4]), 0.0);
        // Pairs {1, 3, 2, 0, 1, 3}: sorted {0,1,1,2,3,3}, lower median 1.
        assert_eq!(band_radius(&c, &[0, 1, 2, 3]), 1.0);
    }

    #[test]
    fn densest_band_holds_smallest_sparsity() {
        let c = PointCloud::from_scalars(&[0.0, 0.1, 0.2, 5.0, 9.0, 0.15]).unwrap();
        let (model, bands) = fit_bands(&c, &LevelGrid::uniform(3).unwrap(), 1).unwrap();
        let top = &bands[1];
        assert!(top.member_indices.iter().all(|&i| c.point(i)[0] < 1.0));
        assert!(model.rho_stars.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn export_lists_sizes_and_radii() {
        let c = generate(&SyntheticSpec::new(Family::standard_normal(1), 30), RngSpec::new(4)).unwrap();
        let (model, bands) = fit_bands(&c, &LevelGrid::uniform(4).unwrap(), 5).unwrap();
        let e = model.export(&bands);
        assert_eq!(e.band_sizes, vec![10, 10, 10]);
        assert_eq!(e.k, 5);
        assert_eq!(e.rho_stars.len(), 4);
        assert_eq!(e.rho_stars[3], 0.0);
    }

    proptest! {
        #[test]
        fn partition_and_nesting(
            values in proptest::collection::vec(-50.0f64..50.0, 3..80),
            cuts in proptest::collection::btree_set(1u32..999, 0..8),
            k_seed in 0usize..100,
        ) {
            let c = PointCloud::from_scalars(&values).unwrap();
            let n = c.len();
            let mut nu = vec![0.0];
            nu.extend(cuts.iter().map(|&v| v as f64 / 1000.0));
            nu.push(1.0);
            let grid = LevelGrid::new(nu.clone()).unwrap();
            let k = 1 + k_seed % (n - 1);
            let (model, bands) = fit_bands(&c, &grid, k).unwrap();

            // Every point in exactly one band, consistent with band_assignment.
            let mut seen = vec![0usize; n];
            for b in &bands {
                prop_assert_eq!(b.count, b.member_indices.len());
                for &i in &b.member_indices {
                    seen[i] += 1;
                    prop_assert_eq!(model.band_assignment[i], b.index);
                }
            }
            prop_assert!(seen.iter().all(|&s| s == 1));

            // Retained sets are nested and bands are their differences.
            let sets: Vec<Vec<usize>> = nu.iter().map(|&v| minimum_volume_set(&model.profile, v).unwrap()).collect();
            for w in sets.windows(2) {
                prop_assert!(w[1].iter().all(|i| w[0].contains(i)));
            }
            for (i, b) in bands.iter().enumerate() {
                let diff: Vec<usize> = sets[i].iter().copied().filter(|x| !sets[i + 1].contains(x)).collect();
                prop_assert_eq!(&diff, &b.member_indices);
            }
            prop_assert!(model.rho_stars.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
