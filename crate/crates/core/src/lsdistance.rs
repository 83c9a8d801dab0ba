//! The level-set distance: a weighted sum of per-band Jaccard terms.
//!
//! Both samples are sliced into bands on the same ν grid using only their own
//! sparsity profiles. Band i of P is compared with band i of Q through their
//! coverings, and the Jaccard terms are weighted by one of four schemes.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{check_same_dim, euclidean, LevelGrid, PointCloud};
use crate::error::{Error, Result};
use crate::levelsets::{fit_bands_with, LevelBand, LevelSetModel};
use crate::numfmt::fmt_g17;
use crate::setops::{coverage, hausdorff_with, literal_pair_cover_count, CoverageRule, SetOverlapStats};
use crate::sparsity::{default_k, Backend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    /// Uniform weights 1/(m − 1).
    Ls0,
    /// Mean distance of uncovered cross pairs, scaled by 1/m.
    Ls1,
    /// Largest uncovered cross-pair distance, scaled by 1/m.
    Radius,
    /// Hausdorff distance between the uncovered parts, scaled by 1/m.
    Hausdorff,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 4] = [
        WeightScheme::Ls0,
        WeightScheme::Ls1,
        WeightScheme::Radius,
        WeightScheme::Hausdorff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightScheme::Ls0 => "ls0",
            WeightScheme::Ls1 => "ls1",
            WeightScheme::Radius => "radius",
            WeightScheme::Hausdorff => "hausdorff",
        }
    }
}

impl std::str::FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightScheme::ALL
            .into_iter()
            .find(|w| w.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param("scheme", format!("unknown weighting scheme {s:?}")))
    }
}

/// Everything that parameterizes a distance evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceOptions {
    pub grid: LevelGrid,
    /// Neighbor count; `None` resolves to max(2, ⌈√n⌉) with n the smaller sample.
    pub k: Option<usize>,
    pub scheme: WeightScheme,
    pub backend: Backend,
    pub coverage_rule: CoverageRule,
    /// Forces per-band radii `(r_P, r_Q)` instead of the median rule.
    pub radius_override: Option<Vec<(f64, f64)>>,
}

impl DistanceOptions {
    pub fn new(grid: LevelGrid, scheme: WeightScheme) -> Self {
        Self {
            grid,
            k: None,
            scheme,
            backend: Backend::Auto,
            coverage_rule: CoverageRule::PointLevel,
            radius_override: None,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn resolve_k(&self, n_p: usize, n_q: usize) -> usize {
        self.k.unwrap_or_else(|| default_k(n_p.min(n_q)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandTerm {
    pub band: usize,
    pub jaccard_term: f64,
    pub weight: f64,
    pub contribution: f64,
    pub radius_p: f64,
    pub radius_q: f64,
    pub overlap: SetOverlapStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub total: f64,
    pub per_band: Vec<BandTerm>,
    pub scheme: WeightScheme,
    pub grid: LevelGrid,
    pub k: usize,
    pub radii: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// A cloud with its bands and their member points materialized.
#[derive(Debug, Clone)]
pub struct FittedCloud {
    pub model: LevelSetModel,
    pub bands: Vec<LevelBand>,
    band_points: Vec<PointCloud>,
    dim: usize,
}

impl FittedCloud {
    pub fn fit(cloud: &PointCloud, grid: &LevelGrid, k: usize, backend: Backend) -> Result<Self> {
        let (model, bands) = fit_bands_with(cloud, grid, k, backend)?;
        let band_points = bands.iter().map(|b| cloud.subset(&b.member_indices)).collect();
        Ok(Self {
            model,
            bands,
            band_points,
            dim: cloud.dim(),
        })
    }

    pub fn band_points(&self, band: usize) -> &PointCloud {
        &self.band_points[band]
    }

    pub fn k(&self) -> usize {
        self.model.profile.k
    }
}

fn validate_pair(p: &PointCloud, q: &PointCloud) -> Result<()> {
    p.require_nonempty("cloud P is empty")?;
    q.require_nonempty("cloud Q is empty")?;
    check_same_dim(p, q)
}

/// Level-set distance with default backend and coverage rule.
pub fn ls_distance(
    p: &PointCloud,
    q: &PointCloud,
    grid: &LevelGrid,
    k: Option<usize>,
    scheme: WeightScheme,
) -> Result<DistanceReport> {
    let mut opts = DistanceOptions::new(grid.clone(), scheme);
    opts.k = k;
    ls_distance_with(p, q, &opts)
}

pub fn ls_distance_with(p: &PointCloud, q: &PointCloud, opts: &DistanceOptions) -> Result<DistanceReport> {
    validate_pair(p, q)?;
    let k = opts.resolve_k(p.len(), q.len());
    let fp = FittedCloud::fit(p, &opts.grid, k, opts.backend)?;
    let fq = FittedCloud::fit(q, &opts.grid, k, opts.backend)?;
    compare_fitted(&fp, &fq, opts)
}

/// Distance between two pre-fitted clouds (same grid and k).
pub fn compare_fitted(p: &FittedCloud, q: &FittedCloud, opts: &DistanceOptions) -> Result<DistanceReport> {
    if p.dim != q.dim {
        return Err(Error::DimensionMismatch {
            expected: p.dim,
            found: q.dim,
        });
    }
    if p.model.grid != opts.grid || q.model.grid != opts.grid {
        return Err(Error::param("grid", "clouds were fitted on a different grid"));
    }
    if p.k() != q.k() {
        return Err(Error::param("k", format!("clouds fitted with different k ({} vs {})", p.k(), q.k())));
    }
    let band_count = opts.grid.band_count();
    if let Some(r) = &opts.radius_override {
        if r.len() != band_count {
            return Err(Error::param(
                "radius_override",
                format!("{} radius pairs for {band_count} bands", r.len()),
            ));
        }
        if r.iter().any(|&(a, b)| !(a >= 0.0 && b >= 0.0)) {
            return Err(Error::param("radius_override", "radii must be non-negative"));
        }
    }

    let per_band = (0..band_count)
        .into_par_iter()
        .map(|i| {
            let (r_p, r_q) = match &opts.radius_override {
                Some(r) => r[i],
                None => (p.bands[i].radius, q.bands[i].radius),
            };
            band_term(i + 1, p.band_points(i), r_p, q.band_points(i), r_q, opts)
        })
        .collect::<Result<Vec<_>>>()?;

    let total = per_band.iter().fold(0.0, |acc, t| acc + t.contribution);
    let mut warnings: Vec<String> = p.model.warnings.iter().map(|w| format!("P: {w}")).collect();
    warnings.extend(q.model.warnings.iter().map(|w| format!("Q: {w}")));
    Ok(DistanceReport {
        total,
        radii: per_band.iter().map(|t| (t.radius_p, t.radius_q)).collect(),
        per_band,
        scheme: opts.scheme,
        grid: opts.grid.clone(),
        k: p.k(),
        warnings,
    })
}

fn band_term(
    band: usize,
    a: &PointCloud,
    r_a: f64,
    b: &PointCloud,
    r_b: f64,
    opts: &DistanceOptions,
) -> Result<BandTerm> {
    let cover = coverage(a, r_a, b, r_b, opts.backend)?;
    let mut overlap = cover.stats();
    if opts.coverage_rule == CoverageRule::LiteralDoubleSum {
        let pairs = literal_pair_cover_count(a, r_a, b, r_b)?;
        overlap.sym_diff = overlap.union.saturating_sub(pairs);
        overlap.jaccard_term = if overlap.union == 0 {
            0.0
        } else if overlap.n_a == 0 || overlap.n_b == 0 {
            1.0
        } else {
            overlap.sym_diff as f64 / overlap.union as f64
        };
    }

    let m = opts.grid.m() as f64;
    let weight = match opts.scheme {
        WeightScheme::Ls0 => 1.0 / (m - 1.0),
        WeightScheme::Ls1 => {
            if overlap.sym_diff == 0 {
                0.0
            } else {
                sum_sorted(uncovered_pair_distances(a, b, r_a.max(r_b))) / (m * overlap.sym_diff as f64)
            }
        }
        WeightScheme::Radius => {
            let far = uncovered_pair_distances(a, b, r_a.max(r_b));
            far.into_iter().fold(0.0, f64::max) / m
        }
        WeightScheme::Hausdorff => {
            let keep = |cloud: &PointCloud, flags: &[bool]| {
                let idx: Vec<usize> = (0..cloud.len()).filter(|&i| !flags[i]).collect();
                cloud.subset(&idx)
            };
            let a_out = keep(a, &cover.a_covered);
            let b_out = keep(b, &cover.b_covered);
            hausdorff_with(&b_out, &a_out, opts.backend)? / m
        }
    };
    Ok(BandTerm {
        band,
        jaccard_term: overlap.jaccard_term,
        weight,
        contribution: weight * overlap.jaccard_term,
        radius_p: r_a,
        radius_q: r_b,
        overlap,
    })
}

/// Distances ‖x − y‖ of cross pairs outside both balls, i.e. with I(x, y) = 0.
fn uncovered_pair_distances(a: &PointCloud, b: &PointCloud, r: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for x in a.points() {
        for y in b.points() {
            let d = euclidean(x, y);
            if d > r {
                out.push(d);
            }
        }
    }
    out
}

/// Order-independent sum: the result does not depend on which sample came first.
/// Folds from +0 because `Iterator::sum` of nothing is -0.
fn sum_sorted(mut values: Vec<f64>) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.into_iter().fold(0.0, |acc, v| acc + v)
}

/// Symmetric matrix of pairwise values with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub size: usize,
    /// Row-major `size × size`.
    pub values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(labels: Vec<String>) -> Self {
        let size = labels.len();
        Self {
            labels,
            size,
            values: vec![0.0; size * size],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn set_symmetric(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.size + j] = v;
        self.values[j * self.size + i] = v;
    }

    /// Evaluates `f(i, j)` once per unordered pair, in parallel.
    pub fn from_pairs<F>(labels: Vec<String>, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<f64> + Sync,
    {
        let size = labels.len();
        let pairs: Vec<(usize, usize)> = (0..size).flat_map(|i| (i + 1..size).map(move |j| (i, j))).collect();
        let vals = pairs
            .par_iter()
            .map(|&(i, j)| {
                f(i, j).map_err(|e| Error::Pair {
                    i,
                    j,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut m = DistanceMatrix::zeros(labels);
        for (&(i, j), v) in pairs.iter().zip(vals) {
            m.set_symmetric(i, j, v);
        }
        Ok(m)
    }

    /// CSV with a header `id,<labels>` and one labelled row per object.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for i in 0..self.size {
            out.push_str(&self.labels[i]);
            for j in 0..self.size {
                out.push(',');
                out.push_str(&fmt_g17(self.get(i, j)));
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise level-set distances. Each cloud is fitted once per distinct k.
pub fn distance_matrix(clouds: &[PointCloud], opts: &DistanceOptions) -> Result<DistanceMatrix> {
    if clouds.len() < 2 {
        return Err(Error::param("clouds", "need at least 2 clouds"));
    }
    for (i, c) in clouds.iter().enumerate() {
        c.require_nonempty("empty cloud in matrix input")
            .and_then(|_| check_same_dim(&clouds[0], c))
            .map_err(|e| Error::Pair { i: 0, j: i, source: Box::new(e) })?;
    }
    let k_of = |i: usize, j: usize| opts.resolve_k(clouds[i].len(), clouds[j].len());
    let size = clouds.len();
    let mut needed = BTreeSet::new();
    for i in 0..size {
        for j in i + 1..size {
            let k = k_of(i, j);
            needed.insert((i, k));
            needed.insert((j, k));
        }
    }
    let needed: Vec<(usize, usize)> = needed.into_iter().collect();
    let fitted = needed
        .par_iter()
        .map(|&(i, k)| FittedCloud::fit(&clouds[i], &opts.grid, k, opts.backend))
        .collect::<Result<Vec<_>>>()?;
    let lookup = |i: usize, k: usize| {
        let pos = needed.binary_search(&(i, k)).expect("fit prepared for every pair");
        &fitted[pos]
    };
    let labels = clouds
        .iter()
        .enumerate()
        .map(|(i, c)| c.label().map(str::to_string).unwrap_or_else(|| format!("cloud{i}")))
        .collect();
    DistanceMatrix::from_pairs(labels, |i, j| {
        let k = k_of(i, j);
        compare_fitted(lookup(i, k), lookup(j, k), opts).map(|r| r.total)
    })
}
