//! Competitor two-sample statistics.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{check_same_dim, euclidean, squared_euclidean, PointCloud};
use crate::error::{Error, Result};
use crate::sparsity::{Backend, NeighborIndex};

/// Floor applied to zero distances and bandwidths.
pub const EPSILON_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum Bandwidth {
    MedianHeuristic,
    Fixed(f64),
}

/// A baseline statistic and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StatisticSpec {
    Kl { k: usize },
    T,
    Energy,
    Mmd { bandwidth: Bandwidth },
    Ks,
    Chi2 { bins: usize },
    Wilcoxon,
}

impl StatisticSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StatisticSpec::Kl { k: 0 } => Err(Error::param("k", "KL needs k >= 1")),
            StatisticSpec::Chi2 { bins } if bins < 2 => Err(Error::param("bins", "need at least 2 bins")),
            StatisticSpec::Mmd {
                bandwidth: Bandwidth::Fixed(h),
            } if !(h > 0.0) => Err(Error::param("bandwidth", "fixed bandwidth must be positive")),
            _ => Ok(()),
        }
    }

    /// The value used as a test statistic (larger = more different).
    ///
    /// KL is floored at 0 and Wilcoxon is centred, |W − E₀W|, so that the
    /// one-sided permutation p-value gives a two-sided rank-sum test.
    pub fn evaluate(&self, p: &PointCloud, q: &PointCloud) -> Result<f64> {
        self.validate()?;
        match *self {
            StatisticSpec::Kl { k } => Ok(kl_knn(p, q, k)?.value),
            StatisticSpec::T => Ok(hotelling_t2(p, q)?.value),
            StatisticSpec::Energy => energy_distance(p, q),
            StatisticSpec::Mmd { bandwidth } => Ok(mmd(p, q, bandwidth)?.value),
            StatisticSpec::Ks => ks_stat(p, q),
            StatisticSpec::Chi2 { bins } => chi2_stat(p, q, bins),
            StatisticSpec::Wilcoxon => {
                let w = wilcoxon_stat(p, q)?;
                let (n, m) = (p.len() as f64, q.len() as f64);
                Ok((w - n * (n + m + 1.0) / 2.0).abs())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    /// Reported value, floored at 0.
    pub value: f64,
    pub raw: f64,
    /// Some neighbor distance was 0 and was floored.
    pub floored: bool,
}

/// k-NN estimate of KL(P‖Q):
/// `(d/n) Σ log(s_k(x_i)/r_k(x_i)) + log(m/(n − 1))`, where r_k is the k-th
/// neighbor distance within P (self excluded) and s_k the k-th within Q.
pub fn kl_knn(p: &PointCloud, q: &PointCloud, k: usize) -> Result<KlEstimate> {
    check_same_dim(p, q)?;
    let (n, m) = (p.len(), q.len());
    if k == 0 || n <= k || m <= k {
        return Err(Error::param("k", format!("need 1 <= k < min(n, m), got k = {k}, n = {n}, m = {m}")));
    }
    let index_p = NeighborIndex::new(p, Backend::Auto);
    let index_q = NeighborIndex::new(q, Backend::Auto);
    let terms: Vec<(f64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = p.point(i);
            let r = index_p.knn(x, k, Some(i))[k - 1].distance;
            let s = index_q.knn(x, k, None)[k - 1].distance;
            let floored = r == 0.0 || s == 0.0;
            ((s.max(EPSILON_FLOOR) / r.max(EPSILON_FLOOR)).ln(), floored)
        })
        .collect();
    let log_sum: f64 = terms.iter().map(|t| t.0).sum();
    let raw = p.dim() as f64 / n as f64 * log_sum + (m as f64 / (n as f64 - 1.0)).ln();
    Ok(KlEstimate {
        value: raw.max(0.0),
        raw,
        floored: terms.iter().any(|t| t.1),
    })
}

/// Mean of `f(a_i, b_j)` over all ordered pairs. Row sums are reduced in
/// index order, so the result is independent of thread count.
fn mean_pairwise(a: &PointCloud, b: &PointCloud, f: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> f64 {
    let rows: Vec<f64> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let x = a.point(i);
            b.points().map(|y| f(x, y)).sum::<f64>()
        })
        .collect();
    rows.iter().sum::<f64>() / (a.len() as f64 * b.len() as f64)
}

/// Energy distance, V-statistic form:
/// `2·E‖X − Y‖ − E‖X − X'‖ − E‖Y − Y'‖` with self-pairs in the within terms.
pub fn energy_distance(p: &PointCloud, q: &PointCloud) -> Result<f64> {
    check_same_dim(p, q)?;
    p.require_nonempty("energy distance: P is empty")?;
    q.require_nonempty("energy distance: Q is empty")?;
    let xy = mean_pairwise(p, q, euclidean);
    let xx = mean_pairwise(p, p, euclidean);
    let yy = mean_pairwise(q, q, euclidean);
    Ok(2.0 * xy - xx - yy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdEstimate {
    /// max(MMD², 0).
    pub value: f64,
    pub bandwidth: f64,
    /// The bandwidth was 0 and was floored.
    pub floored: bool,
}

/// Lower median of the pairwise distances within the pooled sample.
pub fn median_heuristic(p: &PointCloud, q: &PointCloud) -> Result<f64> {
    let pooled = p.concat(q)?;
    let n = pooled.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut d: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let pooled = &pooled;
            (i + 1..n).map(move |j| euclidean(pooled.point(i), pooled.point(j)))
        })
        .collect();
    let mid = (d.len() - 1) / 2;
    Ok(*d.select_nth_unstable_by(mid, f64::total_cmp).1)
}

/// Biased (V-statistic) MMD² with kernel `exp(−‖x − y‖²/(2h²))`.
pub fn mmd(p: &PointCloud, q: &PointCloud, bandwidth: Bandwidth) -> Result<MmdEstimate> {
    check_same_dim(p, q)?;
    p.require_nonempty("MMD: P is empty")?;
    q.require_nonempty("MMD: Q is empty")?;
    let h = match bandwidth {
        Bandwidth::MedianHeuristic => median_heuristic(p, q)?,
        Bandwidth::Fixed(h) if h > 0.0 => h,
        Bandwidth::Fixed(h) => return Err(Error::param("bandwidth", format!("must be positive, got {h}"))),
    };
    let floored = h == 0.0;
    let h = h.max(EPSILON_FLOOR);
    let gamma = 1.0 / (2.0 * h * h);
    let kernel = |x: &[f64], y: &[f64]| (-gamma * squared_euclidean(x, y)).exp();
    let kxx = mean_pairwise(p, p, kernel);
    let kyy = mean_pairwise(q, q, kernel);
    let kxy = mean_pairwise(p, q, kernel);
    Ok(MmdEstimate {
        value: (kxx + kyy - 2.0 * kxy).max(0.0),
        bandwidth: h,
        floored,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotellingEstimate {
    pub value: f64,
    /// A ridge was added to a singular pooled covariance.
    pub ridge: Option<f64>,
}

/// Two-sample Hotelling statistic `(nm/(n+m))·(x̄ − ȳ)ᵀ S⁻¹ (x̄ − ȳ)` with the
/// pooled covariance S. In one dimension this is the squared pooled t.
pub fn hotelling_t2(p: &PointCloud, q: &PointCloud) -> Result<HotellingEstimate> {
    check_same_dim(p, q)?;
    let (n, m, d) = (p.len(), q.len(), p.dim());
    if n == 0 || m == 0 || n + m < d + 3 {
        return Err(Error::param("n", format!("Hotelling needs n + m - 2 > d, got n = {n}, m = {m}, d = {d}")));
    }
    let mx = DVector::from_vec(p.mean());
    let my = DVector::from_vec(q.mean());
    let diff = &mx - &my;
    if diff.iter().all(|&v| v == 0.0) {
        return Ok(HotellingEstimate { value: 0.0, ridge: None });
    }
    let scatter = |c: &PointCloud, mean: &DVector<f64>| {
        let mut s = DMatrix::zeros(d, d);
        for x in c.points() {
            let v = DVector::from_column_slice(x) - mean;
            s += &v * v.transpose();
        }
        s
    };
    let pooled = (scatter(p, &mx) + scatter(q, &my)) / (n + m - 2) as f64;
    let scale = (n * m) as f64 / (n + m) as f64;
    if let Some(chol) = pooled.clone().cholesky() {
        return Ok(HotellingEstimate {
            value: scale * diff.dot(&chol.solve(&diff)),
            ridge: None,
        });
    }
    let trace = pooled.trace();
    let ridge = if trace > 0.0 { 1e-8 * trace / d as f64 } else { 1e-8 };
    let regularized = pooled + DMatrix::identity(d, d) * ridge;
    let chol = regularized
        .cholesky()
        .ok_or_else(|| Error::param("covariance", "pooled covariance is not positive semi-definite"))?;
    Ok(HotellingEstimate {
        value: scale * diff.dot(&chol.solve(&diff)),
        ridge: Some(ridge),
    })
}

fn scalars(c: &PointCloud, statistic: &'static str) -> Result<Vec<f64>> {
    if c.dim() != 1 {
        return Err(Error::UnsupportedDimension { statistic, dim: c.dim() });
    }
    Ok(c.as_flat().to_vec())
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Kolmogorov–Smirnov statistic `sup_t |F_P(t) − F_Q(t)|`.
pub fn ks_stat(p: &PointCloud, q: &PointCloud) -> Result<f64> {
    let a = sorted(scalars(p, "KS")?);
    let b = sorted(scalars(q, "KS")?);
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("KS needs two non-empty samples"));
    }
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut sup) = (0, 0, 0.0f64);
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] == t {
            i += 1;
        }
        while j < b.len() && b[j] == t {
            j += 1;
        }
        sup = sup.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(sup)
}

/// Pearson χ² homogeneity statistic on `bins` equal-probability bins of the
/// pooled sample; expected counts are proportional to group sizes.
pub fn chi2_stat(p: &PointCloud, q: &PointCloud, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::param("bins", "need at least 2 bins"));
    }
    check_same_dim(p, q)?;
    let a = scalars(p, "chi2")?;
    let b = scalars(q, "chi2")?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("chi2 needs two non-empty samples"));
    }
    let pooled = sorted(a.iter().chain(&b).copied().collect());
    let total = pooled.len();
    let edges: Vec<f64> = (1..bins).map(|j| pooled[j * total / bins]).collect();
    let bin_of = |x: f64| edges.partition_point(|&e| e <= x);
    let mut counts = vec![(0usize, 0usize); bins];
    a.iter().for_each(|&x| counts[bin_of(x)].0 += 1);
    b.iter().for_each(|&y| counts[bin_of(y)].1 += 1);
    let (n, m, t) = (a.len() as f64, b.len() as f64, total as f64);
    Ok(counts
        .iter()
        .filter(|(op, oq)| op + oq > 0)
        .map(|&(op, oq)| {
            let row = (op + oq) as f64;
            let (ep, eq) = (n * row / t, m * row / t);
            (op as f64 - ep).powi(2) / ep + (oq as f64 - eq).powi(2) / eq
        })
        .sum())
}

/// Rank sum of P in the pooled ranking, with midranks for ties.
pub fn wilcoxon_stat(p: &PointCloud, q: &PointCloud) -> Result<f64> {
    let a = scalars(p, "Wilcoxon")?;
    let b = scalars(q, "Wilcoxon")?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("Wilcoxon needs two non-empty samples"));
    }
    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&y| (y, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < pooled.len() {
        let mut end = start + 1;
        while end < pooled.len() && pooled[end].0 == pooled[start].0 {
            end += 1;
        }
        // Ranks start+1 ..= end share their mean.
        let midrank = (start + 1 + end) as f64 / 2.0;
        rank_sum += midrank * pooled[start..end].iter().filter(|e| e.1).count() as f64;
        start = end;
    }
    Ok(rank_sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, Family, RngSpec, SyntheticSpec};

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::from_scalars(xs).unwrap()
    }

    fn normal(n: usize, mean: f64, seed: u64) -> PointCloud {
        generate(&SyntheticSpec::new(Family::Normal { mean: vec![mean], variance: 1.0 }, n), RngSpec::new(seed)).unwrap()
    }

    #[test]
    fn energy_hand_examples() {
        assert_eq!(energy_distance(&line(&[0.0]), &line(&[2.0])).unwrap(), 4.0);
        assert_eq!(energy_distance(&line(&[0.0, 1.0]), &line(&[0.0, 1.0])).unwrap(), 0.0);
        let p = normal(50, 0.0, 1);
        assert_eq!(energy_distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn energy_matches_naive_loop() {
        let p = normal(30, 0.0, 1);
        let q = normal(20, 0.7, 2);
        let mut xy = 0.0;
        let mut xx = 0.0;
        let mut yy = 0.0;
        for a in p.points() {
            for b in q.points() {
                xy += (a[0] - b[0]).abs();
            }
            for b in p.points() {
                xx += (a[0] - b[0]).abs();
            }
        }
        for a in q.points() {
            for b in q.points() {
                yy += (a[0] - b[0]).abs();
            }
        }
        let naive = 2.0 * xy / 600.0 - xx / 900.0 - yy / 400.0;
        assert!((energy_distance(&p, &q).unwrap() - naive).abs() < 1e-12);
    }

    #[test]
    fn mmd_cases() {
        let p = normal(40, 0.0, 1);
        assert_eq!(mmd(&p, &p, Bandwidth::MedianHeuristic).unwrap().value, 0.0);
        let far = mmd(&line(&[0.0]), &line(&[1e3]), Bandwidth::Fixed(1.0)).unwrap();
        assert!((far.value - 2.0).abs() < 1e-12);
        let same = mmd(&line(&[3.0, 3.0]), &line(&[3.0]), Bandwidth::MedianHeuristic).unwrap();
        assert!(same.floored);
        assert_eq!(same.value, 0.0);
        // Pooled distances of {0, 1, 3}: {1, 3, 2}; lower median 2.
        assert_eq!(median_heuristic(&line(&[0.0, 1.0]), &line(&[3.0])).unwrap(), 2.0);
    }

    #[test]
    fn hotelling_hand_example() {
        let t = hotelling_t2(&line(&[0.0, 0.0, 1.0, 1.0]), &line(&[2.0, 2.0, 3.0, 3.0])).unwrap();
        assert!((t.value - 24.0).abs() < 1e-12);
        assert!(t.ridge.is_none());
        assert_eq!(hotelling_t2(&line(&[0.0, 2.0]), &line(&[1.0, 1.0])).unwrap().value, 0.0);
        let p = normal(20, 0.0, 1);
        assert_eq!(hotelling_t2(&p, &p).unwrap().value, 0.0);
    }

    #[test]
    fn hotelling_singular_covariance_is_regularized() {
        // All points on the line y = x in R².
        let p = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], None).unwrap();
        let q = PointCloud::from_rows(&[[3.0, 3.0], [4.0, 4.0], [5.0, 5.0]], None).unwrap();
        let t = hotelling_t2(&p, &q).unwrap();
        assert!(t.ridge.is_some());
        assert!(t.value.is_finite() && t.value > 0.0);
    }

    #[test]
    fn hotelling_affine_invariance() {
        let spec = SyntheticSpec::new(Family::Normal { mean: vec![0.0, 0.0, 0.0], variance: 1.0 }, 40);
        let p = generate(&spec, RngSpec::new(1)).unwrap();
        let q = generate(&spec, RngSpec::new(2)).unwrap();
        let a = [[2.0, 0.5, 0.0], [0.1, 1.0, -0.3], [0.0, 0.4, 3.0]];
        let map = |x: &[f64]| (0..3).map(|r| (0..3).map(|c| a[r][c] * x[c]).sum::<f64>() + 5.0).collect::<Vec<_>>();
        let t0 = hotelling_t2(&p, &q).unwrap().value;
        let t1 = hotelling_t2(&p.map_points(map).unwrap(), &q.map_points(map).unwrap()).unwrap().value;
        assert!((t0 - t1).abs() < 1e-9 * t0.max(1.0));
    }

    #[test]
    fn ks_and_wilcoxon_hand_examples() {
        let p = line(&[1.0, 2.0]);
        let q = line(&[3.0, 4.0]);
        assert_eq!(ks_stat(&p, &q).unwrap(), 1.0);
        assert_eq!(ks_stat(&p, &p).unwrap(), 0.0);
        assert_eq!(wilcoxon_stat(&p, &q).unwrap(), 3.0);
        // Ties: pooled {1, 2, 2, 3}, P = {2, 3} → 2.5 + 4.
        assert_eq!(wilcoxon_stat(&line(&[2.0, 3.0]), &line(&[1.0, 2.0])).unwrap(), 6.5);
        let two_d = PointCloud::from_flat(2, vec![0.0, 1.0], None).unwrap();
        assert!(matches!(ks_stat(&two_d, &two_d), Err(Error::UnsupportedDimension { .. })));
        assert!(matches!(wilcoxon_stat(&two_d, &two_d), Err(Error::UnsupportedDimension { .. })));
    }

    #[test]
    fn ks_interleaved() {
        // F_P − F_Q after 1, 2, 3, 4 = 1/2, 0, 1/2, 0.
        assert_eq!(ks_stat(&line(&[1.0, 3.0]), &line(&[2.0, 4.0])).unwrap(), 0.5);
    }

    #[test]
    fn chi2_cases() {
        let p = normal(100, 0.0, 1);
        assert_eq!(chi2_stat(&p, &p, 10).unwrap(), 0.0);
        // Fully separated samples, 2 bins: every cell deviates by n/2.
        let s = chi2_stat(&line(&[1.0, 2.0]), &line(&[3.0, 4.0]), 2).unwrap();
        assert!((s - 4.0).abs() < 1e-12);
        assert!(chi2_stat(&p, &p, 1).is_err());
    }

    #[test]
    fn kl_identity_halves_and_duplicates() {
        let all = normal(4000, 0.0, 9);
        let a = all.subset(&(0..2000).collect::<Vec<_>>());
        let b = all.subset(&(2000..4000).collect::<Vec<_>>());
        let est = kl_knn(&a, &b, 10).unwrap();
        assert!(est.raw.abs() <= 0.1, "{est:?}");

        let dup = line(&[1.0, 1.0, 1.0, 2.0, 5.0]);
        let est = kl_knn(&dup, &line(&[0.0, 3.0, 4.0]), 1).unwrap();
        assert!(est.floored);
        assert!(est.raw.is_finite());
        assert!(kl_knn(&dup, &line(&[0.0]), 1).is_err());
    }

    #[test]
    fn translation_invariance() {
        let p = normal(60, 0.0, 3);
        let q = normal(50, 0.4, 4);
        let shift = |c: &PointCloud| c.map_points(|x| vec![x[0] + 2.5]).unwrap();
        let (ps, qs) = (shift(&p), shift(&q));
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        assert!(close(energy_distance(&p, &q).unwrap(), energy_distance(&ps, &qs).unwrap()));
        assert!(close(
            mmd(&p, &q, Bandwidth::MedianHeuristic).unwrap().value,
            mmd(&ps, &qs, Bandwidth::MedianHeuristic).unwrap().value
        ));
        assert!(close(hotelling_t2(&p, &q).unwrap().value, hotelling_t2(&ps, &qs).unwrap().value));
        assert_eq!(ks_stat(&p, &q).unwrap(), ks_stat(&ps, &qs).unwrap());
        assert_eq!(wilcoxon_stat(&p, &q).unwrap(), wilcoxon_stat(&ps, &qs).unwrap());
        assert!(close(kl_knn(&p, &q, 5).unwrap().raw, kl_knn(&ps, &qs, 5).unwrap().raw));
    }

    #[test]
    fn symmetric_statistics() {
        let p = normal(40, 0.0, 5);
        let q = normal(30, 1.0, 6);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        assert!(close(energy_distance(&p, &q).unwrap(), energy_distance(&q, &p).unwrap()));
        assert!(close(
            mmd(&p, &q, Bandwidth::MedianHeuristic).unwrap().value,
            mmd(&q, &p, Bandwidth::MedianHeuristic).unwrap().value
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(StatisticSpec::Kl { k: 0 }.validate().is_err());
        assert!(StatisticSpec::Chi2 { bins: 1 }.validate().is_err());
        assert!(StatisticSpec::Mmd { bandwidth: Bandwidth::Fixed(0.0) }.validate().is_err());
        let centred = StatisticSpec::Wilcoxon.evaluate(&line(&[1.0, 2.0]), &line(&[3.0, 4.0])).unwrap();
        // E₀W = 2·5/2 = 5; W = 3.
        assert_eq!(centred, 2.0);
    }
}
