use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{Bandwidth, StatisticSpec};
use crate::data::{LevelGrid, PointCloud};
use crate::error::{Error, Result};
use crate::lsdistance::{ls_distance_with, DistanceOptions, WeightScheme};

/// Default k for the KL estimator.
pub const DEFAULT_KL_K: usize = 10;
/// Default number of equal-probability χ² bins.
pub const DEFAULT_CHI2_BINS: usize = 10;
/// Default band count for level-set metrics.
pub const DEFAULT_BANDS: usize = 10;

/// Any two-sample statistic the test machinery can run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Baseline(StatisticSpec),
    LevelSet(DistanceOptions),
}

impl Metric {
    pub fn level_set(scheme: WeightScheme, grid: LevelGrid, k: Option<usize>) -> Self {
        let mut opts = DistanceOptions::new(grid, scheme);
        opts.k = k;
        Metric::LevelSet(opts)
    }

    pub fn evaluate(&self, p: &PointCloud, q: &PointCloud) -> Result<f64> {
        match self {
            Metric::Baseline(s) => s.evaluate(p, q),
            Metric::LevelSet(opts) => Ok(ls_distance_with(p, q, opts)?.total),
        }
    }

    /// Short identifier: `ls1`, `energy`, `kl`, ...
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Baseline(StatisticSpec::Kl { .. }) => "kl",
            Metric::Baseline(StatisticSpec::T) => "t",
            Metric::Baseline(StatisticSpec::Energy) => "energy",
            Metric::Baseline(StatisticSpec::Mmd { .. }) => "mmd",
            Metric::Baseline(StatisticSpec::Ks) => "ks",
            Metric::Baseline(StatisticSpec::Chi2 { .. }) => "chi2",
            Metric::Baseline(StatisticSpec::Wilcoxon) => "wilcoxon",
            Metric::LevelSet(o) => o.scheme.name(),
        }
    }

    /// Whether the statistic only accepts one-dimensional samples.
    pub fn one_dimensional_only(&self) -> bool {
        matches!(
            self,
            Metric::Baseline(StatisticSpec::Ks | StatisticSpec::Chi2 { .. } | StatisticSpec::Wilcoxon)
        )
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    /// Parses a metric name with default parameters.
    fn from_str(s: &str) -> Result<Self> {
        let baseline = |spec| Ok(Metric::Baseline(spec));
        match s.to_ascii_lowercase().as_str() {
            "kl" => baseline(StatisticSpec::Kl { k: DEFAULT_KL_K }),
            "t" => baseline(StatisticSpec::T),
            "energy" => baseline(StatisticSpec::Energy),
            "mmd" => baseline(StatisticSpec::Mmd {
                bandwidth: Bandwidth::MedianHeuristic,
            }),
            "ks" => baseline(StatisticSpec::Ks),
            "chi2" => baseline(StatisticSpec::Chi2 { bins: DEFAULT_CHI2_BINS }),
            "wilcoxon" => baseline(StatisticSpec::Wilcoxon),
            other => {
                let scheme: WeightScheme = other
                    .parse()
                    .map_err(|_| Error::param("metric", format!("unknown metric {s:?}")))?;
                Ok(Metric::level_set(scheme, LevelGrid::with_bands(DEFAULT_BANDS)?, None))
            }
        }
    }
}
