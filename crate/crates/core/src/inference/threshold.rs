use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Metric;
use crate::data::{generate, Family, PointCloud, RngSpec, SyntheticSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftMode {
    /// Alternatives N(δ·1, I_d).
    MeanShift,
    /// Alternatives N(0, (1 + σ) I_d).
    Variance,
}

impl ShiftMode {
    pub fn name(self) -> &'static str {
        match self {
            ShiftMode::MeanShift => "mean-shift",
            ShiftMode::Variance => "variance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdProtocol {
    /// Null replicates used for the percentile.
    pub reference_reps: usize,
    /// Replicates per grid value used for power.
    pub power_reps: usize,
    pub percentile: f64,
    pub power_target: f64,
    /// Grid step; `None` means 0.05/√d for mean-shift and 0.05 for variance.
    pub step: Option<f64>,
    /// Largest grid value; `None` means δ√d ≤ 3 for mean-shift and σ ≤ 9 for variance.
    pub max_value: Option<f64>,
    /// Sample size is `sample_factor · d`.
    pub sample_factor: usize,
    /// Draw a fresh reference sample for every replicate.
    pub redraw_reference: bool,
}

impl ThresholdProtocol {
    pub fn desk() -> Self {
        Self {
            reference_reps: 200,
            power_reps: 200,
            percentile: 0.95,
            power_target: 0.90,
            step: None,
            max_value: None,
            sample_factor: 100,
            redraw_reference: false,
        }
    }

    pub fn full() -> Self {
        Self {
            reference_reps: 1000,
            power_reps: 1000,
            ..Self::desk()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reference_reps == 0 || self.power_reps == 0 {
            return Err(Error::param("reps", "replicate counts must be positive"));
        }
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return Err(Error::param("percentile", "must lie in (0, 1)"));
        }
        if !(self.power_target > 0.0 && self.power_target <= 1.0) {
            return Err(Error::param("power_target", "must lie in (0, 1]"));
        }
        if let Some(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::param("step", "must be positive"));
            }
        }
        if let Some(m) = self.max_value {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::param("max_value", "must be positive"));
            }
        }
        if self.sample_factor == 0 {
            return Err(Error::param("sample_factor", "must be positive"));
        }
        Ok(())
    }

    /// Ascending grid starting at 0.
    pub fn grid(&self, mode: ShiftMode, dim: usize) -> Vec<f64> {
        let root = (dim as f64).sqrt();
        let (step, max) = match mode {
            ShiftMode::MeanShift => (self.step.unwrap_or(0.05 / root), self.max_value.unwrap_or(3.0 / root)),
            ShiftMode::Variance => (self.step.unwrap_or(0.05), self.max_value.unwrap_or(9.0)),
        };
        let steps = (max / step + 1e-9).floor() as usize;
        (0..=steps).map(|j| j as f64 * step).collect()
    }
}

impl Default for ThresholdProtocol {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearchReport {
    pub metric: String,
    pub dim: usize,
    pub mode: ShiftMode,
    pub sample_size: usize,
    /// Grid values tried, in order, up to and including the first success.
    pub grid: Vec<f64>,
    pub power: Vec<f64>,
    pub h0_percentile: f64,
    /// Smallest grid value reaching the power target.
    pub raw_threshold: Option<f64>,
    /// δ*·√d for mean-shift, 1 + σ* for variance. `None` when the grid is exhausted.
    pub threshold_found: Option<f64>,
    pub exhausted: bool,
    pub protocol: ThresholdProtocol,
    pub seed: RngSpec,
}

impl ThresholdSearchReport {
    /// `value,power` rows for plotting.
    pub fn power_csv(&self) -> String {
        let mut out = String::from("value,power\n");
        for (v, p) in self.grid.iter().zip(&self.power) {
            out.push_str(&format!("{},{}\n", crate::numfmt::fmt_g17(*v), crate::numfmt::fmt_g17(*p)));
        }
        out
    }
}

fn alternative(mode: ShiftMode, dim: usize, value: f64) -> Family {
    match mode {
        ShiftMode::MeanShift => Family::Normal {
            mean: vec![value; dim],
            variance: 1.0,
        },
        ShiftMode::Variance => Family::Normal {
            mean: vec![0.0; dim],
            variance: 1.0 + value,
        },
    }
}

/// Nearest-rank percentile of `values`.
fn nearest_rank(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank - 1]
}

/// Smallest mean shift (or variance inflation) at which `metric` separates
/// alternatives from a N(0, I_d) reference with the requested power.
pub fn threshold_search(
    metric: &Metric,
    dim: usize,
    mode: ShiftMode,
    protocol: &ThresholdProtocol,
    rng: RngSpec,
) -> Result<ThresholdSearchReport> {
    protocol.validate()?;
    if dim == 0 {
        return Err(Error::param("dim", "must be at least 1"));
    }
    if dim > 1 && metric.one_dimensional_only() {
        return Err(Error::UnsupportedDimension {
            statistic: metric.name(),
            dim,
        });
    }
    let n = protocol.sample_factor * dim;
    let null = SyntheticSpec::new(Family::standard_normal(dim), n);
    let fixed_reference = generate(&null, rng.child(0))?;
    let reference_for = |stream: RngSpec| -> Result<PointCloud> {
        if protocol.redraw_reference {
            generate(&null, stream.child(u64::MAX))
        } else {
            Ok(fixed_reference.clone())
        }
    };

    let null_streams = rng.child(1);
    let null_distances = (0..protocol.reference_reps as u64)
        .into_par_iter()
        .map(|r| {
            let stream = null_streams.child(r);
            let reference = reference_for(stream)?;
            metric.evaluate(&reference, &generate(&null, stream)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let h0_percentile = nearest_rank(&null_distances, protocol.percentile);

    let alt_streams = rng.child(2);
    let mut grid = Vec::new();
    let mut power = Vec::new();
    let mut raw_threshold = None;
    for (j, value) in protocol.grid(mode, dim).into_iter().enumerate() {
        let spec = SyntheticSpec::new(alternative(mode, dim, value), n);
        let streams = alt_streams.child(j as u64);
        let distances = (0..protocol.power_reps as u64)
            .into_par_iter()
            .map(|r| {
                let stream = streams.child(r);
                let reference = reference_for(stream)?;
                metric.evaluate(&reference, &generate(&spec, stream)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        let hits = distances.iter().filter(|&&d| d > h0_percentile).count();
        let p = hits as f64 / distances.len() as f64;
        grid.push(value);
        power.push(p);
        if p >= protocol.power_target {
            raw_threshold = Some(value);
            break;
        }
    }

    let threshold_found = raw_threshold.map(|v| match mode {
        ShiftMode::MeanShift => v * (dim as f64).sqrt(),
        ShiftMode::Variance => 1.0 + v,
    });
    Ok(ThresholdSearchReport {
        metric: metric.name().to_string(),
        dim,
        mode,
        sample_size: n,
        grid,
        power,
        h0_percentile,
        raw_threshold,
        threshold_found,
        exhausted: raw_threshold.is_none(),
        protocol: protocol.clone(),
        seed: rng,
    })
}
