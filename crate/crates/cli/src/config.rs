//! Run configurations. A `--config` JSON file supplies a base record for the
//! chosen command; explicit flags override it. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use lsdist_core::lsdistance::WeightScheme;
use lsdist_core::shapes::DEFAULT_THRESHOLD;

use crate::CliError;

/// `auto` or a fixed neighbor count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KSetting {
    #[default]
    Auto,
    Fixed(usize),
}

impl KSetting {
    pub fn as_option(self) -> Option<usize> {
        match self {
            KSetting::Auto => None,
            KSetting::Fixed(k) => Some(k),
        }
    }
}

impl FromStr for KSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KSetting::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(KSetting::Fixed(k)),
            _ => Err(format!("expected `auto` or a positive integer, got {s:?}")),
        }
    }
}

impl fmt::Display for KSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KSetting::Auto => f.write_str("auto"),
            KSetting::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl Serialize for KSetting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            KSetting::Auto => s.serialize_str("auto"),
            KSetting::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for KSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(0) => Err(serde::de::Error::custom("k must be positive")),
            Raw::Int(k) => Ok(KSetting::Fixed(k)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Desk,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MeanShift,
    Variance,
    Homogeneity,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::MeanShift => "mean-shift",
            Experiment::Variance => "variance",
            Experiment::Homogeneity => "homogeneity",
        }
    }
}

fn default_bands() -> usize {
    10
}

fn default_scheme() -> WeightScheme {
    WeightScheme::Ls1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistConfig {
    pub p: Option<PathBuf>,
    pub q: Option<PathBuf>,
    pub bands: usize,
    pub k: KSetting,
    pub scheme: WeightScheme,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for DistConfig {
    fn default() -> Self {
        Self {
            p: None,
            q: None,
            bands: default_bands(),
            k: KSetting::Auto,
            scheme: default_scheme(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PermConfig {
    pub p: Option<PathBuf>,
    pub q: Option<PathBuf>,
    pub stat: String,
    pub n_perms: usize,
    pub seed: u64,
    pub bands: usize,
    pub k: KSetting,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for PermConfig {
    fn default() -> Self {
        Self {
            p: None,
            q: None,
            stat: "ls1".into(),
            n_perms: 1000,
            seed: 0,
            bands: default_bands(),
            k: KSetting::Auto,
            out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub experiment: Option<Experiment>,
    pub dims: Vec<usize>,
    pub scale: Scale,
    pub seed: u64,
    /// Metric names; `None` selects the experiment's table rows.
    pub metrics: Option<Vec<String>>,
    /// Overrides both replicate counts of the threshold searches.
    pub reps: Option<usize>,
    /// Homogeneity permutations per run.
    pub n_perms: Option<usize>,
    /// Homogeneity sample size per group.
    pub n: usize,
    /// Homogeneity runs; each uses its own seed stream.
    pub runs: usize,
    pub bands: usize,
    pub k: KSetting,
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            dims: vec![1],
            scale: Scale::Desk,
            seed: 0,
            metrics: None,
            reps: None,
            n_perms: None,
            n: 100,
            runs: 1,
            bands: default_bands(),
            k: KSetting::Auto,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroupConfig {
    pub clouds: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub n_perms: usize,
    pub seed: u64,
    pub bands: usize,
    pub k: KSetting,
    pub scheme: WeightScheme,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for GroupConfig {
    fn default() -> Self {
        Self {
            clouds: None,
            labels: None,
            n_perms: 10000,
            seed: 0,
            bands: default_bands(),
            k: KSetting::Auto,
            scheme: default_scheme(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapesConfig {
    pub images: Vec<PathBuf>,
    pub scheme: WeightScheme,
    pub mds: usize,
    pub threshold: f64,
    pub seed: u64,
    pub bands: usize,
    pub k: KSetting,
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

impl Default for ShapesConfig {
    fn default() -> Self {
        Self {
            images: Vec::new(),
            scheme: default_scheme(),
            mds: 2,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
            bands: default_bands(),
            k: KSetting::Auto,
            out_dir: None,
        }
    }
}

/// Base config from `--config`, or defaults.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: invalid config: {e}", path.display())))
}

pub fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    value
        .as_deref()
        .ok_or_else(|| CliError::validation(format!("missing required input {flag}")))
}
