use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{PointCloud, RngSpec};
use crate::error::{Error, Result};

/// The distribution families used by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// N(mean, variance · I_d); d = mean.len().
    Normal { mean: Vec<f64>, variance: f64 },
    /// α·N(μ, σ) + (1 − α)·U(a, b), one-dimensional.
    NormalMixtureUniform {
        alpha: f64,
        mu: f64,
        sigma: f64,
        a: f64,
        b: f64,
    },
    /// Gamma(shape, scale), one-dimensional.
    Gamma { shape: f64, scale: f64 },
}

impl Family {
    pub fn standard_normal(dim: usize) -> Self {
        Family::Normal {
            mean: vec![0.0; dim],
            variance: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Family::Normal { mean, .. } => mean.len(),
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive and finite, got {v}")))
            }
        };
        match self {
            Family::Normal { mean, variance } => {
                if mean.is_empty() {
                    return Err(Error::param("mean", "mean vector must be non-empty"));
                }
                if mean.iter().any(|v| !v.is_finite()) {
                    return Err(Error::param("mean", "mean must be finite"));
                }
                pos("variance", *variance)
            }
            Family::NormalMixtureUniform { alpha, mu, sigma, a, b } => {
                if !(0.0..=1.0).contains(alpha) {
                    return Err(Error::param("alpha", format!("must lie in [0, 1], got {alpha}")));
                }
                if !mu.is_finite() {
                    return Err(Error::param("mu", "must be finite"));
                }
                pos("sigma", *sigma)?;
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::param("b", format!("need a < b, got a={a}, b={b}")));
                }
                Ok(())
            }
            Family::Gamma { shape, scale } => {
                pos("shape", *shape)?;
                pos("scale", *scale)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub family: Family,
    pub n: usize,
}

impl SyntheticSpec {
    pub fn new(family: Family, n: usize) -> Self {
        Self { family, n }
    }
}

/// Draws `spec.n` i.i.d. points; a pure function of `(spec, rng)`.
pub fn generate(spec: &SyntheticSpec, rng: RngSpec) -> Result<PointCloud> {
    spec.family.validate()?;
    let mut r = rng.rng();
    let dim = spec.family.dim();
    let mut data = Vec::with_capacity(spec.n * dim);
    match &spec.family {
        Family::Normal { mean, variance } => {
            let sd = variance.sqrt();
            for _ in 0..spec.n {
                for m in mean {
                    let z: f64 = r.sample(StandardNormal);
                    data.push(m + sd * z);
                }
            }
        }
        Family::NormalMixtureUniform { alpha, mu, sigma, a, b } => {
            for _ in 0..spec.n {
                let u: f64 = r.random();
                let x = if u < *alpha {
                    let z: f64 = r.sample(StandardNormal);
                    mu + sigma * z
                } else {
                    a + (b - a) * r.random::<f64>()
                };
                data.push(x);
            }
        }
        Family::Gamma { shape, scale } => {
            for _ in 0..spec.n {
                data.push(scale * standard_gamma(&mut r, *shape));
            }
        }
    }
    PointCloud::from_flat(dim, data, None)
}

/// Marsaglia–Tsang sampler; shapes below 1 use the `U^(1/shape)` boost.
fn standard_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        let u: f64 = open_unit(rng);
        return standard_gamma(rng, shape + 1.0) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = open_unit(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Uniform draw on (0, 1].
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}
