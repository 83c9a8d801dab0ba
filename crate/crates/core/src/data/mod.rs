//! Domain types shared by every module: point clouds, level grids, seeded
//! random streams, synthetic generators and the CSV interchange format.

mod csv;
mod rng;
mod synth;

pub use self::csv::{read_csv, read_csv_str, write_csv, write_csv_string};
pub use self::rng::RngSpec;
pub use self::synth::{generate, Family, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite sample of `n` points in R^d, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    dim: usize,
    label: Option<String>,
}

impl PointCloud {
    /// Builds a cloud from row-major coordinates.
    pub fn from_flat(dim: usize, data: Vec<f64>, label: Option<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "dimension must be at least 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::param(
                "data",
                format!("{} values do not form rows of length {dim}", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                point: pos / dim,
                axis: pos % dim,
            });
        }
        Ok(Self { data, dim, label })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], label: Option<String>) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or(Error::Empty("point cloud has no rows"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(dim, data, label)
    }

    /// Convenience constructor for one-dimensional samples.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(1, values.to_vec(), None)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Copies the selected rows into a new cloud.
    pub fn subset(&self, indices: &[usize]) -> PointCloud {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        PointCloud {
            data,
            dim: self.dim,
            label: self.label.clone(),
        }
    }

    /// Concatenates two clouds of the same dimension (`self` rows first).
    pub fn concat(&self, other: &PointCloud) -> Result<PointCloud> {
        check_same_dim(self, other)?;
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(PointCloud {
            data,
            dim: self.dim,
            label: None,
        })
    }

    /// Applies `x -> f(x)` to every point; `f` must preserve the dimension.
    pub fn map_points(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<PointCloud> {
        let mut data = Vec::with_capacity(self.data.len());
        for p in self.points() {
            let q = f(p);
            if q.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: q.len(),
                });
            }
            data.extend(q);
        }
        PointCloud::from_flat(self.dim, data, self.label.clone())
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.points() {
            for (acc, v) in m.iter_mut().zip(p) {
                *acc += v;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub(crate) fn require_nonempty(&self, what: &'static str) -> Result<()> {
        if self.is_empty() {
            Err(Error::Empty(what))
        } else {
            Ok(())
        }
    }
}

pub(crate) fn check_same_dim(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance. Every distance in the crate goes through this
/// function so that alternative backends produce bit-identical values.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

/// Strictly increasing ν values with ν₁ = 0 and ν_m = 1; induces m − 1 bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct LevelGrid {
    nu: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    m: usize,
    nu_values: Vec<f64>,
}

impl TryFrom<GridRepr> for LevelGrid {
    type Error = Error;

    fn try_from(r: GridRepr) -> Result<Self> {
        if r.m != r.nu_values.len() {
            return Err(Error::param("m", "m does not match the number of nu values"));
        }
        LevelGrid::new(r.nu_values)
    }
}

impl From<LevelGrid> for GridRepr {
    fn from(g: LevelGrid) -> Self {
        GridRepr {
            m: g.nu.len(),
            nu_values: g.nu,
        }
    }
}

impl LevelGrid {
    pub fn new(nu: Vec<f64>) -> Result<Self> {
        if nu.len() < 2 {
            return Err(Error::param("m", "a level grid needs at least 2 values"));
        }
        if nu[0] != 0.0 || nu[nu.len() - 1] != 1.0 {
            return Err(Error::param("nu_values", "grid must start at 0 and end at 1"));
        }
        if nu.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("nu_values", "grid must be strictly increasing"));
        }
        Ok(Self { nu })
    }

    /// Uniform grid ν_i = (i − 1)/(m − 1) with `m` values.
    pub fn uniform(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::param("m", "a level grid needs at least 2 values"));
        }
        let last = (m - 1) as f64;
        Self::new((0..m).map(|i| i as f64 / last).collect())
    }

    /// Uniform grid producing exactly `bands` bands.
    pub fn with_bands(bands: usize) -> Result<Self> {
        Self::uniform(bands + 1)
    }

    pub fn m(&self) -> usize {
        self.nu.len()
    }

    pub fn band_count(&self) -> usize {
        self.nu.len() - 1
    }

    pub fn nu_values(&self) -> &[f64] {
        &self.nu
    }
}

impl Default for LevelGrid {
    fn default() -> Self {
        Self::uniform(11).expect("static grid")
    }
}
