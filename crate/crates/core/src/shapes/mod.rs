//! Image-to-point-cloud sampling and classical MDS.

mod mds;
mod pgm;

pub use self::mds::{classical_mds, jacobi_eigen, EmbeddingResult};
pub use self::pgm::{parse_pgm, read_pgm, write_pgm_ascii, GrayImage};

use rand::Rng;

use crate::data::{PointCloud, RngSpec};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.99;

/// Samples `width · height` uniform positions over the image rectangle and
/// keeps those whose pixel intensity exceeds `threshold`. The result is
/// centred at its centroid and scaled to unit RMS radius.
///
/// Coordinates are (x, y) with y pointing down the rows.
pub fn image_to_cloud(img: &GrayImage, threshold: f64, rng: RngSpec) -> Result<PointCloud> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::param("threshold", "must lie in (0, 1)"));
    }
    let (w, h) = (img.width(), img.height());
    let mut r = rng.rng();
    let mut kept = Vec::new();
    for _ in 0..w * h {
        let x: f64 = r.random_range(0.0..w as f64);
        let y: f64 = r.random_range(0.0..h as f64);
        let (px, py) = ((x as usize).min(w - 1), (y as usize).min(h - 1));
        if img.get(px, py) > threshold {
            kept.extend([x, y]);
        }
    }
    if kept.is_empty() {
        return Err(Error::BlankMask { threshold });
    }
    normalize(PointCloud::from_flat(2, kept, None)?)
}

/// Centres at the centroid and rescales to unit RMS distance from it.
/// A single-point cloud is only centred.
pub fn normalize(cloud: PointCloud) -> Result<PointCloud> {
    let mean = cloud.mean();
    let centred = cloud.map_points(|p| p.iter().zip(&mean).map(|(a, m)| a - m).collect())?;
    let ms = centred.as_flat().iter().map(|v| v * v).sum::<f64>() / centred.len() as f64;
    if ms == 0.0 {
        return Ok(centred);
    }
    let s = ms.sqrt();
    centred.map_points(|p| p.iter().map(|v| v / s).collect())
}
