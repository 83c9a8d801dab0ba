use std::fs;
use std::path::Path;

use super::PointCloud;
use crate::error::{Error, Result};
use crate::numfmt::fmt_g17;

/// Reads a point cloud: a header row followed by one numeric row per point.
/// The cloud is labelled with the file stem.
pub fn read_csv(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cloud = read_csv_str(&text, path)?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    Ok(match label {
        Some(l) => cloud.with_label(l),
        None => cloud,
    })
}

/// Parses CSV text; `origin` is used only in error messages.
pub fn read_csv_str(text: &str, origin: impl AsRef<Path>) -> Result<PointCloud> {
    let origin = origin.as_ref();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (_, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| Error::format(origin, None, "empty file"))?;
    let dim = header.split(',').count();
    let mut data = Vec::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = 0;
        for cell in line.split(',') {
            cols += 1;
            if cols > dim {
                break;
            }
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::format(origin, Some(line_no), format!("non-numeric cell {:?}", cell.trim()))
            })?;
            if !v.is_finite() {
                return Err(Error::format(origin, Some(line_no), format!("non-finite value {v}")));
            }
            data.push(v);
        }
        if cols != dim {
            return Err(Error::format(
                origin,
                Some(line_no),
                format!("row has {} columns, header has {dim}", line.split(',').count()),
            ));
        }
    }
    if data.is_empty() {
        return Err(Error::format(origin, None, "no data rows"));
    }
    PointCloud::from_flat(dim, data, None)
}

/// Renders a cloud as CSV with header `x1,...,xd` and 17 significant digits.
pub fn write_csv_string(cloud: &PointCloud) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=cloud.dim()).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for p in cloud.points() {
        let row: Vec<String> = p.iter().map(|&v| fmt_g17(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_csv_string(cloud)).map_err(|e| Error::io(path, e))
}
