use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MATRIX_TOL: f64 = 1e-9;
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResult {
    /// One row of `dim` coordinates per object.
    pub coordinates: Vec<Vec<f64>>,
    /// All eigenvalues of the centred Gram matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Σ|λ<0| / Σ|λ|.
    pub stress: f64,
}

/// Symmetric eigendecomposition of a row-major `n × n` matrix by cyclic
/// Jacobi rotations. Returns eigenvalues descending and eigenvectors as
/// columns of a row-major matrix in the same order.
pub fn jacobi_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    for _ in 0..MAX_SWEEPS {
        if off(&a) < JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[row * n + col] = v[row * n + src];
        }
    }
    (values, vectors)
}

/// Classical (Torgerson) MDS of a row-major `n × n` distance matrix into
/// `dim` coordinates.
pub fn classical_mds(distances: &[f64], n: usize, dim: usize) -> Result<EmbeddingResult> {
    if distances.len() != n * n {
        return Err(Error::InvalidMatrix(format!("{} entries for size {n}", distances.len())));
    }
    if dim == 0 || n < dim + 1 {
        return Err(Error::param("dim", format!("need 1 <= dim < n, got dim {dim} with n {n}")));
    }
    for i in 0..n {
        let d = distances[i * n + i];
        if d.abs() > MATRIX_TOL {
            return Err(Error::InvalidMatrix(format!("diagonal entry {i} is {d}")));
        }
        for j in i + 1..n {
            let (a, b) = (distances[i * n + j], distances[j * n + i]);
            if !a.is_finite() || a < 0.0 {
                return Err(Error::InvalidMatrix(format!("entry ({i}, {j}) is {a}")));
            }
            if (a - b).abs() > MATRIX_TOL {
                return Err(Error::InvalidMatrix(format!("not symmetric at ({i}, {j})")));
            }
        }
    }

    // B = -1/2 J D∘D J
    let sq: Vec<f64> = distances.iter().map(|d| d * d).collect();
    let row_mean: Vec<f64> = (0..n).map(|i| sq[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = -0.5 * (sq[i * n + j] - row_mean[i] - row_mean[j] + grand);
        }
    }
    // Symmetrise against rounding from the two triangles.
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (b[i * n + j] + b[j * n + i]);
            b[i * n + j] = m;
            b[j * n + i] = m;
        }
    }

    let (eigenvalues, vectors) = jacobi_eigen(&b, n);
    let coordinates = (0..n)
        .map(|row| {
            (0..dim)
                .map(|col| vectors[row * n + col] * eigenvalues[col].max(0.0).sqrt())
                .collect()
        })
        .collect();
    let total: f64 = eigenvalues.iter().map(|l| l.abs()).sum();
    let negative = eigenvalues.iter().filter(|&&l| l < 0.0).fold(0.0, |acc, l| acc - l);
    let stress = if total > 0.0 { negative / total } else { 0.0 };
    Ok(EmbeddingResult {
        coordinates,
        eigenvalues,
        stress,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::euclidean;
    use rand::{Rng, SeedableRng};

    fn distance_matrix(points: &[[f64; 2]]) -> Vec<f64> {
        let n = points.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = euclidean(&points[i], &points[j]);
            }
        }
        d
    }

    #[test]
    fn planar_points_are_recovered() {
        let pts = [[0.0, 0.0], [3.0, 0.0], [0.0, 4.0], [1.0, 1.0]];
        let d = distance_matrix(&pts);
        let e = classical_mds(&d, 4, 2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let r = euclidean(&e.coordinates[i], &e.coordinates[j]);
                assert!((r - d[i * 4 + j]).abs() < 1e-9);
            }
        }
        assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(e.stress < 1e-12);
    }

    #[test]
    fn zero_matrix_embeds_at_origin() {
        let e = classical_mds(&[0.0; 9], 3, 2).unwrap();
        assert!(e.coordinates.iter().flatten().all(|&c| c == 0.0));
    }

    #[test]
    fn validation() {
        assert!(classical_mds(&[0.0, 1.0, 2.0, 0.0], 2, 1).is_err());
        assert!(classical_mds(&[1.0, 1.0, 1.0, 0.0], 2, 1).is_err());
        assert!(classical_mds(&[0.0; 4], 2, 2).is_err());
    }

    #[test]
    fn non_euclidean_matrix_reports_stress() {
        // Violates the triangle inequality.
        let d = [0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0];
        let e = classical_mds(&d, 3, 2).unwrap();
        assert!(e.stress > 0.0);
        assert!(e.coordinates.iter().flatten().all(|c| c.is_finite()));
    }

    /// Real roots of the characteristic cubic of a symmetric 3×3 matrix.
    fn cubic_roots(a: &[f64; 9]) -> [f64; 3] {
        let p1 = a[1] * a[1] + a[2] * a[2] + a[5] * a[5];
        let q = (a[0] + a[4] + a[8]) / 3.0;
        let p2 = (a[0] - q).powi(2) + (a[4] - q).powi(2) + (a[8] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let b: Vec<f64> = (0..9)
            .map(|i| (a[i] - if i % 4 == 0 { q } else { 0.0 }) / p)
            .collect();
        let det = b[0] * (b[4] * b[8] - b[5] * b[7]) - b[1] * (b[3] * b[8] - b[5] * b[6]) + b[2] * (b[3] * b[7] - b[4] * b[6]);
        let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
        let l1 = q + 2.0 * p * phi.cos();
        let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [l1, 3.0 * q - l1 - l3, l3]
    }

    #[test]
    fn jacobi_matches_characteristic_roots() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut a = [0.0; 9];
            for i in 0..3 {
                for j in i..3 {
                    let x = rng.random_range(-5.0..5.0);
                    a[i * 3 + j] = x;
                    a[j * 3 + i] = x;
                }
            }
            let (values, vectors) = jacobi_eigen(&a, 3);
            let roots = cubic_roots(&a);
            for (v, r) in values.iter().zip(roots) {
                assert!((v - r).abs() < 1e-9, "{values:?} vs {roots:?}");
            }
            // A V = V Λ
            for col in 0..3 {
                for row in 0..3 {
                    let av: f64 = (0..3).map(|k| a[row * 3 + k] * vectors[k * 3 + col]).sum();
                    assert!((av - values[col] * vectors[row * 3 + col]).abs() < 1e-12 * 10.0);
                }
            }
        }
    }
}
