//! Small dense linear algebra: Gaussian elimination, symmetric matrices and
//! a cyclic Jacobi eigensolver.

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest symmetric matrix the eigensolver accepts.
pub const MAX_EIG_DIM: usize = 64;

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-14;

/// Solves `mat * x = rhs` by Gaussian elimination with partial pivoting.
/// Returns `None` for (numerically) singular systems. Inputs are clobbered.
pub fn solve_dense(mat: &mut [Vec<f64>], rhs: &mut [f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let scale = mat
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return if n == 0 { Some(Vec::new()) } else { None };
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| {
            mat[a][col]
                .abs()
                .partial_cmp(&mat[b][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if mat[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        mat.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = mat[row][col] / mat[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                mat[row][k] -= f * mat[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| mat[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / mat[row][row];
    }
    Some(x)
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymMatrix {
    size: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0.0; size * size],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size);
        for i in 0..size {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from rows; the matrix must be square and symmetric to 1e-12
    /// relative.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        let mut m = Self::zeros(size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::DimensionMismatch {
                    expected: size,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite("matrix entry"));
                }
                m.data[i * size + j] = v;
            }
        }
        let scale = m.max_abs().max(1.0);
        for i in 0..size {
            for j in 0..i {
                if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.size + j] = v;
        self.data[j * self.size + i] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.size.max(1))
            .take(self.size)
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// `v^T M v`
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let n = self.size;
        (0..n)
            .map(|i| v[i] * (0..n).map(|j| self.get(i, j) * v[j]).sum::<f64>())
            .sum()
    }

    /// Eigen-decomposition by cyclic Jacobi rotations.
    pub fn eigen(&self) -> Result<Eigen> {
        jacobi_eigen(self)
    }

    /// Smallest eigenvalue and a unit eigenvector for it.
    pub fn min_eigen(&self) -> Result<(f64, Vec<f64>)> {
        let eig = self.eigen()?;
        if self.size == 0 {
            return Ok((f64::INFINITY, Vec::new()));
        }
        Ok((eig.values[0], eig.vectors[0].clone()))
    }
}

/// Eigenvalues in ascending order with matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

fn jacobi_eigen(m: &SymMatrix) -> Result<Eigen> {
    let n = m.size;
    if n > MAX_EIG_DIM {
        return Err(Error::InvalidArgument(format!(
            "eigensolver is limited to {MAX_EIG_DIM}x{MAX_EIG_DIM} matrices"
        )));
    }
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entry"));
    }
    let mut a: Vec<Vec<f64>> = m.rows();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let norm = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let threshold = OFF_DIAGONAL_TOL * norm.max(f64::MIN_POSITIVE);

    let off = |a: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i][j] * a[i][j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off(&a) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps >= MAX_SWEEPS {
            return Err(Error::EigFailure { sweeps });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        converged = off(&a) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[i][i]
            .partial_cmp(&a[j][j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    Ok(Eigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let mut m = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let mut b = vec![3.0, 5.0];
        let x = solve_dense(&mut m, &mut b).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14);
        assert!((x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn singular_system() {
        let mut m = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let mut b = vec![1.0, 2.0];
        assert!(solve_dense(&mut m, &mut b).is_none());
    }

    #[test]
    fn eigen_of_two_by_two() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let e = m.eigen().unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        let v = &e.vectors[0];
        assert!((v[0] + v[1]).abs() < 1e-14);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let rows = vec![
            vec![4.0, 1.0, -2.0, 0.5],
            vec![1.0, 3.0, 0.0, 1.0],
            vec![-2.0, 0.0, 5.0, -1.0],
            vec![0.5, 1.0, -1.0, 2.0],
        ];
        let m = SymMatrix::from_rows(&rows).unwrap();
        let e = m.eigen().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let r: f64 = (0..4)
                    .map(|k| e.values[k] * e.vectors[k][i] * e.vectors[k][j])
                    .sum();
                assert!((r - rows[i][j]).abs() < 1e-12, "({i},{j}) {r}");
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_asymmetric() {
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
    }
}
