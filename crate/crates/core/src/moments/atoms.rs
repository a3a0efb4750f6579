use serde::Serialize;

use super::{hankel_from_moments, AtomicMeasure, MomentSequence};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Cholesky pivots above this count toward the Hankel rank.
pub const PIVOT_RANK_TOL: f64 = 1e-10;
/// Pivots with magnitude in `[PIVOT_AMBIGUOUS_LOW, PIVOT_RANK_TOL]` cannot be classified.
pub const PIVOT_AMBIGUOUS_LOW: f64 = 1e-12;

/// Atomic measure matching `m` through degree `2r - 1`, `r` the numerical
/// rank of the Hankel matrix (capped at `d`).
///
/// Nodes and weights come from the Jacobi matrix of the orthogonal
/// polynomials, read off the Cholesky factor of the Hankel matrix.
pub fn recover_atoms(m: &MomentSequence) -> Result<AtomicMeasure> {
    let moments = m.moments();
    if moments.iter().all(|&v| v == 0.0) {
        return Ok(AtomicMeasure::empty());
    }
    if moments[0] <= 0.0 {
        return Err(Error::NotPsd {
            index: 0,
            pivot: moments[0],
        });
    }
    let (normed, _, c, rho) = m.normalized();
    let d = m.half_degree();
    let h = hankel_from_moments(&normed, d + 1, None)?;
    let (lambda, _) = h.min_eigen()?;
    if lambda < -PIVOT_RANK_TOL {
        return Err(Error::NotPsd {
            index: d + 1,
            pivot: lambda,
        });
    }
    let (r_factor, rank) = cholesky_rank(&h)?;
    let count = rank.min(d);
    if count == 0 {
        return Ok(AtomicMeasure::empty());
    }
    let mut jacobi = SymMatrix::zeros(count);
    for j in 0..count {
        let prev = if j == 0 {
            0.0
        } else {
            r_factor[j - 1][j] / r_factor[j - 1][j - 1]
        };
        jacobi.set(j, j, r_factor[j][j + 1] / r_factor[j][j] - prev);
        if j + 1 < count {
            jacobi.set(j, j + 1, r_factor[j + 1][j + 1] / r_factor[j][j]);
        }
    }
    let eig = jacobi.eigen()?;
    let mut pairs: Vec<(f64, f64)> = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .map(|(x, v)| (x * rho, c * v[0] * v[0]))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // merge numerically coincident nodes so the measure stays well formed
    let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
    let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
    for (x, w) in pairs {
        if w <= 0.0 {
            continue;
        }
        match atoms.last() {
            Some(&last) if x <= last => {
                let k = weights.len() - 1;
                weights[k] += w;
            }
            _ => {
                atoms.push(x);
                weights.push(w);
            }
        }
    }
    AtomicMeasure::new(atoms, weights)
}

/// Upper Cholesky factor rows and the numerical rank.
///
/// Rows past the rank are left zero. The factor has `size` columns so the
/// superdiagonal entry of the last counted row is available.
fn cholesky_rank(h: &SymMatrix) -> Result<(Vec<Vec<f64>>, usize)> {
    let n = h.size();
    let mut r = vec![vec![0.0; n]; n];
    for j in 0..n {
        let pivot = h.get(j, j) - (0..j).map(|k| r[k][j] * r[k][j]).sum::<f64>();
        if pivot > PIVOT_RANK_TOL {
            let diag = pivot.sqrt();
            r[j][j] = diag;
            for col in j + 1..n {
                let dot: f64 = (0..j).map(|k| r[k][j] * r[k][col]).sum();
                r[j][col] = (h.get(j, col) - dot) / diag;
            }
            continue;
        }
        if pivot < -PIVOT_RANK_TOL {
            return Err(Error::NotPsd { index: j, pivot });
        }
        if pivot.abs() >= PIVOT_AMBIGUOUS_LOW {
            return Err(Error::RankDetectionAmbiguous { index: j, pivot });
        }
        return Ok((r, j));
    }
    Ok((r, n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncatedReport {
    pub through_degree: usize,
    /// Relative residual per degree `0..=through_degree`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub tol: f64,
    pub passed: bool,
    /// Residual at degree `2d`, which need not vanish.
    pub top_degree_residual: f64,
}

/// Compare `m` with the moments of `mu`.
///
/// The residual at degree `k` is `|m_k - s_k| / max(|m_k|, Σ w |x|^k)`,
/// zero when both vanish. `through_degree` defaults to `2d - 1`.
pub fn verify_truncated(
    m: &MomentSequence,
    mu: &AtomicMeasure,
    through_degree: Option<usize>,
    tol: f64,
) -> Result<TruncatedReport> {
    let n = m.degree();
    let through = through_degree.unwrap_or((2 * m.half_degree()).saturating_sub(1));
    if through > n {
        return Err(Error::DegreeTooHigh {
            degree: through,
            max: n,
        });
    }
    let residual = |k: usize| {
        let target = m.moments()[k];
        let scale = target.abs().max(mu.absolute_moment(k));
        let diff = (target - mu.moment(k)).abs();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    };
    let residuals: Vec<f64> = (0..=through).map(residual).collect();
    let max_residual = residuals.iter().fold(0.0_f64, |a, &b| a.max(b));
    Ok(TruncatedReport {
        through_degree: through,
        residuals,
        max_residual,
        tol,
        passed: max_residual <= tol,
        top_degree_residual: residual(2 * m.half_degree()),
    })
}
