use serde::Serialize;

use super::{riesz, MomentSequence, Poly, Support, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::lp::{LinearProgram, LpOutcome, Relation};

/// `H[i][j] = sum_k g_k m_{i+j+k}` (plain Hankel when `weight` is `None`).
pub fn hankel_from_moments(
    moments: &[f64],
    size: usize,
    weight: Option<&Poly>,
) -> Result<SymMatrix> {
    let mut h = SymMatrix::zeros(size);
    if size == 0 {
        return Ok(h);
    }
    let one = Poly::new(vec![1.0]);
    let g = weight.unwrap_or(&one);
    let needed = 2 * (size - 1) + g.degree();
    let available = moments.len().saturating_sub(1);
    if moments.is_empty() || needed > available {
        return Err(Error::DegreeTooHigh {
            degree: needed,
            max: available,
        });
    }
    for i in 0..size {
        for j in i..size {
            let v = g
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, gk)| gk * moments[i + j + k])
                .sum();
            h.set(i, j, v);
        }
    }
    Ok(h)
}

pub fn hankel(m: &MomentSequence, size: usize, weight: Option<&Poly>) -> Result<SymMatrix> {
    hankel_from_moments(m.moments(), size, weight)
}

/// `(λ_min >= -tol, λ_min)`; the empty matrix has `λ_min = +inf`.
pub fn psd(h: &SymMatrix, tol: f64) -> Result<(bool, f64)> {
    let (lambda, _) = h.min_eigen()?;
    Ok((lambda >= -tol, lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Representable,
    NotRepresentable,
    Inconclusive,
}

/// One matrix checked by a certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixWitness {
    pub name: String,
    /// Localizing weight in the original variable.
    pub weight: Poly,
    /// Entries in the original units.
    pub matrix: Vec<Vec<f64>>,
    /// Smallest eigenvalue of the normalized matrix.
    pub lambda_min: f64,
    /// `g q^2` with `q` from the offending eigenvector, when negative.
    pub witness: Option<Poly>,
    /// `L(g q^2) < 0` for the witness.
    pub witness_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub tol: f64,
    pub witnesses: Vec<MatrixWitness>,
    pub notes: Vec<String>,
}

impl Certificate {
    /// The matrix with the most negative eigenvalue, when one fails.
    pub fn failing(&self) -> Option<&MatrixWitness> {
        self.witnesses
            .iter()
            .filter(|w| w.lambda_min < -self.tol)
            .min_by(|a, b| {
                a.lambda_min
                    .partial_cmp(&b.lambda_min)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    }
}

pub fn positivity_certificate(m: &MomentSequence) -> Result<Certificate> {
    positivity_certificate_with_tol(m, DEFAULT_TOL)
}

/// Hankel positivity on the line, plus the shifted matrix (weight `x`) on
/// the half-line or the localizing matrix (weight `(b-x)(x-a)`) on an
/// interval. Eigenvalues within `tol` of zero give an inconclusive verdict.
pub fn positivity_certificate_with_tol(m: &MomentSequence, tol: f64) -> Result<Certificate> {
    let (normed, support, _, rho) = m.normalized();
    let d = m.half_degree();
    let mut checks: Vec<(String, Poly, Poly, usize)> = vec![(
        "hankel".to_string(),
        Poly::new(vec![1.0]),
        Poly::new(vec![1.0]),
        d + 1,
    )];
    let (Support::Interval { a: na, b: nb }, Support::Interval { a, b }) = (support, m.support())
    else {
        if m.support() == Support::Halfline && d >= 1 {
            checks.push(("shifted".into(), Poly::monomial(1), Poly::monomial(1), d));
        }
        return certify(m, &normed, checks, rho, tol);
    };
    if d >= 1 {
        // (b - x)(x - a) = -x^2 + (a + b) x - ab
        let original = Poly::new(vec![-a * b, a + b, -1.0]);
        let scaled = Poly::new(vec![-na * nb, na + nb, -1.0]);
        checks.push(("localizing".into(), original, scaled, d));
    }
    certify(m, &normed, checks, rho, tol)
}

fn certify(
    m: &MomentSequence,
    normed: &[f64],
    checks: Vec<(String, Poly, Poly, usize)>,
    rho: f64,
    tol: f64,
) -> Result<Certificate> {
    let mut witnesses = Vec::with_capacity(checks.len());
    let mut notes = Vec::new();
    for (name, original, scaled, size) in checks {
        let normalized = hankel_from_moments(normed, size, Some(&scaled))?;
        let matrix = hankel(m, size, Some(&original))?.rows();
        let (lambda_min, vector) = normalized.min_eigen()?;
        let (witness, witness_value) = if lambda_min < -tol {
            let q = Poly::new(
                vector
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v / rho.powi(i as i32))
                    .collect(),
            );
            let p = original.mul(&q.square());
            let value = riesz(m, &p)?;
            notes.push(format!(
                "{name} matrix has a negative eigenvalue {lambda_min:e}"
            ));
            (Some(p), Some(value))
        } else {
            (None, None)
        };
        witnesses.push(MatrixWitness {
            name,
            weight: original,
            matrix,
            lambda_min,
            witness,
            witness_value,
        });
    }
    let verdict = if witnesses.iter().any(|w| w.lambda_min < -tol) {
        Verdict::NotRepresentable
    } else if witnesses.iter().all(|w| w.lambda_min > tol) {
        Verdict::Representable
    } else {
        notes.push(format!(
            "smallest eigenvalue lies in the boundary band |λ| <= {tol:e}"
        ));
        Verdict::Inconclusive
    };
    Ok(Certificate {
        verdict,
        tol,
        witnesses,
        notes,
    })
}

/// `count` equally spaced points on `[lo, hi]` (endpoints included).
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Result of the grid LP `min L(p)` over `p ≥ 0` on the grid, `Σ|c_k| ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCheck {
    pub passed: bool,
    /// `L(witness)`
    pub min_value: f64,
    pub witness: Poly,
    pub iterations: usize,
}

/// Grid relaxation of positivity on `K`.
///
/// Passing means `L(p) >= -tol` for every normalized polynomial of degree
/// at most `N` that is nonnegative on the grid. Failing exhibits such a `p`
/// (nonnegative on the grid to round-off) with `L(p) < -tol`.
pub fn haviland_grid_check(m: &MomentSequence, grid: &[f64], tol: f64) -> Result<GridCheck> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("grid is empty".into()));
    }
    let support = m.support();
    if let Some(x) = grid
        .iter()
        .find(|&&x| !x.is_finite() || !support.contains(x, 1e-12))
    {
        return Err(Error::InvalidArgument(format!(
            "grid point {x} lies outside the support"
        )));
    }
    let n = m.degree() + 1;
    // variables: u_0..u_N, w_0..w_N >= 0 with c = u - w
    let mut objective: Vec<f64> = m.moments().to_vec();
    objective.extend(m.moments().iter().map(|v| -v));
    let mut lp = LinearProgram::new(2 * n).minimize(objective);
    for j in 0..2 * n {
        lp.set_nonnegative(j);
    }
    for &x in grid {
        let powers: Vec<f64> = (0..n).map(|k| x.powi(k as i32)).collect();
        let mut row = powers.clone();
        row.extend(powers.iter().map(|v| -v));
        lp.add_constraint(row, Relation::Ge, 0.0);
    }
    lp.add_constraint(vec![1.0; 2 * n], Relation::Le, 1.0);
    let sol = match lp.solve()? {
        LpOutcome::Optimal(sol) => sol,
        other => return Err(Error::LpFailure(format!("grid LP ended as {other:?}"))),
    };
    let mut coeffs: Vec<f64> = (0..n).map(|k| sol.x[k] - sol.x[n + k]).collect();
    // lift the witness onto the grid cone exactly
    let lowest = grid
        .iter()
        .map(|&x| Poly::new(coeffs.clone()).eval(x))
        .fold(f64::INFINITY, f64::min);
    if lowest < 0.0 {
        coeffs[0] -= lowest;
    }
    let witness = Poly::new(coeffs);
    let min_value = riesz(m, &witness)?;
    Ok(GridCheck {
        passed: min_value >= -tol,
        min_value,
        witness,
        iterations: sol.iterations,
    })
}
