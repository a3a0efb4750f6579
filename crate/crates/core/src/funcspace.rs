//! Function spaces over a finite ground set.
//!
//! `R^X` for a finite `X` is modelled by plain vectors. Subspaces carry a
//! QR factorisation of their basis so that span membership and
//! coordinates are cheap and stable. The positivity cone, lattice hull and
//! domination relation reduce to LP feasibility.

use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Relation};

/// Rank tolerance for basis independence (relative to the vector norm).
pub const RANK_TOL: f64 = 1e-10;
/// Relative residual below which a vector counts as lying in a span.
pub const SPAN_TOL: f64 = 1e-9;

/// Default domination schedule: `1, 1e-1, ..., 1e-6`.
pub fn default_eps_schedule() -> Vec<f64> {
    (0..=6).map(|k| 10f64.powi(-k)).collect()
}

/// The finite set `X`, as ordered point labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundSet {
    labels: Vec<String>,
}

impl GroundSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidGroundSet("ground set is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidGroundSet(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// Points labelled `x0, x1, ...`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| format!("x{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// A real function on the ground set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FunctionVec(Vec<f64>);

impl FunctionVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("function values"));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    /// Indicator of the listed points.
    pub fn indicator(n: usize, points: &[usize]) -> Self {
        let mut v = vec![0.0; n];
        for &p in points {
            v[p] = 1.0;
        }
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn abs(&self) -> Self {
        Self(self.0.iter().map(|v| v.abs()).collect())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| c * v).collect())
    }

    /// Pointwise product.
    pub fn product(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&v| v >= 0.0)
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.len(),
            });
        }
        Ok(())
    }
}

impl Index<usize> for FunctionVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &FunctionVec {
    type Output = FunctionVec;
    fn add(self, rhs: &FunctionVec) -> FunctionVec {
        FunctionVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &FunctionVec {
    type Output = FunctionVec;
    fn sub(self, rhs: &FunctionVec) -> FunctionVec {
        FunctionVec(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &FunctionVec {
    type Output = FunctionVec;
    fn neg(self) -> FunctionVec {
        self.scale(-1.0)
    }
}

impl Mul<&FunctionVec> for f64 {
    type Output = FunctionVec;
    fn mul(self, rhs: &FunctionVec) -> FunctionVec {
        rhs.scale(self)
    }
}

impl From<FunctionVec> for Vec<f64> {
    fn from(f: FunctionVec) -> Self {
        f.0
    }
}

/// A subspace of `R^X` given by a linearly independent basis.
#[derive(Debug, Clone)]
pub struct Subspace {
    n: usize,
    basis: Vec<FunctionVec>,
    // orthonormal columns q and upper-triangular r with basis_j = sum_i q_i r[i][j]
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

impl Subspace {
    /// The zero subspace of `R^n`.
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            basis: Vec::new(),
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    /// Span of the constant function 1.
    pub fn constants(n: usize) -> Self {
        Self::new(n, vec![FunctionVec::constant(n, 1.0)]).expect("constant is independent")
    }

    /// Rejects dependent bases (tolerance [`RANK_TOL`]).
    pub fn new(n: usize, basis: Vec<FunctionVec>) -> Result<Self> {
        let mut s = Self::zero(n);
        for (index, b) in basis.into_iter().enumerate() {
            b.check_len(n)?;
            if !s.try_push(b) {
                return Err(Error::LinearlyDependent { index });
            }
        }
        Ok(s)
    }

    /// Keeps the first maximal independent subset of `generators`.
    pub fn spanned_by(n: usize, generators: &[FunctionVec]) -> Result<Self> {
        let mut s = Self::zero(n);
        for g in generators {
            g.check_len(n)?;
            s.try_push(g.clone());
        }
        Ok(s)
    }

    /// Appends `v` to the basis if it is independent; returns whether it was.
    fn try_push(&mut self, v: FunctionVec) -> bool {
        let norm = v.norm();
        if norm == 0.0 {
            return false;
        }
        let mut w = v.values().to_vec();
        let mut coeffs = vec![0.0; self.q.len() + 1];
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for (i, qi) in self.q.iter().enumerate() {
                let c: f64 = qi.iter().zip(&w).map(|(a, b)| a * b).sum();
                coeffs[i] += c;
                w.iter_mut().zip(qi).for_each(|(x, q)| *x -= c * q);
            }
        }
        let rem = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if rem <= RANK_TOL * norm {
            return false;
        }
        w.iter_mut().for_each(|x| *x /= rem);
        *coeffs.last_mut().unwrap() = rem;
        for (row, &c) in self.r.iter_mut().zip(&coeffs) {
            row.push(c);
        }
        let mut last = vec![0.0; coeffs.len()];
        *last.last_mut().unwrap() = rem;
        self.r.push(last);
        self.q.push(w);
        self.basis.push(v);
        true
    }

    /// Subspace spanned by this basis and `v`.
    pub fn extended(&self, v: FunctionVec) -> Result<Self> {
        v.check_len(self.n)?;
        let mut s = self.clone();
        if !s.try_push(v) {
            return Err(Error::LinearlyDependent {
                index: self.basis.len(),
            });
        }
        Ok(s)
    }

    pub fn ground_size(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[FunctionVec] {
        &self.basis
    }

    /// Coordinates of the orthogonal projection of `v` onto the span, and
    /// the norm of the residual.
    pub fn coordinates(&self, v: &FunctionVec) -> Result<(Vec<f64>, f64)> {
        v.check_len(self.n)?;
        let mut w = v.values().to_vec();
        let k = self.q.len();
        let mut y = vec![0.0; k];
        for _ in 0..2 {
            for (i, qi) in self.q.iter().enumerate() {
                let c: f64 = qi.iter().zip(&w).map(|(a, b)| a * b).sum();
                y[i] += c;
                w.iter_mut().zip(qi).for_each(|(x, q)| *x -= c * q);
            }
        }
        let residual = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut c = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| self.r[i][j] * c[j]).sum();
            c[i] = (y[i] - s) / self.r[i][i];
        }
        Ok((c, residual))
    }

    pub fn contains(&self, v: &FunctionVec) -> Result<bool> {
        let (_, residual) = self.coordinates(v)?;
        Ok(residual <= SPAN_TOL * v.norm().max(1.0))
    }

    /// `sum_j coeffs[j] * basis[j]`
    pub fn combine(&self, coeffs: &[f64]) -> FunctionVec {
        let mut out = vec![0.0; self.n];
        for (c, b) in coeffs.iter().zip(&self.basis) {
            out.iter_mut()
                .zip(b.values())
                .for_each(|(o, v)| *o += c * v);
        }
        FunctionVec(out)
    }

    pub fn contains_constants(&self) -> Result<bool> {
        self.contains(&FunctionVec::constant(self.n, 1.0))
    }

    pub fn is_subspace_of(&self, other: &Subspace) -> Result<bool> {
        for b in &self.basis {
            if !other.contains(b)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Rows `basis_j(x)` for each point `x`, i.e. the evaluation matrix.
    fn point_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|x| self.basis.iter().map(|b| b[x]).collect())
            .collect()
    }
}

/// The only cone in scope: pointwise nonnegative functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConeSpec {
    #[default]
    PointwiseNonneg,
}

impl ConeSpec {
    pub fn contains(&self, f: &FunctionVec, tol: f64) -> bool {
        match self {
            ConeSpec::PointwiseNonneg => cone_contains(f, tol),
        }
    }
}

/// `f(x) >= -tol` at every point.
pub fn cone_contains(f: &FunctionVec, tol: f64) -> bool {
    f.values().iter().all(|&v| v >= -tol)
}

/// Is there `g` in `span(basis)` with `g(x) >= lower(x)` everywhere?
fn exists_majorant(space: &Subspace, lower: &[f64]) -> Result<bool> {
    if space.dim() == 0 {
        return Ok(lower.iter().all(|&l| l <= crate::lp::FEAS_TOL));
    }
    let mut lp = LinearProgram::new(space.dim());
    for (row, &l) in space.point_rows().into_iter().zip(lower) {
        lp.add_constraint(row, Relation::Ge, l);
    }
    Ok(lp.solve()?.is_feasible())
}

/// Lattice hull membership: some `g` in `span(A)` satisfies `g >= |f|`.
///
/// This is the convex form of `|f| <= |g|`; the two agree whenever `A` is
/// an algebra containing the constants, because then `(g^2 + 1) / 2` lies
/// in `A` and dominates `|g|`.
pub fn hull_contains(a: &Subspace, f: &FunctionVec) -> Result<bool> {
    f.check_len(a.ground_size())?;
    exists_majorant(a, f.abs().values())
}

/// Domination `|g| <= eps |f| + h` for some `h` in `span(B)`.
pub fn dominates(g: &FunctionVec, f: &FunctionVec, b: &Subspace, eps: f64) -> Result<bool> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    g.check_len(b.ground_size())?;
    f.check_len(b.ground_size())?;
    let lower: Vec<f64> = g
        .values()
        .iter()
        .zip(f.values())
        .map(|(gv, fv)| gv.abs() - eps * fv.abs())
        .collect();
    exists_majorant(b, &lower)
}

/// Outcome of the adaptedness check for one basis element of `A`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptednessEntry {
    pub basis_index: usize,
    /// First candidate dominating the basis element at every scheduled eps.
    pub witness: Option<usize>,
    /// Per candidate, the smallest scheduled eps at which domination holds
    /// (`None` if it fails already at the largest one).
    pub thresholds: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptednessReport {
    pub schedule: Vec<f64>,
    pub entries: Vec<AdaptednessEntry>,
}

impl AdaptednessReport {
    pub fn adapted(&self) -> bool {
        self.entries.iter().all(|e| e.witness.is_some())
    }
}

/// Checks that every basis element of `A` is `B`-dominated by one of the
/// candidates across the whole (strictly decreasing, positive) schedule.
pub fn check_adapted(
    a: &Subspace,
    b: &Subspace,
    eps_schedule: &[f64],
    candidates: &[FunctionVec],
) -> Result<AdaptednessReport> {
    if eps_schedule.is_empty()
        || eps_schedule.iter().any(|&e| !(e > 0.0))
        || eps_schedule.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::InvalidArgument(
            "eps schedule must be nonempty, positive and strictly decreasing".into(),
        ));
    }
    if candidates.is_empty() && a.dim() > 0 {
        return Err(Error::InvalidArgument("no adaptedness candidates".into()));
    }
    let mut entries = Vec::with_capacity(a.dim());
    for (basis_index, g) in a.basis().iter().enumerate() {
        let mut witness = None;
        let mut thresholds = Vec::with_capacity(candidates.len());
        for (ci, f) in candidates.iter().enumerate() {
            let mut smallest = None;
            for &eps in eps_schedule {
                if dominates(g, f, b, eps)? {
                    smallest = Some(eps);
                } else {
                    break;
                }
            }
            if witness.is_none() && smallest == eps_schedule.last().copied() {
                witness = Some(ci);
            }
            thresholds.push(smallest);
        }
        entries.push(AdaptednessEntry {
            basis_index,
            witness,
            thresholds,
        });
    }
    Ok(AdaptednessReport {
        schedule: eps_schedule.to_vec(),
        entries,
    })
}

/// Basis vectors, their pointwise squares when those stay in the span, and
/// the constant 1 when it belongs to `A`.
pub fn default_candidates(a: &Subspace) -> Result<Vec<FunctionVec>> {
    let mut out: Vec<FunctionVec> = a.basis().to_vec();
    for b in a.basis() {
        let sq = b.product(b);
        if a.contains(&sq)? && !out.contains(&sq) {
            out.push(sq);
        }
    }
    let one = FunctionVec::constant(a.ground_size(), 1.0);
    if a.contains(&one)? && !out.contains(&one) {
        out.push(one);
    }
    Ok(out)
}
