//! Representing measures on finite measurable spaces.
//!
//! A finite σ-algebra is the collection of unions of the blocks of a
//! partition, so measures are block masses and the simple functions are
//! the block-constant functions. A positive functional defined on all
//! block indicators induces the measure `μ(Y) = L(χ_Y)`; the pipeline in
//! [`represent_via_adapted`] extends a functional there first and reports
//! the density and adaptedness hypotheses alongside the residuals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extend::{extend_to_hull, hb_extend, verify_positive, ExtensionTrace, Functional, Rule};
use crate::funcspace::{
    check_adapted, default_candidates, default_eps_schedule, AdaptednessReport, FunctionVec,
    Subspace,
};
use crate::lp::{LinearProgram, LpOutcome, Relation};

/// Masses below this are a sign the functional is not positive.
pub const NEGATIVE_MASS_TOL: f64 = 1e-8;
/// Largest block distance accepted as "dense".
pub const DENSITY_TOL: f64 = 1e-8;

/// A finite σ-algebra, stored as the partition generating it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SigmaAlgebra {
    #[serde(skip)]
    n: usize,
    blocks: Vec<Vec<usize>>,
    #[serde(skip)]
    block_of: Vec<usize>,
}

impl SigmaAlgebra {
    /// Validates that `blocks` is a partition of `0..n` into nonempty sets.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut block_of = vec![usize::MAX; n];
        for (i, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition(format!("block {i} is empty")));
            }
            for &p in block {
                if p >= n {
                    return Err(Error::InvalidPartition(format!(
                        "point {p} in block {i} is outside the ground set of size {n}"
                    )));
                }
                if block_of[p] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "point {p} appears in blocks {} and {i}",
                        block_of[p]
                    )));
                }
                block_of[p] = i;
            }
        }
        if let Some(p) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::InvalidPartition(format!("point {p} is not covered")));
        }
        Ok(Self {
            n,
            blocks,
            block_of,
        })
    }

    /// The power set: every point is its own block.
    pub fn discrete(n: usize) -> Self {
        Self::new(n, (0..n).map(|i| vec![i]).collect()).expect("singletons partition")
    }

    pub fn ground_size(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, point: usize) -> usize {
        self.block_of[point]
    }

    pub fn indicator(&self, block: usize) -> FunctionVec {
        FunctionVec::indicator(self.n, &self.blocks[block])
    }

    /// `χ_Y` for `Y` the union of the given blocks.
    pub fn union_indicator(&self, blocks: &[usize]) -> FunctionVec {
        let points: Vec<usize> = blocks
            .iter()
            .flat_map(|&b| self.blocks[b].iter().copied())
            .collect();
        FunctionVec::indicator(self.n, &points)
    }

    pub fn indicators(&self) -> Vec<FunctionVec> {
        (0..self.num_blocks()).map(|b| self.indicator(b)).collect()
    }

    /// Block values of a block-constant `f`.
    pub fn block_values(&self, f: &FunctionVec) -> Result<Vec<f64>> {
        if f.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: f.len(),
            });
        }
        let tol = 1e-12 * f.max_abs().max(1.0);
        self.blocks
            .iter()
            .map(|block| {
                let v = f[block[0]];
                if block.iter().all(|&p| (f[p] - v).abs() <= tol) {
                    Ok(v)
                } else {
                    Err(Error::IntegralOfNonMeasurable)
                }
            })
            .collect()
    }

    pub fn is_measurable(&self, f: &FunctionVec) -> bool {
        self.block_values(f).is_ok()
    }
}

/// A block-constant function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimpleFunction {
    pub block_values: Vec<f64>,
}

impl SimpleFunction {
    pub fn to_function(&self, alg: &SigmaAlgebra) -> FunctionVec {
        let values = (0..alg.ground_size())
            .map(|p| self.block_values[alg.block_of(p)])
            .collect();
        FunctionVec::new(values).expect("finite block values")
    }
}

/// A measure on a finite σ-algebra, as one mass per block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measure {
    pub block_mass: Vec<f64>,
}

impl Measure {
    pub fn total(&self) -> f64 {
        self.block_mass.iter().sum()
    }

    /// Mass of a union of blocks.
    pub fn mass_of(&self, blocks: &[usize]) -> f64 {
        blocks.iter().map(|&b| self.block_mass[b]).sum()
    }
}

/// Uniform bins `[a + (k-1)h, a + kh)`, `h = (b - a)/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinningSpec {
    a: f64,
    b: f64,
    n: usize,
}

impl BinningSpec {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::NonFinite("binning bounds"));
        }
        if !(a < b) || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "binning needs a < b and n >= 1 (a = {a}, b = {b}, n = {n})"
            )));
        }
        Ok(Self { a, b, n })
    }

    pub fn width(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn bins(&self) -> usize {
        self.n
    }

    /// Zero-based bin of `v`, with `a + k h <= v < a + (k+1) h`.
    fn bin_of(&self, v: f64) -> usize {
        let h = self.width();
        let last = self.n - 1;
        let mut k = (((v - self.a) / h).floor().max(0.0) as usize).min(last);
        while k > 0 && self.a + k as f64 * h > v {
            k -= 1;
        }
        while k < last && self.a + (k + 1) as f64 * h <= v {
            k += 1;
        }
        k
    }
}

/// Lower approximation of `f` by a simple function on the bins it meets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedApproximation {
    /// Partition into the nonempty preimages of the bins.
    pub partition: SigmaAlgebra,
    /// Zero-based bin index of each block.
    pub bins: Vec<usize>,
    pub phi: SimpleFunction,
}

impl BinnedApproximation {
    pub fn values(&self) -> FunctionVec {
        self.phi.to_function(&self.partition)
    }
}

/// `ρ_L(f) = L(|f|)`.
pub fn seminorm_rho(l: &Functional, f: &FunctionVec) -> Result<f64> {
    l.eval(&f.abs())
}

/// Approximates `f` from below by `φ = a + (k-1)(b-a)/n` on the `k`-th bin,
/// so that `0 <= f - φ < (b-a)/n` pointwise.
pub fn approx_below(f: &FunctionVec, spec: &BinningSpec) -> Result<BinnedApproximation> {
    if f.is_empty() {
        return Err(Error::InvalidArgument("empty function".into()));
    }
    if f.min() < spec.a || f.max() >= spec.b {
        return Err(Error::RangeViolation(format!(
            "values span [{}, {}] but the bins cover [{}, {})",
            f.min(),
            f.max(),
            spec.a,
            spec.b
        )));
    }
    let point_bins: Vec<usize> = f.values().iter().map(|&v| spec.bin_of(v)).collect();
    let mut used: Vec<usize> = point_bins.clone();
    used.sort_unstable();
    used.dedup();
    let blocks = used
        .iter()
        .map(|&k| (0..f.len()).filter(|&p| point_bins[p] == k).collect())
        .collect();
    let partition = SigmaAlgebra::new(f.len(), blocks)?;
    let h = spec.width();
    let block_values = used.iter().map(|&k| spec.a + k as f64 * h).collect();
    Ok(BinnedApproximation {
        partition,
        bins: used,
        phi: SimpleFunction { block_values },
    })
}

/// `μ(block) = L̄(χ_block)`; tiny negative values are clamped to zero.
pub fn build_measure(lbar: &Functional, alg: &SigmaAlgebra) -> Result<Measure> {
    let mut block_mass = Vec::with_capacity(alg.num_blocks());
    for block in 0..alg.num_blocks() {
        let value = lbar.eval(&alg.indicator(block))?;
        if value < -NEGATIVE_MASS_TOL {
            return Err(Error::NegativeMass { block, value });
        }
        block_mass.push(value.max(0.0));
    }
    Ok(Measure { block_mass })
}

/// `∫ f dμ` for a block-constant `f`.
pub fn integrate(f: &FunctionVec, mu: &Measure, alg: &SigmaAlgebra) -> Result<f64> {
    let values = alg.block_values(f)?;
    Ok(values.iter().zip(&mu.block_mass).map(|(v, m)| v * m).sum())
}

/// Per-block `inf_{b ∈ span(B)} ρ_L̄(χ_block - b)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub distances: Vec<f64>,
    pub dense: bool,
}

impl DensityReport {
    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }
}

/// Distance of each block indicator from `span(B)` in the seminorm of `L̄`.
///
/// `B` must consist of block-constant functions, so `|χ - b|` is simple and
/// its `L̄`-value is a weighted sum of the block values.
pub fn density_check(b: &Subspace, alg: &SigmaAlgebra, lbar: &Functional) -> Result<DensityReport> {
    let weights: Vec<f64> = (0..alg.num_blocks())
        .map(|blk| lbar.eval(&alg.indicator(blk)))
        .collect::<Result<_>>()?;
    let b_values: Vec<Vec<f64>> = b
        .basis()
        .iter()
        .map(|v| alg.block_values(v))
        .collect::<Result<_>>()?;
    let k = b.dim();
    let m = alg.num_blocks();
    let mut distances = Vec::with_capacity(m);
    for target in 0..m {
        // variables: beta (k, free), tau (m)
        let mut objective = vec![0.0; k];
        objective.extend_from_slice(&weights);
        let mut lp = LinearProgram::new(k + m).minimize(objective);
        for blk in 0..m {
            let chi = if blk == target { 1.0 } else { 0.0 };
            let mut upper = vec![0.0; k + m];
            let mut lower = vec![0.0; k + m];
            for j in 0..k {
                upper[j] = b_values[j][blk];
                lower[j] = -b_values[j][blk];
            }
            upper[k + blk] = 1.0;
            lower[k + blk] = 1.0;
            lp.add_constraint(upper, Relation::Ge, chi);
            lp.add_constraint(lower, Relation::Ge, -chi);
        }
        let d = match lp.solve()? {
            LpOutcome::Optimal(sol) => sol.objective.max(0.0),
            LpOutcome::Unbounded => return Err(Error::LpUnbounded),
            LpOutcome::Infeasible => {
                return Err(Error::LpFailure("density LP reported infeasible".into()))
            }
        };
        distances.push(d);
    }
    let dense = distances.iter().all(|&d| d <= DENSITY_TOL);
    Ok(DensityReport { distances, dense })
}

/// `T(f) = L̃(f) - ∫ f dμ`.
pub fn gap_t(
    ltilde: &Functional,
    mu: &Measure,
    alg: &SigmaAlgebra,
    f: &FunctionVec,
) -> Result<f64> {
    Ok(ltilde.eval(f)? - integrate(f, mu, alg)?)
}

#[derive(Debug, Clone)]
pub struct RepresentOptions {
    pub eps_schedule: Vec<f64>,
    /// Lattice-hull targets for the algebra path.
    pub hull_targets: Vec<FunctionVec>,
    /// Domination witnesses; defaults to [`default_candidates`] of `A`.
    pub witnesses: Option<Vec<FunctionVec>>,
    /// Treat `A ⊆ V` as plain subspaces (`L` is given on `V`); skips the
    /// hull extension step.
    pub subspace_variant: bool,
    pub rule: Rule,
}

impl Default for RepresentOptions {
    fn default() -> Self {
        Self {
            eps_schedule: default_eps_schedule(),
            hull_targets: Vec::new(),
            witnesses: None,
            subspace_variant: false,
            rule: Rule::Midpoint,
        }
    }
}

/// `T(|g|) <= eps T(|f|)` for an adaptedness pair across the schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapDecay {
    pub basis_index: usize,
    pub witness_index: usize,
    pub gap_g: f64,
    pub gap_f: f64,
    pub holds: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepresentationReport {
    pub density: DensityReport,
    pub adaptedness: AdaptednessReport,
    /// `|L̃(g) - ∫ g dμ|` over the checked basis functions.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub gap_decay: Vec<GapDecay>,
    pub subspace_variant: bool,
    pub hypotheses_hold: bool,
}

#[derive(Debug, Clone)]
pub struct Representation {
    pub measure: Measure,
    pub ltilde: Functional,
    pub trace: ExtensionTrace,
    pub report: RepresentationReport,
}

/// Payload of [`Error::DensityFailed`]: the measure is still produced, but
/// it is not certified.
#[derive(Debug, Clone)]
pub struct DensityFailure {
    pub measure: Measure,
    pub report: RepresentationReport,
}

impl DensityFailure {
    pub fn max_distance(&self) -> f64 {
        self.report.density.max_distance()
    }
}

/// Builds a representing measure for `L` (positive on `A`, or on `V ⊇ A` in
/// the subspace variant) and checks it against the hypotheses.
///
/// `B` must contain the constants and consist of block-constant functions.
/// A density failure is returned as [`Error::DensityFailed`] carrying the
/// uncertified measure and the full report.
pub fn represent_via_adapted(
    a: &Subspace,
    b: &Subspace,
    l: &Functional,
    alg: &SigmaAlgebra,
    opts: &RepresentOptions,
) -> Result<Representation> {
    let n = alg.ground_size();
    if a.ground_size() != n || b.ground_size() != n || l.domain().ground_size() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ground_size(),
        });
    }
    if !a.is_subspace_of(l.domain())? {
        return Err(Error::InvalidArgument(
            "functional is not defined on all of A".into(),
        ));
    }
    if !b.contains_constants()? {
        return Err(Error::ConstantsMissing);
    }
    let positivity = verify_positive(l, crate::lp::FEAS_TOL)?;
    if !positivity.positive {
        return Err(Error::InvalidArgument(format!(
            "functional is not positive on its cone slice (minimum {:e})",
            positivity.worst_value
        )));
    }

    let (hull_extended, mut trace) = if opts.subspace_variant {
        (l.clone(), ExtensionTrace::default())
    } else {
        extend_to_hull(l, a, &opts.hull_targets, opts.rule)?
    };
    let mut targets: Vec<FunctionVec> = b.basis().to_vec();
    targets.extend(alg.indicators());
    let (ltilde, rest) = hb_extend(&hull_extended, &targets, opts.rule)?;
    trace.steps.extend(rest.steps);

    let density = density_check(b, alg, &ltilde)?;
    let measure = build_measure(&ltilde, alg)?;

    let mut checked: Vec<&FunctionVec> = l.domain().basis().iter().collect();
    if !opts.subspace_variant {
        checked.extend(opts.hull_targets.iter());
    }
    checked.extend(b.basis().iter());
    let residuals: Vec<f64> = checked
        .iter()
        .map(|g| gap_t(&ltilde, &measure, alg, g).map(f64::abs))
        .collect::<Result<_>>()?;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);

    let candidates = match &opts.witnesses {
        Some(w) => w.clone(),
        None => default_candidates(a)?,
    };
    let adaptedness = check_adapted(a, b, &opts.eps_schedule, &candidates)?;
    let mut gap_decay = Vec::new();
    for entry in &adaptedness.entries {
        let Some(wi) = entry.witness else { continue };
        let g = a.basis()[entry.basis_index].abs();
        let f = candidates[wi].abs();
        let gap_g = gap_t(&ltilde, &measure, alg, &g)?;
        let gap_f = gap_t(&ltilde, &measure, alg, &f)?;
        let holds = opts
            .eps_schedule
            .iter()
            .map(|&eps| gap_g <= eps * gap_f + 1e-9)
            .collect();
        gap_decay.push(GapDecay {
            basis_index: entry.basis_index,
            witness_index: wi,
            gap_g,
            gap_f,
            holds,
        });
    }

    let hypotheses_hold = density.dense && adaptedness.adapted();
    let report = RepresentationReport {
        density,
        adaptedness,
        residuals,
        max_residual,
        gap_decay,
        subspace_variant: opts.subspace_variant,
        hypotheses_hold,
    };
    if !report.density.dense {
        return Err(Error::DensityFailed(Box::new(DensityFailure {
            measure,
            report,
        })));
    }
    Ok(Representation {
        measure,
        ltilde,
        trace,
        report,
    })
}
