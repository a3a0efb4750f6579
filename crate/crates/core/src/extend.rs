//! Positive extension of linear functionals across the pointwise cone.
//!
//! Given `L` on `W` with `L >= 0` on `W ∩ C`, every `v` with `±v ∈ C + W`
//! admits an extension value in `[-p(v), p(-v)]`, where
//! `p(v) = -sup { L(w) : w ∈ W, v - w ∈ C }` is sublinear and equals `-L`
//! on `W`. Extending one target at a time and recomputing `p` on the grown
//! domain yields a functional that stays nonnegative on the cone.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcspace::{hull_contains, FunctionVec, Subspace, SPAN_TOL};
use crate::lp::{LinearProgram, LpOutcome, Relation, FEAS_TOL};

/// Width below which an admissible interval counts as a single point.
pub const INTERVAL_TOL: f64 = 1e-9;

/// A linear functional given by its values on a basis of its domain.
#[derive(Debug, Clone)]
pub struct Functional {
    domain: Subspace,
    coeffs: Vec<f64>,
}

impl Functional {
    pub fn new(domain: Subspace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                found: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("functional values"));
        }
        Ok(Self { domain, coeffs })
    }

    pub fn zero(domain: Subspace) -> Self {
        let coeffs = vec![0.0; domain.dim()];
        Self { domain, coeffs }
    }

    /// Functional prescribed on a possibly dependent generating family.
    ///
    /// An independent subset is kept as the basis; every dependent generator
    /// must be assigned the value implied by linearity (tolerance 1e-10,
    /// relative to the magnitude of the values involved).
    pub fn from_generators(n: usize, generators: &[FunctionVec], values: &[f64]) -> Result<Self> {
        if generators.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: generators.len(),
                found: values.len(),
            });
        }
        let mut domain = Subspace::zero(n);
        let mut coeffs = Vec::new();
        let mut deferred = Vec::new();
        for (index, (g, &value)) in generators.iter().zip(values).enumerate() {
            if domain.contains(g)? {
                deferred.push(index);
            } else {
                domain = domain.extended(g.clone())?;
                coeffs.push(value);
            }
        }
        let functional = Self::new(domain, coeffs)?;
        for index in deferred {
            let implied = functional.eval(&generators[index])?;
            let given = values[index];
            let scale = given.abs().max(implied.abs()).max(1.0);
            if (implied - given).abs() > 1e-10 * scale {
                return Err(Error::InconsistentFunctional {
                    index,
                    given,
                    implied,
                });
            }
        }
        Ok(functional)
    }

    /// `f -> sum_x f(x)`, defined on all of `R^n`.
    pub fn counting(n: usize) -> Self {
        let basis = (0..n).map(|i| FunctionVec::indicator(n, &[i])).collect();
        let domain = Subspace::new(n, basis).expect("indicators are independent");
        Self {
            domain,
            coeffs: vec![1.0; n],
        }
    }

    pub fn domain(&self) -> &Subspace {
        &self.domain
    }

    /// Values on the domain basis.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, v: &FunctionVec) -> Result<f64> {
        let (c, residual) = self.domain.coordinates(v)?;
        if residual > SPAN_TOL * v.norm().max(1.0) {
            return Err(Error::NotInDomain { residual });
        }
        Ok(c.iter().zip(&self.coeffs).map(|(a, b)| a * b).sum())
    }

    fn extended(&self, v: FunctionVec, value: f64) -> Result<Self> {
        let domain = self.domain.extended(v)?;
        let mut coeffs = self.coeffs.clone();
        coeffs.push(value);
        Ok(Self { domain, coeffs })
    }
}

/// Which point of the admissible interval an extension step picks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    #[default]
    Midpoint,
    Lo,
    Hi,
}

impl FromStr for Rule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(Rule::Midpoint),
            "lo" => Ok(Rule::Lo),
            "hi" => Ok(Rule::Hi),
            other => Err(Error::InvalidArgument(format!("unknown rule {other:?}"))),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Midpoint => "midpoint",
            Rule::Lo => "lo",
            Rule::Hi => "hi",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionStep {
    pub target: FunctionVec,
    pub interval_lo: f64,
    pub interval_hi: f64,
    pub chosen: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ExtensionTrace {
    pub steps: Vec<ExtensionStep>,
}

/// Minimum of `L` over the normalized cone slice of its domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivityCheck {
    pub positive: bool,
    pub worst_value: f64,
}

/// Is `v ∈ C + span(W)`, i.e. is some `w ∈ span(W)` below `v` pointwise?
pub fn in_cone_plus_subspace(v: &FunctionVec, w: &Subspace) -> Result<bool> {
    if v.len() != w.ground_size() {
        return Err(Error::DimensionMismatch {
            expected: w.ground_size(),
            found: v.len(),
        });
    }
    if w.dim() == 0 {
        return Ok(v.values().iter().all(|&x| x >= -FEAS_TOL));
    }
    let mut lp = LinearProgram::new(w.dim());
    add_below_constraints(&mut lp, w, v);
    Ok(lp.solve()?.is_feasible())
}

/// `v ∈ W_C`: both `v` and `-v` lie in `C + span(W)`.
pub fn wc_contains(v: &FunctionVec, w: &Subspace) -> Result<bool> {
    Ok(in_cone_plus_subspace(v, w)? && in_cone_plus_subspace(&-v, w)?)
}

// sum_j a_j w_j(x) <= v(x) for every point x
fn add_below_constraints(lp: &mut LinearProgram, w: &Subspace, v: &FunctionVec) {
    for x in 0..w.ground_size() {
        let row = w.basis().iter().map(|b| b[x]).collect();
        lp.add_constraint(row, Relation::Le, v[x]);
    }
}

/// The sublinear bound `p(v) = -sup { L(w) : w ∈ W, v - w ≥ 0 }`.
///
/// Fails with `LpInfeasible` when `v ∉ C + W` (the supremum is over an
/// empty set) and with `LpUnbounded` when `L` is not positive on `W ∩ C`.
pub fn sublinear_p(v: &FunctionVec, l: &Functional) -> Result<f64> {
    let w = l.domain();
    if v.len() != w.ground_size() {
        return Err(Error::DimensionMismatch {
            expected: w.ground_size(),
            found: v.len(),
        });
    }
    if w.dim() == 0 {
        return if v.values().iter().all(|&x| x >= -FEAS_TOL) {
            Ok(0.0)
        } else {
            Err(Error::LpInfeasible("v is not in C + W"))
        };
    }
    let mut lp = LinearProgram::new(w.dim()).maximize(l.coeffs().to_vec());
    add_below_constraints(&mut lp, w, v);
    match lp.solve()? {
        LpOutcome::Optimal(sol) => Ok(-sol.objective),
        LpOutcome::Infeasible => Err(Error::LpInfeasible("v is not in C + W")),
        LpOutcome::Unbounded => Err(Error::LpUnbounded),
    }
}

/// Admissible interval `[-p(v), p(-v)]` for the value of an extension at `v`.
pub fn admissible_interval(l: &Functional, v: &FunctionVec) -> Result<(f64, f64)> {
    let lo = -sublinear_p(v, l)?;
    let hi = sublinear_p(&-v, l)?;
    Ok((lo, hi))
}

/// One Hahn–Banach step: extend `L` to `span(domain ∪ {v})`.
pub fn hb_extend_step(
    l: &Functional,
    v: &FunctionVec,
    rule: Rule,
) -> Result<(Functional, ExtensionStep)> {
    if l.domain().contains(v)? {
        return Err(Error::TargetInDomain { index: 0 });
    }
    let (lo, hi) = match admissible_interval(l, v) {
        Err(Error::LpInfeasible(_)) => return Err(Error::TargetNotInWc { index: 0 }),
        other => other?,
    };
    if hi < lo - INTERVAL_TOL {
        return Err(Error::EmptyInterval { lo, hi });
    }
    let chosen = if hi - lo < INTERVAL_TOL {
        0.5 * (lo + hi)
    } else {
        match rule {
            Rule::Midpoint => 0.5 * (lo + hi),
            Rule::Lo => lo,
            Rule::Hi => hi,
        }
    };
    let extended = l.extended(v.clone(), chosen)?;
    Ok((
        extended,
        ExtensionStep {
            target: v.clone(),
            interval_lo: lo,
            interval_hi: hi,
            chosen,
        },
    ))
}

/// Iterated extension toward `targets`; targets already in the current
/// span are skipped and leave no trace entry.
pub fn hb_extend(
    l: &Functional,
    targets: &[FunctionVec],
    rule: Rule,
) -> Result<(Functional, ExtensionTrace)> {
    let mut current = l.clone();
    let mut trace = ExtensionTrace::default();
    for (index, t) in targets.iter().enumerate() {
        if current.domain().contains(t)? {
            continue;
        }
        let (next, step) = hb_extend_step(&current, t, rule).map_err(|e| match e {
            Error::TargetNotInWc { .. } => Error::TargetNotInWc { index },
            Error::TargetInDomain { .. } => Error::TargetInDomain { index },
            other => other,
        })?;
        log::debug!(
            "extension step {index}: interval [{}, {}], chose {}",
            step.interval_lo,
            step.interval_hi,
            step.chosen
        );
        current = next;
        trace.steps.push(step);
    }
    Ok((current, trace))
}

/// Extends `L` (defined on `A`) to lattice-hull members of `A`.
pub fn extend_to_hull(
    l: &Functional,
    a: &Subspace,
    hull_basis: &[FunctionVec],
    rule: Rule,
) -> Result<(Functional, ExtensionTrace)> {
    if !a.is_subspace_of(l.domain())? {
        return Err(Error::InvalidArgument(
            "functional is not defined on all of A".into(),
        ));
    }
    for (index, h) in hull_basis.iter().enumerate() {
        if !hull_contains(a, h)? {
            return Err(Error::HullMembershipFailed { index });
        }
    }
    hb_extend(l, hull_basis, rule)
}

/// Minimizes `L(v)` over `v` in the domain with `v ≥ 0` and `sum_x v(x) = 1`.
/// An empty slice counts as positive with worst value 0.
pub fn verify_positive(l: &Functional, tol: f64) -> Result<PositivityCheck> {
    let w = l.domain();
    if w.dim() == 0 {
        return Ok(PositivityCheck {
            positive: true,
            worst_value: 0.0,
        });
    }
    let mut lp = LinearProgram::new(w.dim()).minimize(l.coeffs().to_vec());
    for x in 0..w.ground_size() {
        let row = w.basis().iter().map(|b| b[x]).collect();
        lp.add_constraint(row, Relation::Ge, 0.0);
    }
    let totals = w.basis().iter().map(|b| b.values().iter().sum()).collect();
    lp.add_constraint(totals, Relation::Eq, 1.0);
    Ok(match lp.solve()? {
        LpOutcome::Optimal(sol) => PositivityCheck {
            positive: sol.objective >= -tol,
            worst_value: sol.objective,
        },
        LpOutcome::Infeasible => PositivityCheck {
            positive: true,
            worst_value: 0.0,
        },
        LpOutcome::Unbounded => PositivityCheck {
            positive: false,
            worst_value: f64::NEG_INFINITY,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(v: &[f64]) -> FunctionVec {
        FunctionVec::new(v.to_vec()).unwrap()
    }

    fn unit_on_constants(n: usize) -> Functional {
        Functional::new(Subspace::constants(n), vec![1.0]).unwrap()
    }

    #[test]
    fn cone_plus_subspace_examples() {
        assert!(in_cone_plus_subspace(&fv(&[1.0, 1.0]), &Subspace::zero(2)).unwrap());
        assert!(!in_cone_plus_subspace(&fv(&[-1.0, -1.0]), &Subspace::zero(2)).unwrap());
        assert!(in_cone_plus_subspace(&fv(&[-5.0, 3.0]), &Subspace::constants(2)).unwrap());
    }

    #[test]
    fn wc_examples() {
        let ones = Subspace::constants(4);
        assert!(wc_contains(&fv(&[3.0, -7.0, 1e3, 0.0]), &ones).unwrap());
        assert!(!wc_contains(&fv(&[1.0, 1.0]), &Subspace::zero(2)).unwrap());
        let w = Subspace::new(2, vec![fv(&[1.0, 0.0])]).unwrap();
        assert!(!wc_contains(&fv(&[0.0, 1.0]), &w).unwrap());
    }

    #[test]
    fn sublinear_examples() {
        let l = unit_on_constants(2);
        assert!((sublinear_p(&fv(&[2.0, 3.0]), &l).unwrap() + 2.0).abs() < 1e-12);
        assert!((sublinear_p(&fv(&[-1.0, -1.0]), &l).unwrap() - 1.0).abs() < 1e-12);
        // p = -L on W
        let v = fv(&[4.5, 4.5]);
        assert!((sublinear_p(&v, &l).unwrap() + 4.5).abs() < 1e-12);
    }

    #[test]
    fn sublinear_reports_violated_preconditions() {
        let w = Subspace::new(2, vec![fv(&[1.0, 0.0])]).unwrap();
        let l = Functional::new(w.clone(), vec![1.0]).unwrap();
        assert!(matches!(
            sublinear_p(&fv(&[0.0, -1.0]), &l),
            Err(Error::LpInfeasible(_))
        ));
        // L negative on W ∩ C makes the supremum unbounded
        let bad = Functional::new(w, vec![-1.0]).unwrap();
        assert!(matches!(
            sublinear_p(&fv(&[0.0, 1.0]), &bad),
            Err(Error::LpUnbounded)
        ));
    }

    #[test]
    fn step_example_midpoint() {
        let l = unit_on_constants(2);
        let (ext, step) = hb_extend_step(&l, &fv(&[0.0, 2.0]), Rule::Midpoint).unwrap();
        assert!((step.interval_lo - 0.0).abs() < 1e-12);
        assert!((step.interval_hi - 2.0).abs() < 1e-12);
        assert!((step.chosen - 1.0).abs() < 1e-12);
        assert!((ext.eval(&fv(&[0.0, 2.0])).unwrap() - 1.0).abs() < 1e-12);
        assert!((ext.eval(&fv(&[3.0, 3.0])).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn step_on_nonnegative_target_has_nonnegative_lower_end() {
        let l = unit_on_constants(3);
        let (_, step) = hb_extend_step(&l, &fv(&[0.0, 0.5, 2.0]), Rule::Lo).unwrap();
        assert!(step.interval_lo >= -1e-12);
        assert!(step.chosen >= -1e-12);
    }

    #[test]
    fn step_rejects_targets_in_span_or_outside_wc() {
        let l = unit_on_constants(2);
        assert!(matches!(
            hb_extend_step(&l, &fv(&[2.0, 2.0]), Rule::Midpoint),
            Err(Error::TargetInDomain { .. })
        ));
        let w = Subspace::new(2, vec![fv(&[1.0, 0.0])]).unwrap();
        let l = Functional::new(w, vec![1.0]).unwrap();
        assert!(matches!(
            hb_extend_step(&l, &fv(&[0.0, 1.0]), Rule::Midpoint),
            Err(Error::TargetNotInWc { .. })
        ));
    }

    #[test]
    fn extend_identity_when_targets_in_span() {
        let l = unit_on_constants(3);
        let (ext, trace) = hb_extend(&l, &[fv(&[2.0, 2.0, 2.0])], Rule::Midpoint).unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(ext.coeffs(), l.coeffs());
    }

    #[test]
    fn extend_to_full_space_is_positive() {
        let l = unit_on_constants(3);
        let targets = [
            fv(&[1.0, 0.0, 0.0]),
            fv(&[0.0, 1.0, 0.0]),
            fv(&[0.0, 0.0, 1.0]),
        ];
        for rule in [Rule::Midpoint, Rule::Lo, Rule::Hi] {
            let (ext, trace) = hb_extend(&l, &targets, rule).unwrap();
            assert_eq!(ext.domain().dim(), 3);
            assert_eq!(trace.steps.len(), 2);
            let check = verify_positive(&ext, 1e-8).unwrap();
            assert!(check.positive, "{rule}: {check:?}");
            assert!((ext.eval(&FunctionVec::constant(3, 1.0)).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_target_endpoints_both_admissible() {
        let l = unit_on_constants(3);
        let t = [fv(&[0.3, -1.0, 2.0])];
        for rule in [Rule::Lo, Rule::Hi] {
            let (ext, _) = hb_extend(&l, &t, rule).unwrap();
            assert!(verify_positive(&ext, 1e-8).unwrap().positive);
        }
    }

    #[test]
    fn target_index_reported() {
        let w = Subspace::new(3, vec![fv(&[1.0, 1.0, 0.0])]).unwrap();
        let l = Functional::new(w, vec![1.0]).unwrap();
        let err = hb_extend(
            &l,
            &[fv(&[1.0, 0.0, 0.0]), fv(&[0.0, 0.0, 1.0])],
            Rule::Midpoint,
        )
        .unwrap_err();
        assert!(matches!(err, Error::TargetNotInWc { index: 1 }), "{err:?}");
    }

    #[test]
    fn hull_extension_examples() {
        let a = Subspace::new(3, vec![fv(&[1.0, 1.0, 1.0]), fv(&[0.0, 1.0, 2.0])]).unwrap();
        let l = Functional::new(a.clone(), vec![1.0, 1.0]).unwrap();
        assert!(verify_positive(&l, 1e-12).unwrap().positive);
        let (ext, trace) =
            extend_to_hull(&l, &a, &[fv(&[0.0, 1.0, -2.0])], Rule::Midpoint).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert!(verify_positive(&ext, 1e-8).unwrap().positive);

        let (same, trace) =
            extend_to_hull(&l, &a, &[fv(&[2.0, 3.0, 4.0])], Rule::Midpoint).unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(same.domain().dim(), 2);

        let zero = Functional::zero(a.clone());
        let (ext, trace) =
            extend_to_hull(&zero, &a, &[fv(&[0.0, 1.0, -2.0])], Rule::Midpoint).unwrap();
        assert_eq!(trace.steps[0].chosen, 0.0);
        assert!(verify_positive(&ext, 1e-12).unwrap().positive);

        let narrow = Subspace::new(3, vec![fv(&[0.0, 1.0, 2.0])]).unwrap();
        let l = Functional::new(narrow.clone(), vec![1.0]).unwrap();
        assert!(matches!(
            extend_to_hull(&l, &narrow, &[fv(&[1.0, 0.0, 0.0])], Rule::Midpoint),
            Err(Error::HullMembershipFailed { index: 0 })
        ));
    }

    #[test]
    fn verify_positive_examples() {
        let one_point = unit_on_constants(1);
        let c = verify_positive(&one_point, 1e-12).unwrap();
        assert!(c.positive && (c.worst_value - 1.0).abs() < 1e-12);
        // on n points the normalized constant is 1/n
        let c = verify_positive(&unit_on_constants(4), 1e-12).unwrap();
        assert!((c.worst_value - 0.25).abs() < 1e-12);
        let neg = Functional::new(Subspace::constants(1), vec![-1.0]).unwrap();
        let c = verify_positive(&neg, 1e-12).unwrap();
        assert!(!c.positive && (c.worst_value + 1.0).abs() < 1e-12);
        let c = verify_positive(&Functional::zero(Subspace::zero(3)), 1e-12).unwrap();
        assert_eq!((c.positive, c.worst_value), (true, 0.0));
    }

    #[test]
    fn generators_consistency() {
        let gens = [fv(&[1.0, 0.0]), fv(&[0.0, 1.0]), fv(&[1.0, 1.0])];
        let l = Functional::from_generators(2, &gens, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(l.domain().dim(), 2);
        let err = Functional::from_generators(2, &gens, &[1.0, 2.0, 4.0]).unwrap_err();
        assert!(matches!(
            err,
            Error::InconsistentFunctional { index: 2, .. }
        ));
    }

    #[test]
    fn rule_parsing() {
        assert_eq!("lo".parse::<Rule>().unwrap(), Rule::Lo);
        assert!("middle".parse::<Rule>().is_err());
        assert_eq!(Rule::default().to_string(), "midpoint");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn p_is_sublinear(
            v in prop::collection::vec(-4.0f64..4.0, 5),
            u in prop::collection::vec(-4.0f64..4.0, 5),
            extra in prop::collection::vec(-1.0f64..1.0, 5),
            weights in prop::collection::vec(0.1f64..2.0, 5),
            lambda in 0.0f64..3.0,
        ) {
            let n = 5;
            let w = Subspace::spanned_by(n, &[FunctionVec::constant(n, 1.0), fv(&extra)]).unwrap();
            let mu = fv(&weights);
            let coeffs = w.basis().iter().map(|b| b.dot(&mu)).collect();
            let l = Functional::new(w, coeffs).unwrap();
            let (v, u) = (fv(&v), fv(&u));
            let pv = sublinear_p(&v, &l).unwrap();
            let pu = sublinear_p(&u, &l).unwrap();
            prop_assert!(sublinear_p(&(&v + &u), &l).unwrap() <= pv + pu + 1e-8);
            prop_assert!((sublinear_p(&v.scale(lambda), &l).unwrap() - lambda * pv).abs() <= 1e-8 * (1.0 + pv.abs()));
        }
    }
}
