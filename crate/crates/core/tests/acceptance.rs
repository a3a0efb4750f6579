//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::Command;
use std::time::Instant;

use momentkit::extend::{hb_extend, sublinear_p, verify_positive, wc_contains};
use momentkit::funcspace::{FunctionVec, Subspace};
use momentkit::measure::{
    approx_below, build_measure, represent_via_adapted, seminorm_rho, BinningSpec,
    RepresentOptions, SigmaAlgebra,
};
use momentkit::moments::{
    extend_search, hankel_from_moments, haviland_grid_check, positivity_certificate, recover_atoms,
    riesz, uniform_grid, verify_truncated, AtomicMeasure, MomentSequence, Support, Verdict,
};
use momentkit::{Error, Functional, Rule};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("atomic roundtrip", c1_atomic_roundtrip),
        ("extension soundness", c2_extension_soundness),
        ("sublinearity of p", c3_sublinearity),
        ("finite measure construction", c4_measure_construction),
        ("binned approximation bound", c5_binned_bound),
        ("certificate correctness", c6_certificates),
        ("grid cross-check", c7_grid_cross_check),
        ("extension search", c8_extension_search),
        ("density enforcement", c9_density),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let status = if o.passed { "PASS" } else { "FAIL" };
        if !o.passed {
            failures += 1;
        }
        println!(
            "criterion {} [{status}] {name}: {} ({:.2}s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_atomic(
    rng: &mut ChaCha8Rng,
    count: usize,
    lo: f64,
    hi: f64,
    min_gap: f64,
) -> AtomicMeasure {
    loop {
        let mut xs: Vec<f64> = (0..count).map(|_| rng.gen_range(lo..hi)).collect();
        xs.sort_by(f64::total_cmp);
        if xs.windows(2).any(|w| w[1] - w[0] < min_gap.max(1e-12)) {
            continue;
        }
        let ws = (0..count).map(|_| rng.gen_range(0.1..2.0)).collect();
        return AtomicMeasure::new(xs, ws).expect("sorted distinct atoms with positive weights");
    }
}

fn fv(values: Vec<f64>) -> FunctionVec {
    FunctionVec::new(values).expect("finite")
}

fn c1_atomic_roundtrip() -> Outcome {
    let mut rng = rng(1);
    let (mut passed, mut ambiguous, mut wrong) = (0, 0, Vec::new());
    for case in 0..500 {
        let r = rng.gen_range(1..=6);
        let mu = random_atomic(&mut rng, r, -5.0, 5.0, 0.0);
        let m = MomentSequence::new(mu.moments(2 * r), Support::Line).unwrap();
        match recover_atoms(&m) {
            Ok(got) => {
                let report = verify_truncated(&m, &got, Some(2 * r - 1), 1e-7).unwrap();
                if report.passed {
                    passed += 1;
                } else {
                    wrong.push(format!("case {case}: residual {:e}", report.max_residual));
                }
            }
            Err(Error::RankDetectionAmbiguous { .. }) => ambiguous += 1,
            Err(e) => wrong.push(format!("case {case}: {e}")),
        }
    }
    outcome(
        passed >= 499 && wrong.is_empty(),
        format!(
            "{passed}/500 verified at 1e-7, {ambiguous} ambiguous, {} wrong {:?}",
            wrong.len(),
            wrong
        ),
    )
}

/// Random `(X, W, L)` with `L` integration against positive weights.
struct HbInstance {
    n: usize,
    l: Functional,
    basis: Vec<FunctionVec>,
}

fn hb_instance(rng: &mut ChaCha8Rng) -> HbInstance {
    loop {
        let n = rng.gen_range(2..=10);
        let dim = rng.gen_range(1..=5.min(n));
        let nu: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        // one strictly positive generator keeps W_C nontrivial
        let mut gens = vec![fv((0..n).map(|_| rng.gen_range(0.5..2.0)).collect())];
        for _ in 1..dim {
            gens.push(fv((0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()));
        }
        let Ok(w) = Subspace::new(n, gens.clone()) else {
            continue;
        };
        let values: Vec<f64> = gens
            .iter()
            .map(|g| g.values().iter().zip(&nu).map(|(a, b)| a * b).sum())
            .collect();
        let l = Functional::new(w, values).unwrap();
        return HbInstance { n, l, basis: gens };
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> FunctionVec {
    fv((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect())
}

fn c2_extension_soundness() -> Outcome {
    let mut rng = rng(2);
    let mut failures = Vec::new();
    let mut worst_restriction = 0.0_f64;
    for case in 0..200 {
        let inst = hb_instance(&mut rng);
        let count = rng.gen_range(1..=4);
        let mut targets = Vec::new();
        while targets.len() < count {
            let v = random_vec(&mut rng, inst.n);
            if wc_contains(&v, inst.l.domain()).unwrap() {
                targets.push(v);
            }
        }
        let rule = [Rule::Midpoint, Rule::Lo, Rule::Hi][case % 3];
        match hb_extend(&inst.l, &targets, rule) {
            Ok((ext, _)) => {
                let pos = verify_positive(&ext, 1e-8).unwrap();
                let restriction = inst
                    .basis
                    .iter()
                    .map(|g| (ext.eval(g).unwrap() - inst.l.eval(g).unwrap()).abs())
                    .fold(0.0, f64::max);
                worst_restriction = worst_restriction.max(restriction);
                if !pos.positive || restriction > 1e-12 {
                    failures.push(format!(
                        "case {case}: worst {:e}, restriction {restriction:e}",
                        pos.worst_value
                    ));
                }
            }
            Err(e) => failures.push(format!("case {case}: {e}")),
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "200 instances, {} failures, max restriction error {worst_restriction:e} {:?}",
            failures.len(),
            failures
        ),
    )
}

fn c3_sublinearity() -> Outcome {
    let mut rng = rng(2);
    let mut failures = Vec::new();
    let mut checks = 0;
    for case in 0..200 {
        let inst = hb_instance(&mut rng);
        let v = random_vec(&mut rng, inst.n);
        let v2 = random_vec(&mut rng, inst.n);
        let p = |x: &FunctionVec| sublinear_p(x, &inst.l).unwrap();
        let (pv, pv2) = (p(&v), p(&v2));
        if p(&(&v + &v2)) > pv + pv2 + 1e-8 {
            failures.push(format!("case {case}: subadditivity"));
        }
        for lambda in [0.0, 0.5, 2.0] {
            if (p(&(lambda * &v)) - lambda * pv).abs() > 1e-8 {
                failures.push(format!("case {case}: homogeneity at {lambda}"));
            }
        }
        for g in &inst.basis {
            if (p(g) + inst.l.eval(g).unwrap()).abs() > 1e-9 {
                failures.push(format!("case {case}: p != -L on W"));
            }
        }
        checks += 4 + inst.basis.len();
    }
    outcome(
        failures.is_empty(),
        format!(
            "{checks} checks on 200 instances, {} failures {:?}",
            failures.len(),
            failures
        ),
    )
}

fn random_partition(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut points: Vec<usize> = (0..n).collect();
    points.shuffle(rng);
    let mut blocks: Vec<Vec<usize>> = points[..k].iter().map(|&p| vec![p]).collect();
    for &p in &points[k..] {
        let b = rng.gen_range(0..k);
        blocks[b].push(p);
    }
    blocks
}

fn c4_measure_construction() -> Outcome {
    let mut rng = rng(4);
    let mut failures = Vec::new();
    let (mut worst_residual, mut worst_additivity) = (0.0_f64, 0.0_f64);
    for case in 0..100 {
        let n = rng.gen_range(1..=12);
        let k = rng.gen_range(1..=6.min(n));
        let alg = SigmaAlgebra::new(n, random_partition(&mut rng, n, k)).unwrap();
        let nu: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..2.0)).collect();
        let mut gens = vec![FunctionVec::constant(n, 1.0)];
        for _ in 0..rng.gen_range(0..=3) {
            let vals: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
            gens.push(fv((0..n).map(|p| vals[alg.block_of(p)]).collect()));
        }
        let a = Subspace::spanned_by(n, &gens).unwrap();
        let values: Vec<f64> = a
            .basis()
            .iter()
            .map(|g| (0..k).map(|blk| g[alg.blocks()[blk][0]] * nu[blk]).sum())
            .collect();
        let l = Functional::new(a.clone(), values).unwrap();
        let b = Subspace::spanned_by(n, &alg.indicators()).unwrap();
        let rep = match represent_via_adapted(&a, &b, &l, &alg, &RepresentOptions::default()) {
            Ok(rep) => rep,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let residual = rep.report.max_residual;
        worst_residual = worst_residual.max(residual);
        if residual > 1e-7 {
            failures.push(format!("case {case}: residual {residual:e}"));
        }
        let mu = build_measure(&rep.ltilde, &alg).unwrap();
        for mask in 1u32..(1 << k) {
            let union: Vec<usize> = (0..k).filter(|b| mask & (1 << b) != 0).collect();
            let direct = rep.ltilde.eval(&alg.union_indicator(&union)).unwrap();
            let gap = (mu.mass_of(&union) - direct).abs();
            worst_additivity = worst_additivity.max(gap);
            if gap > 1e-12 {
                failures.push(format!("case {case}: additivity gap {gap:e} on {union:?}"));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "100 spaces, max residual {worst_residual:e}, max additivity gap {worst_additivity:e}, {} failures {:?}",
            failures.len(),
            failures
        ),
    )
}

fn c5_binned_bound() -> Outcome {
    let mut rng = rng(5);
    let mut failures = 0;
    let mut first = None;
    for case in 0..10_000 {
        let n = rng.gen_range(1..=12);
        let center = rng.gen_range(-10.0..10.0);
        let spread = rng.gen_range(0.0..5.0);
        let f = fv((0..n)
            .map(|_| center + rng.gen_range(-spread..=spread))
            .collect());
        let a = f.min() - rng.gen_range(0.0..1.0);
        let b = f.max() + rng.gen_range(1e-9..1.0);
        let bins = rng.gen_range(1..=100);
        let spec = BinningSpec::new(a, b, bins).unwrap();
        let phi = approx_below(&f, &spec).unwrap().values();
        let h = (b - a) / bins as f64;
        let diff = &f - &phi;
        let pointwise = diff.values().iter().all(|&d| d >= 0.0 && d < h);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let domain =
            Subspace::new(n, (0..n).map(|i| FunctionVec::indicator(n, &[i])).collect()).unwrap();
        let lbar = Functional::new(domain, weights).unwrap();
        let rho = seminorm_rho(&lbar, &diff).unwrap();
        let bound = lbar.eval(&FunctionVec::constant(n, 1.0)).unwrap() * h;
        if !pointwise || rho > bound {
            failures += 1;
            first.get_or_insert(format!(
                "case {case}: pointwise {pointwise}, rho {rho:e} vs {bound:e}"
            ));
        }
    }
    outcome(
        failures == 0,
        format!(
            "10000 samples, {failures} violations {}",
            first.unwrap_or_default()
        ),
    )
}

fn support_case(rng: &mut ChaCha8Rng, class: usize) -> (AtomicMeasure, Support, usize) {
    let d = rng.gen_range(1..=3);
    let r = d + rng.gen_range(2..=3);
    match class {
        0 => (random_atomic(rng, r, -3.0, 3.0, 0.3), Support::Line, d),
        1 => (random_atomic(rng, r, 0.1, 4.0, 0.3), Support::Halfline, d),
        _ => {
            let a = rng.gen_range(-3.0..1.0);
            let b = a + rng.gen_range(2.0..4.0);
            (
                random_atomic(rng, r, a + 0.1, b - 0.1, 0.3),
                Support::Interval { a, b },
                d,
            )
        }
    }
}

fn c6_certificates() -> Outcome {
    let mut rng = rng(6);
    let (mut good, mut bad, mut band, mut misclassified) = (0, 0, 0, Vec::new());
    for class in 0..3 {
        for case in 0..200 {
            let (mu, support, d) = support_case(&mut rng, class);
            let m = MomentSequence::new(mu.moments(2 * d), support).unwrap();
            let cert = positivity_certificate(&m).unwrap();
            match cert.verdict {
                Verdict::Representable => good += 1,
                Verdict::Inconclusive => band += 1,
                Verdict::NotRepresentable => {
                    misclassified.push(format!("class {class} case {case}: valid rejected"))
                }
            }

            let mut raw = mu.moments(2 * d);
            let m0 = raw[0];
            let mean_defect = class > 0 && case % 2 == 1;
            if mean_defect {
                let floor = match support {
                    Support::Interval { a, .. } => a,
                    _ => 0.0,
                };
                raw[1] = (floor - rng.gen_range(0.2..1.0)) * m0;
            } else {
                raw[2] = raw[1] * raw[1] / m0 - rng.gen_range(0.05..0.5) * m0;
            }
            let p = MomentSequence::new(raw, support).unwrap();
            let cert = positivity_certificate(&p).unwrap();
            let witnessed = cert
                .failing()
                .and_then(|f| f.witness_value)
                .is_some_and(|v| v < 0.0);
            match (cert.verdict, witnessed) {
                (Verdict::NotRepresentable, true) => bad += 1,
                (Verdict::Inconclusive, _) => band += 1,
                _ => misclassified.push(format!(
                    "class {class} case {case}: defect missed ({:?})",
                    cert.verdict
                )),
            }
        }
    }
    outcome(
        good == 600 && bad == 600 && misclassified.is_empty(),
        format!(
            "{good}/600 valid representable, {bad}/600 perturbed rejected with witness, {band} in band, {} misclassified {:?}",
            misclassified.len(),
            misclassified
        ),
    )
}

fn c7_grid_cross_check() -> Outcome {
    let mut rng = rng(7);
    let grid = uniform_grid(-1.0, 1.0, 200);
    let tol = 1e-7;
    let (mut agree, mut failures) = (0, Vec::new());
    let mut witnesses = 0;
    let mut check_witness = |m: &MomentSequence, label: String, failures: &mut Vec<String>| {
        let r = haviland_grid_check(m, &grid, tol)
            .unwrap_or_else(|e| panic!("{label}: {:?} {e}", m.moments()));
        if !r.passed {
            witnesses += 1;
            let low = grid
                .iter()
                .map(|&x| r.witness.eval(x))
                .fold(f64::INFINITY, f64::min);
            let value = riesz(m, &r.witness).unwrap();
            if low < -1e-12 || value >= -tol {
                failures.push(format!("{label}: bad witness (min {low:e}, L {value:e})"));
            }
        }
        r.passed
    };
    for case in 0..200 {
        let d = rng.gen_range(1..=3);
        let r = d + rng.gen_range(2..=3);
        // atoms on interior grid nodes, at least 0.2 apart
        let mu = loop {
            let mut idx: Vec<usize> = (0..r).map(|_| rng.gen_range(5..195)).collect();
            idx.sort_unstable();
            if idx.windows(2).all(|w| w[1] - w[0] >= 20) {
                let ws = (0..r).map(|_| rng.gen_range(0.1..2.0)).collect();
                break AtomicMeasure::new(idx.iter().map(|&i| grid[i]).collect(), ws).unwrap();
            }
        };
        let support = Support::Interval { a: -1.0, b: 1.0 };
        let m = MomentSequence::new(mu.moments(2 * d), support).unwrap();
        let cert = positivity_certificate(&m).unwrap().verdict == Verdict::Representable;
        let passed = check_witness(&m, format!("valid {case}"), &mut failures);
        if cert && passed {
            agree += 1;
        } else {
            failures.push(format!("valid {case}: certificate {cert}, grid {passed}"));
        }

        let mut raw = mu.moments(2 * d);
        raw[2] = raw[1] * raw[1] / raw[0] - 0.1 * raw[0];
        let p = MomentSequence::new(raw, support).unwrap();
        if check_witness(&p, format!("perturbed {case}"), &mut failures) {
            failures.push(format!("perturbed {case}: grid check passed"));
        }
    }
    outcome(
        agree == 200 && failures.is_empty(),
        format!(
            "{agree}/200 representable agree, {witnesses} witnesses checked, {} failures {:?}",
            failures.len(),
            failures
        ),
    )
}

fn c8_extension_search() -> Outcome {
    let mut rng = rng(8);
    let (mut found, mut failures) = (0, Vec::new());
    for case in 0..100 {
        let r = rng.gen_range(1..=5);
        let mu = random_atomic(&mut rng, r, -3.0, 3.0, 0.2);
        let k = rng.gen_range(1..=r);
        let full = mu.moments(2 * k);
        let m = MomentSequence::new(full[..2 * k - 1].to_vec(), Support::Line).unwrap();
        match extend_search(&m) {
            Ok(Some(c)) if c.lambda_min >= -1e-8 => found += 1,
            other => failures.push(format!("case {case}: {other:?}")),
        }
    }
    let mut rejected = 0;
    for case in 0..20 {
        let r = rng.gen_range(2..=5);
        let mu = random_atomic(&mut rng, r, -3.0, 3.0, 0.2);
        let d = rng.gen_range(1..=r - 1);
        let mut raw = mu.moments(2 * d);
        raw[2] = raw[1] * raw[1] / raw[0] - rng.gen_range(0.05..0.5) * raw[0];
        let (lambda, _) = hankel_from_moments(&raw, d + 1, None)
            .unwrap()
            .min_eigen()
            .unwrap();
        assert!(lambda < -1e-8, "generator must produce a non-PSD base");
        let m = MomentSequence::new(raw, Support::Line).unwrap();
        match extend_search(&m) {
            Ok(None) => rejected += 1,
            other => failures.push(format!("negative case {case}: {other:?}")),
        }
    }
    outcome(
        found == 100 && rejected == 20,
        format!(
            "{found}/100 truncated sequences extended, {rejected}/20 non-PSD rejected {:?}",
            failures
        ),
    )
}

fn c9_density() -> Outcome {
    let alg = SigmaAlgebra::discrete(2);
    let ones = Subspace::constants(2);
    let l = Functional::counting(2);
    let distance =
        match represent_via_adapted(l.domain(), &ones, &l, &alg, &RepresentOptions::default()) {
            Err(Error::DensityFailed(f)) => Some(f.max_distance()),
            _ => None,
        };
    let lib_ok = distance.is_some_and(|d| (d - 1.0).abs() <= 1e-9);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("counterexample.json");
    std::fs::write(
        &path,
        r#"{"points": [0, 1],
            "basis": {"e0": [1, 0], "e1": [0, 1]},
            "functional": {"e0": 1, "e1": 1},
            "sigma_algebra": [[0], [1]],
            "b_basis": {"one": [1, 1]}}"#,
    )
    .unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_momentkit"))
        .arg("build-measure")
        .arg(&path)
        .output()
        .unwrap();
    let code = status.status.code();
    outcome(
        lib_ok && code == Some(1),
        format!("DensityFailed distance {distance:?}, build-measure exit {code:?}"),
    )
}
