use serde::Serialize;

use super::{hankel_from_moments, MomentSequence, DEFAULT_TOL};
use crate::error::{Error, Result};

const GOLDEN_ITERS: usize = 200;
const SEARCH_TOL: f64 = 1e-9;
const MAX_EXPANSIONS: usize = 12;
/// Slack below `min(λ*, 0)` accepted when shrinking `t`.
const T_SLACK: f64 = 1e-10;

/// Candidate values for the next two moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionCandidate {
    /// `m_{N+1}`
    pub s: f64,
    /// `m_{N+2}`
    pub t: f64,
    /// Smallest eigenvalue of the extended normalized Hankel matrix.
    pub lambda_min: f64,
}

/// Search for `(m_{N+1}, m_{N+2})` making the extended Hankel matrix PSD.
///
/// `λ_min(H(s, t))` is concave in `(s, t)` and nondecreasing in `t`, so for
/// a bracket `[-S, S] x [0, T]` the inner maximum over `t` sits at `T`; the
/// outer maximum over `s` is found by golden section. The bracket grows
/// while the optimum stays below `-1e-8` and keeps improving. Once a
/// feasible `s` is found, `t` is shrunk by bisection to the smallest value
/// keeping `λ_min >= min(λ*, 0) - 1e-10`, which lands on the flat extension
/// when one exists.
pub fn extend_search(m: &MomentSequence) -> Result<Option<ExtensionCandidate>> {
    let (mut normed, _, c, rho) = m.normalized();
    let n = m.degree();
    let d = m.half_degree();
    let base = hankel_from_moments(&normed, d + 1, None)?;
    let (base_lambda, _) = base.min_eigen()?;
    if base_lambda < -DEFAULT_TOL {
        return Ok(None);
    }
    normed.push(0.0);
    normed.push(0.0);
    let mut eval = |s: f64, t: f64| -> Result<f64> {
        normed[n + 1] = s;
        normed[n + 2] = t;
        Ok(hankel_from_moments(&normed, d + 2, None)?.min_eigen()?.0)
    };

    let mut s_half = 2f64.powi(n as i32 + 1);
    let mut t_top = 2f64.powi(n as i32 + 2);
    let mut best: Option<(f64, f64)> = None;
    let mut expansions = 0;
    loop {
        let (s, lambda) = golden_max(-s_half, s_half, |s| eval(s, t_top))?;
        let improved = best.map_or(true, |(_, prev)| lambda > prev + 1e-12);
        best = Some((s, lambda));
        if lambda >= -DEFAULT_TOL {
            break;
        }
        if !improved {
            return Ok(None);
        }
        if expansions == MAX_EXPANSIONS {
            return Err(Error::BracketExhausted { expansions });
        }
        expansions += 1;
        s_half *= 2.0;
        t_top *= 4.0;
    }
    let (s, lambda_star) = best.expect("loop sets best");

    let target = lambda_star.min(0.0) - T_SLACK;
    let (mut lo, mut hi) = (0.0, t_top);
    if eval(s, lo)? >= target {
        hi = lo;
    } else {
        for _ in 0..GOLDEN_ITERS {
            let mid = 0.5 * (lo + hi);
            if eval(s, mid)? >= target {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= SEARCH_TOL * hi.abs().max(1.0) * 1e-3 {
                break;
            }
        }
    }
    let lambda_min = eval(s, hi)?;
    Ok(Some(ExtensionCandidate {
        s: s * c * rho.powi(n as i32 + 1),
        t: hi * c * rho.powi(n as i32 + 2),
        lambda_min,
    }))
}

/// Golden-section maximization of a concave function on `[lo, hi]`.
fn golden_max(
    mut lo: f64,
    mut hi: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..GOLDEN_ITERS {
        if hi - lo <= SEARCH_TOL * 1e-3 {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid)?;
    Ok([(x1, f1), (x2, f2), (mid, fm)]
        .into_iter()
        .fold((mid, fm), |acc, p| if p.1 > acc.1 { p } else { acc }))
}
