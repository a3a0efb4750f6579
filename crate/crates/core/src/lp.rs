//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Every feasibility question in the crate (cone membership, lattice hull,
//! domination, the sublinear bound, positivity of functionals, grid
//! certificates) is phrased as a small LP and solved here. Problems are
//! desk sized; the solver refuses anything beyond [`MAX_DIM`] variables or
//! constraints.

use crate::error::{Error, Result};

/// Feasibility and optimality tolerance (scaled units).
pub const FEAS_TOL: f64 = 1e-9;
/// Largest admissible number of variables or constraints.
pub const MAX_DIM: usize = 500;

const PIVOT_TOL: f64 = 1e-9;
/// Scale of the right-hand-side perturbation that breaks degenerate ties.
const PERTURBATION: f64 = 1e-11;
const MAX_ITERATIONS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Constraint {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
}

/// A linear program over `num_vars` real variables.
///
/// Variables are free unless marked nonnegative.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    maximize: bool,
    nonnegative: Vec<bool>,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible)
    }
}

impl LinearProgram {
    /// Feasibility problem (zero objective) over free variables.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            maximize: false,
            nonnegative: vec![false; num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn minimize(mut self, objective: Vec<f64>) -> Self {
        assert_eq!(objective.len(), self.num_vars);
        self.objective = objective;
        self.maximize = false;
        self
    }

    pub fn maximize(mut self, objective: Vec<f64>) -> Self {
        assert_eq!(objective.len(), self.num_vars);
        self.objective = objective;
        self.maximize = true;
        self
    }

    pub fn set_nonnegative(&mut self, var: usize) {
        self.nonnegative[var] = true;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.num_vars);
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        if self.num_vars > MAX_DIM || self.constraints.len() > MAX_DIM {
            return Err(Error::LpFailure(format!(
                "problem size {}x{} exceeds the {MAX_DIM} cap",
                self.constraints.len(),
                self.num_vars
            )));
        }
        let finite = self.objective.iter().all(|v| v.is_finite())
            && self
                .constraints
                .iter()
                .all(|c| c.rhs.is_finite() && c.coeffs.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::NonFinite("linear program data"));
        }
        StandardForm::build(self).solve(self)
    }
}

/// `min c.y  s.t.  A y = b, y >= 0, b >= 0` with rows equilibrated.
struct StandardForm {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    cost: Vec<f64>,
    // (plus column, optional minus column) for each original variable
    var_cols: Vec<(usize, Option<usize>)>,
    // column that can start basic in each row, if any (a +1 slack)
    natural_basis: Vec<Option<usize>>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let mut var_cols = Vec::with_capacity(lp.num_vars);
        let mut ncols = 0;
        for j in 0..lp.num_vars {
            if lp.nonnegative[j] {
                var_cols.push((ncols, None));
                ncols += 1;
            } else {
                var_cols.push((ncols, Some(ncols + 1)));
                ncols += 2;
            }
        }
        let num_slacks = lp
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        let total = ncols + num_slacks;
        let sign = if lp.maximize { -1.0 } else { 1.0 };

        let mut cost = vec![0.0; total];
        for (j, &(p, m)) in var_cols.iter().enumerate() {
            cost[p] = sign * lp.objective[j];
            if let Some(m) = m {
                cost[m] = -sign * lp.objective[j];
            }
        }

        let mut a = Vec::with_capacity(lp.constraints.len());
        let mut b = Vec::with_capacity(lp.constraints.len());
        let mut natural_basis = Vec::with_capacity(lp.constraints.len());
        let mut slack = ncols;
        for c in &lp.constraints {
            let scale = c.coeffs.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let mut row = vec![0.0; total];
            for (j, &(p, m)) in var_cols.iter().enumerate() {
                let v = c.coeffs[j] / scale;
                row[p] = v;
                if let Some(m) = m {
                    row[m] = -v;
                }
            }
            let mut rhs = c.rhs / scale;
            // a >= row becomes a <= row, so zero right-hand sides keep a slack basis
            if c.relation == Relation::Ge {
                row.iter_mut().for_each(|v| *v = -*v);
                rhs = -rhs;
            }
            let mut slack_col = None;
            if c.relation != Relation::Eq {
                row[slack] = 1.0;
                slack_col = Some(slack);
                slack += 1;
            }
            if rhs < 0.0 {
                rhs = -rhs;
                row.iter_mut().for_each(|v| *v = -*v);
            }
            let natural = slack_col.filter(|&s| row[s] > 0.0);
            a.push(row);
            b.push(rhs);
            natural_basis.push(natural);
        }
        Self {
            a,
            b,
            cost,
            var_cols,
            natural_basis,
        }
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome> {
        let m = self.a.len();
        let n = self.cost.len();
        let num_art = self.natural_basis.iter().filter(|s| s.is_none()).count();
        let width = n + num_art + 1;
        let rhs_col = width - 1;

        let mut tableau = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut art = n;
        for i in 0..m {
            let mut row = vec![0.0; width];
            row[..n].copy_from_slice(&self.a[i]);
            row[rhs_col] = self.b[i] + perturbation(i) * (1.0 + self.b[i]);
            match self.natural_basis[i] {
                Some(s) => basis.push(s),
                None => {
                    row[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
            }
            tableau.push(row);
        }
        let mut simplex = Tableau {
            rows: tableau,
            basis,
            kept_rows: (0..m).collect(),
            rhs_col,
            iterations: 0,
        };

        if num_art > 0 {
            let mut phase1 = vec![0.0; n + num_art];
            phase1[n..].iter_mut().for_each(|c| *c = 1.0);
            match simplex.optimize(&phase1, n + num_art)? {
                Phase::Optimal => {}
                Phase::Unbounded => {
                    return Err(Error::LpFailure("phase one reported unbounded".into()))
                }
            }
            let infeasibility: f64 = simplex
                .basis
                .iter()
                .zip(&simplex.rows)
                .filter(|(&col, _)| col >= n)
                .map(|(_, row)| row[rhs_col])
                .sum();
            let b_scale = self.b.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
            if infeasibility > FEAS_TOL * b_scale {
                return Ok(LpOutcome::Infeasible);
            }
            simplex.drive_out_artificials(n);
        }

        match simplex.optimize(&self.cost, n)? {
            Phase::Optimal => {}
            Phase::Unbounded => return Ok(LpOutcome::Unbounded),
        }

        let y = self.refine(&simplex, n);
        let x: Vec<f64> = self
            .var_cols
            .iter()
            .map(|&(p, m)| y[p] - m.map_or(0.0, |m| y[m]))
            .collect();
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpOutcome::Optimal(LpSolution {
            x,
            objective,
            iterations: simplex.iterations,
        }))
    }

    /// Recompute the basic solution from the unscaled-by-pivoting data, which
    /// removes the round-off accumulated across tableau updates.
    fn refine(&self, simplex: &Tableau, n: usize) -> Vec<f64> {
        let mut y = vec![0.0; n];
        for (row, &col) in simplex.rows.iter().zip(&simplex.basis) {
            if col < n {
                y[col] = row[simplex.rhs_col];
            }
        }
        let rows = &simplex.kept_rows;
        let cols = &simplex.basis;
        if cols.iter().any(|&c| c >= n) {
            return y;
        }
        let mut mat: Vec<Vec<f64>> = rows
            .iter()
            .map(|&i| cols.iter().map(|&c| self.a[i][c]).collect())
            .collect();
        let mut rhs: Vec<f64> = rows.iter().map(|&i| self.b[i]).collect();
        if let Some(sol) = crate::linalg::solve_dense(&mut mat, &mut rhs) {
            if sol.iter().all(|v| v.is_finite()) {
                let drift = cols
                    .iter()
                    .zip(&sol)
                    .map(|(&c, v)| (y[c] - v).abs())
                    .fold(0.0_f64, f64::max);
                if drift < 1e-6 {
                    for (&c, v) in cols.iter().zip(&sol) {
                        y[c] = v.max(0.0);
                    }
                }
            }
        }
        y
    }
}

// deterministic values in [1, 2) times PERTURBATION, distinct per row
fn perturbation(i: usize) -> f64 {
    let h = (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11;
    PERTURBATION * (1.0 + h as f64 / (1u64 << 53) as f64)
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    // original row index of each tableau row
    kept_rows: Vec<usize>,
    rhs_col: usize,
    iterations: usize,
}

impl Tableau {
    /// Minimizes `cost` over columns `< active` (other columns never enter).
    fn optimize(&mut self, cost: &[f64], active: usize) -> Result<Phase> {
        let width = self.rhs_col + 1;
        // reduced costs d_j = c_j - c_B B^-1 A_j, kept up to date by pivoting
        let mut reduced = vec![0.0; width];
        reduced[..cost.len()].copy_from_slice(cost);
        for (row, &bc) in self.rows.iter().zip(&self.basis) {
            let cb = cost.get(bc).copied().unwrap_or(0.0);
            if cb != 0.0 {
                reduced.iter_mut().zip(row).for_each(|(d, v)| *d -= cb * v);
            }
        }
        let mut is_basic = vec![false; width];
        for &b in &self.basis {
            is_basic[b] = true;
        }
        loop {
            if self.iterations >= MAX_ITERATIONS {
                return Err(Error::LpFailure(format!(
                    "iteration limit {MAX_ITERATIONS} reached"
                )));
            }
            let Some(entering) = (0..active).find(|&j| !is_basic[j] && reduced[j] < -FEAS_TOL)
            else {
                return Ok(Phase::Optimal);
            };

            let mut leaving: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let coef = row[entering];
                if coef <= PIVOT_TOL {
                    continue;
                }
                let ratio = row[self.rhs_col] / coef;
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((best, best_ratio)) => {
                        let tie = (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio.abs());
                        if ratio < best_ratio && !tie || tie && self.basis[i] < self.basis[best] {
                            Some((i, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            let Some((pivot_row, _)) = leaving else {
                return Ok(Phase::Unbounded);
            };
            is_basic[self.basis[pivot_row]] = false;
            is_basic[entering] = true;
            self.pivot(pivot_row, entering);
            let f = reduced[entering];
            reduced
                .iter_mut()
                .zip(&self.rows[pivot_row])
                .for_each(|(d, v)| *d -= f * v);
            reduced[entering] = 0.0;
            self.iterations += 1;
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Pivots basic artificials out after phase one; rows where that is
    /// impossible are redundant and dropped.
    fn drive_out_artificials(&mut self, n: usize) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] < n {
                i += 1;
                continue;
            }
            let col = (0..n)
                .filter(|j| !self.basis.contains(j))
                .max_by(|&a, &b| {
                    self.rows[i][a]
                        .abs()
                        .partial_cmp(&self.rows[i][b].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .filter(|&j| self.rows[i][j].abs() > PIVOT_TOL);
            match col {
                Some(j) => {
                    self.pivot(i, j);
                    i += 1;
                }
                None => {
                    self.rows.remove(i);
                    self.basis.remove(i);
                    self.kept_rows.remove(i);
                }
            }
        }
    }
}
