//! Dense two-phase revised simplex for small linear programs.
//!
//! Programs are always maximizations. Duals follow the convention
//! `y_i >= 0` for `<=` rows, `y_i <= 0` for `>=` rows and free for
//! equalities, so that `c - A^T y` is the vector of reduced costs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;
const OPT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// `max c^T x` subject to row constraints and `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// `n` variables with bounds `[0, inf)` and zero objective.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn set_objective(&mut self, j: usize, c: f64) {
        self.objective[j] = c;
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn set_free(&mut self, j: usize) {
        self.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} objective coefficients but {} / {} bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("objective".into()));
        }
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::NonFinite(format!("bounds of variable {j}")));
            }
            if l > u {
                return Err(Error::DimensionMismatch(format!("variable {j} has lower {l} > upper {u}")));
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::NonFinite(format!("rhs of row {i}")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(Error::DimensionMismatch(format!("row {i} references variable {j} of {n}")));
                }
                if !a.is_finite() {
                    return Err(Error::NonFinite(format!("row {i}")));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// `A^T y` as a dense vector.
    pub fn transpose_product(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars()];
        for (row, &yi) in self.constraints.iter().zip(y) {
            if yi != 0.0 {
                for &(j, a) in &row.coeffs {
                    out[j] += a * yi;
                }
            }
        }
        out
    }

    pub fn rhs_norm(&self) -> f64 {
        self.constraints.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Optimality residuals of a primal/dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpResiduals {
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub complementary_slackness: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl LpResiduals {
    pub fn duality_gap(&self) -> f64 {
        self.dual_objective - self.primal_objective
    }

    /// Checks the optimality tolerances of [`LpSolution`].
    pub fn is_optimal(&self, lp: &LinearProgram) -> bool {
        self.primal_infeasibility <= FEAS_TOL * (1.0 + lp.rhs_norm())
            && self.dual_infeasibility <= 1e-7 * (1.0 + self.primal_objective.abs())
            && self.complementary_slackness <= 1e-7 * (1.0 + self.primal_objective.abs())
            && self.duality_gap().abs() <= 1e-7 * (1.0 + self.primal_objective.abs())
    }
}

/// Largest violation of a row's relation at `x` (nonnegative).
fn row_violation(row: &Constraint, x: &[f64]) -> f64 {
    let a = row.activity(x);
    match row.relation {
        Relation::Le => (a - row.rhs).max(0.0),
        Relation::Ge => (row.rhs - a).max(0.0),
        Relation::Eq => (a - row.rhs).abs(),
    }
}

/// Dual sign violation for a row multiplier.
pub fn dual_sign_violation(relation: Relation, y: f64) -> f64 {
    match relation {
        Relation::Le => (-y).max(0.0),
        Relation::Ge => y.max(0.0),
        Relation::Eq => 0.0,
    }
}

/// Dual objective and dual infeasibility of `y`. The dual infeasibility is
/// the largest reduced cost pointing toward an infinite bound, or the
/// largest multiplier sign violation.
pub fn dual_bound(lp: &LinearProgram, y: &[f64]) -> (f64, f64) {
    let aty = lp.transpose_product(y);
    let mut obj: f64 = lp.constraints.iter().zip(y).map(|(r, yi)| r.rhs * yi).sum();
    let mut infeas: f64 = lp
        .constraints
        .iter()
        .zip(y)
        .map(|(r, &yi)| dual_sign_violation(r.relation, yi))
        .fold(0.0, f64::max);
    for j in 0..lp.num_vars() {
        let d = lp.objective[j] - aty[j];
        if d > 0.0 {
            if lp.upper[j].is_finite() {
                obj += d * lp.upper[j];
            } else {
                infeas = infeas.max(d);
            }
        } else if d < 0.0 {
            if lp.lower[j].is_finite() {
                obj += d * lp.lower[j];
            } else {
                infeas = infeas.max(-d);
            }
        }
    }
    (obj, infeas)
}

pub fn residuals(lp: &LinearProgram, x: &[f64], y: &[f64]) -> LpResiduals {
    let mut primal: f64 = lp.constraints.iter().map(|r| row_violation(r, x)).fold(0.0, f64::max);
    for j in 0..lp.num_vars() {
        primal = primal.max(lp.lower[j] - x[j]).max(x[j] - lp.upper[j]);
    }
    let (dual_objective, dual_infeasibility) = dual_bound(lp, y);
    let aty = lp.transpose_product(y);
    let mut cs: f64 = lp
        .constraints
        .iter()
        .zip(y)
        .map(|(r, yi)| (yi * (r.rhs - r.activity(x))).abs())
        .fold(0.0, f64::max);
    for j in 0..lp.num_vars() {
        let d = lp.objective[j] - aty[j];
        let slack = if d < 0.0 {
            x[j] - lp.lower[j]
        } else if d > 0.0 {
            lp.upper[j] - x[j]
        } else {
            0.0
        };
        if slack.is_finite() {
            cs = cs.max((d * slack).abs());
        }
    }
    LpResiduals {
        primal_infeasibility: primal,
        dual_infeasibility,
        complementary_slackness: cs,
        primal_objective: lp.objective_value(x),
        dual_objective,
    }
}

/// How an original variable maps onto nonnegative standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lower + z`
    Shift { col: usize, lower: f64 },
    /// `x = upper - z`
    Flip { col: usize, upper: f64 },
    /// `x = z+ - z-`
    Split { pos: usize, neg: usize },
}

struct Standard {
    /// Column-major dense matrix, `m` rows per column.
    cols: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    /// Sign applied to each original row to make its rhs nonnegative.
    row_sign: Vec<f64>,
    artificial_start: usize,
    basis: Vec<usize>,
    vars: Vec<VarMap>,
    m: usize,
}

fn standardize(lp: &LinearProgram) -> Standard {
    let n = lp.num_vars();
    let mut vars = Vec::with_capacity(n);
    let mut n_struct = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l.is_finite() {
            vars.push(VarMap::Shift { col: n_struct, lower: l });
            if u.is_finite() {
                bound_rows.push((n_struct, u - l));
            }
            n_struct += 1;
        } else if u.is_finite() {
            vars.push(VarMap::Flip { col: n_struct, upper: u });
            n_struct += 1;
        } else {
            vars.push(VarMap::Split { pos: n_struct, neg: n_struct + 1 });
            n_struct += 2;
        }
    }

    let m = lp.num_rows() + bound_rows.len();
    let mut rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = Vec::with_capacity(m);
    for r in &lp.constraints {
        let mut coeffs = Vec::with_capacity(r.coeffs.len() + 1);
        let mut rhs = r.rhs;
        for &(j, a) in &r.coeffs {
            match vars[j] {
                VarMap::Shift { col, lower } => {
                    rhs -= a * lower;
                    coeffs.push((col, a));
                }
                VarMap::Flip { col, upper } => {
                    rhs -= a * upper;
                    coeffs.push((col, -a));
                }
                VarMap::Split { pos, neg } => {
                    coeffs.push((pos, a));
                    coeffs.push((neg, -a));
                }
            }
        }
        rows.push((coeffs, r.relation, rhs));
    }
    for &(col, ub) in &bound_rows {
        rows.push((vec![(col, 1.0)], Relation::Le, ub));
    }

    let mut row_sign = vec![1.0; m];
    for (i, row) in rows.iter_mut().enumerate() {
        if row.2 < 0.0 {
            row_sign[i] = -1.0;
            row.2 = -row.2;
            for c in &mut row.0 {
                c.1 = -c.1;
            }
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let total = n_struct + n_slack + n_art;
    let mut cols = vec![vec![0.0; m]; total];
    let mut cost = vec![0.0; total];
    for j in 0..n {
        match vars[j] {
            VarMap::Shift { col, .. } => cost[col] = lp.objective[j],
            VarMap::Flip { col, .. } => cost[col] = -lp.objective[j],
            VarMap::Split { pos, neg } => {
                cost[pos] = lp.objective[j];
                cost[neg] = -lp.objective[j];
            }
        }
    }
    let mut basis = vec![usize::MAX; m];
    let mut next_slack = n_struct;
    let artificial_start = n_struct + n_slack;
    let mut next_art = artificial_start;
    let mut rhs = vec![0.0; m];
    for (i, (coeffs, rel, b)) in rows.into_iter().enumerate() {
        for (col, a) in coeffs {
            cols[col][i] += a;
        }
        rhs[i] = b;
        match rel {
            Relation::Le => {
                cols[next_slack][i] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                cols[next_slack][i] = -1.0;
                next_slack += 1;
                cols[next_art][i] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                cols[next_art][i] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }
    Standard {
        cols,
        rhs,
        cost,
        row_sign,
        artificial_start,
        basis,
        vars,
        m,
    }
}

struct Tableau<'a> {
    sf: &'a Standard,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    iterations: usize,
    since_refactor: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl<'a> Tableau<'a> {
    fn new(sf: &'a Standard) -> Self {
        let m = sf.m;
        let mut binv = vec![vec![0.0; m]; m];
        for (i, row) in binv.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let mut in_basis = vec![false; sf.cols.len()];
        for &b in &sf.basis {
            in_basis[b] = true;
        }
        Self {
            sf,
            binv,
            xb: sf.rhs.clone(),
            basis: sf.basis.clone(),
            in_basis,
            iterations: 0,
            since_refactor: 0,
        }
    }

    fn ftran(&self, col: &[f64]) -> Vec<f64> {
        self.binv
            .iter()
            .map(|row| row.iter().zip(col).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn prices(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.sf.m;
        let mut y = vec![0.0; m];
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (yi, bi) in y.iter_mut().zip(&self.binv[r]) {
                    *yi += cb * bi;
                }
            }
        }
        y
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.sf.m;
        // Gauss-Jordan on [B | I]
        let mut a: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut row = vec![0.0; 2 * m];
                for (r, &b) in self.basis.iter().enumerate() {
                    row[r] = self.sf.cols[b][i];
                }
                row[m + i] = 1.0;
                row
            })
            .collect();
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
                .expect("nonempty");
            if a[piv][col].abs() < 1e-13 {
                return Err(Error::Numerical("singular basis during refactorization".into()));
            }
            a.swap(col, piv);
            let inv = 1.0 / a[col][col];
            for v in &mut a[col] {
                *v *= inv;
            }
            let pivot_row = a[col].clone();
            for (i, row) in a.iter_mut().enumerate() {
                if i != col {
                    let f = row[col];
                    if f != 0.0 {
                        for (v, p) in row.iter_mut().zip(&pivot_row) {
                            *v -= f * p;
                        }
                    }
                }
            }
        }
        self.binv = a.into_iter().map(|row| row[m..].to_vec()).collect();
        self.xb = self.ftran(&self.sf.rhs);
        for v in &mut self.xb {
            if *v < 0.0 && *v > -FEAS_TOL {
                *v = 0.0;
            }
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, r: usize, k: usize, u: &[f64]) {
        let theta = self.xb[r] / u[r];
        for (i, x) in self.xb.iter_mut().enumerate() {
            if i != r {
                *x -= theta * u[i];
            }
        }
        self.xb[r] = theta;
        let inv = 1.0 / u[r];
        for v in &mut self.binv[r] {
            *v *= inv;
        }
        let pivot_row = self.binv[r].clone();
        for (i, row) in self.binv.iter_mut().enumerate() {
            if i != r && u[i] != 0.0 {
                let f = u[i];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
        self.in_basis[self.basis[r]] = false;
        self.basis[r] = k;
        self.in_basis[k] = true;
        self.iterations += 1;
        self.since_refactor += 1;
    }

    fn run(&mut self, cost: &[f64], allow: impl Fn(usize) -> bool, limit: usize) -> Result<PhaseEnd> {
        let m = self.sf.m;
        let ncols = self.sf.cols.len();
        let stall_limit = 3 * (m + ncols);
        let mut stalled = 0usize;
        let start = self.iterations;
        loop {
            if self.iterations - start > limit {
                return Err(Error::IterationLimit(limit));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let y = self.prices(cost);
            let bland = stalled > stall_limit;
            let mut entering = None;
            let mut best = OPT_TOL;
            for k in 0..ncols {
                if self.in_basis[k] || !allow(k) {
                    continue;
                }
                let d = cost[k] - self.sf.cols[k].iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
                if d > best {
                    entering = Some(k);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(k) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let u = self.ftran(&self.sf.cols[k]);
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                if u[r] > PIVOT_TOL {
                    let ratio = self.xb[r].max(0.0) / u[r];
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12 * (1.0 + lratio)
                                || (ratio <= lratio + 1e-12 * (1.0 + lratio) && self.basis[r] < self.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(PhaseEnd::Unbounded);
            };
            if ratio <= 1e-12 {
                stalled += 1;
            } else {
                stalled = 0;
            }
            self.xb[r] = self.xb[r].max(0.0);
            self.pivot(r, k, &u);
        }
    }
}

/// Solve a linear program by two-phase revised simplex.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let sf = standardize(lp);
    let m = sf.m;
    let ncols = sf.cols.len();
    let limit = 50 * (m + ncols) + 1000;
    let mut t = Tableau::new(&sf);

    let art = sf.artificial_start;
    let empty = |status| LpSolution {
        status,
        primal: Vec::new(),
        duals: Vec::new(),
        objective: f64::NAN,
        iterations: 0,
    };

    if art < ncols {
        let phase1: Vec<f64> = (0..ncols).map(|k| if k >= art { -1.0 } else { 0.0 }).collect();
        t.run(&phase1, |_| true, limit)?;
        t.refactor()?;
        let infeas: f64 = t
            .basis
            .iter()
            .zip(&t.xb)
            .filter(|(b, _)| **b >= art)
            .map(|(_, x)| *x)
            .sum();
        let scale = 1.0 + sf.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeas > FEAS_TOL * scale {
            let mut s = empty(LpStatus::Infeasible);
            s.iterations = t.iterations;
            return Ok(s);
        }
        // drive remaining artificials out of the basis where possible
        for r in 0..m {
            if t.basis[r] < art {
                continue;
            }
            let row = t.binv[r].clone();
            let mut best: Option<(usize, f64)> = None;
            for k in 0..art {
                if t.in_basis[k] {
                    continue;
                }
                let v: f64 = row.iter().zip(&sf.cols[k]).map(|(a, b)| a * b).sum();
                if v.abs() > 1e-9 && best.map_or(true, |(_, bv)| v.abs() > bv) {
                    best = Some((k, v.abs()));
                }
            }
            if let Some((k, _)) = best {
                let u = t.ftran(&sf.cols[k]);
                t.xb[r] = 0.0;
                t.pivot(r, k, &u);
            }
        }
        t.refactor()?;
    }

    let end = t.run(&sf.cost, |k| k < art, limit)?;
    if let PhaseEnd::Unbounded = end {
        let mut s = empty(LpStatus::Unbounded);
        s.iterations = t.iterations;
        return Ok(s);
    }
    t.refactor()?;

    let mut z = vec![0.0; ncols];
    for (r, &b) in t.basis.iter().enumerate() {
        z[b] = t.xb[r];
    }
    let primal: Vec<f64> = sf
        .vars
        .iter()
        .map(|v| match *v {
            VarMap::Shift { col, lower } => lower + z[col],
            VarMap::Flip { col, upper } => upper - z[col],
            VarMap::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();
    let y = t.prices(&sf.cost);
    let duals: Vec<f64> = (0..lp.num_rows()).map(|i| sf.row_sign[i] * y[i]).collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective_value(&primal),
        primal,
        duals,
        iterations: t.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_binding_constraint() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Le, 1.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.duals[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible() {
        let mut lp = LinearProgram::new(1);
        lp.add_constraint(vec![(0, 1.0)], Relation::Le, -1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.add_constraint(vec![(0, 1.0), (1, -1.0)], Relation::Le, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_bounded_variables() {
        // max y s.t. y <= 2 - x, y <= x, x in [-1, 0.5], y free
        let mut lp = LinearProgram::new(2);
        lp.set_bounds(0, -1.0, 0.5);
        lp.set_free(1);
        lp.set_objective(1, 1.0);
        lp.add_constraint(vec![(1, 1.0), (0, 1.0)], Relation::Le, 2.0);
        lp.add_constraint(vec![(1, 1.0), (0, -1.0)], Relation::Le, 0.0);
        let s = solve(&lp).unwrap();
        assert_abs_diff_eq!(s.objective, 0.5, epsilon = 1e-12);
        let res = residuals(&lp, &s.primal, &s.duals);
        assert!(res.is_optimal(&lp), "{res:?}");
    }

    #[test]
    fn equality_and_ge_rows() {
        // max x0 + 2 x1 s.t. x0 + x1 = 3, x0 >= 1, x1 <= 1.5
        let mut lp = LinearProgram::new(2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 2.0);
        lp.add_constraint(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 3.0);
        lp.add_constraint(vec![(0, 1.0)], Relation::Ge, 1.0);
        lp.add_constraint(vec![(1, 1.0)], Relation::Le, 1.5);
        let s = solve(&lp).unwrap();
        assert_abs_diff_eq!(s.objective, 4.5, epsilon = 1e-12);
        let res = residuals(&lp, &s.primal, &s.duals);
        assert!(res.is_optimal(&lp), "{res:?}");
    }

    #[test]
    fn rejects_bad_input() {
        let mut lp = LinearProgram::new(1);
        lp.add_constraint(vec![(3, 1.0)], Relation::Le, 1.0);
        assert!(matches!(solve(&lp), Err(Error::DimensionMismatch(_))));
        let mut lp = LinearProgram::new(1);
        lp.set_objective(0, f64::NAN);
        assert!(matches!(solve(&lp), Err(Error::NonFinite(_))));
    }
}
