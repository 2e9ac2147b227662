//! Explicit dual solutions of relaxed stock-dependent programs.
//!
//! Each certificate is a feasible dual point of a relaxation of the
//! stock-dependent LP in which `g` is replaced by a piecewise-linear
//! majorant and the admission-cap rows are dropped. By weak duality its
//! objective `zeta` bounds the reward of every stock-dependent policy (or,
//! for the static program, of one static policy) from above.

use serde::{Deserialize, Serialize};

use crate::equilibrium::ProblemInstance;
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus, Relation};

mod build;

pub use build::{
    auto_certificate, build_dual_alpha1, build_dual_alpha1_with, build_dual_alpha_inf, build_dual_static,
    build_kink_majorant, fit_three_piece, fit_two_slope, optimal_kink_offset, KinkMajorant, ThreePieceFit,
};

/// Which piece of the three-piece majorant `min{r1 x, r2 x + b2, b3}`
/// is active at `x*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfCase {
    ScarceCase1,
    MiddleCase2,
    FlatCase3,
}

/// The relaxed primal program a certificate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DualProgram {
    /// Two lines through `(x*, gstar)` with slopes `big_r > r`.
    Alpha1 { big_r: f64, r: f64, gstar: f64 },
    /// `min{r1 x, r2 x + b2, b3}`.
    AlphaInf { r1: f64, r2: f64, b2: f64, b3: f64, case: InfCase },
    /// Static admission probability `q` under the line `r x + b`.
    Static { r: f64, b: f64, q: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Largest violation over dual constraints and multiplier signs.
    pub max_violation: f64,
    /// Index of the worst dual constraint (one per primal variable, in
    /// program column order), or `None` when nothing is violated.
    pub violated_index: Option<usize>,
    pub violated_constraint: Option<String>,
    pub sign_violations: usize,
    pub dual_objective: f64,
    /// `zeta` minus the relaxed primal optimum, when it was computed.
    pub weak_duality_margin: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub program: DualProgram,
    pub c: usize,
    pub lambda: f64,
    pub d: f64,
    pub zeta: f64,
    /// Multipliers of the first piece rows (empty for the static program).
    pub alpha: Vec<f64>,
    /// Second piece rows, or the flow rows of the static program.
    pub beta: Vec<f64>,
    /// Third piece rows; empty unless the majorant has three pieces.
    pub gamma: Vec<f64>,
    /// `1 + lambda g(x*)`; residuals are measured relative to this.
    pub scale: f64,
    pub residuals: Option<ResidualReport>,
}

/// Primal optima are computed by simplex up to this many variables.
const PRIMAL_CHECK_VARS: usize = 401;

impl DualCertificate {
    pub fn xstar(&self) -> f64 {
        self.c as f64 / (self.lambda * self.d)
    }

    pub fn tolerance(&self) -> f64 {
        1e-8 * self.scale
    }

    /// Gap to the fluid value `lambda g(x*)`.
    pub fn gap(&self) -> f64 {
        self.scale - 1.0 - self.zeta
    }

    pub fn program_lp(&self) -> LinearProgram {
        let t = |j: usize| (self.c - j + 1) as f64 / (self.lambda * self.d);
        match self.program {
            DualProgram::Alpha1 { big_r, r, gstar } => {
                let x = self.xstar();
                piece_program(self.c, self.lambda, &t, &[(gstar - big_r * x, big_r), (gstar - r * x, r)])
            }
            DualProgram::AlphaInf { r1, r2, b2, b3, .. } => {
                piece_program(self.c, self.lambda, &t, &[(0.0, r1), (b2, r2), (b3, 0.0)])
            }
            DualProgram::Static { r, b, q } => static_program(self.c, self.lambda, &t, r, b, q),
        }
    }

    /// Row multipliers in the order of [`Self::program_lp`].
    pub fn dual_vector(&self) -> Vec<f64> {
        match self.program {
            DualProgram::Static { .. } => {
                let mut y = vec![self.zeta];
                y.extend_from_slice(&self.beta);
                y
            }
            _ => {
                let mut y = Vec::with_capacity(3 * self.c + 1);
                for j in 0..self.c {
                    for v in [&self.alpha, &self.beta, &self.gamma] {
                        if !v.is_empty() {
                            y.push(v[j]);
                        }
                    }
                }
                y.push(self.zeta);
                y
            }
        }
    }

    fn pieces_per_state(&self) -> usize {
        [&self.alpha, &self.beta, &self.gamma].iter().filter(|v| !v.is_empty()).count()
    }

    pub fn constraint_label(&self, index: usize) -> String {
        match self.program {
            DualProgram::Static { .. } => format!("pi_{index}"),
            _ if index <= self.c => format!("pi_{index}"),
            _ => format!("g_{}", index - self.c),
        }
    }

    /// Run [`verify_dual`] against the certificate's own program and store
    /// the report.
    pub fn verify(&mut self) -> Result<&ResidualReport> {
        let report = verify_dual(self, &self.program_lp())?;
        self.residuals = Some(report);
        Ok(self.residuals.as_ref().expect("just stored"))
    }

    pub fn passed(&self) -> bool {
        self.residuals.as_ref().is_some_and(|r| r.pass)
    }
}

/// Relaxed program over `(pi_0..pi_c, g_1..g_c)` with one row per state and
/// piece `(intercept, slope)`: `g_j <= a pi_j + b t_j pi_{j-1}`. The
/// normalization row comes last.
fn piece_program(c: usize, lambda: f64, t: &dyn Fn(usize) -> f64, pieces: &[(f64, f64)]) -> LinearProgram {
    let mut lp = LinearProgram::new(2 * c + 1);
    for j in 1..=c {
        let gj = c + j;
        lp.set_free(gj);
        lp.set_objective(gj, lambda);
        for &(a, b) in pieces {
            lp.add_constraint(vec![(gj, 1.0), (j, -a), (j - 1, -b * t(j))], Relation::Le, 0.0);
        }
    }
    lp.add_constraint((0..=c).map(|j| (j, 1.0)).collect(), Relation::Eq, 1.0);
    lp
}

/// Static program over `pi_0..pi_c` with the reward rows substituted into
/// the objective. Rows: normalization, then `q pi_j - t_j pi_{j-1} = 0`.
fn static_program(c: usize, lambda: f64, t: &dyn Fn(usize) -> f64, r: f64, b: f64, q: f64) -> LinearProgram {
    let mut lp = LinearProgram::new(c + 1);
    for i in 0..=c {
        let mut obj = 0.0;
        if i >= 1 {
            obj += lambda * b;
        }
        if i < c {
            obj += lambda * r * t(i + 1);
        }
        lp.set_objective(i, obj);
    }
    lp.add_constraint((0..=c).map(|j| (j, 1.0)).collect(), Relation::Eq, 1.0);
    for j in 1..=c {
        lp.add_constraint(vec![(j, q), (j - 1, -t(j))], Relation::Eq, 0.0);
    }
    lp
}

/// Check a certificate constraint by constraint against `program`.
///
/// For every primal variable the reduced cost must have the sign its bounds
/// require (zero for free variables), and every row multiplier must have the
/// sign its relation requires. The stated `zeta` must equal the dual
/// objective. When the program is small its primal optimum is computed and
/// the weak-duality margin reported.
pub fn verify_dual(cert: &DualCertificate, program: &LinearProgram) -> Result<ResidualReport> {
    let y = cert.dual_vector();
    if y.len() != program.num_rows() {
        return Err(Error::DimensionMismatch(format!(
            "certificate has {} multipliers, program has {} rows",
            y.len(),
            program.num_rows()
        )));
    }
    if !matches!(cert.program, DualProgram::Static { .. }) {
        let per = cert.pieces_per_state();
        for v in [&cert.alpha, &cert.beta, &cert.gamma] {
            if !v.is_empty() && v.len() != cert.c {
                return Err(Error::DimensionMismatch(format!("multiplier vector of length {}, c = {}", v.len(), cert.c)));
            }
        }
        if per * cert.c + 1 != program.num_rows() {
            return Err(Error::DimensionMismatch("multiplier layout does not match program".into()));
        }
    }
    if y.iter().any(|v| !v.is_finite()) || !cert.zeta.is_finite() {
        return Err(Error::NonFinite("certificate multipliers".into()));
    }
    let tol = cert.tolerance();
    let mut worst = 0.0;
    let mut worst_index = None;
    let mut sign_violations = 0;
    for (row, &yi) in program.constraints.iter().zip(&y) {
        let v = lp::dual_sign_violation(row.relation, yi);
        if v > 1e-12 * cert.scale {
            sign_violations += 1;
        }
        if v > worst {
            worst = v;
        }
    }
    let aty = program.transpose_product(&y);
    for k in 0..program.num_vars() {
        let reduced = program.objective[k] - aty[k];
        let free = program.lower[k].is_infinite() && program.upper[k].is_infinite();
        let v = if free { reduced.abs() } else { reduced.max(0.0) };
        if v > worst {
            worst = v;
            worst_index = Some(k);
        }
    }
    let dual_objective: f64 = program.constraints.iter().zip(&y).map(|(r, yi)| r.rhs * yi).sum();
    let mismatch = (dual_objective - cert.zeta).abs();
    if mismatch > worst {
        worst = mismatch;
        worst_index = None;
    }

    let weak_duality_margin = if program.num_vars() <= PRIMAL_CHECK_VARS {
        match lp::solve(program) {
            Ok(sol) if sol.status == LpStatus::Optimal => Some(cert.zeta - sol.objective),
            _ => None,
        }
    } else {
        None
    };
    let weak_ok = weak_duality_margin.map_or(true, |m| m >= -1e-6 * cert.scale);
    let pass = worst <= tol && sign_violations == 0 && weak_ok;
    let violated_index = if worst > tol { worst_index } else { None };
    Ok(ResidualReport {
        max_violation: worst,
        violated_index,
        violated_constraint: violated_index.map(|k| cert.constraint_label(k)),
        sign_violations,
        dual_objective,
        weak_duality_margin,
        tolerance: tol,
        pass,
    })
}

/// Smallest `zeta` making the multipliers feasible for the piece program:
/// the largest right-hand side over the `pi_j` dual constraints.
pub fn tightest_zeta(cert: &DualCertificate) -> f64 {
    let mut probe = cert.clone();
    probe.zeta = 0.0;
    let program = probe.program_lp();
    let y = probe.dual_vector();
    let aty = program.transpose_product(&y);
    // the normalization row puts zeta into every pi column with coefficient 1
    (0..=cert.c).map(|k| program.objective[k] - aty[k]).fold(f64::NEG_INFINITY, f64::max)
}

/// Scale used for all tolerances of certificates on `inst`.
pub(crate) fn scale_of(inst: &ProblemInstance, gstar: f64) -> f64 {
    1.0 + inst.lambda * gstar
}
