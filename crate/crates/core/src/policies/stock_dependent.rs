//! Optimal stock-dependent policies.
//!
//! For piecewise-linear `g` the optimum is the value of a linear program in
//! the stationary probabilities (variables `pi_0..pi_c` and per-state reward
//! variables `g_1..g_c`). Its constraint matrix is bidiagonal in the states,
//! so instead of pivoting we solve it through its dual: for a candidate gain
//! `rho` the dual constraints determine a sequence of shadow prices
//! `p_1..p_c` state by state, and `rho` is optimal exactly when the last
//! price is consistent. Bisection on `rho` then yields a primal policy and a
//! dual solution whose feasibility is checked constraint by constraint. The
//! dense simplex is kept as a fallback and as a cross-check.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibrium::{fluid_value, stationary_distribution, steady_state, ProblemInstance, StockDependentPolicy};
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpSolution, LpStatus, Relation};
use crate::reward::{AffinePiece, RewardFunction};

use super::{Method, OptimizationReport, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpsdMethod {
    /// Gain bisection on the bidiagonal structure.
    Structured,
    /// Dense two-phase simplex on the explicit program.
    Simplex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StockDependentOptions {
    pub method: LpsdMethod,
    /// Target width of the optimality bracket for curved `g` (absolute).
    /// `None` uses `1e-6` times the fluid value.
    pub tol: Option<f64>,
    pub initial_pieces: usize,
    pub max_pieces: usize,
}

impl Default for StockDependentOptions {
    fn default() -> Self {
        Self {
            method: LpsdMethod::Structured,
            tol: None,
            initial_pieces: 8,
            max_pieces: 1024,
        }
    }
}

#[inline]
fn pi_var(j: usize) -> usize {
    j
}

#[inline]
fn g_var(c: usize, j: usize) -> usize {
    c + j
}

/// Explicit LP over `(pi_0..pi_c, g_1..g_c)`. Rows are ordered per state:
/// the piece rows of state `j`, then its admission cap row; the
/// normalization row comes last.
pub fn lpsd_program(inst: &ProblemInstance, pieces: &[AffinePiece]) -> LinearProgram {
    let c = inst.c;
    let mut lp = LinearProgram::new(2 * c + 1);
    for j in 1..=c {
        let gj = g_var(c, j);
        lp.set_free(gj);
        lp.set_objective(gj, inst.lambda);
        let t = (c - j + 1) as f64 / inst.load();
        for p in pieces {
            lp.add_constraint(
                vec![(gj, 1.0), (pi_var(j), -p.intercept), (pi_var(j - 1), -p.slope * t)],
                Relation::Le,
                0.0,
            );
        }
        lp.add_constraint(vec![(pi_var(j - 1), t), (pi_var(j), -1.0)], Relation::Le, 0.0);
    }
    lp.add_constraint((0..=c).map(|j| (pi_var(j), 1.0)).collect(), Relation::Eq, 1.0);
    lp
}

/// Objective of the perspective program at a feasible `pi`, with the
/// convention `0 * g(0 / 0) = 0`.
pub fn lpsd_objective(inst: &ProblemInstance, pi: &[f64]) -> f64 {
    let c = inst.c;
    (1..=c)
        .map(|j| {
            if pi[j] <= 0.0 {
                0.0
            } else {
                let x = ((c - j + 1) as f64 * pi[j - 1] / (inst.load() * pi[j])).min(1.0);
                inst.lambda * pi[j] * inst.g.value(x)
            }
        })
        .sum()
}

/// Optimal multipliers of `min { sum_k w_k a_k + s : w in simplex,
/// s >= sum_k w_k b_k - p, s >= 0 }`, the dual of `max_x g(x) - p x`.
pub fn inner_dual(pieces: &[AffinePiece], p: f64) -> (Vec<(usize, f64)>, f64) {
    let m = pieces.len();
    if p >= pieces[0].slope {
        return (vec![(0, 1.0)], 0.0);
    }
    if p < pieces[m - 1].slope {
        return (vec![(m - 1, 1.0)], pieces[m - 1].slope - p);
    }
    for k in 0..m - 1 {
        let (hi, lo) = (pieces[k].slope, pieces[k + 1].slope);
        if p <= hi && p >= lo {
            if p == hi {
                return (vec![(k, 1.0)], 0.0);
            }
            let theta = (p - lo) / (hi - lo);
            return (vec![(k, theta), (k + 1, 1.0 - theta)], 0.0);
        }
    }
    (vec![(m - 1, 1.0)], 0.0)
}

/// Result of the gain bisection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainSearch {
    /// Gain whose price sequence is dual feasible: an upper bound on the
    /// optimal reward.
    pub upper: f64,
    /// Largest gain found to be infeasible from above.
    pub lower: f64,
    /// Shadow prices `p_1..p_c` at `upper`.
    pub prices: Vec<f64>,
    pub policy: StockDependentPolicy,
    pub bisections: usize,
}

/// Runs the price recursion at gain `rho`. Returns the sign of the
/// terminal residual; with `early_exit` the scan stops once a price turns
/// nonpositive, after which the residual is known to be negative.
fn price_recursion(
    inst: &ProblemInstance,
    g: &RewardFunction,
    rho: f64,
    early_exit: bool,
    mut record: Option<&mut Vec<f64>>,
) -> f64 {
    let c = inst.c;
    let mut p = rho * inst.d / c as f64;
    for j in 1..=c {
        if let Some(r) = record.as_deref_mut() {
            r.push(p);
        }
        let (_, phi) = g.best_response(p);
        let slack = rho - inst.lambda * phi;
        if j == c {
            return slack;
        }
        let next = slack * inst.d / (c - j) as f64;
        if early_exit && next <= 0.0 {
            if let Some(r) = record.as_deref_mut() {
                r.resize(c, 0.0);
            }
            return -1.0;
        }
        p = next;
    }
    unreachable!("loop returns at j = c")
}

/// Bisection on the gain of the stock-dependent control problem.
pub fn gain_search(inst: &ProblemInstance, g: &RewardFunction) -> Result<GainSearch> {
    let flu = inst.lambda * g.value(inst.fluid_admission());
    let mut lo = 0.0;
    let mut hi = flu * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    let mut bisections = 0;
    while bisections < 400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if price_recursion(inst, g, mid, true, None) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        bisections += 1;
    }

    let mut lower_prices = Vec::with_capacity(inst.c);
    price_recursion(inst, g, lo, true, Some(&mut lower_prices));
    let x: Vec<f64> = lower_prices.iter().map(|&p| g.best_response(p).0).collect();
    let policy = StockDependentPolicy::new(x)?;

    // Nudge the gain up until the full recursion stays dual feasible in
    // floating point; the margin dominates the amplified roundoff.
    let mut margin = 0.0;
    for _ in 0..40 {
        let rho = hi * (1.0 + margin) + margin;
        let mut prices = Vec::with_capacity(inst.c);
        let end = price_recursion(inst, g, rho, false, Some(&mut prices));
        if end >= 0.0 && prices.iter().all(|p| p.is_finite() && *p > 0.0) {
            return Ok(GainSearch {
                upper: rho,
                lower: lo,
                prices,
                policy,
                bisections,
            });
        }
        margin = if margin == 0.0 { 1e-14 } else { margin * 4.0 };
    }
    Err(Error::Numerical("could not certify the gain bisection".into()))
}

/// Largest violation (relative to `1 + rho`) of the dual constraints of the
/// explicit program for the structured dual built from `prices`.
pub fn structured_dual_violation(inst: &ProblemInstance, pieces: &[AffinePiece], rho: f64, prices: &[f64]) -> (f64, usize) {
    let c = inst.c;
    let lam = inst.lambda;
    let duals: Vec<(Vec<(usize, f64)>, f64)> = prices.iter().map(|&p| inner_dual(pieces, p)).collect();
    let own = |j: usize| {
        let (w, s) = &duals[j - 1];
        lam * (w.iter().map(|&(k, v)| v * pieces[k].intercept).sum::<f64>() + s)
    };
    let carried = |j: usize| {
        let (w, s) = &duals[j - 1];
        let t = (c - j + 1) as f64 / inst.load();
        t * lam * (w.iter().map(|&(k, v)| v * pieces[k].slope).sum::<f64>() - s)
    };
    let mut worst = carried(1) - rho;
    let mut at = 0;
    for j in 1..=c {
        let lhs = own(j) + if j < c { carried(j + 1) } else { 0.0 };
        if lhs - rho > worst {
            worst = lhs - rho;
            at = j;
        }
    }
    (worst.max(0.0) / (1.0 + rho.abs()), at)
}

/// Outcome of solving the stock-dependent program for a piecewise-linear
/// reward function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpsdSolve {
    pub policy: StockDependentPolicy,
    /// Reward of `policy` under the reward function that was solved for.
    pub reward: f64,
    /// Certified upper bound on the optimal reward.
    pub upper_bound: f64,
    /// Relative dual infeasibility of the certificate behind `upper_bound`.
    pub dual_violation: f64,
    pub method: LpsdMethod,
    pub iterations: usize,
}

fn recover_policy(inst: &ProblemInstance, pi: &[f64]) -> Result<StockDependentPolicy> {
    let c = inst.c;
    let x = (1..=c)
        .map(|j| {
            if pi[j] <= 1e-14 {
                1.0
            } else {
                ((c - j + 1) as f64 * pi[j - 1].max(0.0) / (inst.load() * pi[j])).min(1.0)
            }
        })
        .collect();
    StockDependentPolicy::new(x)
}

/// Solves the stock-dependent program for piecewise-linear `g`.
pub fn solve_lpsd(inst: &ProblemInstance, g: &RewardFunction, method: LpsdMethod) -> Result<LpsdSolve> {
    let pieces = g
        .pieces()
        .ok_or_else(|| Error::InvalidReward("the linear program needs a piecewise-linear g".into()))?;
    let evaluated = ProblemInstance {
        g: g.clone(),
        ..inst.clone()
    };
    match method {
        LpsdMethod::Structured => {
            let gs = gain_search(&evaluated, g)?;
            let (violation, _) = structured_dual_violation(&evaluated, pieces, gs.upper, &gs.prices);
            if violation > 1e-8 && inst.c <= 200 {
                log::warn!("structured certificate violated by {violation}; falling back to simplex");
                return solve_lpsd(inst, g, LpsdMethod::Simplex);
            }
            if violation > 1e-8 {
                return Err(Error::Numerical(format!("dual certificate violated by {violation}")));
            }
            let reward = steady_state(&evaluated, &gs.policy)?.reward;
            Ok(LpsdSolve {
                policy: gs.policy,
                reward,
                upper_bound: gs.upper,
                dual_violation: violation,
                method,
                iterations: gs.bisections,
            })
        }
        LpsdMethod::Simplex => {
            let lp = lpsd_program(&evaluated, pieces);
            let sol = lp::solve(&lp)?;
            if sol.status != LpStatus::Optimal {
                return Err(Error::Numerical(format!("stock-dependent program returned {:?}", sol.status)));
            }
            let (dual_obj, dual_inf) = lp::dual_bound(&lp, &sol.duals);
            let policy = recover_policy(&evaluated, &sol.primal[..=inst.c])?;
            let reward = steady_state(&evaluated, &policy)?.reward;
            Ok(LpsdSolve {
                policy,
                reward,
                upper_bound: dual_obj.max(sol.objective),
                dual_violation: dual_inf / (1.0 + dual_obj.abs()),
                method,
                iterations: sol.iterations,
            })
        }
    }
}

/// Primal and dual vectors of the explicit program corresponding to a
/// structured solve, for auditing with [`lp::residuals`].
pub fn structured_lp_solution(inst: &ProblemInstance, g: &RewardFunction) -> Result<(LinearProgram, LpSolution)> {
    let pieces = g
        .pieces()
        .ok_or_else(|| Error::InvalidReward("the linear program needs a piecewise-linear g".into()))?;
    let inst = ProblemInstance {
        g: g.clone(),
        ..inst.clone()
    };
    let c = inst.c;
    let m = pieces.len();
    let gs = gain_search(&inst, g)?;
    let lp = lpsd_program(&inst, pieces);
    let pi = stationary_distribution(c, inst.load(), gs.policy.as_slice());
    let mut primal = vec![0.0; 2 * c + 1];
    primal[..=c].copy_from_slice(&pi);
    for j in 1..=c {
        primal[g_var(c, j)] = pi[j] * g.value(gs.policy.at(j));
    }
    let mut duals = vec![0.0; lp.num_rows()];
    for j in 1..=c {
        let (w, s) = inner_dual(pieces, gs.prices[j - 1]);
        let base = (j - 1) * (m + 1);
        for (k, v) in w {
            duals[base + k] = inst.lambda * v;
        }
        duals[base + m] = inst.lambda * s;
    }
    duals[c * (m + 1)] = gs.upper;
    let objective = lp.objective_value(&primal);
    Ok((
        lp,
        LpSolution {
            status: LpStatus::Optimal,
            primal,
            duals,
            objective,
            iterations: gs.bisections,
        },
    ))
}

/// Support points for tangent and chord approximations: three quarters
/// clustered logarithmically within 0.1 of `x*`, the rest uniform.
fn support_points(xstar: f64, m: usize) -> Vec<f64> {
    let local = (3 * m / 4).max(2);
    let per_side = local / 2;
    let mut pts = vec![xstar];
    for i in 0..per_side {
        let t = if per_side > 1 { i as f64 / (per_side - 1) as f64 } else { 1.0 };
        let off = 0.1 * 10f64.powf(-3.0 * (1.0 - t));
        pts.push(xstar - off);
        pts.push(xstar + off);
    }
    let uniform = m.saturating_sub(local).max(1);
    for i in 0..uniform {
        pts.push((i as f64 + 0.5) / uniform as f64);
    }
    pts.retain(|&x| x > 0.0 && x < 1.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    pts
}

pub fn optimize_stock_dependent(inst: &ProblemInstance) -> Result<OptimizationReport> {
    optimize_stock_dependent_with(inst, &StockDependentOptions::default())
}

pub fn optimize_stock_dependent_with(inst: &ProblemInstance, opts: &StockDependentOptions) -> Result<OptimizationReport> {
    let flu = fluid_value(inst);
    if inst.g.is_piecewise_linear() {
        let s = solve_lpsd(inst, &inst.g, opts.method)?;
        let upper = s.upper_bound.min(flu).max(s.reward);
        return Ok(OptimizationReport {
            policy: Policy::StockDependent(s.policy),
            reward: s.reward,
            loss: flu - s.reward,
            method: Method::StockDependentOpt,
            bracket: (s.reward, upper),
            iterations: s.iterations,
            diagnostics: BTreeMap::from([
                ("dual_violation".to_string(), s.dual_violation),
                ("upper_bound".to_string(), s.upper_bound),
            ]),
        });
    }

    let tol = opts.tol.unwrap_or(1e-6 * flu);
    let xstar = inst.fluid_admission().clamp(1e-6, 1.0 - 1e-6);
    let mut m = opts.initial_pieces.max(2);
    loop {
        let pts = support_points(xstar, m);
        let upper_g = inst.g.tangent_majorant(&pts)?;
        let lower_g = inst.g.chord_minorant(&pts)?;
        let up = solve_lpsd(inst, &upper_g, opts.method)?;
        let dn = solve_lpsd(inst, &lower_g, opts.method)?;
        let r_dn = steady_state(inst, &dn.policy)?.reward;
        let r_up = steady_state(inst, &up.policy)?.reward;
        let (policy, reward) = if r_up > r_dn { (up.policy, r_up) } else { (dn.policy, r_dn) };
        let upper = up.upper_bound.min(flu).max(reward);
        if upper - reward <= tol || m >= opts.max_pieces {
            return Ok(OptimizationReport {
                policy: Policy::StockDependent(policy),
                reward,
                loss: flu - reward,
                method: Method::StockDependentOpt,
                bracket: (reward, upper),
                iterations: m,
                diagnostics: BTreeMap::from([
                    ("pieces".to_string(), m as f64),
                    ("dual_violation".to_string(), up.dual_violation.max(dn.dual_violation)),
                    ("minorant_upper_bound".to_string(), dn.upper_bound),
                ]),
            });
        }
        m *= 2;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfCheckReport {
    pub trials: usize,
    pub violations: usize,
    pub max_violation: f64,
    /// Smallest stationary probability under the optimal policy.
    pub min_optimal_pi: f64,
}

/// Samples pairs of feasible stationary distributions and checks midpoint
/// concavity of the perspective objective; also reports the smallest
/// probability of the optimal distribution.
pub fn concavity_selfcheck(inst: &ProblemInstance, trials: usize, seed: u64) -> Result<SelfCheckReport> {
    let c = inst.c;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_pi = |rng: &mut ChaCha8Rng| {
        let x: Vec<f64> = (0..c)
            .map(|_| if rng.gen::<f64>() < 0.02 { 0.0 } else { rng.gen_range(0.01..=1.0) })
            .collect();
        stationary_distribution(c, inst.load(), &x)
    };
    let mut violations = 0;
    let mut max_violation: f64 = 0.0;
    for _ in 0..trials {
        let a = random_pi(&mut rng);
        let b = random_pi(&mut rng);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(u, v)| 0.5 * (u + v)).collect();
        let gap = 0.5 * (lpsd_objective(inst, &a) + lpsd_objective(inst, &b)) - lpsd_objective(inst, &mid);
        if gap > 1e-9 * (1.0 + fluid_value(inst)) {
            violations += 1;
        }
        max_violation = max_violation.max(gap);
    }
    let opt = if inst.g.is_piecewise_linear() {
        solve_lpsd(inst, &inst.g, LpsdMethod::Structured)?.policy
    } else {
        gain_search(inst, &inst.g)?.policy
    };
    let pi = steady_state(inst, &opt)?.pi;
    Ok(SelfCheckReport {
        trials,
        violations,
        max_violation,
        min_optimal_pi: pi.iter().copied().fold(f64::INFINITY, f64::min),
    })
}
