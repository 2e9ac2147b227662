//! Several customer classes sharing one resource, or several resources.
//!
//! The fluid relaxation allocates admission probabilities across classes;
//! the dedicated-capacity decomposition then gives class `i` a private pool
//! of `floor(lambda_i x*_i d_i)` units and prices each pool on its own with
//! a two-price policy.

use serde::Serialize;

use crate::equilibrium::ProblemInstance;
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpStatus, Relation};
use crate::par;
use crate::policies::{optimize_two_price_with, two_price_reward, two_price_theoretical, Policy, TwoPriceOptions, TwoPricePolicy};
use crate::reward::{classify_shape, RewardFunction};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CustomerClass {
    pub lambda: f64,
    pub d: f64,
    pub g: RewardFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiClassInstance {
    pub classes: Vec<CustomerClass>,
    /// Capacity of every resource; a single entry for the one-resource model.
    pub capacities: Vec<f64>,
    /// `consumption[i][j]` units of resource `j` per admitted class-`i`
    /// customer; `None` means one unit of the single resource.
    pub consumption: Option<Vec<Vec<f64>>>,
}

impl MultiClassInstance {
    pub fn single(classes: Vec<CustomerClass>, c: f64) -> Result<Self> {
        let inst = Self {
            classes,
            capacities: vec![c],
            consumption: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn network(classes: Vec<CustomerClass>, capacities: Vec<f64>, consumption: Vec<Vec<f64>>) -> Result<Self> {
        let inst = Self {
            classes,
            capacities,
            consumption: Some(consumption),
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::InvalidInstance("no customer classes".into()));
        }
        for (i, k) in self.classes.iter().enumerate() {
            if !(k.lambda > 0.0 && k.d > 0.0 && k.lambda.is_finite() && k.d.is_finite()) {
                return Err(Error::InvalidInstance(format!("class {i}: rate and mean must be positive")));
            }
        }
        if self.capacities.is_empty() || self.capacities.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidInstance("capacities must be finite and nonnegative".into()));
        }
        if let Some(a) = &self.consumption {
            if a.len() != self.classes.len() || a.iter().any(|row| row.len() != self.capacities.len()) {
                return Err(Error::DimensionMismatch("consumption matrix must be classes x resources".into()));
            }
            if a.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidInstance("consumption must be nonnegative".into()));
            }
        } else if self.capacities.len() != 1 {
            return Err(Error::InvalidInstance("several resources need a consumption matrix".into()));
        }
        Ok(())
    }

    pub fn is_network(&self) -> bool {
        self.consumption.is_some()
    }

    pub fn consumption(&self, i: usize, j: usize) -> f64 {
        self.consumption.as_ref().map_or(1.0, |a| a[i][j])
    }

    /// `c / sum_i lambda_i d_i < 1` for the single resource; for networks,
    /// whether any resource would be overloaded by admitting everyone.
    pub fn is_scarce(&self) -> bool {
        (0..self.capacities.len()).any(|j| {
            let load: f64 = self
                .classes
                .iter()
                .enumerate()
                .map(|(i, k)| k.lambda * k.d * self.consumption(i, j))
                .sum();
            self.capacities[j] < load
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluidSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Shadow price of the capacity constraint (single resource), or
    /// the resource duals of the network LP.
    pub prices: Vec<f64>,
    pub kkt_residual: f64,
    /// Gap between majorant and minorant values for curved `g` (network).
    pub approximation_gap: f64,
}

fn usage(inst: &MultiClassInstance, x: &[f64]) -> f64 {
    inst.classes.iter().zip(x).map(|(k, xi)| k.lambda * k.d * xi).sum()
}

/// Single-resource fluid optimum by bisection on the capacity price.
pub fn solve_fluid_multiclass(inst: &MultiClassInstance) -> Result<FluidSolution> {
    if inst.is_network() {
        return Err(Error::Precondition("use solve_fluid_network for several resources".into()));
    }
    let c = inst.capacities[0];
    let classes = &inst.classes;
    let respond = |theta: f64, largest: bool| -> Vec<f64> {
        classes
            .iter()
            .map(|k| {
                let (lo, hi) = k.g.argmax_linear(theta * k.d);
                if largest {
                    hi
                } else {
                    lo
                }
            })
            .collect()
    };
    let (x, theta) = if usage(inst, &respond(0.0, true)) <= c {
        (respond(0.0, true), 0.0)
    } else {
        let mut lo = 0.0;
        let mut hi = classes
            .iter()
            .map(|k| k.g.max_slope() / k.d)
            .fold(0.0, f64::max)
            * 2.0
            + 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if usage(inst, &respond(mid, true)) > c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // usage jumps across the price only for classes with a piece of slope
        // theta d_i; move those from their largest maximizer toward the
        // smallest until the capacity binds
        let upper = respond(lo, true);
        let lower = respond(hi, true);
        let (u_hi, u_lo) = (usage(inst, &upper), usage(inst, &lower));
        let s = if u_hi > u_lo { ((c - u_lo) / (u_hi - u_lo)).clamp(0.0, 1.0) } else { 0.0 };
        let x = upper.iter().zip(&lower).map(|(a, b)| b + s * (a - b)).collect();
        (x, 0.5 * (lo + hi))
    };
    let value: f64 = classes.iter().zip(&x).map(|(k, xi)| k.lambda * k.g.value(*xi)).sum();
    // stationarity: each x_i maximizes g_i(x) - theta d_i x; complementary
    // slackness on the capacity row
    let mut kkt: f64 = 0.0;
    for (k, xi) in classes.iter().zip(&x) {
        let (_, best) = k.g.best_response(theta * k.d);
        let here = k.g.value(*xi) - theta * k.d * xi;
        kkt = kkt.max(k.lambda * (best - here).max(0.0));
    }
    kkt = kkt.max(theta * (c - usage(inst, &x)).abs()).max((usage(inst, &x) - c).max(0.0));
    Ok(FluidSolution {
        x,
        value,
        prices: vec![theta],
        kkt_residual: kkt,
        approximation_gap: 0.0,
    })
}

const CURVED_PIECES: usize = 256;

/// Hypograph LP and the row index of each resource constraint (`None` when
/// no class consumes the resource).
fn hypograph_lp(inst: &MultiClassInstance, pieces: &[Vec<(f64, f64)>]) -> (LinearProgram, Vec<Option<usize>>) {
    let m = inst.classes.len();
    // variables: x_0..x_{m-1}, then h_0..h_{m-1}
    let mut lp = LinearProgram::new(2 * m);
    for (i, k) in inst.classes.iter().enumerate() {
        lp.set_bounds(i, 0.0, 1.0);
        lp.set_free(m + i);
        lp.set_objective(m + i, k.lambda);
        for &(a, b) in &pieces[i] {
            lp.add_constraint(vec![(m + i, 1.0), (i, -b)], Relation::Le, a);
        }
    }
    let mut rows = Vec::with_capacity(inst.capacities.len());
    for (j, &cap) in inst.capacities.iter().enumerate() {
        let row: Vec<(usize, f64)> = inst
            .classes
            .iter()
            .enumerate()
            .map(|(i, k)| (i, k.lambda * k.d * inst.consumption(i, j)))
            .filter(|e| e.1 != 0.0)
            .collect();
        rows.push((!row.is_empty()).then(|| lp.add_constraint(row, Relation::Le, cap)));
    }
    (lp, rows)
}

fn pieces_of(g: &RewardFunction) -> Result<(Vec<(f64, f64)>, Option<Vec<(f64, f64)>>)> {
    let to_pairs = |f: &RewardFunction| {
        f.pieces()
            .expect("piecewise-linear")
            .iter()
            .map(|p| (p.intercept, p.slope))
            .collect::<Vec<_>>()
    };
    if g.is_piecewise_linear() {
        Ok((to_pairs(g), None))
    } else {
        let pts: Vec<f64> = (0..=CURVED_PIECES).map(|i| i as f64 / CURVED_PIECES as f64).collect();
        let lower = g.chord_minorant(&pts)?;
        let upper = g.tangent_majorant(&pts)?;
        Ok((to_pairs(&lower), Some(to_pairs(&upper))))
    }
}

/// Multi-resource fluid optimum from the hypograph LP. Curved `g` are
/// replaced by chord minorants; the tangent-majorant LP bounds the error.
pub fn solve_fluid_network(inst: &MultiClassInstance) -> Result<FluidSolution> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut curved = false;
    for k in &inst.classes {
        let (lo, up) = pieces_of(&k.g)?;
        curved |= up.is_some();
        upper.push(up.unwrap_or_else(|| lo.clone()));
        lower.push(lo);
    }
    let (lp, cap_rows) = hypograph_lp(inst, &lower);
    let sol = lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Numerical(format!("fluid network LP ended with {:?}", sol.status)));
    }
    let m = inst.classes.len();
    let x: Vec<f64> = sol.primal[..m].iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let value: f64 = inst.classes.iter().zip(&x).map(|(k, xi)| k.lambda * k.g.value(*xi)).sum();
    let res = lp::residuals(&lp, &sol.primal, &sol.duals);
    let approximation_gap = if curved {
        let up = lp::solve(&hypograph_lp(inst, &upper).0)?;
        (up.objective - value).max(0.0)
    } else {
        0.0
    };
    let prices = cap_rows.iter().map(|r| r.map_or(0.0, |k| sol.duals[k])).collect();
    Ok(FluidSolution {
        x,
        value,
        prices,
        kkt_residual: res.primal_infeasibility.max(res.dual_infeasibility).max(res.duality_gap().abs()),
        approximation_gap,
    })
}

/// How each dedicated pool is priced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassPricing {
    Optimized(TwoPriceOptions),
    /// Theoretical two-price parameters from the local shape of `g_i`;
    /// classes with a kink at their `x*` fall back to optimization.
    Theoretical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassResult {
    /// `None` when the class uses no capacity-limited resource.
    pub capacity: Option<usize>,
    pub policy: Option<TwoPricePolicy>,
    pub reward: f64,
    /// Fluid value of the dedicated pool minus `reward`.
    pub pool_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub x_star: Vec<f64>,
    pub fluid_value: f64,
    pub classes: Vec<ClassResult>,
    pub total_reward: f64,
    pub loss: f64,
    /// `fluid_value - sum_i g_i'(0)/d_i - sum_i pool_loss_i`.
    pub decomposition_bound: f64,
}

fn dedicated_capacity(inst: &MultiClassInstance, i: usize, x: f64) -> Option<usize> {
    let k = &inst.classes[i];
    if !inst.is_network() {
        return Some((k.lambda * x * k.d + 1e-9).floor().max(0.0) as usize);
    }
    (0..inst.capacities.len())
        .filter(|&j| inst.consumption(i, j) > 0.0)
        .map(|j| {
            let a = inst.consumption(i, j);
            let units = (k.lambda * x * a * k.d + 1e-9).floor();
            ((units / a + 1e-9).floor()).max(0.0) as usize
        })
        .min()
}

fn price_class(class: &CustomerClass, c: usize, pricing: ClassPricing) -> Result<(TwoPricePolicy, f64)> {
    let inst = ProblemInstance::new(c, class.lambda, class.d, class.g.clone())?;
    if let ClassPricing::Theoretical = pricing {
        let x = inst.xstar();
        if x > 0.0 && x < 1.0 {
            if let Ok(shape) = classify_shape(&class.g, x, 0.25 * x.min(1.0 - x)) {
                if let Ok(p) = two_price_theoretical(&inst, &shape) {
                    return Ok((p, two_price_reward(&inst, p.x_l, p.x_h, p.tau)));
                }
            }
        }
    }
    let opts = match pricing {
        ClassPricing::Optimized(o) => o,
        ClassPricing::Theoretical => TwoPriceOptions::default(),
    };
    let report = optimize_two_price_with(&inst, &opts);
    match report.policy {
        Policy::TwoPrice(p) => Ok((p, report.reward)),
        other => Err(Error::Numerical(format!("unexpected policy {other:?}"))),
    }
}

/// Dedicated-capacity decomposition with per-class two-price policies,
/// priced concurrently.
pub fn decompose_and_price(inst: &MultiClassInstance, pricing: ClassPricing) -> Result<Allocation> {
    let fluid = if inst.is_network() {
        solve_fluid_network(inst)?
    } else {
        solve_fluid_multiclass(inst)?
    };
    let caps: Vec<Option<usize>> = (0..inst.classes.len())
        .map(|i| dedicated_capacity(inst, i, fluid.x[i]))
        .collect();
    let results: Vec<Result<ClassResult>> = par::map_range(inst.classes.len(), |i| {
        let k = &inst.classes[i];
        match caps[i] {
            None => Ok(ClassResult {
                capacity: None,
                policy: None,
                reward: k.lambda * k.g.value(1.0),
                pool_loss: 0.0,
            }),
            Some(0) => {
                log::warn!("class {i} receives no dedicated units and is priced out");
                Ok(ClassResult {
                    capacity: Some(0),
                    policy: None,
                    reward: 0.0,
                    pool_loss: 0.0,
                })
            }
            Some(c) => {
                let (policy, reward) = price_class(k, c, pricing)?;
                let pool_fluid = k.lambda * k.g.value((c as f64 / (k.lambda * k.d)).min(1.0));
                Ok(ClassResult {
                    capacity: Some(c),
                    policy: Some(policy),
                    reward,
                    pool_loss: pool_fluid - reward,
                })
            }
        }
    });
    let classes: Vec<ClassResult> = results.into_iter().collect::<Result<_>>()?;
    let total_reward: f64 = classes.iter().map(|r| r.reward).sum();
    let slack: f64 = inst.classes.iter().map(|k| k.g.supergradient(0.0).0 / k.d).sum();
    let pool_losses: f64 = classes.iter().map(|r| r.pool_loss).sum();
    Ok(Allocation {
        x_star: fluid.x,
        fluid_value: fluid.value,
        total_reward,
        loss: fluid.value - total_reward,
        decomposition_bound: fluid.value - slack - pool_losses,
        classes,
    })
}
