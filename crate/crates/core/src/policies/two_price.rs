use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::{fluid_value, reward_rate, ProblemInstance};
use crate::error::{Error, Result};
use crate::par;
use crate::reward::ShapeModel;

use super::nelder_mead::{self, Options};
use super::static_opt::optimize_static;
use super::{Method, OptimizationReport, Policy, TwoPricePolicy};

/// Long-run reward of a two-price policy in O(c).
pub fn two_price_reward(inst: &ProblemInstance, x_l: f64, x_h: f64, tau: usize) -> f64 {
    let gl = inst.g.value(x_l);
    let gh = inst.g.value(x_h);
    reward_rate(
        inst,
        |j| if j <= tau { x_l } else { x_h },
        |j| if j <= tau { gl } else { gh },
    )
    .0
}

/// Offset `delta(c)` of the theoretical two-price policy before clamping.
pub fn theoretical_delta(c: usize, alpha: f64, eps: f64) -> f64 {
    if alpha.is_infinite() {
        eps
    } else {
        (c as f64).powf(-1.0 / (alpha + 1.0))
    }
}

/// Symmetric two-price policy `x* -/+ delta(c)` with threshold
/// `ceil(ln c / ln(1 + delta / x*))`.
pub fn two_price_theoretical(inst: &ProblemInstance, shape: &ShapeModel) -> Result<TwoPricePolicy> {
    if shape.alpha <= 1.0 {
        return Err(Error::Precondition(
            "no theoretical two-price parametrization for a kink at x* (alpha = 1)".into(),
        ));
    }
    let xstar = inst.xstar();
    if !(xstar > 0.0 && xstar < 1.0) {
        return Err(Error::Precondition(format!("x* = {xstar} outside (0, 1)")));
    }
    let mut delta = theoretical_delta(inst.c, shape.alpha, shape.eps);
    let cap = (0.5 * xstar).min(0.5 * (1.0 - xstar));
    if delta > cap {
        log::warn!("two-price offset {delta} clamped to {cap}");
        delta = cap;
    }
    let tau = ((inst.c as f64).ln() / (1.0 + delta / xstar).ln()).ceil();
    let tau = if tau.is_finite() { (tau as usize).clamp(1, inst.c) } else { 1 };
    TwoPricePolicy::new(xstar - delta, xstar + delta, tau)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPriceOptions {
    pub seed: u64,
    pub restarts: usize,
    /// Scan every threshold up to this many units; subsample above.
    pub exhaustive_limit: usize,
    pub subsample: usize,
    pub refine: usize,
    pub max_evals: usize,
}

impl Default for TwoPriceOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 4,
            exhaustive_limit: 4096,
            subsample: 256,
            refine: 3,
            max_evals: 400,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    reward: f64,
    x_l: f64,
    x_h: f64,
    tau: usize,
    evals: usize,
}

impl Candidate {
    /// Larger reward first, then smaller threshold, then smaller `x_h`.
    fn better_than(&self, other: &Candidate) -> bool {
        match self.reward.total_cmp(&other.reward) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => (other.tau, other.x_h) > (self.tau, self.x_h),
        }
    }
}

fn normalize(p: [f64; 2]) -> (f64, f64) {
    let a = p[0].clamp(0.0, 1.0);
    let b = p[1].clamp(0.0, 1.0);
    (a.min(b), a.max(b))
}

struct Context<'a> {
    inst: &'a ProblemInstance,
    opts: &'a TwoPriceOptions,
    seeds: Vec<[f64; 2]>,
    breakpoints: Vec<f64>,
    edge: f64,
}

impl Context<'_> {
    fn optimize_tau(&self, tau: usize) -> Candidate {
        let inst = self.inst;
        let eval = |p: [f64; 2]| {
            let (l, h) = normalize(p);
            -two_price_reward(inst, l, h, tau)
        };
        let nm = Options {
            edge: self.edge,
            max_evals: self.opts.max_evals,
            ftol: 1e-13,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed ^ (tau as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut starts = self.seeds.clone();
        for _ in 0..self.opts.restarts {
            starts.push([rng.gen::<f64>(), rng.gen::<f64>()]);
        }
        let mut best = Candidate {
            reward: f64::NEG_INFINITY,
            x_l: 0.0,
            x_h: 0.0,
            tau,
            evals: 0,
        };
        let mut evals = 0;
        for s in starts {
            let out = nelder_mead::minimize(eval, s, &nm);
            evals += out.evaluations;
            let (l, h) = normalize(out.point);
            let cand = Candidate {
                reward: -out.value,
                x_l: l,
                x_h: h,
                tau,
                evals: 0,
            };
            if cand.better_than(&best) {
                best = cand;
            }
        }
        // the optimum often sits on a kink of g; try snapping to breakpoints
        let snap = |v: f64| {
            self.breakpoints
                .iter()
                .copied()
                .min_by(|a, b| (a - v).abs().total_cmp(&(b - v).abs()))
                .unwrap_or(v)
        };
        for (l, h) in [
            (snap(best.x_l), best.x_h),
            (best.x_l, snap(best.x_h)),
            (snap(best.x_l), snap(best.x_h)),
        ] {
            if l <= h {
                let r = two_price_reward(inst, l, h, tau);
                evals += 1;
                let cand = Candidate {
                    reward: r,
                    x_l: l,
                    x_h: h,
                    tau,
                    evals: 0,
                };
                if cand.better_than(&best) {
                    best = cand;
                }
            }
        }
        best.evals = evals;
        best
    }
}

fn geometric_taus(c: usize, count: usize) -> Vec<usize> {
    let lc = (c as f64).ln();
    let mut taus: Vec<usize> = (0..count)
        .map(|i| ((lc * i as f64 / (count - 1) as f64).exp().round() as usize).clamp(1, c))
        .collect();
    taus.dedup();
    taus
}

pub fn optimize_two_price(inst: &ProblemInstance) -> OptimizationReport {
    optimize_two_price_with(inst, &TwoPriceOptions::default())
}

/// Threshold scan with a nested Nelder-Mead search over `(x_l, x_h)`.
pub fn optimize_two_price_with(inst: &ProblemInstance, opts: &TwoPriceOptions) -> OptimizationReport {
    let c = inst.c;
    let xstar = inst.fluid_admission();
    let stat = optimize_static(inst);
    let xs = match stat.policy {
        Policy::Static { x } => x,
        _ => xstar,
    };
    let delta = (c as f64).powf(-1.0 / 3.0).min(0.5 * xstar).min(0.5 * (1.0 - xstar));
    let mut breakpoints = inst.g.breakpoints();
    breakpoints.push(xstar);
    let below = breakpoints.iter().copied().filter(|&b| b <= xstar).fold(f64::NAN, f64::max);
    let above = breakpoints.iter().copied().filter(|&b| b >= xstar).fold(f64::NAN, f64::min);
    let mut seeds = vec![[xstar - delta, xstar + delta], [xs, xs]];
    if below.is_finite() && above.is_finite() {
        seeds.push([below, above]);
    }
    let edge = 0.25 * xstar.min(1.0 - xstar).max(0.02);
    let ctx = Context {
        inst,
        opts,
        seeds,
        breakpoints,
        edge,
    };

    let taus: Vec<usize> = if c <= opts.exhaustive_limit {
        (1..=c).collect()
    } else {
        geometric_taus(c, opts.subsample)
    };
    let mut results = par::map(&taus, |&t| ctx.optimize_tau(t));
    if c > opts.exhaustive_limit {
        let best = results.iter().fold(results[0], |b, r| if r.better_than(&b) { *r } else { b });
        let lo = best.tau.saturating_sub(opts.refine).max(1);
        let hi = (best.tau + opts.refine).min(c);
        let extra: Vec<usize> = (lo..=hi).filter(|t| !taus.contains(t)).collect();
        results.extend(par::map(&extra, |&t| ctx.optimize_tau(t)));
    }
    let evals: usize = results.iter().map(|r| r.evals).sum();
    let best = results.iter().fold(results[0], |b, r| if r.better_than(&b) { *r } else { b });

    let flu = fluid_value(inst);
    let policy = TwoPricePolicy::new(best.x_l, best.x_h, best.tau).expect("normalized candidate");
    OptimizationReport {
        policy: Policy::TwoPrice(policy),
        reward: best.reward,
        loss: flu - best.reward,
        method: Method::TwoPriceOpt,
        bracket: (best.reward, flu.max(best.reward)),
        iterations: evals,
        diagnostics: BTreeMap::from([
            ("thresholds_scanned".to_string(), results.len() as f64),
            ("static_reward".to_string(), stat.reward),
        ]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::steady_state;
    use crate::reward::{RewardFunction, ShapeModel};
    use approx::assert_abs_diff_eq;

    fn shape(alpha: f64, eps: f64) -> ShapeModel {
        ShapeModel {
            alpha,
            k1: 1.0,
            k2: 1.0,
            eps,
            gprime_at_xstar: 1.0,
            supergradient_set_at_xstar: (1.0, 1.0),
        }
    }

    #[test]
    fn theoretical_parameters() {
        let g = RewardFunction::quadratic(2.0, -1.0).unwrap();
        let inst = ProblemInstance::new(10_000, 20_000.0, 1.0, g.clone()).unwrap();
        let p = two_price_theoretical(&inst, &shape(2.0, 0.1)).unwrap();
        assert_abs_diff_eq!(p.x_h - 0.5, 10_000f64.powf(-1.0 / 3.0), epsilon = 1e-15);
        assert_eq!(p.tau, 104);
        let inst = ProblemInstance::new(100, 200.0, 1.0, g).unwrap();
        let p = two_price_theoretical(&inst, &shape(f64::INFINITY, 0.1)).unwrap();
        assert_abs_diff_eq!(p.x_l, 0.4, epsilon = 1e-15);
        assert_eq!(p.tau, 26);
        assert!(two_price_theoretical(&inst, &shape(1.0, 0.1)).is_err());
        assert_abs_diff_eq!(theoretical_delta(1_000_000, 2.0, 0.1), 0.01, epsilon = 1e-12);
    }

    #[test]
    fn fast_reward_matches_steady_state() {
        let g = RewardFunction::min_affine(&[(0.0, 3.0), (0.3, 1.5), (1.2, 0.0)]).unwrap();
        let inst = ProblemInstance::new(300, 600.0, 1.0, g).unwrap();
        let p = TwoPricePolicy::new(0.3, 0.7, 17).unwrap();
        let ss = steady_state(&inst, &p.expand(300)).unwrap();
        assert_abs_diff_eq!(two_price_reward(&inst, 0.3, 0.7, 17), ss.reward, epsilon = 1e-9);
    }

    #[test]
    fn single_unit_matches_static() {
        let g = RewardFunction::min_affine(&[(0.0, 2.0), (1.0, 0.0)]).unwrap();
        let inst = ProblemInstance::new(1, 2.0, 1.0, g).unwrap();
        let r = optimize_two_price(&inst);
        let s = optimize_static(&inst);
        assert_eq!(match r.policy { Policy::TwoPrice(p) => p.tau, _ => 0 }, 1);
        assert_abs_diff_eq!(r.reward, s.reward, epsilon = 1e-9);
    }
}
