use std::collections::BTreeMap;

use crate::equilibrium::{erlang_stockout, fluid_value, ProblemInstance};

use super::{Method, OptimizationReport, Policy};

const STARTS: usize = 16;
const GOLDEN_ITERS: usize = 80;

/// Long-run reward of the static policy admitting with probability `x`.
pub fn static_reward(inst: &ProblemInstance, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let b = erlang_stockout(inst.c, inst.load() * x);
    (1.0 - b) * inst.lambda * inst.g.value(x)
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64, usize) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evals = 2;
    for _ in 0..GOLDEN_ITERS {
        if b - a < 1e-13 {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
        evals += 1;
    }
    if f1 >= f2 {
        (x1, f1, evals)
    } else {
        (x2, f2, evals)
    }
}

/// Best static admission probability: golden-section search on every
/// segment between breakpoints of `g`, plus a multistart grid.
pub fn optimize_static(inst: &ProblemInstance) -> OptimizationReport {
    let f = |x: f64| static_reward(inst, x);
    let mut knots = vec![0.0, 1.0];
    knots.extend(inst.g.breakpoints());
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let xstar = inst.fluid_admission();
    let mut candidates: Vec<f64> = knots.clone();
    candidates.push(xstar);
    let mut evals = 0;
    for w in knots.windows(2) {
        let (x, _, n) = golden_max(&f, w[0], w[1]);
        candidates.push(x);
        evals += n;
    }
    let h = 1.0 / STARTS as f64;
    for i in 0..STARTS {
        let (x, _, n) = golden_max(&f, i as f64 * h, (i + 1) as f64 * h);
        candidates.push(x);
        evals += n;
    }
    let (x, reward) = candidates
        .into_iter()
        .map(|x| (x, f(x)))
        .fold((xstar, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let flu = fluid_value(inst);
    OptimizationReport {
        policy: Policy::Static { x },
        reward,
        loss: flu - reward,
        method: Method::StaticOpt,
        bracket: (reward, flu.max(reward)),
        iterations: evals,
        diagnostics: BTreeMap::from([("x".to_string(), x)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::RewardFunction;

    #[test]
    fn static_at_least_fluid() {
        let g = RewardFunction::min_affine(&[(0.0, 3.0), (0.3, 1.5), (1.2, 0.0)]).unwrap();
        let inst = ProblemInstance::new(50, 100.0, 1.0, g).unwrap();
        let r = optimize_static(&inst);
        assert!(r.reward >= static_reward(&inst, 0.5) - 1e-9);
    }
}
