//! Stationary analysis of stock-dependent admission policies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::RewardFunction;

const RESCALE: f64 = 1e200;
const RESCALE_INV: f64 = 1e-200;

/// Single resource with `c` units, Poisson arrivals at rate `lambda` and
/// mean usage duration `d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemInstance {
    pub c: usize,
    pub lambda: f64,
    pub d: f64,
    pub g: RewardFunction,
}

impl ProblemInstance {
    pub fn new(c: usize, lambda: f64, d: f64, g: RewardFunction) -> Result<Self> {
        if c == 0 {
            return Err(Error::InvalidInstance("c must be at least 1".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidInstance(format!("lambda = {lambda} must be positive")));
        }
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidInstance(format!("d = {d} must be positive")));
        }
        let inst = Self { c, lambda, d, g };
        if !inst.is_scarce() {
            log::warn!("x* = {} >= 1: capacity is not scarce", inst.xstar());
        }
        Ok(inst)
    }

    /// `x* = c / (lambda d)`.
    pub fn xstar(&self) -> f64 {
        self.c as f64 / (self.lambda * self.d)
    }

    pub fn is_scarce(&self) -> bool {
        self.xstar() < 1.0
    }

    /// Admission probability of the fluid policy, `min(1, x*)`.
    pub fn fluid_admission(&self) -> f64 {
        self.xstar().min(1.0)
    }

    /// `lambda d`, the offered load at full admission.
    pub fn load(&self) -> f64 {
        self.lambda * self.d
    }

    pub fn with_c(&self, c: usize) -> Result<Self> {
        Self::new(c, self.lambda, self.d, self.g.clone())
    }
}

/// Admission probabilities `x_1..x_c`, indexed by the number of available
/// units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy")]
pub struct StockDependentPolicy {
    x: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPolicy {
    x: Vec<f64>,
}

impl TryFrom<RawPolicy> for StockDependentPolicy {
    type Error = Error;

    fn try_from(raw: RawPolicy) -> Result<Self> {
        Self::new(raw.x)
    }
}

impl StockDependentPolicy {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidPolicy("policy must cover at least one state".into()));
        }
        if let Some((j, v)) = x.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidPolicy(format!("x_{} = {v} outside [0, 1]", j + 1)));
        }
        Ok(Self { x })
    }

    pub fn constant(c: usize, x: f64) -> Result<Self> {
        Self::new(vec![x; c])
    }

    pub fn c(&self) -> usize {
        self.x.len()
    }

    /// Admission probability with `j` units available, `1 <= j <= c`.
    #[inline]
    pub fn at(&self, j: usize) -> f64 {
        self.x[j - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    /// `pi[j]` is the long-run fraction of time with `j` units available.
    pub pi: Vec<f64>,
    pub reward: f64,
    pub loss: f64,
    pub pi0: f64,
}

/// Fluid upper bound `lambda g(min(1, x*))`.
pub fn fluid_value(inst: &ProblemInstance) -> f64 {
    if !inst.is_scarce() {
        log::warn!("fluid value at x* = {} >= 1", inst.xstar());
    }
    inst.lambda * inst.g.value(inst.fluid_admission())
}

/// Unnormalized weights `w_c = 1, w_{j-1} = w_j lambda d x_j / (c - j + 1)`,
/// rescaled to stay finite. States below a zero admission probability get
/// weight zero.
fn stationary_weights(c: usize, load: f64, x: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut w = vec![0.0; c + 1];
    let mut shifts = vec![0u32; c + 1];
    let mut cur = 1.0;
    let mut shift = 0u32;
    w[c] = cur;
    for j in (1..=c).rev() {
        let xj = x(j);
        if xj == 0.0 {
            break;
        }
        cur *= load * xj / (c - j + 1) as f64;
        if cur > RESCALE {
            cur *= RESCALE_INV;
            shift += 1;
        }
        w[j - 1] = cur;
        shifts[j - 1] = shift;
    }
    for (wj, &s) in w.iter_mut().zip(&shifts) {
        let k = shift - s;
        if k > 0 {
            *wj = if k == 1 { *wj * RESCALE_INV } else { 0.0 };
        }
    }
    let total: f64 = w.iter().sum();
    for wj in &mut w {
        *wj /= total;
    }
    w
}

/// Stationary distribution `pi_0..pi_c` for admission probabilities `x`.
pub fn stationary_distribution(c: usize, load: f64, x: &[f64]) -> Vec<f64> {
    stationary_weights(c, load, |j| x[j - 1])
}

/// Long-run reward rate of a policy given by a closure, in O(c) time and
/// O(1) memory. Returns `(reward, pi_0)`.
pub fn reward_rate(inst: &ProblemInstance, x: impl Fn(usize) -> f64, gx: impl Fn(usize) -> f64) -> (f64, f64) {
    let c = inst.c;
    let load = inst.load();
    let mut w = 1.0;
    let mut total = 0.0;
    let mut acc = 0.0;
    for j in (1..=c).rev() {
        total += w;
        acc += w * gx(j);
        let xj = x(j);
        if xj == 0.0 {
            return (inst.lambda * acc / total, 0.0);
        }
        w *= load * xj / (c - j + 1) as f64;
        if w > RESCALE {
            w *= RESCALE_INV;
            total *= RESCALE_INV;
            acc *= RESCALE_INV;
        }
    }
    total += w;
    (inst.lambda * acc / total, w / total)
}

pub fn steady_state(inst: &ProblemInstance, policy: &StockDependentPolicy) -> Result<SteadyState> {
    if policy.c() != inst.c {
        return Err(Error::InvalidPolicy(format!(
            "policy has {} states, instance has c = {}",
            policy.c(),
            inst.c
        )));
    }
    let pi = stationary_distribution(inst.c, inst.load(), policy.as_slice());
    let reward = inst.lambda
        * (1..=inst.c)
            .map(|j| if pi[j] > 0.0 { pi[j] * inst.g.value(policy.at(j)) } else { 0.0 })
            .sum::<f64>();
    let pi0 = pi[0];
    Ok(SteadyState {
        pi,
        reward,
        loss: fluid_value(inst) - reward,
        pi0,
    })
}

/// Erlang-B blocking probability for `c` servers at offered load `a`.
pub fn erlang_stockout(c: usize, a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let mut b = 1.0;
    for n in 1..=c {
        b = a * b / (n as f64 + a * b);
    }
    b
}

pub fn performance_loss(inst: &ProblemInstance, policy: &StockDependentPolicy) -> Result<f64> {
    Ok(steady_state(inst, policy)?.loss)
}

/// `(sum_{1..tau} pi_j / pi_0, sum_{tau+1..c} pi_j / pi_0)`; infinite when
/// `pi_0 = 0`.
pub fn varsigma_stats(ss: &SteadyState, tau: usize) -> (f64, f64) {
    if ss.pi0 <= 0.0 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let c = ss.pi.len() - 1;
    let tau = tau.min(c);
    let low: f64 = ss.pi[1..=tau].iter().sum();
    let high: f64 = ss.pi[tau + 1..].iter().sum();
    (low / ss.pi0, high / ss.pi0)
}

/// Largest relative violation of `pi_j lambda x_j = pi_{j-1} (c - j + 1) / d`.
pub fn balance_residual(inst: &ProblemInstance, policy: &StockDependentPolicy, pi: &[f64]) -> f64 {
    let c = inst.c;
    (1..=c)
        .map(|j| {
            let lhs = pi[j] * inst.lambda * policy.at(j);
            let rhs = pi[j - 1] * (c - j + 1) as f64 / inst.d;
            (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
        })
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn min2x1() -> RewardFunction {
        RewardFunction::min_affine(&[(0.0, 2.0), (1.0, 0.0)]).unwrap()
    }

    #[test]
    fn two_unit_distribution() {
        let inst = ProblemInstance::new(2, 2.0, 1.0, min2x1()).unwrap();
        let ss = steady_state(&inst, &StockDependentPolicy::constant(2, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(ss.pi[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(ss.pi[1], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(ss.pi[2], 0.2, epsilon = 1e-15);
        let (lo, hi) = varsigma_stats(&ss, 1);
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hi, 0.5, epsilon = 1e-14);
        assert_eq!(varsigma_stats(&ss, 2).1, 0.0);
    }

    #[test]
    fn single_unit() {
        let inst = ProblemInstance::new(1, 1.0, 1.0, min2x1()).unwrap();
        let ss = steady_state(&inst, &StockDependentPolicy::constant(1, 1.0).unwrap()).unwrap();
        assert_eq!(ss.pi, vec![0.5, 0.5]);
    }

    #[test]
    fn erlang_small() {
        assert_abs_diff_eq!(erlang_stockout(2, 2.0), 0.4, epsilon = 1e-15);
        assert_eq!(erlang_stockout(1, 0.0), 0.0);
        assert!(erlang_stockout(1, 1e-12) < 1e-11);
    }

    #[test]
    fn zero_admission_zeroes_lower_states() {
        let inst = ProblemInstance::new(10, 12.0, 1.0, min2x1()).unwrap();
        let mut x = vec![0.7; 10];
        x[4] = 0.0;
        let p = StockDependentPolicy::new(x).unwrap();
        let ss = steady_state(&inst, &p).unwrap();
        assert!(ss.pi[..5].iter().all(|&v| v == 0.0));
        assert_abs_diff_eq!(ss.pi.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_policy_loses_everything() {
        let inst = ProblemInstance::new(5, 10.0, 1.0, min2x1()).unwrap();
        let ss = steady_state(&inst, &StockDependentPolicy::constant(5, 0.0).unwrap()).unwrap();
        assert_eq!(ss.reward, 0.0);
        assert_abs_diff_eq!(ss.loss, fluid_value(&inst), epsilon = 1e-12);
    }

    #[test]
    fn large_c_does_not_overflow() {
        let inst = ProblemInstance::new(50_000, 100_000.0, 1.0, min2x1()).unwrap();
        let p = StockDependentPolicy::constant(50_000, 0.9).unwrap();
        let ss = steady_state(&inst, &p).unwrap();
        assert!(ss.pi.iter().all(|v| v.is_finite()));
        let (r, pi0) = reward_rate(&inst, |_| 0.9, |_| inst.g.value(0.9));
        assert_abs_diff_eq!(r, ss.reward, epsilon = 1e-8 * r);
        assert_abs_diff_eq!(pi0, ss.pi0, epsilon = 1e-12);
    }

    #[test]
    fn policy_validation() {
        assert!(StockDependentPolicy::new(vec![]).is_err());
        assert!(StockDependentPolicy::new(vec![1.2]).is_err());
        assert!(ProblemInstance::new(0, 1.0, 1.0, min2x1()).is_err());
        let inst = ProblemInstance::new(3, 1.0, 1.0, min2x1()).unwrap();
        assert!(steady_state(&inst, &StockDependentPolicy::constant(2, 1.0).unwrap()).is_err());
    }
}
