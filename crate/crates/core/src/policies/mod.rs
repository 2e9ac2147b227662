//! Policy classes and their optimizers.
//!
//! Static policies use one admission probability in every state, two-price
//! policies switch between a low and a high probability at a stock threshold,
//! and general stock-dependent policies may use a different probability in
//! every state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{fluid_value, steady_state, ProblemInstance, StockDependentPolicy};
use crate::error::{Error, Result};

mod nelder_mead;
mod static_opt;
mod stock_dependent;
mod two_price;

pub use static_opt::{optimize_static, static_reward};
pub use stock_dependent::{
    concavity_selfcheck, gain_search, inner_dual, lpsd_objective, lpsd_program, optimize_stock_dependent,
    optimize_stock_dependent_with, solve_lpsd, structured_dual_violation, structured_lp_solution, GainSearch,
    LpsdMethod, LpsdSolve, SelfCheckReport, StockDependentOptions,
};
pub use two_price::{
    optimize_two_price, optimize_two_price_with, theoretical_delta, two_price_reward, two_price_theoretical,
    TwoPriceOptions,
};

/// Admit with probability `x_l` while at most `tau` units are available
/// and with `x_h` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTwoPrice")]
pub struct TwoPricePolicy {
    pub x_l: f64,
    pub x_h: f64,
    pub tau: usize,
}

#[derive(Deserialize)]
struct RawTwoPrice {
    x_l: f64,
    x_h: f64,
    tau: usize,
}

impl TryFrom<RawTwoPrice> for TwoPricePolicy {
    type Error = Error;

    fn try_from(raw: RawTwoPrice) -> Result<Self> {
        Self::new(raw.x_l, raw.x_h, raw.tau)
    }
}

impl TwoPricePolicy {
    pub fn new(x_l: f64, x_h: f64, tau: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&x_l) || !(0.0..=1.0).contains(&x_h) {
            return Err(Error::InvalidPolicy(format!("admission probabilities ({x_l}, {x_h}) outside [0, 1]")));
        }
        if x_l > x_h {
            return Err(Error::InvalidPolicy(format!("x_l = {x_l} > x_h = {x_h}")));
        }
        if tau == 0 {
            return Err(Error::InvalidPolicy("tau must be at least 1".into()));
        }
        Ok(Self { x_l, x_h, tau })
    }

    pub fn expand(&self, c: usize) -> StockDependentPolicy {
        let x = (1..=c).map(|j| if j <= self.tau { self.x_l } else { self.x_h }).collect();
        StockDependentPolicy::new(x).expect("probabilities validated on construction")
    }
}

/// Any admission policy, in its most compact form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Policy {
    Static { x: f64 },
    TwoPrice(TwoPricePolicy),
    StockDependent(StockDependentPolicy),
}

impl Policy {
    pub fn expand(&self, c: usize) -> Result<StockDependentPolicy> {
        match self {
            Policy::Static { x } => StockDependentPolicy::constant(c, *x),
            Policy::TwoPrice(p) => {
                if p.tau > c {
                    return Err(Error::InvalidPolicy(format!("tau = {} exceeds c = {c}", p.tau)));
                }
                Ok(p.expand(c))
            }
            Policy::StockDependent(p) => {
                if p.c() != c {
                    return Err(Error::InvalidPolicy(format!("policy has {} states, c = {c}", p.c())));
                }
                Ok(p.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fluid,
    StaticOpt,
    TwoPriceTheory,
    TwoPriceOpt,
    StockDependentOpt,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Fluid => "fluid",
            Method::StaticOpt => "static_opt",
            Method::TwoPriceTheory => "two_price",
            Method::TwoPriceOpt => "two_price_opt",
            Method::StockDependentOpt => "sd_opt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationReport {
    pub policy: Policy,
    pub reward: f64,
    pub loss: f64,
    pub method: Method,
    /// Interval known to contain the optimum of the policy class.
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub diagnostics: BTreeMap<String, f64>,
}

/// Static policy admitting with probability `min(1, x*)`.
pub fn fluid_policy(inst: &ProblemInstance) -> StockDependentPolicy {
    StockDependentPolicy::constant(inst.c, inst.fluid_admission()).expect("fluid admission lies in [0, 1]")
}

pub fn evaluate_fluid(inst: &ProblemInstance) -> OptimizationReport {
    let x = inst.fluid_admission();
    let ss = steady_state(inst, &fluid_policy(inst)).expect("fluid policy has c states");
    let flu = fluid_value(inst);
    OptimizationReport {
        policy: Policy::Static { x },
        reward: ss.reward,
        loss: ss.loss,
        method: Method::Fluid,
        bracket: (ss.reward, ss.reward),
        iterations: 0,
        diagnostics: BTreeMap::from([("pi0".to_string(), ss.pi0), ("flu".to_string(), flu)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::RewardFunction;

    #[test]
    fn fluid_policy_is_xstar() {
        let g = RewardFunction::min_affine(&[(0.0, 2.0), (1.0, 0.0)]).unwrap();
        let inst = ProblemInstance::new(2, 4.0, 1.0, g).unwrap();
        assert_eq!(fluid_policy(&inst).as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn two_price_expansion_and_json() {
        let p = TwoPricePolicy::new(0.2, 0.6, 2).unwrap();
        assert_eq!(p.expand(4).as_slice(), &[0.2, 0.2, 0.6, 0.6]);
        let json = serde_json::to_string(&Policy::TwoPrice(p)).unwrap();
        assert_eq!(json, r#"{"type":"two_price","x_l":0.2,"x_h":0.6,"tau":2}"#);
        let back: Policy = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Policy::TwoPrice(p));
        assert!(TwoPricePolicy::new(0.7, 0.6, 2).is_err());
        assert!(TwoPricePolicy::new(0.2, 0.6, 0).is_err());
        assert!(serde_json::from_str::<Policy>(r#"{"type":"two_price","x_l":0.9,"x_h":0.6,"tau":2}"#).is_err());
        assert!(serde_json::from_str::<Policy>(r#"{"type":"stock_dependent","x":[0.5,1.5]}"#).is_err());
    }
}
