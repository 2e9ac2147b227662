//! Admission control and pricing for a reusable resource.
//!
//! A resource has `c` identical units. Customers arrive as a Poisson process
//! with rate `lambda`, each holds a unit for a random time with mean `d`, and
//! a policy decides the probability of admitting an arrival from the number
//! of units currently available. The expected reward per arrival admitted
//! with probability `x` is `g(x)` for a concave reward function `g`.
//!
//! The crate evaluates such policies exactly in steady state, optimizes the
//! common policy classes (fluid, static, two-price, fully stock-dependent),
//! builds dual certificates that bound the best achievable reward, and
//! simulates the system with general usage-time distributions.

pub mod certificates;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod lp;
pub mod multiclass;
pub mod par;
pub mod policies;
pub mod reward;
pub mod simulator;

pub use equilibrium::{
    erlang_stockout, fluid_value, performance_loss, steady_state, varsigma_stats, ProblemInstance, SteadyState,
    StockDependentPolicy,
};
pub use error::{Error, Result};
pub use reward::{classify_shape, Objective, RewardFunction, ShapeModel, WtpDistribution};
