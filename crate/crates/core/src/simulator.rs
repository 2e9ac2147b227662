//! Discrete-event simulation of the admission system.
//!
//! Customers arrive as a Poisson process, are admitted with the probability
//! prescribed for the current stock level and hold one unit for a random
//! duration. Reward accrues at rate `lambda g(x_S)` while the stock is `S`,
//! so the reward of a run is a time integral rather than a sum of sampled
//! payments.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::equilibrium::{steady_state, ProblemInstance, StockDependentPolicy};
use crate::error::{Error, Result};
use crate::par;

/// Usage-duration distribution, parametrized by its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DurationDistribution {
    Exponential { mean: f64 },
    Deterministic { value: f64 },
    Uniform { lo: f64, hi: f64 },
    LogNormal { mean: f64, cv: f64 },
    /// Two-phase mixture of exponentials with balanced means; needs `cv >= 1`.
    HyperExponential { mean: f64, cv: f64 },
}

impl DurationDistribution {
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { mean } | Self::LogNormal { mean, .. } | Self::HyperExponential { mean, .. } => mean,
            Self::Deterministic { value } => value,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Self::Exponential { .. } => "exponential".into(),
            Self::Deterministic { .. } => "deterministic".into(),
            Self::Uniform { .. } => "uniform".into(),
            Self::LogNormal { cv, .. } => format!("lognormal(cv={cv})"),
            Self::HyperExponential { cv, .. } => format!("hyperexponential(cv={cv})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match *self {
            Self::Exponential { mean } | Self::Deterministic { value: mean } if !(mean > 0.0 && mean.is_finite()) => {
                bad(format!("mean {mean} must be positive"))
            }
            Self::Uniform { lo, hi } if !(lo >= 0.0 && hi > lo && hi.is_finite()) => {
                bad(format!("uniform support [{lo}, {hi}] invalid"))
            }
            Self::LogNormal { mean, cv } if !(mean > 0.0 && cv > 0.0 && mean.is_finite() && cv.is_finite()) => {
                bad(format!("lognormal mean {mean}, cv {cv} invalid"))
            }
            Self::HyperExponential { mean, cv } if !(mean > 0.0 && cv >= 1.0 && mean.is_finite() && cv.is_finite()) => {
                bad(format!("hyperexponential needs mean > 0 and cv >= 1, got {mean}, {cv}"))
            }
            _ => Ok(()),
        }
    }

    fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        Ok(match *self {
            Self::Exponential { mean } => Sampler::Exp(Exp::new(1.0 / mean).expect("validated rate")),
            Self::Deterministic { value } => Sampler::Fixed(value),
            Self::Uniform { lo, hi } => Sampler::Uniform(lo, hi),
            Self::LogNormal { mean, cv } => {
                let s2 = (1.0 + cv * cv).ln();
                Sampler::LogNormal(LogNormal::new(mean.ln() - 0.5 * s2, s2.sqrt()).expect("validated sigma"))
            }
            Self::HyperExponential { mean, cv } => {
                let c2 = cv * cv;
                let p = 0.5 * (1.0 + ((c2 - 1.0) / (c2 + 1.0)).sqrt());
                Sampler::Hyper(
                    p,
                    Exp::new(2.0 * p / mean).expect("positive rate"),
                    Exp::new(2.0 * (1.0 - p) / mean).expect("positive rate"),
                )
            }
        })
    }
}

enum Sampler {
    Exp(Exp<f64>),
    Fixed(f64),
    Uniform(f64, f64),
    LogNormal(LogNormal<f64>),
    Hyper(f64, Exp<f64>, Exp<f64>),
}

impl Sampler {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Exp(e) => e.sample(rng),
            Sampler::Fixed(v) => *v,
            Sampler::Uniform(lo, hi) => rng.gen_range(*lo..*hi),
            Sampler::LogNormal(l) => l.sample(rng),
            Sampler::Hyper(p, a, b) => {
                if rng.gen::<f64>() < *p {
                    a.sample(rng)
                } else {
                    b.sample(rng)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub horizon: f64,
    /// Discarded prefix; `None` means 10% of the horizon.
    pub warmup: Option<f64>,
}

impl SimConfig {
    pub fn new(seed: u64, horizon: f64) -> Self {
        Self {
            seed,
            horizon,
            warmup: None,
        }
    }

    pub fn warmup(&self) -> f64 {
        self.warmup.unwrap_or(0.1 * self.horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    pub seed: u64,
    pub horizon: f64,
    pub warmup: f64,
    /// Fraction of post-warmup time spent at each stock level `0..=c`.
    pub empirical_pi: Vec<f64>,
    pub empirical_reward_rate: f64,
    pub events: u64,
    /// Half-width of a 95% batch-means interval for the reward rate.
    pub half_width: f64,
    /// Time-average number of units in use.
    pub mean_busy: f64,
    /// `lambda d sum_j pi_j x_j` from the empirical distribution.
    pub littles_law_busy: f64,
}

impl SimulationRun {
    pub fn littles_law_error(&self) -> f64 {
        (self.mean_busy - self.littles_law_busy).abs() / self.littles_law_busy.max(f64::MIN_POSITIVE)
    }
}

const BATCHES: usize = 20;

/// Stream ids of the three independent random sources.
const ARRIVALS: u64 = 0;
const THINNING: u64 = 1;
const DURATIONS: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn simulate(
    inst: &ProblemInstance,
    policy: &StockDependentPolicy,
    dur: &DurationDistribution,
    cfg: &SimConfig,
) -> Result<SimulationRun> {
    let sampler = dur.sampler()?;
    if (dur.mean() - inst.d).abs() > 1e-9 * inst.d {
        return Err(Error::Precondition(format!(
            "duration mean {} differs from the instance mean {}",
            dur.mean(),
            inst.d
        )));
    }
    if policy.c() != inst.c {
        return Err(Error::DimensionMismatch(format!("policy has {} states, c = {}", policy.c(), inst.c)));
    }
    let warmup = cfg.warmup();
    if !(cfg.horizon > warmup && warmup >= 0.0 && cfg.horizon.is_finite()) {
        return Err(Error::Precondition(format!("horizon {} must exceed warmup {warmup}", cfg.horizon)));
    }

    let c = inst.c;
    let admit: Vec<f64> = (0..=c).map(|j| if j == 0 { 0.0 } else { policy.at(j) }).collect();
    let rate: Vec<f64> = admit.iter().map(|&x| inst.lambda * inst.g.value(x)).collect();
    let arrivals_dist = Exp::new(inst.lambda).map_err(|e| Error::InvalidInstance(e.to_string()))?;
    let mut arrivals = stream(cfg.seed, ARRIVALS);
    let mut thinning = stream(cfg.seed, THINNING);
    let mut durations = stream(cfg.seed, DURATIONS);

    let span = cfg.horizon - warmup;
    let batch_len = span / BATCHES as f64;
    let mut occupancy = vec![0.0; c + 1];
    let mut batch_reward = [0.0; BATCHES];
    let mut departures: BinaryHeap<Reverse<OrderedFloat<f64>>> = BinaryHeap::with_capacity(c);
    let mut stock = c;
    let mut now = 0.0;
    let mut next_arrival = arrivals_dist.sample(&mut arrivals);
    let mut events = 0u64;

    // credit [from, to) at the current stock to the occupancy and batch totals
    let mut accrue = |from: f64, to: f64, stock: usize| {
        let from = from.max(warmup);
        if to <= from {
            return;
        }
        occupancy[stock] += to - from;
        let mut a = from;
        while a < to {
            let b = ((a - warmup) / batch_len).floor() as usize;
            let b = b.min(BATCHES - 1);
            let end = (warmup + (b + 1) as f64 * batch_len).min(to);
            let end = if b == BATCHES - 1 { to } else { end };
            batch_reward[b] += rate[stock] * (end - a);
            a = end;
        }
    };

    loop {
        let next_departure = departures.peek().map_or(f64::INFINITY, |r| r.0 .0);
        let t = next_arrival.min(next_departure);
        if t >= cfg.horizon {
            accrue(now, cfg.horizon, stock);
            break;
        }
        accrue(now, t, stock);
        now = t;
        events += 1;
        if next_departure <= next_arrival {
            departures.pop();
            stock += 1;
        } else {
            if stock > 0 && thinning.gen::<f64>() < admit[stock] {
                stock -= 1;
                departures.push(Reverse(OrderedFloat(now + sampler.draw(&mut durations))));
            }
            next_arrival = now + arrivals_dist.sample(&mut arrivals);
        }
    }

    let total: f64 = occupancy.iter().sum();
    let empirical_pi: Vec<f64> = occupancy.iter().map(|o| o / total).collect();
    let empirical_reward_rate: f64 = empirical_pi.iter().zip(&rate).map(|(p, r)| p * r).sum();
    let means: Vec<f64> = batch_reward.iter().map(|r| r / batch_len).collect();
    let m = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    let t_quantile = StudentsT::new(0.0, 1.0, (BATCHES - 1) as f64)
        .expect("valid degrees of freedom")
        .inverse_cdf(0.975);
    let half_width = t_quantile * (var / BATCHES as f64).sqrt();
    let mean_busy: f64 = empirical_pi.iter().enumerate().map(|(j, p)| p * (c - j) as f64).sum();
    let littles_law_busy: f64 =
        inst.lambda * inst.d * empirical_pi.iter().zip(&admit).map(|(p, x)| p * x).sum::<f64>();
    Ok(SimulationRun {
        seed: cfg.seed,
        horizon: cfg.horizon,
        warmup,
        empirical_pi,
        empirical_reward_rate,
        events,
        half_width,
        mean_busy,
        littles_law_busy,
    })
}

/// Independent replications with seeds `cfg.seed + i`, run concurrently.
pub fn simulate_replications(
    inst: &ProblemInstance,
    policy: &StockDependentPolicy,
    dur: &DurationDistribution,
    cfg: &SimConfig,
    replications: usize,
) -> Result<Vec<SimulationRun>> {
    par::map_range(replications, |i| {
        let cfg = SimConfig {
            seed: cfg.seed.wrapping_add(i as u64),
            ..*cfg
        };
        simulate(inst, policy, dur, &cfg)
    })
    .into_iter()
    .collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InsensitivityRow {
    pub distribution: String,
    pub tv: f64,
    pub reward_rel_error: f64,
    pub littles_law_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InsensitivityReport {
    pub analytic_reward: f64,
    pub analytic_pi: Vec<f64>,
    pub rows: Vec<InsensitivityRow>,
    /// One run per distribution, in input order.
    #[serde(skip)]
    pub runs: Vec<SimulationRun>,
    pub pass: bool,
}

pub const TV_TOLERANCE: f64 = 0.02;
pub const REWARD_TOLERANCE: f64 = 0.01;

/// Simulate under each duration distribution and compare with the analytic
/// steady state, which depends on the durations only through their mean.
pub fn insensitivity_test(
    inst: &ProblemInstance,
    policy: &StockDependentPolicy,
    durations: &[DurationDistribution],
    cfg: &SimConfig,
) -> Result<InsensitivityReport> {
    for dur in durations {
        if (dur.mean() - inst.d).abs() > 1e-9 * inst.d {
            return Err(Error::Precondition(format!(
                "{} has mean {}, instance mean is {}",
                dur.name(),
                dur.mean(),
                inst.d
            )));
        }
    }
    let analytic = steady_state(inst, policy)?;
    let runs: Vec<Result<SimulationRun>> = par::map(durations, |dur| simulate(inst, policy, dur, cfg));
    let runs: Vec<SimulationRun> = runs.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(durations.len());
    for (dur, run) in durations.iter().zip(&runs) {
        let tv = total_variation(&run.empirical_pi, &analytic.pi);
        let reward_rel_error = if analytic.reward > 0.0 {
            (run.empirical_reward_rate - analytic.reward).abs() / analytic.reward
        } else {
            run.empirical_reward_rate.abs()
        };
        rows.push(InsensitivityRow {
            distribution: dur.name(),
            tv,
            reward_rel_error,
            littles_law_error: run.littles_law_error(),
            pass: tv <= TV_TOLERANCE && reward_rel_error <= REWARD_TOLERANCE,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(InsensitivityReport {
        analytic_reward: analytic.reward,
        analytic_pi: analytic.pi,
        rows,
        runs,
        pass,
    })
}
