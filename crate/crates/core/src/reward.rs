//! Reward functions `g` on the admission-probability scale.
//!
//! A reward function maps the probability `x` that an arriving customer is
//! admitted to the expected reward per arrival. All functions here are
//! concave, nondecreasing and satisfy `g(0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EXACT_TOL: f64 = 1e-12;
const GRID_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub intercept: f64,
    pub slope: f64,
}

impl AffinePiece {
    pub fn new(intercept: f64, slope: f64) -> Self {
        Self { intercept, slope }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    MinAffine,
    Quadratic,
    TabulatedConcave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Revenue,
    Welfare,
}

/// Concave nondecreasing reward function with `g(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardFunction {
    kind: RewardKind,
    /// Minimal min-affine representation, sorted by decreasing slope.
    /// Empty for the quadratic kind.
    pieces: Vec<AffinePiece>,
    /// `[c1, c2]` for `g(x) = c1 x + c2 x^2` (quadratic kind only).
    coeffs: Vec<f64>,
    /// The quadratic is held constant beyond this point.
    flat_from: f64,
    /// Interpolation knots (tabulated kind only).
    knots: Vec<(f64, f64)>,
}

impl RewardFunction {
    /// `g(x) = min_k (a_k + b_k x)`. Pieces that are never active on
    /// `[0, 1]` are dropped.
    pub fn min_affine(pieces: &[(f64, f64)]) -> Result<Self> {
        let pieces: Vec<AffinePiece> = pieces.iter().map(|&(a, b)| AffinePiece::new(a, b)).collect();
        let pieces = minimal_envelope(&pieces)?;
        let g = Self {
            kind: RewardKind::MinAffine,
            pieces,
            coeffs: Vec::new(),
            flat_from: 1.0,
            knots: Vec::new(),
        };
        let g0 = g.value(0.0);
        if g0.abs() > EXACT_TOL {
            return Err(Error::InvalidReward(format!("g(0) = {g0}, expected 0")));
        }
        Ok(g)
    }

    /// `g(x) = c1 x + c2 x^2` up to its maximizer on `[0, 1]`, constant after.
    pub fn quadratic(c1: f64, c2: f64) -> Result<Self> {
        if !c1.is_finite() || !c2.is_finite() {
            return Err(Error::NonFinite("quadratic coefficients".into()));
        }
        if c2 > 0.0 {
            return Err(Error::NotConcave(format!("quadratic coefficient {c2} > 0")));
        }
        if c1 < 0.0 {
            return Err(Error::InvalidReward(format!("linear coefficient {c1} < 0")));
        }
        let flat_from = if c2 < 0.0 { (-c1 / (2.0 * c2)).min(1.0) } else { 1.0 };
        Ok(Self {
            kind: RewardKind::Quadratic,
            pieces: Vec::new(),
            coeffs: vec![c1, c2],
            flat_from,
            knots: Vec::new(),
        })
    }

    /// Piecewise-linear interpolation through `(x, y)` knots. The first knot
    /// must be `(0, 0)` and the last must sit at `x = 1`.
    pub fn tabulated(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidReward("need at least two knots".into()));
        }
        if knots.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::NonFinite("tabulated knots".into()));
        }
        let (x0, y0) = knots[0];
        if x0 != 0.0 || y0.abs() > EXACT_TOL {
            return Err(Error::InvalidReward("first knot must be (0, 0)".into()));
        }
        if (knots[knots.len() - 1].0 - 1.0).abs() > EXACT_TOL {
            return Err(Error::InvalidReward("last knot must be at x = 1".into()));
        }
        let mut pieces = Vec::with_capacity(knots.len() - 1);
        let mut prev_slope = f64::INFINITY;
        for w in knots.windows(2) {
            let (xa, ya) = w[0];
            let (xb, yb) = w[1];
            if xb <= xa {
                return Err(Error::InvalidReward("knots must be strictly increasing in x".into()));
            }
            let slope = (yb - ya) / (xb - xa);
            if slope < -EXACT_TOL {
                return Err(Error::InvalidReward(format!("decreasing segment on [{xa}, {xb}]")));
            }
            if slope > prev_slope + EXACT_TOL * (1.0 + prev_slope.abs()) {
                return Err(Error::NotConcave(format!("slope increases at x = {xa}")));
            }
            prev_slope = slope;
            pieces.push(AffinePiece::new(ya - slope * xa, slope.max(0.0)));
        }
        let pieces = minimal_envelope(&pieces)?;
        Ok(Self {
            kind: RewardKind::TabulatedConcave,
            pieces,
            coeffs: Vec::new(),
            flat_from: 1.0,
            knots: knots.to_vec(),
        })
    }

    pub fn kind(&self) -> RewardKind {
        self.kind
    }

    /// Min-affine representation, if the function is piecewise linear.
    pub fn pieces(&self) -> Option<&[AffinePiece]> {
        match self.kind {
            RewardKind::Quadratic => None,
            _ => Some(&self.pieces),
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn is_piecewise_linear(&self) -> bool {
        self.kind != RewardKind::Quadratic
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.kind {
            RewardKind::Quadratic => {
                let t = x.min(self.flat_from);
                t * (self.coeffs[0] + self.coeffs[1] * t)
            }
            _ => self
                .pieces
                .iter()
                .map(|p| p.eval(x))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Interior breakpoints in `(0, 1)` where the slope changes.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            RewardKind::Quadratic => {
                if self.flat_from < 1.0 {
                    vec![self.flat_from]
                } else {
                    Vec::new()
                }
            }
            _ => self
                .pieces
                .windows(2)
                .map(|w| crossing(&w[0], &w[1]))
                .filter(|&x| x > 0.0 && x < 1.0)
                .collect(),
        }
    }

    /// Supergradient interval `[g'_+(x), g'_-(x)]`. At `x = 0` the left
    /// derivative is replaced by the right one and vice versa at `x = 1`.
    pub fn supergradient(&self, x: f64) -> (f64, f64) {
        match self.kind {
            RewardKind::Quadratic => {
                let [c1, c2] = [self.coeffs[0], self.coeffs[1]];
                let slope = |t: f64| c1 + 2.0 * c2 * t;
                if x < self.flat_from {
                    let s = slope(x);
                    (s, s)
                } else if x > self.flat_from || self.flat_from >= 1.0 {
                    if self.flat_from >= 1.0 {
                        let s = slope(1.0);
                        (s, s)
                    } else {
                        (0.0, 0.0)
                    }
                } else {
                    (0.0, slope(self.flat_from))
                }
            }
            _ => {
                let gx = self.value(x);
                let scale = 1.0 + gx.abs();
                let active = self
                    .pieces
                    .iter()
                    .filter(|p| (p.eval(x) - gx).abs() <= EXACT_TOL * scale);
                let (lo, hi) = active.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p.slope), hi.max(p.slope))
                });
                if x <= 0.0 {
                    (lo, lo)
                } else if x >= 1.0 {
                    (hi, hi)
                } else {
                    (lo, hi)
                }
            }
        }
    }

    /// Maximizers of `g(x) - p x` over `[0, 1]`, as the interval `(lo, hi)`.
    pub fn argmax_linear(&self, p: f64) -> (f64, f64) {
        match self.kind {
            RewardKind::Quadratic => {
                let [c1, c2] = [self.coeffs[0], self.coeffs[1]];
                let f = self.flat_from;
                if p < 0.0 {
                    (1.0, 1.0)
                } else if p == 0.0 {
                    (f, 1.0)
                } else if c2 < 0.0 {
                    let x = ((p - c1) / (2.0 * c2)).clamp(0.0, f);
                    (x, x)
                } else if p < c1 {
                    (1.0, 1.0)
                } else if p == c1 {
                    (0.0, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            _ => {
                // Pieces are sorted by decreasing slope and each is active on
                // [start_k, end_k]; g(x) - p x increases while slope > p.
                let n = self.pieces.len();
                let mut lo = None;
                let mut hi = 1.0;
                for k in 0..n {
                    let start = if k == 0 { 0.0 } else { crossing(&self.pieces[k - 1], &self.pieces[k]) };
                    let s = self.pieces[k].slope;
                    if lo.is_none() && s <= p {
                        lo = Some(start.clamp(0.0, 1.0));
                    }
                    if s < p {
                        hi = start.clamp(0.0, 1.0);
                        break;
                    }
                }
                (lo.unwrap_or(1.0), hi)
            }
        }
    }

    /// Largest maximizer of `g(x) - p x` and the maximal value
    /// `phi(p) = max_x g(x) - p x`.
    #[inline]
    pub fn best_response(&self, p: f64) -> (f64, f64) {
        let (_, x) = self.argmax_linear(p);
        (x, self.value(x) - p * x)
    }

    /// Tangent majorant built from tangents at `points` (plus one at 0).
    pub fn tangent_majorant(&self, points: &[f64]) -> Result<Self> {
        let mut pieces = Vec::with_capacity(points.len() + 1);
        let mut push = |t: f64| {
            let t = t.clamp(0.0, 1.0);
            let s = self.supergradient(t).1.max(0.0);
            pieces.push((self.value(t) - s * t, s));
        };
        push(0.0);
        for &t in points {
            push(t);
        }
        let mut g = Self::min_affine(&pieces)?;
        g.kind = RewardKind::MinAffine;
        Ok(g)
    }

    /// Chord minorant interpolating `g` at `points` (plus 0 and 1).
    pub fn chord_minorant(&self, points: &[f64]) -> Result<Self> {
        let mut xs: Vec<f64> = points.iter().copied().filter(|&t| t > 0.0 && t < 1.0).collect();
        xs.push(0.0);
        xs.push(1.0);
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let knots: Vec<(f64, f64)> = xs.iter().map(|&t| (t, self.value(t))).collect();
        Self::tabulated(&knots)
    }

    /// Grid check of `g(0) = 0`, monotonicity and concavity.
    pub fn check_invariants(&self, grid: usize) -> Result<()> {
        let n = grid.max(2);
        let g0 = self.value(0.0);
        if g0.abs() > EXACT_TOL {
            return Err(Error::InvalidReward(format!("g(0) = {g0}")));
        }
        let ys: Vec<f64> = (0..=n).map(|i| self.value(i as f64 / n as f64)).collect();
        for (i, w) in ys.windows(2).enumerate() {
            if w[0] > w[1] + EXACT_TOL {
                return Err(Error::InvalidReward(format!("decreasing near x = {}", i as f64 / n as f64)));
            }
        }
        for (i, w) in ys.windows(3).enumerate() {
            if w[0] - 2.0 * w[1] + w[2] > GRID_TOL {
                return Err(Error::NotConcave(format!("positive second difference near x = {}", (i + 1) as f64 / n as f64)));
            }
        }
        Ok(())
    }

    pub fn max_slope(&self) -> f64 {
        self.supergradient(0.0).1
    }
}

fn crossing(a: &AffinePiece, b: &AffinePiece) -> f64 {
    (b.intercept - a.intercept) / (a.slope - b.slope)
}

/// Lower envelope of lines restricted to `[0, 1]`, sorted by decreasing
/// slope, with pieces that are active only on a null set removed.
fn minimal_envelope(pieces: &[AffinePiece]) -> Result<Vec<AffinePiece>> {
    if pieces.is_empty() {
        return Err(Error::InvalidReward("no affine pieces".into()));
    }
    for p in pieces {
        if !p.intercept.is_finite() || !p.slope.is_finite() {
            return Err(Error::NonFinite("affine pieces".into()));
        }
        if p.slope < 0.0 {
            return Err(Error::InvalidReward(format!("negative slope {}", p.slope)));
        }
    }
    let mut sorted = pieces.to_vec();
    sorted.sort_by(|a, b| b.slope.total_cmp(&a.slope).then(a.intercept.total_cmp(&b.intercept)));
    sorted.dedup_by(|b, a| a.slope == b.slope);

    let mut hull: Vec<AffinePiece> = Vec::with_capacity(sorted.len());
    for p in sorted {
        while hull.len() >= 2 {
            let l1 = hull[hull.len() - 2];
            let l2 = hull[hull.len() - 1];
            if crossing(&l1, &p) <= crossing(&l1, &l2) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    // keep only pieces active on a set of positive length inside [0, 1]
    let n = hull.len();
    let mut kept = Vec::with_capacity(n);
    for k in 0..n {
        let start = if k == 0 { f64::NEG_INFINITY } else { crossing(&hull[k - 1], &hull[k]) };
        let end = if k + 1 == n { f64::INFINITY } else { crossing(&hull[k], &hull[k + 1]) };
        let (s, e) = (start.max(0.0), end.min(1.0));
        if e - s > 1e-15 {
            kept.push(hull[k]);
        }
    }
    if kept.is_empty() {
        // all crossings collapse on a point; the envelope is a single line
        // over [0, 1], namely the one minimal at x = 1/2
        let best = *hull
            .iter()
            .min_by(|a, b| a.eval(0.5).total_cmp(&b.eval(0.5)))
            .expect("nonempty");
        kept.push(best);
    }
    Ok(kept)
}

/// Customer willingness-to-pay distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WtpDistribution {
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    Uniform { lo: f64, hi: f64 },
}

impl WtpDistribution {
    pub fn discrete(pairs: &[(f64, f64)]) -> Result<Self> {
        let d = Self::Discrete {
            values: pairs.iter().map(|p| p.0).collect(),
            probs: pairs.iter().map(|p| p.1).collect(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let d = Self::Uniform { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Discrete { values, probs } => {
                if values.is_empty() {
                    return Err(Error::InvalidDistribution("empty distribution".into()));
                }
                if values.len() != probs.len() {
                    return Err(Error::InvalidDistribution("values and probs differ in length".into()));
                }
                if values.iter().chain(probs).any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("distribution".into()));
                }
                if let Some(v) = values.iter().find(|&&v| v <= 0.0) {
                    return Err(Error::InvalidDistribution(format!("nonpositive value {v}")));
                }
                if let Some(p) = probs.iter().find(|&&p| p <= 0.0) {
                    return Err(Error::InvalidDistribution(format!("nonpositive probability {p}")));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > EXACT_TOL {
                    return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
                }
                let mut sorted = values.clone();
                sorted.sort_by(f64::total_cmp);
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::InvalidDistribution("values are not distinct".into()));
                }
                Ok(())
            }
            Self::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::NonFinite("distribution".into()));
                }
                if *lo < 0.0 {
                    return Err(Error::InvalidDistribution(format!("lo = {lo} < 0")));
                }
                if lo >= hi {
                    return Err(Error::InvalidDistribution(format!("lo = {lo} >= hi = {hi}")));
                }
                Ok(())
            }
        }
    }

    /// Values sorted from highest to lowest with their probabilities.
    fn descending(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Discrete { values, probs } => {
                let mut v: Vec<(f64, f64)> = values.iter().copied().zip(probs.iter().copied()).collect();
                v.sort_by(|a, b| b.0.total_cmp(&a.0));
                v
            }
            Self::Uniform { .. } => Vec::new(),
        }
    }

    /// Highest price at which at least a fraction `x` of customers buy.
    pub fn price_for_quantile(&self, x: f64) -> f64 {
        match self {
            Self::Uniform { lo, hi } => hi - (hi - lo) * x.clamp(0.0, 1.0),
            Self::Discrete { .. } => {
                let mut mass = 0.0;
                let desc = self.descending();
                for &(v, p) in &desc {
                    mass += p;
                    if mass >= x - EXACT_TOL {
                        return v;
                    }
                }
                desc.last().map(|p| p.0).unwrap_or(0.0)
            }
        }
    }

    /// Quantile revenue curve `x * F^{-1}(1 - x)`.
    pub fn quantile_revenue(&self, x: f64) -> f64 {
        x * self.price_for_quantile(x)
    }
}

/// Increasing concave envelope of the quantile revenue curve.
pub fn revenue_from_discrete_wtp(dist: &WtpDistribution) -> Result<RewardFunction> {
    dist.validate()?;
    if !matches!(dist, WtpDistribution::Discrete { .. }) {
        return Err(Error::InvalidDistribution("expected a discrete distribution".into()));
    }
    let mut points = vec![(0.0, 0.0)];
    let mut mass = 0.0;
    for (v, p) in dist.descending() {
        mass += p;
        points.push((mass, mass * v));
    }
    let last = points.len() - 1;
    points[last].0 = 1.0;

    // upper hull by monotone chain (points are sorted by x)
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in &points {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let top = hull
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("nonempty hull");
    let mut pieces: Vec<(f64, f64)> = hull[..=top]
        .windows(2)
        .map(|w| {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            (w[0].1 - slope * w[0].0, slope)
        })
        .collect();
    if hull[top].0 < 1.0 {
        pieces.push((hull[top].1, 0.0));
    }
    // the first piece passes through the origin; pin its intercept exactly
    pieces[0].0 = 0.0;
    RewardFunction::min_affine(&pieces)
}

/// Revenue `x (hi - (hi - lo) x)` up to its maximizer, flat after.
pub fn revenue_from_uniform_wtp(dist: &WtpDistribution) -> Result<RewardFunction> {
    dist.validate()?;
    match *dist {
        WtpDistribution::Uniform { lo, hi } => RewardFunction::quadratic(hi, -(hi - lo)),
        _ => Err(Error::InvalidDistribution("expected a uniform distribution".into())),
    }
}

/// Welfare `g(x) = int_{1-x}^1 F^{-1}(v) dv`.
pub fn welfare_from_wtp(dist: &WtpDistribution) -> Result<RewardFunction> {
    dist.validate()?;
    match *dist {
        WtpDistribution::Uniform { lo, hi } => RewardFunction::quadratic(hi, -(hi - lo) / 2.0),
        WtpDistribution::Discrete { .. } => {
            let mut knots = vec![(0.0, 0.0)];
            let (mut mass, mut area) = (0.0, 0.0);
            for (v, p) in dist.descending() {
                mass += p;
                area += p * v;
                knots.push((mass, area));
            }
            let last = knots.len() - 1;
            knots[last].0 = 1.0;
            let pieces: Vec<(f64, f64)> = knots
                .windows(2)
                .map(|w| {
                    let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                    (w[0].1 - slope * w[0].0, slope)
                })
                .collect();
            let mut pieces = pieces;
            pieces[0].0 = 0.0;
            RewardFunction::min_affine(&pieces)
        }
    }
}

pub fn reward_from_wtp(dist: &WtpDistribution, objective: Objective) -> Result<RewardFunction> {
    match (objective, dist) {
        (Objective::Welfare, _) => welfare_from_wtp(dist),
        (Objective::Revenue, WtpDistribution::Discrete { .. }) => revenue_from_discrete_wtp(dist),
        (Objective::Revenue, WtpDistribution::Uniform { .. }) => revenue_from_uniform_wtp(dist),
    }
}

/// Local shape of `g` around `x*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeModel {
    /// Shape exponent; `f64::INFINITY` when `g` is affine near `x*`.
    pub alpha: f64,
    pub k1: f64,
    pub k2: f64,
    pub eps: f64,
    pub gprime_at_xstar: f64,
    /// `[g'_+(x*), g'_-(x*)]`.
    pub supergradient_set_at_xstar: (f64, f64),
}

impl ShapeModel {
    pub fn is_kink(&self) -> bool {
        self.alpha == 1.0
    }

    pub fn is_locally_linear(&self) -> bool {
        self.alpha.is_infinite()
    }
}

const SHAPE_OFFSETS: usize = 64;

/// Classify the local shape of `g` at `xstar` within radius `eps`.
pub fn classify_shape(g: &RewardFunction, xstar: f64, eps: f64) -> Result<ShapeModel> {
    if !(xstar > 0.0 && xstar < 1.0) {
        return Err(Error::InvalidInstance(format!("x* = {xstar} outside (0, 1)")));
    }
    if !(eps > 0.0 && eps < xstar.min(1.0 - xstar)) {
        return Err(Error::InvalidInstance(format!("eps = {eps} must lie in (0, min(x*, 1 - x*))")));
    }
    let (lo, hi) = g.supergradient(xstar);
    let gstar = g.value(xstar);

    let offsets: Vec<f64> = (0..SHAPE_OFFSETS)
        .map(|i| {
            let t = i as f64 / (SHAPE_OFFSETS - 1) as f64;
            eps * 10f64.powf(-6.0 * (1.0 - t))
        })
        .collect();

    if g.is_piecewise_linear() {
        if hi - lo > EXACT_TOL {
            let gp = 0.5 * (lo + hi);
            let (k1, k2) = residual_ratios(g, xstar, gp, 1.0, &offsets);
            return Ok(ShapeModel {
                alpha: 1.0,
                k1,
                k2,
                eps,
                gprime_at_xstar: gp,
                supergradient_set_at_xstar: (lo, hi),
            });
        }
        return Ok(ShapeModel {
            alpha: f64::INFINITY,
            k1: 0.0,
            k2: 0.0,
            eps,
            gprime_at_xstar: lo,
            supergradient_set_at_xstar: (lo, hi),
        });
    }

    let gp = 0.5 * (lo + hi);
    let scale = 1.0 + gstar.abs();
    let mut samples = Vec::with_capacity(2 * SHAPE_OFFSETS);
    for &h in &offsets {
        for x in [xstar - h, xstar + h] {
            let r = gstar + gp * (x - xstar) - g.value(x);
            samples.push((h, r));
        }
    }
    let max_r = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    if max_r <= 1e-13 * scale {
        return Ok(ShapeModel {
            alpha: f64::INFINITY,
            k1: 0.0,
            k2: 0.0,
            eps,
            gprime_at_xstar: gp,
            supergradient_set_at_xstar: (lo, hi),
        });
    }
    let fit: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.1 > 1e-11 * scale)
        .map(|s| (s.0.ln(), s.1.ln()))
        .collect();
    let mut alpha = if fit.len() >= 2 { regression_slope(&fit) } else { 1.0 };
    for snap in [1.0, 2.0] {
        if (alpha - snap).abs() <= 0.05 {
            alpha = snap;
        }
    }
    let alpha = alpha.max(1.0);
    let (k1, k2) = residual_ratios(g, xstar, gp, alpha, &offsets);
    Ok(ShapeModel {
        alpha,
        k1,
        k2,
        eps,
        gprime_at_xstar: gp,
        supergradient_set_at_xstar: (lo, hi),
    })
}

fn residual_ratios(g: &RewardFunction, xstar: f64, gp: f64, alpha: f64, offsets: &[f64]) -> (f64, f64) {
    let gstar = g.value(xstar);
    let mut k1: f64 = 0.0;
    let mut k2 = f64::INFINITY;
    // the smallest offsets are dominated by roundoff for curved g
    let start = if alpha > 1.0 { offsets.len() / 2 } else { 0 };
    for &h in &offsets[start..] {
        for x in [xstar - h, xstar + h] {
            let r = (gstar + gp * (x - xstar) - g.value(x)) / h.powf(alpha);
            k1 = k1.max(r);
            k2 = k2.min(r);
        }
    }
    let k2 = k2.max(0.0).min(k1);
    (k1, k2)
}

/// Least-squares slope of `y` on `x`.
pub fn regression_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_point() -> WtpDistribution {
        WtpDistribution::discrete(&[(1.0, 0.5), (2.0, 0.5)]).unwrap()
    }

    #[test]
    fn two_point_revenue_is_min_2x_1() {
        let g = revenue_from_discrete_wtp(&two_point()).unwrap();
        assert_eq!(g.pieces().unwrap(), &[AffinePiece::new(0.0, 2.0), AffinePiece::new(1.0, 0.0)]);
    }

    #[test]
    fn three_point_revenue_envelope() {
        let d = WtpDistribution::discrete(&[(3.0, 0.2), (2.0, 0.4), (1.0, 0.4)]).unwrap();
        let g = revenue_from_discrete_wtp(&d).unwrap();
        let p = g.pieces().unwrap();
        assert_eq!(p.len(), 3);
        assert_abs_diff_eq!(p[0].slope, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1].intercept, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1].slope, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2].intercept, 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(2000.0 * g.value(0.5), 2100.0, epsilon = 1e-9);
    }

    #[test]
    fn single_value_is_linear() {
        let d = WtpDistribution::discrete(&[(1.7, 1.0)]).unwrap();
        let g = revenue_from_discrete_wtp(&d).unwrap();
        assert_eq!(g.pieces().unwrap(), &[AffinePiece::new(0.0, 1.7)]);
    }

    #[test]
    fn uniform_revenue_forms() {
        let g = revenue_from_uniform_wtp(&WtpDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(g.value(0.3), 0.3 * 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(g.value(0.8), 0.25, epsilon = 1e-15);
        assert_eq!(g.value(0.0), 0.0);
        let g = revenue_from_uniform_wtp(&WtpDistribution::uniform(1.0, 2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(2000.0 * g.value(0.5), 1500.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.value(1.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn welfare_forms() {
        let g = welfare_from_wtp(&two_point()).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert_abs_diff_eq!(g.value(x), (2.0 * x).min(x + 0.5), epsilon = 1e-12);
        }
        let g = welfare_from_wtp(&WtpDistribution::uniform(1.0, 2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(g.value(0.4), 0.8 - 0.08, epsilon = 1e-15);
        let g = welfare_from_wtp(&WtpDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(g.value(0.4), 0.4 - 0.08, epsilon = 1e-15);
    }

    #[test]
    fn shape_of_kinked_and_linear() {
        let g = revenue_from_discrete_wtp(&two_point()).unwrap();
        let s = classify_shape(&g, 0.5, 0.1).unwrap();
        assert_eq!(s.alpha, 1.0);
        assert_eq!(s.supergradient_set_at_xstar, (0.0, 2.0));
        let s = classify_shape(&g, 0.3, 0.1).unwrap();
        assert!(s.alpha.is_infinite());
        assert_eq!(s.gprime_at_xstar, 2.0);
    }

    #[test]
    fn shape_of_quadratic() {
        let g = RewardFunction::quadratic(2.0, -1.0).unwrap();
        let s = classify_shape(&g, 0.5, 0.1).unwrap();
        assert_eq!(s.alpha, 2.0);
        assert_abs_diff_eq!(s.k1, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.k2, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.gprime_at_xstar, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn shape_rejects_bad_radius() {
        let g = RewardFunction::quadratic(2.0, -1.0).unwrap();
        assert!(classify_shape(&g, 0.5, 0.6).is_err());
        assert!(classify_shape(&g, 1.2, 0.1).is_err());
    }

    #[test]
    fn argmax_linear_min_affine() {
        let g = RewardFunction::min_affine(&[(0.0, 2.0), (1.0, 0.0)]).unwrap();
        assert_eq!(g.argmax_linear(1.0), (0.5, 0.5));
        assert_eq!(g.argmax_linear(2.0), (0.0, 0.5));
        assert_eq!(g.argmax_linear(3.0), (0.0, 0.0));
        assert_eq!(g.argmax_linear(0.0), (0.5, 1.0));
        assert_eq!(g.argmax_linear(-1.0), (1.0, 1.0));
    }

    #[test]
    fn dominated_pieces_are_dropped() {
        let g = RewardFunction::min_affine(&[(0.0, 2.0), (1.0, 0.0), (5.0, 1.0), (0.0, 3.0)]).unwrap();
        assert_eq!(g.pieces().unwrap().len(), 2);
    }

    #[test]
    fn invalid_inputs() {
        assert!(WtpDistribution::discrete(&[]).is_err());
        assert!(WtpDistribution::discrete(&[(0.0, 1.0)]).is_err());
        assert!(WtpDistribution::discrete(&[(1.0, 0.4), (2.0, 0.4)]).is_err());
        assert!(WtpDistribution::uniform(-1.0, 1.0).is_err());
        assert!(RewardFunction::min_affine(&[(0.5, 1.0)]).is_err());
        assert!(RewardFunction::quadratic(1.0, 0.5).is_err());
        assert!(RewardFunction::tabulated(&[(0.0, 0.0), (0.5, 0.1), (1.0, 0.5)]).is_err());
    }

    #[test]
    fn tangent_and_chord_sandwich() {
        let g = RewardFunction::quadratic(2.0, -1.0).unwrap();
        let pts: Vec<f64> = (1..16).map(|i| i as f64 / 16.0).collect();
        let up = g.tangent_majorant(&pts).unwrap();
        let dn = g.chord_minorant(&pts).unwrap();
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            assert!(up.value(x) >= g.value(x) - 1e-12);
            assert!(dn.value(x) <= g.value(x) + 1e-12);
        }
        up.check_invariants(10_000).unwrap();
        dn.check_invariants(10_000).unwrap();
    }
}
