use serde::Serialize;

use crate::equilibrium::ProblemInstance;
use crate::error::{Error, Result};
use crate::reward::{classify_shape, RewardFunction, ShapeModel};

use super::{scale_of, tightest_zeta, DualCertificate, DualProgram, InfCase};

const MAJORANT_GRID: usize = 2000;

fn check_majorant(g: &RewardFunction, upper: impl Fn(f64) -> f64, what: &str) -> Result<()> {
    for i in 0..=MAJORANT_GRID {
        let x = i as f64 / MAJORANT_GRID as f64;
        let gx = g.value(x);
        if gx > upper(x) + 1e-9 * (1.0 + gx.abs()) {
            return Err(Error::Precondition(format!(
                "{what} does not majorize g at x = {x}: g = {gx}, bound = {}",
                upper(x)
            )));
        }
    }
    Ok(())
}

fn interior_xstar(inst: &ProblemInstance) -> Result<f64> {
    let x = inst.xstar();
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::Precondition(format!("x* = {x} outside (0, 1]")));
    }
    Ok(x)
}

fn finish(mut cert: DualCertificate) -> Result<DualCertificate> {
    cert.verify()?;
    Ok(cert)
}

pub fn build_dual_alpha1(inst: &ProblemInstance, big_r: f64, r: f64) -> Result<DualCertificate> {
    build_dual_alpha1_with(inst, big_r, r, inst.g.value(inst.xstar()))
}

/// Two-slope certificate for the majorant
/// `min{gstar + big_r (x - x*), gstar + r (x - x*)}` of `g`.
pub fn build_dual_alpha1_with(inst: &ProblemInstance, big_r: f64, r: f64, gstar: f64) -> Result<DualCertificate> {
    if !(big_r > r && r > 0.0) {
        return Err(Error::Precondition(format!("need R > r > 0, got R = {big_r}, r = {r}")));
    }
    let c = inst.c as f64;
    if c * (big_r - r) < 1.0 {
        return Err(Error::Precondition(format!("c = {c} below 1/(R - r) = {}", 1.0 / (big_r - r))));
    }
    let x = interior_xstar(inst)?;
    check_majorant(
        &inst.g,
        |y| (gstar + big_r * (y - x)).min(gstar + r * (y - x)),
        "two-slope majorant",
    )?;
    let lambda = inst.lambda;
    let width = (c * (big_r - r)).sqrt();
    let alpha: Vec<f64> = (1..=inst.c).map(|j| lambda * (1.0 - j as f64 / width).max(0.0)).collect();
    let beta = alpha.iter().map(|a| lambda - a).collect();
    let zeta = lambda * gstar - lambda * (r / 2.0).min(1.0) * x * ((big_r - r) / c).sqrt();
    finish(DualCertificate {
        program: DualProgram::Alpha1 { big_r, r, gstar },
        c: inst.c,
        lambda,
        d: inst.d,
        zeta,
        alpha,
        beta,
        gamma: Vec::new(),
        scale: scale_of(inst, inst.g.value(x)),
        residuals: None,
    })
}

/// Tightest `(R, r)` for a `g` kinked at `x*`: `R` is the left derivative and
/// `r` maximizes `min{1, r/2} sqrt(R - r)` over the admissible range.
pub fn fit_two_slope(inst: &ProblemInstance) -> Result<(f64, f64)> {
    let x = interior_xstar(inst)?;
    let (right, left) = inst.g.supergradient(x);
    let big_r = left;
    let lo = right.max(1e-9 * big_r);
    let hi = big_r - 1.0 / inst.c as f64;
    if !(big_r > 0.0) || lo > hi {
        return Err(Error::Precondition(format!(
            "no admissible two-slope fit: supergradients [{right}, {left}], c = {}",
            inst.c
        )));
    }
    let score = |r: f64| (r / 2.0).min(1.0) * (big_r - r).sqrt();
    let r = [lo, hi, 2.0 * big_r / 3.0, 2.0]
        .into_iter()
        .map(|r| r.clamp(lo, hi))
        .max_by(|a, b| score(*a).total_cmp(&score(*b)))
        .expect("nonempty candidate list");
    Ok((big_r, r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinkMajorant {
    /// `min{g'(0) x, L(x), gtilde* + g'(x*) (x - x*)}`.
    pub function: RewardFunction,
    pub big_r: f64,
    pub r: f64,
    pub value_at_xstar: f64,
    pub eta: f64,
}

/// Piecewise-linear majorant with a kink at `x*` for a `g` of shape
/// exponent `alpha` in `(1, inf)`. `L` is the tangent of
/// `h(x) = g(x*) + g'(x*)(x - x*) - k2 |x - x*|^alpha` at `x* - eta`.
pub fn build_kink_majorant(g: &RewardFunction, xstar: f64, shape: &ShapeModel, eta: f64) -> Result<KinkMajorant> {
    let a = shape.alpha;
    if !(a > 1.0 && a.is_finite()) || !(shape.k2 > 0.0) {
        return Err(Error::Precondition(format!("shape alpha = {a}, k2 = {} unsuitable", shape.k2)));
    }
    if !(eta > 0.0 && eta < shape.eps) {
        return Err(Error::Precondition(format!("eta = {eta} outside (0, {})", shape.eps)));
    }
    let gp = shape.gprime_at_xstar;
    if !(gp > 0.0) {
        return Err(Error::Precondition("g'(x*) = 0".into()));
    }
    let k2 = shape.k2;
    let gstar = g.value(xstar);
    let anchor = xstar - eta;
    let h_anchor = gstar - gp * eta - k2 * eta.powf(a);
    let big_r = gp + a * k2 * eta.powf(a - 1.0);
    let value_at_xstar = gstar + (a - 1.0) * k2 * eta.powf(a);
    let slope0 = g.supergradient(0.0).0.max(big_r);
    let function = RewardFunction::min_affine(&[
        (0.0, slope0),
        (h_anchor - big_r * anchor, big_r),
        (value_at_xstar - gp * xstar, gp),
    ])?;
    check_majorant(g, |x| function.value(x), "kink majorant")?;
    Ok(KinkMajorant {
        function,
        big_r,
        r: gp,
        value_at_xstar,
        eta,
    })
}

/// Offset `eta` maximizing the certified gap
/// `lambda min{1, r/2} x* sqrt((R - r)/c) - lambda (alpha - 1) k2 eta^alpha`.
pub fn optimal_kink_offset(inst: &ProblemInstance, shape: &ShapeModel) -> Result<f64> {
    let a = shape.alpha;
    let x = interior_xstar(inst)?;
    let c = inst.c as f64;
    let r = shape.gprime_at_xstar;
    let gap = |eta: f64| {
        let spread = a * shape.k2 * eta.powf(a - 1.0);
        if c * spread < 1.0 {
            return f64::NEG_INFINITY;
        }
        (r / 2.0).min(1.0) * x * (spread / c).sqrt() - (a - 1.0) * shape.k2 * eta.powf(a)
    };
    let n = 400;
    let best = (0..n)
        .map(|i| shape.eps * 0.999 * 10f64.powf(-6.0 * (1.0 - i as f64 / (n - 1) as f64)))
        .max_by(|p, q| gap(*p).total_cmp(&gap(*q)))
        .expect("nonempty grid");
    if !(gap(best) > 0.0) {
        return Err(Error::Precondition("no offset yields a positive certified gap".into()));
    }
    Ok(best)
}

/// Majorant `min{r1 x, r2 x + b2, b3}` and the piece active at `x*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreePieceFit {
    pub r1: f64,
    pub r2: f64,
    pub b2: f64,
    pub b3: f64,
    pub case: InfCase,
}

/// Three-piece majorant built from the pieces of a piecewise-linear `g`
/// adjacent to `x*`. Where `g` itself lacks a piece, a line through the
/// neighbouring breakpoint is used instead.
pub fn fit_three_piece(inst: &ProblemInstance) -> Result<ThreePieceFit> {
    let x = interior_xstar(inst)?;
    let g = &inst.g;
    let pieces = g
        .pieces()
        .ok_or_else(|| Error::Precondition("three-piece fit needs a piecewise-linear g".into()))?;
    let tol = 1e-12 * (1.0 + g.value(x).abs());
    let active: Vec<usize> = (0..pieces.len())
        .filter(|&k| (pieces[k].eval(x) - g.value(x)).abs() <= tol)
        .collect();
    if active.len() != 1 {
        return Err(Error::Precondition(format!("x* = {x} sits on a breakpoint of g")));
    }
    let k = active[0];
    let top = g.value(1.0);
    let r1 = pieces[0].slope;
    let breakpoint = |i: usize| (pieces[i].intercept - pieces[i + 1].intercept) / (pieces[i + 1].slope - pieces[i].slope);
    let fit = if pieces[k].intercept <= tol {
        // x* on the first piece: the middle piece needs a positive slope
        let (r2, b2) = match pieces.get(k + 1) {
            Some(p) if p.slope > 0.0 => (p.slope, p.intercept),
            Some(p) => {
                let xb = breakpoint(k);
                (0.5 * r1, p.intercept - 0.5 * r1 * xb)
            }
            None => return Err(Error::Precondition("g is linear; no scarce-case majorant".into())),
        };
        ThreePieceFit {
            r1,
            r2,
            b2,
            b3: if top > b2 { top } else { b2 + r2 },
            case: InfCase::ScarceCase1,
        }
    } else if pieces[k].slope <= 0.0 {
        let b3 = pieces[k].intercept;
        let prev = &pieces[k - 1];
        let (r2, b2) = if prev.intercept > tol {
            (prev.slope, prev.intercept)
        } else {
            let xb = breakpoint(k - 1);
            let r2 = 0.5 * prev.slope;
            (r2, b3 - r2 * xb)
        };
        ThreePieceFit {
            r1,
            r2,
            b2,
            b3,
            case: InfCase::FlatCase3,
        }
    } else {
        ThreePieceFit {
            r1,
            r2: pieces[k].slope,
            b2: pieces[k].intercept,
            b3: top,
            case: InfCase::MiddleCase2,
        }
    };
    Ok(fit)
}

fn classify_case(x: f64, r1: f64, r2: f64, b2: f64, b3: f64) -> Option<InfCase> {
    let first = b2 / (r1 - r2);
    let last = (b3 - b2) / r2;
    if x < first {
        Some(InfCase::ScarceCase1)
    } else if x > first && x < last {
        Some(InfCase::MiddleCase2)
    } else if x > last {
        Some(InfCase::FlatCase3)
    } else {
        None
    }
}

/// Certificate for a `g` that is affine near `x*`, majorized by
/// `min{r1 x, r2 x + b2, b3}`.
///
/// Case 1 keeps constant multipliers `beta = r1/(2 d b2)` and takes the
/// smallest `zeta` they support. Case 2 targets
/// `zeta = lambda (r2 x* + b2) - min{K, r2/d} ln c` and picks each `alpha_j`
/// as large as the previous state's constraint allows. Case 3 uses the
/// geometric `beta_j` with `zeta = lambda b3 - (b3 - b2) beta_c`.
pub fn build_dual_alpha_inf(
    inst: &ProblemInstance,
    r1: f64,
    r2: f64,
    b2: f64,
    b3: f64,
    case: InfCase,
) -> Result<DualCertificate> {
    if !(r1 > r2 && r2 > 0.0 && b3 > b2 && b2 > 0.0) {
        return Err(Error::Precondition(format!(
            "need r1 > r2 > 0 and b3 > b2 > 0, got ({r1}, {r2}, {b2}, {b3})"
        )));
    }
    let x = interior_xstar(inst)?;
    check_majorant(&inst.g, |y| (r1 * y).min(r2 * y + b2).min(b3), "three-piece majorant")?;
    match classify_case(x, r1, r2, b2, b3) {
        Some(found) if found == case => {}
        found => {
            return Err(Error::Precondition(format!("x* = {x} is in {found:?}, requested {case:?}")));
        }
    }
    let n = inst.c;
    let c = n as f64;
    let lambda = inst.lambda;
    let d = inst.d;
    let program = DualProgram::AlphaInf { r1, r2, b2, b3, case };
    let scale = scale_of(inst, inst.g.value(x));
    let mut cert = DualCertificate {
        program,
        c: n,
        lambda,
        d,
        zeta: 0.0,
        alpha: vec![0.0; n],
        beta: vec![0.0; n],
        gamma: vec![0.0; n],
        scale,
        residuals: None,
    };
    match case {
        InfCase::ScarceCase1 => {
            let b = (r1 / (2.0 * d * b2)).min(lambda);
            cert.beta = vec![b; n];
            cert.alpha = vec![lambda - b; n];
            cert.zeta = tightest_zeta(&cert);
        }
        InfCase::MiddleCase2 => {
            let a = (r1 - r2) * x;
            let eta = b2 / a;
            let k = lambda / c * eta * (a - b2);
            let gap = k.min(r2 / d) * c.ln();
            let cutoff = c.ln() + 1.0;
            let mut alpha = Vec::with_capacity(n);
            let mut next = ((lambda * b2 - gap) / a).min(lambda);
            for j in 1..=n {
                if next < 0.0 {
                    return Err(Error::Precondition(format!(
                        "middle-case multipliers infeasible at state {j} for gap {gap}"
                    )));
                }
                alpha.push(next);
                let jf = j as f64;
                let bound = (next * b2 + r2 * jf / d - gap) / (a * (1.0 - jf / c));
                next = if jf + 1.0 > cutoff && bound >= 0.0 { 0.0 } else { bound.min(lambda) };
            }
            cert.beta = alpha.iter().map(|v| lambda - v).collect();
            cert.alpha = alpha;
            cert.zeta = lambda * (r2 * x + b2) - gap;
        }
        InfCase::FlatCase3 => {
            if b3 > 2.0 * r2 * x {
                return Err(Error::Precondition(format!("flat case needs b3 <= 2 r2 x*, got {b3} > {}", 2.0 * r2 * x)));
            }
            let ratio = (b3 - b2) / (2.0 * r2 * x);
            let mut beta = Vec::with_capacity(n);
            let mut v = lambda * b3 / (2.0 * r2 * x);
            for _ in 0..n {
                beta.push(v);
                v *= ratio;
            }
            cert.gamma = beta.iter().map(|v| lambda - v).collect();
            cert.zeta = lambda * b3 - (b3 - b2) * beta[n - 1];
            cert.beta = beta;
        }
    }
    finish(cert)
}

/// Certificate for the static policy admitting with probability `q`, under
/// the line `r x + b` touching `g` at `x*`.
pub fn build_dual_static(inst: &ProblemInstance, r: f64, b: f64, q: f64) -> Result<DualCertificate> {
    if !(r > 0.0 && b > 0.0) || !(0.0..=1.0).contains(&q) {
        return Err(Error::Precondition(format!("need r, b > 0 and q in [0, 1], got ({r}, {b}, {q})")));
    }
    let x = interior_xstar(inst)?;
    check_majorant(&inst.g, |y| r * y + b, "static majorant")?;
    let gstar = inst.g.value(x);
    if (gstar - (r * x + b)).abs() > 1e-9 * (1.0 + gstar.abs()) {
        return Err(Error::Precondition(format!("line r x + b does not touch g at x* = {x}")));
    }
    let n = inst.c;
    let c = n as f64;
    let sc = c.sqrt();
    let lambda = inst.lambda;
    let (beta, zeta) = if q >= x {
        let beta = (1..=n).map(|j| lambda * b / x * (1.0 - j as f64 / sc).max(0.0)).collect();
        (beta, lambda * gstar - b.min(r * x / 2.0) * lambda / sc)
    } else {
        let floor = sc.floor() / sc;
        let beta = (1..=n).map(|j| lambda * r / 2.0 * (-(j as f64) / sc).max(-floor)).collect();
        (beta, lambda * gstar - lambda * r * x / (4.0 * sc))
    };
    finish(DualCertificate {
        program: DualProgram::Static { r, b, q },
        c: n,
        lambda,
        d: inst.d,
        zeta,
        alpha: Vec::new(),
        beta,
        gamma: Vec::new(),
        scale: scale_of(inst, gstar),
        residuals: None,
    })
}

/// Certificate chosen from the local shape of `g` at `x*`: the fitted
/// two-slope dual at a kink, the three-piece dual when `g` is affine near
/// `x*`, and the kink-majorant dual for curved `g`.
pub fn auto_certificate(inst: &ProblemInstance) -> Result<DualCertificate> {
    let x = interior_xstar(inst)?;
    if x >= 1.0 {
        return Err(Error::Precondition("no certificate without scarcity (x* >= 1)".into()));
    }
    let eps = 0.25 * x.min(1.0 - x);
    let shape = classify_shape(&inst.g, x, eps)?;
    if shape.is_kink() {
        let (big_r, r) = fit_two_slope(inst)?;
        build_dual_alpha1(inst, big_r, r)
    } else if shape.is_locally_linear() {
        let fit = fit_three_piece(inst)?;
        build_dual_alpha_inf(inst, fit.r1, fit.r2, fit.b2, fit.b3, fit.case)
    } else {
        let eta = optimal_kink_offset(inst, &shape)?;
        let m = build_kink_majorant(&inst.g, x, &shape, eta)?;
        build_dual_alpha1_with(inst, m.big_r, m.r, m.value_at_xstar)
    }
}
