//! Dual certificates across capacities: feasibility, validity as upper
//! bounds, and the growth of their gaps.

use twoprice::certificates::{
    auto_certificate, build_dual_alpha_inf, build_dual_static, fit_three_piece, DualCertificate, InfCase,
};
use twoprice::experiments::{fit_line, fit_loglog};
use twoprice::policies::{optimize_static, optimize_stock_dependent, optimize_two_price, static_reward};
use twoprice::{fluid_value, ProblemInstance, RewardFunction};

fn three_piece() -> RewardFunction {
    RewardFunction::min_affine(&[(0.0, 3.0), (0.3, 1.5), (1.2, 0.0)]).unwrap()
}

fn assert_valid(cert: &DualCertificate, optimum: f64) {
    let report = cert.residuals.as_ref().expect("built certificates carry residuals");
    assert!(report.pass, "c={}: {report:?}", cert.c);
    if let Some(m) = report.weak_duality_margin {
        assert!(m >= -report.tolerance, "c={}: weak duality margin {m}", cert.c);
    }
    assert!(cert.zeta >= optimum - cert.tolerance(), "c={}: zeta {} < optimum {optimum}", cert.c, cert.zeta);
}

#[test]
fn middle_case_gap_grows_with_log_c() {
    let mut pts = Vec::new();
    for c in [50, 100, 200, 400, 800, 1600] {
        let inst = ProblemInstance::new(c, 2.0 * c as f64, 1.0, three_piece()).unwrap();
        let cert = build_dual_alpha_inf(&inst, 3.0, 1.5, 0.3, 1.2, InfCase::MiddleCase2).unwrap();
        let sd = optimize_stock_dependent(&inst).unwrap();
        assert_valid(&cert, sd.reward);
        // the bound lies below FLU by the gap; the optimum is below the bound
        assert!(fluid_value(&inst) - sd.reward >= cert.gap() - cert.tolerance());
        pts.push(((c as f64).ln(), cert.gap()));
    }
    let fit = fit_line(&pts).unwrap();
    assert!(fit.r2 >= 0.99, "{fit:?}");
    // K = (lambda / c) eta (A - b2) with A = (r1 - r2) x*, eta = b2 / A
    let a: f64 = 1.5 * 0.5;
    let k = 2.0 * (0.3 / a) * (a - 0.3);
    assert!((fit.slope - k.min(1.5)).abs() <= 1e-9, "{fit:?}");
}

#[test]
fn flat_case_gap_decays_geometrically() {
    let mut pts = Vec::new();
    // beyond c = 20 the gap falls under the rounding error of zeta
    for c in (2..=20).step_by(2) {
        let inst = ProblemInstance::new(c, 1.25 * c as f64, 1.0, three_piece()).unwrap();
        let fit = fit_three_piece(&inst).unwrap();
        assert_eq!(fit.case, InfCase::FlatCase3);
        let cert = build_dual_alpha_inf(&inst, fit.r1, fit.r2, fit.b2, fit.b3, fit.case).unwrap();
        let sd = optimize_stock_dependent(&inst).unwrap();
        assert_valid(&cert, sd.reward);
        pts.push((c as f64, (cert.gap() / inst.lambda).ln()));
    }
    let fit = fit_line(&pts).unwrap();
    assert!(fit.r2 >= 0.99, "{fit:?}");
    let rho: f64 = (1.2 - 0.3) / (2.0 * 1.5 * 0.8);
    assert!((fit.slope - rho.ln()).abs() <= 1e-4, "{} vs {}", fit.slope, rho.ln());
}

#[test]
fn scarce_case_certificate_holds() {
    // x* = 0.1 sits on the first piece
    for c in [20, 100, 500] {
        let inst = ProblemInstance::new(c, 10.0 * c as f64, 1.0, three_piece()).unwrap();
        let fit = fit_three_piece(&inst).unwrap();
        assert_eq!(fit.case, InfCase::ScarceCase1);
        let cert = build_dual_alpha_inf(&inst, fit.r1, fit.r2, fit.b2, fit.b3, fit.case).unwrap();
        assert_valid(&cert, optimize_stock_dependent(&inst).unwrap().reward);
    }
}

#[test]
fn smooth_reward_gap_follows_cube_root() {
    let g = RewardFunction::quadratic(2.0, -1.0).unwrap();
    let mut pts = Vec::new();
    for c in [250, 500, 1000, 2000, 4000] {
        let inst = ProblemInstance::new(c, 2.0 * c as f64, 1.0, g.clone()).unwrap();
        let cert = auto_certificate(&inst).unwrap();
        let sd = optimize_stock_dependent(&inst).unwrap();
        // the lower end of the bracket is the reward of an actual policy
        assert_valid(&cert, sd.bracket.0);
        pts.push((c as f64, cert.gap()));
    }
    let fit = fit_loglog(&pts).unwrap();
    assert!((fit.slope - 1.0 / 3.0).abs() <= 0.05, "{fit:?}");
    assert!(fit.r2 >= 0.99, "{fit:?}");
}

#[test]
fn static_certificates_bound_every_static_policy() {
    let g = RewardFunction::min_affine(&[(0.0, 2.0), (1.0, 0.0)]).unwrap();
    let inst = ProblemInstance::new(400, 800.0, 1.0, g).unwrap();
    let mut seen = [false; 2];
    for k in 0..=20 {
        let q = k as f64 / 20.0;
        let cert = build_dual_static(&inst, 1.0, 0.5, q).unwrap();
        assert_valid(&cert, static_reward(&inst, q));
        seen[usize::from(q >= inst.xstar())] = true;
    }
    assert_eq!(seen, [true, true]);
    let best = optimize_static(&inst);
    let cert = build_dual_static(&inst, 1.0, 0.5, best.policy.expand(400).unwrap().at(1)).unwrap();
    assert_valid(&cert, best.reward);
}

#[test]
fn policy_classes_are_sandwiched_by_certificates() {
    let shapes = [
        RewardFunction::min_affine(&[(0.0, 2.0), (1.0, 0.0)]).unwrap(),
        three_piece(),
        RewardFunction::min_affine(&[(0.0, 5.0), (0.5, 2.0), (1.5, 0.5)]).unwrap(),
    ];
    for g in shapes {
        for c in [30, 120] {
            let inst = ProblemInstance::new(c, 2.0 * c as f64, 1.0, g.clone()).unwrap();
            let flu = fluid_value(&inst);
            let fluid = twoprice::policies::evaluate_fluid(&inst).reward;
            let st = optimize_static(&inst).reward;
            let tp = optimize_two_price(&inst).reward;
            let sd = optimize_stock_dependent(&inst).unwrap().reward;
            let cert = auto_certificate(&inst).unwrap();
            let tol = 1e-9 * flu;
            assert!(fluid <= st + tol && st <= tp + tol && tp <= sd + tol, "c={c}: {fluid} {st} {tp} {sd}");
            assert_valid(&cert, sd);
            assert!(cert.zeta <= flu + cert.tolerance());
        }
    }
}
