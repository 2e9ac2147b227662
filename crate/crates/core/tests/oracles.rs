//! Library results against independent brute-force computations.

mod common;

use common::{factorial_pi, random_lp, two_class_grid, vertex_optimum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twoprice::lp::{self, LpStatus};
use twoprice::multiclass::{solve_fluid_multiclass, CustomerClass, MultiClassInstance};
use twoprice::simulator::{simulate, total_variation, DurationDistribution, SimConfig};
use twoprice::{steady_state, ProblemInstance, RewardFunction, StockDependentPolicy};

fn kinked() -> RewardFunction {
    RewardFunction::min_affine(&[(0.0, 2.0), (1.0, 0.0)]).unwrap()
}

#[test]
fn steady_state_matches_factorial_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for c in 1..=50 {
        for _ in 0..4 {
            let lambda = rng.gen_range(0.2..3.0) * c as f64;
            let d = rng.gen_range(0.5..2.0);
            let x: Vec<f64> = (0..c).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let inst = ProblemInstance::new(c, lambda, d, kinked()).unwrap();
            let ss = steady_state(&inst, &StockDependentPolicy::new(x.clone()).unwrap()).unwrap();
            let oracle = factorial_pi(c, lambda, d, &x);
            for (a, b) in ss.pi.iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-12, "c={c}: {a} vs {b}");
            }
            let reward: f64 = lambda * (1..=c).map(|j| oracle[j] * inst.g.value(x[j - 1])).sum::<f64>();
            assert!((ss.reward - reward).abs() <= 1e-12 * (1.0 + reward));
        }
    }
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut infeasible = 0;
    for k in 0..200 {
        let prog = random_lp(&mut rng);
        let oracle = vertex_optimum(&prog);
        match lp::solve(&prog) {
            Ok(sol) if sol.status == LpStatus::Optimal => {
                let best = oracle.unwrap_or_else(|| panic!("lp {k}: solver optimal, oracle infeasible"));
                assert!(
                    (sol.objective - best).abs() <= 1e-7 * (1.0 + best.abs()),
                    "lp {k}: {} vs {best}",
                    sol.objective
                );
                let res = lp::residuals(&prog, &sol.primal, &sol.duals);
                assert!(res.is_optimal(&prog), "lp {k}: {res:?}");
            }
            Ok(sol) => {
                assert_eq!(sol.status, LpStatus::Infeasible, "lp {k}");
                assert!(oracle.is_none(), "lp {k}: oracle found {oracle:?}");
                infeasible += 1;
            }
            Err(twoprice::Error::Infeasible) => {
                assert!(oracle.is_none(), "lp {k}: oracle found {oracle:?}");
                infeasible += 1;
            }
            Err(e) => panic!("lp {k}: {e}"),
        }
    }
    assert!(infeasible > 0);
}

#[test]
fn multiclass_fluid_matches_grid_search() {
    let classes = vec![
        CustomerClass {
            lambda: 30.0,
            d: 1.0,
            g: RewardFunction::min_affine(&[(0.0, 4.0), (1.2, 1.0), (2.0, 0.0)]).unwrap(),
        },
        CustomerClass {
            lambda: 20.0,
            d: 2.0,
            g: RewardFunction::quadratic(3.0, -1.5).unwrap(),
        },
    ];
    for c in [10.0, 25.0, 40.0, 60.0] {
        let inst = MultiClassInstance::single(classes.clone(), c).unwrap();
        let sol = solve_fluid_multiclass(&inst).unwrap();
        let used: f64 = classes.iter().zip(&sol.x).map(|(k, x)| k.lambda * k.d * x).sum();
        assert!(used <= c * (1.0 + 1e-9));
        let best = two_class_grid(&classes, c, 20_000);
        assert!(sol.value >= best - 1e-9 * best, "c={c}: {} < grid {best}", sol.value);
        assert!((sol.value - best).abs() <= 2e-3 * best, "c={c}: {} vs {best}", sol.value);
        let value = 30.0 * classes[0].g.value(sol.x[0]) + 20.0 * classes[1].g.value(sol.x[1]);
        assert!((value - sol.value).abs() <= 1e-9 * sol.value);
    }
}

#[test]
fn simulated_distribution_matches_analytic() {
    let inst = ProblemInstance::new(20, 30.0, 1.0, kinked()).unwrap();
    let policy = StockDependentPolicy::new((1..=20).map(|j| if j <= 4 { 0.3 } else { 0.8 }).collect()).unwrap();
    let analytic = steady_state(&inst, &policy).unwrap();
    for dur in [
        DurationDistribution::Exponential { mean: 1.0 },
        DurationDistribution::Uniform { lo: 0.5, hi: 1.5 },
    ] {
        let run = simulate(&inst, &policy, &dur, &SimConfig::new(9, 20_000.0)).unwrap();
        let tv = total_variation(&run.empirical_pi, &analytic.pi);
        assert!(tv < 0.02, "{}: tv {tv}", dur.name());
        let err = (run.empirical_reward_rate - analytic.reward).abs();
        assert!(err < 4.0 * run.half_width.max(1e-3 * analytic.reward), "{}: {err}", dur.name());
        assert!(run.littles_law_error() < 0.01);
    }
}
