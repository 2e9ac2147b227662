//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use twoprice::lp::{LinearProgram, Relation};
use twoprice::multiclass::CustomerClass;

/// `pi_{c-k} ∝ (lambda d)^k / k! * x_c x_{c-1} ... x_{c-k+1}`.
pub fn factorial_pi(c: usize, lambda: f64, d: f64, x: &[f64]) -> Vec<f64> {
    let mut pi = vec![0.0; c + 1];
    for k in 0..=c {
        let mut fact = 1.0;
        for i in 1..=k {
            fact *= i as f64;
        }
        let prod: f64 = (0..k).map(|i| x[c - i - 1]).product();
        pi[c - k] = (lambda * d).powi(k as i32) / fact * prod;
    }
    let total: f64 = pi.iter().sum();
    pi.iter().map(|p| p / total).collect()
}

/// All constraints as `a x <= b` rows, bounds included.
fn as_le_rows(lp: &LinearProgram) -> Vec<(Vec<f64>, f64)> {
    let n = lp.num_vars();
    let mut rows = Vec::new();
    for con in &lp.constraints {
        let mut a = vec![0.0; n];
        for &(j, v) in &con.coeffs {
            a[j] += v;
        }
        match con.relation {
            Relation::Le => rows.push((a, con.rhs)),
            Relation::Ge => rows.push((a.iter().map(|v| -v).collect(), -con.rhs)),
            Relation::Eq => {
                rows.push((a.iter().map(|v| -v).collect(), -con.rhs));
                rows.push((a, con.rhs));
            }
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e.clone(), -lp.lower[j]));
        if lp.upper[j].is_finite() {
            e[j] = 1.0;
            rows.push((e, lp.upper[j]));
        }
    }
    rows
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    rec(0, m, k, &mut cur, &mut out);
    out
}

/// Best objective over all basic feasible points of a bounded LP.
pub fn vertex_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let rows = as_le_rows(lp);
    let mut best: Option<f64> = None;
    for set in combinations(rows.len(), n) {
        let a = DMatrix::from_fn(n, n, |i, j| rows[set[i]].0[j]);
        let b = DVector::from_fn(n, |i, _| rows[set[i]].1);
        let Some(x) = a.lu().solve(&b) else { continue };
        if x.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let feasible = rows
            .iter()
            .all(|(r, rhs)| r.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-9);
        if feasible {
            let v: f64 = lp.objective.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best
}

pub fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(1..=4);
    let mut lp = LinearProgram::new(n);
    for j in 0..n {
        lp.set_objective(j, rng.gen_range(-2.0..3.0));
        lp.set_bounds(j, 0.0, rng.gen_range(1.0..5.0));
    }
    // rows are built around a feasible point; some are made infeasible
    let x0: Vec<f64> = (0..n).map(|j| rng.gen_range(0.0..lp.upper[j])).collect();
    let infeasible = rng.gen_bool(0.1);
    for i in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.8) {
                coeffs.push((j, rng.gen_range(-3.0..3.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let slack = rng.gen_range(0.0..2.0);
        match rng.gen_range(0..3) {
            0 => lp.add_constraint(coeffs, Relation::Le, act + slack),
            1 => lp.add_constraint(coeffs, Relation::Ge, act - slack),
            _ => lp.add_constraint(coeffs, Relation::Eq, act),
        };
        if infeasible && i == 0 {
            let total: Vec<(usize, f64)> = (0..n).map(|j| (j, 1.0)).collect();
            lp.add_constraint(total, Relation::Ge, lp.upper.iter().sum::<f64>() + 1.0);
        }
    }
    lp
}

/// Best fluid value of two classes sharing `c` units, by scanning the
/// first class's admission probability. The second class takes whatever
/// capacity is left, which is optimal because its `g` is nondecreasing.
pub fn two_class_grid(classes: &[CustomerClass], c: f64, steps: usize) -> f64 {
    let (k1, k2) = (&classes[0], &classes[1]);
    let mut best: f64 = 0.0;
    for i in 0..=steps {
        let x1 = i as f64 / steps as f64;
        let room = c - k1.lambda * k1.d * x1;
        if room < 0.0 {
            break;
        }
        let x2 = (room / (k2.lambda * k2.d)).min(1.0);
        best = best.max(k1.lambda * k1.g.value(x1) + k2.lambda * k2.g.value(x2));
    }
    best
}
