//! Two-dimensional Nelder-Mead minimizer.

pub struct Outcome {
    pub point: [f64; 2],
    pub value: f64,
    pub evaluations: usize,
}

pub struct Options {
    pub edge: f64,
    pub max_evals: usize,
    pub ftol: f64,
}

pub fn minimize(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], opts: &Options) -> Outcome {
    let evals = std::cell::Cell::new(0usize);
    let eval = |p: [f64; 2]| {
        evals.set(evals.get() + 1);
        f(p)
    };
    let mut simplex = [
        start,
        [start[0] + opts.edge, start[1]],
        [start[0], start[1] + opts.edge],
    ];
    let mut values = [eval(simplex[0]), eval(simplex[1]), eval(simplex[2])];

    loop {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = [simplex[order[0]], simplex[order[1]], simplex[order[2]]];
        values = [values[order[0]], values[order[1]], values[order[2]]];
        let spread = (values[2] - values[0]).abs();
        let size = (simplex[2][0] - simplex[0][0])
            .abs()
            .max((simplex[2][1] - simplex[0][1]).abs())
            .max((simplex[1][0] - simplex[0][0]).abs())
            .max((simplex[1][1] - simplex[0][1]).abs());
        if evals.get() >= opts.max_evals || spread <= opts.ftol * (1.0 + values[0].abs()) && size < 1e-6 || size < 1e-12 {
            break;
        }

        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };
        let reflected = along(-1.0);
        let fr = eval(reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = eval(expanded);
            if fe < fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let (contracted, fc) = if fr < values[2] {
                let p = along(-0.5);
                (p, eval(p))
            } else {
                let p = along(0.5);
                (p, eval(p))
            };
            if fc < values[2].min(fr) {
                simplex[2] = contracted;
                values[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = [
                        simplex[0][0] + 0.5 * (simplex[i][0] - simplex[0][0]),
                        simplex[0][1] + 0.5 * (simplex[i][1] - simplex[0][1]),
                    ];
                    values[i] = eval(simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Outcome {
        point: simplex[best],
        value: values[best],
        evaluations: evals.get(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let out = minimize(
            |p| (p[0] - 0.3).powi(2) + 2.0 * (p[1] + 0.1).powi(2),
            [0.0, 0.0],
            &Options {
                edge: 0.25,
                max_evals: 500,
                ftol: 1e-14,
            },
        );
        assert!((out.point[0] - 0.3).abs() < 1e-5);
        assert!((out.point[1] + 0.1).abs() < 1e-5);
    }
}
