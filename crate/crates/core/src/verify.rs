//! Residual measurement for a candidate solution: how well `f` satisfies
//! `f(F(x, y)) = H[f(x), f(y), x, y]` on the boundary set Γ (the edges
//! `{a} x [a, b]` and `[a, b] x {b}`) and on the full square.
//!
//! The grid figures (`sup`, `mean`) evaluate `f` by interpolation, so they
//! mix equation error with interpolation error. For Γ the report carries a
//! third figure, `sup_at_samples`: the residual of the propagation
//! identities evaluated purely on the sample table, where interpolation
//! error is zero. A consistent table with a small `sup_at_samples` and a
//! large square `sup` is the signature of an overdetermined instance — the
//! boundary data pins a candidate down, but nothing satisfies the equation
//! on the whole square.

use serde::Serialize;
use thiserror::Error;

use crate::dynsys::{DynError, DynSystem};
use crate::exprdsl::{eval, ExprAst, ExprError};
use crate::parallel::{max_with_argmax, mean, try_map_values};
use crate::solver::{
    solve, MapOrder, Problem, SampleTable, SolveError, SolveOptions, SolveStatus,
    TabulatedFunction,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("evaluation failed at ({x}, {y}): {source}")]
    EvalAt {
        x: f64,
        y: f64,
        source: ExprError,
    },

    #[error("cannot cross-validate: run ended with status {status:?}")]
    CannotCrossValidate { status: SolveStatus },

    #[error(transparent)]
    Solve(#[from] SolveError),

    #[error(transparent)]
    Dyn(#[from] DynError),

    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualDomain {
    Gamma,
    Square,
}

/// Equation residual statistics over one domain.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub domain: ResidualDomain,
    pub grid_n: usize,
    pub sup: f64,
    pub mean: f64,
    pub argmax: [f64; 2],
    /// Residual of the propagation identities over the sample table only
    /// (zero interpolation error). Present when a sample table was given;
    /// `None` for plain grid scans and for the square domain.
    pub sup_at_samples: Option<f64>,
}

fn residual_at(
    f: &TabulatedFunction,
    problem: &Problem,
    x: f64,
    y: f64,
) -> Result<f64, VerifyError> {
    let map_err = |source: ExprError| VerifyError::EvalAt { x, y, source };
    let fxy = eval(&problem.f, &[("x", x), ("y", y)]).map_err(map_err)?;
    let lhs = f.eval_at(fxy);
    let rhs = eval(
        &problem.h,
        &[("u", f.eval_at(x)), ("v", f.eval_at(y)), ("x", x), ("y", y)],
    )
    .map_err(map_err)?;
    Ok((lhs - rhs).abs())
}

/// Residual scan over Γ with the `t`-grid of `grid_n + 1` uniform points:
/// the points `(a, t)` and `(t, b)`. The shared corner `(a, b)` is counted
/// once.
pub fn residual_on_gamma(
    f: &TabulatedFunction,
    problem: &Problem,
    grid_n: usize,
) -> Result<ResidualReport, VerifyError> {
    residual_on_gamma_with_samples(f, problem, grid_n, None)
}

/// [`residual_on_gamma`], additionally reporting `sup_at_samples` from the
/// propagation table.
pub fn residual_on_gamma_with_samples(
    f: &TabulatedFunction,
    problem: &Problem,
    grid_n: usize,
    samples: Option<&SampleTable>,
) -> Result<ResidualReport, VerifyError> {
    let interval = problem.interval;
    let n = grid_n;
    // Index k in [0, n] is (a, t_k); k in [n + 1, 2n] is (t_{k - n}, b).
    let point_of = |k: usize| -> (f64, f64) {
        if k <= n {
            (interval.a, interval.grid_point(k, n))
        } else {
            (interval.grid_point(k - n, n), interval.b)
        }
    };
    let values = try_map_values(2 * n + 1, |k| -> Result<f64, VerifyError> {
        let (x, y) = point_of(k);
        residual_at(f, problem, x, y)
    })?;
    let (sup, arg) = max_with_argmax(&values);
    let (ax, ay) = point_of(arg);

    let sup_at_samples = match samples {
        Some(table) => Some(table_consistency(problem, table)?),
        None => None,
    };

    Ok(ResidualReport {
        domain: ResidualDomain::Gamma,
        grid_n,
        sup,
        mean: mean(&values),
        argmax: [ax, ay],
        sup_at_samples,
    })
}

/// Worst violation of the two propagation identities across the sample
/// table, with every function value read off the table itself.
///
/// For each sample `z`, identity `i` relates the sample nearest to
/// `delta_i(z)` to `H` of the sample values. Identities whose target point
/// was never materialized (the children of the final frontier) and
/// fixed-point self-identities (`delta_i(z) = z`, which derive no new
/// value) are skipped; the latter compare the boundary data with itself and
/// their violation is visible to the grid scans instead.
fn table_consistency(problem: &Problem, table: &SampleTable) -> Result<f64, VerifyError> {
    let sys = DynSystem::new(problem.f.clone(), problem.interval)?;
    let interval = problem.interval;
    let (av, bv) = (problem.boundary_a, problem.boundary_b);
    let mut worst = 0.0f64;
    for sample in &table.samples {
        let z = sample.point;
        for map in [1u8, 2u8] {
            let target = sys.apply(map, z)?;
            if (target - z).abs() <= table.delta_dup {
                continue;
            }
            let (nearest, dist) = table.nearest(target);
            if dist > table.delta_dup {
                continue;
            }
            let env = match map {
                1 => [("u", av), ("v", sample.value), ("x", interval.a), ("y", z)],
                _ => [("u", sample.value), ("v", bv), ("x", z), ("y", interval.b)],
            };
            let expected = eval(&problem.h, &env).map_err(|source| VerifyError::EvalAt {
                x: if map == 1 { interval.a } else { z },
                y: if map == 1 { z } else { interval.b },
                source,
            })?;
            worst = worst.max((nearest.value - expected).abs());
        }
    }
    Ok(worst)
}

/// Residual scan over the full `(grid_n + 1)^2` grid on the square.
pub fn residual_on_square(
    f: &TabulatedFunction,
    problem: &Problem,
    grid_n: usize,
) -> Result<ResidualReport, VerifyError> {
    let interval = problem.interval;
    let n = grid_n;
    let values = try_map_values((n + 1) * (n + 1), |k| -> Result<f64, VerifyError> {
        let x = interval.grid_point(k / (n + 1), n);
        let y = interval.grid_point(k % (n + 1), n);
        residual_at(f, problem, x, y)
    })?;
    let (sup, arg) = max_with_argmax(&values);
    Ok(ResidualReport {
        domain: ResidualDomain::Square,
        grid_n,
        sup,
        mean: mean(&values),
        argmax: [
            interval.grid_point(arg / (n + 1), n),
            interval.grid_point(arg % (n + 1), n),
        ],
        sup_at_samples: None,
    })
}

/// Sup distance between the tabulated solution and a closed form `g(z)`,
/// over the tabulation grid. Returns `(sup_err, argmax)`.
pub fn compare_closed_form(
    f: &TabulatedFunction,
    g: &ExprAst,
) -> Result<(f64, f64), VerifyError> {
    let n = f.grid_n();
    let errs = try_map_values(n + 1, |i| -> Result<f64, VerifyError> {
        let z = f.grid_point(i);
        let gv = eval(g, &[("z", z)]).map_err(|source| VerifyError::EvalAt {
            x: z,
            y: f64::NAN,
            source,
        })?;
        Ok((f.values()[i] - gv).abs())
    })?;
    let (sup, arg) = max_with_argmax(&errs);
    Ok((sup, f.grid_point(arg)))
}

/// How far the candidate misses the boundary data: `(|f(a) - A|, |f(b) - B|)`.
pub fn boundary_mismatch(f: &TabulatedFunction, problem: &Problem) -> (f64, f64) {
    let at_a = (f.eval_at(problem.interval.a) - problem.boundary_a).abs();
    let at_b = (f.eval_at(problem.interval.b) - problem.boundary_b).abs();
    (at_a, at_b)
}

/// Solve twice with opposite child orderings (map-1-first vs map-2-first)
/// and return the sup grid difference of the two reconstructions. Small
/// agreement is what uniqueness predicts for a well-posed instance.
pub fn cross_validate(problem: &Problem, options: &SolveOptions) -> Result<f64, VerifyError> {
    let mut first = *options;
    first.map_order = MapOrder::Map1First;
    let mut second = *options;
    second.map_order = MapOrder::Map2First;

    let r1 = solve(problem, &first)?;
    let r2 = solve(problem, &second)?;
    for r in [&r1, &r2] {
        if r.status == SolveStatus::HypothesesFailed {
            return Err(VerifyError::CannotCrossValidate { status: r.status });
        }
    }
    let f1 = r1.solution.as_ref().expect("solution present");
    let f2 = r2.solution.as_ref().expect("solution present");
    let mut worst = 0.0f64;
    for (a, b) in f1.values().iter().zip(f2.values().iter()) {
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::Interval;
    use crate::exprdsl::parse;

    fn jensen() -> Problem {
        Problem::from_sources(
            "jensen-half",
            "0.5*x + 0.5*y",
            "0.5*u + 0.5*v",
            0.0,
            1.0,
            0.0,
            1.0,
        )
        .unwrap()
    }

    fn perturbed() -> Problem {
        Problem::from_sources(
            "perturbed",
            "0.5*x + 0.5*y",
            "0.5*u + 0.5*v + x*y",
            0.0,
            1.0,
            0.0,
            0.0,
        )
        .unwrap()
    }

    fn identity_on(interval: Interval, grid_n: usize) -> TabulatedFunction {
        let g = parse("z", &["z"]).unwrap();
        TabulatedFunction::from_closed_form(&g, interval, grid_n).unwrap()
    }

    #[test]
    fn exact_solution_has_vanishing_residuals() {
        let problem = jensen();
        let f = identity_on(problem.interval, 200);
        let gamma = residual_on_gamma(&f, &problem, 200).unwrap();
        let square = residual_on_square(&f, &problem, 200).unwrap();
        assert!(gamma.sup <= 1e-15, "gamma sup {}", gamma.sup);
        assert!(square.sup <= 1e-15, "square sup {}", square.sup);
        assert!(gamma.mean <= gamma.sup);
    }

    #[test]
    fn constant_zero_solves_jensen_but_misses_the_boundary() {
        let problem = jensen();
        let g = parse("0", &["z"]).unwrap();
        let f = TabulatedFunction::from_closed_form(&g, problem.interval, 100).unwrap();
        let gamma = residual_on_gamma(&f, &problem, 100).unwrap();
        assert_eq!(gamma.sup, 0.0);
        let (at_a, at_b) = boundary_mismatch(&f, &problem);
        assert_eq!(at_a, 0.0);
        assert_eq!(at_b, 1.0);
    }

    #[test]
    fn gamma_residual_never_exceeds_square_residual() {
        let problem = perturbed();
        let opts = SolveOptions {
            epsilon: 1e-3,
            grid_n: 150,
            ..SolveOptions::for_problem(&problem)
        };
        let report = solve(&problem, &opts).unwrap();
        let f = report.solution.as_ref().unwrap();
        let gamma = residual_on_gamma(f, &problem, 150).unwrap();
        let square = residual_on_square(f, &problem, 150).unwrap();
        assert!(gamma.sup <= square.sup);
    }

    #[test]
    fn square_sup_is_monotone_under_grid_nesting() {
        let problem = perturbed();
        let opts = SolveOptions {
            epsilon: 1e-3,
            grid_n: 200,
            ..SolveOptions::for_problem(&problem)
        };
        let report = solve(&problem, &opts).unwrap();
        let f = report.solution.as_ref().unwrap();
        let coarse = residual_on_square(f, &problem, 100).unwrap();
        let fine = residual_on_square(f, &problem, 200).unwrap();
        assert!(fine.sup >= coarse.sup);
    }

    #[test]
    fn perturbed_square_residual_is_large() {
        let problem = perturbed();
        let opts = SolveOptions {
            epsilon: 1e-3,
            grid_n: 200,
            ..SolveOptions::for_problem(&problem)
        };
        let report = solve(&problem, &opts).unwrap();
        let f = report.solution.as_ref().unwrap();
        let square = residual_on_square(f, &problem, 200).unwrap();
        assert!(square.sup >= 0.1, "square sup {}", square.sup);
        // The table itself is consistent on the boundary set.
        let gamma = residual_on_gamma_with_samples(f, &problem, 200, report.samples.as_ref())
            .unwrap();
        assert!(gamma.sup_at_samples.unwrap() <= 1e-6);
    }

    #[test]
    fn compare_closed_form_on_a_straight_line() {
        let table =
            crate::solver::SampleTable::from_pairs(&[(0.0, 0.0), (1.0, 1.0)], 1e-9).unwrap();
        let f = crate::solver::reconstruct(&table, 2).unwrap();
        let line = parse("z", &["z"]).unwrap();
        let (sup, _) = compare_closed_form(&f, &line).unwrap();
        assert_eq!(sup, 0.0);

        let parabola = parse("z^2", &["z"]).unwrap();
        let (sup, argmax) = compare_closed_form(&f, &parabola).unwrap();
        assert_eq!(sup, 0.25);
        assert_eq!(argmax, 0.5);
    }

    #[test]
    fn cross_validation_agrees_on_jensen() {
        let problem = jensen();
        let opts = SolveOptions {
            epsilon: 1e-3,
            grid_n: 300,
            ..SolveOptions::for_problem(&problem)
        };
        let diff = cross_validate(&problem, &opts).unwrap();
        assert!(diff <= 1e-12, "diff {diff}");
    }

    #[test]
    fn cross_validation_agrees_on_weighted_jensen() {
        let problem = Problem::from_sources(
            "weighted",
            "(1/3)*x + (2/3)*y",
            "(1/3)*u + (2/3)*v",
            0.0,
            1.0,
            2.0,
            5.0,
        )
        .unwrap();
        let opts = SolveOptions {
            epsilon: 1e-3,
            grid_n: 300,
            ..SolveOptions::for_problem(&problem)
        };
        let diff = cross_validate(&problem, &opts).unwrap();
        assert!(diff <= 1e-10, "diff {diff}");
    }

    #[test]
    fn cross_validation_refuses_broken_hypotheses() {
        let problem = Problem::from_sources(
            "min-slice",
            "min(x, y)",
            "0.5*u + 0.5*v",
            0.0,
            1.0,
            0.0,
            1.0,
        )
        .unwrap();
        let opts = SolveOptions {
            epsilon: 1e-3,
            grid_n: 100,
            ..SolveOptions::for_problem(&problem)
        };
        assert!(matches!(
            cross_validate(&problem, &opts),
            Err(VerifyError::CannotCrossValidate { .. })
        ));
    }

    #[test]
    fn gamma_argmax_lies_on_gamma() {
        let problem = perturbed();
        let opts = SolveOptions {
            epsilon: 1e-3,
            grid_n: 120,
            ..SolveOptions::for_problem(&problem)
        };
        let report = solve(&problem, &opts).unwrap();
        let gamma = report.gamma.as_ref().unwrap();
        let [x, y] = gamma.argmax;
        let on_left_edge = x == problem.interval.a;
        let on_top_edge = y == problem.interval.b;
        assert!(on_left_edge || on_top_edge);
    }
}
