//! Property tests: parser round trips, contraction estimates on affine
//! maps, net formation over random admissible systems, and affine recovery
//! for Jensen-type problems.

use proptest::prelude::*;

use feq_core::dynsys::{
    contraction_modulus, epsilon_net_check, mixing_depth, orbit_expand, DynSystem, Interval,
};
use feq_core::exprdsl::{eval, parse, print, BinOp, Builtin, ExprAst};
use feq_core::solver::{solve, Problem, SolveOptions, SolveStatus};

const FHVARS: &[&str] = &["u", "v", "x", "y"];

fn arb_expr() -> impl Strategy<Value = ExprAst> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|n| ExprAst::Constant(n as f64)),
        (0.0f64..100.0).prop_map(ExprAst::Constant),
        prop::sample::select(FHVARS).prop_map(|name| ExprAst::Variable(name.to_string())),
    ];
    leaf.prop_recursive(4, 48, 3, |inner| {
        let unary_call = (
            prop::sample::select(&[
                Builtin::Sin,
                Builtin::Cos,
                Builtin::Exp,
                Builtin::Ln,
                Builtin::Sqrt,
                Builtin::Abs,
            ][..]),
            inner.clone(),
        )
            .prop_map(|(func, arg)| ExprAst::Call {
                func,
                args: vec![arg],
            });
        let binary_call = (
            prop::sample::select(&[
                Builtin::Min,
                Builtin::Max,
                Builtin::Pow,
                Builtin::Logmean,
            ][..]),
            inner.clone(),
            inner.clone(),
        )
            .prop_map(|(func, a, b)| ExprAst::Call {
                func,
                args: vec![a, b],
            });
        let binary_op = (
            prop::sample::select(&[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][..]),
            inner.clone(),
            inner.clone(),
        )
            .prop_map(|(op, lhs, rhs)| ExprAst::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            });
        prop_oneof![
            inner.prop_map(|c| ExprAst::Negate(Box::new(c))),
            binary_op,
            unary_call,
            binary_call,
        ]
    })
}

proptest! {
    #[test]
    fn print_parse_round_trip(ast in arb_expr()) {
        let text = print(&ast);
        let back = parse(&text, FHVARS).unwrap();
        prop_assert_eq!(back, ast);
    }

    #[test]
    fn tokens_reproduce_printed_source(ast in arb_expr()) {
        let text = print(&ast);
        let tokens = feq_core::exprdsl::tokenize(&text).unwrap();
        let joined: String = tokens.iter().map(|t| t.lexeme.as_str()).collect();
        let stripped: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(joined, stripped);
    }

    #[test]
    fn logmean_is_internal(p in 1e-3f64..1e3, gap in 1e-3f64..1e3) {
        let q = p + gap;
        let ast = parse("logmean(x, y)", &["x", "y"]).unwrap();
        let m = eval(&ast, &[("x", p), ("y", q)]).unwrap();
        prop_assert!(p < m && m < q, "logmean({}, {}) = {}", p, q, m);
    }

    #[test]
    fn affine_modulus_is_the_slope(
        slope in -0.99f64..0.99,
        intercept in 0.0f64..0.5,
        eps in 1e-4f64..0.5,
    ) {
        // Keep the map inside [0, 1]: t * slope + intercept with the ranges
        // above stays in [-0.99, 1.49]; the modulus scan does not care.
        let interval = Interval::new(0.0, 1.0).unwrap();
        let c = contraction_modulus(|t| Ok(slope * t + intercept), interval, eps, 500).unwrap();
        prop_assert!((c - slope.abs()).abs() <= 1e-12, "c = {}, slope = {}", c, slope);
    }

    #[test]
    fn mixing_depth_brackets_epsilon(
        c in 0.01f64..0.95,
        diam in 0.1f64..10.0,
        eps_frac in 1e-6f64..0.99,
    ) {
        let eps = diam * eps_frac;
        let n = mixing_depth(c, diam, eps).unwrap();
        // c^n diam < eps <= c^(n-1) diam, evaluated the same way the
        // iteration does.
        let mut v = diam;
        for _ in 0..n {
            v *= c;
        }
        prop_assert!(v < eps);
        if n > 0 {
            let mut w = diam;
            for _ in 0..n - 1 {
                w *= c;
            }
            prop_assert!(w >= eps);
        }
    }
}

fn weighted_mean_system(alpha: f64) -> DynSystem {
    let src = format!("{alpha}*x + {beta}*y", beta = 1.0 - alpha);
    let f = parse(&src, &["x", "y"]).unwrap();
    DynSystem::new(f, Interval::new(0.0, 1.0).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orbit_expansion_reaches_the_requested_net(
        alpha in 0.15f64..0.85,
        seed in 0.0f64..1.0,
        eps in 0.01f64..0.4,
    ) {
        let sys = weighted_mean_system(alpha);
        let dup = eps * 1e-6;
        let table = orbit_expand(&sys, seed, eps, 200_000, dup).unwrap();
        let points = table.points();
        let (ok, gap) = epsilon_net_check(&points, sys.interval(), eps);
        prop_assert!(ok, "gap {} > eps {}", gap, eps);
        for p in &points {
            prop_assert!(sys.interval().contains(*p));
        }
        // Table invariants: strictly increasing, separated by more than the
        // dedupe radius, and the seed keeps its empty word.
        for w in points.windows(2) {
            prop_assert!(w[1] - w[0] > dup, "{} and {} too close", w[0], w[1]);
        }
        let seed_node = table
            .nodes
            .iter()
            .find(|n| (n.point - seed).abs() <= dup)
            .expect("seed in table");
        prop_assert!(seed_node.word.is_empty());
    }

    #[test]
    fn refining_epsilon_never_loses_coverage(
        alpha in 0.2f64..0.8,
        seed in 0.0f64..1.0,
        eps in 0.05f64..0.4,
    ) {
        // Halving epsilon keeps every coarse point covered: it either
        // survives verbatim or a finer-table point sits within the finer
        // epsilon of it (gap-directed insertion may re-route around
        // already-dense regions).
        let sys = weighted_mean_system(alpha);
        let dup = eps * 1e-8;
        let coarse = orbit_expand(&sys, seed, eps, 200_000, dup).unwrap();
        let fine = orbit_expand(&sys, seed, eps / 2.0, 200_000, dup).unwrap();
        let fine_points = fine.points();
        for p in coarse.points() {
            let idx = fine_points.partition_point(|q| *q < p);
            let mut nearest = f64::INFINITY;
            if idx < fine_points.len() {
                nearest = nearest.min((fine_points[idx] - p).abs());
            }
            if idx > 0 {
                nearest = nearest.min((fine_points[idx - 1] - p).abs());
            }
            prop_assert!(
                nearest <= eps / 2.0,
                "coarse point {} is {} away from the refined table", p, nearest
            );
        }
    }

    #[test]
    fn refining_epsilon_is_a_superset_for_the_midpoint_system(
        k in 2u32..8,
    ) {
        // For the balanced system the pruning never fires and refinement
        // is literal set inclusion.
        let f = parse("0.5*x + 0.5*y", &["x", "y"]).unwrap();
        let sys = DynSystem::new(f, Interval::new(0.0, 1.0).unwrap()).unwrap();
        let coarse = orbit_expand(&sys, 0.0, 2f64.powi(-(k as i32)), 200_000, 1e-12).unwrap();
        let fine = orbit_expand(&sys, 0.0, 2f64.powi(-(k as i32 + 1)), 200_000, 1e-12).unwrap();
        let fine_points = fine.points();
        for p in coarse.points() {
            prop_assert!(fine_points.binary_search_by(|q| q.total_cmp(&p)).is_ok());
        }
    }

    #[test]
    fn jensen_type_problems_recover_the_affine_solution(
        alpha in 0.2f64..0.8,
        boundary_a in -5.0f64..5.0,
        span in -5.0f64..5.0,
    ) {
        let boundary_b = boundary_a + span;
        let f_src = format!("{alpha}*x + {beta}*y", beta = 1.0 - alpha);
        let h_src = format!("{alpha}*u + {beta}*v", beta = 1.0 - alpha);
        let problem = Problem::from_sources(
            "jensen-type", &f_src, &h_src, 0.0, 1.0, boundary_a, boundary_b,
        ).unwrap();
        let epsilon = 1e-2;
        let opts = SolveOptions {
            epsilon,
            grid_n: 100,
            ..SolveOptions::for_problem(&problem)
        };
        let report = solve(&problem, &opts).unwrap();
        prop_assert_eq!(report.status, SolveStatus::Solved);
        let f = report.solution.as_ref().unwrap();
        let mut worst = 0.0f64;
        for (i, v) in f.values().iter().enumerate() {
            let z = f.grid_point(i);
            worst = worst.max((v - (boundary_a + span * z)).abs());
        }
        let bound = 10.0 * epsilon * span.abs() + 1e-12;
        prop_assert!(worst <= bound, "worst {} > bound {}", worst, bound);
    }
}
