//! The JSON field layout of the exported reports is part of the interface;
//! these tests pin the names and the status vocabulary.

use feq_core::hypotheses::{run_all, HypothesisConfig};
use feq_core::solver::{solve, Problem, SolveOptions, SolveStatus};
use feq_core::verify::residual_on_gamma;

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

#[test]
fn hypothesis_report_field_names() {
    let problem = jensen();
    let config = HypothesisConfig {
        grid_n: 50,
        epsilon: 1e-2,
        witness_tol: None,
    };
    let report = run_all(&problem, config).unwrap();
    let doc = serde_json::to_value(&report).unwrap();
    for key in ["maps_into", "internality", "slice_contraction", "witnesses", "cover", "grid_n", "epsilon"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert!(doc["maps_into"]["ok"].is_boolean());
    assert!(doc["maps_into"]["worst"].is_number());
    for key in ["c1", "c2", "ok"] {
        assert!(doc["slice_contraction"].get(key).is_some(), "missing {key}");
    }
    for key in ["x0", "r1", "y0", "r2"] {
        assert!(doc["witnesses"].get(key).is_some(), "missing {key}");
    }
    for key in ["ok", "gap"] {
        assert!(doc["cover"].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn residual_report_field_names() {
    let problem = jensen();
    let opts = SolveOptions {
        epsilon: 1e-2,
        grid_n: 50,
        ..SolveOptions::for_problem(&problem)
    };
    let report = solve(&problem, &opts).unwrap();
    let f = report.solution.as_ref().unwrap();
    let gamma = residual_on_gamma(f, &problem, 50).unwrap();
    let doc = serde_json::to_value(&gamma).unwrap();
    for key in ["domain", "grid_n", "sup", "mean", "argmax", "sup_at_samples"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert_eq!(doc["domain"], "gamma");
    assert_eq!(doc["argmax"].as_array().unwrap().len(), 2);
}

#[test]
fn solve_report_fields_and_status_strings() {
    let problem = jensen();
    let opts = SolveOptions {
        epsilon: 1e-2,
        grid_n: 50,
        ..SolveOptions::for_problem(&problem)
    };
    let report = solve(&problem, &opts).unwrap();
    let doc = serde_json::to_value(&report).unwrap();
    for key in [
        "problem",
        "status",
        "hypotheses",
        "density",
        "sample_count",
        "conflict_count",
        "max_conflict",
        "largest_gap",
        "rounding_budget_exceeded",
        "residual_gamma",
        "residual_square",
        "gamma",
        "square",
        "overdetermined",
        "options",
    ] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert_eq!(doc["status"], "solved");
    for key in ["epsilon", "c1", "c2", "c_eps", "depth_bound", "achieved_gap"] {
        assert!(doc["density"].get(key).is_some(), "missing density.{key}");
    }

    assert_eq!(SolveStatus::Solved.as_str(), "solved");
    assert_eq!(SolveStatus::NoNet.as_str(), "no-net");
    assert_eq!(SolveStatus::Conflicts.as_str(), "conflicts");
    assert_eq!(SolveStatus::HypothesesFailed.as_str(), "hypotheses-failed");
    assert_eq!(
        serde_json::to_value(SolveStatus::HypothesesFailed).unwrap(),
        "hypotheses-failed"
    );
}

#[test]
fn well_posed_runs_stay_within_the_rounding_budget() {
    let problem = jensen();
    let opts = SolveOptions {
        epsilon: 1e-3,
        grid_n: 100,
        ..SolveOptions::for_problem(&problem)
    };
    let report = solve(&problem, &opts).unwrap();
    assert!(!report.rounding_budget_exceeded);
}

#[test]
fn halving_epsilon_never_worsens_the_closed_form_error() {
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
    let mut last = f64::INFINITY;
    for epsilon in [4e-3, 2e-3, 1e-3] {
        let opts = SolveOptions {
            epsilon,
            grid_n: 400,
            delta_dup: epsilon * 1e-6,
            ..SolveOptions::for_problem(&problem)
        };
        let report = solve(&problem, &opts).unwrap();
        assert_eq!(report.status, SolveStatus::Solved);
        let f = report.solution.as_ref().unwrap();
        let mut worst = 0.0f64;
        for (i, v) in f.values().iter().enumerate() {
            worst = worst.max((v - (2.0 + 3.0 * f.grid_point(i))).abs());
        }
        assert!(
            worst <= last + 1e-12,
            "error grew from {last:e} to {worst:e} at epsilon {epsilon:e}"
        );
        last = worst;
    }
}
