//! Grid verification of the standing assumptions the solver relies on:
//! `F` maps the square into the interval, both slice maps are strict
//! contractions (estimated modulus bounded away from 1), the endpoint
//! equations `F(a, x0) = a` and `F(y0, b) = b` have approximate witnesses,
//! and the two slice images cover the interval.
//!
//! Internality (`min(x,y) < F(x,y) < max(x,y)` off the diagonal) is checked
//! as a diagnostic only; the solver does not require it.

use serde::Serialize;
use thiserror::Error;

use crate::dynsys::{contraction_modulus, image_hull, DynError, DynSystem, Interval};
use crate::exprdsl::{eval, ExprAst, ExprError};
use crate::parallel::try_map_values;
use crate::solver::Problem;

/// Estimated slice moduli must stay below `1 - CONTRACTION_MARGIN`; grid
/// estimates are lower bounds, so the margin rejects borderline systems.
pub const CONTRACTION_MARGIN: f64 = 1e-6;

/// Maps-into violations beyond this are failures, below it rounding.
pub const MAPS_INTO_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum HypError {
    #[error("evaluation failed at grid point ({x}, {y}): {source}")]
    EvalAt {
        x: f64,
        y: f64,
        source: ExprError,
    },

    #[error(transparent)]
    Dyn(#[from] DynError),
}

/// Outcome of a single yes/no grid check with its worst violation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CheckResult {
    pub ok: bool,
    pub worst: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SliceContraction {
    pub c1: f64,
    pub c2: f64,
    pub ok: bool,
}

/// Approximate witnesses for the endpoint equations, with residuals
/// `r1 = F(a, x0) - a` and `r2 = b - F(y0, b)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Witnesses {
    pub x0: f64,
    pub r1: f64,
    pub y0: f64,
    pub r2: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoverCheck {
    pub ok: bool,
    pub gap: f64,
}

/// Aggregated hypothesis verdict. When the maps-into check fails the
/// system-dependent checks cannot be computed and are reported as absent,
/// with `preconditions_violated` set.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub maps_into: CheckResult,
    pub internality: CheckResult,
    pub slice_contraction: Option<SliceContraction>,
    pub witnesses: Option<Witnesses>,
    pub cover: Option<CoverCheck>,
    pub grid_n: usize,
    pub epsilon: f64,
    pub preconditions_violated: bool,
}

impl HypothesisReport {
    /// True when every required condition holds. Internality is advisory
    /// and does not participate.
    pub fn all_ok(&self) -> bool {
        !self.preconditions_violated
            && self.maps_into.ok
            && self.slice_contraction.map(|c| c.ok).unwrap_or(false)
            && self.witnesses.map(|w| w.ok).unwrap_or(false)
            && self.cover.map(|c| c.ok).unwrap_or(false)
    }
}

/// Knobs for [`run_all`].
#[derive(Debug, Clone, Copy)]
pub struct HypothesisConfig {
    pub grid_n: usize,
    /// Pair-separation scale for the contraction modulus estimate.
    pub epsilon: f64,
    /// Witness residual threshold; defaults to `1e-9 * (b - a)`.
    pub witness_tol: Option<f64>,
}

impl HypothesisConfig {
    pub fn for_interval(interval: Interval) -> Self {
        HypothesisConfig {
            grid_n: 1000,
            epsilon: 1e-3 * interval.width(),
            witness_tol: None,
        }
    }
}

/// Scan the `(grid_n + 1)^2` uniform grid on the square for values of `F`
/// outside `[a, b]`.
pub fn check_maps_into(
    f: &ExprAst,
    interval: Interval,
    grid_n: usize,
) -> Result<CheckResult, HypError> {
    let overshoots = square_scan(f, interval, grid_n, |_x, _y, v| {
        (interval.a - v).max(v - interval.b)
    })?;
    let worst = overshoots
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    Ok(CheckResult {
        ok: worst <= MAPS_INTO_TOL,
        worst,
    })
}

/// Check `min(x, y) < F(x, y) < max(x, y)` at off-diagonal grid points.
/// Equality counts as a violation (of margin zero); `worst` is the largest
/// excursion beyond the open interval, clamped at zero.
pub fn check_internality(
    f: &ExprAst,
    interval: Interval,
    grid_n: usize,
) -> Result<CheckResult, HypError> {
    let margins = square_scan(f, interval, grid_n, |x, y, v| {
        if x == y {
            f64::NEG_INFINITY
        } else {
            (x.min(y) - v).max(v - x.max(y))
        }
    })?;
    let sup = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CheckResult {
        ok: sup < 0.0,
        worst: sup.max(0.0),
    })
}

fn square_scan<G>(
    f: &ExprAst,
    interval: Interval,
    grid_n: usize,
    measure: G,
) -> Result<Vec<f64>, HypError>
where
    G: Fn(f64, f64, f64) -> f64 + Sync,
{
    let n = grid_n;
    try_map_values((n + 1) * (n + 1), |k| {
        let x = interval.grid_point(k / (n + 1), n);
        let y = interval.grid_point(k % (n + 1), n);
        let v = eval(f, &[("x", x), ("y", y)]).map_err(|source| HypError::EvalAt {
            x,
            y,
            source,
        })?;
        Ok(measure(x, y, v))
    })
}

/// Estimated contraction moduli of the two slice maps.
pub fn check_slice_contraction(
    sys: &DynSystem,
    epsilon: f64,
    grid_n: usize,
) -> Result<SliceContraction, HypError> {
    let interval = sys.interval();
    let c1 = contraction_modulus(|t| sys.delta1(t), interval, epsilon, grid_n)?;
    let c2 = contraction_modulus(|t| sys.delta2(t), interval, epsilon, grid_n)?;
    Ok(SliceContraction {
        c1,
        c2,
        ok: c1.max(c2) <= 1.0 - CONTRACTION_MARGIN,
    })
}

/// Search for the endpoint witnesses: `x0` minimizing `F(a, x) - a` and
/// `y0` minimizing `b - F(y, b)`. Best grid point, then 60 rounds of
/// trisection of its bracketing cell.
pub fn find_witnesses(sys: &DynSystem, grid_n: usize, tol: f64) -> Result<Witnesses, HypError> {
    let interval = sys.interval();
    let g1 = |t: f64| -> Result<f64, DynError> { Ok(sys.delta1(t)? - interval.a) };
    let g2 = |t: f64| -> Result<f64, DynError> { Ok(interval.b - sys.delta2(t)?) };
    let (x0, r1) = refine_min(&g1, interval, grid_n)?;
    let (y0, r2) = refine_min(&g2, interval, grid_n)?;
    Ok(Witnesses {
        x0,
        r1,
        y0,
        r2,
        ok: r1 <= tol && r2 <= tol,
    })
}

fn refine_min<G>(g: &G, interval: Interval, grid_n: usize) -> Result<(f64, f64), HypError>
where
    G: Fn(f64) -> Result<f64, DynError> + Sync,
{
    let values = try_map_values(grid_n + 1, |i| g(interval.grid_point(i, grid_n)))?;
    let mut best_i = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best_i] {
            best_i = i;
        }
    }
    let mut best_t = interval.grid_point(best_i, grid_n);
    let mut best_v = values[best_i];

    let mut lo = interval.grid_point(best_i.saturating_sub(1), grid_n);
    let mut hi = interval.grid_point((best_i + 1).min(grid_n), grid_n);
    for _ in 0..60 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let v1 = g(m1)?;
        let v2 = g(m2)?;
        if v1 < best_v {
            best_v = v1;
            best_t = m1;
        }
        if v2 < best_v {
            best_v = v2;
            best_t = m2;
        }
        if v1 <= v2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    Ok((best_t, best_v))
}

/// Measure how much of the interval the two slice images fail to cover.
pub fn check_cover(sys: &DynSystem, grid_n: usize) -> Result<CoverCheck, HypError> {
    let interval = sys.interval();
    let h1 = image_hull(|t| sys.delta1(t), interval, grid_n)?;
    let h2 = image_hull(|t| sys.delta2(t), interval, grid_n)?;
    let mut hulls = [h1, h2];
    hulls.sort_by(|a, b| a.lo.total_cmp(&b.lo));

    let mut gap = (hulls[0].lo - interval.a).max(0.0);
    let mut covered_to = hulls[0].hi;
    if hulls[1].lo > covered_to {
        gap += hulls[1].lo - covered_to;
    }
    covered_to = covered_to.max(hulls[1].hi);
    gap += (interval.b - covered_to).max(0.0);
    Ok(CoverCheck {
        ok: gap <= interval.width() * 1e-9,
        gap,
    })
}

/// Run the five checks for a problem. If the maps-into check fails, the
/// system-dependent checks are skipped and the report is flagged.
pub fn run_all(problem: &Problem, config: HypothesisConfig) -> Result<HypothesisReport, HypError> {
    let interval = problem.interval;
    let maps_into = check_maps_into(&problem.f, interval, config.grid_n)?;
    let internality = check_internality(&problem.f, interval, config.grid_n)?;

    if !maps_into.ok {
        return Ok(HypothesisReport {
            maps_into,
            internality,
            slice_contraction: None,
            witnesses: None,
            cover: None,
            grid_n: config.grid_n,
            epsilon: config.epsilon,
            preconditions_violated: true,
        });
    }

    let sys = DynSystem::new(problem.f.clone(), interval)?;
    let slice = check_slice_contraction(&sys, config.epsilon, config.grid_n)?;
    let tol = config.witness_tol.unwrap_or(1e-9 * interval.width());
    let witnesses = find_witnesses(&sys, config.grid_n, tol)?;
    let cover = check_cover(&sys, config.grid_n)?;

    Ok(HypothesisReport {
        maps_into,
        internality,
        slice_contraction: Some(slice),
        witnesses: Some(witnesses),
        cover: Some(cover),
        grid_n: config.grid_n,
        epsilon: config.epsilon,
        preconditions_violated: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprdsl::parse;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    fn f(src: &str) -> ExprAst {
        parse(src, &["x", "y"]).unwrap()
    }

    fn system(src: &str, interval: Interval) -> DynSystem {
        DynSystem::new(f(src), interval).unwrap()
    }

    #[test]
    fn midpoint_maps_into_exactly() {
        let r = check_maps_into(&f("0.5*x + 0.5*y"), unit(), 100).unwrap();
        assert!(r.ok);
        assert_eq!(r.worst, 0.0);
    }

    #[test]
    fn sum_overshoots_by_one() {
        let r = check_maps_into(&f("x + y"), unit(), 100).unwrap();
        assert!(!r.ok);
        assert_eq!(r.worst, 1.0);
    }

    #[test]
    fn logmean_maps_into_its_interval() {
        let interval = Interval::new(1.0, 2.0).unwrap();
        let r = check_maps_into(&f("logmean(x, y)"), interval, 300).unwrap();
        assert!(r.ok, "worst = {}", r.worst);
        assert_eq!(r.worst, 0.0);
    }

    #[test]
    fn midpoint_is_internal() {
        let r = check_internality(&f("0.5*x + 0.5*y"), unit(), 100).unwrap();
        assert!(r.ok);
        assert_eq!(r.worst, 0.0);
    }

    #[test]
    fn min_touches_the_boundary_of_internality() {
        let r = check_internality(&f("min(x, y)"), unit(), 100).unwrap();
        assert!(!r.ok);
        assert_eq!(r.worst, 0.0);
    }

    #[test]
    fn logmean_is_internal_on_positive_interval() {
        let interval = Interval::new(1.0, 2.0).unwrap();
        let r = check_internality(&f("logmean(x, y)"), interval, 200).unwrap();
        assert!(r.ok, "worst = {}", r.worst);
    }

    #[test]
    fn mean_family_is_internal_on_positive_intervals() {
        // Geometric, weighted power, and logarithmic means.
        let interval = Interval::new(1.0, 2.0).unwrap();
        for src in [
            "sqrt(x*y)",
            "(0.3*x^2 + 0.7*y^2)^0.5",
            "logmean(x, y)",
        ] {
            let r = check_internality(&f(src), interval, 150).unwrap();
            assert!(r.ok, "{src}: worst = {}", r.worst);
            let m = check_maps_into(&f(src), interval, 150).unwrap();
            assert!(m.ok, "{src}: overshoot = {}", m.worst);
        }
    }

    #[test]
    fn weighted_mean_moduli_are_the_weights() {
        // F = (1/3) x + (2/3) y: delta1 slope 2/3, delta2 slope 1/3.
        let sys = system("(1/3)*x + (2/3)*y", unit());
        let r = check_slice_contraction(&sys, 1e-3, 400).unwrap();
        assert!((r.c1 - 2.0 / 3.0).abs() <= 1e-12, "c1 = {}", r.c1);
        assert!((r.c2 - 1.0 / 3.0).abs() <= 1e-12, "c2 = {}", r.c2);
        assert!(r.ok);
    }

    #[test]
    fn identity_slice_is_rejected() {
        let sys = system("min(x, y)", unit());
        let r = check_slice_contraction(&sys, 1e-3, 400).unwrap();
        assert!(r.c2 >= 1.0 - 1e-9);
        assert!(!r.ok);
    }

    #[test]
    fn midpoint_witnesses_are_the_endpoints() {
        let sys = system("0.5*x + 0.5*y", unit());
        let w = find_witnesses(&sys, 100, 1e-9).unwrap();
        assert_eq!(w.x0, 0.0);
        assert_eq!(w.r1, 0.0);
        assert_eq!(w.y0, 1.0);
        assert_eq!(w.r2, 0.0);
        assert!(w.ok);
    }

    #[test]
    fn quadratic_slice_witnesses() {
        // delta1(t) = t^2 / 2 has x0 = 0; delta2(t) = (t + 1)/2 has y0 = 1.
        let sys = system("0.5*x + 0.5*y^2", unit());
        let w = find_witnesses(&sys, 100, 1e-9).unwrap();
        assert_eq!(w.x0, 0.0);
        assert_eq!(w.r1, 0.0);
        assert_eq!(w.y0, 1.0);
        assert_eq!(w.r2, 0.0);
    }

    #[test]
    fn witness_refinement_reaches_off_grid_roots() {
        // delta1(t) = (t - 0.3)^2 / 2 vanishes at t = 0.3, strictly between
        // the points of a 7-point grid.
        let sys = system("0.5*(y - 0.3)^2", unit());
        let w = find_witnesses(&sys, 6, 1e-9).unwrap();
        assert!((w.x0 - 0.3).abs() < 1e-9, "x0 = {}", w.x0);
        assert!(w.r1 <= 1e-9, "r1 = {}", w.r1);
    }

    #[test]
    fn midpoint_cover_has_no_gap() {
        let sys = system("0.5*x + 0.5*y", unit());
        let c = check_cover(&sys, 200).unwrap();
        assert!(c.ok);
        assert_eq!(c.gap, 0.0);
    }

    #[test]
    fn shrunken_map_leaves_half_uncovered() {
        let sys = system("0.25*x + 0.25*y", unit());
        let c = check_cover(&sys, 200).unwrap();
        assert!(!c.ok);
        assert!((c.gap - 0.5).abs() <= 1e-12, "gap = {}", c.gap);
    }

    #[test]
    fn run_all_on_the_midpoint_problem() {
        let problem = Problem::from_sources(
            "jensen-half",
            "0.5*x + 0.5*y",
            "0.5*u + 0.5*v",
            0.0,
            1.0,
            0.0,
            1.0,
        )
        .unwrap();
        let config = HypothesisConfig {
            grid_n: 200,
            epsilon: 1e-3,
            witness_tol: None,
        };
        let report = run_all(&problem, config).unwrap();
        assert!(report.all_ok());
        assert!(!report.preconditions_violated);
        let slice = report.slice_contraction.unwrap();
        assert!((slice.c1 - 0.5).abs() <= 1e-12);
        assert!((slice.c2 - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn run_all_flags_preconditions_on_range_failure() {
        let problem = Problem::from_sources("sum", "x + y", "u + v", 0.0, 1.0, 0.0, 1.0).unwrap();
        let config = HypothesisConfig {
            grid_n: 100,
            epsilon: 1e-3,
            witness_tol: None,
        };
        let report = run_all(&problem, config).unwrap();
        assert!(report.preconditions_violated);
        assert!(!report.all_ok());
        assert!(report.slice_contraction.is_none());
        assert!(report.witnesses.is_none());
        assert!(report.cover.is_none());
    }

    #[test]
    fn run_all_rejects_identity_slice() {
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
        let config = HypothesisConfig {
            grid_n: 200,
            epsilon: 1e-3,
            witness_tol: None,
        };
        let report = run_all(&problem, config).unwrap();
        assert!(!report.all_ok());
        assert!(!report.preconditions_violated);
        assert!(!report.slice_contraction.unwrap().ok);
    }

    #[test]
    fn run_all_on_logmean() {
        let problem = Problem::from_sources(
            "logmean",
            "logmean(x, y)",
            "logmean(u, v)",
            1.0,
            2.0,
            1.0,
            2.0,
        )
        .unwrap();
        let config = HypothesisConfig {
            grid_n: 200,
            epsilon: 1e-3,
            witness_tol: None,
        };
        let report = run_all(&problem, config).unwrap();
        assert!(report.all_ok());
        // Slice slopes peak at 1/2 (delta1, near t = 1) and at
        // (1 - ln 2) / ln^2 2 ~ 0.6387 (delta2, at t = 1).
        let slice = report.slice_contraction.unwrap();
        assert!(slice.c1 < 0.51, "c1 = {}", slice.c1);
        assert!(slice.c2 < 0.64, "c2 = {}", slice.c2);
    }
}
