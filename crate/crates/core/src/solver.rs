//! Boundary-value propagation along the endpoint orbit.
//!
//! Starting from the seeds `(a, A)` and `(b, B)`, every known pair `(z, f(z))`
//! yields two more through the slice maps:
//!
//! ```text
//! f(F(a, z)) = H[A, f(z), a, z]        (the x = a edge)
//! f(F(z, b)) = H[f(z), B, z, b]        (the y = b edge)
//! ```
//!
//! Expansion is breadth-first by word length and stops once the sample
//! points form an epsilon-net of the interval. Two derivations landing on
//! the same point (within the dedupe radius) must agree: a disagreement
//! beyond `tol_val` is logged as a conflict and the shallower derivation
//! wins. The sampled values are then interpolated onto a uniform grid.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::dynsys::{
    largest_gap, mixing_depth, DensityCertificate, DynError, DynSystem, Interval, PointSet, Word,
};
use crate::exprdsl::{eval, print, ExprAst, ExprError};
use crate::hypotheses::{run_all, HypError, HypothesisConfig, HypothesisReport};
use crate::numfmt::sig17;
use crate::verify::{residual_on_gamma_with_samples, residual_on_square, ResidualReport};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("evaluation failed propagating from z = {point} (word {word}): {source}")]
    EvalAt {
        point: f64,
        word: String,
        source: ExprError,
    },

    #[error("{role} uses undeclared variable `{name}`")]
    BadVariables { role: &'static str, name: String },

    #[error("invalid options: {message}")]
    InvalidOptions { message: String },

    #[error("residual scan failed: {message}")]
    Residual { message: String },

    #[error("sample table must contain both interval endpoints")]
    EndpointsMissing,

    #[error(transparent)]
    Dyn(#[from] DynError),

    #[error(transparent)]
    Hyp(#[from] HypError),

    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// A full problem instance: the equation data `F`, `H` and the boundary
/// values `f(a) = A`, `f(b) = B` on `[a, b]`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub interval: Interval,
    /// `F(x, y)`, over `{x, y}`.
    pub f: ExprAst,
    /// `H(u, v, x, y)`, over `{u, v, x, y}`.
    pub h: ExprAst,
    /// Boundary value at `a`.
    pub boundary_a: f64,
    /// Boundary value at `b`.
    pub boundary_b: f64,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        interval: Interval,
        f: ExprAst,
        h: ExprAst,
        boundary_a: f64,
        boundary_b: f64,
    ) -> Result<Self, SolveError> {
        check_variables(&f, &["x", "y"], "F")?;
        check_variables(&h, &["u", "v", "x", "y"], "H")?;
        if !boundary_a.is_finite() || !boundary_b.is_finite() {
            return Err(SolveError::InvalidOptions {
                message: "boundary values must be finite".to_string(),
            });
        }
        Ok(Problem {
            name: name.into(),
            interval,
            f,
            h,
            boundary_a,
            boundary_b,
        })
    }

    /// Parse `F` and `H` from source text and build the problem.
    pub fn from_sources(
        name: &str,
        f_src: &str,
        h_src: &str,
        a: f64,
        b: f64,
        boundary_a: f64,
        boundary_b: f64,
    ) -> Result<Self, SolveError> {
        let interval = Interval::new(a, b)?;
        let f = crate::exprdsl::parse(f_src, &["x", "y"])?;
        let h = crate::exprdsl::parse(h_src, &["u", "v", "x", "y"])?;
        Problem::new(name, interval, f, h, boundary_a, boundary_b)
    }

    /// Magnitude scale of the boundary data, used for value tolerances.
    pub fn value_scale(&self) -> f64 {
        1.0f64.max(self.boundary_a.abs()).max(self.boundary_b.abs())
    }
}

fn check_variables(
    ast: &ExprAst,
    allowed: &[&str],
    role: &'static str,
) -> Result<(), SolveError> {
    for name in ast.variables() {
        if !allowed.contains(&name) {
            return Err(SolveError::BadVariables {
                role,
                name: name.to_string(),
            });
        }
    }
    Ok(())
}

/// Which child to derive first when expanding a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MapOrder {
    #[default]
    Map1First,
    Map2First,
}

/// Which boundary seed enters the table first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedOrder {
    #[default]
    AFirst,
    BFirst,
}

/// All solver knobs. Use [`SolveOptions::for_problem`] for the defaults;
/// they scale with the interval width and the boundary data.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Target net gap for the sample table.
    pub epsilon: f64,
    /// Output grid resolution (also used by the hypothesis and residual scans).
    pub grid_n: usize,
    /// Node budget for propagation.
    pub max_nodes: usize,
    /// Dedupe radius for sample points.
    pub delta_dup: f64,
    /// Largest tolerated disagreement between two derivations of one point.
    pub tol_val: f64,
    pub map_order: MapOrder,
    pub seed_order: SeedOrder,
}

impl SolveOptions {
    pub fn for_problem(problem: &Problem) -> Self {
        let epsilon = 1e-3 * problem.interval.width();
        SolveOptions {
            epsilon,
            grid_n: 1000,
            max_nodes: 200_000,
            delta_dup: epsilon * 1e-6,
            tol_val: 1e-7 * problem.value_scale(),
            map_order: MapOrder::Map1First,
            seed_order: SeedOrder::AFirst,
        }
    }

    fn validate(&self, interval: Interval) -> Result<(), SolveError> {
        if self.epsilon.is_nan()
            || self.delta_dup.is_nan()
            || self.delta_dup <= 0.0
            || self.epsilon <= self.delta_dup
        {
            return Err(SolveError::InvalidOptions {
                message: format!(
                    "need epsilon > delta_dup > 0, got ({}, {})",
                    self.epsilon, self.delta_dup
                ),
            });
        }
        if self.delta_dup >= interval.width() {
            return Err(SolveError::InvalidOptions {
                message: "delta_dup must be smaller than the interval".to_string(),
            });
        }
        if self.grid_n < 1 || self.max_nodes < 2 {
            return Err(SolveError::InvalidOptions {
                message: "need grid_n >= 1 and max_nodes >= 2".to_string(),
            });
        }
        if self.tol_val.is_nan() || self.tol_val <= 0.0 {
            return Err(SolveError::InvalidOptions {
                message: "need tol_val > 0".to_string(),
            });
        }
        Ok(())
    }
}

/// An orbit point with its propagated value and derivation word.
#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub point: f64,
    pub value: f64,
    pub word: Word,
}

impl Sample {
    pub fn depth(&self) -> usize {
        self.word.len()
    }
}

/// Two derivations disagreed on the value at (nearly) the same point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Conflict {
    pub point: f64,
    pub incumbent: f64,
    pub candidate: f64,
    pub delta: f64,
}

/// Propagated samples, sorted by point, with the conflict log and the net
/// status of the expansion.
#[derive(Debug, Clone)]
pub struct SampleTable {
    pub samples: Vec<Sample>,
    pub delta_dup: f64,
    pub conflicts: Vec<Conflict>,
    pub largest_gap: f64,
    pub net_achieved: bool,
    /// Largest disagreement among silent merges (those within `tol_val`).
    pub max_merge_delta: f64,
    /// A merge disagreement exceeded the heuristic 1e-12 * depth budget.
    pub rounding_budget_exceeded: bool,
}

impl SampleTable {
    pub fn points(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.point).collect()
    }

    pub fn max_conflict(&self) -> f64 {
        self.conflicts
            .iter()
            .map(|c| c.delta)
            .fold(0.0, f64::max)
    }

    /// The sample nearest to `p` and its distance.
    pub fn nearest(&self, p: f64) -> (&Sample, f64) {
        debug_assert!(!self.samples.is_empty());
        let idx = self
            .samples
            .partition_point(|s| s.point < p)
            .min(self.samples.len() - 1);
        let mut best = idx;
        if idx > 0 && (self.samples[idx - 1].point - p).abs() < (self.samples[idx].point - p).abs()
        {
            best = idx - 1;
        }
        (&self.samples[best], (self.samples[best].point - p).abs())
    }

    /// Build a table directly from `(point, value)` pairs; endpoints of the
    /// hull of the pairs become the table's endpoints.
    pub fn from_pairs(pairs: &[(f64, f64)], delta_dup: f64) -> Result<SampleTable, SolveError> {
        if pairs.len() < 2 {
            return Err(SolveError::EndpointsMissing);
        }
        let mut sorted: Vec<(f64, f64)> = pairs.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let samples: Vec<Sample> = sorted
            .into_iter()
            .map(|(point, value)| Sample {
                point,
                value,
                word: Word::empty(),
            })
            .collect();
        let interval = Interval::new(samples[0].point, samples[samples.len() - 1].point)?;
        let gap = largest_gap(
            &samples.iter().map(|s| s.point).collect::<Vec<_>>(),
            interval,
        );
        Ok(SampleTable {
            samples,
            delta_dup,
            conflicts: Vec::new(),
            largest_gap: gap,
            net_achieved: true,
            max_merge_delta: 0.0,
            rounding_budget_exceeded: false,
        })
    }
}

/// Expand the seeds `(a, A)`, `(b, B)` breadth-first through the two
/// propagation identities until the sample points form an `epsilon`-net or
/// the node budget runs out (reported via `net_achieved`, never silent).
///
/// A child landing within `delta_dup` of its own parent is a fixed point of
/// the slice map; it derives nothing new and is skipped. Whether the
/// boundary data is consistent with `H` at such points is measured by the
/// residual scans instead. A child within `delta_dup` of any other sample
/// has its value compared against the incumbent (disagreement beyond
/// `tol_val` is a conflict); a child whose bracketing gap is already at
/// most `epsilon` is dropped, as in orbit expansion.
pub fn propagate(problem: &Problem, options: &SolveOptions) -> Result<SampleTable, SolveError> {
    options.validate(problem.interval)?;
    let sys = DynSystem::new(problem.f.clone(), problem.interval)?;
    let interval = problem.interval;
    let (av, bv) = (problem.boundary_a, problem.boundary_b);

    let mut samples: Vec<Sample> = Vec::new();
    let mut points: Vec<f64> = Vec::new();
    let mut set = PointSet::new();
    let mut conflicts: Vec<Conflict> = Vec::new();
    let mut max_merge_delta = 0.0f64;
    let mut budget_exceeded = false;

    let seeds = match options.seed_order {
        SeedOrder::AFirst => [(interval.a, av), (interval.b, bv)],
        SeedOrder::BFirst => [(interval.b, bv), (interval.a, av)],
    };
    for (p, v) in seeds {
        let idx = samples.len();
        samples.push(Sample {
            point: p,
            value: v,
            word: Word::empty(),
        });
        points.push(p);
        set.insert(p, idx);
    }

    let maps = match options.map_order {
        MapOrder::Map1First => [1u8, 2u8],
        MapOrder::Map2First => [2u8, 1u8],
    };

    let gap_of = |set: &PointSet, points: &[f64]| {
        let sorted: Vec<f64> = set.sorted_indices().map(|i| points[i]).collect();
        largest_gap(&sorted, interval)
    };

    let mut frontier: Vec<usize> = (0..samples.len()).collect();
    let mut achieved = gap_of(&set, &points) <= options.epsilon;

    'levels: while !achieved && !frontier.is_empty() {
        let mut next = Vec::new();
        for &idx in &frontier {
            let z = samples[idx].point;
            let fz = samples[idx].value;
            let word = samples[idx].word.clone();
            for &map in &maps {
                if samples.len() >= options.max_nodes {
                    break 'levels;
                }
                let child_point = sys.apply(map, z)?;
                if (child_point - z).abs() <= options.delta_dup {
                    // Fixed point of the slice map: no new information.
                    continue;
                }
                let child_word = word.child(map);
                let env = match map {
                    1 => [("u", av), ("v", fz), ("x", interval.a), ("y", z)],
                    _ => [("u", fz), ("v", bv), ("x", z), ("y", interval.b)],
                };
                let child_value =
                    eval(&problem.h, &env).map_err(|source| SolveError::EvalAt {
                        point: z,
                        word: child_word.to_string(),
                        source,
                    })?;
                if !child_value.is_finite() {
                    return Err(SolveError::EvalAt {
                        point: z,
                        word: child_word.to_string(),
                        source: ExprError::NonFinite {
                            expression: print(&problem.h),
                        },
                    });
                }

                if let Some(existing) = set.near(&points, child_point, options.delta_dup) {
                    let delta = (samples[existing].value - child_value).abs();
                    if delta > options.tol_val {
                        conflicts.push(Conflict {
                            point: samples[existing].point,
                            incumbent: samples[existing].value,
                            candidate: child_value,
                            delta,
                        });
                    } else {
                        max_merge_delta = max_merge_delta.max(delta);
                        let budget = 1e-12 * (child_word.len().max(1) as f64);
                        if delta > budget {
                            budget_exceeded = true;
                        }
                    }
                    continue;
                }
                {
                    let (left, right) = set.bracket(child_point);
                    let lo = left.map(|i| points[i]).unwrap_or(interval.a);
                    let hi = right.map(|i| points[i]).unwrap_or(interval.b);
                    if hi - lo <= options.epsilon {
                        continue;
                    }
                }
                let new_idx = samples.len();
                samples.push(Sample {
                    point: child_point,
                    value: child_value,
                    word: child_word,
                });
                points.push(child_point);
                set.insert(child_point, new_idx);
                next.push(new_idx);
            }
        }
        frontier = next;
        achieved = gap_of(&set, &points) <= options.epsilon;
    }

    let gap = gap_of(&set, &points);
    let sorted_samples: Vec<Sample> = set.sorted_indices().map(|i| samples[i].clone()).collect();
    Ok(SampleTable {
        samples: sorted_samples,
        delta_dup: options.delta_dup,
        conflicts,
        largest_gap: gap,
        net_achieved: gap <= options.epsilon,
        max_merge_delta,
        rounding_budget_exceeded: budget_exceeded,
    })
}

/// A piecewise-linear function tabulated on a uniform grid.
#[derive(Debug, Clone)]
pub struct TabulatedFunction {
    interval: Interval,
    values: Vec<f64>,
}

impl TabulatedFunction {
    pub fn from_grid_values(interval: Interval, values: Vec<f64>) -> Result<Self, SolveError> {
        if values.len() < 2 {
            return Err(SolveError::InvalidOptions {
                message: "a tabulated function needs at least two grid values".to_string(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(SolveError::InvalidOptions {
                message: format!("non-finite tabulated value {bad}"),
            });
        }
        Ok(TabulatedFunction { interval, values })
    }

    /// Sample a closed-form expression over `z` on the grid.
    pub fn from_closed_form(
        g: &ExprAst,
        interval: Interval,
        grid_n: usize,
    ) -> Result<Self, SolveError> {
        let values = crate::parallel::try_map_values(grid_n + 1, |i| {
            eval(g, &[("z", interval.grid_point(i, grid_n))])
        })?;
        TabulatedFunction::from_grid_values(interval, values)
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn grid_n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn grid_point(&self, i: usize) -> f64 {
        self.interval.grid_point(i, self.grid_n())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Piecewise-linear evaluation; arguments are clamped to the interval.
    pub fn eval_at(&self, z: f64) -> f64 {
        let n = self.grid_n();
        if z <= self.interval.a {
            return self.values[0];
        }
        if z >= self.interval.b {
            return self.values[n];
        }
        let pos = (z - self.interval.a) / self.interval.width() * n as f64;
        let i = (pos.floor() as usize).min(n - 1);
        let t = pos - i as f64;
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    /// CSV export: header `z,f`, grid order, 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "z,f")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", sig17(self.grid_point(i)), sig17(*v))?;
        }
        Ok(())
    }
}

/// Interpolate the samples onto a uniform grid of `grid_n + 1` points.
/// Grid points within the dedupe radius of a sample take the sample value
/// exactly; everything else is linear between the bracketing samples.
pub fn reconstruct(table: &SampleTable, grid_n: usize) -> Result<TabulatedFunction, SolveError> {
    if table.samples.len() < 2 {
        return Err(SolveError::EndpointsMissing);
    }
    let first = table.samples[0].point;
    let last = table.samples[table.samples.len() - 1].point;
    let interval = Interval::new(first, last)?;

    let values: Vec<f64> = (0..=grid_n)
        .map(|i| {
            let z = interval.grid_point(i, grid_n);
            let (nearest, dist) = table.nearest(z);
            if dist <= table.delta_dup {
                return nearest.value;
            }
            let hi = table
                .samples
                .partition_point(|s| s.point < z)
                .clamp(1, table.samples.len() - 1);
            let lo = hi - 1;
            let (p0, v0) = (table.samples[lo].point, table.samples[lo].value);
            let (p1, v1) = (table.samples[hi].point, table.samples[hi].value);
            let t = (z - p0) / (p1 - p0);
            v0 + t * (v1 - v0)
        })
        .collect();
    TabulatedFunction::from_grid_values(interval, values)
}

/// Pipeline outcome classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Solved,
    NoNet,
    Conflicts,
    HypothesesFailed,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Solved => "solved",
            SolveStatus::NoNet => "no-net",
            SolveStatus::Conflicts => "conflicts",
            SolveStatus::HypothesesFailed => "hypotheses-failed",
        }
    }
}

/// Echo of the options a run used, for reproducibility.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OptionsEcho {
    pub epsilon: f64,
    pub grid_n: usize,
    pub max_nodes: usize,
    pub delta_dup: f64,
    pub tol_val: f64,
}

/// Echo of the problem a run solved.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemEcho {
    pub name: String,
    pub f: String,
    pub h: String,
    pub a: f64,
    pub b: f64,
    pub boundary_a: f64,
    pub boundary_b: f64,
}

/// Everything a solve run produced. The tabulated solution and the raw
/// sample table ride along for callers but stay out of the JSON; the
/// solution is exported as CSV instead.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub problem: ProblemEcho,
    pub status: SolveStatus,
    pub hypotheses: HypothesisReport,
    pub density: Option<DensityCertificate>,
    pub sample_count: usize,
    pub conflict_count: usize,
    pub max_conflict: f64,
    pub largest_gap: f64,
    pub rounding_budget_exceeded: bool,
    pub residual_gamma: Option<f64>,
    pub residual_square: Option<f64>,
    pub gamma: Option<ResidualReport>,
    pub square: Option<ResidualReport>,
    /// Set when the table is consistent on the boundary set but the
    /// equation residual on the full square is large: the instance has a
    /// boundary-determined candidate and no full-square solution.
    pub overdetermined: bool,
    pub options: OptionsEcho,
    #[serde(skip)]
    pub solution: Option<TabulatedFunction>,
    #[serde(skip)]
    pub samples: Option<SampleTable>,
}

fn problem_echo(problem: &Problem) -> ProblemEcho {
    ProblemEcho {
        name: problem.name.clone(),
        f: print(&problem.f),
        h: print(&problem.h),
        a: problem.interval.a,
        b: problem.interval.b,
        boundary_a: problem.boundary_a,
        boundary_b: problem.boundary_b,
    }
}

fn options_echo(options: &SolveOptions) -> OptionsEcho {
    OptionsEcho {
        epsilon: options.epsilon,
        grid_n: options.grid_n,
        max_nodes: options.max_nodes,
        delta_dup: options.delta_dup,
        tol_val: options.tol_val,
    }
}

/// Threshold ratio between square and boundary residuals for the
/// overdetermined flag.
pub const OVERDETERMINED_RATIO: f64 = 1e3;

/// Absolute square-residual floor for the flag, relative to the value scale.
pub const OVERDETERMINED_FLOOR: f64 = 1e-3;

/// Full pipeline: verify hypotheses, propagate, reconstruct, measure
/// residuals on the boundary set and the square. Deterministic end to end.
pub fn solve(problem: &Problem, options: &SolveOptions) -> Result<SolveReport, SolveError> {
    options.validate(problem.interval)?;
    let hyp_config = HypothesisConfig {
        grid_n: options.grid_n,
        epsilon: options.epsilon,
        witness_tol: None,
    };
    let hypotheses = run_all(problem, hyp_config)?;
    if !hypotheses.all_ok() {
        return Ok(SolveReport {
            problem: problem_echo(problem),
            status: SolveStatus::HypothesesFailed,
            hypotheses,
            density: None,
            sample_count: 0,
            conflict_count: 0,
            max_conflict: 0.0,
            largest_gap: problem.interval.width(),
            rounding_budget_exceeded: false,
            residual_gamma: None,
            residual_square: None,
            gamma: None,
            square: None,
            overdetermined: false,
            options: options_echo(options),
            solution: None,
            samples: None,
        });
    }

    let table = propagate(problem, options)?;
    let slice = hypotheses
        .slice_contraction
        .expect("hypotheses passed, contraction present");
    let density = DensityCertificate {
        epsilon: options.epsilon,
        c1: slice.c1,
        c2: slice.c2,
        c_eps: slice.c1.max(slice.c2),
        depth_bound: mixing_depth(
            slice.c1.max(slice.c2),
            problem.interval.width(),
            options.epsilon,
        )?,
        achieved_gap: table.largest_gap,
    };

    let solution = reconstruct(&table, options.grid_n)?;
    let gamma = residual_on_gamma_with_samples(&solution, problem, options.grid_n, Some(&table))
        .map_err(|e| SolveError::Residual {
            message: e.to_string(),
        })?;
    let square =
        residual_on_square(&solution, problem, options.grid_n).map_err(|e| SolveError::Residual {
            message: e.to_string(),
        })?;

    let status = if !table.net_achieved {
        SolveStatus::NoNet
    } else if !table.conflicts.is_empty() {
        SolveStatus::Conflicts
    } else {
        SolveStatus::Solved
    };

    let gamma_figure = gamma.sup_at_samples.unwrap_or(gamma.sup);
    let overdetermined = status == SolveStatus::Solved
        && square.sup >= OVERDETERMINED_FLOOR * problem.value_scale()
        && square.sup >= OVERDETERMINED_RATIO * gamma_figure.max(f64::MIN_POSITIVE);

    Ok(SolveReport {
        problem: problem_echo(problem),
        status,
        hypotheses,
        density: Some(density),
        sample_count: table.samples.len(),
        conflict_count: table.conflicts.len(),
        max_conflict: table.max_conflict(),
        largest_gap: table.largest_gap,
        rounding_budget_exceeded: table.rounding_budget_exceeded,
        residual_gamma: Some(gamma.sup),
        residual_square: Some(square.sup),
        gamma: Some(gamma),
        square: Some(square),
        overdetermined,
        options: options_echo(options),
        solution: Some(solution),
        samples: Some(table),
    })
}
