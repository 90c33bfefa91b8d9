//! The four subcommands and their report rendering. Exit codes:
//!
//! | code | meaning                                        |
//! |------|------------------------------------------------|
//! | 0    | success                                        |
//! | 1    | I/O, parse, or evaluation error                |
//! | 2    | hypotheses failed / system not contracting     |
//! | 3    | epsilon-net not achieved within the node budget|
//! | 4    | value conflicts / residual above threshold     |
//! | 5    | boundary data mismatch                         |

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::json;

use feq_core::dynsys::{density_certificate, epsilon_net_check, orbit_expand, DynError, DynSystem};
use feq_core::exprdsl::{parse, ExprAst};
use feq_core::hypotheses::{check_slice_contraction, run_all, HypothesisConfig, HypothesisReport};
use feq_core::solver::{solve, Problem, SolveOptions, SolveStatus, TabulatedFunction};
use feq_core::verify::{
    boundary_mismatch, compare_closed_form, residual_on_gamma, residual_on_square, ResidualReport,
};

use clap::{Args, ValueEnum};

use crate::problem_file::{load_file, ProblemFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// Flags shared by every subcommand. File `[options]` override the
/// defaults; these flags override both.
#[derive(Args)]
pub struct CommonOpts {
    /// Target net gap (default 1e-3 * (b - a))
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Output grid resolution (default 1000)
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Node budget for expansion (default 200000)
    #[arg(long)]
    pub max_nodes: Option<usize>,
    /// Dedupe radius (default epsilon * 1e-6)
    #[arg(long)]
    pub delta_dup: Option<f64>,
    /// Value agreement tolerance (default 1e-7 * max(1, |A|, |B|))
    #[arg(long)]
    pub tol_val: Option<f64>,
    /// Directory for output files
    #[arg(long, default_value = ".")]
    pub out: std::path::PathBuf,
    /// Stdout rendering
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

/// Relative threshold on the boundary-set residual for `verify` to pass.
const GAMMA_PASS: f64 = 1e-6;

pub struct Ctx {
    pub file: ProblemFile,
    pub options: SolveOptions,
    pub out_dir: PathBuf,
    pub format: Format,
}

/// Load the problem file and resolve options: defaults, then the file's
/// `[options]`, then command-line flags.
pub fn resolve(path: &Path, common: &CommonOpts) -> Result<Ctx> {
    let file = load_file(path)?;
    let mut options = file.solve_options();
    let explicit_dup = common.delta_dup.or(file.options.delta_dup);
    if let Some(v) = common.epsilon {
        options.epsilon = v;
        options.delta_dup = explicit_dup.unwrap_or(v * 1e-6);
    } else if let Some(v) = explicit_dup {
        options.delta_dup = v;
    }
    if let Some(v) = common.grid_n {
        options.grid_n = v;
    }
    if let Some(v) = common.max_nodes {
        options.max_nodes = v;
    }
    if let Some(v) = common.tol_val {
        options.tol_val = v;
    }
    Ok(Ctx {
        file,
        options,
        out_dir: common.out.clone(),
        format: common.format,
    })
}

fn safe_name(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        }
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn render_hypotheses(report: &HypothesisReport) -> String {
    let mut out = String::new();
    let yn = |ok: bool| if ok { "ok" } else { "FAIL" };
    out.push_str(&format!(
        "maps_into:         {} (worst {:e})\n",
        yn(report.maps_into.ok),
        report.maps_into.worst
    ));
    out.push_str(&format!(
        "internality:       {} (worst {:e}) [advisory]\n",
        yn(report.internality.ok),
        report.internality.worst
    ));
    match report.slice_contraction {
        Some(c) => out.push_str(&format!(
            "slice contraction: {} (c1 {:.6}, c2 {:.6})\n",
            yn(c.ok),
            c.c1,
            c.c2
        )),
        None => out.push_str("slice contraction: skipped (preconditions violated)\n"),
    }
    match report.witnesses {
        Some(w) => out.push_str(&format!(
            "witnesses:         {} (x0 {:.9}, r1 {:e}; y0 {:.9}, r2 {:e})\n",
            yn(w.ok),
            w.x0,
            w.r1,
            w.y0,
            w.r2
        )),
        None => out.push_str("witnesses:         skipped (preconditions violated)\n"),
    }
    match report.cover {
        Some(c) => out.push_str(&format!("cover:             {} (gap {:e})\n", yn(c.ok), c.gap)),
        None => out.push_str("cover:             skipped (preconditions violated)\n"),
    }
    out.push_str(&format!(
        "verdict:           {}\n",
        if report.all_ok() {
            "hypotheses hold"
        } else {
            "hypotheses FAILED"
        }
    ));
    out
}

pub fn cmd_check(path: &Path, common: &CommonOpts) -> Result<u8> {
    let ctx = resolve(path, common)?;
    let config = HypothesisConfig {
        grid_n: ctx.options.grid_n,
        epsilon: ctx.options.epsilon,
        witness_tol: None,
    };
    let report = run_all(&ctx.file.problem, config)?;
    match ctx.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        _ => {
            println!("problem {}: F = {}, H = {}", ctx.file.problem.name, ctx.file.f_src, ctx.file.h_src);
            print!("{}", render_hypotheses(&report));
        }
    }
    Ok(if report.all_ok() { 0 } else { 2 })
}

fn render_residual(label: &str, r: &ResidualReport) -> String {
    let at_samples = match r.sup_at_samples {
        Some(v) => format!(", at samples {v:e}"),
        None => String::new(),
    };
    format!(
        "{label}: sup {:e} at ({:.9}, {:.9}), mean {:e}{at_samples}\n",
        r.sup, r.argmax[0], r.argmax[1], r.mean
    )
}

pub fn cmd_solve(path: &Path, common: &CommonOpts) -> Result<u8> {
    let ctx = resolve(path, common)?;
    let report = solve(&ctx.file.problem, &ctx.options)?;

    let stem = safe_name(&ctx.file.problem.name);
    let json_path = ctx.out_dir.join(format!("{stem}-report.json"));
    let mut json_text = serde_json::to_string_pretty(&report)?;
    json_text.push('\n');
    write_output(&json_path, json_text.as_bytes())?;

    let csv_path = ctx.out_dir.join(format!("{stem}-solution.csv"));
    if let Some(solution) = &report.solution {
        let mut buf = Vec::new();
        solution.write_csv(&mut buf)?;
        write_output(&csv_path, &buf)?;
    }

    match ctx.format {
        Format::Json => println!("{json_text}"),
        Format::Csv => {
            if let Some(solution) = &report.solution {
                let mut buf = Vec::new();
                solution.write_csv(&mut buf)?;
                print!("{}", String::from_utf8_lossy(&buf));
            }
        }
        Format::Text => {
            println!("problem {}: status {}", ctx.file.problem.name, report.status.as_str());
            println!(
                "samples {}, conflicts {} (max {:e}), net gap {:e}",
                report.sample_count,
                report.conflict_count,
                report.max_conflict,
                report.largest_gap
            );
            if let (Some(g), Some(s)) = (&report.gamma, &report.square) {
                print!("{}", render_residual("residual on gamma ", g));
                print!("{}", render_residual("residual on square", s));
            }
            if report.overdetermined {
                println!("overdetermined instance: gamma-solvable, square-unsolvable");
            }
            if report.solution.is_some() {
                println!("wrote {}", csv_path.display());
            }
            println!("wrote {}", json_path.display());
        }
    }

    Ok(match report.status {
        SolveStatus::Solved => 0,
        SolveStatus::HypothesesFailed => 2,
        SolveStatus::NoNet => 3,
        SolveStatus::Conflicts => 4,
    })
}

fn load_solution_csv(path: &Path, problem: &Problem) -> Result<TabulatedFunction> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read solution {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("z,f") => {}
        Some(other) => bail!("solution {}: expected header `z,f`, found `{other}`", path.display()),
        None => bail!("solution {} is empty", path.display()),
    }
    let mut zs = Vec::new();
    let mut vs = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (zs_text, vs_text) = line
            .split_once(',')
            .with_context(|| format!("solution line {}: expected `z,f`", i + 2))?;
        let z: f64 = zs_text
            .trim()
            .parse()
            .with_context(|| format!("solution line {}: bad z value", i + 2))?;
        let v: f64 = vs_text
            .trim()
            .parse()
            .with_context(|| format!("solution line {}: bad f value", i + 2))?;
        zs.push(z);
        vs.push(v);
    }
    if zs.len() < 2 {
        bail!("solution needs at least two rows");
    }
    let interval = problem.interval;
    let width = interval.width();
    let n = zs.len() - 1;
    let tol = 1e-9 * width;
    if (zs[0] - interval.a).abs() > tol || (zs[n] - interval.b).abs() > tol {
        bail!(
            "solution grid [{}, {}] does not span the problem interval [{}, {}]",
            zs[0],
            zs[n],
            interval.a,
            interval.b
        );
    }
    for (i, z) in zs.iter().enumerate() {
        let expected = interval.grid_point(i, n);
        if (z - expected).abs() > 1e-6 * width {
            bail!("solution grid is not uniform at row {} (z = {z})", i + 2);
        }
    }
    Ok(TabulatedFunction::from_grid_values(interval, vs)?)
}

pub fn cmd_verify(
    path: &Path,
    solution: Option<&Path>,
    closed_form: Option<&str>,
    common: &CommonOpts,
) -> Result<u8> {
    let ctx = resolve(path, common)?;
    let problem = &ctx.file.problem;

    let closed: Option<(String, ExprAst)> = match closed_form {
        Some(src) => Some((src.to_string(), parse(src, &["z"])?)),
        None => ctx.file.closed_form.clone(),
    };

    let f = match solution {
        Some(csv) => load_solution_csv(csv, problem)?,
        None => match &closed {
            Some((_, g)) => TabulatedFunction::from_closed_form(g, problem.interval, ctx.options.grid_n)?,
            None => bail!("verify needs --solution, --closed-form, or an [oracle] section"),
        },
    };

    let gamma = residual_on_gamma(&f, problem, ctx.options.grid_n)?;
    let square = residual_on_square(&f, problem, ctx.options.grid_n)?;
    let (miss_a, miss_b) = boundary_mismatch(&f, problem);
    let boundary_ok = miss_a <= ctx.options.tol_val && miss_b <= ctx.options.tol_val;
    let comparison = match (&closed, solution) {
        (Some((src, g)), Some(_)) => {
            let (sup, argmax) = compare_closed_form(&f, g)?;
            Some((src.clone(), sup, argmax))
        }
        _ => None,
    };
    let gamma_ok = gamma.sup <= GAMMA_PASS * problem.value_scale();

    match ctx.format {
        Format::Json => {
            let doc = json!({
                "problem": problem.name,
                "gamma": gamma,
                "square": square,
                "boundary": {
                    "mismatch_at_a": miss_a,
                    "mismatch_at_b": miss_b,
                    "ok": boundary_ok,
                },
                "closed_form": comparison.as_ref().map(|(src, sup, argmax)| json!({
                    "expression": src,
                    "sup_err": sup,
                    "argmax": argmax,
                })),
                "gamma_ok": gamma_ok,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        _ => {
            println!("problem {}", problem.name);
            print!("{}", render_residual("residual on gamma ", &gamma));
            print!("{}", render_residual("residual on square", &square));
            println!(
                "boundary: |f(a)-A| = {miss_a:e}, |f(b)-B| = {miss_b:e} -> {}",
                if boundary_ok { "ok" } else { "MISMATCH" }
            );
            if let Some((src, sup, argmax)) = &comparison {
                println!("closed form {src}: sup err {sup:e} at z = {argmax:.9}");
            }
        }
    }

    if !boundary_ok {
        return Ok(5);
    }
    Ok(if gamma_ok { 0 } else { 4 })
}

pub fn cmd_orbit(path: &Path, seed: f64, common: &CommonOpts) -> Result<u8> {
    let ctx = resolve(path, common)?;
    let problem = &ctx.file.problem;
    if !problem.interval.contains(seed) {
        eprintln!(
            "error: seed {seed} outside [{}, {}]",
            problem.interval.a, problem.interval.b
        );
        return Ok(1);
    }
    let sys = DynSystem::new(problem.f.clone(), problem.interval)?;

    // Diagnose non-contraction before expanding: an identity slice would
    // otherwise surface as a misleading budget failure.
    let slice = check_slice_contraction(
        &sys,
        ctx.options.epsilon.min(problem.interval.width()),
        ctx.options.grid_n,
    )?;
    if !slice.ok {
        eprintln!(
            "error: slice maps are not contracting (c1 {:.9}, c2 {:.9})",
            slice.c1, slice.c2
        );
        return Ok(2);
    }

    let table = match orbit_expand(
        &sys,
        seed,
        ctx.options.epsilon,
        ctx.options.max_nodes,
        ctx.options.delta_dup,
    ) {
        Ok(table) => table,
        Err(DynError::IncompleteNet {
            achieved_gap,
            epsilon,
            nodes,
        }) => {
            eprintln!(
                "error: node budget exhausted at {nodes} nodes, gap {achieved_gap:e} > epsilon {epsilon:e}"
            );
            return Ok(3);
        }
        Err(err) => return Err(err.into()),
    };

    let (_, achieved_gap) =
        epsilon_net_check(&table.points(), sys.interval(), ctx.options.epsilon);
    let certificate = match density_certificate(
        &sys,
        ctx.options.epsilon,
        ctx.options.grid_n,
        achieved_gap,
    ) {
        Ok(c) => c,
        Err(DynError::NotContracting { c }) => {
            eprintln!("error: system is not contracting (estimated modulus {c})");
            return Ok(2);
        }
        Err(err) => return Err(err.into()),
    };

    let stem = safe_name(&problem.name);
    let csv_path = ctx.out_dir.join(format!("{stem}-orbit.csv"));
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_output(&csv_path, &buf)?;
    let json_path = ctx.out_dir.join(format!("{stem}-density.json"));
    let mut json_text = serde_json::to_string_pretty(&certificate)?;
    json_text.push('\n');
    write_output(&json_path, json_text.as_bytes())?;

    match ctx.format {
        Format::Json => println!("{json_text}"),
        Format::Csv => print!("{}", String::from_utf8_lossy(&buf)),
        Format::Text => {
            println!(
                "orbit of {seed}: {} nodes, achieved gap {:e} (epsilon {:e})",
                table.nodes.len(),
                certificate.achieved_gap,
                ctx.options.epsilon
            );
            println!(
                "density: c1 {:.6}, c2 {:.6}, c_eps {:.6}, depth bound {}",
                certificate.c1, certificate.c2, certificate.c_eps, certificate.depth_bound
            );
            println!("wrote {}", csv_path.display());
            println!("wrote {}", json_path.display());
        }
    }
    Ok(0)
}
