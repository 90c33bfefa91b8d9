//! Line-oriented problem files: `key = value` pairs under `[section]`
//! headers, UTF-8, `#` comments. The `[problem]` section is required; the
//! optional `[options]` section pre-sets solver knobs and the optional
//! `[oracle]` section names a closed-form reference over `z`.
//!
//! ```text
//! [problem]
//! name = jensen-half
//! F = 0.5*x + 0.5*y
//! H = 0.5*u + 0.5*v
//! a = 0.0
//! b = 1.0
//! A = 0.0
//! B = 1.0
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use feq_core::dynsys::Interval;
use feq_core::exprdsl::{parse, ExprAst};
use feq_core::solver::{MapOrder, Problem, SeedOrder, SolveOptions};

/// Option overrides carried by the `[options]` section, all optional.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FileOptions {
    pub epsilon: Option<f64>,
    pub grid_n: Option<usize>,
    pub max_nodes: Option<usize>,
    pub delta_dup: Option<f64>,
    pub tol_val: Option<f64>,
}

/// A parsed problem file. Expression sources are kept verbatim so the file
/// can be re-serialized and re-loaded to an equal problem.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub problem: Problem,
    pub options: FileOptions,
    pub closed_form: Option<(String, ExprAst)>,
    pub f_src: String,
    pub h_src: String,
}

impl ProblemFile {
    /// Canonical serialization; `load`ing the output yields an equal file.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[problem]");
        let _ = writeln!(out, "name = {}", self.problem.name);
        let _ = writeln!(out, "F = {}", self.f_src);
        let _ = writeln!(out, "H = {}", self.h_src);
        let _ = writeln!(out, "a = {}", self.problem.interval.a);
        let _ = writeln!(out, "b = {}", self.problem.interval.b);
        let _ = writeln!(out, "A = {}", self.problem.boundary_a);
        let _ = writeln!(out, "B = {}", self.problem.boundary_b);
        let opts = &self.options;
        if *opts != FileOptions::default() {
            let _ = writeln!(out, "\n[options]");
            if let Some(v) = opts.epsilon {
                let _ = writeln!(out, "epsilon = {v}");
            }
            if let Some(v) = opts.grid_n {
                let _ = writeln!(out, "grid_n = {v}");
            }
            if let Some(v) = opts.max_nodes {
                let _ = writeln!(out, "max_nodes = {v}");
            }
            if let Some(v) = opts.delta_dup {
                let _ = writeln!(out, "delta_dup = {v}");
            }
            if let Some(v) = opts.tol_val {
                let _ = writeln!(out, "tol_val = {v}");
            }
        }
        if let Some((src, _)) = &self.closed_form {
            let _ = writeln!(out, "\n[oracle]");
            let _ = writeln!(out, "closed_form = {src}");
        }
        out
    }

    /// Solve options: defaults, overlaid with the file's `[options]`.
    pub fn solve_options(&self) -> SolveOptions {
        let mut base = SolveOptions::for_problem(&self.problem);
        if let Some(v) = self.options.epsilon {
            base.epsilon = v;
            base.delta_dup = v * 1e-6;
        }
        if let Some(v) = self.options.grid_n {
            base.grid_n = v;
        }
        if let Some(v) = self.options.max_nodes {
            base.max_nodes = v;
        }
        if let Some(v) = self.options.delta_dup {
            base.delta_dup = v;
        }
        if let Some(v) = self.options.tol_val {
            base.tol_val = v;
        }
        base.map_order = MapOrder::Map1First;
        base.seed_order = SeedOrder::AFirst;
        base
    }
}

pub fn load_file(path: &Path) -> Result<ProblemFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read problem file {}", path.display()))?;
    load_str(&text).with_context(|| format!("in {}", path.display()))
}

pub fn load_str(text: &str) -> Result<ProblemFile> {
    let mut sections: BTreeMap<String, BTreeMap<String, (usize, String)>> = BTreeMap::new();
    let mut current: Option<String> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| anyhow!("line {line_no}: unterminated section header"))?
                .trim()
                .to_string();
            if !matches!(name.as_str(), "problem" | "options" | "oracle") {
                bail!("line {line_no}: unknown section [{name}]");
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {line_no}: expected `key = value`"))?;
        let section = current
            .as_ref()
            .ok_or_else(|| anyhow!("line {line_no}: `key = value` before any [section]"))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let entries = sections.get_mut(section).expect("section registered");
        if entries.contains_key(&key) {
            bail!("line {line_no}: duplicate key `{key}` in [{section}]");
        }
        entries.insert(key, (line_no, value));
    }

    let problem_section = sections
        .get("problem")
        .ok_or_else(|| anyhow!("missing [problem] section"))?;
    let known = ["name", "F", "H", "a", "b", "A", "B"];
    for (key, (line_no, _)) in problem_section {
        if !known.contains(&key.as_str()) {
            bail!("line {line_no}: unknown key `{key}` in [problem]");
        }
    }
    let get = |key: &str| -> Result<&(usize, String)> {
        problem_section
            .get(key)
            .ok_or_else(|| anyhow!("missing key `{key}` in [problem]"))
    };
    let number = |key: &str| -> Result<f64> {
        let (line_no, value) = get(key)?;
        let v: f64 = value
            .parse()
            .map_err(|_| anyhow!("line {line_no}: invalid number `{value}` for `{key}`"))?;
        if !v.is_finite() {
            bail!("line {line_no}: `{key}` must be finite");
        }
        Ok(v)
    };

    let name = get("name")?.1.clone();
    let f_src = get("F")?.1.clone();
    let h_src = get("H")?.1.clone();
    let a = number("a")?;
    let b = number("b")?;
    let boundary_a = number("A")?;
    let boundary_b = number("B")?;
    if a >= b {
        bail!("a < b required, got a = {a}, b = {b}");
    }

    let f_line = get("F")?.0;
    let f = parse(&f_src, &["x", "y"]).map_err(|e| anyhow!("line {f_line}: in F: {e}"))?;
    let h_line = get("H")?.0;
    let h = parse(&h_src, &["u", "v", "x", "y"]).map_err(|e| anyhow!("line {h_line}: in H: {e}"))?;
    let interval = Interval::new(a, b).map_err(|e| anyhow!("invalid interval: {e}"))?;
    let problem = Problem::new(name, interval, f, h, boundary_a, boundary_b)
        .map_err(|e| anyhow!("invalid problem: {e}"))?;

    let mut options = FileOptions::default();
    if let Some(section) = sections.get("options") {
        for (key, (line_no, value)) in section {
            let line_no = *line_no;
            match key.as_str() {
                "epsilon" | "delta_dup" | "tol_val" => {
                    let v: f64 = value.parse().map_err(|_| {
                        anyhow!("line {line_no}: invalid number `{value}` for `{key}`")
                    })?;
                    if !(v.is_finite() && v > 0.0) {
                        bail!("line {line_no}: `{key}` must be positive and finite");
                    }
                    match key.as_str() {
                        "epsilon" => options.epsilon = Some(v),
                        "delta_dup" => options.delta_dup = Some(v),
                        _ => options.tol_val = Some(v),
                    }
                }
                "grid_n" | "max_nodes" => {
                    let v: usize = value.parse().map_err(|_| {
                        anyhow!("line {line_no}: invalid integer `{value}` for `{key}`")
                    })?;
                    match key.as_str() {
                        "grid_n" => options.grid_n = Some(v),
                        _ => options.max_nodes = Some(v),
                    }
                }
                other => bail!("line {line_no}: unknown key `{other}` in [options]"),
            }
        }
    }

    let mut closed_form = None;
    if let Some(section) = sections.get("oracle") {
        for (key, (line_no, value)) in section {
            let line_no = *line_no;
            match key.as_str() {
                "closed_form" => {
                    let ast = parse(value, &["z"])
                        .map_err(|e| anyhow!("line {line_no}: in closed_form: {e}"))?;
                    closed_form = Some((value.clone(), ast));
                }
                other => bail!("line {line_no}: unknown key `{other}` in [oracle]"),
            }
        }
    }

    Ok(ProblemFile {
        problem,
        options,
        closed_form,
        f_src,
        h_src,
    })
}
