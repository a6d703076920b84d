//! Sweep specification files.
//!
//! ```text
//! # comment
//! problem = fpu          # keys before the first [run] are defaults
//! t_end = 10
//!
//! [run]
//! k = 6
//! s = 3
//! h = 5e-4
//! solver = fixed-point
//! ```
//!
//! Keys: `problem`, `method` (`hbvm` | `composition6`), `k`, `s`, `h`,
//! `t_end`, `solver`, `mu`, `tol`, `max_outer`, `every`, `solution_error`
//! (`true` | `false`), `error_measure`, `ham_error`.

use std::collections::BTreeMap;

use hbvm::integrator::{EnergyMeasure, ErrorMeasure};
use hbvm::nlsolve::{SolveOptions, SolverKind};

use crate::error::{CliError, CliResult};
use crate::run::{MethodKind, RunSpec};

const KEYS: [&str; 14] = [
    "problem",
    "method",
    "k",
    "s",
    "h",
    "t_end",
    "solver",
    "mu",
    "tol",
    "max_outer",
    "every",
    "solution_error",
    "error_measure",
    "ham_error",
];

type Block = BTreeMap<String, (String, usize)>;

fn usage(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("sweep spec line {line}: {msg}"))
}

/// Parses a sweep spec into runs, in file order.
pub fn parse_sweep(text: &str) -> CliResult<Vec<RunSpec>> {
    let mut defaults = Block::new();
    let mut blocks: Vec<Block> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if line != "[run]" {
                return Err(usage(line_no, format!("unknown section '{line}'")));
            }
            blocks.push(Block::new());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| usage(line_no, "expected 'key = value'"))?;
        if !KEYS.contains(&key) {
            return Err(usage(line_no, format!("unknown key '{key}'")));
        }
        if value.is_empty() {
            return Err(usage(line_no, format!("empty value for '{key}'")));
        }
        let target = blocks.last_mut().unwrap_or(&mut defaults);
        if target.insert(key.to_string(), (value.to_string(), line_no)).is_some() {
            return Err(usage(line_no, format!("duplicate key '{key}'")));
        }
    }
    blocks
        .into_iter()
        .map(|block| {
            let mut merged = defaults.clone();
            merged.extend(block);
            build_run(&merged)
        })
        .collect()
}

fn get<T: std::str::FromStr>(block: &Block, key: &str, default: Option<T>) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    match block.get(key) {
        Some((value, line)) => value
            .parse()
            .map_err(|e| usage(*line, format!("bad value for '{key}': {e}"))),
        None => default.ok_or_else(|| CliError::Usage(format!("sweep spec: run is missing required key '{key}'"))),
    }
}

fn build_run(block: &Block) -> CliResult<RunSpec> {
    let method: MethodKind = get(block, "method", Some(MethodKind::Hbvm))?;
    let needs_ks = method == MethodKind::Hbvm;
    let base = SolveOptions::default();
    let options = SolveOptions {
        solver: get::<SolverKind>(block, "solver", Some(base.solver))?,
        mu: get(block, "mu", Some(base.mu))?,
        tol: get(block, "tol", Some(base.tol))?,
        max_outer: get(block, "max_outer", Some(base.max_outer))?,
    };
    let spec = RunSpec {
        problem: get(block, "problem", None)?,
        method,
        k: get(block, "k", if needs_ks { None } else { Some(0) })?,
        s: get(block, "s", if needs_ks { None } else { Some(0) })?,
        h: get(block, "h", None)?,
        t_end: get(block, "t_end", None)?,
        options,
        every: get(block, "every", Some(1))?,
        solution_error: get(block, "solution_error", Some(false))?,
        error_measure: get::<ErrorMeasure>(block, "error_measure", Some(ErrorMeasure::default()))?,
        energy: get::<EnergyMeasure>(block, "ham_error", Some(EnergyMeasure::default()))?,
    };
    spec.validate()?;
    Ok(spec)
}
