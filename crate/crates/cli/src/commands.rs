use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use hbvm::convergence::analyze as amplification;
use hbvm::integrator::{fmt_real, STATS_HEADER};
use hbvm::nalgebra::DMatrix;
use hbvm::splitting::{build_splitting, verify_conditions, MAX_SPLIT_STAGES};
use hbvm::tableau::build_tableau;
use rayon::prelude::*;

use crate::error::{at_path, CliError, CliResult};
use crate::run::{execute, RunSpec};
use crate::sweep::parse_sweep;

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(at_path(p))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

const LONG_HEADER: &str = "name,row,col,value";

/// Rows `name,i,j,value` with 1-based indices.
fn write_matrix(w: &mut dyn Write, name: &str, m: &DMatrix<f64>) -> io::Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            writeln!(w, "{name},{},{},{}", i + 1, j + 1, fmt_real(m[(i, j)]))?;
        }
    }
    Ok(())
}

fn write_vector(w: &mut dyn Write, name: &str, v: &[f64]) -> io::Result<()> {
    for (i, x) in v.iter().enumerate() {
        writeln!(w, "{name},{},1,{}", i + 1, fmt_real(*x))?;
    }
    Ok(())
}

pub fn tableau(k: usize, s: usize, out: Option<&Path>) -> CliResult<()> {
    let t = build_tableau(k, s)?;
    let mut w = open_output(out)?;
    writeln!(w, "{LONG_HEADER}")?;
    write_matrix(&mut *w, "A", &t.a)?;
    write_vector(&mut *w, "b", t.weights())?;
    write_vector(&mut *w, "c", t.nodes())?;
    write_matrix(&mut *w, "Xhat", &t.xhat)?;
    w.flush()?;
    Ok(())
}

pub fn splitting(s: usize, out: Option<&Path>) -> CliResult<()> {
    if !(2..=MAX_SPLIT_STAGES).contains(&s) {
        return Err(CliError::Usage(format!("s must be in 2..={MAX_SPLIT_STAGES}, got {s}")));
    }
    let data = build_splitting(s)?;
    let mut w = open_output(out)?;
    writeln!(w, "{LONG_HEADER}")?;
    write_vector(&mut *w, "chat", &data.chat)?;
    write_vector(&mut *w, "d", &[data.d])?;
    write_matrix(&mut *w, "L", &data.l)?;
    write_matrix(&mut *w, "U", &data.u)?;
    write_vector(&mut *w, "residual", &verify_conditions(&data))?;
    w.flush()?;
    Ok(())
}

fn fmt_location(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        fmt_real(x)
    }
}

pub fn analyze(s_list: &[usize], mu_list: &[u32], out: Option<&Path>) -> CliResult<()> {
    if let Some(&bad) = s_list.iter().find(|s| !(2..=MAX_SPLIT_STAGES).contains(*s)) {
        return Err(CliError::Usage(format!(
            "s must be in 2..={MAX_SPLIT_STAGES}, got {bad}"
        )));
    }
    if mu_list.contains(&0) {
        return Err(CliError::Usage("mu must be at least 1".into()));
    }
    let reports = s_list
        .iter()
        .map(|&s| amplification(&build_splitting(s)?, mu_list))
        .collect::<hbvm::Result<Vec<_>>>()?;
    let mut w = open_output(out)?;
    writeln!(w, "s,mu,rho_star,rho_tilde,rho_inf,x_star")?;
    for r in &reports {
        writeln!(
            w,
            "{},inf,{},{},{},{}",
            r.s,
            fmt_real(r.rho_star),
            fmt_real(r.rho_tilde),
            fmt_real(r.rho_inf),
            fmt_location(r.x_star)
        )?;
        for a in &r.averaged {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.s,
                a.mu,
                fmt_real(a.rho_star),
                fmt_real(a.rho_tilde),
                fmt_real(a.rho_inf),
                fmt_location(a.x_star)
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn integrate(spec: &RunSpec, traj_out: Option<&Path>, stats_out: Option<&Path>) -> CliResult<()> {
    let (row, traj) = execute(spec)?;
    if let Some(path) = traj_out {
        let mut w = BufWriter::new(File::create(path).map_err(at_path(path))?);
        traj.write_csv(&mut w)?;
        w.flush()?;
    }
    let mut w = open_output(stats_out)?;
    writeln!(w, "{STATS_HEADER}")?;
    writeln!(w, "{}", row.to_csv())?;
    w.flush()?;
    let st = &row.stats;
    match st.failure_time {
        None => eprintln!(
            "{}: {} steps, max |H - H0| = {:.3e}, converged",
            spec.problem, st.steps, st.max_hamiltonian_error
        ),
        Some(t) => eprintln!(
            "{}: stopped at t = {t} after {} steps, not converged",
            spec.problem, st.steps
        ),
    }
    Ok(())
}

pub fn sweep(spec_path: &Path, out: Option<&Path>, jobs: usize) -> CliResult<()> {
    if jobs == 0 {
        return Err(CliError::Usage("jobs must be at least 1".into()));
    }
    let text = fs::read_to_string(spec_path).map_err(at_path(spec_path))?;
    let runs = parse_sweep(&text)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    let rows = pool.install(|| {
        runs.par_iter()
            .map(|r| execute(r).map(|(row, _)| row.to_csv()))
            .collect::<Vec<_>>()
    });
    let mut w = open_output(out)?;
    writeln!(w, "{STATS_HEADER}")?;
    for row in rows {
        writeln!(w, "{}", row?)?;
    }
    w.flush()?;
    Ok(())
}
