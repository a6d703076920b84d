//! Constant-stepsize integration with per-run statistics, and the explicit
//! order-6 composition of Störmer-Verlet used as a baseline on separable
//! problems.

use std::io::{self, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, SeparableHamiltonian};
use crate::nlsolve::{solve, SolveOptions, SolveResult, SolverKind, StageProblem};
use crate::splitting::{build_splitting, SplittingData};
use crate::tableau::{build_tableau, HbvmTableau};

/// States with a larger Euclidean norm count as a diverged explicit run.
pub const DIVERGENCE_THRESHOLD: f64 = 1e10;

/// Substep fractions of the 9-stage order-6 triple-jump composition: the
/// triple jump `(γ₁, γ₂, γ₁)`, `γ₁ = 1/(2 − 2^{1/(p+1)})`,
/// `γ₂ = −2^{1/(p+1)}γ₁`, applied to Störmer-Verlet with `p = 2` and then
/// to the result with `p = 4`.
#[allow(clippy::excessive_precision)]
pub const COMPOSITION6_COEFFS: [f64; 9] = [
    1.5872249277222432,
    -1.999778097355123,
    1.5872249277222432,
    -1.8232426634848289,
    2.2971418107909303,
    -1.8232426634848289,
    1.5872249277222432,
    -1.999778097355123,
    1.5872249277222432,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub k: usize,
    pub s: usize,
    pub h: f64,
    pub t_end: f64,
    pub options: SolveOptions,
    /// Keep every `record_every`-th state in the trajectory, plus the final
    /// one. Statistics always use every step.
    pub record_every: usize,
}

impl RunConfig {
    pub fn new(k: usize, s: usize, h: f64, t_end: f64, options: SolveOptions) -> Self {
        Self {
            k,
            s,
            h,
            t_end,
            options,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 || self.k < self.s {
            return Err(Error::InvalidArgument(format!(
                "need k >= s >= 1, got k={}, s={}",
                self.k, self.s
            )));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidArgument(format!("h must be positive, got {}", self.h)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be at least 1".into()));
        }
        self.options.validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub steps: usize,
    pub total_outer_iterations: usize,
    pub total_inner_iterations: usize,
    pub gradient_evaluations: usize,
    pub hessian_evaluations: usize,
    pub factorizations: usize,
    /// `max_n |H(y_n) − H(y_0)|`.
    pub max_hamiltonian_error: f64,
    /// `max_n |H(y_n) − H(y_0)| / |H(y_0)|` (absolute when `H(y_0) = 0`).
    pub max_relative_hamiltonian_error: f64,
    pub solution_error: Option<f64>,
    pub all_converged: bool,
    /// Start time of the step that failed to converge (or diverged).
    pub failure_time: Option<f64>,
}

impl RunStats {
    fn record_energy(&mut self, h: f64, h0: f64) {
        let err = (h - h0).abs();
        let scale = if h0 == 0.0 { 1.0 } else { h0.abs() };
        self.max_hamiltonian_error = self.max_hamiltonian_error.max(err);
        self.max_relative_hamiltonian_error = self.max_relative_hamiltonian_error.max(err / scale);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    fn push(&mut self, t: f64, y: &[f64]) {
        self.times.push(t);
        self.states.push(y.to_vec());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        self.times.last().map(|&t| (t, self.states.last().unwrap().as_slice()))
    }

    /// CSV with header `t,y_1,...,y_{2m}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let dim = self.states.first().map_or(0, Vec::len);
        write!(w, "t")?;
        for i in 1..=dim {
            write!(w, ",y_{i}")?;
        }
        writeln!(w)?;
        for (t, y) in self.times.iter().zip(&self.states) {
            write!(w, "{}", fmt_real(*t))?;
            for v in y {
                write!(w, ",{}", fmt_real(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// 17 significant digits, scientific notation.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// `⌈t_end / h⌉`, ignoring representation noise in the ratio.
pub fn step_count(h: f64, t_end: f64) -> usize {
    let ratio = t_end / h;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Solves the stage equations of one method for arbitrary steps.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub tableau: HbvmTableau,
    pub splitting: Option<SplittingData>,
    pub options: SolveOptions,
}

impl Stepper {
    pub fn new(k: usize, s: usize, options: SolveOptions) -> Result<Self> {
        options.validate()?;
        let tableau = build_tableau(k, s)?;
        let splitting = match options.solver {
            SolverKind::Splitting => Some(build_splitting(s)?),
            _ => None,
        };
        Ok(Self {
            tableau,
            splitting,
            options,
        })
    }

    /// Advances `y` by `h` (which may be negative). Returns `y₁` and the
    /// solver's report; `y₁` is meaningless when the solver did not converge.
    pub fn step(&self, sys: &dyn Hamiltonian, y: &[f64], h: f64) -> Result<(Vec<f64>, SolveResult)> {
        let problem = StageProblem::new(&self.tableau, sys, y, h)?;
        let result = solve(&problem, self.splitting.as_ref(), &self.options)?;
        Ok((problem.update(&result.gamma), result))
    }

    /// Like [`Stepper::step`] but returns the increment `y₁ − y₀ = h γ₀`.
    pub fn step_increment(&self, sys: &dyn Hamiltonian, y: &[f64], h: f64) -> Result<(Vec<f64>, SolveResult)> {
        let problem = StageProblem::new(&self.tableau, sys, y, h)?;
        let result = solve(&problem, self.splitting.as_ref(), &self.options)?;
        Ok((problem.increment(&result.gamma), result))
    }
}

/// Integrates `sys` from its initial state over `[0, t_end]` with HBVM(k,s).
pub fn integrate(cfg: &RunConfig, sys: &dyn Hamiltonian) -> Result<(Trajectory, RunStats)> {
    cfg.validate()?;
    let stepper = Stepper::new(cfg.k, cfg.s, cfg.options)?;
    integrate_from(
        &stepper,
        sys,
        &sys.initial_state(),
        cfg.h,
        step_count(cfg.h, cfg.t_end),
        cfg.record_every,
    )
}

/// Takes `steps` steps of size `h` from `y0` at `t = 0`.
pub fn integrate_from(
    stepper: &Stepper,
    sys: &dyn Hamiltonian,
    y0: &[f64],
    h: f64,
    steps: usize,
    record_every: usize,
) -> Result<(Trajectory, RunStats)> {
    let every = record_every.max(1);
    let h0 = sys.energy(y0)?;
    let mut traj = Trajectory::default();
    traj.push(0.0, y0);
    let mut stats = RunStats {
        all_converged: true,
        ..Default::default()
    };
    let newton_type = stepper.options.solver.uses_hessian();
    let mut y = y0.to_vec();
    let mut carry = vec![0.0; y.len()];
    for n in 1..=steps {
        let (dy, res) = stepper.step_increment(sys, &y, h)?;
        stats.total_outer_iterations += res.outer_iterations;
        stats.total_inner_iterations += res.inner_iterations_total;
        stats.gradient_evaluations += res.gradient_evaluations;
        if newton_type {
            stats.hessian_evaluations += 1;
            stats.factorizations += 1;
        }
        if !res.converged {
            stats.all_converged = false;
            stats.failure_time = Some((n - 1) as f64 * h);
            break;
        }
        compensated_add(&mut y, &mut carry, &dy);
        stats.steps = n;
        stats.record_energy(sys.energy(&y)?, h0);
        if n % every == 0 {
            traj.push(n as f64 * h, &y);
        }
    }
    if !stats.steps.is_multiple_of(every) {
        traj.push(stats.steps as f64 * h, &y);
    }
    Ok((traj, stats))
}

/// `y += dy` with Kahan compensation; `carry` holds the lost low-order bits.
fn compensated_add(y: &mut [f64], carry: &mut [f64], dy: &[f64]) {
    for ((yi, ci), di) in y.iter_mut().zip(carry.iter_mut()).zip(dy) {
        let a = di + *ci;
        let next = *yi + a;
        *ci = (*yi - next) + a;
        *yi = next;
    }
}

/// High-accuracy reference for solution errors: HBVM(10,5) with simplified
/// Newton on the same grid.
pub fn reference_trajectory(sys: &dyn Hamiltonian, h: f64, t_end: f64, record_every: usize) -> Result<Trajectory> {
    let opts = SolveOptions {
        solver: SolverKind::SimplifiedNewton,
        ..Default::default()
    };
    let cfg = RunConfig {
        k: 10,
        s: 5,
        h,
        t_end,
        options: opts,
        record_every,
    };
    let (traj, stats) = integrate(&cfg, sys)?;
    if !stats.all_converged {
        return Err(Error::InvalidArgument("reference integration did not converge".into()));
    }
    Ok(traj)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `max_t ‖y(t) − y_ref(t)‖₂ / (1 + ‖y_ref(t)‖₂)` over the times of `traj`,
/// each of which must appear in `reference`.
pub fn solution_error(traj: &Trajectory, reference: &Trajectory) -> Result<f64> {
    let mut j = 0;
    let mut worst = 0.0f64;
    for (t, y) in traj.times.iter().zip(&traj.states) {
        let tol = 1e-9 * t.abs().max(1.0);
        while j < reference.times.len() && reference.times[j] < t - tol {
            j += 1;
        }
        if j == reference.times.len() || (reference.times[j] - t).abs() > tol {
            return Err(Error::GridMismatch(format!("time {t} missing from the reference")));
        }
        let r = &reference.states[j];
        if r.len() != y.len() {
            return Err(Error::GridMismatch("state dimensions differ".into()));
        }
        let diff: Vec<f64> = y.iter().zip(r).map(|(a, b)| a - b).collect();
        worst = worst.max(norm2(&diff) / (1.0 + norm2(r)));
    }
    Ok(worst)
}

/// `‖y(t_N) − y_ref(t_N)‖₂` at the last time of `traj`, which must appear
/// in `reference`.
pub fn final_error(traj: &Trajectory, reference: &Trajectory) -> Result<f64> {
    let (t, y) = traj
        .last()
        .ok_or_else(|| Error::GridMismatch("empty trajectory".into()))?;
    let last = Trajectory {
        times: vec![t],
        states: vec![y.to_vec()],
    };
    let scaled = solution_error(&last, reference)?;
    let j = reference
        .times
        .iter()
        .position(|r| (r - t).abs() <= 1e-9 * t.abs().max(1.0))
        .expect("time located by solution_error");
    Ok(scaled * (1.0 + norm2(&reference.states[j])))
}

/// Which solution-error measure to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorMeasure {
    /// [`solution_error`].
    #[default]
    MaxRelative,
    /// [`final_error`].
    FinalAbsolute,
}

impl ErrorMeasure {
    pub fn name(self) -> &'static str {
        match self {
            ErrorMeasure::MaxRelative => "max-relative",
            ErrorMeasure::FinalAbsolute => "final-absolute",
        }
    }

    pub fn evaluate(self, traj: &Trajectory, reference: &Trajectory) -> Result<f64> {
        match self {
            ErrorMeasure::MaxRelative => solution_error(traj, reference),
            ErrorMeasure::FinalAbsolute => final_error(traj, reference),
        }
    }
}

impl FromStr for ErrorMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-relative" => Ok(ErrorMeasure::MaxRelative),
            "final-absolute" => Ok(ErrorMeasure::FinalAbsolute),
            other => Err(Error::InvalidArgument(format!("unknown error measure '{other}'"))),
        }
    }
}

/// Which Hamiltonian-error measure fills the `ham_err` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyMeasure {
    #[default]
    Absolute,
    Relative,
}

impl EnergyMeasure {
    pub fn name(self) -> &'static str {
        match self {
            EnergyMeasure::Absolute => "absolute",
            EnergyMeasure::Relative => "relative",
        }
    }

    pub fn pick(self, stats: &RunStats) -> f64 {
        match self {
            EnergyMeasure::Absolute => stats.max_hamiltonian_error,
            EnergyMeasure::Relative => stats.max_relative_hamiltonian_error,
        }
    }
}

impl FromStr for EnergyMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(EnergyMeasure::Absolute),
            "relative" => Ok(EnergyMeasure::Relative),
            other => Err(Error::InvalidArgument(format!("unknown energy measure '{other}'"))),
        }
    }
}

/// Global errors at `t_end` for each stepsize, against `exact`.
pub fn order_study(
    sys: &dyn Hamiltonian,
    k: usize,
    s: usize,
    h_list: &[f64],
    t_end: f64,
    exact: &dyn Fn(f64) -> Vec<f64>,
) -> Result<Vec<(f64, f64)>> {
    let opts = SolveOptions {
        solver: SolverKind::SimplifiedNewton,
        ..Default::default()
    };
    h_list
        .iter()
        .map(|&h| {
            let cfg = RunConfig {
                record_every: usize::MAX,
                ..RunConfig::new(k, s, h, t_end, opts)
            };
            let (traj, stats) = integrate(&cfg, sys)?;
            if !stats.all_converged {
                return Err(Error::InvalidArgument(format!(
                    "order study run with h={h} did not converge"
                )));
            }
            let (t, y) = traj.last().expect("final state is always recorded");
            let reference = exact(t);
            let diff: Vec<f64> = y.iter().zip(&reference).map(|(a, b)| a - b).collect();
            Ok((h, norm2(&diff)))
        })
        .collect()
}

/// One Störmer-Verlet (kick-drift-kick) substep of size `tau`; two force
/// evaluations.
fn verlet_substep(
    sys: &dyn SeparableHamiltonian,
    q: &mut [f64],
    p: &mut [f64],
    tau: f64,
    force: &mut [f64],
    vel: &mut [f64],
) {
    sys.potential_gradient(q, force);
    for (pi, fi) in p.iter_mut().zip(force.iter()) {
        *pi -= 0.5 * tau * fi;
    }
    sys.kinetic_gradient(p, vel);
    for (qi, vi) in q.iter_mut().zip(vel.iter()) {
        *qi += tau * vi;
    }
    sys.potential_gradient(q, force);
    for (pi, fi) in p.iter_mut().zip(force.iter()) {
        *pi -= 0.5 * tau * fi;
    }
}

/// Explicit order-6 composition of Störmer-Verlet, 18 force evaluations per
/// step. Divergence (state norm above [`DIVERGENCE_THRESHOLD`]) ends the run
/// with `all_converged = false`.
pub fn composition6_stormer_verlet(
    sys: &dyn SeparableHamiltonian,
    h: f64,
    t_end: f64,
    record_every: usize,
) -> Result<(Trajectory, RunStats)> {
    if !(h > 0.0 && h.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need h > 0 and t_end > 0, got h={h}, t_end={t_end}"
        )));
    }
    let every = record_every.max(1);
    let m = sys.half_dim();
    let y0 = sys.initial_state();
    let h0 = sys.energy(&y0)?;
    let (mut q, mut p) = (y0[..m].to_vec(), y0[m..].to_vec());
    let mut force = vec![0.0; m];
    let mut vel = vec![0.0; m];
    let mut y = y0.clone();
    let mut traj = Trajectory::default();
    traj.push(0.0, &y0);
    let mut stats = RunStats {
        all_converged: true,
        ..Default::default()
    };
    for n in 1..=step_count(h, t_end) {
        for gamma in COMPOSITION6_COEFFS {
            verlet_substep(sys, &mut q, &mut p, gamma * h, &mut force, &mut vel);
        }
        stats.gradient_evaluations += 2 * COMPOSITION6_COEFFS.len();
        y[..m].copy_from_slice(&q);
        y[m..].copy_from_slice(&p);
        let size = norm2(&y);
        if size.is_nan() || size > DIVERGENCE_THRESHOLD {
            stats.all_converged = false;
            stats.failure_time = Some((n - 1) as f64 * h);
            break;
        }
        stats.steps = n;
        stats.record_energy(sys.energy(&y)?, h0);
        if n % every == 0 {
            traj.push(n as f64 * h, &y);
        }
    }
    if !stats.steps.is_multiple_of(every) {
        traj.push(stats.steps as f64 * h, &y);
    }
    Ok((traj, stats))
}

/// Header of the one-row statistics CSV.
pub const STATS_HEADER: &str =
    "method,k,s,h,t_end,solver,mu,tol,steps,outer_iters,inner_iters,ham_err,sol_err,converged";

/// Which integrator produced a row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Hbvm { k: usize, s: usize, options: SolveOptions },
    Composition6,
}

/// A statistics row: configuration plus results.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub method: Method,
    pub h: f64,
    pub t_end: f64,
    pub stats: RunStats,
    pub energy: EnergyMeasure,
}

impl StatsRow {
    /// CSV fields in [`STATS_HEADER`] order. Iteration counts print as
    /// `***` when the run did not converge.
    pub fn to_csv(&self) -> String {
        let st = &self.stats;
        let (method, k, s, solver, mu, tol) = match self.method {
            Method::Hbvm { k, s, options } => (
                "hbvm",
                k.to_string(),
                s.to_string(),
                options.solver.name().to_string(),
                if options.solver == SolverKind::Splitting {
                    options.mu.to_string()
                } else {
                    String::new()
                },
                fmt_real(options.tol),
            ),
            Method::Composition6 => (
                "composition6",
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ),
        };
        let (outer, inner) = if st.all_converged {
            (
                st.total_outer_iterations.to_string(),
                st.total_inner_iterations.to_string(),
            )
        } else {
            ("***".to_string(), "***".to_string())
        };
        let ham = if st.all_converged {
            fmt_real(self.energy.pick(st))
        } else {
            "***".to_string()
        };
        let sol = st.solution_error.map(fmt_real).unwrap_or_default();
        format!(
            "{method},{k},{s},{},{},{solver},{mu},{tol},{},{outer},{inner},{ham},{sol},{}",
            fmt_real(self.h),
            fmt_real(self.t_end),
            st.steps,
            st.all_converged
        )
    }
}
