//! One integration run: configuration, execution and the stats row.

use hbvm::hamiltonian::Problem;
use hbvm::integrator::{
    composition6_stormer_verlet, integrate, reference_trajectory, EnergyMeasure, ErrorMeasure, Method, RunConfig,
    StatsRow, Trajectory,
};
use hbvm::nlsolve::SolveOptions;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodKind {
    #[default]
    Hbvm,
    Composition6,
}

impl std::str::FromStr for MethodKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "hbvm" => Ok(MethodKind::Hbvm),
            "composition6" => Ok(MethodKind::Composition6),
            other => Err(format!("unknown method '{other}' (expected hbvm or composition6)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub problem: Problem,
    pub method: MethodKind,
    pub k: usize,
    pub s: usize,
    pub h: f64,
    pub t_end: f64,
    pub options: SolveOptions,
    pub every: usize,
    pub solution_error: bool,
    pub error_measure: ErrorMeasure,
    pub energy: EnergyMeasure,
}

impl RunSpec {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(CliError::Usage(format!("h must be positive, got {}", self.h)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(CliError::Usage(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.every == 0 {
            return Err(CliError::Usage("every must be at least 1".into()));
        }
        match self.method {
            MethodKind::Hbvm => {
                if self.s == 0 || self.k < self.s {
                    return Err(CliError::Usage(format!(
                        "need k >= s >= 1, got k={}, s={}",
                        self.k, self.s
                    )));
                }
                self.options.validate()?;
            }
            MethodKind::Composition6 => {
                if self.problem.build_separable().is_none() {
                    return Err(CliError::Usage(format!(
                        "composition6 needs a separable problem; {} is not",
                        self.problem
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Runs `spec`; the trajectory is returned alongside the stats row.
pub fn execute(spec: &RunSpec) -> CliResult<(StatsRow, Trajectory)> {
    spec.validate()?;
    let system = spec.problem.build();
    let (traj, mut stats, method) = match spec.method {
        MethodKind::Hbvm => {
            let cfg = RunConfig {
                record_every: spec.every,
                ..RunConfig::new(spec.k, spec.s, spec.h, spec.t_end, spec.options)
            };
            let (traj, stats) = integrate(&cfg, system.as_ref())?;
            (
                traj,
                stats,
                Method::Hbvm {
                    k: spec.k,
                    s: spec.s,
                    options: spec.options,
                },
            )
        }
        MethodKind::Composition6 => {
            let sep = spec.problem.build_separable().expect("validated");
            let (traj, stats) = composition6_stormer_verlet(sep.as_ref(), spec.h, spec.t_end, spec.every)?;
            (traj, stats, Method::Composition6)
        }
    };
    if spec.solution_error && stats.all_converged {
        let reference = reference_trajectory(system.as_ref(), spec.h, spec.t_end, spec.every)?;
        stats.solution_error = Some(spec.error_measure.evaluate(&traj, &reference)?);
    }
    let row = StatsRow {
        method,
        h: spec.h,
        t_end: spec.t_end,
        stats,
        energy: spec.energy,
    };
    Ok((row, traj))
}
