//! The per-step discrete problem in the size-`s` formulation
//!
//! ```text
//! F(γ) = γ − P_sᵀΩ ⊗ J ∇H(e ⊗ y₀ + h P_{s+1}X̂_s ⊗ I γ) = 0
//! ```
//!
//! and three ways to solve it: fixed-point iteration, simplified Newton on the
//! full `2ms × 2ms` matrix, and the inner-outer splitting iteration in the
//! transformed unknowns `γ̂ = P̂ ⊗ I γ`, which only factors `I − h d_s J∇²H₀`.
//!
//! Block vectors are stored as `2m × s` matrices whose column `j` is `γ_j`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, SymplecticJ};
use crate::splitting::SplittingData;
use crate::tableau::HbvmTableau;

/// Which iteration solves the stage equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    FixedPoint,
    SimplifiedNewton,
    Splitting,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::FixedPoint => "fixed-point",
            SolverKind::SimplifiedNewton => "newton",
            SolverKind::Splitting => "splitting",
        }
    }

    /// Newton-type solvers evaluate and factor a Jacobian every step.
    pub fn uses_hessian(self) -> bool {
        !matches!(self, SolverKind::FixedPoint)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed-point" => Ok(SolverKind::FixedPoint),
            "newton" | "simplified-newton" => Ok(SolverKind::SimplifiedNewton),
            "splitting" => Ok(SolverKind::Splitting),
            other => Err(Error::InvalidArgument(format!(
                "unknown solver '{other}' (expected fixed-point, newton or splitting)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    /// Outer-iteration cap for Newton-type solvers; fixed-point gets ten times this.
    pub max_outer: usize,
    /// Inner iterations per outer iteration of the splitting solver.
    pub mu: usize,
    pub solver: SolverKind,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_outer: 100,
            mu: 2,
            solver: SolverKind::Splitting,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.mu == 0 {
            return Err(Error::InvalidArgument("mu must be at least 1".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidArgument("max_outer must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Coefficients `γ_0, …, γ_{s−1}` as columns.
    pub gamma: DMatrix<f64>,
    pub outer_iterations: usize,
    pub inner_iterations_total: usize,
    /// `k` per evaluation of the stage field.
    pub gradient_evaluations: usize,
    pub converged: bool,
    /// `‖·‖∞` of the last correction, the quantity tested against `tol`.
    pub residual_norm: f64,
}

/// One step's discrete problem.
#[derive(Clone, Copy)]
pub struct StageProblem<'a> {
    pub tableau: &'a HbvmTableau,
    pub system: &'a dyn Hamiltonian,
    pub y0: &'a [f64],
    /// Nonzero; negative values integrate backwards.
    pub h: f64,
}

impl<'a> StageProblem<'a> {
    pub fn new(tableau: &'a HbvmTableau, system: &'a dyn Hamiltonian, y0: &'a [f64], h: f64) -> Result<Self> {
        if !(h.is_finite() && h != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "stepsize must be finite and nonzero, got {h}"
            )));
        }
        if y0.len() != system.dim() {
            return Err(Error::InvalidArgument(format!(
                "state has length {}, system dimension is {}",
                y0.len(),
                system.dim()
            )));
        }
        Ok(Self { tableau, system, y0, h })
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    pub fn s(&self) -> usize {
        self.tableau.s
    }

    pub fn zero_gamma(&self) -> DMatrix<f64> {
        DMatrix::zeros(self.dim(), self.s())
    }

    /// `P_sᵀΩ ⊗ J ∇H(stages(γ))`.
    pub fn projected_field(&self, gamma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.projected_field_scaled(gamma)?.0)
    }

    /// [`StageProblem::projected_field`] and `‖J∇H(Y_i)‖∞` over the stages,
    /// which sets the roundoff level of the result.
    fn projected_field_scaled(&self, gamma: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
        let stages = stages_from_gamma(self, gamma);
        let n = self.dim();
        let j = SymplecticJ::new(n / 2);
        let mut field = DMatrix::zeros(n, self.tableau.k);
        let mut grad = vec![0.0; n];
        let mut jg = vec![0.0; n];
        for (i, stage) in stages.column_iter().enumerate() {
            self.system.gradient(stage.as_slice(), &mut grad)?;
            j.apply(&grad, &mut jg);
            field.column_mut(i).copy_from_slice(&jg);
        }
        let scale = norm_inf(&field);
        Ok((field * self.tableau.projection().transpose(), scale))
    }

    /// The step increment `h γ₀`.
    pub fn increment(&self, gamma: &DMatrix<f64>) -> Vec<f64> {
        gamma.column(0).iter().map(|g| self.h * g).collect()
    }

    /// `y₁ = y₀ + h γ₀`.
    pub fn update(&self, gamma: &DMatrix<f64>) -> Vec<f64> {
        self.y0
            .iter()
            .zip(gamma.column(0).iter())
            .map(|(y, g)| y + self.h * g)
            .collect()
    }
}

/// Stages `Y_i = y₀ + h Σ_j (P_{s+1}X̂_s)_{ij} γ_j`, as the columns of a `2m × k` matrix.
pub fn stages_from_gamma(p: &StageProblem<'_>, gamma: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = gamma * p.tableau.stage_map().transpose() * p.h;
    for mut col in y.column_iter_mut() {
        for (v, y0) in col.iter_mut().zip(p.y0) {
            *v += y0;
        }
    }
    y
}

/// `F(γ)`.
pub fn residual_f(p: &StageProblem<'_>, gamma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(residual_f_scaled(p, gamma)?.0)
}

fn residual_f_scaled(p: &StageProblem<'_>, gamma: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (field, scale) = p.projected_field_scaled(gamma)?;
    Ok((gamma - field, scale))
}

fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn small_enough(correction: f64, size: f64, tol: f64) -> bool {
    correction <= tol * (1.0 + size)
}

/// Roundoff allowance of the floor test, in units of `ε·‖J∇H(Y)‖∞`.
const ROUNDOFF_FACTOR: f64 = 100.0;

/// Stopping test. Converged when the correction is below `tol·(1+‖γ‖)` and
/// no longer halving (or below one ulp of `‖γ‖`), or when it has stopped
/// decreasing at the roundoff level of the stage field, which in stiff
/// problems lies far above `tol·‖γ‖`.
#[derive(Debug, Clone, Copy)]
struct StopRule {
    tol: f64,
    previous: f64,
}

impl StopRule {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            previous: f64::INFINITY,
        }
    }

    fn done(&mut self, correction: f64, size: f64, field_scale: f64) -> bool {
        let stalled = correction > 0.5 * self.previous || small_enough(correction, size, f64::EPSILON);
        let floor =
            correction >= self.previous && small_enough(correction, field_scale, ROUNDOFF_FACTOR * f64::EPSILON);
        self.previous = correction;
        (stalled && small_enough(correction, size, self.tol)) || floor
    }
}

/// `γ^{ℓ+1} = P_sᵀΩ ⊗ J∇H(stages(γ^ℓ))` from `γ⁰ = 0`.
pub fn fixed_point_solve(p: &StageProblem<'_>, opts: &SolveOptions) -> Result<SolveResult> {
    let k = p.tableau.k;
    let cap = opts.max_outer * 10;
    let mut gamma = p.zero_gamma();
    let mut result = SolveResult {
        gamma: gamma.clone(),
        outer_iterations: 0,
        inner_iterations_total: 0,
        gradient_evaluations: 0,
        converged: false,
        residual_norm: f64::INFINITY,
    };
    let mut stop = StopRule::new(opts.tol);
    for _ in 0..cap {
        let (next, scale) = p.projected_field_scaled(&gamma)?;
        result.outer_iterations += 1;
        result.gradient_evaluations += k;
        let change = norm_inf(&(&next - &gamma));
        gamma = next;
        result.residual_norm = change;
        if !change.is_finite() {
            break;
        }
        if stop.done(change, norm_inf(&gamma), scale) {
            result.converged = true;
            break;
        }
    }
    result.gamma = gamma;
    Ok(result)
}

/// `M₀ = I − h X_s ⊗ J∇²H₀` of size `2ms`.
pub fn newton_matrix(xs: &DMatrix<f64>, h: f64, jhess: &DMatrix<f64>) -> DMatrix<f64> {
    let n = jhess.nrows();
    let s = xs.nrows();
    let mut m = DMatrix::identity(n * s, n * s);
    for bi in 0..s {
        for bj in 0..s {
            let c = -h * xs[(bi, bj)];
            if c == 0.0 {
                continue;
            }
            let mut block = m.view_mut((bi * n, bj * n), (n, n));
            block += jhess * c;
        }
    }
    m
}

/// Simplified Newton in the original `γ` variables; one `2ms × 2ms`
/// factorization per step.
pub fn simplified_newton_solve(p: &StageProblem<'_>, opts: &SolveOptions) -> Result<SolveResult> {
    simplified_newton_from(p, opts, p.zero_gamma())
}

pub(crate) fn simplified_newton_from(
    p: &StageProblem<'_>,
    opts: &SolveOptions,
    mut gamma: DMatrix<f64>,
) -> Result<SolveResult> {
    let n = p.dim();
    let s = p.s();
    let jhess = SymplecticJ::new(n / 2).left_multiply(&p.system.hessian(p.y0)?);
    let lu = newton_matrix(&p.tableau.xs(), p.h, &jhess).lu();
    if !lu.is_invertible() {
        return Err(Error::Singular("simplified Newton matrix"));
    }
    let k = p.tableau.k;
    let mut result = SolveResult {
        gamma: gamma.clone(),
        outer_iterations: 0,
        inner_iterations_total: 0,
        gradient_evaluations: 0,
        converged: false,
        residual_norm: f64::INFINITY,
    };
    let mut stop = StopRule::new(opts.tol);
    for _ in 0..opts.max_outer {
        let (f, scale) = residual_f_scaled(p, &gamma)?;
        result.outer_iterations += 1;
        result.gradient_evaluations += k;
        let rhs = DVector::from_iterator(n * s, f.iter().map(|v| -v));
        let delta = lu.solve(&rhs).ok_or(Error::Singular("simplified Newton matrix"))?;
        let delta = DMatrix::from_column_slice(n, s, delta.as_slice());
        gamma += &delta;
        let change = norm_inf(&delta);
        result.residual_norm = change;
        if !change.is_finite() {
            break;
        }
        if stop.done(change, norm_inf(&gamma), scale) {
            result.converged = true;
            break;
        }
    }
    result.gamma = gamma;
    Ok(result)
}

/// Dense LU (row pivoting) of `I − h d J∇²H₀`, reused for every diagonal
/// block of the inner iteration.
#[derive(Debug, Clone)]
pub struct StepFactorization {
    lu: LU<f64, Dyn, Dyn>,
}

impl StepFactorization {
    pub fn dim(&self) -> usize {
        self.lu.l().nrows()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu.solve(rhs).ok_or(Error::Singular("I - h d J Hess"))
    }

    pub fn determinant(&self) -> f64 {
        self.lu.determinant()
    }
}

/// Factors `I − h d J ∇²H₀`.
pub fn factor_step_matrix(h: f64, d: f64, hess0: &DMatrix<f64>) -> Result<StepFactorization> {
    let n = hess0.nrows();
    if !n.is_multiple_of(2) || hess0.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "Hessian must be square of even order, got {:?}",
            hess0.shape()
        )));
    }
    let jhess = SymplecticJ::new(n / 2).left_multiply(hess0);
    let m = DMatrix::identity(n, n) - jhess * (h * d);
    let scale = norm_inf(&m).max(1.0);
    let lu = m.lu();
    let u = lu.u();
    if (0..n).any(|i| u[(i, i)].abs() <= 1e-15 * scale) {
        return Err(Error::Singular("I - h d J Hess"));
    }
    Ok(StepFactorization { lu })
}

/// The linear inner iteration
/// `[I − hL̂ ⊗ K] Δ^{r+1} = hL̂(Û − I) ⊗ K Δ^r + η`, `K = J∇²H₀`,
/// solved by block forward substitution against one factorization.
pub struct InnerSolver<'a> {
    data: &'a SplittingData,
    h: f64,
    jhess: DMatrix<f64>,
    coupling: DMatrix<f64>,
    factor: StepFactorization,
}

impl<'a> InnerSolver<'a> {
    pub fn new(data: &'a SplittingData, h: f64, hess0: &DMatrix<f64>) -> Result<Self> {
        let n = hess0.nrows();
        Ok(Self {
            data,
            h,
            jhess: SymplecticJ::new(n / 2).left_multiply(hess0),
            coupling: data.lower_coupling(),
            factor: factor_step_matrix(h, data.d, hess0)?,
        })
    }

    /// One inner iteration: returns `Δ^{r+1}` given `Δ^r`.
    pub fn sweep(&self, eta: &DMatrix<f64>, delta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let s = self.data.s;
        let n = eta.nrows();
        let mut rhs = eta.clone();
        if delta.iter().any(|&v| v != 0.0) {
            let k_delta = &self.jhess * delta;
            rhs += k_delta * self.coupling.transpose() * self.h;
        }
        let mut next = DMatrix::zeros(n, s);
        let mut k_next = DMatrix::zeros(n, s);
        for i in 0..s {
            let mut r: DVector<f64> = rhs.column(i).into_owned();
            for j in 0..i {
                let lij = self.data.l[(i, j)];
                if lij != 0.0 {
                    r.axpy(self.h * lij, &k_next.column(j), 1.0);
                }
            }
            let di = self.factor.solve(&r)?;
            k_next.set_column(i, &(&self.jhess * &di));
            next.set_column(i, &di);
        }
        Ok(next)
    }

    /// `μ` sweeps from `Δ^{ℓ,0} = 0`.
    pub fn solve(&self, eta: &DMatrix<f64>, mu: usize) -> Result<DMatrix<f64>> {
        let mut delta = DMatrix::zeros(eta.nrows(), eta.ncols());
        for _ in 0..mu {
            delta = self.sweep(eta, &delta)?;
        }
        Ok(delta)
    }
}

/// The inner-outer splitting iteration.
pub fn splitting_solve(p: &StageProblem<'_>, data: &SplittingData, opts: &SolveOptions) -> Result<SolveResult> {
    if data.s != p.s() {
        return Err(Error::InvalidArgument(format!(
            "splitting data is for s={}, tableau has s={}",
            data.s,
            p.s()
        )));
    }
    let inner = InnerSolver::new(data, p.h, &p.system.hessian(p.y0)?)?;
    let phat_t = data.phat.transpose();
    let phat_inv_t = data.phat_inv.transpose();
    let k = p.tableau.k;

    let mut gamma_hat = p.zero_gamma();
    let mut gamma = p.zero_gamma();
    let mut result = SolveResult {
        gamma: gamma.clone(),
        outer_iterations: 0,
        inner_iterations_total: 0,
        gradient_evaluations: 0,
        converged: false,
        residual_norm: f64::INFINITY,
    };
    let mut stop = StopRule::new(opts.tol);
    for _ in 0..opts.max_outer {
        let (f, scale) = residual_f_scaled(p, &gamma)?;
        let eta = -(f * &phat_t);
        result.outer_iterations += 1;
        result.gradient_evaluations += k;
        let delta = inner.solve(&eta, opts.mu)?;
        result.inner_iterations_total += opts.mu;
        gamma_hat += &delta;
        gamma = &gamma_hat * &phat_inv_t;
        let change = norm_inf(&delta);
        result.residual_norm = change;
        if !change.is_finite() {
            break;
        }
        if stop.done(change, norm_inf(&gamma_hat), scale) {
            result.converged = true;
            break;
        }
    }
    result.gamma = gamma;
    Ok(result)
}

/// Dispatches on `opts.solver`; `data` is required for the splitting solver.
pub fn solve(p: &StageProblem<'_>, data: Option<&SplittingData>, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    match opts.solver {
        SolverKind::FixedPoint => fixed_point_solve(p, opts),
        SolverKind::SimplifiedNewton => simplified_newton_solve(p, opts),
        SolverKind::Splitting => {
            let data = data.ok_or_else(|| Error::InvalidArgument("splitting solver needs splitting data".into()))?;
            splitting_solve(p, data, opts)
        }
    }
}
