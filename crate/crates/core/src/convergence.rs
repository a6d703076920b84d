//! Linear convergence analysis of the splitting iteration on `y' = λy`.
//!
//! With `q = hλ`, the inner-iteration error obeys `e_{r+1} = Z(q) e_r` with
//! `Z(q) = q (I − qL̂)⁻¹ L̂ (Û − I)`. The factors reported here are
//! `ρ* = max_x ρ(Z(ix))`, `ρ̃ = ρ(L̂(Û − I))` and `ρ∞ = ρ(Û − I)`, plus their
//! `μ`-step averaged versions `‖M^μ‖_∞^{1/μ}`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::splitting::SplittingData;

/// Imaginary-axis scan: `GRID_POINTS` log-spaced samples in `[GRID_MIN, GRID_MAX]`.
pub const GRID_MIN: f64 = 1e-3;
pub const GRID_MAX: f64 = 1e4;
pub const GRID_POINTS: usize = 2000;
const REFINE_RTOL: f64 = 1e-10;

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `Z(q) = q (I − qL̂)⁻¹ L̂ (Û − I)`.
pub fn iteration_matrix(q: Complex64, data: &SplittingData) -> Result<DMatrix<Complex64>> {
    let s = data.s;
    let l = to_complex(&data.l);
    let system = DMatrix::<Complex64>::identity(s, s) - l.scale_complex(q);
    if (0..s).any(|i| system[(i, i)].norm() < 1e-14) {
        return Err(Error::Domain(format!("I - qL is singular at q = {q}")));
    }
    let rhs = to_complex(&data.lower_coupling()) * q;
    system
        .solve_lower_triangular(&rhs)
        .ok_or(Error::Domain(format!("I - qL is singular at q = {q}")))
}

trait ScaleComplex {
    fn scale_complex(&self, q: Complex64) -> Self;
}

impl ScaleComplex for DMatrix<Complex64> {
    fn scale_complex(&self, q: Complex64) -> Self {
        self.map(|v| v * q)
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<Complex64>) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let eig = m.clone().schur().eigenvalues().ok_or(Error::Eigen)?;
    Ok(eig.iter().fold(0.0, |acc, z| acc.max(z.norm())))
}

/// Spectral radius of a real matrix.
pub fn spectral_radius_real(m: &DMatrix<f64>) -> Result<f64> {
    spectral_radius(&to_complex(m))
}

/// Maximum absolute row sum.
pub fn norm_inf(m: &DMatrix<Complex64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn matrix_power(m: &DMatrix<Complex64>, mu: u32) -> DMatrix<Complex64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..mu {
        out = &out * m;
    }
    out
}

/// `ρ(ix)`.
pub fn rho_on_imaginary_axis(x: f64, data: &SplittingData) -> Result<f64> {
    spectral_radius(&iteration_matrix(Complex64::new(0.0, x), data)?)
}

/// `‖Z(ix)^μ‖_∞^{1/μ}`.
pub fn averaged_on_imaginary_axis(x: f64, mu: u32, data: &SplittingData) -> Result<f64> {
    let z = iteration_matrix(Complex64::new(0.0, x), data)?;
    Ok(norm_inf(&matrix_power(&z, mu)).powf(1.0 / mu as f64))
}

/// Maximizes `f` over `x > 0`: log-spaced scan, then golden-section search on
/// the bracket around the best sample. `extra` points are added to the scan.
fn maximize_on_axis<F>(f: F, extra: &[f64]) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let ratio = (GRID_MAX / GRID_MIN).ln() / (GRID_POINTS - 1) as f64;
    let mut grid: Vec<f64> = (0..GRID_POINTS).map(|i| GRID_MIN * (ratio * i as f64).exp()).collect();
    grid.extend(extra.iter().copied().filter(|x| x.is_finite() && *x > 0.0));
    grid.sort_by(f64::total_cmp);

    let values = grid.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let (best, &best_val) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (x, v) = golden_section_max(&f, lo, hi)?;
    Ok(if v > best_val { (v, x) } else { (best_val, grid[best]) })
}

fn golden_section_max<F>(f: &F, mut a: f64, mut b: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while (b - a) > REFINE_RTOL * (a.abs() + b.abs()) {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 > f2 { (x1, f1) } else { (x2, f2) })
}

/// Maximum amplification factor `ρ*` and its location `x*` on the positive
/// imaginary axis (`ρ(ix) = ρ(−ix)`).
pub fn rho_star(data: &SplittingData) -> Result<(f64, f64)> {
    maximize_on_axis(|x| rho_on_imaginary_axis(x, data), &[])
}

/// Nonstiff amplification factor `ρ̃ = ρ(L̂(Û − I))`.
pub fn rho_tilde(data: &SplittingData) -> Result<f64> {
    spectral_radius_real(&data.lower_coupling())
}

/// Stiff amplification factor `ρ∞ = ρ(Û − I)`; zero since `Û − I` is nilpotent.
pub fn rho_inf(data: &SplittingData) -> Result<f64> {
    spectral_radius_real(&data.u_minus_identity())
}

/// Averaged amplification factors for `μ` iterations, infinity norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedFactors {
    pub mu: u32,
    pub rho_star: f64,
    pub rho_tilde: f64,
    pub rho_inf: f64,
    /// Location of the supremum; `f64::INFINITY` when attained in the limit.
    pub x_star: f64,
}

/// `(ρ*_μ, ρ̃_μ, ρ∞_μ)`.
///
/// The supremum over the imaginary axis includes the `|x| → ∞` limit, where
/// `Z(ix) → −(Û − I)` and the value is `ρ∞_μ`.
pub fn averaged_factors(data: &SplittingData, mu: u32) -> Result<AveragedFactors> {
    if mu == 0 {
        return Err(Error::InvalidArgument("mu must be at least 1".into()));
    }
    let root = 1.0 / mu as f64;
    let tilde = norm_inf(&matrix_power(&to_complex(&data.lower_coupling()), mu)).powf(root);
    let inf = norm_inf(&matrix_power(&to_complex(&data.u_minus_identity()), mu)).powf(root);
    let (_, warm) = rho_star(data)?;
    let (sup, x) = maximize_on_axis(|x| averaged_on_imaginary_axis(x, mu, data), &[warm])?;
    let (rho_star, x_star) = if inf > sup { (inf, f64::INFINITY) } else { (sup, x) };
    Ok(AveragedFactors {
        mu,
        rho_star,
        rho_tilde: tilde,
        rho_inf: inf,
        x_star,
    })
}

/// The full set of factors for one `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplificationReport {
    pub s: usize,
    pub rho_star: f64,
    pub rho_tilde: f64,
    pub rho_inf: f64,
    pub x_star: f64,
    pub averaged: Vec<AveragedFactors>,
}

pub fn analyze(data: &SplittingData, mus: &[u32]) -> Result<AmplificationReport> {
    let (rho_star, x_star) = rho_star(data)?;
    Ok(AmplificationReport {
        s: data.s,
        rho_star,
        rho_tilde: rho_tilde(data)?,
        rho_inf: rho_inf(data)?,
        x_star,
        averaged: mus
            .iter()
            .map(|&mu| averaged_factors(data, mu))
            .collect::<Result<_>>()?,
    })
}
