//! Hamiltonian systems `y' = J∇H(y)` with `y = (q, p)` and the canonical
//! `J = [[0, I], [−I, 0]]`.
//!
//! State layout is always all positions first, then all momenta.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A Hamiltonian with analytic first and second derivatives.
pub trait Hamiltonian: Send + Sync {
    /// Half the state dimension.
    fn half_dim(&self) -> usize;

    fn dim(&self) -> usize {
        2 * self.half_dim()
    }

    fn energy(&self, y: &[f64]) -> Result<f64>;

    /// Writes `∇H(y)` into `out`.
    fn gradient(&self, y: &[f64], out: &mut [f64]) -> Result<()>;

    /// `∇²H(y)`, symmetric `dim × dim`.
    fn hessian(&self, y: &[f64]) -> Result<DMatrix<f64>>;

    fn initial_state(&self) -> Vec<f64>;

    fn label(&self) -> &str;
}

/// `H(q, p) = T(p) + V(q)`, as required by explicit splitting methods.
pub trait SeparableHamiltonian: Hamiltonian {
    /// `∇T(p)`.
    fn kinetic_gradient(&self, p: &[f64], out: &mut [f64]);

    /// `∇V(q)`.
    fn potential_gradient(&self, q: &[f64], out: &mut [f64]);
}

/// The canonical symplectic matrix, applied without being stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymplecticJ {
    pub m: usize,
}

impl SymplecticJ {
    pub fn new(m: usize) -> Self {
        Self { m }
    }

    /// `out = J v = (v_p, −v_q)`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let m = self.m;
        debug_assert_eq!(v.len(), 2 * m);
        for i in 0..m {
            out[i] = v[m + i];
            out[m + i] = -v[i];
        }
    }

    /// `J M`, a row permutation with sign flip.
    pub fn left_multiply(&self, mat: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.m;
        DMatrix::from_fn(2 * m, mat.ncols(), |i, j| {
            if i < m {
                mat[(m + i, j)]
            } else {
                -mat[(i - m, j)]
            }
        })
    }
}

/// `J∇H(y)`.
pub fn vector_field(sys: &dyn Hamiltonian, y: &[f64]) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; sys.dim()];
    sys.gradient(y, &mut grad)?;
    let mut out = vec![0.0; sys.dim()];
    SymplecticJ::new(sys.half_dim()).apply(&grad, &mut out);
    Ok(out)
}

/// Charged particle in a magnetic field with Biot-Savart potential,
/// state `(x, y, z, x', y', z')`.
#[derive(Debug, Clone)]
pub struct ChargedParticle {
    /// `α = e B₀`.
    pub alpha: f64,
    pub mass: f64,
    pub y0: Vec<f64>,
}

/// States closer than this to the z-axis are rejected.
pub const AXIS_GUARD: f64 = 1e-8;

/// Charge `−1`, mass 1, `B₀ = 1`, started at `(0.5, 10, 0, −0.1, −0.3, 0)`.
pub fn charged_particle() -> ChargedParticle {
    ChargedParticle {
        alpha: -1.0,
        mass: 1.0,
        y0: vec![0.5, 10.0, 0.0, -0.1, -0.3, 0.0],
    }
}

impl ChargedParticle {
    fn radius2(&self, y: &[f64]) -> Result<f64> {
        let r2 = y[0] * y[0] + y[1] * y[1];
        if r2.sqrt() < AXIS_GUARD {
            return Err(Error::Domain(format!(
                "charged particle on the z-axis (x={}, y={})",
                y[0], y[1]
            )));
        }
        Ok(r2)
    }

    /// Residuals `(a, b, c)` with `H = (a² + b² + c²) / 2m`.
    fn residuals(&self, y: &[f64], r2: f64) -> [f64; 3] {
        let al = self.alpha;
        [y[3] - al * y[0] / r2, y[4] - al * y[1] / r2, y[5] + al * 0.5 * r2.ln()]
    }
}

impl Hamiltonian for ChargedParticle {
    fn half_dim(&self) -> usize {
        3
    }

    fn energy(&self, y: &[f64]) -> Result<f64> {
        let r2 = self.radius2(y)?;
        let [a, b, c] = self.residuals(y, r2);
        Ok((a * a + b * b + c * c) / (2.0 * self.mass))
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let r2 = self.radius2(y)?;
        let (x, yy) = (y[0], y[1]);
        let r4 = r2 * r2;
        let al = self.alpha;
        let [a, b, c] = self.residuals(y, r2);
        // u = x/ρ², v = y/ρ², w = log ρ
        let (ux, uy) = ((yy * yy - x * x) / r4, -2.0 * x * yy / r4);
        let (vx, vy) = (uy, -ux);
        let (wx, wy) = (x / r2, yy / r2);
        let inv_m = 1.0 / self.mass;
        out[0] = inv_m * (-al * (a * ux + b * vx) + al * c * wx);
        out[1] = inv_m * (-al * (a * uy + b * vy) + al * c * wy);
        out[2] = 0.0;
        out[3] = inv_m * a;
        out[4] = inv_m * b;
        out[5] = inv_m * c;
        Ok(())
    }

    fn hessian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let r2 = self.radius2(y)?;
        let (x, yy) = (y[0], y[1]);
        let r4 = r2 * r2;
        let r6 = r4 * r2;
        let al = self.alpha;
        let [a, b, c] = self.residuals(y, r2);
        let (ux, uy) = ((yy * yy - x * x) / r4, -2.0 * x * yy / r4);
        let (vx, vy) = (uy, -ux);
        let (wx, wy) = (x / r2, yy / r2);
        let uxx = (2.0 * x.powi(3) - 6.0 * x * yy * yy) / r6;
        let uxy = (6.0 * x * x * yy - 2.0 * yy.powi(3)) / r6;
        let uyy = -uxx;
        let vxx = uxy;
        let vxy = -uxx;
        let vyy = -uxy;
        let (wxx, wxy, wyy) = ((yy * yy - x * x) / r4, -2.0 * x * yy / r4, (x * x - yy * yy) / r4);

        // Jacobian of the residuals with respect to (x, y, z, x', y', z').
        let jac = DMatrix::from_row_slice(
            3,
            6,
            &[
                -al * ux,
                -al * uy,
                0.0,
                1.0,
                0.0,
                0.0, //
                -al * vx,
                -al * vy,
                0.0,
                0.0,
                1.0,
                0.0, //
                al * wx,
                al * wy,
                0.0,
                0.0,
                0.0,
                1.0,
            ],
        );
        let mut hess = jac.transpose() * &jac;
        hess[(0, 0)] += -al * (a * uxx + b * vxx) + al * c * wxx;
        let cross = -al * (a * uxy + b * vxy) + al * c * wxy;
        hess[(0, 1)] += cross;
        hess[(1, 0)] += cross;
        hess[(1, 1)] += -al * (a * uyy + b * vyy) + al * c * wyy;
        Ok(hess / self.mass)
    }

    fn initial_state(&self) -> Vec<f64> {
        self.y0.clone()
    }

    fn label(&self) -> &str {
        "charged-particle"
    }
}

/// Fermi-Pasta-Ulam chain of `m` stiff/soft spring pairs with quartic
/// nonlinear springs between them:
///
/// `H = ½Σ p_i² + ¼Σ ω_i² (q_{2i} − q_{2i−1})² + Σ_{i=0}^{m} (q_{2i+1} − q_{2i})⁴`,
/// `q_0 = q_{2m+1} = 0`. State is `(q_1..q_{2m}, p_1..p_{2m})`.
#[derive(Debug, Clone)]
pub struct Fpu {
    pub omega: Vec<f64>,
    pub y0: Vec<f64>,
}

impl Fpu {
    /// Chain with the given frequencies, `p = 0`, `q_i = (i − 1)/(2m − 1)`.
    pub fn new(omega: Vec<f64>) -> Self {
        let m = omega.len();
        let n = 2 * m;
        let mut y0 = vec![0.0; 2 * n];
        for (i, qi) in y0.iter_mut().take(n).enumerate() {
            *qi = i as f64 / (n - 1) as f64;
        }
        Self { omega, y0 }
    }

    fn n(&self) -> usize {
        2 * self.omega.len()
    }

    fn potential(&self, q: &[f64]) -> f64 {
        let n = self.n();
        let stiff: f64 = self
            .omega
            .iter()
            .enumerate()
            .map(|(i, w)| 0.25 * w * w * (q[2 * i + 1] - q[2 * i]).powi(2))
            .sum();
        // Soft springs join q_{2i} and q_{2i+1} (1-based) including the walls.
        let soft: f64 = (0..=self.omega.len())
            .map(|i| {
                let left = if i == 0 { 0.0 } else { q[2 * i - 1] };
                let right = if 2 * i < n { q[2 * i] } else { 0.0 };
                (right - left).powi(4)
            })
            .sum();
        stiff + soft
    }
}

/// The modified chain: `m = 7`, `ω = (10, 10, 10, 10⁴, 10, 10, 10)`, dimension 28.
pub fn fpu_modified() -> Fpu {
    Fpu::new(vec![10.0, 10.0, 10.0, 1e4, 10.0, 10.0, 10.0])
}

impl Hamiltonian for Fpu {
    fn half_dim(&self) -> usize {
        self.n()
    }

    fn energy(&self, y: &[f64]) -> Result<f64> {
        let n = self.n();
        let kinetic: f64 = 0.5 * y[n..].iter().map(|p| p * p).sum::<f64>();
        Ok(kinetic + self.potential(&y[..n]))
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n();
        let (q_out, p_out) = out.split_at_mut(n);
        self.potential_gradient(&y[..n], q_out);
        self.kinetic_gradient(&y[n..], p_out);
        Ok(())
    }

    fn hessian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n();
        let q = &y[..n];
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for (i, w) in self.omega.iter().enumerate() {
            let k = 0.5 * w * w;
            let (a, b) = (2 * i, 2 * i + 1);
            h[(a, a)] += k;
            h[(b, b)] += k;
            h[(a, b)] -= k;
            h[(b, a)] -= k;
        }
        for i in 0..=self.omega.len() {
            let left = (i > 0).then(|| 2 * i - 1);
            let right = (2 * i < n).then_some(2 * i);
            let diff = right.map_or(0.0, |r| q[r]) - left.map_or(0.0, |l| q[l]);
            let k = 12.0 * diff * diff;
            if let Some(r) = right {
                h[(r, r)] += k;
            }
            if let Some(l) = left {
                h[(l, l)] += k;
            }
            if let (Some(l), Some(r)) = (left, right) {
                h[(l, r)] -= k;
                h[(r, l)] -= k;
            }
        }
        for i in n..2 * n {
            h[(i, i)] = 1.0;
        }
        Ok(h)
    }

    fn initial_state(&self) -> Vec<f64> {
        self.y0.clone()
    }

    fn label(&self) -> &str {
        "fpu"
    }
}

impl SeparableHamiltonian for Fpu {
    fn kinetic_gradient(&self, p: &[f64], out: &mut [f64]) {
        out.copy_from_slice(p);
    }

    fn potential_gradient(&self, q: &[f64], out: &mut [f64]) {
        let n = self.n();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, w) in self.omega.iter().enumerate() {
            let f = 0.5 * w * w * (q[2 * i + 1] - q[2 * i]);
            out[2 * i + 1] += f;
            out[2 * i] -= f;
        }
        for i in 0..=self.omega.len() {
            let left = (i > 0).then(|| 2 * i - 1);
            let right = (2 * i < n).then_some(2 * i);
            let diff = right.map_or(0.0, |r| q[r]) - left.map_or(0.0, |l| q[l]);
            let f = 4.0 * diff.powi(3);
            if let Some(r) = right {
                out[r] += f;
            }
            if let Some(l) = left {
                out[l] -= f;
            }
        }
    }
}

/// `H = ½(p² + ω²q²)`, started at `(1, 0)`.
#[derive(Debug, Clone)]
pub struct HarmonicOscillator {
    pub omega: f64,
}

pub fn harmonic_oscillator(omega: f64) -> Result<HarmonicOscillator> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "oscillator frequency must be positive, got {omega}"
        )));
    }
    Ok(HarmonicOscillator { omega })
}

impl HarmonicOscillator {
    /// Exact flow from `(1, 0)`.
    pub fn exact(&self, t: f64) -> Vec<f64> {
        let w = self.omega;
        vec![(w * t).cos(), -w * (w * t).sin()]
    }
}

impl Hamiltonian for HarmonicOscillator {
    fn half_dim(&self) -> usize {
        1
    }

    fn energy(&self, y: &[f64]) -> Result<f64> {
        Ok(0.5 * (y[1] * y[1] + self.omega * self.omega * y[0] * y[0]))
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = self.omega * self.omega * y[0];
        out[1] = y[1];
        Ok(())
    }

    fn hessian(&self, _y: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_row_slice(2, 2, &[self.omega * self.omega, 0.0, 0.0, 1.0]))
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![1.0, 0.0]
    }

    fn label(&self) -> &str {
        "harmonic"
    }
}

impl SeparableHamiltonian for HarmonicOscillator {
    fn kinetic_gradient(&self, p: &[f64], out: &mut [f64]) {
        out[0] = p[0];
    }

    fn potential_gradient(&self, q: &[f64], out: &mut [f64]) {
        out[0] = self.omega * self.omega * q[0];
    }
}

/// The shipped benchmark problems, selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    ChargedParticle,
    Fpu,
    Harmonic,
}

impl Problem {
    pub fn build(self) -> Box<dyn Hamiltonian> {
        match self {
            Problem::ChargedParticle => Box::new(charged_particle()),
            Problem::Fpu => Box::new(fpu_modified()),
            Problem::Harmonic => Box::new(HarmonicOscillator { omega: 1.0 }),
        }
    }

    /// The separable form, when there is one.
    pub fn build_separable(self) -> Option<Box<dyn SeparableHamiltonian>> {
        match self {
            Problem::ChargedParticle => None,
            Problem::Fpu => Some(Box::new(fpu_modified())),
            Problem::Harmonic => Some(Box::new(HarmonicOscillator { omega: 1.0 })),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Problem::ChargedParticle => "charged-particle",
            Problem::Fpu => "fpu",
            Problem::Harmonic => "harmonic",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "charged-particle" => Ok(Problem::ChargedParticle),
            "fpu" => Ok(Problem::Fpu),
            "harmonic" => Ok(Problem::Harmonic),
            other => Err(Error::InvalidArgument(format!(
                "unknown problem '{other}' (expected charged-particle, fpu or harmonic)"
            ))),
        }
    }
}

/// Relative discrepancies between analytic derivatives and central finite
/// differences at `y`.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeCheck {
    pub gradient: f64,
    pub hessian: f64,
    pub hessian_asymmetry: f64,
}

/// Compares `∇H` with central differences of `H`, and `∇²H` with central
/// differences of `∇H`, using steps `ε^{1/3}(1 + |y_i|)`.
pub fn check_derivatives(sys: &dyn Hamiltonian, y: &[f64]) -> Result<DerivativeCheck> {
    let n = sys.dim();
    let step = |v: f64| f64::EPSILON.cbrt() * (1.0 + v.abs());
    let mut grad = vec![0.0; n];
    sys.gradient(y, &mut grad)?;
    let hess = sys.hessian(y)?;

    let mut fd_grad = vec![0.0; n];
    let mut fd_hess = DMatrix::zeros(n, n);
    let mut work = y.to_vec();
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    for i in 0..n {
        let h = step(y[i]);
        work[i] = y[i] + h;
        let ep = sys.energy(&work)?;
        sys.gradient(&work, &mut gp)?;
        work[i] = y[i] - h;
        let em = sys.energy(&work)?;
        sys.gradient(&work, &mut gm)?;
        work[i] = y[i];
        fd_grad[i] = (ep - em) / (2.0 * h);
        for j in 0..n {
            fd_hess[(j, i)] = (gp[j] - gm[j]) / (2.0 * h);
        }
    }
    let gscale = grad.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let gradient = grad.iter().zip(&fd_grad).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / gscale;
    let hscale = hess.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let hessian = (&hess - &fd_hess).iter().fold(0.0f64, |m, v| m.max(v.abs())) / hscale;
    let hessian_asymmetry = (&hess - hess.transpose()).iter().fold(0.0f64, |m, v| m.max(v.abs())) / hscale;
    Ok(DerivativeCheck {
        gradient,
        hessian,
        hessian_asymmetry,
    })
}
