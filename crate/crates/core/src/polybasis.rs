//! Orthonormal shifted Legendre polynomials on `[0, 1]` and the Gauss-Legendre
//! rules built from their roots.
//!
//! The family satisfies `deg P_j = j` and `∫₀¹ P_i P_j = δ_ij`, so
//! `P_j(x) = √(2j+1) L_j(2x − 1)` with `L_j` the classical Legendre polynomial.
//! Values are produced by the three-term recurrence
//!
//! ```text
//! (x − ½) P_j(x) = β_{j+1} P_{j+1}(x) + β_j P_{j−1}(x),   β_j = j ξ_j,
//! ```
//!
//! where `ξ_j = 1 / (2√(4j² − 1))`.

use crate::error::{Error, Result};

/// Largest supported number of quadrature nodes.
pub const MAX_NODES: usize = 50;

const ROOT_TOL: f64 = 1e-15;
const ROOT_MAX_ITER: usize = 100;

/// `ξ_i = 1 / (2√(4i² − 1))`, the coefficients of the integral identities
/// `∫₀^c P_j = ξ_{j+1} P_{j+1}(c) − ξ_j P_{j−1}(c)`.
///
/// `xi(0)` is not meaningful and returns 0, which makes the `j = 0`
/// boundary terms of the recurrence vanish.
pub fn xi(i: usize) -> f64 {
    if i == 0 {
        return 0.0;
    }
    let i = i as f64;
    1.0 / (2.0 * (4.0 * i * i - 1.0).sqrt())
}

#[inline]
fn beta(j: usize) -> f64 {
    j as f64 * xi(j)
}

/// Evaluates `P_j(x)`.
pub fn legendre_eval(j: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let t = x - 0.5;
    for n in 0..j {
        let next = (t * cur - beta(n) * prev) / beta(n + 1);
        prev = cur;
        cur = next;
    }
    cur
}

/// Values `[P_0(x), ..., P_n(x)]`.
pub fn legendre_eval_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    let t = x - 0.5;
    for j in 0..n {
        let prev = if j == 0 { 0.0 } else { out[j - 1] };
        let next = (t * out[j] - beta(j) * prev) / beta(j + 1);
        out.push(next);
    }
    out
}

/// Returns `(P_j(x), P_j'(x))`, differentiating the recurrence term by term.
pub fn legendre_with_derivative(j: usize, x: f64) -> (f64, f64) {
    let t = x - 0.5;
    let (mut p_prev, mut p) = (0.0, 1.0);
    let (mut d_prev, mut d) = (0.0, 0.0);
    for n in 0..j {
        let b_next = beta(n + 1);
        let p_next = (t * p - beta(n) * p_prev) / b_next;
        let d_next = (t * d + p - beta(n) * d_prev) / b_next;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// `∫₀^c P_j(x) dx`.
///
/// Uses `∫₀^c P_0 = ½P_0(c) + ξ_1 P_1(c)` and, for `j ≥ 1`,
/// `∫₀^c P_j = ξ_{j+1} P_{j+1}(c) − ξ_j P_{j−1}(c)`.
pub fn legendre_integral(j: usize, c: f64) -> f64 {
    let p = legendre_eval_all(j + 1, c);
    if j == 0 {
        0.5 * p[0] + xi(1) * p[1]
    } else {
        xi(j + 1) * p[j + 1] - xi(j) * p[j - 1]
    }
}

/// A `k`-point Gauss-Legendre rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Roots of `P_k`, strictly increasing.
    pub nodes: Vec<f64>,
    /// Positive weights, summing to one.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn k(&self) -> usize {
        self.nodes.len()
    }

    /// `Σ b_i f(c_i)`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&c, &b)| b * f(c)).sum()
    }
}

/// Builds the `k`-point Gauss-Legendre rule on `[0, 1]`, `1 ≤ k ≤ 50`.
///
/// Nodes come from Newton's method on `P_k` started at Chebyshev-like
/// guesses; only the lower half is computed and the rest is mirrored, so
/// `c_i + c_{k+1−i} = 1` holds exactly. Weights use
/// `b_i = (2k + 1) / (c_i (1 − c_i) P_k'(c_i)²)`.
pub fn gauss_rule(k: usize) -> Result<QuadratureRule> {
    if k == 0 || k > MAX_NODES {
        return Err(Error::InvalidArgument(format!(
            "number of quadrature nodes must be in 1..={MAX_NODES}, got {k}"
        )));
    }
    let mut nodes = vec![0.0; k];
    let half = k / 2;
    for i in 0..half {
        // Legendre roots on [-1, 1] are close to cos(π(4i + 3) / (4k + 2)).
        let theta = std::f64::consts::PI * (4 * i + 3) as f64 / (4 * k + 2) as f64;
        let mut x = 0.5 * (1.0 - theta.cos());
        let mut converged = false;
        for _ in 0..ROOT_MAX_ITER {
            let (p, dp) = legendre_with_derivative(k, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= ROOT_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            // Newton may cycle at the last ulp; accept only a genuine root.
            let (p, dp) = legendre_with_derivative(k, x);
            if (p / dp).abs() > 1e-13 {
                return Err(Error::RootFinding { k });
            }
        }
        nodes[i] = x;
        nodes[k - 1 - i] = 1.0 - x;
    }
    if k % 2 == 1 {
        nodes[half] = 0.5;
    }
    let raw: Vec<f64> = nodes
        .iter()
        .map(|&c| {
            let (_, dp) = legendre_with_derivative(k, c);
            (2 * k + 1) as f64 / (c * (1.0 - c) * dp * dp)
        })
        .collect();
    // Exact weights sum to one; rescaling removes the common rounding.
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|b| b / total).collect();
    for i in 0..k / 2 {
        let mean = 0.5 * (weights[i] + weights[k - 1 - i]);
        weights[i] = mean;
        weights[k - 1 - i] = mean;
    }
    Ok(QuadratureRule { nodes, weights })
}
