//! HBVM(k,s) Butcher tableaux via the generalized W-transformation
//! `A = P_{s+1} X̂_s P_sᵀ Ω`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::polybasis::{gauss_rule, legendre_eval_all, QuadratureRule};

pub use crate::polybasis::xi;

/// The `(s+1) × s` matrix `X̂_s`: leading entry ½, `ξ_j` below the diagonal,
/// `−ξ_j` above it, and a last row `(0, …, 0, ξ_s)`.
pub fn build_xhat(s: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(s + 1, s);
    if s == 0 {
        return x;
    }
    x[(0, 0)] = 0.5;
    for j in 1..=s {
        x[(j, j - 1)] = xi(j);
        if j < s {
            x[(j - 1, j)] = -xi(j);
        }
    }
    x
}

/// `det(X_s)` in closed form: `∏ ξ_{2i−1}²` for even `s`, `½ ∏ ξ_{2i}²` for odd `s`.
pub fn det_xs(s: usize) -> f64 {
    let (lead, offset) = if s.is_multiple_of(2) { (1.0, 1) } else { (0.5, 0) };
    (1..=s / 2).map(|i| xi(2 * i - offset).powi(2)).product::<f64>() * lead
}

/// The tableau of HBVM(k,s) on the `k` Gauss-Legendre abscissae.
///
/// Immutable once built; shared by reference between solvers.
#[derive(Debug, Clone)]
pub struct HbvmTableau {
    pub k: usize,
    pub s: usize,
    pub rule: QuadratureRule,
    /// Butcher matrix, `k × k`.
    pub a: DMatrix<f64>,
    /// `P_s`, `k × s`, entries `P_{j−1}(c_i)`.
    pub ps: DMatrix<f64>,
    /// `P_{s+1}`, `k × (s+1)`.
    pub ps1: DMatrix<f64>,
    /// `X̂_s`, `(s+1) × s`.
    pub xhat: DMatrix<f64>,
    /// `Ω = diag(b)`.
    pub omega: DMatrix<f64>,
    stage_map: DMatrix<f64>,
    projection: DMatrix<f64>,
}

impl HbvmTableau {
    pub fn nodes(&self) -> &[f64] {
        &self.rule.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }

    /// Leading `s × s` block `X_s` of `X̂_s`.
    pub fn xs(&self) -> DMatrix<f64> {
        self.xhat.rows(0, self.s).into_owned()
    }

    /// `P_{s+1} X̂_s` (`k × s`): stage `i` is `y₀ + h Σ_j (P_{s+1}X̂_s)_{ij} γ_j`.
    pub fn stage_map(&self) -> &DMatrix<f64> {
        &self.stage_map
    }

    /// `P_sᵀ Ω` (`s × k`): `γ_j = Σ_i (P_sᵀΩ)_{ji} f(Y_i)`.
    pub fn projection(&self) -> &DMatrix<f64> {
        &self.projection
    }

    /// `true` when the method is the `s`-stage Gauss collocation method.
    pub fn is_gauss(&self) -> bool {
        self.k == self.s
    }
}

/// Builds the HBVM(k,s) tableau; requires `k ≥ s ≥ 1`.
pub fn build_tableau(k: usize, s: usize) -> Result<HbvmTableau> {
    if s == 0 {
        return Err(Error::InvalidArgument("s must be at least 1".into()));
    }
    if k < s {
        return Err(Error::InvalidArgument(format!(
            "HBVM(k,s) requires k >= s, got k={k}, s={s}"
        )));
    }
    let rule = gauss_rule(k)?;
    let mut ps1 = DMatrix::zeros(k, s + 1);
    for (i, &c) in rule.nodes.iter().enumerate() {
        for (j, v) in legendre_eval_all(s, c).into_iter().enumerate() {
            ps1[(i, j)] = v;
        }
    }
    let ps = ps1.columns(0, s).into_owned();
    let xhat = build_xhat(s);
    let omega = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&rule.weights));
    let stage_map = &ps1 * &xhat;
    let projection = ps.transpose() * &omega;
    let a = &stage_map * &projection;
    Ok(HbvmTableau {
        k,
        s,
        rule,
        a,
        ps,
        ps1,
        xhat,
        omega,
        stage_map,
        projection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::legendre_integral;
    use approx::assert_abs_diff_eq;

    /// Classical s-stage collocation matrix from `Σ_j a_ij c_j^{q−1} = c_i^q / q`.
    fn collocation_matrix(c: &[f64]) -> DMatrix<f64> {
        let s = c.len();
        let v = DMatrix::from_fn(s, s, |j, q| c[j].powi(q as i32));
        let rhs = DMatrix::from_fn(s, s, |i, q| c[i].powi(q as i32 + 1) / (q + 1) as f64);
        // A V = rhs  ⇔  Vᵀ Aᵀ = rhsᵀ
        let at = v.transpose().lu().solve(&rhs.transpose()).unwrap();
        at.transpose()
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn xi_values() {
        assert_abs_diff_eq!(xi(1), 0.28867513459481287, epsilon = 1e-16);
        assert_abs_diff_eq!(xi(2), 0.12909944487358056, epsilon = 1e-16);
        assert_abs_diff_eq!(xi(10), 1.0 / (2.0 * 399f64.sqrt()), epsilon = 1e-16);
        assert!((1..20).all(|i| xi(i) > xi(i + 1) && xi(i + 1) > 0.0));
    }

    #[test]
    fn xhat_structure() {
        let x1 = build_xhat(1);
        assert_eq!(x1.shape(), (2, 1));
        assert_eq!(x1[(0, 0)], 0.5);
        assert_eq!(x1[(1, 0)], xi(1));

        let x2 = build_xhat(2);
        let expected = DMatrix::from_row_slice(3, 2, &[0.5, -xi(1), xi(1), 0.0, 0.0, xi(2)]);
        assert_eq!(x2, expected);

        let x5 = build_xhat(5);
        for i in 0..6 {
            for j in 0..5 {
                let v = x5[(i, j)];
                if i == 0 && j == 0 {
                    assert_eq!(v, 0.5);
                } else if i == j + 1 {
                    assert_eq!(v, xi(i));
                } else if j == i + 1 {
                    assert_eq!(v, -xi(j));
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn xhat_columns_reproduce_integrals() {
        for s in 1..=6 {
            let t = build_tableau(s + 2, s).unwrap();
            let w = t.stage_map();
            for (i, &c) in t.nodes().iter().enumerate() {
                for j in 0..s {
                    assert!((w[(i, j)] - legendre_integral(j, c)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn det_xs_closed_form() {
        assert_abs_diff_eq!(det_xs(1), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(det_xs(2), 1.0 / 12.0, epsilon = 1e-16);
        assert_abs_diff_eq!(det_xs(3), 1.0 / 120.0, epsilon = 1e-16);
        for s in 1..=6 {
            let numeric = build_xhat(s).rows(0, s).into_owned().lu().determinant();
            assert!((numeric - det_xs(s)).abs() < 1e-15, "s={s}");
        }
    }

    #[test]
    fn midpoint_and_two_stage_gauss() {
        let t = build_tableau(1, 1).unwrap();
        assert_abs_diff_eq!(t.a[(0, 0)], 0.5, epsilon = 1e-15);

        let t = build_tableau(2, 2).unwrap();
        let r = 3f64.sqrt() / 6.0;
        let expected = DMatrix::from_row_slice(2, 2, &[0.25, 0.25 - r, 0.25 + r, 0.25]);
        assert!(max_abs(&(&t.a - expected)) < 1e-14);
    }

    #[test]
    fn rank_deficient_hbvm_matrix() {
        let t = build_tableau(6, 3).unwrap();
        assert_eq!(t.a.shape(), (6, 6));
        let sv = t.a.clone().singular_values();
        let top = sv.max();
        let rank = sv.iter().filter(|&&v| v > 1e-10 * top).count();
        assert_eq!(rank, 3);
    }

    #[test]
    fn row_sums_and_reconstruction() {
        for k in 1..=10 {
            for s in 1..=k {
                let t = build_tableau(k, s).unwrap();
                for (i, &c) in t.nodes().iter().enumerate() {
                    assert!((t.a.row(i).sum() - c).abs() < 1e-13, "k={k} s={s}");
                }
                let rebuilt = &t.ps1 * &t.xhat * t.ps.transpose() * &t.omega;
                assert!(max_abs(&(rebuilt - &t.a)) < 1e-14);
                let gram = t.ps.transpose() * &t.omega * &t.ps;
                assert!(max_abs(&(gram - DMatrix::identity(s, s))) < 1e-13);
            }
        }
    }

    #[test]
    fn gauss_case_matches_collocation() {
        for s in 1..=6 {
            let t = build_tableau(s, s).unwrap();
            assert!(t.is_gauss());
            let oracle = collocation_matrix(t.nodes());
            assert!(max_abs(&(&t.a - oracle)) < 1e-12, "s={s}");
        }
    }

    #[test]
    fn rejects_k_below_s() {
        assert!(build_tableau(2, 3).is_err());
        assert!(build_tableau(3, 0).is_err());
    }
}
