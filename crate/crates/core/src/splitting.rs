//! Auxiliary abscissae, the change of unknowns `γ̂ = P̂ ⊗ I γ`, and the
//! constant-diagonal Crout factorization `Â = L̂Û` of `Â = P̂ X_s P̂⁻¹`.
//!
//! The abscissae are shipped as constants. For each `s` they make every
//! diagonal entry of `L̂` equal to `d_s = det(X_s)^{1/s}`, so the inner
//! iteration of the stage solver needs one `2m × 2m` factorization per step.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::polybasis::legendre_eval_all;
use crate::tableau::{build_xhat, det_xs};

/// Largest `s` with tabulated auxiliary abscissae.
pub const MAX_SPLIT_STAGES: usize = 6;

/// `L_ii` may differ from `d_s` by at most this much before the abscissae are
/// considered corrupted.
pub const DIAGONAL_REJECT_TOL: f64 = 1e-9;

#[allow(clippy::excessive_precision)]
const ABSCISSAE_2: [f64; 2] = [0.26036297108184508789101036587842555, 1.0];
#[allow(clippy::excessive_precision)]
const ABSCISSAE_3: [f64; 3] = [
    0.15636399930006671060146617869938122,
    0.45431868644630821020177903150137523,
    0.948,
];
#[allow(clippy::excessive_precision)]
const ABSCISSAE_4: [f64; 4] = [
    0.11004843257056123468614502691988075,
    0.31588689139705398683980065724981436,
    0.53114668286639796587351917750274705,
    0.884,
];
#[allow(clippy::excessive_precision)]
const ABSCISSAE_5: [f64; 5] = [
    0.084221784434612320884185541600934218,
    0.248618520588562018051811779022293944,
    0.413725268815220956415498643302145284,
    0.587098748971877116030882436751962384,
    0.9338,
];
// Order is significant: it fixes the row order of P̂ and hence the factors.
#[allow(clippy::excessive_precision)]
const ABSCISSAE_6: [f64; 6] = [
    0.20985774196263657630356114041757724,
    0.36816786358152563671526302698797908,
    0.39607328223635472401921951140390213,
    0.62783521091780460858476326939502046,
    0.04580307227138364391540767310611717,
    0.94225,
];

/// Common diagonal entry of `L̂`, `d_s = det(X_s)^{1/s}`.
pub fn d_s(s: usize) -> f64 {
    det_xs(s).powf(1.0 / s as f64)
}

/// Tabulated auxiliary abscissae `ĉ_1, …, ĉ_s` for `2 ≤ s ≤ 6`.
pub fn auxiliary_abscissae(s: usize) -> Result<Vec<f64>> {
    let c: &[f64] = match s {
        2 => &ABSCISSAE_2,
        3 => &ABSCISSAE_3,
        4 => &ABSCISSAE_4,
        5 => &ABSCISSAE_5,
        6 => &ABSCISSAE_6,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "auxiliary abscissae are tabulated for 2 <= s <= 6, got {s}"
            )))
        }
    };
    Ok(c.to_vec())
}

/// `P̂` with entries `P_{j−1}(ĉ_i)`.
pub fn transformation_matrix(chat: &[f64]) -> DMatrix<f64> {
    let s = chat.len();
    let mut p = DMatrix::zeros(s, s);
    for (i, &c) in chat.iter().enumerate() {
        for (j, v) in legendre_eval_all(s - 1, c).into_iter().enumerate() {
            p[(i, j)] = v;
        }
    }
    p
}

/// `Â = P̂ X_s P̂⁻¹`, formed by solving `P̂ᵀ Âᵀ = (P̂ X_s)ᵀ`.
pub fn transformed_matrix(chat: &[f64]) -> Result<DMatrix<f64>> {
    let s = chat.len();
    let phat = transformation_matrix(chat);
    let xs = build_xhat(s).rows(0, s).into_owned();
    let rhs = (&phat * xs).transpose();
    phat.transpose()
        .lu()
        .solve(&rhs)
        .map(|t| t.transpose())
        .ok_or(Error::Singular("auxiliary transformation P̂"))
}

/// Crout factorization `Â = L U` with unit-diagonal `U`, no pivoting.
///
/// The diagonal of `L` is not imposed: after factoring, every `L_ii` is
/// checked against `d`, and a deviation above [`DIAGONAL_REJECT_TOL`] is an
/// error.
pub fn crout_lu_constant_diag(ahat: &DMatrix<f64>, d: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = ahat.nrows();
    let scale = ahat.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut l = DMatrix::zeros(n, n);
    let mut u = DMatrix::identity(n, n);
    for j in 0..n {
        for i in j..n {
            let acc: f64 = (0..j).map(|p| l[(i, p)] * u[(p, j)]).sum();
            l[(i, j)] = ahat[(i, j)] - acc;
        }
        let pivot = l[(j, j)];
        if pivot.abs() < 1e-13 * scale {
            return Err(Error::ZeroPivot { index: j, value: pivot });
        }
        for col in j + 1..n {
            let acc: f64 = (0..j).map(|p| l[(j, p)] * u[(p, col)]).sum();
            u[(j, col)] = (ahat[(j, col)] - acc) / pivot;
        }
    }
    for i in 0..n {
        if (l[(i, i)] - d).abs() > DIAGONAL_REJECT_TOL {
            return Err(Error::DiagonalMismatch {
                index: i,
                value: l[(i, i)],
                expected: d,
            });
        }
    }
    Ok((l, u))
}

/// Everything the splitting iteration needs for a given `s`; independent of `k`.
#[derive(Debug, Clone)]
pub struct SplittingData {
    pub s: usize,
    /// Auxiliary abscissae `ĉ`.
    pub chat: Vec<f64>,
    /// `P̂`, entries `P_{j−1}(ĉ_i)`.
    pub phat: DMatrix<f64>,
    /// `P̂⁻¹`, used to map `γ̂` back to `γ`.
    pub phat_inv: DMatrix<f64>,
    /// `Â = P̂ X_s P̂⁻¹`.
    pub ahat: DMatrix<f64>,
    /// Lower-triangular factor with constant diagonal `d`.
    pub l: DMatrix<f64>,
    /// Unit upper-triangular factor.
    pub u: DMatrix<f64>,
    /// `d_s`.
    pub d: f64,
}

impl SplittingData {
    /// `Û − I`, strictly upper triangular.
    pub fn u_minus_identity(&self) -> DMatrix<f64> {
        &self.u - DMatrix::identity(self.s, self.s)
    }

    /// `L̂(Û − I)`.
    pub fn lower_coupling(&self) -> DMatrix<f64> {
        &self.l * self.u_minus_identity()
    }
}

/// Assembles the splitting data for `1 ≤ s ≤ 6`.
///
/// `s = 1` is the degenerate case `ĉ = [1]`, `Â = L̂ = [½]`, `Û = [1]`, which
/// makes the splitting iteration coincide with simplified Newton.
pub fn build_splitting(s: usize) -> Result<SplittingData> {
    let chat = if s == 1 { vec![1.0] } else { auxiliary_abscissae(s)? };
    let phat = transformation_matrix(&chat);
    let phat_inv = phat
        .clone()
        .try_inverse()
        .ok_or(Error::Singular("auxiliary transformation P̂"))?;
    let ahat = transformed_matrix(&chat)?;
    let d = d_s(s);
    let (l, u) = crout_lu_constant_diag(&ahat, d)?;
    Ok(SplittingData {
        s,
        chat,
        phat,
        phat_inv,
        ahat,
        l,
        u,
        d,
    })
}

/// `|det(Â_{ℓ+1}) − d·det(Â_ℓ)|` for `ℓ = 1..s−1`, with `Â_ℓ` the leading
/// principal submatrix of order `ℓ`.
pub fn condition_residuals(ahat: &DMatrix<f64>, d: f64) -> Vec<f64> {
    let n = ahat.nrows();
    let dets: Vec<f64> = (1..=n)
        .map(|l| ahat.view((0, 0), (l, l)).into_owned().lu().determinant())
        .collect();
    dets.windows(2).map(|w| (w[1] - d * w[0]).abs()).collect()
}

/// Residuals of the equal-diagonal conditions for `data`.
pub fn verify_conditions(data: &SplittingData) -> Vec<f64> {
    condition_residuals(&data.ahat, data.d)
}
