//! Truncated SVD, subspace distances and the perturbation inequalities
//! (Weyl, Wedin) used to audit the spectral step.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

const ORTHONORMAL_TOL: f64 = 1e-8;

/// Leading `r` singular triplets; `tail` keeps the discarded singular values.
#[derive(Clone, Debug)]
pub struct TruncatedBasis {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
    pub tail: Vec<f64>,
}

impl TruncatedBasis {
    pub fn r(&self) -> usize {
        self.sigma.len()
    }

    /// `U_r Sigma_r V_r^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

pub fn truncate_svd(m: &DMatrix<f64>, r: usize) -> Result<TruncatedBasis> {
    let k = m.nrows().min(m.ncols());
    if r == 0 || r > k {
        return Err(Error::arg(format!("rank {r} must lie in 1..={k}")));
    }
    let d = linalg::svd(m)?;
    Ok(TruncatedBasis {
        u: d.u.columns(0, r).into_owned(),
        sigma: d.sigma[..r].to_vec(),
        v: d.v.columns(0, r).into_owned(),
        tail: d.sigma[r..].to_vec(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    Spectral,
    Frobenius,
}

fn check_orthonormal(u: &DMatrix<f64>, name: &str) -> Result<()> {
    let gram = u.transpose() * u;
    let dev = (gram - DMatrix::<f64>::identity(u.ncols(), u.ncols())).amax();
    if dev > ORTHONORMAL_TOL {
        return Err(Error::arg(format!("{name} columns are not orthonormal (max deviation {dev:e})")));
    }
    Ok(())
}

/// Norm of the sines of the principal angles between the column spaces,
/// computed as `||(I - U1 U1^T) U2||`.
pub fn sin_theta_distance(u1: &DMatrix<f64>, u2: &DMatrix<f64>, kind: NormKind) -> Result<f64> {
    if u1.shape() != u2.shape() {
        return Err(Error::arg(format!("basis shapes differ: {:?} vs {:?}", u1.shape(), u2.shape())));
    }
    check_orthonormal(u1, "first basis")?;
    check_orthonormal(u2, "second basis")?;
    let resid = u2 - u1 * (u1.transpose() * u2);
    Ok(match kind {
        NormKind::Spectral => linalg::spectral_norm(&resid)?.min(1.0),
        NormKind::Frobenius => resid.norm().min((u1.ncols() as f64).sqrt()),
    })
}

/// Both sides of `max_i |sigma_i(A) - sigma_i(A_hat)| <= ||A - A_hat||`.
pub fn weyl_gap(a: &DMatrix<f64>, a_hat: &DMatrix<f64>) -> Result<(f64, f64)> {
    if a.shape() != a_hat.shape() {
        return Err(Error::arg("matrix shapes differ"));
    }
    let sa = linalg::singular_values(a)?;
    let sb = linalg::singular_values(a_hat)?;
    let dev = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok((dev, linalg::spectral_norm(&(a - a_hat))?))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WedinCheck {
    /// Larger of the left and right spectral sin-theta distances.
    pub lhs: f64,
    /// `2 ||A - A_hat|| / (sigma_r(A) - sigma_{r+1}(A))`, infinite at a zero gap.
    pub rhs: f64,
}

impl WedinCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs.min(1.0) + 1e-12
    }
}

pub fn wedin_combined_bound(a: &DMatrix<f64>, a_hat: &DMatrix<f64>, r: usize) -> Result<WedinCheck> {
    if a.shape() != a_hat.shape() {
        return Err(Error::arg("matrix shapes differ"));
    }
    let k = a.nrows().min(a.ncols());
    if r == 0 || r >= k {
        return Err(Error::arg(format!("rank {r} must lie in 1..{k}")));
    }
    let ba = truncate_svd(a, r)?;
    let bb = truncate_svd(a_hat, r)?;
    let lhs = sin_theta_distance(&ba.u, &bb.u, NormKind::Spectral)?.max(sin_theta_distance(
        &ba.v,
        &bb.v,
        NormKind::Spectral,
    )?);
    let gap = ba.sigma[r - 1] - ba.tail[0];
    let err = linalg::spectral_norm(&(a - a_hat))?;
    let rhs = if gap > 0.0 { 2.0 * err / gap } else { f64::INFINITY };
    Ok(WedinCheck { lhs, rhs })
}

/// Orthogonal `Q` minimizing `||U1 - U2 Q||_F`, with the attained residual.
pub fn procrustes_align(u1: &DMatrix<f64>, u2: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if u1.shape() != u2.shape() {
        return Err(Error::arg("basis shapes differ"));
    }
    let d = linalg::svd(&(u2.transpose() * u1))?;
    let q = &d.u * d.v.transpose();
    let residual = (u1 - u2 * &q).norm();
    Ok((q, residual))
}
