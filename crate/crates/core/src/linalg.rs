//! Thin wrappers around nalgebra decompositions with fixed conventions.

use nalgebra::{DMatrix, Dyn, SVD};

use crate::error::{Error, Result};

/// Convergence thresholds tried in turn. nalgebra's bidiagonal iteration
/// can return an inconsistent factorization of exactly rank-deficient
/// input at the tightest setting, so every result is checked.
const SVD_EPS_LADDER: [f64; 4] = [1e-15, 1e-12, 1e-10, 1e-8];
const SVD_MAX_ITERS: usize = 10_000;
/// Accepted reconstruction and orthonormality error, relative to the norm.
const SVD_CHECK_TOL: f64 = 1e-10;

fn checked_svd(m: &DMatrix<f64>) -> Result<SVD<f64, Dyn, Dyn>> {
    let scale = m.norm().max(1.0);
    for eps in SVD_EPS_LADDER {
        let Some(dec) = SVD::try_new(m.clone(), true, true, eps, SVD_MAX_ITERS) else {
            continue;
        };
        let (u, v_t) = (dec.u.as_ref().unwrap(), dec.v_t.as_ref().unwrap());
        let k = dec.singular_values.len();
        let recon = u * DMatrix::from_diagonal(&dec.singular_values) * v_t;
        let eye = DMatrix::<f64>::identity(k, k);
        let ok = (recon - m).norm() <= SVD_CHECK_TOL * scale
            && (u.transpose() * u - &eye).amax() <= SVD_CHECK_TOL
            && (v_t * v_t.transpose() - &eye).amax() <= SVD_CHECK_TOL;
        if ok {
            return Ok(dec);
        }
    }
    Err(Error::Numerical("SVD did not converge to a consistent factorization".into()))
}

/// Thin SVD with singular values in descending order.
///
/// Each left singular vector is sign-fixed so that its largest-magnitude
/// entry is positive; the matching right singular vector is flipped with it.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(m: &DMatrix<f64>) -> Result<SortedSvd> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::arg("empty matrix"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let dec = checked_svd(m)?;
    let u = dec.u.expect("left vectors requested");
    let v_t = dec.v_t.expect("right vectors requested");
    let k = dec.singular_values.len();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].partial_cmp(&dec.singular_values[a]).unwrap().then(a.cmp(&b)));

    let mut su = DMatrix::zeros(u.nrows(), k);
    let mut sv = DMatrix::zeros(v_t.ncols(), k);
    let mut sigma = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let col = u.column(src);
        let pivot = col.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        su.set_column(dst, &(col * sign));
        sv.set_column(dst, &(v_t.row(src).transpose() * sign));
        sigma.push(dec.singular_values[src].max(0.0));
    }
    Ok(SortedSvd { u: su, sigma, v: sv })
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(svd(m)?.sigma)
}

/// Operator 2-norm.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Induced infinity norm: largest absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|row| row.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
