//! Nearest Kronecker-sum factorization `K ≈ Σ A_t ⊗ B_t` through the
//! Van Loan–Pitsianis rearrangement.
//!
//! With the vectorization of [`crate::graph`], the outer factor `A_t` acts on
//! the nodes of the second graph and the inner factor `B_t` on the first.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

/// Relative cutoff below which singular values are discarded.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KroneckerTerm {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kpsvd {
    pub terms: Vec<KroneckerTerm>,
    /// Every singular value of the rearranged matrix, descending.
    pub singular_values: Vec<f64>,
    /// `Σ_{t<=k} σ_t² / Σ σ_t²`
    pub energy: f64,
}

fn block_order(k: &DMatrix<f64>) -> Result<usize> {
    let m = k.nrows();
    let n = (m as f64).sqrt().round() as usize;
    if !k.is_square() || n * n != m {
        return Err(CoreError::InvalidArgument(format!(
            "{}x{} is not an n²×n² matrix",
            k.nrows(),
            k.ncols()
        )));
    }
    Ok(n)
}

/// Row `j*n + i` holds `vec(K_ij)`, the column-major vec of block `(i, j)`.
pub fn rearrange(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = block_order(k)?;
    Ok(DMatrix::from_fn(n * n, n * n, |row, col| {
        let (i, j) = (row % n, row / n);
        let (p, q) = (col % n, col / n);
        k[(i * n + p, j * n + q)]
    }))
}

/// Inverse of [`rearrange`].
pub fn unrearrange(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = block_order(r)?;
    Ok(DMatrix::from_fn(n * n, n * n, |row, col| {
        let (i, p) = (row / n, row % n);
        let (j, q) = (col / n, col % n);
        r[(j * n + i, q * n + p)]
    }))
}

/// Top-`k` Kronecker terms of `K`. Terms are returned as extracted, without
/// symmetrization; see [`symmetrize_terms`].
pub fn kpsvd_decompose(k_mat: &DMatrix<f64>, k: usize) -> Result<Kpsvd> {
    let n = block_order(k_mat)?;
    if k == 0 || k > n * n {
        return Err(CoreError::InvalidArgument(format!("k = {k} outside 1..={}", n * n)));
    }
    if k_mat.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Numerical("affinity matrix is not finite".into()));
    }
    let svd = rearrange(k_mat)?.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V'");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let sv: Vec<f64> = order.iter().map(|&t| svd.singular_values[t]).collect();
    let total: f64 = sv.iter().map(|s| s * s).sum();
    let s1 = sv.first().copied().unwrap_or(0.0);

    let mut terms = Vec::new();
    for &t in order.iter().take(k) {
        let sigma = svd.singular_values[t];
        if sigma <= RANK_TOL * s1 || sigma == 0.0 {
            break;
        }
        let mut ut: DVector<f64> = u.column(t).into_owned();
        let mut vt_row: DVector<f64> = vt.row(t).transpose();
        let lead = ut.iamax();
        if ut[lead] < 0.0 {
            ut.neg_mut();
            vt_row.neg_mut();
        }
        let root = sigma.sqrt();
        terms.push(KroneckerTerm {
            a: DMatrix::from_column_slice(n, n, (ut * root).as_slice()),
            b: DMatrix::from_column_slice(n, n, (vt_row * root).as_slice()),
            sigma,
        });
    }
    let kept: f64 = terms.iter().map(|t| t.sigma * t.sigma).sum();
    let energy = if total > 0.0 { kept / total } else { 1.0 };
    Ok(Kpsvd { terms, singular_values: sv, energy })
}

/// `Σ A_t ⊗ B_t`
pub fn reconstruct(terms: &[KroneckerTerm], n: usize) -> DMatrix<f64> {
    terms.iter().fold(DMatrix::zeros(n * n, n * n), |acc, t| acc + t.a.kronecker(&t.b))
}

/// Replaces each factor by its symmetric part.
pub fn symmetrize_terms(terms: &[KroneckerTerm]) -> Vec<KroneckerTerm> {
    terms
        .iter()
        .map(|t| KroneckerTerm {
            a: (&t.a + t.a.transpose()) * 0.5,
            b: (&t.b + t.b.transpose()) * 0.5,
            sigma: t.sigma,
        })
        .collect()
}

/// `Σ_t tr(A_t' X' B_t X)`
pub fn kb_objective(terms: &[KroneckerTerm], x: &DMatrix<f64>) -> f64 {
    terms.iter().map(|t| (t.a.transpose() * x.transpose() * &t.b * x).trace()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rearranged_identity_is_rank_one() {
        let r = rearrange(&DMatrix::identity(4, 4)).unwrap();
        let v = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(r, &v * v.transpose());
    }

    #[test]
    fn single_kronecker_product_is_recovered() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0, 2.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 4.0, 1.0, 0.0, -2.0, 3.0, 1.0, 1.0]);
        let k = a.kronecker(&b);
        let f = kpsvd_decompose(&k, 1).unwrap();
        let rec = reconstruct(&f.terms, 3);
        assert!((rec - &k).norm() <= 1e-10 * k.norm());
        assert!((f.energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_reconstruction_is_zero() {
        assert_eq!(reconstruct(&[], 2), DMatrix::zeros(4, 4));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(rearrange(&DMatrix::zeros(3, 3)).is_err());
        assert!(kpsvd_decompose(&DMatrix::identity(4, 4), 0).is_err());
        assert!(kpsvd_decompose(&DMatrix::identity(4, 4), 5).is_err());
    }

    #[test]
    fn zero_singular_values_are_dropped() {
        let f = kpsvd_decompose(&DMatrix::identity(9, 9), 9).unwrap();
        assert_eq!(f.terms.len(), 1);
    }
}
