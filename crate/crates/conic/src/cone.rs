//! Cone layout and projections.
//!
//! Symmetric matrices are stored in `svec` form: the lower triangle is scanned
//! column by column and off-diagonal entries are scaled by `sqrt(2)`, so that
//! `<M, N> = svec(M) . svec(N)`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::ConicError;

/// Asymmetry tolerated by [`svec`], relative to the largest entry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Ordered cone product `R^free x R^nonneg_+ x S^{n_1}_+ x ... x S^{n_p}_+`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ConeSpec {
    pub free: usize,
    pub nonneg: usize,
    pub psd: Vec<usize>,
}

impl ConeSpec {
    pub fn new(free: usize, nonneg: usize, psd: Vec<usize>) -> Self {
        Self { free, nonneg, psd }
    }

    /// Total number of scalar variables.
    pub fn dim(&self) -> usize {
        self.free + self.nonneg + self.psd.iter().map(|&n| svec_len(n)).sum::<usize>()
    }

    /// Offset of the first nonnegative variable.
    pub fn nonneg_offset(&self) -> usize {
        self.free
    }

    /// Offset of the first PSD block.
    pub fn psd_offset(&self) -> usize {
        self.free + self.nonneg
    }

    /// `(offset, order)` of every PSD block, in order.
    pub fn psd_blocks(&self) -> Vec<(usize, usize)> {
        let mut offset = self.psd_offset();
        self.psd
            .iter()
            .map(|&n| {
                let start = offset;
                offset += svec_len(n);
                (start, n)
            })
            .collect()
    }

    /// Euclidean projection of `v` onto the cone, in place.
    pub fn project(&self, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim());
        let nn = self.nonneg_offset();
        for x in &mut v[nn..nn + self.nonneg] {
            *x = x.max(0.0);
        }
        for (offset, n) in self.psd_blocks() {
            project_psd_svec(&mut v[offset..offset + svec_len(n)], n);
        }
    }

    /// Distance (infinity norm of `v - proj(v)`) from `v` to the cone.
    pub fn distance(&self, v: &[f64]) -> f64 {
        let mut p = v.to_vec();
        self.project(&mut p);
        v.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Distance from `v` to the dual cone `{0}^free x R_+ x S_+`.
    pub fn dual_distance(&self, v: &[f64]) -> f64 {
        let free = v[..self.free].iter().map(|x| x.abs()).fold(0.0, f64::max);
        let rest = ConeSpec::new(0, self.nonneg, self.psd.clone());
        free.max(rest.distance(&v[self.free..]))
    }
}

/// Length of the svec representation of an `n x n` symmetric matrix.
pub const fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry `(i, j)` of an order-`n` matrix in its svec.
#[inline]
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * (2 * n - j + 1) / 2 + (i - j)
}

/// Scale applied to entry `(i, j)` when moving into svec form.
#[inline]
pub fn svec_scale(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        std::f64::consts::SQRT_2
    }
}

/// Symmetric matrix to svec form.
pub fn svec(m: &DMatrix<f64>) -> Result<Vec<f64>, ConicError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(ConicError::Dimension(format!("svec of a {}x{} matrix", n, m.ncols())));
    }
    let scale = m.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        for i in j..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(ConicError::Asymmetric { row: i, col: j });
            }
            out.push(m[(i, j)] * svec_scale(i, j));
        }
    }
    Ok(out)
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), svec_len(n), "svec length does not match order {n}");
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            let x = v[k] / svec_scale(i, j);
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// Frobenius-nearest PSD matrix: negative eigenvalues are clamped to zero.
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let n = sym.nrows();
    let eig = SymmetricEigen::new(sym.clone());
    let negatives = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    if negatives == 0 {
        return sym;
    }
    if negatives == n {
        return DMatrix::zeros(n, n);
    }
    // Subtract the negative part or rebuild from the positive part,
    // whichever touches fewer eigenvectors.
    let use_negative = negatives <= n - negatives;
    let mut out = if use_negative { sym } else { DMatrix::zeros(n, n) };
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let pick = if use_negative { lambda < 0.0 } else { lambda > 0.0 };
        if !pick {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let w = if use_negative { -lambda } else { lambda };
        out.ger(w, &v, &v, 1.0);
    }
    out
}

/// Projects an svec-encoded block onto the PSD cone in place.
pub fn project_psd_svec(v: &mut [f64], n: usize) {
    if n == 1 {
        v[0] = v[0].max(0.0);
        return;
    }
    let p = project_psd(&smat(v, n));
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            v[k] = p[(i, j)] * svec_scale(i, j);
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_of_identity_and_swap() {
        let v = svec(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 1.0]);
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let v = svec(&s).unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn svec_rejects_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(svec(&m), Err(ConicError::Asymmetric { .. })));
    }

    #[test]
    fn svec_index_matches_scan_order() {
        for n in 1..7 {
            let mut k = 0;
            for j in 0..n {
                for i in j..n {
                    assert_eq!(svec_index(n, i, j), k);
                    assert_eq!(svec_index(n, j, i), k);
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn psd_projection_clamps_negative_eigenvalues() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -2.0]));
        let p = project_psd(&m);
        assert!((p[(0, 0)] - 3.0).abs() < 1e-14);
        assert!(p[(1, 1)].abs() < 1e-14);
        assert!(p[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn psd_input_is_unchanged() {
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0, 3.0, 0.0, 1.0]);
        let m = &b * b.transpose();
        let p = project_psd(&m);
        assert!((p - m).amax() < 1e-12);
    }

    #[test]
    fn cone_projection_handles_each_part() {
        let spec = ConeSpec::new(1, 2, vec![2]);
        let mut v = vec![-5.0, -1.0, 2.0, 1.0, 0.0, -1.0];
        spec.project(&mut v);
        assert_eq!(&v[..3], &[-5.0, 0.0, 2.0]);
        assert!((v[3] - 1.0).abs() < 1e-14 && v[5].abs() < 1e-14);
        assert_eq!(spec.dim(), 6);
        assert_eq!(spec.psd_blocks(), vec![(3, 2)]);
    }
}
