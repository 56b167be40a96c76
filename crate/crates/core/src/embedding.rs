//! HOPE embedding with common-neighbour proximity `S = A²`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

/// Source (`p`) and target (`q`) embeddings, `d × n`, one point per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPair {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub d: usize,
    pub sigma: Vec<f64>,
}

impl EmbeddingPair {
    /// Zero-pads both embeddings to `d` rows.
    pub fn padded(&self, d: usize) -> Self {
        assert!(d >= self.d, "cannot pad {} rows down to {d}", self.d);
        let n = self.p.ncols();
        let pad = |m: &DMatrix<f64>| {
            let mut out = DMatrix::zeros(d, n);
            out.rows_mut(0, self.d).copy_from(m);
            out
        };
        Self { p: pad(&self.p), q: pad(&self.q), d, sigma: self.sigma.clone() }
    }
}

pub fn common_neighbour_similarity(a: &DMatrix<f64>) -> DMatrix<f64> {
    a * a
}

/// Descending singular values of `S = A²`.
pub fn similarity_spectrum(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = common_neighbour_similarity(a).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn hope(a: &DMatrix<f64>, d: usize) -> Result<EmbeddingPair> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(CoreError::InvalidArgument("adjacency must be square".into()));
    }
    if d == 0 || d > n {
        return Err(CoreError::InvalidArgument(format!("embedding dimension {d} outside 1..={n}")));
    }
    let svd = common_neighbour_similarity(a).svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V'");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]).then(x.cmp(&y)));

    let mut p = DMatrix::zeros(d, n);
    let mut q = DMatrix::zeros(d, n);
    let mut sigma = Vec::with_capacity(d);
    for (row, &t) in order.iter().take(d).enumerate() {
        let s = svd.singular_values[t];
        let root = s.sqrt();
        let ut = u.column(t);
        let sign = if ut[ut.iamax()] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            p[(row, j)] = sign * root * ut[j];
            q[(row, j)] = sign * root * vt[(t, j)];
        }
        sigma.push(s);
    }
    Ok(EmbeddingPair { p, q, d, sigma })
}

/// Smallest `d` capturing `energy` of `Σ σ²`, clamped to `[d_min, d_max]`.
pub fn choose_dim(sigma: &[f64], energy: f64, d_min: usize, d_max: usize) -> Result<usize> {
    if sigma.is_empty() {
        return Err(CoreError::InvalidArgument("empty spectrum".into()));
    }
    if !(energy > 0.0 && energy <= 1.0) || d_min > d_max {
        return Err(CoreError::InvalidArgument(format!("energy {energy}, range [{d_min}, {d_max}]")));
    }
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    let mut d = sigma.iter().filter(|&&s| s > 0.0).count();
    if total > 0.0 {
        let mut acc = 0.0;
        for (t, s) in sigma.iter().enumerate() {
            acc += s * s;
            if acc / total >= energy - 1e-12 {
                d = t + 1;
                break;
            }
        }
    }
    Ok(d.clamp(d_min, d_max))
}
