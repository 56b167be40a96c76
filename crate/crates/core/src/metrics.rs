use nalgebra::DMatrix;

use crate::graph::{permutation_matrix, vec_of};
use crate::{CoreError, Result};

/// `tr(X' X_gt) / tr(1 X_gt)`: share of ground-truth matches recovered.
pub fn m_acc(x: &DMatrix<f64>, x_gt: &DMatrix<f64>) -> Result<f64> {
    if x.shape() != x_gt.shape() {
        return Err(CoreError::SizeMismatch { expected: x_gt.nrows(), found: x.nrows() });
    }
    let total = x_gt.sum();
    if total == 0.0 {
        return Err(CoreError::InvalidArgument("ground truth holds no matches".into()));
    }
    Ok(x.component_mul(x_gt).sum() / total)
}

pub fn m_acc_perm(perm: &[usize], gt: &[usize]) -> Result<f64> {
    m_acc(&permutation_matrix(perm), &permutation_matrix(gt))
}

/// Pair-counting F-score, `TP / (TP + ½ (FP + FN))`.
///
/// Every unordered pair is one of: TP when its same/different relation is
/// predicted correctly, FP when it is wrongly put together, FN when it is
/// wrongly split.
pub fn pairwise_f_score<T: PartialEq>(labels: &[T], labels_gt: &[T]) -> Result<f64> {
    if labels.len() != labels_gt.len() {
        return Err(CoreError::SizeMismatch { expected: labels_gt.len(), found: labels.len() });
    }
    if labels.len() < 2 {
        return Err(CoreError::InvalidArgument("pair counting needs at least two nodes".into()));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            match (labels[i] == labels[j], labels_gt[i] == labels_gt[j]) {
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => tp += 1,
            }
        }
    }
    Ok(tp as f64 / (tp as f64 + 0.5 * (fp + fn_) as f64))
}

pub fn c_acc(f1: f64, f2: f64) -> f64 {
    (f1 * f2).sqrt()
}

pub fn mc_acc(m: f64, f1: f64, f2: f64) -> f64 {
    (m * f1 * f2).cbrt()
}

/// `vec(X)' K vec(X)`
pub fn lawler_objective(k: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    let v = vec_of(x);
    if k.nrows() != v.len() || !k.is_square() {
        return Err(CoreError::SizeMismatch { expected: v.len(), found: k.nrows() });
    }
    Ok(v.dot(&(k * &v)))
}

/// `Σ_ij W_ij (1 − y_i y_j)` over ordered pairs.
pub fn maxcut_objective(w: &DMatrix<f64>, y: &[i8]) -> Result<f64> {
    if w.nrows() != y.len() || !w.is_square() {
        return Err(CoreError::SizeMismatch { expected: y.len(), found: w.nrows() });
    }
    let n = y.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += w[(i, j)] * (1.0 - (y[i] * y[j]) as f64);
        }
    }
    Ok(total)
}

/// All accuracy figures for one solved pair.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Scores {
    pub m_acc: f64,
    pub f1: f64,
    pub f2: f64,
    pub c_acc: f64,
    pub mc_acc: f64,
}

pub fn score(perm: &[usize], gt: &[usize], y1: &[i8], gt1: &[i8], y2: &[i8], gt2: &[i8]) -> Result<Scores> {
    let m = m_acc_perm(perm, gt)?;
    let f1 = pairwise_f_score(y1, gt1)?;
    let f2 = pairwise_f_score(y2, gt2)?;
    Ok(Scores { m_acc: m, f1, f2, c_acc: c_acc(f1, f2), mc_acc: mc_acc(m, f1, f2) })
}
