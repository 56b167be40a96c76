//! Binarisation of relaxed solutions.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{CoreError, Result};

/// Values with `|v|` at most this are treated as zero by [`threshold`].
pub const TIE_TOL: f64 = 1e-9;
/// Slack allowed outside `[-1, 1]` for relaxed cluster entries.
pub const RANGE_TOL: f64 = 1e-3;

/// Maximum-weight perfect assignment: returns `perm` with `perm[i] = j`.
///
/// Shortest augmenting paths with potentials, `O(n³)`.
pub fn lap_maximize(score: &DMatrix<f64>) -> Result<Vec<usize>> {
    let n = score.nrows();
    if !score.is_square() {
        return Err(CoreError::InvalidArgument("assignment scores must be square".into()));
    }
    if score.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Numerical("non-finite assignment score".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based arrays; column 0 is a sentinel.
    let cost = |i: usize, j: usize| -score[(i - 1, j - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    Ok(perm)
}

/// Nearest permutation under the linear overlap `Σ X_relaxed ∘ X`.
pub fn project_permutation(x_relaxed: &DMatrix<f64>) -> Result<Vec<usize>> {
    lap_maximize(x_relaxed)
}

/// Greedy row-by-row rounding, kept as a comparison baseline.
pub fn greedy_permutation(x_relaxed: &DMatrix<f64>) -> Vec<usize> {
    let n = x_relaxed.nrows();
    let mut taken = vec![false; n];
    let mut perm = vec![0; n];
    for (i, slot) in perm.iter_mut().enumerate() {
        let j = (0..n)
            .filter(|&j| !taken[j])
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if x_relaxed[(i, b)] >= x_relaxed[(i, j)] => Some(b),
                _ => Some(j),
            })
            .expect("a free column remains");
        taken[j] = true;
        *slot = j;
    }
    perm
}

/// Sign threshold; `|v| <= TIE_TOL` maps to `+1`.
pub fn threshold(y: &[f64]) -> Result<Vec<i8>> {
    y.iter()
        .map(|&v| {
            if !v.is_finite() || v.abs() > 1.0 + RANGE_TOL {
                Err(CoreError::InvalidArgument(format!("relaxed cluster value {v} outside [-1, 1]")))
            } else if v < -TIE_TOL {
                Ok(-1)
            } else {
                Ok(1)
            }
        })
        .collect()
}

/// Splits a stacked `2n` vector and thresholds both halves.
pub fn threshold_clusters(y: &[f64]) -> Result<(Vec<i8>, Vec<i8>)> {
    if y.len() % 2 != 0 {
        return Err(CoreError::InvalidArgument("stacked cluster vector has odd length".into()));
    }
    let n = y.len() / 2;
    Ok((threshold(&y[..n])?, threshold(&y[n..])?))
}

/// Number of matched pairs `(i, perm[i])` whose labels agree.
fn agreements(y1: &[i8], y2: &[i8], perm: &[usize]) -> usize {
    perm.iter().enumerate().filter(|&(i, &j)| y1[i] == y2[j]).count()
}

/// Flips `y2` when that makes more matched pairs agree; ties keep it.
pub fn align_cluster_signs(y1: &[i8], y2: &[i8], perm: &[usize]) -> (Vec<i8>, Vec<i8>) {
    let keep = agreements(y1, y2, perm);
    if perm.len() - keep > keep {
        (y1.to_vec(), y2.iter().map(|v| -v).collect())
    } else {
        (y1.to_vec(), y2.to_vec())
    }
}

/// Matched pairs placed in different clusters.
pub fn consistency_report(perm: &[usize], y1: &[i8], y2: &[i8]) -> usize {
    perm.len() - agreements(y1, y2, perm)
}

/// Relaxed per-graph cluster scores in `[-1, 1]` from the moment matrix `L`.
///
/// For graph `g` the score is `√n` times the principal eigenvector of the
/// diagonal block `L_g`, clipped to `[-1, 1]`. The sign follows the relaxed
/// first moments `y_g` when they carry one, otherwise the largest entry is
/// made positive.
pub fn cluster_scores(l: &DMatrix<f64>, y: &[f64], sizes: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut base = 0;
    for &n in sizes {
        let block = l.view((base, base), (n, n)).into_owned();
        let sym = (&block + block.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let top = eig.eigenvalues.imax();
        let mut v: Vec<f64> = eig.eigenvectors.column(top).iter().map(|x| x * (n as f64).sqrt()).collect();
        let corr: f64 = v.iter().zip(&y[base..base + n]).map(|(a, b)| a * b).sum();
        let flip = if corr.abs() > 1e-6 {
            corr < 0.0
        } else {
            let lead = v.iter().enumerate().fold(0, |m, (i, x)| if x.abs() > v[m].abs() { i } else { m });
            v[lead] < 0.0
        };
        for x in &mut v {
            *x = if flip { -*x } else { *x }.clamp(-1.0, 1.0);
        }
        out.extend(v);
        base += n;
    }
    out
}

/// Re-solves the assignment with cross-cluster pairs penalised, so matched
/// pairs agree wherever the cluster sizes allow it.
pub fn repair_matching(x_relaxed: &DMatrix<f64>, y1: &[i8], y2: &[i8]) -> Result<Vec<usize>> {
    let n = x_relaxed.nrows();
    let penalty = 1.0 + 2.0 * x_relaxed.amax() * n as f64;
    let score = DMatrix::from_fn(n, n, |i, j| x_relaxed[(i, j)] - if y1[i] == y2[j] { 0.0 } else { penalty });
    lap_maximize(&score)
}
