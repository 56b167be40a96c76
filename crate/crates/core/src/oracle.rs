//! Exhaustive solvers for tiny instances and simple baselines.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{euclid, permutation_matrix};
use crate::metrics::{lawler_objective, maxcut_objective};
use crate::model::RegistrationTerm;
use crate::{CoreError, Result};

pub const JOINT_CAP: usize = 7;
pub const MAXCUT_CAP: usize = 16;

/// Advances `p` to the next permutation in lexicographic order.
pub fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn labels_from_mask(mask: u32, n: usize) -> Vec<i8> {
    (0..n).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect()
}

/// Exact MAX CUT by enumeration; the first maximizer in mask order wins.
pub fn brute_force_maxcut(w: &DMatrix<f64>) -> Result<(Vec<i8>, f64)> {
    let n = w.nrows();
    if n > MAXCUT_CAP {
        return Err(CoreError::TooLarge { n, cap: MAXCUT_CAP });
    }
    let mut best = (vec![1; n], f64::NEG_INFINITY);
    for mask in 0..1u32 << n {
        let y = labels_from_mask(mask, n);
        let v = maxcut_objective(w, &y)?;
        if v > best.1 {
            best = (y, v);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointOptimum {
    /// `perm[l] = j`
    pub perm: Vec<usize>,
    pub y1: Vec<i8>,
    pub y2: Vec<i8>,
    /// Maximization form.
    pub value: f64,
}

/// Enumerates every permutation and every coupling-consistent labeling and
/// maximizes `score(perm) + λ_c (cut(W1, y1) + cut(W2, y2))`.
///
/// Consistency forces `y2[perm[l]] = y1[l]`, so `y1` determines `y2`.
pub fn brute_force_joint_with<F>(w1: &DMatrix<f64>, w2: &DMatrix<f64>, lambda_c: f64, mut score: F) -> Result<JointOptimum>
where
    F: FnMut(&[usize]) -> f64,
{
    let n = w1.nrows();
    if w2.nrows() != n {
        return Err(CoreError::SizeMismatch { expected: n, found: w2.nrows() });
    }
    if n > JOINT_CAP {
        return Err(CoreError::TooLarge { n, cap: JOINT_CAP });
    }
    let labelings: Vec<Vec<i8>> = (0..1u32 << n).map(|m| labels_from_mask(m, n)).collect();
    let cuts1: Vec<f64> = labelings.iter().map(|y| maxcut_objective(w1, y)).collect::<Result<_>>()?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<JointOptimum> = None;
    let mut y2 = vec![0i8; n];
    loop {
        let s = score(&perm);
        for (y1, c1) in labelings.iter().zip(&cuts1) {
            for (l, &j) in perm.iter().enumerate() {
                y2[j] = y1[l];
            }
            let v = s + lambda_c * (c1 + maxcut_objective(w2, &y2)?);
            if best.as_ref().is_none_or(|b| v > b.value) {
                best = Some(JointOptimum { perm: perm.clone(), y1: y1.clone(), y2: y2.clone(), value: v });
            }
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// Relative weights of the matching and clustering terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointWeights {
    pub matching: f64,
    pub clustering: f64,
}

impl Default for JointWeights {
    fn default() -> Self {
        Self { matching: 1.0, clustering: 1.0 }
    }
}

/// Exact maximizer of `w_m · vec(X)'K vec(X) + w_c · (cut1 + cut2)` under the coupling.
pub fn brute_force_joint(k: &DMatrix<f64>, w1: &DMatrix<f64>, w2: &DMatrix<f64>, weights: JointWeights) -> Result<JointOptimum> {
    let n = w1.nrows();
    if k.nrows() != n * n {
        return Err(CoreError::SizeMismatch { expected: n * n, found: k.nrows() });
    }
    brute_force_joint_with(w1, w2, weights.clustering, |perm| {
        weights.matching * lawler_objective(k, &permutation_matrix(perm)).expect("shapes checked")
    })
}

/// Orthogonal Procrustes: `R ∈ O(d)` minimizing `‖R P − B‖²`, with that minimum.
pub fn procrustes(p: &DMatrix<f64>, b: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let m = b * p.transpose();
    let svd = m.svd(true, true);
    let r = svd.u.as_ref().expect("requested U") * svd.v_t.as_ref().expect("requested V'");
    let residual = p.norm_squared() + b.norm_squared() - 2.0 * svd.singular_values.sum();
    (r, residual.max(0.0))
}

/// `Σ_terms min_R ‖R P − Q X‖²` and the optimal rotations.
pub fn registration_cost(terms: &[RegistrationTerm], perm: &[usize]) -> (f64, Vec<DMatrix<f64>>) {
    let x = permutation_matrix(perm);
    let mut total = 0.0;
    let mut rots = Vec::with_capacity(terms.len());
    for t in terms {
        let (r, res) = procrustes(&t.p, &(&t.q * &x));
        total += res;
        rots.push(r);
    }
    (total, rots)
}

/// Spectral matching: leading eigenvector of `K` by power iteration, then
/// greedy conflict-free discretization (ties go to the lexicographically
/// first pair `(l, j)`).
pub fn spectral_matching_baseline(k: &DMatrix<f64>) -> Result<Vec<usize>> {
    let m = k.nrows();
    let n = (m as f64).sqrt().round() as usize;
    if !k.is_square() || n * n != m || n == 0 {
        return Err(CoreError::InvalidArgument("affinity must be n²×n²".into()));
    }
    let mut v = DVector::from_element(m, 1.0 / n as f64);
    for _ in 0..1000 {
        let mut next = k * &v;
        let norm = next.norm();
        if norm == 0.0 {
            break;
        }
        next /= norm;
        let change = (&next - &v).norm();
        v = next;
        if change < 1e-12 {
            break;
        }
    }
    if v.sum() < 0.0 {
        v.neg_mut();
    }
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; n];
    let mut perm = vec![0; n];
    for _ in 0..n {
        let mut best: Option<(f64, usize, usize)> = None;
        for l in (0..n).filter(|&l| !row_used[l]) {
            for j in (0..n).filter(|&j| !col_used[j]) {
                let val = v[j * n + l];
                if best.is_none_or(|b| val > b.0) {
                    best = Some((val, l, j));
                }
            }
        }
        let (_, l, j) = best.expect("free pair remains");
        row_used[l] = true;
        col_used[j] = true;
        perm[l] = j;
    }
    Ok(perm)
}

/// Sum of squared distances to the cluster means.
pub fn two_means_inertia(coords: &[Vec<f64>], labels: &[i8]) -> f64 {
    let dim = coords.first().map_or(0, |c| c.len());
    let mut total = 0.0;
    for side in [1i8, -1] {
        let members: Vec<&Vec<f64>> = coords.iter().zip(labels).filter(|(_, &l)| l == side).map(|(c, _)| c).collect();
        if members.is_empty() {
            continue;
        }
        let mean: Vec<f64> = (0..dim).map(|a| members.iter().map(|c| c[a]).sum::<f64>() / members.len() as f64).collect();
        total += members.iter().map(|c| euclid(c, &mean).powi(2)).sum::<f64>();
    }
    total
}

/// 2-means with seeded farthest-point initialisation and up to 50 restarts.
/// Node 0 always carries label `+1`.
pub fn kmeans2_baseline(coords: &[Vec<f64>], seed: u64) -> Result<Vec<i8>> {
    let n = coords.len();
    if n == 0 {
        return Err(CoreError::InvalidArgument("no points to cluster".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let restarts = n.min(50);
    let mut best: Option<(f64, Vec<i8>)> = None;
    for _ in 0..restarts {
        let first = rng.random_range(0..n);
        let second = (0..n).fold(first, |m, i| if euclid(&coords[i], &coords[first]) > euclid(&coords[m], &coords[first]) { i } else { m });
        let mut centers = [coords[first].clone(), coords[second].clone()];
        let mut labels = vec![0usize; n];
        for iter in 0..100 {
            let next: Vec<usize> = coords
                .iter()
                .map(|c| usize::from(euclid(c, &centers[1]) < euclid(c, &centers[0])))
                .collect();
            if iter > 0 && next == labels {
                break;
            }
            labels = next;
            for (side, center) in centers.iter_mut().enumerate() {
                let members: Vec<&Vec<f64>> = coords.iter().zip(&labels).filter(|(_, &l)| l == side).map(|(c, _)| c).collect();
                if !members.is_empty() {
                    for (a, x) in center.iter_mut().enumerate() {
                        *x = members.iter().map(|c| c[a]).sum::<f64>() / members.len() as f64;
                    }
                }
            }
        }
        let signed: Vec<i8> = labels.iter().map(|&l| if l == labels[0] { 1 } else { -1 }).collect();
        let inertia = two_means_inertia(coords, &signed);
        if best.as_ref().is_none_or(|b| inertia < b.0 - 1e-12) {
            best = Some((inertia, signed));
        }
    }
    Ok(best.expect("at least one restart").1)
}
