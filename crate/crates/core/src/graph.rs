use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

/// Weighted graph with optional geometry and ground truth.
///
/// Undirected graphs store both orientations of every edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub n: usize,
    #[serde(default)]
    pub directed: bool,
    #[serde(default)]
    pub coords: Option<Vec<Vec<f64>>>,
    /// `(src, dst, weight)`
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub gt_cluster: Option<Vec<i8>>,
    /// `gt_match[i] = j`: node `i` of the first graph corresponds to node `j` here.
    #[serde(default)]
    pub gt_match: Option<Vec<usize>>,
}

impl Graph {
    /// Undirected graph; each `(i, j, w)` is stored in both orientations.
    pub fn undirected(n: usize, edges: &[(usize, usize, f64)], coords: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let mut both = Vec::with_capacity(2 * edges.len());
        for &(i, j, w) in edges {
            both.push((i, j, w));
            both.push((j, i, w));
        }
        both.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        both.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        let g = Self { n, directed: false, coords, edges: both, gt_cluster: None, gt_match: None };
        g.validate()?;
        Ok(g)
    }

    pub fn directed(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let g = Self { n, directed: true, coords: None, edges, gt_cluster: None, gt_match: None };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoreError::InvalidGraph(m));
        if self.n == 0 {
            return bad("graph has no nodes".into());
        }
        for &(s, d, w) in &self.edges {
            if s >= self.n || d >= self.n {
                return bad(format!("edge ({s}, {d}) out of range for {} nodes", self.n));
            }
            if s == d {
                return bad(format!("self-loop at node {s}"));
            }
            if !(w.is_finite() && w >= 0.0) {
                return bad(format!("edge ({s}, {d}) has weight {w}"));
            }
        }
        if !self.directed {
            let a = build_adjacency(self);
            if a != a.transpose() {
                return bad("undirected graph with an asymmetric edge set".into());
            }
        }
        if let Some(c) = &self.coords {
            if c.len() != self.n {
                return bad(format!("{} coordinates for {} nodes", c.len(), self.n));
            }
            let dim = c[0].len();
            if !(dim == 2 || dim == 3) || c.iter().any(|p| p.len() != dim || p.iter().any(|x| !x.is_finite())) {
                return bad("coordinates must be finite points of a common dimension 2 or 3".into());
            }
        }
        if let Some(l) = &self.gt_cluster {
            if l.len() != self.n || l.iter().any(|&v| v != 1 && v != -1) {
                return bad("gt_cluster must hold n labels in {-1, +1}".into());
            }
        }
        if let Some(p) = &self.gt_match {
            if !is_permutation(p) || p.len() != self.n {
                return bad("gt_match must be a permutation of the nodes".into());
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization cannot fail")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Degree of node `i` counting outgoing edges.
    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|e| e.0 == i).count()
    }
}

pub fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &j in p {
        if j >= p.len() || seen[j] {
            return false;
        }
        seen[j] = true;
    }
    true
}

pub fn build_adjacency(g: &Graph) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(g.n, g.n);
    for &(s, d, w) in &g.edges {
        a[(s, d)] = w;
    }
    a
}

/// Pairwise Euclidean distances between node coordinates.
pub fn intra_affinity(g: &Graph) -> Result<DMatrix<f64>> {
    let c = g.coords.as_ref().ok_or(CoreError::MissingCoordinates)?;
    Ok(distance_matrix(c))
}

pub fn distance_matrix(points: &[Vec<f64>]) -> DMatrix<f64> {
    let n = points.len();
    DMatrix::from_fn(n, n, |i, j| euclid(&points[i], &points[j]))
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Edge kernel `exp(-(e1 - e2)^2 / 2500)`.
pub fn cmu_edge_affinity(e1: f64, e2: f64) -> f64 {
    (-(e1 - e2).powi(2) / 2500.0).exp()
}

/// Lawler affinity between `g1` (rows of X) and `g2` (columns of X).
///
/// Assignment `(i1, i2)`, node `i1` of `g1` to node `i2` of `g2`, sits at
/// index `i2 * n + i1`. The diagonal holds `node_aff(i1, i2)`; entry
/// `((i1, i2), (j1, j2))` holds `edge_aff(w1(i1, j1), w2(i2, j2))` when both
/// edges exist. The result is symmetrized.
pub fn build_affinity_k<N, E>(g1: &Graph, g2: &Graph, node_aff: N, edge_aff: E) -> Result<DMatrix<f64>>
where
    N: Fn(usize, usize) -> f64,
    E: Fn(f64, f64) -> f64,
{
    let n = g1.n;
    if g2.n != n {
        return Err(CoreError::SizeMismatch { expected: n, found: g2.n });
    }
    let mut k = DMatrix::zeros(n * n, n * n);
    for i1 in 0..n {
        for i2 in 0..n {
            k[(i2 * n + i1, i2 * n + i1)] = node_aff(i1, i2);
        }
    }
    for &(i1, j1, w1) in &g1.edges {
        for &(i2, j2, w2) in &g2.edges {
            k[(i2 * n + i1, j2 * n + j1)] = edge_aff(w1, w2);
        }
    }
    Ok((&k + k.transpose()) * 0.5)
}

/// `A ⊗ B`, so that `vec(X)' (A ⊗ B) vec(X) = tr(A' X' B X)` with column-major vec.
pub fn kron_from_kb(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(CoreError::SizeMismatch { expected: a.nrows(), found: b.nrows() });
    }
    Ok(a.kronecker(b))
}

/// Column-major vectorization.
pub fn vec_of(x: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(x.as_slice())
}

/// Permutation array to matrix: `X[i, perm[i]] = 1`.
pub fn permutation_matrix(perm: &[usize]) -> DMatrix<f64> {
    let n = perm.len();
    let mut x = DMatrix::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        x[(i, j)] = 1.0;
    }
    x
}

/// Symmetrized k-nearest-neighbour edges, each unordered pair once (`i < j`).
pub fn knn_edges(points: &[Vec<f64>], k: usize) -> Result<Vec<(usize, usize, f64)>> {
    let n = points.len();
    if k == 0 {
        return Err(CoreError::InvalidArgument("k must be positive".into()));
    }
    if k >= n {
        return Err(CoreError::InvalidArgument(format!("k = {k} needs more than {n} points")));
    }
    let mut pairs = std::collections::BTreeSet::new();
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (euclid(&points[i], &points[j]), j)).collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &others[..k] {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    Ok(pairs.into_iter().map(|(i, j)| (i, j, euclid(&points[i], &points[j]))).collect())
}

/// Dense matrix as row-major nested arrays.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if rows.iter().any(|x| x.len() != c) {
        return Err(CoreError::Parse("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}
