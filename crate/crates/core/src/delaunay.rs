//! Bowyer–Watson triangulation in the plane.

use std::collections::BTreeMap;

use crate::graph::euclid;
use crate::{CoreError, Result};

#[derive(Clone, Copy)]
struct Tri {
    v: [usize; 3],
    cx: f64,
    cy: f64,
    r2: f64,
}

fn circumcircle(p: &[[f64; 2]], v: [usize; 3]) -> Option<Tri> {
    let [a, b, c] = v.map(|i| p[i]);
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    if d == 0.0 {
        return None;
    }
    let sa = a[0] * a[0] + a[1] * a[1];
    let sb = b[0] * b[0] + b[1] * b[1];
    let sc = c[0] * c[0] + c[1] * c[1];
    let cx = (sa * (b[1] - c[1]) + sb * (c[1] - a[1]) + sc * (a[1] - b[1])) / d;
    let cy = (sa * (c[0] - b[0]) + sb * (a[0] - c[0]) + sc * (b[0] - a[0])) / d;
    let r2 = (a[0] - cx).powi(2) + (a[1] - cy).powi(2);
    Some(Tri { v, cx, cy, r2 })
}

/// Triangles of the Delaunay triangulation, as index triples.
pub fn delaunay_triangles(points: &[[f64; 2]]) -> Result<Vec<[usize; 3]>> {
    let n = points.len();
    if n < 3 {
        return Err(CoreError::Degenerate(format!("{n} points cannot be triangulated")));
    }
    // Normalise to the unit box so tolerances are scale free.
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(CoreError::Degenerate("non-finite coordinate".into()));
        }
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    if extent == 0.0 {
        return Err(CoreError::Degenerate("all points coincide".into()));
    }
    let mut pts: Vec<[f64; 2]> = points.iter().map(|p| [(p[0] - lo[0]) / extent, (p[1] - lo[1]) / extent]).collect();

    let mut sorted: Vec<usize> = (0..n).collect();
    sorted.sort_by(|&i, &j| pts[i][0].total_cmp(&pts[j][0]).then(pts[i][1].total_cmp(&pts[j][1])));
    for w in sorted.windows(2) {
        if euclid(&pts[w[0]], &pts[w[1]]) < 1e-12 {
            return Err(CoreError::Degenerate(format!("duplicate points {} and {}", w[0], w[1])));
        }
    }
    let (o, far) = (pts[sorted[0]], pts[sorted[n - 1]]);
    let max_cross = pts
        .iter()
        .map(|p| ((far[0] - o[0]) * (p[1] - o[1]) - (far[1] - o[1]) * (p[0] - o[0])).abs())
        .fold(0.0, f64::max);
    if max_cross < 1e-12 {
        return Err(CoreError::Degenerate("all points are collinear".into()));
    }

    const BIG: f64 = 1e3;
    pts.push([-BIG, -BIG]);
    pts.push([2.0 * BIG + 1.0, -BIG]);
    pts.push([0.5, 2.0 * BIG + 1.0]);
    let mut tris = vec![circumcircle(&pts, [n, n + 1, n + 2]).expect("super triangle is proper")];

    for i in 0..n {
        let p = pts[i];
        let (bad, keep): (Vec<Tri>, Vec<Tri>) = tris.into_iter().partition(|t| {
            let d2 = (p[0] - t.cx).powi(2) + (p[1] - t.cy).powi(2);
            d2 < t.r2 * (1.0 - 1e-12)
        });
        tris = keep;
        let mut boundary: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in &bad {
            for k in 0..3 {
                let (a, b) = (t.v[k], t.v[(k + 1) % 3]);
                *boundary.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for ((a, b), count) in boundary {
            if count == 1 {
                if let Some(t) = circumcircle(&pts, [a, b, i]) {
                    tris.push(t);
                }
            }
        }
    }
    let mut out: Vec<[usize; 3]> = tris
        .iter()
        .filter(|t| t.v.iter().all(|&v| v < n))
        .map(|t| {
            let mut v = t.v;
            v.sort_unstable();
            v
        })
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Delaunay edges `(i, j, length)` with `i < j`, each once.
pub fn delaunay_2d(points: &[[f64; 2]]) -> Result<Vec<(usize, usize, f64)>> {
    let mut edges = std::collections::BTreeSet::new();
    for t in delaunay_triangles(points)? {
        edges.insert((t[0], t[1]));
        edges.insert((t[1], t[2]));
        edges.insert((t[0], t[2]));
    }
    Ok(edges.into_iter().map(|(i, j)| (i, j, euclid(&points[i], &points[j]))).collect())
}
