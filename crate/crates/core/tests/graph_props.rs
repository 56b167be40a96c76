use std::collections::HashMap;

use jgmc_core::delaunay::{delaunay_2d, delaunay_triangles};
use jgmc_core::graph::{
    build_adjacency, build_affinity_k, cmu_edge_affinity, distance_matrix, kron_from_kb, knn_edges, vec_of, Graph,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn edge_list(n: usize) -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
    proptest::collection::vec((0..n, 0..n, 0.0..200.0f64), 0..2 * n)
        .prop_map(|v| v.into_iter().filter(|(i, j, _)| i != j).collect())
}

/// Direct quadruple loop over `(i1, i2, j1, j2)`.
fn quadruple_loop(g1: &Graph, g2: &Graph, node: &dyn Fn(usize, usize) -> f64) -> DMatrix<f64> {
    let n = g1.n;
    let w1: HashMap<(usize, usize), f64> = g1.edges.iter().map(|&(a, b, w)| ((a, b), w)).collect();
    let w2: HashMap<(usize, usize), f64> = g2.edges.iter().map(|&(a, b, w)| ((a, b), w)).collect();
    let raw = |i1: usize, i2: usize, j1: usize, j2: usize| -> f64 {
        if i1 == j1 && i2 == j2 {
            return node(i1, i2);
        }
        match (w1.get(&(i1, j1)), w2.get(&(i2, j2))) {
            (Some(&a), Some(&b)) => cmu_edge_affinity(a, b),
            _ => 0.0,
        }
    };
    let mut k = DMatrix::zeros(n * n, n * n);
    for i1 in 0..n {
        for i2 in 0..n {
            for j1 in 0..n {
                for j2 in 0..n {
                    k[(i2 * n + i1, j2 * n + j1)] = 0.5 * (raw(i1, i2, j1, j2) + raw(j1, j2, i1, i2));
                }
            }
        }
    }
    k
}

fn circumcircle_contains(a: [f64; 2], b: [f64; 2], c: [f64; 2], p: [f64; 2]) -> bool {
    let (ax, ay) = (a[0] - p[0], a[1] - p[1]);
    let (bx, by) = (b[0] - p[0], b[1] - p[1]);
    let (cx, cy) = (c[0] - p[0], c[1] - p[1]);
    let det = (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay)
        + (cx * cx + cy * cy) * (ax * by - bx * ay);
    let orient = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    det * orient.signum() > 1e-9
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affinity_matches_quadruple_loop(n in 1usize..=5, seed_edges in edge_list(5), other in edge_list(5), undirected in any::<bool>()) {
        let clip = |e: &[(usize, usize, f64)]| -> Vec<(usize, usize, f64)> {
            e.iter().copied().filter(|&(i, j, _)| i < n && j < n).collect()
        };
        let make = |e: Vec<(usize, usize, f64)>| {
            if undirected {
                let mut seen = std::collections::BTreeMap::new();
                for (i, j, w) in e {
                    seen.entry((i.min(j), i.max(j))).or_insert(w);
                }
                let dedup: Vec<_> = seen.into_iter().map(|((i, j), w)| (i, j, w)).collect();
                Graph::undirected(n, &dedup, None).unwrap()
            } else {
                let mut seen = std::collections::BTreeMap::new();
                for (i, j, w) in e {
                    seen.entry((i, j)).or_insert(w);
                }
                Graph::directed(n, seen.into_iter().map(|((i, j), w)| (i, j, w)).collect()).unwrap()
            }
        };
        let g1 = make(clip(&seed_edges));
        let g2 = make(clip(&other));
        let node = |i: usize, j: usize| (i * 7 + j * 3) as f64 * 0.1;
        let k = build_affinity_k(&g1, &g2, node, cmu_edge_affinity).unwrap();
        let oracle = quadruple_loop(&g1, &g2, &node);
        prop_assert_eq!(&k, &oracle);
        prop_assert_eq!(&k, &k.transpose());
    }

    #[test]
    fn kronecker_trace_identity(n in 1usize..=5, vals in proptest::collection::vec(-3.0..3.0f64, 75)) {
        let a = DMatrix::from_fn(n, n, |i, j| vals[i * 5 + j]);
        let b = DMatrix::from_fn(n, n, |i, j| vals[25 + i * 5 + j]);
        let x = DMatrix::from_fn(n, n, |i, j| vals[50 + i * 5 + j]);
        let v = vec_of(&x);
        let lhs = v.dot(&(kron_from_kb(&a, &b).unwrap() * &v));
        let rhs = (a.transpose() * x.transpose() * &b * &x).trace();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn distances_satisfy_triangle_inequality(pts in proptest::collection::vec(proptest::collection::vec(-50.0..50.0f64, 2), 3..8)) {
        let w = distance_matrix(&pts);
        let n = pts.len();
        for i in 0..n {
            prop_assert_eq!(w[(i, i)], 0.0);
            for j in 0..n {
                prop_assert_eq!(w[(i, j)], w[(j, i)]);
                for k in 0..n {
                    prop_assert!(w[(i, k)] <= w[(i, j)] + w[(j, k)] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn delaunay_circumcircles_are_empty(pts in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 3..14)) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let Ok(tris) = delaunay_triangles(&pts) else { return Ok(()) };
        for t in &tris {
            for (p, &q) in pts.iter().enumerate() {
                if t.contains(&p) {
                    continue;
                }
                prop_assert!(!circumcircle_contains(pts[t[0]], pts[t[1]], pts[t[2]], q));
            }
        }
        // Planar triangulation: at most 3n - 6 edges for n >= 3.
        let edges = delaunay_2d(&pts).unwrap();
        prop_assert!(edges.len() <= 3 * pts.len() - 3);
        prop_assert!(edges.len() >= pts.len() - 1);
    }

    #[test]
    fn knn_degree_lower_bound(pts in proptest::collection::vec(proptest::collection::vec(-10.0..10.0f64, 3), 5..20), k in 1usize..4) {
        let edges = knn_edges(&pts, k).unwrap();
        let g = Graph::undirected(pts.len(), &edges, Some(pts.clone())).unwrap();
        for i in 0..pts.len() {
            prop_assert!(g.degree(i) >= k);
        }
        let a = build_adjacency(&g);
        prop_assert_eq!(&a, &a.transpose());
    }
}

#[test]
fn ten_random_points_triangulate_with_empty_circles() {
    let pts: Vec<[f64; 2]> = (0..10)
        .map(|i| {
            let t = i as f64;
            [(t * 12.9898).sin().abs() * 10.0, (t * 78.233 + 1.0).cos().abs() * 10.0]
        })
        .collect();
    let tris = delaunay_triangles(&pts).unwrap();
    for t in &tris {
        for (p, &q) in pts.iter().enumerate() {
            if !t.contains(&p) {
                assert!(!circumcircle_contains(pts[t[0]], pts[t[1]], pts[t[2]], q));
            }
        }
    }
}

#[test]
fn json_round_trip_preserves_graph() {
    let mut g = Graph::undirected(3, &[(0, 1, 1.5), (1, 2, 2.0)], Some(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]]))
        .unwrap();
    g.gt_cluster = Some(vec![1, 1, -1]);
    let back = Graph::from_json(&g.to_json()).unwrap();
    assert_eq!(back, g);
}

#[test]
fn single_edge_pair_has_unit_affinity_slots() {
    let g = Graph::undirected(2, &[(0, 1, 7.0)], None).unwrap();
    let k = build_affinity_k(&g, &g, |_, _| 0.0, cmu_edge_affinity).unwrap();
    // (0,0)-(1,1) and (0,1)-(1,0) assignment pairs, both orientations.
    assert_eq!(k[(0, 3)], 1.0);
    assert_eq!(k[(3, 0)], 1.0);
    assert_eq!(k[(2, 1)], 1.0);
    assert_eq!(k[(1, 2)], 1.0);
    assert_eq!(k.iter().filter(|&&v| v != 0.0).count(), 4);
}
