//! Synthetic two-cluster scenes and landmark sequences.

use std::path::Path;

use nalgebra::{Rotation3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::delaunay::delaunay_2d;
use crate::graph::{euclid, knn_edges, Graph};
use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    /// Triangular prism, 6 corners.
    Prism6,
    /// Box, 8 corners.
    Box8,
    /// Triangular pyramid, 4 corners.
    Pyramid4,
    /// Square pyramid, 5 corners.
    Pyramid5,
}

impl Primitive {
    /// Corners of the unit-size primitive, centred at the origin.
    pub fn corners(self) -> Vec<[f64; 3]> {
        let h = 3f64.sqrt() / 2.0;
        let raw: Vec<[f64; 3]> = match self {
            Primitive::Prism6 => vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.5, h, 0.0],
                [0.0, 0.0, 1.2],
                [1.0, 0.0, 1.2],
                [0.5, h, 1.2],
            ],
            Primitive::Box8 => {
                let mut c = Vec::new();
                for z in [0.0, 0.7] {
                    for y in [0.0, 0.9] {
                        for x in [0.0, 1.2] {
                            c.push([x, y, z]);
                        }
                    }
                }
                c
            }
            Primitive::Pyramid4 => vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, h, 0.0], [0.5, h / 3.0, 1.1]],
            Primitive::Pyramid5 => vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.5, 0.5, 1.3],
            ],
        };
        let m = raw.len() as f64;
        let mean: Vec<f64> = (0..3).map(|a| raw.iter().map(|c| c[a]).sum::<f64>() / m).collect();
        raw.iter().map(|c| [c[0] - mean[0], c[1] - mean[1], c[2] - mean[2]]).collect()
    }

    pub fn len(self) -> usize {
        self.corners().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgeRule {
    /// Delaunay triangulation of planar coordinates.
    Delaunay,
    /// Symmetrized k-nearest neighbours.
    Knn { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierSpec {
    pub count: usize,
    /// Standard deviation around the common centre, in units of the primitive scale.
    pub spread: f64,
    /// Cluster the outliers gather next to; `None` picks one at random.
    #[serde(default)]
    pub near_label: Option<i8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticScenario {
    pub name: String,
    pub primitives: Vec<Primitive>,
    /// Cluster label per primitive; alternates `+1, −1` when absent.
    pub labels: Option<Vec<i8>>,
    /// Explicit centroid per primitive; overrides the automatic layout.
    pub offsets: Option<Vec<[f64; 3]>>,
    /// Size of a primitive in coordinate units.
    pub scale: f64,
    /// Distance between cluster centroids in primitive diameters.
    pub separation: f64,
    pub sigma: f64,
    pub outliers: Option<OutlierSpec>,
    pub seed: u64,
    /// Permutes the node order of the second graph.
    pub shuffle: bool,
    /// Project to the plane before building edges.
    pub planar: bool,
    pub edges: EdgeRule,
}

impl Default for SyntheticScenario {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            primitives: vec![Primitive::Prism6, Primitive::Pyramid5],
            labels: None,
            offsets: None,
            scale: 100.0,
            separation: 6.0,
            sigma: 0.0,
            outliers: None,
            seed: 0,
            shuffle: false,
            planar: true,
            edges: EdgeRule::Delaunay,
        }
    }
}

impl SyntheticScenario {
    /// One prism and one square pyramid: 11 nodes.
    pub fn eleven_nodes(seed: u64, sigma: f64) -> Self {
        Self { name: "nodes11".into(), seed, sigma, ..Self::default() }
    }

    /// Two clusters of a box and a prism each: 28 nodes.
    pub fn twenty_eight_nodes(seed: u64, sigma: f64) -> Self {
        Self {
            name: "nodes28".into(),
            primitives: vec![Primitive::Box8, Primitive::Prism6, Primitive::Box8, Primitive::Prism6],
            labels: Some(vec![1, 1, -1, -1]),
            seed,
            sigma,
            ..Self::default()
        }
    }

    /// The 28-node scene plus 5 clustered outliers: 33 nodes, unequal clusters.
    pub fn thirty_three_nodes(seed: u64, sigma: f64) -> Self {
        Self {
            name: "nodes33".into(),
            outliers: Some(OutlierSpec { count: 5, spread: 0.25, near_label: None }),
            ..Self::twenty_eight_nodes(seed, sigma)
        }
    }

    /// Scene with two primitives drawn from a small-instance pool.
    pub fn small(primitives: [Primitive; 2], seed: u64, sigma: f64) -> Self {
        Self { name: "small".into(), primitives: primitives.to_vec(), seed, sigma, ..Self::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.primitives.len() < 2 {
            return Err(CoreError::InvalidArgument("two clusters need at least two primitives".into()));
        }
        let labels = self.cluster_labels();
        if labels.len() != self.primitives.len() || labels.iter().any(|&l| l != 1 && l != -1) {
            return Err(CoreError::InvalidArgument("one ±1 label per primitive required".into()));
        }
        if !labels.contains(&1) || !labels.contains(&-1) {
            return Err(CoreError::InvalidArgument("both clusters need a primitive".into()));
        }
        if let Some(o) = &self.offsets {
            if o.len() != self.primitives.len() {
                return Err(CoreError::SizeMismatch { expected: self.primitives.len(), found: o.len() });
            }
        }
        if !(self.sigma >= 0.0 && self.scale > 0.0 && self.separation > 0.0) {
            return Err(CoreError::InvalidArgument("sigma, scale and separation must be nonnegative".into()));
        }
        if let Some(o) = &self.outliers {
            if !(o.spread >= 0.0) {
                return Err(CoreError::InvalidArgument("outlier spread must be nonnegative".into()));
            }
        }
        Ok(())
    }

    pub fn cluster_labels(&self) -> Vec<i8> {
        self.labels
            .clone()
            .unwrap_or_else(|| (0..self.primitives.len()).map(|g| if g % 2 == 0 { 1 } else { -1 }).collect())
    }

    pub fn node_count(&self) -> usize {
        self.primitives.iter().map(|p| p.len()).sum::<usize>() + self.outliers.as_ref().map_or(0, |o| o.count)
    }
}

/// Base scene before noise: coordinates, labels and the primitive each node came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub coords: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
    pub centroids: Vec<Vec<f64>>,
    pub centroid_labels: Vec<i8>,
    /// Largest primitive diameter.
    pub diameter: f64,
}

fn diameter(points: &[[f64; 3]]) -> f64 {
    let mut d: f64 = 0.0;
    for a in points {
        for b in points {
            d = d.max(euclid(a, b));
        }
    }
    d
}

fn project(p: Vector3<f64>, planar: bool) -> Vec<f64> {
    if planar {
        vec![p.x, p.y]
    } else {
        vec![p.x, p.y, p.z]
    }
}

/// Randomly oriented primitives laid out per cluster.
pub fn build_scene(spec: &SyntheticScenario, rng: &mut ChaCha8Rng) -> Result<Scene> {
    spec.validate()?;
    let labels = spec.cluster_labels();
    let diam = spec.primitives.iter().map(|p| diameter(&p.corners())).fold(0.0, f64::max) * spec.scale;
    let mut per_cluster = [0usize; 2];
    let largest = {
        let pos = labels.iter().filter(|&&l| l == 1).count();
        pos.max(labels.len() - pos)
    };
    let gap = spec.separation * diam * largest as f64;
    let mut scene = Scene { coords: Vec::new(), labels: Vec::new(), centroids: Vec::new(), centroid_labels: Vec::new(), diameter: diam };
    for (g, (&prim, &label)) in spec.primitives.iter().zip(&labels).enumerate() {
        let side = usize::from(label == -1);
        let centre = match &spec.offsets {
            Some(o) => Vector3::from(o[g]),
            None => Vector3::new(side as f64 * gap, per_cluster[side] as f64 * 1.5 * diam, 0.0),
        };
        per_cluster[side] += 1;
        let rot = Rotation3::from_euler_angles(
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        for c in prim.corners() {
            let p = rot * (Vector3::from(c) * spec.scale) + centre;
            scene.coords.push(project(p, spec.planar));
            scene.labels.push(label);
        }
        scene.centroids.push(project(centre, spec.planar));
        scene.centroid_labels.push(label);
    }
    Ok(scene)
}

/// Edges of a point set; Delaunay falls back to 3-NN on degenerate input.
pub fn scene_edges(coords: &[Vec<f64>], rule: EdgeRule) -> Result<Vec<(usize, usize, f64)>> {
    let n = coords.len();
    match rule {
        EdgeRule::Delaunay => {
            if coords.iter().any(|c| c.len() != 2) {
                return Err(CoreError::InvalidArgument("Delaunay edges need planar coordinates".into()));
            }
            let pts: Vec<[f64; 2]> = coords.iter().map(|c| [c[0], c[1]]).collect();
            match delaunay_2d(&pts) {
                Ok(e) => Ok(e),
                Err(CoreError::Degenerate(_)) if n > 1 => knn_edges(coords, 3.min(n - 1)),
                Err(e) => Err(e),
            }
        }
        EdgeRule::Knn { k } => knn_edges(coords, k.min(n.saturating_sub(1)).max(1)),
    }
}

/// Appends `count` nodes around one random centre with standard deviation
/// `spread` (absolute units). They share the label of the nearest centroid.
pub fn add_clustered_outliers(scene: &mut Scene, count: usize, spread: f64, near_label: Option<i8>, rng: &mut ChaCha8Rng) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    if scene.centroids.is_empty() {
        return Err(CoreError::InvalidArgument("scene has no primitives".into()));
    }
    let candidates: Vec<usize> = (0..scene.centroids.len())
        .filter(|&g| near_label.is_none_or(|l| scene.centroid_labels[g] == l))
        .collect();
    if candidates.is_empty() {
        return Err(CoreError::InvalidArgument("no primitive carries the requested label".into()));
    }
    let anchor = candidates[rng.random_range(0..candidates.len())];
    let dim = scene.centroids[anchor].len();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let dir: Vec<f64> = (0..dim).map(|_| unit.sample(rng)).collect();
    let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    let reach = 1.5 * scene.diameter;
    let centre: Vec<f64> = scene.centroids[anchor].iter().zip(&dir).map(|(c, d)| c + reach * d / len).collect();
    let label = (0..scene.centroids.len())
        .min_by(|&a, &b| euclid(&scene.centroids[a], &centre).total_cmp(&euclid(&scene.centroids[b], &centre)))
        .map(|g| scene.centroid_labels[g])
        .expect("nonempty");
    for _ in 0..count {
        let p: Vec<f64> = centre.iter().map(|c| c + spread * unit.sample(rng)).collect();
        scene.coords.push(p);
        scene.labels.push(label);
    }
    Ok(())
}

/// Generates a noisy pair. The second graph keeps the topology of the first,
/// its coordinates get i.i.d. `N(0, σ²)` noise and its nodes are optionally
/// shuffled; `gt_match` is stored on both graphs.
pub fn gen_pair(spec: &SyntheticScenario) -> Result<(Graph, Graph)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut scene = build_scene(spec, &mut rng)?;
    if let Some(o) = &spec.outliers {
        add_clustered_outliers(&mut scene, o.count, o.spread * spec.scale, o.near_label, &mut rng)?;
    }
    let n = scene.coords.len();
    let edges = scene_edges(&scene.coords, spec.edges)?;

    let noise = Normal::new(0.0, spec.sigma.max(f64::MIN_POSITIVE)).map_err(|e| CoreError::InvalidArgument(e.to_string()))?;
    let noisy: Vec<Vec<f64>> = scene
        .coords
        .iter()
        .map(|c| c.iter().map(|v| if spec.sigma > 0.0 { v + noise.sample(&mut rng) } else { *v }).collect())
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    if spec.shuffle {
        perm.shuffle(&mut rng);
    }

    let mut g1 = Graph::undirected(n, &edges, Some(scene.coords.clone()))?;
    g1.gt_cluster = Some(scene.labels.clone());
    g1.gt_match = Some(perm.clone());

    let mut coords2 = vec![Vec::new(); n];
    let mut labels2 = vec![0i8; n];
    for i in 0..n {
        coords2[perm[i]] = noisy[i].clone();
        labels2[perm[i]] = scene.labels[i];
    }
    let edges2: Vec<(usize, usize, f64)> =
        edges.iter().map(|&(i, j, _)| (perm[i], perm[j], euclid(&coords2[perm[i]], &coords2[perm[j]]))).collect();
    let mut g2 = Graph::undirected(n, &edges2, Some(coords2))?;
    g2.gt_cluster = Some(labels2);
    g2.gt_match = Some(perm);
    Ok((g1, g2))
}

/// Number of landmarks per frame in the house sequence.
pub const CMU_LANDMARKS: usize = 30;

/// Parses a landmark sequence: whitespace-separated numbers, one
/// `30 × 2` block per frame.
pub fn parse_landmarks(text: &str) -> Result<Vec<Vec<[f64; 2]>>> {
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| CoreError::Parse(format!("not a number: {t:?}"))))
        .collect::<Result<_>>()?;
    let block = 2 * CMU_LANDMARKS;
    if values.is_empty() || values.len() % block != 0 {
        return Err(CoreError::Parse(format!("{} values do not form 30×2 frames", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Parse("non-finite landmark".into()));
    }
    Ok(values.chunks(block).map(|f| f.chunks(2).map(|p| [p[0], p[1]]).collect()).collect())
}

/// Graph of one frame restricted to the first `m` landmarks.
fn landmark_graph(points: &[[f64; 2]], m: usize) -> Result<Graph> {
    let pts = &points[..m];
    let edges = delaunay_2d(pts)?;
    let mut g = Graph::undirected(m, &edges, Some(pts.iter().map(|p| p.to_vec()).collect()))?;
    g.gt_match = Some((0..m).collect());
    Ok(g)
}

/// Pair of frames (1-based) with the first `m` landmarks.
pub fn cmu_pair(frames: &[Vec<[f64; 2]>], frame_a: usize, frame_b: usize, m: usize) -> Result<(Graph, Graph)> {
    for f in [frame_a, frame_b] {
        if f == 0 || f > frames.len() {
            return Err(CoreError::InvalidArgument(format!("frame {f} outside 1..={}", frames.len())));
        }
    }
    if !(3..=CMU_LANDMARKS).contains(&m) {
        return Err(CoreError::InvalidArgument(format!("landmark count {m} outside 3..=30")));
    }
    Ok((landmark_graph(&frames[frame_a - 1], m)?, landmark_graph(&frames[frame_b - 1], m)?))
}

/// Renames node `i` to `perm[i]`, carrying coordinates, labels and the
/// ground-truth matching along.
pub fn relabel_graph(g: &Graph, perm: &[usize]) -> Result<Graph> {
    if perm.len() != g.n || !crate::graph::is_permutation(perm) {
        return Err(CoreError::InvalidArgument("relabeling is not a permutation of the nodes".into()));
    }
    let mut out = g.clone();
    out.edges = g.edges.iter().map(|&(i, j, w)| (perm[i], perm[j], w)).collect();
    out.edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    fn scatter<T: Clone>(perm: &[usize], v: &[T]) -> Vec<T> {
        let mut o = v.to_vec();
        for (i, &p) in perm.iter().enumerate() {
            o[p] = v[i].clone();
        }
        o
    }
    out.coords = g.coords.as_ref().map(|c| scatter(perm, c));
    out.gt_cluster = g.gt_cluster.as_ref().map(|c| scatter(perm, c));
    out.gt_match = g.gt_match.as_ref().map(|m| m.iter().map(|&j| perm[j]).collect());
    Ok(out)
}

pub fn load_cmu_house(path: &Path, frame_a: usize, frame_b: usize, m: usize) -> Result<(Graph, Graph)> {
    cmu_pair(&parse_landmarks(&std::fs::read_to_string(path)?)?, frame_a, frame_b, m)
}

/// Landmark sequence of a rigid toy house seen by a slowly orbiting
/// orthographic camera, in the same layout as [`parse_landmarks`] expects.
pub fn synthetic_house_frames(frames: usize, jitter: f64, seed: u64) -> Vec<Vec<[f64; 2]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut pts: Vec<Vector3<f64>> = Vec::with_capacity(CMU_LANDMARKS);
    // Walls, roof ridge and facade details.
    for &(x, z) in &[(0.0, 0.0), (4.0, 0.0), (4.0, 3.0), (0.0, 3.0)] {
        pts.push(Vector3::new(x, 0.0, z));
        pts.push(Vector3::new(x, 2.5, z));
    }
    pts.push(Vector3::new(0.0, 3.8, 1.5));
    pts.push(Vector3::new(4.0, 3.8, 1.5));
    while pts.len() < CMU_LANDMARKS {
        let face = rng.random_range(0..3);
        let p = match face {
            0 => Vector3::new(rng.random_range(0.3..3.7), rng.random_range(0.3..2.3), 0.0),
            1 => Vector3::new(4.0, rng.random_range(0.3..2.3), rng.random_range(0.3..2.7)),
            _ => {
                let t: f64 = rng.random_range(0.1..0.9);
                Vector3::new(rng.random_range(0.3..3.7), 2.5 + 1.3 * t, 1.5 * t)
            }
        };
        pts.push(p);
    }
    let centre = pts.iter().fold(Vector3::zeros(), |a, p| a + p) / pts.len() as f64;
    (0..frames)
        .map(|f| {
            let yaw = -0.6 + 0.9 * f as f64 / frames.max(2) as f64;
            let rot = Rotation3::from_euler_angles(0.25, yaw, 0.0);
            pts.iter()
                .map(|p| {
                    let q = rot * (p - centre) * 60.0;
                    [320.0 + q.x + jitter * unit.sample(&mut rng), 240.0 - q.y + jitter * unit.sample(&mut rng)]
                })
                .collect()
        })
        .collect()
}

/// Serializes frames in the whitespace layout read by [`parse_landmarks`].
pub fn format_landmarks(frames: &[Vec<[f64; 2]>]) -> String {
    let mut out = String::new();
    for f in frames {
        for p in f {
            out.push_str(&format!("{:.6} {:.6}\n", p[0], p[1]));
        }
    }
    out
}
