//! End-to-end joint matching and clustering of one graph pair.

use std::collections::BTreeMap;
use std::time::Instant;

use jgmc_conic::{SolveReport, SolverSettings};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedding::{choose_dim, hope, similarity_spectrum};
use crate::graph::{build_adjacency, build_affinity_k, cmu_edge_affinity, distance_matrix, intra_affinity, Graph};
use crate::kpsvd::{kpsvd_decompose, symmetrize_terms};
use crate::metrics::maxcut_objective;
use crate::model::{assemble_joint, CouplingMode, JointModel, ModelInput, ModelOptions, RegistrationTerm};
use crate::oracle::registration_cost;
use crate::rounding::{align_cluster_signs, cluster_scores, consistency_report, project_permutation, repair_matching, threshold};
use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimChoice {
    Fixed(usize),
    /// Smallest dimension holding `energy` of every factor's spectrum.
    Auto { energy: f64, min: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Kronecker terms kept.
    pub k: usize,
    pub dim: DimChoice,
    pub lambda_m: Option<f64>,
    pub lambda_c: Option<f64>,
    pub coupling: CouplingMode,
    pub row_sum_moments: bool,
    pub one_hot_moments: bool,
    pub bound_slacks: bool,
    /// Cluster-restricted re-assignment after rounding.
    pub repair: bool,
    /// Pads the smaller graph with isolated nodes.
    pub dummy_padding: bool,
    /// Folds the target-side term of a factor into its source-side twin
    /// when both embeddings coincide.
    pub merge_sides: bool,
    pub solver: SolverSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let m = ModelOptions::default();
        Self {
            k: 2,
            dim: DimChoice::Fixed(3),
            lambda_m: None,
            lambda_c: None,
            coupling: m.coupling,
            row_sum_moments: m.row_sum_moments,
            one_hot_moments: m.one_hot_moments,
            bound_slacks: m.bound_slacks,
            repair: false,
            dummy_padding: false,
            merge_sides: true,
            solver: SolverSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn model_options(&self) -> ModelOptions {
        ModelOptions {
            coupling: self.coupling,
            lambda_m: self.lambda_m,
            lambda_c: self.lambda_c,
            row_sum_moments: self.row_sum_moments,
            one_hot_moments: self.one_hot_moments,
            bound_slacks: self.bound_slacks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSolution {
    /// `perm[l] = j`
    pub perm: Vec<usize>,
    pub y1: Vec<i8>,
    pub y2: Vec<i8>,
    pub x_relaxed: DMatrix<f64>,
    pub y_relaxed: Vec<f64>,
    pub cluster_scores: Vec<f64>,
    /// `−(λ_m · registration − λ_c · cut)` at the relaxed optimum.
    pub relaxed_objective: f64,
    /// Same objective at the rounded point, with `y2` completed from `y1`
    /// through the matching whenever coupling is active.
    pub rounded_objective: f64,
    pub rounded_registration: f64,
    pub rounded_cut: f64,
    /// Matched pairs split across clusters.
    pub violations: usize,
    pub lambda_m: f64,
    pub lambda_c: f64,
    pub d: usize,
    pub kpsvd_energy: f64,
    pub dummies: usize,
    pub input: ModelInput,
    pub report: SolveReport,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

/// Isolated nodes appended until both graphs have `n` nodes.
pub fn pad_graph(g: &Graph, n: usize) -> Graph {
    let mut out = g.clone();
    out.n = n;
    if let Some(c) = &mut out.coords {
        let dim = c.first().map_or(2, |p| p.len());
        let centre: Vec<f64> = (0..dim).map(|a| c.iter().map(|p| p[a]).sum::<f64>() / c.len().max(1) as f64).collect();
        c.resize(n, centre);
    }
    if let Some(l) = &mut out.gt_cluster {
        l.resize(n, 1);
    }
    out
}

/// Node distances; falls back to distances between spectral coordinates.
pub fn intra_weights(g: &Graph) -> Result<DMatrix<f64>> {
    match intra_affinity(g) {
        Ok(w) => Ok(w),
        Err(CoreError::MissingCoordinates) => {
            let a = build_adjacency(g);
            let a = (&a + a.transpose()) * 0.5;
            let e = hope(&a, g.n.min(3))?;
            let pts: Vec<Vec<f64>> = (0..g.n).map(|i| e.p.column(i).iter().copied().collect()).collect();
            Ok(distance_matrix(&pts))
        }
        Err(e) => Err(e),
    }
}

/// Factorizes the affinity of a pair and embeds every factor.
pub fn registration_terms(g1: &Graph, g2: &Graph, cfg: &PipelineConfig) -> Result<(Vec<RegistrationTerm>, usize, f64)> {
    let n = g1.n;
    let k_mat = build_affinity_k(g1, g2, |_, _| 0.0, cmu_edge_affinity)?;
    let f = kpsvd_decompose(&k_mat, cfg.k.clamp(1, n * n))?;
    if f.terms.is_empty() {
        return Err(CoreError::Degenerate("affinity matrix vanishes".into()));
    }
    let terms = symmetrize_terms(&f.terms);
    let d = match cfg.dim {
        DimChoice::Fixed(d) => d.clamp(1, n),
        DimChoice::Auto { energy, min, max } => {
            let mut d = min.max(1);
            for t in &terms {
                for m in [&t.a, &t.b] {
                    d = d.max(choose_dim(&similarity_spectrum(m), energy, min.max(1), max.max(1))?);
                }
            }
            d.min(n)
        }
    };
    let mut source = Vec::new();
    let mut target = Vec::new();
    for term in &terms {
        let ea = hope(&term.a, d)?;
        let eb = hope(&term.b, d)?;
        let src = RegistrationTerm { p: ea.p, q: eb.p };
        let tgt = RegistrationTerm { p: ea.q, q: eb.q };
        if cfg.merge_sides && same_term(&src, &tgt) {
            let s2 = std::f64::consts::SQRT_2;
            source.push(RegistrationTerm { p: src.p * s2, q: src.q * s2 });
        } else {
            source.push(src);
            target.push(tgt);
        }
    }
    source.extend(target);
    Ok((source, d, f.energy))
}

fn same_term(a: &RegistrationTerm, b: &RegistrationTerm) -> bool {
    let scale = a.p.norm() + a.q.norm() + 1.0;
    (&a.p - &b.p).norm() + (&a.q - &b.q).norm() <= 1e-9 * scale
}

/// Maximization-form objective of an integral point.
pub fn integral_objective(input: &ModelInput, lambda_m: f64, lambda_c: f64, perm: &[usize], y1: &[i8], y2: &[i8]) -> Result<(f64, f64, f64)> {
    let reg = if lambda_m == 0.0 { 0.0 } else { registration_cost(&input.terms, perm).0 };
    let cut = maxcut_objective(&input.w1, y1)? + maxcut_objective(&input.w2, y2)?;
    Ok((lambda_c * cut - lambda_m * reg, reg, cut))
}

/// `y2` induced by `y1` through the matching.
pub fn propagate_labels(perm: &[usize], y1: &[i8]) -> Vec<i8> {
    let mut y2 = vec![1; perm.len()];
    for (l, &j) in perm.iter().enumerate() {
        y2[j] = y1[l];
    }
    y2
}

/// Solves an assembled model and rounds the result.
pub fn solve_model(model: &JointModel, settings: &SolverSettings, repair: bool) -> Result<(JointSolution, BTreeMap<String, f64>)> {
    let mut timings = BTreeMap::new();
    let clock = Instant::now();
    let sol = jgmc_conic::solve(&model.program, settings)?;
    timings.insert("solve".into(), clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let n = model.n();
    let x_rel = model.relaxed_x(&sol.x);
    let y_rel = model.relaxed_y(&sol.x);
    let l = model.moment_l(&sol.x);
    let scores = cluster_scores(&l, &y_rel, &[n, n]);
    let mut perm = project_permutation(&x_rel)?;
    let (y1, y2) = (threshold(&scores[..n])?, threshold(&scores[n..])?);
    let (y1, y2) = align_cluster_signs(&y1, &y2, &perm);
    if repair {
        perm = repair_matching(&x_rel, &y1, &y2)?;
    }
    let y2_eval = if model.options.coupling == CouplingMode::None { y2.clone() } else { propagate_labels(&perm, &y1) };
    let (rounded, reg, cut) = integral_objective(&model.input, model.lambda_m, model.lambda_c, &perm, &y1, &y2_eval)?;
    timings.insert("rounding".into(), clock.elapsed().as_secs_f64());

    let out = JointSolution {
        violations: consistency_report(&perm, &y1, &y2),
        perm,
        y1,
        y2,
        x_relaxed: x_rel,
        y_relaxed: y_rel,
        cluster_scores: scores,
        relaxed_objective: -sol.report.primal_objective,
        rounded_objective: rounded,
        rounded_registration: reg,
        rounded_cut: cut,
        lambda_m: model.lambda_m,
        lambda_c: model.lambda_c,
        d: model.input.d,
        kpsvd_energy: 1.0,
        dummies: 0,
        input: model.input.clone(),
        report: sol.report,
        timings: BTreeMap::new(),
    };
    Ok((out, timings))
}

/// Runs every stage on a graph pair with node counts `n1 = n2` (or padded).
pub fn solve_pair(g1: &Graph, g2: &Graph, cfg: &PipelineConfig) -> Result<JointSolution> {
    g1.validate()?;
    g2.validate()?;
    let (g1, g2, dummies) = if g1.n == g2.n {
        (g1.clone(), g2.clone(), 0)
    } else if cfg.dummy_padding {
        let n = g1.n.max(g2.n);
        (pad_graph(g1, n), pad_graph(g2, n), n - g1.n.min(g2.n))
    } else {
        return Err(CoreError::SizeMismatch { expected: g1.n, found: g2.n });
    };
    if g1.n < 2 {
        return Err(CoreError::InvalidArgument("graphs need at least two nodes".into()));
    }
    let mut timings = BTreeMap::new();

    let clock = Instant::now();
    let w1 = intra_weights(&g1)?;
    let w2 = intra_weights(&g2)?;
    timings.insert("affinity".into(), clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let (terms, d, energy) = registration_terms(&g1, &g2, cfg)?;
    timings.insert("factorization".into(), clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let input = ModelInput { n: g1.n, d, terms, w1, w2 };
    let model = assemble_joint(&input, &cfg.model_options())?;
    timings.insert("assembly".into(), clock.elapsed().as_secs_f64());

    let (mut sol, stage) = solve_model(&model, &cfg.solver, cfg.repair)?;
    timings.extend(stage);
    sol.kpsvd_energy = energy;
    sol.dummies = dummies;
    sol.timings = timings;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagation_follows_the_matching() {
        assert_eq!(propagate_labels(&[2, 0, 1], &[1, -1, -1]), vec![-1, -1, 1]);
    }

    #[test]
    fn size_mismatch_without_padding() {
        let a = Graph::undirected(3, &[(0, 1, 1.0), (1, 2, 1.0)], None).unwrap();
        let b = Graph::undirected(2, &[(0, 1, 1.0)], None).unwrap();
        assert!(solve_pair(&a, &b, &PipelineConfig::default()).is_err());
        assert_eq!(pad_graph(&b, 3).n, 3);
    }
}
