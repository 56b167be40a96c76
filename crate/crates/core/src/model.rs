//! Assembly of the joint relaxation as a [`ConicProgram`].
//!
//! Matching: for every registration term `u` and column `j` there is a PSD
//! moment block over `(1, vec(R_u), x_j)` of order `1 + d² + n`, where `x_j`
//! is column `j` of the assignment matrix `X` (`X[l, j] = 1` pairs node `l`
//! of the first graph with node `j` of the second). Rotation moments are
//! stored once per term in the `j = 0` block and copied by equalities;
//! assignment moments are stored in the `u = 0` block of each column and
//! copied likewise.
//!
//! Clustering: one PSD block over `(1, y)` with `y = (y1; y2)` and moments `L`.
//!
//! The program minimizes `λ_m · Σ ‖R p_j − Q x_j‖² − λ_c · cut`, where
//! `cut = Σ_ij W1_ij (1 − L_ij) + Σ_ij W2_ij (1 − L_{n+i, n+j})`.

use std::collections::BTreeMap;

use jgmc_conic::{svec_index, svec_len, ConeSpec, ConicProgram, SparseMatrix};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Variable handle, resolved to a column once the cone sizes are final.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Var {
    Nonneg(usize),
    Psd(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsdBlock {
    /// Offset of the block inside the PSD part of the variable vector.
    pub start: usize,
    pub order: usize,
}

impl PsdBlock {
    /// Variable holding entry `(p, q)` and the factor `f` with `Z[p, q] = f · v`.
    pub fn entry(&self, p: usize, q: usize) -> (Var, f64) {
        let f = if p == q { 1.0 } else { INV_SQRT2 };
        (Var::Psd(self.start + svec_index(self.order, p, q)), f)
    }
}

/// Incremental builder for programs over nonnegative and PSD variables.
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    nonneg: usize,
    psd: Vec<usize>,
    psd_len: usize,
    rows: Vec<Vec<(Var, f64)>>,
    b: Vec<f64>,
    cost: BTreeMap<Var, f64>,
    offset: f64,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_nonneg(&mut self) -> Var {
        self.nonneg += 1;
        Var::Nonneg(self.nonneg - 1)
    }

    pub fn add_psd(&mut self, order: usize) -> PsdBlock {
        let block = PsdBlock { start: self.psd_len, order };
        self.psd.push(order);
        self.psd_len += svec_len(order);
        block
    }

    /// Adds `Σ coef · var = rhs`.
    pub fn add_row(&mut self, terms: Vec<(Var, f64)>, rhs: f64) {
        self.rows.push(terms);
        self.b.push(rhs);
    }

    /// Adds `γ · Z[p, q]` to the objective.
    pub fn add_moment_cost(&mut self, block: PsdBlock, p: usize, q: usize, gamma: f64) {
        let (v, f) = block.entry(p, q);
        *self.cost.entry(v).or_default() += gamma * f;
    }

    pub fn add_cost(&mut self, v: Var, gamma: f64) {
        *self.cost.entry(v).or_default() += gamma;
    }

    pub fn add_offset(&mut self, value: f64) {
        self.offset += value;
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn resolve(&self, v: Var) -> usize {
        match v {
            Var::Nonneg(i) => i,
            Var::Psd(o) => self.nonneg + o,
        }
    }

    pub fn build(&self) -> Result<ConicProgram> {
        let nv = self.nonneg + self.psd_len;
        let mut trip = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            trip.extend(row.iter().map(|&(v, a)| (r, self.resolve(v), a)));
        }
        let a = SparseMatrix::from_triplets(self.rows.len(), nv, &trip);
        let mut c = vec![0.0; nv];
        for (&v, &g) in &self.cost {
            c[self.resolve(v)] += g;
        }
        let mut p = ConicProgram::new(c, a, self.b.clone(), ConeSpec::new(0, self.nonneg, self.psd.clone()))?;
        p.offset = self.offset;
        Ok(p)
    }
}

/// Embedding data of one registration term: `P` and `Q` are `d × n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationTerm {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingMode {
    /// `X_ij ≤ ½ (1 + L_{i, n+j})` on the joint cluster moments.
    Joint,
    /// Independent `(1, z, L̄)` block with `z = ½ (1 + y)`, `L̄_ii = z_i` and
    /// `X_ij ≤ 1 − z_i − z_{n+j} + 2 L̄_{i, n+j}`.
    DecoupledLbar,
    /// `X_ij ≤ ¼ (1 + y_i + y_{n+j} + L_{i, n+j})`, the image of `X_ij ≤ z_i z_{n+j}`.
    ZProduct,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOptions {
    pub coupling: CouplingMode,
    pub lambda_m: Option<f64>,
    pub lambda_c: Option<f64>,
    /// Adds `Ξ_j 1 = x_j`.
    pub row_sum_moments: bool,
    /// Adds `Ξ_j[l, l'] = 0` for `l ≠ l'`.
    pub one_hot_moments: bool,
    /// Explicit `x ≥ 0` and `−1 ≤ y ≤ 1` through slack variables.
    pub bound_slacks: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            coupling: CouplingMode::Joint,
            lambda_m: None,
            lambda_c: None,
            row_sum_moments: true,
            one_hot_moments: false,
            bound_slacks: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchingLayout {
    pub n: usize,
    pub d: usize,
    /// Number of registration terms.
    pub terms: usize,
    /// Indexed by `u * n + j`.
    pub blocks: Vec<PsdBlock>,
    /// Slack of `X[l, j] ≥ 0`, indexed by `j * n + l`.
    pub x_slacks: Vec<Var>,
}

impl MatchingLayout {
    pub fn order(&self) -> usize {
        1 + self.d * self.d + self.n
    }

    pub fn block(&self, u: usize, j: usize) -> PsdBlock {
        self.blocks[u * self.n + j]
    }

    /// Position of `vec(R)` entry `R[a, b]` inside a block.
    pub fn r_pos(&self, a: usize, b: usize) -> usize {
        1 + b * self.d + a
    }

    /// Position of `X[l, j]` inside a block of column `j`.
    pub fn x_pos(&self, l: usize) -> usize {
        1 + self.d * self.d + l
    }

    /// Master copy of `X[l, j]`.
    pub fn x_entry(&self, l: usize, j: usize) -> (Var, f64) {
        self.block(0, j).entry(0, self.x_pos(l))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterLayout {
    /// Node counts of the graphs sharing the block.
    pub sizes: Vec<usize>,
    pub block: PsdBlock,
    /// `(y + 1, 1 − y)` slacks per stacked node.
    pub y_slacks: Vec<(Var, Var)>,
}

impl ClusterLayout {
    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn y_entry(&self, i: usize) -> (Var, f64) {
        self.block.entry(0, 1 + i)
    }

    pub fn l_entry(&self, i: usize, j: usize) -> (Var, f64) {
        self.block.entry(1 + i, 1 + j)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingLayout {
    pub mode: CouplingMode,
    /// `(1, z, L̄)` block of the decoupled form.
    pub zblock: Option<PsdBlock>,
    /// One slack per `(i, j)`, indexed by `j * n + i`.
    pub slacks: Vec<Var>,
}

fn check_terms(terms: &[RegistrationTerm], n: usize, d: usize) -> Result<usize> {
    if terms.is_empty() {
        return Err(CoreError::InvalidArgument("at least one registration term is required".into()));
    }
    for t in terms {
        if t.p.shape() != (d, n) || t.q.shape() != (d, n) {
            return Err(CoreError::SizeMismatch { expected: d * n, found: t.p.len().max(t.q.len()) });
        }
    }
    Ok(terms.len())
}

/// Matching blocks and constraints, one block per term and column.
pub fn assemble_matching(
    pb: &mut ProgramBuilder,
    terms: &[RegistrationTerm],
    n: usize,
    d: usize,
    lambda_m: f64,
    opts: &ModelOptions,
) -> Result<MatchingLayout> {
    let count = check_terms(terms, n, d)?;
    let d2 = d * d;
    let m = 1 + d2 + n;
    let blocks: Vec<PsdBlock> = (0..count * n).map(|_| pb.add_psd(m)).collect();
    let mut lay = MatchingLayout { n, d, terms: count, blocks, x_slacks: Vec::new() };

    for (u, term) in terms.iter().enumerate() {
        let qtq = term.q.transpose() * &term.q;
        for j in 0..n {
            let blk = lay.block(u, j);
            let (v, _) = blk.entry(0, 0);
            pb.add_row(vec![(v, 1.0)], 1.0);
            emit_registration_cost(pb, &lay, blk, term, &qtq, j, lambda_m);
        }
    }

    for u in 0..count {
        let master = lay.block(u, 0);
        // Orthogonality of R in moment form: R'R = I and RR' = I.
        for a in 0..d {
            for b in a..d {
                let rhs = if a == b { 1.0 } else { 0.0 };
                let cols: Vec<(Var, f64)> = (0..d)
                    .map(|c| master.entry(lay.r_pos(c, a), lay.r_pos(c, b)))
                    .collect();
                pb.add_row(cols, rhs);
                let rows: Vec<(Var, f64)> = (0..d)
                    .map(|c| master.entry(lay.r_pos(a, c), lay.r_pos(b, c)))
                    .collect();
                pb.add_row(rows, rhs);
            }
        }
        for j in 1..n {
            let blk = lay.block(u, j);
            for p in 1..=d2 {
                for q in 0..=p {
                    let (v, _) = blk.entry(p, q);
                    let (w, _) = master.entry(p, q);
                    pb.add_row(vec![(v, 1.0), (w, -1.0)], 0.0);
                }
            }
        }
    }

    for j in 0..n {
        let master = lay.block(0, j);
        for u in 1..count {
            let blk = lay.block(u, j);
            for p in 1 + d2..m {
                for q in std::iter::once(0).chain(1 + d2..=p) {
                    let (v, _) = blk.entry(p, q);
                    let (w, _) = master.entry(p, q);
                    pb.add_row(vec![(v, 1.0), (w, -1.0)], 0.0);
                }
            }
        }
        // 1'x_j = 1
        pb.add_row((0..n).map(|l| master.entry(0, lay.x_pos(l))).collect(), 1.0);
        for l in 0..n {
            let (xv, xf) = master.entry(0, lay.x_pos(l));
            // diag(Ξ_j) = x_j
            let (dv, df) = master.entry(lay.x_pos(l), lay.x_pos(l));
            pb.add_row(vec![(dv, df), (xv, -xf)], 0.0);
            if opts.row_sum_moments {
                let mut row: Vec<(Var, f64)> = (0..n).map(|l2| master.entry(lay.x_pos(l), lay.x_pos(l2))).collect();
                row.push((xv, -xf));
                pb.add_row(row, 0.0);
            }
            if opts.one_hot_moments {
                for l2 in l + 1..n {
                    let (v, f) = master.entry(lay.x_pos(l), lay.x_pos(l2));
                    pb.add_row(vec![(v, f)], 0.0);
                }
            }
        }
    }
    // Σ_j X[l, j] = 1
    for l in 0..n {
        pb.add_row((0..n).map(|j| lay.x_entry(l, j)).collect(), 1.0);
    }
    if opts.bound_slacks {
        for j in 0..n {
            for l in 0..n {
                let u = pb.add_nonneg();
                let (xv, xf) = lay.x_entry(l, j);
                pb.add_row(vec![(xv, xf), (u, -1.0)], 0.0);
                lay.x_slacks.push(u);
            }
        }
    }
    Ok(lay)
}

/// Objective of `‖R p_j − Q x_j‖²` expanded in the moments of one block.
fn emit_registration_cost(
    pb: &mut ProgramBuilder,
    lay: &MatchingLayout,
    blk: PsdBlock,
    term: &RegistrationTerm,
    qtq: &DMatrix<f64>,
    j: usize,
    lambda_m: f64,
) {
    let (d, n) = (lay.d, lay.n);
    let pj = term.p.column(j);
    for a in 0..d {
        for b in 0..d {
            for b2 in 0..d {
                let g = lambda_m * pj[b] * pj[b2];
                if g != 0.0 {
                    pb.add_moment_cost(blk, lay.r_pos(a, b), lay.r_pos(a, b2), g);
                }
            }
            for l in 0..n {
                let g = -2.0 * lambda_m * pj[b] * term.q[(a, l)];
                if g != 0.0 {
                    pb.add_moment_cost(blk, lay.r_pos(a, b), lay.x_pos(l), g);
                }
            }
        }
    }
    for l in 0..n {
        for l2 in 0..n {
            let g = lambda_m * qtq[(l, l2)];
            if g != 0.0 {
                pb.add_moment_cost(blk, lay.x_pos(l), lay.x_pos(l2), g);
            }
        }
    }
}

/// One clustering block shared by all graphs in `ws`; minimizes `λ_c Σ_g Σ W_g ∘ L_g`
/// with offset `−λ_c Σ_g Σ W_g`, i.e. `−λ_c · cut`.
pub fn assemble_clustering(
    pb: &mut ProgramBuilder,
    ws: &[&DMatrix<f64>],
    lambda_c: f64,
    opts: &ModelOptions,
) -> Result<ClusterLayout> {
    for w in ws {
        if !w.is_square() {
            return Err(CoreError::InvalidArgument("affinity must be square".into()));
        }
        if (*w - w.transpose()).amax() > 1e-12 * (1.0 + w.amax()) {
            return Err(CoreError::InvalidArgument("intra-graph affinity must be symmetric".into()));
        }
    }
    let sizes: Vec<usize> = ws.iter().map(|w| w.nrows()).collect();
    let total: usize = sizes.iter().sum();
    let block = pb.add_psd(1 + total);
    let mut lay = ClusterLayout { sizes, block, y_slacks: Vec::new() };
    pb.add_row(vec![(block.entry(0, 0).0, 1.0)], 1.0);
    for i in 0..total {
        pb.add_row(vec![(lay.l_entry(i, i).0, 1.0)], 1.0);
    }
    let mut base = 0;
    for w in ws {
        let n = w.nrows();
        for i in 0..n {
            for j in 0..n {
                if w[(i, j)] != 0.0 {
                    pb.add_moment_cost(block, 1 + base + i, 1 + base + j, lambda_c * w[(i, j)]);
                }
            }
        }
        pb.add_offset(-lambda_c * w.sum());
        base += n;
    }
    if opts.bound_slacks {
        for i in 0..total {
            let (yv, yf) = lay.y_entry(i);
            let lo = pb.add_nonneg();
            let hi = pb.add_nonneg();
            pb.add_row(vec![(yv, yf), (lo, -1.0)], -1.0);
            pb.add_row(vec![(yv, yf), (hi, 1.0)], 1.0);
            lay.y_slacks.push((lo, hi));
        }
    }
    Ok(lay)
}

/// Links matches to cluster moments so that matched nodes share a cluster.
pub fn assemble_coupling(
    pb: &mut ProgramBuilder,
    m: &MatchingLayout,
    c: &ClusterLayout,
    mode: CouplingMode,
) -> Result<CouplingLayout> {
    let n = m.n;
    if c.sizes != [n, n] {
        return Err(CoreError::InvalidArgument("coupling needs a two-graph cluster block of matching size".into()));
    }
    let mut lay = CouplingLayout { mode, zblock: None, slacks: Vec::new() };
    if mode == CouplingMode::DecoupledLbar {
        let zb = pb.add_psd(1 + 2 * n);
        pb.add_row(vec![(zb.entry(0, 0).0, 1.0)], 1.0);
        for i in 0..2 * n {
            let (zv, zf) = zb.entry(0, 1 + i);
            let (yv, yf) = c.y_entry(i);
            pb.add_row(vec![(zv, zf), (yv, -0.5 * yf)], 0.5);
            let (lv, lf) = zb.entry(1 + i, 1 + i);
            pb.add_row(vec![(lv, lf), (zv, -zf)], 0.0);
        }
        lay.zblock = Some(zb);
    }
    if mode == CouplingMode::None {
        return Ok(lay);
    }
    for j in 0..n {
        for i in 0..n {
            let t = pb.add_nonneg();
            let (xv, xf) = m.x_entry(i, j);
            match mode {
                CouplingMode::Joint => {
                    let (lv, lf) = c.l_entry(i, n + j);
                    pb.add_row(vec![(xv, xf), (lv, -0.5 * lf), (t, 1.0)], 0.5);
                }
                CouplingMode::ZProduct => {
                    let (lv, lf) = c.l_entry(i, n + j);
                    let (ai, af) = c.y_entry(i);
                    let (bj, bf) = c.y_entry(n + j);
                    pb.add_row(vec![(xv, xf), (lv, -0.25 * lf), (ai, -0.25 * af), (bj, -0.25 * bf), (t, 1.0)], 0.25);
                }
                CouplingMode::DecoupledLbar => {
                    let zb = lay.zblock.expect("created above");
                    let (zi, fi) = zb.entry(0, 1 + i);
                    let (zj, fj) = zb.entry(0, 1 + n + j);
                    let (lv, lf) = zb.entry(1 + i, 1 + n + j);
                    pb.add_row(vec![(xv, xf), (zi, fi), (zj, fj), (lv, -2.0 * lf), (t, 1.0)], 1.0);
                }
                CouplingMode::None => unreachable!(),
            }
            lay.slacks.push(t);
        }
    }
    Ok(lay)
}

/// Everything the joint program needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInput {
    pub n: usize,
    pub d: usize,
    /// Registration terms; each gets its own rotation.
    pub terms: Vec<RegistrationTerm>,
    pub w1: DMatrix<f64>,
    pub w2: DMatrix<f64>,
}

/// `λ_m = 1 / Σ (‖P‖² + ‖Q‖²)` over all terms.
pub fn default_lambda_m(terms: &[RegistrationTerm]) -> f64 {
    let s: f64 = terms.iter().map(|t| t.p.norm_squared() + t.q.norm_squared()).sum();
    if s > 0.0 {
        1.0 / s
    } else {
        1.0
    }
}

/// `λ_c = 1 / (Σ|W1| + Σ|W2|)`.
pub fn default_lambda_c(w1: &DMatrix<f64>, w2: &DMatrix<f64>) -> f64 {
    let s = w1.abs().sum() + w2.abs().sum();
    if s > 0.0 {
        1.0 / s
    } else {
        1.0
    }
}

/// Named entities of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Entity {
    /// `R_u[a, b]` (first moment).
    Rotation { u: usize, a: usize, b: usize },
    /// Second moment of `vec(R_u)` at `(p, q)`.
    RotationMoment { u: usize, p: usize, q: usize },
    /// `X[l, j]`.
    Match { l: usize, j: usize },
    /// `Ξ_j[l, l2]`.
    MatchMoment { j: usize, l: usize, l2: usize },
    /// Cross moment `vec(R_u)[r] · X[l, j]`.
    Cross { u: usize, j: usize, r: usize, l: usize },
    /// `y` stacked over both graphs.
    Cluster { i: usize },
    /// `L[i, j]`.
    ClusterMoment { i: usize, j: usize },
    /// `z_i = ½ (1 + y_i)`.
    Z { i: usize },
    /// `L̄[i, j]`.
    LBar { i: usize, j: usize },
}

/// Affine function of the variable vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointModel {
    pub program: ConicProgram,
    pub input: ModelInput,
    pub options: ModelOptions,
    pub lambda_m: f64,
    pub lambda_c: f64,
    pub matching: Option<MatchingLayout>,
    pub cluster: Option<ClusterLayout>,
    pub coupling: Option<CouplingLayout>,
    nonneg: usize,
}

/// Assembles matching, clustering and coupling into one program.
pub fn assemble_joint(input: &ModelInput, opts: &ModelOptions) -> Result<JointModel> {
    let n = input.n;
    check_terms(&input.terms, n, input.d)?;
    if input.w1.shape() != (n, n) || input.w2.shape() != (n, n) {
        return Err(CoreError::SizeMismatch { expected: n, found: input.w1.nrows().max(input.w2.nrows()) });
    }
    let lambda_m = opts.lambda_m.unwrap_or_else(|| default_lambda_m(&input.terms));
    let lambda_c = opts.lambda_c.unwrap_or_else(|| default_lambda_c(&input.w1, &input.w2));
    if !(lambda_m >= 0.0 && lambda_c >= 0.0 && lambda_m.is_finite() && lambda_c.is_finite()) {
        return Err(CoreError::InvalidArgument("objective weights must be finite and nonnegative".into()));
    }
    let mut pb = ProgramBuilder::new();
    let matching = assemble_matching(&mut pb, &input.terms, n, input.d, lambda_m, opts)?;
    let cluster = assemble_clustering(&mut pb, &[&input.w1, &input.w2], lambda_c, opts)?;
    let coupling = assemble_coupling(&mut pb, &matching, &cluster, opts.coupling)?;
    let program = pb.build()?;
    Ok(JointModel {
        program,
        input: input.clone(),
        options: opts.clone(),
        lambda_m,
        lambda_c,
        matching: Some(matching),
        cluster: Some(cluster),
        coupling: Some(coupling),
        nonneg: pb.nonneg,
    })
}

/// MAX CUT relaxation of a single graph: minimizes `λ_c (Σ W∘L − Σ W)`.
pub fn assemble_maxcut(w: &DMatrix<f64>, lambda_c: f64) -> Result<JointModel> {
    let n = w.nrows();
    let opts = ModelOptions { coupling: CouplingMode::None, lambda_c: Some(lambda_c), ..ModelOptions::default() };
    let mut pb = ProgramBuilder::new();
    let cluster = assemble_clustering(&mut pb, &[w], lambda_c, &opts)?;
    let program = pb.build()?;
    let input = ModelInput { n, d: 0, terms: Vec::new(), w1: w.clone(), w2: DMatrix::zeros(0, 0) };
    Ok(JointModel {
        program,
        input,
        options: opts,
        lambda_m: 0.0,
        lambda_c,
        matching: None,
        cluster: Some(cluster),
        coupling: None,
        nonneg: pb.nonneg,
    })
}

impl JointModel {
    pub fn n(&self) -> usize {
        self.input.n
    }

    pub fn col(&self, v: Var) -> usize {
        match v {
            Var::Nonneg(i) => i,
            Var::Psd(o) => self.nonneg + o,
        }
    }

    fn read(&self, x: &[f64], e: (Var, f64)) -> f64 {
        x[self.col(e.0)] * e.1
    }

    fn write(&self, x: &mut [f64], e: (Var, f64), value: f64) {
        x[self.col(e.0)] = value / e.1;
    }

    pub fn matching_block_count(&self) -> usize {
        self.matching.as_ref().map_or(0, |m| m.blocks.len())
    }

    /// Relaxed assignment matrix.
    pub fn relaxed_x(&self, x: &[f64]) -> DMatrix<f64> {
        let m = self.matching.as_ref().expect("model has no matching part");
        DMatrix::from_fn(m.n, m.n, |l, j| self.read(x, m.x_entry(l, j)))
    }

    /// Relaxed stacked cluster vector.
    pub fn relaxed_y(&self, x: &[f64]) -> Vec<f64> {
        let c = self.cluster.as_ref().expect("model has no clustering part");
        (0..c.dim()).map(|i| self.read(x, c.y_entry(i))).collect()
    }

    /// Cluster moment matrix `L`.
    pub fn moment_l(&self, x: &[f64]) -> DMatrix<f64> {
        let c = self.cluster.as_ref().expect("model has no clustering part");
        DMatrix::from_fn(c.dim(), c.dim(), |i, j| self.read(x, c.l_entry(i, j)))
    }

    /// First moments of `R_u`.
    pub fn relaxed_rotation(&self, x: &[f64], u: usize) -> DMatrix<f64> {
        let m = self.matching.as_ref().expect("model has no matching part");
        let blk = m.block(u, 0);
        DMatrix::from_fn(m.d, m.d, |a, b| self.read(x, blk.entry(0, m.r_pos(a, b))))
    }

    /// Registration part `Σ ‖R p_j − Q x_j‖²` of a moment vector (unweighted).
    pub fn registration_value(&self, x: &[f64]) -> f64 {
        if self.lambda_m == 0.0 {
            return f64::NAN;
        }
        let mut pb = ProgramBuilder::new();
        // Re-emit the cost with unit weight on a scratch builder of identical layout.
        let m = self.matching.as_ref().expect("model has no matching part");
        for _ in 0..m.blocks.len() {
            pb.add_psd(m.order());
        }
        for (u, term) in self.input.terms.iter().enumerate() {
            let qtq = term.q.transpose() * &term.q;
            for j in 0..m.n {
                emit_registration_cost(&mut pb, m, m.block(u, j), term, &qtq, j, 1.0);
            }
        }
        pb.cost.iter().map(|(&v, &g)| g * x[self.col(v)]).sum()
    }

    /// Cut value `Σ W1 ∘ (1 − L1) + Σ W2 ∘ (1 − L2)` of a moment vector.
    pub fn cut_value(&self, x: &[f64]) -> f64 {
        let l = self.moment_l(x);
        let mut total = 0.0;
        let mut base = 0;
        for w in [&self.input.w1, &self.input.w2] {
            let n = w.nrows();
            for i in 0..n {
                for j in 0..n {
                    total += w[(i, j)] * (1.0 - l[(base + i, base + j)]);
                }
            }
            base += n;
        }
        total
    }

    /// Affine expression of every named entity.
    pub fn ledger(&self) -> BTreeMap<Entity, Affine> {
        let mut out = BTreeMap::new();
        let single = |model: &Self, e: (Var, f64)| Affine { terms: vec![(model.col(e.0), e.1)], constant: 0.0 };
        if let Some(m) = &self.matching {
            let (d, n, d2) = (m.d, m.n, m.d * m.d);
            for u in 0..m.terms {
                let master = m.block(u, 0);
                for a in 0..d {
                    for b in 0..d {
                        out.insert(Entity::Rotation { u, a, b }, single(self, master.entry(0, m.r_pos(a, b))));
                    }
                }
                for p in 0..d2 {
                    for q in 0..d2 {
                        out.insert(Entity::RotationMoment { u, p, q }, single(self, master.entry(1 + p, 1 + q)));
                    }
                }
                for j in 0..n {
                    let blk = m.block(u, j);
                    for r in 0..d2 {
                        for l in 0..n {
                            out.insert(Entity::Cross { u, j, r, l }, single(self, blk.entry(1 + r, m.x_pos(l))));
                        }
                    }
                }
            }
            for j in 0..n {
                let master = m.block(0, j);
                for l in 0..n {
                    out.insert(Entity::Match { l, j }, single(self, m.x_entry(l, j)));
                    for l2 in 0..n {
                        out.insert(Entity::MatchMoment { j, l, l2 }, single(self, master.entry(m.x_pos(l), m.x_pos(l2))));
                    }
                }
            }
        }
        if let Some(c) = &self.cluster {
            let dim = c.dim();
            let zb = self.coupling.as_ref().and_then(|cp| cp.zblock);
            for i in 0..dim {
                let (yv, yf) = c.y_entry(i);
                out.insert(Entity::Cluster { i }, single(self, (yv, yf)));
                let z = match zb {
                    Some(b) => single(self, b.entry(0, 1 + i)),
                    None => Affine { terms: vec![(self.col(yv), 0.5 * yf)], constant: 0.5 },
                };
                out.insert(Entity::Z { i }, z);
                for j in 0..dim {
                    out.insert(Entity::ClusterMoment { i, j }, single(self, c.l_entry(i, j)));
                    let lbar = match zb {
                        Some(b) => single(self, b.entry(1 + i, 1 + j)),
                        None => {
                            // L̄ = ¼ (11' + 1y' + y1' + L)
                            let (lv, lf) = c.l_entry(i, j);
                            let (ajv, ajf) = c.y_entry(j);
                            let mut terms = vec![(self.col(lv), 0.25 * lf), (self.col(yv), 0.25 * yf)];
                            terms.push((self.col(ajv), 0.25 * ajf));
                            Affine { terms, constant: 0.25 }
                        }
                    };
                    out.insert(Entity::LBar { i, j }, lbar);
                }
            }
        }
        out
    }

    /// Lifts an integral point: moments are outer products, slacks are exact.
    ///
    /// `perm[l] = j` pairs node `l` of the first graph with node `j` of the
    /// second; `rotations` holds one matrix per registration term.
    pub fn lift(&self, perm: &[usize], y: &[f64], rotations: &[DMatrix<f64>]) -> Vec<f64> {
        let mut x = vec![0.0; self.program.num_vars()];
        let xmat = crate::graph::permutation_matrix(perm);
        if let Some(m) = &self.matching {
            let (d, n, d2) = (m.d, m.n, m.d * m.d);
            for (u, r) in rotations.iter().enumerate().take(m.terms) {
                for j in 0..n {
                    let mut v = vec![1.0];
                    v.extend((0..d2).map(|idx| r[(idx % d, idx / d)]));
                    v.extend((0..n).map(|l| xmat[(l, j)]));
                    let blk = m.block(u, j);
                    for p in 0..v.len() {
                        for q in 0..=p {
                            self.write(&mut x, blk.entry(p, q), v[p] * v[q]);
                        }
                    }
                }
            }
            if !m.x_slacks.is_empty() {
                for j in 0..n {
                    for l in 0..n {
                        x[self.col(m.x_slacks[j * n + l])] = xmat[(l, j)];
                    }
                }
            }
        }
        if let Some(c) = &self.cluster {
            let dim = c.dim();
            let mut v = vec![1.0];
            v.extend_from_slice(&y[..dim]);
            for p in 0..v.len() {
                for q in 0..=p {
                    self.write(&mut x, c.block.entry(p, q), v[p] * v[q]);
                }
            }
            for (i, &(lo, hi)) in c.y_slacks.iter().enumerate() {
                x[self.col(lo)] = y[i] + 1.0;
                x[self.col(hi)] = 1.0 - y[i];
            }
            if let (Some(cp), Some(m)) = (&self.coupling, &self.matching) {
                let n = m.n;
                let z: Vec<f64> = y.iter().map(|v| 0.5 * (1.0 + v)).collect();
                if let Some(zb) = cp.zblock {
                    let mut v = vec![1.0];
                    v.extend_from_slice(&z);
                    for p in 0..v.len() {
                        for q in 0..=p {
                            self.write(&mut x, zb.entry(p, q), v[p] * v[q]);
                        }
                    }
                }
                for j in 0..n {
                    for i in 0..if cp.slacks.is_empty() { 0 } else { n } {
                        let xij = xmat[(i, j)];
                        let (yi, yj) = (y[i], y[n + j]);
                        let slack = match cp.mode {
                            CouplingMode::Joint => 0.5 * (1.0 + yi * yj) - xij,
                            CouplingMode::ZProduct => 0.25 * (1.0 + yi + yj + yi * yj) - xij,
                            CouplingMode::DecoupledLbar => 1.0 - z[i] - z[n + j] + 2.0 * z[i] * z[n + j] - xij,
                            CouplingMode::None => continue,
                        };
                        x[self.col(cp.slacks[j * n + i])] = slack;
                    }
                }
            }
        }
        x
    }
}
