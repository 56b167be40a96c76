//! Operator splitting for `min c'x  s.t.  Ax = b, x in K`.
//!
//! The cone membership is written as extra rows `-x_K + s_K = 0` with
//! `s_K in K`, so the stacked system reads `[A; -I_K] x + s = [b; 0]` with
//! `s in {0} x K`. Each iteration solves one quasi-definite system, reduced to
//! the SPD matrix `sigma I + A' diag(rho) A`, followed by a cone projection.

use std::time::Instant;

use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::Solve;
use faer::{MatMut, Side};

use crate::cone::ConeSpec;
use crate::kkt::{verify_kkt, DualVector};
use crate::problem::ConicProgram;
use crate::settings::SolverSettings;
use crate::sparse::SparseMatrix;
use crate::{ConicError, ConicSolver, IterationRecord, Solution, SolveReport, SolveStatus};

const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, Default)]
pub struct AdmmSolver;

impl ConicSolver for AdmmSolver {
    fn solve(&self, problem: &ConicProgram, settings: &SolverSettings) -> Result<Solution, ConicError> {
        problem.validate()?;
        settings.validate()?;
        Workspace::new(problem, settings)?.run()
    }
}

/// Ruiz-equilibrated copy of the problem data.
struct Scaling {
    a: SparseMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
    e_eq: Vec<f64>,
    /// Row scale of the cone rows, one per cone variable.
    e_cone: Vec<f64>,
    c_scale: f64,
}

impl Scaling {
    fn new(p: &ConicProgram, iters: usize) -> Self {
        let nv = p.num_vars();
        let m = p.num_constraints();
        let free = p.cones.free;
        let nc = nv - free;
        let mut a = p.a.clone();
        let mut d = vec![1.0; nv];
        let mut e_eq = vec![1.0; m];
        let mut e_cone = vec![1.0; nc];
        let blocks: Vec<(usize, usize)> = p
            .cones
            .psd_blocks()
            .into_iter()
            .map(|(off, n)| (off - free, crate::cone::svec_len(n)))
            .collect();

        for _ in 0..iters {
            let mut col = a.col_norms();
            for t in 0..nc {
                col[free + t] = col[free + t].max(e_cone[t] * d[free + t]);
            }
            let row = a.row_norms();
            let mut delta: Vec<f64> = col.iter().map(|&v| inv_sqrt(v)).collect();
            let mut eps_eq: Vec<f64> = row.iter().map(|&v| inv_sqrt(v)).collect();
            let mut eps_cone: Vec<f64> = (0..nc).map(|t| inv_sqrt(e_cone[t] * d[free + t])).collect();
            // A PSD block must be scaled uniformly to stay a PSD block.
            for &(start, len) in &blocks {
                let mean = eps_cone[start..start + len].iter().sum::<f64>() / len as f64;
                eps_cone[start..start + len].iter_mut().for_each(|v| *v = mean);
            }
            clamp_update(&mut delta, &d);
            clamp_update(&mut eps_eq, &e_eq);
            clamp_update(&mut eps_cone, &e_cone);
            a.scale(&eps_eq, &delta);
            mul_assign(&mut d, &delta);
            mul_assign(&mut e_eq, &eps_eq);
            mul_assign(&mut e_cone, &eps_cone);
        }

        let b: Vec<f64> = p.b.iter().zip(&e_eq).map(|(b, e)| b * e).collect();
        let dc: Vec<f64> = p.c.iter().zip(&d).map(|(c, d)| c * d).collect();
        let cn = inf_norm(&dc);
        let c_scale = if cn > 1e-12 && iters > 0 { (1.0 / cn).clamp(SCALE_MIN, SCALE_MAX) } else { 1.0 };
        let c = dc.iter().map(|v| v * c_scale).collect();
        Self { a, b, c, d, e_eq, e_cone, c_scale }
    }
}

fn inv_sqrt(v: f64) -> f64 {
    if v > 1e-12 {
        1.0 / v.sqrt()
    } else {
        1.0
    }
}

/// Restricts `step` so that the cumulative scale `total * step` stays bounded.
fn clamp_update(step: &mut [f64], total: &[f64]) {
    for (s, t) in step.iter_mut().zip(total) {
        *s = (t * *s).clamp(SCALE_MIN, SCALE_MAX) / t;
    }
}

fn mul_assign(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x *= y);
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cholesky factor of `sigma I + rho_eq A'A + rho_c G^2`.
struct LinearSystem {
    n: usize,
    /// Upper triangle of `A'A`, duplicates merged.
    gram: Vec<(usize, usize, f64)>,
    /// `g^2` per variable (zero on free variables).
    diag: Vec<f64>,
    symbolic: SymbolicLlt<usize>,
    factor: Llt<usize, f64>,
}

impl LinearSystem {
    fn new(a: &SparseMatrix, g: &[f64], free: usize, sigma: f64, rho_eq: f64, rho_c: f64) -> Result<Self, ConicError> {
        let n = a.ncols();
        let mut pairs = Vec::new();
        for r in 0..a.nrows() {
            let (cols, vals) = a.row(r);
            for (p, (&ci, &vi)) in cols.iter().zip(vals).enumerate() {
                for (&cj, &vj) in cols[p..].iter().zip(&vals[p..]) {
                    pairs.push((ci.min(cj), ci.max(cj), vi * vj));
                }
            }
        }
        let gram = SparseMatrix::from_triplets(n, n, &pairs).triplets();
        let mut diag = vec![0.0; n];
        for (t, gt) in g.iter().enumerate() {
            diag[free + t] = gt * gt;
        }
        let mat = Self::assemble(n, &gram, &diag, sigma, rho_eq, rho_c)?;
        let symbolic = SymbolicLlt::try_new(mat.symbolic(), Side::Upper)
            .map_err(|e| ConicError::Factorization(format!("{e:?}")))?;
        let factor = Llt::try_new_with_symbolic(symbolic.clone(), mat.as_ref(), Side::Upper)
            .map_err(|e| ConicError::Factorization(format!("{e:?}")))?;
        Ok(Self { n, gram, diag, symbolic, factor })
    }

    fn assemble(
        n: usize,
        gram: &[(usize, usize, f64)],
        diag: &[f64],
        sigma: f64,
        rho_eq: f64,
        rho_c: f64,
    ) -> Result<SparseColMat<usize, f64>, ConicError> {
        let mut trip: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(gram.len() + n);
        trip.extend(gram.iter().map(|&(r, c, v)| Triplet::new(r, c, rho_eq * v)));
        trip.extend((0..n).map(|j| Triplet::new(j, j, sigma + rho_c * diag[j])));
        SparseColMat::try_new_from_triplets(n, n, &trip).map_err(|e| ConicError::Factorization(format!("{e:?}")))
    }

    fn refactor(&mut self, sigma: f64, rho_eq: f64, rho_c: f64) -> Result<(), ConicError> {
        let mat = Self::assemble(self.n, &self.gram, &self.diag, sigma, rho_eq, rho_c)?;
        self.factor = Llt::try_new_with_symbolic(self.symbolic.clone(), mat.as_ref(), Side::Upper)
            .map_err(|e| ConicError::Factorization(format!("{e:?}")))?;
        Ok(())
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        self.factor.solve_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
    }
}

struct Workspace<'a> {
    p: &'a ConicProgram,
    set: &'a SolverSettings,
    sc: Scaling,
    /// Cone part of the problem, shifted to start at index 0.
    cone: ConeSpec,
    free: usize,
    /// `g_t = e_cone_t * d_{free+t}`: coefficient of cone row `t` in scaled space.
    g: Vec<f64>,
    rho: f64,
    sys: LinearSystem,
    setup_seconds: f64,
    start: Instant,
    factorizations: usize,
}

/// Iterates in scaled space.
#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    s: Vec<f64>,
    y_eq: Vec<f64>,
    y_c: Vec<f64>,
}

impl Iterate {
    fn is_finite(&self) -> bool {
        [&self.x, &self.s, &self.y_eq, &self.y_c].iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

enum Certificate {
    Primal(DualVector),
    Dual(Vec<f64>),
}

impl<'a> Workspace<'a> {
    fn new(p: &'a ConicProgram, set: &'a SolverSettings) -> Result<Self, ConicError> {
        let start = Instant::now();
        let sc = Scaling::new(p, set.equilibration_iters);
        let free = p.cones.free;
        let g: Vec<f64> = sc.e_cone.iter().enumerate().map(|(t, e)| e * sc.d[free + t]).collect();
        let rho = set.rho;
        let sys = LinearSystem::new(&sc.a, &g, free, set.sigma, rho * set.rho_eq_scale, rho)?;
        let cone = ConeSpec::new(0, p.cones.nonneg, p.cones.psd.clone());
        Ok(Self {
            p,
            set,
            sc,
            cone,
            free,
            g,
            rho,
            sys,
            setup_seconds: start.elapsed().as_secs_f64(),
            start,
            factorizations: 1,
        })
    }

    fn rho_eq(&self) -> f64 {
        self.rho * self.set.rho_eq_scale
    }

    fn step(&self, it: &mut Iterate, rhs: &mut [f64], tmp_eq: &mut [f64]) {
        let (free, sigma, alpha, rho_c, rho_eq) = (self.free, self.set.sigma, self.set.alpha, self.rho, self.rho_eq());
        for (tq, (b, y)) in tmp_eq.iter_mut().zip(self.sc.b.iter().zip(&it.y_eq)) {
            *tq = rho_eq * b + y;
        }
        self.sc.a.mul_transpose_vec(tmp_eq, rhs);
        for (j, r) in rhs.iter_mut().enumerate() {
            *r += sigma * it.x[j] - self.sc.c[j];
        }
        for t in 0..self.g.len() {
            rhs[free + t] += self.g[t] * (rho_c * it.s[t] - it.y_c[t]);
        }
        self.sys.solve(rhs);
        let xt = rhs;

        // Equality rows: the slack is pinned to zero.
        self.sc.a.mul_vec(xt, tmp_eq);
        for (i, y) in it.y_eq.iter_mut().enumerate() {
            *y += rho_eq * alpha * (self.sc.b[i] - tmp_eq[i]);
        }
        // Cone rows.
        let mut v: Vec<f64> = (0..self.g.len())
            .map(|t| alpha * self.g[t] * xt[free + t] + (1.0 - alpha) * it.s[t] + it.y_c[t] / rho_c)
            .collect();
        let relaxed: Vec<f64> = v.iter().zip(&it.y_c).map(|(v, y)| v - y / rho_c).collect();
        self.cone.project(&mut v);
        for t in 0..self.g.len() {
            it.y_c[t] += rho_c * (relaxed[t] - v[t]);
        }
        it.s = v;
        for (x, &xn) in it.x.iter_mut().zip(xt.iter()) {
            *x = alpha * xn + (1.0 - alpha) * *x;
        }
    }

    /// Unscaled primal point (cone part taken from the projected slack) and duals.
    fn unscale(&self, it: &Iterate) -> (Vec<f64>, DualVector) {
        let nv = self.p.num_vars();
        let mut x = vec![0.0; nv];
        for j in 0..self.free {
            x[j] = self.sc.d[j] * it.x[j];
        }
        for t in 0..self.g.len() {
            x[self.free + t] = it.s[t] / self.sc.e_cone[t];
        }
        let eq = it.y_eq.iter().zip(&self.sc.e_eq).map(|(y, e)| y * e / self.sc.c_scale).collect();
        let mut cone = vec![0.0; nv];
        for t in 0..self.g.len() {
            cone[self.free + t] = -self.sc.e_cone[t] * it.y_c[t] / self.sc.c_scale;
        }
        (x, DualVector { eq, cone })
    }

    /// Residuals on the original data; cone memberships hold by construction.
    fn residuals(&self, x: &[f64], dual: &DualVector) -> (f64, f64, f64) {
        let p = self.p;
        let mut ax = vec![0.0; p.num_constraints()];
        p.a.mul_vec(x, &mut ax);
        let eq = ax.iter().zip(&p.b).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let primal = eq / (1.0 + inf_norm(&p.b));
        let mut aty = vec![0.0; p.num_vars()];
        p.a.mul_transpose_vec(&dual.eq, &mut aty);
        let stat = (0..p.num_vars()).fold(0.0_f64, |m, j| m.max((p.c[j] - aty[j] - dual.cone[j]).abs()));
        let dres = stat / (1.0 + inf_norm(&p.c));
        let pobj = dot(&p.c, x);
        let dobj = dot(&p.b, &dual.eq);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        (primal, dres, gap)
    }

    /// Scaled residual ratio used to balance the penalty.
    fn rho_ratio(&self, it: &Iterate) -> f64 {
        let free = self.free;
        let mut ax = vec![0.0; self.sc.b.len()];
        self.sc.a.mul_vec(&it.x, &mut ax);
        let mut rp = ax.iter().zip(&self.sc.b).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let mut np = inf_norm(&ax).max(inf_norm(&self.sc.b)).max(inf_norm(&it.s));
        for t in 0..self.g.len() {
            let gx = self.g[t] * it.x[free + t];
            rp = rp.max((it.s[t] - gx).abs());
            np = np.max(gx.abs());
        }
        let mut aty = vec![0.0; it.x.len()];
        self.sc.a.mul_transpose_vec(&it.y_eq, &mut aty);
        let mut nd = inf_norm(&aty).max(inf_norm(&self.sc.c));
        for t in 0..self.g.len() {
            let gy = self.g[t] * it.y_c[t];
            aty[free + t] -= gy;
            nd = nd.max(gy.abs());
        }
        let rd = (0..it.x.len()).fold(0.0_f64, |m, j| m.max((self.sc.c[j] - aty[j]).abs()));
        let rp = rp / np.max(1e-10);
        let rd = rd / nd.max(1e-10);
        (rp / rd.max(1e-12)).sqrt()
    }

    fn certificate(&self, prev: &Iterate, it: &Iterate) -> Option<Certificate> {
        let p = self.p;
        let eps = self.set.eps_infeasible;
        let free = self.free;

        // Primal: ybar = -(change in y), unscaled, with A'ybar = 0 and b'ybar < 0.
        let yeq: Vec<f64> = (0..it.y_eq.len()).map(|i| -(it.y_eq[i] - prev.y_eq[i]) * self.sc.e_eq[i]).collect();
        let mut yc = vec![0.0; p.num_vars()];
        for t in 0..self.g.len() {
            yc[free + t] = -(it.y_c[t] - prev.y_c[t]) * self.sc.e_cone[t];
        }
        let ny = inf_norm(&yeq).max(inf_norm(&yc));
        if ny > 1e-12 {
            let mut aty = vec![0.0; p.num_vars()];
            p.a.mul_transpose_vec(&yeq, &mut aty);
            let res = (0..aty.len()).fold(0.0_f64, |m, j| m.max((aty[j] - yc[j]).abs()));
            if res <= eps * ny && dot(&p.b, &yeq) < -eps * ny && p.cones.dual_distance(&yc) <= eps * ny {
                let eq = yeq.iter().map(|v| v / ny).collect();
                let cone = yc.iter().map(|v| v / ny).collect();
                return Some(Certificate::Primal(DualVector { eq, cone }));
            }
        }

        // Dual: direction dx with A dx = 0, dx in K, c'dx < 0.
        let dx: Vec<f64> = (0..it.x.len()).map(|j| (it.x[j] - prev.x[j]) * self.sc.d[j]).collect();
        let nx = inf_norm(&dx);
        if nx > 1e-12 && dot(&p.c, &dx) < -eps * nx {
            let mut adx = vec![0.0; p.num_constraints()];
            p.a.mul_vec(&dx, &mut adx);
            if inf_norm(&adx) <= eps * nx && p.cones.distance(&dx) <= eps * nx {
                return Some(Certificate::Dual(dx.iter().map(|v| v / nx).collect()));
            }
        }
        None
    }

    fn run(mut self) -> Result<Solution, ConicError> {
        let nv = self.p.num_vars();
        let m = self.p.num_constraints();
        let nc = self.g.len();
        let mut it = Iterate { x: vec![0.0; nv], s: vec![0.0; nc], y_eq: vec![0.0; m], y_c: vec![0.0; nc] };
        let mut rhs = vec![0.0; nv];
        let mut tmp_eq = vec![0.0; m];
        let mut log = Vec::new();
        let mut status = SolveStatus::MaxIterations;
        let mut last_adapt = 0;
        let mut iterations = 0;
        let mut certificate = None;
        let check = self.set.check_interval;

        for k in 1..=self.set.max_iters {
            let prev = (k % check == 0).then(|| it.clone());
            self.step(&mut it, &mut rhs, &mut tmp_eq);
            iterations = k;
            let Some(prev) = prev else { continue };

            if !it.is_finite() {
                status = SolveStatus::NumericalFailure;
                break;
            }
            let (x, dual) = self.unscale(&it);
            let (rp, rd, gap) = self.residuals(&x, &dual);
            if self.set.record_log {
                log.push(IterationRecord { iter: k, primal: rp, dual: rd, gap });
            }
            if rp <= self.set.eps_primal && rd <= self.set.eps_dual && gap <= self.set.eps_gap {
                status = SolveStatus::Optimal;
                break;
            }
            if let Some(c) = self.certificate(&prev, &it) {
                status = match c {
                    Certificate::Primal(_) => SolveStatus::PrimalInfeasible,
                    Certificate::Dual(_) => SolveStatus::DualInfeasible,
                };
                certificate = Some(c);
                break;
            }
            if let Some(limit) = self.set.time_limit {
                if self.start.elapsed().as_secs_f64() > limit {
                    status = SolveStatus::TimeLimit;
                    break;
                }
            }
            if self.set.adaptive_rho && k - last_adapt >= self.set.adapt_interval {
                let ratio = self.rho_ratio(&it);
                if ratio.is_finite() && !(0.2..=5.0).contains(&ratio) {
                    let new_rho = (self.rho * ratio).clamp(RHO_MIN, RHO_MAX);
                    if new_rho != self.rho {
                        let old = self.rho;
                        self.rho = new_rho;
                        match self.sys.refactor(self.set.sigma, self.rho_eq(), self.rho) {
                            Ok(()) => {
                                self.factorizations += 1;
                                // y is kept; the scaled dual is independent of rho.
                            }
                            Err(_) => {
                                self.rho = old;
                                self.sys.refactor(self.set.sigma, self.rho_eq(), self.rho)?;
                            }
                        }
                    }
                    last_adapt = k;
                }
            }
        }

        let (mut x, mut dual) = self.unscale(&it);
        match certificate {
            Some(Certificate::Primal(cert)) => dual = cert,
            Some(Certificate::Dual(dx)) => x = dx,
            None => {}
        }
        let residuals = verify_kkt(self.p, &x, &dual);
        let report = SolveReport {
            status,
            iterations,
            primal_objective: self.p.objective(&x),
            dual_objective: dot(&self.p.b, &dual.eq) + self.p.offset,
            residuals,
            solve_seconds: self.start.elapsed().as_secs_f64(),
            setup_seconds: self.setup_seconds,
            factorizations: self.factorizations,
            final_rho: self.rho,
            log,
        };
        Ok(Solution { x, dual, report })
    }
}
