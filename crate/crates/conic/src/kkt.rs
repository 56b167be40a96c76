//! Optimality check recomputed from scratch on the original (unscaled) data.

use serde::{Deserialize, Serialize};

use crate::problem::ConicProgram;

/// Dual variables: `eq` for `A x = b`, `cone` for `x in K` (`cone` lies in the dual cone).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DualVector {
    pub eq: Vec<f64>,
    pub cone: Vec<f64>,
}

/// Relative KKT residuals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `max(|Ax - b|/(1+|b|), dist(x, K)/(1+|x|))`, infinity norms.
    pub primal: f64,
    /// `max(|c - A'y - z|/(1+|c|), dist(z, K*)/(1+|z|))`.
    pub dual: f64,
    /// `|c'x - b'y| / (1 + |c'x| + |b'y|)`.
    pub gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn verify_kkt(p: &ConicProgram, x: &[f64], dual: &DualVector) -> KktResiduals {
    let mut ax = vec![0.0; p.num_constraints()];
    p.a.mul_vec(x, &mut ax);
    let eq_res = inf_norm(&ax.iter().zip(&p.b).map(|(a, b)| a - b).collect::<Vec<_>>());
    let cone_res = p.cones.distance(x);
    let primal = (eq_res / (1.0 + inf_norm(&p.b))).max(cone_res / (1.0 + inf_norm(x)));

    let mut aty = vec![0.0; p.num_vars()];
    p.a.mul_transpose_vec(&dual.eq, &mut aty);
    let stat: Vec<f64> = p.c.iter().zip(&aty).zip(&dual.cone).map(|((c, a), z)| c - a - z).collect();
    let dual_res = (inf_norm(&stat) / (1.0 + inf_norm(&p.c)))
        .max(p.cones.dual_distance(&dual.cone) / (1.0 + inf_norm(&dual.cone)));

    let pobj: f64 = p.c.iter().zip(x).map(|(c, x)| c * x).sum();
    let dobj: f64 = p.b.iter().zip(&dual.eq).map(|(b, y)| b * y).sum();
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

    KktResiduals { primal, dual: dual_res, gap }
}
