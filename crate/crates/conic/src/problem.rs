use serde::{Deserialize, Serialize};

use crate::cone::ConeSpec;
use crate::sparse::SparseMatrix;
use crate::ConicError;

/// Standard-form conic program
///
/// ```text
/// minimize    c'x + offset
/// subject to  A x = b
///             x in K
/// ```
///
/// where `K` is the product cone described by [`ConeSpec`], in the order
/// free variables, nonnegative variables, PSD blocks (svec form).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConicProgram {
    pub c: Vec<f64>,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub cones: ConeSpec,
    #[serde(default)]
    pub offset: f64,
}

impl ConicProgram {
    pub fn new(c: Vec<f64>, a: SparseMatrix, b: Vec<f64>, cones: ConeSpec) -> Result<Self, ConicError> {
        let p = Self { c, a, b, cones, offset: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.cones.dim();
        if self.c.len() != n {
            return Err(ConicError::Dimension(format!(
                "objective has {} entries, cones describe {n} variables",
                self.c.len()
            )));
        }
        if self.a.ncols() != n || self.a.nrows() != self.b.len() {
            return Err(ConicError::Dimension(format!(
                "constraint matrix is {}x{}, expected {}x{n}",
                self.a.nrows(),
                self.a.ncols(),
                self.b.len()
            )));
        }
        let finite = self.c.iter().chain(&self.b).all(|v| v.is_finite())
            && self.a.triplets().iter().all(|t| t.2.is_finite());
        if !finite {
            return Err(ConicError::NonFinite);
        }
        Ok(())
    }

    /// Objective value at `x`, including the constant offset.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + self.offset
    }

    /// Debug dump: cone sizes and the constraint matrix in triplet form.
    pub fn dump_json(&self) -> serde_json::Value {
        serde_json::json!({
            "num_vars": self.num_vars(),
            "num_constraints": self.num_constraints(),
            "cones": {
                "free": self.cones.free,
                "nonneg": self.cones.nonneg,
                "psd": self.cones.psd,
            },
            "offset": self.offset,
            "c": self.c,
            "b": self.b,
            "a_triplets": self.a.triplets(),
        })
    }
}
