//! On-disk formats: instance descriptors, manifests, results and CSV rows.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use jgmc_conic::SolveReport;
use jgmc_core::pipeline::{JointSolution, PipelineConfig};
use jgmc_core::Graph;
use serde::{Deserialize, Serialize};

use crate::{read_json, CliError};

/// One generated pair; graph paths are relative to the descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub scenario: String,
    pub sigma: f64,
    pub seed: u64,
    pub g1: String,
    pub g2: String,
}

impl Instance {
    pub fn load_graphs(path: &Path) -> Result<(Instance, Graph, Graph), CliError> {
        let inst: Instance = read_json(&path.to_path_buf())?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let g1 = Graph::load(&dir.join(&inst.g1))?;
        let g2 = Graph::load(&dir.join(&inst.g2))?;
        Ok((inst, g1, g2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    /// Instance descriptors relative to the manifest.
    pub instances: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    /// Instance descriptor the pair came from, when known.
    pub instance: Option<PathBuf>,
    pub scenario: Option<String>,
    pub sigma: Option<f64>,
    pub method: String,
    /// `perm[i] = j`: node `i` of the first graph matches node `j` of the second.
    pub perm: Vec<usize>,
    pub y1: Vec<i8>,
    pub y2: Vec<i8>,
    pub relaxed_objective: f64,
    pub rounded_objective: f64,
    pub rounded_registration: f64,
    pub rounded_cut: f64,
    pub violations: usize,
    pub lambda_m: f64,
    pub lambda_c: f64,
    pub d: usize,
    pub kpsvd_energy: f64,
    pub dummies: usize,
    pub report: SolveReport,
    pub timings: BTreeMap<String, f64>,
    pub config: PipelineConfig,
}

impl ResultFile {
    pub fn new(sol: JointSolution, cfg: &PipelineConfig, method: String) -> Self {
        Self {
            instance: None,
            scenario: None,
            sigma: None,
            method,
            perm: sol.perm,
            y1: sol.y1,
            y2: sol.y2,
            relaxed_objective: sol.relaxed_objective,
            rounded_objective: sol.rounded_objective,
            rounded_registration: sol.rounded_registration,
            rounded_cut: sol.rounded_cut,
            violations: sol.violations,
            lambda_m: sol.lambda_m,
            lambda_c: sol.lambda_c,
            d: sol.d,
            kpsvd_energy: sol.kpsvd_energy,
            dummies: sol.dummies,
            report: sol.report,
            timings: sol.timings,
            config: cfg.clone(),
        }
    }

    pub fn seconds(&self) -> f64 {
        self.timings.values().sum()
    }
}

pub const CSV_HEADER: [&str; 9] = ["scenario", "sigma", "method", "m_acc", "f1", "f2", "c_acc", "mc_acc", "secs"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scenario: String,
    pub sigma: f64,
    pub method: String,
    pub m_acc: f64,
    pub f1: f64,
    pub f2: f64,
    pub c_acc: f64,
    pub mc_acc: f64,
    pub secs: f64,
}

/// Appends rows, writing the header when the file is new or empty.
pub fn append_rows(path: &Path, rows: &[Row]) -> Result<(), CliError> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::input(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r.headers().map_err(|e| CliError::input(e.to_string()))?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(CliError::input(format!("{}: expected header {}", path.display(), CSV_HEADER.join(","))));
    }
    r.deserialize().collect::<Result<Vec<Row>, _>>().map_err(|e| CliError::input(e.to_string()))
}
