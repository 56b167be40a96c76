use std::path::{Path, PathBuf};

use clap::Args;
use jgmc_conic::SolveStatus;
use jgmc_core::datasets::{gen_pair, SyntheticScenario};
use jgmc_core::metrics::score;
use jgmc_core::model::CouplingMode;
use jgmc_core::pipeline::{solve_pair, DimChoice, PipelineConfig};
use serde::{Deserialize, Serialize};

use crate::files::{append_rows, read_rows, Instance, Manifest, ResultFile, Row};
use crate::{plot as svg, read_json, CliError};

const PRESETS: [(&str, &str); 4] = [
    ("cmu", include_str!("../presets/cmu.json")),
    ("nodes11", include_str!("../presets/nodes11.json")),
    ("nodes28", include_str!("../presets/nodes28.json")),
    ("princeton", include_str!("../presets/princeton.json")),
];

/// Scenario file: a synthetic scenario plus an optional noise grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(flatten)]
    pub scenario: SyntheticScenario,
    #[serde(default)]
    pub sigmas: Option<Vec<f64>>,
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Scenario JSON; `sigmas` turns it into a noise sweep.
    #[arg(long, conflicts_with = "preset")]
    pub scenario: Option<PathBuf>,
    /// Built-in scene: nodes11, nodes28 or nodes33.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated noise levels, overriding the scenario.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn generate(a: &GenerateArgs) -> Result<(), CliError> {
    let mut file = match (&a.scenario, a.preset.as_deref()) {
        (Some(p), _) => read_json::<ScenarioFile>(p)?,
        (None, Some(name)) => {
            let scenario = match name {
                "nodes11" => SyntheticScenario::eleven_nodes(0, 0.0),
                "nodes28" => SyntheticScenario::twenty_eight_nodes(0, 0.0),
                "nodes33" => SyntheticScenario::thirty_three_nodes(0, 0.0),
                other => return Err(CliError::input(format!("unknown scene preset {other:?}"))),
            };
            ScenarioFile { scenario, sigmas: None }
        }
        (None, None) => return Err(CliError::input("pass --scenario or --preset")),
    };
    if let Some(seed) = a.seed {
        file.scenario.seed = seed;
    }
    if let Some(s) = &a.sigma {
        file.sigmas = Some(s.clone());
    }
    file.scenario.validate()?;
    let sigmas = file.sigmas.clone().unwrap_or_else(|| vec![file.scenario.sigma]);
    std::fs::create_dir_all(&a.out)?;
    let mut listed = Vec::new();
    for &sigma in &sigmas {
        let spec = SyntheticScenario { sigma, ..file.scenario.clone() };
        let (g1, g2) = gen_pair(&spec)?;
        let id = format!("{}_sigma{}_seed{}", spec.name, sigma, spec.seed);
        let dir = a.out.join(&id);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("g1.json"), g1.to_json())?;
        std::fs::write(dir.join("g2.json"), g2.to_json())?;
        let inst = Instance { id: id.clone(), scenario: spec.name.clone(), sigma, seed: spec.seed, g1: "g1.json".into(), g2: "g2.json".into() };
        std::fs::write(dir.join("instance.json"), serde_json::to_string_pretty(&inst)?)?;
        listed.push(format!("{id}/instance.json"));
    }
    let manifest = Manifest { scenario: file.scenario.name.clone(), instances: listed };
    std::fs::write(a.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

#[derive(Args)]
pub struct SolveArgs {
    /// First and second graph.
    #[arg(long, num_args = 2, value_names = ["A", "B"], required_unless_present = "instance")]
    pub pair: Option<Vec<PathBuf>>,
    /// Instance descriptor written by `generate`.
    #[arg(long, conflicts_with = "pair")]
    pub instance: Option<PathBuf>,
    /// JSON run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bundled configuration: cmu, nodes11, nodes28 or princeton.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Kronecker terms kept.
    #[arg(long)]
    pub k: Option<usize>,
    /// Embedding dimension or `auto`.
    #[arg(long)]
    pub dim: Option<String>,
    /// Matching weight or `auto`.
    #[arg(long = "lambda-m")]
    pub lambda_m: Option<String>,
    /// Clustering weight or `auto`.
    #[arg(long = "lambda-c")]
    pub lambda_c: Option<String>,
    #[arg(long)]
    pub no_coupling: bool,
    /// Independent (1, z, L̄) block instead of the joint cluster moments.
    #[arg(long)]
    pub decoupled_lbar: bool,
    /// Solver tolerance for primal, dual and gap residuals.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Cluster-restricted re-assignment after rounding.
    #[arg(long)]
    pub repair: bool,
    /// Pad the smaller graph with isolated nodes.
    #[arg(long)]
    pub dummy_padding: bool,
    /// Solver wall-clock limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Label stored with the result and used as the CSV method column.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_auto<T: std::str::FromStr>(flag: &str, v: &str) -> Result<Option<T>, CliError> {
    if v == "auto" {
        return Ok(None);
    }
    v.parse().map(Some).map_err(|_| CliError::input(format!("--{flag}: expected a number or `auto`, got {v:?}")))
}

pub fn run_config(a: &SolveArgs) -> Result<PipelineConfig, CliError> {
    let mut cfg = match (&a.config, a.preset.as_deref()) {
        (Some(p), _) => read_json::<PipelineConfig>(p)?,
        (None, Some(name)) => {
            let text = PRESETS
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| *t)
                .ok_or_else(|| CliError::input(format!("unknown preset {name:?}")))?;
            serde_json::from_str(text)?
        }
        (None, None) => PipelineConfig::default(),
    };
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(d) = &a.dim {
        cfg.dim = match parse_auto::<usize>("dim", d)? {
            Some(d) => DimChoice::Fixed(d),
            None => DimChoice::Auto { energy: 0.9, min: 2, max: 27 },
        };
    }
    if let Some(v) = &a.lambda_m {
        cfg.lambda_m = parse_auto("lambda-m", v)?;
    }
    if let Some(v) = &a.lambda_c {
        cfg.lambda_c = parse_auto("lambda-c", v)?;
    }
    if a.no_coupling {
        cfg.coupling = CouplingMode::None;
    } else if a.decoupled_lbar {
        cfg.coupling = CouplingMode::DecoupledLbar;
    }
    if let Some(t) = a.tol {
        cfg.solver.eps_primal = t;
        cfg.solver.eps_dual = t;
        cfg.solver.eps_gap = t;
    }
    if a.time_limit.is_some() {
        cfg.solver.time_limit = a.time_limit;
    }
    cfg.repair |= a.repair;
    cfg.dummy_padding |= a.dummy_padding;
    cfg.solver.validate().map_err(|e| CliError::input(e.to_string()))?;
    Ok(cfg)
}

fn method_name(cfg: &PipelineConfig) -> String {
    match cfg.coupling {
        CouplingMode::None => "uncoupled".into(),
        CouplingMode::DecoupledLbar => "decoupled_lbar".into(),
        CouplingMode::ZProduct => "z_product".into(),
        CouplingMode::Joint => "coupled".into(),
    }
}

pub fn solve(a: &SolveArgs) -> Result<(), CliError> {
    let cfg = run_config(a)?;
    let (inst, g1, g2) = match (&a.instance, &a.pair) {
        (Some(p), _) => {
            let (inst, g1, g2) = Instance::load_graphs(p)?;
            (Some((p.clone(), inst)), g1, g2)
        }
        (None, Some(pair)) => (None, jgmc_core::Graph::load(&pair[0])?, jgmc_core::Graph::load(&pair[1])?),
        (None, None) => return Err(CliError::input("pass --pair or --instance")),
    };
    let sol = solve_pair(&g1, &g2, &cfg)?;
    let status = sol.report.status;
    let mut out = ResultFile::new(sol, &cfg, a.method.clone().unwrap_or_else(|| method_name(&cfg)));
    if let Some((path, inst)) = inst {
        out.instance = Some(std::path::absolute(&path)?);
        out.scenario = Some(inst.scenario);
        out.sigma = Some(inst.sigma);
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&a.out, serde_json::to_string_pretty(&out)?)?;
    match status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::NumericalFailure => Err(CliError { code: 4, message: "solver reported a numerical failure".into() }),
        other => Err(CliError { code: 3, message: format!("solver stopped with status {other:?}; partial result written") }),
    }
}

#[derive(Args)]
pub struct EvalArgs {
    /// Result file, or a directory searched recursively for results.
    #[arg(long)]
    pub result: PathBuf,
    /// Instance descriptor with the ground truth; defaults to the one recorded in the result.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// CSV file rows are appended to.
    #[arg(long)]
    pub out: PathBuf,
}

fn collect_results(path: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
        entries.sort();
        for e in entries {
            if e.is_dir() {
                collect_results(&e, out)?;
            } else if e.extension().is_some_and(|x| x == "json") {
                let text = std::fs::read_to_string(&e)?;
                if serde_json::from_str::<ResultFile>(&text).is_ok() {
                    out.push(e);
                }
            }
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let mut paths = Vec::new();
    collect_results(&a.result, &mut paths)?;
    if paths.is_empty() {
        return Err(CliError::input(format!("no results under {}", a.result.display())));
    }
    let mut rows = Vec::new();
    for p in paths {
        let res: ResultFile = read_json(&p)?;
        let gt_path = a
            .gt
            .clone()
            .or_else(|| res.instance.clone())
            .ok_or_else(|| CliError::input(format!("{}: no ground truth; pass --gt", p.display())))?;
        let (inst, g1, g2) = Instance::load_graphs(&gt_path)?;
        let missing = || CliError::input(format!("{}: graphs carry no ground truth", gt_path.display()));
        let gt = g2.gt_match.as_ref().ok_or_else(missing)?;
        let (c1, c2) = (g1.gt_cluster.as_ref().ok_or_else(missing)?, g2.gt_cluster.as_ref().ok_or_else(missing)?);
        let s = score(&res.perm, gt, &res.y1, c1, &res.y2, c2)?;
        rows.push(Row {
            scenario: inst.scenario,
            sigma: inst.sigma,
            method: res.method.clone(),
            m_acc: s.m_acc,
            f1: s.f1,
            f2: s.f2,
            c_acc: s.c_acc,
            mc_acc: s.mc_acc,
            secs: res.seconds(),
        });
    }
    append_rows(&a.out, &rows)
}

#[derive(Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub csv: PathBuf,
    /// Column drawn on the vertical axis.
    #[arg(long, default_value = "mc_acc")]
    pub metric: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn plot(a: &PlotArgs) -> Result<(), CliError> {
    let rows = read_rows(&a.csv)?;
    if rows.is_empty() {
        return Err(CliError::input(format!("{} holds no rows", a.csv.display())));
    }
    let pick = |r: &Row| -> Option<f64> {
        Some(match a.metric.as_str() {
            "m_acc" => r.m_acc,
            "f1" => r.f1,
            "f2" => r.f2,
            "c_acc" => r.c_acc,
            "mc_acc" => r.mc_acc,
            "secs" => r.secs,
            _ => return None,
        })
    };
    if pick(&rows[0]).is_none() {
        return Err(CliError::input(format!("unknown metric {:?}", a.metric)));
    }
    let points: Vec<(String, f64, f64)> = rows.iter().map(|r| (r.method.clone(), r.sigma, pick(r).unwrap_or(0.0))).collect();
    std::fs::write(&a.out, svg::chart(&points, &a.metric))?;
    Ok(())
}
