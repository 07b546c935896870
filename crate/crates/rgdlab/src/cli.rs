//! Config parsing, command execution, and artifact serialization for the
//! `rgdlab` binary.
//!
//! Config files are JSON documents with a top-level `"schema": 1`. Exit
//! codes are the caller's contract: 0 success, 2 configuration error
//! (nothing written), 3 batch finished with per-run errors.

use crate::analysis::{
    singular_alpha_scan, step_size_bound, BoundRegime, MapKind, SingularSet, StepSizeBound,
};
use crate::error::{Error, Result};
use crate::experiments::{monte_carlo_avoidance, AvoidanceReport, ExperimentPlan};
use crate::geometry::{ManifoldKind, ManifoldSpec, Point};
use crate::optimizers::{StopRule, Trajectory};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u64 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUN_ERRORS: i32 = 3;

/// Single-trajectory plan for the `traj` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajPlan {
    pub cost: crate::costs::CostSpec,
    pub manifold: ManifoldKind,
    pub algorithm: crate::experiments::AlgorithmSpec,
    pub x0: Vec<f64>,
    pub stop: StopRule,
}

/// Scan plan for the `scan` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanPlan {
    pub cost: crate::costs::CostSpec,
    pub manifold: ManifoldKind,
    #[serde(flatten)]
    pub map: MapKind,
    pub point: Vec<f64>,
    pub alpha_max: f64,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
}

fn default_grid() -> usize {
    2048
}

fn read_config(path: &Path, section: &str) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("config is not valid JSON: {e}")))?;
    match value.get("schema") {
        Some(serde_json::Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION) => {}
        other => {
            return Err(Error::config(format!(
                "config must declare \"schema\": {SCHEMA_VERSION} (found {other:?})"
            )))
        }
    }
    value
        .get(section)
        .cloned()
        .ok_or_else(|| Error::config(format!("config is missing the \"{section}\" section")))
}

pub fn load_run_config(path: &Path) -> Result<ExperimentPlan> {
    let section = read_config(path, "experiment")?;
    let plan: ExperimentPlan = serde_json::from_value(section)
        .map_err(|e| Error::config(format!("invalid experiment config: {e}")))?;
    Ok(plan)
}

pub fn load_scan_config(path: &Path) -> Result<ScanPlan> {
    let section = read_config(path, "scan")?;
    serde_json::from_value(section).map_err(|e| Error::config(format!("invalid scan config: {e}")))
}

pub fn load_traj_config(path: &Path) -> Result<TrajPlan> {
    let section = read_config(path, "traj")?;
    serde_json::from_value(section).map_err(|e| Error::config(format!("invalid traj config: {e}")))
}

/// Run a Monte Carlo plan and write `report.json` (and per-run trajectory
/// CSVs when requested) under `out_dir`.
pub fn execute_run(
    plan: &ExperimentPlan,
    out_dir: &Path,
    workers: Option<usize>,
    dump_trajectories: bool,
) -> Result<AvoidanceReport> {
    // Full validation before any filesystem effect.
    let (cost, m) = plan.validate()?;
    let batch = match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;
            pool.install(|| monte_carlo_avoidance(plan))?
        }
        None => monte_carlo_avoidance(plan)?,
    };
    fs::create_dir_all(out_dir)?;
    let report_path = out_dir.join("report.json");
    write_json(&report_path, &batch.report)?;
    if dump_trajectories {
        let traj_dir = out_dir.join("trajectories");
        fs::create_dir_all(&traj_dir)?;
        for i in 0..plan.num_runs {
            if let Ok(traj) = crate::experiments::single_trajectory(plan, &cost, &m, i) {
                let path = traj_dir.join(format!("run_{i:05}.csv"));
                fs::write(&path, trajectory_csv(&m, &traj))?;
            }
        }
    }
    Ok(batch.report)
}

/// Run a singular-step-size scan and write `scan.json` under `out_dir`.
pub fn execute_scan(plan: &ScanPlan, out_dir: &Path) -> Result<SingularSet> {
    let m = ManifoldSpec::from_kind(plan.manifold.clone());
    let cost = plan.cost.build()?;
    cost.compatible_with(&m)?;
    let x = Point::from_slice(&plan.point);
    m.check_point(&x)
        .map_err(|e| Error::config(format!("scan point is not on the manifold: {e}")))?;
    let set = singular_alpha_scan(&cost, &m, plan.map, &x, plan.alpha_max, plan.grid_size)?;
    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("scan.json"), &set)?;
    Ok(set)
}

/// Run a single trajectory and write `trajectory.csv` under `out_dir`.
pub fn execute_traj(plan: &TrajPlan, out_dir: &Path) -> Result<PathBuf> {
    let m = ManifoldSpec::from_kind(plan.manifold.clone());
    let cost = plan.cost.build()?;
    cost.compatible_with(&m)?;
    plan.stop.validate()?;
    let x0 = Point::from_slice(&plan.x0);
    m.check_point(&x0)
        .map_err(|e| Error::config(format!("x0 is not on the manifold: {e}")))?;
    let traj = crate::experiments::run_algorithm_on(&plan.algorithm, &cost, &m, &x0, &plan.stop)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("trajectory.csv");
    fs::write(&path, trajectory_csv(&m, &traj))?;
    Ok(path)
}

/// Resolve a `bounds` invocation from flag values.
pub fn bounds_from_flags(
    regime: &str,
    l: f64,
    g: Option<f64>,
    j: Option<f64>,
    k_min: Option<f64>,
    k_max: Option<f64>,
    p: Option<usize>,
) -> Result<StepSizeBound> {
    let missing = |flag: &str| Error::config(format!("regime '{regime}' requires --{flag}"));
    let regime = match regime {
        "hadamard" => BoundRegime::Hadamard { l },
        "positive-curvature" => BoundRegime::PositiveCurvature {
            l,
            g: g.ok_or_else(|| missing("G"))?,
            j: j.ok_or_else(|| missing("J"))?,
            k_max: k_max.ok_or_else(|| missing("Kmax"))?,
        },
        "pinched" => BoundRegime::Pinched {
            l,
            k_min: k_min.ok_or_else(|| missing("Kmin"))?,
            k_max: k_max.ok_or_else(|| missing("Kmax"))?,
        },
        "stiefel" => BoundRegime::Stiefel {
            l,
            p: p.ok_or_else(|| missing("p"))?,
        },
        "product-spheres" => BoundRegime::ProductSpheres { l },
        other => {
            return Err(Error::config(format!(
                "unknown regime '{other}' (expected hadamard, positive-curvature, pinched, stiefel, product-spheres)"
            )))
        }
    };
    step_size_bound(regime)
}

/// Render a trajectory as CSV with columns
/// `iter, x0..x{ambient_dim-1}, step, grad_norm, shrinks`.
/// The final row has no step or shrink count.
pub fn trajectory_csv(m: &ManifoldSpec, traj: &Trajectory) -> String {
    let mut out = String::from("iter");
    for i in 0..m.ambient_dim {
        out.push_str(&format!(",x{i}"));
    }
    out.push_str(",step,grad_norm,shrinks\n");
    for (t, p) in traj.points.iter().enumerate() {
        out.push_str(&t.to_string());
        for v in p.coords.iter() {
            out.push_str(&format!(",{v}"));
        }
        match traj.steps.get(t) {
            Some(s) => out.push_str(&format!(",{s}")),
            None => out.push(','),
        }
        out.push_str(&format!(",{}", traj.grad_norms[t]));
        match traj.shrink_counts.get(t) {
            Some(c) => out.push_str(&format!(",{c}\n")),
            None => out.push_str(",\n"),
        }
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Map an error to the process exit code contract.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Json(_) | Error::Io(_) | Error::Precondition(_) => EXIT_CONFIG,
        _ => EXIT_RUN_ERRORS,
    }
}
