//! Parameter grids run in parallel.

use std::fs;
use std::path::{Path, PathBuf};

use hush_core::adaptive::Algorithm;
use hush_core::plant::{global_power_reduction, simulated_global_reduction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::run::simulate;
use crate::scenario::{load_scenario, ScenarioConfig};

fn one<T>(v: T) -> Vec<T> {
    vec![v]
}

/// A sweep definition. Empty controller axes keep the scenario's own value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    /// Scenario file, relative to the grid file.
    pub scenario: PathBuf,
    #[serde(default)]
    pub mu: Vec<f64>,
    /// `null` entries run the unconstrained update.
    #[serde(default)]
    pub rho: Vec<Option<f64>>,
    #[serde(default)]
    pub filter_len: Vec<usize>,
    /// Source/secondary separations for the free-field global power check.
    #[serde(default)]
    pub d_over_lambda: Vec<f64>,
    /// Overrides the scenario duration.
    #[serde(default)]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Controller,
    Spatial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub kind: RowKind,
    pub mu: Option<f64>,
    pub rho: Option<f64>,
    pub filter_len: Option<usize>,
    pub d_over_lambda: Option<f64>,
    /// `ok`, `fault` or `error: ...`.
    pub status: String,
    /// Mean broadband (dBC) reduction over the error microphones, or the
    /// simulated global power change for spatial rows (negated, so positive
    /// means quieter).
    pub reduction_db: Option<f64>,
    pub residual_power: Option<f64>,
    pub output_power: Option<f64>,
    pub alpha_mean: Option<f64>,
    pub analytic_db: Option<f64>,
}

impl SweepRow {
    fn controller(mu: f64, rho: Option<f64>, filter_len: usize) -> Self {
        Self {
            kind: RowKind::Controller,
            mu: Some(mu),
            rho,
            filter_len: Some(filter_len),
            d_over_lambda: None,
            status: String::new(),
            reduction_db: None,
            residual_power: None,
            output_power: None,
            alpha_mean: None,
            analytic_db: None,
        }
    }
}

pub fn load_grid(path: &Path) -> Result<(SweepGrid, ScenarioConfig, Vec<u8>), CliError> {
    let text = fs::read(path)?;
    let grid: SweepGrid = serde_json::from_slice(&text)
        .map_err(|e| CliError::InvalidScenario(vec![format!("sweep grid: {e}")]))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let (cfg, bytes) = load_scenario(&base.join(&grid.scenario))?;
    Ok((grid, cfg, bytes))
}

fn run_point(base: &ScenarioConfig, bytes: &[u8], mut row: SweepRow) -> SweepRow {
    let mut cfg = base.clone();
    for u in &mut cfg.units {
        u.controller.mu = row.mu.unwrap_or(u.controller.mu);
        u.controller.filter_len = row.filter_len.unwrap_or(u.controller.filter_len);
        u.controller.rho = row.rho;
        if row.rho.is_some() {
            u.controller.algorithm = Algorithm::MovFxlms;
        }
    }
    if let Err(e) = cfg.check() {
        row.status = format!("error: {e}");
        return row;
    }
    match simulate(&cfg, bytes) {
        Ok(data) => {
            let s = &data.summary;
            let errs: Vec<f64> = s
                .mics
                .iter()
                .filter(|m| m.kind == "error")
                .map(|m| m.broadband_reduction_db)
                .collect();
            let n = s.units.len() as f64;
            row.status = if s.faulted { "fault".into() } else { "ok".into() };
            row.reduction_db = (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64);
            row.residual_power = Some(s.units.iter().map(|u| u.residual_power).sum::<f64>() / n);
            row.output_power = Some(s.units.iter().map(|u| u.output_power).sum::<f64>() / n);
            row.alpha_mean = Some(s.units.iter().map(|u| u.alpha.mean).sum::<f64>() / n);
        }
        Err(CliError::Fault(_)) => row.status = "fault".into(),
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

/// Runs the cartesian product of the controller axes, then the spatial
/// points. A faulting point is recorded and the sweep carries on.
pub fn sweep(grid: &SweepGrid, base: &ScenarioConfig, bytes: &[u8]) -> Vec<SweepRow> {
    let mut base = base.clone();
    if let Some(d) = grid.duration_s {
        base.duration_s = d;
        base.metrics.analysis_window_s = base.metrics.analysis_window_s.min(d / 2.0);
    }
    let first = &base.units[0].controller;
    let mus = if grid.mu.is_empty() { one(first.mu) } else { grid.mu.clone() };
    let rhos = if grid.rho.is_empty() { one(first.rho) } else { grid.rho.clone() };
    let lens = if grid.filter_len.is_empty() {
        one(first.filter_len)
    } else {
        grid.filter_len.clone()
    };
    let mut points = Vec::new();
    for &mu in &mus {
        for &rho in &rhos {
            for &len in &lens {
                points.push(SweepRow::controller(mu, rho, len));
            }
        }
    }
    let mut rows: Vec<SweepRow> = points.into_par_iter().map(|row| run_point(&base, bytes, row)).collect();

    let wavelength = 343.0 / 100.0;
    rows.extend(grid.d_over_lambda.par_iter().map(|&r| {
        let sim = simulated_global_reduction(r, wavelength);
        SweepRow {
            kind: RowKind::Spatial,
            mu: None,
            rho: None,
            filter_len: None,
            d_over_lambda: Some(r),
            status: if sim.is_finite() { "ok".into() } else { "error: non-finite".into() },
            reduction_db: Some(-sim),
            residual_power: None,
            output_power: None,
            alpha_mean: None,
            analytic_db: Some(-global_power_reduction(r)),
        }
    }).collect::<Vec<_>>());
    rows
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(CliError::sim)?;
    w.write_record([
        "kind",
        "mu",
        "rho",
        "filter_len",
        "d_over_lambda",
        "status",
        "reduction_db",
        "residual_power",
        "output_power",
        "alpha_mean",
        "analytic_db",
    ])
    .map_err(CliError::sim)?;
    let f = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in rows {
        let kind = match r.kind {
            RowKind::Controller => "controller",
            RowKind::Spatial => "spatial",
        };
        w.write_record([
            kind.to_string(),
            f(r.mu),
            f(r.rho),
            r.filter_len.map(|v| v.to_string()).unwrap_or_default(),
            f(r.d_over_lambda),
            r.status.clone(),
            f(r.reduction_db),
            f(r.residual_power),
            f(r.output_power),
            f(r.alpha_mean),
            f(r.analytic_db),
        ])
        .map_err(CliError::sim)?;
    }
    w.flush()?;
    Ok(())
}
