use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use super::config::{ExperimentConfig, SweepParam};
use super::run::{run_experiment, MetricsRow};
use super::ExperimentError;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub dir: PathBuf,
    /// Metrics at the slices that fit in the horizon, or at the horizon.
    pub rows: Vec<MetricsRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub param: SweepParam,
    pub points: Vec<SweepPoint>,
    /// Path of the combined table.
    pub table: PathBuf,
}

impl SweepReport {
    pub fn table_csv(&self) -> String {
        let with_static = self
            .points
            .iter()
            .any(|p| p.rows.iter().any(|r| r.static_regret.is_some()));
        let mut out = String::from("param,value,t,reg_dyn_per_t,violation_per_t");
        if with_static {
            out.push_str(",reg_static_per_t");
        }
        out.push('\n');
        for p in &self.points {
            for r in &p.rows {
                let t = r.t as f64;
                let _ = write!(
                    out,
                    "{},{:?},{},{:?},{:?}",
                    self.param.name(),
                    p.value,
                    r.t,
                    r.dynamic_regret / t,
                    r.violation / t
                );
                if let Some(s) = r.static_regret {
                    let _ = write!(out, ",{:?}", s / t);
                }
                out.push('\n');
            }
        }
        out
    }
}

fn point_dir(base: &std::path::Path, param: SweepParam, value: f64) -> PathBuf {
    base.join(format!("{}-{value}", param.name()))
}

/// Runs one experiment per value in parallel, each into its own
/// subdirectory, and writes `sweep.csv` with the slice rows of every point.
pub fn sweep(config: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<SweepReport, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::Config("sweep has no values".into()));
    }
    config.validate()?;
    let base = config.output.dir.clone();
    let configs = values
        .iter()
        .map(|v| {
            let mut c = config.with_param(param, *v)?;
            c.sweep = None;
            c.output.dir = point_dir(&base, param, *v);
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let horizon = config.instance.horizon;
    let mut slices: Vec<usize> = config
        .output
        .slices
        .iter()
        .copied()
        .filter(|s| *s <= horizon)
        .collect();
    if slices.is_empty() {
        slices.push(horizon);
    }
    let points = configs
        .par_iter()
        .zip(values)
        .map(|(c, v)| {
            let result = run_experiment(c)?;
            Ok(SweepPoint {
                value: *v,
                dir: c.output.dir.clone(),
                rows: result
                    .metrics
                    .iter()
                    .filter(|r| slices.contains(&r.t))
                    .copied()
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let report = SweepReport {
        param,
        points,
        table: base.join("sweep.csv"),
    };
    std::fs::write(&report.table, report.table_csv())
        .map_err(|e| ExperimentError::io(&report.table, e))?;
    Ok(report)
}
