use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array1;
use serde::Serialize;

use super::config::{ComparatorChoice, ExperimentConfig, MappingKind, OnViolation, ScheduleKind};
use super::replay::rounds_csv;
use super::ExperimentError;
use crate::algorithm::{run, DynamicMapping, RunOptions, Trace, ViolationPolicy};
use crate::geometry::BregmanGeometry;
use crate::metrics::{
    dynamic_optimum, estimate_constants, estimate_slater_margin, objective_series,
    constraint_series, static_optimum, theoretical_bounds, BoundInputs, ComparatorKind,
    ComparatorSequence, OptimumSource, OracleOptions, TheoreticalConstants, FEASIBILITY_TOL,
};
use crate::network::{check_assumption1, generate_graph_sequence, CommGraphSequence, GraphReport};
use crate::problem::{generate_instance, global_objective, save_trace, OnlineProblem, TrackingInstance};

/// Everything a run produces before any metric is computed.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub instance: TrackingInstance,
    pub graphs: CommGraphSequence,
    pub geometries: Vec<BregmanGeometry>,
    pub mapping: DynamicMapping,
    pub constants: TheoreticalConstants,
    pub trace: Trace,
}

/// Metrics after the first `t` rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRow {
    pub t: usize,
    pub dynamic_regret: f64,
    pub violation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub static_regret: Option<f64>,
    pub regret_bound: f64,
    pub violation_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub static_regret_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub rounds: usize,
    pub agents: usize,
    pub invariant_violations: usize,
    /// Largest `beta_t ||q|| / F`; at most 1 when the dual bound holds.
    pub dual_bound_ratio: f64,
    pub graph_window: usize,
    pub graph_weight_floor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slater_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparatorSummary {
    /// Rounds whose optimum is the instance reference point, after the audit.
    pub reference_rounds: usize,
    /// Rounds solved by the offline oracle.
    pub oracle_rounds: usize,
    pub max_stationarity_residual: f64,
    /// Variation of the dynamic comparator under the mapping in use.
    pub variation: f64,
    pub identity_variation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub static_objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub constants: TheoreticalConstants,
    pub run: RunSummary,
    pub comparator: ComparatorSummary,
    #[serde(rename = "final")]
    pub last: MetricsRow,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub simulation: Simulation,
    /// `dynamic_comparator[t - 1][i]`.
    pub dynamic_comparator: Vec<Vec<Array1<f64>>>,
    pub objective: Vec<f64>,
    pub comparator_objective: Vec<f64>,
    pub constraint_sums: Vec<Array1<f64>>,
    pub cumulative_regret: Vec<f64>,
    pub cumulative_violation: Vec<f64>,
    pub metrics: Vec<MetricsRow>,
    pub summary: Summary,
}

fn oracle_options() -> OracleOptions {
    // comparators must pass the strict feasibility check
    OracleOptions {
        feasibility: FEASIBILITY_TOL,
        ..OracleOptions::default()
    }
}

/// Generates the graph sequence of a config and checks it.
pub fn check_graph(config: &ExperimentConfig) -> Result<(CommGraphSequence, GraphReport), ExperimentError> {
    config.validate()?;
    let n = config.instance.agents;
    let graphs = generate_graph_sequence(
        n,
        config.network.connect_probability,
        config.instance.horizon,
        config.instance.seed,
    )
    .map_err(ExperimentError::engine("graph generation"))?;
    let report = check_assumption1(&graphs, graphs.window(), 1.0 / n as f64);
    Ok((graphs, report))
}

/// Generates the instance and graphs and runs the algorithm.
pub fn simulate(config: &ExperimentConfig) -> Result<Simulation, ExperimentError> {
    let (graphs, report) = check_graph(config)?;
    if let Some(v) = &report.violation {
        return Err(ExperimentError::Graph(v.to_string()));
    }
    let instance = generate_instance(&config.tracking_params())
        .map_err(ExperimentError::engine("instance generation"))?;
    let geometries = (0..instance.agents())
        .map(|i| BregmanGeometry::scaled_euclidean(config.geometry.scale, instance.domain(i).clone()))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(ExperimentError::engine("geometry"))?;
    let mapping = match config.algorithm.mapping {
        MappingKind::Identity => DynamicMapping::Identity,
        MappingKind::TrueDynamics => DynamicMapping::true_dynamics(&instance)
            .map_err(ExperimentError::engine("mapping"))?,
    };
    let constants = estimate_constants(&instance, &geometries, &graphs)
        .map_err(ExperimentError::engine("constants"))?;
    let options = RunOptions {
        dual_bound: Some(constants.f),
        policy: match config.algorithm.on_violation {
            OnViolation::Halt => ViolationPolicy::Halt,
            OnViolation::Record => ViolationPolicy::Record,
        },
        ..RunOptions::default()
    };
    let trace = run(
        &instance,
        &graphs,
        &config.algorithm.schedule(),
        &mapping,
        &geometries,
        &options,
    )
    .map_err(ExperimentError::engine("run"))?;
    Ok(Simulation {
        instance,
        graphs,
        geometries,
        mapping,
        constants,
        trace,
    })
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// `increments[t - 1]` is the variation added by round `t`.
fn variation_increments(
    points: &[Vec<Array1<f64>>],
    mapping: &DynamicMapping,
) -> crate::Result<Vec<f64>> {
    let mut out = vec![0.0; points.len()];
    for t in 2..=points.len() {
        for (i, (prev, cur)) in points[t - 2].iter().zip(&points[t - 1]).enumerate() {
            out[t - 1] += norm(&(cur - &mapping.apply(i, t, prev.view())?));
        }
    }
    Ok(out)
}

fn prefix_sums(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

fn slater_margin(config: &ExperimentConfig, inst: &TrackingInstance) -> Result<Option<f64>, ExperimentError> {
    if config.algorithm.schedule != ScheduleKind::Slater {
        return Ok(None);
    }
    if let Some(eps) = config.algorithm.slater_margin {
        return Ok(Some(eps));
    }
    let n = inst.agents();
    let mut candidates: Vec<Vec<Array1<f64>>> =
        vec![(0..n).map(|i| inst.domain(i).center()).collect()];
    candidates.extend(inst.reference_optimum(1));
    estimate_slater_margin(inst, &candidates, inst.horizon())
        .map(Some)
        .map_err(ExperimentError::engine("slater margin"))
}

/// Runs a config and computes all metrics without writing anything.
pub fn execute(config: &ExperimentConfig) -> Result<RunResult, ExperimentError> {
    let sim = simulate(config)?;
    let inst = &sim.instance;
    let horizon = inst.horizon();
    let decisions: Vec<Vec<Array1<f64>>> = (1..=horizon).map(|t| sim.trace.decisions(t)).collect();

    let opts = oracle_options();
    let mut dynamic = Vec::with_capacity(horizon);
    let (mut reference_rounds, mut oracle_rounds, mut worst_residual) = (0, 0, 0.0f64);
    for t in 1..=horizon {
        let opt = dynamic_optimum(inst, t, &opts)
            .map_err(ExperimentError::engine(format!("dynamic optimum of round {t}")))?;
        match opt.source {
            OptimumSource::Reference { residual } => {
                reference_rounds += 1;
                worst_residual = worst_residual.max(residual);
            }
            OptimumSource::Oracle => oracle_rounds += 1,
        }
        dynamic.push(opt.points);
    }
    let comparator = ComparatorSequence {
        kind: ComparatorKind::DynamicOptimal,
        points: dynamic,
    };
    comparator
        .check_feasible(inst)
        .map_err(ExperimentError::engine("dynamic comparator"))?;

    let objective = objective_series(inst, &decisions).map_err(ExperimentError::engine("objective"))?;
    let comparator_objective =
        objective_series(inst, &comparator.points).map_err(ExperimentError::engine("objective"))?;
    let constraint_sums =
        constraint_series(inst, &decisions).map_err(ExperimentError::engine("constraints"))?;
    let gaps: Vec<f64> = objective
        .iter()
        .zip(&comparator_objective)
        .map(|(a, b)| a - b)
        .collect();
    let cumulative_regret = prefix_sums(&gaps);
    let mut total = Array1::<f64>::zeros(inst.constraints());
    let cumulative_violation: Vec<f64> = constraint_sums
        .iter()
        .map(|g| {
            total += g;
            total.mapv(|v| v.max(0.0).powi(2)).sum().sqrt()
        })
        .collect();

    let variation = prefix_sums(
        &variation_increments(&comparator.points, &sim.mapping)
            .map_err(ExperimentError::engine("variation"))?,
    );
    let identity_variation = prefix_sums(
        &variation_increments(&comparator.points, &DynamicMapping::Identity)
            .map_err(ExperimentError::engine("variation"))?,
    );
    let eps = slater_margin(config, inst)?;
    let schedule = config.algorithm.schedule();
    let want_static = config.output.comparators.contains(&ComparatorChoice::Static);

    let mut metrics = Vec::new();
    let mut static_objective = None;
    for t in config.checkpoints() {
        let v = variation[t - 1];
        let bounds = theoretical_bounds(
            &sim.constants,
            &schedule,
            &BoundInputs {
                slater_margin: eps,
                ..BoundInputs::new(t, v)
            },
        )
        .map_err(ExperimentError::engine("bounds"))?;
        let (static_regret, static_regret_bound) = if want_static {
            let sol = static_optimum(inst, t, &opts)
                .map_err(ExperimentError::engine(format!("static optimum over {t} rounds")))?;
            let fixed = ComparatorSequence::constant(ComparatorKind::StaticOptimal, sol.points.clone(), t);
            fixed
                .check_feasible(inst)
                .map_err(ExperimentError::engine("static comparator"))?;
            let mut best = 0.0;
            for k in 1..=t {
                best += global_objective(inst, k, &sol.points)
                    .map_err(ExperimentError::engine("objective"))?;
            }
            let spent: f64 = objective[..t].iter().sum();
            let inputs = if matches!(sim.mapping, DynamicMapping::Identity) {
                BoundInputs::static_comparator(t)
            } else {
                let vs = variation_increments(&fixed.points, &sim.mapping)
                    .map_err(ExperimentError::engine("variation"))?
                    .iter()
                    .sum();
                BoundInputs::new(t, vs)
            };
            let bound = theoretical_bounds(
                &sim.constants,
                &schedule,
                &BoundInputs {
                    slater_margin: eps,
                    ..inputs
                },
            )
            .map_err(ExperimentError::engine("bounds"))?;
            static_objective = Some(best);
            (Some(spent - best), Some(bound.regret))
        } else {
            (None, None)
        };
        metrics.push(MetricsRow {
            t,
            dynamic_regret: cumulative_regret[t - 1],
            violation: cumulative_violation[t - 1],
            static_regret,
            regret_bound: bounds.regret,
            violation_bound: bounds.violation,
            static_regret_bound,
        });
    }

    let summary = Summary {
        config: config.clone(),
        constants: sim.constants,
        run: RunSummary {
            rounds: horizon,
            agents: inst.agents(),
            invariant_violations: sim.trace.violations.len(),
            dual_bound_ratio: sim.trace.dual_bound_ratio(sim.constants.f),
            graph_window: sim.graphs.window(),
            graph_weight_floor: sim.graphs.weight_floor(),
            slater_margin: eps,
        },
        comparator: ComparatorSummary {
            reference_rounds,
            oracle_rounds,
            max_stationarity_residual: worst_residual,
            variation: variation[horizon - 1],
            identity_variation: identity_variation[horizon - 1],
            static_objective,
        },
        last: *metrics.last().expect("the horizon is a checkpoint"),
    };
    Ok(RunResult {
        dynamic_comparator: comparator.points,
        objective,
        comparator_objective,
        constraint_sums,
        cumulative_regret,
        cumulative_violation,
        metrics,
        summary,
        simulation: sim,
    })
}

impl RunResult {
    pub fn metrics_csv(&self) -> String {
        let cfg = &self.summary.config;
        let dynamic = cfg.output.comparators.contains(&ComparatorChoice::Dynamic);
        let stat = cfg.output.comparators.contains(&ComparatorChoice::Static);
        let mut cols = vec!["t"];
        if dynamic {
            cols.extend(["reg_dyn", "reg_dyn_per_t"]);
        }
        if stat {
            cols.extend(["reg_static", "reg_static_per_t"]);
        }
        cols.extend(["violation", "violation_per_t"]);
        if dynamic {
            cols.push("reg_dyn_bound");
        }
        if stat {
            cols.push("reg_static_bound");
        }
        cols.push("violation_bound");
        let mut out = cols.join(",");
        out.push('\n');
        for r in &self.metrics {
            let t = r.t as f64;
            let mut fields = vec![r.t.to_string()];
            let mut push = |v: f64| fields.push(format!("{v:?}"));
            if dynamic {
                push(r.dynamic_regret);
                push(r.dynamic_regret / t);
            }
            if let Some(s) = r.static_regret {
                push(s);
                push(s / t);
            }
            push(r.violation);
            push(r.violation / t);
            if dynamic {
                push(r.regret_bound);
            }
            if let Some(b) = r.static_regret_bound {
                push(b);
            }
            push(r.violation_bound);
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn series_csv(&self) -> String {
        let m = self.simulation.instance.constraints();
        let mut out = String::from("t,objective,comparator_objective");
        for k in 1..=m {
            let _ = write!(out, ",g_{k}");
        }
        out.push_str(",reg_dyn,violation\n");
        for t in 1..=self.objective.len() {
            let _ = write!(
                out,
                "{t},{:?},{:?}",
                self.objective[t - 1],
                self.comparator_objective[t - 1]
            );
            for v in &self.constraint_sums[t - 1] {
                let _ = write!(out, ",{v:?}");
            }
            let _ = writeln!(
                out,
                ",{:?},{:?}",
                self.cumulative_regret[t - 1],
                self.cumulative_violation[t - 1]
            );
        }
        out
    }

    pub fn summary_toml(&self) -> String {
        toml::to_string(&self.summary).expect("summaries always serialize")
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, ExperimentError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| ExperimentError::io(&path, e))?;
    Ok(path)
}

/// Writes the output files of a run into `dir` and returns their paths.
pub fn write_outputs(result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let sim = &result.simulation;
    let instance_path = dir.join("instance.trace");
    save_trace(&sim.instance, &instance_path).map_err(|e| match e {
        crate::problem::TraceError::Io(source) => ExperimentError::io(&instance_path, source),
        other => ExperimentError::Replay(other.to_string()),
    })?;
    Ok(vec![
        write(dir, "config.toml", &result.summary.config.to_toml())?,
        instance_path,
        write(dir, "graphs.txt", &sim.graphs.to_text())?,
        write(dir, "rounds.csv", &rounds_csv(&sim.trace))?,
        write(dir, "series.csv", &result.series_csv())?,
        write(dir, "metrics.csv", &result.metrics_csv())?,
        write(dir, "summary.toml", &result.summary_toml())?,
    ])
}

/// [`execute`] followed by [`write_outputs`] into the configured directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunResult, ExperimentError> {
    let result = execute(config)?;
    write_outputs(&result, &config.output.dir)?;
    Ok(result)
}
