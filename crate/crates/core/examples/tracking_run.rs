//! Run the algorithm on a tracking instance and print regret and violation
//! at a few checkpoints.
//!
//!     cargo run --release --example tracking_run

use pdmd::algorithm::{run, DynamicMapping, RunOptions, StepsizeSchedule};
use pdmd::geometry::BregmanGeometry;
use pdmd::metrics::{constraint_violation, estimate_constants, regret, ComparatorKind, ComparatorSequence};
use pdmd::network::generate_graph_sequence;
use pdmd::problem::{generate_instance, TrackingParams};
use pdmd::OnlineProblem;

fn main() -> pdmd::Result<()> {
    let params = TrackingParams {
        horizon: 1000,
        seed: 1,
        ..TrackingParams::default()
    };
    let inst = generate_instance(&params)?;
    let graphs = generate_graph_sequence(params.agents, 0.2, params.horizon, params.seed)?;
    let geoms: Vec<_> = (0..params.agents)
        .map(|i| BregmanGeometry::scaled_euclidean(10.0, inst.domain(i).clone()))
        .collect::<pdmd::Result<_>>()?;
    let constants = estimate_constants(&inst, &geoms, &graphs)?;
    let mapping = DynamicMapping::true_dynamics(&inst)?;
    let trace = run(
        &inst,
        &graphs,
        &StepsizeSchedule::StronglyConvex { kappa: 0.5 },
        &mapping,
        &geoms,
        &RunOptions {
            dual_bound: Some(constants.f),
            ..RunOptions::default()
        },
    )?;

    let decisions: Vec<_> = (1..=params.horizon).map(|t| trace.decisions(t)).collect();
    let optimum: Vec<_> = (1..=params.horizon).map(|t| inst.reference_optimum(t).unwrap()).collect();
    println!("{:>6} {:>12} {:>12}", "T", "Reg/T", "Viol/T");
    for t in [10, 100, 500, 1000] {
        let comp = ComparatorSequence {
            kind: ComparatorKind::Reference,
            points: optimum[..t].to_vec(),
        };
        let reg = regret(&inst, &decisions[..t].to_vec(), &comp)?;
        let vio = constraint_violation(&inst, &decisions[..t].to_vec())?;
        println!("{t:>6} {:>12.4} {:>12.5}", reg / t as f64, vio / t as f64);
    }
    println!("invariant violations: {}", trace.violations.len());
    Ok(())
}
