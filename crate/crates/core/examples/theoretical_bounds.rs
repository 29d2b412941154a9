//! Estimate the problem constants and print the bound for each step-size
//! regime next to the measured values.
//!
//!     cargo run --release --example theoretical_bounds

use pdmd::algorithm::StepsizeSchedule;
use pdmd::geometry::BregmanGeometry;
use pdmd::metrics::{estimate_constants, theoretical_bounds, BoundInputs};
use pdmd::network::generate_graph_sequence;
use pdmd::problem::{generate_instance, TargetDynamics, TrackingParams};
use pdmd::OnlineProblem;

fn main() -> pdmd::Result<()> {
    let params = TrackingParams {
        horizon: 1000,
        slack: 0.5,
        dynamics: TargetDynamics::Frozen,
        ..TrackingParams::default()
    };
    let inst = generate_instance(&params)?;
    let graphs = generate_graph_sequence(params.agents, 0.2, params.horizon, 0)?;
    let geoms: Vec<_> = (0..params.agents)
        .map(|i| BregmanGeometry::scaled_euclidean(10.0, inst.domain(i).clone()))
        .collect::<pdmd::Result<_>>()?;
    let k = estimate_constants(&inst, &geoms, &graphs)?;
    println!("F = {:.3}  G = {:.3}  K = {:.3}  d(X) = {:.3}  sigma = {}", k.f, k.g, k.k, k.diameter, k.sigma_min);

    // the frozen target has no variation; the margin is n * slack
    let inputs = BoundInputs {
        slater_margin: Some(params.slack * params.agents as f64),
        ..BoundInputs::new(params.horizon, 0.0)
    };
    for schedule in [
        StepsizeSchedule::General { c: 0.5, kappa: 0.5 },
        StepsizeSchedule::Slater { kappa: 0.5 },
        StepsizeSchedule::StronglyConvex { kappa: 0.5 },
    ] {
        let b = theoretical_bounds(&k, &schedule, &inputs)?;
        println!("{schedule:?}: regret <= {:.3e}, violation <= {:.3e}", b.regret, b.violation);
    }
    Ok(())
}
