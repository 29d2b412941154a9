//! Dynamic and static comparators on a small problem with a coupled budget.
//!
//!     cargo run --release --example comparators

use ndarray::array;
use pdmd::geometry::{Domain, RegularizerSpec};
use pdmd::metrics::{dynamic_optimum, static_optimum, OracleOptions};
use pdmd::problem::{global_objective, QuadraticAffineProblem, QuadraticTerm};

fn main() -> pdmd::Result<()> {
    // two agents share x1 + x2 <= 2 while their targets drift apart
    let terms = (0..6)
        .map(|k| {
            let drift = k as f64 * 0.3;
            vec![
                QuadraticTerm {
                    curvature: 1.0,
                    center: array![1.0 + drift],
                    linear: array![0.0],
                    constraint_matrix: array![[1.0]],
                    offset: array![1.0],
                },
                QuadraticTerm {
                    curvature: 1.0,
                    center: array![2.0 - drift],
                    linear: array![0.0],
                    constraint_matrix: array![[1.0]],
                    offset: array![1.0],
                },
            ]
        })
        .collect();
    let p = QuadraticAffineProblem::new(
        vec![Domain::cube(1, 0.0, 3.0)?; 2],
        1,
        vec![RegularizerSpec::ZERO; 2],
        terms,
    )?;
    let opts = OracleOptions::default();
    let stat = static_optimum(&p, 6, &opts)?;
    let (mut dyn_total, mut stat_total) = (0.0, 0.0);
    for t in 1..=6 {
        let d = dynamic_optimum(&p, t, &opts)?;
        dyn_total += global_objective(&p, t, &d.points)?;
        stat_total += global_objective(&p, t, &stat.points)?;
        println!("t={t}: dynamic ({:.3}, {:.3})", d.points[0][0], d.points[1][0]);
    }
    println!("static ({:.3}, {:.3})", stat.points[0][0], stat.points[1][0]);
    println!("total cost: dynamic {dyn_total:.4}, static {stat_total:.4}");
    Ok(())
}
