//! Generate a time-varying graph sequence and check it.
//!
//!     cargo run --example graph_sequence -- [agents] [connect-probability]

use pdmd::network::{check_assumption1, generate_graph_sequence, mix_duals};

fn main() -> pdmd::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(8, |s| s.parse().expect("agents"));
    let rho: f64 = args.next().map_or(0.2, |s| s.parse().expect("probability"));

    let seq = generate_graph_sequence(n, rho, 50, 7)?;
    let report = check_assumption1(&seq, seq.window(), 1.0 / n as f64);
    println!("{n} agents, {} rounds, weight floor {:.4}", seq.len(), seq.weight_floor());
    println!("checks passed: {}", report.passed());
    println!("edges in round 0: {:?}", seq.edges(0));
    println!("{:.3}", seq.weights(0));

    // repeated mixing drives a spike toward the average
    let mut q: Vec<_> = (0..n).map(|i| ndarray::array![if i == 0 { n as f64 } else { 0.0 }]).collect();
    for k in 0..seq.len() {
        q = mix_duals(seq.weights(k), &q)?;
    }
    let spread = q.iter().map(|v| v[0]).fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    println!("after {} mixes the largest deviation from the average is {spread:.2e}", seq.len());
    Ok(())
}
