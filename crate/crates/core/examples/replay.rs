//! Write an experiment, replay it, then corrupt one row and replay again.
//!
//!     cargo run --release --example replay

use pdmd::experiment::{replay, run_experiment};
use pdmd::ExperimentConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut config = ExperimentConfig::from_toml_str(
        "[instance]\nhorizon = 200\n[algorithm]\nschedule = \"strongly-convex\"\nkappa = 0.5\n",
    )?;
    config.output.dir = dir.path().join("run");
    run_experiment(&config)?;
    let rounds = config.output.dir.join("rounds.csv");

    let report = replay(&rounds, &config)?;
    println!("clean replay: {} rows, passed {}", report.rows_checked, report.passed());

    let text = std::fs::read_to_string(&rounds)?;
    let corrupted: Vec<String> = text
        .lines()
        .map(|l| {
            if !l.starts_with("120,4,") {
                return l.to_string();
            }
            // nudge the first decision coordinate
            let mut fields: Vec<String> = l.split(',').map(String::from).collect();
            let x: f64 = fields[5].parse().unwrap();
            fields[5] = format!("{:?}", x + 1e-6);
            fields.join(",")
        })
        .collect();
    std::fs::write(&rounds, corrupted.join("\n"))?;
    let report = replay(&rounds, &config)?;
    println!("after editing round 120: {:?}", report.mismatch);
    Ok(())
}
