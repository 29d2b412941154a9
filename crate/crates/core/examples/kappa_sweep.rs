//! Sweep the step-size exponent and print the resulting table. Outputs go to
//! a temporary directory.
//!
//!     cargo run --release --example kappa_sweep

use pdmd::experiment::{sweep, SweepParam};
use pdmd::ExperimentConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut config = ExperimentConfig::from_toml_str(
        "[instance]\nhorizon = 1000\n[algorithm]\nschedule = \"strongly-convex\"\nkappa = 0.5\n",
    )?;
    config.output.dir = dir.path().to_path_buf();
    let report = sweep(&config, SweepParam::Kappa, &[0.1, 0.3, 0.5, 0.7, 0.9])?;
    print!("{}", report.table_csv());
    Ok(())
}
