//! Handling the elastic net through the mirror step against folding it into
//! the loss.
//!
//!     cargo run --release --example regularization_cases

use pdmd::experiment::execute;
use pdmd::problem::RegularizationPlacement;
use pdmd::ExperimentConfig;

fn main() -> Result<(), pdmd::ExperimentError> {
    let base = ExperimentConfig::from_toml_str(
        "[instance]\nhorizon = 1000\n[algorithm]\nschedule = \"strongly-convex\"\nkappa = 0.5\n",
    )?;
    for placement in [RegularizationPlacement::Explicit, RegularizationPlacement::Folded] {
        let mut config = base.clone();
        config.algorithm.placement = placement;
        let r = execute(&config)?;
        let t = r.summary.last.t as f64;
        println!(
            "{placement:?}: Reg/T {:.3}  Viol/T {:.4}",
            r.summary.last.dynamic_regret / t,
            r.summary.last.violation / t
        );
    }
    Ok(())
}
