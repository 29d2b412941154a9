//! Knowing the target dynamics against assuming a static target, averaged
//! over seeds.
//!
//!     cargo run --release --example phi_comparison

use pdmd::experiment::{execute, MappingKind};
use pdmd::ExperimentConfig;

const CONFIG: &str = r#"
[instance]
horizon = 1000

[algorithm]
schedule = "strongly-convex"
kappa = 0.5
"#;

fn main() -> Result<(), pdmd::ExperimentError> {
    let base = ExperimentConfig::from_toml_str(CONFIG)?;
    for mapping in [MappingKind::TrueDynamics, MappingKind::Identity] {
        let (mut reg, mut vio) = (0.0, 0.0);
        for seed in 1..=5 {
            let mut config = base.clone();
            config.algorithm.mapping = mapping;
            config.instance.seed = seed;
            let last = execute(&config)?.summary.last;
            reg += last.dynamic_regret / 5000.0;
            vio += last.violation / 5000.0;
        }
        println!("{mapping:?}: Reg/T {reg:.3}  Viol/T {vio:.4}");
    }
    Ok(())
}
