//! One mirror step under both geometries, with and without the regularizer.
//!
//!     cargo run --example mirror_step

use ndarray::array;
use pdmd::geometry::{BregmanGeometry, Domain, RegularizerSpec};

fn main() -> pdmd::Result<()> {
    let x = array![1.0, 2.0, 0.5];
    let a = array![4.0, -3.0, 0.5];
    let alpha = 0.5;

    let euclid = BregmanGeometry::scaled_euclidean(1.0, Domain::cube(3, 0.0, 3.0)?)?;
    for reg in [RegularizerSpec::ZERO, RegularizerSpec::new(1.0, 0.5)?] {
        let step = euclid.mirror_step(x.view(), a.view(), &reg, alpha)?;
        let check = euclid.mirror_step_iterative(x.view(), a.view(), &reg, alpha)?;
        println!("euclidean l1={} l2={}: {step}  (inner solver {:.3})", reg.l1, reg.l2, check.point);
    }

    let p = array![0.2, 0.5, 0.3];
    let kl = BregmanGeometry::kl_simplex(3)?;
    for reg in [RegularizerSpec::ZERO, RegularizerSpec::new(0.0, 2.0)?] {
        let step = kl.mirror_step(p.view(), a.view(), &reg, alpha)?;
        println!(
            "kl l2={}: {step:.4}  divergence from start {:.4}",
            reg.l2,
            kl.divergence(step.view(), p.view())?
        );
    }
    Ok(())
}
