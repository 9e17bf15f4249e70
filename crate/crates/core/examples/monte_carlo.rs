//! Monte Carlo cross-check of a certificate.

use std::f64::consts::PI;

use ulam_stability::prelude::*;

fn main() -> Result<()> {
    let map = builtin_pendulum(0.5, 5, 0.1)?;
    let domain = Domain::symmetric_box(&[PI, PI], &[true, true])?;
    let cfg = McConfig {
        n_init: 500,
        seed: 3,
        ..McConfig::default()
    };
    let est = estimate_unstable_fraction(&map, &domain, &cfg)?;
    println!(
        "unstable fraction {:.4} +/- {:.4} ({} of {}, horizon {})",
        est.fraction, est.half_width, est.unstable, est.total, est.horizon
    );
    Ok(())
}
