//! Lyapunov-measure certificate for the noisy damped pendulum.
//!
//! Run with `cargo run --release --example pendulum_certificate -- 0.5`.

use std::f64::consts::PI;

use ulam_stability::io::report_text;
use ulam_stability::prelude::*;

fn main() -> Result<()> {
    let alpha: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("noise half-width"))
        .unwrap_or(0.5);

    let map = builtin_pendulum(alpha, 5, 0.1)?;
    let domain = Domain::symmetric_box(&[PI, PI], &[true, true])?;
    let partition = Partition::new(domain, vec![50, 50])?;
    let tm = TransferMatrix::build(&map, &partition, 100, 1, SinkPolicy::SinkUnstable)?;
    let x0 = partition.attractor_cells(&map.equilibrium, 0.0)?;

    let report = analyze(&tm, &x0, &AnalysisOptions::default())?;
    println!("pendulum, noise on [-{alpha}, {alpha}]");
    print!("{}", report_text(&report, &partition));

    // The same certificate from the linear-solve route.
    let opts = AnalysisOptions {
        method: LyapunovMethod::Solve,
        lyapunov_function: false,
        ..AnalysisOptions::default()
    };
    let solved = analyze(&tm, &x0, &opts)?;
    println!("linear solve certifies: {}", solved.is_certified());
    Ok(())
}
