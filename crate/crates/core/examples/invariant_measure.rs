//! Invariant measures of the pendulum transfer matrix.
//!
//! With the attractor cell absorbing, all mass ends at the origin. The raw
//! Ulam matrix spreads it over the cells around the origin instead.

use std::f64::consts::PI;

use ulam_stability::prelude::*;

fn main() -> Result<()> {
    let map = builtin_pendulum(0.5, 5, 0.1)?;
    let partition = Partition::new(Domain::symmetric_box(&[PI, PI], &[true, true])?, vec![50, 50])?;
    let tm = TransferMatrix::build(&map, &partition, 100, 1, SinkPolicy::SinkUnstable)?;
    let x0 = partition.attractor_cells(&map.equilibrium, 0.0)?;

    for (label, p) in [
        ("attractor absorbing", tm.attractor_absorbing(&x0)?),
        ("raw", tm.cell_matrix()),
    ] {
        let inv = invariant_measure(&p, 1e-13, 200_000)?;
        let v = &inv.measure.values;
        let origin: f64 = x0.iter().map(|c| v[c]).sum();
        println!(
            "{label:>20}: origin mass {origin:.6}, support {} cells, converged {}",
            support(v, SUPPORT_TOL).len(),
            inv.converged
        );
    }
    Ok(())
}
