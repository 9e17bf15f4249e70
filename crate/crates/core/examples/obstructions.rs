//! Closed classes of cells block every certificate.
//!
//! A rotation of the circle has no attracting equilibrium: the cells away
//! from the fixed cell form closed cycles, which the graph test reports.

use ulam_stability::prelude::*;

fn main() -> Result<()> {
    let partition = Partition::new(Domain::new(vec![0.0], vec![1.0], vec![true])?, vec![12])?;
    let rotation = StochasticMap::new("rotation", 1, NoiseAtoms::deterministic(1), vec![0.0], |x, _, out| {
        out[0] = if x[0] == 0.0 { 0.0 } else { x[0] + 0.25 };
    })?;
    let tm = TransferMatrix::build(&rotation, &partition, 20, 1, SinkPolicy::SinkUnstable)?;
    let report = analyze(&tm, &CellSet::single(0), &AnalysisOptions::default())?;
    println!("certified: {}", report.is_certified());
    for (k, set) in report.obstructions.iter().enumerate() {
        println!("closed class {k}: cells {:?}", set.as_slice());
    }
    Ok(())
}
