//! Saving a transfer matrix and analyzing the reloaded copy.

use std::f64::consts::PI;

use ulam_stability::io::{load_matrix, report_kv, save_matrix};
use ulam_stability::prelude::*;

fn main() -> Result<()> {
    let map = builtin_pendulum(0.5, 3, 0.1)?;
    let partition = Partition::new(Domain::symmetric_box(&[PI, PI], &[true, true])?, vec![24, 24])?;
    let tm = TransferMatrix::build(&map, &partition, 50, 9, SinkPolicy::SinkUnstable)?;

    let dir = std::env::temp_dir().join("ulam_roundtrip");
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    let manifest = save_matrix(&tm, &dir, "pendulum", "pendulum alpha=0.5 Q=3")?;
    let (loaded, meta) = load_matrix(&manifest)?;
    assert_eq!(loaded.combined(), tm.combined());
    println!("reloaded {} ({} atoms, seed {})", manifest.display(), meta.atom_files.len(), meta.seed);

    let x0 = partition.attractor_cells(&map.equilibrium, 0.0)?;
    let a = report_kv(&analyze(&tm, &x0, &AnalysisOptions::default())?);
    let b = report_kv(&analyze(&loaded, &x0, &AnalysisOptions::default())?);
    assert_eq!(a, b);
    print!("{b}");
    Ok(())
}
