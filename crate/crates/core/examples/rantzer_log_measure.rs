//! Almost-everywhere stability of Rantzer's example.
//!
//! The Lyapunov measure has a density that blows up near the unstable
//! fixed point (2, 0); a log-scale heatmap shows it.

use ulam_stability::io::{export_heatmap, CellMeasure};
use ulam_stability::prelude::*;

fn main() -> Result<()> {
    let alpha = 0.25;
    let map = builtin_rantzer(alpha, 5, 0.1)?;

    for start in [[0.05, -0.05], [1.9, 0.05]] {
        let fp = refine_fixed_point(&map, &[0.0], &start, 1e-13, 50)?;
        println!("fixed point near {start:?}: {:?} (residual {:.1e})", fp.x, fp.residual);
    }

    let domain = Domain::symmetric_box(&[4.0, 4.0], &[true, false])?;
    let partition = Partition::new(domain, vec![50, 50])?;
    let tm = TransferMatrix::build(&map, &partition, 100, 1, SinkPolicy::Discard)?;
    println!("escaped mass per step: {:.3}", tm.escaped_mass());

    // The origin is a grid vertex: take the four cells that touch it.
    let x0 = partition.attractor_cells(&map.equilibrium, 0.5 * partition.cell_width(0))?;
    let report = analyze(&tm, &x0, &AnalysisOptions::default())?;
    println!("certified: {}", report.is_certified());

    if let Some(cert) = &report.certificate {
        let near = partition.locate(&[2.0 + 1e-9, 1e-9])?.cell().unwrap();
        let far = partition.locate(&[-3.0, 3.0])?.cell().unwrap();
        let k = |cell| report.x1.as_slice().binary_search(&cell).unwrap();
        println!(
            "density near (2,0): {:.3e}, near (-3,3): {:.3e}",
            cert.mu_bar.values[k(near)],
            cert.mu_bar.values[k(far)]
        );
        let path = std::env::temp_dir().join("rantzer_lyapunov.pgm");
        export_heatmap(&CellMeasure::over(report.x1.as_slice(), cert.mu_bar.clone()), &partition, &path, true)?;
        println!("log heatmap written to {}", path.display());
    }
    Ok(())
}
