//! On-disk formats: Matrix Market matrices with a TOML manifest, measure
//! CSVs, PGM heatmaps and key=value stability reports.
//!
//! Floating-point values are printed in Rust's shortest round-trip form, so
//! every saved matrix and measure reloads bit-for-bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{Domain, Partition};
use crate::sparse::CsrMatrix;
use crate::stability::{MeasureVector, Normalization, StabilityReport};
use crate::system::NoiseAtoms;
use crate::transfer::{SinkPolicy, TransferMatrix};

/// Row sums may deviate from 1 by this much on load.
pub const LOAD_ROW_TOL: f64 = 1e-9;

const MTX_HEADER: &str = "%%MatrixMarket matrix coordinate real general";

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Matrix Market coordinate text (1-based indices, row-major order).
pub fn matrix_market_string(m: &CsrMatrix, comments: &[String]) -> String {
    let mut out = String::with_capacity(32 * m.nnz() + 128);
    out.push_str(MTX_HEADER);
    out.push('\n');
    for c in comments {
        let _ = writeln!(out, "% {c}");
    }
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.nnz());
    for (i, j, v) in m.triplets() {
        let _ = writeln!(out, "{} {} {}", i + 1, j + 1, fmt_f64(v));
    }
    out
}

pub fn write_matrix_market(path: &Path, m: &CsrMatrix, comments: &[String]) -> Result<()> {
    write_file(path, matrix_market_string(m, comments).as_bytes())
}

pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix> {
    let text = read_file(path)?;
    parse_matrix_market(&text).map_err(|m| format_err(path, m))
}

fn parse_matrix_market(text: &str) -> std::result::Result<CsrMatrix, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim().eq_ignore_ascii_case(MTX_HEADER) => {}
        _ => return Err(format!("missing header `{MTX_HEADER}`")),
    }
    let mut lines = lines.filter(|(_, l)| !l.starts_with('%') && !l.trim().is_empty());
    let (lineno, size) = lines.next().ok_or("missing size line")?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("line {}: bad size line: {e}", lineno + 1))?;
    let [nrows, ncols, nnz] = dims[..] else {
        return Err(format!("line {}: size line needs 3 integers", lineno + 1));
    };
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
    let mut seen = 0;
    for (lineno, line) in lines {
        let mut parts = line.split_whitespace();
        let (Some(i), Some(j), Some(v), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(format!("line {}: expected `row col value`", lineno + 1));
        };
        let bad = |what: &str| format!("line {}: bad {what}", lineno + 1);
        let i: usize = i.parse().map_err(|_| bad("row index"))?;
        let j: usize = j.parse().map_err(|_| bad("column index"))?;
        let v: f64 = v.parse().map_err(|_| bad("value"))?;
        if i == 0 || i > nrows || j == 0 || j > ncols {
            return Err(format!("line {}: entry ({i}, {j}) out of range", lineno + 1));
        }
        rows[i - 1].push((j - 1, v));
        seen += 1;
    }
    if seen != nnz {
        return Err(format!("header promises {nnz} entries, found {seen}"));
    }
    CsrMatrix::from_rows(ncols, rows).map_err(|e| e.to_string())
}

fn check_stochastic(path: &Path, m: &CsrMatrix) -> Result<()> {
    for i in 0..m.nrows() {
        if m.row(i).any(|(_, v)| !(0.0..=1.0).contains(&v)) {
            return Err(format_err(path, format!("row {i} has an entry outside [0, 1]")));
        }
        let sum = m.row_sum(i);
        if (sum - 1.0).abs() > LOAD_ROW_TOL {
            return Err(Error::RowSum {
                path: path.to_path_buf(),
                row: i,
                sum,
            });
        }
    }
    Ok(())
}

/// Grid and noise description stored next to a saved matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Free-form system description; for CLI runs, the run config verbatim.
    pub system: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub wrap: Vec<bool>,
    pub counts: Vec<usize>,
    pub noise_values: Vec<Vec<f64>>,
    pub noise_probs: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub sink_policy: String,
    /// Matrix files relative to the manifest: combined, then one per atom.
    pub combined_file: String,
    pub atom_files: Vec<String>,
}

impl RunManifest {
    pub fn partition(&self) -> Result<Partition> {
        let domain = Domain::new(self.lower.clone(), self.upper.clone(), self.wrap.clone())?;
        Partition::new(domain, self.counts.clone())
    }

    pub fn noise(&self) -> Result<NoiseAtoms> {
        NoiseAtoms::new(self.noise_values.clone(), self.noise_probs.clone())
    }

    pub fn sink_policy(&self) -> Result<SinkPolicy> {
        self.sink_policy.parse()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest fields are TOML-representable")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        toml::from_str(&text).map_err(|e| format_err(path, e.to_string()))
    }
}

/// File layout of a saved matrix named `stem` in `dir`.
pub fn matrix_paths(dir: &Path, stem: &str, atoms: usize) -> (PathBuf, PathBuf, Vec<PathBuf>) {
    let manifest = dir.join(format!("{stem}.manifest.toml"));
    let combined = dir.join(format!("{stem}.mtx"));
    let per_atom = (0..atoms).map(|k| dir.join(format!("{stem}.atom{k}.mtx"))).collect();
    (manifest, combined, per_atom)
}

/// Writes `<stem>.mtx`, `<stem>.atom<k>.mtx` and `<stem>.manifest.toml`.
/// Returns the manifest path.
pub fn save_matrix(tm: &TransferMatrix, dir: &Path, stem: &str, system: &str) -> Result<PathBuf> {
    let (manifest_path, combined_path, atom_paths) = matrix_paths(dir, stem, tm.noise().len());
    let name = |p: &Path| p.file_name().unwrap().to_string_lossy().into_owned();
    let part = tm.partition();
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        system: system.to_string(),
        lower: part.domain().lower().to_vec(),
        upper: part.domain().upper().to_vec(),
        wrap: part.domain().wrap().to_vec(),
        counts: part.counts().to_vec(),
        noise_values: tm.noise().values().to_vec(),
        noise_probs: tm.noise().probs().to_vec(),
        samples: tm.samples(),
        seed: tm.seed(),
        sink_policy: tm.sink_policy().to_string(),
        combined_file: name(&combined_path),
        atom_files: atom_paths.iter().map(|p| name(p)).collect(),
    };
    let note = vec![format!(
        "transfer matrix: {} cells, column {} is the escape sink",
        tm.len(),
        tm.len() + 1
    )];
    write_matrix_market(&combined_path, tm.combined(), &note)?;
    for (k, (m, path)) in tm.per_atom().iter().zip(&atom_paths).enumerate() {
        let mut c = note.clone();
        c.push(format!("noise atom {k}: {:?} with probability {}", tm.noise().values()[k], tm.noise().probs()[k]));
        write_matrix_market(path, m, &c)?;
    }
    write_file(&manifest_path, manifest.to_toml().as_bytes())?;
    Ok(manifest_path)
}

/// Loads a matrix saved by [`save_matrix`], validating every row sum.
pub fn load_matrix(manifest_path: &Path) -> Result<(TransferMatrix, RunManifest)> {
    let manifest = RunManifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let partition = manifest.partition()?;
    let noise = manifest.noise()?;
    let mut per_atom = Vec::with_capacity(manifest.atom_files.len());
    for file in &manifest.atom_files {
        let path = dir.join(file);
        let m = read_matrix_market(&path)?;
        check_stochastic(&path, &m)?;
        per_atom.push(m);
    }
    let combined_path = dir.join(&manifest.combined_file);
    let combined = read_matrix_market(&combined_path)?;
    check_stochastic(&combined_path, &combined)?;
    let tm = TransferMatrix::from_parts(
        partition,
        noise,
        manifest.sink_policy()?,
        per_atom,
        manifest.samples,
        manifest.seed,
    )
    .map_err(|e| format_err(manifest_path, e.to_string()))?;
    if tm.combined() != &combined {
        return Err(format_err(
            &combined_path,
            "combined matrix disagrees with the probability-weighted per-atom matrices",
        ));
    }
    Ok((tm, manifest))
}

/// A measure attached to cells: entry `k` lives on cell `cells[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMeasure {
    pub cells: Vec<usize>,
    pub measure: MeasureVector,
}

impl CellMeasure {
    /// A measure over all cells, in cell order.
    pub fn full(measure: MeasureVector) -> Self {
        Self {
            cells: (0..measure.len()).collect(),
            measure,
        }
    }

    /// A measure over a subset of cells (e.g. `X₁`); extra trailing entries
    /// beyond `cells` (such as a sink state) are dropped.
    pub fn over(cells: &[usize], mut measure: MeasureVector) -> Self {
        measure.values.truncate(cells.len());
        Self {
            cells: cells.to_vec(),
            measure,
        }
    }

    /// Values scattered onto all `len` cells; uncovered cells are `None`.
    pub fn scatter(&self, len: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; len];
        for (&c, &v) in self.cells.iter().zip(&self.measure.values) {
            out[c] = Some(v);
        }
        out
    }
}

fn normalization_name(n: Normalization) -> &'static str {
    match n {
        Normalization::Probability => "probability",
        Normalization::Raw => "raw",
    }
}

pub fn measure_csv_string(m: &CellMeasure, partition: &Partition, log_scale: bool) -> String {
    let dim = partition.dim();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# normalization={} scale={}",
        normalization_name(m.measure.normalization),
        if log_scale { "log10" } else { "linear" }
    );
    out.push_str("cell");
    for i in 0..dim {
        let _ = write!(out, ",x{i}");
    }
    out.push_str(",value\n");
    for (&cell, &v) in m.cells.iter().zip(&m.measure.values) {
        let _ = write!(out, "{cell}");
        for c in partition.cell_center(cell) {
            let _ = write!(out, ",{}", fmt_f64(c));
        }
        let value = if log_scale {
            if v > 0.0 {
                fmt_f64(v.log10())
            } else {
                "-inf".to_string()
            }
        } else {
            fmt_f64(v)
        };
        let _ = writeln!(out, ",{value}");
    }
    out
}

pub fn export_measure_csv(m: &CellMeasure, partition: &Partition, path: &Path, log_scale: bool) -> Result<()> {
    write_file(path, measure_csv_string(m, partition, log_scale).as_bytes())
}

/// Reads a linear-scale measure CSV back.
pub fn load_measure_csv(path: &Path) -> Result<CellMeasure> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    let meta = lines.next().ok_or_else(|| format_err(path, "empty file"))?;
    if meta.contains("scale=log10") {
        return Err(format_err(path, "log-scale exports are not reloadable"));
    }
    let normalization = if meta.contains("normalization=probability") {
        Normalization::Probability
    } else {
        Normalization::Raw
    };
    lines.next().ok_or_else(|| format_err(path, "missing column header"))?;
    let mut cells = Vec::new();
    let mut values = Vec::new();
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let (Some(first), Some(last)) = (fields.first(), fields.last()) else {
            continue;
        };
        let bad = || format_err(path, format!("data row {k}: malformed `{line}`"));
        cells.push(first.parse().map_err(|_| bad())?);
        values.push(last.parse().map_err(|_| bad())?);
    }
    Ok(CellMeasure {
        cells,
        measure: MeasureVector {
            values,
            normalization,
        },
    })
}

/// Decades kept below the maximum in log-scale heatmaps.
pub const LOG_DECADES: f64 = 12.0;

/// 8-bit grayscale pixels of a 2-D measure, one per cell, min-max scaled.
/// Row 0 is the largest second coordinate; column 0 the smallest first one.
pub fn heatmap_pixels(m: &CellMeasure, partition: &Partition, log_scale: bool) -> Result<(usize, usize, Vec<u8>)> {
    if partition.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            expected: 2,
            got: partition.dim(),
        });
    }
    let (w, h) = (partition.counts()[0], partition.counts()[1]);
    let scattered = m.scatter(partition.len());
    let transform = |v: f64| -> f64 {
        if log_scale {
            if v > 0.0 {
                v.log10()
            } else {
                f64::NEG_INFINITY
            }
        } else {
            v
        }
    };
    let vals: Vec<f64> = scattered
        .iter()
        .map(|v| v.map_or(f64::NEG_INFINITY, transform))
        .collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = if log_scale { max - LOG_DECADES } else { f64::NEG_INFINITY };
    let finite_min = vals
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    let lo = if log_scale { finite_min.max(floor) } else { finite_min };
    let clamp = |v: f64| if v.is_finite() { v.max(lo) } else { lo };
    let mut pixels = vec![0u8; w * h];
    for row in 0..h {
        let j = h - 1 - row;
        for i in 0..w {
            let v = clamp(vals[partition.flat_index(&[i, j])]);
            pixels[row * w + i] = if !(max > lo) {
                128
            } else {
                (255.0 * (v - lo) / (max - lo)).round() as u8
            };
        }
    }
    Ok((w, h, pixels))
}

pub fn export_heatmap(m: &CellMeasure, partition: &Partition, path: &Path, log_scale: bool) -> Result<()> {
    let (w, h, pixels) = heatmap_pixels(m, partition, log_scale)?;
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend_from_slice(&pixels);
    write_file(path, &bytes)
}

/// Flat `key = value` document of every report number.
pub fn report_kv(report: &StabilityReport) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("certified", report.is_certified().to_string());
    kv("transient", report.transient.to_string());
    kv("method", report.method.to_string());
    kv("rho_estimate", fmt_f64(report.rho_estimate));
    kv("rho_converged", report.rho_converged.to_string());
    kv("decay_fit.k", fmt_f64(report.decay_fit.k));
    kv("decay_fit.beta", fmt_f64(report.decay_fit.beta));
    kv("decay_fit.horizon", report.decay_fit.horizon.to_string());
    kv("escaped_mass", fmt_f64(report.escaped_mass));
    kv("x0.cells", join(report.x0.iter()));
    kv("x1.size", report.x1.len().to_string());
    kv("obstructions.count", report.obstructions.len().to_string());
    for (k, o) in report.obstructions.iter().enumerate() {
        kv(&format!("obstructions.{k}"), join(o.iter()));
    }
    if let Some(c) = &report.certificate {
        kv("certificate.gamma", fmt_f64(c.gamma));
        kv("certificate.alpha", fmt_f64(c.alpha));
        kv("certificate.residual", fmt_f64(c.residual));
        kv("certificate.terms", c.terms.to_string());
        kv("certificate.total_mass", fmt_f64(c.mu_bar.total()));
    }
    if let Some(note) = &report.certificate_note {
        kv("certificate.note", format!("{note:?}"));
    }
    if let Some(v) = &report.lyapunov_function {
        kv("lyapunov_function.contraction", fmt_f64(v.contraction));
        kv("lyapunov_function.terms", v.terms.to_string());
        kv("lyapunov_function.max", fmt_f64(v.values.iter().copied().fold(0.0, f64::max)));
    }
    out
}

fn join(it: impl Iterator<Item = usize>) -> String {
    it.map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

/// Human-readable summary.
pub fn report_text(report: &StabilityReport, partition: &Partition) -> String {
    let mut out = String::new();
    let verdict = if report.is_certified() {
        "CERTIFIED: Lyapunov measure found"
    } else {
        "NOT CERTIFIED"
    };
    let _ = writeln!(out, "{verdict}");
    let _ = writeln!(
        out,
        "  cells: {} attractor, {} analyzed",
        report.x0.len(),
        report.x1.len()
    );
    let _ = writeln!(
        out,
        "  P1 transient: {} (spectral radius ~ {:.10}{})",
        report.transient,
        report.rho_estimate,
        if report.rho_converged { "" } else { ", unconverged" }
    );
    let _ = writeln!(
        out,
        "  decay envelope: |m P1^n| ~ {:.4e} * {:.8}^n",
        report.decay_fit.k, report.decay_fit.beta
    );
    if report.escaped_mass > 0.0 {
        let _ = writeln!(out, "  escaped mass per step: {:.6e}", report.escaped_mass);
    }
    if let Some(c) = &report.certificate {
        let _ = writeln!(
            out,
            "  certificate: gamma = {}, residual = {:.4e}, {} series terms",
            c.gamma, c.residual, c.terms
        );
    }
    if let Some(note) = &report.certificate_note {
        let _ = writeln!(out, "  note: {note}");
    }
    if let Some(v) = &report.lyapunov_function {
        let _ = writeln!(out, "  Koopman Lyapunov function: P1 V <= {:.6} V", v.contraction);
    }
    for (k, o) in report.obstructions.iter().enumerate() {
        let sink = partition.len();
        let centers: Vec<String> = o
            .iter()
            .take(8)
            .map(|c| {
                if c == sink {
                    "sink".to_string()
                } else {
                    format!("{:?}", partition.cell_center(c).iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>())
                }
            })
            .collect();
        let more = if o.len() > 8 { format!(" (+{} more)", o.len() - 8) } else { String::new() };
        let _ = writeln!(out, "  obstruction {k}: {} cells at {}{more}", o.len(), centers.join(" "));
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, text.as_bytes())
}
