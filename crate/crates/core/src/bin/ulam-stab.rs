//! Command-line driver.
//!
//! Exit codes: 0 success or certified, 3 not certified, 2 configuration
//! error, 1 any other failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::info;

use ulam_stability::config::RunConfig;
use ulam_stability::io::{
    export_heatmap, export_measure_csv, fmt_f64, load_matrix, load_measure_csv, report_kv,
    report_text, save_matrix, write_text, CellMeasure,
};
use ulam_stability::partition::{Location, Partition};
use ulam_stability::simulate::estimate_unstable_fraction;
use ulam_stability::stability::{analyze, invariant_measure, support, MeasureVector, Normalization, SUPPORT_TOL};
use ulam_stability::transfer::TransferMatrix;
use ulam_stability::Error;

#[derive(Parser, Debug)]
#[command(name = "ulam-stab", version, about = "Lyapunov-measure stability analysis of stochastic maps on a box grid")]
struct Cli {
    /// Run configuration (TOML). Defaults are documented in the config module.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `grid.seed` (and the simulation seed when unset).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Lyapunov measure construction: series or solve.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Series weight (series, >= 1) or contraction factor (solve, <= 1).
    #[arg(long, global = true)]
    alpha_weight: Option<f64>,
    /// Log10 scale for heatmaps.
    #[arg(long, global = true)]
    log_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build and save the transfer matrix and its manifest.
    Build,
    /// Search for a Lyapunov measure; exit 0 if certified, 3 if not.
    Analyze {
        /// Saved manifest to analyze instead of building from --config.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Invariant measure with the attractor cells made absorbing.
    Invariant {
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Use the unmodified cell matrix instead.
        #[arg(long)]
        raw: bool,
    },
    /// Monte Carlo estimate of the non-convergent fraction of initial states.
    Simulate,
    /// Re-export a measure CSV as a PGM heatmap.
    Export {
        /// Linear-scale measure CSV written by analyze or invariant.
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Defaults to the measure path with a .pgm extension.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match &cli.command {
        Command::Build => cmd_build(cli),
        Command::Analyze { matrix } => cmd_analyze(cli, matrix.as_deref()),
        Command::Invariant { matrix, raw } => cmd_invariant(cli, matrix.as_deref(), *raw),
        Command::Simulate => cmd_simulate(cli),
        Command::Export { measure, matrix, output } => {
            cmd_export(cli, measure, matrix.as_deref(), output.as_deref())
        }
    }
}

/// Parses `text` and applies the command-line overrides.
fn config_from_text(cli: &Cli, text: &str) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::from_toml_str(text)?;
    if let Some(seed) = cli.seed {
        cfg.grid.seed = seed;
    }
    if let Some(m) = &cli.method {
        cfg.analysis.method = m.clone();
    }
    if let Some(a) = cli.alpha_weight {
        cfg.analysis.alpha_weight = a;
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_config(cli: &Cli) -> Result<(RunConfig, String), Failure> {
    let Some(path) = &cli.config else {
        return Err(Failure::Config("--config is required".into()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok((config_from_text(cli, &text)?, text))
}

/// The transfer matrix of a saved manifest, or a fresh build from --config.
fn obtain_matrix(cli: &Cli, matrix: Option<&Path>) -> Result<(RunConfig, TransferMatrix), Failure> {
    match matrix {
        Some(path) => {
            let (tm, manifest) = load_matrix(path)?;
            let cfg = match &cli.config {
                Some(_) => load_config(cli)?.0,
                None => config_from_text(cli, &manifest.system)?,
            };
            Ok((cfg, tm))
        }
        None => {
            let (cfg, _) = load_config(cli)?;
            let tm = build(&cfg)?;
            Ok((cfg, tm))
        }
    }
}

fn build(cfg: &RunConfig) -> Result<TransferMatrix, Failure> {
    let map = cfg.map()?;
    let partition = cfg.partition()?;
    let start = Instant::now();
    let tm = TransferMatrix::build(&map, &partition, cfg.samples()?, cfg.grid.seed, cfg.sink_policy()?)?;
    info!("built {} cells x {} atoms in {:.2?}", tm.len(), tm.noise().len(), start.elapsed());
    Ok(tm)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn cmd_build(cli: &Cli) -> Outcome {
    let (cfg, text) = load_config(cli)?;
    let tm = build(&cfg)?;
    let dir = out_dir(&cfg)?;
    // record the effective config, overrides included
    let recorded = if cli.seed.is_some() || cli.method.is_some() || cli.alpha_weight.is_some() || cli.out.is_some() {
        cfg.to_toml()
    } else {
        text
    };
    let manifest = save_matrix(&tm, &dir, &cfg.output.stem, &recorded)?;
    let worst = tm
        .per_atom()
        .iter()
        .flat_map(|m| m.row_sums())
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max);
    println!("cells: {}  atoms: {}  samples/cell: {}", tm.len(), tm.noise().len(), tm.samples());
    println!("max |row sum - 1|: {:.3e}", worst);
    println!("escaped mass per step: {}", fmt_f64(tm.escaped_mass()));
    println!("manifest: {}", manifest.display());
    Ok(0)
}

fn write_measure(cfg: &RunConfig, partition: &Partition, m: &CellMeasure, stem: &str, log_scale: bool) -> Result<(), Failure> {
    let dir = out_dir(cfg)?;
    let csv = dir.join(format!("{stem}.csv"));
    export_measure_csv(m, partition, &csv, false)?;
    if partition.dim() == 2 {
        export_heatmap(m, partition, &dir.join(format!("{stem}.pgm")), log_scale)?;
    }
    Ok(())
}

fn cmd_analyze(cli: &Cli, matrix: Option<&Path>) -> Outcome {
    let (cfg, tm) = obtain_matrix(cli, matrix)?;
    let part = tm.partition().clone();
    let x0 = cfg.x0(&part)?;
    let report = analyze(&tm, &x0, &cfg.analysis_options()?)?;
    let dir = out_dir(&cfg)?;
    let text = report_text(&report, &part);
    print!("{text}");
    write_text(&dir.join("report.txt"), &text)?;
    write_text(&dir.join("report.kv"), &report_kv(&report))?;
    if let Some(c) = &report.certificate {
        let m = CellMeasure::over(report.x1.as_slice(), c.mu_bar.clone());
        write_measure(&cfg, &part, &m, "lyapunov_measure", cli.log_scale)?;
    }
    if let Some(v) = &report.lyapunov_function {
        let m = CellMeasure::over(
            report.x1.as_slice(),
            MeasureVector { values: v.values.clone(), normalization: Normalization::Raw },
        );
        write_measure(&cfg, &part, &m, "lyapunov_function", cli.log_scale)?;
    }
    Ok(if report.is_certified() { 0 } else { 3 })
}

fn cmd_invariant(cli: &Cli, matrix: Option<&Path>, raw: bool) -> Outcome {
    let (cfg, tm) = obtain_matrix(cli, matrix)?;
    let part = tm.partition().clone();
    let x0 = cfg.x0(&part)?;
    let p = if raw { tm.cell_matrix() } else { tm.attractor_absorbing(&x0)? };
    let inv = invariant_measure(&p, 1e-13, 200_000)?;
    let values = &inv.measure.values;
    let origin = match part.locate(&cfg.equilibrium()?)? {
        Location::Cell(c) => values[c],
        Location::Outside => 0.0,
    };
    let x0_mass: f64 = x0.iter().map(|c| values[c]).sum();
    let supp = support(values, SUPPORT_TOL);
    let mut out = String::new();
    let _ = writeln!(out, "matrix: {}", if raw { "raw" } else { "attractor absorbing" });
    let _ = writeln!(out, "converged: {} after {} iterations (residual {:.3e})", inv.converged, inv.iterations, inv.residual);
    let _ = writeln!(out, "origin cell mass: {}", fmt_f64(origin));
    let _ = writeln!(out, "attractor cells mass: {}", fmt_f64(x0_mass));
    let _ = writeln!(out, "support (mass > {SUPPORT_TOL:e}): {} cells", supp.len());
    print!("{out}");
    write_measure(&cfg, &part, &CellMeasure::full(inv.measure.clone()), "invariant_measure", cli.log_scale)?;
    Ok(0)
}

fn cmd_simulate(cli: &Cli) -> Outcome {
    let (cfg, _) = load_config(cli)?;
    let map = cfg.map()?;
    let mut mc = cfg.mc_config()?;
    if let Some(seed) = cli.seed {
        mc.seed = cfg.simulate.seed.unwrap_or(seed);
    }
    let domain = cfg.domain()?;
    let est = estimate_unstable_fraction(&map, &domain, &mc)?;
    println!(
        "unstable fraction: {} +/- {} ({} of {} initial states, horizon {} steps)",
        fmt_f64(est.fraction),
        fmt_f64(est.half_width),
        est.unstable,
        est.total,
        est.horizon
    );
    if est.non_finite_paths > 0 {
        println!("non-finite paths: {}", est.non_finite_paths);
    }
    let mut csv = String::new();
    for i in 0..domain.dim() {
        let _ = write!(csv, "x{i},");
    }
    csv.push_str("converged_fraction,unstable\n");
    for v in &est.verdicts {
        for x in &v.x {
            let _ = write!(csv, "{},", fmt_f64(*x));
        }
        let _ = writeln!(csv, "{},{}", fmt_f64(v.converged_fraction), v.unstable);
    }
    write_text(&out_dir(&cfg)?.join("simulate.csv"), &csv)?;
    Ok(0)
}

fn cmd_export(cli: &Cli, measure: &Path, matrix: Option<&Path>, output: Option<&Path>) -> Outcome {
    let partition = match matrix {
        Some(path) => load_matrix(path)?.0.partition().clone(),
        None => load_config(cli)?.0.partition()?,
    };
    let m = load_measure_csv(measure)?;
    if let Some(&bad) = m.cells.iter().find(|&&c| c >= partition.len()) {
        return Err(Failure::Runtime(format!(
            "{}: cell {bad} is outside the {}-cell partition",
            measure.display(),
            partition.len()
        )));
    }
    let target = output.map_or_else(|| measure.with_extension("pgm"), Path::to_path_buf);
    export_heatmap(&m, &partition, &target, cli.log_scale)?;
    println!("wrote {}", target.display());
    Ok(0)
}
