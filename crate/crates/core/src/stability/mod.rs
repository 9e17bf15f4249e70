//! Stability analysis of the sub-Markov block `P₁`.
//!
//! The transience verdict is exact: it comes from the closed classes of the
//! transition graph, never from a numerical spectral estimate. Certificates
//! are built numerically and then re-checked by direct multiplication.

mod graph;
mod lyapunov;
mod spectral;

use std::fmt;
use std::str::FromStr;

pub use graph::{find_closed_subpartitions, LEAK_TOL};
pub use lyapunov::{
    geometric_decay_fit, koopman_lyapunov_function, lyapunov_measure_series,
    lyapunov_measure_solve, verify_certificate, DecayFit, KoopmanLyapunov, KoopmanOutcome,
    SeriesOutcome, SolveOutcome,
};
pub use spectral::{invariant_measure, is_transient, spectral_radius, InvariantMeasure, Transience};

use crate::error::{Error, Result};
use crate::partition::CellSet;
use crate::transfer::{Decomposition, TransferMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Probability,
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureVector {
    pub values: Vec<f64>,
    pub normalization: Normalization,
}

impl MeasureVector {
    pub fn probability(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::invalid("measure entries must be non-negative"));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!(
                "probability vector sums to {total}"
            )));
        }
        Ok(Self {
            values,
            normalization: Normalization::Probability,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// A Lyapunov measure `μ̄` with `μ̄·P₁ < γ·μ̄` cellwise.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    pub mu_bar: MeasureVector,
    pub gamma: f64,
    /// Series weight; `γ = 1/α` for series certificates.
    pub alpha: f64,
    /// `max_j (μ̄·P₁)_j − γ·μ̄_j`.
    pub residual: f64,
    /// Series terms used (zero for linear solves).
    pub terms: usize,
}

impl LyapunovCertificate {
    pub fn is_valid(&self) -> bool {
        self.residual < 0.0 && self.mu_bar.values.iter().all(|&v| v > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LyapunovMethod {
    #[default]
    Series,
    Solve,
}

impl FromStr for LyapunovMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "series" => Ok(LyapunovMethod::Series),
            "solve" => Ok(LyapunovMethod::Solve),
            other => Err(Error::invalid(format!(
                "unknown Lyapunov method `{other}` (expected series or solve)"
            ))),
        }
    }
}

impl fmt::Display for LyapunovMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LyapunovMethod::Series => "series",
            LyapunovMethod::Solve => "solve",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub method: LyapunovMethod,
    /// Series weight `α ≥ 1` (series) or contraction `α ∈ (0, 1]` (solve).
    pub alpha: f64,
    /// Relative truncation tolerance of the Neumann series.
    pub series_tol: f64,
    pub k_max: usize,
    /// Tolerance and cap of the spectral-radius power iteration.
    pub rho_tol: f64,
    pub rho_iters: usize,
    pub decay_horizon: usize,
    /// Moment order `p` of the default observable `f(x) = ‖x − x*‖ᵖ`.
    pub moment_order: f64,
    pub lyapunov_function: bool,
    /// Center of the moment observable; defaults to the middle of the
    /// attractor cells' bounding box.
    pub equilibrium: Option<Vec<f64>>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            method: LyapunovMethod::Series,
            alpha: 1.0,
            series_tol: 1e-12,
            k_max: 200_000,
            rho_tol: 1e-12,
            rho_iters: 20_000,
            decay_horizon: 400,
            moment_order: 2.0,
            lyapunov_function: true,
            equilibrium: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub transient: bool,
    pub rho_estimate: f64,
    pub rho_converged: bool,
    pub decay_fit: DecayFit,
    pub certificate: Option<LyapunovCertificate>,
    /// Why no certificate was produced, when none was.
    pub certificate_note: Option<String>,
    /// Closed classes of `P₁` as global cell indices; index `L` is the sink.
    pub obstructions: Vec<CellSet>,
    pub escaped_mass: f64,
    pub lyapunov_function: Option<KoopmanLyapunov>,
    pub x0: CellSet,
    pub x1: CellSet,
    pub method: LyapunovMethod,
}

impl StabilityReport {
    /// A valid certificate was found.
    pub fn is_certified(&self) -> bool {
        self.certificate.as_ref().is_some_and(LyapunovCertificate::is_valid)
    }
}

/// Mass below which a cell is not counted in a measure's support.
pub const SUPPORT_TOL: f64 = 1e-6;

/// Indices carrying more than `tol` mass.
pub fn support(values: &[f64], tol: f64) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > tol)
        .map(|(i, _)| i)
        .collect()
}

/// Per-cell Lebesgue volumes over the `P₁` states; the sink state, if any,
/// gets one cell volume too.
pub fn volume_measure(tm: &TransferMatrix, d: &Decomposition) -> MeasureVector {
    MeasureVector::raw(vec![tm.partition().cell_volume(); d.size()])
}

/// `‖center(Dᵢ) − x*‖ᵖ` over `X₁` cells (zero on the sink state).
pub fn moment_observable(tm: &TransferMatrix, d: &Decomposition, center: &[f64], p: f64) -> Vec<f64> {
    (0..d.size())
        .map(|k| match d.global(k) {
            Some(cell) => {
                let c = tm.partition().cell_center(cell);
                let r2: f64 = c.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
                r2.sqrt().powf(p)
            }
            None => 0.0,
        })
        .collect()
}

/// Full pipeline: decompose, find obstructions, estimate `ρ(P₁)`, build and
/// verify a Lyapunov measure, fit the decay envelope and (optionally) the
/// Koopman-resolvent Lyapunov function.
pub fn analyze(tm: &TransferMatrix, x0: &CellSet, options: &AnalysisOptions) -> Result<StabilityReport> {
    let d = tm.decompose(x0)?;
    let p1 = &d.p1;
    let transience = is_transient(p1, options.rho_tol, options.rho_iters)?;
    let obstructions = find_closed_subpartitions(p1)
        .into_iter()
        .map(|set| {
            let cells = set
                .iter()
                .map(|k| d.global(k).unwrap_or(tm.sink()))
                .collect();
            CellSet::new(cells, tm.len() + 1).expect("global indices are in range")
        })
        .collect::<Vec<_>>();
    let m = volume_measure(tm, &d);

    let (certificate, certificate_note) = if !transience.transient {
        (
            None,
            Some(format!("{} closed class(es) in P1", obstructions.len())),
        )
    } else {
        match options.method {
            LyapunovMethod::Series => {
                match lyapunov_measure_series(p1, &m, options.alpha, options.series_tol, options.k_max)? {
                    SeriesOutcome::Certificate(c) if c.is_valid() => (Some(c), None),
                    SeriesOutcome::Certificate(c) => (
                        None,
                        Some(format!("series measure fails verification (residual {:e})", c.residual)),
                    ),
                    SeriesOutcome::Divergent { terms, last_term_norm } => (
                        None,
                        Some(format!(
                            "series did not converge after {terms} terms (last term {last_term_norm:e})"
                        )),
                    ),
                }
            }
            LyapunovMethod::Solve => {
                match lyapunov_measure_solve(p1, options.alpha, &m, options.series_tol, options.k_max)? {
                    SolveOutcome::Certificate(c) => (Some(c), None),
                    SolveOutcome::Infeasible { reason } => (None, Some(reason)),
                }
            }
        }
    };

    let decay_fit = geometric_decay_fit(p1, &m.values, options.decay_horizon)?;

    let lyapunov_function = if options.lyapunov_function && transience.transient {
        let center = options
            .equilibrium
            .clone()
            .unwrap_or_else(|| equilibrium_guess(tm, x0));
        let f = moment_observable(tm, &d, &center, options.moment_order);
        koopman_lyapunov_function(p1, &f, options.series_tol, options.k_max)?
            .function()
            .cloned()
    } else {
        None
    };

    Ok(StabilityReport {
        transient: transience.transient,
        rho_estimate: transience.rho_estimate,
        rho_converged: transience.rho_converged,
        decay_fit,
        certificate,
        certificate_note,
        obstructions,
        escaped_mass: tm.escaped_mass(),
        lyapunov_function,
        x0: d.x0.clone(),
        x1: d.x1.clone(),
        method: options.method,
    })
}

/// Center of the bounding box of the attractor cells.
fn equilibrium_guess(tm: &TransferMatrix, x0: &CellSet) -> Vec<f64> {
    let part = tm.partition();
    let dim = part.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for cell in x0.iter() {
        let (a, b) = part.cell_bounds(cell);
        for i in 0..dim {
            lo[i] = lo[i].min(a[i]);
            hi[i] = hi[i].max(b[i]);
        }
    }
    lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
}
