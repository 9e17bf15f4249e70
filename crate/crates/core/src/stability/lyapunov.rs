//! Lyapunov measures (row action of `P₁`) and Koopman-resolvent Lyapunov
//! functions (column action of `P₁`).

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

use super::graph::find_closed_subpartitions;
use super::{LyapunovCertificate, MeasureVector, Normalization};

/// Terms larger than this mean the series has blown up.
const BLOWUP: f64 = 1e250;

/// Outcome of a series or linear-solve construction.
#[derive(Debug, Clone, PartialEq)]
pub enum SeriesOutcome {
    Certificate(LyapunovCertificate),
    /// Terms did not decay within the iteration budget.
    Divergent { terms: usize, last_term_norm: f64 },
}

impl SeriesOutcome {
    pub fn certificate(&self) -> Option<&LyapunovCertificate> {
        match self {
            SeriesOutcome::Certificate(c) => Some(c),
            SeriesOutcome::Divergent { .. } => None,
        }
    }

    pub fn into_certificate(self) -> Option<LyapunovCertificate> {
        match self {
            SeriesOutcome::Certificate(c) => Some(c),
            SeriesOutcome::Divergent { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Certificate(LyapunovCertificate),
    /// No positive solution: `ρ(P₁) ≥ α`, or the solution is not positive.
    Infeasible { reason: String },
}

impl SolveOutcome {
    pub fn certificate(&self) -> Option<&LyapunovCertificate> {
        match self {
            SolveOutcome::Certificate(c) => Some(c),
            SolveOutcome::Infeasible { .. } => None,
        }
    }

    pub fn into_certificate(self) -> Option<LyapunovCertificate> {
        match self {
            SolveOutcome::Certificate(c) => Some(c),
            SolveOutcome::Infeasible { .. } => None,
        }
    }
}

fn check_square(p1: &CsrMatrix, len: usize, what: &str) -> Result<()> {
    if p1.nrows() != p1.ncols() {
        return Err(Error::invalid(format!(
            "P1 must be square, got {}x{}",
            p1.nrows(),
            p1.ncols()
        )));
    }
    if len != p1.nrows() {
        return Err(Error::invalid(format!(
            "{what} has {len} entries, P1 has {} states",
            p1.nrows()
        )));
    }
    Ok(())
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Accumulates `Σ_k (weight·A)^k seed` under `apply`, stopping once a term
/// drops below `tol·(1 − r̂)·‖seed‖₁`, where `r̂` is the observed ratio of
/// successive term norms.
fn neumann<F>(seed: &[f64], weight: f64, tol: f64, k_max: usize, mut apply: F) -> Result<(Vec<f64>, usize, f64, bool)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let scale = norm1(seed);
    let mut sum = seed.to_vec();
    let mut term = seed.to_vec();
    let mut prev_norm = scale;
    for k in 1..=k_max {
        term = apply(&term)?;
        if weight != 1.0 {
            term.iter_mut().for_each(|t| *t *= weight);
        }
        let norm = norm1(&term);
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
        if norm == 0.0 {
            return Ok((sum, k, 0.0, true));
        }
        if !norm.is_finite() || norm > BLOWUP {
            return Ok((sum, k, norm, false));
        }
        let ratio = norm / prev_norm;
        if ratio < 1.0 && norm < tol * (1.0 - ratio) * scale {
            return Ok((sum, k, norm, true));
        }
        prev_norm = norm;
    }
    Ok((sum, k_max, prev_norm, false))
}

/// `μ̄ = Σ_k αᵏ m·P₁ᵏ`, certified with `γ = 1/α`.
pub fn lyapunov_measure_series(
    p1: &CsrMatrix,
    m: &MeasureVector,
    alpha: f64,
    tol: f64,
    k_max: usize,
) -> Result<SeriesOutcome> {
    check_square(p1, m.len(), "m")?;
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("series weight must be >= 1, got {alpha}")));
    }
    if m.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("seed measure m must be strictly positive"));
    }
    let (sum, terms, last, converged) = neumann(&m.values, alpha, tol, k_max, |t| p1.vec_mul(t))?;
    if !converged {
        return Ok(SeriesOutcome::Divergent {
            terms,
            last_term_norm: last,
        });
    }
    let gamma = 1.0 / alpha;
    let (_, residual) = verify_certificate(p1, &sum, gamma)?;
    Ok(SeriesOutcome::Certificate(LyapunovCertificate {
        mu_bar: MeasureVector::raw(sum),
        gamma,
        alpha,
        residual,
        terms,
    }))
}

/// Solves `μ̄(αI − P₁) = g` by Gauss-Seidel sweeps on the transposed system.
///
/// The sweeps converge exactly when `αI − P₁` is a nonsingular M-matrix,
/// i.e. when `ρ(P₁) < α`; otherwise the iterate stalls or grows and the
/// problem is reported infeasible.
pub fn lyapunov_measure_solve(
    p1: &CsrMatrix,
    alpha: f64,
    g: &MeasureVector,
    tol: f64,
    max_sweeps: usize,
) -> Result<SolveOutcome> {
    check_square(p1, g.len(), "g")?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("contraction factor must lie in (0, 1], got {alpha}")));
    }
    if g.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("right-hand side g must be strictly positive"));
    }
    let n = p1.nrows();
    let cols = p1.transpose();
    let mut diag = vec![0.0; n];
    for j in 0..n {
        diag[j] = alpha - p1.get(j, j);
        if !(diag[j] > 0.0) {
            return Ok(SolveOutcome::Infeasible {
                reason: format!("state {j} keeps {} >= alpha of its mass", p1.get(j, j)),
            });
        }
    }
    let g_norm = norm1(&g.values);
    let mut mu = vec![0.0; n];
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut change = 0.0;
        for j in 0..n {
            let inflow: f64 = cols
                .row(j)
                .filter(|&(i, _)| i != j)
                .map(|(i, v)| mu[i] * v)
                .sum();
            let next = (g.values[j] + inflow) / diag[j];
            change += (next - mu[j]).abs();
            mu[j] = next;
        }
        let size = norm1(&mu);
        if !size.is_finite() || size > BLOWUP {
            break;
        }
        if change <= tol * size {
            converged = true;
            break;
        }
    }
    if !converged {
        return Ok(SolveOutcome::Infeasible {
            reason: format!("Gauss-Seidel did not converge in {max_sweeps} sweeps (rho(P1) >= alpha)"),
        });
    }
    // true residual of the linear system, not the sweep change
    let lhs = p1.vec_mul(&mu)?;
    let sys_res: f64 = mu
        .iter()
        .zip(&lhs)
        .zip(&g.values)
        .map(|((m, l), g)| (alpha * m - l - g).abs())
        .sum();
    if sys_res > 1e-6 * g_norm.max(f64::MIN_POSITIVE) {
        return Ok(SolveOutcome::Infeasible {
            reason: format!("linear residual {sys_res:e} too large"),
        });
    }
    if mu.iter().any(|&v| !(v > 0.0)) {
        return Ok(SolveOutcome::Infeasible {
            reason: "solution is not strictly positive".into(),
        });
    }
    let (valid, residual) = verify_certificate(p1, &mu, alpha)?;
    if !valid {
        return Ok(SolveOutcome::Infeasible {
            reason: format!("solution violates the strict inequality (residual {residual:e})"),
        });
    }
    Ok(SolveOutcome::Certificate(LyapunovCertificate {
        mu_bar: MeasureVector::raw(mu),
        gamma: alpha,
        alpha: 1.0 / alpha,
        residual,
        terms: 0,
    }))
}

/// Checks `(μ̄·P₁)(B) < γ·μ̄(B)` for every nonempty set of cells `B`.
///
/// A cell with `μ̄_j = 0` fails on `B = {j}`, so every entry must be
/// positive; the set condition then reduces to the per-cell inequality by
/// finite additivity. Returns the verdict and `max_j (μ̄·P₁)_j − γ·μ̄_j`.
pub fn verify_certificate(p1: &CsrMatrix, mu_bar: &[f64], gamma: f64) -> Result<(bool, f64)> {
    check_square(p1, mu_bar.len(), "mu_bar")?;
    let image = p1.vec_mul(mu_bar)?;
    let residual = image
        .iter()
        .zip(mu_bar)
        .map(|(&pushed, &mass)| pushed - gamma * mass)
        .fold(f64::NEG_INFINITY, f64::max);
    let positive = !mu_bar.is_empty() && mu_bar.iter().all(|&v| v > 0.0);
    Ok((positive && residual < 0.0, residual))
}

/// Least-squares geometric envelope `‖m·P₁ⁿ‖₁ ≈ K βⁿ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub k: f64,
    pub beta: f64,
    /// Horizon whose tail half was fitted.
    pub horizon: usize,
}

pub fn geometric_decay_fit(p1: &CsrMatrix, m: &[f64], n_max: usize) -> Result<DecayFit> {
    check_square(p1, m.len(), "m")?;
    if n_max < 2 {
        return Err(Error::invalid("decay fit needs n_max >= 2"));
    }
    let mut norms = Vec::with_capacity(n_max + 1);
    let mut v = m.to_vec();
    norms.push(norm1(&v));
    for _ in 0..n_max {
        v = p1.vec_mul(&v)?;
        let s = norm1(&v);
        if s == 0.0 {
            break;
        }
        norms.push(s);
    }
    let horizon = norms.len() - 1;
    if horizon == 0 {
        // nilpotent in one step
        return Ok(DecayFit { k: norms[0], beta: 0.0, horizon: 0 });
    }
    let start = horizon / 2;
    let pts: Vec<(f64, f64)> = (start..=horizon).map(|n| (n as f64, norms[n].ln())).collect();
    let count = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / count;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    Ok(DecayFit {
        k: intercept.exp(),
        beta: slope.exp(),
        horizon,
    })
}

/// `V = Σ_k P₁ᵏ f`, the resolvent `(I − U)⁻¹ f` of the Koopman action.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanLyapunov {
    pub values: Vec<f64>,
    /// `max_i (P₁V)_i / V_i` over states with `V_i > 0`.
    pub contraction: f64,
    pub terms: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KoopmanOutcome {
    Function(KoopmanLyapunov),
    Divergent { terms: usize },
}

impl KoopmanOutcome {
    pub fn function(&self) -> Option<&KoopmanLyapunov> {
        match self {
            KoopmanOutcome::Function(v) => Some(v),
            KoopmanOutcome::Divergent { .. } => None,
        }
    }
}

pub fn koopman_lyapunov_function(
    p1: &CsrMatrix,
    f: &[f64],
    tol: f64,
    k_max: usize,
) -> Result<KoopmanOutcome> {
    check_square(p1, f.len(), "f")?;
    if f.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid("observable f must be non-negative"));
    }
    if !find_closed_subpartitions(p1).is_empty() {
        return Ok(KoopmanOutcome::Divergent { terms: 0 });
    }
    if norm1(f) == 0.0 {
        return Ok(KoopmanOutcome::Function(KoopmanLyapunov {
            values: f.to_vec(),
            contraction: 0.0,
            terms: 0,
        }));
    }
    let (values, terms, _, converged) = neumann(f, 1.0, tol, k_max, |t| p1.mul_vec(t))?;
    if !converged {
        return Ok(KoopmanOutcome::Divergent { terms });
    }
    let pushed = p1.mul_vec(&values)?;
    let contraction = values
        .iter()
        .zip(&pushed)
        .filter(|(v, _)| **v > 0.0)
        .map(|(v, p)| p / v)
        .fold(0.0, f64::max);
    Ok(KoopmanOutcome::Function(KoopmanLyapunov {
        values,
        contraction,
        terms,
    }))
}

impl MeasureVector {
    pub fn raw(values: Vec<f64>) -> Self {
        Self {
            values,
            normalization: Normalization::Raw,
        }
    }
}
