use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

use super::graph::find_closed_subpartitions;
use super::{MeasureVector, Normalization};

/// Graph-exact transience verdict plus an advisory spectral radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transience {
    pub transient: bool,
    pub rho_estimate: f64,
    pub rho_converged: bool,
    pub iterations: usize,
}

/// Power iteration `v ← v·P₁` on a positive start; the ratio of successive
/// 1-norms tends to `ρ(P₁)` for non-negative matrices.
pub fn spectral_radius(p1: &CsrMatrix, tol: f64, n_max: usize) -> Result<(f64, bool, usize)> {
    let n = p1.nrows();
    if n == 0 {
        return Ok((0.0, true, 0));
    }
    let mut v = vec![1.0 / n as f64; n];
    let mut prev = f64::NAN;
    for k in 1..=n_max {
        let w = p1.vec_mul(&v)?;
        let s: f64 = w.iter().sum();
        if s == 0.0 {
            return Ok((0.0, true, k));
        }
        let ratio = s;
        v = w.into_iter().map(|x| x / s).collect();
        if (ratio - prev).abs() < tol {
            return Ok((ratio, true, k));
        }
        prev = ratio;
    }
    Ok((prev, false, n_max))
}

pub fn is_transient(p1: &CsrMatrix, tol: f64, n_max: usize) -> Result<Transience> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let transient = find_closed_subpartitions(p1).is_empty();
    let (rho_estimate, rho_converged, iterations) = spectral_radius(p1, tol, n_max)?;
    Ok(Transience {
        transient,
        rho_estimate,
        rho_converged,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantMeasure {
    pub measure: MeasureVector,
    /// `‖μP − μ‖₁` of the returned vector (after renormalizing `μP`).
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn step(p: &CsrMatrix, mu: &[f64]) -> Result<Vec<f64>> {
    let next = p.vec_mul(mu)?;
    let s: f64 = next.iter().sum();
    if s > 0.0 {
        Ok(next.into_iter().map(|x| x / s).collect())
    } else {
        Ok(next)
    }
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Fixed point of `μ ← μP` from the uniform probability vector.
///
/// Without convergence the two-step Cesàro mean `(μ + μP)/2` is returned and
/// flagged; it is exact for period-two chains.
pub fn invariant_measure(p: &CsrMatrix, tol: f64, n_max: usize) -> Result<InvariantMeasure> {
    let n = p.nrows();
    if n == 0 || p.ncols() != n {
        return Err(Error::invalid(format!(
            "invariant measure needs a non-empty square matrix, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    let mut mu = vec![1.0 / n as f64; n];
    for k in 0..n_max {
        let next = step(p, &mu)?;
        let residual = l1_diff(&next, &mu);
        if residual < tol {
            return Ok(InvariantMeasure {
                measure: MeasureVector {
                    values: next,
                    normalization: Normalization::Probability,
                },
                residual,
                iterations: k + 1,
                converged: true,
            });
        }
        mu = next;
    }
    let next = step(p, &mu)?;
    let mut avg: Vec<f64> = mu.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
    let s: f64 = avg.iter().sum();
    if s > 0.0 {
        avg.iter_mut().for_each(|x| *x /= s);
    }
    let residual = l1_diff(&step(p, &avg)?, &avg);
    Ok(InvariantMeasure {
        converged: residual < tol,
        measure: MeasureVector {
            values: avg,
            normalization: Normalization::Probability,
        },
        residual,
        iterations: n_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transience_examples() {
        let t = is_transient(&CsrMatrix::from_dense(&[vec![0.5]]), 1e-13, 1000).unwrap();
        assert!(t.transient);
        assert!((t.rho_estimate - 0.5).abs() < 1e-10);

        let t = is_transient(
            &CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
            1e-13,
            1000,
        )
        .unwrap();
        assert!(!t.transient);
        assert!((t.rho_estimate - 1.0).abs() < 1e-12);

        let t = is_transient(
            &CsrMatrix::from_dense(&[vec![0.3, 0.5], vec![0.0, 0.8]]),
            1e-14,
            10_000,
        )
        .unwrap();
        assert!(t.transient);
        assert!((t.rho_estimate - 0.8).abs() < 1e-8, "{}", t.rho_estimate);
        assert!(is_transient(&CsrMatrix::zeros(1, 1), 0.0, 10).is_err());
    }

    #[test]
    fn invariant_identity_is_uniform() {
        let inv = invariant_measure(&CsrMatrix::identity(4), 1e-12, 100).unwrap();
        assert_eq!(inv.measure.values, vec![0.25; 4]);
        assert!(inv.converged);
    }

    #[test]
    fn invariant_absorbing() {
        let p = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![1.0, 0.0]]);
        let inv = invariant_measure(&p, 1e-12, 100).unwrap();
        assert_eq!(inv.measure.values, vec![1.0, 0.0]);
    }

    #[test]
    fn invariant_two_state_balance() {
        let p = CsrMatrix::from_dense(&[vec![0.9, 0.1], vec![0.5, 0.5]]);
        let inv = invariant_measure(&p, 1e-13, 10_000).unwrap();
        assert!((inv.measure.values[0] - 5.0 / 6.0).abs() < 1e-8);
        assert!((inv.measure.values[1] - 1.0 / 6.0).abs() < 1e-8);
        assert!(inv.residual < 1e-13);
    }

    #[test]
    fn invariant_periodic_uses_cesaro_mean() {
        let p = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        // a non-uniform start would oscillate; the uniform start is already fixed
        let inv = invariant_measure(&p, 1e-12, 10).unwrap();
        assert_eq!(inv.measure.values, vec![0.5, 0.5]);
        let p = CsrMatrix::from_dense(&[
            vec![0.0, 1.0, 0.0],
            vec![0.5, 0.0, 0.5],
            vec![0.0, 1.0, 0.0],
        ]);
        let inv = invariant_measure(&p, 1e-12, 50).unwrap();
        assert!(inv.converged, "{inv:?}");
        assert!((inv.measure.values[1] - 0.5).abs() < 1e-12);
    }
}
