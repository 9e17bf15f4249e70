//! Monte Carlo estimate of the set of initial conditions whose sample paths
//! fail to settle near the equilibrium.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::partition::Domain;
use crate::system::StochasticMap;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub n_init: usize,
    /// Finite horizon standing in for `n → ∞`.
    pub n_steps: usize,
    pub n_noise_paths: usize,
    /// Radius of the target ball around the equilibrium.
    pub epsilon: f64,
    /// An initial condition is unstable when more than this fraction of its
    /// paths end outside the target ball.
    pub delta: f64,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_init: 2000,
            n_steps: 2000,
            n_noise_paths: 5,
            epsilon: 0.2,
            delta: 0.5,
            seed: 0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_init == 0 || self.n_steps == 0 || self.n_noise_paths == 0 {
            return Err(Error::invalid("Monte Carlo counts must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }
}

/// Verdict for one initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialVerdict {
    pub x: Vec<f64>,
    /// Fraction of its noise paths that ended inside the target ball.
    pub converged_fraction: f64,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub fraction: f64,
    /// Half-width of the 95% Wilson score interval for `fraction`.
    pub half_width: f64,
    pub unstable: usize,
    pub total: usize,
    /// Paths that produced a NaN or infinite state.
    pub non_finite_paths: usize,
    pub horizon: usize,
    pub verdicts: Vec<InitialVerdict>,
}

/// Distance to `center`, measured the short way round on wrapped axes.
fn distance(domain: &Domain, x: &[f64], center: &[f64]) -> f64 {
    x.iter()
        .zip(center)
        .enumerate()
        .map(|(i, (a, b))| {
            let mut d = (a - b).abs();
            if domain.wrap()[i] {
                let span = domain.span(i);
                d %= span;
                d = d.min(span - d);
            }
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

enum PathEnd {
    Converged,
    Diverged,
    NonFinite,
}

fn run_path(
    map: &StochasticMap,
    domain: &Domain,
    x0: &[f64],
    cfg: &McConfig,
    rng: &mut ChaCha8Rng,
) -> PathEnd {
    let mut x = x0.to_vec();
    let mut next = vec![0.0; x.len()];
    let noise = map.noise();
    for _ in 0..cfg.n_steps {
        let atom = noise.pick(rng.gen::<f64>());
        map.step_into(&x, &noise.values()[atom], &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return PathEnd::NonFinite;
        }
        domain.wrap_point(&mut next);
        if !domain.contains(&next) {
            return PathEnd::Diverged;
        }
        std::mem::swap(&mut x, &mut next);
    }
    if distance(domain, &x, &map.equilibrium) < cfg.epsilon {
        PathEnd::Converged
    } else {
        PathEnd::Diverged
    }
}

/// Wilson score interval half-width at 95%.
pub fn wilson_half_width(successes: usize, n: usize) -> f64 {
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
}

/// Initial condition `k` is drawn from its own stream, so results do not
/// depend on scheduling or thread count.
pub fn estimate_unstable_fraction(
    map: &StochasticMap,
    domain: &Domain,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.validate()?;
    if map.state_dim() != domain.dim() {
        return Err(Error::invalid(format!(
            "map is {}-dimensional, domain is {}-dimensional",
            map.state_dim(),
            domain.dim()
        )));
    }
    let results: Vec<(InitialVerdict, usize)> = (0..cfg.n_init)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            let x: Vec<f64> = domain
                .lower()
                .iter()
                .zip(domain.upper())
                .map(|(lo, hi)| loop {
                    // lo + u*(hi-lo) can round up to the excluded upper edge
                    let v = lo + rng.gen::<f64>() * (hi - lo);
                    if v < *hi {
                        break v;
                    }
                })
                .collect();
            let mut converged = 0;
            let mut non_finite = 0;
            for _ in 0..cfg.n_noise_paths {
                match run_path(map, domain, &x, cfg, &mut rng) {
                    PathEnd::Converged => converged += 1,
                    PathEnd::Diverged => {}
                    PathEnd::NonFinite => non_finite += 1,
                }
            }
            let converged_fraction = converged as f64 / cfg.n_noise_paths as f64;
            let unstable = 1.0 - converged_fraction > cfg.delta;
            (
                InitialVerdict {
                    x,
                    converged_fraction,
                    unstable,
                },
                non_finite,
            )
        })
        .collect();
    let non_finite_paths = results.iter().map(|r| r.1).sum();
    if non_finite_paths > 0 {
        log::warn!("{non_finite_paths} sample paths produced non-finite states");
    }
    let verdicts: Vec<InitialVerdict> = results.into_iter().map(|r| r.0).collect();
    let unstable = verdicts.iter().filter(|v| v.unstable).count();
    let total = verdicts.len();
    Ok(McEstimate {
        fraction: unstable as f64 / total as f64,
        half_width: wilson_half_width(unstable, total),
        unstable,
        total,
        non_finite_paths,
        horizon: cfg.n_steps,
        verdicts,
    })
}
