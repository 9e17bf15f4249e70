//! Discrete-time stochastic maps `x_{n+1} = T(x_n, ξ_n)` with finite noise support.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance for the equilibrium fixed-point check, per coordinate.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

const PROB_SUM_TOL: f64 = 1e-12;

/// `(state, noise, out)`; writes `T(state, noise)` into `out`.
pub type StepFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// `(state, noise, out)`; writes the time derivative into `out`.
pub type VectorField = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// Finitely many noise vectors `w_ℓ` with probabilities `p_ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseAtoms {
    values: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl NoiseAtoms {
    pub fn new(values: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("noise needs at least one atom"));
        }
        if values.len() != probs.len() {
            return Err(Error::invalid(format!(
                "{} noise values but {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        let width = values[0].len();
        if values.iter().any(|v| v.len() != width) {
            return Err(Error::invalid("noise atoms must share one dimension"));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::invalid("noise probabilities must be non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::invalid(format!(
                "noise probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { values, probs })
    }

    /// A single zero atom: the deterministic system.
    pub fn deterministic(noise_dim: usize) -> Self {
        Self {
            values: vec![vec![0.0; noise_dim]],
            probs: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn noise_dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.values
            .iter()
            .map(Vec::as_slice)
            .zip(self.probs.iter().copied())
    }

    /// Atoms of `(ξ₀, ξ₁)` for two independent draws: concatenated vectors,
    /// product probabilities, first index varying slowest.
    pub fn product(&self, other: &NoiseAtoms) -> NoiseAtoms {
        let mut values = Vec::with_capacity(self.len() * other.len());
        let mut probs = Vec::with_capacity(self.len() * other.len());
        for (a, pa) in self.iter() {
            for (b, pb) in other.iter() {
                let mut v = a.to_vec();
                v.extend_from_slice(b);
                values.push(v);
                probs.push(pa * pb);
            }
        }
        NoiseAtoms { values, probs }
    }

    /// Index of the atom selected by a uniform draw `u ∈ [0, 1)`.
    pub fn pick(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        // u landed in the round-off gap at the top; take the last atom with mass
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Midpoint quantization of the uniform distribution on `[−alpha, alpha]`
/// into `q` equally likely atoms `w_ℓ = −α + (2ℓ−1)α/Q`.
pub fn quantize_uniform_noise(alpha: f64, q: usize) -> Result<NoiseAtoms> {
    if q == 0 {
        return Err(Error::invalid("noise atom count Q must be at least 1"));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!(
            "noise half-width must be finite and >= 0, got {alpha}"
        )));
    }
    let qf = q as f64;
    // symmetric construction so that w and -w are bit-for-bit negatives
    let values = (0..q)
        .map(|k| {
            let offset = (2 * k + 1) as f64 - qf;
            vec![alpha * offset / qf]
        })
        .collect();
    Ok(NoiseAtoms {
        values,
        probs: vec![1.0 / qf; q],
    })
}

/// The stochastic map `T(x, ξ)` together with its noise law and equilibrium.
#[derive(Clone)]
pub struct StochasticMap {
    name: String,
    state_dim: usize,
    noise: NoiseAtoms,
    step: Arc<StepFn>,
    pub equilibrium: Vec<f64>,
}

impl fmt::Debug for StochasticMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StochasticMap")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("noise", &self.noise)
            .field("equilibrium", &self.equilibrium)
            .finish_non_exhaustive()
    }
}

impl StochasticMap {
    /// Builds a map and checks that `equilibrium` is fixed by every atom.
    pub fn new<F>(
        name: impl Into<String>,
        state_dim: usize,
        noise: NoiseAtoms,
        equilibrium: Vec<f64>,
        step: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::from_arc(name, state_dim, noise, equilibrium, Arc::new(step))
    }

    pub fn from_arc(
        name: impl Into<String>,
        state_dim: usize,
        noise: NoiseAtoms,
        equilibrium: Vec<f64>,
        step: Arc<StepFn>,
    ) -> Result<Self> {
        if state_dim == 0 {
            return Err(Error::invalid("state dimension must be positive"));
        }
        if equilibrium.len() != state_dim {
            return Err(Error::invalid(format!(
                "equilibrium has {} coordinates, state dimension is {state_dim}",
                equilibrium.len()
            )));
        }
        let map = Self {
            name: name.into(),
            state_dim,
            noise,
            step,
            equilibrium,
        };
        map.check_equilibrium()?;
        Ok(map)
    }

    fn check_equilibrium(&self) -> Result<()> {
        let mut out = vec![0.0; self.state_dim];
        for (k, (w, _)) in self.noise.iter().enumerate() {
            self.step_into(&self.equilibrium, w, &mut out);
            for (i, (a, b)) in out.iter().zip(&self.equilibrium).enumerate() {
                if !((a - b).abs() <= EQUILIBRIUM_TOL) {
                    return Err(Error::invalid(format!(
                        "equilibrium is not fixed by noise atom {k}: coordinate {i} maps {b} -> {a}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn noise(&self) -> &NoiseAtoms {
        &self.noise
    }

    #[inline]
    pub fn step_into(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        (self.step)(x, w, out)
    }

    pub fn step(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.step_into(x, w, &mut out);
        out
    }

    /// The same map with a different noise law.
    pub fn with_noise(&self, noise: NoiseAtoms) -> Result<Self> {
        Self::from_arc(
            self.name.clone(),
            self.state_dim,
            noise,
            self.equilibrium.clone(),
            Arc::clone(&self.step),
        )
    }

    /// `n`-fold composition `Tⁿ(x, (ξ₀, …, ξ_{n−1}))` over the product noise
    /// space; atom vectors are the concatenated per-step draws.
    pub fn iterate(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("composition order must be at least 1"));
        }
        let mut noise = self.noise.clone();
        for _ in 1..n {
            noise = noise.product(&self.noise);
        }
        let step = Arc::clone(&self.step);
        let dim = self.state_dim;
        let width = self.noise.noise_dim();
        let composed = move |x: &[f64], w: &[f64], out: &mut [f64]| {
            let mut cur = x.to_vec();
            for chunk in w.chunks(width.max(1)).take(n) {
                step(&cur, chunk, out);
                cur.copy_from_slice(&out[..dim]);
            }
        };
        Self::new(
            format!("{}^{n}", self.name),
            dim,
            noise,
            self.equilibrium.clone(),
            composed,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    Euler,
    #[default]
    Rk4,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Method::Euler),
            "rk4" => Ok(Method::Rk4),
            other => Err(Error::invalid(format!(
                "unknown integration method `{other}` (expected euler or rk4)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Euler => "euler",
            Method::Rk4 => "rk4",
        })
    }
}

/// A noisy vector field and its one-step time discretization.
#[derive(Clone)]
pub struct OdeSpec {
    pub state_dim: usize,
    pub vector_field: Arc<VectorField>,
    pub dt: f64,
    pub method: Method,
}

impl OdeSpec {
    pub fn new<F>(state_dim: usize, dt: f64, method: Method, field: F) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            state_dim,
            vector_field: Arc::new(field),
            dt,
            method,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if self.state_dim == 0 {
            return Err(Error::invalid("state dimension must be positive"));
        }
        Ok(())
    }
}

/// One explicit integration step of `field` with the noise held fixed.
fn integrate(field: &VectorField, method: Method, dt: f64, x: &[f64], w: &[f64], out: &mut [f64]) {
    let d = x.len();
    match method {
        Method::Euler => {
            field(x, w, out);
            for i in 0..d {
                out[i] = x[i] + dt * out[i];
            }
        }
        Method::Rk4 => {
            let mut k1 = vec![0.0; d];
            let mut k2 = vec![0.0; d];
            let mut k3 = vec![0.0; d];
            let mut k4 = vec![0.0; d];
            let mut tmp = vec![0.0; d];
            field(x, w, &mut k1);
            for i in 0..d {
                tmp[i] = x[i] + 0.5 * dt * k1[i];
            }
            field(&tmp, w, &mut k2);
            for i in 0..d {
                tmp[i] = x[i] + 0.5 * dt * k2[i];
            }
            field(&tmp, w, &mut k3);
            for i in 0..d {
                tmp[i] = x[i] + dt * k3[i];
            }
            field(&tmp, w, &mut k4);
            for i in 0..d {
                out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
}

/// Time-`dt` map of an ODE; the noise atom is constant over the step.
pub fn discretize_ode(
    name: impl Into<String>,
    spec: &OdeSpec,
    noise: NoiseAtoms,
    equilibrium: Vec<f64>,
) -> Result<StochasticMap> {
    spec.validate()?;
    let field = Arc::clone(&spec.vector_field);
    let (dt, method) = (spec.dt, spec.method);
    StochasticMap::new(name, spec.state_dim, noise, equilibrium, move |x, w, out| {
        integrate(field.as_ref(), method, dt, x, w, out)
    })
}

/// Damped pendulum with noisy damping:
/// `ẋ₁ = x₂`, `ẋ₂ = −sin x₁ − (ξ + 0.7) x₂`.
pub fn pendulum_field(x: &[f64], w: &[f64], out: &mut [f64]) {
    out[0] = x[1];
    out[1] = -x[0].sin() - (w[0] + 0.7) * x[1];
}

/// Rantzer's almost-everywhere stable example with noise on the `y` decay:
/// `ẋ = −2x + x² − y²`, `ẏ = −6y(1 + ξ) + 2xy`.
pub fn rantzer_field(x: &[f64], w: &[f64], out: &mut [f64]) {
    let (a, b) = (x[0], x[1]);
    out[0] = -2.0 * a + a * a - b * b;
    out[1] = -6.0 * b * (1.0 + w[0]) + 2.0 * a * b;
}

pub fn builtin_pendulum(alpha: f64, q: usize, dt: f64) -> Result<StochasticMap> {
    builtin_with(
        "pendulum",
        pendulum_field,
        alpha,
        q,
        dt,
        Method::Rk4,
    )
}

pub fn builtin_rantzer(alpha: f64, q: usize, dt: f64) -> Result<StochasticMap> {
    builtin_with("rantzer", rantzer_field, alpha, q, dt, Method::Rk4)
}

pub(crate) fn builtin_with(
    name: &str,
    field: fn(&[f64], &[f64], &mut [f64]),
    alpha: f64,
    q: usize,
    dt: f64,
    method: Method,
) -> Result<StochasticMap> {
    let noise = quantize_uniform_noise(alpha, q)?;
    let spec = OdeSpec::new(2, dt, method, field);
    discretize_ode(name, &spec, noise, vec![0.0, 0.0])
}

/// Result of [`refine_fixed_point`].
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub x: Vec<f64>,
    /// `‖T(x, w) − x‖∞` at the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped Newton iteration on `T(x, w) − x` with a forward-difference
/// Jacobian. Each step is halved until the residual decreases.
pub fn refine_fixed_point(
    map: &StochasticMap,
    w: &[f64],
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint> {
    let d = map.state_dim();
    if start.len() != d {
        return Err(Error::invalid(format!(
            "start has {} coordinates, state dimension is {d}",
            start.len()
        )));
    }
    let residual_of = |x: &[f64]| -> (Vec<f64>, f64) {
        let fx: Vec<f64> = map.step(x, w).iter().zip(x).map(|(a, b)| a - b).collect();
        let norm = fx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (fx, if norm.is_finite() { norm } else { f64::INFINITY })
    };
    let mut x = start.to_vec();
    let (mut fx, mut norm) = residual_of(&x);
    for it in 0..max_iter {
        if norm <= tol {
            return Ok(FixedPoint { x, residual: norm, iterations: it, converged: true });
        }
        let mut jac = vec![vec![0.0; d]; d];
        for k in 0..d {
            let h = 1e-7 * x[k].abs().max(1.0);
            let mut xh = x.clone();
            xh[k] += h;
            let (fh, _) = residual_of(&xh);
            for i in 0..d {
                jac[i][k] = (fh[i] - fx[i]) / h;
            }
        }
        let neg: Vec<f64> = fx.iter().map(|v| -v).collect();
        let Some(dx) = solve_dense(jac, neg) else {
            break;
        };
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-6 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + lambda * b).collect();
            let (ft, nt) = residual_of(&trial);
            if nt < norm {
                x = trial;
                fx = ft;
                norm = nt;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(FixedPoint { converged: norm <= tol, x, residual: norm, iterations: max_iter })
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms(n: &NoiseAtoms) -> Vec<f64> {
        n.values().iter().map(|v| v[0]).collect()
    }

    #[test]
    fn refine_finds_rantzer_fixed_points() {
        let map = builtin_rantzer(0.0, 1, 0.1).unwrap();
        for (start, target) in [([0.1, -0.05], [0.0, 0.0]), ([1.8, 0.1], [2.0, 0.0])] {
            let fp = refine_fixed_point(&map, &[0.0], &start, 1e-13, 50).unwrap();
            assert!(fp.converged, "{fp:?}");
            assert!((fp.x[0] - target[0]).abs() < 1e-9 && (fp.x[1] - target[1]).abs() < 1e-9, "{fp:?}");
        }
    }

    #[test]
    fn quantize_degenerate() {
        let n = quantize_uniform_noise(0.0, 1).unwrap();
        assert_eq!(atoms(&n), vec![0.0]);
        assert_eq!(n.probs(), &[1.0]);
    }

    #[test]
    fn quantize_midpoints() {
        let n = quantize_uniform_noise(0.5, 5).unwrap();
        let expect = [-0.4, -0.2, 0.0, 0.2, 0.4];
        for (a, e) in atoms(&n).iter().zip(expect) {
            assert!((a - e).abs() < 1e-15, "{a} vs {e}");
        }
        assert!(n.probs().iter().all(|&p| p == 0.2));

        let n = quantize_uniform_noise(1.0, 2).unwrap();
        assert_eq!(atoms(&n), vec![-0.5, 0.5]);
        assert_eq!(n.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn quantize_rejects_zero_atoms() {
        assert!(matches!(
            quantize_uniform_noise(1.0, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn quantized_mean_is_zero_and_symmetric() {
        for q in 1..40 {
            let n = quantize_uniform_noise(0.73, q).unwrap();
            let v = atoms(&n);
            let mean: f64 = v.iter().sum::<f64>() / q as f64;
            assert!(mean.abs() < 1e-15, "q = {q}: {mean}");
            for (a, b) in v.iter().zip(v.iter().rev()) {
                assert_eq!(*a, -*b);
            }
        }
    }

    #[test]
    fn noise_atoms_validate() {
        assert!(NoiseAtoms::new(vec![], vec![]).is_err());
        assert!(NoiseAtoms::new(vec![vec![0.0]], vec![0.9]).is_err());
        assert!(NoiseAtoms::new(vec![vec![0.0], vec![1.0]], vec![1.5, -0.5]).is_err());
        assert!(NoiseAtoms::new(vec![vec![0.0], vec![1.0]], vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn euler_and_rk4_on_decay() {
        for (method, expect) in [(Method::Euler, 0.9), (Method::Rk4, 0.9048375)] {
            let spec = OdeSpec::new(1, 0.1, method, |x, _w, out| out[0] = -x[0]);
            let map = discretize_ode("decay", &spec, NoiseAtoms::deterministic(1), vec![0.0])
                .unwrap();
            let y = map.step(&[1.0], &[0.3])[0];
            assert!((y - expect).abs() < 1e-7, "{method}: {y}");
        }
    }

    #[test]
    fn rk4_linear_field_is_taylor_polynomial() {
        for &a in &[-3.0, -0.5, 0.25, 2.0] {
            let h = 0.1;
            let spec = OdeSpec::new(1, h, Method::Rk4, move |x, _w, out| out[0] = a * x[0]);
            let map = discretize_ode("lin", &spec, NoiseAtoms::deterministic(1), vec![0.0])
                .unwrap();
            let z: f64 = a * h;
            let taylor = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
            let y = map.step(&[1.0], &[0.0])[0];
            assert!((y - taylor).abs() < 1e-15, "a = {a}: {y} vs {taylor}");
        }
    }

    #[test]
    fn non_positive_dt_rejected() {
        let spec = OdeSpec::new(1, 0.0, Method::Rk4, |x, _w, out| out[0] = -x[0]);
        assert!(discretize_ode("x", &spec, NoiseAtoms::deterministic(1), vec![0.0]).is_err());
    }

    #[test]
    fn pendulum_field_vanishes_at_origin() {
        let mut out = [1.0, 1.0];
        pendulum_field(&[0.0, 0.0], &[0.3], &mut out);
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn builtins_fix_the_origin() {
        for alpha in [0.0, 0.5, 1.0] {
            for map in [
                builtin_pendulum(alpha, 5, 0.1).unwrap(),
                builtin_rantzer(alpha, 5, 0.1).unwrap(),
            ] {
                for (w, _) in map.noise().iter() {
                    assert_eq!(map.step(&[0.0, 0.0], w), vec![0.0, 0.0]);
                }
            }
        }
        let p = builtin_pendulum(1.0, 5, 0.1).unwrap();
        let expect = [-0.8, -0.4, 0.0, 0.4, 0.8];
        for (a, e) in atoms(p.noise()).iter().zip(expect) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn rantzer_keeps_second_equilibrium() {
        let map = builtin_rantzer(0.0, 1, 0.1).unwrap();
        let y = map.step(&[2.0, 0.0], &[0.0]);
        assert!((y[0] - 2.0).abs() < 1e-8 && y[1].abs() < 1e-8, "{y:?}");
        // (2, 0) survives every noise atom since the noise multiplies y
        let noisy = builtin_rantzer(0.5, 5, 0.1).unwrap();
        for (w, _) in noisy.noise().iter() {
            let y = noisy.step(&[2.0, 0.0], w);
            assert!((y[0] - 2.0).abs() < 1e-12 && y[1] == 0.0);
        }
    }

    #[test]
    fn bad_equilibrium_is_rejected() {
        let r = StochasticMap::new("shift", 1, NoiseAtoms::deterministic(1), vec![0.0], |x, _, o| {
            o[0] = x[0] + 1.0
        });
        assert!(r.is_err());
    }

    #[test]
    fn iterate_composes_in_draw_order() {
        let noise = NoiseAtoms::new(vec![vec![1.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
        let map = StochasticMap::new("affine", 1, noise, vec![0.0], |x, w, o| {
            o[0] = w[0] * x[0] + (w[0] - 1.0) * x[0] * x[0]
        })
        .unwrap();
        let two = map.iterate(2).unwrap();
        assert_eq!(two.noise().len(), 4);
        assert_eq!(two.noise().values()[1], vec![1.0, 2.0]);
        let direct = map.step(&map.step(&[0.5], &[1.0]), &[2.0]);
        assert_eq!(two.step(&[0.5], &[1.0, 2.0]), direct);
    }
}
