//! Run configuration files.
//!
//! A run is described by a small TOML document:
//!
//! ```toml
//! [system]
//! name = "pendulum"      # pendulum | rantzer | custom
//! dt = 0.1
//! method = "rk4"         # rk4 | euler
//!
//! [noise]
//! alpha = 0.5            # noise is uniform on [-alpha, alpha]
//! Q = 5                  # number of quantization atoms
//!
//! [grid]
//! counts = [50, 50]
//! samples = 100          # M, sample points per cell
//! seed = 1
//! ```
//!
//! Custom systems name their state and noise symbols and give either a
//! vector field (discretized with `dt` and `method`) or a map:
//!
//! ```toml
//! [system]
//! name = "custom"
//! state = ["x"]
//! noise = "w"
//! map = ["(0.5 + w) * x"]
//! equilibrium = [0.0]
//! ```
//!
//! Omitted sections take the defaults listed on the field docs below.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::partition::{CellSet, Domain, Partition};
use crate::simulate::McConfig;
use crate::stability::{AnalysisOptions, LyapunovMethod};
use crate::system::{
    discretize_ode, pendulum_field, quantize_uniform_noise, rantzer_field, Method, NoiseAtoms,
    OdeSpec, StochasticMap,
};
use crate::transfer::SinkPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub name: String,
    /// Time step of the discretized flow. Default 0.1.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// `rk4` or `euler`. Default `rk4`.
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default)]
    pub state: Vec<String>,
    /// Noise symbol for custom systems; without one the system is noiseless.
    #[serde(default)]
    pub noise: Option<String>,
    #[serde(default)]
    pub field: Vec<String>,
    #[serde(default)]
    pub map: Vec<String>,
    /// Default: the origin.
    #[serde(default)]
    pub equilibrium: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Half-width of the uniform noise. Default 0.
    #[serde(default)]
    pub alpha: f64,
    /// Number of equally likely atoms. Default 5.
    #[serde(rename = "Q", default = "default_q")]
    pub q: i64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { alpha: 0.0, q: default_q() }
    }
}

/// Defaults per built-in: pendulum `[-π, π]²` wrapped on both axes,
/// rantzer `[-4, 4]²` wrapped on `x`. Custom systems must give bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub wrap: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Cells per axis. Default 50 on every axis.
    #[serde(default)]
    pub counts: Option<Vec<i64>>,
    /// Sample points per cell. Default 100.
    #[serde(default = "default_samples")]
    pub samples: i64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// `sink-unstable`, `discard` or `clamp`. Default `sink-unstable`.
    #[serde(default = "default_sink")]
    pub sink_policy: String,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            counts: None,
            samples: default_samples(),
            seed: default_seed(),
            sink_policy: default_sink(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// ℓ∞ radius of the attractor neighbourhood around the equilibrium.
    /// Default 0: the cell(s) containing the equilibrium.
    #[serde(default)]
    pub x0_epsilon: f64,
    /// `series` or `solve`. Default `series`.
    #[serde(default = "default_lyap")]
    pub method: String,
    /// Series weight (series) or contraction factor (solve). Default 1.
    #[serde(default = "one")]
    pub alpha_weight: f64,
    #[serde(default = "default_tol")]
    pub series_tol: f64,
    #[serde(default = "default_k_max")]
    pub k_max: i64,
    #[serde(default = "default_tol")]
    pub rho_tol: f64,
    #[serde(default = "default_rho_iters")]
    pub rho_iters: i64,
    #[serde(default = "default_horizon")]
    pub decay_horizon: i64,
    #[serde(default = "two")]
    pub moment_order: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            x0_epsilon: 0.0,
            method: default_lyap(),
            alpha_weight: 1.0,
            series_tol: default_tol(),
            k_max: default_k_max(),
            rho_tol: default_tol(),
            rho_iters: default_rho_iters(),
            decay_horizon: default_horizon(),
            moment_order: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "default_n")]
    pub n_init: i64,
    #[serde(default = "default_n")]
    pub n_steps: i64,
    #[serde(default = "default_paths")]
    pub n_noise_paths: i64,
    #[serde(default = "default_mc_eps")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Default: `grid.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            n_init: default_n(),
            n_steps: default_n(),
            n_noise_paths: default_paths(),
            epsilon: default_mc_eps(),
            delta: default_delta(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Default `out`, relative to the working directory.
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File stem of the saved matrix. Default `transfer`.
    #[serde(default = "default_stem")]
    pub stem: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir(), stem: default_stem() }
    }
}

fn default_dt() -> f64 {
    0.1
}
fn default_method() -> String {
    "rk4".into()
}
fn default_q() -> i64 {
    5
}
fn default_samples() -> i64 {
    100
}
fn default_seed() -> u64 {
    1
}
fn default_sink() -> String {
    "sink-unstable".into()
}
fn default_lyap() -> String {
    "series".into()
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn default_tol() -> f64 {
    1e-12
}
fn default_k_max() -> i64 {
    200_000
}
fn default_rho_iters() -> i64 {
    20_000
}
fn default_horizon() -> i64 {
    400
}
fn default_n() -> i64 {
    2000
}
fn default_paths() -> i64 {
    5
}
fn default_mc_eps() -> f64 {
    0.2
}
fn default_delta() -> f64 {
    0.5
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_stem() -> String {
    "transfer".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn positive(field: &str, v: i64) -> Result<usize> {
    if v < 1 {
        return Err(Error::config(field, format!("must be at least 1, got {v}")));
    }
    Ok(v as usize)
}

fn finite_positive(field: &str, v: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::config(field, format!("must be positive and finite, got {v}")));
    }
    Ok(v)
}

fn at_field(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::InvalidArgument(m) | Error::InvalidState(m) => Error::config(field, m),
        other => other,
    }
}

impl RunConfig {
    /// Parses and validates a config document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            // toml names unknown keys and bad types in the message itself
            Error::config(field_from_toml(&message, text, e.span()), message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are TOML-representable")
    }

    /// Checks every field; errors name the offending key, e.g. `noise.Q`.
    pub fn validate(&self) -> Result<()> {
        let dim = self.state_dim()?;
        self.noise_atoms()?;
        self.map()?;
        let part = self.partition()?;
        if part.dim() != dim {
            return Err(Error::config(
                "domain",
                format!("domain is {}-dimensional, system is {dim}-dimensional", part.dim()),
            ));
        }
        self.samples()?;
        self.sink_policy()?;
        self.analysis_options()?;
        self.mc_config()?;
        self.x0(&part)?;
        Ok(())
    }

    fn state_dim(&self) -> Result<usize> {
        match self.system.name.as_str() {
            "pendulum" | "rantzer" => Ok(2),
            "custom" => {
                if self.system.state.is_empty() {
                    return Err(Error::config("system.state", "custom systems must name their state symbols"));
                }
                Ok(self.system.state.len())
            }
            other => Err(Error::config(
                "system.name",
                format!("unknown system `{other}` (expected pendulum, rantzer or custom)"),
            )),
        }
    }

    fn method(&self) -> Result<Method> {
        self.system.method.parse().map_err(at_field("system.method"))
    }

    pub fn noise_atoms(&self) -> Result<NoiseAtoms> {
        let q = positive("noise.Q", self.noise.q)?;
        if !(self.noise.alpha >= 0.0 && self.noise.alpha.is_finite()) {
            return Err(Error::config(
                "noise.alpha",
                format!("must be finite and >= 0, got {}", self.noise.alpha),
            ));
        }
        if self.system.name == "custom" && self.system.noise.is_none() {
            return Ok(NoiseAtoms::deterministic(1));
        }
        quantize_uniform_noise(self.noise.alpha, q).map_err(at_field("noise"))
    }

    pub fn equilibrium(&self) -> Result<Vec<f64>> {
        let dim = self.state_dim()?;
        match &self.system.equilibrium {
            Some(e) if e.len() != dim => Err(Error::config(
                "system.equilibrium",
                format!("has {} coordinates, state dimension is {dim}", e.len()),
            )),
            Some(e) => Ok(e.clone()),
            None => Ok(vec![0.0; dim]),
        }
    }

    /// The stochastic map described by `[system]` and `[noise]`.
    pub fn map(&self) -> Result<StochasticMap> {
        let dim = self.state_dim()?;
        let noise = self.noise_atoms()?;
        let equilibrium = self.equilibrium()?;
        let method = self.method()?;
        finite_positive("system.dt", self.system.dt)?;
        let name = self.system.name.as_str();
        let spec = match name {
            "pendulum" => OdeSpec::new(2, self.system.dt, method, pendulum_field),
            "rantzer" => OdeSpec::new(2, self.system.dt, method, rantzer_field),
            _ => {
                let exprs = self.custom_exprs(dim)?;
                if !self.system.map.is_empty() {
                    return StochasticMap::new(name, dim, noise, equilibrium, move |x, w, out| {
                        eval_all(&exprs, x, w, out)
                    })
                    .map_err(at_field("system.equilibrium"));
                }
                OdeSpec::new(dim, self.system.dt, method, move |x, w, out| {
                    eval_all(&exprs, x, w, out)
                })
            }
        };
        discretize_ode(name, &spec, noise, equilibrium).map_err(at_field("system.equilibrium"))
    }

    fn custom_exprs(&self, dim: usize) -> Result<Arc<Vec<Expr>>> {
        let (key, sources) = match (self.system.field.is_empty(), self.system.map.is_empty()) {
            (false, true) => ("system.field", &self.system.field),
            (true, false) => ("system.map", &self.system.map),
            (true, true) => {
                return Err(Error::config("system.field", "custom systems need `field` or `map`"))
            }
            (false, false) => {
                return Err(Error::config("system.map", "give either `field` or `map`, not both"))
            }
        };
        if sources.len() != dim {
            return Err(Error::config(
                key,
                format!("{} expressions for {dim} state symbols", sources.len()),
            ));
        }
        let mut symbols: Vec<&str> = self.system.state.iter().map(String::as_str).collect();
        if let Some(w) = &self.system.noise {
            symbols.push(w);
        }
        for (k, s) in symbols.iter().enumerate() {
            let ok = s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !ok || ["sin", "cos", "exp", "pi"].contains(s) || symbols[..k].contains(s) {
                return Err(Error::config("system.state", format!("bad or repeated symbol `{s}`")));
            }
        }
        let exprs = sources
            .iter()
            .enumerate()
            .map(|(i, src)| Expr::parse(src, &symbols).map_err(at_field(&format!("{key}[{i}]"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(exprs))
    }

    pub fn domain(&self) -> Result<Domain> {
        let dim = self.state_dim()?;
        let (lo, hi, wrap) = match self.system.name.as_str() {
            "pendulum" => (vec![-PI; 2], vec![PI; 2], vec![true, true]),
            "rantzer" => (vec![-4.0; 2], vec![4.0; 2], vec![true, false]),
            _ => (Vec::new(), Vec::new(), vec![false; dim]),
        };
        let d = &self.domain;
        let lower = d.lower.clone().unwrap_or(lo);
        let upper = d.upper.clone().unwrap_or(hi);
        let wrap = d.wrap.clone().unwrap_or(wrap);
        for (key, len) in [("domain.lower", lower.len()), ("domain.upper", upper.len()), ("domain.wrap", wrap.len())] {
            if len != dim {
                return Err(Error::config(key, format!("expected {dim} entries, got {len}")));
            }
        }
        Domain::new(lower, upper, wrap).map_err(at_field("domain"))
    }

    pub fn partition(&self) -> Result<Partition> {
        let domain = self.domain()?;
        let counts = match &self.grid.counts {
            Some(c) => {
                if c.len() != domain.dim() {
                    return Err(Error::config(
                        "grid.counts",
                        format!("expected {} entries, got {}", domain.dim(), c.len()),
                    ));
                }
                c.iter()
                    .map(|&n| positive("grid.counts", n))
                    .collect::<Result<Vec<_>>>()?
            }
            None => vec![50; domain.dim()],
        };
        Partition::new(domain, counts).map_err(at_field("grid.counts"))
    }

    pub fn samples(&self) -> Result<usize> {
        positive("grid.samples", self.grid.samples)
    }

    pub fn sink_policy(&self) -> Result<SinkPolicy> {
        self.grid.sink_policy.parse().map_err(at_field("grid.sink_policy"))
    }

    /// Attractor cells: the ℓ∞ ball of radius `x0_epsilon` around the
    /// equilibrium.
    pub fn x0(&self, partition: &Partition) -> Result<CellSet> {
        let eps = self.analysis.x0_epsilon;
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::config("analysis.x0_epsilon", format!("must be finite and >= 0, got {eps}")));
        }
        let cells = partition
            .attractor_cells(&self.equilibrium()?, eps)
            .map_err(at_field("system.equilibrium"))?;
        if cells.len() >= partition.len() {
            return Err(Error::config("analysis.x0_epsilon", "attractor neighbourhood covers every cell"));
        }
        Ok(cells)
    }

    pub fn analysis_options(&self) -> Result<AnalysisOptions> {
        let a = &self.analysis;
        let method: LyapunovMethod = a.method.parse().map_err(at_field("analysis.method"))?;
        let alpha = finite_positive("analysis.alpha_weight", a.alpha_weight)?;
        match method {
            LyapunovMethod::Series if alpha < 1.0 => {
                return Err(Error::config("analysis.alpha_weight", format!("series weight must be >= 1, got {alpha}")))
            }
            LyapunovMethod::Solve if alpha > 1.0 => {
                return Err(Error::config("analysis.alpha_weight", format!("contraction must be <= 1, got {alpha}")))
            }
            _ => {}
        }
        if !(a.moment_order > 0.0 && a.moment_order.is_finite()) {
            return Err(Error::config("analysis.moment_order", format!("must be positive, got {}", a.moment_order)));
        }
        Ok(AnalysisOptions {
            method,
            alpha,
            series_tol: finite_positive("analysis.series_tol", a.series_tol)?,
            k_max: positive("analysis.k_max", a.k_max)?,
            rho_tol: finite_positive("analysis.rho_tol", a.rho_tol)?,
            rho_iters: positive("analysis.rho_iters", a.rho_iters)?,
            decay_horizon: positive("analysis.decay_horizon", a.decay_horizon)?,
            moment_order: a.moment_order,
            lyapunov_function: true,
            equilibrium: Some(self.equilibrium()?),
        })
    }

    pub fn mc_config(&self) -> Result<McConfig> {
        let s = &self.simulate;
        let cfg = McConfig {
            n_init: positive("simulate.n_init", s.n_init)?,
            n_steps: positive("simulate.n_steps", s.n_steps)?,
            n_noise_paths: positive("simulate.n_noise_paths", s.n_noise_paths)?,
            epsilon: finite_positive("simulate.epsilon", s.epsilon)?,
            delta: s.delta,
            seed: s.seed.unwrap_or(self.grid.seed),
        };
        if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
            return Err(Error::config("simulate.delta", format!("must lie in (0, 1), got {}", cfg.delta)));
        }
        Ok(cfg)
    }
}

fn eval_all(exprs: &[Expr], x: &[f64], w: &[f64], out: &mut [f64]) {
    let mut vars = [0.0f64; 16];
    let n = x.len() + w.len();
    if n <= vars.len() {
        vars[..x.len()].copy_from_slice(x);
        vars[x.len()..n].copy_from_slice(w);
        for (o, e) in out.iter_mut().zip(exprs) {
            *o = e.eval(&vars[..n]);
        }
    } else {
        let vars: Vec<f64> = x.iter().chain(w).copied().collect();
        for (o, e) in out.iter_mut().zip(exprs) {
            *o = e.eval(&vars);
        }
    }
}

/// Best-effort `section.key` for a TOML error: the key on the offending line
/// plus the nearest preceding `[section]` header.
fn field_from_toml(message: &str, text: &str, span: Option<std::ops::Range<usize>>) -> String {
    if let Some(rest) = message.split("unknown field `").nth(1) {
        if let Some(key) = rest.split('`').next() {
            if let Some(span) = &span {
                if let Some(section) = section_at(text, span.start) {
                    return format!("{section}.{key}");
                }
            }
            return key.to_string();
        }
    }
    if let Some(rest) = message.split("missing field `").nth(1) {
        if let Some(key) = rest.split('`').next() {
            return key.to_string();
        }
    }
    let Some(span) = span else {
        return "config".into();
    };
    let line_start = text[..span.start.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[line_start..].lines().next().unwrap_or("");
    let key = line.split('=').next().unwrap_or("").trim();
    let key = if line.contains('=') && !key.is_empty() { key } else { "" };
    match (section_at(text, span.start), key) {
        (Some(s), "") => s,
        (Some(s), k) => format!("{s}.{k}"),
        (None, "") => "config".into(),
        (None, k) => k.to_string(),
    }
}

fn section_at(text: &str, offset: usize) -> Option<String> {
    text[..offset.min(text.len())]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PENDULUM: &str = "[system]\nname = \"pendulum\"\n[noise]\nalpha = 0.5\nQ = 5\n[grid]\ncounts = [8, 8]\nsamples = 10\n";

    fn field_of(text: &str) -> String {
        match RunConfig::from_toml_str(text).unwrap_err() {
            Error::Config { field, .. } => field,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn pendulum_defaults() {
        let cfg = RunConfig::from_toml_str(PENDULUM).unwrap();
        let part = cfg.partition().unwrap();
        assert_eq!(part.counts(), &[8, 8]);
        assert_eq!(part.domain().wrap(), &[true, true]);
        assert_eq!(cfg.samples().unwrap(), 10);
        assert_eq!(cfg.noise_atoms().unwrap().len(), 5);
        assert_eq!(cfg.sink_policy().unwrap(), SinkPolicy::SinkUnstable);
        let map = cfg.map().unwrap();
        let reference = crate::system::builtin_pendulum(0.5, 5, 0.1).unwrap();
        for w in map.noise().values() {
            assert_eq!(map.step(&[0.3, -0.2], w), reference.step(&[0.3, -0.2], w));
        }
        let again = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn errors_name_fields() {
        assert_eq!(field_of(&PENDULUM.replace("Q = 5", "Q = 0")), "noise.Q");
        assert_eq!(field_of(&PENDULUM.replace("alpha = 0.5", "alpha = -1.0")), "noise.alpha");
        assert_eq!(field_of(&PENDULUM.replace("samples = 10", "samples = 0")), "grid.samples");
        assert_eq!(field_of(&PENDULUM.replace("[8, 8]", "[8]")), "grid.counts");
        assert_eq!(field_of(&PENDULUM.replace("pendulum", "duffing")), "system.name");
        assert_eq!(field_of(&PENDULUM.replace("Q = 5", "Q = 5\nbeta = 1")), "noise.beta");
        assert_eq!(field_of(&PENDULUM.replace("samples = 10", "samples = \"ten\"")), "grid.samples");
        assert_eq!(field_of(&format!("{PENDULUM}[analysis]\nmethod = \"newton\"\n")), "analysis.method");
        assert_eq!(field_of(&format!("{PENDULUM}[simulate]\ndelta = 1.5\n")), "simulate.delta");
        assert_eq!(field_of("[noise]\nQ = 3\n"), "system");
    }

    #[test]
    fn custom_map_and_field() {
        let text = "[system]\nname = \"custom\"\nstate = [\"x\"]\nnoise = \"w\"\nmap = [\"(0.5 + w) * x\"]\n\
                    [noise]\nalpha = 0.25\nQ = 2\n[domain]\nlower = [-1.0]\nupper = [1.0]\n[grid]\ncounts = [10]\n";
        let cfg = RunConfig::from_toml_str(text).unwrap();
        let map = cfg.map().unwrap();
        assert_eq!(map.step(&[0.8], &[0.125]), vec![0.5]);
        assert_eq!(cfg.domain().unwrap().wrap(), &[false]);

        let ode = text.replace("map = [\"(0.5 + w) * x\"]", "field = [\"-x\"]");
        let cfg = RunConfig::from_toml_str(&ode).unwrap();
        let y = cfg.map().unwrap().step(&[1.0], &[0.0])[0];
        assert!((y - (-0.1f64).exp()).abs() < 1e-7);

        assert_eq!(field_of(&text.replace("(0.5 + w) * x", "0.5 * z")), "system.map[0]");
        assert_eq!(field_of(&text.replace("map = [\"(0.5 + w) * x\"]", "")), "system.field");
        assert_eq!(field_of(&text.replace("lower = [-1.0]\n", "")), "domain.lower");
        assert_eq!(field_of(&text.replace("(0.5 + w) * x", "x + 1")), "system.equilibrium");
    }
}
