//! Set-oriented stability analysis for discrete-time stochastic maps.
//!
//! A system `x_{n+1} = T(x_n, ξ_n)` with finitely many noise atoms is
//! discretized on a regular box grid. The resulting row-stochastic transfer
//! matrix is split into the attractor block and the sub-Markov block `P₁`
//! over the remaining cells; stability of the equilibrium is then read off
//! `P₁` through:
//!
//! * an exact graph test for transience (no closed class of cells),
//! * a Lyapunov measure `μ̄` with `μ̄·P₁ < γ·μ̄` cellwise,
//! * a Koopman-resolvent Lyapunov function `V = (I − P₁)⁻¹ f`,
//! * a geometric decay fit of `‖m·P₁ⁿ‖₁`.
//!
//! Invariant measures of the full matrix and a Monte Carlo estimate of the
//! non-convergent fraction of initial conditions complement the certificate.
//!
//! ```no_run
//! use ulam_stability::prelude::*;
//!
//! let map = builtin_pendulum(0.5, 5, 0.1).unwrap();
//! let domain = Domain::symmetric_box(&[std::f64::consts::PI; 2], &[true, true]).unwrap();
//! let partition = Partition::new(domain, vec![50, 50]).unwrap();
//! let tm = TransferMatrix::build(&map, &partition, 100, 7, SinkPolicy::SinkUnstable).unwrap();
//! let x0 = partition.attractor_cells(&map.equilibrium, 0.0).unwrap();
//! let report = analyze(&tm, &x0, &AnalysisOptions::default()).unwrap();
//! assert!(report.is_certified());
//! ```

pub mod config;
pub mod error;
pub mod expr;
pub mod io;
pub mod partition;
pub mod simulate;
pub mod sparse;
pub mod stability;
pub mod system;
pub mod transfer;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::config::RunConfig;
    pub use crate::error::{Error, Result};
    pub use crate::partition::{CellSet, Domain, Location, Partition};
    pub use crate::simulate::{estimate_unstable_fraction, McConfig, McEstimate};
    pub use crate::sparse::CsrMatrix;
    pub use crate::stability::{
        analyze, find_closed_subpartitions, geometric_decay_fit, invariant_measure, is_transient,
        koopman_lyapunov_function, lyapunov_measure_series, lyapunov_measure_solve, support,
        verify_certificate, AnalysisOptions, LyapunovCertificate, LyapunovMethod, MeasureVector,
        Normalization, StabilityReport, SUPPORT_TOL,
    };
    pub use crate::system::{
        builtin_pendulum, builtin_rantzer, discretize_ode, quantize_uniform_noise,
        refine_fixed_point, FixedPoint, Method, NoiseAtoms, OdeSpec, StochasticMap,
    };
    pub use crate::transfer::{Decomposition, SinkPolicy, TransferMatrix};
}
