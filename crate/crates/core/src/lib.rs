//! Simulation and statistical verification laboratory for regularized
//! Liouville Brownian motion and degenerate diffusions.
//!
//! The library has three layers:
//!
//! * **Analytic layer** — the massive kernel `k_m`, the massive Green
//!   function, per-layer covariances ([`kernels`]), and modified Bessel
//!   oracles ([`bessel`]) used to cross-check the quadrature.
//! * **Sampling layer** — exact Gaussian sampling of the regularized field
//!   on lattices ([`field`]), coefficient bundles for four diffusion
//!   families ([`coefficients`]), Brownian paths with additive-functional
//!   time change ([`paths`]), and Euler–Maruyama solvers with kill/stopping
//!   logic ([`sde`]).
//! * **Verification layer** — generator and carré-du-champ evaluation
//!   ([`generator`]) and the Monte Carlo test battery ([`verify`]):
//!   martingale-problem tests, quadratic variation, cross-construction
//!   agreement, Liouville mass, and non-explosion checks.
//!
//! Everything is deterministic given a master seed: all random streams are
//! derived by counter-based hashing ([`rng`]), so ensembles reproduce
//! bit-identically regardless of thread count.

pub mod bessel;
pub mod coefficients;
pub mod config;
pub mod error;
pub mod experiment;
pub mod field;
pub mod generator;
pub mod kernels;
pub mod paths;
pub mod quad;
pub mod rng;
pub mod sde;
pub mod testfn;
pub mod verify;

pub use error::{Error, Result};
pub use kernels::KernelParams;
