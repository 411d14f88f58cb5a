//! Numerical laboratory for the scaled two-species Vlasov–Maxwell–Boltzmann
//! system with cutoff soft-potential collisions, its two-fluid incompressible
//! Navier–Stokes–Fourier–Maxwell limit with Ohm's law, and the energy
//! functional machinery used to study the hydrodynamic limit.
//!
//! Layout mirrors the physics:
//! - [`grid`], [`fourier`]: phase-space discretization and spectral calculus;
//! - [`collision`]: the cutoff Boltzmann operator Q, the linearized operator
//!   and its matrix realization, the nonlinear term, transport coefficients;
//! - [`macromicro`]: macro–micro decomposition, fluid moments, conservation
//!   residuals;
//! - [`fields`]: Maxwell subsystem and Lorentz force assembly;
//! - [`vmb`]: stiff IMEX integration of the kinetic system;
//! - [`nsfm`]: pseudo-spectral solver for the limit fluid system;
//! - [`functionals`]: every norm/energy/dissipation functional of interest;
//! - [`harness`]: epsilon sweeps, convergence tables, invariant verdicts;
//! - [`config`], [`io`], [`cli`]: run configuration and artifacts.

pub mod error;
pub mod grid;
pub mod fourier;
pub mod collision;
pub mod macromicro;
pub mod fields;
pub mod vmb;
pub mod nsfm;
pub mod functionals;
pub mod harness;
pub mod io;
pub mod config;
pub mod cli;

pub use error::{Error, Result};
