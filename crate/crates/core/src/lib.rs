//! Mild Schrödinger dynamics on periodic grids under sampled time-dependent
//! potentials, mixed Lebesgue norms, functional derivatives of the solution
//! with respect to the potential, and empirical checks of the associated
//! bounds.
//!
//! Units: `ħ = 1`, `2m = 1`, so the free Hamiltonian is `−Δ`.

pub mod banach;
pub mod error;
pub mod estimates;
pub mod propagation;
pub mod response;
pub mod spectral;

pub use banach::{Exponent, ExponentFamily, NormReport};
pub use error::{Error, Result};
pub use estimates::{BoundReport, ConstantEstimate, EmpiricalConstants, Partition, StateEnsemble};
pub use num_complex::Complex64;
pub use propagation::{MildSolution, PicardConfig, SampledPotential, Subintervals, Trajectory};
pub use response::{DensityField, ObservableOperator, ResponseKernel, SpatialField};
pub use spectral::{Grid, StateVector, TimeGrid};
