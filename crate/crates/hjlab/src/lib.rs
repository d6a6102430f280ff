//! Numerical toolkit for Hamilton-Jacobi equations with convex, superlinear
//! Hamiltonians: Hopf-Lax solutions, BV bounds on backward-characteristic
//! slopes, Kolmogorov ε-entropy of solution sets, and a counterexample
//! construction for degenerate Hamiltonians.

pub mod bv;
pub mod counterexample;
pub mod datum;
pub mod entropy;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod hopflax;

pub use datum::InitialDatum;
pub use error::{Error, Result};
pub use grid::{Domain, GridFunction, GridSpec, VectorField};
pub use hamiltonian::{ConvexityModuli, HamiltonianModel, LagrangianView};
pub use hopflax::{solve, HopfLax, SolveResult};
