//! Asymptotic approximations for the strongly anisotropic elliptic problem
//!
//! ```text
//! -ε⁻² ∂ₓ²u - ∂ᵧ²u = f        in (0,1)²
//! ∂ₓu(0,y) = ∂ₓu(1,y) = 0     (Neumann sides)
//! u(x,0) = φ₀(x), u(x,1) = φ₁(x)  (Dirichlet bottom/top)
//! ```
//!
//! The crate builds the composite approximations `u^[2n]` (mean part plus
//! boundary-layer corrected fluctuation) and checks them against two
//! independent routes: a five-point finite-difference reference solve and a
//! Feynman–Kac Monte Carlo estimator.
//!
//! Module map:
//! - [`problem`]: problem instances, mean/fluctuation split, compatibility.
//! - [`spectral`]: cosine series on `[0,1]` and the antiderivative stack.
//! - [`expansion`]: mean solution, layer terms, composite approximations.
//! - [`fdsolver`]: staggered grid, five-point operator, PCG solve.
//! - [`montecarlo`]: reflected/absorbed Euler–Maruyama estimator.
//! - [`validation`]: remainder norms, slope fits, bound checks.
//! - [`cli`]: the `aniso` command-line front end.

pub mod cli;
pub mod error;
pub mod expansion;
pub mod fdsolver;
pub mod montecarlo;
pub mod problem;
pub mod quadrature;
pub mod spectral;
pub mod tridiag;
pub mod validation;

pub use error::{Error, Result};
pub use expansion::{composite, ExpansionResult, LayerSide, LayerTerm, MeanSolution};
pub use fdsolver::{solve_fd, Field2D, Grid2D, SolveStats};
pub use montecarlo::{estimate_point, McConfig, McEstimate};
pub use problem::{builtin_problem, decompose, DecomposedProblem, ProblemSpec};
pub use spectral::{build_antiderivatives, cosine_coeffs, AntiderivativeStack, CosineSeries};
pub use validation::{fit_order, remainder_norms, ErrorReport};

/// Default number of quadrature intervals for every 1-D mean and projection.
pub const DEFAULT_QUAD_POINTS: usize = 1024;

/// Default cosine truncation.
pub const DEFAULT_MODES: usize = 64;
