//! Steklov spectra of weighted Dirichlet-to-Neumann operators `Λ_a = a^{1/2} Λ a^{1/2}`
//! on the unit circle, the regularized zeta difference `ζ_a - 2ζ_R` on the real
//! axis, closed-form second variations around the disk and the spectral
//! deformation flow that carries a weight to the constant function.

pub mod cli;
pub mod error;
pub mod flow;
pub mod fourier;
pub mod linalg;
pub mod operators;
pub mod quadrature;
pub mod spectrum;
pub mod variation;
pub mod zeta;

pub use error::{Error, Result};
pub use fourier::{make_alpha_tau, FourierFunction, MobiusMap, Orientation};
pub use operators::{build_discretization, SteklovDiscretization};
pub use spectrum::{steklov_spectrum, SpectrumResult};
pub use zeta::{riemann_zeta_deriv, zeta_diff_deriv, ZetaEvaluation};
