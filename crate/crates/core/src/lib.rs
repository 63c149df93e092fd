//! Nonperturbative vacuum polarization of hydrogen-like ions and heavy atoms.
//!
//! The crate builds the regularized Dirac–Coulomb spectral density from
//! closed-form radial solutions, decomposes it in the restricted Laplace
//! domain, extrapolates the coefficient of the 1/x⁵ tail to infinite
//! ultraviolet cut-off, and integrates the rescaled renormalization flow that
//! turns the one-electron result into the many-electron density.
//!
//! Lengths are in Compton units (x = r·m) and momenta in units of m.
//!
//! | module | contents |
//! |--------|----------|
//! | [`specfun`] | complex Γ, ₁F₁, Eₙ |
//! | [`quad`] | Gauss–Legendre and adaptive Gauss–Kronrod quadrature |
//! | [`radial`] | bound and continuum radial Dirac–Coulomb solutions |
//! | [`density`] | the spectral density 𝗒 summed over angular channels |
//! | [`uehling`] | one-loop running coupling and Uehling density |
//! | [`laplace`] | restricted Laplace transforms and the decomposition |
//! | [`extrapolate`] | cut-off extrapolation and the piecewise 𝗐₅ fit |
//! | [`flow`] | the dilated flow, ν₅ and the long-range density |
//! | [`pipeline`] | staged, cached command-line pipeline |

pub mod density;
pub mod error;
pub mod extrapolate;
pub mod flow;
pub mod laplace;
pub mod pipeline;
pub mod quad;
pub mod radial;
pub mod specfun;
pub mod uehling;

pub use error::{Error, Result};

/// Fine-structure constant (CODATA 2018).
pub const ALPHA: f64 = 7.297_352_569_3e-3;
