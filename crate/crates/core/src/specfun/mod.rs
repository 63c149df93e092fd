//! Special functions needed by the Dirac–Coulomb solutions and the Laplace
//! basis: complex Γ, Kummer's ₁F₁ and the exponential integrals Eₙ.
//!
//! All functions are pure and thread-safe.

mod expint;
mod gamma;
mod hyp1f1;

pub use expint::{expint_en, expint_en_complex};
pub use gamma::{gamma_complex, gamma_real, ln_abs_gamma, ln_gamma_complex, ln_gamma_real};
pub use hyp1f1::{hyp1f1, hyp1f1_real};

/// Complex numbers as used throughout the crate.
pub type ComplexValue = num_complex::Complex64;
