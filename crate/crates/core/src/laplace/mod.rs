//! Restricted Laplace transform f̂(p) = ∫ₐᵇ f(x) e^{-px} dx and the
//! decomposition of the spectral density built on it.

pub mod basis;
mod decompose;
mod transform;

pub use decompose::{
    decompose, decompose_with_frequencies, find_frequency, highest_spike, imaginary_axis_samples, norms,
    BasisTransform, UehlingTerm, DecomposeOptions, Decomposition, FrequencyEstimate, ImaginaryAxisSamples, IterationRecord, Oscillation,
};
pub use transform::{integrate_samples, laplace_transform, laplace_transform_checked, transform_samples, transform_weights};
