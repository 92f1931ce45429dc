//! The discrete energy, its exact negative gradient, the diffeomorphism
//! operators `lambda^*` and `lambda`, and the gauge-fixed and
//! volume-normalized gradients.

mod functional;
mod gauge;
mod lambda;

pub use functional::{
    energy, energy_and_gradient, gradient, gradient_scaling_q1_check, gradient_scaling_q2_check,
    GradientResult,
};
pub use gauge::{
    gauge_vector, gauged_gradient, integrated_trace, loja_ratio, volume_normalized_gradient,
    GaugeContext,
};
pub use lambda::{lambda, lambda_star};

pub(crate) use functional::energy_and_gradient_with;
pub(crate) use gauge::{gauged_energy_and_gradient_with, volume_normalize};
pub(crate) use lambda::lambda_star_spectral;
