//! Decay-rate fits, Lojasiewicz exponent estimates, rate laws and the
//! comparison ODE behind the decay estimates.

mod fit;
mod lemma;
mod theta;

pub use fit::{
    dissipation_tail, estimate_energy_limit, fit_decay, fit_energy_decay, fit_gradient_decay, fit_model,
    linear_regression, DecayFit, DecayModel, FitWindow, MIN_FIT_ROWS,
};
pub use lemma::{decay_bound, decay_solution, verify_decay_lemma, DecayLemmaReport};
pub use theta::{estimate_theta, rate_laws, theil_sen, ThetaEstimate, MIN_THETA_ROWS, THETA_CEILING};
