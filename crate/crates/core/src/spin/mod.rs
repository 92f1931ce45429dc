//! Clifford algebra, frame transfer, the spinor connection, the chart around
//! a configuration and the action of diffeomorphisms.

mod clifford;
mod config;
mod covariant;
mod diffeo;
mod frame;

pub use clifford::{spin_lift, CliffordModel, SpinMatrix};
pub use config::{
    chart_from, chart_to, component_velocity, Configuration, TangentSection, UNIT_NORM_TOL,
};
pub use covariant::{clifford_two_form, spin_covariant_derivative};
pub use diffeo::{pushforward, Diffeo, GridSymmetry, Interpolation, ResampledDiffeo, Stencil};
pub use frame::{bg_operators, NodeFrame};

pub(crate) use clifford::{bivector_action, bivector_pairing, PAIRS};
pub(crate) use config::{component_velocity_with, project_orthogonal};
pub(crate) use covariant::{connection_action, connection_node, coordinate_covariant, FrameGeometry};
