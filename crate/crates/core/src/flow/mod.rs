//! Time integration of the configuration flows and the mapping flow, gauge
//! reconstruction and slice projection.

mod evolution;
mod integrator;
mod mapping;
mod slice;
mod trace;

pub use evolution::{
    flow_velocity, pack_configuration, run, run_observed, trace_row, unpack_configuration,
    ConfigurationSystem, Evaluation, Flow, FlowKind, StepInfo,
};
pub use integrator::{IntegratorConfig, OdeSystem, Scheme, StepReport, Stepper};
pub use mapping::{
    configuration_distance, mapping_rhs, pullback_metric, reconstruct_gauged, DiffeoState,
    GaugeReconstructor, MappingSystem,
};
pub use slice::{project_neutral_modes, project_to_slice, solve_slice_system, SliceOptions, SliceProjection};
pub use trace::{FlowTrace, NormColumn, TraceRow, TRACE_HEADER};
