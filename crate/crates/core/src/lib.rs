//! Gaussian-state simulator for bang-bang expansion loops of a levitated
//! particle: moment propagation with displacement and frequency noise,
//! force-sensing Fisher information, two-particle entanglement and a
//! truncated Fock-space master-equation oracle.

pub mod error;
pub mod frame;
pub mod gaussian;
pub mod metrology;
pub mod ode;
pub mod oracle;
pub mod physcal;
pub mod protocol;
pub mod twobody;

pub use error::{Error, Result};
pub use frame::FramedState;
pub use gaussian::{
    evolve_schedule, evolve_schedule_framed, evolve_segment, expansion_eta, purity, sigma_x, thermal_state,
    GaussianState1, NoiseParams, Potential, Schedule, Segment, ThermalSpec,
};
