//! Semiclassical propagation of squeezed Gaussian wave packets.
//!
//! The crate transports Gaussian shapes along classical trajectories using
//! the flow differential, analyses periodically driven widths through the
//! monodromy of the variational equation and checks everything against a
//! split-step reference solution of the Schrödinger equation.

pub mod error;
pub mod floquet;
pub mod flow;
pub mod gaussian;
pub mod models;
pub mod ode;
pub mod oracle;
pub mod symplectic;

pub use error::{Error, Result};
pub use flow::{integrate_flow, lyapunov_estimate, FlowOptions, FlowSample, Trajectory};
pub use models::{make_model, HamiltonianModel, ModelKind};
pub use symplectic::{
    hs_norm, mobius_transform, siegel_from_wigner_form, wigner_form_from_siegel, PhaseSpacePoint, SiegelForm,
    SymplecticMatrix, WignerForm,
};
