//! Casimir sections, cusp maps, transfer operators and random vector-field
//! switching for the Lorenz flow.

pub mod dynamics;
pub mod error;
pub mod noise;
pub mod pdmp;
pub mod section;
pub mod stats;
pub mod cusp;
pub mod transfer;

pub use dynamics::{casimir, casimir_derivatives, eval_field, FieldSpec, Frame, PhaseState, Trajectory, VectorField};
pub use error::{Error, Result};
pub use noise::{NoiseLaw, NoiseSequence};
pub use section::{MarkovRenewalTrace, ReturnSample, SectionEvent, SectionSpec};
pub use transfer::{Density, UlamMatrix};
