//! Age-structured compartmental model in deterministic (Euler) and
//! chain-binomial form.

pub mod contacts;
pub mod model;
pub mod params_file;
pub mod step;

pub use contacts::{blended_matrix, compliance_weight, effective_contact_matrix, force_of_infection, TransmissionRates};
pub use model::{AgeStructure, Compartment, CompartmentState, ContactMatrixSet, EpiParams, Matrix, Vector};
pub use params_file::ParamFile;
pub use step::{ContactSchedule, EpiModel, Flows, Mode, SimOutcome, Substep};
