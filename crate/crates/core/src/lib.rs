//! Oscillation integrals of generalized differences, dyadic martingales and
//! Calderón–Zygmund type kernels built from signed measures.

pub mod czkernel;
pub mod error;
pub mod funcspace;
pub mod martingale;
pub mod measure;
pub mod oscillation;
mod par;
pub mod quadrature;
pub mod sharpness;
mod spectral;

pub use error::{OscError, Result};
pub use funcspace::{FunctionKind, FunctionSpec, SamplePlan, SmoothnessClass};
pub use measure::{MeasureDescriptor, NamedMeasure, SignedMeasure};
pub use oscillation::{OscillationRequest, OscillationResult, Route};
