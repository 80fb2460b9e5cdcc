pub mod design;
pub mod distributions;
pub mod error;
pub mod oc;
pub mod optimize;
pub mod study;
pub mod utility;

pub use design::{BasketModel, Design, OutcomeVector, PhiWeights, TuningParams, WeightMatrix};
pub use distributions::{BetaShapes, DivergenceKind};
pub use error::{Error, Result};
pub use oc::{EvalBackend, OCResult, OcEngine, Scenario};
pub use utility::{Averaging, UtilityKind, UtilityObjective, UtilityParams, UtilitySpec};
pub use optimize::{Algorithm, OptimizerConfig, OptimizerResult, SearchBox};
