//! Structural identifiability, observability and input-reconstructibility
//! analysis for nonlinear ODE models.
//!
//! The crate decides, for models `dx/dt = f(x, θ, u, w)`, `y = g(x, θ, u, w)`
//! with rational (or rationalizable) right-hand sides, which states are
//! observable, which parameters are locally identifiable and which unknown
//! inputs are reconstructible from the outputs. Two engines share the same
//! model representation and verdict vocabulary:
//!
//! * [`fispo`] builds extended Lie-derivative blocks of the outputs
//!   symbolically and decides rank by specializing the resulting matrix at
//!   random prime-field points.
//! * [`probobs`] integrates the model and its variational system as truncated
//!   power series over a prime field at a random specialization and ranks the
//!   resulting output-sensitivity Jacobian.
//!
//! Both report through [`analysis::AnalysisReport`]. The bundled benchmark
//! corpus lives in [`model::corpus`] and drives the regression suites in
//! [`suite`].

pub mod analysis;
pub mod expr;
pub mod field;
pub mod fispo;
pub mod model;
pub mod probobs;
pub mod rationalize;
pub mod suite;

pub use analysis::{Algorithm, AnalysisOptions, AnalysisReport, AnalysisStatus, EngineError};
pub use expr::{ExprArena, ExprId, SymbolId};
pub use field::{FieldElement, FieldMatrix, PrimeField, TruncatedSeries};
pub use model::{AugmentedModel, DerivativeCap, ModelError, OdeModel, UnknownInput};

/// Runs the selected engine on one model.
pub fn analyze(
    model: &OdeModel,
    algorithm: Algorithm,
    options: &AnalysisOptions,
) -> Result<AnalysisReport, EngineError> {
    match algorithm {
        Algorithm::Fispo => fispo::fispo_test(model, options),
        Algorithm::ProbObs => probobs::prob_obs_test(model, options),
    }
}
