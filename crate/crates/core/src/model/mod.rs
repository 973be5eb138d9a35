//! ODE models: the data type, the text format, the benchmark corpus, and the
//! augmentation transforms that reduce identifiability and input
//! reconstructibility to observability.

mod augment;
pub mod corpus;
mod dsl;
mod types;

pub use augment::{AugmentedModel, Component, ComponentKind};
pub use dsl::{parse_model, DslError};
pub use types::{DerivativeCap, ModelError, OdeModel, UnknownInput};
