//! Tuples, operator specifications, sliding windows and the four operators
//! σ, Π, Σ and ⋈. Meta-data work is delegated to [`crate::peas`].

mod function;
mod operators;
mod spec;
mod value;
mod window;

use thiserror::Error;

use crate::peas::PeasError;

pub use function::{Function, UnknownFunction};
pub use operators::{
    apply_aggregation, apply_join, apply_projection, apply_selection, predicate_holds, Aggregator, Emitted, Joiner,
    Side,
};
pub use spec::{Comparator, OperatorKind, OperatorSpec, Parameter, Predicate, WindowMode, WindowSpec};
pub use value::{Tuple, Value, ValueError};
pub use window::{StreamItem, Window};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("missing attribute `{0}`")]
    MissingAttribute(String),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error("arity: {0}")]
    Arity(String),
    #[error("invalid window {0:?}: need size >= slide >= 1")]
    InvalidWindow(WindowSpec),
    #[error("timestamp {got} arrived after {last}")]
    NonMonotoneTimestamp { last: u64, got: u64 },
    #[error("operator `{0}` cannot be used here")]
    WrongOperator(OperatorKind),
    #[error(transparent)]
    Peas(#[from] PeasError),
}
