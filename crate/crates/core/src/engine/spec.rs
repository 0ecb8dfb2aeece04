use std::fmt;

use serde::{Deserialize, Serialize};

use super::function::Function;
use super::value::Value;
use super::EngineError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Selection,
    Projection,
    Aggregation,
    Join,
}

impl OperatorKind {
    /// Join and aggregation work on sliding windows.
    pub fn is_windowed(self) -> bool {
        matches!(self, OperatorKind::Aggregation | OperatorKind::Join)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            OperatorKind::Selection => "σ",
            OperatorKind::Projection => "Π",
            OperatorKind::Aggregation => "Σ",
            OperatorKind::Join => "⋈",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OperatorKind::Selection => "selection",
            OperatorKind::Projection => "projection",
            OperatorKind::Aggregation => "aggregation",
            OperatorKind::Join => "join",
        };
        f.write_str(s)
    }
}

/// One operation of an operator: `fn` applied to `attributes`, producing
/// the attribute `name`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub attributes: Vec<String>,
    #[serde(rename = "fn")]
    pub function: Function,
    pub name: String,
}

impl Parameter {
    pub fn new<S: Into<String>>(
        attributes: impl IntoIterator<Item = S>,
        function: Function,
        name: impl Into<String>,
    ) -> Self {
        Parameter {
            attributes: attributes.into_iter().map(Into::into).collect(),
            function,
            name: name.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<", alias = "lt")]
    Lt,
    #[serde(rename = "<=", alias = "le")]
    Le,
    #[serde(rename = ">", alias = "gt")]
    Gt,
    #[serde(rename = ">=", alias = "ge")]
    Ge,
    #[serde(rename = "==", alias = "eq")]
    Eq,
    #[serde(rename = "!=", alias = "ne")]
    Ne,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub attribute: String,
    pub op: Comparator,
    pub value: Value,
}

impl Predicate {
    pub fn new(attribute: impl Into<String>, op: Comparator, value: impl Into<Value>) -> Self {
        Predicate {
            attribute: attribute.into(),
            op,
            value: value.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// size/slide in milliseconds
    Time,
    /// size/slide in tuples
    Count,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub mode: WindowMode,
    pub size: u64,
    pub slide: u64,
}

impl Default for WindowSpec {
    /// Tumbling 10 s time window.
    fn default() -> Self {
        WindowSpec {
            mode: WindowMode::Time,
            size: 10_000,
            slide: 10_000,
        }
    }
}

impl WindowSpec {
    pub fn time(size_ms: u64, slide_ms: u64) -> Self {
        WindowSpec {
            mode: WindowMode::Time,
            size: size_ms,
            slide: slide_ms,
        }
    }

    pub fn count(size: u64, slide: u64) -> Self {
        WindowSpec {
            mode: WindowMode::Count,
            size,
            slide,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.slide >= 1 && self.size >= self.slide {
            Ok(())
        } else {
            Err(EngineError::InvalidWindow(*self))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Selection {
        predicate: Predicate,
    },
    Projection {
        parameters: Vec<Parameter>,
    },
    /// Exactly one parameter; its function is the aggregate.
    Aggregation {
        parameters: Vec<Parameter>,
        #[serde(default)]
        window: WindowSpec,
    },
    /// Equi-join on `on = [left, right]`. `meta` names the attribute pair
    /// whose PEAS meta-data the join merges; it defaults to `on`.
    Join {
        on: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        meta: Option<Vec<String>>,
        #[serde(default)]
        left_window: WindowSpec,
        #[serde(default)]
        right_window: WindowSpec,
    },
}

impl OperatorSpec {
    pub fn kind(&self) -> OperatorKind {
        match self {
            OperatorSpec::Selection { .. } => OperatorKind::Selection,
            OperatorSpec::Projection { .. } => OperatorKind::Projection,
            OperatorSpec::Aggregation { .. } => OperatorKind::Aggregation,
            OperatorSpec::Join { .. } => OperatorKind::Join,
        }
    }

    pub fn aggregation(parameter: Parameter, window: WindowSpec) -> Self {
        OperatorSpec::Aggregation {
            parameters: vec![parameter],
            window,
        }
    }

    pub fn join(left: &str, right: &str, left_window: WindowSpec, right_window: WindowSpec) -> Self {
        OperatorSpec::Join {
            on: vec![left.to_string(), right.to_string()],
            meta: None,
            left_window,
            right_window,
        }
    }

    /// Checks parameter counts, function arities and window shapes.
    pub fn validate(&self) -> Result<(), EngineError> {
        match self {
            OperatorSpec::Selection { .. } => Ok(()),
            OperatorSpec::Projection { parameters } => {
                if parameters.is_empty() {
                    return Err(EngineError::Arity("projection needs at least one parameter".into()));
                }
                for p in parameters {
                    p.function.check_arity(p.attributes.len())?;
                }
                Ok(())
            }
            OperatorSpec::Aggregation { parameters, window } => {
                if parameters.len() != 1 {
                    return Err(EngineError::Arity(format!(
                        "aggregation takes exactly one parameter, got {}",
                        parameters.len()
                    )));
                }
                let p = &parameters[0];
                if !p.function.is_aggregate() {
                    return Err(EngineError::Arity(format!("`{}` is not an aggregate", p.function)));
                }
                if p.attributes.len() != 1 {
                    return Err(EngineError::Arity(format!(
                        "aggregation reads exactly one attribute, got {}",
                        p.attributes.len()
                    )));
                }
                window.validate()
            }
            OperatorSpec::Join {
                on,
                meta,
                left_window,
                right_window,
            } => {
                if on.len() != 2 {
                    return Err(EngineError::Arity(format!(
                        "join needs two attributes, got {}",
                        on.len()
                    )));
                }
                if let Some(m) = meta {
                    if m.len() != 2 {
                        return Err(EngineError::Arity(format!(
                            "join meta pair needs two attributes, got {}",
                            m.len()
                        )));
                    }
                }
                left_window.validate()?;
                right_window.validate()
            }
        }
    }
}
