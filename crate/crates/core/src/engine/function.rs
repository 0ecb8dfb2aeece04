use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::value::{Value, ValueError};

/// Built-in functions usable in projection parameters and aggregations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Function {
    Id,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Avg,
    Min,
    Max,
    Sum,
    Count,
}

impl Function {
    pub fn name(self) -> &'static str {
        match self {
            Function::Id => "id",
            Function::Neg => "neg",
            Function::Add => "add",
            Function::Sub => "sub",
            Function::Mul => "mul",
            Function::Div => "div",
            Function::Avg => "avg",
            Function::Min => "min",
            Function::Max => "max",
            Function::Sum => "sum",
            Function::Count => "count",
        }
    }

    /// Functions allowed as the aggregate of a window.
    pub fn is_aggregate(self) -> bool {
        matches!(
            self,
            Function::Avg | Function::Sum | Function::Min | Function::Max | Function::Count
        )
    }

    pub fn check_arity(self, n: usize) -> Result<(), ValueError> {
        let (ok, expected) = match self {
            Function::Id | Function::Neg => (n == 1, "1"),
            Function::Sub | Function::Div => (n == 2, "2"),
            _ => (n >= 1, "at least 1"),
        };
        if ok {
            Ok(())
        } else {
            Err(ValueError::Arity {
                function: self.name(),
                expected,
                got: n,
            })
        }
    }

    pub fn apply(self, args: &[&Value]) -> Result<Value, ValueError> {
        self.check_arity(args.len())?;
        match self {
            Function::Id => Ok(args[0].clone()),
            Function::Count => Ok(Value::Int(args.len() as i64)),
            Function::Min | Function::Max => {
                let mut best = args[0];
                for v in &args[1..] {
                    let ord = v.compare(best)?;
                    let better = match self {
                        Function::Min => ord.is_lt(),
                        _ => ord.is_gt(),
                    };
                    if better {
                        best = v;
                    }
                }
                Ok(best.clone())
            }
            _ => {
                if args.iter().all(|v| matches!(v, Value::Int(_))) {
                    if let Some(v) = self.apply_int(args) {
                        return Ok(v);
                    }
                }
                let xs = numbers(args)?;
                let x = match self {
                    Function::Neg => -xs[0],
                    Function::Add | Function::Sum => xs.iter().sum(),
                    Function::Sub => xs[0] - xs[1],
                    Function::Mul => xs.iter().product(),
                    Function::Div => xs[0] / xs[1],
                    Function::Avg => xs.iter().sum::<f64>() / xs.len() as f64,
                    _ => unreachable!("handled above"),
                };
                Ok(Value::Float(x))
            }
        }
    }

    /// Integer arithmetic where it is exact; `None` falls back to floats.
    fn apply_int(self, args: &[&Value]) -> Option<Value> {
        let ints: Vec<i64> = args
            .iter()
            .map(|v| match v {
                Value::Int(i) => *i,
                _ => 0,
            })
            .collect();
        let r = match self {
            Function::Neg => ints[0].checked_neg(),
            Function::Add | Function::Sum => ints.iter().try_fold(0i64, |a, b| a.checked_add(*b)),
            Function::Sub => ints[0].checked_sub(ints[1]),
            Function::Mul => ints.iter().try_fold(1i64, |a, b| a.checked_mul(*b)),
            _ => None,
        };
        r.map(Value::Int)
    }
}

fn numbers(args: &[&Value]) -> Result<Vec<f64>, ValueError> {
    args.iter()
        .map(|v| {
            v.as_f64().ok_or(ValueError::TypeMismatch {
                left: "number",
                right: v.type_name(),
            })
        })
        .collect()
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownFunction(pub String);

impl fmt::Display for UnknownFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown function `{}`", self.0)
    }
}

impl std::error::Error for UnknownFunction {}

impl FromStr for Function {
    type Err = UnknownFunction;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim_end_matches("()").to_ascii_lowercase().as_str() {
            "id" | "identity" => Function::Id,
            "neg" => Function::Neg,
            "add" | "+" => Function::Add,
            "sub" | "-" => Function::Sub,
            "mul" | "*" | "×" | "x" => Function::Mul,
            "div" | "/" => Function::Div,
            "avg" | "mean" => Function::Avg,
            "min" => Function::Min,
            "max" => Function::Max,
            "sum" => Function::Sum,
            "count" => Function::Count,
            _ => return Err(UnknownFunction(s.to_string())),
        })
    }
}

impl Serialize for Function {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Function {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
