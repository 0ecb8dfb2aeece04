use crate::peas::{aggregate_window, join_tuples, project_parameter, DerivationContext};

use super::spec::{Comparator, OperatorSpec, Parameter, Predicate, WindowMode, WindowSpec};
use super::value::Tuple;
use super::window::{StreamItem, Window};
use super::EngineError;

/// A tuple produced by a stateful operator, with the largest upstream
/// processing time among the items that contributed to it.
#[derive(Clone, Debug, PartialEq)]
pub struct Emitted {
    pub tuple: Tuple,
    pub carried_ns: u64,
}

pub fn predicate_holds(pred: &Predicate, t: &Tuple) -> Result<bool, EngineError> {
    let a = t
        .get(&pred.attribute)
        .ok_or_else(|| EngineError::MissingAttribute(pred.attribute.clone()))?;
    let ord = a.value.compare(&pred.value)?;
    Ok(match pred.op {
        Comparator::Lt => ord.is_lt(),
        Comparator::Le => ord.is_le(),
        Comparator::Gt => ord.is_gt(),
        Comparator::Ge => ord.is_ge(),
        Comparator::Eq => ord.is_eq(),
        Comparator::Ne => ord.is_ne(),
    })
}

/// σ never creates data: the tuple passes through untouched or not at all.
pub fn apply_selection(pred: &Predicate, t: Tuple) -> Result<Option<Tuple>, EngineError> {
    Ok(predicate_holds(pred, &t)?.then_some(t))
}

/// Π: one output attribute per parameter.
pub fn apply_projection(
    parameters: &[Parameter],
    t: &Tuple,
    ctx: Option<&DerivationContext>,
) -> Result<Tuple, EngineError> {
    let attrs = parameters
        .iter()
        .map(|p| project_parameter(p, t, ctx))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Tuple::new(t.timestamp, attrs))
}

/// Σ over the current contents of `w`, stamped `now`. `None` for an empty
/// window.
pub fn apply_aggregation<T: StreamItem>(
    parameter: &Parameter,
    w: &Window<T>,
    now: u64,
    ctx: Option<&DerivationContext>,
) -> Result<Option<Tuple>, EngineError> {
    if w.is_empty() {
        return Ok(None);
    }
    let items: Vec<&Tuple> = w.iter().map(StreamItem::tuple).collect();
    Ok(Some(aggregate_window(parameter, &items, now, ctx)?))
}

/// Stateful Σ. Time windows fire at multiples of `slide`: the first arrival
/// at or past a boundary `b` emits the aggregate of items in `[b - size, b)`,
/// stamped with the arrival's timestamp. Count windows fire every `slide`
/// arrivals once `size` items are buffered. Nothing is flushed at the end
/// of a stream.
#[derive(Clone, Debug)]
pub struct Aggregator<T = Tuple> {
    parameter: Parameter,
    window: Window<T>,
    next_boundary: Option<u64>,
    pushes: u64,
}

impl<T: StreamItem> Aggregator<T> {
    pub fn new(parameter: Parameter, spec: WindowSpec) -> Result<Self, EngineError> {
        if !parameter.function.is_aggregate() {
            return Err(EngineError::Arity(format!(
                "`{}` is not an aggregate",
                parameter.function
            )));
        }
        Ok(Aggregator {
            parameter,
            window: Window::new(spec)?,
            next_boundary: None,
            pushes: 0,
        })
    }

    pub fn from_spec(op: &OperatorSpec) -> Result<Self, EngineError> {
        op.validate()?;
        match op {
            OperatorSpec::Aggregation { parameters, window } => Aggregator::new(parameters[0].clone(), *window),
            other => Err(EngineError::WrongOperator(other.kind())),
        }
    }

    pub fn window(&self) -> &Window<T> {
        &self.window
    }

    pub fn on_arrival(&mut self, item: T, ctx: Option<&DerivationContext>) -> Result<Vec<Emitted>, EngineError> {
        let spec = *self.window.spec();
        let ts = item.tuple().timestamp;
        if let Some(last) = self.window.last_timestamp() {
            if ts < last {
                return Err(EngineError::NonMonotoneTimestamp { last, got: ts });
            }
        }
        let mut out = Vec::new();
        match spec.mode {
            WindowMode::Time => {
                let first_after = |t: u64| (t / spec.slide + 1) * spec.slide;
                let mut b = *self.next_boundary.get_or_insert_with(|| first_after(ts));
                while b <= ts {
                    let lo = b.saturating_sub(spec.size);
                    let members: Vec<&T> = self
                        .window
                        .iter()
                        .filter(|i| (lo..b).contains(&i.tuple().timestamp))
                        .collect();
                    if !members.is_empty() {
                        out.push(self.emit(&members, ts, ctx)?);
                    }
                    b += spec.slide;
                    let newest = self.window.last_timestamp().unwrap_or(0);
                    if self.window.is_empty() || newest < b.saturating_sub(spec.size) {
                        b = b.max(first_after(ts));
                    }
                }
                self.next_boundary = Some(b);
                self.window.push(item)?;
            }
            WindowMode::Count => {
                self.window.push(item)?;
                self.pushes += 1;
                if self.pushes >= spec.size && (self.pushes - spec.size).is_multiple_of(spec.slide) {
                    let members: Vec<&T> = self.window.iter().collect();
                    out.push(self.emit(&members, ts, ctx)?);
                }
            }
        }
        Ok(out)
    }

    fn emit(&self, members: &[&T], ts: u64, ctx: Option<&DerivationContext>) -> Result<Emitted, EngineError> {
        let tuples: Vec<&Tuple> = members.iter().map(|i| i.tuple()).collect();
        let tuple = aggregate_window(&self.parameter, &tuples, ts, ctx)?;
        let carried_ns = members.iter().map(|i| i.carried_ns()).max().unwrap_or(0);
        Ok(Emitted { tuple, carried_ns })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// ⋈ for one arrival: match `new` against the opposite window on key
/// equality, producing one output per match (left attributes first), then
/// buffer `new` in its own window. The opposite window is first advanced to
/// `new`'s timestamp.
#[allow(clippy::too_many_arguments)]
pub fn apply_join<T: StreamItem>(
    on: (&str, &str),
    meta: (&str, &str),
    left: &mut Window<T>,
    right: &mut Window<T>,
    new: T,
    side: Side,
    ctx: Option<&DerivationContext>,
) -> Result<Vec<Emitted>, EngineError> {
    let t = new.tuple();
    let (own, other, own_key, other_key) = match side {
        Side::Left => (left, right, on.0, on.1),
        Side::Right => (right, left, on.1, on.0),
    };
    let key = &t
        .get(own_key)
        .ok_or_else(|| EngineError::MissingAttribute(own_key.to_string()))?
        .value;
    other.advance(t.timestamp);
    let mut out = Vec::new();
    for m in other.iter() {
        let mt = m.tuple();
        let mk = &mt
            .get(other_key)
            .ok_or_else(|| EngineError::MissingAttribute(other_key.to_string()))?
            .value;
        if !key.compare(mk)?.is_eq() {
            continue;
        }
        let ts = t.timestamp.max(mt.timestamp);
        let (l, r) = match side {
            Side::Left => (t, mt),
            Side::Right => (mt, t),
        };
        let tuple = join_tuples(l, r, meta, ts, ctx)?;
        out.push(Emitted {
            tuple,
            carried_ns: new.carried_ns().max(m.carried_ns()),
        });
    }
    own.push(new)?;
    Ok(out)
}

/// Stateful ⋈ holding one window per input.
#[derive(Clone, Debug)]
pub struct Joiner<T = Tuple> {
    on: (String, String),
    meta: (String, String),
    left: Window<T>,
    right: Window<T>,
}

impl<T: StreamItem> Joiner<T> {
    pub fn from_spec(op: &OperatorSpec) -> Result<Self, EngineError> {
        op.validate()?;
        match op {
            OperatorSpec::Join {
                on,
                meta,
                left_window,
                right_window,
            } => {
                let m = meta.as_ref().unwrap_or(on);
                Ok(Joiner {
                    on: (on[0].clone(), on[1].clone()),
                    meta: (m[0].clone(), m[1].clone()),
                    left: Window::new(*left_window)?,
                    right: Window::new(*right_window)?,
                })
            }
            other => Err(EngineError::WrongOperator(other.kind())),
        }
    }

    pub fn on_arrival(
        &mut self,
        side: Side,
        item: T,
        ctx: Option<&DerivationContext>,
    ) -> Result<Vec<Emitted>, EngineError> {
        apply_join(
            (&self.on.0, &self.on.1),
            (&self.meta.0, &self.meta.1),
            &mut self.left,
            &mut self.right,
            item,
            side,
            ctx,
        )
    }

    pub fn windows(&self) -> (&Window<T>, &Window<T>) {
        (&self.left, &self.right)
    }
}
