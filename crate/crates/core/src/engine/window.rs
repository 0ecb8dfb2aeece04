use std::collections::VecDeque;

use super::spec::{WindowMode, WindowSpec};
use super::value::Tuple;
use super::EngineError;

/// Anything that flows between operators: a tuple plus whatever the
/// transport wants to carry along with it.
pub trait StreamItem: Clone {
    fn tuple(&self) -> &Tuple;

    /// Processing time accumulated upstream, in nanoseconds.
    fn carried_ns(&self) -> u64 {
        0
    }
}

impl StreamItem for Tuple {
    fn tuple(&self) -> &Tuple {
        self
    }
}

/// Buffer of the items admissible under a [`WindowSpec`]. Time windows keep
/// items with `ts > now - size`; count windows keep the last `size` items.
#[derive(Clone, Debug)]
pub struct Window<T = Tuple> {
    spec: WindowSpec,
    buf: VecDeque<T>,
    last_ts: Option<u64>,
}

impl<T: StreamItem> Window<T> {
    pub fn new(spec: WindowSpec) -> Result<Self, EngineError> {
        spec.validate()?;
        Ok(Window {
            spec,
            buf: VecDeque::new(),
            last_ts: None,
        })
    }

    pub fn spec(&self) -> &WindowSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        self.buf.iter()
    }

    pub fn last_timestamp(&self) -> Option<u64> {
        self.last_ts
    }

    /// Buffers `item` and returns what fell out, oldest first.
    pub fn push(&mut self, item: T) -> Result<Vec<T>, EngineError> {
        let ts = item.tuple().timestamp;
        if let Some(last) = self.last_ts {
            if ts < last {
                return Err(EngineError::NonMonotoneTimestamp { last, got: ts });
            }
        }
        self.last_ts = Some(ts);
        self.buf.push_back(item);
        let mut evicted = self.advance(ts);
        if self.spec.mode == WindowMode::Count {
            while self.buf.len() as u64 > self.spec.size {
                evicted.push(self.buf.pop_front().expect("nonempty"));
            }
        }
        Ok(evicted)
    }

    /// Evicts time-expired items as of `now`. Count windows only shrink on
    /// push.
    pub fn advance(&mut self, now: u64) -> Vec<T> {
        let mut evicted = Vec::new();
        if self.spec.mode == WindowMode::Time {
            if let Some(cutoff) = now.checked_sub(self.spec.size) {
                while self.buf.front().is_some_and(|t| t.tuple().timestamp <= cutoff) {
                    evicted.push(self.buf.pop_front().expect("nonempty"));
                }
            }
        }
        evicted
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(ts: u64) -> Tuple {
        Tuple::new(ts, Vec::new())
    }

    #[test]
    fn time_eviction() {
        let mut w = Window::new(WindowSpec::time(10_000, 10_000)).unwrap();
        assert!(w.push(at(0)).unwrap().is_empty());
        assert!(w.push(at(5_000)).unwrap().is_empty());
        let ev = w.push(at(12_000)).unwrap();
        assert_eq!(ev, vec![at(0)]);
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn count_eviction() {
        let mut w = Window::new(WindowSpec::count(3, 1)).unwrap();
        for ts in 0..3 {
            assert!(w.push(at(ts)).unwrap().is_empty());
        }
        assert_eq!(w.push(at(3)).unwrap(), vec![at(0)]);
    }

    #[test]
    fn rejects_time_going_backwards() {
        let mut w: Window = Window::new(WindowSpec::default()).unwrap();
        w.push(at(10)).unwrap();
        assert_eq!(
            w.push(at(9)).unwrap_err(),
            EngineError::NonMonotoneTimestamp { last: 10, got: 9 }
        );
    }
}
