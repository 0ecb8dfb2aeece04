//! Canonical binary form of PEAS meta-data, used for bit accounting.
//!
//! Every identifier (category, purpose, consumer) is replaced by its index in
//! a per-run table, and every integer is an unsigned LEB128 varint. Layout
//! of one attribute:
//!
//! ```text
//! [pp flag: 0|1]
//! [if pp: consumer, ip.aip, ip.exc, jac.adc, jac.exc, jac.ip.aip, jac.ip.exc, cdc]
//! [category]
//! [history length] [per entry: ac, rc]
//! ```
//!
//! where each set is written as a count followed by its ids in ascending
//! string order.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::engine::{Tuple, Value};
use crate::hierarchy::{IdSet, NodeId, Taxonomies};
use crate::peas::{HistoryEntry, PeasAttribute};
use crate::preferences::{IntendedPurpose, JointAccessConstraint, PrivacyPreference};

/// String table with 1-based ids in first-seen order.
#[derive(Clone, Debug, Default)]
pub struct Interner {
    ids: HashMap<String, u64>,
    names: Vec<String>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    /// A table pre-loaded with every taxonomy node, purposes first, so that
    /// ids do not depend on arrival order.
    pub fn for_taxonomies(tax: &Taxonomies) -> Self {
        let mut i = Interner::new();
        for n in tax.purposes.nodes().iter().chain(tax.categories.nodes()) {
            i.intern(n.as_str());
        }
        i
    }

    pub fn intern(&mut self, s: &str) -> u64 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        self.names.push(s.to_string());
        let id = self.names.len() as u64;
        self.ids.insert(s.to_string(), id);
        id
    }

    pub fn get(&self, s: &str) -> Option<u64> {
        self.ids.get(s).copied()
    }

    pub fn resolve(&self, id: u64) -> Option<&str> {
        let i = usize::try_from(id).ok()?.checked_sub(1)?;
        self.names.get(i).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoded {
    pub bytes: Vec<u8>,
}

impl Encoded {
    pub fn bits(&self) -> u64 {
        8 * self.bytes.len() as u64
    }
}

fn put(out: &mut Vec<u8>, v: u64) {
    leb128::write::unsigned(out, v).expect("writing to a Vec cannot fail");
}

fn put_set<'a, I>(out: &mut Vec<u8>, interner: &mut Interner, len: usize, items: I)
where
    I: IntoIterator<Item = &'a str>,
{
    put(out, len as u64);
    for s in items {
        let id = interner.intern(s);
        put(out, id);
    }
}

fn put_ids(out: &mut Vec<u8>, interner: &mut Interner, set: &IdSet) {
    put_set(out, interner, set.len(), set.iter().map(NodeId::as_str));
}

pub fn encode_metadata(a: &PeasAttribute, interner: &mut Interner) -> Encoded {
    let mut out = Vec::with_capacity(32);
    match &a.pp {
        None => put(&mut out, 0),
        Some(pp) => {
            put(&mut out, 1);
            put_set(
                &mut out,
                interner,
                pp.consumer.len(),
                pp.consumer.iter().map(String::as_str),
            );
            for set in [
                &pp.ip.aip,
                &pp.ip.exc,
                &pp.jac.adc,
                &pp.jac.exc,
                &pp.jac.ip.aip,
                &pp.jac.ip.exc,
                &pp.cdc,
            ] {
                put_ids(&mut out, interner, set);
            }
        }
    }
    put_ids(&mut out, interner, &a.category);
    put(&mut out, a.history.len() as u64);
    for he in &a.history {
        put_ids(&mut out, interner, &he.ac);
        put_ids(&mut out, interner, &he.rc);
    }
    Encoded { bytes: out }
}

/// Meta-data bits of a whole tuple: the sum over its attributes.
pub fn encode_tuple(t: &Tuple, interner: &mut Interner) -> u64 {
    t.attributes.iter().map(|a| encode_metadata(a, interner).bits()).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("truncated or malformed varint at byte {0}")]
    Varint(usize),
    #[error("unknown id {0}")]
    UnknownId(u64),
    #[error("invalid pp flag {0}")]
    Flag(u64),
    #[error("{0} trailing byte(s)")]
    Trailing(usize),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn num(&mut self) -> Result<u64, DecodeError> {
        let mut rest = &self.bytes[self.pos..];
        let before = rest.len();
        let v = leb128::read::unsigned(&mut rest).map_err(|_| DecodeError::Varint(self.pos))?;
        self.pos += before - rest.len();
        Ok(v)
    }

    fn strings(&mut self, interner: &Interner) -> Result<Vec<String>, DecodeError> {
        let n = self.num()?;
        let mut out = Vec::new();
        for _ in 0..n {
            let id = self.num()?;
            out.push(interner.resolve(id).ok_or(DecodeError::UnknownId(id))?.to_string());
        }
        Ok(out)
    }

    fn ids(&mut self, interner: &Interner) -> Result<IdSet, DecodeError> {
        Ok(self.strings(interner)?.into_iter().map(NodeId::from).collect())
    }
}

/// Inverse of [`encode_metadata`]. The name and value are not part of the
/// encoding and are supplied by the caller; the pp is named after the
/// attribute.
pub fn decode_metadata(
    bytes: &[u8],
    interner: &Interner,
    name: &str,
    value: Value,
) -> Result<PeasAttribute, DecodeError> {
    let mut r = Reader { bytes, pos: 0 };
    let pp = match r.num()? {
        0 => None,
        1 => {
            let consumer: BTreeSet<String> = r.strings(interner)?.into_iter().collect();
            let aip = r.ids(interner)?;
            let exc = r.ids(interner)?;
            let adc = r.ids(interner)?;
            let jexc = r.ids(interner)?;
            let jaip = r.ids(interner)?;
            let jiexc = r.ids(interner)?;
            let cdc = r.ids(interner)?;
            Some(Arc::new(PrivacyPreference {
                attribute: name.to_string(),
                consumer,
                ip: IntendedPurpose::new(aip, exc),
                jac: JointAccessConstraint::new(adc, jexc, IntendedPurpose::new(jaip, jiexc)),
                cdc,
            }))
        }
        f => return Err(DecodeError::Flag(f)),
    };
    let category = r.ids(interner)?;
    let n = r.num()?;
    let mut history = Vec::new();
    for _ in 0..n {
        let ac = r.ids(interner)?;
        let rc = r.ids(interner)?;
        history.push(Arc::new(HistoryEntry { ac, rc }));
    }
    if r.pos != bytes.len() {
        return Err(DecodeError::Trailing(bytes.len() - r.pos));
    }
    Ok(PeasAttribute {
        name: name.to_string(),
        value,
        pp,
        category,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::id_set;

    #[test]
    fn public_attribute_is_four_octets() {
        let mut i = Interner::new();
        assert_eq!(i.intern("generic"), 1);
        let a = PeasAttribute {
            name: "t".into(),
            value: Value::Float(24.4),
            pp: None,
            category: id_set(["generic"]),
            history: Vec::new(),
        };
        let e = encode_metadata(&a, &mut i);
        assert_eq!(e.bytes, vec![0, 1, 1, 0]);
        assert_eq!(e.bits(), 32);
        assert_eq!(decode_metadata(&e.bytes, &i, "t", Value::Float(24.4)).unwrap(), a);
    }

    #[test]
    fn large_ids_take_two_octets() {
        let mut i = Interner::new();
        for k in 0..200 {
            i.intern(&format!("n{k}"));
        }
        let a = PeasAttribute {
            name: "x".into(),
            value: Value::Int(0),
            pp: None,
            category: id_set(["n150"]),
            history: Vec::new(),
        };
        assert_eq!(encode_metadata(&a, &mut i).bytes, vec![0, 1, 0x97, 0x01, 0]);
    }

    #[test]
    fn rejects_trailing_bytes() {
        let i = Interner::new();
        assert_eq!(
            decode_metadata(&[0, 0, 0, 9], &i, "x", Value::Int(0)).unwrap_err(),
            DecodeError::Trailing(1)
        );
    }
}
