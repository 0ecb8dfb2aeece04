//! Privacy-enhanced attribute schema: per-attribute meta-data and its
//! propagation through projection, aggregation and join.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Function, OperatorKind, OperatorSpec, Parameter, Tuple, Value, ValueError};
use crate::hierarchy::{HierarchyError, IdSet, NodeId, Taxonomies};
use crate::preferences::{compose, PreferenceError, PrivacyPreference};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PeasError {
    #[error("attribute `{0}` must have at least one category")]
    EmptyCategory(String),
    #[error("missing attribute `{0}`")]
    MissingAttribute(String),
    #[error("arity: {0}")]
    Arity(String),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

/// `(AC, RC)`: the categories an operator read and the categories of the
/// attribute it produced.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub ac: IdSet,
    pub rc: IdSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeasAttribute {
    pub name: String,
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pp: Option<Arc<PrivacyPreference>>,
    #[serde(default)]
    pub category: IdSet,
    #[serde(default)]
    pub history: Vec<Arc<HistoryEntry>>,
}

impl PeasAttribute {
    /// An attribute without meta-data, used when enforcement is off.
    pub fn raw(name: impl Into<String>, value: Value) -> Self {
        PeasAttribute {
            name: name.into(),
            value,
            pp: None,
            category: IdSet::new(),
            history: Vec::new(),
        }
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Attribute as emitted by a sensing object: empty history, owner's pp.
pub fn init_peas(
    name: impl Into<String>,
    value: Value,
    owner_pp: Option<Arc<PrivacyPreference>>,
    category: IdSet,
) -> Result<PeasAttribute, PeasError> {
    let name = name.into();
    if category.is_empty() {
        return Err(PeasError::EmptyCategory(name));
    }
    Ok(PeasAttribute {
        name,
        value,
        pp: owner_pp,
        category,
        history: Vec::new(),
    })
}

pub fn create_history_entry<'a, I>(accessed: I, result: IdSet) -> HistoryEntry
where
    I: IntoIterator<Item = &'a IdSet>,
{
    let mut ac = IdSet::new();
    for set in accessed {
        ac.extend(set.iter().cloned());
    }
    HistoryEntry { ac, rc: result }
}

/// The first history is kept as is; later ones contribute only entries not
/// already present, in order.
pub fn merge_histories<'a, I>(histories: I) -> Vec<Arc<HistoryEntry>>
where
    I: IntoIterator<Item = &'a [Arc<HistoryEntry>]>,
{
    let mut iter = histories.into_iter();
    let mut out: Vec<Arc<HistoryEntry>> = match iter.next() {
        Some(h) => h.to_vec(),
        None => return Vec::new(),
    };
    for h in iter {
        for e in h {
            if !out.iter().any(|x| x == e) {
                out.push(Arc::clone(e));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyKind {
    Attributes,
    Categories,
}

/// `⟨keys, fn, operator⟩ → result`: the category of data derived by applying
/// `fn` under `operator` to inputs matching `keys` (a multiset).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationPath {
    pub key_kind: KeyKind,
    pub keys: Vec<String>,
    #[serde(rename = "fn")]
    pub function: Function,
    pub operator: OperatorKind,
    pub result: NodeId,
}

impl DerivationPath {
    fn matches(&self, operator: OperatorKind, function: Function, sorted_keys: &[&str]) -> bool {
        if self.operator != operator || self.function != function || self.keys.len() != sorted_keys.len() {
            return false;
        }
        let mut mine: Vec<&str> = self.keys.iter().map(String::as_str).collect();
        mine.sort_unstable();
        mine == sorted_keys
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DerivationPathRegistry {
    pub rules: Vec<DerivationPath>,
}

impl DerivationPathRegistry {
    pub fn new(rules: Vec<DerivationPath>) -> Self {
        DerivationPathRegistry { rules }
    }

    pub fn validate(&self, tax: &Taxonomies) -> Result<(), HierarchyError> {
        for r in &self.rules {
            tax.categories.check_ids([&r.result])?;
            if r.key_kind == KeyKind::Categories {
                for k in &r.keys {
                    if !tax.categories.contains(k) {
                        return Err(HierarchyError::UnknownNode {
                            kind: tax.categories.kind(),
                            id: k.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Category of a derived value. `names` is the multiset of referenced
    /// attribute names, `categories` the multiset of their categories.
    /// Attribute-keyed rules are tried before category-keyed ones; without a
    /// match the result is the union of the input categories.
    pub fn derive_dc(
        &self,
        operator: OperatorKind,
        function: Function,
        names: &[&str],
        categories: &[&NodeId],
    ) -> IdSet {
        let mut by_name: Vec<&str> = names.to_vec();
        by_name.sort_unstable();
        let mut by_cat: Vec<&str> = categories.iter().map(|c| c.as_str()).collect();
        by_cat.sort_unstable();
        for (kind, keys) in [(KeyKind::Attributes, &by_name), (KeyKind::Categories, &by_cat)] {
            if let Some(rule) = self
                .rules
                .iter()
                .find(|r| r.key_kind == kind && r.matches(operator, function, keys))
            {
                return IdSet::from([rule.result.clone()]);
            }
        }
        categories.iter().map(|c| (*c).clone()).collect()
    }
}

const CACHE_LIMIT: usize = 4096;

type CacheKey = (Vec<usize>, String);
type CacheValue = (Vec<Arc<PrivacyPreference>>, Arc<PrivacyPreference>);

/// Everything meta-data derivation needs: taxonomies, derivation paths and
/// a memo of compositions keyed by the identity of the input pps.
#[derive(Debug)]
pub struct DerivationContext {
    pub taxonomies: Taxonomies,
    pub registry: DerivationPathRegistry,
    cache: Mutex<HashMap<CacheKey, CacheValue>>,
}

impl Clone for DerivationContext {
    fn clone(&self) -> Self {
        DerivationContext::new(self.taxonomies.clone(), self.registry.clone())
    }
}

impl DerivationContext {
    pub fn new(taxonomies: Taxonomies, registry: DerivationPathRegistry) -> Self {
        DerivationContext {
            taxonomies,
            registry,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// Composes the present pps for an attribute called `name`. Absent pps
    /// are skipped; if none is present the result is absent.
    pub fn compose_for(
        &self,
        pps: &[&Arc<PrivacyPreference>],
        name: &str,
    ) -> Result<Option<Arc<PrivacyPreference>>, PeasError> {
        let mut distinct: Vec<&Arc<PrivacyPreference>> = Vec::with_capacity(pps.len());
        for p in pps {
            if !distinct.iter().any(|d| Arc::ptr_eq(d, p)) {
                distinct.push(p);
            }
        }
        if distinct.is_empty() {
            return Ok(None);
        }
        distinct.sort_by_key(|p| Arc::as_ptr(p) as usize);
        let key = (
            distinct.iter().map(|p| Arc::as_ptr(p) as usize).collect::<Vec<_>>(),
            name.to_string(),
        );
        let mut cache = self.cache.lock().expect("composition cache poisoned");
        if let Some((_, pp)) = cache.get(&key) {
            return Ok(Some(Arc::clone(pp)));
        }
        let composed = compose(distinct.iter().map(|p| p.as_ref()), &self.taxonomies)?.with_attribute(name);
        let composed = Arc::new(composed);
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        let keep = distinct.iter().map(|p| Arc::clone(p)).collect();
        cache.insert(key, (keep, Arc::clone(&composed)));
        Ok(Some(composed))
    }

    /// Meta-data for a value derived from `contributors` (Π/Σ branch).
    /// `names`/`categories` feed the derivation-path lookup.
    #[allow(clippy::too_many_arguments)]
    pub fn derive_attribute(
        &self,
        operator: OperatorKind,
        function: Function,
        name: &str,
        value: Value,
        names: &[&str],
        categories: &[&NodeId],
        contributors: &[&PeasAttribute],
    ) -> Result<PeasAttribute, PeasError> {
        let category = self.registry.derive_dc(operator, function, names, categories);
        let pps: Vec<&Arc<PrivacyPreference>> = contributors.iter().filter_map(|a| a.pp.as_ref()).collect();
        let pp = self.compose_for(&pps, name)?;
        let mut history = merge_histories(contributors.iter().map(|a| a.history.as_slice()));
        let entry = create_history_entry(contributors.iter().map(|a| &a.category), category.clone());
        history.push(Arc::new(entry));
        Ok(PeasAttribute {
            name: name.to_string(),
            value,
            pp,
            category,
            history,
        })
    }

    /// ⋈ branch: both attributes get the composed pp and one new history
    /// entry whose result is their own, unchanged, category.
    pub fn derive_join_pair(
        &self,
        a1: &PeasAttribute,
        a2: &PeasAttribute,
    ) -> Result<(PeasAttribute, PeasAttribute), PeasError> {
        let pps: Vec<&Arc<PrivacyPreference>> = [a1, a2].iter().filter_map(|a| a.pp.as_ref()).collect();
        let mut accessed = a1.category.clone();
        accessed.extend(a2.category.iter().cloned());
        let mut out = Vec::with_capacity(2);
        for a in [a1, a2] {
            let mut b = a.clone();
            b.pp = self.compose_for(&pps, &a.name)?;
            b.history.push(Arc::new(HistoryEntry {
                ac: accessed.clone(),
                rc: a.category.clone(),
            }));
            out.push(b);
        }
        let b2 = out.pop().expect("two attributes");
        let b1 = out.pop().expect("two attributes");
        Ok((b1, b2))
    }
}

pub(crate) fn lookup<'t>(t: &'t Tuple, name: &str) -> Result<&'t PeasAttribute, PeasError> {
    t.get(name).ok_or_else(|| PeasError::MissingAttribute(name.to_string()))
}

/// Evaluates one projection parameter. Without a context only the value is
/// computed.
pub fn project_parameter(
    p: &Parameter,
    t: &Tuple,
    ctx: Option<&DerivationContext>,
) -> Result<PeasAttribute, PeasError> {
    let refs = p
        .attributes
        .iter()
        .map(|n| lookup(t, n))
        .collect::<Result<Vec<_>, _>>()?;
    let values: Vec<&Value> = refs.iter().map(|a| &a.value).collect();
    let value = p.function.apply(&values)?;
    match ctx {
        None => Ok(PeasAttribute::raw(p.name.clone(), value)),
        Some(ctx) => {
            let names: Vec<&str> = p.attributes.iter().map(String::as_str).collect();
            let cats: Vec<&NodeId> = refs.iter().flat_map(|a| a.category.iter()).collect();
            ctx.derive_attribute(
                OperatorKind::Projection,
                p.function,
                &p.name,
                value,
                &names,
                &cats,
                &refs,
            )
        }
    }
}

/// Aggregates `p.attributes[0]` over `window`. Meta-data is derived from the
/// distinct lineages (pp, category, history) present in the window.
pub fn aggregate_window<T: AsRef<Tuple>>(
    p: &Parameter,
    window: &[T],
    timestamp: u64,
    ctx: Option<&DerivationContext>,
) -> Result<Tuple, PeasError> {
    if p.attributes.len() != 1 {
        return Err(PeasError::Arity(format!(
            "aggregation reads exactly one attribute, got {}",
            p.attributes.len()
        )));
    }
    let name = &p.attributes[0];
    let refs = window
        .iter()
        .map(|t| lookup(t.as_ref(), name))
        .collect::<Result<Vec<_>, _>>()?;
    if refs.is_empty() {
        return Err(PeasError::Arity("aggregation over an empty window".into()));
    }
    let values: Vec<&Value> = refs.iter().map(|a| &a.value).collect();
    let value = p.function.apply(&values)?;
    let attr = match ctx {
        None => PeasAttribute::raw(p.name.clone(), value),
        Some(ctx) => {
            let mut lineages: Vec<&PeasAttribute> = Vec::new();
            for a in &refs {
                let seen = lineages.iter().any(|l| {
                    let same_pp = match (&l.pp, &a.pp) {
                        (Some(x), Some(y)) => Arc::ptr_eq(x, y) || x == y,
                        (None, None) => true,
                        _ => false,
                    };
                    same_pp && l.category == a.category && l.history == a.history
                });
                if !seen {
                    lineages.push(a);
                }
            }
            let mut cats = IdSet::new();
            for l in &lineages {
                cats.extend(l.category.iter().cloned());
            }
            let cats: Vec<&NodeId> = cats.iter().collect();
            ctx.derive_attribute(
                OperatorKind::Aggregation,
                p.function,
                &p.name,
                value,
                &[name.as_str()],
                &cats,
                &lineages,
            )?
        }
    };
    Ok(Tuple::new(timestamp, vec![attr]))
}

fn unique_name(taken: &[PeasAttribute], name: &str) -> String {
    if !taken.iter().any(|a| a.name == name) {
        return name.to_string();
    }
    (2..)
        .map(|k| format!("{name}_{k}"))
        .find(|n| !taken.iter().any(|a| a.name == *n))
        .expect("unbounded suffixes")
}

/// Output of a join: the left attributes in order, then the right ones.
/// A right attribute whose name is taken is renamed `name_2`, `name_3`, ….
/// With a context, the `meta` pair (left name, right name) receives the
/// join meta-data; every other attribute passes through unchanged.
pub fn join_tuples(
    left: &Tuple,
    right: &Tuple,
    meta: (&str, &str),
    timestamp: u64,
    ctx: Option<&DerivationContext>,
) -> Result<Tuple, PeasError> {
    let li = left
        .position(meta.0)
        .ok_or_else(|| PeasError::MissingAttribute(meta.0.to_string()))?;
    let ri = right
        .position(meta.1)
        .ok_or_else(|| PeasError::MissingAttribute(meta.1.to_string()))?;
    let mut attrs = left.attributes.clone();
    let mut right_attrs = right.attributes.clone();
    if let Some(ctx) = ctx {
        let (a1, a2) = ctx.derive_join_pair(&left.attributes[li], &right.attributes[ri])?;
        attrs[li] = a1;
        right_attrs[ri] = a2;
    }
    attrs.reserve(right_attrs.len());
    for a in right_attrs {
        let n = unique_name(&attrs, &a.name);
        attrs.push(a.renamed(n));
    }
    Ok(Tuple::new(timestamp, attrs))
}

/// Meta-data derivation for one operator application. Aggregation treats
/// `s1` as a window of one tuple; join requires `s2`.
pub fn peas_derive(
    op: &OperatorSpec,
    s1: &Tuple,
    s2: Option<&Tuple>,
    ctx: &DerivationContext,
) -> Result<Tuple, PeasError> {
    match op {
        OperatorSpec::Selection { .. } => Ok(s1.clone()),
        OperatorSpec::Projection { parameters } => {
            let attrs = parameters
                .iter()
                .map(|p| project_parameter(p, s1, Some(ctx)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Tuple::new(s1.timestamp, attrs))
        }
        OperatorSpec::Aggregation { parameters, .. } => {
            if parameters.len() != 1 {
                return Err(PeasError::Arity(format!(
                    "aggregation takes exactly one parameter, got {}",
                    parameters.len()
                )));
            }
            aggregate_window(&parameters[0], std::slice::from_ref(s1), s1.timestamp, Some(ctx))
        }
        OperatorSpec::Join { on, meta, .. } => {
            let pair = meta.as_ref().unwrap_or(on);
            if pair.len() != 2 || on.len() != 2 {
                return Err(PeasError::Arity("join needs exactly two attributes".into()));
            }
            let s2 = s2.ok_or_else(|| PeasError::Arity("join needs two input tuples".into()))?;
            join_tuples(s1, s2, (&pair[0], &pair[1]), s1.timestamp.max(s2.timestamp), Some(ctx))
        }
    }
}
