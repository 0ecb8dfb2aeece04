//! Rooted taxonomies of purposes and data categories.
//!
//! A [`Taxonomy`] is an immutable tree. Every node carries a precomputed
//! descendant closure (the node plus everything below it), so the implied
//! sets used by composition and compliance checking reduce to bitset unions
//! and differences.

use std::borrow::Borrow;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Identifier of a purpose or data-category node. Case-sensitive, nonempty.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(Arc<str>);

impl NodeId {
    pub fn new(id: impl AsRef<str>) -> Self {
        NodeId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for NodeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId::new(s)
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(Arc::from(s))
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(NodeId::from(s))
    }
}

/// Ordered set of node ids, the raw form stored in preferences and PEAS
/// meta-data.
pub type IdSet = BTreeSet<NodeId>;

/// Builds an [`IdSet`] from string slices.
pub fn id_set<I, S>(ids: I) -> IdSet
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    ids.into_iter().map(NodeId::new).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaxonomyKind {
    Purpose,
    Category,
}

impl fmt::Display for TaxonomyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaxonomyKind::Purpose => f.write_str("purpose"),
            TaxonomyKind::Category => f.write_str("category"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HierarchyError {
    #[error("{kind} node `{id}` is declared more than once")]
    DuplicateNode { kind: TaxonomyKind, id: String },
    #[error("{kind} edge ({parent}, {child}) closes a cycle")]
    CycleDetected {
        kind: TaxonomyKind,
        parent: String,
        child: String,
    },
    #[error("{kind} node `{child}` hangs off undeclared parent `{parent}`")]
    OrphanNode {
        kind: TaxonomyKind,
        parent: String,
        child: String,
    },
    #[error("unknown {kind} node `{id}`")]
    UnknownNode { kind: TaxonomyKind, id: String },
    #[error("{kind} node ids must be nonempty")]
    EmptyId { kind: TaxonomyKind },
}

#[derive(Debug)]
struct Inner {
    kind: TaxonomyKind,
    /// Breadth-first order from the root; position is the node's index.
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    closures: Vec<FixedBitSet>,
    /// Edges as declared, kept for serialization round trips.
    edges: Vec<(NodeId, NodeId)>,
}

/// Immutable rooted tree of node ids. Cheap to clone.
#[derive(Clone, Debug)]
pub struct Taxonomy(Arc<Inner>);

impl PartialEq for Taxonomy {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.kind == other.0.kind && self.0.nodes == other.0.nodes && self.0.parent == other.0.parent)
    }
}

impl Taxonomy {
    /// Builds a taxonomy from `(parent, child)` edges. Edges may appear in
    /// any order; each parent's child list keeps declaration order.
    pub fn build<R: AsRef<str>, S: AsRef<str>>(
        kind: TaxonomyKind,
        root: R,
        edges: &[(S, S)],
    ) -> Result<Taxonomy, HierarchyError> {
        let root = root.as_ref();
        if root.is_empty() {
            return Err(HierarchyError::EmptyId { kind });
        }
        // child -> parent, in a scratch forest keyed by name.
        let mut parent_of: HashMap<&str, &str> = HashMap::new();
        let mut kids: HashMap<&str, Vec<&str>> = HashMap::new();
        for (p, c) in edges {
            let (p, c) = (p.as_ref(), c.as_ref());
            if p.is_empty() || c.is_empty() {
                return Err(HierarchyError::EmptyId { kind });
            }
            let mut cursor = Some(p);
            while let Some(n) = cursor {
                if n == c {
                    return Err(HierarchyError::CycleDetected {
                        kind,
                        parent: p.to_string(),
                        child: c.to_string(),
                    });
                }
                cursor = parent_of.get(n).copied();
            }
            if c == root || parent_of.contains_key(c) {
                return Err(HierarchyError::DuplicateNode {
                    kind,
                    id: c.to_string(),
                });
            }
            parent_of.insert(c, p);
            kids.entry(p).or_default().push(c);
        }

        let mut nodes = vec![NodeId::new(root)];
        let mut parent = vec![None];
        let mut head = 0;
        while head < nodes.len() {
            let name = nodes[head].clone();
            if let Some(cs) = kids.get(name.as_str()) {
                for c in cs {
                    nodes.push(NodeId::new(c));
                    parent.push(Some(head));
                }
            }
            head += 1;
        }
        if nodes.len() != parent_of.len() + 1 {
            // Something is unreachable from the root: walk up from it to find
            // the undeclared ancestor.
            let reached: BTreeSet<&str> = nodes.iter().map(|n| n.as_str()).collect();
            for (p, c) in edges {
                let c = c.as_ref();
                if reached.contains(c) {
                    continue;
                }
                let mut top = p.as_ref();
                let mut below = c;
                while let Some(up) = parent_of.get(top) {
                    below = top;
                    top = up;
                }
                return Err(HierarchyError::OrphanNode {
                    kind,
                    parent: top.to_string(),
                    child: below.to_string(),
                });
            }
        }

        let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut children = vec![Vec::new(); nodes.len()];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        // Reverse BFS order visits every child before its parent.
        let mut closures = vec![FixedBitSet::with_capacity(nodes.len()); nodes.len()];
        for i in (0..nodes.len()).rev() {
            let mut bits = FixedBitSet::with_capacity(nodes.len());
            bits.insert(i);
            for &c in &children[i] {
                bits.union_with(&closures[c]);
            }
            closures[i] = bits;
        }
        let edges = edges.iter().map(|(p, c)| (NodeId::new(p), NodeId::new(c))).collect();

        Ok(Taxonomy(Arc::new(Inner {
            kind,
            nodes,
            index,
            parent,
            children,
            closures,
            edges,
        })))
    }

    pub fn kind(&self) -> TaxonomyKind {
        self.0.kind
    }

    pub fn root(&self) -> &NodeId {
        &self.0.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.0.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, id: &str) -> bool {
        self.0.index.contains_key(id)
    }

    /// Nodes in breadth-first order from the root.
    pub fn nodes(&self) -> &[NodeId] {
        &self.0.nodes
    }

    /// Edges in their original declaration order.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.0.edges
    }

    pub fn parent(&self, id: &str) -> Result<Option<&NodeId>, HierarchyError> {
        let i = self.position(id)?;
        Ok(self.0.parent[i].map(|p| &self.0.nodes[p]))
    }

    pub fn children(&self, id: &str) -> Result<Vec<&NodeId>, HierarchyError> {
        let i = self.position(id)?;
        Ok(self.0.children[i].iter().map(|&c| &self.0.nodes[c]).collect())
    }

    fn position(&self, id: &str) -> Result<usize, HierarchyError> {
        self.0
            .index
            .get(id)
            .copied()
            .ok_or_else(|| HierarchyError::UnknownNode {
                kind: self.0.kind,
                id: id.to_string(),
            })
    }

    pub fn empty_set(&self) -> ImpliedSet {
        ImpliedSet {
            taxonomy: self.clone(),
            bits: FixedBitSet::with_capacity(self.len()),
        }
    }

    /// `{n}` plus every transitive descendant of `n`.
    pub fn descendants_closure(&self, id: &str) -> Result<ImpliedSet, HierarchyError> {
        let i = self.position(id)?;
        Ok(ImpliedSet {
            taxonomy: self.clone(),
            bits: self.0.closures[i].clone(),
        })
    }

    /// Union of the closures of `ids`.
    pub fn closure_of<I, S>(&self, ids: I) -> Result<ImpliedSet, HierarchyError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = self.empty_set();
        for id in ids {
            let i = self.position(id.as_ref())?;
            set.bits.union_with(&self.0.closures[i]);
        }
        Ok(set)
    }

    /// Everything under `allowed` that is not under any of `exceptions`.
    /// Exceptions outside the allowed subtrees subtract nothing.
    pub fn implied_set<I, J, S, T>(&self, allowed: I, exceptions: J) -> Result<ImpliedSet, HierarchyError>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut set = self.closure_of(allowed)?;
        let excluded = self.closure_of(exceptions)?;
        set.bits.difference_with(&excluded.bits);
        Ok(set)
    }

    /// Checks that every id is a node of this taxonomy.
    pub fn check_ids<'a, I>(&self, ids: I) -> Result<(), HierarchyError>
    where
        I: IntoIterator<Item = &'a NodeId>,
    {
        for id in ids {
            self.position(id.as_str())?;
        }
        Ok(())
    }
}

/// A set of nodes of one taxonomy, produced by closure expansion.
#[derive(Clone)]
pub struct ImpliedSet {
    taxonomy: Taxonomy,
    bits: FixedBitSet,
}

impl ImpliedSet {
    pub fn contains(&self, id: &str) -> bool {
        self.taxonomy.0.index.get(id).is_some_and(|&i| self.bits.contains(i))
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    /// Members in the taxonomy's breadth-first order.
    pub fn members(&self) -> impl Iterator<Item = &NodeId> + '_ {
        self.bits.ones().map(|i| &self.taxonomy.0.nodes[i])
    }

    pub fn to_id_set(&self) -> IdSet {
        self.members().cloned().collect()
    }

    pub fn is_subset(&self, other: &ImpliedSet) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub fn intersect_with(&mut self, other: &ImpliedSet) {
        self.bits.intersect_with(&other.bits);
    }

    pub fn union_with(&mut self, other: &ImpliedSet) {
        self.bits.union_with(&other.bits);
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }
}

impl PartialEq for ImpliedSet {
    fn eq(&self, other: &Self) -> bool {
        self.taxonomy.kind() == other.taxonomy.kind() && self.bits == other.bits
    }
}

impl Eq for ImpliedSet {}

impl fmt::Debug for ImpliedSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

/// The purpose and data-category trees used together by every check.
#[derive(Clone, Debug, PartialEq)]
pub struct Taxonomies {
    pub purposes: Taxonomy,
    pub categories: Taxonomy,
}

impl Taxonomies {
    pub fn new(purposes: Taxonomy, categories: Taxonomy) -> Self {
        Taxonomies { purposes, categories }
    }
}
