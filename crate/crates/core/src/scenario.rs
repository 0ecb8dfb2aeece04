//! Scenario documents: taxonomies, preferences, derivation paths, query
//! graph and workload in one JSON file, validated as a whole on load.

use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compliance::ComplianceOptions;
use crate::hierarchy::{HierarchyError, IdSet, Taxonomies, Taxonomy, TaxonomyKind};
use crate::peas::{DerivationPath, DerivationPathRegistry, KeyKind};
use crate::preferences::{normalize, NormalizedPreference, PrivacyPreference};
use crate::simnet::{validate_graph, NodeRole, QueryGraph, Simulation, WorkloadSpec};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub root: String,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

impl TreeSpec {
    pub fn from_taxonomy(t: &Taxonomy) -> Self {
        TreeSpec {
            root: t.root().to_string(),
            edges: t.edges().iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub purposes: TreeSpec,
    pub categories: TreeSpec,
    /// Keyed by reference name. A preference without an `attribute` takes
    /// its key.
    #[serde(default)]
    pub preferences: IndexMap<String, PrivacyPreference>,
    #[serde(default)]
    pub derivation_paths: Vec<DerivationPath>,
    pub graph: QueryGraph,
    #[serde(default)]
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub flags: ComplianceOptions,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: unknown reference `{id}`")]
    UnknownReference { path: String, id: String },
    #[error("{path}: {message}")]
    InvariantViolation { path: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// A loaded, fully validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub document: ScenarioDocument,
    pub taxonomies: Taxonomies,
    pub registry: DerivationPathRegistry,
    pub preferences: IndexMap<String, Arc<PrivacyPreference>>,
    pub normalized: IndexMap<String, NormalizedPreference>,
}

impl Scenario {
    pub fn preference(&self, name: &str) -> Option<&Arc<PrivacyPreference>> {
        self.preferences.get(name)
    }

    pub fn simulation(&self) -> Simulation {
        Simulation {
            name: self.document.name.clone(),
            graph: self.document.graph.clone(),
            workload: self.document.workload.clone(),
            taxonomies: self.taxonomies.clone(),
            registry: self.registry.clone(),
            preferences: self.preferences.clone(),
            options: self.document.flags,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.document).expect("documents always serialize")
    }
}

fn build_tree(kind: TaxonomyKind, spec: &TreeSpec, path: &str) -> Result<Taxonomy, ScenarioError> {
    Taxonomy::build(kind, &spec.root, &spec.edges).map_err(|e| ScenarioError::InvariantViolation {
        path: format!("{path}.edges"),
        message: e.to_string(),
    })
}

fn check(tax: &Taxonomy, ids: &IdSet, path: impl FnOnce() -> String) -> Result<(), ScenarioError> {
    match tax.check_ids(ids) {
        Ok(()) => Ok(()),
        Err(HierarchyError::UnknownNode { id, .. }) => Err(ScenarioError::UnknownReference { path: path(), id }),
        Err(e) => Err(ScenarioError::InvariantViolation {
            path: path(),
            message: e.to_string(),
        }),
    }
}

pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let document: ScenarioDocument = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    validate_document(document)
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_scenario(&text)
}

/// Builds the taxonomies and checks every cross reference of `document`.
pub fn validate_document(mut document: ScenarioDocument) -> Result<Scenario, ScenarioError> {
    let purposes = build_tree(TaxonomyKind::Purpose, &document.purposes, "purposes")?;
    let categories = build_tree(TaxonomyKind::Category, &document.categories, "categories")?;
    let taxonomies = Taxonomies::new(purposes, categories);
    let (p, c) = (&taxonomies.purposes, &taxonomies.categories);

    let mut preferences = IndexMap::new();
    let mut normalized = IndexMap::new();
    for (name, pp) in document.preferences.iter_mut() {
        if pp.attribute.is_empty() {
            pp.attribute = name.clone();
        }
        let at = |field: &str| format!("preferences.{name}.{field}");
        check(p, &pp.ip.aip, || at("ip.aip"))?;
        check(p, &pp.ip.exc, || at("ip.exc"))?;
        check(c, &pp.jac.adc, || at("jac.adc"))?;
        check(c, &pp.jac.exc, || at("jac.exc"))?;
        check(p, &pp.jac.ip.aip, || at("jac.ip.aip"))?;
        check(p, &pp.jac.ip.exc, || at("jac.ip.exc"))?;
        check(c, &pp.cdc, || at("cdc"))?;
        let n = normalize(pp, &taxonomies).map_err(|e| ScenarioError::InvariantViolation {
            path: at(""),
            message: e.to_string(),
        })?;
        normalized.insert(name.clone(), n);
        preferences.insert(name.clone(), Arc::new(pp.clone()));
    }

    for (i, dp) in document.derivation_paths.iter().enumerate() {
        let at = |field: &str| format!("derivation_paths[{i}].{field}");
        check(c, &IdSet::from([dp.result.clone()]), || at("result"))?;
        if dp.keys.is_empty() {
            return Err(ScenarioError::InvariantViolation {
                path: at("keys"),
                message: "a derivation path needs at least one key".into(),
            });
        }
        if dp.key_kind == KeyKind::Categories {
            let keys: IdSet = dp.keys.iter().map(|k| k.as_str().into()).collect();
            check(c, &keys, || at("keys"))?;
        }
    }
    let registry = DerivationPathRegistry::new(document.derivation_paths.clone());

    for (i, node) in document.graph.nodes.iter().enumerate() {
        let at = |field: &str| format!("graph.nodes[{i}]({}).{field}", node.id);
        match &node.role {
            NodeRole::Sensing(cfg) => {
                for (j, a) in cfg.attributes.iter().enumerate() {
                    check(c, &IdSet::from([a.category.clone()]), || {
                        at(&format!("attributes[{j}].category"))
                    })?;
                    if let Some(r) = &a.pp {
                        if !preferences.contains_key(r) {
                            return Err(ScenarioError::UnknownReference {
                                path: at(&format!("attributes[{j}].pp")),
                                id: r.clone(),
                            });
                        }
                    }
                }
            }
            NodeRole::Consumer { policy } => {
                check(p, &IdSet::from([policy.access_purpose.clone()]), || {
                    at("policy.access_purpose")
                })?;
            }
            NodeRole::Processor { .. } => {}
        }
    }
    let violations = validate_graph(&document.graph);
    if !violations.is_empty() {
        return Err(ScenarioError::InvariantViolation {
            path: "graph".into(),
            message: violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
        });
    }
    document
        .workload
        .validate()
        .map_err(|message| ScenarioError::InvariantViolation {
            path: "workload".into(),
            message,
        })?;

    Ok(Scenario {
        document,
        taxonomies,
        registry,
        preferences,
        normalized,
    })
}

/// Scenario for query `Qn` of the generated family over random purpose and
/// category trees of `tree_size` nodes. Trees and graph depend only on
/// `seed`, so every member of a family shares them.
pub fn query_family_document(
    n: usize,
    sensing: usize,
    tree_size: usize,
    workload: WorkloadSpec,
    seed: u64,
) -> Result<ScenarioDocument, crate::simnet::SimError> {
    use crate::simnet::{generate_query_family, generate_taxonomy};
    let purposes = generate_taxonomy(TaxonomyKind::Purpose, tree_size, seed);
    let categories = generate_taxonomy(TaxonomyKind::Category, tree_size, seed.wrapping_add(1));
    let graph = generate_query_family(n, sensing, &categories, &purposes, seed)?;
    Ok(ScenarioDocument {
        name: format!("qfamily-q{n}"),
        description: Some(format!(
            "Q{n}: {n} joins, selections, projections and aggregations over {sensing} sensing nodes"
        )),
        purposes: TreeSpec::from_taxonomy(&purposes),
        categories: TreeSpec::from_taxonomy(&categories),
        preferences: IndexMap::new(),
        derivation_paths: Vec::new(),
        graph,
        workload,
        flags: ComplianceOptions::default(),
    })
}
