//! Shared fixtures and naive reference implementations for the integration
//! tests. The oracles here walk parent pointers instead of using the
//! library's bitset closures, so they share no code with what they check.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use peasflow::compliance::{ComplianceOptions, ConsumerPolicy};
use peasflow::engine::Value;
use peasflow::hierarchy::{IdSet, NodeId, Taxonomies, Taxonomy, TaxonomyKind};
use peasflow::peas::{HistoryEntry, PeasAttribute};
use peasflow::preferences::{IntendedPurpose, JointAccessConstraint, PrivacyPreference};
use peasflow::scenario::{load_scenario_file, Scenario};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn smarthome() -> Scenario {
    load_scenario_file(repo_path("scenarios/smarthome.json")).expect("bundled smarthome scenario loads")
}

/// A rooted tree as parallel id / parent arrays.
#[derive(Clone, Debug)]
pub struct NaiveTree {
    pub ids: Vec<String>,
    pub parent: Vec<Option<usize>>,
}

impl NaiveTree {
    pub fn random<R: Rng>(rng: &mut R, size: usize, prefix: &str) -> Self {
        let ids = (0..size).map(|i| format!("{prefix}{i}")).collect();
        let parent = (0..size)
            .map(|i| if i == 0 { None } else { Some(rng.gen_range(0..i)) })
            .collect();
        NaiveTree { ids, parent }
    }

    pub fn from_edges(root: &str, edges: &[(String, String)]) -> Self {
        let mut ids = vec![root.to_string()];
        let mut parent = vec![None];
        for (p, c) in edges {
            let pi = ids.iter().position(|x| x == p).expect("parents precede children");
            ids.push(c.clone());
            parent.push(Some(pi));
        }
        NaiveTree { ids, parent }
    }

    pub fn edges(&self) -> Vec<(String, String)> {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (self.ids[p].clone(), self.ids[i].clone())))
            .collect()
    }

    pub fn build(&self, kind: TaxonomyKind) -> Taxonomy {
        Taxonomy::build(kind, &self.ids[0], &self.edges()).expect("random tree is well formed")
    }

    fn index(&self, id: &str) -> usize {
        self.ids.iter().position(|x| x == id).expect("id belongs to tree")
    }

    /// `node` equals `ancestor` or lies below it.
    pub fn is_under(&self, node: &str, ancestor: &str) -> bool {
        let target = self.index(ancestor);
        let mut cur = Some(self.index(node));
        while let Some(i) = cur {
            if i == target {
                return true;
            }
            cur = self.parent[i];
        }
        false
    }

    pub fn implied(&self, x: &str, allowed: &IdSet, exc: &IdSet) -> bool {
        allowed.iter().any(|a| self.is_under(x, a.as_str())) && !exc.iter().any(|e| self.is_under(x, e.as_str()))
    }

    pub fn implied_members(&self, allowed: &IdSet, exc: &IdSet) -> BTreeSet<String> {
        self.ids
            .iter()
            .filter(|x| self.implied(x, allowed, exc))
            .cloned()
            .collect()
    }

    pub fn pick<R: Rng>(&self, rng: &mut R, max: usize) -> IdSet {
        let n = rng.gen_range(0..=max.min(self.ids.len()));
        self.ids.choose_multiple(rng, n).map(NodeId::new).collect()
    }

    pub fn pick_one<R: Rng>(&self, rng: &mut R) -> NodeId {
        NodeId::new(self.ids.choose(rng).expect("nonempty tree"))
    }
}

pub struct World {
    pub purposes: NaiveTree,
    pub categories: NaiveTree,
    pub taxonomies: Taxonomies,
}

pub const CONSUMERS: [&str; 4] = ["c-a", "c-b", "c-c", "c-d"];

impl World {
    pub fn random<R: Rng>(rng: &mut R, max_nodes: usize) -> Self {
        let np = rng.gen_range(1..=max_nodes);
        let purposes = NaiveTree::random(rng, np, "p");
        let nc = rng.gen_range(1..=max_nodes);
        let categories = NaiveTree::random(rng, nc, "c");
        let taxonomies = Taxonomies::new(
            purposes.build(TaxonomyKind::Purpose),
            categories.build(TaxonomyKind::Category),
        );
        World {
            purposes,
            categories,
            taxonomies,
        }
    }

    pub fn of(s: &Scenario) -> Self {
        let d = &s.document;
        World {
            purposes: NaiveTree::from_edges(&d.purposes.root, &d.purposes.edges),
            categories: NaiveTree::from_edges(&d.categories.root, &d.categories.edges),
            taxonomies: s.taxonomies.clone(),
        }
    }

    pub fn pp<R: Rng>(&self, rng: &mut R) -> PrivacyPreference {
        let n = rng.gen_range(0..=CONSUMERS.len());
        let consumer: Vec<&str> = CONSUMERS.choose_multiple(rng, n).copied().collect();
        PrivacyPreference::new(
            "a",
            consumer,
            IntendedPurpose::new(self.purposes.pick(rng, 3), self.purposes.pick(rng, 2)),
            JointAccessConstraint::new(
                self.categories.pick(rng, 3),
                self.categories.pick(rng, 2),
                IntendedPurpose::new(self.purposes.pick(rng, 3), self.purposes.pick(rng, 2)),
            ),
            self.categories.pick(rng, 2),
        )
    }

    pub fn history<R: Rng>(&self, rng: &mut R, max_entries: usize) -> Vec<Arc<HistoryEntry>> {
        (0..rng.gen_range(0..=max_entries))
            .map(|_| {
                Arc::new(HistoryEntry {
                    ac: self.categories.pick(rng, 3),
                    rc: self.categories.pick(rng, 2),
                })
            })
            .collect()
    }

    pub fn attribute<R: Rng>(&self, rng: &mut R, name: &str) -> PeasAttribute {
        PeasAttribute {
            name: name.to_string(),
            value: Value::Float(rng.gen_range(0.0..100.0)),
            pp: if rng.gen_bool(0.9) {
                Some(Arc::new(self.pp(rng)))
            } else {
                None
            },
            category: IdSet::from([self.categories.pick_one(rng)]),
            history: self.history(rng, 5),
        }
    }

    pub fn policy<R: Rng>(&self, rng: &mut R) -> ConsumerPolicy {
        let consumer = if rng.gen_bool(0.8) {
            *CONSUMERS.choose(rng).unwrap()
        } else {
            "stranger"
        };
        ConsumerPolicy::new(consumer, self.purposes.pick_one(rng))
    }

    /// Failed check names per consumer membership, the intended-purpose
    /// rule, the two halves of the joint access constraint and the
    /// derivation constraint, evaluated literally on parent pointers.
    pub fn oracle(
        &self,
        a: &PeasAttribute,
        policy: &ConsumerPolicy,
        opts: ComplianceOptions,
    ) -> BTreeSet<&'static str> {
        let mut failed = BTreeSet::new();
        let Some(pp) = &a.pp else { return failed };
        let ap = policy.access_purpose.as_str();
        if !pp.consumer.contains(&policy.consumer_id) {
            failed.insert("consumer");
        }
        if !self.purposes.implied(ap, &pp.ip.aip, &pp.ip.exc) {
            failed.insert("ip");
        }
        let skip_jac_ip = opts.jac_ip_vacuous_on_empty_history && a.history.is_empty();
        if !skip_jac_ip && !self.purposes.implied(ap, &pp.jac.ip.aip, &pp.jac.ip.exc) {
            failed.insert("jac_ip");
        }
        for he in &a.history {
            for c in &he.ac {
                if !self.categories.implied(c.as_str(), &pp.jac.adc, &pp.jac.exc) {
                    failed.insert("jac_data");
                }
            }
            for c in &he.rc {
                if self.categories.implied(c.as_str(), &pp.cdc, &IdSet::new()) {
                    failed.insert("cdc");
                }
            }
        }
        failed
    }
}
