use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compliance::ConsumerPolicy;
use crate::engine::{Comparator, Function, OperatorSpec, Parameter, Predicate, Value, WindowSpec};
use crate::hierarchy::{IdSet, NodeId, Taxonomy, TaxonomyKind};
use crate::preferences::{IntendedPurpose, JointAccessConstraint, PrivacyPreference};

use super::graph::{NodeRole, NodeSpec, QueryGraph, SensingAttribute, SensingConfig, Smartness, ValueGen};
use super::SimError;

/// Consumer ids generated preferences draw from.
pub const CONSUMER_POOL: [&str; 5] = ["consumer-0", "consumer-1", "consumer-2", "consumer-3", "consumer-4"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PpSetKind {
    /// Preferences come from the scenario's declared references.
    None,
    /// Only the intended purpose is constrained.
    Simple,
    /// Every field is constrained.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub sensing_so_count: usize,
    #[serde(default = "default_rate")]
    pub rate_per_stream: f64,
    #[serde(default = "default_pp_set")]
    pub pp_set: PpSetKind,
    #[serde(default = "default_coverage")]
    pub pp_coverage_percent: u8,
    #[serde(default = "default_duration")]
    pub duration_seconds: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_rate() -> f64 {
    100.0
}
fn default_pp_set() -> PpSetKind {
    PpSetKind::None
}
fn default_coverage() -> u8 {
    100
}
fn default_duration() -> u64 {
    60
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            sensing_so_count: 2,
            rate_per_stream: default_rate(),
            pp_set: default_pp_set(),
            pp_coverage_percent: default_coverage(),
            duration_seconds: default_duration(),
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.sensing_so_count == 0 {
            return Err("sensing_so_count must be at least 1".into());
        }
        if !(self.rate_per_stream > 0.0 && self.rate_per_stream.is_finite()) {
            return Err("rate_per_stream must be positive".into());
        }
        if self.pp_coverage_percent > 100 {
            return Err("pp_coverage_percent must be within 0..=100".into());
        }
        if self.duration_seconds == 0 {
            return Err("duration_seconds must be at least 1".into());
        }
        Ok(())
    }
}

/// Random recursive tree of `size` nodes: node `i` hangs under a uniformly
/// chosen earlier node. Ids are `p0…` for purposes and `c0…` for categories.
pub fn generate_taxonomy(kind: TaxonomyKind, size: usize, seed: u64) -> Taxonomy {
    let prefix = match kind {
        TaxonomyKind::Purpose => "p",
        TaxonomyKind::Category => "c",
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = |i: usize| format!("{prefix}{i}");
    let edges: Vec<(String, String)> = (1..size.max(1)).map(|i| (name(rng.gen_range(0..i)), name(i))).collect();
    Taxonomy::build(kind, name(0), &edges).expect("generated edges form a tree")
}

fn pick(rng: &mut ChaCha8Rng, t: &Taxonomy, n: usize) -> IdSet {
    t.nodes().choose_multiple(rng, n.min(t.len())).cloned().collect()
}

/// One exception, below an allowed node when one has descendants.
fn exception(rng: &mut ChaCha8Rng, t: &Taxonomy, allowed: &IdSet) -> IdSet {
    let mut below: Vec<NodeId> = Vec::new();
    for a in allowed {
        let closure = t
            .descendants_closure(a.as_str())
            .expect("allowed ids come from the tree");
        for d in closure.members() {
            if !allowed.contains(d) && !below.contains(d) {
                below.push(d.clone());
            }
        }
    }
    match below.choose(rng) {
        Some(n) => IdSet::from([n.clone()]),
        None => pick(rng, t, 1),
    }
}

/// Deterministic preference sets for the experiments. Simple preferences
/// admit every pool consumer and constrain only the intended purpose; full
/// ones populate every field.
pub fn generate_pp_set(
    kind: PpSetKind,
    purposes: &Taxonomy,
    categories: &Taxonomy,
    count: usize,
    seed: u64,
) -> Vec<PrivacyPreference> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let attribute = format!("attr-{i}");
            match kind {
                PpSetKind::None => PrivacyPreference::new(
                    attribute,
                    CONSUMER_POOL,
                    IntendedPurpose::new(IdSet::from([purposes.root().clone()]), IdSet::new()),
                    JointAccessConstraint::default(),
                    IdSet::new(),
                ),
                PpSetKind::Simple => PrivacyPreference::new(
                    attribute,
                    CONSUMER_POOL,
                    IntendedPurpose::new(pick(&mut rng, purposes, 1), IdSet::new()),
                    JointAccessConstraint::default(),
                    IdSet::new(),
                ),
                PpSetKind::Full => {
                    let n = rng.gen_range(1..=3);
                    let consumer: Vec<&str> = CONSUMER_POOL.choose_multiple(&mut rng, n).copied().collect();
                    let n = rng.gen_range(1..=2);
                    let aip = pick(&mut rng, purposes, n);
                    let exc = exception(&mut rng, purposes, &aip);
                    let n = rng.gen_range(1..=3);
                    let adc = pick(&mut rng, categories, n);
                    let adc_exc = exception(&mut rng, categories, &adc);
                    let n = rng.gen_range(1..=2);
                    let jaip = pick(&mut rng, purposes, n);
                    let jexc = exception(&mut rng, purposes, &jaip);
                    let n = rng.gen_range(1..=2);
                    let cdc = pick(&mut rng, categories, n);
                    PrivacyPreference::new(
                        attribute,
                        consumer,
                        IntendedPurpose::new(aip, exc),
                        JointAccessConstraint::new(adc, adc_exc, IntendedPurpose::new(jaip, jexc)),
                        cdc,
                    )
                }
            }
        })
        .collect()
}

/// Join key domain of generated queries (`id_room` ∈ 0..KEY_DOMAIN).
pub const KEY_DOMAIN: i64 = 4;

/// `Qn`: `n` stages of join, selection and projection followed by a chain
/// of `n` aggregations ending in one consumer.
///
/// Stage `i` joins the previous stream with sensing node `S(i mod s)` on
/// `id_room` over count windows of 4, keeps tuples whose fresh sensor value
/// exceeds `10 + 2n`, and projects to `id_room` and `m_i`, the mean of the
/// carried and fresh values. Aggregation `j` averages over tumbling windows
/// of `j` seconds. Larger `n` therefore means stricter selections and
/// coarser windows.
pub fn generate_query_family(
    n: usize,
    sensing: usize,
    categories: &Taxonomy,
    purposes: &Taxonomy,
    seed: u64,
) -> Result<QueryGraph, SimError> {
    if !(1..=10).contains(&n) {
        return Err(SimError::InvalidArgument(format!(
            "query family index {n} outside 1..=10"
        )));
    }
    if sensing < 2 {
        return Err(SimError::InvalidArgument(format!(
            "joins need at least 2 sensing nodes, got {sensing}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let cat = |rng: &mut ChaCha8Rng| categories.nodes().choose(rng).expect("nonempty tree").clone();
    for k in 0..sensing {
        nodes.push(NodeSpec {
            id: format!("S{k}"),
            smartness: Smartness::L1,
            role: NodeRole::Sensing(SensingConfig {
                attributes: vec![
                    SensingAttribute {
                        name: "id_room".into(),
                        category: cat(&mut rng),
                        pp: None,
                        values: ValueGen::IntRange {
                            lo: 0,
                            hi: KEY_DOMAIN - 1,
                        },
                    },
                    SensingAttribute {
                        name: format!("v{k}"),
                        category: cat(&mut rng),
                        pp: None,
                        values: ValueGen::Uniform { lo: 0.0, hi: 40.0 },
                    },
                ],
                rate: None,
            }),
        });
    }
    let threshold = 10 + 2 * n as i64;
    let mut prev = "S0".to_string();
    let mut carried = "v0".to_string();
    for i in 1..=n {
        let k = i % sensing;
        let fresh = format!("v{k}");
        let j = format!("J{i}");
        nodes.push(processor(
            &j,
            Smartness::L3,
            OperatorSpec::join("id_room", "id_room", WindowSpec::count(4, 1), WindowSpec::count(4, 1)),
        ));
        edges.push((prev.clone(), j.clone()));
        edges.push((format!("S{k}"), j.clone()));
        let s = format!("sigma{i}");
        nodes.push(processor(
            &s,
            Smartness::L2,
            OperatorSpec::Selection {
                predicate: Predicate::new(fresh.clone(), Comparator::Gt, Value::Int(threshold)),
            },
        ));
        edges.push((j, s.clone()));
        let p = format!("pi{i}");
        let m = format!("m{i}");
        nodes.push(processor(
            &p,
            Smartness::L2,
            OperatorSpec::Projection {
                parameters: vec![
                    Parameter::new(["id_room"], Function::Id, "id_room"),
                    Parameter::new([carried.clone(), fresh], Function::Avg, m.clone()),
                ],
            },
        ));
        edges.push((s, p.clone()));
        prev = p;
        carried = m;
    }
    for j in 1..=n {
        let a = format!("agg{j}");
        let out = format!("a{j}");
        let ms = 1000 * j as u64;
        nodes.push(processor(
            &a,
            Smartness::L3,
            OperatorSpec::aggregation(
                Parameter::new([carried.clone()], Function::Avg, out.clone()),
                WindowSpec::time(ms, ms),
            ),
        ));
        edges.push((prev, a.clone()));
        prev = a;
        carried = out;
    }
    let purpose = purposes.nodes().choose(&mut rng).expect("nonempty tree").clone();
    nodes.push(NodeSpec {
        id: "consumer".into(),
        smartness: Smartness::L3,
        role: NodeRole::Consumer {
            policy: ConsumerPolicy::new(CONSUMER_POOL[0], purpose),
        },
    });
    edges.push((prev, "consumer".into()));
    Ok(QueryGraph {
        name: format!("Q{n}"),
        nodes,
        edges,
    })
}

fn processor(id: &str, smartness: Smartness, operator: OperatorSpec) -> NodeSpec {
    NodeSpec {
        id: id.to_string(),
        smartness,
        role: NodeRole::Processor { operator },
    }
}
