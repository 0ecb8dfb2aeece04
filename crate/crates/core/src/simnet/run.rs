use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use crossbeam_channel::{unbounded, Receiver, Sender};
use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compliance::{Check, ComplianceChecker, ComplianceOptions, ConsumerPolicy};
use crate::engine::{
    apply_projection, apply_selection, Aggregator, EngineError, Joiner, OperatorSpec, Parameter, Predicate, Side,
    StreamItem, Tuple, Value,
};
use crate::hierarchy::{IdSet, Taxonomies};
use crate::peas::{init_peas, DerivationContext, DerivationPathRegistry, PeasAttribute};
use crate::preferences::PrivacyPreference;

use super::encoding::{encode_tuple, Interner};
use super::graph::{validate_graph, NodeRole, QueryGraph, SensingConfig, ValueGen};
use super::metrics::{percentile, MetricsReport, NodeMetrics, OverheadReport};
use super::workload::{generate_pp_set, PpSetKind, WorkloadSpec};
use super::SimError;

/// Everything a run needs, resolved and validated.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub name: String,
    pub graph: QueryGraph,
    pub workload: WorkloadSpec,
    pub taxonomies: Taxonomies,
    pub registry: DerivationPathRegistry,
    pub preferences: IndexMap<String, Arc<PrivacyPreference>>,
    pub options: ComplianceOptions,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExecMode {
    /// One node at a time in topological order.
    #[default]
    Sequential,
    /// One thread per node, connected by channels.
    Parallel,
}

/// A tuple as seen by one consumer: before and after compliance checking.
#[derive(Clone, Debug, PartialEq)]
pub struct Delivery {
    pub consumer: String,
    pub arrived: Tuple,
    pub released: Tuple,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub deliveries: Vec<Delivery>,
}

#[derive(Clone, Debug)]
struct Item {
    tuple: Tuple,
    carried_ns: u64,
}

impl StreamItem for Item {
    fn tuple(&self) -> &Tuple {
        &self.tuple
    }

    fn carried_ns(&self) -> u64 {
        self.carried_ns
    }
}

struct ConsumerState {
    policy: ConsumerPolicy,
    checker: Option<ComplianceChecker>,
    interner: Interner,
    collect: bool,
    bits: u64,
    latencies_ns: Vec<u64>,
    released: u64,
    dropped: u64,
    failed: BTreeMap<Check, u64>,
    deliveries: Vec<Delivery>,
}

enum NodeState {
    Source,
    Select(Predicate),
    Project(Vec<Parameter>),
    Aggregate(Aggregator<Item>),
    Join(Joiner<Item>),
    Consumer(Box<ConsumerState>),
}

#[derive(Default)]
struct NodeCounters {
    tuples_in: u64,
    tuples_out: u64,
    processing_ns: u64,
}

struct NodeRuntime<'a> {
    id: String,
    state: NodeState,
    counters: NodeCounters,
    ctx: Option<&'a DerivationContext>,
}

impl NodeRuntime<'_> {
    fn step(&mut self, port: usize, item: Item) -> Result<Vec<Item>, SimError> {
        self.counters.tuples_in += 1;
        let wrap = |source: EngineError| SimError::Engine {
            node: self.id.clone(),
            source,
        };
        let ctx = self.ctx;
        let mut outputs = Vec::new();
        let started = Instant::now();
        match &mut self.state {
            NodeState::Source => {}
            NodeState::Select(pred) => {
                let carried = item.carried_ns;
                if let Some(t) = apply_selection(pred, item.tuple).map_err(wrap)? {
                    outputs.push((t, carried));
                }
            }
            NodeState::Project(params) => {
                let t = apply_projection(params, &item.tuple, ctx).map_err(wrap)?;
                outputs.push((t, item.carried_ns));
            }
            NodeState::Aggregate(agg) => {
                for e in agg.on_arrival(item, ctx).map_err(wrap)? {
                    outputs.push((e.tuple, e.carried_ns));
                }
            }
            NodeState::Join(j) => {
                let side = if port == 0 { Side::Left } else { Side::Right };
                for e in j.on_arrival(side, item, ctx).map_err(wrap)? {
                    outputs.push((e.tuple, e.carried_ns));
                }
            }
            NodeState::Consumer(c) => {
                // accounting only, kept out of the measured time
                let bits = if ctx.is_some() {
                    encode_tuple(&item.tuple, &mut c.interner)
                } else {
                    0
                };
                let t0 = Instant::now();
                let released = match &mut c.checker {
                    Some(checker) => {
                        let (released, verdicts) =
                            checker
                                .check(&item.tuple, &c.policy)
                                .map_err(|source| SimError::Compliance {
                                    node: self.id.clone(),
                                    source,
                                })?;
                        for v in &verdicts {
                            for f in &v.failed_checks {
                                *c.failed.entry(*f).or_default() += 1;
                            }
                        }
                        released
                    }
                    None => item.tuple.clone(),
                };
                let elapsed = t0.elapsed().as_nanos() as u64;
                c.bits += bits;
                c.released += released.attributes.len() as u64;
                c.dropped += (item.tuple.attributes.len() - released.attributes.len()) as u64;
                c.latencies_ns.push(item.carried_ns + elapsed);
                self.counters.processing_ns += elapsed;
                if c.collect {
                    c.deliveries.push(Delivery {
                        consumer: self.id.clone(),
                        arrived: item.tuple,
                        released,
                    });
                }
                return Ok(Vec::new());
            }
        }
        let elapsed = started.elapsed().as_nanos() as u64;
        self.counters.processing_ns += elapsed;
        self.counters.tuples_out += outputs.len() as u64;
        Ok(outputs
            .into_iter()
            .map(|(tuple, carried)| Item {
                tuple,
                carried_ns: carried + elapsed,
            })
            .collect())
    }
}

/// Per-attribute plan of one sensing object.
struct SoAttribute {
    name: String,
    category: IdSet,
    values: ValueGen,
    pp: Option<Arc<PrivacyPreference>>,
}

fn draw(rng: &mut ChaCha8Rng, g: &ValueGen) -> Value {
    match g {
        ValueGen::Uniform { lo, hi } if hi > lo => Value::Float(rng.gen_range(*lo..*hi)),
        ValueGen::Uniform { lo, .. } => Value::Float(*lo),
        ValueGen::IntRange { lo, hi } if hi >= lo => Value::Int(rng.gen_range(*lo..=*hi)),
        ValueGen::IntRange { lo, .. } => Value::Int(*lo),
        ValueGen::Constant { value } => value.clone(),
    }
}

/// Preference of sensing object `so` for a generated set; the first
/// `coverage` percent of objects carry one.
fn covered(so: usize, count: usize, coverage: u8) -> bool {
    so < (count * coverage as usize).div_ceil(100)
}

/// Sensing objects of each sensing node: object `j` belongs to node
/// `j mod m`; a node left without objects reuses object `i mod count`.
fn assign_objects(sensing_nodes: usize, count: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); sensing_nodes];
    for j in 0..count {
        out[j % sensing_nodes].push(j);
    }
    for (i, so) in out.iter_mut().enumerate() {
        if so.is_empty() {
            so.push(i % count);
        }
    }
    out
}

fn sensing_stream(
    sim: &Simulation,
    node: usize,
    cfg: &SensingConfig,
    objects: &[usize],
    generated: &[Arc<PrivacyPreference>],
    enforcement: bool,
) -> Result<Vec<Item>, SimError> {
    let w = &sim.workload;
    let rate = cfg.rate.unwrap_or(w.rate_per_stream);
    let horizon = w.duration_seconds * 1000;
    let node_id = &sim.graph.nodes[node].id;
    let mut rows: Vec<(u64, usize, Tuple)> = Vec::new();
    for (pos, &so) in objects.iter().enumerate() {
        let has_pp = covered(so, w.sensing_so_count, w.pp_coverage_percent);
        let mut plan = Vec::with_capacity(cfg.attributes.len());
        for a in &cfg.attributes {
            let pp = if !has_pp {
                None
            } else if w.pp_set == PpSetKind::None {
                match &a.pp {
                    None => None,
                    Some(r) => Some(Arc::clone(sim.preferences.get(r).ok_or_else(|| {
                        SimError::MissingPreference {
                            node: node_id.clone(),
                            reference: r.clone(),
                        }
                    })?)),
                }
            } else {
                Some(Arc::new(generated[so].as_ref().clone().with_attribute(&a.name)))
            };
            plan.push(SoAttribute {
                name: a.name.clone(),
                category: IdSet::from([a.category.clone()]),
                values: a.values.clone(),
                pp,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(w.seed);
        rng.set_stream(((node as u64) << 32) | so as u64);
        let period = (1000.0 / rate).ceil().max(1.0) as u64;
        let phase = rng.gen_range(0..period);
        for k in 0u64.. {
            let ts = phase + (k as f64 * 1000.0 / rate).floor() as u64;
            if ts >= horizon {
                break;
            }
            let mut attrs = Vec::with_capacity(plan.len());
            for p in &plan {
                let v = draw(&mut rng, &p.values);
                attrs.push(if enforcement {
                    init_peas(p.name.clone(), v, p.pp.clone(), p.category.clone()).map_err(SimError::Peas)?
                } else {
                    PeasAttribute::raw(p.name.clone(), v)
                });
            }
            rows.push((ts, pos, Tuple::new(ts, attrs)));
        }
    }
    rows.sort_by_key(|(ts, pos, _)| (*ts, *pos));
    Ok(rows
        .into_iter()
        .map(|(_, _, tuple)| Item { tuple, carried_ns: 0 })
        .collect())
}

struct Prepared<'a> {
    runtimes: Vec<NodeRuntime<'a>>,
    sources: Vec<Option<Vec<Item>>>,
}

fn prepare<'a>(
    sim: &Simulation,
    enforcement: bool,
    collect: bool,
    ctx: Option<&'a DerivationContext>,
) -> Result<Prepared<'a>, SimError> {
    let violations = validate_graph(&sim.graph);
    if !violations.is_empty() {
        return Err(SimError::InvalidGraph(violations));
    }
    sim.workload.validate().map_err(SimError::InvalidArgument)?;
    let w = &sim.workload;
    let generated: Vec<Arc<PrivacyPreference>> = match w.pp_set {
        PpSetKind::None => Vec::new(),
        kind => generate_pp_set(
            kind,
            &sim.taxonomies.purposes,
            &sim.taxonomies.categories,
            w.sensing_so_count,
            w.seed,
        )
        .into_iter()
        .map(Arc::new)
        .collect(),
    };
    let sensing: Vec<usize> = sim
        .graph
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| matches!(n.role, NodeRole::Sensing(_)))
        .map(|(i, _)| i)
        .collect();
    let objects = assign_objects(sensing.len(), w.sensing_so_count);
    let mut sources = vec![None; sim.graph.nodes.len()];
    for (k, &i) in sensing.iter().enumerate() {
        if let NodeRole::Sensing(cfg) = &sim.graph.nodes[i].role {
            sources[i] = Some(sensing_stream(sim, i, cfg, &objects[k], &generated, enforcement)?);
        }
    }
    let mut runtimes = Vec::with_capacity(sim.graph.nodes.len());
    for n in &sim.graph.nodes {
        let wrap = |source: EngineError| SimError::Engine {
            node: n.id.clone(),
            source,
        };
        let state = match &n.role {
            NodeRole::Sensing(_) => NodeState::Source,
            NodeRole::Processor { operator } => match operator {
                OperatorSpec::Selection { predicate } => NodeState::Select(predicate.clone()),
                OperatorSpec::Projection { parameters } => NodeState::Project(parameters.clone()),
                OperatorSpec::Aggregation { .. } => {
                    NodeState::Aggregate(Aggregator::from_spec(operator).map_err(wrap)?)
                }
                OperatorSpec::Join { .. } => NodeState::Join(Joiner::from_spec(operator).map_err(wrap)?),
            },
            NodeRole::Consumer { policy } => NodeState::Consumer(Box::new(ConsumerState {
                policy: policy.clone(),
                checker: enforcement.then(|| ComplianceChecker::new(sim.taxonomies.clone(), sim.options)),
                interner: Interner::for_taxonomies(&sim.taxonomies),
                collect,
                bits: 0,
                latencies_ns: Vec::new(),
                released: 0,
                dropped: 0,
                failed: BTreeMap::new(),
                deliveries: Vec::new(),
            })),
        };
        runtimes.push(NodeRuntime {
            id: n.id.clone(),
            state,
            counters: NodeCounters::default(),
            ctx,
        });
    }
    Ok(Prepared { runtimes, sources })
}

fn run_sequential<'a>(sim: &Simulation, mut p: Prepared<'a>) -> Result<Vec<NodeRuntime<'a>>, SimError> {
    let order = sim.graph.topological_order().expect("validated acyclic");
    let inputs = sim.graph.inputs();
    let outputs = sim.graph.outputs();
    let mut readers: Vec<usize> = outputs.iter().map(Vec::len).collect();
    let mut produced: Vec<Option<Vec<Item>>> = vec![None; sim.graph.nodes.len()];
    for i in order {
        if let Some(items) = p.sources[i].take() {
            p.runtimes[i].counters.tuples_out = items.len() as u64;
            produced[i] = Some(items);
            continue;
        }
        let mut merged: Vec<(u64, usize, Item)> = Vec::new();
        for (port, &src) in inputs[i].iter().enumerate() {
            readers[src] -= 1;
            let items = if readers[src] == 0 {
                produced[src].take().unwrap_or_default()
            } else {
                produced[src].clone().unwrap_or_default()
            };
            merged.extend(items.into_iter().map(|it| (it.tuple.timestamp, port, it)));
        }
        merged.sort_by_key(|(ts, port, _)| (*ts, *port));
        let mut out = Vec::new();
        for (_, port, item) in merged {
            out.extend(p.runtimes[i].step(port, item)?);
        }
        produced[i] = Some(out);
    }
    Ok(p.runtimes)
}

/// Blocks until every open port has a head, then yields the smallest
/// `(timestamp, port)`; the same order the sequential mode produces.
fn next_merged(heads: &mut [Option<Item>], rx: &[Receiver<Item>], open: &mut [bool]) -> Option<(usize, Item)> {
    for p in 0..rx.len() {
        if heads[p].is_none() && open[p] {
            match rx[p].recv() {
                Ok(it) => heads[p] = Some(it),
                Err(_) => open[p] = false,
            }
        }
    }
    let best = (0..heads.len())
        .filter(|&p| heads[p].is_some())
        .min_by_key(|&p| (heads[p].as_ref().map(|i| i.tuple.timestamp), p))?;
    heads[best].take().map(|it| (best, it))
}

fn run_parallel<'a>(sim: &Simulation, p: Prepared<'a>) -> Result<Vec<NodeRuntime<'a>>, SimError> {
    let n = sim.graph.nodes.len();
    let outputs = sim.graph.outputs();
    let mut senders: Vec<Vec<Sender<Item>>> = (0..n).map(|_| Vec::new()).collect();
    let mut receivers: Vec<Vec<(usize, Receiver<Item>)>> = (0..n).map(|_| Vec::new()).collect();
    for (i, outs) in outputs.iter().enumerate() {
        for &(j, port) in outs {
            let (tx, rx) = unbounded();
            senders[i].push(tx);
            receivers[j].push((port, rx));
        }
    }
    let Prepared { runtimes, mut sources } = p;
    let results: Vec<Result<NodeRuntime<'a>, SimError>> = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(n);
        for (i, mut rt) in runtimes.into_iter().enumerate() {
            let txs = std::mem::take(&mut senders[i]);
            let mut rxs = std::mem::take(&mut receivers[i]);
            rxs.sort_by_key(|(port, _)| *port);
            let rxs: Vec<Receiver<Item>> = rxs.into_iter().map(|(_, r)| r).collect();
            let source = sources[i].take();
            handles.push(scope.spawn(move || -> Result<NodeRuntime<'a>, SimError> {
                let send = |items: Vec<Item>| {
                    for it in items {
                        for tx in &txs {
                            // a closed receiver means downstream failed; its error is reported there
                            let _ = tx.send(it.clone());
                        }
                    }
                };
                if let Some(items) = source {
                    rt.counters.tuples_out = items.len() as u64;
                    send(items);
                    return Ok(rt);
                }
                let mut heads: Vec<Option<Item>> = vec![None; rxs.len()];
                let mut open = vec![true; rxs.len()];
                while let Some((port, item)) = next_merged(&mut heads, &rxs, &mut open) {
                    let out = rt.step(port, item)?;
                    send(out);
                }
                Ok(rt)
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(SimError::WorkerPanicked)))
            .collect()
    });
    results.into_iter().collect()
}

fn assemble(sim: &Simulation, enforcement: bool, runtimes: Vec<NodeRuntime<'_>>) -> RunOutput {
    let w = &sim.workload;
    let mut tuples_in = 0;
    let mut tuples_out = 0;
    let mut bits = 0;
    let mut latencies = Vec::new();
    let mut processing_ns = 0;
    let mut released = 0;
    let mut dropped = 0;
    let mut failed = BTreeMap::new();
    let mut deliveries = Vec::new();
    let mut nodes = Vec::with_capacity(runtimes.len());
    for (rt, spec) in runtimes.into_iter().zip(&sim.graph.nodes) {
        match rt.state {
            NodeState::Source => tuples_in += rt.counters.tuples_out,
            NodeState::Consumer(c) => {
                tuples_out += rt.counters.tuples_in;
                bits += c.bits;
                latencies.extend(c.latencies_ns.iter().map(|ns| *ns as f64 / 1000.0));
                released += c.released;
                dropped += c.dropped;
                for (k, v) in c.failed {
                    *failed.entry(k.name().to_string()).or_insert(0) += v;
                }
                deliveries.extend(c.deliveries);
            }
            _ => {}
        }
        processing_ns += rt.counters.processing_ns;
        nodes.push(NodeMetrics {
            id: rt.id,
            role: spec.role_name().to_string(),
            tuples_in: rt.counters.tuples_in,
            tuples_out: rt.counters.tuples_out,
            processing_us: rt.counters.processing_ns as f64 / 1000.0,
        });
    }
    latencies.sort_by(f64::total_cmp);
    let extra_bits = if tuples_out == 0 {
        0.0
    } else {
        bits as f64 / tuples_out as f64
    };
    let per_hour = tuples_out as f64 * 3600.0 / w.duration_seconds as f64;
    let report = MetricsReport {
        run_id: format!(
            "{}-{}-s{}-{}",
            sim.name,
            sim.graph.name,
            w.seed,
            if enforcement { "on" } else { "off" }
        ),
        scenario: sim.name.clone(),
        graph: sim.graph.name.clone(),
        enforcement,
        seed: w.seed,
        pp_set: w.pp_set,
        sensing_so_count: w.sensing_so_count,
        latency_us_p50: percentile(&latencies, 50.0),
        latency_us_p95: percentile(&latencies, 95.0),
        processing_us: processing_ns as f64 / 1000.0,
        extra_bits_per_tuple: extra_bits,
        selectivity: if tuples_in == 0 {
            0.0
        } else {
            tuples_out as f64 / tuples_in as f64
        },
        bandwidth_kbit_h: extra_bits * per_hour / 1000.0,
        tuples_in,
        tuples_out,
        attributes_released: released,
        attributes_dropped: dropped,
        failed_checks: failed,
        nodes,
    };
    RunOutput { report, deliveries }
}

/// Runs the workload through the graph. With enforcement off, tuples carry
/// no meta-data and the consumer releases everything.
pub fn run_simulation(sim: &Simulation, enforcement: bool, mode: ExecMode) -> Result<MetricsReport, SimError> {
    run(sim, enforcement, mode, false).map(|o| o.report)
}

/// Like [`run_simulation`], also returning every tuple each consumer saw.
pub fn run_with_deliveries(sim: &Simulation, enforcement: bool, mode: ExecMode) -> Result<RunOutput, SimError> {
    run(sim, enforcement, mode, true)
}

fn run(sim: &Simulation, enforcement: bool, mode: ExecMode, collect: bool) -> Result<RunOutput, SimError> {
    let ctx = DerivationContext::new(sim.taxonomies.clone(), sim.registry.clone());
    let ctx_ref = enforcement.then_some(&ctx);
    let prepared = prepare(sim, enforcement, collect, ctx_ref)?;
    let runtimes = match mode {
        ExecMode::Sequential => run_sequential(sim, prepared)?,
        ExecMode::Parallel => run_parallel(sim, prepared)?,
    };
    Ok(assemble(sim, enforcement, runtimes))
}

/// Off run, then on run, of the same workload.
pub fn measure_overhead(sim: &Simulation, mode: ExecMode) -> Result<OverheadReport, SimError> {
    let off = run_simulation(sim, false, mode)?;
    let on = run_simulation(sim, true, mode)?;
    let overhead_percent = if off.processing_us > 0.0 {
        (on.processing_us - off.processing_us) / off.processing_us * 100.0
    } else {
        0.0
    };
    Ok(OverheadReport {
        off,
        on,
        overhead_percent,
    })
}
