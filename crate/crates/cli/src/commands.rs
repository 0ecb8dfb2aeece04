use std::fs;
use std::path::{Path, PathBuf};

use peasflow::compliance::{compliance_check, ConsumerPolicy};
use peasflow::engine::Tuple;
use peasflow::hierarchy::{HierarchyError, TaxonomyKind};
use peasflow::scenario::{load_scenario_file, query_family_document, validate_document, Scenario, TreeSpec};
use peasflow::simnet::{
    encode_metadata, generate_pp_set, generate_query_family, generate_taxonomy, median, run_simulation, write_csv,
    ExecMode, Interner, MetricsReport, NodeRole, PpSetKind, WorkloadSpec,
};
use serde_json::{json, Value as Json};

use crate::range::parse_range;
use crate::{
    CheckArgs, CliError, EncodeArgs, Enforcement, GenCommand, PpKind, RunArgs, SweepArgs, TreeKind, EXIT_DROPPED,
    EXIT_OK, SEED_ENV,
};

type CmdResult = Result<u8, CliError>;

/// `PEASFLOW_SEED` wins over the flag so that scripted runs can pin a seed
/// without editing every invocation.
fn resolve_seed(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::input(format!("{SEED_ENV}=`{s}` is not an unsigned integer"))),
        _ => Ok(flag),
    }
}

fn load(path: &Path) -> Result<Scenario, CliError> {
    load_scenario_file(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn mode(parallel: bool) -> ExecMode {
    if parallel {
        ExecMode::Parallel
    } else {
        ExecMode::Sequential
    }
}

fn pp_kind(k: PpKind) -> PpSetKind {
    match k {
        PpKind::None => PpSetKind::None,
        PpKind::Simple => PpSetKind::Simple,
        PpKind::Full => PpSetKind::Full,
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn print_json(v: &Json) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn with_seed(scenario: Scenario, seed: Option<u64>) -> Result<Scenario, CliError> {
    match seed {
        None => Ok(scenario),
        Some(s) => {
            let mut doc = scenario.document;
            doc.workload.seed = s;
            validate_document(doc).map_err(|e| CliError::input(e.to_string()))
        }
    }
}

pub fn run(args: RunArgs) -> CmdResult {
    let scenario = with_seed(load(&args.scenario)?, resolve_seed(args.seed)?)?;
    let sim = scenario.simulation();
    let flags: &[bool] = match args.enforcement {
        Enforcement::On => &[true],
        Enforcement::Off => &[false],
        Enforcement::Both => &[false, true],
    };
    ensure_dir(&args.out)?;
    let mut reports = Vec::new();
    for &on in flags {
        let report = run_simulation(&sim, on, mode(args.parallel)).map_err(|e| CliError::runtime(e.to_string()))?;
        let stem = args.out.join(format!("report_{}", report.run_id));
        let json = serde_json::to_string_pretty(&report).expect("reports serialize");
        write_file(&stem.with_extension("json"), &json)?;
        let mut csv = Vec::new();
        write_csv(&mut csv, [&report]).map_err(|e| CliError::runtime(e.to_string()))?;
        write_file(
            &stem.with_extension("csv"),
            &String::from_utf8(csv).expect("csv is utf-8"),
        )?;
        eprintln!(
            "{}: {} in, {} out, {:.1} extra bits/tuple, p50 {:.1} us, {} released, {} dropped",
            report.run_id,
            report.tuples_in,
            report.tuples_out,
            report.extra_bits_per_tuple,
            report.latency_us_p50,
            report.attributes_released,
            report.attributes_dropped
        );
        reports.push(report);
    }
    let mut out = json!({ "reports": reports });
    if let [off, on] = reports.as_slice() {
        let overhead = overhead_percent(off.processing_us, on.processing_us);
        eprintln!("enforcement overhead: {overhead:.1}%");
        out["overhead_percent"] = json!(overhead);
    }
    print_json(&out);
    Ok(EXIT_OK)
}

fn overhead_percent(off: f64, on: f64) -> f64 {
    if off > 0.0 {
        (on - off) / off * 100.0
    } else {
        0.0
    }
}

const SWEEP_COLUMNS: [&str; 16] = [
    "axis",
    "point",
    "graph",
    "pp_set",
    "sensing_so_count",
    "extra_bits_per_tuple",
    "selectivity",
    "bandwidth_kbit_h",
    "tuples_in",
    "tuples_out",
    "attributes_released",
    "attributes_dropped",
    "latency_us_p50",
    "latency_us_p95",
    "processing_us_off",
    "processing_us_on",
];

pub fn sweep(args: SweepArgs) -> CmdResult {
    if args.reps == 0 {
        return Err(CliError::input("--reps must be at least 1"));
    }
    let template = with_seed(load(&args.template)?, resolve_seed(args.seed)?)?;
    let base = template.document.clone();
    let (axis, points): (&str, Vec<(String, Scenario)>) = if let Some(r) = &args.family {
        let sensing = base
            .graph
            .nodes
            .iter()
            .filter(|n| matches!(n.role, NodeRole::Sensing(_)))
            .count()
            .max(2);
        let mut pts = Vec::new();
        for n in parse_range(r).map_err(CliError::input)? {
            let graph = generate_query_family(
                n,
                sensing,
                &template.taxonomies.categories,
                &template.taxonomies.purposes,
                base.workload.seed,
            )
            .map_err(|e| CliError::input(e.to_string()))?;
            let mut doc = base.clone();
            doc.graph = graph;
            doc.name = format!("{}-q{n}", base.name);
            pts.push((
                format!("q{n}"),
                validate_document(doc).map_err(|e| CliError::input(e.to_string()))?,
            ));
        }
        ("family", pts)
    } else if let Some(list) = &args.pp {
        let mut pts = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let kind = match item {
                "none" => PpSetKind::None,
                "simple" => PpSetKind::Simple,
                "full" => PpSetKind::Full,
                other => return Err(CliError::input(format!("unknown preference set `{other}`"))),
            };
            let mut doc = base.clone();
            doc.workload.pp_set = kind;
            pts.push((
                item.to_string(),
                validate_document(doc).map_err(|e| CliError::input(e.to_string()))?,
            ));
        }
        ("pp", pts)
    } else if let Some(r) = &args.sensing {
        let mut pts = Vec::new();
        for k in parse_range(r).map_err(CliError::input)? {
            let mut doc = base.clone();
            doc.workload.sensing_so_count = k;
            pts.push((
                k.to_string(),
                validate_document(doc).map_err(|e| CliError::input(e.to_string()))?,
            ));
        }
        ("sensing", pts)
    } else {
        return Err(CliError::input("sweep needs one of --family, --pp or --sensing"));
    };
    if points.is_empty() {
        return Err(CliError::input("sweep has no points"));
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (point, scenario) in &points {
        let sim = scenario.simulation();
        let mut offs = Vec::new();
        let mut ons: Vec<MetricsReport> = Vec::new();
        for _ in 0..args.reps {
            let exec = |on| run_simulation(&sim, on, mode(args.parallel)).map_err(|e| CliError::runtime(e.to_string()));
            offs.push(exec(false)?);
            ons.push(exec(true)?);
        }
        let med = |f: fn(&MetricsReport) -> f64, v: &[MetricsReport]| median(&v.iter().map(f).collect::<Vec<_>>());
        let r = &ons[0];
        let row = vec![
            axis.to_string(),
            point.clone(),
            r.graph.clone(),
            format!("{:?}", r.pp_set).to_lowercase(),
            r.sensing_so_count.to_string(),
            r.extra_bits_per_tuple.to_string(),
            r.selectivity.to_string(),
            r.bandwidth_kbit_h.to_string(),
            r.tuples_in.to_string(),
            r.tuples_out.to_string(),
            r.attributes_released.to_string(),
            r.attributes_dropped.to_string(),
            med(|m| m.latency_us_p50, &ons).to_string(),
            med(|m| m.latency_us_p95, &ons).to_string(),
            med(|m| m.processing_us, &offs).to_string(),
            med(|m| m.processing_us, &ons).to_string(),
        ];
        eprintln!(
            "{axis}={point}: {} out, {:.1} extra bits/tuple, processing off {} us / on {} us",
            r.tuples_out, r.extra_bits_per_tuple, row[14], row[15]
        );
        rows.push(row);
    }

    ensure_dir(&args.out)?;
    let path = args.out.join(format!("sweep_{axis}.csv"));
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::runtime(e.to_string());
    w.write_record(SWEEP_COLUMNS).map_err(io)?;
    for row in &rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::runtime(e.to_string()))?;

    let json_rows: Vec<Json> = rows
        .iter()
        .map(|row| {
            let obj = SWEEP_COLUMNS
                .iter()
                .zip(row)
                .map(|(k, v)| {
                    let val = v.parse::<f64>().map(|x| json!(x)).unwrap_or_else(|_| json!(v));
                    (k.to_string(), val)
                })
                .collect::<serde_json::Map<_, _>>();
            Json::Object(obj)
        })
        .collect();
    print_json(&json!({ "csv": path.display().to_string(), "rows": json_rows }));
    Ok(EXIT_OK)
}

pub fn gen(cmd: GenCommand) -> CmdResult {
    match cmd {
        GenCommand::Taxonomy { kind, size, seed } => {
            if size == 0 {
                return Err(CliError::input("--size must be at least 1"));
            }
            let kind = match kind {
                TreeKind::Purpose => TaxonomyKind::Purpose,
                TreeKind::Category => TaxonomyKind::Category,
            };
            let tree = TreeSpec::from_taxonomy(&generate_taxonomy(kind, size, seed));
            print_json(&serde_json::to_value(tree).expect("trees serialize"));
        }
        GenCommand::PpSet {
            scenario,
            kind,
            count,
            seed,
        } => {
            let s = load(&scenario)?;
            let set = generate_pp_set(
                pp_kind(kind),
                &s.taxonomies.purposes,
                &s.taxonomies.categories,
                count,
                seed,
            );
            print_json(&serde_json::to_value(set).expect("preferences serialize"));
        }
        GenCommand::Qfamily {
            range,
            sensing,
            objects,
            tree_size,
            pp,
            rate,
            duration,
            seed,
            out,
        } => {
            let seed = resolve_seed(Some(seed))?.unwrap_or(seed);
            let workload = WorkloadSpec {
                sensing_so_count: objects,
                rate_per_stream: rate,
                pp_set: pp_kind(pp),
                pp_coverage_percent: 100,
                duration_seconds: duration,
                seed,
            };
            workload.validate().map_err(CliError::input)?;
            ensure_dir(&out)?;
            let mut written: Vec<PathBuf> = Vec::new();
            for n in parse_range(&range).map_err(CliError::input)? {
                let doc = query_family_document(n, sensing, tree_size, workload.clone(), seed)
                    .map_err(|e| CliError::input(e.to_string()))?;
                let scenario = validate_document(doc).map_err(|e| CliError::runtime(e.to_string()))?;
                let path = out.join(format!("q{n}.json"));
                write_file(&path, &scenario.to_json())?;
                written.push(path);
            }
            eprintln!("wrote {} scenarios to {}", written.len(), out.display());
            print_json(&json!(written
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()));
        }
    }
    Ok(EXIT_OK)
}

fn read_tuple(path: &Path) -> Result<Tuple, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn check_tuple_ids(t: &Tuple, s: &Scenario) -> Result<(), HierarchyError> {
    let tax = &s.taxonomies;
    for a in &t.attributes {
        if let Some(pp) = &a.pp {
            pp.validate(tax)?;
        }
        tax.categories.check_ids(&a.category)?;
        for he in &a.history {
            tax.categories.check_ids(&he.ac)?;
            tax.categories.check_ids(&he.rc)?;
        }
    }
    Ok(())
}

pub fn check(args: CheckArgs) -> CmdResult {
    let scenario = load(&args.scenario)?;
    let tuple = read_tuple(&args.tuple)?;
    check_tuple_ids(&tuple, &scenario).map_err(|e| CliError::input(format!("{}: {e}", args.tuple.display())))?;
    let policy = ConsumerPolicy::new(args.consumer.as_str(), args.purpose.as_str());
    policy
        .validate(&scenario.taxonomies)
        .map_err(|e| CliError::input(format!("--purpose: {e}")))?;
    let (released, verdicts) = compliance_check(&tuple, &policy, &scenario.taxonomies, scenario.document.flags)
        .map_err(|e| CliError::runtime(e.to_string()))?;

    let mut dropped = false;
    let vs: Vec<Json> = verdicts
        .iter()
        .map(|v| {
            let failed: Vec<&str> = v.failed_checks.iter().map(|c| c.name()).collect();
            if v.passed {
                eprintln!("{}: PASS", v.attribute);
            } else {
                dropped = true;
                eprintln!("{}: FAIL ({})", v.attribute, failed.join(", "));
            }
            json!({ "attribute": v.attribute, "passed": v.passed, "failed_checks": failed })
        })
        .collect();
    print_json(&json!({
        "consumer": policy.consumer_id,
        "purpose": policy.access_purpose.as_str(),
        "verdicts": vs,
        "released": released.names().collect::<Vec<_>>(),
    }));
    Ok(if dropped { EXIT_DROPPED } else { EXIT_OK })
}

pub fn encode(args: EncodeArgs) -> CmdResult {
    let tuple = read_tuple(&args.tuple)?;
    let mut interner = match &args.scenario {
        Some(p) => {
            let s = load(p)?;
            check_tuple_ids(&tuple, &s).map_err(|e| CliError::input(format!("{}: {e}", args.tuple.display())))?;
            Interner::for_taxonomies(&s.taxonomies)
        }
        None => Interner::new(),
    };
    let mut total = 0u64;
    let attrs: Vec<Json> = tuple
        .attributes
        .iter()
        .map(|a| {
            let enc = encode_metadata(a, &mut interner);
            total += enc.bits();
            let hex: String = enc.bytes.iter().map(|b| format!("{b:02x}")).collect();
            eprintln!("{}: {} bits", a.name, enc.bits());
            json!({ "name": a.name, "bits": enc.bits(), "bytes": hex })
        })
        .collect();
    eprintln!("total: {total} bits");
    print_json(&json!({ "attributes": attrs, "total_bits": total }));
    Ok(EXIT_OK)
}
