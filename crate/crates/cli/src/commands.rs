//! Subcommand implementations. Each command reads its inputs, runs the
//! corresponding library pipeline, and writes a fixed set of artifacts
//! plus a `run_meta.json` sidecar into the output directory. Artifacts
//! are deterministic: the same inputs produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::json;

use respair_core::cluster::{
    self, CutCriterion, Linkage, PartTag, PipelineConfig, PipelineOutput,
};
use respair_core::correspondence::Dims;
use respair_core::crosstab;
use respair_core::eval::{self, Method, SyntheticConfig};
use respair_core::ingest::{self, Gazetteer, PurchaseRecord, RawRecord, Ruleset};
use respair_core::modularity::{self, BipartiteGraph};

use crate::config::{
    Cli, CliError, Command, FileConfig, parse_cut, parse_dims, parse_linkage, parse_measure,
    parse_methods, require, require_path,
};
use crate::geojson;

type Result<T> = std::result::Result<T, CliError>;

/// Wraps a library or I/O error as a data problem (exit code 2).
fn data<E>(err: E) -> CliError
where
    E: std::error::Error + Send + Sync + 'static,
{
    CliError::Data(anyhow::Error::new(err))
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Ingest {
            records,
            gazetteer,
            ruleset,
            out_dir,
            tolerance,
        } => cmd_ingest(&file, records, gazetteer, ruleset, out_dir, tolerance),
        Command::Cluster {
            pairs,
            linkage,
            cut,
            dims,
            out_dir,
        } => cmd_cluster(&file, pairs, linkage, cut, dims, out_dir),
        Command::Modularity {
            pairs,
            measure,
            weakest_pair,
            out_dir,
        } => cmd_modularity(&file, pairs, measure, weakest_pair, out_dir),
        Command::Evaluate {
            records,
            gazetteer,
            ruleset,
            synthetic,
            seed,
            step,
            methods,
            out_dir,
        } => cmd_evaluate(
            &file, records, gazetteer, ruleset, synthetic, seed, step, methods, out_dir,
        ),
        Command::ExportGeojson {
            partition,
            gazetteer,
            out_dir,
        } => cmd_export_geojson(&file, partition, gazetteer, out_dir),
        Command::ExportDot {
            pairs,
            linkage,
            dims,
            out_dir,
        } => cmd_export_dot(&file, pairs, linkage, dims, out_dir),
    }
}

/// Resolves and creates the output directory.
fn out_dir(flag: Option<PathBuf>, file: &FileConfig) -> Result<PathBuf> {
    let dir = require(flag, file.out_dir.clone(), "out_dir")?;
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

/// Writes one artifact, normalizing to exactly one trailing newline so
/// repeated runs stay byte-identical regardless of the serializer.
fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<()> {
    let path = dir.join(name);
    let mut text = content.trim_end_matches('\n').to_owned();
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_meta(dir: &Path, meta: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    write_artifact(dir, "run_meta.json", &text)
}

fn load_gazetteer(path: &Path) -> Result<Gazetteer> {
    Gazetteer::from_file(path)
        .map_err(|e| CliError::Data(anyhow::Error::new(e).context("reading gazetteer")))
}

fn load_ruleset(path: Option<&Path>) -> Result<Ruleset> {
    match path {
        Some(p) => Ruleset::from_file(p)
            .map_err(|e| CliError::Data(anyhow::Error::new(e).context("reading ruleset"))),
        None => Ok(Ruleset::default_rules()),
    }
}

fn load_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let pairs = crosstab::read_pairs_csv(path)
        .map_err(|e| CliError::Data(anyhow::Error::new(e).context("reading pairs")))?;
    if pairs.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!(
            "pairs file {} holds no data rows",
            path.display()
        )));
    }
    Ok(pairs)
}

/// Parses record lines one at a time so a bounded number of malformed
/// lines can be skipped instead of aborting the whole run.
fn read_records_tolerant(path: &Path, tolerance: usize) -> Result<(Vec<RawRecord>, Vec<String>)> {
    let content = fs::read_to_string(path)
        .with_context(|| format!("reading records {}", path.display()))?;
    let header = ingest::RECORD_CSV_HEADER.join(",");
    let mut records = Vec::new();
    let mut malformed = Vec::new();
    let mut seen_any = false;
    for (idx, line) in content.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !seen_any && trimmed == header {
            seen_any = true;
            continue;
        }
        seen_any = true;
        match ingest::parse_record(line, idx + 1) {
            Ok(record) => records.push(record),
            Err(err) => malformed.push(err.to_string()),
        }
    }
    if malformed.len() > tolerance {
        let shown = malformed
            .iter()
            .take(3)
            .cloned()
            .collect::<Vec<_>>()
            .join("; ");
        return Err(CliError::Data(anyhow::anyhow!(
            "{} malformed records exceed tolerance {tolerance}: {shown}",
            malformed.len()
        )));
    }
    if records.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!(
            "record file {} holds no parseable records",
            path.display()
        )));
    }
    Ok((records, malformed))
}

fn cmd_ingest(
    file: &FileConfig,
    records: Option<PathBuf>,
    gazetteer: Option<PathBuf>,
    ruleset: Option<PathBuf>,
    out: Option<PathBuf>,
    tolerance: Option<usize>,
) -> Result<()> {
    let records_path = require_path(records, file.records.clone(), "records")?;
    let gazetteer_path = require_path(gazetteer, file.gazetteer.clone(), "gazetteer")?;
    let ruleset_path = match ruleset.or_else(|| file.ruleset.clone()) {
        Some(p) => Some(require_path(Some(p), None, "ruleset")?),
        None => None,
    };
    let dir = out_dir(out, file)?;
    let tolerance = tolerance.or(file.tolerance).unwrap_or(0);

    let (raw, malformed) = read_records_tolerant(&records_path, tolerance)?;
    let gz = load_gazetteer(&gazetteer_path)?;
    let rules = load_ruleset(ruleset_path.as_deref())?;
    let output = ingest::to_pairs(&raw, &gz, &rules).map_err(data)?;

    let mut pairs_csv = Vec::new();
    crosstab::write_pairs_csv(&mut pairs_csv, &output.pairs()).map_err(data)?;
    write_artifact(
        &dir,
        "pairs.csv",
        &String::from_utf8(pairs_csv).expect("CSV is UTF-8"),
    )?;
    write_artifact(&dir, "review.csv", &ingest::review_csv(&output.review))?;
    write_meta(
        &dir,
        &json!({
            "command": "ingest",
            "records": raw.len(),
            "malformed_skipped": malformed.len(),
            "tolerance": tolerance,
            "ruleset": ruleset_path
                .as_ref()
                .map_or("built-in".to_owned(), |p| p.display().to_string()),
            "purchases": output.purchases.len(),
            "review": output.review.len(),
        }),
    )?;
    eprintln!(
        "ingested {} records: {} pairs, {} queued for review ({} malformed skipped)",
        raw.len(),
        output.purchases.len(),
        output.review.len(),
        malformed.len()
    );
    Ok(())
}

/// Shared front half of `cluster` and `export-dot`.
fn run_pipeline(
    pairs_path: &Path,
    linkage: Linkage,
    cut: CutCriterion,
    dims: Dims,
) -> Result<PipelineOutput> {
    let pairs = load_pairs(pairs_path)?;
    let config = PipelineConfig { dims, linkage, cut };
    cluster::responsiveness_pair_cluster(&pairs, &config)
        .map_err(|e| CliError::Data(anyhow::Error::new(e).context("clustering pairs")))
}

fn cmd_cluster(
    file: &FileConfig,
    pairs: Option<PathBuf>,
    linkage: Option<String>,
    cut: Option<String>,
    dims: Option<String>,
    out: Option<PathBuf>,
) -> Result<()> {
    let pairs_path = require_path(pairs, file.pairs.clone(), "pairs")?;
    let linkage_str = linkage.or_else(|| file.linkage.clone());
    let cut_str = cut.or_else(|| file.cut.clone());
    let dims_str = dims.or_else(|| file.dims.clone());
    let linkage = parse_linkage(linkage_str.as_deref().unwrap_or("ward"))?;
    let cut = parse_cut(cut_str.as_deref().unwrap_or("largest-gap"))?;
    let dims = parse_dims(dims_str.as_deref().unwrap_or("all"))?;
    let dir = out_dir(out, file)?;

    let output = run_pipeline(&pairs_path, linkage, cut, dims)?;
    write_artifact(
        &dir,
        "partition.csv",
        &cluster::partition_csv(&output.cloud, &output.partition),
    )?;
    write_artifact(
        &dir,
        "dendrogram.dot",
        &output
            .dendrogram
            .to_dot(output.cloud.labels())
            .map_err(data)?,
    )?;
    write_artifact(&dir, "embedding.json", &output.embedding.to_json())?;
    write_artifact(&dir, "merges.json", &output.dendrogram.merges_json())?;
    write_meta(
        &dir,
        &json!({
            "command": "cluster",
            "linkage": linkage.to_string(),
            "cut": cut_str.as_deref().unwrap_or("largest-gap"),
            "dims": dims_str.as_deref().unwrap_or("all"),
            "rows": output.crosstab.n_rows(),
            "cols": output.crosstab.n_cols(),
            "communities": output.partition.n_communities(),
        }),
    )?;
    eprintln!(
        "clustered {} rows x {} cols into {} communities",
        output.crosstab.n_rows(),
        output.crosstab.n_cols(),
        output.partition.n_communities()
    );
    Ok(())
}

fn cmd_modularity(
    file: &FileConfig,
    pairs: Option<PathBuf>,
    measure: Option<String>,
    weakest_pair: bool,
    out: Option<PathBuf>,
) -> Result<()> {
    let pairs_path = require_path(pairs, file.pairs.clone(), "pairs")?;
    let measure_str = measure.or_else(|| file.measure.clone());
    let measure = parse_measure(measure_str.as_deref().unwrap_or("qb"))?;
    let dir = out_dir(out, file)?;

    let pairs = load_pairs(&pairs_path)?;
    let graph = BipartiteGraph::from_pairs(&pairs)
        .map_err(|e| CliError::Data(anyhow::Error::new(e).context("building bipartite graph")))?;
    let structure = modularity::greedy_optimize(&graph, measure);

    let mut doc = json!({
        "measure": measure.to_string(),
        "score": structure.score,
        "nodes_u": graph.n_u(),
        "nodes_v": graph.n_v(),
        "links": graph.m(),
        "communities": structure.joint.n_communities(),
    });
    if weakest_pair {
        let ratios = modularity::co_reference_ratios(&graph);
        let result = modularity::weakest_pair(&ratios).map_err(data)?;
        doc["weakest_pair"] = json!({
            "ibrp_trace": result.ibrp_trace,
            "fragments": result.partition.n_communities(),
            "assignment": result.partition.assignment(),
        });
    }
    write_artifact(
        &dir,
        "communities.csv",
        &modularity::community_csv(&graph, &structure),
    )?;
    write_artifact(
        &dir,
        "modularity.json",
        &serde_json::to_string_pretty(&doc).expect("report serializes"),
    )?;
    write_meta(
        &dir,
        &json!({
            "command": "modularity",
            "measure": measure.to_string(),
            "weakest_pair": weakest_pair,
            "nodes": graph.n_nodes(),
            "communities": structure.joint.n_communities(),
        }),
    )?;
    eprintln!(
        "{} over {} nodes: score {:.6}, {} communities",
        measure,
        graph.n_nodes(),
        structure.score,
        structure.joint.n_communities()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    file: &FileConfig,
    records: Option<PathBuf>,
    gazetteer: Option<PathBuf>,
    ruleset: Option<PathBuf>,
    synthetic: Option<usize>,
    seed: Option<u64>,
    step: Option<usize>,
    methods: Option<String>,
    out: Option<PathBuf>,
) -> Result<()> {
    let step = step.or(file.step).unwrap_or(100);
    if step == 0 {
        return Err(CliError::Usage("step must be at least 1".into()));
    }
    let methods_str = methods.or_else(|| file.methods.clone());
    let methods = match methods_str.as_deref() {
        Some(s) => parse_methods(s)?,
        None => Method::ALL.to_vec(),
    };
    let dir = out_dir(out, file)?;

    let synthetic = synthetic.or(file.synthetic);
    let seed = seed.or(file.seed);
    let (purchases, mode): (Vec<PurchaseRecord>, &str) = match synthetic {
        Some(n) => {
            if n == 0 {
                return Err(CliError::Usage(
                    "synthetic record count must be at least 1".into(),
                ));
            }
            let cfg = SyntheticConfig {
                n_records: n,
                seed: seed.unwrap_or(SyntheticConfig::default().seed),
                ..SyntheticConfig::default()
            };
            (eval::synthetic_records(&cfg), "synthetic")
        }
        None => {
            let records_path = require_path(records, file.records.clone(), "records")?;
            let gazetteer_path = require_path(gazetteer, file.gazetteer.clone(), "gazetteer")?;
            let ruleset_path = match ruleset.or_else(|| file.ruleset.clone()) {
                Some(p) => Some(require_path(Some(p), None, "ruleset")?),
                None => None,
            };
            let raw = ingest::read_records(&records_path)
                .map_err(|e| CliError::Data(anyhow::Error::new(e).context("reading records")))?;
            let gz = load_gazetteer(&gazetteer_path)?;
            let rules = load_ruleset(ruleset_path.as_deref())?;
            let output = ingest::to_pairs(&raw, &gz, &rules).map_err(data)?;
            (output.purchases, "ingest")
        }
    };

    let report = eval::node_sweep(&purchases, step, &methods).map_err(data)?;
    write_artifact(&dir, "report.json", &report.to_json())?;
    write_artifact(&dir, "report.csv", &report.to_csv())?;
    write_meta(
        &dir,
        &json!({
            "command": "evaluate",
            "mode": mode,
            "records": purchases.len(),
            "step": step,
            "methods": methods.iter().map(Method::to_string).collect::<Vec<_>>(),
        }),
    )?;
    match (report.t_statistic, report.p_value) {
        (Some(t), Some(p)) => eprintln!(
            "swept {} records in steps of {step}: t = {t:.4}, p = {p:.4e}",
            purchases.len()
        ),
        _ => eprintln!(
            "swept {} records in steps of {step}: too few points for a t-test",
            purchases.len()
        ),
    }
    Ok(())
}

/// Reads a `label,part_tag,community` partition CSV and keeps the
/// column-side (city) rows for mapping.
fn read_city_communities(path: &Path) -> Result<Vec<(String, usize)>> {
    let content = fs::read_to_string(path)
        .with_context(|| format!("reading partition {}", path.display()))?;
    let bad = |row: usize, why: String| {
        CliError::Data(anyhow::anyhow!("partition row {row}: {why}"))
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(content.as_bytes());
    let mut cities = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(data)?;
        if idx == 0 && record.iter().eq(["label", "part_tag", "community"]) {
            continue;
        }
        if record.len() != 3 {
            return Err(bad(idx + 1, format!("expected 3 fields, found {}", record.len())));
        }
        let tag: PartTag = record[1].parse().map_err(|e: String| bad(idx + 1, e))?;
        let community: usize = record[2]
            .parse()
            .map_err(|_| bad(idx + 1, format!("community id is not a number: {:?}", &record[2])))?;
        if tag == PartTag::Col {
            cities.push((record[0].to_owned(), community));
        }
    }
    if cities.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!(
            "partition {} holds no column-side rows to map",
            path.display()
        )));
    }
    Ok(cities)
}

fn cmd_export_geojson(
    file: &FileConfig,
    partition: Option<PathBuf>,
    gazetteer: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let partition_path = require_path(partition, file.partition.clone(), "partition")?;
    let gazetteer_path = require_path(gazetteer, file.gazetteer.clone(), "gazetteer")?;
    let dir = out_dir(out, file)?;

    let cities = read_city_communities(&partition_path)?;
    let gz = load_gazetteer(&gazetteer_path)?;
    let collection = geojson::feature_collection(&cities, &gz).map_err(|missing| {
        CliError::Data(anyhow::anyhow!(
            "cities missing from the gazetteer: {}",
            missing.join(", ")
        ))
    })?;
    write_artifact(
        &dir,
        "map.geojson",
        &serde_json::to_string_pretty(&collection).expect("GeoJSON serializes"),
    )?;
    write_meta(
        &dir,
        &json!({
            "command": "export-geojson",
            "features": collection.features.len(),
        }),
    )?;
    eprintln!("exported {} features", collection.features.len());
    Ok(())
}

fn cmd_export_dot(
    file: &FileConfig,
    pairs: Option<PathBuf>,
    linkage: Option<String>,
    dims: Option<String>,
    out: Option<PathBuf>,
) -> Result<()> {
    let pairs_path = require_path(pairs, file.pairs.clone(), "pairs")?;
    let linkage_str = linkage.or_else(|| file.linkage.clone());
    let dims_str = dims.or_else(|| file.dims.clone());
    let linkage = parse_linkage(linkage_str.as_deref().unwrap_or("ward"))?;
    let dims = parse_dims(dims_str.as_deref().unwrap_or("all"))?;
    let dir = out_dir(out, file)?;

    let output = run_pipeline(&pairs_path, linkage, CutCriterion::LargestGap, dims)?;
    write_artifact(
        &dir,
        "dendrogram.dot",
        &output
            .dendrogram
            .to_dot(output.cloud.labels())
            .map_err(data)?,
    )?;
    write_meta(
        &dir,
        &json!({
            "command": "export-dot",
            "linkage": linkage.to_string(),
            "dims": dims_str.as_deref().unwrap_or("all"),
            "leaves": output.dendrogram.n_leaves(),
        }),
    )?;
    eprintln!("exported dendrogram with {} leaves", output.dendrogram.n_leaves());
    Ok(())
}
