//! Argument and configuration plumbing: clap definitions, the optional
//! TOML config file, and parsers for the enum-valued settings. Explicit
//! flags always override config-file values.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;

use respair_core::cluster::CutCriterion;
use respair_core::correspondence::Dims;
use respair_core::eval::Method;

/// Errors split by exit code: usage problems (bad flags, bad config
/// values, missing paths) exit 1, data problems (unreadable or invalid
/// content) exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            // `:#` flattens the anyhow context chain into one line.
            CliError::Data(err) => write!(f, "{err:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Data(err)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "respair",
    version,
    about = "Responsiveness pair clustering of two-mode category data"
)]
pub struct Cli {
    /// TOML config file supplying default values; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract (category, city) pairs and a review queue from raw records
    Ingest {
        /// Raw record file: CSV or JSON lines with timestamp, user_id,
        /// text, latitude, longitude
        #[arg(long)]
        records: Option<PathBuf>,
        /// Gazetteer CSV: city, latitude, longitude
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        /// Extraction ruleset file; defaults to the built-in rules
        #[arg(long)]
        ruleset: Option<PathBuf>,
        /// Directory for output artifacts
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// How many malformed records to tolerate before failing
        #[arg(long)]
        tolerance: Option<usize>,
    },
    /// Cluster both sides of a pairs file and emit partition artifacts
    Cluster {
        /// Pairs CSV (category, city)
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Linkage: nearest, furthest, group-average, or ward
        #[arg(long)]
        linkage: Option<String>,
        /// Cut criterion: largest-gap, k:<count>, or height:<h>
        #[arg(long)]
        cut: Option<String>,
        /// Embedding dimensions: all or a positive integer
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Detect communities with a bipartite modularity baseline
    Modularity {
        /// Pairs CSV (category, city)
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Measure to optimize: qb, qm, or qh
        #[arg(long)]
        measure: Option<String>,
        /// Also run the weakest-pair divisive procedure
        #[arg(long)]
        weakest_pair: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Sweep node counts and compare community-count series across methods
    Evaluate {
        /// Raw record file to ingest (alternative to --synthetic)
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[arg(long)]
        ruleset: Option<PathBuf>,
        /// Generate this many synthetic records instead of reading a file
        #[arg(long, value_name = "COUNT")]
        synthetic: Option<usize>,
        /// Seed for the synthetic generator
        #[arg(long)]
        seed: Option<u64>,
        /// Sweep step (records added per point)
        #[arg(long)]
        step: Option<usize>,
        /// Comma-separated methods: rn, responsiveness, greedy-qh
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Join a partition CSV with a gazetteer into a GeoJSON overlay
    ExportGeojson {
        /// Partition CSV (label, part_tag, community)
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Emit the dendrogram of a pairs file as DOT
    ExportDot {
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        linkage: Option<String>,
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Values a TOML config file may supply. Unknown keys are rejected so
/// typos surface as usage errors instead of being ignored.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub records: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub ruleset: Option<PathBuf>,
    pub partition: Option<PathBuf>,
    pub linkage: Option<String>,
    pub cut: Option<String>,
    pub dims: Option<String>,
    pub measure: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub step: Option<usize>,
    pub methods: Option<String>,
    pub tolerance: Option<usize>,
    pub synthetic: Option<usize>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let content = fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        })?;
        toml::from_str(&content)
            .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
    }
}

/// Picks the flag value over the config-file value; missing values are a
/// usage error naming the setting.
pub fn require<T>(flag: Option<T>, file: Option<T>, what: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Usage(format!("missing required setting `{what}`")))
}

/// Like [`require`], and additionally checks the path exists.
pub fn require_path(
    flag: Option<PathBuf>,
    file: Option<PathBuf>,
    what: &str,
) -> Result<PathBuf, CliError> {
    let path = require(flag, file, what)?;
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "{what} path {} does not exist",
            path.display()
        )));
    }
    Ok(path)
}

pub fn parse_linkage(s: &str) -> Result<respair_core::cluster::Linkage, CliError> {
    s.parse().map_err(|e| CliError::Usage(format!("{e}")))
}

pub fn parse_measure(s: &str) -> Result<respair_core::modularity::Measure, CliError> {
    s.parse().map_err(CliError::Usage)
}

/// Cut criterion syntax: `largest-gap`, `k:<count>`, or `height:<h>`.
pub fn parse_cut(s: &str) -> Result<CutCriterion, CliError> {
    let usage = |msg: String| CliError::Usage(msg);
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "largest-gap" => Ok(CutCriterion::LargestGap),
        other => {
            if let Some(k) = other.strip_prefix("k:") {
                let k: usize = k.parse().map_err(|_| {
                    usage(format!("invalid community count in cut {s:?}"))
                })?;
                if k == 0 {
                    return Err(usage("cut k:0 is empty; need at least 1 community".into()));
                }
                Ok(CutCriterion::KClusters(k))
            } else if let Some(h) = other.strip_prefix("height:") {
                let h: f64 = h
                    .parse()
                    .map_err(|_| usage(format!("invalid height in cut {s:?}")))?;
                if !h.is_finite() || h < 0.0 {
                    return Err(usage(format!("cut height must be finite and >= 0, got {h}")));
                }
                Ok(CutCriterion::Height(h))
            } else {
                Err(usage(format!(
                    "unknown cut {s:?}; expected largest-gap, k:<count>, or height:<h>"
                )))
            }
        }
    }
}

/// Dimension syntax: `all` or a positive integer.
pub fn parse_dims(s: &str) -> Result<Dims, CliError> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Dims::All);
    }
    let k: usize = s.parse().map_err(|_| {
        CliError::Usage(format!("invalid dims {s:?}; expected `all` or a positive integer"))
    })?;
    if k == 0 {
        return Err(CliError::Usage("dims must be at least 1".into()));
    }
    Ok(Dims::K(k))
}

/// Comma-separated method list, e.g. `rn,responsiveness,greedy-qh`.
pub fn parse_methods(s: &str) -> Result<Vec<Method>, CliError> {
    let methods: Result<Vec<Method>, String> =
        s.split(',').map(|m| m.trim().parse::<Method>()).collect();
    let methods = methods.map_err(CliError::Usage)?;
    if methods.is_empty() {
        return Err(CliError::Usage("method list is empty".into()));
    }
    Ok(methods)
}
