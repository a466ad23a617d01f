//! Tweet-like record ingestion: line parsing, pattern-based place and item
//! extraction with a review queue for misses, gazetteer reverse geocoding,
//! and assembly of (category, city) pairs for the contingency table.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Mean Earth radius in kilometers; pinned so distances are bit-stable.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Header used by record CSV files (optional on input, written on output).
pub const RECORD_CSV_HEADER: [&str; 5] = ["timestamp", "user_id", "text", "latitude", "longitude"];

/// Header used by gazetteer CSV files (optional on input).
pub const GAZETTEER_CSV_HEADER: [&str; 3] = ["city", "latitude", "longitude"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("record {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("gazetteer has no entries")]
    EmptyGazetteer,
    #[error("gazetteer row {row}: {reason}")]
    BadGazetteerRow { row: usize, reason: String },
    #[error("gazetteer lists {name:?} more than once")]
    DuplicateCity { name: String },
    #[error("ruleset has no rules")]
    EmptyRuleset,
    #[error("ruleset line {line}: {reason}")]
    BadRule { line: usize, reason: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// One raw observation: the four ingested fields (timestamp, user,
/// comment text, position).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub timestamp: String,
    pub user_id: String,
    pub text: String,
    pub latitude: f64,
    pub longitude: f64,
}

/// One fully-extracted observation: what was bought, where, and in which
/// city. The category key joins item and place in the fixed
/// `"item _ place"` format.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurchaseRecord {
    pub item: String,
    pub place: String,
    pub city: String,
    pub source: RawRecord,
}

impl PurchaseRecord {
    /// The crosstab row key: `"item _ place"`.
    pub fn category(&self) -> String {
        format!("{} _ {}", self.item, self.place)
    }
}

fn validate_position(lat: f64, lon: f64, line: usize) -> Result<(), IngestError> {
    if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
        return Err(IngestError::MalformedRecord {
            line,
            reason: format!("latitude {lat} outside [-90, 90]"),
        });
    }
    if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
        return Err(IngestError::MalformedRecord {
            line,
            reason: format!("longitude {lon} outside [-180, 180]"),
        });
    }
    Ok(())
}

/// Parses one record line, accepting either a JSON object or a CSV row
/// with the fields timestamp, user_id, text, latitude, longitude.
/// `line_no` is used only for diagnostics.
pub fn parse_record(line: &str, line_no: usize) -> Result<RawRecord, IngestError> {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return Err(IngestError::MalformedRecord {
            line: line_no,
            reason: "empty line".to_owned(),
        });
    }
    let record = if trimmed.starts_with('{') {
        serde_json::from_str::<RawRecord>(trimmed).map_err(|e| IngestError::MalformedRecord {
            line: line_no,
            reason: format!("invalid JSON record: {e}"),
        })?
    } else {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(trimmed.as_bytes());
        let row = reader
            .records()
            .next()
            .ok_or_else(|| IngestError::MalformedRecord {
                line: line_no,
                reason: "empty CSV row".to_owned(),
            })?
            .map_err(|e| IngestError::MalformedRecord {
                line: line_no,
                reason: format!("invalid CSV row: {e}"),
            })?;
        if row.len() != 5 {
            return Err(IngestError::MalformedRecord {
                line: line_no,
                reason: format!("expected 5 fields, found {}", row.len()),
            });
        }
        let parse_coord = |field: &str, name: &str| -> Result<f64, IngestError> {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| IngestError::MalformedRecord {
                    line: line_no,
                    reason: format!("{name} is not a number: {field:?}"),
                })
        };
        RawRecord {
            timestamp: row[0].to_owned(),
            user_id: row[1].to_owned(),
            text: row[2].to_owned(),
            latitude: parse_coord(&row[3], "latitude")?,
            longitude: parse_coord(&row[4], "longitude")?,
        }
    };
    validate_position(record.latitude, record.longitude, line_no)?;
    Ok(record)
}

/// Reads a whole record file (CSV or JSON lines). A leading CSV header row
/// and blank lines are skipped; every other line must parse.
pub fn read_records(path: &Path) -> Result<Vec<RawRecord>, IngestError> {
    parse_records(&fs::read_to_string(path)?)
}

/// See [`read_records`]; operates on in-memory text.
pub fn parse_records(content: &str) -> Result<Vec<RawRecord>, IngestError> {
    let header = RECORD_CSV_HEADER.join(",");
    let mut records = Vec::new();
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
        records.push(parse_record(line, idx + 1)?);
    }
    Ok(records)
}

/// Serializes records to CSV with the standard header.
pub fn write_records_csv(records: &[RawRecord]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(RECORD_CSV_HEADER)
        .expect("in-memory write");
    for r in records {
        writer
            .write_record([
                r.timestamp.as_str(),
                r.user_id.as_str(),
                r.text.as_str(),
                &r.latitude.to_string(),
                &r.longitude.to_string(),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

/// Extracts the venue token following an `"@"` marker: text up to the
/// closing parenthesis, with trailing `"w/…"` companion qualifiers and
/// leading `*` decoration stripped. Absence of the marker is a value, not
/// an error.
pub fn extract_place(text: &str) -> Option<String> {
    let at = text.find('@')?;
    let mut rest = &text[at + 1..];
    if let Some(close) = rest.find(')') {
        rest = &rest[..close];
    }
    if let Some(with) = rest.find(" w/") {
        rest = &rest[..with];
    }
    let cleaned = rest.trim().trim_start_matches('*').trim();
    if cleaned.is_empty() {
        None
    } else {
        Some(cleaned.to_owned())
    }
}

/// How a matched rule captures its phrase. Currently the object phrase
/// following the trigger is the only capture form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Capture {
    Object,
}

/// One extraction rule: a trigger token sequence and a capture form.
#[derive(Debug, Clone)]
pub struct Rule {
    trigger: Vec<String>,
    capture: Capture,
}

/// An ordered list of extraction rules; the first rule that fires wins.
#[derive(Debug, Clone)]
pub struct Ruleset {
    rules: Vec<Rule>,
}

/// Articles and determiners skipped at the start of a captured phrase.
const SKIP_WORDS: [&str; 10] = [
    "a", "an", "the", "some", "my", "our", "his", "her", "their", "this",
];

/// Tokens that terminate a captured phrase.
const STOP_WORDS: [&str; 12] = [
    "at", "by", "in", "on", "to", "from", "with", "for", "near", "into", "and", "w/",
];

/// Strips decoration and punctuation from a token; returns the cleaned
/// token and whether the raw token ended with phrase-final punctuation.
fn clean_token(raw: &str) -> (&str, bool) {
    let cleaned = raw
        .trim_start_matches(['*', '(', '"', '\''])
        .trim_end_matches(['.', ',', '!', '?', ';', ':', ')', '"', '\'']);
    let ends_phrase = raw.ends_with(['.', ',', '!', '?', ';', ':', ')']);
    (cleaned, ends_phrase)
}

impl Ruleset {
    /// The built-in verb→object rules for common purchase phrasings.
    pub fn default_rules() -> Ruleset {
        Ruleset::parse("bought -> object\npurchased -> object\ngot -> object\n")
            .expect("built-in rules parse")
    }

    /// Parses a ruleset file: one `trigger -> object` rule per line; blank
    /// lines and `#` comments are ignored.
    pub fn parse(content: &str) -> Result<Ruleset, IngestError> {
        let mut rules = Vec::new();
        for (idx, line) in content.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (lhs, rhs) = trimmed
                .split_once("->")
                .or_else(|| trimmed.split_once('→'))
                .ok_or_else(|| IngestError::BadRule {
                    line: line_no,
                    reason: "expected `trigger -> object`".to_owned(),
                })?;
            let trigger: Vec<String> = lhs
                .split_whitespace()
                .map(|t| t.to_ascii_lowercase())
                .collect();
            if trigger.is_empty() {
                return Err(IngestError::BadRule {
                    line: line_no,
                    reason: "trigger is empty".to_owned(),
                });
            }
            let capture = match rhs.trim() {
                "object" => Capture::Object,
                other => {
                    return Err(IngestError::BadRule {
                        line: line_no,
                        reason: format!("unknown capture {other:?}; expected `object`"),
                    })
                }
            };
            rules.push(Rule { trigger, capture });
        }
        if rules.is_empty() {
            return Err(IngestError::EmptyRuleset);
        }
        Ok(Ruleset { rules })
    }

    pub fn from_file(path: &Path) -> Result<Ruleset, IngestError> {
        Ruleset::parse(&fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Extracts the purchased-item phrase: the object of the first rule whose
/// trigger matches, read left to right until a stop word, venue marker, or
/// phrase-final punctuation. Leading determiners are skipped. `None` when
/// no rule fires — callers surface that through the review queue.
pub fn extract_item(text: &str, rules: &Ruleset) -> Option<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let normalized: Vec<String> = tokens
        .iter()
        .map(|t| clean_token(t).0.to_ascii_lowercase())
        .collect();
    for rule in &rules.rules {
        let width = rule.trigger.len();
        if width > tokens.len() {
            continue;
        }
        let hit = (0..=tokens.len() - width)
            .find(|&start| normalized[start..start + width] == rule.trigger[..]);
        let Some(start) = hit else { continue };
        match rule.capture {
            Capture::Object => {
                let mut phrase: Vec<&str> = Vec::new();
                for (raw, norm) in tokens[start + width..]
                    .iter()
                    .zip(&normalized[start + width..])
                {
                    if norm.is_empty()
                        || raw.starts_with('@')
                        || raw.starts_with("(@")
                        || STOP_WORDS.contains(&norm.as_str())
                    {
                        break;
                    }
                    if phrase.is_empty() && SKIP_WORDS.contains(&norm.as_str()) {
                        continue;
                    }
                    let (cleaned, ends_phrase) = clean_token(raw);
                    phrase.push(cleaned);
                    if ends_phrase {
                        break;
                    }
                }
                if !phrase.is_empty() {
                    return Some(phrase.join(" "));
                }
            }
        }
    }
    None
}

/// One gazetteer row: a city name and its representative centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub city: String,
    pub latitude: f64,
    pub longitude: f64,
}

/// City-to-centroid lookup used for reverse geocoding. Names are unique;
/// lookup results do not depend on entry order.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
}

impl Gazetteer {
    pub fn new(entries: Vec<GazetteerEntry>) -> Result<Gazetteer, IngestError> {
        let mut seen = std::collections::BTreeSet::new();
        for (idx, e) in entries.iter().enumerate() {
            if e.city.trim().is_empty() {
                return Err(IngestError::BadGazetteerRow {
                    row: idx + 1,
                    reason: "empty city name".to_owned(),
                });
            }
            if !e.latitude.is_finite() || !(-90.0..=90.0).contains(&e.latitude) {
                return Err(IngestError::BadGazetteerRow {
                    row: idx + 1,
                    reason: format!("latitude {} outside [-90, 90]", e.latitude),
                });
            }
            if !e.longitude.is_finite() || !(-180.0..=180.0).contains(&e.longitude) {
                return Err(IngestError::BadGazetteerRow {
                    row: idx + 1,
                    reason: format!("longitude {} outside [-180, 180]", e.longitude),
                });
            }
            if !seen.insert(e.city.clone()) {
                return Err(IngestError::DuplicateCity {
                    name: e.city.clone(),
                });
            }
        }
        Ok(Gazetteer { entries })
    }

    /// Parses gazetteer CSV (city, latitude, longitude); an exact header
    /// row is skipped.
    pub fn parse_csv(content: &str) -> Result<Gazetteer, IngestError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(content.as_bytes());
        let mut entries = Vec::new();
        for (idx, row) in reader.records().enumerate() {
            let row = row.map_err(|e| IngestError::BadGazetteerRow {
                row: idx + 1,
                reason: format!("invalid CSV row: {e}"),
            })?;
            if idx == 0 && row.iter().eq(GAZETTEER_CSV_HEADER) {
                continue;
            }
            if row.len() != 3 {
                return Err(IngestError::BadGazetteerRow {
                    row: idx + 1,
                    reason: format!("expected 3 fields, found {}", row.len()),
                });
            }
            let coord = |field: &str, name: &str| -> Result<f64, IngestError> {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| IngestError::BadGazetteerRow {
                        row: idx + 1,
                        reason: format!("{name} is not a number: {field:?}"),
                    })
            };
            entries.push(GazetteerEntry {
                city: row[0].to_owned(),
                latitude: coord(&row[1], "latitude")?,
                longitude: coord(&row[2], "longitude")?,
            });
        }
        Gazetteer::new(entries)
    }

    pub fn from_file(path: &Path) -> Result<Gazetteer, IngestError> {
        Gazetteer::parse_csv(&fs::read_to_string(path)?)
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Centroid of a city by exact name, if present.
    pub fn find(&self, city: &str) -> Option<&GazetteerEntry> {
        self.entries.iter().find(|e| e.city == city)
    }

    /// Nearest entry to the query point by great-circle distance, with the
    /// distance in kilometers. Exact distance ties go to the
    /// lexicographically smaller city name, making the result independent
    /// of entry order.
    pub fn nearest(&self, lat: f64, lon: f64) -> Result<(&GazetteerEntry, f64), IngestError> {
        let mut best: Option<(&GazetteerEntry, f64)> = None;
        for e in &self.entries {
            let d = haversine_km(lat, lon, e.latitude, e.longitude);
            let better = match best {
                None => true,
                Some((b, bd)) => d < bd || (d == bd && e.city < b.city),
            };
            if better {
                best = Some((e, d));
            }
        }
        best.ok_or(IngestError::EmptyGazetteer)
    }
}

/// Great-circle distance between two points in kilometers (haversine form,
/// mean Earth radius [`EARTH_RADIUS_KM`]).
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let phi1 = lat1.to_radians();
    let phi2 = lat2.to_radians();
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().asin()
}

/// Resolves coordinates to the nearest gazetteer city; returns the city
/// name and the distance to its centroid for audit.
pub fn reverse_geocode(
    lat: f64,
    lon: f64,
    gz: &Gazetteer,
) -> Result<(String, f64), IngestError> {
    let (entry, dist) = gz.nearest(lat, lon)?;
    Ok((entry.city.clone(), dist))
}

/// Why a record landed in the review queue instead of the pair list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReviewReason {
    NoPlace,
    NoItem,
}

impl fmt::Display for ReviewReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReviewReason::NoPlace => "NO_PLACE",
            ReviewReason::NoItem => "NO_ITEM",
        })
    }
}

/// A record needing manual attention, with its input position and the
/// reasons extraction failed.
#[derive(Debug, Clone)]
pub struct ReviewEntry {
    /// Zero-based index into the input record list.
    pub index: usize,
    pub record: RawRecord,
    pub reasons: Vec<ReviewReason>,
}

/// Result of batch extraction: fully-resolved purchases plus the review
/// queue. Every input record lands in exactly one of the two.
#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub purchases: Vec<PurchaseRecord>,
    pub review: Vec<ReviewEntry>,
}

impl IngestOutput {
    /// (category, city) pairs ready for the contingency table.
    pub fn pairs(&self) -> Vec<(String, String)> {
        self.purchases
            .iter()
            .map(|p| (p.category(), p.city.clone()))
            .collect()
    }
}

enum Extracted {
    Purchase(PurchaseRecord),
    Review(Vec<ReviewReason>),
}

fn extract_one(record: &RawRecord, gz: &Gazetteer, rules: &Ruleset) -> Extracted {
    let place = extract_place(&record.text);
    let item = extract_item(&record.text, rules);
    match (item, place) {
        (Some(item), Some(place)) => {
            let (city, _dist) = gz
                .nearest(record.latitude, record.longitude)
                .map(|(e, d)| (e.city.clone(), d))
                .expect("gazetteer checked non-empty before batch start");
            Extracted::Purchase(PurchaseRecord {
                item,
                place,
                city,
                source: record.clone(),
            })
        }
        (item, place) => {
            let mut reasons = Vec::new();
            if place.is_none() {
                reasons.push(ReviewReason::NoPlace);
            }
            if item.is_none() {
                reasons.push(ReviewReason::NoItem);
            }
            Extracted::Review(reasons)
        }
    }
}

fn assemble(records: &[RawRecord], outcomes: Vec<Extracted>) -> IngestOutput {
    let mut purchases = Vec::new();
    let mut review = Vec::new();
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Extracted::Purchase(p) => purchases.push(p),
            Extracted::Review(reasons) => review.push(ReviewEntry {
                index,
                record: records[index].clone(),
                reasons,
            }),
        }
    }
    IngestOutput { purchases, review }
}

/// Runs extraction and geocoding over a record batch. Fully-extracted
/// records become purchases; the rest queue for review in input order.
/// `|purchases| + |review| = |records|` always holds.
///
/// Records are independent, so the batch is processed in parallel when the
/// `parallel` feature is enabled; outputs are identical either way.
#[cfg(feature = "parallel")]
pub fn to_pairs(
    records: &[RawRecord],
    gz: &Gazetteer,
    rules: &Ruleset,
) -> Result<IngestOutput, IngestError> {
    if gz.is_empty() {
        return Err(IngestError::EmptyGazetteer);
    }
    let outcomes: Vec<Extracted> = records
        .par_iter()
        .map(|r| extract_one(r, gz, rules))
        .collect();
    Ok(assemble(records, outcomes))
}

#[cfg(not(feature = "parallel"))]
pub fn to_pairs(
    records: &[RawRecord],
    gz: &Gazetteer,
    rules: &Ruleset,
) -> Result<IngestOutput, IngestError> {
    to_pairs_serial(records, gz, rules)
}

/// Sequential [`to_pairs`], always available for comparison runs.
pub fn to_pairs_serial(
    records: &[RawRecord],
    gz: &Gazetteer,
    rules: &Ruleset,
) -> Result<IngestOutput, IngestError> {
    if gz.is_empty() {
        return Err(IngestError::EmptyGazetteer);
    }
    let outcomes: Vec<Extracted> = records
        .iter()
        .map(|r| extract_one(r, gz, rules))
        .collect();
    Ok(assemble(records, outcomes))
}

/// Serializes the review queue as CSV: input position, reasons
/// (semicolon-joined), and the original fields.
pub fn review_csv(review: &[ReviewEntry]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["index", "reasons", "timestamp", "user_id", "text"])
        .expect("in-memory write");
    for entry in review {
        let reasons = entry
            .reasons
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(";");
        writer
            .write_record([
                entry.index.to_string().as_str(),
                &reasons,
                &entry.record.timestamp,
                &entry.record.user_id,
                &entry.record.text,
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}
