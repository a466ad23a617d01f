//! The evaluation experiment: rule-based reference partitions, node-count
//! sweeps comparing community counts across methods, and the
//! mean-difference significance test.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::cluster::{
    responsiveness_pair_cluster, CutCriterion, Linkage, Partition, PipelineConfig, PipelineError,
};
use crate::correspondence::Dims;
use crate::ingest::{PurchaseRecord, RawRecord};
use crate::modularity::{greedy_optimize, BipartiteGraph, Measure, ModularityError};

/// Cut height used when the clustering pipeline runs inside the sweep:
/// only coincident embedded points (identical response profiles) are
/// grouped, mirroring how the reference rules group exact duplicates.
pub const EVAL_CUT_HEIGHT: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("record list is empty")]
    EmptyInput,
    #[error("need at least {step} records for one sweep step, have {records}")]
    TooFewRecords { records: usize, step: usize },
    #[error("sweep step must be positive")]
    BadStep,
    #[error("a series needs at least 2 observations, found {len}")]
    SeriesTooShort { len: usize },
    #[error("both series are constant and equal; the statistic is undefined")]
    DegenerateVariance,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Modularity(#[from] ModularityError),
}

/// A community-counting method compared in the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    /// The rule-based reference partition.
    Rn,
    /// The full correspondence + clustering pipeline, cut at
    /// [`EVAL_CUT_HEIGHT`].
    Responsiveness,
    /// Greedy optimization of the correspondence-weighted modularity.
    GreedyQh,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Rn, Method::Responsiveness, Method::GreedyQh];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rn => "rn",
            Method::Responsiveness => "responsiveness",
            Method::GreedyQh => "greedy-qh",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rn" => Ok(Method::Rn),
            "responsiveness" => Ok(Method::Responsiveness),
            "greedy-qh" | "qh" => Ok(Method::GreedyQh),
            other => Err(format!(
                "unknown method {other:?}; expected rn, responsiveness, or greedy-qh"
            )),
        }
    }
}

/// The reference ("correct") partition over purchase records, built by four
/// rules applied strictly in order; each record joins a community through
/// the first rule that captures it:
///
/// 1. records sharing their full `"item _ place"` category;
/// 2. among the rest, records sharing an item;
/// 3. among the rest, records sharing a place;
/// 4. whatever remains is a singleton.
pub fn rn_partition(records: &[PurchaseRecord]) -> Result<Partition, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = records.len();
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut next_id = 0usize;

    let mut capture = |keys: Vec<Option<String>>, assigned: &mut Vec<Option<usize>>| {
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, key) in keys.into_iter().enumerate() {
            if let Some(key) = key {
                groups.entry(key).or_default().push(i);
            }
        }
        for members in groups.values() {
            if members.len() >= 2 {
                for &i in members {
                    assigned[i] = Some(next_id);
                }
                next_id += 1;
            }
        }
    };

    let unassigned_key = |assigned: &[Option<usize>], f: &dyn Fn(&PurchaseRecord) -> String| {
        records
            .iter()
            .enumerate()
            .map(|(i, r)| assigned[i].is_none().then(|| f(r)))
            .collect::<Vec<_>>()
    };

    capture(
        records.iter().map(|r| Some(r.category())).collect(),
        &mut assigned,
    );
    capture(unassigned_key(&assigned, &|r| r.item.clone()), &mut assigned);
    capture(unassigned_key(&assigned, &|r| r.place.clone()), &mut assigned);
    for slot in assigned.iter_mut() {
        if slot.is_none() {
            *slot = Some(next_id);
            next_id += 1;
        }
    }

    let labels: Vec<usize> = assigned
        .into_iter()
        .map(|s| s.expect("every record assigned by rule 4"))
        .collect();
    Ok(Partition::from_labels(&labels))
}

fn record_pairs(records: &[PurchaseRecord]) -> Vec<(String, String)> {
    records
        .iter()
        .map(|r| (r.category(), r.city.clone()))
        .collect()
}

/// Distinct communities among the records themselves: each record maps to
/// the community of its category node, and records over the same category
/// share one. This keeps counts comparable with the record-level reference
/// partition.
fn induced_count<'a>(
    records: &[PurchaseRecord],
    labels: impl Iterator<Item = &'a String>,
    community_of: impl Fn(usize) -> usize,
) -> usize {
    let index: BTreeMap<&str, usize> = labels
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut seen = BTreeSet::new();
    for r in records {
        seen.insert(community_of(index[r.category().as_str()]));
    }
    seen.len()
}

fn community_count(records: &[PurchaseRecord], method: Method) -> Result<usize, EvalError> {
    match method {
        Method::Rn => Ok(rn_partition(records)?.n_communities()),
        Method::Responsiveness => {
            let config = PipelineConfig {
                dims: Dims::All,
                linkage: Linkage::Ward,
                cut: CutCriterion::Height(EVAL_CUT_HEIGHT),
            };
            let out = responsiveness_pair_cluster(&record_pairs(records), &config)?;
            Ok(induced_count(records, out.crosstab.row_labels().iter(), |i| {
                out.partition.community_of(i)
            }))
        }
        Method::GreedyQh => {
            let g = BipartiteGraph::from_pairs(&record_pairs(records))?;
            let cs = greedy_optimize(&g, Measure::Qh);
            Ok(induced_count(records, g.u_labels().iter(), |i| {
                cs.row.community_of(i)
            }))
        }
    }
}

/// One method's community counts along the sweep, aligned to
/// [`EvalReport::node_counts`].
#[derive(Debug, Clone, Serialize)]
pub struct MethodSeries {
    pub method: String,
    pub counts: Vec<usize>,
}

/// Settings baked into a report so a reader can tell how it was produced.
#[derive(Debug, Clone, Serialize)]
pub struct EvalMetadata {
    pub step: usize,
    pub linkage: String,
    pub cut: String,
    pub optimizer: String,
    pub baseline_measure: String,
    pub t_variant: String,
    /// The two series the t statistic compares, when one was computed.
    pub compared: Option<[String; 2]>,
}

/// Sweep results: community counts per method at each node count, plus the
/// significance test between the first two requested methods.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub node_counts: Vec<usize>,
    pub series: Vec<MethodSeries>,
    pub t_statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub metadata: EvalMetadata,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Long-form CSV (node_count, method, community_count) for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node_count,method,community_count\n");
        for (pi, &n) in self.node_counts.iter().enumerate() {
            for s in &self.series {
                out.push_str(&format!("{n},{},{}\n", s.method, s.counts[pi]));
            }
        }
        out
    }
}

/// Evaluates community counts for every requested method over growing
/// record prefixes (`step`, `2*step`, …, in input order). When at least two
/// methods and two sweep points exist, the report carries a Welch test
/// between the first two series; identical constant series report
/// `t = 0, p = 1`.
pub fn node_sweep(
    records: &[PurchaseRecord],
    step: usize,
    methods: &[Method],
) -> Result<EvalReport, EvalError> {
    if step == 0 {
        return Err(EvalError::BadStep);
    }
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if records.len() < step {
        return Err(EvalError::TooFewRecords {
            records: records.len(),
            step,
        });
    }
    let node_counts: Vec<usize> = (1..=records.len() / step).map(|k| k * step).collect();
    let point = |&n: &usize| -> Result<Vec<usize>, EvalError> {
        methods
            .iter()
            .map(|&m| community_count(&records[..n], m))
            .collect()
    };
    #[cfg(feature = "parallel")]
    let grid: Vec<Vec<usize>> = node_counts.par_iter().map(point).collect::<Result<_, _>>()?;
    #[cfg(not(feature = "parallel"))]
    let grid: Vec<Vec<usize>> = node_counts.iter().map(point).collect::<Result<_, _>>()?;

    let series: Vec<MethodSeries> = methods
        .iter()
        .enumerate()
        .map(|(mi, m)| MethodSeries {
            method: m.to_string(),
            counts: grid.iter().map(|row| row[mi]).collect(),
        })
        .collect();

    let mut t_statistic = None;
    let mut p_value = None;
    let mut compared = None;
    if series.len() >= 2 && node_counts.len() >= 2 {
        let as_f64 = |s: &MethodSeries| s.counts.iter().map(|&c| c as f64).collect::<Vec<_>>();
        match mean_difference_test(&as_f64(&series[0]), &as_f64(&series[1])) {
            Ok(result) => {
                t_statistic = Some(result.t);
                p_value = Some(result.p);
            }
            // Constant equal series differ nowhere: report the null result.
            Err(EvalError::DegenerateVariance) => {
                t_statistic = Some(0.0);
                p_value = Some(1.0);
            }
            Err(other) => return Err(other),
        }
        compared = Some([series[0].method.clone(), series[1].method.clone()]);
    }

    Ok(EvalReport {
        node_counts,
        series,
        t_statistic,
        p_value,
        metadata: EvalMetadata {
            step,
            linkage: Linkage::Ward.to_string(),
            cut: format!("height({EVAL_CUT_HEIGHT:e})"),
            optimizer: "greedy".to_owned(),
            baseline_measure: Measure::Qh.to_string(),
            t_variant: "welch".to_owned(),
            compared,
        },
    })
}

/// Welch's two-sample t-test result.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

/// Two-sided Welch (unequal-variance) t-test on the difference of means.
///
/// Constant series with different means yield an infinite statistic and
/// `p = 0`; constant series with equal means are a
/// [`EvalError::DegenerateVariance`] error.
pub fn mean_difference_test(a: &[f64], b: &[f64]) -> Result<TTestResult, EvalError> {
    for series in [a, b] {
        if series.len() < 2 {
            return Err(EvalError::SeriesTooShort { len: series.len() });
        }
    }
    let moments = |s: &[f64]| -> (f64, f64, f64) {
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let var = s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (n, mean, var)
    };
    let (na, ma, va) = moments(a);
    let (nb, mb, vb) = moments(b);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        if ma == mb {
            return Err(EvalError::DegenerateVariance);
        }
        return Ok(TTestResult {
            t: if ma > mb {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            },
            p: 0.0,
            df: f64::INFINITY,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive and finite");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTestResult { t, p, df })
}

/// Configuration for the synthetic purchase-record generator used by the
/// sweep experiments: records fall into planted blocks tying items, places,
/// and cities together, with a noise fraction crossing blocks at random.
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_records: usize,
    pub blocks: usize,
    pub items_per_block: usize,
    pub places_per_block: usize,
    pub cities_per_block: usize,
    /// Probability that a record's place (and, independently, city) is
    /// drawn from a random block instead of its own.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_records: 700,
            blocks: 3,
            items_per_block: 10,
            places_per_block: 3,
            cities_per_block: 4,
            noise: 0.2,
            seed: 7,
        }
    }
}

/// Generates a deterministic synthetic record set for a given seed.
pub fn synthetic_records(cfg: &SyntheticConfig) -> Vec<PurchaseRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.n_records)
        .map(|idx| {
            let block = rng.random_range(0..cfg.blocks);
            let item = format!("Item{block}_{}", rng.random_range(0..cfg.items_per_block));
            let place_block = if rng.random::<f64>() < cfg.noise {
                rng.random_range(0..cfg.blocks)
            } else {
                block
            };
            let place = format!(
                "Place{place_block}_{}",
                rng.random_range(0..cfg.places_per_block)
            );
            let city_block = if rng.random::<f64>() < cfg.noise {
                rng.random_range(0..cfg.blocks)
            } else {
                block
            };
            let city_slot = rng.random_range(0..cfg.cities_per_block);
            let city = format!("City{city_block}_{city_slot}");
            let city_id = (city_block * cfg.cities_per_block + city_slot) as f64;
            let source = RawRecord {
                timestamp: format!("t{idx}"),
                user_id: format!("u{idx}"),
                text: format!("bought the {item} (@ {place})"),
                latitude: 30.0 + 0.1 * city_id,
                longitude: 130.0 + 0.1 * city_id,
            };
            PurchaseRecord {
                item,
                place,
                city,
                source,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testdata::purchase_city_rows;

    fn make_purchases<S: AsRef<str>>(rows: &[(S, S)]) -> Vec<PurchaseRecord> {
        rows.iter()
            .enumerate()
            .map(|(i, (category, city))| {
                let (item, place) = category
                    .as_ref()
                    .split_once(" _ ")
                    .expect("category format");
                PurchaseRecord {
                    item: item.to_owned(),
                    place: place.to_owned(),
                    city: city.as_ref().to_owned(),
                    source: RawRecord {
                        timestamp: format!("t{i}"),
                        user_id: format!("u{i}"),
                        text: String::new(),
                        latitude: 0.0,
                        longitude: 0.0,
                    },
                }
            })
            .collect()
    }

    #[test]
    fn reference_partition_on_the_purchase_table() {
        let records = make_purchases(&purchase_city_rows());
        let p = rn_partition(&records).unwrap();
        // Rule 1 groups the repeated category; rule 3 groups leftover
        // records by shared place; one record stays single.
        assert_eq!(p.n_communities(), 4);
        assert_eq!(p.community_of(3), p.community_of(5)); // same category
        assert_eq!(p.community_of(0), p.community_of(1)); // same place
        assert_eq!(p.community_of(4), p.community_of(6)); // same place
        let clothing = p.community_of(2);
        for i in [0, 1, 3, 4, 5, 6] {
            assert_ne!(p.community_of(i), clothing);
        }
    }

    #[test]
    fn rule_two_groups_shared_items() {
        let records = make_purchases(&[
            ("Cake _ Department store", "A"),
            ("Cake _ Supermarket", "B"),
        ]);
        let p = rn_partition(&records).unwrap();
        assert_eq!(p.n_communities(), 1);
    }

    #[test]
    fn rule_one_capture_excludes_later_rules() {
        // The two identical categories form a rule-1 community; the third
        // record shares their item but was not captured by rule 1, and no
        // rule-2 partner remains, so it stays single.
        let records = make_purchases(&[
            ("Cake _ Department store", "A"),
            ("Cake _ Department store", "B"),
            ("Cake _ Supermarket", "C"),
        ]);
        let p = rn_partition(&records).unwrap();
        assert_eq!(p.n_communities(), 2);
        assert_eq!(p.community_of(0), p.community_of(1));
        assert_ne!(p.community_of(2), p.community_of(0));
    }

    #[test]
    fn all_distinct_records_stay_single() {
        let records = make_purchases(&[
            ("A _ P", "X"),
            ("B _ Q", "Y"),
            ("C _ R", "Z"),
        ]);
        let p = rn_partition(&records).unwrap();
        assert_eq!(p.n_communities(), 3);
    }

    #[test]
    fn reference_partition_ignores_record_order() {
        let rows = purchase_city_rows();
        let records = make_purchases(&rows);
        let perm = [6, 2, 4, 0, 5, 1, 3];
        let shuffled: Vec<PurchaseRecord> = perm.iter().map(|&i| records[i].clone()).collect();
        let p1 = rn_partition(&records).unwrap();
        let p2 = rn_partition(&shuffled).unwrap();
        // Compare as sets of record-identifier groups.
        let groups = |p: &Partition, recs: &[PurchaseRecord]| -> BTreeSet<BTreeSet<String>> {
            let mut by_comm: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
            for (i, r) in recs.iter().enumerate() {
                by_comm
                    .entry(p.community_of(i))
                    .or_default()
                    .insert(r.source.user_id.clone());
            }
            by_comm.into_values().collect()
        };
        assert_eq!(groups(&p1, &records), groups(&p2, &shuffled));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(rn_partition(&[]), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn induced_pipeline_count_on_the_purchase_table() {
        let records = make_purchases(&purchase_city_rows());
        // All six categories have distinct city profiles, so the
        // coincidence-height cut separates them; the seven records induce
        // one community per distinct category.
        let count = community_count(&records, Method::Responsiveness).unwrap();
        assert_eq!(count, 6);
        let rn = community_count(&records, Method::Rn).unwrap();
        assert_eq!(rn, 4);
        let qh = community_count(&records, Method::GreedyQh).unwrap();
        assert!(qh >= 1 && qh <= records.len());
    }

    #[test]
    fn welch_matches_frozen_oracle_values() {
        // Cross-checked against two independent implementations.
        let r = mean_difference_test(
            &[1.0, 2.0, 3.0, 4.0, 5.0],
            &[2.0, 3.0, 4.0, 5.0, 6.0],
        )
        .unwrap();
        assert!((r.t - -1.0).abs() < 1e-10);
        assert!((r.df - 8.0).abs() < 1e-10);
        assert!((r.p - 0.3465935071).abs() < 1e-9);

        let a2 = [12.1, 14.3, 13.5, 11.9, 12.8, 13.1, 14.0, 12.5, 13.3, 12.7];
        let b2 = [
            14.2, 15.1, 13.9, 14.8, 15.3, 14.4, 13.8, 15.0, 14.6, 14.1, 15.2, 14.9, 13.7, 14.5,
            15.4, 14.0, 14.7, 15.5, 13.6, 14.3,
        ];
        let r2 = mean_difference_test(&a2, &b2).unwrap();
        assert!((r2.t - -5.4817938838).abs() < 1e-9);
        assert!((r2.df - 14.3982175149).abs() < 1e-9);
        assert!((r2.p - 7.3113228815e-5).abs() < 1e-12);

        let a3 = [
            68.0, 71.5, 69.2, 70.8, 72.1, 67.9, 70.2, 69.8, 71.0, 68.5, 70.5, 69.0, 71.8, 68.2,
            70.0,
        ];
        let b3 = [
            72.5, 74.1, 73.0, 75.2, 72.8, 74.6, 73.5, 75.0, 72.2, 74.8, 73.8, 75.5, 72.0, 74.3,
            73.2, 75.8, 72.6, 74.0, 73.6, 75.3, 72.4, 74.5, 73.1, 75.6, 72.9, 74.2, 73.4, 75.1,
            72.7, 74.7, 73.3, 75.4,
        ];
        let r3 = mean_difference_test(&a3, &b3).unwrap();
        assert!((r3.t - -9.7473612543).abs() < 1e-9);
        assert!((r3.df - 22.8342081179).abs() < 1e-9);
        assert!((r3.p - 1.3282509624e-9).abs() < 1e-15);
    }

    #[test]
    fn welch_identical_series_give_null_result() {
        let r = mean_difference_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn welch_detects_separated_series() {
        let a: Vec<f64> = (10..17).map(f64::from).collect();
        let b: Vec<f64> = (20..27).map(f64::from).collect();
        let r = mean_difference_test(&a, &b).unwrap();
        assert!((r.t - -8.6602540378).abs() < 1e-9);
        assert!(r.p < 0.05);
        assert!((r.p - 1.6544943521e-6).abs() < 1e-12);
    }

    #[test]
    fn welch_is_antisymmetric() {
        let a = [3.0, 5.0, 4.0, 6.0];
        let b = [7.0, 9.0, 8.0, 10.0];
        let fwd = mean_difference_test(&a, &b).unwrap();
        let rev = mean_difference_test(&b, &a).unwrap();
        assert!((fwd.t + rev.t).abs() < 1e-12);
        assert!((fwd.p - rev.p).abs() < 1e-12);
    }

    #[test]
    fn welch_edge_cases() {
        assert!(matches!(
            mean_difference_test(&[1.0], &[1.0, 2.0]),
            Err(EvalError::SeriesTooShort { len: 1 })
        ));
        assert!(matches!(
            mean_difference_test(&[2.0, 2.0], &[2.0, 2.0]),
            Err(EvalError::DegenerateVariance)
        ));
        let r = mean_difference_test(&[2.0, 2.0], &[5.0, 5.0]).unwrap();
        assert_eq!(r.t, f64::NEG_INFINITY);
        assert_eq!(r.p, 0.0);
        let r = mean_difference_test(&[5.0, 5.0], &[2.0, 2.0]).unwrap();
        assert_eq!(r.t, f64::INFINITY);
    }

    #[test]
    fn sweep_on_synthetic_records() {
        let records = synthetic_records(&SyntheticConfig::default());
        assert_eq!(records.len(), 700);
        let report = node_sweep(&records, 100, &Method::ALL).unwrap();
        assert_eq!(report.node_counts, vec![100, 200, 300, 400, 500, 600, 700]);
        assert_eq!(report.series.len(), 3);
        for s in &report.series {
            assert_eq!(s.counts.len(), 7);
            for (&count, &n) in s.counts.iter().zip(&report.node_counts) {
                assert!(count >= 1 && count <= n, "{}: {count} at {n}", s.method);
            }
        }
        assert!(report.t_statistic.is_some());
        assert!(report.p_value.is_some());
        assert_eq!(
            report.metadata.compared,
            Some(["rn".to_owned(), "responsiveness".to_owned()])
        );
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + 7 * 3);
        assert!(csv.starts_with("node_count,method,community_count\n100,rn,"));
        let parsed: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(parsed["node_counts"].as_array().unwrap().len(), 7);
        assert_eq!(parsed["metadata"]["t_variant"], "welch");
    }

    #[test]
    fn reference_counts_grow_with_the_prefix() {
        let records = synthetic_records(&SyntheticConfig {
            n_records: 300,
            ..SyntheticConfig::default()
        });
        let report = node_sweep(&records, 100, &[Method::Rn]).unwrap();
        let counts = &report.series[0].counts;
        for window in counts.windows(2) {
            assert!(window[1] >= window[0], "{counts:?} decreased");
        }
    }

    #[test]
    fn sweep_boundaries() {
        let records = synthetic_records(&SyntheticConfig {
            n_records: 100,
            ..SyntheticConfig::default()
        });
        let report = node_sweep(&records, 100, &Method::ALL).unwrap();
        assert_eq!(report.node_counts, vec![100]);
        assert!(report.t_statistic.is_none());
        assert!(report.metadata.compared.is_none());

        let few = &records[..99];
        assert!(matches!(
            node_sweep(few, 100, &Method::ALL),
            Err(EvalError::TooFewRecords {
                records: 99,
                step: 100
            })
        ));
        assert!(matches!(
            node_sweep(&records, 0, &Method::ALL),
            Err(EvalError::BadStep)
        ));
        assert!(matches!(
            node_sweep(&[], 100, &Method::ALL),
            Err(EvalError::EmptyInput)
        ));
    }

    #[test]
    fn synthetic_generation_is_seeded() {
        let cfg = SyntheticConfig::default();
        let a = synthetic_records(&cfg);
        let b = synthetic_records(&cfg);
        assert_eq!(a, b);
        let c = synthetic_records(&SyntheticConfig {
            seed: 8,
            ..SyntheticConfig::default()
        });
        assert_ne!(a, c);
        for r in a.iter().take(20) {
            assert!(!r.item.is_empty() && !r.place.is_empty() && !r.city.is_empty());
            assert!((-90.0..=90.0).contains(&r.source.latitude));
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert_eq!("qh".parse::<Method>().unwrap(), Method::GreedyQh);
        assert!("median".parse::<Method>().is_err());
    }
}
