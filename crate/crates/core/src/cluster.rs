//! Hierarchical agglomerative clustering of the joint row/column score
//! cloud: Euclidean distances over component scores, the four classical
//! linkage rules via the Lance-Williams recurrence, dendrogram cutting, and
//! the composed end-to-end pipeline.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::correspondence::{ca_embed, CaEmbedding, CaError, Dims};
use crate::crosstab::{CrossTab, CrosstabError};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("cloud has {points} points but {labels} labels and {tags} part tags")]
    MetadataMismatch {
        points: usize,
        labels: usize,
        tags: usize,
    },
    #[error("points have inconsistent dimension: point {index} has {got}, expected {expected}")]
    RaggedPoints {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("distance matrix entry ({i}, {j}) is invalid: {reason}")]
    InvalidDistance {
        i: usize,
        j: usize,
        reason: &'static str,
    },
    #[error("distance matrix is not square: row {row} has {got} entries, expected {expected}")]
    NotSquare {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("cannot cut into {k} clusters; dendrogram has {leaves} leaves")]
    BadK { k: usize, leaves: usize },
    #[error("unknown linkage {name:?}; expected one of nearest, furthest, group-average, ward")]
    UnknownLinkage { name: String },
    #[error("dendrogram has {leaves} leaves but {labels} labels were supplied")]
    LabelCount { leaves: usize, labels: usize },
}

/// Which side of the bipartite dataset a point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PartTag {
    Row,
    Col,
}

impl fmt::Display for PartTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartTag::Row => "ROW",
            PartTag::Col => "COL",
        })
    }
}

impl FromStr for PartTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ROW" => Ok(PartTag::Row),
            "COL" => Ok(PartTag::Col),
            other => Err(format!("unknown part tag {other:?}; expected ROW or COL")),
        }
    }
}

/// The joint cloud of row and column category scores, carrying per-point
/// origin tags and labels.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    part_tags: Vec<PartTag>,
    labels: Vec<String>,
}

impl PointCloud {
    pub fn new(
        points: Vec<Vec<f64>>,
        part_tags: Vec<PartTag>,
        labels: Vec<String>,
    ) -> Result<Self, ClusterError> {
        if points.is_empty() {
            return Err(ClusterError::EmptyCloud);
        }
        if points.len() != labels.len() || points.len() != part_tags.len() {
            return Err(ClusterError::MetadataMismatch {
                points: points.len(),
                labels: labels.len(),
                tags: part_tags.len(),
            });
        }
        let dim = points[0].len();
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(ClusterError::RaggedPoints {
                    index,
                    got: p.len(),
                    expected: dim,
                });
            }
        }
        Ok(PointCloud {
            points,
            part_tags,
            labels,
        })
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn tag(&self, i: usize) -> PartTag {
        self.part_tags[i]
    }
}

/// Stacks row scores then column scores into one cloud, preserving labels.
pub fn joint_cloud(emb: &CaEmbedding) -> PointCloud {
    let mut points = emb.row_scores.clone();
    points.extend(emb.col_scores.iter().cloned());
    let mut part_tags = vec![PartTag::Row; emb.row_scores.len()];
    part_tags.extend(std::iter::repeat_n(PartTag::Col, emb.col_scores.len()));
    let mut labels = emb.row_labels.clone();
    labels.extend(emb.col_labels.iter().cloned());
    PointCloud {
        points,
        part_tags,
        labels,
    }
}

/// Symmetric pairwise distances with zero diagonal, stored condensed
/// (upper triangle, row-major).
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl DistanceMatrix {
    /// Validates and stores a full square matrix: symmetric within 1e-12,
    /// zero diagonal, all entries finite and non-negative.
    pub fn from_full(rows: &[Vec<f64>]) -> Result<Self, ClusterError> {
        let n = rows.len();
        if n == 0 {
            return Err(ClusterError::EmptyCloud);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(ClusterError::NotSquare {
                    row,
                    got: r.len(),
                    expected: n,
                });
            }
        }
        let mut data = vec![0.0; n * (n - 1) / 2];
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(ClusterError::InvalidDistance {
                    i,
                    j: i,
                    reason: "diagonal must be zero",
                });
            }
            for j in (i + 1)..n {
                let d = rows[i][j];
                if !d.is_finite() || d < 0.0 {
                    return Err(ClusterError::InvalidDistance {
                        i,
                        j,
                        reason: "must be finite and non-negative",
                    });
                }
                if (d - rows[j][i]).abs() > 1e-12 {
                    return Err(ClusterError::InvalidDistance {
                        i,
                        j,
                        reason: "matrix is not symmetric",
                    });
                }
                data[condensed_index(n, i, j)] = d;
            }
        }
        Ok(DistanceMatrix { n, data })
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.data[condensed_index(self.n, i, j)],
            std::cmp::Ordering::Greater => self.data[condensed_index(self.n, j, i)],
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Sequential pairwise Euclidean distances; always available, used as the
/// comparison arm in benchmarks.
pub fn pairwise_distances_serial(cloud: &PointCloud) -> DistanceMatrix {
    let n = cloud.n_points();
    let mut data = vec![0.0; n * (n - 1) / 2];
    let mut idx = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            data[idx] = euclidean(cloud.point(i), cloud.point(j));
            idx += 1;
        }
    }
    DistanceMatrix { n, data }
}

/// Pairwise Euclidean distances over the cloud. With the `parallel` feature
/// the condensed rows are filled on the rayon pool; output is identical to
/// the sequential form either way.
#[cfg(feature = "parallel")]
pub fn pairwise_distances(cloud: &PointCloud) -> DistanceMatrix {
    let n = cloud.n_points();
    let mut data = vec![0.0; n * (n - 1) / 2];
    // Carve the condensed buffer into one slice per row i, covering the
    // entries (i, i+1..n); rows are independent, so they fill in parallel.
    let mut rows: Vec<(usize, &mut [f64])> = Vec::with_capacity(n.saturating_sub(1));
    let mut rest = data.as_mut_slice();
    for i in 0..n.saturating_sub(1) {
        let (head, tail) = rest.split_at_mut(n - i - 1);
        rows.push((i, head));
        rest = tail;
    }
    rows.into_par_iter().for_each(|(i, row)| {
        for (off, slot) in row.iter_mut().enumerate() {
            let j = i + 1 + off;
            *slot = euclidean(cloud.point(i), cloud.point(j));
        }
    });
    DistanceMatrix { n, data }
}

/// Pairwise Euclidean distances over the cloud (sequential build).
#[cfg(not(feature = "parallel"))]
pub fn pairwise_distances(cloud: &PointCloud) -> DistanceMatrix {
    pairwise_distances_serial(cloud)
}

/// The four agglomeration rules: which inter-cluster distance is minimized
/// at every merge step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Linkage {
    /// Minimum pairwise distance between members (single linkage).
    Nearest,
    /// Maximum pairwise distance between members (complete linkage).
    Furthest,
    /// Unweighted mean of pairwise member distances.
    GroupAverage,
    /// Increase in within-cluster sum of squared deviations caused by the
    /// merge; guarantees monotone dendrogram heights.
    Ward,
}

impl Linkage {
    pub const ALL: [Linkage; 4] = [
        Linkage::Nearest,
        Linkage::Furthest,
        Linkage::GroupAverage,
        Linkage::Ward,
    ];
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Nearest => "nearest",
            Linkage::Furthest => "furthest",
            Linkage::GroupAverage => "group-average",
            Linkage::Ward => "ward",
        })
    }
}

impl FromStr for Linkage {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "nearest" => Ok(Linkage::Nearest),
            "furthest" => Ok(Linkage::Furthest),
            "group-average" => Ok(Linkage::GroupAverage),
            "ward" => Ok(Linkage::Ward),
            _ => Err(ClusterError::UnknownLinkage { name: s.to_owned() }),
        }
    }
}

/// One agglomeration step. Cluster ids follow the usual convention: leaves
/// are `0..n`, and the merge recorded at step `t` creates cluster `n + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Inter-cluster distance at merge time; for Ward, the increase in
    /// within-cluster sum of squared deviations.
    pub height: f64,
    /// Number of leaves under the new cluster.
    pub size: usize,
}

/// Full merge history of an agglomerative run over `n_leaves` points.
#[derive(Debug, Clone, Serialize)]
pub struct Dendrogram {
    n_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Serializes the merge list as JSON.
    pub fn merges_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dendrogram serialization cannot fail")
    }

    /// Renders the merge tree as an undirected Graphviz graph. Leaves carry
    /// the supplied labels; internal nodes carry their merge height.
    pub fn to_dot(&self, labels: &[String]) -> Result<String, ClusterError> {
        if labels.len() != self.n_leaves {
            return Err(ClusterError::LabelCount {
                leaves: self.n_leaves,
                labels: labels.len(),
            });
        }
        let mut out = String::from("graph dendrogram {\n  node [shape=box];\n");
        for (i, label) in labels.iter().enumerate() {
            out.push_str(&format!("  n{} [label=\"{}\"];\n", i, dot_escape(label)));
        }
        for (t, m) in self.merges.iter().enumerate() {
            let id = self.n_leaves + t;
            out.push_str(&format!(
                "  n{} [label=\"h={:.6}\" shape=ellipse];\n",
                id, m.height
            ));
            out.push_str(&format!("  n{} -- n{};\n", id, m.left));
            out.push_str(&format!("  n{} -- n{};\n", id, m.right));
        }
        out.push_str("}\n");
        Ok(out)
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Agglomerative clustering via the Lance-Williams recurrence.
///
/// At every step the active pair at minimal inter-cluster distance merges;
/// ties break toward the smallest, then second-smallest, cluster id. Ward
/// distances are seeded with half the squared Euclidean distance, under
/// which the recurrence propagates exact variance increases, so reported
/// Ward heights are directly the merge cost.
pub fn linkage(dist: &DistanceMatrix, method: Linkage) -> Result<Dendrogram, ClusterError> {
    let n = dist.n_points();
    if n == 0 {
        return Err(ClusterError::EmptyCloud);
    }
    if n == 1 {
        return Ok(Dendrogram {
            n_leaves: 1,
            merges: Vec::new(),
        });
    }
    // Working distances over all 2n-1 cluster slots: leaves 0..n, merge t
    // creates slot n+t. Unused future entries hold infinity.
    let slots = 2 * n - 1;
    let mut work = vec![f64::INFINITY; slots * (slots - 1) / 2];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist.get(i, j);
            work[condensed_index(slots, i, j)] = match method {
                Linkage::Ward => d * d / 2.0,
                _ => d,
            };
        }
    }
    let mut active = vec![false; slots];
    let mut size = vec![0usize; slots];
    for i in 0..n {
        active[i] = true;
        size[i] = 1;
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..(n - 1) {
        // Scan ascending (i, j); strict improvement keeps the first minimum,
        // which is exactly the lowest-id tie-break.
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..slots {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..slots {
                if !active[j] {
                    continue;
                }
                let d = work[condensed_index(slots, i, j)];
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            }
        }
        let (a, b, height) = best.expect("at least two active clusters remain");
        let new = n + step;
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for k in 0..new {
            if !active[k] || k == a || k == b {
                continue;
            }
            let dka = work[condensed_index(slots, k.min(a), k.max(a))];
            let dkb = work[condensed_index(slots, k.min(b), k.max(b))];
            let nk = size[k] as f64;
            let updated = match method {
                Linkage::Nearest => dka.min(dkb),
                Linkage::Furthest => dka.max(dkb),
                Linkage::GroupAverage => (na * dka + nb * dkb) / (na + nb),
                Linkage::Ward => {
                    ((na + nk) * dka + (nb + nk) * dkb - nk * height) / (na + nb + nk)
                }
            };
            work[condensed_index(slots, k, new)] = updated;
        }
        active[a] = false;
        active[b] = false;
        active[new] = true;
        size[new] = size[a] + size[b];
        merges.push(Merge {
            left: a,
            right: b,
            height,
            size: size[new],
        });
    }
    Ok(Dendrogram {
        n_leaves: n,
        merges,
    })
}

/// Where to stop unwinding a dendrogram into a flat partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CutCriterion {
    /// Exactly `k` communities (undo the last `k - 1` merges).
    KClusters(usize),
    /// Keep every merge whose height is at most `h`.
    Height(f64),
    /// Cut at the largest jump between consecutive merge heights. With a
    /// single merge (or none) all merges are kept.
    LargestGap,
}

/// A flat community assignment over the cloud's points: ids are dense
/// `0..c`, numbered by first appearance in point order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    assignment: Vec<usize>,
    n_communities: usize,
}

impl Partition {
    /// Normalizes arbitrary community labels into dense first-appearance ids.
    pub fn from_labels(labels: &[usize]) -> Partition {
        let mut remap: Vec<(usize, usize)> = Vec::new();
        let mut assignment = Vec::with_capacity(labels.len());
        for &raw in labels {
            let id = match remap.iter().find(|(from, _)| *from == raw) {
                Some(&(_, to)) => to,
                None => {
                    let to = remap.len();
                    remap.push((raw, to));
                    to
                }
            };
            assignment.push(id);
        }
        Partition {
            assignment,
            n_communities: remap.len(),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn community_of(&self, point: usize) -> usize {
        self.assignment[point]
    }

    pub fn n_communities(&self) -> usize {
        self.n_communities
    }

    pub fn n_points(&self) -> usize {
        self.assignment.len()
    }

    /// Members of each community, in point order.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_communities];
        for (point, &c) in self.assignment.iter().enumerate() {
            out[c].push(point);
        }
        out
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[rb] = ra;
        }
    }
}

/// Flattens a dendrogram into a partition per the chosen criterion.
pub fn cut(dendro: &Dendrogram, criterion: CutCriterion) -> Result<Partition, ClusterError> {
    let n = dendro.n_leaves();
    let merges = dendro.merges();
    let keep: Vec<bool> = match criterion {
        CutCriterion::KClusters(k) => {
            if k == 0 || k > n {
                return Err(ClusterError::BadK { k, leaves: n });
            }
            (0..merges.len()).map(|t| t < n - k).collect()
        }
        CutCriterion::Height(h) => merges.iter().map(|m| m.height <= h).collect(),
        CutCriterion::LargestGap => {
            if merges.len() <= 1 {
                vec![true; merges.len()]
            } else {
                let mut gap_at = 0;
                let mut gap = f64::NEG_INFINITY;
                for i in 0..(merges.len() - 1) {
                    let g = merges[i + 1].height - merges[i].height;
                    if g > gap {
                        gap = g;
                        gap_at = i;
                    }
                }
                (0..merges.len()).map(|t| t <= gap_at).collect()
            }
        }
    };

    // Union leaves through the kept merges. Every cluster slot is tracked by
    // a representative leaf so skipped merges still leave later slots
    // addressable.
    let mut uf = UnionFind::new(n);
    let mut rep_leaf: Vec<usize> = (0..n).collect();
    rep_leaf.resize(n + merges.len(), 0);
    for (t, m) in merges.iter().enumerate() {
        rep_leaf[n + t] = rep_leaf[m.left];
        if keep[t] {
            uf.union(rep_leaf[m.left], rep_leaf[m.right]);
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
    Ok(Partition::from_labels(&roots))
}

/// Rows of the partition CSV export: label, originating side, community id.
pub fn partition_csv(cloud: &PointCloud, partition: &Partition) -> String {
    let mut out = String::from("label,part_tag,community\n");
    for i in 0..cloud.n_points() {
        out.push_str(&format!(
            "{},{},{}\n",
            csv_escape(cloud.label(i)),
            cloud.tag(i),
            partition.community_of(i)
        ));
    }
    out
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

/// Configuration of the composed pipeline.
#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    pub dims: Dims,
    pub linkage: Linkage,
    pub cut: CutCriterion,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dims: Dims::All,
            linkage: Linkage::Ward,
            cut: CutCriterion::LargestGap,
        }
    }
}

/// Everything the pipeline produces, kept for inspection and export.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub crosstab: CrossTab,
    pub embedding: CaEmbedding,
    pub cloud: PointCloud,
    pub dendrogram: Dendrogram,
    pub partition: Partition,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Crosstab(#[from] CrosstabError),
    #[error(transparent)]
    Embedding(#[from] CaError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// The full method: contingency table → component scores → joint cloud →
/// pairwise distances → linkage → cut.
pub fn responsiveness_pair_cluster<S: AsRef<str>>(
    pairs: &[(S, S)],
    config: &PipelineConfig,
) -> Result<PipelineOutput, PipelineError> {
    let crosstab = CrossTab::from_pairs(pairs)?;
    let embedding = ca_embed(&crosstab, config.dims)?;
    let cloud = joint_cloud(&embedding);
    let distances = pairwise_distances(&cloud);
    let dendrogram = linkage(&distances, config.linkage)?;
    let partition = cut(&dendrogram, config.cut)?;
    Ok(PipelineOutput {
        crosstab,
        embedding,
        cloud,
        dendrogram,
        partition,
    })
}
