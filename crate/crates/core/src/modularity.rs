//! Bipartite modularity baselines: Barber's null-model form, the
//! argmax-correspondence form, the correspondence-weighted form, the
//! weakest-pair divisive procedure, and a deterministic greedy agglomerative
//! optimizer over any of the three measures.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::cluster::{PartTag, Partition};
use crate::crosstab::check_link_restriction;

/// Merges must improve the measure by more than this to count as strict
/// improvements; guards against accumulation noise flipping a true zero.
const IMPROVEMENT_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModularityError {
    #[error("pair list is empty")]
    EmptyInput,
    #[error("labels appear on both sides, so the data is not two-mode: {offenders:?}")]
    NotBipartite { offenders: Vec<String> },
    #[error("partition covers {got} nodes but the graph side has {expected}")]
    UncoveredNode { expected: usize, got: usize },
    #[error("ratio matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("ratio entry ({row}, {col}) = {value} is outside [0, 1]")]
    InvalidRatio { row: usize, col: usize, value: f64 },
}

/// A strict two-mode multigraph: nodes split into a u-part and a v-part,
/// every edge crosses parts, parallel edges kept as multiplicity.
///
/// Global node ids concatenate the parts: u-nodes are `0..n_u`, v-nodes are
/// `n_u..n_u + n_v`.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    u_labels: Vec<String>,
    v_labels: Vec<String>,
    /// v-multiplicity map per u-node.
    adj: Vec<BTreeMap<usize, u64>>,
    deg_u: Vec<u64>,
    deg_v: Vec<u64>,
    m: u64,
}

impl BipartiteGraph {
    /// Builds the graph from labeled pairs, deduplicating nodes per part in
    /// first-appearance order. Fails when a label appears on both sides.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Self, ModularityError> {
        if pairs.is_empty() {
            return Err(ModularityError::EmptyInput);
        }
        let report = check_link_restriction(pairs);
        if report.violation {
            return Err(ModularityError::NotBipartite {
                offenders: report.offenders,
            });
        }
        let mut u_index: BTreeMap<String, usize> = BTreeMap::new();
        let mut v_index: BTreeMap<String, usize> = BTreeMap::new();
        let mut u_labels = Vec::new();
        let mut v_labels = Vec::new();
        let mut adj: Vec<BTreeMap<usize, u64>> = Vec::new();
        let mut deg_u = Vec::new();
        let mut deg_v = Vec::new();
        for (u, v) in pairs {
            let ui = *u_index.entry(u.as_ref().to_owned()).or_insert_with(|| {
                u_labels.push(u.as_ref().to_owned());
                adj.push(BTreeMap::new());
                deg_u.push(0);
                u_labels.len() - 1
            });
            let vi = *v_index.entry(v.as_ref().to_owned()).or_insert_with(|| {
                v_labels.push(v.as_ref().to_owned());
                deg_v.push(0);
                v_labels.len() - 1
            });
            *adj[ui].entry(vi).or_insert(0) += 1;
            deg_u[ui] += 1;
            deg_v[vi] += 1;
        }
        let m = deg_u.iter().sum();
        Ok(BipartiteGraph {
            u_labels,
            v_labels,
            adj,
            deg_u,
            deg_v,
            m,
        })
    }

    pub fn n_u(&self) -> usize {
        self.u_labels.len()
    }

    pub fn n_v(&self) -> usize {
        self.v_labels.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_u() + self.n_v()
    }

    /// Total edge count, multiplicities included.
    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn u_labels(&self) -> &[String] {
        &self.u_labels
    }

    pub fn v_labels(&self) -> &[String] {
        &self.v_labels
    }

    pub fn degree_u(&self, i: usize) -> u64 {
        self.deg_u[i]
    }

    pub fn degree_v(&self, j: usize) -> u64 {
        self.deg_v[j]
    }

    /// Edge multiplicity between u-node `i` and v-node `j`.
    pub fn multiplicity(&self, i: usize, j: usize) -> u64 {
        self.adj[i].get(&j).copied().unwrap_or(0)
    }

    /// Neighbors of u-node `i` with multiplicities, ascending by v-index.
    pub fn neighbors_u(&self, i: usize) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.adj[i].iter().map(|(&v, &mult)| (v, mult))
    }

    /// Label of a global node id (u-part first, then v-part).
    pub fn global_label(&self, node: usize) -> &str {
        if node < self.n_u() {
            &self.u_labels[node]
        } else {
            &self.v_labels[node - self.n_u()]
        }
    }

    /// Which part a global node id belongs to.
    pub fn global_tag(&self, node: usize) -> PartTag {
        if node < self.n_u() {
            PartTag::Row
        } else {
            PartTag::Col
        }
    }

    /// Degree of a global node id.
    pub fn global_degree(&self, node: usize) -> u64 {
        if node < self.n_u() {
            self.deg_u[node]
        } else {
            self.deg_v[node - self.n_u()]
        }
    }
}

/// Which modularity measure to evaluate or optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Measure {
    Qb,
    Qm,
    Qh,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Qb => "qb",
            Measure::Qm => "qm",
            Measure::Qh => "qh",
        })
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qb" => Ok(Measure::Qb),
            "qm" => Ok(Measure::Qm),
            "qh" => Ok(Measure::Qh),
            other => Err(format!("unknown measure {other:?}; expected qb, qm, or qh")),
        }
    }
}

/// Barber's bipartite modularity over a joint partition of the full vertex
/// set: `(1/2m) * sum_ij (A_ij - P_ij) * delta(c_i, c_j)` with the null
/// model `P_ij = k_i k_j / m` across parts and 0 within a part.
///
/// Evaluated through the algebraically equal per-community aggregate form
/// `sum_C (E_C / m - K^u_C * K^v_C / m^2)`, where `E_C` counts edges inside
/// community `C` and `K^u_C`, `K^v_C` are its per-part degree sums.
pub fn modularity_qb(g: &BipartiteGraph, joint: &Partition) -> Result<f64, ModularityError> {
    if joint.n_points() != g.n_nodes() {
        return Err(ModularityError::UncoveredNode {
            expected: g.n_nodes(),
            got: joint.n_points(),
        });
    }
    let c = joint.n_communities();
    let mut internal = vec![0u64; c];
    let mut ku = vec![0u64; c];
    let mut kv = vec![0u64; c];
    for i in 0..g.n_u() {
        ku[joint.community_of(i)] += g.degree_u(i);
    }
    for j in 0..g.n_v() {
        kv[joint.community_of(g.n_u() + j)] += g.degree_v(j);
    }
    for i in 0..g.n_u() {
        let ci = joint.community_of(i);
        for (j, mult) in g.neighbors_u(i) {
            if joint.community_of(g.n_u() + j) == ci {
                internal[ci] += mult;
            }
        }
    }
    let m = g.m() as f64;
    Ok((0..c)
        .map(|k| internal[k] as f64 / m - (ku[k] as f64) * (kv[k] as f64) / (m * m))
        .sum())
}

/// The community-pair link fractions underlying the correspondence
/// measures: `e[i][j]` is the fraction of all edges joining row-community
/// `i` to column-community `j`; marginals are its row and column sums.
#[derive(Debug, Clone)]
pub struct CorrespondenceFractions {
    pub e: Vec<Vec<f64>>,
    pub row_marginals: Vec<f64>,
    pub col_marginals: Vec<f64>,
}

/// Computes the `e` fraction matrix for a per-part community pair.
pub fn correspondence_fractions(
    g: &BipartiteGraph,
    row: &Partition,
    col: &Partition,
) -> Result<CorrespondenceFractions, ModularityError> {
    if row.n_points() != g.n_u() {
        return Err(ModularityError::UncoveredNode {
            expected: g.n_u(),
            got: row.n_points(),
        });
    }
    if col.n_points() != g.n_v() {
        return Err(ModularityError::UncoveredNode {
            expected: g.n_v(),
            got: col.n_points(),
        });
    }
    let (ca, cb) = (row.n_communities(), col.n_communities());
    let mut e = vec![vec![0.0; cb]; ca];
    let m = g.m() as f64;
    for i in 0..g.n_u() {
        for (j, mult) in g.neighbors_u(i) {
            e[row.community_of(i)][col.community_of(j)] += mult as f64 / m;
        }
    }
    let row_marginals: Vec<f64> = e.iter().map(|r| r.iter().sum()).collect();
    let col_marginals: Vec<f64> = (0..cb).map(|j| e.iter().map(|r| r[j]).sum()).collect();
    Ok(CorrespondenceFractions {
        e,
        row_marginals,
        col_marginals,
    })
}

fn qm_value(f: &CorrespondenceFractions) -> f64 {
    let mut total = 0.0;
    for (i, row) in f.e.iter().enumerate() {
        let mut best = 0;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        total += row[best] - f.row_marginals[i] * f.col_marginals[best];
    }
    total
}

fn qh_value(f: &CorrespondenceFractions) -> f64 {
    let mut total = 0.0;
    for (i, row) in f.e.iter().enumerate() {
        let rowmax = row.iter().fold(0.0f64, |a, &b| a.max(b));
        if rowmax <= 0.0 {
            continue;
        }
        for (j, &eij) in row.iter().enumerate() {
            total += eij / rowmax * (eij - f.row_marginals[i] * f.col_marginals[j]);
        }
    }
    total
}

/// The argmax-correspondence modularity: each row community contributes
/// `e_ij* - a_i a_j*` for its best-linked column community `j*` (ties go to
/// the lowest column index).
pub fn modularity_qm(
    g: &BipartiteGraph,
    row: &Partition,
    col: &Partition,
) -> Result<f64, ModularityError> {
    Ok(qm_value(&correspondence_fractions(g, row, col)?))
}

/// The correspondence-weighted modularity
/// `sum_ij a_ij (e_ij - a_i a_j)`.
///
/// The weight `a_ij` is the link fraction normalized by its row maximum:
/// 1 for each row community's best-linked column community, proportional
/// below that. This convention is pinned by the regression tests and echoed
/// in exported metadata.
pub fn modularity_qh(
    g: &BipartiteGraph,
    row: &Partition,
    col: &Partition,
) -> Result<f64, ModularityError> {
    Ok(qh_value(&correspondence_fractions(g, row, col)?))
}

/// Co-reference ratio matrix over the u-part: entry `(i, j)` is the share
/// of `j`'s distinct neighbors that are also adjacent to `i`. Rows feed the
/// weakest-pair procedure.
pub fn co_reference_ratios(g: &BipartiteGraph) -> Vec<Vec<f64>> {
    let n = g.n_u();
    let neighbor_sets: Vec<Vec<usize>> = (0..n)
        .map(|i| g.neighbors_u(i).map(|(v, _)| v).collect())
        .collect();
    let mut r = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let shared = neighbor_sets[j]
                .iter()
                .filter(|v| neighbor_sets[i].binary_search(v).is_ok())
                .count();
            r[i][j] = shared as f64 / neighbor_sets[j].len() as f64;
        }
    }
    r
}

/// Output of [`weakest_pair`]: the L1 dissimilarity matrix, the trace of
/// the intra-fragment dissimilarity index after each accepted split, and
/// the final fragment partition.
#[derive(Debug, Clone)]
pub struct WeakestPairResult {
    pub dissimilarity: Vec<Vec<f64>>,
    pub ibrp_trace: Vec<f64>,
    pub partition: Partition,
}

/// The weakest-pair divisive procedure over co-reference ratio rows.
///
/// `D_ij` is the L1 distance between ratio rows. Starting from one fragment,
/// the procedure locates the maximally dissimilar pair inside any fragment
/// (ties to lowest indices), splits that fragment by assigning members to
/// the nearer of the two pair nodes (ties to the first), and repeats while
/// the total intra-fragment index
/// `IBRP = (1/n^2) * sum over fragments F of sum_{i,j in F} D_ij`
/// strictly improves — that is, until every fragment is internally
/// homogeneous (all intra-fragment distances zero).
pub fn weakest_pair(r: &[Vec<f64>]) -> Result<WeakestPairResult, ModularityError> {
    let n = r.len();
    if n == 0 {
        return Err(ModularityError::EmptyInput);
    }
    for (i, row) in r.iter().enumerate() {
        if row.len() != n {
            return Err(ModularityError::NotSquare {
                rows: n,
                cols: row.len(),
            });
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(ModularityError::InvalidRatio {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dist: f64 = (0..n).map(|k| (r[i][k] - r[j][k]).abs()).sum();
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }

    let ibrp = |fragments: &[Vec<usize>]| -> f64 {
        let mut acc = 0.0;
        for f in fragments {
            for &i in f {
                for &j in f {
                    acc += d[i][j];
                }
            }
        }
        acc / (n * n) as f64
    };

    let mut fragments: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut trace = vec![ibrp(&fragments)];
    loop {
        // Globally weakest pair within one fragment.
        let mut weakest: Option<(usize, usize, usize, f64)> = None; // (frag, i, j, d)
        for (fi, f) in fragments.iter().enumerate() {
            for (a, &i) in f.iter().enumerate() {
                for &j in &f[a + 1..] {
                    let dij = d[i.min(j)][i.max(j)];
                    if weakest.is_none_or(|(_, _, _, best)| dij > best) {
                        weakest = Some((fi, i.min(j), i.max(j), dij));
                    }
                }
            }
        }
        let Some((fi, seed_a, seed_b, dmax)) = weakest else {
            break;
        };
        if dmax <= 0.0 {
            break;
        }
        let fragment = fragments.swap_remove(fi);
        let mut side_a = Vec::new();
        let mut side_b = Vec::new();
        for &k in &fragment {
            // Members join the nearer seed; exact ties go with the first.
            if k != seed_b && (k == seed_a || d[k][seed_a] <= d[k][seed_b]) {
                side_a.push(k);
            } else {
                side_b.push(k);
            }
        }
        fragments.push(side_a);
        fragments.push(side_b);
        trace.push(ibrp(&fragments));
    }

    let mut labels = vec![0usize; n];
    for (fi, f) in fragments.iter().enumerate() {
        for &i in f {
            labels[i] = fi;
        }
    }
    Ok(WeakestPairResult {
        dissimilarity: d,
        ibrp_trace: trace,
        partition: Partition::from_labels(&labels),
    })
}

/// A community assignment over the bipartite graph, with per-part views and
/// the score of the measure it was built for.
#[derive(Debug, Clone)]
pub struct CommunityStructure {
    pub measure: Measure,
    pub score: f64,
    /// Partition of the full vertex set (u-part ids first).
    pub joint: Partition,
    /// Partition of the u-part alone.
    pub row: Partition,
    /// Partition of the v-part alone.
    pub col: Partition,
}

/// Exports a community structure as CSV with the same schema as the
/// clustering partition export: label, part tag, community id.
pub fn community_csv(g: &BipartiteGraph, cs: &CommunityStructure) -> String {
    let mut out = String::from("label,part_tag,community\n");
    for node in 0..g.n_nodes() {
        let label = g.global_label(node);
        let quoted = if label.contains([',', '"', '\n']) {
            format!("\"{}\"", label.replace('"', "\"\""))
        } else {
            label.to_owned()
        };
        out.push_str(&format!(
            "{},{},{}\n",
            quoted,
            g.global_tag(node),
            cs.joint.community_of(node)
        ));
    }
    out
}

/// Greedy agglomerative optimization: start from singleton communities and
/// repeatedly apply the merge with the best strict improvement of the
/// chosen measure, stopping when none remains. Ties break toward the merge
/// with the lowest community indices (for the correspondence measures, row
/// merges are considered before column merges).
pub fn greedy_optimize(g: &BipartiteGraph, measure: Measure) -> CommunityStructure {
    match measure {
        Measure::Qb => greedy_qb(g),
        Measure::Qm | Measure::Qh => greedy_correspondence(g, measure),
    }
}

fn greedy_qb(g: &BipartiteGraph) -> CommunityStructure {
    let n = g.n_nodes();
    let m = g.m() as f64;
    // Community slot per node; merges fold the higher slot into the lower.
    let mut comm: Vec<usize> = (0..n).collect();
    let mut ku: Vec<f64> = (0..n)
        .map(|i| if i < g.n_u() { g.global_degree(i) as f64 } else { 0.0 })
        .collect();
    let mut kv: Vec<f64> = (0..n)
        .map(|i| if i < g.n_u() { 0.0 } else { g.global_degree(i) as f64 })
        .collect();
    // Inter-community edge multiplicities, keyed by (low slot, high slot).
    let mut between: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..g.n_u() {
        for (j, mult) in g.neighbors_u(i) {
            *between.entry((i, g.n_u() + j)).or_insert(0.0) += mult as f64;
        }
    }

    loop {
        // Only adjacent communities can strictly improve Q^B: a merge with
        // no connecting edge contributes -(Ku_a Kv_b + Ku_b Kv_a)/m^2 <= 0.
        let mut best: Option<((usize, usize), f64)> = None;
        for (&(a, b), &e_ab) in &between {
            let delta = e_ab / m - (ku[a] * kv[b] + ku[b] * kv[a]) / (m * m);
            if best.is_none_or(|(_, bd)| delta > bd) {
                best = Some(((a, b), delta));
            }
        }
        let Some(((a, b), delta)) = best else { break };
        if delta <= IMPROVEMENT_EPS {
            break;
        }
        ku[a] += ku[b];
        kv[a] += kv[b];
        for c in comm.iter_mut() {
            if *c == b {
                *c = a;
            }
        }
        // Re-key b's adjacencies onto a.
        let moved: Vec<((usize, usize), f64)> = between
            .range((b, 0)..(b + 1, 0))
            .map(|(&k, &v)| (k, v))
            .chain(
                between
                    .iter()
                    .filter(|(&(_, hi), _)| hi == b)
                    .map(|(&k, &v)| (k, v)),
            )
            .collect();
        for (key, weight) in moved {
            between.remove(&key);
            let other = if key.0 == b { key.1 } else { key.0 };
            if other == a {
                continue; // now internal to the merged community
            }
            *between.entry((a.min(other), a.max(other))).or_insert(0.0) += weight;
        }
    }

    let joint = Partition::from_labels(&comm);
    let row = Partition::from_labels(&comm[..g.n_u()]);
    let col = Partition::from_labels(&comm[g.n_u()..]);
    let score = modularity_qb(g, &joint).expect("partition covers the graph");
    CommunityStructure {
        measure: Measure::Qb,
        score,
        joint,
        row,
        col,
    }
}

/// Mutable link-fraction state for the correspondence-measure greedy:
/// communities are addressed by their lowest-member slot, dead slots stay
/// in place so indices remain stable and deterministic.
struct FractionState {
    e: Vec<Vec<f64>>,
    alive_rows: Vec<bool>,
    alive_cols: Vec<bool>,
    a_row: Vec<f64>,
    a_col: Vec<f64>,
}

impl FractionState {
    fn from_graph(g: &BipartiteGraph) -> Self {
        let m = g.m() as f64;
        let mut e = vec![vec![0.0; g.n_v()]; g.n_u()];
        for (i, row) in e.iter_mut().enumerate() {
            for (j, mult) in g.neighbors_u(i) {
                row[j] += mult as f64 / m;
            }
        }
        let a_row: Vec<f64> = e.iter().map(|r| r.iter().sum()).collect();
        let a_col: Vec<f64> = (0..g.n_v()).map(|j| e.iter().map(|r| r[j]).sum()).collect();
        FractionState {
            e,
            alive_rows: vec![true; g.n_u()],
            alive_cols: vec![true; g.n_v()],
            a_row,
            a_col,
        }
    }

    /// Contribution of one live row, with up to one virtual row-merge and
    /// one virtual column-merge applied.
    fn row_term(
        &self,
        measure: Measure,
        i: usize,
        merge_row: Option<usize>,
        merge_cols: Option<(usize, usize)>,
    ) -> f64 {
        let cell = |j: usize| -> f64 {
            let mut v = self.e[i][j];
            if let Some(other) = merge_row {
                v += self.e[other][j];
            }
            if let Some((c1, c2)) = merge_cols {
                if j == c1 {
                    v += self.e[i][c2] + merge_row.map_or(0.0, |o| self.e[o][c2]);
                }
            }
            v
        };
        let col_mass = |j: usize| -> f64 {
            match merge_cols {
                Some((c1, c2)) if j == c1 => self.a_col[c1] + self.a_col[c2],
                _ => self.a_col[j],
            }
        };
        let a_i = self.a_row[i] + merge_row.map_or(0.0, |o| self.a_row[o]);
        let cols = || {
            self.alive_cols
                .iter()
                .enumerate()
                .filter(move |&(j, &alive)| alive && Some(j) != merge_cols.map(|(_, c2)| c2))
                .map(|(j, _)| j)
        };
        match measure {
            Measure::Qm => {
                let mut best: Option<usize> = None;
                for j in cols() {
                    if best.is_none_or(|b| cell(j) > cell(b)) {
                        best = Some(j);
                    }
                }
                best.map_or(0.0, |j| cell(j) - a_i * col_mass(j))
            }
            Measure::Qh => {
                let rowmax = cols().map(&cell).fold(0.0f64, f64::max);
                if rowmax <= 0.0 {
                    return 0.0;
                }
                cols()
                    .map(|j| cell(j) / rowmax * (cell(j) - a_i * col_mass(j)))
                    .sum()
            }
            Measure::Qb => unreachable!("Q^B is optimized over the joint vertex set"),
        }
    }

    fn score(
        &self,
        measure: Measure,
        merge_rows: Option<(usize, usize)>,
        merge_cols: Option<(usize, usize)>,
    ) -> f64 {
        let mut total = 0.0;
        for i in 0..self.e.len() {
            if !self.alive_rows[i] {
                continue;
            }
            match merge_rows {
                Some((_, r2)) if i == r2 => continue,
                Some((r1, r2)) if i == r1 => {
                    total += self.row_term(measure, r1, Some(r2), merge_cols)
                }
                _ => total += self.row_term(measure, i, None, merge_cols),
            }
        }
        total
    }

    fn merge_rows(&mut self, r1: usize, r2: usize) {
        for j in 0..self.e[r1].len() {
            self.e[r1][j] += self.e[r2][j];
        }
        self.a_row[r1] += self.a_row[r2];
        self.alive_rows[r2] = false;
    }

    fn merge_cols(&mut self, c1: usize, c2: usize) {
        for row in self.e.iter_mut() {
            row[c1] += row[c2];
        }
        self.a_col[c1] += self.a_col[c2];
        self.alive_cols[c2] = false;
    }
}

fn greedy_correspondence(g: &BipartiteGraph, measure: Measure) -> CommunityStructure {
    let mut state = FractionState::from_graph(g);
    let mut row_comm: Vec<usize> = (0..g.n_u()).collect();
    let mut col_comm: Vec<usize> = (0..g.n_v()).collect();

    loop {
        let current = state.score(measure, None, None);
        let mut best: Option<(bool, usize, usize, f64)> = None; // (is_row, a, b, delta)
        let live = |flags: &[bool]| -> Vec<usize> {
            flags
                .iter()
                .enumerate()
                .filter(|(_, &a)| a)
                .map(|(i, _)| i)
                .collect()
        };
        for (ai, &a) in live(&state.alive_rows).iter().enumerate() {
            for &b in &live(&state.alive_rows)[ai + 1..] {
                // A row merge only changes the merged rows' own terms.
                let delta = state.row_term(measure, a, Some(b), None)
                    - state.row_term(measure, a, None, None)
                    - state.row_term(measure, b, None, None);
                if best.is_none_or(|(_, _, _, bd)| delta > bd) {
                    best = Some((true, a, b, delta));
                }
            }
        }
        for (ai, &a) in live(&state.alive_cols).iter().enumerate() {
            for &b in &live(&state.alive_cols)[ai + 1..] {
                let delta = state.score(measure, None, Some((a, b))) - current;
                if best.is_none_or(|(_, _, _, bd)| delta > bd) {
                    best = Some((false, a, b, delta));
                }
            }
        }
        let Some((is_row, a, b, delta)) = best else { break };
        if delta <= IMPROVEMENT_EPS {
            break;
        }
        if is_row {
            state.merge_rows(a, b);
            for c in row_comm.iter_mut() {
                if *c == b {
                    *c = a;
                }
            }
        } else {
            state.merge_cols(a, b);
            for c in col_comm.iter_mut() {
                if *c == b {
                    *c = a;
                }
            }
        }
    }

    let row = Partition::from_labels(&row_comm);
    let col = Partition::from_labels(&col_comm);
    // Joint ids: row communities first, then column communities.
    let joint_labels: Vec<usize> = row_comm
        .iter()
        .copied()
        .chain(col_comm.iter().map(|&c| g.n_u() + c))
        .collect();
    let joint = Partition::from_labels(&joint_labels);
    let score = match measure {
        Measure::Qm => modularity_qm(g, &row, &col),
        Measure::Qh => modularity_qh(g, &row, &col),
        Measure::Qb => unreachable!(),
    }
    .expect("partitions cover both parts");
    CommunityStructure {
        measure,
        score,
        joint,
        row,
        col,
    }
}
