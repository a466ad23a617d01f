/*!
Clustering of both sides of a bipartite dataset using correspondence-analysis
component scores as the similarity coordinates, together with the bipartite
modularity baselines it is usually compared against.

The pipeline turns labeled record pairs (purchase category, city) into a
contingency table, embeds row and column categories in a shared Euclidean
space via correspondence analysis, and clusters the joint point cloud with
hierarchical agglomerative linkage. The [`modularity`] module provides the
bipartite modularity measures and a greedy optimizer as baselines, and
[`eval`] hosts the rule-based reference partitioner and the node-count sweep
harness used to compare methods.

Data-parallel inner loops (pairwise distances, batch ingestion, sweep steps)
run on rayon when the default `parallel` feature is enabled and fall back to
sequential loops otherwise. Outputs are identical either way.
*/

pub mod cluster;
pub mod correspondence;
pub mod crosstab;
pub mod eval;
pub mod ingest;
pub mod modularity;

#[cfg(test)]
pub(crate) mod testdata;

pub use cluster::{Dendrogram, DistanceMatrix, Linkage, Partition, PointCloud};
pub use correspondence::CaEmbedding;
pub use crosstab::CrossTab;
pub use ingest::{Gazetteer, PurchaseRecord, RawRecord};
pub use modularity::BipartiteGraph;
