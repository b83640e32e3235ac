// Patient similarity graph: hybrid cosine/Jaccard scores, percentile
// threshold, sparse weighted adjacency, incremental insertion.
#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "medgraph/encoder.hpp"

namespace medgraph {

struct SimilarityParams {
  double alpha = 0.7;            // weight of the cosine (feature) component
  double tau_percentile = 90.0;  // nearest-rank percentile for the threshold
  std::optional<double> tau_override;

  void validate() const;
};

struct GraphEdge {
  int u = 0;  // u < v, node order
  int v = 0;
  double weight = 0.0;
};

// Undirected weighted graph over one cohort. Immutable once built; add_node
// returns a new value. Edges are kept in canonical (u,v) order and mirrored
// into per-node neighbor lists.
struct PatientGraph {
  std::vector<std::string> node_ids;
  Eigen::MatrixXd features;  // N x kFeatureDim, encoder output
  std::vector<GraphEdge> edges;
  std::vector<std::vector<std::pair<int, double>>> neighbors;  // sorted by index
  double tau = 0.0;
  SimilarityParams params;

  int num_nodes() const { return static_cast<int>(node_ids.size()); }
  long num_edges() const { return static_cast<long>(edges.size()); }
  int degree(int v) const { return static_cast<int>(neighbors[static_cast<std::size_t>(v)].size()); }
  double weight(int u, int v) const;  // 0 when the edge is absent
};

// dot(x,y) / (|x||y|); 0 if either norm is 0. Throws on length mismatch.
double cosine_similarity(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// |a∩b| / |a∪b| over sorted index vectors; 0 when both are empty.
double jaccard_similarity(const std::vector<int>& a, const std::vector<int>& b);

// alpha * cosine(continuous blocks) + (1-alpha) * jaccard(binary index sets).
double hybrid_similarity(const FeatureVec& u, const FeatureVec& v, const EncodingSchema& schema,
                         const SimilarityParams& params);

// Nearest-rank percentile: sort ascending, element at ceil(p/100 * n) - 1.
double compute_tau(std::vector<double> similarities, double percentile);

// All-pairs construction. Edges hold exactly the pairs with S > tau, weighted
// by S; isolated nodes are kept.
PatientGraph build_graph(const Eigen::MatrixXd& features, const std::vector<std::string>& ids,
                         const EncodingSchema& schema, const SimilarityParams& params);

// Inserts one node against the frozen tau of an existing graph.
PatientGraph add_node(const PatientGraph& graph, const FeatureVec& fv, const std::string& id,
                      const EncodingSchema& schema);

// Text edge list (header u,v,weight; 12 significant digits) plus a JSON
// sidecar carrying tau, alpha, percentile, and N.
void write_edge_list(const PatientGraph& graph, const std::filesystem::path& edges_path,
                     const std::filesystem::path& sidecar_path);

}  // namespace medgraph
