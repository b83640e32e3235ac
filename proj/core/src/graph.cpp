#include "medgraph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

namespace medgraph {

namespace {

// Per-node similarity inputs, extracted once so the O(N^2) pair loop stays
// cheap: continuous block, its norm, and the sorted active binary indices.
struct NodeView {
  Eigen::VectorXd cont;
  double norm = 0.0;
  std::vector<int> binary;
};

NodeView make_view(const Eigen::VectorXd& fv, const EncodingSchema& schema) {
  NodeView view;
  view.cont = fv.segment(schema.continuous_begin(), schema.continuous_dim());
  view.norm = std::sqrt(view.cont.dot(view.cont));
  view.binary = split_binary_view(fv, schema);
  return view;
}

double pair_similarity(const NodeView& a, const NodeView& b, double alpha) {
  double cos = 0.0;
  if (a.norm > 0.0 && b.norm > 0.0) cos = a.cont.dot(b.cont) / (a.norm * b.norm);
  double inter = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.binary.size() && j < b.binary.size()) {
    if (a.binary[i] == b.binary[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a.binary[i] < b.binary[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  double uni = static_cast<double>(a.binary.size() + b.binary.size()) - inter;
  double jac = uni > 0.0 ? inter / uni : 0.0;
  return alpha * cos + (1.0 - alpha) * jac;
}

void index_edges(PatientGraph& g) {
  std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  g.neighbors.assign(static_cast<std::size_t>(g.num_nodes()), {});
  for (const auto& e : g.edges) {
    g.neighbors[static_cast<std::size_t>(e.u)].emplace_back(e.v, e.weight);
    g.neighbors[static_cast<std::size_t>(e.v)].emplace_back(e.u, e.weight);
  }
  for (auto& adj : g.neighbors) std::sort(adj.begin(), adj.end());
}

}  // namespace

void SimilarityParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ValidationError("SimilarityParams.alpha must lie in [0,1]");
  if (!(tau_percentile > 0.0 && tau_percentile < 100.0))
    throw ValidationError("SimilarityParams.tau_percentile must lie in (0,100)");
}

double PatientGraph::weight(int u, int v) const {
  const auto& adj = neighbors[static_cast<std::size_t>(u)];
  auto it = std::lower_bound(adj.begin(), adj.end(), std::make_pair(v, 0.0),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
  if (it != adj.end() && it->first == v) return it->second;
  return 0.0;
}

double cosine_similarity(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size())
    throw ValidationError("cosine_similarity: length mismatch (" + std::to_string(x.size()) +
                          " vs " + std::to_string(y.size()) + ")");
  double nx = std::sqrt(x.dot(x));
  double ny = std::sqrt(y.dot(y));
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return x.dot(y) / (nx * ny);
}

double jaccard_similarity(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() && b.empty()) return 0.0;
  double inter = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  double uni = static_cast<double>(a.size() + b.size()) - inter;
  return inter / uni;
}

double hybrid_similarity(const FeatureVec& u, const FeatureVec& v, const EncodingSchema& schema,
                         const SimilarityParams& params) {
  if (u.size() != schema.total_dim() || v.size() != schema.total_dim())
    throw ValidationError("hybrid_similarity: feature vectors do not match the schema width");
  return pair_similarity(make_view(u, schema), make_view(v, schema), params.alpha);
}

double compute_tau(std::vector<double> similarities, double percentile) {
  if (similarities.empty()) throw ValidationError("compute_tau requires a non-empty list");
  if (!(percentile > 0.0 && percentile < 100.0))
    throw ValidationError("compute_tau percentile must lie in (0,100)");
  const auto n = static_cast<double>(similarities.size());
  // Multiply before dividing: p*n is exact for integer-valued inputs, so the
  // nearest-rank index does not drift across the ceil boundary.
  auto rank = static_cast<long>(std::ceil(percentile * n / 100.0));
  rank = std::clamp(rank, 1L, static_cast<long>(similarities.size()));
  auto nth = similarities.begin() + (rank - 1);
  std::nth_element(similarities.begin(), nth, similarities.end());
  return *nth;
}

PatientGraph build_graph(const Eigen::MatrixXd& features, const std::vector<std::string>& ids,
                         const EncodingSchema& schema, const SimilarityParams& params) {
  params.validate();
  const int n = static_cast<int>(ids.size());
  if (n < 2) throw ValidationError("build_graph requires at least 2 nodes");
  if (features.rows() != n) throw ValidationError("build_graph: features/ids row count mismatch");
  if (features.cols() != schema.total_dim())
    throw ValidationError("build_graph: feature width does not match the schema");
  {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
      if (!seen.insert(id).second) throw ValidationError("build_graph: duplicate node id '" + id + "'");
  }

  std::vector<NodeView> views;
  views.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) views.push_back(make_view(features.row(i).transpose(), schema));

  // Flat upper-triangle similarity store; row u starts at offset[u]. Each
  // pair owns one slot, so the parallel fill is order-independent.
  std::vector<std::size_t> offset(static_cast<std::size_t>(n) + 1, 0);
  for (int u = 0; u < n; ++u)
    offset[static_cast<std::size_t>(u) + 1] =
        offset[static_cast<std::size_t>(u)] + static_cast<std::size_t>(n - 1 - u);
  std::vector<double> sims(offset[static_cast<std::size_t>(n)]);

  auto fill_rows = [&](int first_row, int stride) {
    for (int u = first_row; u < n; u += stride) {
      double* out = sims.data() + offset[static_cast<std::size_t>(u)];
      const NodeView& vu = views[static_cast<std::size_t>(u)];
      for (int v = u + 1; v < n; ++v)
        out[v - u - 1] = pair_similarity(vu, views[static_cast<std::size_t>(v)], params.alpha);
    }
  };
  unsigned threads = std::min<unsigned>(std::thread::hardware_concurrency(), 8);
  if (threads > 1 && n >= 256) {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(fill_rows, static_cast<int>(t), static_cast<int>(threads));
    for (auto& th : pool) th.join();
  } else {
    fill_rows(0, 1);
  }

  PatientGraph g;
  g.node_ids = ids;
  g.features = features;
  g.params = params;
  g.tau = params.tau_override ? *params.tau_override : compute_tau(sims, params.tau_percentile);

  for (int u = 0; u < n; ++u) {
    const double* row = sims.data() + offset[static_cast<std::size_t>(u)];
    for (int v = u + 1; v < n; ++v)
      if (row[v - u - 1] > g.tau) g.edges.push_back({u, v, row[v - u - 1]});
  }
  index_edges(g);
  return g;
}

PatientGraph add_node(const PatientGraph& graph, const FeatureVec& fv, const std::string& id,
                      const EncodingSchema& schema) {
  for (const auto& existing : graph.node_ids)
    if (existing == id) throw ValidationError("add_node: duplicate node id '" + id + "'");
  if (fv.size() != schema.total_dim())
    throw ValidationError("add_node: feature width does not match the schema");

  PatientGraph g = graph;
  const int idx = g.num_nodes();
  g.node_ids.push_back(id);
  g.features.conservativeResize(idx + 1, Eigen::NoChange);
  g.features.row(idx) = fv.transpose();

  NodeView nv = make_view(fv, schema);
  for (int u = 0; u < idx; ++u) {
    double s = pair_similarity(make_view(g.features.row(u).transpose(), schema), nv,
                               g.params.alpha);
    if (s > g.tau) g.edges.push_back({u, idx, s});
  }
  index_edges(g);
  return g;
}

void write_edge_list(const PatientGraph& graph, const std::filesystem::path& edges_path,
                     const std::filesystem::path& sidecar_path) {
  std::ofstream out(edges_path);
  if (!out) throw IoError("cannot open for writing: " + edges_path.string());
  out << "u,v,weight\n";
  for (const auto& e : graph.edges)
    out << e.u << "," << e.v << "," << format_double_sig(e.weight, 12) << "\n";
  if (!out) throw IoError("write failed: " + edges_path.string());

  nlohmann::ordered_json j;
  j["tau"] = graph.tau;
  j["alpha"] = graph.params.alpha;
  j["tau_percentile"] = graph.params.tau_percentile;
  j["n_nodes"] = graph.num_nodes();
  j["n_edges"] = graph.num_edges();
  std::ofstream side(sidecar_path);
  if (!side) throw IoError("cannot open for writing: " + sidecar_path.string());
  side << j.dump(2) << "\n";
}

}  // namespace medgraph
