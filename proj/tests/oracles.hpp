// Reference implementations used to cross-check the library. Deliberately
// written as plain loops and dense matrices against the definitions, on a
// different code path from the production implementations they validate.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "medgraph/encoder.hpp"
#include "medgraph/gnn.hpp"
#include "medgraph/graph.hpp"
#include "medgraph/training.hpp"

namespace oracle {

// ---------- graph construction ----------

inline double cosine(const std::vector<double>& x, const std::vector<double>& y) {
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return dot / (std::sqrt(nx) * std::sqrt(ny));
}

inline double jaccard(const std::set<int>& a, const std::set<int>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::vector<int> inter, uni;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

inline double pair_similarity(const Eigen::MatrixXd& features, int i, int j,
                              const medgraph::EncodingSchema& schema, double alpha) {
  const int cdim = schema.continuous_dim();
  std::vector<double> xi, xj;
  for (int k = 0; k < cdim; ++k) {
    xi.push_back(features(i, k));
    xj.push_back(features(j, k));
  }
  std::set<int> bi, bj;
  for (int k = schema.binary_begin(); k < schema.binary_end(); ++k) {
    if (features(i, k) > 0.5) bi.insert(k);
    if (features(j, k) > 0.5) bj.insert(k);
  }
  return alpha * cosine(xi, xj) + (1.0 - alpha) * jaccard(bi, bj);
}

inline double percentile_value(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto idx = static_cast<std::size_t>(std::ceil(p * n / 100.0)) - 1;
  if (idx >= values.size()) idx = values.size() - 1;
  return values[idx];
}

struct BruteGraph {
  double tau = 0.0;
  std::vector<std::tuple<int, int, double>> edges;  // u < v
};

inline BruteGraph brute_force_graph(const Eigen::MatrixXd& features,
                                    const medgraph::EncodingSchema& schema,
                                    const medgraph::SimilarityParams& params) {
  const int n = static_cast<int>(features.rows());
  std::vector<std::tuple<int, int, double>> sims;
  std::vector<double> values;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double s = pair_similarity(features, i, j, schema, params.alpha);
      sims.emplace_back(i, j, s);
      values.push_back(s);
    }
  BruteGraph out;
  out.tau = params.tau_override ? *params.tau_override
                                : percentile_value(values, params.tau_percentile);
  for (const auto& [u, v, s] : sims)
    if (s > out.tau) out.edges.emplace_back(u, v, s);
  return out;
}

// ---------- dense layer oracles ----------

inline Eigen::MatrixXd dense_adjacency(const medgraph::PatientGraph& g) {
  const int n = g.num_nodes();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges) {
    a(e.u, e.v) = e.weight;
    a(e.v, e.u) = e.weight;
  }
  return a;
}

// D^(-1/2) (A + I) D^(-1/2) with similarity-weighted degrees.
inline Eigen::MatrixXd dense_sym_norm(const medgraph::PatientGraph& g) {
  const int n = g.num_nodes();
  Eigen::MatrixXd ahat = dense_adjacency(g) + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd d = ahat.rowwise().sum();
  Eigen::MatrixXd p(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p(i, j) = ahat(i, j) / (std::sqrt(d(i)) * std::sqrt(d(j)));
  return p;
}

// Row-normalized neighbor indicator (no self, unweighted mean); zero row for
// isolated nodes.
inline Eigen::MatrixXd dense_mean_adj(const medgraph::PatientGraph& g) {
  const int n = g.num_nodes();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int v = 0; v < n; ++v) {
    const auto& nb = g.neighbors[static_cast<std::size_t>(v)];
    if (nb.empty()) continue;
    for (const auto& p : nb) m(v, p.first) = 1.0 / static_cast<double>(nb.size());
  }
  return m;
}

inline Eigen::MatrixXd gcn_oracle(const Eigen::MatrixXd& h, const medgraph::PatientGraph& g,
                                  const medgraph::GcnParams& p) {
  Eigen::MatrixXd out = dense_sym_norm(g) * h * p.W;
  out.rowwise() += p.b.col(0).transpose();
  return out;
}

inline Eigen::MatrixXd sage_oracle(const Eigen::MatrixXd& h, const medgraph::PatientGraph& g,
                                   const medgraph::SageParams& p) {
  Eigen::MatrixXd out = h * p.W_self + dense_mean_adj(g) * h * p.W_neigh;
  out.rowwise() += p.b.col(0).transpose();
  return out;
}

struct GatOracleResult {
  Eigen::MatrixXd embedding;
  // (src, dst) -> one attention weight per head; dst slots cover N(v) and v.
  std::map<std::pair<int, int>, std::vector<double>> alpha;
};

inline GatOracleResult gat_oracle(const Eigen::MatrixXd& h, const medgraph::PatientGraph& g,
                                  const medgraph::GatParams& p) {
  const int n = g.num_nodes();
  const auto n_heads = p.heads.size();
  const int out_dim = static_cast<int>(p.heads.front().W.cols());
  GatOracleResult res;
  res.embedding = Eigen::MatrixXd::Zero(n, out_dim);
  for (std::size_t k = 0; k < n_heads; ++k) {
    const auto& hp = p.heads[k];
    Eigen::MatrixXd z = h * hp.W;
    for (int v = 0; v < n; ++v) {
      std::vector<int> srcs{v};
      for (const auto& nb : g.neighbors[static_cast<std::size_t>(v)]) srcs.push_back(nb.first);
      std::vector<double> scores;
      for (int u : srcs) {
        double raw = 0.0;
        for (int c = 0; c < out_dim; ++c)
          raw += hp.a_src(c, 0) * z(u, c) + hp.a_dst(c, 0) * z(v, c);
        scores.push_back(raw > 0.0 ? raw : medgraph::kLeakySlope * raw);
      }
      const double mx = *std::max_element(scores.begin(), scores.end());
      double denom = 0.0;
      for (double s : scores) denom += std::exp(s - mx);
      for (std::size_t t = 0; t < srcs.size(); ++t) {
        const double a = std::exp(scores[t] - mx) / denom;
        auto& slot = res.alpha[{srcs[t], v}];
        slot.resize(n_heads, 0.0);
        slot[k] = a;
        for (int c = 0; c < out_dim; ++c)
          res.embedding(v, c) += a * z(srcs[t], c) / static_cast<double>(n_heads);
      }
    }
  }
  res.embedding.rowwise() += p.b.col(0).transpose();
  return res;
}

// ---------- metrics ----------

inline double auc_pairs(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// ---------- finite differences ----------

struct FdReport {
  double max_rel = 0.0;
  std::string worst_tensor;
  double worst_analytic = 0.0;
  double worst_fd = 0.0;
};

// Central differences for every trainable tensor against the analytic
// gradients; loss_fn must recompute the loss from the current params/heads.
template <class LossFn>
FdReport fd_check(medgraph::ModelParams& params, medgraph::Heads& heads,
                  const medgraph::GradientSet& grads, LossFn&& loss_fn, double h = 1e-5) {
  std::map<std::string, const Eigen::MatrixXd*> analytic;
  medgraph::for_each_tensor(
      grads.model, [&](const std::string& name, const Eigen::MatrixXd& t) { analytic[name] = &t; });
  medgraph::for_each_tensor(
      grads.heads, [&](const std::string& name, const Eigen::MatrixXd& t) { analytic[name] = &t; });

  FdReport report;
  auto check_tensor = [&](const std::string& name, Eigen::MatrixXd& tensor) {
    const Eigen::MatrixXd& ga = *analytic.at(name);
    for (Eigen::Index r = 0; r < tensor.rows(); ++r)
      for (Eigen::Index c = 0; c < tensor.cols(); ++c) {
        const double saved = tensor(r, c);
        tensor(r, c) = saved + h;
        const double up = loss_fn();
        tensor(r, c) = saved - h;
        const double down = loss_fn();
        tensor(r, c) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double a = ga(r, c);
        const double denom = std::max({1e-6, std::abs(a), std::abs(fd)});
        const double rel = std::abs(a - fd) / denom;
        if (rel > report.max_rel) {
          report.max_rel = rel;
          report.worst_tensor = name;
          report.worst_analytic = a;
          report.worst_fd = fd;
        }
      }
  };
  medgraph::for_each_tensor(params, check_tensor);
  medgraph::for_each_tensor(heads, check_tensor);
  return report;
}

// ---------- synthetic graphs ----------

// Hand-assembled graph over random features; tau fixed at 0 (not meaningful
// for these tests). Edge tuples are (u, v, weight) with u < v.
inline medgraph::PatientGraph make_graph(int n, int feat_dim,
                                         const std::vector<std::tuple<int, int, double>>& edges,
                                         std::uint64_t seed) {
  medgraph::PatientGraph g;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  g.features.resize(n, feat_dim);
  for (int i = 0; i < n; ++i) {
    g.node_ids.push_back("n" + std::to_string(i));
    for (int j = 0; j < feat_dim; ++j) g.features(i, j) = unif(rng);
  }
  g.neighbors.assign(static_cast<std::size_t>(n), {});
  for (const auto& [u, v, w] : edges) {
    g.edges.push_back({u, v, w});
    g.neighbors[static_cast<std::size_t>(u)].emplace_back(v, w);
    g.neighbors[static_cast<std::size_t>(v)].emplace_back(u, w);
  }
  for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());
  return g;
}

// Random sparse graph for oracle comparisons.
inline medgraph::PatientGraph random_graph(int n, int feat_dim, double edge_prob,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::tuple<int, int, double>> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (unif(rng) < edge_prob) edges.emplace_back(u, v, 0.1 + 0.9 * unif(rng));
  return make_graph(n, feat_dim, edges, seed);
}

inline medgraph::PatientGraph path_graph(int n, int feat_dim, std::uint64_t seed,
                                         double weight = 0.8) {
  std::vector<std::tuple<int, int, double>> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1, weight);
  return make_graph(n, feat_dim, edges, seed);
}

// perm[old] = new index; features, ids, edges, and neighbor lists remapped.
inline medgraph::PatientGraph permute_graph(const medgraph::PatientGraph& g,
                                            const std::vector<int>& perm) {
  medgraph::PatientGraph out;
  const int n = g.num_nodes();
  out.features.resize(n, g.features.cols());
  out.node_ids.assign(static_cast<std::size_t>(n), {});
  for (int i = 0; i < n; ++i) {
    out.features.row(perm[static_cast<std::size_t>(i)]) = g.features.row(i);
    out.node_ids[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] =
        g.node_ids[static_cast<std::size_t>(i)];
  }
  out.neighbors.assign(static_cast<std::size_t>(n), {});
  for (const auto& e : g.edges) {
    int u = perm[static_cast<std::size_t>(e.u)];
    int v = perm[static_cast<std::size_t>(e.v)];
    if (u > v) std::swap(u, v);
    out.edges.push_back({u, v, e.weight});
    out.neighbors[static_cast<std::size_t>(u)].emplace_back(v, e.weight);
    out.neighbors[static_cast<std::size_t>(v)].emplace_back(u, e.weight);
  }
  std::sort(out.edges.begin(), out.edges.end(), [](const auto& a, const auto& b) {
    return std::tie(a.u, a.v) < std::tie(b.u, b.v);
  });
  for (auto& nb : out.neighbors) std::sort(nb.begin(), nb.end());
  out.tau = g.tau;
  out.params = g.params;
  return out;
}

}  // namespace oracle
