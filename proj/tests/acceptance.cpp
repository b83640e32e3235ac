// Acceptance suite: every release gate in one binary. Each criterion prints
// a single [PASS]/[FAIL] line with its measured quantities and tolerance.
// The ordering study (criterion 8) is directional and reported with full
// diagnostics; it is advisory and does not affect the exit code. All other
// criteria must pass.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "medgraph/common.hpp"
#include "medgraph/ehr.hpp"
#include "medgraph/encoder.hpp"
#include "medgraph/gnn.hpp"
#include "medgraph/graph.hpp"
#include "medgraph/metrics.hpp"
#include "medgraph/pipeline.hpp"
#include "medgraph/training.hpp"
#include "oracles.hpp"

using namespace medgraph;
namespace fs = std::filesystem;

namespace {

constexpr double kGradientRelTol = 1e-4;   // analytic vs central differences
constexpr double kFdStep = 1e-5;
constexpr double kWeightTol = 1e-12;       // graph weights vs brute force
constexpr double kDenseOracleTol = 1e-12;  // sparse vs dense layer outputs
constexpr double kPermTol = 1e-9;          // permutation equivariance
constexpr double kAttentionTol = 1e-9;     // attention row sums
constexpr double kMetricTol = 1e-12;       // AUC vs pair counting
constexpr double kOverfitAuc = 0.99;       // separable-cohort training AUC
constexpr int kOverfitEpochs = 200;
constexpr int kOrderingSeeds = 5;
constexpr int kOrderingMinWins = 4;        // of the 5 directional comparisons

struct Criterion {
  std::string name;
  bool pass = false;
  bool advisory = false;
  std::string detail;
  std::vector<std::string> diagnostics;
  double seconds = 0.0;
};

struct Encoded {
  Eigen::MatrixXd features;
  std::vector<std::string> ids;
  EncodingSchema schema;
  std::vector<int> labels;
  Eigen::VectorXd targets;
};

Encoded encode_cohort_for(const CohortSpec& spec) {
  auto cohort = generate_cohort(spec);
  Encoded e;
  e.schema = fit_schema_auto(cohort);
  e.features = encode_cohort(cohort, e.schema);
  const auto bounds = compute_severity_bounds(cohort);
  e.targets.resize(static_cast<Eigen::Index>(cohort.size()));
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    e.ids.push_back(cohort[i].id);
    e.labels.push_back(cohort[i].died_in_icu ? 1 : 0);
    e.targets(static_cast<Eigen::Index>(i)) = severity_proxy(cohort[i], bounds);
  }
  return e;
}

std::string fmt(double x) { return format_double_sig(x, 4); }

// Shared between criteria 7 and 9: one separable-cohort training run.
struct OverfitRun {
  std::uint64_t hash = 0;
  std::string history_csv;
  double train_auc = 0.0;
  int epochs = 0;
};

CohortSpec overfit_spec() {
  CohortSpec spec;
  spec.n_patients = 300;
  spec.seed = 71;
  spec.mortality_rate = 0.3;
  spec.signal_strength = 3.0;
  spec.missing_rate = 0.0;
  return spec;
}

OverfitRun run_overfit() {
  auto e = encode_cohort_for(overfit_spec());
  auto graph = build_graph(e.features, e.ids, e.schema, SimilarityParams{});
  TrainConfig cfg;
  cfg.max_epochs = kOverfitEpochs;
  cfg.patience = kOverfitEpochs - 1;  // let the run use the full budget
  cfg.seed = 7;
  auto result = train(graph, hybrid_stack(kFeatureDim, 64, 4), e.labels, e.targets, cfg);

  OverfitRun run;
  run.hash = params_hash(result.params, result.heads);
  run.epochs = static_cast<int>(result.history.size());

  auto params = result.params;
  auto out = model_forward(graph.features, graph, params, Mode::Eval);
  auto ho = apply_heads(out.embedding, result.heads);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i : result.masks.train) {
    scores.push_back(ho.mortality(i));
    labels.push_back(e.labels[static_cast<std::size_t>(i)]);
  }
  run.train_auc = auc_roc(scores, labels);

  const auto path = fs::temp_directory_path() / "medgraph_acceptance_history.csv";
  write_history_csv(result.history, path);
  std::ifstream in(path);
  run.history_csv = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return run;
}

// ---- criterion implementations ----

Criterion gradient_keystone() {
  Criterion c{"gradient keystone (analytic vs finite differences)"};
  auto g = oracle::random_graph(12, 5, 0.35, 901);
  std::vector<LayerSpec> specs{
      {LayerKind::GCN, 5, 4, 1, true, true},
      {LayerKind::SAGE, 4, 4, 1, true, true},
      {LayerKind::GAT, 4, 4, 2, false, false},
  };
  auto params = init_model(specs, 41);
  auto heads = init_heads(4, 42);
  std::vector<int> labels, mask;
  for (int i = 0; i < 12; ++i) labels.push_back(i % 2);
  for (int i = 0; i < 9; ++i) mask.push_back(i);
  Eigen::VectorXd targets = Eigen::VectorXd::LinSpaced(12, 0.05, 0.95);
  TrainConfig cfg;
  cfg.lambda1 = 1.0;
  cfg.lambda2 = 0.5;

  auto grads = backward(g.features, g, params, heads, labels, targets, cfg, mask);
  auto loss_fn = [&]() {
    auto out = model_forward(g.features, g, params, Mode::Train);
    auto ho = apply_heads(out.embedding, heads);
    return total_loss(ho.mortality, ho.severity, labels, targets, cfg, mask);
  };
  auto report = oracle::fd_check(params, heads, grads, loss_fn, kFdStep);
  c.pass = report.max_rel < kGradientRelTol;
  c.detail = "max rel err " + fmt(report.max_rel) + " (tol " + fmt(kGradientRelTol) +
             ", worst " + report.worst_tensor + ")";
  return c;
}

Criterion graph_oracle() {
  Criterion c{"graph construction vs brute-force oracle"};
  long edges_checked = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 101; seed < 106; ++seed) {
    CohortSpec spec;
    spec.n_patients = 200;
    spec.seed = seed;
    spec.mortality_rate = 0.25;
    spec.signal_strength = 1.0;
    spec.missing_rate = 0.05;
    auto e = encode_cohort_for(spec);
    SimilarityParams params;
    auto g = build_graph(e.features, e.ids, e.schema, params);
    auto brute = oracle::brute_force_graph(e.features, e.schema, params);
    if (std::abs(g.tau - brute.tau) > kWeightTol) {
      c.detail = "tau mismatch on seed " + std::to_string(seed);
      return c;
    }
    if (g.edges.size() != brute.edges.size()) {
      c.detail = "edge count mismatch on seed " + std::to_string(seed) + ": " +
                 std::to_string(g.edges.size()) + " vs " + std::to_string(brute.edges.size());
      return c;
    }
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
      const auto& [u, v, w] = brute.edges[i];
      if (g.edges[i].u != u || g.edges[i].v != v) {
        c.detail = "edge set mismatch on seed " + std::to_string(seed);
        return c;
      }
      worst = std::max(worst, std::abs(g.edges[i].weight - w));
      ++edges_checked;
    }
  }
  c.pass = worst <= kWeightTol;
  c.detail = std::to_string(edges_checked) + " edges over 5 cohorts, worst weight diff " +
             fmt(worst) + " (tol " + fmt(kWeightTol) + ")";
  return c;
}

Criterion percentile_sparsity() {
  Criterion c{"percentile threshold and sparsity bound"};
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(static_cast<double>(i) / 10.0);
  const double tau = compute_tau(grid, 90.0);
  int above = 0;
  for (double v : grid)
    if (v > tau) ++above;
  const bool grid_ok = tau == 9.0 / 10.0 && above == 1;

  CohortSpec spec;
  spec.n_patients = 200;
  spec.seed = 310;
  spec.mortality_rate = 0.25;
  spec.signal_strength = 1.0;
  spec.missing_rate = 0.05;
  auto e = encode_cohort_for(spec);
  auto g = build_graph(e.features, e.ids, e.schema, SimilarityParams{});
  const long bound = 200L * 199L / 2L / 10L;  // 10% of all pairs
  const bool sparse_ok = g.num_edges() <= bound;

  c.pass = grid_ok && sparse_ok;
  c.detail = "grid tau " + fmt(tau) + " with " + std::to_string(above) +
             " value above; N=200 edges " + std::to_string(g.num_edges()) + " <= " +
             std::to_string(bound);
  return c;
}

Criterion gnn_equivalences() {
  Criterion c{"layer oracles, equivariance, attention, locality"};
  std::ostringstream detail;

  // Dense oracles on a 50-node graph.
  auto g = oracle::random_graph(50, 8, 0.15, 777);
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> norm(0.0, 1.0);
  auto rand_mat = [&](int r, int cc) {
    Eigen::MatrixXd m(r, cc);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < cc; ++j) m(i, j) = norm(rng);
    return m;
  };
  GcnParams gp{rand_mat(8, 6), rand_mat(6, 1)};
  const double gcn_diff =
      (gcn_forward(g.features, g, gp) - oracle::gcn_oracle(g.features, g, gp)).cwiseAbs().maxCoeff();
  SageParams sp{rand_mat(8, 6), rand_mat(8, 6), rand_mat(6, 1)};
  const double sage_diff =
      (sage_forward(g.features, g, sp) - oracle::sage_oracle(g.features, g, sp))
          .cwiseAbs()
          .maxCoeff();
  GatParams ap;
  for (int k = 0; k < 4; ++k) ap.heads.push_back({rand_mat(8, 6), rand_mat(6, 1), rand_mat(6, 1)});
  ap.b = rand_mat(6, 1);
  auto [gat_emb, gat_att] = gat_forward(g.features, g, ap);
  auto gat_want = oracle::gat_oracle(g.features, g, ap);
  const double gat_diff = (gat_emb - gat_want.embedding).cwiseAbs().maxCoeff();
  const bool dense_ok =
      gcn_diff < kDenseOracleTol && sage_diff < kDenseOracleTol && gat_diff < kDenseOracleTol;
  detail << "dense diffs gcn " << fmt(gcn_diff) << " sage " << fmt(sage_diff) << " gat "
         << fmt(gat_diff);

  // Permutation equivariance of the full stack.
  auto gsmall = oracle::random_graph(30, 9, 0.2, 555);
  auto specs = hybrid_stack(9, 16, 4);
  auto params = init_model(specs, 3);
  std::vector<int> perm(30);
  for (int i = 0; i < 30; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  auto gperm = oracle::permute_graph(gsmall, perm);
  auto params2 = params;
  auto out_a = model_forward(gsmall.features, gsmall, params, Mode::Train);
  auto out_b = model_forward(gperm.features, gperm, params2, Mode::Train);
  double perm_diff = 0.0;
  for (int i = 0; i < 30; ++i)
    perm_diff = std::max(
        perm_diff, (out_a.embedding.row(i) -
                    out_b.embedding.row(perm[static_cast<std::size_t>(i)]))
                       .cwiseAbs()
                       .maxCoeff());
  const bool perm_ok = perm_diff < kPermTol;
  detail << "; perm diff " << fmt(perm_diff);

  // Attention rows sum to one for every head.
  double att_worst = 0.0;
  {
    std::vector<std::vector<double>> sums(
        static_cast<std::size_t>(gsmall.num_nodes()),
        std::vector<double>(static_cast<std::size_t>(specs.back().heads), 0.0));
    for (const auto& e : out_a.attention)
      for (std::size_t k = 0; k < e.per_head.size(); ++k)
        sums[static_cast<std::size_t>(e.dst)][k] += e.per_head[k];
    for (const auto& row : sums)
      for (double s : row) att_worst = std::max(att_worst, std::abs(s - 1.0));
  }
  const bool att_ok = att_worst < kAttentionTol;
  detail << "; att row sum err " << fmt(att_worst);

  // Five-layer receptive field on a 12-node path.
  auto path = oracle::path_graph(12, 7, 22);
  auto lspecs = hybrid_stack(7, 5, 2);
  for (auto& s : lspecs) s.batch_norm = false;
  auto lparams = init_model(lspecs, 8);
  auto base = model_forward(path.features, path, lparams, Mode::Train);
  auto moved_graph = path;
  moved_graph.features.row(11).array() += 0.25;
  auto moved = model_forward(moved_graph.features, moved_graph, lparams, Mode::Train);
  double far_diff = 0.0, near_diff = 0.0;
  for (int v = 0; v <= 5; ++v)
    far_diff = std::max(far_diff,
                        (base.embedding.row(v) - moved.embedding.row(v)).cwiseAbs().maxCoeff());
  for (int v = 6; v < 12; ++v)
    near_diff = std::max(near_diff,
                         (base.embedding.row(v) - moved.embedding.row(v)).cwiseAbs().maxCoeff());
  const bool local_ok = far_diff == 0.0 && near_diff > 0.0;
  detail << "; locality far " << fmt(far_diff) << " near " << fmt(near_diff);

  c.pass = dense_ok && perm_ok && att_ok && local_ok;
  c.detail = detail.str();
  return c;
}

Criterion metric_oracles() {
  Criterion c{"metric oracles (AUC pair counting, pinned cases)"};
  std::mt19937_64 rng(6060);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 10 + static_cast<int>(rng() % 191);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      double s = unif(rng);
      if (rep % 3 == 0) s = std::round(s * 10.0) / 10.0;  // tie-heavy sets
      scores.push_back(s);
      labels.push_back(unif(rng) < 0.35 ? 1 : 0);
    }
    labels[0] = 1;
    labels[1] = 0;
    worst = std::max(worst, std::abs(auc_roc(scores, labels) - oracle::auc_pairs(scores, labels)));
  }
  const double pinned = auc_roc({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0});
  const double rho = spearman({1.0, 2.0, 3.0, 4.0}, {1.0, 3.0, 2.0, 4.0});
  c.pass = worst <= kMetricTol && pinned == 0.75 && std::abs(rho - 0.8) < 1e-12;
  c.detail = "100 random sets, worst AUC diff " + fmt(worst) + "; pinned case " + fmt(pinned) +
             "; spearman " + fmt(rho);
  return c;
}

Criterion incremental_equivalence() {
  Criterion c{"incremental insertion vs rebuild under frozen threshold"};
  CohortSpec spec;
  spec.n_patients = 51;
  spec.seed = 88;
  spec.mortality_rate = 0.25;
  spec.signal_strength = 1.0;
  spec.missing_rate = 0.05;
  auto e = encode_cohort_for(spec);
  std::vector<std::string> base_ids(e.ids.begin(), e.ids.end() - 1);
  auto base = build_graph(e.features.topRows(50), base_ids, e.schema, SimilarityParams{});
  const FeatureVec fv = e.features.row(50);
  auto grown = add_node(base, fv, e.ids.back(), e.schema);
  SimilarityParams frozen;
  frozen.tau_override = base.tau;
  auto rebuilt = build_graph(e.features, e.ids, e.schema, frozen);

  auto edge_key = [](const PatientGraph& g) {
    std::set<std::pair<int, int>> s;
    for (const auto& edge : g.edges) s.insert({edge.u, edge.v});
    return s;
  };
  double worst = 0.0;
  const bool sets_equal = edge_key(grown) == edge_key(rebuilt);
  if (sets_equal)
    for (std::size_t i = 0; i < grown.edges.size(); ++i)
      worst = std::max(worst, std::abs(grown.edges[i].weight - rebuilt.edges[i].weight));
  c.pass = sets_equal && worst <= kWeightTol;
  c.detail = sets_equal ? ("edge sets equal (" + std::to_string(grown.edges.size()) +
                           " edges), worst weight diff " + fmt(worst))
                        : "edge sets differ";
  return c;
}

Criterion overfit_sanity(const OverfitRun& run) {
  Criterion c{"overfit sanity on a separable cohort"};
  c.pass = run.train_auc >= kOverfitAuc && run.epochs <= kOverfitEpochs;
  c.detail = "train AUC " + fmt(run.train_auc) + " (threshold " + fmt(kOverfitAuc) + ") after " +
             std::to_string(run.epochs) + " epochs";
  return c;
}

Criterion ordering_study() {
  Criterion c{"directional ordering of the ablation studies"};
  c.advisory = true;

  ExperimentConfig cfg;
  CohortSpec spec;
  spec.n_patients = 500;
  spec.seed = 2025;
  spec.mortality_rate = 0.25;
  spec.signal_strength = 0.8;
  spec.missing_rate = 0.05;
  cfg.cohort.generate = spec;
  cfg.train.max_epochs = 150;
  cfg.train.patience = 20;
  cfg.train.seed = 1;
  cfg.ablation.seeds = kOrderingSeeds;
  cfg.out_dir = fs::temp_directory_path() / "medgraph_acceptance_ablation";
  fs::remove_all(cfg.out_dir);

  auto rows = run_ablation(cfg);
  auto mean_of = [&](const std::string& study, const std::string& variant) {
    for (const auto& r : rows)
      if (r.study == study && r.variant == variant) return r.auc_mean;
    return -1.0;
  };
  const double arch_hybrid = mean_of("architecture", "hybrid");
  const double graph_hybrid = mean_of("graph", "hybrid");
  struct Cmp {
    std::string label;
    double hybrid, other;
  };
  std::vector<Cmp> cmps{
      {"architecture hybrid >= gcn", arch_hybrid, mean_of("architecture", "gcn")},
      {"architecture hybrid >= sage", arch_hybrid, mean_of("architecture", "sage")},
      {"architecture hybrid >= gat", arch_hybrid, mean_of("architecture", "gat")},
      {"graph hybrid >= cosine", graph_hybrid, mean_of("graph", "cosine")},
      {"graph hybrid >= jaccard", graph_hybrid, mean_of("graph", "jaccard")},
  };
  int wins = 0;
  for (const auto& cmp : cmps) {
    const bool ok = cmp.hybrid >= cmp.other;
    wins += ok ? 1 : 0;
    c.diagnostics.push_back((ok ? "  ok   " : "  MISS ") + cmp.label + ": " + fmt(cmp.hybrid) +
                            " vs " + fmt(cmp.other));
  }
  for (const auto& r : rows)
    c.diagnostics.push_back("  row " + r.study + "/" + r.variant + ": auc " + fmt(r.auc_mean) +
                            " +- " + fmt(r.auc_std) + ", f1 " + fmt(r.f1_mean));
  c.pass = wins >= kOrderingMinWins;
  c.detail = std::to_string(wins) + "/" + std::to_string(cmps.size()) +
             " directional comparisons hold (need " + std::to_string(kOrderingMinWins) + ")";
  return c;
}

Criterion determinism(const OverfitRun& first) {
  Criterion c{"repeat run determinism (parameter hash and history)"};
  auto second = run_overfit();
  const bool hash_ok = second.hash == first.hash;
  const bool history_ok = second.history_csv == first.history_csv;
  c.pass = hash_ok && history_ok;
  c.detail = std::string("params hash ") + (hash_ok ? "identical" : "DIFFERS") + " (" +
             hex64(first.hash) + "), history csv " + (history_ok ? "identical" : "DIFFERS");
  return c;
}

}  // namespace

int main() {
  std::vector<Criterion> results;
  auto timed = [&](auto&& fn, auto&&... args) {
    const auto start = std::chrono::steady_clock::now();
    Criterion c = fn(std::forward<decltype(args)>(args)...);
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(std::move(c));
  };

  timed(gradient_keystone);
  timed(graph_oracle);
  timed(percentile_sparsity);
  timed(gnn_equivalences);
  timed(metric_oracles);
  timed(incremental_equivalence);

  const auto overfit_start = std::chrono::steady_clock::now();
  OverfitRun overfit = run_overfit();
  {
    Criterion c = overfit_sanity(overfit);
    c.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - overfit_start).count();
    results.push_back(std::move(c));
  }
  timed(ordering_study);
  timed(determinism, overfit);

  int failures = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& c = results[i];
    std::printf("[%s] %zu. %s: %s%s [%.1fs]\n", c.pass ? "PASS" : "FAIL", i + 1, c.name.c_str(),
                c.detail.c_str(), c.advisory && !c.pass ? " (advisory)" : "", c.seconds);
    if (!c.pass || c.advisory)
      for (const auto& line : c.diagnostics) std::printf("%s\n", line.c_str());
    if (!c.pass && !c.advisory) ++failures;
  }
  std::printf("%d of %zu criteria failed\n", failures, results.size());
  return failures == 0 ? 0 : 1;
}
