// End-to-end experiment orchestration: config files, cohort preparation,
// training runs with on-disk artifacts, checkpoint evaluation, and the
// graph/architecture ablation studies.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medgraph/ehr.hpp"
#include "medgraph/encoder.hpp"
#include "medgraph/graph.hpp"
#include "medgraph/metrics.hpp"
#include "medgraph/training.hpp"

namespace medgraph {

// Exactly one of generate/csv must be set.
struct CohortSource {
  std::optional<CohortSpec> generate;
  std::optional<std::filesystem::path> csv;

  void validate() const;
};

struct ModelChoice {
  std::string variant = "hybrid";  // hybrid | gcn | sage | gat | mlp
  int hidden = 64;
  int gat_heads = 4;

  void validate() const;
};

struct AblationConfig {
  int seeds = 5;
};

struct ExperimentConfig {
  CohortSource cohort;
  int encoder_top_k = 0;  // 0: derive the count that lands on the full width
  SimilarityParams similarity;
  ModelChoice model;
  TrainConfig train;
  AblationConfig ablation;
  std::filesystem::path out_dir = "out";

  void validate() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::uint64_t hash() const;
};

// Layer list for a variant name; "mlp" yields an empty list (heads directly
// on encoded features).
std::vector<LayerSpec> make_layer_specs(const std::string& variant, int in_dim, int hidden,
                                        int gat_heads);

// Graph value with zero edges, used by the no-graph baseline.
PatientGraph edgeless_graph(const Eigen::MatrixXd& features, const std::vector<std::string>& ids);

struct ExperimentSummary {
  std::filesystem::path out_dir;
  int n_nodes = 0;
  long n_edges = 0;
  double tau = 0.0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double train_auc = 0.0;
  MetricsReport test_metrics;
  std::uint64_t params_hash = 0;
  std::uint64_t config_hash = 0;
};

// Full pipeline: cohort, schema, graph, training, evaluation. Writes
// cohort/schema/graph/checkpoint/history/metrics/roc/attention artifacts and
// a manifest into cfg.out_dir.
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

// Re-evaluates a saved checkpoint against the cohort described by cfg,
// using the split stored in the checkpoint config. Writes metrics, ROC, and
// attention artifacts.
ExperimentSummary evaluate_checkpoint(const ExperimentConfig& cfg,
                                      const std::filesystem::path& checkpoint_path);

struct AblationRow {
  std::string study;    // "graph" or "architecture"
  std::string variant;  // mlp | cosine | jaccard | hybrid | gcn | sage | gat
  int seeds = 0;
  double auc_mean = 0.0;
  double auc_std = 0.0;
  double f1_mean = 0.0;
  double f1_std = 0.0;
  std::string config_hash;  // per-cell hash, seed-independent
};

// Two studies over cfg.ablation.seeds seeds each: graph construction
// (mlp / cosine-only / jaccard-only / hybrid) and architecture
// (gcn / sage / gat / hybrid stacks). Writes ablation.csv and a manifest.
std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg);

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& path);

// manifest.json for a run directory: library version, config hash, the full
// config, input-file hashes, and a hash per named output file (which must
// already exist in dir). Deliberately timestamp-free so reruns are
// byte-identical.
void write_run_manifest(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                        const std::map<std::string, std::string>& inputs,
                        const std::vector<std::string>& output_names);

}  // namespace medgraph
