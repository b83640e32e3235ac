// Prediction heads, masked multi-task loss, exact reverse-mode gradients,
// Adam, stratified splits, the full-batch training loop with early stopping,
// and checkpoint serialization.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "medgraph/encoder.hpp"
#include "medgraph/gnn.hpp"

namespace medgraph {

inline constexpr double kBceClampLo = 1e-7;
inline constexpr double kBceClampHi = 1.0 - 1e-7;

// Two linear maps on the final embedding: a sigmoid unit for mortality
// probability and a raw linear unit for the continuous severity score.
struct Heads {
  Eigen::MatrixXd W_mort;  // d x 1
  Eigen::MatrixXd b_mort;  // 1 x 1
  Eigen::MatrixXd W_sev;   // d x 1
  Eigen::MatrixXd b_sev;   // 1 x 1
};

Heads init_heads(int dim, std::uint64_t seed);
Heads zeros_like(const Heads& heads);
void for_each_tensor(Heads& heads, const TensorVisitor& visit);
void for_each_tensor(const Heads& heads,
                     const std::function<void(const std::string&, const Eigen::MatrixXd&)>& visit);

struct HeadOutputs {
  Eigen::VectorXd mortality;  // sigmoid output per node
  Eigen::VectorXd severity;   // unbounded linear output per node
};
HeadOutputs apply_heads(const Eigen::MatrixXd& embedding, const Heads& heads);

struct TrainConfig {
  double lambda1 = 1.0;  // mortality BCE weight
  double lambda2 = 0.5;  // severity MSE weight
  double learning_rate = 1e-3;
  int max_epochs = 300;
  int patience = 20;
  std::uint64_t seed = 0;
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  double test_fraction = 0.15;

  void validate() const;
};

struct SplitMasks {
  std::vector<int> train, val, test;  // node indices, each list sorted ascending
};

// Deterministic stratified split: per-class shuffles, rounded per-class
// allocation. Throws when any split would miss a class entirely.
SplitMasks split_dataset(int n, const std::vector<int>& labels, const TrainConfig& cfg);

// lambda1 * BCE(mortality, labels) + lambda2 * MSE(severity, targets), both
// averaged over masked nodes only. Mortality inputs are clamped to
// [1e-7, 1 - 1e-7] before the logs.
double total_loss(const Eigen::VectorXd& mortality, const Eigen::VectorXd& severity,
                  const std::vector<int>& labels, const Eigen::VectorXd& targets,
                  const TrainConfig& cfg, const std::vector<int>& mask);

struct GradientSet {
  ModelParams model;
  Heads heads;
};

// Traced train-mode forward plus the full reverse pass; returns exact
// gradients of total_loss for every trainable tensor. Loss value is written
// to loss_out when provided.
GradientSet backward(const Eigen::MatrixXd& x, const PatientGraph& g, ModelParams& params,
                     const Heads& heads, const std::vector<int>& labels,
                     const Eigen::VectorXd& targets, const TrainConfig& cfg,
                     const std::vector<int>& mask, double* loss_out = nullptr);

// First and second moment estimates per trainable tensor, in visitation
// order (model tensors first, then heads).
struct AdamState {
  std::vector<Eigen::MatrixXd> m, v;
  long t = 0;
};

AdamState init_adam(const ModelParams& params, const Heads& heads);
void adam_step(ModelParams& params, Heads& heads, const GradientSet& grads, AdamState& state,
               double lr);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double test_loss = 0.0;
  double val_auc = 0.0;
};

struct TrainResult {
  ModelParams params;  // parameters at the best validation epoch
  Heads heads;
  SplitMasks masks;
  std::vector<EpochStats> history;
  int best_epoch = 0;          // 1-based epoch index of the restored parameters
  double best_val_loss = 0.0;
};

// Full-batch transductive training on graph.features. Early-stops when the
// validation loss has not improved for more than cfg.patience epochs and
// restores the best snapshot. Throws on non-finite loss, naming the epoch.
TrainResult train(const PatientGraph& graph, const std::vector<LayerSpec>& specs,
                  const std::vector<int>& labels, const Eigen::VectorXd& targets,
                  const TrainConfig& cfg);

// FNV-1a over every trainable tensor, batch-norm running statistics, and
// head parameters; stable across runs of the same binary.
std::uint64_t params_hash(const ModelParams& params, const Heads& heads);

void write_history_csv(const std::vector<EpochStats>& history, const std::filesystem::path& path);

struct Checkpoint {
  ModelParams params;
  Heads heads;
  TrainConfig cfg;
  std::uint64_t schema_hash = 0;
  int best_epoch = 0;
};

// Versioned JSON checkpoint embedding the encoder schema hash and the train
// config; doubles round-trip exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace medgraph
