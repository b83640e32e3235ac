// Forward computation for the five-layer stack (GCN, GraphSAGE, GAT) with
// ReLU, batch normalization, attention export, and the matching hand-derived
// reverse-mode passes over a cached forward trace.
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "medgraph/graph.hpp"

namespace medgraph {

enum class LayerKind { GCN, SAGE, GAT };
enum class Mode { Train, Eval };

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

struct LayerSpec {
  LayerKind kind = LayerKind::GCN;
  int in_dim = 0;
  int out_dim = 0;
  int heads = 4;  // GAT only; multi-head outputs are averaged
  bool batch_norm = true;
  bool relu = true;
};

// GCN, GCN, SAGE, SAGE, GAT; hidden width fixed; the final layer emits
// pre-activation embeddings (no batch norm, no ReLU) for the heads.
std::vector<LayerSpec> hybrid_stack(int in_dim, int hidden, int gat_heads = 4);
// Five layers of one kind, same activation convention; used by ablations.
std::vector<LayerSpec> uniform_stack(LayerKind kind, int in_dim, int hidden, int gat_heads = 4);

// All parameter tensors are MatrixXd (vectors as d x 1) so the tensor visitor
// below can treat them uniformly.
struct GcnParams {
  Eigen::MatrixXd W;  // in x out
  Eigen::MatrixXd b;  // out x 1
};

struct SageParams {
  Eigen::MatrixXd W_self;   // in x out
  Eigen::MatrixXd W_neigh;  // in x out
  Eigen::MatrixXd b;        // out x 1
};

struct GatHeadParams {
  Eigen::MatrixXd W;      // in x out head projection
  Eigen::MatrixXd a_src;  // out x 1, first half of the attention vector
  Eigen::MatrixXd a_dst;  // out x 1, second half
};

struct GatParams {
  std::vector<GatHeadParams> heads;
  Eigen::MatrixXd b;  // out x 1, applied after head averaging
};

struct BatchNormState {
  Eigen::MatrixXd gamma, beta;              // trainable, d x 1
  Eigen::MatrixXd running_mean, running_var;  // updated in train mode only
  bool initialized = false;                 // eval before any train step is an error
};

struct LayerParams {
  LayerSpec spec;
  std::variant<GcnParams, SageParams, GatParams> op;
  BatchNormState bn;  // used only when spec.batch_norm
};

struct ModelParams {
  std::vector<LayerSpec> specs;
  std::vector<LayerParams> layers;

  bool empty() const { return layers.empty(); }
  int input_dim() const { return layers.empty() ? 0 : layers.front().spec.in_dim; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().spec.out_dim; }
};

// Glorot-uniform weights and attention vectors, zero biases, unit batch-norm
// scale; deterministic given seed.
ModelParams init_model(const std::vector<LayerSpec>& specs, std::uint64_t seed);

// Same shapes, all trainable tensors zeroed; running stats untouched at zero.
ModelParams zeros_like(const ModelParams& params);

// Visits every trainable tensor in a fixed order (batch-norm running stats
// are excluded). Backbone of the optimizer, serialization, and FD checking.
using TensorVisitor = std::function<void(const std::string& name, Eigen::MatrixXd& tensor)>;
void for_each_tensor(ModelParams& params, const TensorVisitor& visit);
void for_each_tensor(const ModelParams& params,
                     const std::function<void(const std::string&, const Eigen::MatrixXd&)>& visit);

// Directed attention weight u -> v for every v and u in N(v) ∪ {v}.
struct AttentionEdge {
  int src = 0;
  int dst = 0;
  std::vector<double> per_head;
  double mean = 0.0;
};
using AttentionMap = std::vector<AttentionEdge>;

struct GatHeadTrace {
  Eigen::MatrixXd z;           // N x out, projected inputs
  std::vector<double> alpha;   // softmax weights per directed slot
  std::vector<double> logit;   // pre-LeakyReLU scores per slot
};

// Cache of everything the backward pass needs; filled per layer during a
// traced forward call.
struct LayerTrace {
  Eigen::MatrixXd input;
  Eigen::MatrixXd aggregated;  // GCN: P input, SAGE: M input
  Eigen::MatrixXd linear;      // layer output before batch norm / ReLU
  Eigen::MatrixXd bn_xhat;
  Eigen::VectorXd bn_inv_std;
  Eigen::MatrixXd pre_relu;    // after batch norm (== linear when no BN)
  std::vector<int> att_offsets;  // slot ranges per destination node
  std::vector<int> att_srcs;     // source node per slot; slot 0 of v is v itself
  std::vector<GatHeadTrace> gat_heads;
};

// Single layer forwards. Activation and batch norm are applied by the stack
// driver, not here.
Eigen::MatrixXd gcn_forward(const Eigen::MatrixXd& h, const PatientGraph& g, const GcnParams& p);
Eigen::MatrixXd sage_forward(const Eigen::MatrixXd& h, const PatientGraph& g, const SageParams& p);
std::pair<Eigen::MatrixXd, AttentionMap> gat_forward(const Eigen::MatrixXd& h,
                                                     const PatientGraph& g, const GatParams& p);
Eigen::MatrixXd batch_norm_forward(const Eigen::MatrixXd& h, BatchNormState& state, Mode mode);

struct ForwardResult {
  Eigen::MatrixXd embedding;  // N x output_dim (input passthrough for an empty stack)
  AttentionMap attention;     // from the last GAT layer, empty otherwise
};

// Applies the layer chain in order. Train mode updates batch-norm running
// statistics; traces (when non-null) receive one entry per layer.
ForwardResult model_forward(const Eigen::MatrixXd& x, const PatientGraph& g, ModelParams& params,
                            Mode mode, std::vector<LayerTrace>* traces = nullptr);

// Reverse-mode pass matching a traced train-mode forward. Accumulates into
// grads (shapes from zeros_like) and returns the gradient w.r.t. x.
Eigen::MatrixXd model_backward(const Eigen::MatrixXd& d_embedding, const PatientGraph& g,
                               const ModelParams& params, const std::vector<LayerTrace>& traces,
                               ModelParams& grads);

}  // namespace medgraph
