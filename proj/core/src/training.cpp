#include "medgraph/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "medgraph/common.hpp"
#include "medgraph/metrics.hpp"

namespace medgraph {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_mask(const std::vector<int>& mask, Eigen::Index n, const char* where) {
  if (mask.empty()) throw ValidationError(std::string(where) + ": empty mask");
  for (int i : mask)
    if (i < 0 || i >= n) throw ValidationError(std::string(where) + ": mask index out of range");
}

std::string kind_to_string(LayerKind k) {
  switch (k) {
    case LayerKind::GCN: return "gcn";
    case LayerKind::SAGE: return "sage";
    case LayerKind::GAT: return "gat";
  }
  throw ValidationError("unknown layer kind");
}

LayerKind kind_from_string(const std::string& s) {
  if (s == "gcn") return LayerKind::GCN;
  if (s == "sage") return LayerKind::SAGE;
  if (s == "gat") return LayerKind::GAT;
  throw ValidationError("unknown layer kind '" + s + "'");
}

nlohmann::ordered_json tensor_to_json(const Eigen::MatrixXd& t) {
  nlohmann::ordered_json j;
  j["rows"] = t.rows();
  j["cols"] = t.cols();
  nlohmann::ordered_json data = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < t.size(); ++i) data.push_back(t.data()[i]);
  j["data"] = std::move(data);
  return j;
}

Eigen::MatrixXd tensor_from_json(const nlohmann::ordered_json& j, const std::string& name) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw IoError("checkpoint tensor '" + name + "' has inconsistent shape");
  Eigen::MatrixXd t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = data[static_cast<std::size_t>(i)].get<double>();
  return t;
}

std::vector<double> column_to_vector(const Eigen::MatrixXd& m) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, 0);
  return out;
}

}  // namespace

Heads init_heads(int dim, std::uint64_t seed) {
  if (dim <= 0) throw ValidationError("head dimension must be positive");
  std::mt19937_64 rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(dim + 1));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Heads h;
  h.W_mort = Eigen::MatrixXd(dim, 1);
  for (int i = 0; i < dim; ++i) h.W_mort(i, 0) = dist(rng);
  h.b_mort = Eigen::MatrixXd::Zero(1, 1);
  h.W_sev = Eigen::MatrixXd(dim, 1);
  for (int i = 0; i < dim; ++i) h.W_sev(i, 0) = dist(rng);
  h.b_sev = Eigen::MatrixXd::Zero(1, 1);
  return h;
}

Heads zeros_like(const Heads& heads) {
  Heads z;
  z.W_mort = Eigen::MatrixXd::Zero(heads.W_mort.rows(), 1);
  z.b_mort = Eigen::MatrixXd::Zero(1, 1);
  z.W_sev = Eigen::MatrixXd::Zero(heads.W_sev.rows(), 1);
  z.b_sev = Eigen::MatrixXd::Zero(1, 1);
  return z;
}

void for_each_tensor(Heads& heads, const TensorVisitor& visit) {
  visit("heads.W_mort", heads.W_mort);
  visit("heads.b_mort", heads.b_mort);
  visit("heads.W_sev", heads.W_sev);
  visit("heads.b_sev", heads.b_sev);
}

void for_each_tensor(const Heads& heads,
                     const std::function<void(const std::string&, const Eigen::MatrixXd&)>& visit) {
  visit("heads.W_mort", heads.W_mort);
  visit("heads.b_mort", heads.b_mort);
  visit("heads.W_sev", heads.W_sev);
  visit("heads.b_sev", heads.b_sev);
}

HeadOutputs apply_heads(const Eigen::MatrixXd& embedding, const Heads& heads) {
  if (embedding.cols() != heads.W_mort.rows())
    throw ValidationError("embedding width does not match head dimension");
  HeadOutputs out;
  Eigen::VectorXd z_mort = embedding * heads.W_mort.col(0);
  z_mort.array() += heads.b_mort(0, 0);
  out.mortality.resize(z_mort.size());
  for (Eigen::Index i = 0; i < z_mort.size(); ++i) out.mortality(i) = sigmoid(z_mort(i));
  out.severity = embedding * heads.W_sev.col(0);
  out.severity.array() += heads.b_sev(0, 0);
  return out;
}

void TrainConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0))
    throw ValidationError("loss weights must be non-negative");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("learning rate must be positive and finite");
  if (max_epochs < 1) throw ValidationError("max_epochs must be at least 1");
  if (patience < 0) throw ValidationError("patience must be non-negative");
  if (patience >= max_epochs) throw ValidationError("patience must be smaller than max_epochs");
  if (!(train_fraction > 0.0) || !(val_fraction > 0.0) || !(test_fraction > 0.0))
    throw ValidationError("split fractions must be positive");
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
    throw ValidationError("split fractions must sum to 1");
}

SplitMasks split_dataset(int n, const std::vector<int>& labels, const TrainConfig& cfg) {
  cfg.validate();
  if (n < 10) throw ValidationError("split_dataset: need at least 10 nodes");
  if (static_cast<int>(labels.size()) != n)
    throw ValidationError("split_dataset: label count does not match n");
  std::vector<int> pos, neg;
  for (int i = 0; i < n; ++i) (labels[static_cast<std::size_t>(i)] != 0 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty())
    throw ValidationError("split_dataset: cohort has a single class; use a larger cohort");

  std::mt19937_64 rng(mix_seed(cfg.seed, 0));
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);

  SplitMasks masks;
  const char* names[3] = {"train", "val", "test"};
  for (std::vector<int>* cls : {&pos, &neg}) {
    const long nc = static_cast<long>(cls->size());
    long n_train = std::lround(cfg.train_fraction * static_cast<double>(nc));
    long n_val = std::lround(cfg.val_fraction * static_cast<double>(nc));
    if (n_train + n_val > nc) n_val = nc - n_train;
    const long n_test = nc - n_train - n_val;
    const long counts[3] = {n_train, n_val, n_test};
    std::vector<int>* dests[3] = {&masks.train, &masks.val, &masks.test};
    long at = 0;
    for (int s = 0; s < 3; ++s) {
      if (counts[s] <= 0)
        throw ValidationError(std::string("split_dataset: a class is absent from the ") +
                              names[s] + " split; use a larger cohort");
      for (long k = 0; k < counts[s]; ++k)
        dests[s]->push_back((*cls)[static_cast<std::size_t>(at++)]);
    }
  }
  std::sort(masks.train.begin(), masks.train.end());
  std::sort(masks.val.begin(), masks.val.end());
  std::sort(masks.test.begin(), masks.test.end());
  return masks;
}

double total_loss(const Eigen::VectorXd& mortality, const Eigen::VectorXd& severity,
                  const std::vector<int>& labels, const Eigen::VectorXd& targets,
                  const TrainConfig& cfg, const std::vector<int>& mask) {
  const Eigen::Index n = mortality.size();
  if (severity.size() != n || targets.size() != n || static_cast<Eigen::Index>(labels.size()) != n)
    throw ValidationError("total_loss: prediction/label lengths differ");
  check_mask(mask, n, "total_loss");
  double bce = 0.0, mse = 0.0;
  for (int i : mask) {
    const double p = std::clamp(mortality(i), kBceClampLo, kBceClampHi);
    bce += labels[static_cast<std::size_t>(i)] != 0 ? -std::log(p) : -std::log(1.0 - p);
    const double d = severity(i) - targets(i);
    mse += d * d;
  }
  const double inv = 1.0 / static_cast<double>(mask.size());
  return cfg.lambda1 * (bce * inv) + cfg.lambda2 * (mse * inv);
}

GradientSet backward(const Eigen::MatrixXd& x, const PatientGraph& g, ModelParams& params,
                     const Heads& heads, const std::vector<int>& labels,
                     const Eigen::VectorXd& targets, const TrainConfig& cfg,
                     const std::vector<int>& mask, double* loss_out) {
  const Eigen::Index n = x.rows();
  check_mask(mask, n, "backward");
  std::vector<LayerTrace> traces;
  ForwardResult fwd = model_forward(x, g, params, Mode::Train, &traces);
  HeadOutputs out = apply_heads(fwd.embedding, heads);
  const double loss = total_loss(out.mortality, out.severity, labels, targets, cfg, mask);
  if (!std::isfinite(loss)) throw ValidationError("backward: non-finite loss");
  if (loss_out) *loss_out = loss;

  GradientSet grads;
  grads.model = zeros_like(params);
  grads.heads = zeros_like(heads);

  const double inv = 1.0 / static_cast<double>(mask.size());
  Eigen::VectorXd delta_m = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd delta_s = Eigen::VectorXd::Zero(n);
  for (int i : mask) {
    const double p = out.mortality(i);
    // Inside the clamp band the BCE-through-sigmoid gradient is p - y;
    // a clamped prediction contributes exactly zero.
    if (p > kBceClampLo && p < kBceClampHi) {
      const double y = labels[static_cast<std::size_t>(i)] != 0 ? 1.0 : 0.0;
      delta_m(i) = cfg.lambda1 * (p - y) * inv;
    }
    delta_s(i) = cfg.lambda2 * 2.0 * (out.severity(i) - targets(i)) * inv;
  }

  grads.heads.W_mort.col(0) = fwd.embedding.transpose() * delta_m;
  grads.heads.b_mort(0, 0) = delta_m.sum();
  grads.heads.W_sev.col(0) = fwd.embedding.transpose() * delta_s;
  grads.heads.b_sev(0, 0) = delta_s.sum();

  Eigen::MatrixXd d_emb = delta_m * heads.W_mort.col(0).transpose() +
                          delta_s * heads.W_sev.col(0).transpose();
  model_backward(d_emb, g, params, traces, grads.model);
  return grads;
}

AdamState init_adam(const ModelParams& params, const Heads& heads) {
  AdamState st;
  const auto add = [&](const std::string&, const Eigen::MatrixXd& t) {
    st.m.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
    st.v.push_back(Eigen::MatrixXd::Zero(t.rows(), t.cols()));
  };
  for_each_tensor(params, add);
  for_each_tensor(heads, add);
  return st;
}

void adam_step(ModelParams& params, Heads& heads, const GradientSet& grads, AdamState& state,
               double lr) {
  std::vector<Eigen::MatrixXd*> ps;
  std::vector<const Eigen::MatrixXd*> gs;
  for_each_tensor(params, [&](const std::string&, Eigen::MatrixXd& t) { ps.push_back(&t); });
  for_each_tensor(heads, [&](const std::string&, Eigen::MatrixXd& t) { ps.push_back(&t); });
  for_each_tensor(grads.model,
                  [&](const std::string&, const Eigen::MatrixXd& t) { gs.push_back(&t); });
  for_each_tensor(grads.heads,
                  [&](const std::string&, const Eigen::MatrixXd& t) { gs.push_back(&t); });
  if (ps.size() != gs.size() || ps.size() != state.m.size() || ps.size() != state.v.size())
    throw ValidationError("adam_step: tensor counts do not match");
  ++state.t;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Eigen::MatrixXd& p = *ps[i];
    const Eigen::MatrixXd& grad = *gs[i];
    if (p.rows() != grad.rows() || p.cols() != grad.cols())
      throw ValidationError("adam_step: gradient shape mismatch");
    Eigen::MatrixXd& m = state.m[i];
    Eigen::MatrixXd& v = state.v[i];
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
    v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kAdamEps);
  }
}

TrainResult train(const PatientGraph& graph, const std::vector<LayerSpec>& specs,
                  const std::vector<int>& labels, const Eigen::VectorXd& targets,
                  const TrainConfig& cfg) {
  cfg.validate();
  const int n = graph.num_nodes();
  if (static_cast<int>(labels.size()) != n)
    throw ValidationError("train: label count does not match graph");
  if (targets.size() != n) throw ValidationError("train: target count does not match graph");
  const Eigen::MatrixXd& x = graph.features;
  if (!specs.empty() && specs.front().in_dim != x.cols())
    throw ValidationError("train: model input width does not match features");

  TrainResult result;
  result.masks = split_dataset(n, labels, cfg);
  ModelParams params = init_model(specs, mix_seed(cfg.seed, 1));
  const int emb_dim = specs.empty() ? static_cast<int>(x.cols()) : specs.back().out_dim;
  Heads heads = init_heads(emb_dim, mix_seed(cfg.seed, 2));
  AdamState adam = init_adam(params, heads);

  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;
  ModelParams best_params = params;
  Heads best_heads = heads;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    try {
      GradientSet grads =
          backward(x, graph, params, heads, labels, targets, cfg, result.masks.train, nullptr);
      adam_step(params, heads, grads, adam, cfg.learning_rate);

      ForwardResult fwd = model_forward(x, graph, params, Mode::Eval);
      HeadOutputs out = apply_heads(fwd.embedding, heads);
      EpochStats st;
      st.epoch = epoch;
      st.train_loss = total_loss(out.mortality, out.severity, labels, targets, cfg, result.masks.train);
      st.val_loss = total_loss(out.mortality, out.severity, labels, targets, cfg, result.masks.val);
      st.test_loss = total_loss(out.mortality, out.severity, labels, targets, cfg, result.masks.test);
      if (!std::isfinite(st.train_loss) || !std::isfinite(st.val_loss) ||
          !std::isfinite(st.test_loss))
        throw ValidationError("non-finite loss");
      std::vector<double> val_scores;
      std::vector<int> val_labels;
      val_scores.reserve(result.masks.val.size());
      val_labels.reserve(result.masks.val.size());
      for (int i : result.masks.val) {
        val_scores.push_back(out.mortality(i));
        val_labels.push_back(labels[static_cast<std::size_t>(i)]);
      }
      st.val_auc = auc_roc(val_scores, val_labels);
      result.history.push_back(st);

      if (st.val_loss < best_val) {
        best_val = st.val_loss;
        result.best_epoch = epoch;
        best_params = params;
        best_heads = heads;
        stale = 0;
      } else {
        ++stale;
        if (stale > cfg.patience) break;
      }
    } catch (const ValidationError& e) {
      if (std::string(e.what()).find("non-finite") != std::string::npos)
        throw ValidationError("training diverged at epoch " + std::to_string(epoch) + ": " +
                              e.what());
      throw;
    }
  }

  result.params = std::move(best_params);
  result.heads = std::move(best_heads);
  result.best_val_loss = best_val;
  return result;
}

std::uint64_t params_hash(const ModelParams& params, const Heads& heads) {
  Fnv1a h;
  const auto eat = [&h](const std::string& name, const Eigen::MatrixXd& t) {
    h.update(name);
    const std::int64_t r = t.rows(), c = t.cols();
    h.update(&r, sizeof(r));
    h.update(&c, sizeof(c));
    h.update(t.data(), sizeof(double) * static_cast<std::size_t>(t.size()));
  };
  for_each_tensor(params, eat);
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const LayerParams& layer = params.layers[li];
    if (!layer.spec.batch_norm) continue;
    eat("layer" + std::to_string(li) + ".bn.running_mean", layer.bn.running_mean);
    eat("layer" + std::to_string(li) + ".bn.running_var", layer.bn.running_var);
    const unsigned char init = layer.bn.initialized ? 1 : 0;
    h.update(&init, 1);
  }
  for_each_tensor(heads, eat);
  return h.digest();
}

void write_history_csv(const std::vector<EpochStats>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,train_loss,val_loss,test_loss,val_auc\n";
  for (const EpochStats& st : history)
    out << st.epoch << ',' << format_double(st.train_loss) << ',' << format_double(st.val_loss)
        << ',' << format_double(st.test_loss) << ',' << format_double(st.val_auc) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["format"] = "medgraph-checkpoint";
  j["version"] = kVersion;
  j["schema_hash"] = hex64(ckpt.schema_hash);
  j["best_epoch"] = ckpt.best_epoch;
  j["config"] = {{"lambda1", ckpt.cfg.lambda1},
                 {"lambda2", ckpt.cfg.lambda2},
                 {"learning_rate", ckpt.cfg.learning_rate},
                 {"max_epochs", ckpt.cfg.max_epochs},
                 {"patience", ckpt.cfg.patience},
                 {"seed", ckpt.cfg.seed},
                 {"train_fraction", ckpt.cfg.train_fraction},
                 {"val_fraction", ckpt.cfg.val_fraction},
                 {"test_fraction", ckpt.cfg.test_fraction}};
  nlohmann::ordered_json specs = nlohmann::ordered_json::array();
  for (const LayerSpec& s : ckpt.params.specs)
    specs.push_back({{"kind", kind_to_string(s.kind)},
                     {"in_dim", s.in_dim},
                     {"out_dim", s.out_dim},
                     {"heads", s.heads},
                     {"batch_norm", s.batch_norm},
                     {"relu", s.relu}});
  j["specs"] = std::move(specs);
  nlohmann::ordered_json tensors;
  const auto dump_tensor = [&tensors](const std::string& name, const Eigen::MatrixXd& t) {
    tensors[name] = tensor_to_json(t);
  };
  for_each_tensor(ckpt.params, dump_tensor);
  for_each_tensor(ckpt.heads, dump_tensor);
  j["tensors"] = std::move(tensors);
  nlohmann::ordered_json bn = nlohmann::ordered_json::array();
  for (const LayerParams& layer : ckpt.params.layers) {
    if (!layer.spec.batch_norm) {
      bn.push_back(nullptr);
      continue;
    }
    bn.push_back({{"running_mean", column_to_vector(layer.bn.running_mean)},
                  {"running_var", column_to_vector(layer.bn.running_var)},
                  {"initialized", layer.bn.initialized}});
  }
  j["batch_norm"] = std::move(bn);
  j["params_hash"] = hex64(params_hash(ckpt.params, ckpt.heads));

  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse checkpoint " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "medgraph-checkpoint")
      throw IoError("not a checkpoint file: " + path.string());
    Checkpoint ckpt;
    ckpt.schema_hash = std::stoull(j.at("schema_hash").get<std::string>(), nullptr, 16);
    ckpt.best_epoch = j.at("best_epoch").get<int>();
    const auto& cj = j.at("config");
    ckpt.cfg.lambda1 = cj.at("lambda1").get<double>();
    ckpt.cfg.lambda2 = cj.at("lambda2").get<double>();
    ckpt.cfg.learning_rate = cj.at("learning_rate").get<double>();
    ckpt.cfg.max_epochs = cj.at("max_epochs").get<int>();
    ckpt.cfg.patience = cj.at("patience").get<int>();
    ckpt.cfg.seed = cj.at("seed").get<std::uint64_t>();
    ckpt.cfg.train_fraction = cj.at("train_fraction").get<double>();
    ckpt.cfg.val_fraction = cj.at("val_fraction").get<double>();
    ckpt.cfg.test_fraction = cj.at("test_fraction").get<double>();
    ckpt.cfg.validate();

    std::vector<LayerSpec> specs;
    for (const auto& sj : j.at("specs")) {
      LayerSpec s;
      s.kind = kind_from_string(sj.at("kind").get<std::string>());
      s.in_dim = sj.at("in_dim").get<int>();
      s.out_dim = sj.at("out_dim").get<int>();
      s.heads = sj.at("heads").get<int>();
      s.batch_norm = sj.at("batch_norm").get<bool>();
      s.relu = sj.at("relu").get<bool>();
      specs.push_back(s);
    }
    ckpt.params = init_model(specs, 0);

    const auto& tensors = j.at("tensors");
    const auto fill = [&tensors](const std::string& name, Eigen::MatrixXd& t) {
      if (!tensors.contains(name)) throw IoError("checkpoint is missing tensor '" + name + "'");
      Eigen::MatrixXd loaded = tensor_from_json(tensors.at(name), name);
      if (loaded.rows() != t.rows() || loaded.cols() != t.cols())
        throw IoError("checkpoint tensor '" + name + "' has unexpected shape");
      t = std::move(loaded);
    };
    for_each_tensor(ckpt.params, fill);

    const auto& bn = j.at("batch_norm");
    if (bn.size() != ckpt.params.layers.size())
      throw IoError("checkpoint batch_norm entries do not match layer count");
    for (std::size_t li = 0; li < ckpt.params.layers.size(); ++li) {
      LayerParams& layer = ckpt.params.layers[li];
      if (!layer.spec.batch_norm) continue;
      const auto& bj = bn[li];
      if (bj.is_null()) throw IoError("checkpoint is missing batch_norm state for a layer");
      const auto rm = bj.at("running_mean").get<std::vector<double>>();
      const auto rv = bj.at("running_var").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(rm.size()) != layer.bn.running_mean.rows() ||
          static_cast<Eigen::Index>(rv.size()) != layer.bn.running_var.rows())
        throw IoError("checkpoint batch_norm state has unexpected shape");
      for (std::size_t i = 0; i < rm.size(); ++i) {
        layer.bn.running_mean(static_cast<Eigen::Index>(i), 0) = rm[i];
        layer.bn.running_var(static_cast<Eigen::Index>(i), 0) = rv[i];
      }
      layer.bn.initialized = bj.at("initialized").get<bool>();
    }

    const int head_dim = static_cast<int>(tensors.at("heads.W_mort").at("rows").get<Eigen::Index>());
    ckpt.heads = init_heads(head_dim, 0);
    for_each_tensor(ckpt.heads, fill);

    const std::string stored_hash = j.at("params_hash").get<std::string>();
    if (hex64(params_hash(ckpt.params, ckpt.heads)) != stored_hash)
      throw ValidationError("checkpoint parameter hash mismatch (file corrupted?)");
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace medgraph
