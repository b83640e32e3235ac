#include "medgraph/gnn.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>

#include "medgraph/common.hpp"

namespace medgraph {

namespace {

void check_finite(const Eigen::MatrixXd& h, const char* where) {
  if (!h.allFinite()) throw ValidationError(std::string(where) + ": non-finite values");
}

void check_rows(const Eigen::MatrixXd& h, const PatientGraph& g, const char* where) {
  if (h.rows() != g.num_nodes())
    throw ValidationError(std::string(where) + ": feature rows do not match graph nodes");
}

// P X with P = D^{-1/2} (A + I) D^{-1/2}, A similarity-weighted and
// D_v = 1 + sum of incident weights. P is symmetric, so the backward pass
// reuses this routine unchanged.
Eigen::MatrixXd apply_sym_norm(const Eigen::MatrixXd& x, const PatientGraph& g) {
  const int n = g.num_nodes();
  Eigen::VectorXd isd(n);
  for (int v = 0; v < n; ++v) {
    double d = 1.0;
    for (const auto& nb : g.neighbors[static_cast<std::size_t>(v)]) d += nb.second;
    isd(v) = 1.0 / std::sqrt(d);
  }
  Eigen::MatrixXd scaled = isd.asDiagonal() * x;
  Eigen::MatrixXd out = scaled;
  for (int v = 0; v < n; ++v)
    for (const auto& nb : g.neighbors[static_cast<std::size_t>(v)])
      out.row(v) += nb.second * scaled.row(nb.first);
  return isd.asDiagonal() * out;
}

// Row v of M X: unweighted mean over N(v), zero for isolated nodes.
Eigen::MatrixXd apply_mean_adj(const Eigen::MatrixXd& x, const PatientGraph& g) {
  const int n = g.num_nodes();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, x.cols());
  for (int v = 0; v < n; ++v) {
    const auto& nbr = g.neighbors[static_cast<std::size_t>(v)];
    if (nbr.empty()) continue;
    for (const auto& nb : nbr) out.row(v) += x.row(nb.first);
    out.row(v) /= static_cast<double>(nbr.size());
  }
  return out;
}

// M^T X, needed when back-propagating through the neighbor mean.
Eigen::MatrixXd apply_mean_adj_transpose(const Eigen::MatrixXd& x, const PatientGraph& g) {
  const int n = g.num_nodes();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, x.cols());
  for (int v = 0; v < n; ++v) {
    const auto& nbr = g.neighbors[static_cast<std::size_t>(v)];
    if (nbr.empty()) continue;
    const double inv = 1.0 / static_cast<double>(nbr.size());
    for (const auto& nb : nbr) out.row(nb.first) += inv * x.row(v);
  }
  return out;
}

// Directed attention slots: for each destination v the slot range
// [offsets[v], offsets[v+1]) lists the self slot first, then neighbors in
// index order.
void attention_slots(const PatientGraph& g, std::vector<int>& offsets, std::vector<int>& srcs) {
  const int n = g.num_nodes();
  offsets.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int v = 0; v < n; ++v)
    offsets[static_cast<std::size_t>(v) + 1] =
        offsets[static_cast<std::size_t>(v)] + 1 + g.degree(v);
  srcs.clear();
  srcs.reserve(static_cast<std::size_t>(offsets.back()));
  for (int v = 0; v < n; ++v) {
    srcs.push_back(v);
    for (const auto& nb : g.neighbors[static_cast<std::size_t>(v)]) srcs.push_back(nb.first);
  }
}

std::pair<Eigen::MatrixXd, AttentionMap> gat_forward_impl(const Eigen::MatrixXd& h,
                                                          const PatientGraph& g,
                                                          const GatParams& p,
                                                          const std::vector<int>& offsets,
                                                          const std::vector<int>& srcs,
                                                          std::vector<GatHeadTrace>* head_traces) {
  const int n = g.num_nodes();
  const int k = static_cast<int>(p.heads.size());
  if (k == 0) throw ValidationError("gat layer has no heads");
  const int out_dim = static_cast<int>(p.heads.front().W.cols());
  if (head_traces) head_traces->resize(static_cast<std::size_t>(k));

  AttentionMap att(srcs.size());
  for (int v = 0; v < n; ++v)
    for (int s = offsets[static_cast<std::size_t>(v)]; s < offsets[static_cast<std::size_t>(v) + 1]; ++s) {
      att[static_cast<std::size_t>(s)].src = srcs[static_cast<std::size_t>(s)];
      att[static_cast<std::size_t>(s)].dst = v;
      att[static_cast<std::size_t>(s)].per_head.resize(static_cast<std::size_t>(k));
    }

  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(n, out_dim);
  for (int head = 0; head < k; ++head) {
    const GatHeadParams& hp = p.heads[static_cast<std::size_t>(head)];
    if (hp.W.rows() != h.cols()) throw ValidationError("gat head weight width mismatch");
    Eigen::MatrixXd z = h * hp.W;
    Eigen::VectorXd src_score = z * hp.a_src.col(0);
    Eigen::VectorXd dst_score = z * hp.a_dst.col(0);

    std::vector<double> alpha(srcs.size(), 0.0);
    std::vector<double> logit(srcs.size(), 0.0);
    for (int v = 0; v < n; ++v) {
      const int lo = offsets[static_cast<std::size_t>(v)];
      const int hi = offsets[static_cast<std::size_t>(v) + 1];
      double mx = -std::numeric_limits<double>::infinity();
      for (int s = lo; s < hi; ++s) {
        const double raw = src_score(srcs[static_cast<std::size_t>(s)]) + dst_score(v);
        if (!std::isfinite(raw)) throw ValidationError("gat attention logits are non-finite");
        logit[static_cast<std::size_t>(s)] = raw;
        const double act = raw > 0.0 ? raw : kLeakySlope * raw;
        if (act > mx) mx = act;
      }
      double denom = 0.0;
      for (int s = lo; s < hi; ++s) {
        const double raw = logit[static_cast<std::size_t>(s)];
        const double act = raw > 0.0 ? raw : kLeakySlope * raw;
        const double e = std::exp(act - mx);
        alpha[static_cast<std::size_t>(s)] = e;
        denom += e;
      }
      for (int s = lo; s < hi; ++s) {
        alpha[static_cast<std::size_t>(s)] /= denom;
        const double a = alpha[static_cast<std::size_t>(s)];
        total.row(v) += a * z.row(srcs[static_cast<std::size_t>(s)]);
        att[static_cast<std::size_t>(s)].per_head[static_cast<std::size_t>(head)] = a;
      }
    }
    if (head_traces) {
      GatHeadTrace& ht = (*head_traces)[static_cast<std::size_t>(head)];
      ht.z = std::move(z);
      ht.alpha = std::move(alpha);
      ht.logit = std::move(logit);
    }
  }
  total /= static_cast<double>(k);
  total.rowwise() += p.b.col(0).transpose();
  for (auto& entry : att) {
    double sum = 0.0;
    for (double a : entry.per_head) sum += a;
    entry.mean = sum / static_cast<double>(k);
  }
  return {std::move(total), std::move(att)};
}

Eigen::MatrixXd batch_norm_impl(const Eigen::MatrixXd& h, BatchNormState& state, Mode mode,
                                Eigen::MatrixXd* xhat_out, Eigen::VectorXd* inv_std_out) {
  const Eigen::Index d = h.cols();
  if (state.gamma.rows() != d) throw ValidationError("batch norm width mismatch");
  Eigen::VectorXd mu;
  Eigen::VectorXd inv_std;
  if (mode == Mode::Train) {
    if (h.rows() < 2) throw ValidationError("batch norm needs at least two rows in train mode");
    mu = h.colwise().mean().transpose();
    Eigen::MatrixXd centered = h.rowwise() - mu.transpose();
    Eigen::VectorXd var = centered.array().square().colwise().mean().transpose();
    inv_std = ((var.array() + kBatchNormEps).sqrt().inverse()).matrix();
    Eigen::MatrixXd xhat = centered * inv_std.asDiagonal();
    state.running_mean.col(0) =
        (1.0 - kBatchNormMomentum) * state.running_mean.col(0) + kBatchNormMomentum * mu;
    state.running_var.col(0) =
        (1.0 - kBatchNormMomentum) * state.running_var.col(0) + kBatchNormMomentum * var;
    state.initialized = true;
    Eigen::MatrixXd out = xhat * state.gamma.col(0).asDiagonal();
    out.rowwise() += state.beta.col(0).transpose();
    if (inv_std_out) *inv_std_out = std::move(inv_std);
    if (xhat_out) *xhat_out = std::move(xhat);
    return out;
  }
  if (!state.initialized)
    throw ValidationError("batch norm evaluated before any training step");
  mu = state.running_mean.col(0);
  inv_std = ((state.running_var.col(0).array() + kBatchNormEps).sqrt().inverse()).matrix();
  Eigen::MatrixXd xhat = (h.rowwise() - mu.transpose()) * inv_std.asDiagonal();
  Eigen::MatrixXd out = xhat * state.gamma.col(0).asDiagonal();
  out.rowwise() += state.beta.col(0).transpose();
  if (inv_std_out) *inv_std_out = std::move(inv_std);
  if (xhat_out) *xhat_out = std::move(xhat);
  return out;
}

// dL/dx for train-mode batch normalization, accumulating gamma/beta grads.
Eigen::MatrixXd batch_norm_backward(const Eigen::MatrixXd& dy, const BatchNormState& state,
                                    const LayerTrace& tr, BatchNormState& gstate) {
  gstate.beta.col(0) += dy.colwise().sum().transpose();
  gstate.gamma.col(0) += dy.cwiseProduct(tr.bn_xhat).colwise().sum().transpose();
  Eigen::MatrixXd dxhat = dy * state.gamma.col(0).asDiagonal();
  Eigen::RowVectorXd mean_dxhat = dxhat.colwise().mean();
  Eigen::RowVectorXd mean_dxhat_xhat = dxhat.cwiseProduct(tr.bn_xhat).colwise().mean();
  Eigen::MatrixXd inner = dxhat;
  inner.rowwise() -= mean_dxhat;
  inner -= tr.bn_xhat * mean_dxhat_xhat.asDiagonal();
  return inner * tr.bn_inv_std.asDiagonal();
}

Eigen::MatrixXd gat_backward(const Eigen::MatrixXd& delta, const PatientGraph& g,
                             const GatParams& p, const LayerTrace& tr, GatParams& gp) {
  const int n = g.num_nodes();
  const int k = static_cast<int>(p.heads.size());
  const auto& offsets = tr.att_offsets;
  const auto& srcs = tr.att_srcs;
  gp.b.col(0) += delta.colwise().sum().transpose();
  Eigen::MatrixXd d_head = delta / static_cast<double>(k);
  Eigen::MatrixXd d_input = Eigen::MatrixXd::Zero(tr.input.rows(), tr.input.cols());
  std::vector<double> dalpha;
  for (int head = 0; head < k; ++head) {
    const GatHeadParams& hp = p.heads[static_cast<std::size_t>(head)];
    GatHeadParams& ghp = gp.heads[static_cast<std::size_t>(head)];
    const GatHeadTrace& ht = tr.gat_heads[static_cast<std::size_t>(head)];
    Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(ht.z.rows(), ht.z.cols());
    Eigen::VectorXd ds = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd dd = Eigen::VectorXd::Zero(n);
    for (int v = 0; v < n; ++v) {
      const int lo = offsets[static_cast<std::size_t>(v)];
      const int hi = offsets[static_cast<std::size_t>(v) + 1];
      dalpha.assign(static_cast<std::size_t>(hi - lo), 0.0);
      double dot = 0.0;
      for (int s = lo; s < hi; ++s) {
        const int u = srcs[static_cast<std::size_t>(s)];
        const double da = d_head.row(v).dot(ht.z.row(u));
        dalpha[static_cast<std::size_t>(s - lo)] = da;
        dz.row(u) += ht.alpha[static_cast<std::size_t>(s)] * d_head.row(v);
        dot += ht.alpha[static_cast<std::size_t>(s)] * da;
      }
      for (int s = lo; s < hi; ++s) {
        const int u = srcs[static_cast<std::size_t>(s)];
        const double dlogit =
            ht.alpha[static_cast<std::size_t>(s)] * (dalpha[static_cast<std::size_t>(s - lo)] - dot);
        const double draw = dlogit * (ht.logit[static_cast<std::size_t>(s)] > 0.0 ? 1.0 : kLeakySlope);
        ds(u) += draw;
        dd(v) += draw;
      }
    }
    ghp.a_src.col(0) += ht.z.transpose() * ds;
    ghp.a_dst.col(0) += ht.z.transpose() * dd;
    dz += ds * hp.a_src.col(0).transpose();
    dz += dd * hp.a_dst.col(0).transpose();
    ghp.W += tr.input.transpose() * dz;
    d_input += dz * hp.W.transpose();
  }
  return d_input;
}

Eigen::MatrixXd glorot(int rows, int cols, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

LayerSpec make_spec(LayerKind kind, int in_dim, int out_dim, int heads, bool last) {
  LayerSpec s;
  s.kind = kind;
  s.in_dim = in_dim;
  s.out_dim = out_dim;
  s.heads = heads;
  s.batch_norm = !last;
  s.relu = !last;
  return s;
}

template <typename Params, typename Fn>
void visit_tensors(Params& params, Fn&& fn) {
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    auto& layer = params.layers[li];
    const std::string prefix = "layer" + std::to_string(li) + ".";
    switch (layer.spec.kind) {
      case LayerKind::GCN: {
        auto& p = std::get<GcnParams>(layer.op);
        fn(prefix + "W", p.W);
        fn(prefix + "b", p.b);
        break;
      }
      case LayerKind::SAGE: {
        auto& p = std::get<SageParams>(layer.op);
        fn(prefix + "W_self", p.W_self);
        fn(prefix + "W_neigh", p.W_neigh);
        fn(prefix + "b", p.b);
        break;
      }
      case LayerKind::GAT: {
        auto& p = std::get<GatParams>(layer.op);
        for (std::size_t h = 0; h < p.heads.size(); ++h) {
          const std::string hp = prefix + "head" + std::to_string(h) + ".";
          fn(hp + "W", p.heads[h].W);
          fn(hp + "a_src", p.heads[h].a_src);
          fn(hp + "a_dst", p.heads[h].a_dst);
        }
        fn(prefix + "b", p.b);
        break;
      }
    }
    if (layer.spec.batch_norm) {
      fn(prefix + "bn.gamma", layer.bn.gamma);
      fn(prefix + "bn.beta", layer.bn.beta);
    }
  }
}

}  // namespace

std::vector<LayerSpec> hybrid_stack(int in_dim, int hidden, int gat_heads) {
  return {make_spec(LayerKind::GCN, in_dim, hidden, gat_heads, false),
          make_spec(LayerKind::GCN, hidden, hidden, gat_heads, false),
          make_spec(LayerKind::SAGE, hidden, hidden, gat_heads, false),
          make_spec(LayerKind::SAGE, hidden, hidden, gat_heads, false),
          make_spec(LayerKind::GAT, hidden, hidden, gat_heads, true)};
}

std::vector<LayerSpec> uniform_stack(LayerKind kind, int in_dim, int hidden, int gat_heads) {
  std::vector<LayerSpec> specs;
  for (int i = 0; i < 5; ++i)
    specs.push_back(make_spec(kind, i == 0 ? in_dim : hidden, hidden, gat_heads, i == 4));
  return specs;
}

ModelParams init_model(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams params;
  params.specs = specs;
  for (std::size_t li = 0; li < specs.size(); ++li) {
    const LayerSpec& spec = specs[li];
    if (spec.in_dim <= 0 || spec.out_dim <= 0)
      throw ValidationError("layer " + std::to_string(li) + " has non-positive dimensions");
    if (li > 0 && spec.in_dim != specs[li - 1].out_dim)
      throw ValidationError("layer " + std::to_string(li) + " input width does not chain");
    LayerParams layer;
    layer.spec = spec;
    switch (spec.kind) {
      case LayerKind::GCN: {
        GcnParams p;
        p.W = glorot(spec.in_dim, spec.out_dim, spec.in_dim, spec.out_dim, rng);
        p.b = Eigen::MatrixXd::Zero(spec.out_dim, 1);
        layer.op = std::move(p);
        break;
      }
      case LayerKind::SAGE: {
        SageParams p;
        p.W_self = glorot(spec.in_dim, spec.out_dim, spec.in_dim, spec.out_dim, rng);
        p.W_neigh = glorot(spec.in_dim, spec.out_dim, spec.in_dim, spec.out_dim, rng);
        p.b = Eigen::MatrixXd::Zero(spec.out_dim, 1);
        layer.op = std::move(p);
        break;
      }
      case LayerKind::GAT: {
        if (spec.heads < 1) throw ValidationError("gat layer needs at least one head");
        GatParams p;
        for (int h = 0; h < spec.heads; ++h) {
          GatHeadParams hp;
          hp.W = glorot(spec.in_dim, spec.out_dim, spec.in_dim, spec.out_dim, rng);
          hp.a_src = glorot(spec.out_dim, 1, spec.out_dim, 1, rng);
          hp.a_dst = glorot(spec.out_dim, 1, spec.out_dim, 1, rng);
          p.heads.push_back(std::move(hp));
        }
        p.b = Eigen::MatrixXd::Zero(spec.out_dim, 1);
        layer.op = std::move(p);
        break;
      }
    }
    if (spec.batch_norm) {
      layer.bn.gamma = Eigen::MatrixXd::Ones(spec.out_dim, 1);
      layer.bn.beta = Eigen::MatrixXd::Zero(spec.out_dim, 1);
      layer.bn.running_mean = Eigen::MatrixXd::Zero(spec.out_dim, 1);
      layer.bn.running_var = Eigen::MatrixXd::Ones(spec.out_dim, 1);
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams out;
  out.specs = params.specs;
  for (const LayerParams& layer : params.layers) {
    LayerParams zl;
    zl.spec = layer.spec;
    switch (layer.spec.kind) {
      case LayerKind::GCN: {
        const auto& p = std::get<GcnParams>(layer.op);
        zl.op = GcnParams{Eigen::MatrixXd::Zero(p.W.rows(), p.W.cols()),
                          Eigen::MatrixXd::Zero(p.b.rows(), 1)};
        break;
      }
      case LayerKind::SAGE: {
        const auto& p = std::get<SageParams>(layer.op);
        zl.op = SageParams{Eigen::MatrixXd::Zero(p.W_self.rows(), p.W_self.cols()),
                           Eigen::MatrixXd::Zero(p.W_neigh.rows(), p.W_neigh.cols()),
                           Eigen::MatrixXd::Zero(p.b.rows(), 1)};
        break;
      }
      case LayerKind::GAT: {
        const auto& p = std::get<GatParams>(layer.op);
        GatParams zp;
        for (const auto& hp : p.heads)
          zp.heads.push_back(GatHeadParams{Eigen::MatrixXd::Zero(hp.W.rows(), hp.W.cols()),
                                           Eigen::MatrixXd::Zero(hp.a_src.rows(), 1),
                                           Eigen::MatrixXd::Zero(hp.a_dst.rows(), 1)});
        zp.b = Eigen::MatrixXd::Zero(p.b.rows(), 1);
        zl.op = std::move(zp);
        break;
      }
    }
    if (layer.spec.batch_norm) {
      zl.bn.gamma = Eigen::MatrixXd::Zero(layer.bn.gamma.rows(), 1);
      zl.bn.beta = Eigen::MatrixXd::Zero(layer.bn.beta.rows(), 1);
      zl.bn.running_mean = Eigen::MatrixXd::Zero(layer.bn.gamma.rows(), 1);
      zl.bn.running_var = Eigen::MatrixXd::Zero(layer.bn.gamma.rows(), 1);
    }
    out.layers.push_back(std::move(zl));
  }
  return out;
}

void for_each_tensor(ModelParams& params, const TensorVisitor& visit) {
  visit_tensors(params, visit);
}

void for_each_tensor(const ModelParams& params,
                     const std::function<void(const std::string&, const Eigen::MatrixXd&)>& visit) {
  visit_tensors(params, visit);
}

Eigen::MatrixXd gcn_forward(const Eigen::MatrixXd& h, const PatientGraph& g, const GcnParams& p) {
  check_finite(h, "gcn input");
  check_rows(h, g, "gcn");
  if (p.W.rows() != h.cols()) throw ValidationError("gcn weight width mismatch");
  Eigen::MatrixXd out = apply_sym_norm(h, g) * p.W;
  out.rowwise() += p.b.col(0).transpose();
  return out;
}

Eigen::MatrixXd sage_forward(const Eigen::MatrixXd& h, const PatientGraph& g, const SageParams& p) {
  check_finite(h, "sage input");
  check_rows(h, g, "sage");
  if (p.W_self.rows() != h.cols()) throw ValidationError("sage weight width mismatch");
  Eigen::MatrixXd out = h * p.W_self + apply_mean_adj(h, g) * p.W_neigh;
  out.rowwise() += p.b.col(0).transpose();
  return out;
}

std::pair<Eigen::MatrixXd, AttentionMap> gat_forward(const Eigen::MatrixXd& h,
                                                     const PatientGraph& g, const GatParams& p) {
  check_finite(h, "gat input");
  check_rows(h, g, "gat");
  std::vector<int> offsets, srcs;
  attention_slots(g, offsets, srcs);
  return gat_forward_impl(h, g, p, offsets, srcs, nullptr);
}

Eigen::MatrixXd batch_norm_forward(const Eigen::MatrixXd& h, BatchNormState& state, Mode mode) {
  return batch_norm_impl(h, state, mode, nullptr, nullptr);
}

ForwardResult model_forward(const Eigen::MatrixXd& x, const PatientGraph& g, ModelParams& params,
                            Mode mode, std::vector<LayerTrace>* traces) {
  check_finite(x, "model input");
  check_rows(x, g, "model");
  if (traces) {
    traces->clear();
    traces->reserve(params.layers.size());
  }
  ForwardResult result;
  Eigen::MatrixXd h = x;
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    LayerParams& layer = params.layers[li];
    const LayerSpec& spec = layer.spec;
    if (h.cols() != spec.in_dim)
      throw ValidationError("layer " + std::to_string(li) + " input width mismatch");
    LayerTrace trace;
    LayerTrace* tp = traces ? &trace : nullptr;
    if (tp) tp->input = h;
    Eigen::MatrixXd linear;
    switch (spec.kind) {
      case LayerKind::GCN: {
        const auto& p = std::get<GcnParams>(layer.op);
        Eigen::MatrixXd agg = apply_sym_norm(h, g);
        linear = agg * p.W;
        linear.rowwise() += p.b.col(0).transpose();
        if (tp) tp->aggregated = std::move(agg);
        break;
      }
      case LayerKind::SAGE: {
        const auto& p = std::get<SageParams>(layer.op);
        Eigen::MatrixXd agg = apply_mean_adj(h, g);
        linear = h * p.W_self + agg * p.W_neigh;
        linear.rowwise() += p.b.col(0).transpose();
        if (tp) tp->aggregated = std::move(agg);
        break;
      }
      case LayerKind::GAT: {
        const auto& p = std::get<GatParams>(layer.op);
        std::vector<int> offsets, srcs;
        attention_slots(g, offsets, srcs);
        auto [out, att] = gat_forward_impl(h, g, p, offsets, srcs, tp ? &tp->gat_heads : nullptr);
        linear = std::move(out);
        result.attention = std::move(att);
        if (tp) {
          tp->att_offsets = std::move(offsets);
          tp->att_srcs = std::move(srcs);
        }
        break;
      }
    }
    if (tp) tp->linear = linear;
    Eigen::MatrixXd act = spec.batch_norm
                              ? batch_norm_impl(linear, layer.bn, mode,
                                                tp ? &tp->bn_xhat : nullptr,
                                                tp ? &tp->bn_inv_std : nullptr)
                              : std::move(linear);
    if (tp) tp->pre_relu = act;
    if (spec.relu) act = act.cwiseMax(0.0);
    h = std::move(act);
    if (traces) traces->push_back(std::move(trace));
  }
  check_finite(h, "model output");
  result.embedding = std::move(h);
  return result;
}

Eigen::MatrixXd model_backward(const Eigen::MatrixXd& d_embedding, const PatientGraph& g,
                               const ModelParams& params, const std::vector<LayerTrace>& traces,
                               ModelParams& grads) {
  if (traces.size() != params.layers.size())
    throw ValidationError("trace count does not match layer count");
  if (grads.layers.size() != params.layers.size())
    throw ValidationError("gradient holder does not match layer count");
  Eigen::MatrixXd delta = d_embedding;
  for (int li = static_cast<int>(params.layers.size()) - 1; li >= 0; --li) {
    const LayerParams& layer = params.layers[static_cast<std::size_t>(li)];
    const LayerTrace& tr = traces[static_cast<std::size_t>(li)];
    LayerParams& gl = grads.layers[static_cast<std::size_t>(li)];
    const LayerSpec& spec = layer.spec;
    if (spec.relu)
      delta = delta.cwiseProduct((tr.pre_relu.array() > 0.0).cast<double>().matrix());
    if (spec.batch_norm) delta = batch_norm_backward(delta, layer.bn, tr, gl.bn);
    switch (spec.kind) {
      case LayerKind::GCN: {
        const auto& p = std::get<GcnParams>(layer.op);
        auto& gp = std::get<GcnParams>(gl.op);
        gp.W.noalias() += tr.aggregated.transpose() * delta;
        gp.b.col(0) += delta.colwise().sum().transpose();
        delta = apply_sym_norm(delta * p.W.transpose(), g);
        break;
      }
      case LayerKind::SAGE: {
        const auto& p = std::get<SageParams>(layer.op);
        auto& gp = std::get<SageParams>(gl.op);
        gp.W_self.noalias() += tr.input.transpose() * delta;
        gp.W_neigh.noalias() += tr.aggregated.transpose() * delta;
        gp.b.col(0) += delta.colwise().sum().transpose();
        Eigen::MatrixXd d_in = delta * p.W_self.transpose();
        d_in += apply_mean_adj_transpose(delta * p.W_neigh.transpose(), g);
        delta = std::move(d_in);
        break;
      }
      case LayerKind::GAT: {
        const auto& p = std::get<GatParams>(layer.op);
        auto& gp = std::get<GatParams>(gl.op);
        delta = gat_backward(delta, g, p, tr, gp);
        break;
      }
    }
  }
  return delta;
}

}  // namespace medgraph
