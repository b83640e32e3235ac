#include "medgraph/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <utility>

#include <json.hpp>

#include "medgraph/common.hpp"

namespace medgraph {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void check_keys(const ordered_json& j, std::initializer_list<const char*> allowed,
                const char* context) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        ok = true;
        break;
      }
    if (!ok)
      throw IoError("unknown key '" + it.key() + "' in config section '" + context + "'");
  }
}

struct Prepared {
  std::vector<PatientRecord> cohort;
  EncodingSchema schema;
  std::vector<std::string> ids;
  Eigen::MatrixXd features;
  std::vector<int> labels;
  Eigen::VectorXd targets;
};

Prepared prepare(const ExperimentConfig& cfg) {
  Prepared prep;
  if (cfg.cohort.generate)
    prep.cohort = generate_cohort(*cfg.cohort.generate);
  else
    prep.cohort = load_cohort(*cfg.cohort.csv);
  prep.schema = cfg.encoder_top_k > 0 ? fit_schema(prep.cohort, cfg.encoder_top_k)
                                      : fit_schema_auto(prep.cohort);
  prep.features = encode_cohort(prep.cohort, prep.schema);
  prep.ids.reserve(prep.cohort.size());
  prep.labels.reserve(prep.cohort.size());
  prep.targets.resize(static_cast<Eigen::Index>(prep.cohort.size()));
  const SeverityBounds bounds = compute_severity_bounds(prep.cohort);
  for (std::size_t i = 0; i < prep.cohort.size(); ++i) {
    prep.ids.push_back(prep.cohort[i].id);
    prep.labels.push_back(prep.cohort[i].died_in_icu ? 1 : 0);
    prep.targets(static_cast<Eigen::Index>(i)) = severity_proxy(prep.cohort[i], bounds);
  }
  return prep;
}

MetricsReport compute_report(const HeadOutputs& out, const std::vector<int>& labels,
                             const Eigen::VectorXd& targets, const std::vector<int>& mask,
                             double threshold) {
  std::vector<double> scores, sev_pred, sev_true;
  std::vector<int> ls;
  scores.reserve(mask.size());
  ls.reserve(mask.size());
  for (int i : mask) {
    scores.push_back(out.mortality(i));
    ls.push_back(labels[static_cast<std::size_t>(i)]);
    sev_pred.push_back(out.severity(i));
    sev_true.push_back(targets(i));
  }
  MetricsReport report;
  report.auc_roc = auc_roc(scores, ls);
  report.roc_points = roc_curve(scores, ls);
  report.threshold = threshold;
  report.point = threshold_metrics(scores, ls, threshold);
  try {
    report.spearman_rho = spearman(sev_pred, sev_true);
    report.spearman_defined = true;
  } catch (const ValidationError&) {
    report.spearman_rho = 0.0;
    report.spearman_defined = false;
  }
  report.n_evaluated = static_cast<long>(mask.size());
  return report;
}

double masked_auc(const HeadOutputs& out, const std::vector<int>& labels,
                  const std::vector<int>& mask) {
  std::vector<double> scores;
  std::vector<int> ls;
  scores.reserve(mask.size());
  ls.reserve(mask.size());
  for (int i : mask) {
    scores.push_back(out.mortality(i));
    ls.push_back(labels[static_cast<std::size_t>(i)]);
  }
  return auc_roc(scores, ls);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void write_attention_json(const AttentionMap& att, int n_nodes, const fs::path& path) {
  ordered_json j;
  j["n_nodes"] = n_nodes;
  j["heads"] = att.empty() ? 0 : static_cast<int>(att.front().per_head.size());
  ordered_json entries = ordered_json::array();
  for (const AttentionEdge& e : att) {
    entries.push_back(
        {{"src", e.src}, {"dst", e.dst}, {"weights", e.per_head}, {"mean", e.mean}});
  }
  j["entries"] = std::move(entries);
  write_text(path, j.dump(2));
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double k = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= k;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= k;
  return {mean, std::sqrt(std::max(var, 0.0))};
}

}  // namespace

void CohortSource::validate() const {
  if (generate.has_value() == csv.has_value())
    throw ValidationError("cohort source must set exactly one of generate/csv");
  if (generate) generate->validate();
  if (csv && csv->empty()) throw ValidationError("cohort csv path is empty");
}

void ModelChoice::validate() const {
  if (variant != "hybrid" && variant != "gcn" && variant != "sage" && variant != "gat" &&
      variant != "mlp")
    throw ValidationError("unknown model variant '" + variant +
                          "' (expected hybrid, gcn, sage, gat, or mlp)");
  if (hidden < 1) throw ValidationError("model hidden width must be at least 1");
  if (gat_heads < 1) throw ValidationError("model gat_heads must be at least 1");
}

void ExperimentConfig::validate() const {
  cohort.validate();
  if (encoder_top_k < 0) throw ValidationError("encoder top_k must be non-negative");
  similarity.validate();
  model.validate();
  train.validate();
  if (ablation.seeds < 1) throw ValidationError("ablation seeds must be at least 1");
}

std::string ExperimentConfig::to_json() const {
  ordered_json j;
  ordered_json cj = ordered_json::object();
  if (cohort.generate) {
    cj["generate"] = {{"n", cohort.generate->n_patients},
                      {"seed", cohort.generate->seed},
                      {"mortality_rate", cohort.generate->mortality_rate},
                      {"signal_strength", cohort.generate->signal_strength},
                      {"missing_rate", cohort.generate->missing_rate}};
  }
  if (cohort.csv) cj["csv"] = cohort.csv->string();
  j["cohort"] = std::move(cj);
  j["encoder"] = {{"top_k", encoder_top_k}};
  ordered_json sj = {{"alpha", similarity.alpha}, {"tau_percentile", similarity.tau_percentile}};
  if (similarity.tau_override)
    sj["tau_override"] = *similarity.tau_override;
  else
    sj["tau_override"] = nullptr;
  j["similarity"] = std::move(sj);
  j["model"] = {{"variant", model.variant}, {"hidden", model.hidden}, {"gat_heads", model.gat_heads}};
  j["train"] = {{"lambda1", train.lambda1},
                {"lambda2", train.lambda2},
                {"learning_rate", train.learning_rate},
                {"max_epochs", train.max_epochs},
                {"patience", train.patience},
                {"seed", train.seed},
                {"train_fraction", train.train_fraction},
                {"val_fraction", train.val_fraction},
                {"test_fraction", train.test_fraction}};
  j["ablation"] = {{"seeds", ablation.seeds}};
  j["out_dir"] = out_dir.string();
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("invalid config JSON: ") + e.what());
  }
  try {
    check_keys(j, {"cohort", "encoder", "similarity", "model", "train", "ablation", "out_dir"},
               "top level");
    ExperimentConfig cfg;
    if (j.contains("cohort")) {
      const auto& cj = j.at("cohort");
      check_keys(cj, {"generate", "csv"}, "cohort");
      if (cj.contains("generate")) {
        const auto& gj = cj.at("generate");
        check_keys(gj, {"n", "seed", "mortality_rate", "signal_strength", "missing_rate"},
                   "cohort.generate");
        CohortSpec spec;
        spec.n_patients = gj.at("n").get<int>();
        if (gj.contains("seed")) spec.seed = gj.at("seed").get<std::uint64_t>();
        if (gj.contains("mortality_rate")) spec.mortality_rate = gj.at("mortality_rate").get<double>();
        if (gj.contains("signal_strength"))
          spec.signal_strength = gj.at("signal_strength").get<double>();
        if (gj.contains("missing_rate")) spec.missing_rate = gj.at("missing_rate").get<double>();
        cfg.cohort.generate = spec;
      }
      if (cj.contains("csv")) cfg.cohort.csv = fs::path(cj.at("csv").get<std::string>());
    }
    if (j.contains("encoder")) {
      check_keys(j.at("encoder"), {"top_k"}, "encoder");
      if (j.at("encoder").contains("top_k")) cfg.encoder_top_k = j.at("encoder").at("top_k").get<int>();
    }
    if (j.contains("similarity")) {
      const auto& sj = j.at("similarity");
      check_keys(sj, {"alpha", "tau_percentile", "tau_override"}, "similarity");
      if (sj.contains("alpha")) cfg.similarity.alpha = sj.at("alpha").get<double>();
      if (sj.contains("tau_percentile"))
        cfg.similarity.tau_percentile = sj.at("tau_percentile").get<double>();
      if (sj.contains("tau_override") && !sj.at("tau_override").is_null())
        cfg.similarity.tau_override = sj.at("tau_override").get<double>();
    }
    if (j.contains("model")) {
      const auto& mj = j.at("model");
      check_keys(mj, {"variant", "hidden", "gat_heads"}, "model");
      if (mj.contains("variant")) cfg.model.variant = mj.at("variant").get<std::string>();
      if (mj.contains("hidden")) cfg.model.hidden = mj.at("hidden").get<int>();
      if (mj.contains("gat_heads")) cfg.model.gat_heads = mj.at("gat_heads").get<int>();
    }
    if (j.contains("train")) {
      const auto& tj = j.at("train");
      check_keys(tj,
                 {"lambda1", "lambda2", "learning_rate", "max_epochs", "patience", "seed",
                  "train_fraction", "val_fraction", "test_fraction"},
                 "train");
      if (tj.contains("lambda1")) cfg.train.lambda1 = tj.at("lambda1").get<double>();
      if (tj.contains("lambda2")) cfg.train.lambda2 = tj.at("lambda2").get<double>();
      if (tj.contains("learning_rate"))
        cfg.train.learning_rate = tj.at("learning_rate").get<double>();
      if (tj.contains("max_epochs")) cfg.train.max_epochs = tj.at("max_epochs").get<int>();
      if (tj.contains("patience")) cfg.train.patience = tj.at("patience").get<int>();
      if (tj.contains("seed")) cfg.train.seed = tj.at("seed").get<std::uint64_t>();
      if (tj.contains("train_fraction"))
        cfg.train.train_fraction = tj.at("train_fraction").get<double>();
      if (tj.contains("val_fraction")) cfg.train.val_fraction = tj.at("val_fraction").get<double>();
      if (tj.contains("test_fraction"))
        cfg.train.test_fraction = tj.at("test_fraction").get<double>();
    }
    if (j.contains("ablation")) {
      check_keys(j.at("ablation"), {"seeds"}, "ablation");
      if (j.at("ablation").contains("seeds"))
        cfg.ablation.seeds = j.at("ablation").at("seeds").get<int>();
    }
    if (j.contains("out_dir")) cfg.out_dir = fs::path(j.at("out_dir").get<std::string>());
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  write_text(path, to_json());
}

std::uint64_t ExperimentConfig::hash() const { return hash_bytes(to_json()); }

std::vector<LayerSpec> make_layer_specs(const std::string& variant, int in_dim, int hidden,
                                        int gat_heads) {
  if (variant == "mlp") return {};
  if (variant == "hybrid") return hybrid_stack(in_dim, hidden, gat_heads);
  if (variant == "gcn") return uniform_stack(LayerKind::GCN, in_dim, hidden, gat_heads);
  if (variant == "sage") return uniform_stack(LayerKind::SAGE, in_dim, hidden, gat_heads);
  if (variant == "gat") return uniform_stack(LayerKind::GAT, in_dim, hidden, gat_heads);
  throw ValidationError("unknown model variant '" + variant + "'");
}

PatientGraph edgeless_graph(const Eigen::MatrixXd& features,
                            const std::vector<std::string>& ids) {
  if (features.rows() != static_cast<Eigen::Index>(ids.size()))
    throw ValidationError("edgeless_graph: feature rows do not match id count");
  PatientGraph g;
  g.node_ids = ids;
  g.features = features;
  g.neighbors.assign(ids.size(), {});
  g.tau = std::numeric_limits<double>::infinity();
  return g;
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.out_dir.empty()) throw ValidationError("out_dir must be set");
  fs::create_directories(cfg.out_dir);
  Prepared prep = prepare(cfg);

  std::map<std::string, std::string> inputs;
  std::vector<std::string> output_names;
  if (cfg.cohort.generate) {
    save_cohort(prep.cohort, cfg.out_dir / "cohort.csv");
    output_names.push_back("cohort.csv");
  } else {
    inputs[cfg.cohort.csv->string()] = hex64(hash_file(cfg.cohort.csv->string()));
  }
  write_text(cfg.out_dir / "schema.json", prep.schema.to_json());
  output_names.push_back("schema.json");

  const bool graphless = cfg.model.variant == "mlp";
  PatientGraph graph = graphless
                           ? edgeless_graph(prep.features, prep.ids)
                           : build_graph(prep.features, prep.ids, prep.schema, cfg.similarity);
  if (!graphless) {
    write_edge_list(graph, cfg.out_dir / "edges.csv", cfg.out_dir / "graph.json");
    output_names.push_back("edges.csv");
    output_names.push_back("graph.json");
  }

  const std::vector<LayerSpec> specs = make_layer_specs(
      cfg.model.variant, static_cast<int>(prep.features.cols()), cfg.model.hidden,
      cfg.model.gat_heads);
  TrainResult res = train(graph, specs, prep.labels, prep.targets, cfg.train);
  write_history_csv(res.history, cfg.out_dir / "history.csv");
  output_names.push_back("history.csv");
  Checkpoint ckpt;
  ckpt.params = res.params;
  ckpt.heads = res.heads;
  ckpt.cfg = cfg.train;
  ckpt.schema_hash = prep.schema.hash();
  ckpt.best_epoch = res.best_epoch;
  save_checkpoint(ckpt, cfg.out_dir / "checkpoint.json");
  output_names.push_back("checkpoint.json");

  ModelParams eval_params = res.params;
  ForwardResult fwd = model_forward(prep.features, graph, eval_params, Mode::Eval);
  HeadOutputs out = apply_heads(fwd.embedding, res.heads);

  ExperimentSummary summary;
  summary.out_dir = cfg.out_dir;
  summary.n_nodes = graph.num_nodes();
  summary.n_edges = graph.num_edges();
  summary.tau = graph.tau;
  summary.best_epoch = res.best_epoch;
  summary.best_val_loss = res.best_val_loss;
  summary.train_auc = masked_auc(out, prep.labels, res.masks.train);
  summary.test_metrics = compute_report(out, prep.labels, prep.targets, res.masks.test, 0.5);
  summary.params_hash = params_hash(res.params, res.heads);
  summary.config_hash = cfg.hash();

  write_text(cfg.out_dir / "metrics.json", summary.test_metrics.to_json());
  output_names.push_back("metrics.json");
  write_roc_csv(summary.test_metrics.roc_points, cfg.out_dir / "roc.csv");
  output_names.push_back("roc.csv");
  write_attention_json(fwd.attention, graph.num_nodes(), cfg.out_dir / "attention.json");
  output_names.push_back("attention.json");
  write_run_manifest(cfg, cfg.out_dir, inputs, output_names);
  return summary;
}

ExperimentSummary evaluate_checkpoint(const ExperimentConfig& cfg,
                                      const std::filesystem::path& checkpoint_path) {
  cfg.validate();
  if (cfg.out_dir.empty()) throw ValidationError("out_dir must be set");
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  fs::create_directories(cfg.out_dir);
  Prepared prep = prepare(cfg);
  if (prep.schema.hash() != ckpt.schema_hash)
    throw ValidationError(
        "checkpoint schema hash does not match the cohort encoding; "
        "evaluate against the cohort the model was trained on");

  const bool graphless = ckpt.params.layers.empty();
  PatientGraph graph = graphless
                           ? edgeless_graph(prep.features, prep.ids)
                           : build_graph(prep.features, prep.ids, prep.schema, cfg.similarity);
  SplitMasks masks = split_dataset(graph.num_nodes(), prep.labels, ckpt.cfg);

  ForwardResult fwd = model_forward(prep.features, graph, ckpt.params, Mode::Eval);
  HeadOutputs out = apply_heads(fwd.embedding, ckpt.heads);

  ExperimentSummary summary;
  summary.out_dir = cfg.out_dir;
  summary.n_nodes = graph.num_nodes();
  summary.n_edges = graph.num_edges();
  summary.tau = graph.tau;
  summary.best_epoch = ckpt.best_epoch;
  summary.train_auc = masked_auc(out, prep.labels, masks.train);
  summary.test_metrics = compute_report(out, prep.labels, prep.targets, masks.test, 0.5);
  summary.params_hash = params_hash(ckpt.params, ckpt.heads);
  summary.config_hash = cfg.hash();

  std::map<std::string, std::string> inputs;
  inputs[checkpoint_path.string()] = hex64(hash_file(checkpoint_path.string()));
  if (cfg.cohort.csv)
    inputs[cfg.cohort.csv->string()] = hex64(hash_file(cfg.cohort.csv->string()));
  std::vector<std::string> output_names;
  write_text(cfg.out_dir / "metrics.json", summary.test_metrics.to_json());
  output_names.push_back("metrics.json");
  write_roc_csv(summary.test_metrics.roc_points, cfg.out_dir / "roc.csv");
  output_names.push_back("roc.csv");
  write_attention_json(fwd.attention, graph.num_nodes(), cfg.out_dir / "attention.json");
  output_names.push_back("attention.json");
  write_run_manifest(cfg, cfg.out_dir, inputs, output_names);
  return summary;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.out_dir.empty()) throw ValidationError("out_dir must be set");
  fs::create_directories(cfg.out_dir);
  Prepared prep = prepare(cfg);

  const auto graph_for_alpha = [&](double alpha) {
    SimilarityParams sp = cfg.similarity;
    sp.alpha = alpha;
    return build_graph(prep.features, prep.ids, prep.schema, sp);
  };
  const PatientGraph hybrid_g = graph_for_alpha(cfg.similarity.alpha);
  const PatientGraph cosine_g = graph_for_alpha(1.0);
  const PatientGraph jaccard_g = graph_for_alpha(0.0);
  const PatientGraph none_g = edgeless_graph(prep.features, prep.ids);

  struct Cell {
    const char* study;
    const char* variant;
    const PatientGraph* graph;
    const char* model_variant;
    double alpha;
  };
  const Cell cells[] = {
      {"graph", "mlp", &none_g, "mlp", cfg.similarity.alpha},
      {"graph", "cosine", &cosine_g, "hybrid", 1.0},
      {"graph", "jaccard", &jaccard_g, "hybrid", 0.0},
      {"graph", "hybrid", &hybrid_g, "hybrid", cfg.similarity.alpha},
      {"architecture", "gcn", &hybrid_g, "gcn", cfg.similarity.alpha},
      {"architecture", "sage", &hybrid_g, "sage", cfg.similarity.alpha},
      {"architecture", "gat", &hybrid_g, "gat", cfg.similarity.alpha},
      {"architecture", "hybrid", &hybrid_g, "hybrid", cfg.similarity.alpha},
  };

  std::vector<AblationRow> rows;
  for (const Cell& cell : cells) {
    const std::vector<LayerSpec> specs =
        make_layer_specs(cell.model_variant, static_cast<int>(prep.features.cols()),
                         cfg.model.hidden, cfg.model.gat_heads);
    std::vector<double> aucs, f1s;
    for (int si = 0; si < cfg.ablation.seeds; ++si) {
      TrainConfig tc = cfg.train;
      tc.seed = cfg.train.seed + static_cast<std::uint64_t>(si);
      TrainResult res = train(*cell.graph, specs, prep.labels, prep.targets, tc);
      ForwardResult fwd = model_forward(prep.features, *cell.graph, res.params, Mode::Eval);
      HeadOutputs out = apply_heads(fwd.embedding, res.heads);
      MetricsReport rep = compute_report(out, prep.labels, prep.targets, res.masks.test, 0.5);
      aucs.push_back(rep.auc_roc);
      f1s.push_back(rep.point.f1);
    }
    AblationRow row;
    row.study = cell.study;
    row.variant = cell.variant;
    row.seeds = cfg.ablation.seeds;
    std::tie(row.auc_mean, row.auc_std) = mean_std(aucs);
    std::tie(row.f1_mean, row.f1_std) = mean_std(f1s);
    ExperimentConfig cell_cfg = cfg;
    cell_cfg.similarity.alpha = cell.alpha;
    cell_cfg.model.variant = cell.model_variant;
    cell_cfg.train.seed = 0;
    cell_cfg.out_dir.clear();
    row.config_hash = hex64(cell_cfg.hash());
    rows.push_back(std::move(row));
  }

  write_ablation_csv(rows, cfg.out_dir / "ablation.csv");
  std::map<std::string, std::string> inputs;
  if (cfg.cohort.csv)
    inputs[cfg.cohort.csv->string()] = hex64(hash_file(cfg.cohort.csv->string()));
  write_run_manifest(cfg, cfg.out_dir, inputs, {"ablation.csv"});
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "study,variant,seeds,auc_mean,auc_std,f1_mean,f1_std,config_hash\n";
  for (const AblationRow& r : rows)
    out << r.study << ',' << r.variant << ',' << r.seeds << ',' << format_double(r.auc_mean)
        << ',' << format_double(r.auc_std) << ',' << format_double(r.f1_mean) << ','
        << format_double(r.f1_std) << ',' << r.config_hash << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void write_run_manifest(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                        const std::map<std::string, std::string>& inputs,
                        const std::vector<std::string>& output_names) {
  ordered_json j;
  j["version"] = kVersion;
  j["config_hash"] = hex64(cfg.hash());
  j["config"] = ordered_json::parse(cfg.to_json());
  ordered_json in = ordered_json::object();
  for (const auto& [name, digest] : inputs) in[name] = digest;
  j["inputs"] = std::move(in);
  ordered_json out = ordered_json::object();
  for (const std::string& name : output_names)
    out[name] = hex64(hash_file((dir / name).string()));
  j["outputs"] = std::move(out);
  write_text(dir / "manifest.json", j.dump(2));
}

}  // namespace medgraph
