// Command-line front end: generate, encode, build-graph, train, evaluate,
// ablate. All state flows through ExperimentConfig; flags override config
// fields, and every command prints a short machine-parsable summary.
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "medgraph/common.hpp"
#include "medgraph/ehr.hpp"
#include "medgraph/encoder.hpp"
#include "medgraph/graph.hpp"
#include "medgraph/pipeline.hpp"
#include "medgraph/training.hpp"

namespace fs = std::filesystem;
namespace mg = medgraph;

namespace {

std::string fmt(double x) { return mg::format_double_sig(x, 6); }

struct CohortFlags {
  CLI::Option* input = nullptr;
  CLI::Option* n = nullptr;
  CLI::Option* rate = nullptr;
  CLI::Option* signal = nullptr;
  CLI::Option* missing = nullptr;
  std::string input_path;
  int n_val = 0;
  double rate_val = 0.2;
  double signal_val = 1.0;
  double missing_val = 0.0;

  void attach(CLI::App* sub, bool with_input) {
    if (with_input)
      input = sub->add_option("--input", input_path, "Cohort CSV to load instead of generating");
    n = sub->add_option("--n", n_val, "Generate a synthetic cohort with this many patients");
    rate = sub->add_option("--mortality-rate", rate_val, "Synthetic cohort death fraction");
    signal = sub->add_option("--signal-strength", signal_val, "Synthetic outcome signal strength");
    missing = sub->add_option("--missing-rate", missing_val, "Synthetic missing-value fraction");
  }

  void apply(mg::ExperimentConfig& cfg) const {
    if (input && input->count() > 0) {
      cfg.cohort.csv = fs::path(input_path);
      cfg.cohort.generate.reset();
    }
    const bool any_gen = (n && n->count()) || (rate && rate->count()) ||
                         (signal && signal->count()) || (missing && missing->count());
    if (any_gen) {
      mg::CohortSpec spec = cfg.cohort.generate.value_or(mg::CohortSpec{});
      if (n->count()) spec.n_patients = n_val;
      if (rate->count()) spec.mortality_rate = rate_val;
      if (signal->count()) spec.signal_strength = signal_val;
      if (missing->count()) spec.missing_rate = missing_val;
      cfg.cohort.generate = spec;
      cfg.cohort.csv.reset();
    }
  }
};

struct SimilarityFlags {
  CLI::Option* alpha = nullptr;
  CLI::Option* percentile = nullptr;
  CLI::Option* override_opt = nullptr;
  double alpha_val = 0.7;
  double percentile_val = 90.0;
  double override_val = 0.0;

  void attach(CLI::App* sub) {
    alpha = sub->add_option("--alpha", alpha_val, "Cosine weight in the hybrid similarity");
    percentile = sub->add_option("--tau-percentile", percentile_val,
                                 "Percentile of pairwise similarities used as the edge threshold");
    override_opt = sub->add_option("--tau-override", override_val,
                                   "Fixed threshold, bypassing the percentile computation");
  }

  void apply(mg::ExperimentConfig& cfg) const {
    if (alpha->count()) cfg.similarity.alpha = alpha_val;
    if (percentile->count()) cfg.similarity.tau_percentile = percentile_val;
    if (override_opt->count()) cfg.similarity.tau_override = override_val;
  }
};

struct ModelFlags {
  CLI::Option* variant = nullptr;
  CLI::Option* hidden = nullptr;
  CLI::Option* heads = nullptr;
  std::string variant_val = "hybrid";
  int hidden_val = 64;
  int heads_val = 4;

  void attach(CLI::App* sub) {
    variant = sub->add_option("--variant", variant_val,
                              "Model variant: hybrid, gcn, sage, gat, or mlp");
    hidden = sub->add_option("--hidden", hidden_val, "Hidden layer width");
    heads = sub->add_option("--gat-heads", heads_val, "Attention heads per GAT layer");
  }

  void apply(mg::ExperimentConfig& cfg) const {
    if (variant->count()) cfg.model.variant = variant_val;
    if (hidden->count()) cfg.model.hidden = hidden_val;
    if (heads->count()) cfg.model.gat_heads = heads_val;
  }
};

struct TrainFlags {
  CLI::Option* lr = nullptr;
  CLI::Option* epochs = nullptr;
  CLI::Option* patience = nullptr;
  CLI::Option* lambda1 = nullptr;
  CLI::Option* lambda2 = nullptr;
  double lr_val = 1e-3;
  int epochs_val = 300;
  int patience_val = 20;
  double lambda1_val = 1.0;
  double lambda2_val = 0.5;

  void attach(CLI::App* sub) {
    lr = sub->add_option("--lr", lr_val, "Adam learning rate");
    epochs = sub->add_option("--epochs", epochs_val, "Maximum training epochs");
    patience = sub->add_option("--patience", patience_val, "Early-stopping patience");
    lambda1 = sub->add_option("--lambda1", lambda1_val, "Mortality loss weight");
    lambda2 = sub->add_option("--lambda2", lambda2_val, "Severity loss weight");
  }

  void apply(mg::ExperimentConfig& cfg) const {
    if (lr->count()) cfg.train.learning_rate = lr_val;
    if (epochs->count()) cfg.train.max_epochs = epochs_val;
    if (patience->count()) cfg.train.patience = patience_val;
    if (lambda1->count()) cfg.train.lambda1 = lambda1_val;
    if (lambda2->count()) cfg.train.lambda2 = lambda2_val;
  }
};

std::vector<mg::PatientRecord> load_or_generate(const mg::ExperimentConfig& cfg) {
  cfg.cohort.validate();
  if (cfg.cohort.generate) return mg::generate_cohort(*cfg.cohort.generate);
  return mg::load_cohort(*cfg.cohort.csv);
}

void write_features_csv(const std::vector<std::string>& ids, const Eigen::MatrixXd& features,
                        const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw mg::IoError("cannot open " + path.string() + " for writing");
  out << "id";
  for (Eigen::Index j = 0; j < features.cols(); ++j) out << ",f" << j;
  out << '\n';
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out << ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < features.cols(); ++j)
      out << ',' << mg::format_double(features(i, j));
    out << '\n';
  }
  if (!out) throw mg::IoError("failed writing " + path.string());
}

std::map<std::string, std::string> input_hashes(const mg::ExperimentConfig& cfg) {
  std::map<std::string, std::string> inputs;
  if (cfg.cohort.csv)
    inputs[cfg.cohort.csv->string()] = mg::hex64(mg::hash_file(cfg.cohort.csv->string()));
  return inputs;
}

int cmd_generate(mg::ExperimentConfig cfg, bool seed_given, std::uint64_t seed,
                 bool out_given, const std::string& out_file) {
  if (!cfg.cohort.generate)
    throw mg::ValidationError("generate needs --n or a config with a cohort.generate section");
  if (seed_given) cfg.cohort.generate->seed = seed;
  cfg.cohort.generate->validate();
  const std::vector<mg::PatientRecord> cohort = mg::generate_cohort(*cfg.cohort.generate);
  fs::path out = out_given ? fs::path(out_file) : cfg.out_dir / "cohort.csv";
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  mg::save_cohort(cohort, out);
  if (!out_given) mg::write_run_manifest(cfg, cfg.out_dir, {}, {"cohort.csv"});
  std::cout << "rows=" << cohort.size() << " path=" << out.string() << '\n';
  return 0;
}

int cmd_encode(const mg::ExperimentConfig& cfg) {
  const std::vector<mg::PatientRecord> cohort = load_or_generate(cfg);
  const mg::EncodingSchema schema = cfg.encoder_top_k > 0
                                        ? mg::fit_schema(cohort, cfg.encoder_top_k)
                                        : mg::fit_schema_auto(cohort);
  const Eigen::MatrixXd features = mg::encode_cohort(cohort, schema);
  std::vector<std::string> ids;
  for (const auto& rec : cohort) ids.push_back(rec.id);
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream out(cfg.out_dir / "schema.json");
    if (!out) throw mg::IoError("cannot open schema.json for writing");
    out << schema.to_json() << '\n';
  }
  write_features_csv(ids, features, cfg.out_dir / "features.csv");
  mg::write_run_manifest(cfg, cfg.out_dir, input_hashes(cfg), {"schema.json", "features.csv"});
  std::cout << "patients=" << cohort.size() << " dim=" << features.cols()
            << " schema_hash=" << mg::hex64(schema.hash()) << '\n';
  return 0;
}

int cmd_build_graph(const mg::ExperimentConfig& cfg) {
  const std::vector<mg::PatientRecord> cohort = load_or_generate(cfg);
  const mg::EncodingSchema schema = cfg.encoder_top_k > 0
                                        ? mg::fit_schema(cohort, cfg.encoder_top_k)
                                        : mg::fit_schema_auto(cohort);
  const Eigen::MatrixXd features = mg::encode_cohort(cohort, schema);
  std::vector<std::string> ids;
  for (const auto& rec : cohort) ids.push_back(rec.id);
  const mg::PatientGraph graph = mg::build_graph(features, ids, schema, cfg.similarity);
  fs::create_directories(cfg.out_dir);
  mg::write_edge_list(graph, cfg.out_dir / "edges.csv", cfg.out_dir / "graph.json");
  mg::write_run_manifest(cfg, cfg.out_dir, input_hashes(cfg), {"edges.csv", "graph.json"});
  std::cout << "nodes=" << graph.num_nodes() << " edges=" << graph.num_edges()
            << " tau=" << fmt(graph.tau) << '\n';
  return 0;
}

int cmd_train(const mg::ExperimentConfig& cfg) {
  const mg::ExperimentSummary s = mg::run_experiment(cfg);
  std::cout << "best_epoch=" << s.best_epoch << " best_val_loss=" << fmt(s.best_val_loss)
            << " train_auc=" << fmt(s.train_auc) << " test_auc=" << fmt(s.test_metrics.auc_roc)
            << " test_f1=" << fmt(s.test_metrics.point.f1)
            << " params_hash=" << mg::hex64(s.params_hash) << " out=" << s.out_dir.string()
            << '\n';
  return 0;
}

int cmd_evaluate(const mg::ExperimentConfig& cfg, const std::string& checkpoint) {
  const mg::ExperimentSummary s = mg::evaluate_checkpoint(cfg, checkpoint);
  const mg::MetricsReport& m = s.test_metrics;
  std::cout << "test_auc=" << fmt(m.auc_roc) << " accuracy=" << fmt(m.point.accuracy)
            << " precision=" << fmt(m.point.precision) << " recall=" << fmt(m.point.recall)
            << " f1=" << fmt(m.point.f1) << " spearman="
            << (m.spearman_defined ? fmt(m.spearman_rho) : std::string("undefined"))
            << " n=" << m.n_evaluated << '\n';
  return 0;
}

int cmd_ablate(const mg::ExperimentConfig& cfg) {
  const std::vector<mg::AblationRow> rows = mg::run_ablation(cfg);
  for (const auto& r : rows)
    std::cout << "study=" << r.study << " variant=" << r.variant << " seeds=" << r.seeds
              << " auc=" << fmt(r.auc_mean) << "+-" << fmt(r.auc_std) << " f1=" << fmt(r.f1_mean)
              << "+-" << fmt(r.f1_std) << '\n';
  std::cout << "table=" << (cfg.out_dir / "ablation.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patient similarity graphs with a hybrid GCN/SAGE/GAT model "
               "for ICU mortality and severity prediction"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  CLI::Option* config_opt = app.add_option("--config", config_path, "JSON experiment config file");
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "Training seed (cohort seed for the generate command)");
  CLI::Option* outdir_opt = app.add_option("--out-dir", out_dir, "Directory for run artifacts");

  CLI::App* gen = app.add_subcommand("generate", "Write a synthetic cohort CSV");
  gen->fallthrough();
  CohortFlags gen_cohort;
  gen_cohort.attach(gen, false);
  std::string gen_out;
  CLI::Option* gen_out_opt =
      gen->add_option("--out", gen_out, "Target CSV path (default <out-dir>/cohort.csv)");

  CLI::App* enc = app.add_subcommand("encode", "Fit the feature schema and encode a cohort");
  enc->fallthrough();
  CohortFlags enc_cohort;
  enc_cohort.attach(enc, true);
  int enc_top_k = 0;
  CLI::Option* enc_top_k_opt =
      enc->add_option("--top-k", enc_top_k, "Diagnosis codes kept as indicator features");

  CLI::App* bg = app.add_subcommand("build-graph", "Construct the patient similarity graph");
  bg->fallthrough();
  CohortFlags bg_cohort;
  bg_cohort.attach(bg, true);
  SimilarityFlags bg_sim;
  bg_sim.attach(bg);
  int bg_top_k = 0;
  CLI::Option* bg_top_k_opt =
      bg->add_option("--top-k", bg_top_k, "Diagnosis codes kept as indicator features");

  CLI::App* tr = app.add_subcommand("train", "Run the full pipeline and save a checkpoint");
  tr->fallthrough();
  CohortFlags tr_cohort;
  tr_cohort.attach(tr, true);
  SimilarityFlags tr_sim;
  tr_sim.attach(tr);
  ModelFlags tr_model;
  tr_model.attach(tr);
  TrainFlags tr_train;
  tr_train.attach(tr);

  CLI::App* ev = app.add_subcommand("evaluate", "Evaluate a saved checkpoint");
  ev->fallthrough();
  CohortFlags ev_cohort;
  ev_cohort.attach(ev, true);
  SimilarityFlags ev_sim;
  ev_sim.attach(ev);
  std::string ev_checkpoint;
  ev->add_option("--checkpoint", ev_checkpoint, "Checkpoint JSON to evaluate")->required();

  CLI::App* ab = app.add_subcommand("ablate", "Run the graph and architecture ablation studies");
  ab->fallthrough();
  CohortFlags ab_cohort;
  ab_cohort.attach(ab, true);
  SimilarityFlags ab_sim;
  ab_sim.attach(ab);
  ModelFlags ab_model;
  ab_model.attach(ab);
  TrainFlags ab_train;
  ab_train.attach(ab);
  int ab_seeds = 0;
  CLI::Option* ab_seeds_opt = ab->add_option("--seeds", ab_seeds, "Seeds per ablation cell");

  CLI11_PARSE(app, argc, argv);

  try {
    mg::ExperimentConfig cfg;
    if (config_opt->count()) cfg = mg::ExperimentConfig::load(config_path);
    if (outdir_opt->count()) cfg.out_dir = fs::path(out_dir);
    if (seed_opt->count()) cfg.train.seed = seed;

    if (app.got_subcommand(gen)) {
      gen_cohort.apply(cfg);
      return cmd_generate(cfg, seed_opt->count() > 0, seed, gen_out_opt->count() > 0, gen_out);
    }
    if (app.got_subcommand(enc)) {
      enc_cohort.apply(cfg);
      if (enc_top_k_opt->count()) cfg.encoder_top_k = enc_top_k;
      return cmd_encode(cfg);
    }
    if (app.got_subcommand(bg)) {
      bg_cohort.apply(cfg);
      bg_sim.apply(cfg);
      if (bg_top_k_opt->count()) cfg.encoder_top_k = bg_top_k;
      return cmd_build_graph(cfg);
    }
    if (app.got_subcommand(tr)) {
      tr_cohort.apply(cfg);
      tr_sim.apply(cfg);
      tr_model.apply(cfg);
      tr_train.apply(cfg);
      return cmd_train(cfg);
    }
    if (app.got_subcommand(ev)) {
      ev_cohort.apply(cfg);
      ev_sim.apply(cfg);
      return cmd_evaluate(cfg, ev_checkpoint);
    }
    if (app.got_subcommand(ab)) {
      ab_cohort.apply(cfg);
      ab_sim.apply(cfg);
      ab_model.apply(cfg);
      ab_train.apply(cfg);
      if (ab_seeds_opt->count()) cfg.ablation.seeds = ab_seeds;
      return cmd_ablate(cfg);
    }
    std::cerr << "error: no subcommand given\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
