#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "medgraph/common.hpp"
#include "medgraph/pipeline.hpp"

using namespace medgraph;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "medgraph_pipeline_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig tiny_config(const std::string& name, int n = 60) {
  ExperimentConfig cfg;
  CohortSpec spec;
  spec.n_patients = n;
  spec.seed = 5;
  spec.mortality_rate = 0.3;
  spec.signal_strength = 1.5;
  spec.missing_rate = 0.05;
  cfg.cohort.generate = spec;
  cfg.model.hidden = 8;
  cfg.model.gat_heads = 2;
  cfg.train.max_epochs = 6;
  cfg.train.patience = 3;
  cfg.out_dir = fresh_dir(name);
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("cohort source requires exactly one of generate and csv") {
  CohortSource src;
  CHECK_THROWS_AS(src.validate(), ValidationError);
  src.generate = CohortSpec{};
  src.generate->n_patients = 10;
  CHECK_NOTHROW(src.validate());
  src.csv = fs::path("x.csv");
  CHECK_THROWS_WITH_AS(src.validate(), doctest::Contains("exactly one"), ValidationError);
}

TEST_CASE("model choice validates the variant name") {
  ModelChoice m;
  for (const char* v : {"hybrid", "gcn", "sage", "gat", "mlp"}) {
    m.variant = v;
    CHECK_NOTHROW(m.validate());
  }
  m.variant = "transformer";
  CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("variant"), ValidationError);
  m = ModelChoice{};
  m.hidden = 0;
  CHECK_THROWS_AS(m.validate(), ValidationError);
}

TEST_CASE("config serialization round-trips and hashes stably") {
  auto cfg = tiny_config("cfg_roundtrip");
  const std::string text = cfg.to_json();
  auto back = ExperimentConfig::from_json(text);
  CHECK(back.to_json() == text);
  CHECK(back.hash() == cfg.hash());

  auto tweaked = cfg;
  tweaked.similarity.alpha = 0.5;
  CHECK(tweaked.hash() != cfg.hash());

  const auto path = cfg.out_dir / "config.json";
  cfg.save(path);
  auto loaded = ExperimentConfig::load(path);
  CHECK(loaded.to_json() == text);
  CHECK_THROWS_AS(ExperimentConfig::load(cfg.out_dir / "missing.json"), IoError);
}

TEST_CASE("unknown config keys are rejected") {
  auto cfg = tiny_config("cfg_unknown");
  nlohmann::json doc = nlohmann::json::parse(cfg.to_json());
  doc["unexpected_key"] = 1;
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(doc.dump()),
                       doctest::Contains("unexpected_key"), IoError);
  nlohmann::json doc2 = nlohmann::json::parse(cfg.to_json());
  doc2["train"]["learning_rat"] = 0.1;
  CHECK_THROWS_AS(ExperimentConfig::from_json(doc2.dump()), IoError);
}

TEST_CASE("layer spec factory covers every variant") {
  auto hybrid = make_layer_specs("hybrid", 133, 64, 4);
  REQUIRE(hybrid.size() == 5);
  CHECK(hybrid[0].kind == LayerKind::GCN);
  CHECK(hybrid[4].kind == LayerKind::GAT);

  for (auto [name, kind] : std::initializer_list<std::pair<const char*, LayerKind>>{
           {"gcn", LayerKind::GCN}, {"sage", LayerKind::SAGE}, {"gat", LayerKind::GAT}}) {
    auto specs = make_layer_specs(name, 133, 64, 4);
    REQUIRE(specs.size() == 5);
    for (const auto& s : specs) CHECK(s.kind == kind);
  }

  CHECK(make_layer_specs("mlp", 133, 64, 4).empty());
  CHECK_THROWS_AS(make_layer_specs("nope", 133, 64, 4), ValidationError);
}

TEST_CASE("edgeless graph isolates every node") {
  Eigen::MatrixXd features = Eigen::MatrixXd::Random(6, 4);
  auto g = edgeless_graph(features, {"a", "b", "c", "d", "e", "f"});
  CHECK(g.num_nodes() == 6);
  CHECK(g.num_edges() == 0);
  for (int v = 0; v < 6; ++v) CHECK(g.degree(v) == 0);
  CHECK(std::isinf(g.tau));
}

TEST_CASE("run_experiment writes the full artifact set") {
  auto cfg = tiny_config("full_run");
  auto summary = run_experiment(cfg);

  for (const char* name :
       {"cohort.csv", "schema.json", "edges.csv", "graph.json", "checkpoint.json", "history.csv",
        "metrics.json", "roc.csv", "attention.json", "manifest.json"})
    CHECK_MESSAGE(fs::exists(cfg.out_dir / name), name);

  CHECK(summary.n_nodes == 60);
  CHECK(summary.n_edges >= 0);
  CHECK(summary.best_epoch >= 1);
  CHECK(summary.test_metrics.auc_roc >= 0.0);
  CHECK(summary.test_metrics.auc_roc <= 1.0);
  CHECK(summary.test_metrics.n_evaluated == 9);  // 15% of 60
  CHECK(summary.config_hash == cfg.hash());

  // The manifest's output hashes match the files on disk.
  nlohmann::json manifest = nlohmann::json::parse(slurp(cfg.out_dir / "manifest.json"));
  CHECK(manifest.at("config_hash").get<std::string>() == hex64(cfg.hash()));
  for (const auto& [name, digest] : manifest.at("outputs").items())
    CHECK(digest.get<std::string>() == hex64(hash_file(cfg.out_dir / name)));

  // The attention export covers only directed pairs from the final GAT layer.
  nlohmann::json att = nlohmann::json::parse(slurp(cfg.out_dir / "attention.json"));
  CHECK(att.at("n_nodes").get<int>() == 60);
  CHECK(att.at("heads").get<int>() == 2);
  const auto& entries = att.at("entries");
  REQUIRE(entries.is_array());
  CHECK_FALSE(entries.empty());
  CHECK(entries[0].contains("src"));
  CHECK(entries[0].contains("dst"));
  CHECK(entries[0].at("weights").size() == 2);
  CHECK(entries[0].contains("mean"));
}

TEST_CASE("rerunning an experiment is byte-identical") {
  auto cfg = tiny_config("rerun_a");
  run_experiment(cfg);
  auto first = slurp(cfg.out_dir / "checkpoint.json");
  auto first_manifest = slurp(cfg.out_dir / "manifest.json");
  auto cfg2 = cfg;
  cfg2.out_dir = fresh_dir("rerun_b");
  run_experiment(cfg2);
  CHECK(slurp(cfg2.out_dir / "checkpoint.json") == first);
  // Manifests embed out_dir-independent content only when configs match;
  // out_dir differs here, so compare everything except that field.
  nlohmann::json m1 = nlohmann::json::parse(first_manifest);
  nlohmann::json m2 = nlohmann::json::parse(slurp(cfg2.out_dir / "manifest.json"));
  CHECK(m1.at("outputs") == m2.at("outputs"));
}

TEST_CASE("the mlp variant trains without a graph") {
  auto cfg = tiny_config("mlp_run");
  cfg.model.variant = "mlp";
  auto summary = run_experiment(cfg);
  CHECK_FALSE(fs::exists(cfg.out_dir / "edges.csv"));
  CHECK_FALSE(fs::exists(cfg.out_dir / "graph.json"));
  CHECK(fs::exists(cfg.out_dir / "checkpoint.json"));
  CHECK(summary.n_edges == 0);
  // No attention layer either; the export has no entries.
  nlohmann::json att = nlohmann::json::parse(slurp(cfg.out_dir / "attention.json"));
  CHECK(att.at("entries").empty());
  CHECK(att.at("heads").get<int>() == 0);
}

TEST_CASE("evaluate_checkpoint reproduces the training-time test metrics") {
  auto cfg = tiny_config("eval_match");
  auto summary = run_experiment(cfg);
  auto eval_dir = fresh_dir("eval_match_out");
  auto eval_cfg = cfg;
  eval_cfg.out_dir = eval_dir;
  auto evaled = evaluate_checkpoint(eval_cfg, cfg.out_dir / "checkpoint.json");
  CHECK(evaled.test_metrics.auc_roc == doctest::Approx(summary.test_metrics.auc_roc).epsilon(1e-12));
  CHECK(evaled.test_metrics.point.f1 == doctest::Approx(summary.test_metrics.point.f1));
  CHECK(evaled.test_metrics.n_evaluated == summary.test_metrics.n_evaluated);
  CHECK(fs::exists(eval_dir / "metrics.json"));
}

TEST_CASE("evaluate_checkpoint rejects a mismatched cohort") {
  auto cfg = tiny_config("eval_mismatch");
  run_experiment(cfg);
  auto other = cfg;
  other.out_dir = fresh_dir("eval_mismatch_out");
  other.cohort.generate->seed = 99;  // different cohort, different schema
  CHECK_THROWS_WITH_AS(evaluate_checkpoint(other, cfg.out_dir / "checkpoint.json"),
                       doctest::Contains("schema"), ValidationError);
}

TEST_CASE("ablation produces eight seed-aggregated rows") {
  auto cfg = tiny_config("ablate_run", 60);
  cfg.ablation.seeds = 2;
  cfg.train.max_epochs = 4;
  cfg.train.patience = 2;
  auto rows = run_ablation(cfg);
  REQUIRE(rows.size() == 8);

  std::set<std::string> graph_variants, arch_variants;
  for (const auto& r : rows) {
    CHECK(r.seeds == 2);
    CHECK(r.auc_mean >= 0.0);
    CHECK(r.auc_mean <= 1.0);
    CHECK(r.auc_std >= 0.0);
    if (r.study == "graph") graph_variants.insert(r.variant);
    if (r.study == "architecture") arch_variants.insert(r.variant);
  }
  CHECK(graph_variants == std::set<std::string>{"mlp", "cosine", "jaccard", "hybrid"});
  CHECK(arch_variants == std::set<std::string>{"gcn", "sage", "gat", "hybrid"});

  // The hybrid cell is shared between the two studies: same config hash.
  std::string h_graph, h_arch;
  for (const auto& r : rows) {
    if (r.study == "graph" && r.variant == "hybrid") h_graph = r.config_hash;
    if (r.study == "architecture" && r.variant == "hybrid") h_arch = r.config_hash;
  }
  CHECK(h_graph == h_arch);

  CHECK(fs::exists(cfg.out_dir / "ablation.csv"));
  std::ifstream in(cfg.out_dir / "ablation.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "study,variant,seeds,auc_mean,auc_std,f1_mean,f1_std,config_hash");
  std::size_t lines = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 8);
}

TEST_CASE("csv-sourced cohorts flow through the pipeline") {
  auto gen_cfg = tiny_config("csv_source_gen");
  // Produce a cohort file, then run an experiment that ingests it.
  auto cohort = generate_cohort(*gen_cfg.cohort.generate);
  const auto csv = gen_cfg.out_dir / "cohort_input.csv";
  save_cohort(cohort, csv);

  ExperimentConfig cfg;
  cfg.cohort.csv = csv;
  cfg.model.hidden = 8;
  cfg.model.gat_heads = 2;
  cfg.train.max_epochs = 4;
  cfg.train.patience = 2;
  cfg.out_dir = fresh_dir("csv_source_run");
  auto summary = run_experiment(cfg);
  CHECK(summary.n_nodes == 60);
  nlohmann::json manifest = nlohmann::json::parse(slurp(cfg.out_dir / "manifest.json"));
  CHECK(manifest.at("inputs").size() == 1);
}
