#include <benchmark/benchmark.h>

#include "medgraph/ehr.hpp"
#include "medgraph/encoder.hpp"
#include "medgraph/gnn.hpp"
#include "medgraph/graph.hpp"
#include "medgraph/training.hpp"

namespace {

struct Setup {
  medgraph::PatientGraph graph;
  Eigen::MatrixXd features;
  medgraph::ModelParams params;
  medgraph::Heads heads;
  std::vector<int> labels;
  Eigen::VectorXd targets;
};

Setup make_setup(int n) {
  medgraph::CohortSpec spec;
  spec.n_patients = n;
  spec.seed = 7;
  auto cohort = medgraph::generate_cohort(spec);
  auto schema = medgraph::fit_schema_auto(cohort);
  Setup s;
  s.features = medgraph::encode_cohort(cohort, schema);
  std::vector<std::string> ids;
  s.targets = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(cohort.size()), 0.5);
  for (const auto& rec : cohort) {
    ids.push_back(rec.id);
    s.labels.push_back(rec.died_in_icu ? 1 : 0);
  }
  s.graph = medgraph::build_graph(s.features, ids, schema, medgraph::SimilarityParams{});
  const auto specs = medgraph::hybrid_stack(static_cast<int>(s.features.cols()), 64, 4);
  s.params = medgraph::init_model(specs, 1);
  s.heads = medgraph::init_heads(64, 2);
  return s;
}

void BM_ModelForward(benchmark::State& state) {
  Setup s = make_setup(static_cast<int>(state.range(0)));
  // One training pass so batch-norm running stats exist for eval mode.
  std::vector<medgraph::LayerTrace> traces;
  medgraph::model_forward(s.features, s.graph, s.params, medgraph::Mode::Train, &traces);
  for (auto _ : state) {
    auto out = medgraph::model_forward(s.features, s.graph, s.params, medgraph::Mode::Eval);
    benchmark::DoNotOptimize(out.embedding.sum());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ModelForward)->Arg(100)->Arg(200)->Arg(400)->Complexity();

void BM_TrainStep(benchmark::State& state) {
  Setup s = make_setup(static_cast<int>(state.range(0)));
  medgraph::TrainConfig cfg;
  std::vector<int> mask(s.labels.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = static_cast<int>(i);
  auto adam = medgraph::init_adam(s.params, s.heads);
  for (auto _ : state) {
    double loss = 0.0;
    auto grads = medgraph::backward(s.features, s.graph, s.params, s.heads, s.labels, s.targets,
                                    cfg, mask, &loss);
    medgraph::adam_step(s.params, s.heads, grads, adam, cfg.learning_rate);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_TrainStep)->Arg(100)->Arg(200);

}  // namespace
