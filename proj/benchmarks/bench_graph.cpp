#include <benchmark/benchmark.h>

#include "medgraph/ehr.hpp"
#include "medgraph/encoder.hpp"
#include "medgraph/graph.hpp"

namespace {

struct Encoded {
  Eigen::MatrixXd features;
  std::vector<std::string> ids;
  medgraph::EncodingSchema schema;
};

Encoded encode_cohort_of(int n) {
  medgraph::CohortSpec spec;
  spec.n_patients = n;
  spec.seed = 7;
  auto cohort = medgraph::generate_cohort(spec);
  Encoded e;
  e.schema = medgraph::fit_schema_auto(cohort);
  e.features = medgraph::encode_cohort(cohort, e.schema);
  for (const auto& rec : cohort) e.ids.push_back(rec.id);
  return e;
}

void BM_BuildGraph(benchmark::State& state) {
  const Encoded e = encode_cohort_of(static_cast<int>(state.range(0)));
  medgraph::SimilarityParams params;
  for (auto _ : state) {
    auto graph = medgraph::build_graph(e.features, e.ids, e.schema, params);
    benchmark::DoNotOptimize(graph.num_edges());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildGraph)->Arg(100)->Arg(200)->Arg(400)->Arg(800)->Complexity();

void BM_AddNode(benchmark::State& state) {
  const Encoded e = encode_cohort_of(static_cast<int>(state.range(0)) + 1);
  const Eigen::Index n = e.features.rows() - 1;
  medgraph::SimilarityParams params;
  const auto base = medgraph::build_graph(e.features.topRows(n),
                                          {e.ids.begin(), e.ids.end() - 1}, e.schema, params);
  const Eigen::VectorXd fv = e.features.row(n);
  for (auto _ : state) {
    auto grown = medgraph::add_node(base, fv, e.ids.back(), e.schema);
    benchmark::DoNotOptimize(grown.num_edges());
  }
}
BENCHMARK(BM_AddNode)->Arg(200)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
