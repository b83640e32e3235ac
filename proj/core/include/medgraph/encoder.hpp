// Fits an encoding schema on a training cohort and maps records to the
// fixed-width node feature vector (continuous block + binary block).
#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "medgraph/ehr.hpp"

namespace medgraph {

inline constexpr int kFeatureDim = 133;

struct ContinuousSpec {
  std::string name;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;  // over present training values; imputation target
};

struct CategoricalSpec {
  std::string field;
  std::vector<std::string> vocab;  // first-appearance order
};

// Immutable after fit. Layout: [continuous | one-hot categoricals | flags |
// top-K diagnosis indicators]; everything after the continuous block is the
// binary block.
struct EncodingSchema {
  std::vector<ContinuousSpec> continuous;
  std::vector<CategoricalSpec> categoricals;
  std::vector<std::string> flags;
  std::vector<std::string> top_codes;
  // Reserved width of the code block. May exceed top_codes.size() when the
  // cohort expresses fewer distinct codes; the surplus columns stay zero so
  // the overall width is stable across cohorts.
  int code_slots = 0;

  int continuous_dim() const { return static_cast<int>(continuous.size()); }
  int onehot_dim() const;
  int flag_dim() const { return static_cast<int>(flags.size()); }
  int code_dim() const { return code_slots; }
  int total_dim() const { return continuous_dim() + onehot_dim() + flag_dim() + code_dim(); }

  // Index partitions of [0, total_dim).
  int continuous_begin() const { return 0; }
  int continuous_end() const { return continuous_dim(); }
  int binary_begin() const { return continuous_dim(); }
  int binary_end() const { return total_dim(); }

  int continuous_index(const std::string& name) const;  // -1 if absent
  int flag_index(const std::string& name) const;
  int code_index(const std::string& code) const;

  std::string to_json() const;
  static EncodingSchema from_json(const std::string& text);
  std::uint64_t hash() const;
};

// Fits min/max/mean per continuous field, vocabularies in first-appearance
// order, and the top_k most frequent diagnosis codes (ties lexicographic).
// Throws ValidationError if the assembled width is not kFeatureDim.
EncodingSchema fit_schema(const std::vector<PatientRecord>& cohort, int top_k_codes);

// Computes the residual top-K automatically so the width lands on kFeatureDim.
EncodingSchema fit_schema_auto(const std::vector<PatientRecord>& cohort);

using FeatureVec = Eigen::VectorXd;

// Total and deterministic for any record under a fitted schema. Continuous
// values are min-max scaled and clamped to [0,1]; missing values impute to the
// normalized cohort mean; unseen categories encode as an all-zero block.
FeatureVec encode(const PatientRecord& rec, const EncodingSchema& schema);
Eigen::MatrixXd encode_cohort(const std::vector<PatientRecord>& cohort,
                              const EncodingSchema& schema);

// Active indices of the binary block, sorted ascending. Feeds the structural
// (Jaccard) half of the hybrid similarity.
std::vector<int> split_binary_view(const FeatureVec& fv, const EncodingSchema& schema);

}  // namespace medgraph
