#include "medgraph/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

namespace medgraph {

namespace {

using ordered_json = nlohmann::ordered_json;

// Raw value of a continuous field, or nullopt when missing.
std::optional<double> continuous_value(const PatientRecord& rec, const std::string& name) {
  if (name == "age") return rec.age_years;
  if (name == "charlson") return static_cast<double>(rec.charlson_index);
  if (name == "fluid_ml") return rec.fluid_input_ml;
  // "<signal>_<stat>"
  auto pos = name.rfind('_');
  std::string signal = name.substr(0, pos);
  std::string stat = name.substr(pos + 1);
  auto it = rec.vital_aggregates.find(signal);
  if (it == rec.vital_aggregates.end()) return std::nullopt;
  if (stat == "mean") return it->second.mean;
  if (stat == "min") return it->second.vmin;
  return it->second.vmax;
}

std::vector<std::string> continuous_field_names() {
  std::vector<std::string> names = {"age", "charlson"};
  for (const auto& s : vital_signal_names())
    for (const char* stat : {"_mean", "_min", "_max"}) names.push_back(s + stat);
  names.push_back("fluid_ml");
  return names;
}

double normalize(double x, const ContinuousSpec& spec) {
  if (!(spec.max > spec.min)) return 0.0;
  return std::clamp((x - spec.min) / (spec.max - spec.min), 0.0, 1.0);
}

}  // namespace

int EncodingSchema::onehot_dim() const {
  int d = 0;
  for (const auto& c : categoricals) d += static_cast<int>(c.vocab.size());
  return d;
}

int EncodingSchema::continuous_index(const std::string& name) const {
  for (std::size_t i = 0; i < continuous.size(); ++i)
    if (continuous[i].name == name) return static_cast<int>(i);
  return -1;
}

int EncodingSchema::flag_index(const std::string& name) const {
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i] == name) return continuous_dim() + onehot_dim() + static_cast<int>(i);
  return -1;
}

int EncodingSchema::code_index(const std::string& code) const {
  for (std::size_t i = 0; i < top_codes.size(); ++i)
    if (top_codes[i] == code)
      return continuous_dim() + onehot_dim() + flag_dim() + static_cast<int>(i);
  return -1;
}

namespace {

EncodingSchema fit_schema_impl(const std::vector<PatientRecord>& cohort, int top_k_codes,
                               bool auto_k) {
  if (cohort.empty()) throw ValidationError("fit_schema requires a non-empty cohort");

  EncodingSchema schema;

  for (const auto& name : continuous_field_names()) {
    ContinuousSpec spec;
    spec.name = name;
    double sum = 0.0;
    long count = 0;
    bool first = true;
    for (const auto& rec : cohort) {
      auto v = continuous_value(rec, name);
      if (!v) continue;
      if (first) {
        spec.min = spec.max = *v;
        first = false;
      } else {
        spec.min = std::min(spec.min, *v);
        spec.max = std::max(spec.max, *v);
      }
      sum += *v;
      ++count;
    }
    spec.mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
    schema.continuous.push_back(std::move(spec));
  }

  for (const char* field : {"gender", "ethnicity", "admission_type"}) {
    CategoricalSpec spec;
    spec.field = field;
    for (const auto& rec : cohort) {
      const std::string& v = field == std::string("gender")     ? rec.gender
                             : field == std::string("ethnicity") ? rec.ethnicity
                                                                 : rec.admission_type;
      if (std::find(spec.vocab.begin(), spec.vocab.end(), v) == spec.vocab.end())
        spec.vocab.push_back(v);
    }
    schema.categoricals.push_back(std::move(spec));
  }

  for (const auto& f : intervention_flag_names()) {
    bool observed = std::any_of(cohort.begin(), cohort.end(), [&](const PatientRecord& r) {
      return r.intervention_flags.count(f) > 0;
    });
    if (observed) schema.flags.push_back(f);
  }
  std::set<std::string> med_union;
  for (const auto& rec : cohort)
    for (const auto& [name, _] : rec.medication_flags) med_union.insert(name);
  for (const auto& m : med_union) schema.flags.push_back(m);

  // Top-K codes by descending cohort frequency, ties lexicographic.
  std::map<std::string, long> freq;
  for (const auto& rec : cohort)
    for (const auto& code : rec.diagnosis_codes) ++freq[code];
  std::vector<std::pair<std::string, long>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  if (auto_k)
    top_k_codes = kFeatureDim - schema.continuous_dim() - schema.onehot_dim() - schema.flag_dim();
  if (top_k_codes < 0) top_k_codes = 0;
  schema.code_slots = top_k_codes;
  for (int i = 0; i < top_k_codes && i < static_cast<int>(ranked.size()); ++i)
    schema.top_codes.push_back(ranked[static_cast<std::size_t>(i)].first);

  if (schema.total_dim() != kFeatureDim)
    throw ValidationError("encoding schema width is " + std::to_string(schema.total_dim()) +
                          ", expected " + std::to_string(kFeatureDim) +
                          " (continuous " + std::to_string(schema.continuous_dim()) + ", one-hot " +
                          std::to_string(schema.onehot_dim()) + ", flags " +
                          std::to_string(schema.flag_dim()) + ", codes " +
                          std::to_string(schema.code_dim()) + ")");
  return schema;
}

}  // namespace

EncodingSchema fit_schema(const std::vector<PatientRecord>& cohort, int top_k_codes) {
  return fit_schema_impl(cohort, top_k_codes, false);
}

EncodingSchema fit_schema_auto(const std::vector<PatientRecord>& cohort) {
  return fit_schema_impl(cohort, 0, true);
}

FeatureVec encode(const PatientRecord& rec, const EncodingSchema& schema) {
  FeatureVec fv = FeatureVec::Zero(schema.total_dim());
  int at = 0;
  for (const auto& spec : schema.continuous) {
    auto v = continuous_value(rec, spec.name);
    fv[at++] = normalize(v ? *v : spec.mean, spec);
  }
  for (const auto& cat : schema.categoricals) {
    const std::string& v = cat.field == "gender"     ? rec.gender
                           : cat.field == "ethnicity" ? rec.ethnicity
                                                      : rec.admission_type;
    auto it = std::find(cat.vocab.begin(), cat.vocab.end(), v);
    if (it != cat.vocab.end()) fv[at + (it - cat.vocab.begin())] = 1.0;
    at += static_cast<int>(cat.vocab.size());
  }
  for (const auto& f : schema.flags) {
    auto ii = rec.intervention_flags.find(f);
    auto mi = rec.medication_flags.find(f);
    bool set = (ii != rec.intervention_flags.end() && ii->second) ||
               (mi != rec.medication_flags.end() && mi->second);
    fv[at++] = set ? 1.0 : 0.0;
  }
  for (const auto& code : schema.top_codes)
    fv[at++] = rec.diagnosis_codes.count(code) ? 1.0 : 0.0;
  return fv;
}

Eigen::MatrixXd encode_cohort(const std::vector<PatientRecord>& cohort,
                              const EncodingSchema& schema) {
  Eigen::MatrixXd x(cohort.size(), schema.total_dim());
  for (std::size_t i = 0; i < cohort.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = encode(cohort[i], schema).transpose();
  return x;
}

std::vector<int> split_binary_view(const FeatureVec& fv, const EncodingSchema& schema) {
  std::vector<int> active;
  for (int i = schema.binary_begin(); i < schema.binary_end(); ++i)
    if (fv[i] != 0.0) active.push_back(i);
  return active;
}

std::string EncodingSchema::to_json() const {
  ordered_json j;
  j["version"] = kVersion;
  j["total_dim"] = total_dim();
  j["continuous"] = ordered_json::array();
  for (const auto& c : continuous)
    j["continuous"].push_back({{"name", c.name}, {"min", c.min}, {"max", c.max}, {"mean", c.mean}});
  j["categoricals"] = ordered_json::array();
  for (const auto& c : categoricals)
    j["categoricals"].push_back({{"field", c.field}, {"vocab", c.vocab}});
  j["flags"] = flags;
  j["top_codes"] = top_codes;
  j["code_slots"] = code_slots;
  return j.dump(2);
}

EncodingSchema EncodingSchema::from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw IoError(std::string("cannot parse schema JSON: ") + e.what());
  }
  EncodingSchema schema;
  for (const auto& c : j.at("continuous"))
    schema.continuous.push_back(
        {c.at("name").get<std::string>(), c.at("min").get<double>(), c.at("max").get<double>(),
         c.at("mean").get<double>()});
  for (const auto& c : j.at("categoricals"))
    schema.categoricals.push_back(
        {c.at("field").get<std::string>(), c.at("vocab").get<std::vector<std::string>>()});
  schema.flags = j.at("flags").get<std::vector<std::string>>();
  schema.top_codes = j.at("top_codes").get<std::vector<std::string>>();
  schema.code_slots = j.at("code_slots").get<int>();
  if (schema.total_dim() != j.at("total_dim").get<int>())
    throw IoError("schema JSON is inconsistent: stored total_dim does not match layout");
  return schema;
}

std::uint64_t EncodingSchema::hash() const { return hash_bytes(to_json()); }

}  // namespace medgraph
