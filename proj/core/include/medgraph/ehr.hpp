// Patient data model: cohort generation, CSV ingestion, severity proxy labels.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "medgraph/common.hpp"

namespace medgraph {

// Aggregated statistics for one vital/lab signal over an ICU stay.
// Each statistic may be missing independently; missing is represented
// explicitly, never as a sentinel number.
struct VitalTriple {
  std::optional<double> mean;
  std::optional<double> vmin;
  std::optional<double> vmax;

  bool any_present() const { return mean || vmin || vmax; }
  bool operator==(const VitalTriple&) const = default;
};

// One ICU stay. Unit represented by a graph node downstream.
struct PatientRecord {
  std::string id;
  double age_years = 0.0;
  std::string gender;
  std::string ethnicity;
  std::string admission_type;
  std::set<std::string> diagnosis_codes;
  int charlson_index = 0;
  std::map<std::string, VitalTriple> vital_aggregates;  // keyed by signal name
  std::map<std::string, bool> intervention_flags;
  std::optional<double> fluid_input_ml;
  std::map<std::string, bool> medication_flags;
  double los_days = 1.0;
  bool died_in_icu = false;
  int num_interventions = 0;

  bool operator==(const PatientRecord&) const = default;
};

// Throws ValidationError naming the offending field.
void validate_record(const PatientRecord& rec, const std::string& context = {});

// Controls for the synthetic cohort generator. signal_strength is the
// label-conditioned mean shift, in standard deviations, applied to the
// deterioration-profile features of patients who died.
struct CohortSpec {
  int n_patients = 0;
  std::uint64_t seed = 0;
  double mortality_rate = 0.2;
  double signal_strength = 1.0;
  double missing_rate = 0.0;

  void validate() const;  // throws ValidationError naming the field
};

// Canonical names used by both the generator and the CSV schema.
const std::vector<std::string>& vital_signal_names();       // hr, bp, glucose, creatinine, lactate
const std::vector<std::string>& intervention_flag_names();  // ventilation, dialysis
const std::vector<std::string>& medication_category_names();

// Deterministic given spec.seed. Exactly round(mortality_rate * n) deaths.
std::vector<PatientRecord> generate_cohort(const CohortSpec& spec);

// CSV schema (documented in README): one header row, comma separated,
// empty cell = missing. Throws IoError with row/column context on
// malformed input, ValidationError on invariant violations.
std::vector<PatientRecord> load_cohort(const std::filesystem::path& path);
void save_cohort(const std::vector<PatientRecord>& cohort, const std::filesystem::path& path);

// Normalization bounds for the severity proxy, taken over a training cohort.
struct SeverityBounds {
  double interventions_min = 0.0;
  double interventions_max = 0.0;
  double los_min = 0.0;
  double los_max = 0.0;
};

SeverityBounds compute_severity_bounds(const std::vector<PatientRecord>& cohort);
SeverityBounds compute_severity_bounds(const std::vector<PatientRecord>& cohort,
                                       const std::vector<int>& subset);

// 0.4 * minmax(num_interventions) + 0.3 * minmax(los_days) + 0.3 * [died].
// A degenerate bound (min == max) contributes 0. Result clamped to [0, 1].
double severity_proxy(const PatientRecord& rec, const SeverityBounds& bounds);

}  // namespace medgraph
