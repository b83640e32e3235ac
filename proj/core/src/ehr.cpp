#include "medgraph/ehr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace medgraph {

namespace {

struct SignalModel {
  const char* name;
  double mu;
  double sigma;
  double direction;  // +1: deterioration raises the value, -1: lowers it
  double floor;
};

// Baseline distributions for vital/lab aggregates. Deterioration profile:
// higher lactate/creatinine/glucose/heart rate, lower blood pressure.
constexpr SignalModel kSignals[] = {
    {"hr", 86.0, 14.0, +1.0, 30.0},
    {"bp", 74.0, 11.0, -1.0, 25.0},
    {"glucose", 138.0, 38.0, +1.0, 40.0},
    {"creatinine", 1.3, 0.7, +1.0, 0.2},
    {"lactate", 1.9, 1.1, +1.0, 0.3},
};

struct MedModel {
  const char* name;
  double base_p;
  double shift;  // added to base_p, scaled by signal, for patients who died
};

constexpr MedModel kMeds[] = {
    {"antibiotic", 0.55, 0.10},
    {"anticoagulant", 0.25, 0.00},
    {"diuretic", 0.30, 0.05},
    {"insulin", 0.22, 0.00},
    {"sedative", 0.35, 0.15},
    {"vasopressor", 0.15, 0.25},
};

constexpr int kCodePoolSize = 120;

double clamp_prob(double p) { return std::clamp(p, 0.01, 0.95); }

std::string code_name(int k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "C%03d", k + 1);
  return std::string(buf);
}

// Codes with index divisible by 3 are "severe": sampled more often for
// patients who died, which creates structural (Jaccard) outcome signal.
bool severe_code(int k) { return k % 3 == 0; }

std::string pick_categorical(std::mt19937_64& rng, const std::vector<std::string>& values,
                             std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  std::uniform_real_distribution<double> unif(0.0, total);
  double r = unif(rng);
  for (std::size_t i = 0; i < values.size(); ++i) {
    r -= weights[i];
    if (r <= 0.0) return values[i];
  }
  return values.back();
}

}  // namespace

const std::vector<std::string>& vital_signal_names() {
  static const std::vector<std::string> names = {"hr", "bp", "glucose", "creatinine", "lactate"};
  return names;
}

const std::vector<std::string>& intervention_flag_names() {
  static const std::vector<std::string> names = {"ventilation", "dialysis"};
  return names;
}

const std::vector<std::string>& medication_category_names() {
  static const std::vector<std::string> names = {"antibiotic", "anticoagulant", "diuretic",
                                                 "insulin",    "sedative",      "vasopressor"};
  return names;
}

void CohortSpec::validate() const {
  if (n_patients < 2) throw ValidationError("CohortSpec.n_patients must be >= 2");
  if (!(mortality_rate > 0.0 && mortality_rate < 1.0))
    throw ValidationError("CohortSpec.mortality_rate must lie in (0,1)");
  if (!(signal_strength >= 0.0)) throw ValidationError("CohortSpec.signal_strength must be >= 0");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0))
    throw ValidationError("CohortSpec.missing_rate must lie in [0,1)");
}

void validate_record(const PatientRecord& rec, const std::string& context) {
  auto fail = [&](const std::string& what) {
    throw ValidationError(context.empty() ? what : context + ": " + what);
  };
  if (rec.id.empty()) fail("PatientRecord.id must be non-empty");
  if (!(rec.age_years >= 0.0)) fail("PatientRecord.age_years must be >= 0");
  if (!(rec.los_days > 0.0)) fail("PatientRecord.los_days must be > 0");
  if (rec.charlson_index < 0) fail("PatientRecord.charlson_index must be >= 0");
  if (rec.num_interventions < 0) fail("PatientRecord.num_interventions must be >= 0");
  if (rec.fluid_input_ml && !(*rec.fluid_input_ml >= 0.0))
    fail("PatientRecord.fluid_input_ml must be >= 0");
  for (const auto& [name, t] : rec.vital_aggregates) {
    if (t.vmin && t.mean && *t.vmin > *t.mean) fail(name + "_min exceeds " + name + "_mean");
    if (t.mean && t.vmax && *t.mean > *t.vmax) fail(name + "_mean exceeds " + name + "_max");
    if (t.vmin && t.vmax && *t.vmin > *t.vmax) fail(name + "_min exceeds " + name + "_max");
  }
}

std::vector<PatientRecord> generate_cohort(const CohortSpec& spec) {
  spec.validate();
  const int n = spec.n_patients;
  const double sig = spec.signal_strength;
  std::mt19937_64 rng(spec.seed);

  // Exact death count: round(rate * n), then shuffled. Keeps the cohort
  // fraction within rounding error of the requested rate at any n.
  int n_pos = static_cast<int>(std::lround(spec.mortality_rate * n));
  n_pos = std::clamp(n_pos, 0, n);
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::fill(labels.begin(), labels.begin() + n_pos, 1);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::normal_distribution<double> stdnorm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Zipf-ish popularity over the diagnosis pool; per-label weights shift
  // probability mass toward severe codes for patients who died.
  std::vector<double> w_alive(kCodePoolSize), w_died(kCodePoolSize);
  for (int k = 0; k < kCodePoolSize; ++k) {
    w_alive[k] = 1.0 / (k + 5.0);
    w_died[k] = w_alive[k] * (severe_code(k) ? 1.0 + 1.6 * sig : 1.0);
  }

  std::vector<PatientRecord> cohort;
  cohort.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    PatientRecord rec;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "P%06d", i);
    rec.id = idbuf;
    rec.died_in_icu = y == 1;

    rec.age_years = std::clamp(64.0 + 16.0 * stdnorm(rng), 18.0, 99.0);
    rec.gender = unif(rng) < 0.5 ? "F" : "M";
    rec.ethnicity = pick_categorical(rng, {"white", "black", "hispanic", "asian", "other"},
                                     {0.52, 0.18, 0.14, 0.09, 0.07});
    double p_em = std::min(0.9, 0.60 + 0.08 * sig * y);
    rec.admission_type =
        pick_categorical(rng, {"emergency", "urgent", "elective"}, {p_em, 0.25, 0.15});

    rec.charlson_index =
        std::min(12, static_cast<int>(std::poisson_distribution<int>(2.0 + 0.5 * sig * y)(rng)));

    for (const auto& s : kSignals) {
      double mean = std::max(s.floor, s.mu + s.direction * sig * s.sigma * y + s.sigma * stdnorm(rng));
      double spread_lo = std::abs(stdnorm(rng)) * 0.35 * s.sigma;
      double spread_hi = std::abs(stdnorm(rng)) * 0.35 * s.sigma;
      VitalTriple t;
      t.mean = mean;
      t.vmin = std::max(mean - spread_lo, 0.05);
      t.vmax = mean + spread_hi;
      if (unif(rng) < spec.missing_rate) t = VitalTriple{};
      rec.vital_aggregates[s.name] = t;
    }

    rec.intervention_flags["ventilation"] = unif(rng) < clamp_prob(0.18 + 0.18 * sig * y);
    rec.intervention_flags["dialysis"] = unif(rng) < clamp_prob(0.07 + 0.10 * sig * y);

    for (const auto& m : kMeds)
      rec.medication_flags[m.name] = unif(rng) < clamp_prob(m.base_p + m.shift * sig * y);

    double fluid = std::exp(std::log(2500.0) + 0.5 * stdnorm(rng)) + 800.0 * sig * y;
    rec.fluid_input_ml = unif(rng) < spec.missing_rate ? std::nullopt : std::optional<double>(fluid);

    // Distinct diagnosis codes, weighted sampling without replacement.
    const std::vector<double>& w = y ? w_died : w_alive;
    int n_codes = 2 + std::poisson_distribution<int>(3.0)(rng);
    std::discrete_distribution<int> code_dist(w.begin(), w.end());
    for (int attempts = 0; static_cast<int>(rec.diagnosis_codes.size()) < n_codes && attempts < 200;
         ++attempts)
      rec.diagnosis_codes.insert(code_name(code_dist(rng)));

    int flags_set = 0;
    for (const auto& [_, v] : rec.intervention_flags) flags_set += v ? 1 : 0;
    rec.num_interventions =
        flags_set + std::poisson_distribution<int>(0.8 + 0.9 * sig * y)(rng);

    rec.los_days = std::max(0.15, std::exp(std::log(3.5) + 0.55 * stdnorm(rng)) + 1.2 * sig * y);

    validate_record(rec, rec.id);
    cohort.push_back(std::move(rec));
  }
  return cohort;
}

// ---------------------------------------------------------------------------
// CSV schema
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> fixed_columns_before_meds() {
  std::vector<std::string> cols = {"id", "age", "gender", "ethnicity", "admission_type",
                                   "diagnoses", "charlson"};
  for (const auto& s : vital_signal_names())
    for (const char* stat : {"_mean", "_min", "_max"}) cols.push_back(s + stat);
  for (const auto& f : intervention_flag_names()) cols.push_back(f);
  cols.push_back("fluid_ml");
  return cols;
}

const std::vector<std::string> kTrailingColumns = {"los_days", "num_interventions", "died"};

std::string expected_schema_summary() {
  std::ostringstream os;
  for (const auto& c : fixed_columns_before_meds()) os << c << ",";
  os << "med_<category>...,";
  for (std::size_t i = 0; i < kTrailingColumns.size(); ++i)
    os << kTrailingColumns[i] << (i + 1 < kTrailingColumns.size() ? "," : "");
  return os.str();
}

bool parse_flag(std::string_view cell, const std::string& context) {
  if (cell == "0") return false;
  if (cell == "1") return true;
  throw IoError("expected 0 or 1 in " + context + ", got '" + std::string(cell) + "'");
}

}  // namespace

void save_cohort(const std::vector<PatientRecord>& cohort, const std::filesystem::path& path) {
  // Medication columns: sorted union of categories across the cohort.
  std::set<std::string> med_set;
  for (const auto& rec : cohort)
    for (const auto& [name, _] : rec.medication_flags) med_set.insert(name);
  std::vector<std::string> meds(med_set.begin(), med_set.end());

  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());

  for (const auto& c : fixed_columns_before_meds()) out << c << ",";
  for (const auto& m : meds) out << "med_" << m << ",";
  out << "los_days,num_interventions,died\n";

  auto opt_cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };

  for (const auto& rec : cohort) {
    out << rec.id << "," << format_double(rec.age_years) << "," << rec.gender << ","
        << rec.ethnicity << "," << rec.admission_type << ",";
    bool first = true;
    for (const auto& code : rec.diagnosis_codes) {
      if (!first) out << ";";
      out << code;
      first = false;
    }
    out << "," << rec.charlson_index;
    for (const auto& s : vital_signal_names()) {
      auto it = rec.vital_aggregates.find(s);
      VitalTriple t = it == rec.vital_aggregates.end() ? VitalTriple{} : it->second;
      out << "," << opt_cell(t.mean) << "," << opt_cell(t.vmin) << "," << opt_cell(t.vmax);
    }
    for (const auto& f : intervention_flag_names()) {
      auto it = rec.intervention_flags.find(f);
      out << "," << (it != rec.intervention_flags.end() && it->second ? 1 : 0);
    }
    out << "," << opt_cell(rec.fluid_input_ml);
    for (const auto& m : meds) {
      auto it = rec.medication_flags.find(m);
      out << "," << (it != rec.medication_flags.end() && it->second ? 1 : 0);
    }
    out << "," << format_double(rec.los_days) << "," << rec.num_interventions << ","
        << (rec.died_in_icu ? 1 : 0) << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<PatientRecord> load_cohort(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cohort file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw IoError("empty cohort file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header = split(line, ',');
  for (auto& h : header) h = trim(h);

  // Validate the header: every fixed column must be present exactly once and
  // anything else must be a med_<category> column.
  std::vector<std::string> expected = fixed_columns_before_meds();
  expected.insert(expected.end(), kTrailingColumns.begin(), kTrailingColumns.end());
  std::map<std::string, int> col_index;
  std::vector<std::string> meds;  // in header order
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    if (col_index.count(h)) throw IoError("duplicate column '" + h + "' in " + path.string());
    if (std::find(expected.begin(), expected.end(), h) == expected.end() &&
        h.rfind("med_", 0) != 0)
      throw IoError("unknown column '" + h + "'; expected schema: " + expected_schema_summary());
    col_index[h] = static_cast<int>(i);
    if (h.rfind("med_", 0) == 0) meds.push_back(h.substr(4));
  }
  for (const auto& c : expected)
    if (!col_index.count(c))
      throw IoError("missing column '" + c + "'; expected schema: " + expected_schema_summary());

  std::vector<PatientRecord> cohort;
  int row_number = 1;  // header was row 1
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split(line, ',');
    if (cells.size() != header.size())
      throw IoError("row " + std::to_string(row_number) + ": expected " +
                    std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));

    auto cell = [&](const std::string& col) -> std::string_view {
      return cells[static_cast<std::size_t>(col_index.at(col))];
    };
    auto ctx = [&](const std::string& col) {
      return "row " + std::to_string(row_number) + " column " + col;
    };
    auto required_double = [&](const std::string& col) {
      std::string_view c = cell(col);
      if (c.empty()) throw IoError("missing required value in " + ctx(col));
      return parse_double(c, ctx(col));
    };
    auto optional_double = [&](const std::string& col) -> std::optional<double> {
      std::string_view c = cell(col);
      if (c.empty()) return std::nullopt;
      return parse_double(c, ctx(col));
    };

    PatientRecord rec;
    rec.id = std::string(cell("id"));
    if (rec.id.empty()) throw IoError("missing required value in " + ctx("id"));
    rec.age_years = required_double("age");
    rec.gender = std::string(cell("gender"));
    rec.ethnicity = std::string(cell("ethnicity"));
    rec.admission_type = std::string(cell("admission_type"));
    for (const auto& code : split(cell("diagnoses"), ';')) {
      std::string c = trim(code);
      if (!c.empty()) rec.diagnosis_codes.insert(c);
    }
    rec.charlson_index = static_cast<int>(parse_long(cell("charlson"), ctx("charlson")));
    for (const auto& s : vital_signal_names()) {
      VitalTriple t;
      t.mean = optional_double(s + "_mean");
      t.vmin = optional_double(s + "_min");
      t.vmax = optional_double(s + "_max");
      rec.vital_aggregates[s] = t;
    }
    for (const auto& f : intervention_flag_names())
      rec.intervention_flags[f] = parse_flag(cell(f), ctx(f));
    rec.fluid_input_ml = optional_double("fluid_ml");
    for (const auto& m : meds) rec.medication_flags[m] = parse_flag(cell("med_" + m), ctx("med_" + m));
    rec.los_days = required_double("los_days");
    rec.num_interventions =
        static_cast<int>(parse_long(cell("num_interventions"), ctx("num_interventions")));
    rec.died_in_icu = parse_flag(cell("died"), ctx("died"));

    validate_record(rec, "row " + std::to_string(row_number));
    cohort.push_back(std::move(rec));
  }
  return cohort;
}

// ---------------------------------------------------------------------------
// Severity proxy
// ---------------------------------------------------------------------------

SeverityBounds compute_severity_bounds(const std::vector<PatientRecord>& cohort) {
  std::vector<int> all(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) all[i] = static_cast<int>(i);
  return compute_severity_bounds(cohort, all);
}

SeverityBounds compute_severity_bounds(const std::vector<PatientRecord>& cohort,
                                       const std::vector<int>& subset) {
  if (subset.empty()) throw ValidationError("severity bounds require a non-empty cohort subset");
  SeverityBounds b;
  bool first = true;
  for (int idx : subset) {
    const auto& rec = cohort.at(static_cast<std::size_t>(idx));
    double ni = rec.num_interventions;
    if (first) {
      b.interventions_min = b.interventions_max = ni;
      b.los_min = b.los_max = rec.los_days;
      first = false;
    } else {
      b.interventions_min = std::min(b.interventions_min, ni);
      b.interventions_max = std::max(b.interventions_max, ni);
      b.los_min = std::min(b.los_min, rec.los_days);
      b.los_max = std::max(b.los_max, rec.los_days);
    }
  }
  return b;
}

namespace {
double minmax_or_zero(double x, double lo, double hi) {
  if (!(hi > lo)) return 0.0;  // degenerate bounds contribute nothing
  return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
}
}  // namespace

double severity_proxy(const PatientRecord& rec, const SeverityBounds& bounds) {
  double score = 0.4 * minmax_or_zero(rec.num_interventions, bounds.interventions_min,
                                      bounds.interventions_max) +
                 0.3 * minmax_or_zero(rec.los_days, bounds.los_min, bounds.los_max) +
                 0.3 * (rec.died_in_icu ? 1.0 : 0.0);
  return std::clamp(score, 0.0, 1.0);
}

}  // namespace medgraph
