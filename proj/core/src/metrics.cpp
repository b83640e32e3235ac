#include "medgraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "medgraph/common.hpp"

namespace medgraph {

namespace {

void check_binary(const std::vector<double>& scores, const std::vector<int>& labels,
                  const char* where) {
  if (scores.size() != labels.size())
    throw ValidationError(std::string(where) + ": scores and labels differ in length");
  if (scores.empty()) throw ValidationError(std::string(where) + ": empty input");
  bool pos = false, neg = false;
  for (int y : labels) (y != 0 ? pos : neg) = true;
  if (!pos || !neg) throw ValidationError(std::string(where) + ": both classes must be present");
}

}  // namespace

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_binary(scores, labels, "auc_roc");
  const std::vector<double> ranks = average_ranks(scores);
  double rank_sum_pos = 0.0;
  long n_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != 0) {
      rank_sum_pos += ranks[i];
      ++n_pos;
    }
  const long n_neg = static_cast<long>(labels.size()) - n_pos;
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<RocPoint> roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_binary(scores, labels, "roc_curve");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  long total_pos = 0;
  for (int y : labels) total_pos += (y != 0);
  const long total_neg = static_cast<long>(n) - total_pos;

  std::vector<RocPoint> points;
  points.push_back({0.0, 0.0});
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] != 0)
        ++tp;
      else
        ++fp;
    }
    points.push_back({static_cast<double>(fp) / static_cast<double>(total_neg),
                      static_cast<double>(tp) / static_cast<double>(total_pos)});
    i = j + 1;
  }
  return points;
}

ThresholdMetrics threshold_metrics(const std::vector<double>& scores,
                                   const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size())
    throw ValidationError("threshold_metrics: scores and labels differ in length");
  if (scores.empty()) throw ValidationError("threshold_metrics: empty input");
  ThresholdMetrics m;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool truth = labels[i] != 0;
    if (pred && truth)
      ++m.confusion.tp;
    else if (pred && !truth)
      ++m.confusion.fp;
    else if (!pred && truth)
      ++m.confusion.fn;
    else
      ++m.confusion.tn;
  }
  const auto& c = m.confusion;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.precision_defined = (c.tp + c.fp) > 0;
  m.precision = m.precision_defined ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall_defined = (c.tp + c.fn) > 0;
  m.recall = m.recall_defined ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1_defined = (m.precision + m.recall) > 0.0;
  m.f1 = m.f1_defined ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ValidationError("spearman: inputs differ in length");
  if (x.size() < 2) throw ValidationError("spearman: need at least two pairs");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw ValidationError("spearman: zero rank variance, correlation undefined");
  return sxy / std::sqrt(sxx * syy);
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["auc_roc"] = auc_roc;
  j["threshold"] = threshold;
  j["accuracy"] = point.accuracy;
  j["precision"] = point.precision;
  j["precision_defined"] = point.precision_defined;
  j["recall"] = point.recall;
  j["recall_defined"] = point.recall_defined;
  j["f1"] = point.f1;
  j["f1_defined"] = point.f1_defined;
  j["confusion"] = {{"tp", point.confusion.tp},
                    {"fp", point.confusion.fp},
                    {"tn", point.confusion.tn},
                    {"fn", point.confusion.fn}};
  j["spearman_rho"] = spearman_rho;
  j["spearman_defined"] = spearman_defined;
  j["n_evaluated"] = n_evaluated;
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const RocPoint& p : roc_points) pts.push_back({p.fpr, p.tpr});
  j["roc_points"] = std::move(pts);
  return j.dump(2);
}

void write_roc_csv(const std::vector<RocPoint>& points, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "fpr,tpr\n";
  for (const RocPoint& p : points)
    out << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace medgraph
