// Evaluation metrics: rank-based AUC with ROC sweep, thresholded
// classification metrics with explicit undefined-denominator flags, and
// Spearman rank correlation.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace medgraph {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct Confusion {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
  long total() const { return tp + fp + tn + fn; }
};

struct ThresholdMetrics {
  double accuracy = 0.0;
  double precision = 0.0;  // 0 when undefined, see flag
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;
  Confusion confusion;
};

struct MetricsReport {
  double auc_roc = 0.0;
  double threshold = 0.5;
  ThresholdMetrics point;
  std::vector<RocPoint> roc_points;
  double spearman_rho = 0.0;
  bool spearman_defined = false;
  long n_evaluated = 0;

  std::string to_json() const;
};

// Average ranks (1-based, ties averaged); shared by AUC and Spearman.
std::vector<double> average_ranks(const std::vector<double>& values);

// Mann-Whitney AUC: P(random positive outranks random negative), ties 1/2.
// Labels are 0/1; throws when either class is absent.
double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels);

// Threshold sweep over distinct scores (predict positive iff score >= t),
// from (0,0) to (1,1).
std::vector<RocPoint> roc_curve(const std::vector<double>& scores, const std::vector<int>& labels);

ThresholdMetrics threshold_metrics(const std::vector<double>& scores,
                                   const std::vector<int>& labels, double threshold = 0.5);

// Pearson correlation of average ranks. Throws when either input has zero
// rank variance.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

void write_roc_csv(const std::vector<RocPoint>& points, const std::filesystem::path& path);

}  // namespace medgraph
