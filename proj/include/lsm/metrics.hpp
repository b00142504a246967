#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lsm {

struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::uint64_t total() const { return tp + tn + fp + fn; }
};

/// Counts from true labels and predicted labels (nonzero = positive).
ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predicted);

struct EvalReport {
  ConfusionCounts counts;
  double accuracy = 0.0;
  double precision = 0.0;      ///< TP / (TP + FP)
  double specificity = 0.0;    ///< TN / (TN + FP), exported as specificity_paper_eq12
  double recall = 0.0;
  double f1 = 0.0;
  double kappa = 0.0;
  double auc = 0.0;
  /// Set when a zero denominator forced a metric to 0.
  bool precision_undefined = false;
  bool specificity_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
  bool kappa_undefined = false;
};

/// All count-based metrics (auc left at 0). Throws UsageError on an empty matrix.
EvalReport compute_metrics(const ConfusionCounts& counts);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> curve;  ///< starts at (0,0), ends at (1,1)
  double auc = 0.0;
};

/// ROC by sweeping the distinct scores from high to low; tied scores move
/// diagonally, so the trapezoid area equals the Mann-Whitney statistic.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Scores and labels to a full report (counts at threshold 0.5 on the scores).
EvalReport evaluate(std::span<const double> proba, std::span<const int> predicted, std::span<const int> labels);

/// (min, Q1, median, Q3, max) with linear interpolation between order statistics.
std::array<double, 5> five_number_summary(std::span<const double> values);

struct WilcoxonResult {
  double w = 0.0;       ///< min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n = 0;    ///< pairs with nonzero difference
  double p = 1.0;       ///< two-sided
  bool exact = true;
};

/// Signed-rank test on paired samples. Zero differences are dropped and tied
/// magnitudes get average ranks. Exact null distribution for n <= 25, normal
/// approximation with tie and continuity correction above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

}  // namespace lsm
