#include "lsm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include <fmt/format.h>

#include "lsm/error.hpp"

namespace lsm {

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predicted) {
  if (labels.size() != predicted.size()) throw UsageError("confusion: length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool t = labels[i] != 0, p = predicted[i] != 0;
    if (t && p) ++c.tp;
    else if (!t && !p) ++c.tn;
    else if (p) ++c.fp;
    else ++c.fn;
  }
  return c;
}

EvalReport compute_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw UsageError("metrics: empty confusion matrix");
  // Every metric is one division of integer counts, so each value is the
  // correctly rounded rational.
  const auto tp = static_cast<std::int64_t>(c.tp), tn = static_cast<std::int64_t>(c.tn);
  const auto fp = static_cast<std::int64_t>(c.fp), fn = static_cast<std::int64_t>(c.fn);
  const std::int64_t n = tp + tn + fp + fn;

  auto ratio = [](std::int64_t num, std::int64_t den, bool& undefined) {
    if (den == 0) {
      undefined = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };

  EvalReport r;
  r.counts = c;
  bool unused = false;
  r.accuracy = ratio(tp + tn, n, unused);
  r.precision = ratio(tp, tp + fp, r.precision_undefined);
  r.specificity = ratio(tn, tn + fp, r.specificity_undefined);
  r.recall = ratio(tp, tp + fn, r.recall_undefined);
  // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN); it is 0/0 whenever TP = 0.
  if (tp == 0) {
    r.f1_undefined = true;
  } else {
    r.f1 = ratio(2 * tp, 2 * tp + fp + fn, r.f1_undefined);
  }
  // (P_acc - P_e) / (1 - P_e) with both terms scaled by n^2.
  const std::int64_t chance = (tp + fp) * (tp + fn) + (tn + fn) * (tn + fp);
  r.kappa = ratio((tp + tn) * n - chance, n * n - chance, r.kappa_undefined);
  return r;
}

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw UsageError("roc: length mismatch");
  std::size_t npos = 0;
  for (int l : labels) npos += l != 0;
  const std::size_t nneg = labels.size() - npos;
  if (npos == 0 || nneg == 0) throw DataError("roc: both classes are required");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocResult res;
  res.curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  // Accumulate in counts so the area is an exact rational until the final divide.
  double tp = 0, fp = 0, area2 = 0;  // twice the area in count units
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    double dtp = 0, dfp = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] != 0 ? dtp : dfp) += 1;
    area2 += dfp * (2.0 * tp + dtp);
    tp += dtp;
    fp += dfp;
    res.curve.push_back({s, fp / static_cast<double>(nneg), tp / static_cast<double>(npos)});
  }
  res.auc = area2 / (2.0 * static_cast<double>(npos) * static_cast<double>(nneg));
  return res;
}

EvalReport evaluate(std::span<const double> proba, std::span<const int> predicted, std::span<const int> labels) {
  auto r = compute_metrics(confusion(labels, predicted));
  std::size_t npos = 0;
  for (int l : labels) npos += l != 0;
  if (npos > 0 && npos < labels.size()) r.auc = roc_auc(proba, labels).auc;
  return r;
}

std::array<double, 5> five_number_summary(std::span<const double> values) {
  if (values.empty()) throw UsageError("five-number summary of an empty list");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return frac == 0.0 ? v[lo] : v[lo] + frac * (v[hi] - v[lo]);
  };
  return {v.front(), q(0.25), q(0.5), q(0.75), v.back()};
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("wilcoxon: samples differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  }
  if (d.empty()) throw DataError("wilcoxon: no nonzero differences");
  const std::size_t n = d.size();
  if (n < 5) throw DataError(fmt::format("wilcoxon: {} usable pairs, at least 5 required", n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return std::abs(d[x]) < std::abs(d[y]); });
  // Doubled ranks keep average ranks integral.
  std::vector<std::uint64_t> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
    const std::uint64_t r2 = i + j + 1;  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = r2;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  WilcoxonResult res;
  res.n = n;
  std::uint64_t wp2 = 0, total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (d[i] > 0) wp2 += rank2[i];
  }
  res.w_plus = static_cast<double>(wp2) / 2.0;
  res.w_minus = static_cast<double>(total2 - wp2) / 2.0;
  res.w = std::min(res.w_plus, res.w_minus);
  const std::uint64_t w2 = std::min(wp2, total2 - wp2);

  if (n <= 25) {
    // Number of sign patterns for each doubled W+ value.
    std::vector<double> ways(total2 + 1, 0.0);
    ways[0] = 1.0;
    std::uint64_t reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      reach += rank2[i];
      for (std::uint64_t s = reach; s >= rank2[i]; --s) ways[s] += ways[s - rank2[i]];
    }
    double below = 0.0;
    for (std::uint64_t s = 0; s <= w2; ++s) below += ways[s];
    res.p = std::min(1.0, 2.0 * below / std::ldexp(1.0, static_cast<int>(n)));
    res.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (res.w - mean + 0.5) / std::sqrt(var);
    res.p = std::min(1.0, std::erfc(-z / std::sqrt(2.0)));
    res.exact = false;
  }
  return res;
}

}  // namespace lsm
