#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lsm/dataset.hpp"
#include "lsm/matrix.hpp"
#include "lsm/models.hpp"

namespace lsm {

/// Bit j selects factor j.
using FactorMask = std::vector<bool>;

std::size_t popcount(const FactorMask& m);
/// Character j is '1' when factor j is selected.
std::string mask_string(const FactorMask& m);
FactorMask parse_mask(std::string_view bits);
std::vector<std::size_t> mask_indices(const FactorMask& m);
/// Mask from the low p bits of `bits` (bit j = factor j).
FactorMask mask_from_bits(std::uint64_t bits, std::size_t p);
std::uint64_t mask_bits(const FactorMask& m);

/// Training and validation rows the wrapper methods score masks on.
struct WrapperData {
  Matrix X_train;
  std::vector<int> y_train;
  Matrix X_valid;
  std::vector<int> y_valid;
};

/// Validation accuracy of `spec` fitted on the selected columns, memoized by
/// mask. The fit seed depends only on (seed, mask), so scores do not depend on
/// the order or thread in which masks are evaluated.
class MaskFitness {
 public:
  MaskFitness(const WrapperData& data, ModelSpec spec, std::uint64_t seed);

  double operator()(const FactorMask& mask);
  /// Scores a batch; new masks are fitted in parallel.
  std::vector<double> evaluate(std::span<const FactorMask> masks);
  std::size_t fits() const { return cache_.size(); }

 private:
  double fit_one(const FactorMask& mask) const;

  const WrapperData& data_;
  ModelSpec spec_;
  std::uint64_t seed_;
  std::unordered_map<std::string, double> cache_;
};

struct TraceRow {
  std::size_t iteration = 0;
  double score = 0.0;       ///< method-specific: best-so-far or CV accuracy
  double mean_score = 0.0;  ///< population mean (swarms) or same as score
  std::string mask;
  std::string note;
};

struct SelectionResult {
  std::string method;
  FactorMask mask;
  double score = 0.0;
  double elapsed_seconds = 0.0;
  std::size_t fits = 0;  ///< classifier fits performed
  std::vector<TraceRow> trace;
  std::map<std::string, std::string> params;
};

// --- Information gain ratio ------------------------------------------------

struct IgrScore {
  std::size_t factor = 0;
  double vi = 0.0;  ///< gain ratio
  double gain = 0.0;
  double split_info = 0.0;
};

/// Equal-frequency bin codes: bin of v = number of cut points <= v, cut b at
/// sorted[floor(b * n / bins)], b = 1..bins-1.
std::vector<int> equal_frequency_bins(std::span<const double> values, std::size_t bins);

/// Gain ratio of every factor, sorted by descending VI then factor index.
/// Categorical factors use their own values as categories.
std::vector<IgrScore> igr_rank(const SampleTable& table, std::size_t bins = 10);
FactorMask igr_select(const SampleTable& table, std::size_t top_k = 8, std::size_t bins = 10);

// --- Wrappers ----------------------------------------------------------------

/// Backward elimination scored by k-fold CV on (X, y). The trace has one row
/// per factor count, from all factors down to one.
SelectionResult rfe(const Matrix& X, std::span<const int> y, const ModelSpec& spec, std::size_t cv_k,
                    std::uint64_t seed);

struct PsoParams {
  std::size_t swarm_size = 30;
  std::size_t iters = 1000;
  double w = 0.9;
  double c1 = 2.0;
  double c2 = 2.0;
  double v_max = 6.0;
  std::size_t stagnation = 50;  ///< 0 disables early stopping
};

SelectionResult pso_select(const WrapperData& data, const ModelSpec& spec, const PsoParams& params,
                           std::uint64_t seed);

struct HhoParams {
  std::size_t hawks = 30;
  std::size_t iters = 200;
  double w = 0.9;
  double c1 = 2.0;
  double c2 = 2.0;
  double alpha = 1.0;
  double beta = 1.0;
  double v_max = 6.0;
  double target = 1.0;          ///< stop once this fitness is reached
  std::size_t stagnation = 0;   ///< 0 disables early stopping
};

SelectionResult hho_select(const WrapperData& data, const ModelSpec& spec, const HhoParams& params,
                           std::uint64_t seed);

// --- LASSO ---------------------------------------------------------------------

/// Smallest lambda at which every coefficient of the objective
/// sum (y - X b)^2 + lambda * sum |b| is zero: 2 * max_j |x_j . y|.
double lasso_lambda_max(const Matrix& X, std::span<const double> y);

/// Cyclic coordinate descent until the largest coefficient change is <= tol.
std::vector<double> lasso_path(const Matrix& X, std::span<const double> y, double lambda, double tol = 1e-8,
                               std::size_t max_sweeps = 100000);

struct LassoParams {
  double lambda = 0.02;
  bool cv_lambda = false;
  std::size_t cv_k = 5;
  std::size_t grid_points = 50;
};

/// Labels are recoded to -1/+1. Throws DataError when nothing survives.
SelectionResult lasso_select(const Matrix& X, std::span<const int> y, const LassoParams& params, std::uint64_t seed);

// --- Exhaustive enumeration --------------------------------------------------

struct ExhaustiveRecord {
  FactorMask mask;
  std::size_t factor_count = 0;
  std::vector<double> accuracy;  ///< one per model spec
};

/// Every mask over p factors with popcount >= min_factors, ordered by
/// popcount then by mask_bits.
std::vector<FactorMask> enumerate_masks(std::size_t p, std::size_t min_factors);

/// Fits each spec on the training rows for every mask and scores test
/// accuracy. Throws UsageError for p > 20.
std::vector<ExhaustiveRecord> exhaustive(const Matrix& X_train, std::span<const int> y_train, const Matrix& X_test,
                                         std::span<const int> y_test, std::span<const ModelSpec> specs,
                                         std::size_t min_factors, std::uint64_t seed);

struct CountSummary {
  std::size_t factor_count = 0;
  std::size_t masks = 0;
  std::array<double, 5> q{};
};

struct ExhaustiveAnalytics {
  std::vector<CountSummary> by_count;                  ///< ascending factor count
  std::array<double, 5> overall{};                     ///< quartiles of all accuracies
  std::vector<std::array<std::size_t, 4>> band_counts; ///< [factor][band]
  std::vector<std::size_t> top100;                     ///< [factor]
  std::vector<std::size_t> top1000;
  std::size_t best = 0;                                ///< record index of the argmax
};

/// Ranking order: accuracy descending, then mask_bits ascending.
std::vector<std::size_t> rank_records(std::span<const ExhaustiveRecord> records, std::size_t model);

/// Quartile band of an accuracy: [Q0,Q1] -> 0, (Q1,Q2] -> 1, (Q2,Q3] -> 2, (Q3,Q4] -> 3.
std::size_t quartile_band(double value, const std::array<double, 5>& q);

ExhaustiveAnalytics analyze_exhaustive(std::span<const ExhaustiveRecord> records, std::size_t model, std::size_t p);

}  // namespace lsm
