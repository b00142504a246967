#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lsm/dataset.hpp"
#include "lsm/matrix.hpp"

namespace lsm {

enum class ModelFamily { kLR, kSVM, kRF, kGBT };

std::string_view family_name(ModelFamily f);
/// Accepts LR, SVM, RF, GBT (and Xgboost as an alias of GBT), case-insensitive.
ModelFamily parse_family(std::string_view name);

/// Hyperparameter name -> allowed textual values.
using HyperGrid = std::map<std::string, std::vector<std::string>>;

/// A family plus one value per hyperparameter, each drawn from the family grid.
struct ModelSpec {
  ModelFamily family = ModelFamily::kLR;
  std::map<std::string, std::string> hyper;

  /// Compact "k=v;k=v" form, used in logs and CSV exports.
  std::string describe() const;
};

/// The published hyperparameter ranges for a family.
const HyperGrid& default_grid(ModelFamily f);
/// The best configuration reported for a family (inside default_grid).
ModelSpec default_spec(ModelFamily f);
/// Throws UsageError naming the first hyperparameter outside the family grid.
void validate_spec(const ModelSpec& spec);
/// Throws UsageError unless `grid` is a non-empty restriction of default_grid.
void validate_grid(ModelFamily f, const HyperGrid& grid);

// ---------------------------------------------------------------------------
// Per-family parameters and learned state.

struct LogisticParams {
  double C = 100.0;  ///< inverse L2 strength; penalty is ||w||^2 / (2C)
  int max_iter = 100;
  double grad_tol = 1e-6;
};

struct LogisticState {
  std::vector<double> weights;
  double bias = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
};

enum class SvmKernel { kLinear, kPoly, kRbf };

struct SvmParams {
  double C = 180.0;
  double gamma = 0.95;
  std::optional<int> degree = 2;  ///< required for the polynomial kernel
  SvmKernel kernel = SvmKernel::kRbf;
  double coef0 = 0.0;
  double tol = 1e-3;  ///< maximal KKT violation at termination
  std::size_t max_iter = 2'000'000;
};

struct SvmState {
  SvmKernel kernel = SvmKernel::kRbf;
  double gamma = 0.0;
  int degree = 1;
  double coef0 = 0.0;
  Matrix support;                 ///< support vectors
  std::vector<double> coef;       ///< alpha_i * y_i
  double rho = 0.0;               ///< decision = sum coef K(sv, x) - rho
  double platt_a = 0.0, platt_b = 0.0;
  std::vector<double> linear_w;   ///< explicit weights for the linear kernel
  double kkt_violation = 0.0;
  std::size_t iterations = 0;
};

enum class SplitCriterion { kGini, kEntropy };
enum class MaxFeatures { kAuto, kSqrt, kLog2, kAll };

struct ForestParams {
  int n_estimators = 100;
  int max_depth = 15;
  int min_samples_split = 10;
  int min_samples_leaf = 2;
  MaxFeatures max_features = MaxFeatures::kAuto;
  SplitCriterion criterion = SplitCriterion::kEntropy;
};

struct BoostParams {
  int n_estimators = 100;
  int max_depth = 12;
  double gamma = 0.1;             ///< minimum loss reduction to split
  double colsample_bytree = 1.0;
  double learning_rate = 0.3;
  double reg_lambda = 1.0;
  double min_child_weight = 1.0;
};

struct TreeNode {
  int feature = -1;  ///< -1 marks a leaf
  double threshold = 0.0;  ///< go left when x <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;  ///< leaf: class-1 frequency (forest) or weight (boosting)
};

struct Tree {
  std::vector<TreeNode> nodes;
  double predict(std::span<const double> x) const;
  int depth() const;
};

struct ForestState {
  std::vector<Tree> trees;
};

struct BoostState {
  double base_margin = 0.0;
  double learning_rate = 0.3;
  std::vector<Tree> trees;
};

// ---------------------------------------------------------------------------

/// A trained classifier. Immutable; predictions are pure.
class FittedModel {
 public:
  using State = std::variant<LogisticState, SvmState, ForestState, BoostState>;

  FittedModel(ModelSpec spec, State state, std::vector<std::string> factor_names, std::uint64_t seed,
              std::optional<std::vector<double>> importance);

  ModelFamily family() const { return spec_.family; }
  const ModelSpec& spec() const { return spec_; }
  const State& state() const { return state_; }
  const std::vector<std::string>& factor_names() const { return factor_names_; }
  std::size_t factor_count() const { return factor_names_.size(); }
  std::uint64_t seed() const { return seed_; }

  /// Raw score: logit for LR/GBT, signed margin for SVM, 2p-1 for RF.
  double decision(std::span<const double> x) const;
  /// Probability of class 1, in [0, 1].
  double predict_proba(std::span<const double> x) const;
  /// Class label: proba >= 0.5, except SVM which uses the sign of its margin.
  int predict(std::span<const double> x) const;

  std::vector<double> predict_proba(const Matrix& X) const;
  std::vector<int> predict(const Matrix& X) const;

  /// Per-factor importance: |w| for LR and linear SVM, normalized impurity
  /// decrease for RF, total split gain for GBT. Empty for nonlinear SVM.
  const std::optional<std::vector<double>>& importance() const { return importance_; }

  /// Normalization statistics the inputs are expected to have been scaled
  /// with (one per factor), carried along for raster scoring.
  const std::optional<std::vector<NormStat>>& normalization() const { return norm_; }
  void set_normalization(std::vector<NormStat> stats);

  std::string serialize() const;
  static FittedModel deserialize(std::string_view text);

 private:
  ModelSpec spec_;
  State state_;
  std::vector<std::string> factor_names_;
  std::uint64_t seed_;
  std::optional<std::vector<double>> importance_;
  std::optional<std::vector<NormStat>> norm_;
};

/// L2 logistic regression fitted by Newton / IRLS with backtracking.
FittedModel fit_logistic(const Matrix& X, std::span<const int> y, const LogisticParams& params,
                         std::vector<std::string> names = {}, std::uint64_t seed = 0);

/// Soft-margin SVM via SMO (maximal-violating pair with second-order working
/// set selection), Platt-calibrated on training margins. Throws NumericError
/// if max_iter is reached.
FittedModel fit_svm(const Matrix& X, std::span<const int> y, const SvmParams& params,
                    std::vector<std::string> names = {}, std::uint64_t seed = 0);

/// Bagged CART trees. Constant columns are never split on and do not count
/// toward max_features.
FittedModel fit_random_forest(const Matrix& X, std::span<const int> y, const ForestParams& params,
                              std::vector<std::string> names = {}, std::uint64_t seed = 0);

/// Newton boosting of depth-limited trees on logistic loss.
FittedModel fit_gbt(const Matrix& X, std::span<const int> y, const BoostParams& params,
                    std::vector<std::string> names = {}, std::uint64_t seed = 0);

/// Dispatches on spec.family after validate_spec().
FittedModel fit_model(const ModelSpec& spec, const Matrix& X, std::span<const int> y,
                      std::vector<std::string> names = {}, std::uint64_t seed = 0);

LogisticParams logistic_params(const ModelSpec& spec);
SvmParams svm_params(const ModelSpec& spec);
ForestParams forest_params(const ModelSpec& spec);
BoostParams boost_params(const ModelSpec& spec);

double accuracy(const FittedModel& model, const Matrix& X, std::span<const int> y);

/// Importance as the accuracy lost on (X, y) when each column is replaced by
/// zero (the training mean after normalization). Clamped at 0.
std::vector<double> accuracy_drop_importance(const FittedModel& model, const Matrix& X, std::span<const int> y);

struct SearchTrial {
  ModelSpec spec;
  double valid_accuracy = 0.0;
  std::string error;  ///< non-empty when the fit failed (scored as 0)
};

struct SearchResult {
  ModelSpec best;
  double best_accuracy = 0.0;
  std::vector<SearchTrial> trials;
};

/// Draws n_draws configurations uniformly (with replacement) from `grid`,
/// fits each on the training rows and keeps the best validation accuracy
/// (earliest draw wins ties).
SearchResult random_search(ModelFamily family, const HyperGrid& grid, const Matrix& X_train,
                           std::span<const int> y_train, const Matrix& X_valid, std::span<const int> y_valid,
                           std::size_t n_draws, std::uint64_t seed);

namespace detail {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;  ///< impurity decrease (CART) or loss reduction (boosting)
};

/// Best CART split of `rows` over `features` (weighted impurity decrease
/// N*I(parent) - N_L*I(L) - N_R*I(R)). Ties keep the lowest feature and
/// threshold. feature = -1 when no admissible split exists.
SplitChoice best_cart_split(const Matrix& X, std::span<const int> y, std::span<const std::size_t> rows,
                            std::span<const std::size_t> features, SplitCriterion criterion,
                            std::size_t min_samples_leaf);

/// Best boosting split: 0.5*(GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)).
/// The caller compares the result against gamma.
SplitChoice best_gbt_split(const Matrix& X, std::span<const double> grad, std::span<const double> hess,
                           std::span<const std::size_t> rows, std::span<const std::size_t> features,
                           double reg_lambda, double min_child_weight);

/// Columns of X whose values are not all identical.
std::vector<std::size_t> varying_columns(const Matrix& X);

}  // namespace detail

}  // namespace lsm
