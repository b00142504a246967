#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "lsm/error.hpp"
#include "lsm/models.hpp"
#include "lsm/parallel.hpp"
#include "lsm/rng.hpp"

namespace lsm {

std::string_view family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::kLR: return "LR";
    case ModelFamily::kSVM: return "SVM";
    case ModelFamily::kRF: return "RF";
    case ModelFamily::kGBT: return "GBT";
  }
  return "?";
}

ModelFamily parse_family(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), ::toupper);
  if (s == "LR") return ModelFamily::kLR;
  if (s == "SVM") return ModelFamily::kSVM;
  if (s == "RF") return ModelFamily::kRF;
  if (s == "GBT" || s == "XGBOOST") return ModelFamily::kGBT;
  throw UsageError(fmt::format("unknown model family '{}'", name));
}

std::string ModelSpec::describe() const {
  std::string out;
  for (const auto& [k, v] : hyper) {
    if (!out.empty()) out += ';';
    out += k + '=' + v;
  }
  return out;
}

const HyperGrid& default_grid(ModelFamily f) {
  static const HyperGrid lr{{"C", {"0.1", "1", "10", "100", "180"}},
                            {"penalty", {"l2"}},
                            {"solver", {"lbfgs", "liblinear"}}};
  static const HyperGrid svm{{"C", {"0.1", "1", "10", "100", "180"}},
                             {"degree", {"1", "2", "3", "4"}},
                             {"gamma", {"0.01", "0.1", "0.5", "0.95"}},
                             {"kernel", {"linear", "poly", "rbf"}}};
  static const HyperGrid rf{{"n_estimators", {"50", "100", "200"}},
                            {"min_samples_split", {"2", "5", "10", "15"}},
                            {"min_samples_leaf", {"2", "5", "10"}},
                            {"max_features", {"auto", "sqrt", "log2"}},
                            {"max_depth", {"2", "5", "12", "15", "20"}},
                            {"criterion", {"gini", "entropy"}}};
  static const HyperGrid gbt{{"n_estimators", {"50", "100", "200"}},
                             {"colsample_bytree", {"0.1", "0.3", "0.5", "0.7", "0.9", "1.0"}},
                             {"gamma", {"0.01", "0.1", "0.5", "0.95"}},
                             {"max_depth", {"2", "5", "12", "15", "20"}}};
  switch (f) {
    case ModelFamily::kLR: return lr;
    case ModelFamily::kSVM: return svm;
    case ModelFamily::kRF: return rf;
    case ModelFamily::kGBT: return gbt;
  }
  return lr;
}

ModelSpec default_spec(ModelFamily f) {
  switch (f) {
    case ModelFamily::kLR:
      return {f, {{"C", "100"}, {"penalty", "l2"}, {"solver", "liblinear"}}};
    case ModelFamily::kSVM:
      return {f, {{"C", "180"}, {"degree", "2"}, {"gamma", "0.95"}, {"kernel", "rbf"}}};
    case ModelFamily::kRF:
      return {f,
              {{"n_estimators", "100"},
               {"min_samples_split", "10"},
               {"min_samples_leaf", "2"},
               {"max_features", "auto"},
               {"max_depth", "15"},
               {"criterion", "entropy"}}};
    case ModelFamily::kGBT:
      return {f, {{"n_estimators", "100"}, {"colsample_bytree", "1.0"}, {"gamma", "0.1"}, {"max_depth", "12"}}};
  }
  return {};
}

namespace {

std::optional<double> as_number(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool same_value(const std::string& a, const std::string& b) {
  if (a == b) return true;
  auto x = as_number(a), y = as_number(b);
  return x && y && *x == *y;
}

bool in_list(const std::vector<std::string>& list, const std::string& v) {
  return std::any_of(list.begin(), list.end(), [&](const std::string& s) { return same_value(s, v); });
}

const std::string& hyper(const ModelSpec& spec, const std::string& key) {
  auto it = spec.hyper.find(key);
  if (it == spec.hyper.end()) {
    throw UsageError(fmt::format("{}: missing hyperparameter '{}'", family_name(spec.family), key));
  }
  return it->second;
}

double hyper_num(const ModelSpec& spec, const std::string& key) {
  auto v = as_number(hyper(spec, key));
  if (!v) throw UsageError(fmt::format("{}: hyperparameter '{}' is not numeric", family_name(spec.family), key));
  return *v;
}

}  // namespace

void validate_spec(const ModelSpec& spec) {
  const auto& grid = default_grid(spec.family);
  for (const auto& [key, value] : spec.hyper) {
    auto it = grid.find(key);
    if (it == grid.end()) {
      throw UsageError(fmt::format("{}: unknown hyperparameter '{}'", family_name(spec.family), key));
    }
    if (!in_list(it->second, value)) {
      throw UsageError(fmt::format("{}: hyperparameter '{}' = '{}' is outside the allowed range",
                                   family_name(spec.family), key, value));
    }
  }
  for (const auto& [key, values] : grid) {
    if (!spec.hyper.contains(key)) {
      throw UsageError(fmt::format("{}: missing hyperparameter '{}'", family_name(spec.family), key));
    }
  }
}

void validate_grid(ModelFamily f, const HyperGrid& grid) {
  const auto& full = default_grid(f);
  for (const auto& [key, values] : grid) {
    auto it = full.find(key);
    if (it == full.end()) throw UsageError(fmt::format("{}: unknown hyperparameter '{}'", family_name(f), key));
    if (values.empty()) throw UsageError(fmt::format("{}: empty range for '{}'", family_name(f), key));
    for (const auto& v : values) {
      if (!in_list(it->second, v)) {
        throw UsageError(fmt::format("{}: hyperparameter '{}' = '{}' is outside the allowed range", family_name(f),
                                     key, v));
      }
    }
  }
}

LogisticParams logistic_params(const ModelSpec& spec) {
  LogisticParams p;
  p.C = hyper_num(spec, "C");
  return p;
}

SvmParams svm_params(const ModelSpec& spec) {
  SvmParams p;
  p.C = hyper_num(spec, "C");
  p.gamma = hyper_num(spec, "gamma");
  p.degree = static_cast<int>(hyper_num(spec, "degree"));
  const auto& k = hyper(spec, "kernel");
  p.kernel = k == "linear" ? SvmKernel::kLinear : k == "poly" ? SvmKernel::kPoly : SvmKernel::kRbf;
  return p;
}

ForestParams forest_params(const ModelSpec& spec) {
  ForestParams p;
  p.n_estimators = static_cast<int>(hyper_num(spec, "n_estimators"));
  p.max_depth = static_cast<int>(hyper_num(spec, "max_depth"));
  p.min_samples_split = static_cast<int>(hyper_num(spec, "min_samples_split"));
  p.min_samples_leaf = static_cast<int>(hyper_num(spec, "min_samples_leaf"));
  const auto& mf = hyper(spec, "max_features");
  p.max_features = mf == "log2" ? MaxFeatures::kLog2 : mf == "sqrt" ? MaxFeatures::kSqrt : MaxFeatures::kAuto;
  p.criterion = hyper(spec, "criterion") == "gini" ? SplitCriterion::kGini : SplitCriterion::kEntropy;
  return p;
}

BoostParams boost_params(const ModelSpec& spec) {
  BoostParams p;
  p.n_estimators = static_cast<int>(hyper_num(spec, "n_estimators"));
  p.max_depth = static_cast<int>(hyper_num(spec, "max_depth"));
  p.gamma = hyper_num(spec, "gamma");
  p.colsample_bytree = hyper_num(spec, "colsample_bytree");
  return p;
}

FittedModel fit_model(const ModelSpec& spec, const Matrix& X, std::span<const int> y, std::vector<std::string> names,
                      std::uint64_t seed) {
  validate_spec(spec);
  auto fitted = [&]() {
    switch (spec.family) {
      case ModelFamily::kLR: return fit_logistic(X, y, logistic_params(spec), names, seed);
      case ModelFamily::kSVM: return fit_svm(X, y, svm_params(spec), names, seed);
      case ModelFamily::kRF: return fit_random_forest(X, y, forest_params(spec), names, seed);
      case ModelFamily::kGBT: return fit_gbt(X, y, boost_params(spec), names, seed);
    }
    throw UsageError("unknown model family");
  }();
  return FittedModel(spec, fitted.state(), fitted.factor_names(), seed, fitted.importance());
}

// ---------------------------------------------------------------------------

FittedModel::FittedModel(ModelSpec spec, State state, std::vector<std::string> factor_names, std::uint64_t seed,
                         std::optional<std::vector<double>> importance)
    : spec_(std::move(spec)),
      state_(std::move(state)),
      factor_names_(std::move(factor_names)),
      seed_(seed),
      importance_(std::move(importance)) {}

void FittedModel::set_normalization(std::vector<NormStat> stats) {
  if (!factor_names_.empty() && stats.size() != factor_names_.size()) {
    throw DataError("normalization statistics do not match the model factors");
  }
  norm_ = std::move(stats);
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double svm_kernel(const SvmState& s, std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  switch (s.kernel) {
    case SvmKernel::kLinear:
    case SvmKernel::kPoly:
      for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
      return s.kernel == SvmKernel::kLinear ? acc : std::pow(s.gamma * acc + s.coef0, s.degree);
    case SvmKernel::kRbf:
      for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
      return std::exp(-s.gamma * acc);
  }
  return 0.0;
}

struct DecisionVisitor {
  std::span<const double> x;
  double operator()(const LogisticState& s) const {
    double z = s.bias;
    for (std::size_t j = 0; j < s.weights.size(); ++j) z += s.weights[j] * x[j];
    return z;
  }
  double operator()(const SvmState& s) const {
    double d = -s.rho;
    for (std::size_t k = 0; k < s.coef.size(); ++k) d += s.coef[k] * svm_kernel(s, s.support.row(k), x);
    return d;
  }
  double operator()(const ForestState& s) const {
    double p = 0.0;
    for (const auto& t : s.trees) p += t.predict(x);
    return 2.0 * p / static_cast<double>(s.trees.size()) - 1.0;
  }
  double operator()(const BoostState& s) const {
    double m = s.base_margin;
    for (const auto& t : s.trees) m += s.learning_rate * t.predict(x);
    return m;
  }
};

}  // namespace

double FittedModel::decision(std::span<const double> x) const { return std::visit(DecisionVisitor{x}, state_); }

double FittedModel::predict_proba(std::span<const double> x) const {
  const double d = decision(x);
  switch (family()) {
    case ModelFamily::kLR:
    case ModelFamily::kGBT:
      return sigmoid(d);
    case ModelFamily::kSVM: {
      const auto& s = std::get<SvmState>(state_);
      return sigmoid(-(d * s.platt_a + s.platt_b));
    }
    case ModelFamily::kRF:
      return std::clamp((d + 1.0) / 2.0, 0.0, 1.0);
  }
  return 0.0;
}

int FittedModel::predict(std::span<const double> x) const {
  if (family() == ModelFamily::kSVM) return decision(x) > 0.0 ? 1 : 0;
  return predict_proba(x) >= 0.5 ? 1 : 0;
}

std::vector<double> FittedModel::predict_proba(const Matrix& X) const {
  std::vector<double> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict_proba(X.row(i));
  return out;
}

std::vector<int> FittedModel::predict(const Matrix& X) const {
  std::vector<int> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict(X.row(i));
  return out;
}

double accuracy(const FittedModel& model, const Matrix& X, std::span<const int> y) {
  if (X.rows() == 0) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < X.rows(); ++i) ok += model.predict(X.row(i)) == (y[i] != 0 ? 1 : 0);
  return static_cast<double>(ok) / static_cast<double>(X.rows());
}

std::vector<double> accuracy_drop_importance(const FittedModel& model, const Matrix& X, std::span<const int> y) {
  const double base = accuracy(model, X, y);
  std::vector<double> imp(X.cols(), 0.0);
  Matrix work = X;
  for (std::size_t j = 0; j < X.cols(); ++j) {
    for (std::size_t i = 0; i < X.rows(); ++i) work(i, j) = 0.0;
    imp[j] = std::max(0.0, base - accuracy(model, work, y));
    for (std::size_t i = 0; i < X.rows(); ++i) work(i, j) = X(i, j);
  }
  return imp;
}

// ---------------------------------------------------------------------------
// Text serialization. Line oriented: a keyword followed by values; doubles use
// 17 significant digits so a round trip is exact.

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

void write_tree(fmt::memory_buffer& out, const Tree& t) {
  fmt::format_to(std::back_inserter(out), "tree {}\n", t.nodes.size());
  for (const auto& n : t.nodes) {
    fmt::format_to(std::back_inserter(out), "{} {} {} {} {}\n", n.feature, num(n.threshold), n.left, n.right,
                   num(n.value));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view text) : in_(std::string(text)) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw DataError("model file: unexpected end of input");
    return w;
  }
  void expect(std::string_view kw) {
    const auto w = word();
    if (w != kw) throw DataError(fmt::format("model file: expected '{}', found '{}'", kw, w));
  }
  double number() {
    const auto w = word();
    auto v = as_number(w);
    if (!v) {
      if (w == "inf") return std::numeric_limits<double>::infinity();
      if (w == "-inf") return -std::numeric_limits<double>::infinity();
      throw DataError(fmt::format("model file: bad number '{}'", w));
    }
    return *v;
  }
  std::size_t count() {
    const double v = number();
    if (v < 0 || v != std::floor(v)) throw DataError("model file: bad count");
    return static_cast<std::size_t>(v);
  }
  Tree tree() {
    expect("tree");
    Tree t;
    t.nodes.resize(count());
    for (auto& n : t.nodes) {
      n.feature = static_cast<int>(number());
      n.threshold = number();
      n.left = static_cast<int>(number());
      n.right = static_cast<int>(number());
      n.value = number();
    }
    const auto sz = static_cast<int>(t.nodes.size());
    for (const auto& n : t.nodes) {
      if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= sz || n.right >= sz)) {
        throw DataError("model file: corrupt tree");
      }
    }
    if (t.nodes.empty()) throw DataError("model file: empty tree");
    return t;
  }

 private:
  std::istringstream in_;
};

const char* kernel_name(SvmKernel k) {
  return k == SvmKernel::kLinear ? "linear" : k == SvmKernel::kPoly ? "poly" : "rbf";
}

}  // namespace

std::string FittedModel::serialize() const {
  fmt::memory_buffer out;
  auto put = [&out]<typename... Args>(fmt::format_string<Args...> f, Args&&... args) {
    fmt::format_to(std::back_inserter(out), f, std::forward<Args>(args)...);
  };
  put("lsm-model 1\nfamily {}\nseed {}\n", family_name(family()), seed_);
  put("factors {}", factor_names_.size());
  for (const auto& f : factor_names_) put(" {}", f);
  put("\nhyper {}\n", spec_.hyper.size());
  for (const auto& [k, v] : spec_.hyper) put("{} {}\n", k, v);
  if (importance_) {
    put("importance {}", importance_->size());
    for (double v : *importance_) put(" {}", num(v));
    put("\n");
  } else {
    put("importance none\n");
  }
  if (norm_) {
    put("normalization {}\n", norm_->size());
    for (const auto& s : *norm_) put("{} {}\n", num(s.mean), num(s.sd));
  } else {
    put("normalization none\n");
  }
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LogisticState>) {
          put("bias {}\nweights {}", num(s.bias), s.weights.size());
          for (double w : s.weights) put(" {}", num(w));
          put("\n");
        } else if constexpr (std::is_same_v<T, SvmState>) {
          put("kernel {} {} {} {}\n", kernel_name(s.kernel), num(s.gamma), s.degree, num(s.coef0));
          put("rho {}\nplatt {} {}\n", num(s.rho), num(s.platt_a), num(s.platt_b));
          put("support {} {}\n", s.coef.size(), s.support.cols());
          for (std::size_t k = 0; k < s.coef.size(); ++k) {
            put("{}", num(s.coef[k]));
            for (double v : s.support.row(k)) put(" {}", num(v));
            put("\n");
          }
        } else if constexpr (std::is_same_v<T, ForestState>) {
          put("trees {}\n", s.trees.size());
          for (const auto& t : s.trees) write_tree(out, t);
        } else {
          put("base {}\nlearning_rate {}\ntrees {}\n", num(s.base_margin), num(s.learning_rate), s.trees.size());
          for (const auto& t : s.trees) write_tree(out, t);
        }
      },
      state_);
  put("end\n");
  return fmt::to_string(out);
}

FittedModel FittedModel::deserialize(std::string_view text) {
  Reader r(text);
  r.expect("lsm-model");
  if (r.word() != "1") throw DataError("model file: unsupported version");
  r.expect("family");
  ModelSpec spec;
  spec.family = parse_family(r.word());
  r.expect("seed");
  const auto seed_word = r.word();
  std::uint64_t seed = 0;
  if (std::from_chars(seed_word.data(), seed_word.data() + seed_word.size(), seed).ec != std::errc()) {
    throw DataError("model file: bad seed");
  }
  r.expect("factors");
  std::vector<std::string> names(r.count());
  for (auto& n : names) n = r.word();
  r.expect("hyper");
  const std::size_t nh = r.count();
  for (std::size_t i = 0; i < nh; ++i) {
    auto k = r.word();
    spec.hyper[k] = r.word();
  }
  r.expect("importance");
  std::optional<std::vector<double>> importance;
  if (auto w = r.word(); w != "none") {
    auto c = as_number(w);
    if (!c) throw DataError("model file: bad importance count");
    std::vector<double> v(static_cast<std::size_t>(*c));
    for (auto& x : v) x = r.number();
    importance = std::move(v);
  }
  r.expect("normalization");
  std::optional<std::vector<NormStat>> norm;
  if (auto w = r.word(); w != "none") {
    auto c = as_number(w);
    if (!c) throw DataError("model file: bad normalization count");
    std::vector<NormStat> v(static_cast<std::size_t>(*c));
    for (auto& s : v) {
      s.mean = r.number();
      s.sd = r.number();
    }
    norm = std::move(v);
  }
  State state;
  const std::size_t p = names.size();
  switch (spec.family) {
    case ModelFamily::kLR: {
      LogisticState s;
      r.expect("bias");
      s.bias = r.number();
      r.expect("weights");
      s.weights.resize(r.count());
      for (auto& w : s.weights) w = r.number();
      if (s.weights.size() != p) throw DataError("model file: weight count does not match factors");
      state = std::move(s);
      break;
    }
    case ModelFamily::kSVM: {
      SvmState s;
      r.expect("kernel");
      const auto k = r.word();
      s.kernel = k == "linear" ? SvmKernel::kLinear : k == "poly" ? SvmKernel::kPoly : SvmKernel::kRbf;
      s.gamma = r.number();
      s.degree = static_cast<int>(r.number());
      s.coef0 = r.number();
      r.expect("rho");
      s.rho = r.number();
      r.expect("platt");
      s.platt_a = r.number();
      s.platt_b = r.number();
      r.expect("support");
      const std::size_t m = r.count(), cols = r.count();
      if (cols != p) throw DataError("model file: support vector width does not match factors");
      s.coef.resize(m);
      s.support = Matrix(m, cols);
      for (std::size_t i = 0; i < m; ++i) {
        s.coef[i] = r.number();
        for (std::size_t c = 0; c < cols; ++c) s.support(i, c) = r.number();
      }
      if (s.kernel == SvmKernel::kLinear) {
        s.linear_w.assign(cols, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t c = 0; c < cols; ++c) s.linear_w[c] += s.coef[i] * s.support(i, c);
        }
      }
      state = std::move(s);
      break;
    }
    case ModelFamily::kRF: {
      ForestState s;
      r.expect("trees");
      s.trees.resize(r.count());
      for (auto& t : s.trees) t = r.tree();
      if (s.trees.empty()) throw DataError("model file: forest without trees");
      state = std::move(s);
      break;
    }
    case ModelFamily::kGBT: {
      BoostState s;
      r.expect("base");
      s.base_margin = r.number();
      r.expect("learning_rate");
      s.learning_rate = r.number();
      r.expect("trees");
      s.trees.resize(r.count());
      for (auto& t : s.trees) t = r.tree();
      state = std::move(s);
      break;
    }
  }
  r.expect("end");
  FittedModel model(std::move(spec), std::move(state), std::move(names), seed, std::move(importance));
  if (norm) model.set_normalization(std::move(*norm));
  return model;
}

// ---------------------------------------------------------------------------

SearchResult random_search(ModelFamily family, const HyperGrid& grid, const Matrix& X_train,
                           std::span<const int> y_train, const Matrix& X_valid, std::span<const int> y_valid,
                           std::size_t n_draws, std::uint64_t seed) {
  if (n_draws < 1) throw UsageError("random search: n_draws must be >= 1");
  if (grid.empty()) throw UsageError("random search: empty grid");
  validate_grid(family, grid);
  // Missing keys fall back to the family's reported best value.
  const ModelSpec base = default_spec(family);
  Rng rng(seed);
  SearchResult res;
  res.trials.resize(n_draws);
  for (auto& trial : res.trials) {
    trial.spec = base;
    for (const auto& [key, values] : grid) trial.spec.hyper[key] = values[rng.below(values.size())];
  }
  parallel_for(n_draws, [&](std::size_t i) {
    auto& trial = res.trials[i];
    try {
      const auto model = fit_model(trial.spec, X_train, y_train, {}, derive_seed(seed, i));
      trial.valid_accuracy = accuracy(model, X_valid, y_valid);
    } catch (const NumericError& e) {
      trial.valid_accuracy = 0.0;
      trial.error = e.what();
    }
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < n_draws; ++i) {
    if (res.trials[i].valid_accuracy > res.trials[best].valid_accuracy) best = i;
  }
  res.best = res.trials[best].spec;
  res.best_accuracy = res.trials[best].valid_accuracy;
  return res;
}

}  // namespace lsm
