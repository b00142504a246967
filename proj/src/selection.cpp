#include "lsm/selection.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "lsm/error.hpp"
#include "lsm/metrics.hpp"
#include "lsm/parallel.hpp"
#include "lsm/rng.hpp"

namespace lsm {

std::size_t popcount(const FactorMask& m) { return static_cast<std::size_t>(std::count(m.begin(), m.end(), true)); }

std::string mask_string(const FactorMask& m) {
  std::string s(m.size(), '0');
  for (std::size_t j = 0; j < m.size(); ++j) {
    if (m[j]) s[j] = '1';
  }
  return s;
}

FactorMask parse_mask(std::string_view bits) {
  FactorMask m(bits.size());
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] != '0' && bits[j] != '1') throw DataError(fmt::format("bad factor mask '{}'", bits));
    m[j] = bits[j] == '1';
  }
  return m;
}

std::vector<std::size_t> mask_indices(const FactorMask& m) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < m.size(); ++j) {
    if (m[j]) idx.push_back(j);
  }
  return idx;
}

FactorMask mask_from_bits(std::uint64_t bits, std::size_t p) {
  FactorMask m(p);
  for (std::size_t j = 0; j < p; ++j) m[j] = (bits >> j) & 1u;
  return m;
}

std::uint64_t mask_bits(const FactorMask& m) {
  std::uint64_t b = 0;
  for (std::size_t j = 0; j < m.size() && j < 64; ++j) {
    if (m[j]) b |= std::uint64_t{1} << j;
  }
  return b;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt_num(double v) { return fmt::format("{}", v); }

void repair(FactorMask& m, Rng& rng) {
  if (popcount(m) == 0) m[rng.below(m.size())] = true;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

// ---------------------------------------------------------------------------

MaskFitness::MaskFitness(const WrapperData& data, ModelSpec spec, std::uint64_t seed)
    : data_(data), spec_(std::move(spec)), seed_(seed) {
  validate_spec(spec_);
  if (data_.X_train.rows() == 0 || data_.X_valid.rows() == 0) throw DataError("wrapper: empty train or valid rows");
}

double MaskFitness::fit_one(const FactorMask& mask) const {
  const auto cols = mask_indices(mask);
  const auto model =
      fit_model(spec_, data_.X_train.select_cols(cols), data_.y_train, {}, derive_seed(seed_, mask_string(mask)));
  return accuracy(model, data_.X_valid.select_cols(cols), data_.y_valid);
}

double MaskFitness::operator()(const FactorMask& mask) { return evaluate(std::span(&mask, 1)).front(); }

std::vector<double> MaskFitness::evaluate(std::span<const FactorMask> masks) {
  std::vector<std::string> keys;
  std::vector<const FactorMask*> todo;
  for (const auto& m : masks) {
    if (popcount(m) == 0) throw UsageError("wrapper: empty factor mask");
    auto key = mask_string(m);
    if (!cache_.contains(key) && std::find(keys.begin(), keys.end(), key) == keys.end()) {
      keys.push_back(std::move(key));
      todo.push_back(&m);
    }
  }
  std::vector<double> scores(todo.size());
  parallel_for(todo.size(), [&](std::size_t i) { scores[i] = fit_one(*todo[i]); });
  for (std::size_t i = 0; i < todo.size(); ++i) cache_.emplace(keys[i], scores[i]);

  std::vector<double> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(cache_.at(mask_string(m)));
  return out;
}

// --- Information gain ratio ---------------------------------------------------

std::vector<int> equal_frequency_bins(std::span<const double> values, std::size_t bins) {
  if (bins < 2) throw UsageError("equal-frequency binning needs at least 2 bins");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> cuts;
  for (std::size_t b = 1; b < bins && n > 0; ++b) cuts.push_back(sorted[b * n / bins]);
  std::vector<int> codes(n);
  for (std::size_t i = 0; i < n; ++i) {
    codes[i] = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), values[i]) - cuts.begin());
  }
  return codes;
}

namespace {

double entropy2(double pos, double total) {
  double h = 0.0;
  for (double c : {pos, total - pos}) {
    if (c > 0) h -= (c / total) * std::log2(c / total);
  }
  return h;
}

}  // namespace

std::vector<IgrScore> igr_rank(const SampleTable& table, std::size_t bins) {
  const std::size_t n = table.rows(), p = table.features.cols();
  if (n == 0) throw DataError("information gain: empty table");
  double pos = 0;
  for (int l : table.labels) pos += l != 0;
  const double hs = entropy2(pos, static_cast<double>(n));
  if (pos == 0 || pos == static_cast<double>(n)) throw DataError("information gain: zero entropy target");

  std::vector<IgrScore> out(p);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = table.features(i, j);
    std::vector<long long> codes(n);
    if (table.is_categorical(j)) {
      for (std::size_t i = 0; i < n; ++i) codes[i] = std::llround(col[i]);
    } else {
      const auto b = equal_frequency_bins(col, bins);
      std::copy(b.begin(), b.end(), codes.begin());
    }
    std::map<long long, std::pair<double, double>> groups;  // code -> (count, positives)
    for (std::size_t i = 0; i < n; ++i) {
      auto& g = groups[codes[i]];
      g.first += 1;
      g.second += table.labels[i] != 0;
    }
    double cond = 0.0, split = 0.0;
    for (const auto& [code, g] : groups) {
      const double w = g.first / static_cast<double>(n);
      cond += w * entropy2(g.second, g.first);
      split -= w * std::log2(w);
    }
    auto& s = out[j];
    s.factor = j;
    s.gain = hs - cond;
    s.split_info = split;
    s.vi = split > 0.0 ? s.gain / split : 0.0;
  }
  std::stable_sort(out.begin(), out.end(), [](const IgrScore& a, const IgrScore& b) { return a.vi > b.vi; });
  return out;
}

FactorMask igr_select(const SampleTable& table, std::size_t top_k, std::size_t bins) {
  const std::size_t p = table.features.cols();
  if (top_k < 1 || top_k > p) throw UsageError(fmt::format("igr: top_k must lie in [1, {}]", p));
  const auto ranked = igr_rank(table, bins);
  FactorMask m(p);
  for (std::size_t i = 0; i < top_k; ++i) m[ranked[i].factor] = true;
  return m;
}

// --- RFE -----------------------------------------------------------------------

SelectionResult rfe(const Matrix& X, std::span<const int> y, const ModelSpec& spec, std::size_t cv_k,
                    std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_spec(spec);
  const std::size_t p = X.cols();
  if (p == 0) throw DataError("rfe: no factors");
  const auto folds = kfold(y, cv_k, derive_seed(seed, "folds"));

  struct FoldData {
    std::vector<std::size_t> train, test;
    std::vector<int> y_train, y_test;
  };
  std::vector<FoldData> fd(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<bool> held(y.size());
    for (auto i : folds[f]) held[i] = true;
    for (std::size_t i = 0; i < y.size(); ++i) {
      (held[i] ? fd[f].test : fd[f].train).push_back(i);
      (held[i] ? fd[f].y_test : fd[f].y_train).push_back(y[i]);
    }
  }

  SelectionResult res;
  res.method = "RFE";
  res.params = {{"cv_k", std::to_string(cv_k)}, {"model", std::string(family_name(spec.family))}};
  std::vector<std::size_t> active(p);
  std::iota(active.begin(), active.end(), 0);
  double best = -1.0;
  for (std::size_t iter = 0; !active.empty(); ++iter) {
    const Matrix Xa = X.select_cols(active);
    std::vector<double> acc(folds.size());
    std::vector<std::vector<double>> imp(folds.size());
    parallel_for(folds.size(), [&](std::size_t f) {
      const Matrix Xtr = Xa.select_rows(fd[f].train), Xte = Xa.select_rows(fd[f].test);
      const auto model = fit_model(spec, Xtr, fd[f].y_train, {}, derive_seed(derive_seed(seed, "fit"), f));
      acc[f] = accuracy(model, Xte, fd[f].y_test);
      const auto& mi = model.importance();
      imp[f] = mi && mi->size() == active.size() ? *mi : accuracy_drop_importance(model, Xte, fd[f].y_test);
    });
    const double cv = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(folds.size());
    FactorMask m(p);
    for (auto j : active) m[j] = true;

    TraceRow row{iter, cv, cv, mask_string(m), ""};
    if (cv > best) {
      best = cv;
      res.mask = m;
      res.score = cv;
    }
    if (active.size() > 1) {
      std::size_t drop = 0;
      double lowest = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < active.size(); ++a) {
        double mean = 0.0;
        for (const auto& v : imp) mean += v[a];
        mean /= static_cast<double>(imp.size());
        if (mean <= lowest) {
          lowest = mean;
          drop = a;
        }
      }
      row.note = fmt::format("drop {}", active[drop]);
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
    } else {
      active.clear();
    }
    res.trace.push_back(std::move(row));
  }
  res.fits = res.trace.size() * folds.size();
  res.elapsed_seconds = seconds_since(t0);
  return res;
}

// --- Binary PSO --------------------------------------------------------------------

SelectionResult pso_select(const WrapperData& data, const ModelSpec& spec, const PsoParams& params,
                           std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t p = data.X_train.cols(), n = params.swarm_size;
  if (n < 1 || params.iters < 1) throw UsageError("pso: swarm_size and iters must be >= 1");
  MaskFitness fitness(data, spec, derive_seed(seed, "fitness"));
  Rng rng(derive_seed(seed, "pso"));

  std::vector<FactorMask> x(n, FactorMask(p));
  std::vector<std::vector<double>> v(n, std::vector<double>(p, 0.0));
  for (auto& m : x) {
    for (std::size_t d = 0; d < p; ++d) m[d] = rng.uniform() < 0.5;
    repair(m, rng);
  }
  std::vector<FactorMask> pbest = x;
  std::vector<double> pbest_f(n, -1.0);
  FactorMask gbest;
  double gbest_f = -1.0;

  SelectionResult res;
  res.method = "PSO";
  res.params = {{"c1", fmt_num(params.c1)},
                {"c2", fmt_num(params.c2)},
                {"w", fmt_num(params.w)},
                {"swarm_size", std::to_string(n)},
                {"iters", std::to_string(params.iters)}};
  spdlog::debug("pso: c1={} c2={} w={}", params.c1, params.c2, params.w);

  std::size_t stagnant = 0;
  for (std::size_t it = 0; it < params.iters; ++it) {
    const auto f = fitness.evaluate(x);
    bool improved = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (f[i] > pbest_f[i]) {
        pbest_f[i] = f[i];
        pbest[i] = x[i];
      }
      if (f[i] > gbest_f) {
        gbest_f = f[i];
        gbest = x[i];
        improved = true;
      }
    }
    const double mean = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(n);
    res.trace.push_back({it, gbest_f, mean, mask_string(gbest), ""});
    stagnant = improved ? 0 : stagnant + 1;
    if (params.stagnation > 0 && stagnant >= params.stagnation) {
      res.trace.back().note = fmt::format("stopped after {} stagnant iterations", stagnant);
      spdlog::info("pso: early stop at iteration {}", it);
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < p; ++d) {
        const double xd = x[i][d], r1 = rng.uniform(), r2 = rng.uniform();
        double vd = params.w * v[i][d] + params.c1 * r1 * (pbest[i][d] - xd) + params.c2 * r2 * (gbest[d] - xd);
        vd = std::clamp(vd, -params.v_max, params.v_max);
        v[i][d] = vd;
        x[i][d] = rng.uniform() < sigmoid(vd);
      }
      repair(x[i], rng);
    }
  }
  res.mask = gbest;
  res.score = gbest_f;
  res.fits = fitness.fits();
  res.elapsed_seconds = seconds_since(t0);
  return res;
}

// --- Rank-sharing hawks ------------------------------------------------------------

SelectionResult hho_select(const WrapperData& data, const ModelSpec& spec, const HhoParams& params,
                           std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t p = data.X_train.cols(), n = params.hawks;
  if (n < 3) throw UsageError("hho: at least 3 hawks are required");
  if (params.iters < 1) throw UsageError("hho: iters must be >= 1");
  MaskFitness fitness(data, spec, derive_seed(seed, "fitness"));
  Rng rng(derive_seed(seed, "hho"));
  const double lim = params.v_max;

  using Vec = std::vector<double>;
  std::vector<Vec> u(n, Vec(p)), v(n, Vec(p, 0.0));
  for (auto& ui : u) {
    for (auto& e : ui) e = rng.uniform(-1.0, 1.0);
  }
  std::vector<Vec> pbest = u;
  std::vector<double> pbest_f(n, -1.0);
  Vec gbest(p);
  FactorMask gbest_mask;
  double gbest_f = -1.0;
  std::vector<FactorMask> x(n, FactorMask(p));

  SelectionResult res;
  res.method = "HHO";
  res.params = {{"hawks", std::to_string(n)},  {"iters", std::to_string(params.iters)},
                {"w", fmt_num(params.w)},       {"c1", fmt_num(params.c1)},
                {"c2", fmt_num(params.c2)},     {"alpha", fmt_num(params.alpha)},
                {"beta", fmt_num(params.beta)}};

  std::size_t stagnant = 0;
  for (std::size_t it = 0; it < params.iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < p; ++d) x[i][d] = rng.uniform() < sigmoid(u[i][d]);
      repair(x[i], rng);
    }
    const auto f = fitness.evaluate(x);
    bool improved = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (f[i] > pbest_f[i]) {
        pbest_f[i] = f[i];
        pbest[i] = u[i];
      }
      if (f[i] > gbest_f) {
        gbest_f = f[i];
        gbest = u[i];
        gbest_mask = x[i];
        improved = true;
      }
    }
    const double mean = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(n);
    res.trace.push_back({it, gbest_f, mean, mask_string(gbest_mask), ""});
    if (gbest_f >= params.target) {
      res.trace.back().note = "fitness target reached";
      break;
    }
    stagnant = improved ? 0 : stagnant + 1;
    if (params.stagnation > 0 && stagnant >= params.stagnation) {
      res.trace.back().note = fmt::format("stopped after {} stagnant iterations", stagnant);
      break;
    }

    // Motion.
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < p; ++d) {
        const double r1 = rng.uniform(), r2 = rng.uniform();
        double vd = params.w * v[i][d] + params.c1 * r1 * (pbest[i][d] - u[i][d]) +
                    params.c2 * r2 * (gbest[d] - u[i][d]);
        v[i][d] = std::clamp(vd, -lim, lim);
        u[i][d] = std::clamp(u[i][d] + v[i][d], -lim, lim);
      }
    }

    // Sharing: rank on the perturbed fitness z, then pull each hawk along the
    // direction from a lower-ranked hawk to a same-ranked one.
    const auto [lo_it, hi_it] = std::minmax_element(f.begin(), f.end());
    const double spread = *hi_it - *lo_it;
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = f[i] + rng.uniform() * params.alpha * spread;
    const auto before = u;
    std::vector<std::size_t> same, lower;
    for (std::size_t i = 0; i < n; ++i) {
      same.clear();
      lower.clear();
      for (std::size_t k = 0; k < n; ++k) {
        if (z[k] == z[i]) same.push_back(k);
        else if (z[k] < z[i]) lower.push_back(k);
      }
      if (lower.empty()) continue;
      const std::size_t j = same[rng.below(same.size())];
      const std::size_t k = lower[rng.below(lower.size())];
      const double r = rng.uniform();
      for (std::size_t d = 0; d < p; ++d) {
        u[i][d] = std::clamp(u[i][d] + r * params.beta * (before[j][d] - before[k][d]), -lim, lim);
      }
    }
  }
  res.mask = gbest_mask;
  res.score = gbest_f;
  res.fits = fitness.fits();
  res.elapsed_seconds = seconds_since(t0);
  return res;
}

// --- LASSO -----------------------------------------------------------------------

double lasso_lambda_max(const Matrix& X, std::span<const double> y) {
  double m = 0.0;
  for (std::size_t j = 0; j < X.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) s += X(i, j) * y[i];
    m = std::max(m, std::abs(s));
  }
  return 2.0 * m;
}

std::vector<double> lasso_path(const Matrix& X, std::span<const double> y, double lambda, double tol,
                               std::size_t max_sweeps) {
  const std::size_t n = X.rows(), p = X.cols();
  if (y.size() != n) throw UsageError("lasso: X and y differ in length");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("lasso: lambda must be finite and >= 0");
  for (double v : X.data()) {
    if (!std::isfinite(v)) throw DataError("lasso: non-finite value in X");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("lasso: non-finite value in y");
  }
  std::vector<double> norm(p, 0.0), b(p, 0.0), r(y.begin(), y.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) norm[j] += X(i, j) * X(i, j);
  }
  const double half = lambda / 2.0;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (norm[j] == 0.0) continue;
      double rho = norm[j] * b[j];
      for (std::size_t i = 0; i < n; ++i) rho += X(i, j) * r[i];
      const double nb = rho > half ? (rho - half) / norm[j] : rho < -half ? (rho + half) / norm[j] : 0.0;
      const double delta = nb - b[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) r[i] -= X(i, j) * delta;
        b[j] = nb;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    if (max_change <= tol) return b;
  }
  throw NumericError("lasso: coordinate descent did not converge");
}

SelectionResult lasso_select(const Matrix& X, std::span<const int> y, const LassoParams& params, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> target(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) target[i] = y[i] != 0 ? 1.0 : -1.0;

  SelectionResult res;
  res.method = "LASSO";
  double lambda = params.lambda;
  if (params.cv_lambda) {
    const double lmax = lasso_lambda_max(X, target);
    const std::size_t g = std::max<std::size_t>(params.grid_points, 2);
    const auto folds = kfold(y, params.cv_k, derive_seed(seed, "lasso-cv"));
    double best_mse = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g; ++k) {
      const double lam = lmax * std::pow(1e-3, static_cast<double>(k) / static_cast<double>(g - 1));
      double sse = 0.0;
      for (const auto& fold : folds) {
        std::vector<bool> held(y.size());
        for (auto i : fold) held[i] = true;
        std::vector<std::size_t> tr;
        std::vector<double> ytr;
        for (std::size_t i = 0; i < y.size(); ++i) {
          if (!held[i]) {
            tr.push_back(i);
            ytr.push_back(target[i]);
          }
        }
        const auto b = lasso_path(X.select_rows(tr), ytr, lam);
        for (auto i : fold) {
          double pred = 0.0;
          for (std::size_t j = 0; j < X.cols(); ++j) pred += X(i, j) * b[j];
          sse += (target[i] - pred) * (target[i] - pred);
        }
      }
      const double mse = sse / static_cast<double>(y.size());
      res.trace.push_back({k, mse, mse, "", fmt::format("lambda={}", lam)});
      if (mse < best_mse) {
        best_mse = mse;
        lambda = lam;
      }
    }
  }
  const auto b = lasso_path(X, target, lambda);
  res.mask.assign(X.cols(), false);
  for (std::size_t j = 0; j < b.size(); ++j) res.mask[j] = std::abs(b[j]) > 1e-10;
  if (popcount(res.mask) == 0) throw DataError(fmt::format("lasso: λ too large; no factors survive (λ = {})", lambda));
  res.params = {{"lambda", fmt_num(lambda)}, {"cv_lambda", params.cv_lambda ? "true" : "false"}};
  res.trace.push_back({res.trace.size(), 0.0, 0.0, mask_string(res.mask), fmt::format("selected lambda={}", lambda)});
  res.elapsed_seconds = seconds_since(t0);
  return res;
}

// --- Exhaustive --------------------------------------------------------------------

std::vector<FactorMask> enumerate_masks(std::size_t p, std::size_t min_factors) {
  if (p > 20) throw UsageError(fmt::format("exhaustive: {} factors exceed the limit of 20; use a heuristic method", p));
  const std::size_t lo = std::max<std::size_t>(min_factors, 1);
  std::vector<FactorMask> out;
  for (std::size_t c = lo; c <= p; ++c) {
    for (std::uint64_t bits = 1; bits < (std::uint64_t{1} << p); ++bits) {
      if (static_cast<std::size_t>(std::popcount(bits)) == c) out.push_back(mask_from_bits(bits, p));
    }
  }
  return out;
}

std::vector<ExhaustiveRecord> exhaustive(const Matrix& X_train, std::span<const int> y_train, const Matrix& X_test,
                                         std::span<const int> y_test, std::span<const ModelSpec> specs,
                                         std::size_t min_factors, std::uint64_t seed) {
  for (const auto& s : specs) validate_spec(s);
  const auto masks = enumerate_masks(X_train.cols(), min_factors);
  std::vector<ExhaustiveRecord> records(masks.size());
  parallel_for(masks.size(), [&](std::size_t r) {
    auto& rec = records[r];
    rec.mask = masks[r];
    rec.factor_count = popcount(rec.mask);
    const auto cols = mask_indices(rec.mask);
    const Matrix Xtr = X_train.select_cols(cols), Xte = X_test.select_cols(cols);
    for (std::size_t s = 0; s < specs.size(); ++s) {
      const auto model = fit_model(specs[s], Xtr, y_train, {}, derive_seed(derive_seed(seed, s), mask_bits(rec.mask)));
      rec.accuracy.push_back(accuracy(model, Xte, y_test));
    }
  });
  return records;
}

std::vector<std::size_t> rank_records(std::span<const ExhaustiveRecord> records, std::size_t model) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double fa = records[a].accuracy.at(model), fb = records[b].accuracy.at(model);
    if (fa != fb) return fa > fb;
    return mask_bits(records[a].mask) < mask_bits(records[b].mask);
  });
  return order;
}

std::size_t quartile_band(double value, const std::array<double, 5>& q) {
  if (value <= q[1]) return 0;
  if (value <= q[2]) return 1;
  if (value <= q[3]) return 2;
  return 3;
}

ExhaustiveAnalytics analyze_exhaustive(std::span<const ExhaustiveRecord> records, std::size_t model, std::size_t p) {
  if (records.empty()) throw DataError("exhaustive: no records");
  ExhaustiveAnalytics a;
  std::map<std::size_t, std::vector<double>> by_count;
  std::vector<double> all;
  for (const auto& r : records) {
    by_count[r.factor_count].push_back(r.accuracy.at(model));
    all.push_back(r.accuracy.at(model));
  }
  for (const auto& [c, v] : by_count) a.by_count.push_back({c, v.size(), five_number_summary(v)});
  a.overall = five_number_summary(all);

  a.band_counts.assign(p, {0, 0, 0, 0});
  for (const auto& r : records) {
    const auto band = quartile_band(r.accuracy.at(model), a.overall);
    for (auto j : mask_indices(r.mask)) ++a.band_counts[j][band];
  }
  const auto order = rank_records(records, model);
  a.top100.assign(p, 0);
  a.top1000.assign(p, 0);
  for (std::size_t k = 0; k < order.size() && k < 1000; ++k) {
    for (auto j : mask_indices(records[order[k]].mask)) {
      ++a.top1000[j];
      if (k < 100) ++a.top100[j];
    }
  }
  a.best = order.front();
  return a;
}

}  // namespace lsm
