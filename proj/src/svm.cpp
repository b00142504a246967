#include <cmath>
#include <deque>
#include <tuple>
#include <limits>

#include <fmt/format.h>

#include "lsm/error.hpp"
#include "lsm/models.hpp"
#include "lsm/parallel.hpp"

namespace lsm {
namespace {

constexpr double kTau = 1e-12;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double kernel_value(SvmKernel kernel, double gamma, int degree, double coef0, std::span<const double> a,
                    std::span<const double> b) {
  switch (kernel) {
    case SvmKernel::kLinear:
      return dot(a, b);
    case SvmKernel::kPoly:
      return std::pow(gamma * dot(a, b) + coef0, degree);
    case SvmKernel::kRbf: {
      double d2 = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        d2 += d * d;
      }
      return std::exp(-gamma * d2);
    }
  }
  return 0.0;
}

// Rows of Q_ij = y_i y_j K(x_i, x_j). Small problems keep the whole matrix;
// larger ones cache recently used rows.
class QMatrix {
 public:
  QMatrix(const Matrix& X, std::span<const double> y, const SvmParams& p) : X_(X), y_(y), p_(p), n_(X.rows()) {
    diag_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) diag_[i] = kernel(i, i);
    constexpr std::size_t kBudget = std::size_t{256} << 20;
    capacity_ = std::max<std::size_t>(2, kBudget / (sizeof(double) * std::max<std::size_t>(n_, 1)));
    rows_.resize(n_);
    if (capacity_ >= n_) {
      parallel_for(n_, [this](std::size_t i) { rows_[i] = compute(i); });
      resident_ = n_;
    }
  }

  const std::vector<double>& row(std::size_t i) {
    if (rows_[i].empty()) {
      if (resident_ >= capacity_) {
        rows_[order_.front()].clear();
        rows_[order_.front()].shrink_to_fit();
        order_.pop_front();
        --resident_;
      }
      rows_[i] = compute(i);
      order_.push_back(i);
      ++resident_;
    }
    return rows_[i];
  }

  double diag(std::size_t i) const { return diag_[i]; }

 private:
  double kernel(std::size_t i, std::size_t j) const {
    return kernel_value(p_.kernel, p_.gamma, p_.degree.value_or(1), p_.coef0, X_.row(i), X_.row(j));
  }
  std::vector<double> compute(std::size_t i) const {
    std::vector<double> r(n_);
    for (std::size_t j = 0; j < n_; ++j) r[j] = y_[i] * y_[j] * kernel(i, j);
    return r;
  }

  const Matrix& X_;
  std::span<const double> y_;
  const SvmParams& p_;
  std::size_t n_;
  std::vector<double> diag_;
  std::vector<std::vector<double>> rows_;
  std::deque<std::size_t> order_;
  std::size_t capacity_ = 0;
  std::size_t resident_ = 0;
};

double platt_objective(std::span<const double> dec, std::span<const double> target, double a, double b) {
  double f = 0.0;
  for (std::size_t i = 0; i < dec.size(); ++i) {
    const double z = dec[i] * a + b;
    f += z >= 0 ? target[i] * z + std::log1p(std::exp(-z)) : (target[i] - 1.0) * z + std::log1p(std::exp(z));
  }
  return f;
}

// Platt scaling with the Newton method and backtracking of Lin, Lin & Weng.
std::pair<double, double> fit_platt(std::span<const double> dec, std::span<const double> y) {
  double prior1 = 0, prior0 = 0;
  for (double v : y) (v > 0 ? prior1 : prior0) += 1.0;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] > 0 ? hi : lo;
  double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = platt_objective(dec, t, a, b);
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = 1e-12, h22 = 1e-12, h21 = 0, g1 = 0, g2 = 0;
    for (std::size_t i = 0; i < dec.size(); ++i) {
      const double z = dec[i] * a + b;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= 1e-10) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = platt_objective(dec, t, na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < 1e-10) break;
  }
  return {a, b};
}

}  // namespace

FittedModel fit_svm(const Matrix& X, std::span<const int> labels, const SvmParams& params,
                    std::vector<std::string> names, std::uint64_t seed) {
  const std::size_t n = X.rows();
  if (n == 0 || n != labels.size()) throw DataError("svm: X and y disagree in row count");
  if (n > 50'000) throw UsageError("svm: dual solver limited to 50,000 rows");
  if (params.kernel == SvmKernel::kPoly && !params.degree) throw UsageError("svm: polynomial kernel needs a degree");
  if (!(params.C > 0.0)) throw UsageError("svm: C must be > 0");
  for (double v : X.data()) {
    if (!std::isfinite(v)) throw DataError("svm: non-finite input");
  }
  std::vector<double> y(n);
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = labels[i] != 0 ? 1.0 : -1.0;
    (labels[i] != 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw DataError("svm: training labels contain a single class");

  const double C = params.C;
  QMatrix Q(X, y, params);
  std::vector<double> alpha(n, 0.0), G(n, -1.0);
  auto upper = [&](std::size_t t) { return alpha[t] >= C; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  SvmState st;
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (;;) {
    // Working set: maximal violator i, then j by second-order gain.
    double gmax = -inf, gmax2 = -inf;
    std::ptrdiff_t ii = -1, jj = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (!upper(t) && -G[t] >= gmax) {
          gmax = -G[t];
          ii = static_cast<std::ptrdiff_t>(t);
        }
      } else if (!lower(t) && G[t] >= gmax) {
        gmax = G[t];
        ii = static_cast<std::ptrdiff_t>(t);
      }
    }
    const std::vector<double>* qi = ii >= 0 ? &Q.row(static_cast<std::size_t>(ii)) : nullptr;
    double best = inf;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (lower(t)) continue;
        const double grad_diff = gmax + G[t];
        gmax2 = std::max(gmax2, G[t]);
        if (qi && grad_diff > 0) {
          const auto i = static_cast<std::size_t>(ii);
          double quad = Q.diag(i) + Q.diag(t) - 2.0 * y[i] * (*qi)[t];
          if (quad <= 0) quad = kTau;
          const double obj = -(grad_diff * grad_diff) / quad;
          if (obj <= best) {
            best = obj;
            jj = static_cast<std::ptrdiff_t>(t);
          }
        }
      } else {
        if (upper(t)) continue;
        const double grad_diff = gmax - G[t];
        gmax2 = std::max(gmax2, -G[t]);
        if (qi && grad_diff > 0) {
          const auto i = static_cast<std::size_t>(ii);
          double quad = Q.diag(i) + Q.diag(t) + 2.0 * y[i] * (*qi)[t];
          if (quad <= 0) quad = kTau;
          const double obj = -(grad_diff * grad_diff) / quad;
          if (obj <= best) {
            best = obj;
            jj = static_cast<std::ptrdiff_t>(t);
          }
        }
      }
    }
    st.kkt_violation = gmax + gmax2;
    if (st.kkt_violation < params.tol || jj < 0) break;
    if (st.iterations >= params.max_iter) {
      throw NumericError(fmt::format("svm: no convergence after {} iterations (KKT violation {:.3g})",
                                     st.iterations, st.kkt_violation));
    }
    ++st.iterations;

    const auto i = static_cast<std::size_t>(ii), j = static_cast<std::size_t>(jj);
    const double qij = Q.row(i)[j];
    const double old_ai = alpha[i], old_aj = alpha[j];
    double ai = old_ai, aj = old_aj;
    if (y[i] != y[j]) {
      double quad = Q.diag(i) + Q.diag(j) + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) {
          aj = 0;
          ai = diff;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = -diff;
      }
      if (diff > 0) {
        if (ai > C) {
          ai = C;
          aj = C - diff;
        }
      } else if (aj > C) {
        aj = C;
        ai = C + diff;
      }
    } else {
      double quad = Q.diag(i) + Q.diag(j) - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C) {
        if (ai > C) {
          ai = C;
          aj = sum - C;
        }
      } else if (aj < 0) {
        aj = 0;
        ai = sum;
      }
      if (sum > C) {
        if (aj > C) {
          aj = C;
          ai = sum - C;
        }
      } else if (ai < 0) {
        ai = 0;
        aj = sum;
      }
    }
    alpha[i] = ai;
    alpha[j] = aj;
    const double dai = ai - old_ai, daj = aj - old_aj;
    // With FIFO eviction and capacity >= 2, fetching row i cannot evict row j.
    const std::vector<double>& Qj = Q.row(j);
    const std::vector<double>& Qi = Q.row(i);
    for (std::size_t t = 0; t < n; ++t) G[t] += Qi[t] * dai + Qj[t] * daj;
  }

  // Offset from free vectors, or the midpoint of the feasible interval.
  double ub = inf, lb = -inf, sum_free = 0.0;
  std::size_t nr_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++nr_free;
      sum_free += yg;
    }
  }
  st.rho = nr_free > 0 ? sum_free / static_cast<double>(nr_free) : (ub + lb) / 2.0;

  st.kernel = params.kernel;
  st.gamma = params.gamma;
  st.degree = params.degree.value_or(1);
  st.coef0 = params.coef0;
  std::vector<std::size_t> sv;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      sv.push_back(t);
      st.coef.push_back(alpha[t] * y[t]);
    }
  }
  st.support = X.select_rows(sv);

  std::optional<std::vector<double>> importance;
  if (params.kernel == SvmKernel::kLinear) {
    st.linear_w.assign(X.cols(), 0.0);
    for (std::size_t k = 0; k < sv.size(); ++k) {
      auto row = st.support.row(k);
      for (std::size_t c = 0; c < X.cols(); ++c) st.linear_w[c] += st.coef[k] * row[c];
    }
    std::vector<double> imp(X.cols());
    for (std::size_t c = 0; c < X.cols(); ++c) imp[c] = std::abs(st.linear_w[c]);
    importance = std::move(imp);
  }

  // G_t = y_t sum_j alpha_j y_j K_tj - 1, so training margins come for free.
  std::vector<double> dec(n);
  for (std::size_t t = 0; t < n; ++t) dec[t] = y[t] * (G[t] + 1.0) - st.rho;
  std::tie(st.platt_a, st.platt_b) = fit_platt(dec, y);

  const char* kname = params.kernel == SvmKernel::kLinear ? "linear" : params.kernel == SvmKernel::kPoly ? "poly" : "rbf";
  ModelSpec spec{ModelFamily::kSVM,
                 {{"C", fmt::format("{}", params.C)},
                  {"gamma", fmt::format("{}", params.gamma)},
                  {"degree", fmt::format("{}", params.degree.value_or(1))},
                  {"kernel", kname}}};
  return FittedModel(std::move(spec), std::move(st), std::move(names), seed, std::move(importance));
}

}  // namespace lsm
