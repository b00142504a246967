#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "lsm/error.hpp"
#include "lsm/models.hpp"

namespace lsm {
namespace {

double log1pexp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

FittedModel fit_logistic(const Matrix& X, std::span<const int> y, const LogisticParams& params,
                         std::vector<std::string> names, std::uint64_t seed) {
  const std::size_t n = X.rows(), p = X.cols();
  if (n == 0 || n != y.size()) throw DataError("logistic: X and y disagree in row count");
  if (!(params.C > 0.0)) throw UsageError("logistic: C must be > 0");
  for (double v : X.data()) {
    if (!std::isfinite(v)) throw DataError("logistic: non-finite input");
  }
  const double inv_c = 1.0 / params.C;
  // Parameter vector: weights[0..p), intercept at index p (unpenalized).
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p + 1));
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Xm(
      X.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  Eigen::MatrixXd A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p + 1));
  A.leftCols(static_cast<Eigen::Index>(p)) = Xm;
  A.col(static_cast<Eigen::Index>(p)).setOnes();
  Eigen::VectorXd yv(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) yv(static_cast<Eigen::Index>(i)) = y[i] != 0 ? 1.0 : 0.0;

  auto objective = [&](const Eigen::VectorXd& t) {
    const Eigen::VectorXd z = A * t;
    double f = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) f += log1pexp(z(i)) - yv(i) * z(i);
    return f + 0.5 * inv_c * t.head(static_cast<Eigen::Index>(p)).squaredNorm();
  };

  LogisticState st;
  double f = objective(theta);
  for (st.iterations = 0; st.iterations < params.max_iter; ++st.iterations) {
    const Eigen::VectorXd z = A * theta;
    Eigen::VectorXd mu(z.size()), w(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      mu(i) = sigmoid(z(i));
      w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-12);
    }
    Eigen::VectorXd grad = A.transpose() * (mu - yv);
    grad.head(static_cast<Eigen::Index>(p)) += inv_c * theta.head(static_cast<Eigen::Index>(p));
    st.grad_norm = grad.norm();
    if (st.grad_norm <= params.grad_tol) break;
    Eigen::MatrixXd H = A.transpose() * w.asDiagonal() * A;
    for (std::size_t j = 0; j < p; ++j) H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += inv_c;
    // Tiny ridge on the intercept keeps single-class problems solvable.
    H(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)) += 1e-10;
    const Eigen::VectorXd step = H.ldlt().solve(grad);
    if (!step.allFinite()) throw NumericError("logistic: singular Newton system");
    double t = 1.0;
    Eigen::VectorXd next = theta - step;
    double fn = objective(next);
    while (fn > f + 1e-4 * t * grad.dot(-step) && t > 1e-10) {
      t *= 0.5;
      next = theta - t * step;
      fn = objective(next);
    }
    theta = next;
    f = fn;
  }

  st.weights.assign(theta.data(), theta.data() + p);
  st.bias = theta(static_cast<Eigen::Index>(p));
  std::vector<double> imp(p);
  for (std::size_t j = 0; j < p; ++j) imp[j] = std::abs(st.weights[j]);
  ModelSpec spec{ModelFamily::kLR, {{"C", fmt::format("{}", params.C)}, {"penalty", "l2"}}};
  return FittedModel(std::move(spec), std::move(st), std::move(names), seed, std::move(imp));
}

}  // namespace lsm
