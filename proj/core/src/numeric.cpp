#include "awe/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "awe/error.hpp"

namespace awe {

template <class T>
Vec<T> affine(const Mat<T>& w, const Vec<T>& x, const Vec<T>& b) {
  if (w.cols() != x.size() || w.rows() != b.size()) {
    throw InvalidInput("affine: W is " + std::to_string(w.rows()) + "x" +
                       std::to_string(w.cols()) + ", x has " + std::to_string(x.size()) +
                       ", b has " + std::to_string(b.size()));
  }
  return w * x + b;
}

template <class T>
Vec<T> activation(Activation kind, const Vec<T>& x) {
  switch (kind) {
    case Activation::sigmoid:
      return (T(1) + (-x.array()).exp()).inverse().matrix();
    case Activation::tanh:
      return x.array().tanh().matrix();
    case Activation::relu:
      return x.cwiseMax(T(0));
  }
  return x;
}

template <class T>
Vec<T> log_softmax(const Vec<T>& x) {
  if (x.size() == 0) throw InvalidInput("log_softmax: empty vector");
  const T shift = x.maxCoeff();
  const T lse = shift + std::log((x.array() - shift).exp().sum());
  return (x.array() - lse).matrix();
}

template <class T>
Mat<T> log_softmax_columns(const Mat<T>& logits) {
  Mat<T> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const auto col = logits.col(j);
    const T shift = col.maxCoeff();
    const T lse = shift + std::log((col.array() - shift).exp().sum());
    out.col(j) = (col.array() - lse).matrix();
  }
  return out;
}

namespace {

template <class T>
void require_same_dim(const Vec<T>& x, const Vec<T>& y, const char* who) {
  if (x.size() != y.size()) {
    throw InvalidInput(std::string(who) + ": dimension mismatch " + std::to_string(x.size()) +
                       " vs " + std::to_string(y.size()));
  }
}

}  // namespace

double dot_sequential(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += x[k] * y[k];
  return s;
}

template <class T>
double cosine_similarity(const Vec<T>& x, const Vec<T>& y) {
  require_same_dim(x, y, "cosine_similarity");
  const Vec<double> a = x.template cast<double>();
  const Vec<double> b = y.template cast<double>();
  const auto n = static_cast<std::size_t>(a.size());
  const double xy = dot_sequential(a.data(), b.data(), n);
  const double xx = dot_sequential(a.data(), a.data(), n);
  const double yy = dot_sequential(b.data(), b.data(), n);
  if (!(xx > 0.0) || !(yy > 0.0)) throw DegenerateVector("cosine of a zero-norm vector");
  const double c = xy / (std::sqrt(xx) * std::sqrt(yy));
  return std::clamp(c, -1.0, 1.0);
}

template <class T>
double cosine_distance(const Vec<T>& x, const Vec<T>& y) {
  return 1.0 - cosine_similarity(x, y);
}

template <class T>
CosineDistanceGrad<T> cosine_distance_grad(const Vec<T>& x, const Vec<T>& y) {
  require_same_dim(x, y, "cosine_distance_grad");
  const double nx = static_cast<double>(x.template cast<double>().norm());
  const double ny = static_cast<double>(y.template cast<double>().norm());
  if (!(nx > 0.0) || !(ny > 0.0)) throw DegenerateVector("cosine of a zero-norm vector");
  const Vec<double> xd = x.template cast<double>();
  const Vec<double> yd = y.template cast<double>();
  const double c = xd.dot(yd) / (nx * ny);
  // d cos / dx = y/(|x||y|) - cos x/|x|^2 ; distance is 1 - cos.
  const Vec<double> gx = -(yd / (nx * ny) - c * xd / (nx * nx));
  const Vec<double> gy = -(xd / (nx * ny) - c * yd / (ny * ny));
  return {1.0 - c, gx.template cast<T>(), gy.template cast<T>()};
}

namespace {

void check_dropout_probability(double p) {
  if (!(p >= 0.0) || !(p < 1.0)) {
    throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  }
}

}  // namespace

template <class T>
Vec<T> dropout_mask(RandomSource& rng, std::size_t dim, double p) {
  check_dropout_probability(p);
  Vec<T> mask(static_cast<Eigen::Index>(dim));
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (Eigen::Index k = 0; k < mask.size(); ++k) mask[k] = rng.bernoulli(p) ? T(0) : keep;
  return mask;
}

template <class T>
Mat<T> dropout_mask(RandomSource& rng, std::size_t rows, std::size_t cols, double p) {
  check_dropout_probability(p);
  Mat<T> mask(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  T* data = mask.data();
  for (Eigen::Index k = 0; k < mask.size(); ++k) data[k] = rng.bernoulli(p) ? T(0) : keep;
  return mask;
}

GradCheckReport grad_check(const ScalarLoss& loss, std::span<const double> params,
                           std::span<const double> analytic, double step) {
  if (params.size() != analytic.size()) {
    throw InvalidInput("grad_check: gradient has " + std::to_string(analytic.size()) +
                       " entries for " + std::to_string(params.size()) + " parameters");
  }
  if (!(step > 0.0)) throw ConfigError("grad_check: step must be positive");

  GradCheckReport report;
  report.numeric.reserve(params.size());
  std::vector<double> theta(params.begin(), params.end());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double saved = theta[k];
    theta[k] = saved + step;
    const double up = loss(theta);
    theta[k] = saved - step;
    const double down = loss(theta);
    theta[k] = saved;

    const double numeric = (up - down) / (2.0 * step);
    report.numeric.push_back(numeric);
    if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(analytic[k])) {
      report.finite = false;
      report.worst_coordinate = k;
      report.max_relative_error = std::numeric_limits<double>::infinity();
      report.message = "non-finite loss or gradient at coordinate " + std::to_string(k);
      return report;
    }
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
    const double rel = std::abs(analytic[k] - numeric) / denom;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_coordinate = k;
      report.worst_analytic = analytic[k];
      report.worst_numeric = numeric;
    }
  }
  return report;
}

double relative_error_norm(std::span<const double> a, std::span<const double> n) {
  if (a.size() != n.size()) throw InvalidInput("relative_error_norm: size mismatch");
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    diff += (a[k] - n[k]) * (a[k] - n[k]);
    na += a[k] * a[k];
    nn += n[k] * n[k];
  }
  const double denom = std::sqrt(std::max(na, nn));
  return denom > 0.0 ? std::sqrt(diff) / denom : 0.0;
}

#define AWE_INSTANTIATE(T)                                                             \
  template Vec<T> affine<T>(const Mat<T>&, const Vec<T>&, const Vec<T>&);              \
  template Vec<T> activation<T>(Activation, const Vec<T>&);                            \
  template Vec<T> log_softmax<T>(const Vec<T>&);                                       \
  template Mat<T> log_softmax_columns<T>(const Mat<T>&);                               \
  template double cosine_similarity<T>(const Vec<T>&, const Vec<T>&);                  \
  template double cosine_distance<T>(const Vec<T>&, const Vec<T>&);                    \
  template CosineDistanceGrad<T> cosine_distance_grad<T>(const Vec<T>&, const Vec<T>&); \
  template Vec<T> dropout_mask<T>(RandomSource&, std::size_t, double);                 \
  template Mat<T> dropout_mask<T>(RandomSource&, std::size_t, std::size_t, double);

AWE_INSTANTIATE(float)
AWE_INSTANTIATE(double)

#undef AWE_INSTANTIATE

}  // namespace awe
