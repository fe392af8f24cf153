#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "awe/random.hpp"

namespace awe {

template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Dense matrix. Storage is column-major; serialized forms are row-major.
/// Batched activations keep one sample per column.
template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Training runs in single precision, gradient checking in double.
enum class Precision { single, double_precision };

enum class Activation { sigmoid, tanh, relu };

/// Whether stochastic layers (dropout) are active.
enum class Mode { train, eval };

/// W x + b. Throws InvalidInput on shape mismatch.
template <class T>
Vec<T> affine(const Mat<T>& w, const Vec<T>& x, const Vec<T>& b);

template <class T>
Vec<T> activation(Activation kind, const Vec<T>& x);

/// x - logsumexp(x), with the maximum subtracted first.
template <class T>
Vec<T> log_softmax(const Vec<T>& x);

/// Column-wise log-softmax of a batch of logits.
template <class T>
Mat<T> log_softmax_columns(const Mat<T>& logits);

/// Sequential double-precision dot product. Every cosine in the toolkit is
/// built from this so equal inputs give bitwise-equal similarities.
double dot_sequential(const double* x, const double* y, std::size_t n);

/// x.y / (|x| |y|). Throws DegenerateVector for zero-norm inputs.
template <class T>
double cosine_similarity(const Vec<T>& x, const Vec<T>& y);

/// 1 - cos(x, y), in [0, 2].
template <class T>
double cosine_distance(const Vec<T>& x, const Vec<T>& y);

/// Gradients of cosine_distance(x, y) with respect to x and y.
template <class T>
struct CosineDistanceGrad {
  double distance;
  Vec<T> d_x;
  Vec<T> d_y;
};

template <class T>
CosineDistanceGrad<T> cosine_distance_grad(const Vec<T>& x, const Vec<T>& y);

/// Inverted-dropout mask: each entry is 0 with probability p, else 1/(1-p).
/// Throws ConfigError unless 0 <= p < 1.
template <class T>
Vec<T> dropout_mask(RandomSource& rng, std::size_t dim, double p);

template <class T>
Mat<T> dropout_mask(RandomSource& rng, std::size_t rows, std::size_t cols, double p);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  /// Central-difference gradient, one entry per coordinate.
  std::vector<double> numeric;
  bool finite = true;
  std::string message;
};

using ScalarLoss = std::function<double(std::span<const double>)>;

/// Compares an analytic gradient against central differences
/// (f(x+h) - f(x-h)) / 2h coordinate by coordinate. The relative error of a
/// coordinate is |g_a - g_n| / max(|g_a|, |g_n|, 1e-8).
/// ||a - n|| / max(||a||, ||n||), or 0 when both vectors vanish.
double relative_error_norm(std::span<const double> a, std::span<const double> n);

GradCheckReport grad_check(const ScalarLoss& loss, std::span<const double> params,
                           std::span<const double> analytic, double step);

}  // namespace awe
