#pragma once

#include <cstdint>
#include <string>

#include "awe/network.hpp"
#include "awe/numeric.hpp"

namespace awe {

enum class LossKind { cross_entropy, cos_hinge };

struct GradientCase {
  CellKind cell = CellKind::lstm;
  int stacked_layers = 1;
  int fc_layers = 1;
  Head head = Head::log_softmax;
  LossKind loss = LossKind::cross_entropy;
  int input_dim = 5;
  int hidden_dim = 8;
  std::uint64_t seed = 1;
  /// Standard deviation of the random parameters.
  double param_scale = 0.5;
};

std::string describe(const GradientCase& c);

struct NetworkGradientReport {
  /// Per-coordinate comparison (diagnostic; unstable for near-zero entries).
  GradCheckReport coordinates;
  /// Largest ||analytic - numeric|| / max(||analytic||, ||numeric||) over the
  /// parameter tensors (each weight matrix and bias vector).
  double max_tensor_error = 0.0;
  std::string worst_tensor;
};

/// Fixed problem: 6 random segments (3 labels), 4 classes, 5 triplets, margin 0.5.
/// Double-precision finite-difference check of every parameter of a small
/// random network under the chosen loss, dropout off.
NetworkGradientReport check_network_gradient(const GradientCase& c, double step);

}  // namespace awe
