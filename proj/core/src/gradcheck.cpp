#include "awe/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "awe/classifier.hpp"
#include "awe/dataset.hpp"
#include "awe/siamese.hpp"

namespace awe {

std::string describe(const GradientCase& c) {
  return to_string(c.cell) + " S=" + std::to_string(c.stacked_layers) + " F=" + std::to_string(c.fc_layers) +
         " head=" + to_string(c.head) + " loss=" + (c.loss == LossKind::cross_entropy ? "xent" : "cos_hinge");
}

namespace {

Corpus random_problem_corpus(RandomSource& rng, std::size_t n, std::size_t num_labels, int dim, int min_len,
                             int max_len) {
  Corpus corpus;
  for (std::size_t i = 0; i < n; ++i) {
    Segment s;
    s.label = "l" + std::to_string(i % num_labels);
    s.dim = dim;
    s.num_frames = min_len + static_cast<int>(rng.index(static_cast<std::size_t>(max_len - min_len + 1)));
    s.frames.resize(static_cast<std::size_t>(s.num_frames) * dim);
    for (auto& v : s.frames) v = static_cast<float>(rng.normal());
    corpus.segments.push_back(std::move(s));
  }
  return corpus;
}

constexpr int kClasses = 4;
constexpr double kMargin = 0.5;

struct Problem {
  NetworkConfig config;
  Corpus data;
  std::vector<int> targets;
  std::vector<Triplet> triplets;
};

Problem make_problem(const GradientCase& c) {
  Problem p;
  p.config.cell = c.cell;
  p.config.stacked_layers = c.stacked_layers;
  p.config.fc_layers = c.fc_layers;
  p.config.input_dim = c.input_dim;
  p.config.hidden_dim = c.hidden_dim;
  p.config.fc_dim = 6;
  p.config.output_dim = kClasses;
  p.config.head = c.head;
  RandomSource rng(c.seed);
  RandomSource data_rng = rng.split("data");
  p.data = random_problem_corpus(data_rng, 6, 3, c.input_dim, 2, 6);
  for (std::size_t i = 0; i < p.data.size(); ++i) p.targets.push_back(static_cast<int>(i % kClasses));
  // Labels cycle l0 l1 l2 l0 l1 l2.
  p.triplets = {{0, 3, 1}, {3, 0, 1}, {1, 4, 5}, {4, 1, 5}, {2, 5, 0}};
  return p;
}

double evaluate(const GradientCase& c, const Problem& p, const NetworkParams<double>& params,
                NetworkParams<double>* grads) {
  if (grads != nullptr) grads->visit([](auto& t) { t.setZero(); });
  if (c.loss == LossKind::cross_entropy) {
    const auto views = p.data.views();
    return classifier_batch_loss<double>(params, p.config, views, p.targets, Mode::eval, nullptr, grads);
  }
  return triplet_batch_loss<double>(params, p.config, p.data.segments, p.triplets, kMargin, Mode::eval, nullptr,
                                    grads)
      .loss;
}

// Distance of the base point from the nearest non-differentiable point
// (a ReLU input or an active/inactive hinge boundary).
double kink_margin(const GradientCase& c, const Problem& p, const NetworkParams<double>& params) {
  const auto views = p.data.views();
  const auto tr = forward_batch<double>(params, p.config, views, Mode::eval, nullptr);
  for (Eigen::Index j = 0; j < tr.output.cols(); ++j) {
    if (tr.output.col(j).norm() < 0.1) return 0.0;  // cosine geometry near-degenerate
  }
  double margin = INFINITY;
  for (const auto& pre : tr.fc_pre) margin = std::min(margin, pre.cwiseAbs().minCoeff());
  if (c.loss == LossKind::cos_hinge) {
    for (const auto& t : p.triplets) {
      const Vec<double> a = tr.output.col(static_cast<Eigen::Index>(t.anchor));
      const Vec<double> s = tr.output.col(static_cast<Eigen::Index>(t.same));
      const Vec<double> d = tr.output.col(static_cast<Eigen::Index>(t.diff));
      margin = std::min(margin, std::abs(kMargin + cosine_distance(a, s) - cosine_distance(a, d)));
    }
  }
  return margin;
}

}  // namespace

NetworkGradientReport check_network_gradient(const GradientCase& c, double step) {
  const Problem p = make_problem(c);
  // Parameters ~ N(0, 0.5^2): embeddings then have norms of order one, so a
  // fixed step is small relative to the curvature of the cosine geometry.
  // Draws whose base point lies within 0.02 of a kink are skipped.
  NetworkParams<double> base = zero_params<double>(p.config);
  for (std::uint64_t attempt = 0;; ++attempt) {
    RandomSource init = RandomSource(c.seed).split("init", attempt);
    base.visit([&](auto& t) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = init.normal(0.0, c.param_scale);
    });
    if (kink_margin(c, p, base) > 0.02 || attempt == 100) break;
  }
  NetworkParams<double> grads = zero_params<double>(p.config);
  evaluate(c, p, base, &grads);
  const std::vector<double> x0 = flatten(base);
  const std::vector<double> analytic = flatten(grads);
  NetworkParams<double> probe = base;
  const ScalarLoss loss = [&](std::span<const double> x) {
    unflatten(x, probe);
    return evaluate(c, p, probe, nullptr);
  };
  NetworkGradientReport out;
  out.coordinates = grad_check(loss, x0, analytic, step);
  if (!out.coordinates.finite) {
    out.max_tensor_error = INFINITY;
    return out;
  }
  std::vector<std::pair<std::string, std::size_t>> tensors;
  for (std::size_t l = 0; l < base.rnn.layers.size(); ++l) {
    const auto& layer = base.rnn.layers[l];
    const std::string name = "rnn" + std::to_string(l);
    tensors.emplace_back(name + ".w_input", layer.w_input.size());
    tensors.emplace_back(name + ".w_recurrent", layer.w_recurrent.size());
    tensors.emplace_back(name + ".bias", layer.bias.size());
  }
  for (std::size_t l = 0; l < base.fc.size(); ++l) {
    tensors.emplace_back("fc" + std::to_string(l) + ".weights", base.fc[l].weights.size());
    tensors.emplace_back("fc" + std::to_string(l) + ".bias", base.fc[l].bias.size());
  }
  std::size_t offset = 0;
  for (const auto& [name, size] : tensors) {
    const double err = relative_error_norm(std::span(analytic).subspan(offset, size),
                                           std::span<const double>(out.coordinates.numeric).subspan(offset, size));
    if (err >= out.max_tensor_error) {
      out.max_tensor_error = err;
      out.worst_tensor = name;
    }
    offset += size;
  }
  return out;
}

}  // namespace awe
