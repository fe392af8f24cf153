#include "awe/optim.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "awe/error.hpp"

namespace awe {

template <class T>
CrossEntropy<T> cross_entropy_loss(const Vec<T>& log_probs, int label) {
  if (label < 0 || label >= log_probs.size()) {
    throw InvalidInput("cross_entropy_loss: label " + std::to_string(label) + " outside [0, " +
                       std::to_string(log_probs.size()) + ")");
  }
  CrossEntropy<T> ce;
  ce.loss = -static_cast<double>(log_probs[label]);
  ce.grad = log_probs.array().exp().matrix();
  ce.grad[label] -= T(1);
  return ce;
}

template <class T>
OptimizerState<T> make_optimizer_state(const NetworkParams<T>& params, double lr) {
  OptimizerState<T> opt{params, lr};
  opt.velocity.visit([](auto& t) { t.setZero(); });
  return opt;
}

template <class T>
void nesterov_step(std::span<T> params, std::span<T> velocity, std::span<const T> grads, double lr,
                   double momentum) {
  if (params.size() != velocity.size() || params.size() != grads.size()) {
    throw InvalidInput("nesterov_step: buffer sizes differ");
  }
  const T mu = static_cast<T>(momentum);
  const T eta = static_cast<T>(lr);
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!std::isfinite(grads[k])) {
      throw NumericError("non-finite gradient at parameter " + std::to_string(k));
    }
    const T step = eta * grads[k];
    velocity[k] = mu * velocity[k] - step;
    params[k] += mu * velocity[k] - step;
  }
}

namespace {

template <class T, class P>
std::vector<std::pair<T*, std::size_t>> buffers(P& params) {
  std::vector<std::pair<T*, std::size_t>> out;
  params.visit([&](auto& t) { out.emplace_back(const_cast<T*>(t.data()), static_cast<std::size_t>(t.size())); });
  return out;
}

}  // namespace

template <class T>
void nesterov_update(NetworkParams<T>& params, OptimizerState<T>& opt, const NetworkParams<T>& grads,
                     double lr, double momentum) {
  const auto p = buffers<T>(params);
  const auto v = buffers<T>(opt.velocity);
  const auto g = buffers<T>(grads);
  if (p.size() != v.size() || p.size() != g.size()) throw InvalidInput("nesterov_update: shape mismatch");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].second != v[i].second || p[i].second != g[i].second) {
      throw InvalidInput("nesterov_update: shape mismatch");
    }
    nesterov_step<T>({p[i].first, p[i].second}, {v[i].first, v[i].second},
                     {static_cast<const T*>(g[i].first), g[i].second}, lr, momentum);
  }
  opt.lr = lr;
}

PlateauSchedule::PlateauSchedule(double lr, Options options) : lr_(lr), options_(options) {
  if (!(lr > 0.0)) throw ConfigError("initial learning rate must be positive");
  if (options_.window < 1 || options_.patience < 1) throw ConfigError("plateau window and patience must be >= 1");
  if (!(options_.decay > 1.0)) throw ConfigError("learning-rate decay factor must exceed 1");
}

PlateauSchedule::Step PlateauSchedule::observe(double epoch_loss) {
  bool plateau = false;
  const auto n = static_cast<int>(history_.size());
  if (n >= options_.window) {
    double sum = 0.0;
    for (int k = n - options_.window; k < n; ++k) sum += history_[k];
    plateau = options_.factor * epoch_loss > sum / options_.window;
  }
  history_.push_back(epoch_loss);
  consecutive_ = plateau ? consecutive_ + 1 : 0;
  bool decayed = false;
  if (consecutive_ >= options_.patience) {
    lr_ /= options_.decay;
    consecutive_ = 0;
    decayed = true;
  }
  return {lr_, plateau, decayed};
}

template CrossEntropy<float> cross_entropy_loss<float>(const Vec<float>&, int);
template CrossEntropy<double> cross_entropy_loss<double>(const Vec<double>&, int);
template OptimizerState<float> make_optimizer_state<float>(const NetworkParams<float>&, double);
template OptimizerState<double> make_optimizer_state<double>(const NetworkParams<double>&, double);
template void nesterov_step<float>(std::span<float>, std::span<float>, std::span<const float>, double, double);
template void nesterov_step<double>(std::span<double>, std::span<double>, std::span<const double>, double, double);
template void nesterov_update<float>(NetworkParams<float>&, OptimizerState<float>&, const NetworkParams<float>&,
                                     double, double);
template void nesterov_update<double>(NetworkParams<double>&, OptimizerState<double>&,
                                      const NetworkParams<double>&, double, double);

}  // namespace awe
