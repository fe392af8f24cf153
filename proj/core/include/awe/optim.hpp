#pragma once

#include <span>
#include <vector>

#include "awe/network.hpp"
#include "awe/numeric.hpp"

namespace awe {

template <class T>
struct CrossEntropy {
  double loss = 0.0;
  Vec<T> grad;  // d loss / d logits = softmax(logits) - one_hot(label)
};

/// Negative log-likelihood of `label` under a log-softmax output.
template <class T>
CrossEntropy<T> cross_entropy_loss(const Vec<T>& log_probs, int label);

/// SGD with Nesterov momentum in the reformulated form: with stored
/// parameters phi = theta + momentum * v (the look-ahead point) and gradient g
/// evaluated there,
///   v   <- momentum * v - lr * g
///   phi <- phi + momentum * v - lr * g
/// which equals theta <- theta + v with the gradient taken at theta + momentum * v.
template <class T>
struct OptimizerState {
  NetworkParams<T> velocity;
  double lr = 0.1;
};

template <class T>
OptimizerState<T> make_optimizer_state(const NetworkParams<T>& params, double lr);

/// Flat form of the update. Throws NumericError on a non-finite gradient.
template <class T>
void nesterov_step(std::span<T> params, std::span<T> velocity, std::span<const T> grads, double lr,
                   double momentum);

template <class T>
void nesterov_update(NetworkParams<T>& params, OptimizerState<T>& opt, const NetworkParams<T>& grads,
                     double lr, double momentum);

/// Learning-rate plateau heuristic. An epoch is a plateau when
/// factor * L_current > mean of the previous `window` epoch losses (the current
/// epoch excluded); the first `window` epochs never are. After `patience`
/// consecutive plateaus the rate is divided by `decay` and the count resets.
class PlateauSchedule {
 public:
  struct Options {
    int window = 3;
    double factor = 0.99;
    int patience = 3;
    double decay = 10.0;
  };

  struct Step {
    double lr;
    bool plateau;
    bool decayed;
  };

  PlateauSchedule(double lr, Options options);

  Step observe(double epoch_loss);

  double lr() const { return lr_; }
  int consecutive_plateaus() const { return consecutive_; }
  const std::vector<double>& history() const { return history_; }

 private:
  double lr_;
  Options options_;
  int consecutive_ = 0;
  std::vector<double> history_;
};

}  // namespace awe
