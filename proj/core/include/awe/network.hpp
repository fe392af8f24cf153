#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "awe/numeric.hpp"
#include "awe/random.hpp"
#include "awe/rnn.hpp"

namespace awe {

enum class Head { log_softmax, linear };

std::string to_string(CellKind kind);
std::string to_string(Head head);
CellKind parse_cell_kind(const std::string& s);
Head parse_head(const std::string& s);

struct NetworkConfig {
  CellKind cell = CellKind::lstm;
  int stacked_layers = 3;
  int fc_layers = 3;
  int input_dim = 39;
  int hidden_dim = 512;
  int fc_dim = 1024;
  int output_dim = 1;
  Head head = Head::log_softmax;
  double dropout_recurrent = 0.3;
  double dropout_fc = 0.5;

  /// Throws ConfigError when a field is out of range.
  void validate() const;

  /// Input width of fully connected layer `index` (0-based).
  int fc_input_dim(int index) const { return index == 0 ? hidden_dim : fc_dim; }
  int fc_output_dim(int index) const { return index + 1 == fc_layers ? output_dim : fc_dim; }

  bool operator==(const NetworkConfig&) const = default;
};

template <class T>
struct DenseLayer {
  Mat<T> weights;  // out x in
  Vec<T> bias;
};

template <class T>
struct NetworkParams {
  StackedRnnParams<T> rnn;
  std::vector<DenseLayer<T>> fc;

  std::size_t parameter_count() const;

  template <class U>
  NetworkParams<U> cast() const {
    NetworkParams<U> out;
    out.rnn = rnn.template cast<U>();
    for (const auto& d : fc) {
      out.fc.push_back({d.weights.template cast<U>(), d.bias.template cast<U>()});
    }
    return out;
  }

  /// Visits every weight matrix and bias vector in canonical order: recurrent
  /// layers bottom-up (input weights, recurrent weights, bias), then fully
  /// connected layers (weights, bias).
  template <class F>
  void visit(F&& f) {
    for (auto& l : rnn.layers) {
      f(l.w_input);
      f(l.w_recurrent);
      f(l.bias);
    }
    for (auto& d : fc) {
      f(d.weights);
      f(d.bias);
    }
  }
  template <class F>
  void visit(F&& f) const {
    const_cast<NetworkParams*>(this)->visit([&](const auto& t) { f(t); });
  }
};

/// Closed-form parameter census for a configuration.
std::size_t expected_parameter_count(const NetworkConfig& config);

template <class T>
NetworkParams<T> zero_params(const NetworkConfig& config);

/// Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero. A recurrent
/// gate's fan-in is D_in + H.
template <class T>
NetworkParams<T> init_params(const NetworkConfig& config, RandomSource& rng);

/// Freshly initialized fully connected layer.
template <class T>
DenseLayer<T> init_dense(int in, int out, RandomSource& rng);

/// All parameters in canonical order, matrices row-major.
template <class T>
std::vector<T> flatten(const NetworkParams<T>& params);

template <class T>
void unflatten(std::span<const T> values, NetworkParams<T>& params);

template <class T>
struct NetworkTrace {
  RnnTrace<T> rnn;
  std::vector<Mat<T>> fc_inputs;  // input of each fc layer
  std::vector<Mat<T>> fc_pre;     // pre-ReLU of each hidden fc layer
  std::vector<Mat<T>> fc_masks;   // dropout after each hidden fc layer (train mode)
  Mat<T> logits;                  // final fc output, output_dim x B
  Mat<T> output;                  // after the head
};

/// Batched g(X): the top layer's final hidden state feeds the first fc layer
/// directly; hidden fc layers use ReLU then dropout; the head is applied to the
/// last fc output. Columns of the result follow the order of `sequences`.
template <class T>
NetworkTrace<T> forward_batch(const NetworkParams<T>& params, const NetworkConfig& config,
                              std::span<const FrameView> sequences, Mode mode, RandomSource* rng);

template <class T>
NetworkTrace<T> forward_batch(const NetworkParams<T>& params, const NetworkConfig& config,
                              std::span<const Mat<T>> sequences, Mode mode, RandomSource* rng);

/// Maps a gradient on the head output to a gradient on the logits.
template <class T>
Mat<T> head_backward(const NetworkConfig& config, const Mat<T>& output, const Mat<T>& d_output);

/// Accumulates parameter gradients given d loss / d logits (output_dim x B).
template <class T>
void backward_batch(const NetworkParams<T>& params, const NetworkConfig& config,
                    const NetworkTrace<T>& trace, const Mat<T>& d_logits, NetworkParams<T>& grads);

/// Embedding of a single segment.
template <class T>
Vec<T> embed(const NetworkParams<T>& params, const NetworkConfig& config, FrameView frames,
             Mode mode, RandomSource* rng);

}  // namespace awe
