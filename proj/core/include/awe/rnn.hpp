#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "awe/numeric.hpp"
#include "awe/random.hpp"

namespace awe {

enum class CellKind { lstm, gru };

/// Gate blocks of an LSTM layer, in storage order.
enum class LstmGate { input = 0, forget = 1, candidate = 2, output = 3 };
/// Gate blocks of a GRU layer, in storage order.
enum class GruGate { reset = 0, update = 1, candidate = 2 };

int gate_count(CellKind kind);

/// One recurrent layer. Every gate g computes W_g [x_t, h_{t-1}] + b_g; the
/// matrix W_g = [w_input block | w_recurrent block] is stored split so the
/// input projection for a whole sequence is a single product.
template <class T>
struct RecurrentLayer {
  CellKind kind = CellKind::lstm;
  Mat<T> w_input;      // (gates*H) x D_in
  Mat<T> w_recurrent;  // (gates*H) x H
  Vec<T> bias;         // gates*H

  static RecurrentLayer zeros(CellKind kind, int input_dim, int hidden_dim);

  int input_dim() const { return static_cast<int>(w_input.cols()); }
  int hidden_dim() const { return static_cast<int>(w_recurrent.cols()); }
  int gates() const { return gate_count(kind); }

  /// H x (D_in + H) weight matrix of one gate acting on [x_t, h_{t-1}].
  Mat<T> gate_weights(int gate) const;
  Vec<T> gate_bias(int gate) const { return bias.segment(gate * hidden_dim(), hidden_dim()); }

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(w_input.size() + w_recurrent.size() + bias.size());
  }

  template <class U>
  RecurrentLayer<U> cast() const {
    return {kind, w_input.template cast<U>(), w_recurrent.template cast<U>(),
            bias.template cast<U>()};
  }
};

/// Hidden state (and LSTM cell memory), one column per sequence.
template <class T>
struct CellState {
  Mat<T> h;
  Mat<T> c;  // empty for GRU

  static CellState zeros(CellKind kind, int hidden_dim, int batch = 1);
};

/// One LSTM time step on a batch of column inputs.
template <class T>
CellState<T> lstm_step(const RecurrentLayer<T>& layer, const Mat<T>& x, const CellState<T>& prev);

/// One GRU time step on a batch of column inputs.
template <class T>
CellState<T> gru_step(const RecurrentLayer<T>& layer, const Mat<T>& x, const CellState<T>& prev);

template <class T>
struct StackedRnnParams {
  std::vector<RecurrentLayer<T>> layers;
  double inter_layer_dropout = 0.3;

  CellKind kind() const { return layers.front().kind; }
  int hidden_dim() const { return layers.back().hidden_dim(); }
  int input_dim() const { return layers.front().input_dim(); }
  std::size_t parameter_count() const;

  template <class U>
  StackedRnnParams<U> cast() const {
    StackedRnnParams<U> out;
    out.inter_layer_dropout = inter_layer_dropout;
    for (const auto& l : layers) out.layers.push_back(l.template cast<U>());
    return out;
  }
};

/// Row-major T x D frame matrix owned elsewhere.
struct FrameView {
  const float* data = nullptr;
  int frames = 0;
  int dim = 0;
};

/// Column layout for a batch of variable-length sequences processed in
/// lock-step. Sequences are ordered by decreasing length (stable), so at
/// step t the active sequences are exactly the first batch_sizes[t] slots and
/// occupy columns offsets[t] .. offsets[t] + batch_sizes[t] - 1.
struct PackedLayout {
  std::vector<int> lengths;      // per slot, non-increasing
  std::vector<int> sample_of;    // slot -> caller's sequence index
  std::vector<int> batch_sizes;  // per step
  std::vector<int> offsets;      // per step
  int columns = 0;

  static PackedLayout from_lengths(std::span<const int> lengths);

  int batch() const { return static_cast<int>(lengths.size()); }
  int steps() const { return static_cast<int>(batch_sizes.size()); }
  int final_column(int slot) const { return offsets[lengths[slot] - 1] + slot; }
};

template <class T>
Mat<T> pack_sequences(const PackedLayout& layout, std::span<const FrameView> sequences);

/// Sequences given as D x T matrices (one frame per column).
template <class T>
Mat<T> pack_sequences(const PackedLayout& layout, std::span<const Mat<T>> sequences);

/// Activations retained by the forward pass of one layer.
template <class T>
struct LayerTrace {
  Mat<T> input;         // D_in x N, after any dropout
  Mat<T> gates;         // (gates*H) x N, post-activation
  Mat<T> cells;         // H x N (LSTM)
  Mat<T> hidden;        // H x N
  Mat<T> reset_hidden;  // H x N (GRU): r_t * h_{t-1}
};

template <class T>
struct RnnTrace {
  PackedLayout layout;
  std::vector<LayerTrace<T>> layers;
  std::vector<Mat<T>> dropout_masks;  // between layer l and l+1; empty in eval mode
  Mat<T> final_hidden;                // H x B, caller's sequence order
};

/// Runs the stack over all sequences with zero initial state. In train mode
/// the hidden sequence passed from each layer to the next is multiplied by an
/// inverted-dropout mask (every time step); rng must then be non-null.
template <class T>
RnnTrace<T> stacked_forward(const StackedRnnParams<T>& params, const PackedLayout& layout,
                            Mat<T> packed_input, Mode mode, RandomSource* rng);

template <class T>
RnnTrace<T> stacked_forward(const StackedRnnParams<T>& params, const Mat<T>& sequence, Mode mode,
                            RandomSource* rng);

/// Backpropagation through time. d_final_hidden is H x B in caller order;
/// gradients are accumulated into grads, which must be shaped like params.
template <class T>
void stacked_backward(const StackedRnnParams<T>& params, const RnnTrace<T>& trace,
                      const Mat<T>& d_final_hidden, StackedRnnParams<T>& grads);

}  // namespace awe
