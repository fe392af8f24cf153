#include "awe/rnn.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "awe/error.hpp"

namespace awe {

int gate_count(CellKind kind) { return kind == CellKind::lstm ? 4 : 3; }

template <class T>
RecurrentLayer<T> RecurrentLayer<T>::zeros(CellKind kind, int input_dim, int hidden_dim) {
  if (input_dim <= 0 || hidden_dim <= 0) throw ConfigError("recurrent layer dims must be positive");
  const int g = gate_count(kind);
  return {kind, Mat<T>::Zero(g * hidden_dim, input_dim), Mat<T>::Zero(g * hidden_dim, hidden_dim),
          Vec<T>::Zero(g * hidden_dim)};
}

template <class T>
Mat<T> RecurrentLayer<T>::gate_weights(int gate) const {
  const int h = hidden_dim();
  Mat<T> w(h, input_dim() + h);
  w << w_input.middleRows(gate * h, h), w_recurrent.middleRows(gate * h, h);
  return w;
}

template <class T>
CellState<T> CellState<T>::zeros(CellKind kind, int hidden_dim, int batch) {
  CellState s{Mat<T>::Zero(hidden_dim, batch), Mat<T>()};
  if (kind == CellKind::lstm) s.c = Mat<T>::Zero(hidden_dim, batch);
  return s;
}

namespace {

template <class T>
void check_step_shapes(const RecurrentLayer<T>& layer, const Mat<T>& x, const CellState<T>& prev,
                       CellKind expected, const char* who) {
  if (layer.kind != expected) throw InvalidInput(std::string(who) + ": wrong cell kind");
  const int h = layer.hidden_dim();
  bool ok = x.rows() == layer.input_dim() && prev.h.rows() == h && prev.h.cols() == x.cols();
  if (expected == CellKind::lstm) ok = ok && prev.c.rows() == h && prev.c.cols() == x.cols();
  if (!ok) {
    throw InvalidInput(std::string(who) + ": expected input dim " +
                       std::to_string(layer.input_dim()) + " and state dim " + std::to_string(h) +
                       ", got " + std::to_string(x.rows()) + " and " +
                       std::to_string(prev.h.rows()));
  }
}

template <class Derived>
auto squash(const Eigen::ArrayBase<Derived>& z) {
  using T = typename Derived::Scalar;
  return (T(1) + (-z).exp()).inverse();
}

}  // namespace

template <class T>
CellState<T> lstm_step(const RecurrentLayer<T>& layer, const Mat<T>& x, const CellState<T>& prev) {
  check_step_shapes(layer, x, prev, CellKind::lstm, "lstm_step");
  const int h = layer.hidden_dim();
  Mat<T> z = layer.w_input * x + layer.w_recurrent * prev.h;
  z.colwise() += layer.bias;
  const Mat<T> i = squash(z.middleRows(0, h).array()).matrix();
  const Mat<T> f = squash(z.middleRows(h, h).array()).matrix();
  const Mat<T> g = z.middleRows(2 * h, h).array().tanh().matrix();
  const Mat<T> o = squash(z.middleRows(3 * h, h).array()).matrix();
  CellState<T> next;
  next.c = (i.array() * g.array() + f.array() * prev.c.array()).matrix();
  next.h = (o.array() * next.c.array().tanh()).matrix();
  return next;
}

template <class T>
CellState<T> gru_step(const RecurrentLayer<T>& layer, const Mat<T>& x, const CellState<T>& prev) {
  check_step_shapes(layer, x, prev, CellKind::gru, "gru_step");
  const int h = layer.hidden_dim();
  Mat<T> zru = layer.w_input.topRows(2 * h) * x + layer.w_recurrent.topRows(2 * h) * prev.h;
  zru.colwise() += layer.bias.head(2 * h);
  const Mat<T> r = squash(zru.topRows(h).array()).matrix();
  const Mat<T> u = squash(zru.bottomRows(h).array()).matrix();
  const Mat<T> rh = (r.array() * prev.h.array()).matrix();
  Mat<T> zh = layer.w_input.bottomRows(h) * x + layer.w_recurrent.bottomRows(h) * rh;
  zh.colwise() += layer.bias.tail(h);
  const Mat<T> cand = zh.array().tanh().matrix();
  CellState<T> next;
  next.h = (u.array() * prev.h.array() + (T(1) - u.array()) * cand.array()).matrix();
  return next;
}

template <class T>
std::size_t StackedRnnParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

PackedLayout PackedLayout::from_lengths(std::span<const int> lengths) {
  if (lengths.empty()) throw InvalidInput("packed batch needs at least one sequence");
  for (int len : lengths) {
    if (len < 1) throw InvalidInput("empty sequence");
  }
  PackedLayout p;
  p.sample_of.resize(lengths.size());
  std::iota(p.sample_of.begin(), p.sample_of.end(), 0);
  std::stable_sort(p.sample_of.begin(), p.sample_of.end(),
                   [&](int a, int b) { return lengths[a] > lengths[b]; });
  for (int s : p.sample_of) p.lengths.push_back(lengths[s]);

  const int steps = p.lengths.front();
  p.batch_sizes.resize(steps);
  p.offsets.resize(steps);
  int active = p.batch();
  int offset = 0;
  for (int t = 0; t < steps; ++t) {
    while (active > 0 && p.lengths[active - 1] <= t) --active;
    p.batch_sizes[t] = active;
    p.offsets[t] = offset;
    offset += active;
  }
  p.columns = offset;
  return p;
}

template <class T>
Mat<T> pack_sequences(const PackedLayout& layout, std::span<const FrameView> sequences) {
  if (static_cast<int>(sequences.size()) != layout.batch()) {
    throw InvalidInput("pack_sequences: layout/batch size mismatch");
  }
  const int dim = sequences.front().dim;
  Mat<T> out(dim, layout.columns);
  for (int slot = 0; slot < layout.batch(); ++slot) {
    const FrameView& seq = sequences[layout.sample_of[slot]];
    if (seq.dim != dim) throw InvalidInput("pack_sequences: inconsistent frame dimension");
    if (seq.frames != layout.lengths[slot]) throw InvalidInput("pack_sequences: length mismatch");
    for (int t = 0; t < seq.frames; ++t) {
      const float* row = seq.data + static_cast<std::size_t>(t) * dim;
      auto col = out.col(layout.offsets[t] + slot);
      for (int d = 0; d < dim; ++d) col[d] = static_cast<T>(row[d]);
    }
  }
  return out;
}

template <class T>
Mat<T> pack_sequences(const PackedLayout& layout, std::span<const Mat<T>> sequences) {
  if (static_cast<int>(sequences.size()) != layout.batch()) {
    throw InvalidInput("pack_sequences: layout/batch size mismatch");
  }
  const auto dim = sequences.front().rows();
  Mat<T> out(dim, layout.columns);
  for (int slot = 0; slot < layout.batch(); ++slot) {
    const Mat<T>& seq = sequences[layout.sample_of[slot]];
    if (seq.rows() != dim) throw InvalidInput("pack_sequences: inconsistent frame dimension");
    if (seq.cols() != layout.lengths[slot]) throw InvalidInput("pack_sequences: length mismatch");
    for (int t = 0; t < layout.lengths[slot]; ++t) out.col(layout.offsets[t] + slot) = seq.col(t);
  }
  return out;
}

namespace {

template <class T>
void lstm_layer_forward(const RecurrentLayer<T>& layer, const PackedLayout& layout,
                        LayerTrace<T>& tr) {
  const int h = layer.hidden_dim();
  const int n = layout.columns;
  tr.gates.noalias() = layer.w_input * tr.input;
  tr.gates.colwise() += layer.bias;
  tr.cells.resize(h, n);
  tr.hidden.resize(h, n);

  for (int t = 0; t < layout.steps(); ++t) {
    const int k = layout.batch_sizes[t];
    const int off = layout.offsets[t];
    auto z = tr.gates.middleCols(off, k);
    if (t > 0) {
      z.noalias() += layer.w_recurrent * tr.hidden.middleCols(layout.offsets[t - 1], k);
    }
    z.middleRows(0, 2 * h) = squash(z.middleRows(0, 2 * h).array()).matrix();
    z.middleRows(2 * h, h) = z.middleRows(2 * h, h).array().tanh().matrix();
    z.middleRows(3 * h, h) = squash(z.middleRows(3 * h, h).array()).matrix();

    auto i = z.middleRows(0, h).array();
    auto f = z.middleRows(h, h).array();
    auto g = z.middleRows(2 * h, h).array();
    auto o = z.middleRows(3 * h, h).array();
    auto c = tr.cells.middleCols(off, k);
    if (t > 0) {
      c = (i * g + f * tr.cells.middleCols(layout.offsets[t - 1], k).array()).matrix();
    } else {
      c = (i * g).matrix();
    }
    tr.hidden.middleCols(off, k) = (o * c.array().tanh()).matrix();
  }
}

template <class T>
void gru_layer_forward(const RecurrentLayer<T>& layer, const PackedLayout& layout,
                       LayerTrace<T>& tr) {
  const int h = layer.hidden_dim();
  const int n = layout.columns;
  tr.gates.noalias() = layer.w_input * tr.input;
  tr.gates.colwise() += layer.bias;
  tr.hidden.resize(h, n);
  tr.reset_hidden.setZero(h, n);

  for (int t = 0; t < layout.steps(); ++t) {
    const int k = layout.batch_sizes[t];
    const int off = layout.offsets[t];
    auto z = tr.gates.middleCols(off, k);
    if (t > 0) {
      const auto hp = tr.hidden.middleCols(layout.offsets[t - 1], k);
      z.topRows(2 * h).noalias() += layer.w_recurrent.topRows(2 * h) * hp;
      z.topRows(2 * h) = squash(z.topRows(2 * h).array()).matrix();
      auto rh = tr.reset_hidden.middleCols(off, k);
      rh = (z.topRows(h).array() * hp.array()).matrix();
      z.bottomRows(h).noalias() += layer.w_recurrent.bottomRows(h) * rh;
      z.bottomRows(h) = z.bottomRows(h).array().tanh().matrix();
      const auto u = z.middleRows(h, h).array();
      tr.hidden.middleCols(off, k) =
          (u * hp.array() + (T(1) - u) * z.bottomRows(h).array()).matrix();
    } else {
      z.topRows(2 * h) = squash(z.topRows(2 * h).array()).matrix();
      z.bottomRows(h) = z.bottomRows(h).array().tanh().matrix();
      const auto u = z.middleRows(h, h).array();
      tr.hidden.middleCols(off, k) = ((T(1) - u) * z.bottomRows(h).array()).matrix();
    }
  }
}

/// h_{t-1} aligned with each packed column (zero at t = 0).
template <class T>
Mat<T> previous_hidden(const PackedLayout& layout, const Mat<T>& hidden) {
  Mat<T> prev = Mat<T>::Zero(hidden.rows(), hidden.cols());
  for (int t = 1; t < layout.steps(); ++t) {
    const int k = layout.batch_sizes[t];
    prev.middleCols(layout.offsets[t], k) = hidden.middleCols(layout.offsets[t - 1], k);
  }
  return prev;
}

template <class T>
Mat<T> lstm_layer_backward(const RecurrentLayer<T>& layer, const PackedLayout& layout,
                           const LayerTrace<T>& tr, const Mat<T>& d_hidden,
                           RecurrentLayer<T>& grad, bool need_input_grad) {
  const int h = layer.hidden_dim();
  const int k0 = layout.batch();
  Mat<T> dz(4 * h, layout.columns);
  Mat<T> dh_carry = Mat<T>::Zero(h, k0);
  Mat<T> dc_carry = Mat<T>::Zero(h, k0);
  Mat<T> dh(h, k0), dc(h, k0);

  for (int t = layout.steps() - 1; t >= 0; --t) {
    const int k = layout.batch_sizes[t];
    const int off = layout.offsets[t];
    const auto z = tr.gates.middleCols(off, k);
    const auto i = z.middleRows(0, h).array();
    const auto f = z.middleRows(h, h).array();
    const auto g = z.middleRows(2 * h, h).array();
    const auto o = z.middleRows(3 * h, h).array();
    const auto tc = tr.cells.middleCols(off, k).array().tanh();

    auto dhk = dh.leftCols(k);
    auto dck = dc.leftCols(k);
    dhk = d_hidden.middleCols(off, k) + dh_carry.leftCols(k);
    dck = (dc_carry.leftCols(k).array() + dhk.array() * o * (T(1) - tc * tc)).matrix();

    auto dzk = dz.middleCols(off, k);
    dzk.middleRows(0, h) = (dck.array() * g * i * (T(1) - i)).matrix();
    if (t > 0) {
      const auto c_prev = tr.cells.middleCols(layout.offsets[t - 1], k).array();
      dzk.middleRows(h, h) = (dck.array() * c_prev * f * (T(1) - f)).matrix();
    } else {
      dzk.middleRows(h, h).setZero();
    }
    dzk.middleRows(2 * h, h) = (dck.array() * i * (T(1) - g * g)).matrix();
    dzk.middleRows(3 * h, h) = (dhk.array() * tc * o * (T(1) - o)).matrix();

    dc_carry.leftCols(k) = (dck.array() * f).matrix();
    if (t > 0) dh_carry.leftCols(k).noalias() = layer.w_recurrent.transpose() * dzk;
  }

  grad.w_input.noalias() += dz * tr.input.transpose();
  grad.w_recurrent.noalias() += dz * previous_hidden(layout, tr.hidden).transpose();
  grad.bias += dz.rowwise().sum();
  if (!need_input_grad) return Mat<T>();
  return layer.w_input.transpose() * dz;
}

template <class T>
Mat<T> gru_layer_backward(const RecurrentLayer<T>& layer, const PackedLayout& layout,
                          const LayerTrace<T>& tr, const Mat<T>& d_hidden,
                          RecurrentLayer<T>& grad, bool need_input_grad) {
  const int h = layer.hidden_dim();
  const int k0 = layout.batch();
  Mat<T> dz(3 * h, layout.columns);
  Mat<T> dh_carry = Mat<T>::Zero(h, k0);
  Mat<T> dh(h, k0), drh(h, k0);
  const auto w_ru = layer.w_recurrent.topRows(2 * h);
  const auto w_cand = layer.w_recurrent.bottomRows(h);

  for (int t = layout.steps() - 1; t >= 0; --t) {
    const int k = layout.batch_sizes[t];
    const int off = layout.offsets[t];
    const auto z = tr.gates.middleCols(off, k);
    const auto r = z.middleRows(0, h).array();
    const auto u = z.middleRows(h, h).array();
    const auto cand = z.middleRows(2 * h, h).array();

    auto dhk = dh.leftCols(k);
    dhk = d_hidden.middleCols(off, k) + dh_carry.leftCols(k);
    auto dzk = dz.middleCols(off, k);
    dzk.middleRows(2 * h, h) = (dhk.array() * (T(1) - u) * (T(1) - cand * cand)).matrix();

    if (t > 0) {
      const auto hp = tr.hidden.middleCols(layout.offsets[t - 1], k).array();
      dzk.middleRows(h, h) = (dhk.array() * (hp - cand) * u * (T(1) - u)).matrix();
      auto drhk = drh.leftCols(k);
      drhk.noalias() = w_cand.transpose() * dzk.middleRows(2 * h, h);
      dzk.middleRows(0, h) = (drhk.array() * hp * r * (T(1) - r)).matrix();
      auto carry = dh_carry.leftCols(k);
      carry = (dhk.array() * u + drhk.array() * r).matrix();
      carry.noalias() += w_ru.transpose() * dzk.topRows(2 * h);
    } else {
      dzk.middleRows(h, h) = (dhk.array() * (-cand) * u * (T(1) - u)).matrix();
      dzk.middleRows(0, h).setZero();
    }
  }

  grad.w_input.noalias() += dz * tr.input.transpose();
  grad.w_recurrent.topRows(2 * h).noalias() +=
      dz.topRows(2 * h) * previous_hidden(layout, tr.hidden).transpose();
  grad.w_recurrent.bottomRows(h).noalias() += dz.bottomRows(h) * tr.reset_hidden.transpose();
  grad.bias += dz.rowwise().sum();
  if (!need_input_grad) return Mat<T>();
  return layer.w_input.transpose() * dz;
}

}  // namespace

template <class T>
RnnTrace<T> stacked_forward(const StackedRnnParams<T>& params, const PackedLayout& layout,
                            Mat<T> packed_input, Mode mode, RandomSource* rng) {
  if (params.layers.empty()) throw InvalidInput("stacked_forward: no layers");
  if (packed_input.rows() != params.input_dim() || packed_input.cols() != layout.columns) {
    throw InvalidInput("stacked_forward: expected frames of dim " +
                       std::to_string(params.input_dim()) + ", got " +
                       std::to_string(packed_input.rows()));
  }
  const bool dropout = mode == Mode::train && params.inter_layer_dropout > 0.0;
  if (dropout && rng == nullptr) throw InvalidInput("stacked_forward: train mode needs an rng");

  RnnTrace<T> trace;
  trace.layout = layout;
  trace.layers.resize(params.layers.size());
  Mat<T> input = std::move(packed_input);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    auto& tr = trace.layers[l];
    tr.input = std::move(input);
    if (layer.kind == CellKind::lstm) {
      lstm_layer_forward(layer, layout, tr);
    } else {
      gru_layer_forward(layer, layout, tr);
    }
    if (l + 1 < params.layers.size()) {
      if (dropout) {
        trace.dropout_masks.push_back(dropout_mask<T>(*rng, tr.hidden.rows(), tr.hidden.cols(),
                                                      params.inter_layer_dropout));
        input = (tr.hidden.array() * trace.dropout_masks.back().array()).matrix();
      } else {
        input = tr.hidden;
      }
    }
  }

  const auto& top = trace.layers.back().hidden;
  trace.final_hidden.resize(top.rows(), layout.batch());
  for (int slot = 0; slot < layout.batch(); ++slot) {
    trace.final_hidden.col(layout.sample_of[slot]) = top.col(layout.final_column(slot));
  }
  return trace;
}

template <class T>
RnnTrace<T> stacked_forward(const StackedRnnParams<T>& params, const Mat<T>& sequence, Mode mode,
                            RandomSource* rng) {
  const int len = static_cast<int>(sequence.cols());
  if (len < 1) throw InvalidInput("stacked_forward: empty sequence");
  PackedLayout layout = PackedLayout::from_lengths(std::span<const int>(&len, 1));
  return stacked_forward(params, layout, sequence, mode, rng);
}

template <class T>
void stacked_backward(const StackedRnnParams<T>& params, const RnnTrace<T>& trace,
                      const Mat<T>& d_final_hidden, StackedRnnParams<T>& grads) {
  const PackedLayout& layout = trace.layout;
  const auto& top = trace.layers.back();
  if (d_final_hidden.rows() != top.hidden.rows() || d_final_hidden.cols() != layout.batch()) {
    throw InvalidInput("stacked_backward: gradient shape mismatch");
  }
  Mat<T> d_hidden = Mat<T>::Zero(top.hidden.rows(), layout.columns);
  for (int slot = 0; slot < layout.batch(); ++slot) {
    d_hidden.col(layout.final_column(slot)) = d_final_hidden.col(layout.sample_of[slot]);
  }

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    const bool need_input = l > 0;
    Mat<T> d_input =
        layer.kind == CellKind::lstm
            ? lstm_layer_backward(layer, layout, trace.layers[l], d_hidden, grads.layers[l], need_input)
            : gru_layer_backward(layer, layout, trace.layers[l], d_hidden, grads.layers[l], need_input);
    if (!need_input) break;
    if (!trace.dropout_masks.empty()) {
      d_input.array() *= trace.dropout_masks[l - 1].array();
    }
    d_hidden = std::move(d_input);
  }
}

#define AWE_INSTANTIATE(T)                                                                    \
  template struct RecurrentLayer<T>;                                                          \
  template struct CellState<T>;                                                               \
  template struct StackedRnnParams<T>;                                                        \
  template CellState<T> lstm_step<T>(const RecurrentLayer<T>&, const Mat<T>&,                 \
                                     const CellState<T>&);                                    \
  template CellState<T> gru_step<T>(const RecurrentLayer<T>&, const Mat<T>&,                  \
                                    const CellState<T>&);                                     \
  template Mat<T> pack_sequences<T>(const PackedLayout&, std::span<const FrameView>);         \
  template Mat<T> pack_sequences<T>(const PackedLayout&, std::span<const Mat<T>>);            \
  template RnnTrace<T> stacked_forward<T>(const StackedRnnParams<T>&, const PackedLayout&,    \
                                          Mat<T>, Mode, RandomSource*);                       \
  template RnnTrace<T> stacked_forward<T>(const StackedRnnParams<T>&, const Mat<T>&, Mode,    \
                                          RandomSource*);                                     \
  template void stacked_backward<T>(const StackedRnnParams<T>&, const RnnTrace<T>&,           \
                                    const Mat<T>&, StackedRnnParams<T>&);

AWE_INSTANTIATE(float)
AWE_INSTANTIATE(double)

#undef AWE_INSTANTIATE

}  // namespace awe
