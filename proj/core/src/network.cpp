#include "awe/network.hpp"

#include <cmath>

#include "awe/error.hpp"

namespace awe {

std::string to_string(CellKind kind) { return kind == CellKind::lstm ? "lstm" : "gru"; }
std::string to_string(Head head) { return head == Head::log_softmax ? "log_softmax" : "linear"; }

CellKind parse_cell_kind(const std::string& s) {
  if (s == "lstm") return CellKind::lstm;
  if (s == "gru") return CellKind::gru;
  throw ConfigError("unknown cell kind '" + s + "' (expected lstm or gru)");
}

Head parse_head(const std::string& s) {
  if (s == "log_softmax") return Head::log_softmax;
  if (s == "linear") return Head::linear;
  throw ConfigError("unknown head '" + s + "' (expected log_softmax or linear)");
}

void NetworkConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(v));
  };
  positive(stacked_layers, "stacked_layers");
  positive(fc_layers, "fc_layers");
  positive(input_dim, "input_dim");
  positive(hidden_dim, "hidden_dim");
  positive(fc_dim, "fc_dim");
  positive(output_dim, "output_dim");
  for (double p : {dropout_recurrent, dropout_fc}) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must lie in [0, 1)");
  }
}

std::size_t expected_parameter_count(const NetworkConfig& c) {
  const std::size_t g = static_cast<std::size_t>(gate_count(c.cell));
  const std::size_t h = static_cast<std::size_t>(c.hidden_dim);
  std::size_t n = 0;
  for (int l = 0; l < c.stacked_layers; ++l) {
    const std::size_t din = l == 0 ? static_cast<std::size_t>(c.input_dim) : h;
    n += g * h * (din + h) + g * h;
  }
  for (int l = 0; l < c.fc_layers; ++l) {
    const std::size_t in = static_cast<std::size_t>(c.fc_input_dim(l));
    const std::size_t out = static_cast<std::size_t>(c.fc_output_dim(l));
    n += out * in + out;
  }
  return n;
}

template <class T>
std::size_t NetworkParams<T>::parameter_count() const {
  std::size_t n = rnn.parameter_count();
  for (const auto& d : fc) n += static_cast<std::size_t>(d.weights.size() + d.bias.size());
  return n;
}

template <class T>
NetworkParams<T> zero_params(const NetworkConfig& config) {
  config.validate();
  NetworkParams<T> p;
  p.rnn.inter_layer_dropout = config.dropout_recurrent;
  for (int l = 0; l < config.stacked_layers; ++l) {
    const int din = l == 0 ? config.input_dim : config.hidden_dim;
    p.rnn.layers.push_back(RecurrentLayer<T>::zeros(config.cell, din, config.hidden_dim));
  }
  for (int l = 0; l < config.fc_layers; ++l) {
    const int in = config.fc_input_dim(l);
    const int out = config.fc_output_dim(l);
    p.fc.push_back({Mat<T>::Zero(out, in), Vec<T>::Zero(out)});
  }
  return p;
}

namespace {

template <class T>
void fill_uniform(Mat<T>& m, double bound, RandomSource& rng) {
  // Row-major draw order, matching the serialized layout.
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<T>(rng.uniform(-bound, bound));
  }
}

}  // namespace

template <class T>
DenseLayer<T> init_dense(int in, int out, RandomSource& rng) {
  DenseLayer<T> d{Mat<T>(out, in), Vec<T>::Zero(out)};
  fill_uniform(d.weights, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  return d;
}

template <class T>
NetworkParams<T> init_params(const NetworkConfig& config, RandomSource& rng) {
  NetworkParams<T> p = zero_params<T>(config);
  for (auto& layer : p.rnn.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.input_dim() + layer.hidden_dim()));
    fill_uniform(layer.w_input, bound, rng);
    fill_uniform(layer.w_recurrent, bound, rng);
  }
  for (auto& d : p.fc) {
    d = init_dense<T>(static_cast<int>(d.weights.cols()), static_cast<int>(d.weights.rows()), rng);
  }
  return p;
}

template <class T>
std::vector<T> flatten(const NetworkParams<T>& params) {
  std::vector<T> out;
  out.reserve(params.parameter_count());
  params.visit([&](const auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) out.push_back(t(r, c));
    }
  });
  return out;
}

template <class T>
void unflatten(std::span<const T> values, NetworkParams<T>& params) {
  if (values.size() != params.parameter_count()) {
    throw InvalidInput("unflatten: expected " + std::to_string(params.parameter_count()) +
                       " values, got " + std::to_string(values.size()));
  }
  std::size_t k = 0;
  params.visit([&](auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = values[k++];
    }
  });
}

namespace {

template <class T>
NetworkTrace<T> forward_head(const NetworkParams<T>& params, const NetworkConfig& config,
                             RnnTrace<T> rnn, Mode mode, RandomSource* rng) {
  NetworkTrace<T> tr;
  tr.rnn = std::move(rnn);
  const bool dropout = mode == Mode::train && config.dropout_fc > 0.0;
  if (dropout && rng == nullptr) throw InvalidInput("forward_batch: train mode needs an rng");

  Mat<T> a = tr.rnn.final_hidden;
  const std::size_t f = params.fc.size();
  for (std::size_t l = 0; l < f; ++l) {
    const auto& d = params.fc[l];
    Mat<T> z = d.weights * a;
    z.colwise() += d.bias;
    tr.fc_inputs.push_back(std::move(a));
    if (l + 1 < f) {
      a = z.cwiseMax(T(0));
      tr.fc_pre.push_back(std::move(z));
      if (dropout) {
        tr.fc_masks.push_back(dropout_mask<T>(*rng, a.rows(), a.cols(), config.dropout_fc));
        a.array() *= tr.fc_masks.back().array();
      }
    } else {
      tr.logits = std::move(z);
    }
  }
  tr.output = config.head == Head::log_softmax ? log_softmax_columns(tr.logits) : tr.logits;
  return tr;
}

}  // namespace

template <class T>
NetworkTrace<T> forward_batch(const NetworkParams<T>& params, const NetworkConfig& config,
                              std::span<const FrameView> sequences, Mode mode, RandomSource* rng) {
  std::vector<int> lengths;
  lengths.reserve(sequences.size());
  for (const auto& s : sequences) {
    if (s.dim != config.input_dim) {
      throw InvalidInput("segment frame dim " + std::to_string(s.dim) + " does not match network input dim " +
                         std::to_string(config.input_dim));
    }
    lengths.push_back(s.frames);
  }
  const PackedLayout layout = PackedLayout::from_lengths(lengths);
  Mat<T> packed = pack_sequences<T>(layout, sequences);
  return forward_head(params, config, stacked_forward(params.rnn, layout, std::move(packed), mode, rng),
                      mode, rng);
}

template <class T>
NetworkTrace<T> forward_batch(const NetworkParams<T>& params, const NetworkConfig& config,
                              std::span<const Mat<T>> sequences, Mode mode, RandomSource* rng) {
  std::vector<int> lengths;
  for (const auto& s : sequences) {
    if (s.rows() != config.input_dim) throw InvalidInput("sequence frame dim mismatch");
    lengths.push_back(static_cast<int>(s.cols()));
  }
  const PackedLayout layout = PackedLayout::from_lengths(lengths);
  Mat<T> packed = pack_sequences<T>(layout, sequences);
  return forward_head(params, config, stacked_forward(params.rnn, layout, std::move(packed), mode, rng),
                      mode, rng);
}

template <class T>
Mat<T> head_backward(const NetworkConfig& config, const Mat<T>& output, const Mat<T>& d_output) {
  if (config.head == Head::linear) return d_output;
  // y = z - lse(z): dz = dy - softmax(z) * sum(dy).
  const Mat<T> p = output.array().exp().matrix();
  Mat<T> dz = d_output;
  for (Eigen::Index j = 0; j < dz.cols(); ++j) dz.col(j) -= p.col(j) * d_output.col(j).sum();
  return dz;
}

template <class T>
void backward_batch(const NetworkParams<T>& params, const NetworkConfig& config,
                    const NetworkTrace<T>& trace, const Mat<T>& d_logits, NetworkParams<T>& grads) {
  (void)config;
  if (d_logits.rows() != trace.logits.rows() || d_logits.cols() != trace.logits.cols()) {
    throw InvalidInput("backward_batch: gradient shape mismatch");
  }
  Mat<T> d = d_logits;
  for (std::size_t l = params.fc.size(); l-- > 0;) {
    grads.fc[l].weights.noalias() += d * trace.fc_inputs[l].transpose();
    grads.fc[l].bias += d.rowwise().sum();
    Mat<T> da = params.fc[l].weights.transpose() * d;
    if (l > 0) {
      if (!trace.fc_masks.empty()) da.array() *= trace.fc_masks[l - 1].array();
      da = (trace.fc_pre[l - 1].array() > T(0)).select(da, T(0));
    }
    d = std::move(da);
  }
  stacked_backward(params.rnn, trace.rnn, d, grads.rnn);
}

template <class T>
Vec<T> embed(const NetworkParams<T>& params, const NetworkConfig& config, FrameView frames,
             Mode mode, RandomSource* rng) {
  const auto tr = forward_batch(params, config, std::span<const FrameView>(&frames, 1), mode, rng);
  return tr.output.col(0);
}

#define AWE_INSTANTIATE(T)                                                                    \
  template struct NetworkParams<T>;                                                           \
  template NetworkParams<T> zero_params<T>(const NetworkConfig&);                             \
  template NetworkParams<T> init_params<T>(const NetworkConfig&, RandomSource&);              \
  template DenseLayer<T> init_dense<T>(int, int, RandomSource&);                              \
  template std::vector<T> flatten<T>(const NetworkParams<T>&);                                \
  template void unflatten<T>(std::span<const T>, NetworkParams<T>&);                          \
  template NetworkTrace<T> forward_batch<T>(const NetworkParams<T>&, const NetworkConfig&,    \
                                            std::span<const FrameView>, Mode, RandomSource*); \
  template NetworkTrace<T> forward_batch<T>(const NetworkParams<T>&, const NetworkConfig&,    \
                                            std::span<const Mat<T>>, Mode, RandomSource*);    \
  template Mat<T> head_backward<T>(const NetworkConfig&, const Mat<T>&, const Mat<T>&);       \
  template void backward_batch<T>(const NetworkParams<T>&, const NetworkConfig&,             \
                                  const NetworkTrace<T>&, const Mat<T>&, NetworkParams<T>&);  \
  template Vec<T> embed<T>(const NetworkParams<T>&, const NetworkConfig&, FrameView, Mode,    \
                           RandomSource*);

AWE_INSTANTIATE(float)
AWE_INSTANTIATE(double)

#undef AWE_INSTANTIATE

}  // namespace awe
