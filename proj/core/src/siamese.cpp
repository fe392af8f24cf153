#include "awe/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <unordered_map>

#include "awe/error.hpp"

namespace awe {

template <class T>
CosHinge<T> cos_hinge_loss(const Vec<T>& anchor, const Vec<T>& same, const Vec<T>& diff, double margin) {
  const auto as = cosine_distance_grad(anchor, same);
  const auto ad = cosine_distance_grad(anchor, diff);
  CosHinge<T> out;
  out.d_as = as.distance;
  out.d_ad = ad.distance;
  const double value = margin + as.distance - ad.distance;
  if (value > 0.0) {
    out.loss = value;
    out.grad_anchor = as.d_x - ad.d_x;
    out.grad_same = as.d_y;
    out.grad_diff = -ad.d_y;
  } else {
    out.loss = 0.0;
    out.grad_anchor = Vec<T>::Zero(anchor.size());
    out.grad_same = Vec<T>::Zero(same.size());
    out.grad_diff = Vec<T>::Zero(diff.size());
  }
  return out;
}

LabelIndex::LabelIndex(const Corpus& corpus) {
  labels_ = sorted_labels(corpus);
  for (std::size_t k = 0; k < labels_.size(); ++k) index_[labels_[k]] = k;
  members_.resize(labels_.size());
  label_of_segment_.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::size_t l = index_.at(corpus.segments[i].label);
    label_of_segment_.push_back(l);
    members_[l].push_back(i);
  }
}

std::size_t LabelIndex::index_of(const std::string& label) const {
  const auto it = index_.find(label);
  if (it == index_.end()) throw InvalidInput("unknown label '" + label + "'");
  return it->second;
}

SimilarityMatrix::SimilarityMatrix(std::size_t n) : n_(n), values_(n * n), pending_(n * n, 0.0) {
  if (n == 0) throw InvalidInput("similarity matrix needs at least one label");
  reset();
}

void SimilarityMatrix::reset() {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) values_[i * n_ + j] = i == j ? 0.0 : 1.0;
  }
  std::fill(pending_.begin(), pending_.end(), 0.0);
  pending_dirty_ = false;
}

double SimilarityMatrix::row_sum(std::size_t i) const {
  double s = 0.0;
  for (std::size_t j = 0; j < n_; ++j) s += values_[i * n_ + j];
  return s;
}

std::vector<double> SimilarityMatrix::pmf(std::size_t i) const {
  const double s = row_sum(i);
  if (!(s > 0.0)) return {};
  std::vector<double> p(n_);
  for (std::size_t j = 0; j < n_; ++j) p[j] = values_[i * n_ + j] / s;
  return p;
}

double SimilarityMatrix::row_entropy(std::size_t i) const {
  double h = 0.0;
  for (double p : pmf(i)) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

void SimilarityMatrix::stage(std::size_t i, std::size_t j, double increment) {
  if (i == j) throw InvalidInput("similarity matrix diagonal is fixed at zero");
  if (!(increment >= 0.0)) throw InvalidInput("similarity increments must be non-negative");
  pending_[i * n_ + j] += increment;
  pending_[j * n_ + i] += increment;
  pending_dirty_ = true;
}

void SimilarityMatrix::commit() {
  if (!pending_dirty_) return;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    values_[k] += pending_[k];
    pending_[k] = 0.0;
  }
  pending_dirty_ = false;
}

double update_similarity_matrix(SimilarityMatrix& sim, std::size_t anchor_label, std::size_t diff_label,
                                double d_as, double d_ad, double m_star) {
  if (anchor_label == diff_label) throw InvalidInput("anchor and negative share a label");
  if (d_ad > d_as + m_star) return 0.0;
  const double increment = std::max(0.0, 1.0 - d_ad);
  if (increment > 0.0) sim.stage(anchor_label, diff_label, increment);
  return increment;
}

SamplingMode parse_sampling_mode(const std::string& s) {
  if (s == "uniform") return SamplingMode::uniform;
  if (s == "nonuniform") return SamplingMode::nonuniform;
  throw ConfigError("unknown sampling mode '" + s + "' (expected uniform or nonuniform)");
}

std::string to_string(SamplingMode mode) { return mode == SamplingMode::uniform ? "uniform" : "nonuniform"; }

namespace {

std::size_t sample_uniform_other(std::size_t anchor_label, const LabelIndex& index, RandomSource& rng) {
  // Rejection keeps the draw exactly uniform over other-label segments.
  for (;;) {
    const std::size_t seg = rng.index(index.num_segments());
    if (index.label_of_segment(seg) != anchor_label) return seg;
  }
}

}  // namespace

std::size_t sample_negative(std::size_t anchor_label, const LabelIndex& index, const SimilarityMatrix* sim,
                            SamplingMode mode, RandomSource& rng) {
  if (index.num_labels() < 2) throw InvalidInput("negative sampling needs at least two labels");
  if (anchor_label >= index.num_labels()) throw InvalidInput("anchor label out of range");
  if (mode == SamplingMode::uniform || sim == nullptr) return sample_uniform_other(anchor_label, index, rng);
  if (sim->size() != index.num_labels()) throw InvalidInput("similarity matrix size does not match labels");

  const std::size_t n = sim->size();
  const double total = sim->row_sum(anchor_label);
  if (!(total > 0.0)) {
    std::cerr << "warning: similarity row of label '" << index.label(anchor_label)
              << "' sums to zero; sampling uniformly\n";
    return sample_uniform_other(anchor_label, index, rng);
  }
  const double target = rng.uniform() * total;
  double cumulative = 0.0;
  std::size_t chosen = n;
  std::size_t last_positive = n;
  for (std::size_t j = 0; j < n; ++j) {
    const double w = j == anchor_label ? 0.0 : sim->at(anchor_label, j);
    if (w <= 0.0) continue;
    last_positive = j;
    cumulative += w;
    if (cumulative > target) {
      chosen = j;
      break;
    }
  }
  if (chosen == n) chosen = last_positive;
  const auto& members = index.segments_of(chosen);
  return members[rng.index(members.size())];
}

std::vector<Triplet> build_minibatch(std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                     const std::function<std::size_t(std::size_t)>& sample_diff) {
  std::vector<Triplet> out;
  out.reserve(2 * pairs.size());
  for (const auto& [a, s] : pairs) {
    const std::size_t d = sample_diff(a);
    out.push_back({a, s, d});
    out.push_back({s, a, d});
  }
  return out;
}

std::vector<Triplet> build_minibatch(std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                     const LabelIndex& index, const SimilarityMatrix* sim, SamplingMode mode,
                                     RandomSource& rng) {
  return build_minibatch(pairs, [&](std::size_t anchor) {
    return sample_negative(index.label_of_segment(anchor), index, sim, mode, rng);
  });
}

void SiameseTrainConfig::validate() const {
  if (!(margin > 0.0 && margin < 2.0)) throw ConfigError("margin must lie in (0, 2)");
  if (!(m_star >= margin)) throw ConfigError("m_star must be >= margin");
  if (pairs_per_batch < 1) throw ConfigError("pairs_per_batch must be >= 1");
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (!(lr_init > 0.0)) throw ConfigError("siamese lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("siamese momentum must lie in [0, 1)");
  if (lr_drop_epochs < 1) throw ConfigError("lr_drop_epochs must be >= 1");
  if (!(lr_decay > 1.0)) throw ConfigError("siamese lr_decay must exceed 1");
  if (max_epochs < 1) throw ConfigError("siamese max_epochs must be >= 1");
}

template <class T>
TripletBatchLoss<T> triplet_batch_loss(const NetworkParams<T>& params, const NetworkConfig& config,
                                       std::span<const Segment> segments, std::span<const Triplet> triplets,
                                       double margin, Mode mode, RandomSource* rng, NetworkParams<T>* grads) {
  if (triplets.empty()) throw InvalidInput("triplet_batch_loss: empty batch");
  std::unordered_map<std::size_t, Eigen::Index> column;
  std::vector<FrameView> views;
  auto column_of = [&](std::size_t seg) {
    const auto [it, inserted] = column.emplace(seg, static_cast<Eigen::Index>(views.size()));
    if (inserted) {
      if (seg >= segments.size()) throw InvalidInput("triplet refers to a missing segment");
      views.push_back(segments[seg].view());
    }
    return it->second;
  };
  std::vector<std::array<Eigen::Index, 3>> cols;
  cols.reserve(triplets.size());
  for (const auto& t : triplets) cols.push_back({column_of(t.anchor), column_of(t.same), column_of(t.diff)});

  const auto tr = forward_batch(params, config, views, mode, rng);
  TripletBatchLoss<T> out;
  Mat<T> d_out = Mat<T>::Zero(tr.output.rows(), tr.output.cols());
  const T scale = T(1) / static_cast<T>(triplets.size());
  double sum = 0.0;
  for (const auto& c : cols) {
    auto h = cos_hinge_loss<T>(tr.output.col(c[0]), tr.output.col(c[1]), tr.output.col(c[2]), margin);
    sum += h.loss;
    if (h.loss == 0.0) ++out.zero_loss;
    if (grads != nullptr && h.loss > 0.0) {
      d_out.col(c[0]) += h.grad_anchor * scale;
      d_out.col(c[1]) += h.grad_same * scale;
      d_out.col(c[2]) += h.grad_diff * scale;
    }
    out.per_triplet.push_back(std::move(h));
  }
  out.loss = sum / static_cast<double>(triplets.size());
  if (grads != nullptr) backward_batch(params, config, tr, head_backward(config, tr.output, d_out), *grads);
  return out;
}

Checkpoint siamese_from_warm_start(const Checkpoint& warm_start, int embed_dim, RandomSource& init_rng) {
  if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  Checkpoint ck;
  ck.config = warm_start.config;
  ck.config.head = Head::linear;
  ck.config.output_dim = embed_dim;
  ck.normalizer = warm_start.normalizer;
  ck.params = warm_start.params;
  if (ck.params.fc.size() != static_cast<std::size_t>(ck.config.fc_layers) ||
      ck.params.parameter_count() != expected_parameter_count(warm_start.config)) {
    throw ConfigError("warm-start checkpoint parameters do not match its configuration");
  }
  const int last = ck.config.fc_layers - 1;
  ck.params.fc[last] = init_dense<float>(ck.config.fc_input_dim(last), embed_dim, init_rng);
  return ck;
}

TrainResult train_siamese(const Corpus& train_in, const Corpus& dev_in, const std::optional<Checkpoint>& warm_start,
                          const SiameseTrainConfig& cfg, const NetworkConfig& cold_network,
                          const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_in.empty()) throw ConfigError("training corpus is empty");
  if (dev_in.feature_dim() != train_in.feature_dim()) throw ConfigError("train/dev feature dims differ");

  const RandomSource root(cfg.seed);
  RandomSource init_rng = root.split("init");
  RandomSource shuffle_rng = root.split("shuffle");
  RandomSource dropout_rng = root.split("dropout");
  RandomSource sampling_rng = root.split("sampling");

  Checkpoint model;
  if (warm_start) {
    if (warm_start->config.input_dim != train_in.feature_dim()) {
      throw ConfigError("warm-start network expects " + std::to_string(warm_start->config.input_dim) +
                        "-dim frames, corpus has " + std::to_string(train_in.feature_dim()));
    }
    model = siamese_from_warm_start(*warm_start, cfg.embed_dim, init_rng);
  } else {
    model.config = cold_network;
    model.config.input_dim = train_in.feature_dim();
    model.config.head = Head::linear;
    model.config.output_dim = cfg.embed_dim;
    model.config.validate();
    if (cfg.normalize) model.normalizer = FeatureNormalizer::fit(train_in);
    model.params = init_params<float>(model.config, init_rng);
  }
  const NetworkConfig& network = model.config;

  Corpus train = train_in;
  Corpus dev = dev_in;
  model.normalizer.apply(train);
  model.normalizer.apply(dev);

  const LabelIndex labels(train);
  if (labels.num_labels() < 2) throw ConfigError("Siamese training needs at least two word types");
  std::vector<std::pair<std::size_t, std::size_t>> pairs = enumerate_same_pairs(train);
  if (pairs.empty()) throw ConfigError("training corpus has no same-word pairs");

  NetworkParams<float>& params = model.params;
  OptimizerState<float> opt = make_optimizer_state(params, cfg.lr_init);
  NetworkParams<float> grads = zero_params<float>(network);
  SimilarityMatrix sim(labels.num_labels());

  TrainResult result;
  result.best = model;
  result.best.vocabulary.clear();
  double best_ap = -1.0;
  double best_at_window_start = -1.0;
  bool dropped_last_window = false;
  double lr = cfg.lr_init;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    sim.reset();
    shuffle_rng.shuffle(pairs.begin(), pairs.end());
    double loss_sum = 0.0;
    std::size_t zero = 0, triplet_count = 0;
    int batches = 0;
    for (std::size_t start = 0; start < pairs.size(); start += cfg.pairs_per_batch) {
      const std::size_t end = std::min(pairs.size(), start + cfg.pairs_per_batch);
      const std::span<const std::pair<std::size_t, std::size_t>> batch(pairs.data() + start, end - start);
      const auto triplets = build_minibatch(batch, labels, &sim, cfg.sampling, sampling_rng);

      grads.visit([](auto& t) { t.setZero(); });
      TripletBatchLoss<float> res;
      try {
        res = triplet_batch_loss<float>(params, network, train.segments, triplets, cfg.margin, Mode::train,
                                        &dropout_rng, &grads);
      } catch (const DegenerateVector& e) {
        throw DegenerateVector("Siamese training, epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batches + 1) + ": " + e.what() +
                               " (every unit feeding the embedding layer is inactive; try wider fc layers)");
      }
      if (!std::isfinite(res.loss)) {
        throw NumericError("Siamese training diverged: non-finite loss at epoch " + std::to_string(epoch));
      }
      for (std::size_t k = 0; k < triplets.size(); ++k) {
        const auto& h = res.per_triplet[k];
        update_similarity_matrix(sim, labels.label_of_segment(triplets[k].anchor),
                                 labels.label_of_segment(triplets[k].diff), h.d_as, h.d_ad, cfg.m_star);
      }
      sim.commit();
      nesterov_update(params, opt, grads, lr, cfg.momentum);
      loss_sum += res.loss;
      zero += res.zero_loss;
      triplet_count += triplets.size();
      ++batches;
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_batch_loss = loss_sum / batches;
    log.lr = lr;
    try {
      log.dev_ap = dev_average_precision(params, network, dev, EmbeddingSource::head_output);
    } catch (const DegenerateVector& e) {
      throw DegenerateVector("Siamese dev evaluation, epoch " + std::to_string(epoch) + ": " + e.what());
    }
    log.zero_loss_fraction = static_cast<double>(zero) / static_cast<double>(triplet_count);
    double h_sum = 0.0, h_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sim.size(); ++i) {
      const double h = sim.row_entropy(i);
      h_sum += h;
      h_min = std::min(h_min, h);
    }
    log.sampling_entropy_mean = h_sum / static_cast<double>(sim.size());
    log.sampling_entropy_min = h_min;

    if (log.dev_ap > best_ap) {
      best_ap = log.dev_ap;
      result.best.params = params;
      result.best.epoch = epoch;
      result.best.dev_ap = log.dev_ap;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);

    if (epoch % cfg.lr_drop_epochs == 0) {
      const bool improved = best_ap > best_at_window_start;
      if (!improved) {
        if (dropped_last_window) {
          result.stop_reason = "no dev AP improvement after the learning-rate drop";
          break;
        }
        lr /= cfg.lr_decay;
        dropped_last_window = true;
      } else {
        dropped_last_window = false;
      }
      best_at_window_start = best_ap;
    }
  }
  if (result.stop_reason.empty()) result.stop_reason = "reached max_epochs";
  return result;
}

template CosHinge<float> cos_hinge_loss<float>(const Vec<float>&, const Vec<float>&, const Vec<float>&, double);
template CosHinge<double> cos_hinge_loss<double>(const Vec<double>&, const Vec<double>&, const Vec<double>&,
                                                 double);
template TripletBatchLoss<float> triplet_batch_loss<float>(const NetworkParams<float>&, const NetworkConfig&,
                                                           std::span<const Segment>, std::span<const Triplet>,
                                                           double, Mode, RandomSource*, NetworkParams<float>*);
template TripletBatchLoss<double> triplet_batch_loss<double>(const NetworkParams<double>&, const NetworkConfig&,
                                                             std::span<const Segment>, std::span<const Triplet>,
                                                             double, Mode, RandomSource*, NetworkParams<double>*);

}  // namespace awe
