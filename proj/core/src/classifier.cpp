#include "awe/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "awe/error.hpp"

namespace awe {

void ClassifierTrainConfig::validate() const {
  if (!(lr_init > 0.0)) throw ConfigError("lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (plateau_window < 1 || plateau_patience < 1 || stop_patience < 1) {
    throw ConfigError("plateau window / patience must be >= 1");
  }
  if (!(lr_decay > 1.0)) throw ConfigError("lr_decay must exceed 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
}

std::string format_epoch_log(const EpochLog& log) {
  nlohmann::ordered_json j;
  j["epoch"] = log.epoch;
  j["mean_batch_loss"] = log.mean_batch_loss;
  j["dev_ap"] = log.dev_ap;
  j["lr"] = log.lr;
  j["plateau"] = log.plateau_flag;
  if (log.zero_loss_fraction) j["zero_loss_fraction"] = *log.zero_loss_fraction;
  if (log.sampling_entropy_mean) j["sampling_entropy_mean"] = *log.sampling_entropy_mean;
  if (log.sampling_entropy_min) j["sampling_entropy_min"] = *log.sampling_entropy_min;
  return j.dump() + "\n";
}

std::size_t select_best_epoch(std::span<const double> dev_aps) {
  if (dev_aps.empty()) throw InvalidInput("select_best_epoch: no epochs");
  std::size_t best = 0;
  for (std::size_t k = 1; k < dev_aps.size(); ++k) {
    if (dev_aps[k] > dev_aps[best]) best = k;
  }
  return best;
}

template <class T>
double classifier_batch_loss(const NetworkParams<T>& params, const NetworkConfig& config,
                             std::span<const FrameView> frames, std::span<const int> labels, Mode mode,
                             RandomSource* rng, NetworkParams<T>* grads) {
  if (frames.size() != labels.size() || frames.empty()) {
    throw InvalidInput("classifier_batch_loss: frames/labels mismatch");
  }
  const auto tr = forward_batch(params, config, frames, mode, rng);
  const auto b = static_cast<Eigen::Index>(frames.size());
  const T scale = T(1) / static_cast<T>(b);
  // A linear head's output is treated as logits; the loss applies log-softmax.
  const Mat<T> log_probs = config.head == Head::log_softmax ? tr.output : log_softmax_columns(tr.output);
  Mat<T> d_logits(tr.output.rows(), b);
  double loss = 0.0;
  for (Eigen::Index c = 0; c < b; ++c) {
    auto ce = cross_entropy_loss<T>(log_probs.col(c), labels[c]);
    loss += ce.loss;
    d_logits.col(c) = ce.grad * scale;
  }
  if (grads != nullptr) backward_batch(params, config, tr, d_logits, *grads);
  return loss / static_cast<double>(b);
}

double dev_average_precision(const NetworkParams<float>& params, const NetworkConfig& config,
                             const Corpus& dev, EmbeddingSource source) {
  EmbedOptions options;
  options.source = source;
  const auto emb = compute_embeddings(params, config, dev.segments, options);
  const auto labels = labels_of(dev.segments);
  return same_different_ap(emb, labels).ap;
}

namespace {

void check_dev(const Corpus& dev) {
  if (dev.size() < 2) throw ConfigError("dev corpus needs at least two segments");
  const auto v = dev.vocabulary();
  const bool has_pair = std::any_of(v.begin(), v.end(), [](const auto& kv) { return kv.second >= 2; });
  if (!has_pair) throw ConfigError("dev corpus has no same-word pair, AP is undefined");
}

}  // namespace

TrainResult train_classifier(const Corpus& train_in, const Corpus& dev_in, NetworkConfig network,
                             const ClassifierTrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_in.empty()) throw ConfigError("training corpus is empty");
  Corpus train = filter_min_count(train_in, cfg.min_count);
  const std::vector<std::string> vocabulary = sorted_labels(train);
  if (vocabulary.size() < 2) throw ConfigError("training corpus has a single word type");
  check_dev(dev_in);
  if (dev_in.feature_dim() != train.feature_dim()) throw ConfigError("train/dev feature dims differ");

  Corpus dev = dev_in;
  FeatureNormalizer normalizer;
  if (cfg.normalize) {
    normalizer = FeatureNormalizer::fit(train);
    normalizer.apply(train);
    normalizer.apply(dev);
  }

  network.input_dim = train.feature_dim();
  network.output_dim = static_cast<int>(vocabulary.size());
  network.head = Head::log_softmax;
  network.validate();

  std::map<std::string, int> label_index;
  for (std::size_t k = 0; k < vocabulary.size(); ++k) label_index[vocabulary[k]] = static_cast<int>(k);
  std::vector<int> targets;
  for (const auto& s : train.segments) targets.push_back(label_index.at(s.label));

  const RandomSource root(cfg.seed);
  RandomSource init_rng = root.split("init");
  RandomSource shuffle_rng = root.split("shuffle");
  RandomSource dropout_rng = root.split("dropout");

  NetworkParams<float> params = init_params<float>(network, init_rng);
  OptimizerState<float> opt = make_optimizer_state(params, cfg.lr_init);
  NetworkParams<float> grads = zero_params<float>(network);
  PlateauSchedule schedule(cfg.lr_init, {cfg.plateau_window, cfg.plateau_factor, cfg.plateau_patience,
                                         cfg.lr_decay});

  TrainResult result;
  result.best.config = network;
  result.best.vocabulary = vocabulary;
  result.best.normalizer = normalizer;
  double best_ap = -1.0;
  int drop_epoch = 0;  // 0 while no drop is pending
  double best_at_drop = -1.0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<FrameView> views;
  std::vector<int> batch_targets;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order.begin(), order.end());
    const double lr = schedule.lr();
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      views.clear();
      batch_targets.clear();
      for (std::size_t i = start; i < end; ++i) {
        views.push_back(train.segments[order[i]].view());
        batch_targets.push_back(targets[order[i]]);
      }
      grads.visit([](auto& t) { t.setZero(); });
      const double loss =
          classifier_batch_loss<float>(params, network, views, batch_targets, Mode::train, &dropout_rng, &grads);
      if (!std::isfinite(loss)) {
        throw NumericError("classifier training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batches + 1));
      }
      nesterov_update(params, opt, grads, lr, cfg.momentum);
      loss_sum += loss;
      ++batches;
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_batch_loss = loss_sum / batches;
    log.lr = lr;
    log.dev_ap = dev_average_precision(params, network, dev, cfg.ap_source);
    const auto step = schedule.observe(log.mean_batch_loss);
    log.plateau_flag = step.plateau;
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);

    if (log.dev_ap > best_ap) {
      best_ap = log.dev_ap;
      result.best.params = params;
      result.best.epoch = epoch;
      result.best.dev_ap = log.dev_ap;
    }

    if (drop_epoch > 0 && epoch - drop_epoch >= cfg.stop_patience) {
      if (best_ap <= best_at_drop) {
        result.stop_reason = "no dev AP improvement within " + std::to_string(cfg.stop_patience) +
                             " epochs of the learning-rate drop at epoch " + std::to_string(drop_epoch);
        break;
      }
      drop_epoch = 0;
    }
    if (step.decayed) {
      drop_epoch = epoch;
      best_at_drop = best_ap;
    }
  }
  if (result.stop_reason.empty()) result.stop_reason = "reached max_epochs";
  return result;
}

template double classifier_batch_loss<float>(const NetworkParams<float>&, const NetworkConfig&,
                                             std::span<const FrameView>, std::span<const int>, Mode,
                                             RandomSource*, NetworkParams<float>*);
template double classifier_batch_loss<double>(const NetworkParams<double>&, const NetworkConfig&,
                                              std::span<const FrameView>, std::span<const int>, Mode,
                                              RandomSource*, NetworkParams<double>*);

}  // namespace awe
