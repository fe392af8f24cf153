#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "awe/checkpoint.hpp"
#include "awe/dataset.hpp"
#include "awe/evaluation.hpp"
#include "awe/network.hpp"
#include "awe/optim.hpp"

namespace awe {

struct ClassifierTrainConfig {
  double lr_init = 0.1;
  double momentum = 0.9;
  int batch_size = 32;
  int plateau_window = 3;
  double plateau_factor = 0.99;
  /// Consecutive plateau epochs that trigger a learning-rate drop.
  int plateau_patience = 3;
  double lr_decay = 10.0;
  /// Epochs after a drop in which dev AP must beat its pre-drop best.
  int stop_patience = 3;
  int max_epochs = 100;
  std::size_t min_count = 3;
  bool normalize = true;
  EmbeddingSource ap_source = EmbeddingSource::head_output;
  std::uint64_t seed = 1;

  void validate() const;
};

/// One line of the training log.
struct EpochLog {
  int epoch = 0;
  double mean_batch_loss = 0.0;
  double dev_ap = 0.0;
  double lr = 0.0;
  bool plateau_flag = false;
  /// Siamese only: fraction of triplets with zero hinge loss and the
  /// mean / minimum entropy (nats) of the sampling distributions.
  std::optional<double> zero_loss_fraction;
  std::optional<double> sampling_entropy_mean;
  std::optional<double> sampling_entropy_min;
};

std::string format_epoch_log(const EpochLog& log);

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
  std::string stop_reason;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Index of the largest value; ties resolve to the earliest.
std::size_t select_best_epoch(std::span<const double> dev_aps);

/// Trains a log-softmax word classifier on `train` (filtered to words with at
/// least min_count examples) and returns the checkpoint of the epoch with the
/// best dev AP. The network's input_dim, output_dim and head are taken from
/// the data. Throws ConfigError for empty or single-class training data.
TrainResult train_classifier(const Corpus& train, const Corpus& dev, NetworkConfig network,
                             const ClassifierTrainConfig& config, const EpochCallback& on_epoch = {});

/// Mean cross-entropy of one batch and its gradient with respect to every
/// parameter (accumulated into grads).
template <class T>
double classifier_batch_loss(const NetworkParams<T>& params, const NetworkConfig& config,
                             std::span<const FrameView> frames, std::span<const int> labels, Mode mode,
                             RandomSource* rng, NetworkParams<T>* grads);

/// Dev AP of a parameter set; dev features must already be normalized.
double dev_average_precision(const NetworkParams<float>& params, const NetworkConfig& config,
                             const Corpus& dev, EmbeddingSource source);

}  // namespace awe
