#pragma once

#include <cstdint>
#include <vector>

#include "awe/dataset.hpp"
#include "awe/random.hpp"

namespace awe {

/// Parameters of the synthetic word corpus. Each word type is a smooth
/// prototype trajectory in R^D; examples resample it under a random monotone
/// time warp, add a per-example constant offset and per-frame noise.
struct SynthConfig {
  int num_word_types = 30;
  int examples_per_type = 12;
  int dev_word_types = 20;
  double dev_unseen_fraction = 0.5;
  int dev_examples_per_type = 12;
  int feature_dim = 13;
  int prototype_anchors = 8;
  int min_length = 50;
  int max_length = 200;
  double noise_sigma = 0.3;
  double warp_jitter = 0.2;
  double speaker_offset_sigma = 0.5;
  std::uint64_t seed = 7;

  void validate() const;
  /// Number of dev word types that never occur in train.
  int dev_unseen_types() const;
};

struct SynthCorpora {
  Corpus train;
  Corpus dev;
};

SynthCorpora synthesize_corpus(const SynthConfig& config);

/// Positions in [0, 1] at which a T-frame example samples its prototype.
/// Strictly increasing for T >= 2; identity spacing when jitter is 0.
std::vector<double> warp_positions(int frames, double jitter, RandomSource& rng);

/// Label used for synthetic word type `index`.
std::string synth_label(int index);

}  // namespace awe
