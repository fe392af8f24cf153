#include "awe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "awe/error.hpp"

namespace awe {

namespace {

constexpr int kWarpPieces = 4;

struct Prototype {
  // anchors x dim, row-major
  int anchors = 0;
  int dim = 0;
  std::vector<double> values;

  double at(double pos, int d) const {
    const double x = pos * (anchors - 1);
    int k = static_cast<int>(std::floor(x));
    if (k >= anchors - 1) k = anchors - 2;
    if (k < 0) k = 0;
    const double w = x - k;
    return (1.0 - w) * values[static_cast<std::size_t>(k) * dim + d] +
           w * values[static_cast<std::size_t>(k + 1) * dim + d];
  }
};

Prototype make_prototype(const SynthConfig& cfg, RandomSource rng) {
  Prototype p{cfg.prototype_anchors, cfg.feature_dim, {}};
  p.values.resize(static_cast<std::size_t>(p.anchors) * p.dim);
  for (auto& v : p.values) v = rng.normal();
  return p;
}

Segment make_example(const SynthConfig& cfg, const Prototype& proto, const std::string& label,
                     RandomSource& rng) {
  Segment s;
  s.label = label;
  s.dim = cfg.feature_dim;
  s.num_frames = cfg.min_length + static_cast<int>(rng.index(
                                      static_cast<std::size_t>(cfg.max_length - cfg.min_length + 1)));
  const auto pos = warp_positions(s.num_frames, cfg.warp_jitter, rng);
  std::vector<double> offset(s.dim);
  for (auto& o : offset) o = rng.normal(0.0, cfg.speaker_offset_sigma);
  s.frames.resize(static_cast<std::size_t>(s.num_frames) * s.dim);
  for (int t = 0; t < s.num_frames; ++t) {
    for (int d = 0; d < s.dim; ++d) {
      const double noise = cfg.noise_sigma > 0.0 ? rng.normal(0.0, cfg.noise_sigma) : 0.0;
      s.frames[static_cast<std::size_t>(t) * s.dim + d] =
          static_cast<float>(proto.at(pos[t], d) + offset[d] + noise);
    }
  }
  return s;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_word_types < 2) throw ConfigError("num_word_types must be >= 2");
  if (examples_per_type < 1 || dev_examples_per_type < 1) throw ConfigError("examples per type must be >= 1");
  if (dev_word_types < 0) throw ConfigError("dev_word_types must be >= 0");
  if (!(dev_unseen_fraction >= 0.0 && dev_unseen_fraction <= 1.0)) {
    throw ConfigError("dev_unseen_fraction must lie in [0, 1]");
  }
  if (dev_word_types - dev_unseen_types() > num_word_types) {
    throw ConfigError("more seen dev word types than train word types");
  }
  if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (prototype_anchors < 2) throw ConfigError("prototype_anchors must be >= 2");
  if (min_length < 1 || max_length < min_length) throw ConfigError("length range must satisfy 1 <= min <= max");
  if (!(noise_sigma >= 0.0) || !(speaker_offset_sigma >= 0.0)) throw ConfigError("noise scales must be >= 0");
  if (!(warp_jitter >= 0.0 && warp_jitter < 1.0)) throw ConfigError("warp_jitter must lie in [0, 1)");
}

int SynthConfig::dev_unseen_types() const {
  return static_cast<int>(std::lround(dev_word_types * dev_unseen_fraction));
}

std::string synth_label(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "w%03d", index);
  return buf;
}

std::vector<double> warp_positions(int frames, double jitter, RandomSource& rng) {
  if (frames < 1) throw InvalidInput("warp_positions: frames must be >= 1");
  // Piecewise-linear warp with kWarpPieces pieces of random positive slope.
  double breaks[kWarpPieces + 1];
  breaks[0] = 0.0;
  for (int k = 0; k < kWarpPieces; ++k) breaks[k + 1] = breaks[k] + 1.0 + jitter * rng.uniform(-1.0, 1.0);
  for (double& b : breaks) b /= breaks[kWarpPieces];

  std::vector<double> pos(frames, 0.0);
  if (frames == 1) return pos;
  for (int t = 0; t < frames; ++t) {
    const double s = static_cast<double>(t) / (frames - 1);
    int k = std::min(static_cast<int>(s * kWarpPieces), kWarpPieces - 1);
    const double local = s * kWarpPieces - k;
    pos[t] = breaks[k] + local * (breaks[k + 1] - breaks[k]);
  }
  pos.back() = 1.0;
  return pos;
}

SynthCorpora synthesize_corpus(const SynthConfig& cfg) {
  cfg.validate();
  const RandomSource root(cfg.seed);
  const int unseen = cfg.dev_unseen_types();
  const int seen = cfg.dev_word_types - unseen;
  const int total_types = cfg.num_word_types + unseen;

  std::vector<Prototype> protos;
  protos.reserve(total_types);
  for (int w = 0; w < total_types; ++w) protos.push_back(make_prototype(cfg, root.split("prototype", w)));

  SynthCorpora out;
  out.train.split = Split::train;
  out.dev.split = Split::dev;
  for (int w = 0; w < cfg.num_word_types; ++w) {
    RandomSource rng = root.split("train-examples", w);
    for (int e = 0; e < cfg.examples_per_type; ++e) {
      out.train.segments.push_back(make_example(cfg, protos[w], synth_label(w), rng));
    }
  }
  // Dev: the first `seen` train types plus `unseen` types never used in train.
  for (int k = 0; k < cfg.dev_word_types; ++k) {
    const int w = k < seen ? k : cfg.num_word_types + (k - seen);
    RandomSource rng = root.split("dev-examples", w);
    for (int e = 0; e < cfg.dev_examples_per_type; ++e) {
      out.dev.segments.push_back(make_example(cfg, protos[w], synth_label(w), rng));
    }
  }
  return out;
}

}  // namespace awe
