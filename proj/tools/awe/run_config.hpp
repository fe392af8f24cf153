#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "awe/classifier.hpp"
#include "awe/evaluation.hpp"
#include "awe/gradcheck.hpp"
#include "awe/network.hpp"
#include "awe/siamese.hpp"
#include "awe/synth.hpp"

namespace awe::cli {

/// Everything a command can be configured with. Defaults < config file < flags.
struct RunConfig {
  NetworkConfig network;
  ClassifierTrainConfig classifier;
  SiameseTrainConfig siamese;
  SynthConfig synth;
  EmbedOptions embed;
  /// Root seed; copied into the synth, classifier and Siamese streams.
  std::uint64_t seed = 7;

  std::string train;
  std::string dev;
  std::string data;
  std::string checkpoint;
  std::string warm_start;
  std::string embeddings;
  std::string out;
  std::string log;
  std::string pr_curve;

  std::vector<std::size_t> thresholds = default_frequency_thresholds();

  LossKind gradcheck_loss = LossKind::cross_entropy;
  bool gradcheck_full = true;
  double gradcheck_step = 1e-3;
  double gradcheck_tolerance = 1e-4;

  std::vector<int> sweep_stacked_layers;
  std::vector<int> sweep_fc_layers;
  std::vector<std::string> sweep_cell;
  std::vector<int> sweep_embed_dim;
};

struct ConfigKey {
  std::string name;
  std::string group;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

/// The full key schema, in a fixed order.
const std::vector<ConfigKey>& config_schema();
const ConfigKey* find_key(const std::string& name);

/// Sets one key; unknown keys and unparsable values are ConfigErrors.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses `key = value` lines ('#' starts a comment). Returns the settings in
/// file order; unknown or repeated keys are ConfigErrors naming the line.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& origin);

/// Canonical `key = value` rendering of every key, sorted by name.
std::string render_config(const RunConfig& config);

/// Copies `seed` into the per-module seeds.
void propagate_seed(RunConfig& config);

}  // namespace awe::cli
