#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "awe/error.hpp"

namespace awe::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& value, const char* expected) {
  throw ConfigError("value '" + value + "' is not " + expected);
}

template <class T>
T parse_number(const std::string& v, const char* expected) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) bad_value(v, expected);
  return out;
}

template <class T>
T parse_value(const std::string& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad_value(v, "a boolean (true/false)");
  } else if constexpr (std::is_integral_v<T>) {
    return parse_number<T>(v, std::is_signed_v<T> ? "an integer" : "a non-negative integer");
  } else {
    return parse_number<T>(v, "a number");
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty item in list '" + v + "'");
    out.push_back(item);
  }
  return out;
}

std::string render(int v) { return std::to_string(v); }
std::string render(std::size_t v) { return std::to_string(v); }
std::string render(double v) { return format_double(v); }
std::string render(bool v) { return v ? "true" : "false"; }
std::string render(const std::string& v) { return v; }

template <class T>
std::string render(const std::vector<T>& items) {
  std::string out;
  for (const auto& item : items) out += (out.empty() ? "" : ",") + render(item);
  return out;
}

// Binds a key to a field through an accessor usable on const and non-const configs.
template <class Access>
ConfigKey field(std::string name, std::string group, std::string help, Access access) {
  using T = std::remove_cvref_t<decltype(access(std::declval<RunConfig&>()))>;
  ConfigKey key{std::move(name), std::move(group), std::move(help), {}, {}};
  if constexpr (std::is_same_v<T, std::vector<int>> || std::is_same_v<T, std::vector<std::size_t>> ||
                std::is_same_v<T, std::vector<std::string>>) {
    using Item = typename T::value_type;
    key.set = [access](RunConfig& c, const std::string& v) {
      T items;
      for (const auto& s : split_list(v)) items.push_back(parse_value<Item>(s));
      access(c) = std::move(items);
    };
  } else {
    key.set = [access](RunConfig& c, const std::string& v) { access(c) = parse_value<T>(v); };
  }
  key.get = [access](const RunConfig& c) { return render(access(c)); };
  return key;
}

template <class Enum, class Access>
ConfigKey choice(std::string name, std::string group, std::string help, Access access,
                 Enum (*parse)(const std::string&), std::string (*show)(Enum)) {
  return {std::move(name), std::move(group), std::move(help),
          [access, parse](RunConfig& c, const std::string& v) { access(c) = parse(v); },
          [access, show](const RunConfig& c) { return show(access(c)); }};
}

LossKind parse_loss(const std::string& s) {
  if (s == "xent") return LossKind::cross_entropy;
  if (s == "cos_hinge") return LossKind::cos_hinge;
  throw ConfigError("unknown loss '" + s + "' (expected xent or cos_hinge)");
}

std::string show_loss(LossKind k) { return k == LossKind::cross_entropy ? "xent" : "cos_hinge"; }

std::vector<ConfigKey> build_schema() {
#define AT(expr) [](auto& c) -> auto& { return expr; }
  std::vector<ConfigKey> s;
  const std::string net = "Network";
  s.push_back(choice("cell", net, "recurrent cell: lstm | gru", AT(c.network.cell), parse_cell_kind,
                     static_cast<std::string (*)(CellKind)>(to_string)));
  s.push_back(field("stacked_layers", net, "recurrent layers (S)", AT(c.network.stacked_layers)));
  s.push_back(field("fc_layers", net, "fully connected layers (F)", AT(c.network.fc_layers)));
  s.push_back(field("hidden_dim", net, "recurrent hidden size", AT(c.network.hidden_dim)));
  s.push_back(field("fc_dim", net, "width of hidden fc layers", AT(c.network.fc_dim)));
  s.push_back(field("dropout_recurrent", net, "dropout between recurrent layers", AT(c.network.dropout_recurrent)));
  s.push_back(field("dropout_fc", net, "dropout between fc layers", AT(c.network.dropout_fc)));
  s.push_back(choice("head", net, "output head for grad-check: log_softmax | linear", AT(c.network.head),
                     parse_head, static_cast<std::string (*)(Head)>(to_string)));

  const std::string cls = "Classifier training";
  s.push_back(field("classifier.lr", cls, "initial learning rate", AT(c.classifier.lr_init)));
  s.push_back(field("classifier.momentum", cls, "Nesterov momentum", AT(c.classifier.momentum)));
  s.push_back(field("classifier.batch_size", cls, "segments per minibatch", AT(c.classifier.batch_size)));
  s.push_back(field("classifier.plateau_window", cls, "epochs averaged by the plateau rule",
                    AT(c.classifier.plateau_window)));
  s.push_back(field("classifier.plateau_factor", cls, "plateau factor", AT(c.classifier.plateau_factor)));
  s.push_back(field("classifier.plateau_patience", cls, "consecutive plateaus before a drop",
                    AT(c.classifier.plateau_patience)));
  s.push_back(field("classifier.lr_decay", cls, "learning-rate divisor on a drop", AT(c.classifier.lr_decay)));
  s.push_back(field("classifier.stop_patience", cls, "epochs after a drop to beat the previous best",
                    AT(c.classifier.stop_patience)));
  s.push_back(field("classifier.max_epochs", cls, "epoch cap", AT(c.classifier.max_epochs)));
  s.push_back(field("classifier.min_count", cls, "minimum training occurrences per word",
                    AT(c.classifier.min_count)));
  s.push_back(field("classifier.normalize", cls, "standardize features with train statistics",
                    AT(c.classifier.normalize)));
  s.push_back(choice("classifier.ap_source", cls, "dev AP embedding: head_output | logits",
                     AT(c.classifier.ap_source), parse_embedding_source,
                     static_cast<std::string (*)(EmbeddingSource)>(to_string)));

  const std::string sia = "Siamese training";
  s.push_back(field("siamese.margin", sia, "cos-hinge margin m", AT(c.siamese.margin)));
  s.push_back(field("siamese.m_star", sia, "similarity-update margin m*", AT(c.siamese.m_star)));
  s.push_back(field("siamese.pairs_per_batch", sia, "same-word pairs per minibatch (B)",
                    AT(c.siamese.pairs_per_batch)));
  s.push_back(field("siamese.embed_dim", sia, "embedding dimension", AT(c.siamese.embed_dim)));
  s.push_back(field("siamese.lr", sia, "initial learning rate", AT(c.siamese.lr_init)));
  s.push_back(field("siamese.momentum", sia, "Nesterov momentum", AT(c.siamese.momentum)));
  s.push_back(field("siamese.lr_drop_epochs", sia, "epochs per learning-rate window", AT(c.siamese.lr_drop_epochs)));
  s.push_back(field("siamese.lr_decay", sia, "learning-rate divisor on a drop", AT(c.siamese.lr_decay)));
  s.push_back(field("siamese.max_epochs", sia, "epoch cap", AT(c.siamese.max_epochs)));
  s.push_back(choice("siamese.sampling", sia, "negative sampling: uniform | nonuniform", AT(c.siamese.sampling),
                     parse_sampling_mode, static_cast<std::string (*)(SamplingMode)>(to_string)));
  s.push_back(field("siamese.normalize", sia, "standardize features (cold start only)", AT(c.siamese.normalize)));

  const std::string syn = "Synthetic data";
  s.push_back(field("synth.word_types", syn, "train word types", AT(c.synth.num_word_types)));
  s.push_back(field("synth.examples_per_type", syn, "train examples per type", AT(c.synth.examples_per_type)));
  s.push_back(field("synth.dev_word_types", syn, "dev word types", AT(c.synth.dev_word_types)));
  s.push_back(field("synth.dev_unseen_fraction", syn, "fraction of dev types absent from train",
                    AT(c.synth.dev_unseen_fraction)));
  s.push_back(field("synth.dev_examples_per_type", syn, "dev examples per type", AT(c.synth.dev_examples_per_type)));
  s.push_back(field("synth.feature_dim", syn, "frame dimension", AT(c.synth.feature_dim)));
  s.push_back(field("synth.prototype_anchors", syn, "anchor frames per prototype", AT(c.synth.prototype_anchors)));
  s.push_back(field("synth.min_length", syn, "minimum frames per segment", AT(c.synth.min_length)));
  s.push_back(field("synth.max_length", syn, "maximum frames per segment", AT(c.synth.max_length)));
  s.push_back(field("synth.noise_sigma", syn, "per-frame noise", AT(c.synth.noise_sigma)));
  s.push_back(field("synth.warp_jitter", syn, "time-warp jitter", AT(c.synth.warp_jitter)));
  s.push_back(field("synth.speaker_offset_sigma", syn, "per-example offset", AT(c.synth.speaker_offset_sigma)));

  const std::string io = "Inputs and outputs";
  s.push_back(field("seed", io, "root seed", AT(c.seed)));
  s.push_back(field("train", io, "training archive", AT(c.train)));
  s.push_back(field("dev", io, "dev archive", AT(c.dev)));
  s.push_back(field("data", io, "archive to embed or evaluate", AT(c.data)));
  s.push_back(field("checkpoint", io, "model checkpoint to read", AT(c.checkpoint)));
  s.push_back(field("warm_start", io, "classifier checkpoint for Siamese warm start", AT(c.warm_start)));
  s.push_back(field("embeddings", io, "embeddings TSV to evaluate", AT(c.embeddings)));
  s.push_back(field("out", io, "primary output path", AT(c.out)));
  s.push_back(field("log", io, "epoch log path (default <out>.log.jsonl)", AT(c.log)));
  s.push_back(field("pr_curve", io, "optional PR-curve TSV output", AT(c.pr_curve)));

  const std::string ev = "Evaluation";
  s.push_back(choice("embed.source", ev, "classifier embedding: head_output | logits", AT(c.embed.source),
                     parse_embedding_source, static_cast<std::string (*)(EmbeddingSource)>(to_string)));
  s.push_back(field("embed.batch_size", ev, "segments per forward pass", AT(c.embed.batch_size)));
  s.push_back(field("eval.thresholds", ev, "frequency-bucket thresholds", AT(c.thresholds)));

  const std::string gc = "Gradient check";
  s.push_back(choice("gradcheck.loss", gc, "single-case loss: xent | cos_hinge", AT(c.gradcheck_loss), parse_loss,
                     show_loss));
  s.push_back(field("gradcheck.full", gc, "run every cell/S/F/head/loss case", AT(c.gradcheck_full)));
  s.push_back(field("gradcheck.step", gc, "central-difference step", AT(c.gradcheck_step)));
  s.push_back(field("gradcheck.tolerance", gc, "max per-tensor relative error", AT(c.gradcheck_tolerance)));

  const std::string sw = "Sweep";
  s.push_back(field("sweep.stacked_layers", sw, "list of S values", AT(c.sweep_stacked_layers)));
  s.push_back(field("sweep.fc_layers", sw, "list of F values", AT(c.sweep_fc_layers)));
  s.push_back(field("sweep.cell", sw, "list of cells", AT(c.sweep_cell)));
  s.push_back(field("sweep.embed_dim", sw, "list of Siamese embedding dims (empty: classifier only)",
                    AT(c.sweep_embed_dim)));
#undef AT
  return s;
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = build_schema();
  return schema;
}

const ConfigKey* find_key(const std::string& name) {
  const auto& s = config_schema();
  const auto it = std::find_if(s.begin(), s.end(), [&](const ConfigKey& k) { return k.name == name; });
  return it == s.end() ? nullptr : &*it;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const ConfigKey* k = find_key(key);
  if (k == nullptr) throw ConfigError("unknown config key '" + key + "'");
  try {
    k->set(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                   const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (find_key(key) == nullptr) throw ConfigError(where + ": unknown config key '" + key + "'");
    const bool repeated = std::any_of(out.begin(), out.end(), [&](const auto& kv) { return kv.first == key; });
    if (repeated) throw ConfigError(where + ": key '" + key + "' set twice");
    out.emplace_back(key, value);
  }
  return out;
}

std::string render_config(const RunConfig& config) {
  std::map<std::string, std::string> sorted;
  for (const auto& k : config_schema()) sorted[k.name] = k.get(config);
  std::string out;
  for (const auto& [name, value] : sorted) out += name + " = " + value + "\n";
  return out;
}

void propagate_seed(RunConfig& config) {
  config.synth.seed = config.seed;
  config.classifier.seed = config.seed;
  config.siamese.seed = config.seed;
}

}  // namespace awe::cli
