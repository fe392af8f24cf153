#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>

#include <nlohmann/json.hpp>

#include "awe/binary_io.hpp"
#include "awe/checkpoint.hpp"
#include "awe/error.hpp"
#include "manifest.hpp"

namespace awe::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const std::string& require(const std::string& value, const char* key) {
  if (value.empty()) throw ConfigError(std::string("missing required key '") + key + "'");
  return value;
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

fs::path log_path(const RunConfig& c) { return c.log.empty() ? with_suffix(c.out, ".log.jsonl") : fs::path(c.log); }

void print_json(const json& j) { std::cout << j.dump() << "\n" << std::flush; }

json summary(const TrainResult& r) {
  return {{"best_epoch", r.best.epoch}, {"best_dev_ap", r.best.dev_ap}, {"epochs_run", r.log.size()},
          {"stop_reason", r.stop_reason}};
}

std::string sanitize(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char ch) { return ch == '\n' || ch == '\t'; }, ' ');
  return s;
}

// Shared tail of both training commands: checkpoint, log, manifest.
int finish_training(const std::string& command, const RunConfig& c, const TrainResult& result,
                    std::vector<fs::path> inputs) {
  save_checkpoint(result.best, c.out);
  std::string log_text;
  for (const auto& e : result.log) log_text += format_epoch_log(e);
  const fs::path log = log_path(c);
  atomic_write_file(log, log_text);
  const json results = summary(result);
  write_manifest(with_suffix(c.out, ".manifest.json"), command, c, inputs, {c.out, log}, results);
  print_json(results);
  return 0;
}

EpochCallback echo_epochs() {
  return [](const EpochLog& e) { std::cout << format_epoch_log(e) << std::flush; };
}

}  // namespace

int run_synth(const RunConfig& c) {
  const fs::path dir = require(c.out, "out");
  const auto data = synthesize_corpus(c.synth);
  fs::create_directories(dir);
  const fs::path train = dir / "train.awe";
  const fs::path dev = dir / "dev.awe";
  write_archive(data.train, train);
  write_archive(data.dev, dev);
  const json results = {{"train_segments", data.train.size()},
                        {"train_word_types", data.train.vocabulary().size()},
                        {"dev_segments", data.dev.size()},
                        {"dev_word_types", data.dev.vocabulary().size()}};
  write_manifest(dir / "manifest.json", "synth", c, {}, {train, dev}, results);
  print_json(results);
  return 0;
}

int run_train_classifier(const RunConfig& c) {
  const fs::path train_path = require(c.train, "train");
  const fs::path dev_path = require(c.dev, "dev");
  require(c.out, "out");
  const Corpus train = read_archive(train_path, Split::train);
  const Corpus dev = read_archive(dev_path, Split::dev);
  const auto result = train_classifier(train, dev, c.network, c.classifier, echo_epochs());
  return finish_training("train-classifier", c, result, {train_path, dev_path});
}

int run_train_siamese(const RunConfig& c) {
  const fs::path train_path = require(c.train, "train");
  const fs::path dev_path = require(c.dev, "dev");
  require(c.out, "out");
  const Corpus train = read_archive(train_path, Split::train);
  const Corpus dev = read_archive(dev_path, Split::dev);
  std::vector<fs::path> inputs{train_path, dev_path};
  std::optional<Checkpoint> warm;
  if (!c.warm_start.empty()) {
    warm = load_checkpoint(c.warm_start);
    inputs.emplace_back(c.warm_start);
  }
  const auto result = train_siamese(train, dev, warm, c.siamese, c.network, echo_epochs());
  return finish_training("train-siamese", c, result, inputs);
}

int run_embed(const RunConfig& c) {
  const fs::path ckpt_path = require(c.checkpoint, "checkpoint");
  const fs::path data_path = require(c.data, "data");
  const fs::path out = require(c.out, "out");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Corpus data = read_archive(data_path, Split::dev);
  const auto emb = compute_embeddings(ckpt, data.segments, c.embed);
  atomic_write_file(out, format_embeddings(labels_of(data.segments), emb));
  const json results = {{"segments", emb.size()}, {"dim", emb.empty() ? 0 : emb.front().size()}};
  write_manifest(with_suffix(out, ".manifest.json"), "embed", c, {ckpt_path, data_path}, {out}, results);
  print_json(results);
  return 0;
}

int run_eval_ap(const RunConfig& c) {
  std::vector<fs::path> inputs;
  LabeledEmbeddings set;
  if (!c.embeddings.empty()) {
    if (!c.checkpoint.empty()) throw ConfigError("give either 'embeddings' or 'checkpoint' + 'data', not both");
    const auto bytes = read_file(c.embeddings);
    set = parse_embeddings(std::string(bytes.begin(), bytes.end()));
    inputs.emplace_back(c.embeddings);
  } else {
    const fs::path ckpt_path = require(c.checkpoint, "checkpoint (or embeddings)");
    const fs::path data_path = require(c.data, "data");
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Corpus data = read_archive(data_path, Split::dev);
    set.vectors = compute_embeddings(ckpt, data.segments, c.embed);
    set.labels = labels_of(data.segments);
    inputs = {ckpt_path, data_path};
  }

  const ApResult ap = same_different_ap(set.vectors, set.labels);
  std::map<std::string, std::size_t> train_counts;
  for (const auto& label : set.labels) train_counts[label] = 0;
  if (!c.train.empty()) {
    for (const auto& [label, n] : read_archive(c.train).vocabulary()) {
      if (train_counts.count(label) != 0) train_counts[label] = n;
    }
    inputs.emplace_back(c.train);
  }
  const auto buckets = ap_by_frequency(set.vectors, set.labels, train_counts, c.thresholds);
  std::string report = format_ap_result(ap) + format_frequency_report(buckets);
  if (!c.train.empty()) {
    for (const bool seen : {true, false}) {
      const auto sub = ap_on_subset(set.vectors, set.labels,
                                    [&](std::size_t i) { return (train_counts.at(set.labels[i]) > 0) == seen; });
      json j = {{"subset", seen ? "seen" : "unseen"}};
      j["ap"] = sub ? json(sub->ap) : json(nullptr);
      report += j.dump() + "\n";
    }
  }
  std::cout << report << std::flush;

  std::vector<fs::path> outputs;
  if (!c.out.empty()) {
    atomic_write_file(c.out, report);
    outputs.emplace_back(c.out);
  }
  if (!c.pr_curve.empty()) {
    atomic_write_file(c.pr_curve, format_pr_curve(ap));
    outputs.emplace_back(c.pr_curve);
  }
  if (!c.out.empty()) {
    write_manifest(with_suffix(c.out, ".manifest.json"), "eval-ap", c, inputs, outputs, {{"ap", ap.ap}});
  }
  return 0;
}

int run_grad_check(const RunConfig& c) {
  std::vector<GradientCase> cases;
  if (c.gradcheck_full) {
    for (CellKind cell : {CellKind::lstm, CellKind::gru}) {
      for (int s = 1; s <= 3; ++s) {
        for (int f = 1; f <= 3; ++f) {
          for (Head head : {Head::log_softmax, Head::linear}) {
            for (LossKind loss : {LossKind::cross_entropy, LossKind::cos_hinge}) {
              cases.push_back({cell, s, f, head, loss, 5, 8, c.seed});
            }
          }
        }
      }
    }
  } else {
    cases.push_back({c.network.cell, c.network.stacked_layers, c.network.fc_layers, c.network.head, c.gradcheck_loss,
                     5, 8, c.seed});
  }
  double worst = 0.0;
  std::string worst_case;
  for (const auto& gc : cases) {
    const auto r = check_network_gradient(gc, c.gradcheck_step);
    std::cout << describe(gc) << "\t" << format_double(r.max_tensor_error) << "\t" << r.worst_tensor << "\t"
              << format_double(r.coordinates.max_relative_error) << "\n";
    if (!(r.max_tensor_error <= worst)) {
      worst = r.max_tensor_error;
      worst_case = describe(gc) + " " + r.worst_tensor;
    }
  }
  const bool pass = worst <= c.gradcheck_tolerance;
  print_json({{"cases", cases.size()},
              {"max_relative_error", worst},
              {"worst", worst_case},
              {"tolerance", c.gradcheck_tolerance},
              {"pass", pass}});
  if (!pass) {
    throw NumericError("gradient check failed: max relative error " + format_double(worst) + " at " + worst_case);
  }
  return 0;
}

int run_inspect(const std::string& path) {
  const auto bytes = read_file(path);
  const std::string magic(bytes.begin(), bytes.begin() + std::min<std::size_t>(4, bytes.size()));
  json j;
  j["path"] = path;
  j["bytes"] = bytes.size();
  if (magic == "AWE1") {
    const Corpus corpus = decode_archive(bytes);
    j["kind"] = "archive";
    j["segments"] = corpus.size();
    j["word_types"] = corpus.vocabulary().size();
    j["feature_dim"] = corpus.feature_dim();
    if (!corpus.empty()) {
      int lo = corpus.segments.front().num_frames, hi = lo;
      double total = 0.0;
      for (const auto& s : corpus.segments) {
        lo = std::min(lo, s.num_frames);
        hi = std::max(hi, s.num_frames);
        total += s.num_frames;
      }
      j["frames_min"] = lo;
      j["frames_max"] = hi;
      j["frames_mean"] = total / static_cast<double>(corpus.size());
    }
  } else if (magic == "AWEC") {
    const Checkpoint ck = decode_checkpoint(bytes);
    j["kind"] = "checkpoint";
    j["cell"] = to_string(ck.config.cell);
    j["stacked_layers"] = ck.config.stacked_layers;
    j["fc_layers"] = ck.config.fc_layers;
    j["input_dim"] = ck.config.input_dim;
    j["hidden_dim"] = ck.config.hidden_dim;
    j["fc_dim"] = ck.config.fc_dim;
    j["output_dim"] = ck.config.output_dim;
    j["head"] = to_string(ck.config.head);
    j["parameters"] = ck.params.parameter_count();
    j["epoch"] = ck.epoch;
    j["dev_ap"] = ck.dev_ap;
    j["vocabulary"] = ck.vocabulary.size();
    j["normalized"] = !ck.normalizer.empty();
  } else {
    throw DataError(path + ": not an archive or checkpoint (unknown magic)");
  }
  j["fnv1a64"] = file_checksum(path);
  print_json(j);
  return 0;
}

int run_sweep(const RunConfig& c) {
  const fs::path train_path = require(c.train, "train");
  const fs::path dev_path = require(c.dev, "dev");
  const fs::path out = require(c.out, "out");
  const Corpus train = read_archive(train_path, Split::train);
  const Corpus dev = read_archive(dev_path, Split::dev);

  const auto or_default = [](const std::vector<int>& v, int fallback) {
    return v.empty() ? std::vector<int>{fallback} : v;
  };
  std::vector<CellKind> cells;
  for (const auto& name : c.sweep_cell) cells.push_back(parse_cell_kind(name));
  if (cells.empty()) cells.push_back(c.network.cell);
  const auto stacked = or_default(c.sweep_stacked_layers, c.network.stacked_layers);
  const auto fcs = or_default(c.sweep_fc_layers, c.network.fc_layers);

  std::string table = "cell\tS\tF\tembed_dim\tclassifier_dev_ap\tsiamese_dev_ap\tstatus\n";
  std::size_t failed = 0, rows = 0;
  const auto row = [&](CellKind cell, int s, int f, const std::string& dim, const std::string& cls_ap,
                       const std::string& sia_ap, const std::string& status) {
    const std::string line = to_string(cell) + "\t" + std::to_string(s) + "\t" + std::to_string(f) + "\t" + dim +
                             "\t" + cls_ap + "\t" + sia_ap + "\t" + status + "\n";
    table += line;
    std::cout << line << std::flush;
    ++rows;
    if (status != "ok") ++failed;
  };
  for (CellKind cell : cells) {
    for (int s : stacked) {
      for (int f : fcs) {
        NetworkConfig net = c.network;
        net.cell = cell;
        net.stacked_layers = s;
        net.fc_layers = f;
        std::optional<TrainResult> cls;
        try {
          cls = train_classifier(train, dev, net, c.classifier);
        } catch (const std::exception& e) {
          const std::size_t n = std::max<std::size_t>(1, c.sweep_embed_dim.size());
          for (std::size_t k = 0; k < n; ++k) {
            const std::string dim = c.sweep_embed_dim.empty() ? "-" : std::to_string(c.sweep_embed_dim[k]);
            row(cell, s, f, dim, "-", "-", "failed: " + sanitize(e.what()));
          }
          continue;
        }
        const std::string cls_ap = format_double(cls->best.dev_ap);
        if (c.sweep_embed_dim.empty()) {
          row(cell, s, f, "-", cls_ap, "-", "ok");
          continue;
        }
        for (int dim : c.sweep_embed_dim) {
          SiameseTrainConfig sc = c.siamese;
          sc.embed_dim = dim;
          try {
            const auto sia = train_siamese(train, dev, cls->best, sc, net);
            row(cell, s, f, std::to_string(dim), cls_ap, format_double(sia.best.dev_ap), "ok");
          } catch (const std::exception& e) {
            row(cell, s, f, std::to_string(dim), cls_ap, "-", "failed: " + sanitize(e.what()));
          }
        }
      }
    }
  }
  atomic_write_file(out, table);
  write_manifest(with_suffix(out, ".manifest.json"), "sweep", c, {train_path, dev_path}, {out},
                 {{"rows", rows}, {"failed", failed}});
  return 0;
}

}  // namespace awe::cli
