#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "awe/binary_io.hpp"
#include "awe/error.hpp"
#include "commands.hpp"
#include "run_config.hpp"

namespace {

using awe::cli::RunConfig;

enum ExitCode { ok = 0, internal = 1, config = 2, data = 3, numeric = 4 };

int report_error(const char* kind, int code, const std::string& message) {
  std::string flat = message;
  for (char& ch : flat) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  std::cerr << "awe: error kind=" << kind << " exit=" << code << " message=" << flat << "\n";
  return code;
}

struct Subcommand {
  CLI::App* app = nullptr;
  std::string config_file;
  std::map<std::string, std::string> values;
};

void add_config_options(Subcommand& sub) {
  sub.app->add_option("--config", sub.config_file, "key = value config file (flags override it)");
  for (const auto& key : awe::cli::config_schema()) {
    std::string names = "--" + key.name;
    std::string kebab = key.name;
    std::replace(kebab.begin(), kebab.end(), '_', '-');
    if (kebab != key.name) names += ",--" + kebab;
    sub.app->add_option(names, sub.values[key.name], key.help)->group(key.group);
  }
}

RunConfig resolve(const Subcommand& sub) {
  RunConfig config;
  if (!sub.config_file.empty()) {
    const auto bytes = awe::read_file(sub.config_file);
    for (const auto& [key, value] : awe::cli::parse_config_text(std::string(bytes.begin(), bytes.end()), sub.config_file)) {
      awe::cli::apply_setting(config, key, value);
    }
  }
  for (const auto& [key, value] : sub.values) {
    if (sub.app->get_option("--" + key)->count() > 0) awe::cli::apply_setting(config, key, value);
  }
  awe::cli::propagate_seed(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acoustic word embedding toolkit"};
  app.set_version_flag("--version", AWE_VERSION);
  app.require_subcommand(1);

  const std::map<std::string, std::string> descriptions{
      {"synth", "write synthetic train/dev archives to <out>/"},
      {"train-classifier", "train a word classifier; writes checkpoint, log and manifest"},
      {"train-siamese", "train with the cos-hinge loss, optionally warm-started"},
      {"embed", "write tab-separated embeddings of an archive"},
      {"eval-ap", "same-different average precision and frequency buckets"},
      {"grad-check", "finite-difference gradient check of small random networks"},
      {"sweep", "train a grid of configurations and tabulate dev AP"},
  };
  std::map<std::string, Subcommand> subs;
  for (const auto& [name, help] : descriptions) {
    Subcommand& sub = subs[name];
    sub.app = app.add_subcommand(name, help);
    add_config_options(sub);
  }
  std::string inspect_path;
  CLI::App* inspect = app.add_subcommand("inspect", "print archive or checkpoint metadata");
  inspect->add_option("path", inspect_path, "archive or checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("config", config, e.what());
  }

  try {
    if (inspect->parsed()) return awe::cli::run_inspect(inspect_path);
    for (const auto& [name, sub] : subs) {
      if (!sub.app->parsed()) continue;
      const RunConfig config = resolve(sub);
      if (name == "synth") return awe::cli::run_synth(config);
      if (name == "train-classifier") return awe::cli::run_train_classifier(config);
      if (name == "train-siamese") return awe::cli::run_train_siamese(config);
      if (name == "embed") return awe::cli::run_embed(config);
      if (name == "eval-ap") return awe::cli::run_eval_ap(config);
      if (name == "grad-check") return awe::cli::run_grad_check(config);
      if (name == "sweep") return awe::cli::run_sweep(config);
    }
  } catch (const awe::ConfigError& e) {
    return report_error("config", config, e.what());
  } catch (const awe::NumericError& e) {
    return report_error("numeric", numeric, e.what());
  } catch (const awe::Error& e) {
    return report_error("data", data, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("data", data, e.what());
  } catch (const std::exception& e) {
    return report_error("internal", internal, e.what());
  }
  return internal;
}
