#include "manifest.hpp"

#include <cstdio>

#include "awe/binary_io.hpp"

namespace awe::cli {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string file_checksum(const std::filesystem::path& path) { return hex64(fnv1a64(read_file(path))); }

void write_manifest(const std::filesystem::path& path, const std::string& command, const RunConfig& config,
                    const std::vector<std::filesystem::path>& inputs,
                    const std::vector<std::filesystem::path>& outputs, const nlohmann::ordered_json& results) {
  const std::string rendered = render_config(config);
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = AWE_VERSION;
  j["seed"] = config.seed;
  j["config_hash"] = hex64(fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(rendered.data()), rendered.size())));
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& k : config_schema()) cfg[k.name] = k.get(config);
  j["config"] = cfg;
  for (const auto& [key, files] : {std::pair{"inputs", &inputs}, std::pair{"outputs", &outputs}}) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& f : *files) arr.push_back({{"path", f.string()}, {"fnv1a64", file_checksum(f)}});
    j[key] = arr;
  }
  j["results"] = results;
  atomic_write_file(path, j.dump(2) + "\n");
}

}  // namespace awe::cli
