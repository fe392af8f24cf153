#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "run_config.hpp"

namespace awe::cli {

/// 16 hex digits of the FNV-1a checksum of a file's bytes.
std::string file_checksum(const std::filesystem::path& path);

/// Records what is needed to reproduce a run: the effective config and its
/// hash, the seed, the toolkit version, and checksums of inputs and outputs.
void write_manifest(const std::filesystem::path& path, const std::string& command, const RunConfig& config,
                    const std::vector<std::filesystem::path>& inputs,
                    const std::vector<std::filesystem::path>& outputs, const nlohmann::ordered_json& results);

}  // namespace awe::cli
