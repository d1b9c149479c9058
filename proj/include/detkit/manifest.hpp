#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

namespace detkit {

inline constexpr const char* kToolVersion = "0.1.0";

// One manifest per artifact directory: enough to rerun the command and
// verify the inputs. Reruns with equal manifests (timestamps aside) must
// produce byte-identical outputs.
struct RunManifest {
    std::string command;
    nlohmann::json config;  // effective option values
    std::map<std::string, std::string> input_digests;
    std::string tool_version = kToolVersion;
    std::uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;
};

// FNV-1a over the file bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

std::string iso8601_utc_now();

// Writes <out_dir>/manifest.json.
void write_manifest(const std::filesystem::path& out_dir, const RunManifest& manifest);

}  // namespace detkit
