#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "detkit/model_client.hpp"

namespace detkit {

// Flat `key = value` document (TOML subset: one assignment per line, '#'
// comments, optional quotes around string values). Throws ParseError on
// anything else.
std::map<std::string, std::string> load_kv_config(const std::filesystem::path& path);

// Typed view of a simulated-model config file. Unknown keys are rejected.
// Recognized keys: seed, proposal_cap, center_jitter_sigma, miss_rate,
// false_positive_rate, score_noise_sigma.
SimModelConfig load_sim_config(const std::filesystem::path& path);

}  // namespace detkit
