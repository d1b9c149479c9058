#include "detkit/config_file.hpp"

#include <cstdlib>
#include <fstream>

#include "detkit/errors.hpp"

namespace detkit {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

double to_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw ParseError("config: key '" + key + "' has non-numeric value '" + value + "'");
    return v;
}

}  // namespace

std::map<std::string, std::string> load_kv_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = unquote(trim(line.substr(eq + 1)));
        if (key.empty())
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

SimModelConfig load_sim_config(const std::filesystem::path& path) {
    SimModelConfig cfg;
    for (const auto& [key, value] : load_kv_config(path)) {
        if (key == "seed")
            cfg.seed = static_cast<std::uint64_t>(std::strtoull(value.c_str(), nullptr, 10));
        else if (key == "proposal_cap")
            cfg.proposal_cap = static_cast<std::size_t>(to_double(key, value));
        else if (key == "center_jitter_sigma")
            cfg.center_jitter_sigma = to_double(key, value);
        else if (key == "miss_rate")
            cfg.miss_rate = to_double(key, value);
        else if (key == "false_positive_rate")
            cfg.false_positive_rate = to_double(key, value);
        else if (key == "score_noise_sigma")
            cfg.score_noise_sigma = to_double(key, value);
        else
            throw ConfigError("simulate config: unknown key '" + key + "'");
    }
    cfg.check();
    return cfg;
}

}  // namespace detkit
