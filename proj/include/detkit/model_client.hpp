#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "detkit/codec.hpp"
#include "detkit/rng.hpp"
#include "detkit/types.hpp"

namespace detkit {

// One class-specific generation call. `category_id` is the query category;
// remote clients do not send it (the prompt already carries the category),
// the simulated model uses it to look up ground truth.
struct GenerateRequest {
    ImageId image_id = 0;
    std::string image_ref;   // file name or server-resolvable path
    std::string prompt;
    CategoryId category_id = 0;
    nlohmann::json sampling;  // opaque passthrough, never interpreted here
};

// Text-generation endpoint abstraction. Implementations must be safe to
// call from multiple threads.
class ModelClient {
public:
    virtual ~ModelClient() = default;
    virtual std::string generate(const GenerateRequest& request) = 0;
};

struct EndpointConfig {
    std::string base_url;       // e.g. http://localhost:8080
    double timeout_seconds = 30.0;
    std::size_t retries = 2;    // additional attempts after the first
    nlohmann::json sampling;    // forwarded verbatim in every request

    void check() const;  // throws ConfigError on invalid values
};

// POSTs {image, prompt, sampling} to <base_url>/generate and expects
// {"text": ...} back. Retries transport and non-200 failures, then throws
// EndpointError.
class HttpModelClient : public ModelClient {
public:
    explicit HttpModelClient(EndpointConfig cfg);
    std::string generate(const GenerateRequest& request) override;

private:
    EndpointConfig cfg_;
};

// Noise model for the built-in simulated detector-in-a-language-model.
struct SimModelConfig {
    std::uint64_t seed = 0;
    std::size_t proposal_cap = 100;      // boxes emitted per category before stopping
    double center_jitter_sigma = 0.0;    // gaussian sigma as a ratio of box size
    double miss_rate = 0.0;              // probability of dropping a GT box
    double false_positive_rate = 0.0;    // expected spurious boxes per image
    double score_noise_sigma = 0.0;      // score perturbation width

    void check() const;
};

// Renders a simulated answer for one (image, category): ground-truth boxes
// of the category are dropped at miss_rate, jittered, given perturbed
// scores; Poisson(false_positive_rate * category_share) spurious boxes are
// appended; the list is truncated to proposal_cap and encoded. A zero-noise
// configuration with a large enough cap reproduces the ground truth exactly.
std::string simulate_response(const std::vector<Detection>& gt_boxes, const ImageRecord& image,
                              CategoryId category, const SimModelConfig& cfg,
                              double category_share, Rng& rng, const TokenCodecConfig& codec);

// Deterministic offline stand-in for a remote model: every response is a
// pure function of (seed, image_id, category_id), so concurrent runs replay
// identically.
class SimulatedModel : public ModelClient {
public:
    SimulatedModel(const DetectionDataset& ds, SimModelConfig cfg, TokenCodecConfig codec);
    std::string generate(const GenerateRequest& request) override;

private:
    std::map<std::pair<ImageId, CategoryId>, std::vector<Detection>> gt_;
    std::map<ImageId, ImageRecord> images_;
    SimModelConfig cfg_;
    TokenCodecConfig codec_;
    double category_share_ = 0.0;
};

}  // namespace detkit
