#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "detkit/codec.hpp"
#include "detkit/model_client.hpp"
#include "detkit/prompt.hpp"
#include "detkit/types.hpp"

namespace detkit {

struct InferenceConfig {
    std::string prompt_template = kDefaultPromptTemplate;
    nlohmann::json sampling;  // forwarded into every request untouched
};

struct CategoryFailure {
    ImageId image_id = 0;
    CategoryId category_id = 0;
    std::string error;
};

// One class-specific pass over an image: exactly one generate call per
// category in the label set, each response parsed with the query category
// attached. Failed categories are recorded and skipped; detections come
// back in (category order, box order).
struct DetectImageResult {
    std::vector<Detection> detections;
    std::size_t requests = 0;
    std::size_t parse_errors = 0;
    std::vector<CategoryFailure> failures;

    bool all_failed(const CategorySet& categories) const {
        return !categories.empty() && failures.size() == categories.size();
    }
};

DetectImageResult detect_image(ModelClient& client, const ImageRecord& image,
                               const CategorySet& categories, const TokenCodecConfig& codec,
                               const InferenceConfig& cfg);

struct ImageRunStats {
    ImageId image_id = 0;
    double latency_ms = 0.0;
    std::size_t parse_errors = 0;
    std::size_t failures = 0;
};

struct RunReport {
    std::size_t images = 0;
    std::size_t requests = 0;
    std::size_t parse_errors = 0;
    std::size_t failed_images = 0;  // images where every category failed
    std::vector<ImageRunStats> per_image;
    std::vector<CategoryFailure> failures;

    bool ok() const { return failures.empty(); }
    nlohmann::json to_json() const;
};

struct RunResult {
    std::vector<Detection> predictions;
    RunReport report;
};

// Runs detect_image over the whole dataset with a bounded worker pool.
// Results are buffered per image and assembled in ascending image-id order,
// so the prediction list (and any file written from it) is identical at
// every parallelism level.
RunResult run_dataset(ModelClient& client, const DetectionDataset& ds,
                      const TokenCodecConfig& codec, const InferenceConfig& cfg,
                      std::size_t parallelism);

}  // namespace detkit
