#include "detkit/orchestrator.hpp"

#include <algorithm>
#include <chrono>

#include "detkit/parallel.hpp"

namespace detkit {

DetectImageResult detect_image(ModelClient& client, const ImageRecord& image,
                               const CategorySet& categories, const TokenCodecConfig& codec,
                               const InferenceConfig& cfg) {
    DetectImageResult result;
    for (const auto& cat : categories) {
        GenerateRequest request;
        request.image_id = image.id;
        request.image_ref = image.file_name;
        request.prompt = build_prompt(cat.name, cfg.prompt_template);
        request.category_id = cat.id;
        request.sampling = cfg.sampling;

        ++result.requests;
        std::string text;
        try {
            text = client.generate(request);
        } catch (const std::exception& e) {
            result.failures.push_back({image.id, cat.id, e.what()});
            continue;
        }

        const ParseOutcome outcome = parse_answer(text, image, cat.id, codec);
        result.parse_errors += outcome.errors.size();
        result.detections.insert(result.detections.end(), outcome.detections.begin(),
                                 outcome.detections.end());
    }
    return result;
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json per_image_json = nlohmann::json::array();
    for (const auto& s : per_image)
        per_image_json.push_back({{"image_id", s.image_id},
                                  {"latency_ms", s.latency_ms},
                                  {"parse_errors", s.parse_errors},
                                  {"failures", s.failures}});
    nlohmann::json failures_json = nlohmann::json::array();
    for (const auto& f : failures)
        failures_json.push_back(
            {{"image_id", f.image_id}, {"category_id", f.category_id}, {"error", f.error}});
    return {{"images", images},
            {"requests", requests},
            {"parse_errors", parse_errors},
            {"failed_images", failed_images},
            {"per_image", std::move(per_image_json)},
            {"failures", std::move(failures_json)}};
}

RunResult run_dataset(ModelClient& client, const DetectionDataset& ds,
                      const TokenCodecConfig& codec, const InferenceConfig& cfg,
                      std::size_t parallelism) {
    std::vector<const ImageRecord*> images;
    images.reserve(ds.images.size());
    for (const auto& im : ds.images) images.push_back(&im);
    std::sort(images.begin(), images.end(),
              [](const ImageRecord* a, const ImageRecord* b) { return a->id < b->id; });

    std::vector<DetectImageResult> slots(images.size());
    std::vector<double> latencies(images.size(), 0.0);
    parallel_for(images.size(), parallelism, [&](std::size_t i) {
        const auto start = std::chrono::steady_clock::now();
        slots[i] = detect_image(client, *images[i], ds.categories, codec, cfg);
        latencies[i] = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
    });

    RunResult result;
    result.report.images = images.size();
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& slot = slots[i];
        result.predictions.insert(result.predictions.end(), slot.detections.begin(),
                                  slot.detections.end());
        result.report.requests += slot.requests;
        result.report.parse_errors += slot.parse_errors;
        result.report.failures.insert(result.report.failures.end(), slot.failures.begin(),
                                      slot.failures.end());
        if (slot.all_failed(ds.categories)) ++result.report.failed_images;
        result.report.per_image.push_back(
            {images[i]->id, latencies[i], slot.parse_errors, slot.failures.size()});
    }
    return result;
}

}  // namespace detkit
