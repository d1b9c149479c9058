#include "detkit/model_client.hpp"

#include <algorithm>
#include <cmath>

#include <httplib.h>

#include "detkit/errors.hpp"

namespace detkit {

namespace {

constexpr std::uint64_t kStreamSim = 0x51;

}  // namespace

void EndpointConfig::check() const {
    if (base_url.empty()) throw ConfigError("endpoint: base_url must be set");
    if (timeout_seconds <= 0.0) throw ConfigError("endpoint: timeout must be positive");
}

HttpModelClient::HttpModelClient(EndpointConfig cfg) : cfg_(std::move(cfg)) { cfg_.check(); }

std::string HttpModelClient::generate(const GenerateRequest& request) {
    const nlohmann::json body = {
        {"image", request.image_ref}, {"prompt", request.prompt}, {"sampling", request.sampling}};
    const std::string payload = body.dump();

    std::string last_error;
    for (std::size_t attempt = 0; attempt <= cfg_.retries; ++attempt) {
        // A fresh client per call keeps this safe under the worker pool.
        httplib::Client client(cfg_.base_url);
        const auto seconds = static_cast<time_t>(cfg_.timeout_seconds);
        const auto usec = static_cast<time_t>((cfg_.timeout_seconds - double(seconds)) * 1e6);
        client.set_connection_timeout(seconds, usec);
        client.set_read_timeout(seconds, usec);
        client.set_write_timeout(seconds, usec);

        auto res = client.Post("/generate", payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        try {
            const auto doc = nlohmann::json::parse(res->body);
            return doc.at("text").get<std::string>();
        } catch (const std::exception& e) {
            last_error = std::string("bad response body: ") + e.what();
        }
    }
    throw EndpointError("generate failed after " + std::to_string(cfg_.retries + 1) +
                        " attempt(s): " + last_error);
}

void SimModelConfig::check() const {
    if (miss_rate < 0.0 || miss_rate > 1.0)
        throw ConfigError("sim: miss_rate must lie in [0,1]");
    if (center_jitter_sigma < 0.0) throw ConfigError("sim: center_jitter_sigma must be >= 0");
    if (false_positive_rate < 0.0) throw ConfigError("sim: false_positive_rate must be >= 0");
    if (score_noise_sigma < 0.0) throw ConfigError("sim: score_noise_sigma must be >= 0");
}

std::string simulate_response(const std::vector<Detection>& gt_boxes, const ImageRecord& image,
                              CategoryId category, const SimModelConfig& cfg,
                              double category_share, Rng& rng, const TokenCodecConfig& codec) {
    cfg.check();
    std::vector<Detection> emitted;

    for (const auto& gt : gt_boxes) {
        const bool missed = rng.bernoulli(cfg.miss_rate);
        const double w = gt.bbox.width();
        const double h = gt.bbox.height();
        const double dx = rng.normal(0.0, cfg.center_jitter_sigma) * w;
        const double dy = rng.normal(0.0, cfg.center_jitter_sigma) * h;
        const double sw = std::max(0.05, 1.0 + rng.normal(0.0, cfg.center_jitter_sigma));
        const double sh = std::max(0.05, 1.0 + rng.normal(0.0, cfg.center_jitter_sigma));
        const double score =
            std::clamp(1.0 - std::abs(rng.normal(0.0, cfg.score_noise_sigma)), 0.0, 1.0);
        if (missed) continue;

        const double cx = (gt.bbox.x1 + gt.bbox.x2) / 2.0 + dx;
        const double cy = (gt.bbox.y1 + gt.bbox.y2) / 2.0 + dy;
        const BBox box = BBox{cx - w * sw / 2.0, cy - h * sh / 2.0, cx + w * sw / 2.0,
                              cy + h * sh / 2.0}
                             .clamped(image.width, image.height);
        if (!box.valid()) continue;
        emitted.push_back({image.id, gt.category_id, box, score});
    }

    const std::size_t spurious = rng.poisson(cfg.false_positive_rate * category_share);
    for (std::size_t i = 0; i < spurious; ++i) {
        const double cx = rng.uniform(0.0, image.width);
        const double cy = rng.uniform(0.0, image.height);
        const double w = rng.uniform(0.05, 0.3) * image.width;
        const double h = rng.uniform(0.05, 0.3) * image.height;
        const double score = rng.next_double();
        const BBox box =
            BBox{cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0}.clamped(image.width,
                                                                                 image.height);
        if (!box.valid()) continue;
        emitted.push_back({image.id, category, box, score});
    }

    if (emitted.size() > cfg.proposal_cap) emitted.resize(cfg.proposal_cap);
    return encode_answer(emitted, image, codec);
}

SimulatedModel::SimulatedModel(const DetectionDataset& ds, SimModelConfig cfg,
                               TokenCodecConfig codec)
    : cfg_(cfg), codec_(codec) {
    cfg_.check();
    codec_.check();
    for (const auto& im : ds.images) images_[im.id] = im;
    for (const auto& a : ds.annotations) {
        if (a.iscrowd) continue;
        gt_[{a.image_id, a.category_id}].push_back({a.image_id, a.category_id, a.bbox, 1.0});
    }
    category_share_ = ds.categories.empty() ? 0.0 : 1.0 / static_cast<double>(ds.categories.size());
}

std::string SimulatedModel::generate(const GenerateRequest& request) {
    const auto img_it = images_.find(request.image_id);
    if (img_it == images_.end())
        throw EndpointError("simulated model: unknown image " + std::to_string(request.image_id));

    static const std::vector<Detection> kNone;
    const auto gt_it = gt_.find({request.image_id, request.category_id});
    const auto& boxes = gt_it == gt_.end() ? kNone : gt_it->second;

    Rng rng(derive_seed(cfg_.seed, kStreamSim, static_cast<std::uint64_t>(request.image_id),
                        static_cast<std::uint64_t>(request.category_id)));
    return simulate_response(boxes, img_it->second, request.category_id, cfg_, category_share_,
                             rng, codec_);
}

}  // namespace detkit
