#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "detkit/types.hpp"

namespace detkit {

// COCO-protocol constants. Thresholds 0.50:0.05:0.95, 101 recall points,
// at most 100 detections per (image, category), area strata at 32^2 / 96^2.
struct EvalConfig {
    std::vector<double> iou_thresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                          0.75, 0.80, 0.85, 0.90, 0.95};
    std::size_t recall_points = 101;
    std::size_t max_detections = 100;
    double small_area_max = 32.0 * 32.0;
    double medium_area_max = 96.0 * 96.0;
    // Optional pre-filter on detection scores; unset = standard COCO
    // behaviour (no threshold).
    std::optional<double> score_threshold;

    void check() const;  // throws ConfigError on invalid values
};

// Precision/recall curve of one category at one IoU threshold. `staircase`
// holds one point per counted detection, in rank order; `interpolated` holds
// the recall_points-sampled curve with the precision envelope applied.
// `defined` is false when the category has no ground truth.
struct PRCurve {
    CategoryId category_id = 0;
    double iou_threshold = 0.0;
    bool defined = false;
    std::vector<std::pair<double, double>> staircase;     // (recall, precision)
    std::vector<std::pair<double, double>> interpolated;  // (recall, precision)
};

// Aggregate metrics. std::nullopt marks strata with no ground truth;
// undefined strata are excluded from every mean, never treated as zero.
struct EvalResult {
    std::optional<double> ap;
    std::optional<double> ap50;
    std::optional<double> ap75;
    std::optional<double> ap_small;
    std::optional<double> ap_medium;
    std::optional<double> ap_large;
    std::optional<double> ar_at_100;
    std::map<CategoryId, std::optional<double>> per_category;

    // Match totals at IoU 0.5, all areas, after max_detections truncation.
    struct Counts {
        std::size_t matched_detections = 0;
        std::size_t unmatched_detections = 0;
        std::size_t matched_gts = 0;
        std::size_t missed_gts = 0;
    } counts;
};

enum class DetectionFlag { kCorrect, kWrongBox, kWrongLabel };
enum class GtFlag { kFound, kMissed, kIgnoredCrowd };

// Per-box correctness under the fixed rule: a detection is correct iff it
// matches a same-category GT with IoU > 0.5 (greedy by score within the
// category). Unmatched detections overlapping any GT of another category
// above 0.5 are wrong_label, otherwise wrong_box.
struct CorrectnessFlags {
    std::vector<DetectionFlag> per_detection;  // parallel to the input detections
    std::vector<GtFlag> per_gt;                // parallel to ds.annotations

    std::size_t correct = 0;
    std::size_t wrong_box = 0;
    std::size_t wrong_label = 0;
    std::size_t missed = 0;
};

// Full COCO-style evaluation. Crowd ground truth is excluded entirely (a
// documented deviation from the reference tool's crowd-ignore semantics).
// Throws ValidationError when prediction ids do not resolve against ds.
EvalResult evaluate(const std::vector<Detection>& preds, const DetectionDataset& ds,
                    const EvalConfig& cfg = {});

PRCurve pr_curve(const std::vector<Detection>& preds, const DetectionDataset& ds,
                 CategoryId category, double iou_threshold, const EvalConfig& cfg = {});

CorrectnessFlags correctness_flags(const std::vector<Detection>& preds,
                                   const DetectionDataset& ds);

// Display-only filtering: drop detections with score < 0.5, then class-wise
// NMS at 0.5 within each image. Order: ascending image id, then by score.
std::vector<Detection> postprocess_for_visualization(const std::vector<Detection>& preds);

}  // namespace detkit
