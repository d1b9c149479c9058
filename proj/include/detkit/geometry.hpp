#pragma once

#include <cstddef>
#include <vector>

#include "detkit/types.hpp"

namespace detkit {

// Intersection over union in [0,1]. Zero-area intersections contribute 0,
// including boxes that only share an edge. Throws std::domain_error on a
// degenerate input box.
double iou(const BBox& a, const BBox& b);

// One scored, categorised box for suppression; decoupled from Detection so
// merged ground-truth/pseudo unions can go through the same code.
struct ScoredBox {
    BBox box;
    double score = 0.0;
    CategoryId category_id = 0;
};

// Greedy non-maximum suppression over an arbitrary candidate list. Candidates
// are visited in (score desc, input index asc) order; a candidate is dropped
// when a kept candidate (same class when class_wise) overlaps it with
// IoU > iou_threshold. Returns indices into `boxes` of the kept candidates,
// ordered by descending score (ties by input index).
std::vector<std::size_t> nms_keep_indices(const std::vector<ScoredBox>& boxes,
                                          double iou_threshold, bool class_wise);

// Non-maximum suppression over detections. Output is sorted by descending
// score, ties by input order. Empty input gives empty output.
std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold,
                           bool class_wise);

struct MatchPair {
    std::size_t prediction_index = 0;
    std::size_t gt_index = 0;
    double iou = 0.0;
};

struct MatchResult {
    std::vector<MatchPair> pairs;
    std::vector<std::size_t> unmatched_predictions;
    std::vector<std::size_t> unmatched_gts;
};

// Greedy score-ordered matching: predictions are visited in (score desc,
// input index asc) order and each claims the highest-IoU still-unmatched GT
// with IoU >= iou_threshold. When two GTs tie on IoU, the lower GT index
// wins; zero-overlap pairs never match. Pairs are reported in the order
// predictions were matched.
MatchResult greedy_match(const std::vector<Detection>& preds,
                         const std::vector<GroundTruthAnnotation>& gts,
                         double iou_threshold);

}  // namespace detkit
