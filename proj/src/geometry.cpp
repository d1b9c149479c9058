#include "detkit/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace detkit {

double iou(const BBox& a, const BBox& b) {
    if (!a.valid() || !b.valid()) throw std::domain_error("iou: degenerate box");
    const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return inter / uni;
}

namespace {

// (score desc, index asc) visit order shared by nms and greedy_match.
std::vector<std::size_t> score_order(std::size_t n, const auto& score_of) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return score_of(a) > score_of(b);
    });
    return order;
}

}  // namespace

std::vector<std::size_t> nms_keep_indices(const std::vector<ScoredBox>& boxes,
                                          double iou_threshold, bool class_wise) {
    const auto order = score_order(boxes.size(), [&](std::size_t i) { return boxes[i].score; });
    std::vector<std::size_t> kept;
    for (std::size_t idx : order) {
        const ScoredBox& cand = boxes[idx];
        bool suppressed = false;
        for (std::size_t k : kept) {
            if (class_wise && boxes[k].category_id != cand.category_id) continue;
            if (iou(boxes[k].box, cand.box) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(idx);
    }
    return kept;
}

std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold,
                           bool class_wise) {
    std::vector<ScoredBox> boxes;
    boxes.reserve(dets.size());
    for (const auto& d : dets) boxes.push_back({d.bbox, d.score, d.category_id});
    std::vector<Detection> out;
    for (std::size_t i : nms_keep_indices(boxes, iou_threshold, class_wise))
        out.push_back(dets[i]);
    return out;
}

MatchResult greedy_match(const std::vector<Detection>& preds,
                         const std::vector<GroundTruthAnnotation>& gts,
                         double iou_threshold) {
    MatchResult result;
    std::vector<bool> gt_taken(gts.size(), false);
    std::vector<bool> pred_matched(preds.size(), false);

    const auto order = score_order(preds.size(), [&](std::size_t i) { return preds[i].score; });
    for (std::size_t pi : order) {
        double best_iou = 0.0;
        std::size_t best_gt = gts.size();
        for (std::size_t gi = 0; gi < gts.size(); ++gi) {
            if (gt_taken[gi]) continue;
            const double v = iou(preds[pi].bbox, gts[gi].bbox);
            if (v >= iou_threshold && v > best_iou) {
                best_iou = v;
                best_gt = gi;
            }
        }
        if (best_gt != gts.size()) {
            gt_taken[best_gt] = true;
            pred_matched[pi] = true;
            result.pairs.push_back({pi, best_gt, best_iou});
        }
    }
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (!pred_matched[i]) result.unmatched_predictions.push_back(i);
    for (std::size_t i = 0; i < gts.size(); ++i)
        if (!gt_taken[i]) result.unmatched_gts.push_back(i);
    return result;
}

}  // namespace detkit
